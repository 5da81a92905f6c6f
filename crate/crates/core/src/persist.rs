//! Binary artifact formats. All integers are u32 and all values f32,
//! little-endian.
//!
//! * `TPLE` embeddings: magic, version byte, N, M, d, then N·d project
//!   values and M·d library values, row-major.
//! * `TPLR` representatives: the same layout with N = 0. Libraries without
//!   a representative are stored as zero rows.
//! * `TPLQ` Q-network: magic, version byte, layer count, (rows, cols) per
//!   layer, then each layer's weights followed by its bias.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::agent::QNetwork;
use crate::coldstart::RepresentativeTable;
use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};

pub const VERSION: u8 = 1;
const EMBED_MAGIC: &[u8; 4] = b"TPLE";
const REPS_MAGIC: &[u8; 4] = b"TPLR";
const QNET_MAGIC: &[u8; 4] = b"TPLQ";

fn put_u32<W: Write>(out: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_values<'a, W: Write>(out: &mut W, values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    for v in values {
        out.write_all(&(*v as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_exact<R: Read>(src: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    src.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

fn get_u32<R: Read>(src: &mut R) -> Result<usize> {
    let mut b = [0u8; 4];
    read_exact(src, &mut b, "header")?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn get_values<R: Read>(src: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n.checked_mul(4).ok_or_else(|| Error::Format("size overflow".into()))?];
    read_exact(src, &mut bytes, "payload")?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

fn expect_header<R: Read>(src: &mut R, magic: &[u8; 4]) -> Result<()> {
    let mut head = [0u8; 5];
    read_exact(src, &mut head, "header")?;
    if &head[..4] != magic {
        return Err(Error::Format(format!(
            "expected magic {}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&head[..4])
        )));
    }
    if head[4] != VERSION {
        return Err(Error::Format(format!("unsupported version {}", head[4])));
    }
    Ok(())
}

fn expect_end<R: Read>(src: &mut R) -> Result<()> {
    let mut probe = [0u8; 1];
    match src.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(Error::Format("trailing bytes after payload".into())),
    }
}

fn write_rows<W: Write>(mut out: W, magic: &[u8; 4], projects: &Array2<f64>, libraries: &Array2<f64>) -> Result<()> {
    out.write_all(magic)?;
    out.write_all(&[VERSION])?;
    put_u32(&mut out, projects.nrows())?;
    put_u32(&mut out, libraries.nrows())?;
    put_u32(&mut out, libraries.ncols())?;
    put_values(&mut out, projects.iter())?;
    put_values(&mut out, libraries.iter())?;
    out.flush()?;
    Ok(())
}

fn read_rows<R: Read>(mut src: R, magic: &[u8; 4]) -> Result<(Array2<f64>, Array2<f64>)> {
    expect_header(&mut src, magic)?;
    let n = get_u32(&mut src)?;
    let m = get_u32(&mut src)?;
    let d = get_u32(&mut src)?;
    let projects = Array2::from_shape_vec((n, d), get_values(&mut src, n * d)?).expect("sized");
    let libraries = Array2::from_shape_vec((m, d), get_values(&mut src, m * d)?).expect("sized");
    expect_end(&mut src)?;
    Ok((projects, libraries))
}

pub fn write_embeddings<W: Write>(out: W, table: &EmbeddingTable) -> Result<()> {
    write_rows(out, EMBED_MAGIC, &table.projects, &table.libraries)
}

pub fn read_embeddings<R: Read>(src: R) -> Result<EmbeddingTable> {
    let (p, l) = read_rows(src, EMBED_MAGIC)?;
    Ok(EmbeddingTable::new(p, l))
}

pub fn write_representatives<W: Write>(out: W, reps: &RepresentativeTable) -> Result<()> {
    let mut rows = reps.matrix().clone();
    for (l, mut row) in rows.rows_mut().into_iter().enumerate() {
        if !reps.is_available(l as u32) {
            row.fill(0.0);
        }
    }
    write_rows(out, REPS_MAGIC, &Array2::zeros((0, reps.dim())), &rows)
}

/// Read a representative table; all-zero rows come back unavailable. The
/// blend weight is not part of the format and must be supplied.
pub fn read_representatives<R: Read>(src: R, lambda: f64) -> Result<RepresentativeTable> {
    let (p, rows) = read_rows(src, REPS_MAGIC)?;
    if p.nrows() != 0 {
        return Err(Error::Format("representative file must have zero project rows".into()));
    }
    let available = rows.rows().into_iter().map(|r| r.iter().any(|&v| v != 0.0)).collect();
    Ok(RepresentativeTable::from_parts(rows, available, lambda))
}

pub fn write_qnetwork<W: Write>(mut out: W, net: &QNetwork) -> Result<()> {
    out.write_all(QNET_MAGIC)?;
    out.write_all(&[VERSION])?;
    let shapes = net.layer_shapes();
    put_u32(&mut out, shapes.len())?;
    for (rows, cols) in shapes {
        put_u32(&mut out, rows)?;
        put_u32(&mut out, cols)?;
    }
    put_values(&mut out, net.params())?;
    out.flush()?;
    Ok(())
}

pub fn read_qnetwork<R: Read>(mut src: R) -> Result<QNetwork> {
    expect_header(&mut src, QNET_MAGIC)?;
    let layers = get_u32(&mut src)?;
    if layers != 3 {
        return Err(Error::Format(format!("expected 3 layers, found {layers}")));
    }
    let mut shapes = [(0, 0); 3];
    for s in shapes.iter_mut() {
        *s = (get_u32(&mut src)?, get_u32(&mut src)?);
    }
    let [(hidden, input), (one, h2), (actions, h3)] = shapes;
    if one != 1 || h2 != hidden || h3 != hidden {
        return Err(Error::Format(format!("inconsistent layer shapes {shapes:?}")));
    }
    let count: usize = shapes.iter().map(|(r, c)| r * c + r).sum();
    let params = get_values(&mut src, count)?;
    expect_end(&mut src)?;
    QNetwork::from_params(input, hidden, actions, params)
        .ok_or_else(|| Error::Format("parameter count does not match layer shapes".into()))
}

pub fn save<P, F>(path: P, write: F) -> Result<()>
where
    P: AsRef<Path>,
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut out = BufWriter::new(File::create(path)?);
    write(&mut out)?;
    out.flush()?;
    Ok(())
}

pub fn open<P: AsRef<Path>>(path: P) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file<P: AsRef<Path>>(path: P) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}
