//! Model directory layout: binary tables, id vocabularies, training logs
//! and a manifest holding the resolved configuration and content hashes.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::QNetwork;
use crate::coldstart::RepresentativeTable;
use crate::config::RunConfig;
use crate::data::InteractionDataset;
use crate::error::{Error, Result};
use crate::persist;
use crate::pipeline::TrainedModel;

pub const EMBEDDINGS: &str = "embeddings.tple";
pub const REPRESENTATIVES: &str = "representatives.tplr";
pub const QNETWORK: &str = "qnetwork.tplq";
pub const LIBRARIES: &str = "libraries.txt";
pub const PROJECTS: &str = "projects.txt";
pub const AGENT_LOG: &str = "agent_log.csv";
pub const EMBED_LOG: &str = "embed_log.csv";
pub const MANIFEST: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub projects: usize,
    pub libraries: usize,
    pub interactions: usize,
    /// Hash of the interaction list in canonical order.
    pub sha256: String,
}

impl DatasetInfo {
    pub fn of(ds: &InteractionDataset) -> Self {
        let mut canon = String::new();
        for (p, l) in ds.interactions() {
            canon.push_str(ds.project_id(p));
            canon.push('\t');
            canon.push_str(ds.library_id(l));
            canon.push('\n');
        }
        Self {
            projects: ds.n_projects(),
            libraries: ds.n_libraries(),
            interactions: ds.n_interactions(),
            sha256: persist::sha256_hex(canon.as_bytes()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset: DatasetInfo,
    /// File name to SHA-256 of its contents.
    pub artifacts: BTreeMap<String, String>,
    pub config: RunConfig,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {}", path.display(), e.message())))
    }
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = String::new();
    for l in lines {
        text.push_str(l);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// Write every artifact of a trained model into `dir` and return the
/// manifest that was written alongside.
pub fn save_model(dir: &Path, model: &TrainedModel, train: &InteractionDataset, cfg: &RunConfig) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    persist::save(dir.join(EMBEDDINGS), |w| persist::write_embeddings(w, &model.embeddings))?;
    persist::save(dir.join(REPRESENTATIVES), |w| {
        persist::write_representatives(w, &model.representatives)
    })?;
    persist::save(dir.join(QNETWORK), |w| persist::write_qnetwork(w, &model.network))?;
    write_lines(&dir.join(LIBRARIES), train.library_ids())?;
    write_lines(&dir.join(PROJECTS), train.project_ids())?;
    persist::save(dir.join(AGENT_LOG), |w| Ok(model.agent_log.write_csv(w)?))?;
    persist::save(dir.join(EMBED_LOG), |w| {
        writeln!(w, "epoch,loss,validation_recall")?;
        let r = &model.embed_report;
        for (e, loss) in r.epoch_loss.iter().enumerate() {
            let recall = r.validation_recall.get(e).copied().unwrap_or(f64::NAN);
            writeln!(w, "{e},{loss:.9e},{recall:.6}")?;
        }
        Ok(())
    })?;

    let mut artifacts = BTreeMap::new();
    for name in [EMBEDDINGS, REPRESENTATIVES, QNETWORK, LIBRARIES, PROJECTS, AGENT_LOG, EMBED_LOG] {
        artifacts.insert(name.to_owned(), persist::sha256_file(dir.join(name))?);
    }
    let manifest = Manifest {
        dataset: DatasetInfo::of(train),
        artifacts,
        config: cfg.clone(),
    };
    manifest.write(&dir.join(MANIFEST))?;
    Ok(manifest)
}

/// What `recommend` needs from a model directory.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub network: QNetwork,
    pub representatives: RepresentativeTable,
    pub library_ids: Vec<String>,
    lookup: HashMap<String, u32>,
}

impl LoadedModel {
    pub fn new(network: QNetwork, representatives: RepresentativeTable, library_ids: Vec<String>) -> Self {
        let lookup = library_ids.iter().enumerate().map(|(i, id)| (id.clone(), i as u32)).collect();
        Self {
            network,
            representatives,
            library_ids,
            lookup,
        }
    }

    pub fn library_index(&self, id: &str) -> Option<u32> {
        self.lookup.get(id).copied()
    }

    /// Resolve ids to indices, or list every id that is not in the catalogue.
    pub fn resolve(&self, ids: &[String]) -> std::result::Result<Vec<u32>, Vec<String>> {
        let unknown: Vec<String> = ids.iter().filter(|id| self.library_index(id).is_none()).cloned().collect();
        if !unknown.is_empty() {
            return Err(unknown);
        }
        Ok(ids.iter().map(|id| self.lookup[id]).collect())
    }
}

pub fn load_model(dir: &Path) -> Result<LoadedModel> {
    let manifest = Manifest::read(&dir.join(MANIFEST))?;
    let network = persist::read_qnetwork(persist::open(dir.join(QNETWORK))?)?;
    let representatives = persist::read_representatives(persist::open(dir.join(REPRESENTATIVES))?, manifest.config.lambda)?;
    let library_ids: Vec<String> = fs::read_to_string(dir.join(LIBRARIES))?.lines().map(str::to_owned).collect();
    if library_ids.len() != representatives.n_libraries() || network.n_actions() != library_ids.len() {
        return Err(Error::Format(format!(
            "{} lists {} libraries but the model has {} actions",
            LIBRARIES,
            library_ids.len(),
            network.n_actions()
        )));
    }
    if network.input_dim() != representatives.dim() {
        return Err(Error::Format("Q-network input does not match representative dimension".into()));
    }
    Ok(LoadedModel::new(network, representatives, library_ids))
}
