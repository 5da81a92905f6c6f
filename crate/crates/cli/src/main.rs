use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tplrec_core::agent::{recommend, RecommendMode};
use tplrec_core::artifacts::{self, DatasetInfo, Manifest};
use tplrec_core::config::{parse_overrides, RunConfig};
use tplrec_core::data::{long_tail_histogram, InteractionDataset, PopularityTable};
use tplrec_core::eval::{run_protocol, write_kv, write_table};
use tplrec_core::pipeline::train_model;
use tplrec_core::{persist, Error, ErrorClass};

const REPORT_TABLE: &str = "report.txt";
const REPORT_KV: &str = "report.csv";

#[derive(Parser)]
#[command(name = "tplrec", version, about = "Third-party library recommendation for cold-start projects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an interaction file and print its summary.
    Ingest {
        /// Tab-separated `project<TAB>library` lines; `#` starts a comment.
        path: PathBuf,
    },
    /// Train embeddings, representatives and the agent on a whole dataset.
    Train(RunArgs),
    /// Rank libraries for a set of known libraries.
    Recommend {
        /// Directory written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Known library ids, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        query: Vec<String>,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
        /// `sequential` or `one-shot`.
        #[arg(long, default_value = "sequential")]
        mode: String,
    },
    /// Run a cross-validated evaluation protocol.
    Evaluate(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides as `--key value` pairs, applied after the file.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

enum Failure {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e.class() {
            ErrorClass::Usage => Failure::Usage(e.to_string()),
            ErrorClass::Data => Failure::Data(e.to_string()),
            ErrorClass::Numeric => Failure::Numeric(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Ingest { path } => ingest(&path),
        Command::Train(args) => train(&args),
        Command::Recommend { model, query, k, mode } => recommend_cmd(&model, &query, k, &mode),
        Command::Evaluate(args) => evaluate(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = f.exit_code();
            let (Failure::Usage(msg) | Failure::Data(msg) | Failure::Numeric(msg)) = f;
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn load_dataset(path: &Path) -> Result<(InteractionDataset, usize), Failure> {
    let file = File::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let (ds, stats) = InteractionDataset::ingest(BufReader::new(file))
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Ok((ds, stats.duplicates))
}

fn ingest(path: &Path) -> CmdResult {
    let (ds, duplicates) = load_dataset(path)?;
    let hist = long_tail_histogram(&ds);
    let mut out = io::stdout().lock();
    writeln!(out, "projects\t{}", ds.n_projects())?;
    writeln!(out, "libraries\t{}", ds.n_libraries())?;
    writeln!(out, "interactions\t{}", ds.n_interactions())?;
    writeln!(out, "duplicates\t{duplicates}")?;
    let single = hist.iter().find(|(c, _)| *c == 1).map_or(0, |(_, n)| *n);
    writeln!(out, "single-occurrence libraries\t{single}")?;
    writeln!(out, "# projects-per-library\tlibraries")?;
    for (count, libraries) in hist {
        writeln!(out, "{count}\t{libraries}")?;
    }
    Ok(())
}

fn run_config(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut overrides = parse_overrides(&args.overrides)?;
    let mut config = args.config.clone();
    overrides.retain(|(k, v)| {
        if k == "config" {
            config = Some(PathBuf::from(v));
            false
        } else {
            true
        }
    });
    Ok(RunConfig::load(config.as_deref(), &overrides)?)
}

fn dataset_of(cfg: &RunConfig) -> Result<InteractionDataset, Failure> {
    let path = cfg
        .dataset
        .as_deref()
        .ok_or_else(|| Failure::Usage("no dataset given (set `dataset` or pass --dataset PATH)".into()))?;
    Ok(load_dataset(path)?.0)
}

fn train(args: &RunArgs) -> CmdResult {
    let cfg = run_config(args)?;
    let ds = dataset_of(&cfg)?;
    let pop = PopularityTable::from_dataset(&ds).with_thresholds(cfg.rare_threshold, cfg.popular_threshold);
    let rare = (0..ds.n_libraries() as u32).filter(|&l| pop.is_rare(l)).count();
    let popular = (0..ds.n_libraries() as u32).filter(|&l| pop.is_popular(l)).count();
    log::info!("{rare} rare and {popular} popular libraries");
    let model = train_model(&ds, &cfg.embed_config(), cfg.lambda, &cfg.agent_config())?;
    let manifest = artifacts::save_model(&cfg.output, &model, &ds, &cfg)?;
    let mut out = io::stdout().lock();
    writeln!(out, "wrote {}", cfg.output.display())?;
    for (name, hash) in &manifest.artifacts {
        writeln!(out, "{hash}  {name}")?;
    }
    Ok(())
}

fn recommend_cmd(model_dir: &Path, query: &[String], k: usize, mode: &str) -> CmdResult {
    let mode: RecommendMode = mode.parse()?;
    if k == 0 {
        return Err(Failure::Usage("k must be at least 1".into()));
    }
    let model = artifacts::load_model(model_dir).map_err(|e| match e {
        Error::Io(io) => Failure::Data(format!("{}: {io}", model_dir.display())),
        other => other.into(),
    })?;
    let ids = model
        .resolve(query)
        .map_err(|unknown| Failure::Data(format!("unknown library id(s): {}", unknown.join(", "))))?;
    let recs = recommend(&ids, k, &model.network, &model.representatives, mode)?;
    let mut out = io::stdout().lock();
    for (rank, r) in recs.iter().enumerate() {
        writeln!(out, "{}\t{}\t{:.6}", rank + 1, model.library_ids[r.library as usize], r.q_value)?;
    }
    Ok(())
}

fn evaluate(args: &RunArgs) -> CmdResult {
    let cfg = run_config(args)?;
    let ds = dataset_of(&cfg)?;
    let report = run_protocol(&ds, &cfg.eval_config()?)?;
    std::fs::create_dir_all(&cfg.output)?;

    let mut table = Vec::new();
    write_table(&report, &mut table)?;
    std::fs::write(cfg.output.join(REPORT_TABLE), &table)?;
    io::stdout().write_all(&table)?;
    persist::save(cfg.output.join(REPORT_KV), |w| Ok(write_kv(&report, w)?))?;

    let mut hashes = std::collections::BTreeMap::new();
    hashes.insert(REPORT_KV.to_owned(), persist::sha256_file(cfg.output.join(REPORT_KV))?);
    Manifest {
        dataset: DatasetInfo::of(&ds),
        artifacts: hashes,
        config: cfg.clone(),
    }
    .write(&cfg.output.join(artifacts::MANIFEST))?;

    if let Some(failed) = report.folds.iter().find(|f| f.metrics.is_none()) {
        let msg = format!("folds {:?} did not complete", report.incomplete());
        return Err(match failed.error_class {
            Some(ErrorClass::Numeric) => Failure::Numeric(msg),
            Some(ErrorClass::Usage) => Failure::Usage(msg),
            _ => Failure::Data(msg),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes_map_to_exit_codes() {
        let code = |e: Error| Failure::from(e).exit_code();
        assert_eq!(code(Error::Config("x".into())), 1);
        assert_eq!(code(Error::Format("x".into())), 2);
        assert_eq!(code(Error::Numeric("x".into())), 3);
        assert_eq!(Failure::from(io::Error::other("x")).exit_code(), 2);
    }

    #[test]
    fn overrides_may_name_the_config_file() {
        let args = RunArgs {
            config: None,
            overrides: vec!["--config".into(), "/nonexistent/run.toml".into()],
        };
        assert!(run_config(&args).is_err());
        let args = RunArgs {
            config: None,
            overrides: vec!["--seed=4".into()],
        };
        assert_eq!(run_config(&args).ok().map(|c| c.seed), Some(4));
    }
}
