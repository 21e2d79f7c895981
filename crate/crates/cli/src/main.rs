//! `splitflow`: run schemes, convergence studies and Young-estimate probes
//! on the packaged models and write CSV/JSON artifacts.

mod config;
mod probe;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use splitflow::{ModelName, SchemeKind};

use config::{parse_override, RunConfig};

#[derive(Debug)]
pub enum Failure {
    /// An audit exceeded its slack.
    Audit(String),
    Io(String),
    Numerical(String),
    Config(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Audit(_) => 1,
            Failure::Io(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Config(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Audit(m) | Failure::Io(m) | Failure::Numerical(m) | Failure::Config(m) => m,
        }
    }
}

impl From<splitflow::Error> for Failure {
    fn from(e: splitflow::Error) -> Self {
        match e {
            splitflow::Error::Numerical { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "splitflow", version, about = "Split-step and alternating minimizing movement solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scheme, or a convergence study with --study.
    Run(Common),
    /// Run a convergence study over the step counts in --study.
    Study(Common),
    /// Fit the constants of the quantitative Young estimate and evaluate the
    /// oscillating witness sequence.
    ProbeQye(Common),
    /// List the packaged models and their default parameters.
    ListModels,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    /// split, amm, effective, block-split or block-amm.
    #[arg(long)]
    scheme: Option<String>,
    /// Number of uniform steps.
    #[arg(long = "N", visible_alias = "steps")]
    steps: Option<usize>,
    /// Comma-separated partition nodes, starting at 0.
    #[arg(long, value_delimiter = ',')]
    nodes: Option<Vec<f64>>,
    /// Comma-separated step counts for a convergence study.
    #[arg(long, value_delimiter = ',')]
    study: Option<Vec<usize>>,
    #[arg(long)]
    inner_steps: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory (default: $SPLITFLOW_OUT/<label> or splitflow-out/<label>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent study rows.
    #[arg(long)]
    jobs: Option<usize>,
    /// Seed for probe sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Probe sample count.
    #[arg(long)]
    samples: Option<usize>,
    /// Model parameter override, e.g. --set p=3 (repeatable).
    #[arg(long = "set", value_parser = parse_override)]
    set: Vec<(String, serde_json::Value)>,
    /// Also compute the variational interpolant (AMM schemes).
    #[arg(long)]
    variational: bool,
}

impl Common {
    fn into_config(self) -> Result<RunConfig, Failure> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(m) = self.model {
            if m != c.model {
                c.overrides = serde_json::Value::Object(Default::default());
            }
            c.model = m;
        }
        if let Some(s) = self.scheme {
            c.scheme = Some(SchemeKind::parse(&s)?);
        }
        if let Some(n) = self.steps {
            c.steps = Some(n);
            c.nodes = None;
        }
        if let Some(n) = self.nodes {
            c.nodes = Some(n);
            c.steps = None;
        }
        if let Some(s) = self.study {
            c.study = Some(s);
        }
        if let Some(m) = self.inner_steps {
            c.inner_steps = m;
        }
        if let Some(t) = self.tol {
            c.tol = t;
        }
        if let Some(o) = self.out {
            c.out = Some(o);
        }
        if let Some(j) = self.jobs {
            c.jobs = j;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(s) = self.samples {
            c.probe.samples = s;
        }
        if self.variational {
            c.variational = true;
        }
        if !self.set.is_empty() {
            let obj = match &mut c.overrides {
                serde_json::Value::Object(o) => o,
                serde_json::Value::Null => {
                    c.overrides = serde_json::Value::Object(Default::default());
                    c.overrides.as_object_mut().expect("object")
                }
                _ => return Err(Failure::Config("overrides must be a JSON object".into())),
            };
            for (k, v) in self.set {
                obj.insert(k, v);
            }
        }
        Ok(c)
    }
}

fn list_models() -> Result<(), Failure> {
    for m in ModelName::ALL {
        let p = splitflow::make_model(m.name(), &serde_json::Value::Null)?;
        let params = serde_json::to_string(&p.params).expect("serializable params");
        println!("{:<22} {}", m.name(), m.describe());
        println!(
            "{:<22} default scheme {}, horizon {}, params {params}",
            "",
            p.default_scheme.name(),
            p.horizon
        );
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::ListModels => list_models(),
        Command::Run(c) => {
            let cfg = c.into_config()?;
            if cfg.study.is_some() {
                run::study(cfg)
            } else {
                run::run(cfg)
            }
        }
        Command::Study(c) => {
            let cfg = c.into_config()?;
            if cfg.study.is_none() {
                return Err(Failure::Config("study needs --study with a list of step counts".into()));
            }
            run::study(cfg)
        }
        Command::ProbeQye(c) => probe::probe_qye(c.into_config()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("splitflow: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
