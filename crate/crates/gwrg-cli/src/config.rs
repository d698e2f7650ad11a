//! Flag and config-file handling. Every knob can come from a TOML file via
//! `--config`; explicit flags override file values, and defaults fill the
//! rest. The resolved configuration is what the manifest records.

use std::path::PathBuf;

use clap::Parser;
use gwrg_core::ball::DEFAULT_VERTEX_CAP;
use gwrg_core::walk::ParticleScheme;
use gwrg_core::{Error, HostSpec, Result};
use serde::Deserialize;

pub const DEFAULT_TRIALS: u64 = 10_000;
pub const FAST_TRIALS: u64 = 1_000;
/// Round cap for connectivity searches when `--i` is not given.
pub const DEFAULT_ROUND_CAP: u32 = 64;

#[derive(Debug, Parser)]
#[command(name = "gwrg", version, about = "Group-walk random graph laboratory")]
pub struct Args {
    /// TOML file supplying any of the long flags; explicit flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// stats | connectivity | crossings | naim | green | equilibrium |
    /// interlacement | graphon-sample | oracle-suite
    #[arg(long)]
    pub experiment: Option<String>,
    /// Host graph: btree<b> | tree-d<d> | z<d> | hyptree | lamplighter
    #[arg(long)]
    pub host: Option<String>,
    /// Ball radius, a single value or an inclusive range "a..b".
    #[arg(long)]
    pub n: Option<String>,
    /// Rounds per sample; for connectivity, the censoring round cap.
    #[arg(long)]
    pub i: Option<u32>,
    /// Particle scheme: degree | poisson
    #[arg(long)]
    pub scheme: Option<String>,
    /// Monte Carlo trials per data point.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Shrink the default trial count for a quick look.
    #[arg(long)]
    pub fast: bool,
    /// Master seed; everything random derives from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Result file path; the manifest lands next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv | json
    #[arg(long)]
    pub format: Option<String>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Abort ball construction beyond this many vertices.
    #[arg(long)]
    pub vertex_cap: Option<usize>,
    /// Crossing set rule for X: branch:<letter> | coord+:<k> | coord-:<k> | all
    #[arg(long)]
    pub x_set: Option<String>,
    /// Crossing set rule for Y.
    #[arg(long)]
    pub y_set: Option<String>,
    /// Serialized vertex argument (Green / Naim x).
    #[arg(long)]
    pub x: Option<String>,
    /// Serialized vertex argument (Green / Naim y).
    #[arg(long)]
    pub y: Option<String>,
    /// Serialized base point for kernels (default: the root).
    #[arg(long)]
    pub o: Option<String>,
    /// Equilibrium set K as ";"-separated serialized vertices.
    #[arg(long)]
    pub k: Option<String>,
    /// Cylinder walk as ";"-separated serialized vertices.
    #[arg(long)]
    pub z: Option<String>,
    /// mc | exact
    #[arg(long)]
    pub mode: Option<String>,
    /// Naim experiment: emit a Θ series of this many samples per pair
    /// instead of a single kernel value.
    #[arg(long)]
    pub series: Option<u32>,
    /// Naim series: number of independent walk pairs.
    #[arg(long)]
    pub pairs: Option<u64>,
    /// Use the G(x,o)G(o,x) denominator instead of the symmetric one.
    #[arg(long)]
    pub printed_denominator: bool,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum NField {
    Num(u32),
    Range(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    experiment: Option<String>,
    host: Option<String>,
    n: Option<NField>,
    i: Option<u32>,
    scheme: Option<String>,
    trials: Option<u64>,
    fast: Option<bool>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    format: Option<String>,
    threads: Option<usize>,
    vertex_cap: Option<usize>,
    x_set: Option<String>,
    y_set: Option<String>,
    x: Option<String>,
    y: Option<String>,
    o: Option<String>,
    k: Option<String>,
    z: Option<String>,
    mode: Option<String>,
    series: Option<u32>,
    pairs: Option<u64>,
    printed_denominator: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Stats,
    Connectivity,
    Crossings,
    Naim,
    Green,
    Equilibrium,
    Interlacement,
    GraphonSample,
    OracleSuite,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Stats => "stats",
            Experiment::Connectivity => "connectivity",
            Experiment::Crossings => "crossings",
            Experiment::Naim => "naim",
            Experiment::Green => "green",
            Experiment::Equilibrium => "equilibrium",
            Experiment::Interlacement => "interlacement",
            Experiment::GraphonSample => "graphon-sample",
            Experiment::OracleSuite => "oracle-suite",
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "stats" => Experiment::Stats,
            "connectivity" => Experiment::Connectivity,
            "crossings" => Experiment::Crossings,
            "naim" => Experiment::Naim,
            "green" => Experiment::Green,
            "equilibrium" => Experiment::Equilibrium,
            "interlacement" => Experiment::Interlacement,
            "graphon-sample" => Experiment::GraphonSample,
            "oracle-suite" => Experiment::OracleSuite,
            other => return Err(Error::InvalidInput(format!("unknown experiment {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutFormat {
    Csv,
    Json,
}

impl OutFormat {
    pub fn name(&self) -> &'static str {
        match self {
            OutFormat::Csv => "csv",
            OutFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    MonteCarlo,
    Exact,
}

impl RunMode {
    pub fn name(&self) -> &'static str {
        match self {
            RunMode::MonteCarlo => "mc",
            RunMode::Exact => "exact",
        }
    }
}

/// Fully resolved configuration: flags over file over defaults.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub experiment: Experiment,
    pub host: Option<HostSpec>,
    pub host_name: String,
    pub n_values: Vec<u32>,
    pub n_raw: String,
    pub i: Option<u32>,
    pub scheme: ParticleScheme,
    pub trials: u64,
    pub fast: bool,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: OutFormat,
    pub threads: Option<usize>,
    pub vertex_cap: usize,
    pub x_set: Option<String>,
    pub y_set: Option<String>,
    pub x: Option<String>,
    pub y: Option<String>,
    pub o: Option<String>,
    pub k: Option<String>,
    pub z: Option<String>,
    pub mode: RunMode,
    pub series: Option<u32>,
    pub pairs: u64,
    pub printed_denominator: bool,
}

impl Resolved {
    /// Rounds per sample with the experiment-appropriate default.
    pub fn rounds(&self) -> u32 {
        self.i.unwrap_or(1)
    }

    pub fn round_cap(&self) -> u32 {
        self.i.unwrap_or(DEFAULT_ROUND_CAP)
    }

    pub fn host(&self) -> Result<HostSpec> {
        self.host
            .ok_or_else(|| Error::InvalidInput("this experiment needs --host".into()))
    }

    pub fn require_out(&self) -> Result<&PathBuf> {
        self.out
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("this experiment needs --out".into()))
    }

    /// The manifest's key=value view of everything that shaped the run.
    pub fn manifest_pairs(&self) -> Vec<(String, String)> {
        let mut pairs = vec![
            ("experiment".into(), self.experiment.name().into()),
            ("host".into(), self.host_name.clone()),
            ("n".into(), self.n_raw.clone()),
            ("i".into(), self.i.map_or_else(|| "default".into(), |i| i.to_string())),
            ("scheme".into(), self.scheme.name().into()),
            ("trials".into(), self.trials.to_string()),
            ("fast".into(), u8::from(self.fast).to_string()),
            ("seed".into(), self.seed.to_string()),
            ("format".into(), self.format.name().into()),
            (
                "threads".into(),
                self.threads.map_or_else(|| "auto".into(), |t| t.to_string()),
            ),
            ("vertex_cap".into(), self.vertex_cap.to_string()),
            ("mode".into(), self.mode.name().into()),
        ];
        let optional = [
            ("x_set", &self.x_set),
            ("y_set", &self.y_set),
            ("x", &self.x),
            ("y", &self.y),
            ("o", &self.o),
            ("k", &self.k),
            ("z", &self.z),
        ];
        for (name, value) in optional {
            if let Some(v) = value {
                pairs.push((name.into(), v.clone()));
            }
        }
        if let Some(s) = self.series {
            pairs.push(("series".into(), s.to_string()));
            pairs.push(("pairs".into(), self.pairs.to_string()));
        }
        if self.printed_denominator {
            pairs.push(("printed_denominator".into(), "1".into()));
        }
        pairs
    }
}

/// "7" -> [7]; "2..8" -> [2,...,8] inclusive.
pub fn parse_n_values(raw: &str) -> Result<Vec<u32>> {
    let bad = || Error::InvalidInput(format!("cannot parse radius {raw:?} (use e.g. 4 or 2..8)"));
    if let Some((a, b)) = raw.split_once("..") {
        let a: u32 = a.trim().parse().map_err(|_| bad())?;
        let b: u32 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        Ok((a..=b).collect())
    } else {
        Ok(vec![raw.trim().parse().map_err(|_| bad())?])
    }
}

pub fn resolve(args: Args) -> Result<Resolved> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            toml::from_str(&text)
                .map_err(|e| Error::InvalidInput(format!("bad config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };

    let experiment: Experiment = args
        .experiment
        .or(file.experiment)
        .ok_or_else(|| Error::InvalidInput("--experiment is required".into()))?
        .parse()?;
    let host_name = args.host.or(file.host);
    let host = host_name.as_deref().map(str::parse::<HostSpec>).transpose()?;
    let n_raw = args.n.or(file.n.map(|f| match f {
        NField::Num(v) => v.to_string(),
        NField::Range(s) => s,
    }));
    let n_values = n_raw.as_deref().map(parse_n_values).transpose()?.unwrap_or_default();
    let scheme = args
        .scheme
        .or(file.scheme)
        .map(|s| s.parse::<ParticleScheme>())
        .transpose()?
        .unwrap_or(ParticleScheme::DegreeCount);
    let fast = args.fast || file.fast.unwrap_or(false);
    let trials = args
        .trials
        .or(file.trials)
        .unwrap_or(if fast { FAST_TRIALS } else { DEFAULT_TRIALS });
    if trials == 0 {
        return Err(Error::InvalidInput("--trials must be positive".into()));
    }
    let i = args.i.or(file.i);
    if i == Some(0) {
        return Err(Error::InvalidInput("--i must be positive".into()));
    }
    let format = match args.format.or(file.format).as_deref() {
        None | Some("csv") => OutFormat::Csv,
        Some("json") => OutFormat::Json,
        Some(other) => {
            return Err(Error::InvalidInput(format!("unknown format {other:?} (csv or json)")))
        }
    };
    let mode = match args.mode.or(file.mode).as_deref() {
        None | Some("mc") => RunMode::MonteCarlo,
        Some("exact") => RunMode::Exact,
        Some(other) => {
            return Err(Error::InvalidInput(format!("unknown mode {other:?} (mc or exact)")))
        }
    };
    let vertex_cap = args.vertex_cap.or(file.vertex_cap).unwrap_or(DEFAULT_VERTEX_CAP);
    if vertex_cap == 0 {
        return Err(Error::InvalidInput("--vertex-cap must be positive".into()));
    }

    Ok(Resolved {
        experiment,
        host,
        host_name: host_name.unwrap_or_default(),
        n_values,
        n_raw: n_raw.unwrap_or_default(),
        i,
        scheme,
        trials,
        fast,
        seed: args.seed.or(file.seed).unwrap_or(0),
        out: args.out.or(file.out),
        format,
        threads: args.threads.or(file.threads),
        vertex_cap,
        x_set: args.x_set.or(file.x_set),
        y_set: args.y_set.or(file.y_set),
        x: args.x.or(file.x),
        y: args.y.or(file.y),
        o: args.o.or(file.o),
        k: args.k.or(file.k),
        z: args.z.or(file.z),
        mode,
        series: args.series.or(file.series),
        pairs: args.pairs.or(file.pairs).unwrap_or(1),
        printed_denominator: args.printed_denominator || file.printed_denominator.unwrap_or(false),
    })
}
