//! Turning command-line strings into library values.

use std::path::Path;
use std::sync::Arc;

use kl_core::modulus::{CloudMeta, SampleCloud};
use kl_core::oracles::{self, CorpusEntry};
use kl_core::tables::TabulatedOracle;
use kl_core::{desing::parse_phi_spec, DesingFn, Eta, FnOracle, GridSpec};

use crate::{Failure, GridArgs, SiteArgs};

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

pub fn parse_eta(s: &str) -> Result<Eta, Failure> {
    let v = match s.trim() {
        "inf" | "+inf" => f64::INFINITY,
        t => t
            .parse::<f64>()
            .map_err(|_| usage(format!("--eta {s:?} is neither a number nor inf")))?,
    };
    Ok(Eta::new(v)?)
}

/// Comma- or space-separated numbers.
pub fn parse_vec(s: &str, what: &str) -> Result<Vec<f64>, Failure> {
    let v = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| usage(format!("{what}: {t:?} is not a finite number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if v.is_empty() {
        return Err(usage(format!("{what} is empty")));
    }
    Ok(v)
}

pub fn positive(v: f64, what: &str) -> Result<f64, Failure> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(usage(format!("{what} must be a positive number, got {v}")))
    }
}

/// A `--phi` value: inline spec or JSON document, or `@path` to either.
pub fn phi(spec: &str) -> Result<DesingFn, Failure> {
    match spec.strip_prefix('@') {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read {path}: {e}")))?;
            Ok(parse_phi_spec(&text)?)
        }
        None => Ok(parse_phi_spec(spec)?),
    }
}

pub enum Source {
    Corpus(CorpusEntry),
    Table(TabulatedOracle),
}

impl Source {
    pub fn oracle(&self) -> Arc<dyn FnOracle> {
        match self {
            Source::Corpus(e) => e.oracle.clone(),
            Source::Table(t) => Arc::new(t.clone()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Source::Corpus(e) => e.xbar.len(),
            Source::Table(t) => t.dim(),
        }
    }
}

/// A corpus id, or else a path to a tabulated oracle.
pub fn source(name: &str) -> Result<Source, Failure> {
    if let Some(e) = oracles::find(name) {
        return Ok(Source::Corpus(e));
    }
    let path = Path::new(name);
    if !path.exists() {
        let ids: Vec<&str> = oracles::corpus().iter().map(|e| e.id).collect();
        return Err(usage(format!(
            "--oracle {name:?} is neither a corpus id ({}) nor an existing file",
            ids.join(", ")
        )));
    }
    Ok(Source::Table(TabulatedOracle::load(path)?))
}

pub fn grid(args: &GridArgs, dim: usize) -> Result<Option<GridSpec>, Failure> {
    let n = args.grid_n.map(|n| n as usize);
    Ok(match (args.r_min, n) {
        (Some(r), n) => {
            positive(r, "--r-min")?;
            let n = n.unwrap_or(2001);
            Some(if dim == 1 {
                GridSpec::log_radial_1d(n, r)
            } else {
                GridSpec::LogRadial {
                    radii: n,
                    directions: 16,
                    r_min: r,
                }
            })
        }
        (None, Some(n)) => Some(GridSpec::Uniform { counts: vec![n] }),
        (None, None) => None,
    })
}

pub struct Site {
    pub name: String,
    pub source: Source,
    pub oracle: Arc<dyn FnOracle>,
    pub xbar: Vec<f64>,
    pub eps: f64,
    pub eta: Eta,
    pub grid: GridSpec,
    /// Metadata of an exported sample cloud used as the oracle unchanged:
    /// re-sampling it reproduces the original cloud, so its grid and skip
    /// count carry over.
    pub origin: Option<CloudMeta>,
}

fn meta_eta(t: &TabulatedOracle) -> Result<Eta, Failure> {
    t.meta().get("eta").map_or(Ok(Eta::INFINITE), |s| parse_eta(s))
}

pub fn site(args: &SiteArgs) -> Result<Site, Failure> {
    let source = source(&args.oracle)?;
    let dim = source.dim();
    let xbar = match &args.xbar {
        Some(s) => parse_vec(s, "--xbar")?,
        None => match &source {
            Source::Corpus(e) => e.xbar.clone(),
            Source::Table(t) => match t.meta().get("xbar") {
                Some(s) => parse_vec(s, "table metadata xbar")?,
                None => t.points()[0].clone(),
            },
        },
    };
    if xbar.len() != dim {
        return Err(usage(format!(
            "--xbar has {} coordinates but the function has dimension {dim}",
            xbar.len()
        )));
    }
    let eps = match args.eps {
        Some(e) => positive(e, "--eps")?,
        None => match &source {
            Source::Corpus(e) => e.eps,
            Source::Table(t) => match t.meta().get("eps") {
                Some(s) => positive(
                    s.parse()
                        .map_err(|_| usage(format!("table metadata eps={s:?} is not a number")))?,
                    "table metadata eps",
                )?,
                None => covering_radius(t, &xbar),
            },
        },
    };
    let eta = match &args.eta {
        Some(s) => parse_eta(s)?,
        None => match &source {
            Source::Corpus(e) => e.eta,
            Source::Table(t) => meta_eta(t)?,
        },
    };
    let grid = match grid(&args.grid, dim)? {
        Some(g) => g,
        None => match &source {
            Source::Corpus(_) => GridSpec::default_for(dim),
            Source::Table(t) => GridSpec::Explicit {
                points: t.points().to_vec(),
            },
        },
    };
    let overridden = args.xbar.is_some()
        || args.eps.is_some()
        || args.eta.is_some()
        || args.grid.grid_n.is_some()
        || args.grid.r_min.is_some();
    let origin = match &source {
        Source::Table(t) if !overridden && t.meta().get("kind").map(String::as_str) == Some("sample_cloud") => {
            Some(SampleCloud::from_table(&t.to_table())?.meta)
        }
        _ => None,
    };
    Ok(Site {
        name: args.oracle.clone(),
        origin,
        oracle: source.oracle(),
        source,
        xbar,
        eps,
        eta,
        grid,
    })
}

/// Smallest open ball around `xbar` containing every sample.
fn covering_radius(t: &TabulatedOracle, xbar: &[f64]) -> f64 {
    let r = t
        .points()
        .iter()
        .map(|p| {
            p.iter()
                .zip(xbar)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    if r > 0.0 {
        r * (1.0 + 1e-9)
    } else {
        1.0
    }
}
