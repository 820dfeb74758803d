//! Sample grids around a base point.

use serde::{Deserialize, Serialize};

use crate::error::{KlError, Result};
use crate::oracle::distance;

const MAX_GRID_POINTS: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    /// Tensor grid on the box `x̄ ± ε` with `counts[i]` points on axis `i`
    /// (a single count is used for every axis).
    Uniform {
        counts: Vec<usize>,
    },
    /// `x̄ + r·u` for `radii` log-spaced radii in `[r_min, ε)` and a fixed
    /// set of unit directions `u`: `±1` in 1-D, `directions` equally spaced
    /// angles in 2-D, `±e_i` in higher dimensions. Always contains `x̄`.
    LogRadial {
        radii: usize,
        directions: usize,
        r_min: f64,
    },
    Explicit {
        points: Vec<Vec<f64>>,
    },
}

impl GridSpec {
    /// 2001 points in 1-D, 201×201 in 2-D, 21 per axis above that.
    pub fn default_for(dim: usize) -> GridSpec {
        let n = match dim {
            1 => 2001,
            2 => 201,
            _ => 21,
        };
        GridSpec::Uniform { counts: vec![n] }
    }

    /// 1-D log-radial grid with `total` points (`(total-1)/2` radii per side).
    pub fn log_radial_1d(total: usize, r_min: f64) -> GridSpec {
        GridSpec::LogRadial {
            radii: total.saturating_sub(1) / 2,
            directions: 2,
            r_min,
        }
    }

    /// Grid points inside the open ball `‖x - x̄‖ < eps`.
    pub fn points(&self, xbar: &[f64], eps: f64) -> Result<Vec<Vec<f64>>> {
        let dim = xbar.len();
        if dim == 0 {
            return Err(KlError::arg("base point has dimension 0"));
        }
        if !(eps.is_finite() && eps > 0.0) {
            return Err(KlError::arg(format!(
                "radius must be a positive real, got {eps}"
            )));
        }
        let pts = match self {
            GridSpec::Uniform { counts } => {
                let counts: Vec<usize> = match counts.len() {
                    1 => vec![counts[0]; dim],
                    n if n == dim => counts.clone(),
                    n => {
                        return Err(KlError::arg(format!(
                            "grid has {n} axis counts for a {dim}-dimensional point"
                        )))
                    }
                };
                if counts.iter().any(|&c| c < 2) {
                    return Err(KlError::arg("every axis needs at least 2 grid points"));
                }
                let total = counts
                    .iter()
                    .try_fold(1usize, |acc, &c| acc.checked_mul(c))
                    .filter(|&t| t <= MAX_GRID_POINTS)
                    .ok_or_else(|| KlError::arg("grid is too large"))?;
                let mut out = Vec::new();
                let mut idx = vec![0usize; dim];
                for _ in 0..total {
                    let x: Vec<f64> = (0..dim)
                        .map(|i| {
                            let frac = idx[i] as f64 / (counts[i] - 1) as f64;
                            xbar[i] - eps + 2.0 * eps * frac
                        })
                        .collect();
                    out.push(x);
                    for i in 0..dim {
                        idx[i] += 1;
                        if idx[i] < counts[i] {
                            break;
                        }
                        idx[i] = 0;
                    }
                }
                out
            }
            GridSpec::LogRadial {
                radii,
                directions,
                r_min,
            } => {
                if *radii == 0 {
                    return Err(KlError::arg("log-radial grid needs at least one radius"));
                }
                let r_max = eps * (1.0 - 1e-9);
                if !(r_min.is_finite() && *r_min > 0.0 && *r_min < r_max) {
                    return Err(KlError::arg(format!(
                        "r_min must lie in (0, eps), got {r_min}"
                    )));
                }
                let dirs = unit_directions(dim, *directions)?;
                if radii
                    .checked_mul(dirs.len())
                    .map_or(true, |n| n > MAX_GRID_POINTS)
                {
                    return Err(KlError::arg("grid is too large"));
                }
                let mut out = vec![xbar.to_vec()];
                for j in 0..*radii {
                    let r = if *radii == 1 {
                        *r_min
                    } else {
                        r_min * (r_max / r_min).powf(j as f64 / (*radii - 1) as f64)
                    };
                    for u in &dirs {
                        out.push(xbar.iter().zip(u).map(|(c, ui)| c + r * ui).collect());
                    }
                }
                out
            }
            GridSpec::Explicit { points } => {
                if let Some(p) = points.iter().find(|p| p.len() != dim) {
                    return Err(KlError::arg(format!(
                        "grid point of dimension {} for a {dim}-dimensional base point",
                        p.len()
                    )));
                }
                points.clone()
            }
        };
        Ok(pts
            .into_iter()
            .filter(|x| distance(x, xbar) < eps)
            .collect())
    }
}

fn unit_directions(dim: usize, directions: usize) -> Result<Vec<Vec<f64>>> {
    Ok(match dim {
        1 => vec![vec![-1.0], vec![1.0]],
        2 => {
            if directions == 0 {
                return Err(KlError::arg(
                    "2-D log-radial grid needs at least one direction",
                ));
            }
            (0..directions)
                .map(|k| {
                    let a = std::f64::consts::TAU * k as f64 / directions as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect()
        }
        _ => (0..dim)
            .flat_map(|i| {
                [-1.0, 1.0].into_iter().map(move |s| {
                    let mut u = vec![0.0; dim];
                    u[i] = s;
                    u
                })
            })
            .collect(),
    })
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect(),
    }
}
