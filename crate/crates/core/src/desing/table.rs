//! Left derivative given by a table, with the function recovered by integration.
//!
//! Between nodes the derivative is either a left-continuous step
//! (`d = d_j` on `(s_{j-1}, s_j]`) or a piecewise power law (log-log linear).
//! Below the first node a tail model supplies both the derivative and the mass
//! of the improper integral on `(0, s_0]`; past the last node the last value is
//! held.

use serde::{Deserialize, Serialize};

use crate::error::{KlError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interp {
    #[default]
    Step,
    LogLinear,
}

/// Model of the derivative on `(0, s_0]`, anchored at the first node `(s_0, d_0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tail {
    /// `d(s) = d_0`.
    #[default]
    Constant,
    /// `d(s) = d_0 (s/s_0)^{-p}` with `0 <= p < 1`.
    Power { p: f64 },
    /// `d(s) = d_0 (s_0/s) (ln s_0 / ln s)^q` with `q > 1`, `s_0 <= e^{-q}`.
    LogPower { q: f64 },
}

/// How to choose a [`Tail`] from the smallest nodes of a table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TailFit {
    #[default]
    Off,
    Auto,
    Power,
    LogPower,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct Table {
    s_grid: Vec<f64>,
    d_values: Vec<f64>,
    interp: Interp,
    tail: Tail,
    // cumulative integral up to each node
    cum: Vec<f64>,
}

impl PartialEq for Table {
    fn eq(&self, other: &Self) -> bool {
        self.s_grid == other.s_grid
            && self.d_values == other.d_values
            && self.interp == other.interp
            && self.tail == other.tail
    }
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    s_grid: Vec<f64>,
    d_values: Vec<f64>,
    #[serde(default)]
    interp: Interp,
    #[serde(default)]
    tail: Tail,
}

impl TryFrom<TableRepr> for Table {
    type Error = KlError;

    fn try_from(r: TableRepr) -> Result<Self> {
        Table::new(r.s_grid, r.d_values, r.interp, r.tail)
    }
}

impl From<Table> for TableRepr {
    fn from(t: Table) -> Self {
        TableRepr {
            s_grid: t.s_grid,
            d_values: t.d_values,
            interp: t.interp,
            tail: t.tail,
        }
    }
}

/// `expm1(z)/z`, continuous at 0.
fn expm1_ratio(z: f64) -> f64 {
    if z.abs() < 1e-12 {
        1.0 + 0.5 * z
    } else {
        z.exp_m1() / z
    }
}

impl Table {
    pub fn new(s_grid: Vec<f64>, d_values: Vec<f64>, interp: Interp, tail: Tail) -> Result<Self> {
        if s_grid.is_empty() {
            return Err(KlError::arg("table needs at least one node"));
        }
        if s_grid.len() != d_values.len() {
            return Err(KlError::arg(format!(
                "s_grid has {} entries but d_values has {}",
                s_grid.len(),
                d_values.len()
            )));
        }
        for (j, &s) in s_grid.iter().enumerate() {
            if !(s.is_finite() && s > 0.0) {
                return Err(KlError::arg(format!(
                    "s_grid[{j}] = {s} is not a positive real"
                )));
            }
            if j > 0 && s <= s_grid[j - 1] {
                return Err(KlError::arg(format!(
                    "s_grid is not strictly increasing at index {j}"
                )));
            }
        }
        for (j, &d) in d_values.iter().enumerate() {
            if !(d.is_finite() && d > 0.0) {
                return Err(KlError::arg(format!(
                    "d_values[{j}] = {d} is not a positive real"
                )));
            }
            if j > 0 && d > d_values[j - 1] {
                return Err(KlError::arg(format!(
                    "d_values must be nonincreasing: d[{}] = {} < d[{j}] = {d}",
                    j - 1,
                    d_values[j - 1]
                )));
            }
        }
        match tail {
            Tail::Constant => {}
            Tail::Power { p } => {
                if !(p.is_finite() && (0.0..1.0).contains(&p)) {
                    return Err(KlError::arg(format!(
                        "power tail exponent {p} outside [0, 1)"
                    )));
                }
            }
            Tail::LogPower { q } => {
                let l0 = -s_grid[0].ln();
                if !(q.is_finite() && q > 1.0) {
                    return Err(KlError::arg(format!(
                        "log-power tail exponent {q} must exceed 1"
                    )));
                }
                if !(l0 >= q) {
                    return Err(KlError::arg(format!(
                        "log-power tail needs s_0 <= exp(-q); s_0 = {}, q = {q}",
                        s_grid[0]
                    )));
                }
            }
        }
        let mut table = Table {
            s_grid,
            d_values,
            interp,
            tail,
            cum: Vec::new(),
        };
        let mut cum = Vec::with_capacity(table.s_grid.len());
        cum.push(table.tail_mass(table.s_grid[0]));
        for j in 1..table.s_grid.len() {
            let prev = cum[j - 1];
            cum.push(prev + table.panel_mass(j, table.s_grid[j]));
        }
        if !cum.iter().all(|c| c.is_finite()) {
            return Err(KlError::arg("table integral overflows"));
        }
        table.cum = cum;
        Ok(table)
    }

    pub fn s_grid(&self) -> &[f64] {
        &self.s_grid
    }

    pub fn d_values(&self) -> &[f64] {
        &self.d_values
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    pub fn first_node(&self) -> f64 {
        self.s_grid[0]
    }

    pub fn last_node(&self) -> f64 {
        *self.s_grid.last().expect("nonempty")
    }

    pub fn scaled(&self, c: f64) -> Result<Table> {
        Table::new(
            self.s_grid.clone(),
            self.d_values.iter().map(|d| d * c).collect(),
            self.interp,
            self.tail,
        )
    }

    /// Whether the value at `t` relies on extrapolation beyond the tabulated range.
    pub fn extrapolates(&self, t: f64) -> bool {
        (t < self.s_grid[0] && self.tail == Tail::Constant) || t > self.last_node()
    }

    // exponent of the power law on panel (s_{j-1}, s_j]
    fn panel_exponent(&self, j: usize) -> f64 {
        let (d0, d1) = (self.d_values[j - 1], self.d_values[j]);
        if d0 == d1 {
            return 0.0;
        }
        (d0 / d1).ln() / (self.s_grid[j] / self.s_grid[j - 1]).ln()
    }

    fn tail_deriv(&self, t: f64) -> f64 {
        let (s0, d0) = (self.s_grid[0], self.d_values[0]);
        match self.tail {
            Tail::Constant => d0,
            Tail::Power { p } => d0 * (t / s0).powf(-p),
            Tail::LogPower { q } => d0 * (s0 / t) * (s0.ln() / t.ln()).powf(q),
        }
    }

    fn tail_mass(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let (s0, d0) = (self.s_grid[0], self.d_values[0]);
        match self.tail {
            Tail::Constant => d0 * u,
            Tail::Power { p } => d0 * s0 * (u / s0).powf(1.0 - p) / (1.0 - p),
            Tail::LogPower { q } => {
                let l0 = -s0.ln();
                let lu = -u.ln();
                d0 * s0 * l0 / (q - 1.0) * (l0 / lu).powf(q - 1.0)
            }
        }
    }

    // integral over (s_{j-1}, x] for x in (s_{j-1}, s_j]
    fn panel_mass(&self, j: usize, x: f64) -> f64 {
        let a = self.s_grid[j - 1];
        match self.interp {
            Interp::Step => self.d_values[j] * (x - a),
            Interp::LogLinear => {
                let p = self.panel_exponent(j);
                let l = (x / a).ln();
                self.d_values[j - 1] * a * l * expm1_ratio((1.0 - p) * l)
            }
        }
    }

    /// Left derivative at `t > 0`.
    pub fn deriv(&self, t: f64) -> f64 {
        let n = self.s_grid.len();
        let j = self.s_grid.partition_point(|&s| s < t);
        if j == 0 {
            self.tail_deriv(t)
        } else if j == n {
            self.d_values[n - 1]
        } else {
            match self.interp {
                Interp::Step => self.d_values[j],
                Interp::LogLinear => {
                    let p = self.panel_exponent(j);
                    let v = self.d_values[j - 1] * (t / self.s_grid[j - 1]).powf(-p);
                    // clamp rounding so the interpolant never leaves its panel's range
                    v.clamp(self.d_values[j], self.d_values[j - 1])
                }
            }
        }
    }

    /// `∫_0^t d(s) ds` for `t >= 0`.
    pub fn integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let n = self.s_grid.len();
        let j = self.s_grid.partition_point(|&s| s < t);
        if j == 0 {
            self.tail_mass(t)
        } else if j == n {
            self.cum[n - 1] + self.d_values[n - 1] * (t - self.s_grid[n - 1])
        } else {
            self.cum[j - 1] + self.panel_mass(j, t)
        }
    }
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx) * (xi - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rss = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let r = yi - (my + slope * (xi - mx));
            r * r
        })
        .sum();
    (slope, rss)
}

/// Fits a tail model on the smallest decade of `(s, d)` nodes (3 to 16 nodes).
///
/// `Auto` fits both families and keeps the admissible one with the smaller
/// residual in `ln d`. Anything inadmissible falls back to [`Tail::Constant`].
pub fn fit_tail(s: &[f64], d: &[f64], fit: TailFit) -> Tail {
    if fit == TailFit::Off || s.len() < 2 || s.len() != d.len() {
        return Tail::Constant;
    }
    let in_decade = s.iter().take_while(|&&x| x <= 10.0 * s[0]).count();
    let k = in_decade.clamp(3, 16).min(s.len());
    let (s, d) = (&s[..k], &d[..k]);

    let power = || {
        let x: Vec<f64> = s.iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = d.iter().map(|v| v.ln()).collect();
        let (slope, rss) = least_squares(&x, &y);
        let p = (-slope).max(0.0);
        (p < 1.0).then_some((Tail::Power { p }, rss))
    };
    let log_power = || {
        if s.iter().any(|&v| v >= 1.0) {
            return None;
        }
        let x: Vec<f64> = s.iter().map(|v| (-v.ln()).ln()).collect();
        let y: Vec<f64> = s.iter().zip(d).map(|(sv, dv)| (sv * dv).ln()).collect();
        let (slope, rss) = least_squares(&x, &y);
        let q = -slope;
        (q > 1.0 && -s[0].ln() >= q).then_some((Tail::LogPower { q }, rss))
    };

    let pick = match fit {
        TailFit::Off => None,
        TailFit::Power => power(),
        TailFit::LogPower => log_power(),
        TailFit::Auto => {
            if k < 3 {
                power()
            } else {
                match (power(), log_power()) {
                    (Some(a), Some(b)) => Some(if b.1 < a.1 { b } else { a }),
                    (a, b) => a.or(b),
                }
            }
        }
    };
    pick.map(|(t, _)| t).unwrap_or(Tail::Constant)
}
