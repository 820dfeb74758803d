//! Exact-modulus estimation from samples.
//!
//! The exact modulus is `φ̃(t) = ∫₀ᵗ h(s) ds` with
//! `h(s) = sup { 1/dist(0, ∂f(x)) : x ∈ U, s ≤ f(x) − f(x̄) < η }`.
//! [`build_cloud`] samples the level slice, [`estimate_h`] takes the sampled
//! supremum on an `s` grid, and [`exact_modulus`] integrates it.

use serde::{Deserialize, Serialize};

use crate::desing::{fit_tail, DesingFn, Interp, Table, Tail, TailFit};
use crate::error::{KlError, Result};
use crate::eta::Eta;
use crate::grid::{log_spaced, GridSpec};
use crate::oracle::FnOracle;
use crate::tables::{fmt_f64, parse_table, sample_header, write_table, RawTable};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudMeta {
    pub xbar: Vec<f64>,
    pub f_xbar: f64,
    /// `dist(0, ∂f(x̄))`, kept so the cloud file is also a tabulated oracle.
    pub dist_xbar: f64,
    pub eps: f64,
    pub eta: Eta,
    pub grid: Option<GridSpec>,
    /// Grid points outside the slice, or with a subnormal `dist` whose
    /// reciprocal overflows.
    pub skipped: usize,
}

/// Oracle samples inside the slice `‖x − x̄‖ < ε, 0 < f(x) − f(x̄) < η`.
///
/// Points with `dist(0, ∂f(x)) = 0` are kept apart as blockers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleCloud {
    pub meta: CloudMeta,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub dists: Vec<f64>,
    pub blockers: Vec<Vec<f64>>,
    pub blocker_values: Vec<f64>,
}

impl SampleCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty() && self.blockers.is_empty()
    }

    /// `v_k = f(x_k) − f(x̄)`.
    pub fn gaps(&self) -> Vec<f64> {
        self.values.iter().map(|v| v - self.meta.f_xbar).collect()
    }

    /// `w_k = 1/dist(0, ∂f(x_k))`.
    pub fn inv_dists(&self) -> Vec<f64> {
        self.dists.iter().map(|d| 1.0 / d).collect()
    }

    pub fn blocker_gaps(&self) -> Vec<f64> {
        self.blocker_values
            .iter()
            .map(|v| v - self.meta.f_xbar)
            .collect()
    }

    /// Distinct sample gaps in increasing order.
    pub fn distinct_gaps(&self) -> Vec<f64> {
        let mut g = self.gaps();
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    }

    /// Columnar table `x1,…,xn,f,dist` (base point first, then samples, then
    /// blockers) with the metadata as `# key=value` lines. The same file
    /// loads as a tabulated oracle.
    pub fn to_table(&self) -> String {
        let m = &self.meta;
        let grid = m.grid.as_ref().map_or("none".to_string(), |g| {
            serde_json::to_string(g).expect("grid serializes")
        });
        let meta = [
            ("kind", "sample_cloud".to_string()),
            (
                "xbar",
                m.xbar
                    .iter()
                    .map(|v| fmt_f64(*v))
                    .collect::<Vec<_>>()
                    .join(" "),
            ),
            ("eps", fmt_f64(m.eps)),
            ("eta", fmt_f64(m.eta.get())),
            ("skipped", m.skipped.to_string()),
            ("grid", grid),
        ];
        let base = std::iter::once((&m.xbar, m.f_xbar, m.dist_xbar));
        let samples = self
            .points
            .iter()
            .zip(&self.values)
            .zip(&self.dists)
            .map(|((p, f), d)| (p, *f, *d));
        let blockers = self
            .blockers
            .iter()
            .zip(&self.blocker_values)
            .map(|(p, f)| (p, *f, 0.0));
        let rows = base.chain(samples).chain(blockers).map(|(p, f, d)| {
            let mut r = p.clone();
            r.push(f);
            r.push(d);
            r
        });
        write_table(&meta, &sample_header(m.xbar.len()), rows)
    }

    pub fn from_table(text: &str) -> Result<SampleCloud> {
        let t = parse_table(text)?;
        let header_line = first_data_line(text);
        let dim = t.header.len().saturating_sub(2);
        if dim == 0 || t.header != sample_header(dim) {
            return Err(KlError::parse(
                header_line,
                "header must be x1,...,xn,f,dist",
            ));
        }
        let meta_num = |k: &str| -> Result<f64> {
            let v = meta_str(&t, k, header_line)?;
            v.parse::<f64>().map_err(|_| {
                KlError::parse(header_line, format!("metadata {k}={v:?} is not a number"))
            })
        };
        let xbar: Vec<f64> = meta_str(&t, "xbar", header_line)?
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| KlError::parse(header_line, "metadata xbar is not a list of numbers"))?;
        if xbar.len() != dim || xbar.iter().any(|v| !v.is_finite()) {
            return Err(KlError::parse(
                header_line,
                "metadata xbar does not match the columns",
            ));
        }
        let eps = meta_num("eps")?;
        let eta =
            Eta::new(meta_num("eta")?).map_err(|e| KlError::parse(header_line, e.to_string()))?;
        let skipped = meta_str(&t, "skipped", header_line)?
            .parse::<usize>()
            .map_err(|_| KlError::parse(header_line, "metadata skipped is not a count"))?;
        let grid = match meta_str(&t, "grid", header_line)? {
            "none" => None,
            g => Some(
                serde_json::from_str(g)
                    .map_err(|e| KlError::parse(header_line, format!("metadata grid: {e}")))?,
            ),
        };
        let (first, rest) = t
            .rows
            .split_first()
            .ok_or_else(|| KlError::parse(header_line, "missing base-point row"))?;
        if first[..dim] != xbar[..] || !first[dim].is_finite() {
            return Err(KlError::parse(
                t.row_lines[0],
                "first row must be the base point with a finite value",
            ));
        }
        let f_xbar = first[dim];
        let mut cloud = SampleCloud {
            meta: CloudMeta {
                xbar,
                f_xbar,
                dist_xbar: first[dim + 1],
                eps,
                eta,
                grid,
                skipped,
            },
            points: Vec::new(),
            values: Vec::new(),
            dists: Vec::new(),
            blockers: Vec::new(),
            blocker_values: Vec::new(),
        };
        for (row, &line) in rest.iter().zip(&t.row_lines[1..]) {
            let (x, f, d) = (&row[..dim], row[dim], row[dim + 1]);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(KlError::parse(line, "coordinates must be finite"));
            }
            if !eta.contains_open(f - f_xbar) {
                return Err(KlError::parse(line, "sample lies outside the level slice"));
            }
            if !(d >= 0.0) {
                return Err(KlError::parse(line, "dist must be nonnegative"));
            }
            if d == 0.0 {
                cloud.blockers.push(x.to_vec());
                cloud.blocker_values.push(f);
            } else {
                cloud.points.push(x.to_vec());
                cloud.values.push(f);
                cloud.dists.push(d);
            }
        }
        Ok(cloud)
    }
}

fn first_data_line(text: &str) -> usize {
    text.lines()
        .position(|l| {
            let l = l.trim();
            !l.is_empty() && !l.starts_with('#')
        })
        .map_or(1, |p| p + 1)
}

fn meta_str<'a>(t: &'a RawTable, key: &str, line: usize) -> Result<&'a str> {
    t.meta
        .get(key)
        .map(String::as_str)
        .ok_or_else(|| KlError::parse(line, format!("missing metadata {key}")))
}

/// Samples the level slice of `oracle` at the grid points.
pub fn build_cloud(
    oracle: &dyn FnOracle,
    xbar: &[f64],
    eps: f64,
    eta: Eta,
    grid: &GridSpec,
) -> Result<SampleCloud> {
    if oracle.dim() != xbar.len() {
        return Err(KlError::arg(format!(
            "base point has dimension {} but the function has dimension {}",
            xbar.len(),
            oracle.dim()
        )));
    }
    if !oracle.has_subgrad() {
        return Err(KlError::arg(
            "oracle does not provide subgradient distances",
        ));
    }
    let f_xbar = oracle.value(xbar);
    if !f_xbar.is_finite() {
        return Err(KlError::arg(format!("f(x̄) = {f_xbar} is not finite")));
    }
    let mut cloud = SampleCloud {
        meta: CloudMeta {
            xbar: xbar.to_vec(),
            f_xbar,
            dist_xbar: oracle.subgrad_dist(xbar),
            eps,
            eta,
            grid: Some(grid.clone()),
            skipped: 0,
        },
        points: Vec::new(),
        values: Vec::new(),
        dists: Vec::new(),
        blockers: Vec::new(),
        blocker_values: Vec::new(),
    };
    if cloud.meta.dist_xbar.is_nan() {
        cloud.meta.dist_xbar = f64::INFINITY;
    }
    for x in grid.points(xbar, eps)? {
        let f = oracle.value(&x);
        if !eta.contains_open(f - f_xbar) {
            cloud.meta.skipped += 1;
            continue;
        }
        let d = oracle.subgrad_dist(&x);
        if d.is_nan() || d < 0.0 {
            return Err(KlError::numeric(format!(
                "oracle returned subgradient distance {d} at {x:?}"
            )));
        }
        if d == 0.0 {
            cloud.blockers.push(x);
            cloud.blocker_values.push(f);
        } else if (1.0 / d).is_infinite() {
            // subnormal dist: 1/dist is not representable, so the sample
            // cannot enter a derivative table
            cloud.meta.skipped += 1;
        } else {
            cloud.points.push(x);
            cloud.values.push(f);
            cloud.dists.push(d);
        }
    }
    Ok(cloud)
}

/// Sampled `h` on an increasing grid of levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HFunction {
    pub s_grid: Vec<f64>,
    pub h_values: Vec<f64>,
    /// The samples stop at a positive gap, so `h` near `0⁺` is unobserved.
    pub truncated_below: bool,
    /// No samples: `h ≡ 0` and the modulus is the zero function.
    pub empty_slice: bool,
    pub eta: Eta,
}

impl HFunction {
    pub fn to_table(&self) -> String {
        let meta = [
            ("kind", "h_function".to_string()),
            ("eta", fmt_f64(self.eta.get())),
            ("truncated_below", self.truncated_below.to_string()),
            ("empty_slice", self.empty_slice.to_string()),
        ];
        let rows = self
            .s_grid
            .iter()
            .zip(&self.h_values)
            .map(|(s, h)| vec![*s, *h]);
        write_table(&meta, &["s".to_string(), "h".to_string()], rows)
    }

    pub fn from_table(text: &str) -> Result<HFunction> {
        let t = parse_table(text)?;
        let line = first_data_line(text);
        if t.header != ["s", "h"] {
            return Err(KlError::parse(line, "header must be s,h"));
        }
        let flag = |k: &str| -> Result<bool> {
            meta_str(&t, k, line)?
                .parse::<bool>()
                .map_err(|_| KlError::parse(line, format!("metadata {k} must be true or false")))
        };
        let eta_v: f64 = meta_str(&t, "eta", line)?
            .parse()
            .map_err(|_| KlError::parse(line, "metadata eta is not a number"))?;
        let eta = Eta::new(eta_v).map_err(|e| KlError::parse(line, e.to_string()))?;
        let h = HFunction {
            s_grid: t.rows.iter().map(|r| r[0]).collect(),
            h_values: t.rows.iter().map(|r| r[1]).collect(),
            truncated_below: flag("truncated_below")?,
            empty_slice: flag("empty_slice")?,
            eta,
        };
        for (j, &line) in t.row_lines.iter().enumerate() {
            let (s, v) = (h.s_grid[j], h.h_values[j]);
            if !eta.contains_open(s) || (j > 0 && s <= h.s_grid[j - 1]) {
                return Err(KlError::parse(
                    line,
                    "s must increase strictly inside (0, eta)",
                ));
            }
            if !(v.is_finite() && v >= 0.0) || (j > 0 && v > h.h_values[j - 1]) {
                return Err(KlError::parse(
                    line,
                    "h must be finite, nonnegative and nonincreasing",
                ));
            }
            if h.empty_slice && v != 0.0 {
                return Err(KlError::parse(line, "empty slice requires h = 0"));
            }
        }
        Ok(h)
    }
}

/// Choice of levels for [`estimate_h`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SGrid {
    /// Every distinct sampled gap; the sampled supremum is then exact between nodes.
    #[default]
    SampleGaps,
    /// `n` log-spaced levels from `max(1e-10, 0.9·min gap)` to `0.999·max gap`.
    LogSpaced { n: usize },
}

impl SGrid {
    pub fn levels(&self, cloud: &SampleCloud) -> Vec<f64> {
        let gaps = cloud.distinct_gaps();
        let (Some(&lo), Some(&hi)) = (gaps.first(), gaps.last()) else {
            return Vec::new();
        };
        match *self {
            SGrid::SampleGaps => gaps,
            SGrid::LogSpaced { n } => {
                let (a, b) = (1e-10f64.max(0.9 * lo), 0.999 * hi);
                if n < 2 || a >= b {
                    vec![lo]
                } else {
                    log_spaced(a, b, n)
                }
            }
        }
    }
}

/// `h(s) = max { w_k : v_k ≥ s }` at every level of `s_grid` by a suffix-max
/// scan over the samples sorted by gap.
///
/// Blockers (`dist = 0`) make `h = +∞` below their gap, so any blocker is an error.
pub fn estimate_h(cloud: &SampleCloud, s_grid: &[f64]) -> Result<HFunction> {
    if !cloud.blockers.is_empty() {
        let gaps = cloud.blocker_gaps();
        return Err(KlError::ModulusUndefined {
            count: gaps.len(),
            max_gap: gaps.iter().copied().fold(0.0, f64::max),
            points: cloud.blockers.iter().take(20).cloned().collect(),
        });
    }
    let eta = cloud.meta.eta;
    for (j, &s) in s_grid.iter().enumerate() {
        if !eta.contains_open(s) {
            return Err(KlError::Domain {
                t: s,
                eta: eta.get(),
            });
        }
        if j > 0 && s <= s_grid[j - 1] {
            return Err(KlError::arg(format!(
                "s grid is not strictly increasing at index {j}"
            )));
        }
    }
    if cloud.points.is_empty() {
        return Ok(HFunction {
            s_grid: s_grid.to_vec(),
            h_values: vec![0.0; s_grid.len()],
            truncated_below: false,
            empty_slice: true,
            eta,
        });
    }
    let mut samples: Vec<(f64, f64)> = cloud.gaps().into_iter().zip(cloud.inv_dists()).collect();
    samples.sort_by(|a, b| b.0.total_cmp(&a.0));
    let max_gap = samples[0].0;
    if let Some(&s) = s_grid.last() {
        if s > max_gap {
            return Err(KlError::arg(format!(
                "level {s} lies above every sampled gap (largest {max_gap})"
            )));
        }
    }
    let mut h_values = vec![0.0; s_grid.len()];
    let mut k = 0;
    let mut running: f64 = 0.0;
    for (j, &s) in s_grid.iter().enumerate().rev() {
        while k < samples.len() && samples[k].0 >= s {
            running = running.max(samples[k].1);
            k += 1;
        }
        h_values[j] = running;
    }
    Ok(HFunction {
        s_grid: s_grid.to_vec(),
        h_values,
        truncated_below: true,
        empty_slice: false,
        eta,
    })
}

/// How [`exact_modulus`] turns `h` into a derivative table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModulusOptions {
    pub interp: Interp,
    pub tail: TailFit,
}

impl Default for ModulusOptions {
    /// Step table with a constant tail: a lower estimate of the sampled modulus.
    fn default() -> Self {
        ModulusOptions {
            interp: Interp::Step,
            tail: TailFit::Off,
        }
    }
}

impl ModulusOptions {
    /// Log-log interpolation with a fitted tail: closer to the true modulus
    /// on smooth examples, but no longer a guaranteed lower estimate.
    pub fn interpolated() -> Self {
        ModulusOptions {
            interp: Interp::LogLinear,
            tail: TailFit::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusEstimate {
    /// `None` when the slice is empty (the modulus is identically zero).
    pub phi: Option<DesingFn>,
    pub vacuous: bool,
    /// Pointwise below the modulus of the sampled `h` (step table, constant tail).
    pub lower_estimate: bool,
    pub truncated_below: bool,
    pub tail: Tail,
    pub eta: Eta,
}

impl ModulusEstimate {
    pub fn eval(&self, t: f64) -> Result<f64> {
        match &self.phi {
            Some(phi) => phi.eval(t),
            None if t >= 0.0 && t < self.eta.get() => Ok(0.0),
            None => Err(KlError::Domain {
                t,
                eta: self.eta.get(),
            }),
        }
    }

    pub fn left_deriv(&self, t: f64) -> Result<f64> {
        match &self.phi {
            Some(phi) => phi.left_deriv(t),
            None if self.eta.contains_open(t) => Ok(0.0),
            None => Err(KlError::Domain {
                t,
                eta: self.eta.get(),
            }),
        }
    }
}

/// `φ̃(t) = ∫₀ᵗ h(s) ds` as a tabulated desingularizing function.
pub fn exact_modulus(h: &HFunction, opts: ModulusOptions) -> Result<ModulusEstimate> {
    // h = 0 only on a top segment where every sample has dist = +inf
    let keep = h.h_values.iter().take_while(|&&v| v > 0.0).count();
    if h.empty_slice || keep == 0 {
        return Ok(ModulusEstimate {
            phi: None,
            vacuous: true,
            lower_estimate: true,
            truncated_below: h.truncated_below,
            tail: Tail::Constant,
            eta: h.eta,
        });
    }
    let s = h.s_grid[..keep].to_vec();
    let d = h.h_values[..keep].to_vec();
    let tail = fit_tail(&s, &d, opts.tail);
    let table = Table::new(s, d, opts.interp, tail)?;
    let phi = DesingFn::tabulated(table, h.eta)?;
    Ok(ModulusEstimate {
        phi: Some(phi),
        vacuous: false,
        lower_estimate: opts.interp == Interp::Step
            && tail == Tail::Constant
            && keep == h.s_grid.len(),
        truncated_below: h.truncated_below,
        tail,
        eta: h.eta,
    })
}

/// Everything produced by [`estimate_modulus`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModulusRun {
    pub cloud: SampleCloud,
    pub h: HFunction,
    pub modulus: ModulusEstimate,
}

/// `build_cloud → estimate_h → exact_modulus`.
pub fn estimate_modulus(
    oracle: &dyn FnOracle,
    xbar: &[f64],
    eps: f64,
    eta: Eta,
    grid: &GridSpec,
    levels: SGrid,
    opts: ModulusOptions,
) -> Result<ModulusRun> {
    let cloud = build_cloud(oracle, xbar, eps, eta, grid)?;
    let h = estimate_h(&cloud, &levels.levels(&cloud))?;
    let modulus = exact_modulus(&h, opts)?;
    Ok(ModulusRun { cloud, h, modulus })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::AnalyticOracle;

    fn square() -> AnalyticOracle {
        AnalyticOracle::new(1, |x| x[0] * x[0], |x| 2.0 * x[0].abs())
    }

    fn huber(rho: f64) -> AnalyticOracle {
        AnalyticOracle::new(
            1,
            move |x| {
                let a = x[0].abs();
                if a <= rho {
                    a * a / 2.0
                } else {
                    2.0 * rho * a - 1.5 * rho * rho
                }
            },
            move |x| {
                let a = x[0].abs();
                if a <= rho {
                    a
                } else {
                    2.0 * rho
                }
            },
        )
    }

    #[test]
    fn square_cloud_and_h() {
        let eta = Eta::new(1.0).unwrap();
        let cloud = build_cloud(&square(), &[0.0], 1.0, eta, &GridSpec::default_for(1)).unwrap();
        assert_eq!(cloud.len(), 1998);
        assert_eq!(cloud.meta.skipped, 1);
        for (v, w) in cloud.gaps().iter().zip(cloud.inv_dists()) {
            assert!((w - 1.0 / (2.0 * v.sqrt())).abs() < 1e-9 * w);
        }
        let h = estimate_h(&cloud, &[0.04]).unwrap();
        assert!((h.h_values[0] - 2.5).abs() < 2.5e-2, "{}", h.h_values[0]);
    }

    #[test]
    fn huber_h_values() {
        let cloud = build_cloud(
            &huber(1.0),
            &[0.0],
            10.0,
            Eta::INFINITE,
            &GridSpec::Uniform { counts: vec![4001] },
        )
        .unwrap();
        let h = estimate_h(&cloud, &[0.25, 1.0]).unwrap();
        assert!((h.h_values[0] - 2f64.sqrt()).abs() < 1e-2);
        assert_eq!(h.h_values[1], 0.5);
    }

    #[test]
    fn constant_function_is_vacuous() {
        let f = AnalyticOracle::new(1, |_| 1.0, |_| 0.0);
        let run = estimate_modulus(
            &f,
            &[0.0],
            1.0,
            Eta::INFINITE,
            &GridSpec::default_for(1),
            SGrid::default(),
            ModulusOptions::default(),
        )
        .unwrap();
        assert!(run.cloud.is_empty());
        assert!(run.h.empty_slice);
        assert!(run.modulus.vacuous && run.modulus.phi.is_none());
        assert_eq!(run.modulus.eval(0.3).unwrap(), 0.0);
    }

    #[test]
    fn blockers_make_the_modulus_undefined() {
        // flat at height 1 for |x| > 0.5
        let f = AnalyticOracle::new(
            1,
            |x| x[0].abs().min(0.5),
            |x| if x[0].abs() < 0.5 { 1.0 } else { 0.0 },
        );
        let cloud = build_cloud(&f, &[0.0], 1.0, Eta::INFINITE, &GridSpec::default_for(1)).unwrap();
        assert!(!cloud.blockers.is_empty());
        match estimate_h(&cloud, &cloud.distinct_gaps()) {
            Err(KlError::ModulusUndefined { count, max_gap, .. }) => {
                assert_eq!(count, cloud.blockers.len());
                assert_eq!(max_gap, 0.5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn step_modulus_is_self_consistent_lower_bound() {
        let run = estimate_modulus(
            &huber(1.0),
            &[0.0],
            3.0,
            Eta::INFINITE,
            &GridSpec::default_for(1),
            SGrid::SampleGaps,
            ModulusOptions::default(),
        )
        .unwrap();
        let m = &run.modulus;
        assert!(m.lower_estimate);
        let phi = m.phi.as_ref().unwrap();
        for (v, w) in run.cloud.gaps().iter().zip(run.cloud.inv_dists()) {
            assert!(phi.left_deriv(*v).unwrap() >= w);
            let exact = if *v <= 0.5 {
                (2.0 * v).sqrt()
            } else {
                v / 2.0 + 0.75
            };
            assert!(phi.eval(*v).unwrap() <= exact + 1e-12);
        }
    }

    #[test]
    fn log_spaced_levels() {
        let cloud = build_cloud(
            &square(),
            &[0.0],
            1.0,
            Eta::new(1.0).unwrap(),
            &GridSpec::default_for(1),
        )
        .unwrap();
        let levels = SGrid::LogSpaced { n: 512 }.levels(&cloud);
        assert_eq!(levels.len(), 512);
        let h = estimate_h(&cloud, &levels).unwrap();
        assert!(h.h_values.windows(2).all(|w| w[1] <= w[0]));
        assert!(estimate_h(&cloud, &[0.5, 0.4]).is_err());
        assert!(estimate_h(&cloud, &[2.0]).is_err());
    }

    #[test]
    fn tables_round_trip() {
        let cloud = build_cloud(
            &huber(1.0),
            &[0.0],
            3.0,
            Eta::INFINITE,
            &GridSpec::Uniform { counts: vec![41] },
        )
        .unwrap();
        let text = cloud.to_table();
        let back = SampleCloud::from_table(&text).unwrap();
        assert_eq!(back, cloud);
        assert_eq!(back.to_table(), text);

        let h = estimate_h(&cloud, &cloud.distinct_gaps()).unwrap();
        let text = h.to_table();
        let back = HFunction::from_table(&text).unwrap();
        assert_eq!(back, h);
        assert_eq!(back.to_table(), text);
    }

    #[test]
    fn cloud_file_loads_as_tabulated_oracle() {
        let cloud = build_cloud(
            &huber(1.0),
            &[0.0],
            3.0,
            Eta::INFINITE,
            &GridSpec::Uniform { counts: vec![41] },
        )
        .unwrap();
        let oracle = crate::tables::TabulatedOracle::parse(&cloud.to_table()).unwrap();
        let grid = GridSpec::Explicit {
            points: oracle.points().to_vec(),
        };
        let mut again = build_cloud(&oracle, &[0.0], 3.0, Eta::INFINITE, &grid).unwrap();
        again.meta.grid = cloud.meta.grid.clone();
        assert_eq!(again, cloud);
    }

    #[test]
    fn rejects_malformed_tables() {
        let good = build_cloud(
            &square(),
            &[0.0],
            1.0,
            Eta::new(1.0).unwrap(),
            &GridSpec::Uniform { counts: vec![5] },
        )
        .unwrap()
        .to_table();
        let broken = good.replace("# eps=", "# epsilon=");
        assert!(SampleCloud::from_table(&broken).is_err());
        let outside =
            format!("{good}2.0000000000000000e0,4.0000000000000000e0,4.0000000000000000e0\n");
        assert!(matches!(
            SampleCloud::from_table(&outside),
            Err(KlError::Parse { .. })
        ));
        assert!(HFunction::from_table(
            "# eta=1\n# truncated_below=true\n# empty_slice=false\ns,h\n0.5,1\n0.4,2\n"
        )
        .is_err());
        assert!(HFunction::from_table("s,h\n0.5,1\n").is_err());
    }
}
