//! Black-box target functions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Where an oracle's value is finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainHint {
    /// Open box `lower < x < upper`.
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
}

/// A target function `f: ℝⁿ → ℝ ∪ {+∞}` with access to `dist(0, ∂f(x))`.
///
/// Implementations must keep `subgrad_dist(x) <= ‖u‖` for every `u` returned by
/// `subgrad_sample(x)`, and return a finite value wherever the distance is finite.
pub trait FnOracle: Send + Sync {
    fn dim(&self) -> usize;

    /// `f(x)`, `+∞` outside the domain.
    fn value(&self, x: &[f64]) -> f64;

    /// `dist(0, ∂f(x))`, `+∞` where the subdifferential is empty.
    fn subgrad_dist(&self, x: &[f64]) -> f64;

    /// False for value-only oracles.
    fn has_subgrad(&self) -> bool {
        true
    }

    /// A finite set of subgradients at `x`, if the oracle can produce one.
    fn subgrad_sample(&self, _x: &[f64]) -> Option<Vec<Vec<f64>>> {
        None
    }

    fn domain_hint(&self) -> Option<DomainHint> {
        None
    }
}

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type SampleFn = Arc<dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync>;

/// Oracle assembled from closures.
#[derive(Clone)]
pub struct AnalyticOracle {
    dim: usize,
    value: ScalarFn,
    dist: Option<ScalarFn>,
    sample: Option<SampleFn>,
    hint: Option<DomainHint>,
}

impl std::fmt::Debug for AnalyticOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnalyticOracle")
            .field("dim", &self.dim)
            .field("has_subgrad", &self.dist.is_some())
            .field("has_sampler", &self.sample.is_some())
            .finish()
    }
}

impl AnalyticOracle {
    pub fn new(
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        dist: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        AnalyticOracle {
            dim,
            value: Arc::new(value),
            dist: Some(Arc::new(dist)),
            sample: None,
            hint: None,
        }
    }

    pub fn value_only(dim: usize, value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        AnalyticOracle {
            dim,
            value: Arc::new(value),
            dist: None,
            sample: None,
            hint: None,
        }
    }

    /// Smooth function from its gradient; `dist = ‖∇f‖` and the sampler returns `∇f`.
    pub fn smooth(
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        let gradient = Arc::new(gradient);
        let g2 = gradient.clone();
        AnalyticOracle {
            dim,
            value: Arc::new(value),
            dist: Some(Arc::new(move |x: &[f64]| norm(&gradient(x)))),
            sample: Some(Arc::new(move |x: &[f64]| vec![g2(x)])),
            hint: None,
        }
    }

    pub fn with_sampler(
        mut self,
        sample: impl Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.sample = Some(Arc::new(sample));
        self
    }

    pub fn with_domain_hint(mut self, hint: DomainHint) -> Self {
        self.hint = Some(hint);
        self
    }
}

impl FnOracle for AnalyticOracle {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn subgrad_dist(&self, x: &[f64]) -> f64 {
        match &self.dist {
            Some(d) => d(x),
            None => f64::NAN,
        }
    }

    fn has_subgrad(&self) -> bool {
        self.dist.is_some()
    }

    fn subgrad_sample(&self, x: &[f64]) -> Option<Vec<Vec<f64>>> {
        self.sample.as_ref().map(|s| s(x))
    }

    fn domain_hint(&self) -> Option<DomainHint> {
        self.hint.clone()
    }
}

/// Euclidean norm, scaled so tiny or huge entries do not underflow or overflow.
pub(crate) fn norm(v: &[f64]) -> f64 {
    let m = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    m * v.iter().map(|x| (x / m) * (x / m)).sum::<f64>().sqrt()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
