//! Compact `form:key=value,...` specs, as accepted by the CLI's `--phi` flag.
//!
//! ```text
//! power:c=1,theta=0.5
//! sqrtneginvlog            (eta defaults to e^{-3/2})
//! expsqrt:a=2,b=2,eta=inf
//! {"form": "power", ...}   (a full JSON document)
//! ```

use std::collections::BTreeMap;

use super::{DesingFn, Form};
use crate::error::{KlError, Result};
use crate::eta::Eta;

fn take_number(
    params: &mut BTreeMap<String, String>,
    key: &str,
    default: Option<f64>,
) -> Result<f64> {
    match params.remove(key) {
        Some(v) => v
            .trim()
            .parse::<f64>()
            .map_err(|_| KlError::parse(1, format!("parameter {key}={v:?} is not a number"))),
        None => default.ok_or_else(|| KlError::parse(1, format!("missing parameter {key}"))),
    }
}

/// Parses a `--phi` spec or an inline JSON document.
pub fn parse_phi_spec(spec: &str) -> Result<DesingFn> {
    let spec = spec.trim();
    if spec.starts_with('{') {
        return DesingFn::from_document(spec);
    }
    let (name, rest) = match spec.split_once(':') {
        Some((n, r)) => (n.trim(), r),
        None => (spec, ""),
    };
    let mut params = BTreeMap::new();
    for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| KlError::parse(1, format!("expected key=value, got {item:?}")))?;
        if params
            .insert(k.trim().to_ascii_lowercase(), v.trim().to_string())
            .is_some()
        {
            return Err(KlError::parse(1, format!("duplicate parameter {k:?}")));
        }
    }
    let eta = params.remove("eta").map(|v| v.parse::<Eta>()).transpose()?;
    let form = match name.to_ascii_lowercase().as_str() {
        "power" => Form::Power {
            c: take_number(&mut params, "c", Some(1.0))?,
            theta: take_number(&mut params, "theta", Some(0.0))?,
        },
        "sqrtneginvlog" | "neglog" | "sqrt_neg_inv_log" => Form::SqrtNegInvLog,
        "expsqrt" | "scaled_exp_sqrt" => Form::ScaledExpSqrt {
            a: take_number(&mut params, "a", Some(1.0))?,
            b: take_number(&mut params, "b", Some(1.0))?,
        },
        other => return Err(KlError::parse(1, format!("unknown form {other:?}"))),
    };
    if let Some(k) = params.keys().next() {
        return Err(KlError::parse(
            1,
            format!("unknown parameter {k:?} for form {name}"),
        ));
    }
    let eta = eta.unwrap_or_else(|| super::default_eta(&form));
    DesingFn::from_parts(form, eta)
}
