use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dimension bound with the inputs that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionBound {
    pub formula: String,
    pub grid_lower: Option<f64>,
    pub hausdorff_lower: Option<f64>,
    pub upper: Option<f64>,
    pub inputs: BTreeMap<String, f64>,
    pub flags: Vec<String>,
}

impl DimensionBound {
    fn new(formula: &str, inputs: &[(&str, f64)]) -> Self {
        DimensionBound {
            formula: formula.into(),
            grid_lower: None,
            hausdorff_lower: None,
            upper: None,
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            flags: Vec::new(),
        }
    }
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond { Ok(()) } else { Err(Error::InvalidParameter(msg.into())) }
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    require(v >= 0.0 && !v.is_nan(), &format!("{name} must be non-negative"))
}

/// `h/(h+δ̄ℓ̄)` for the grid dimension, times
/// `max(0, 1 - τ̄δ̄ℓ̄²/(h² log β))` for the Hausdorff dimension.
pub fn bound_radii_lower(h: f64, delta: f64, ell: f64, tau: f64, log_beta: f64) -> Result<DimensionBound> {
    require(h > 0.0, "entropy must be positive")?;
    require(log_beta > 0.0, "log beta must be positive")?;
    for (n, v) in [("delta", delta), ("ell", ell), ("tau", tau)] {
        nonneg(n, v)?;
    }
    let mut b = DimensionBound::new(
        "radii_lower",
        &[("h", h), ("delta_upper", delta), ("ell_upper", ell), ("tau_upper", tau), ("log_beta", log_beta)],
    );
    let grid = if ell.is_infinite() { 0.0 } else { h / (h + delta * ell) };
    let correction = if tau == 0.0 { 1.0 } else { (1.0 - tau * delta * ell * ell / (h * h * log_beta)).max(0.0) };
    b.grid_lower = Some(grid);
    b.hausdorff_lower = Some(grid * correction);
    b.flags.push("correction factor evaluated with the upper radius rate squared".into());
    Ok(b)
}

/// `1 - δ̄ℓ̄/(s log β)` clamped to `[0,1]`, for an `s`-Ahlfors doubling `λ`.
pub fn bound_doubling(delta: f64, ell: f64, s: f64, log_beta: f64) -> Result<DimensionBound> {
    require(s > 0.0, "Ahlfors exponent must be positive")?;
    require(log_beta > 0.0, "log beta must be positive")?;
    nonneg("delta", delta)?;
    nonneg("ell", ell)?;
    let mut b = DimensionBound::new("doubling", &[("delta_upper", delta), ("ell_upper", ell), ("s", s), ("log_beta", log_beta)]);
    b.hausdorff_lower = Some((1.0 - delta * ell / (s * log_beta)).clamp(0.0, 1.0));
    Ok(b)
}

/// `h/(h+L̄)` for cylinder targets.
pub fn bound_code_lower(h: f64, l_upper: f64) -> Result<DimensionBound> {
    require(h > 0.0, "entropy must be positive")?;
    nonneg("L_upper", l_upper)?;
    let mut b = DimensionBound::new("code_lower", &[("h", h), ("L_upper", l_upper)]);
    b.hausdorff_lower = Some(if l_upper.is_infinite() { 0.0 } else { h / (h + l_upper) });
    Ok(b)
}

/// `1/(1+w̄)` for cylinder targets.
pub fn bound_code_w(w_upper: f64) -> Result<DimensionBound> {
    nonneg("w_upper", w_upper)?;
    let mut b = DimensionBound::new("code_w", &[("w_upper", w_upper)]);
    b.hausdorff_lower = Some(if w_upper.is_infinite() { 0.0 } else { 1.0 / (1.0 + w_upper) });
    Ok(b)
}

/// `min(1, log D/(h + rate))`, where `rate` is `L̲` for cylinder targets or
/// `δ̲ℓ̲` for balls.
pub fn bound_upper_finite(d: usize, h: f64, rate_lower: f64) -> Result<DimensionBound> {
    require(d >= 2, "partition needs at least 2 blocks")?;
    require(h > 0.0, "entropy must be positive")?;
    nonneg("rate", rate_lower)?;
    let mut b = DimensionBound::new("upper_finite", &[("D", d as f64), ("h", h), ("rate_lower", rate_lower)]);
    b.upper = Some((((d as f64).ln()) / (h + rate_lower)).min(1.0));
    Ok(b)
}

pub fn bound_upper_radii(d: usize, h: f64, delta_lower: f64, ell_lower: f64) -> Result<DimensionBound> {
    nonneg("delta", delta_lower)?;
    nonneg("ell", ell_lower)?;
    let mut b = bound_upper_finite(d, h, delta_lower * ell_lower)?;
    b.formula = "upper_radii".into();
    b.inputs.insert("delta_lower".into(), delta_lower);
    b.inputs.insert("ell_lower".into(), ell_lower);
    Ok(b)
}

/// Upper bound for Bernoulli measures from Hoeffding's inequality:
/// `(S + h - L)/(S + h + L)`, `S = sqrt((h+L)² + 2L log(max p/min p)²)`.
pub fn bound_hoeffding(p: &[f64], l_lower: f64) -> Result<DimensionBound> {
    require(p.len() >= 2, "need at least two weights")?;
    require(p.iter().all(|&x| x > 0.0), "Hoeffding bound needs strictly positive weights")?;
    require((p.iter().sum::<f64>() - 1.0).abs() < 1e-12, "weights must sum to 1")?;
    nonneg("L_lower", l_lower)?;
    let h: f64 = p.iter().map(|&x| -x * x.ln()).sum();
    let max = p.iter().copied().fold(f64::MIN, f64::max);
    let min = p.iter().copied().fold(f64::MAX, f64::min);
    let spread = (max / min).ln();
    let s = ((h + l_lower).powi(2) + 2.0 * l_lower * spread * spread).sqrt();
    let mut b = DimensionBound::new("hoeffding", &[("h", h), ("L_lower", l_lower), ("log_spread", spread)]);
    b.upper = Some((s + h - l_lower) / (s + h + l_lower));
    Ok(b)
}

/// `b/(a+c) - log(1/δ)/(a+c) · j/(N_1+…+N_j)` at the last supplied level.
pub fn cantor_lambda(a: f64, b: f64, c: f64, delta: f64, levels: &[u64]) -> Result<f64> {
    require(a > 0.0 && c >= 0.0, "need a > 0 and c >= 0")?;
    require(delta > 0.0 && delta <= 1.0, "delta must lie in (0,1]")?;
    require(!levels.is_empty(), "need at least one level size")?;
    let total: u64 = levels.iter().sum();
    let limit = levels.len() as f64 / total as f64;
    Ok(b / (a + c) - (1.0 / delta).ln() / (a + c) * limit)
}

/// A mass sequence `a_n` or `b_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MassSequence {
    /// `ratio^n`.
    Geometric { ratio: f64 },
    /// Explicit values for `n = 1, 2, …`.
    Table { values: Vec<f64> },
}

impl MassSequence {
    fn ln_inv(&self, n: usize) -> f64 {
        match self {
            MassSequence::Geometric { ratio } => -(n as f64) * ratio.ln(),
            MassSequence::Table { values } => -values[n - 1].ln(),
        }
    }

    fn len(&self) -> Option<usize> {
        match self {
            MassSequence::Geometric { .. } => None,
            MassSequence::Table { values } => Some(values.len()),
        }
    }
}

/// `1 - (1 - grid_dim) · limsup log(1/a_n)/log(1/b_{n-1})`, clamped.
pub fn grid_transfer(a: &MassSequence, b: &MassSequence, grid_dim: f64) -> Result<DimensionBound> {
    require((0.0..=1.0).contains(&grid_dim), "grid dimension must lie in [0,1]")?;
    for s in [a, b] {
        match s {
            MassSequence::Geometric { ratio } => require(*ratio > 0.0 && *ratio < 1.0, "geometric ratio must lie in (0,1)")?,
            MassSequence::Table { values } => require(
                values.len() >= 2 && values.iter().all(|&v| v > 0.0 && v < 1.0),
                "mass tables need at least 2 values in (0,1)",
            )?,
        }
    }
    let factor = match (a, b) {
        (MassSequence::Geometric { ratio: ra }, MassSequence::Geometric { ratio: rb }) => ra.ln() / rb.ln(),
        _ => {
            let n = a.len().into_iter().chain(b.len().map(|l| l + 1)).min().unwrap();
            a.ln_inv(n) / b.ln_inv(n - 1)
        }
    };
    let mut out = DimensionBound::new("grid_transfer", &[("grid_dim", grid_dim), ("factor", factor)]);
    out.hausdorff_lower = Some((1.0 - (1.0 - grid_dim) * factor).clamp(0.0, 1.0));
    Ok(out)
}
