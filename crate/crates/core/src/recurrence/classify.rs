use serde::{Deserialize, Serialize};

use super::{Schedule, TargetPoint};
use crate::error::{Error, Result};
use crate::maps::MapModel;
use crate::measures::InvariantMeasure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    MeasureZero,
    FullMeasure,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    /// The series whose behavior decides the verdict.
    pub series: String,
    /// `(n, Σ_{j≤n} term_j)` at `n = 10, 100, …, 10^6`.
    pub partial_sums: Vec<(u64, f64)>,
    /// Partial sums of `Σ r_n^{δ̄+τ̄/log β+ε}` for radii schedules.
    pub strengthened_sums: Option<Vec<(u64, f64)>>,
    pub strengthened_exponent: Option<f64>,
    /// Closed-form reasoning when the schedule is canonical.
    pub closed_form: Option<String>,
    pub notes: Vec<String>,
}

const SUM_HORIZON: u64 = 1_000_000;

fn partial_sums(term: impl Fn(u64) -> f64) -> Vec<(u64, f64)> {
    let mut out = Vec::new();
    let mut acc = 0.0;
    let mut next = 10;
    for n in 1..=SUM_HORIZON {
        acc += term(n);
        if n == next {
            out.push((n, acc));
            next *= 10;
        }
    }
    out
}

/// Growth test for schedules without closed form: compares the last decade
/// increment against the one before it.
fn numeric_verdict(sums: &[(u64, f64)]) -> Verdict {
    let k = sums.len();
    let (a, b, c) = (sums[k - 3].1, sums[k - 2].1, sums[k - 1].1);
    let (d1, d2) = (b - a, c - b);
    if c == 0.0 || d2 <= 1e-3 * c && d2 <= 0.2 * d1 {
        Verdict::MeasureZero
    } else if d2 >= 0.5 * d1 && d2 > 1e-3 * c {
        Verdict::FullMeasure
    } else {
        Verdict::Inconclusive
    }
}

fn ball_mass(mu: &InvariantMeasure, x0: f64, r: f64, circle: bool) -> f64 {
    if circle {
        return (2.0 * r).min(1.0);
    }
    mu.measure_interval_f64((x0 - r).max(0.0), (x0 + r).min(1.0))
}

/// Decides whether `{x : T^n x hits target n infinitely often}` is null or
/// full, from the convergence of the target-mass series.
pub fn borel_cantelli_classify(
    map: &MapModel,
    mu: &InvariantMeasure,
    target: &TargetPoint,
    sched: &Schedule,
) -> Result<Classification> {
    sched.validate()?;
    if !mu.compatible_with(map) {
        return Err(Error::Unsupported(format!("{} measure with {} map", mu.name(), map.name())));
    }
    if sched.is_radii() {
        classify_radii(map, mu, target, sched)
    } else {
        classify_depths(target, sched)
    }
}

fn classify_radii(map: &MapModel, mu: &InvariantMeasure, target: &TargetPoint, sched: &Schedule) -> Result<Classification> {
    let x0 = target.point.to_f64();
    let circle = map.is_circle();
    let sums = partial_sums(|n| ball_mass(mu, x0, sched.radius(n), circle));
    let log_beta = map.expansion_beta().ln();
    let base_exponent = target.delta_upper + target.tau_upper / log_beta;
    let mut notes = Vec::new();
    if !target.tau_certified {
        notes.push(format!("decay rate estimated numerically as {:.4}; not certified", target.tau_upper));
    }
    let (verdict, closed_form, eps) = match sched {
        Schedule::RadiiPower { alpha } => {
            let a = *alpha;
            if a < 1.0 {
                (Verdict::MeasureZero, Some(format!("sum of n^(-1/{a}) converges since 1/{a} > 1")), 0.0)
            } else if a == 1.0 {
                notes.push("sum of 1/n diverges but every strengthened series converges".into());
                (Verdict::Inconclusive, None, 0.0)
            } else if base_exponent < a && (target.tau_certified || base_exponent < 0.9 * a) {
                let eps = (a - base_exponent) / 2.0;
                (
                    Verdict::FullMeasure,
                    Some(format!(
                        "sum of n^(-({base_exponent}+{eps})/{a}) diverges since the exponent is below 1"
                    )),
                    eps,
                )
            } else {
                (Verdict::Inconclusive, None, 0.0)
            }
        }
        Schedule::RadiiExp { kappa } => {
            (Verdict::MeasureZero, Some(format!("sum of e^(-{kappa} n) converges")), 0.0)
        }
        Schedule::RadiiConst { r } => {
            (Verdict::FullMeasure, Some(format!("constant radius {r}: the ball has positive mass")), 0.0)
        }
        _ => {
            let v = numeric_verdict(&sums);
            let v = if v == Verdict::FullMeasure && !target.tau_certified { Verdict::Inconclusive } else { v };
            notes.push("numeric growth test on partial sums".into());
            (v, None, 0.01)
        }
    };
    let exponent = base_exponent + eps.max(1e-9);
    let strengthened = partial_sums(|n| sched.radius(n).powf(exponent));
    let verdict = if closed_form.is_none() && sched_is_custom(sched) {
        // a full-measure verdict still needs the strengthened series to grow
        match (verdict, numeric_verdict(&strengthened)) {
            (Verdict::FullMeasure, Verdict::FullMeasure) => Verdict::FullMeasure,
            (Verdict::FullMeasure, _) => Verdict::Inconclusive,
            (v, _) => v,
        }
    } else {
        verdict
    };
    Ok(Classification {
        verdict,
        series: "sum of mu(B(x0, r_n))".into(),
        partial_sums: sums,
        strengthened_sums: Some(strengthened),
        strengthened_exponent: Some(exponent),
        closed_form,
        notes,
    })
}

fn sched_is_custom(s: &Schedule) -> bool {
    matches!(s, Schedule::CustomRadii { .. } | Schedule::CustomDepths { .. })
}

fn classify_depths(target: &TargetPoint, sched: &Schedule) -> Result<Classification> {
    let sums = partial_sums(|n| target.mass(sched.depth(n)));
    let rate = target.mass_decay_rate();
    let mut notes = vec![format!("target cylinder masses decay at rate {:.6} per digit", rate.upper)];
    let (verdict, closed_form) = match sched {
        Schedule::DepthConst { t } => (Verdict::FullMeasure, Some(format!("constant depth {t}: every term is mu(P({t},x0)) > 0"))),
        Schedule::DepthLogFloor { base } => {
            // mu(P(floor(log_b n), x0)) ~ n^(-rate/ln b)
            let s = rate.upper / base.ln();
            let comparable = target.period().is_some() || rate.upper == rate.lower;
            if s < 1.0 - 1e-9 {
                (Verdict::FullMeasure, Some(format!("terms decay like n^(-{s:.6}), exponent below 1: diverges")))
            } else if s > 1.0 + 1e-9 {
                (Verdict::MeasureZero, Some(format!("terms decay like n^(-{s:.6}), exponent above 1: converges")))
            } else if comparable {
                (Verdict::FullMeasure, Some("terms are comparable to 1/n: harmonic divergence".into()))
            } else {
                (Verdict::Inconclusive, None)
            }
        }
        Schedule::DepthPowerFloor { kappa } => {
            if rate.lower > 0.0 {
                (
                    Verdict::MeasureZero,
                    Some(format!("terms are at most e^(-{:.6} n^{kappa}) up to a constant: converges", rate.lower)),
                )
            } else {
                (Verdict::Inconclusive, None)
            }
        }
        _ => {
            notes.push("numeric growth test on partial sums".into());
            (numeric_verdict(&sums), None)
        }
    };
    Ok(Classification {
        verdict,
        series: "sum of mu(P(t_n, x0))".into(),
        partial_sums: sums,
        strengthened_sums: None,
        strengthened_exponent: None,
        closed_form,
        notes,
    })
}
