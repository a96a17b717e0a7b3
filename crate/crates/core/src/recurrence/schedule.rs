use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::from_f64;

/// Shrinking-target schedule: radii `r_n` or cylinder depths `t_n`, `n ≥ 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// `r_n = n^{-1/α}`.
    RadiiPower { alpha: f64 },
    /// `r_n = e^{-κn}`.
    RadiiExp { kappa: f64 },
    RadiiConst { r: f64 },
    /// `t_n = ⌊log_base n⌋`; `base` defaults to e.
    DepthLogFloor {
        #[serde(default = "default_base")]
        base: f64,
    },
    /// `t_n = ⌊n^κ⌋`.
    DepthPowerFloor { kappa: f64 },
    DepthConst { t: u64 },
    /// `r_n` from a table, `values[n-1]`; the last entry repeats.
    CustomRadii { values: Vec<f64> },
    CustomDepths { values: Vec<u64> },
}

fn default_base() -> f64 {
    std::f64::consts::E
}

/// Upper and lower exponential rates of a schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub upper: f64,
    pub lower: f64,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        match self {
            Schedule::RadiiPower { alpha } if !(*alpha > 0.0 && alpha.is_finite()) => bad("alpha must be positive"),
            Schedule::RadiiExp { kappa } if !(*kappa > 0.0 && kappa.is_finite()) => bad("kappa must be positive"),
            Schedule::RadiiConst { r } if !(*r > 0.0 && r.is_finite()) => bad("radius must be positive"),
            Schedule::DepthLogFloor { base } if !(*base > 1.0 && base.is_finite()) => bad("log base must exceed 1"),
            Schedule::DepthPowerFloor { kappa } if !(*kappa > 0.0 && kappa.is_finite()) => bad("kappa must be positive"),
            Schedule::CustomRadii { values } => {
                if values.is_empty() || values.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                    return bad("custom radii must be positive");
                }
                if values.windows(2).any(|w| w[1] > w[0]) {
                    return bad("custom radii must be non-increasing");
                }
                Ok(())
            }
            Schedule::CustomDepths { values } => {
                if values.is_empty() || values.windows(2).any(|w| w[1] < w[0]) {
                    return bad("custom depths must be non-empty and non-decreasing");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn is_radii(&self) -> bool {
        matches!(
            self,
            Schedule::RadiiPower { .. } | Schedule::RadiiExp { .. } | Schedule::RadiiConst { .. } | Schedule::CustomRadii { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            Schedule::RadiiPower { .. } => "radii_power",
            Schedule::RadiiExp { .. } => "radii_exp",
            Schedule::RadiiConst { .. } => "radii_const",
            Schedule::DepthLogFloor { .. } => "depth_log_floor",
            Schedule::DepthPowerFloor { .. } => "depth_power_floor",
            Schedule::DepthConst { .. } => "depth_const",
            Schedule::CustomRadii { .. } => "custom_radii",
            Schedule::CustomDepths { .. } => "custom_depths",
        }
    }

    /// `r_n`; panics on depth schedules.
    pub fn radius(&self, n: u64) -> f64 {
        let n = n.max(1);
        match self {
            Schedule::RadiiPower { alpha } => (n as f64).powf(-1.0 / alpha),
            Schedule::RadiiExp { kappa } => (-kappa * n as f64).exp(),
            Schedule::RadiiConst { r } => *r,
            Schedule::CustomRadii { values } => values[(n as usize - 1).min(values.len() - 1)],
            _ => panic!("radius() on a depth schedule"),
        }
    }

    pub fn radius_exact(&self, n: u64) -> BigRational {
        from_f64(self.radius(n))
    }

    /// `t_n`; panics on radii schedules. Saturates at `u64::MAX`.
    pub fn depth(&self, n: u64) -> u64 {
        let n = n.max(1);
        match self {
            Schedule::DepthLogFloor { base } => {
                let mut t = ((n as f64).ln() / base.ln()).floor() as u64;
                // correct float error at exact powers of the base
                while base.powf((t + 1) as f64) <= n as f64 {
                    t += 1;
                }
                while t > 0 && base.powf(t as f64) > n as f64 {
                    t -= 1;
                }
                t
            }
            Schedule::DepthPowerFloor { kappa } => {
                if *kappa == 2.0 {
                    return n.saturating_mul(n);
                }
                let v = (n as f64).powf(*kappa).floor();
                if v >= u64::MAX as f64 { u64::MAX } else { v as u64 }
            }
            Schedule::DepthConst { t } => *t,
            Schedule::CustomDepths { values } => values[(n as usize - 1).min(values.len() - 1)],
            _ => panic!("depth() on a radii schedule"),
        }
    }

    /// `ℓ̄, ℓ̲ = limsup/liminf (1/n) log(1/r_n)`.
    pub fn radius_rates(&self) -> Option<Rates> {
        match self {
            Schedule::RadiiPower { .. } | Schedule::RadiiConst { .. } => Some(Rates { upper: 0.0, lower: 0.0 }),
            Schedule::RadiiExp { kappa } => Some(Rates { upper: *kappa, lower: *kappa }),
            Schedule::CustomRadii { values } => {
                let rate = |i: usize| -values[i].ln() / (i + 1) as f64;
                Some(tail_rates(values.len(), rate))
            }
            _ => None,
        }
    }

    /// `w̄, w̲ = limsup/liminf t_n / n`.
    pub fn depth_rates(&self) -> Option<Rates> {
        match self {
            Schedule::DepthLogFloor { .. } | Schedule::DepthConst { .. } => Some(Rates { upper: 0.0, lower: 0.0 }),
            Schedule::DepthPowerFloor { kappa } => {
                let w = if *kappa < 1.0 {
                    0.0
                } else if *kappa == 1.0 {
                    1.0
                } else {
                    f64::INFINITY
                };
                Some(Rates { upper: w, lower: w })
            }
            Schedule::CustomDepths { values } => Some(tail_rates(values.len(), |i| values[i] as f64 / (i + 1) as f64)),
            _ => None,
        }
    }
}

/// Max and min of a rate sequence over the second half of a table.
fn tail_rates(len: usize, rate: impl Fn(usize) -> f64) -> Rates {
    let tail = (len / 2..len).map(rate);
    let (upper, lower) = tail.fold((f64::NEG_INFINITY, f64::INFINITY), |(u, l), v| (u.max(v), l.min(v)));
    Rates { upper, lower }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_floor_is_exact_at_powers() {
        let s = Schedule::DepthLogFloor { base: 2.0 };
        assert_eq!(s.depth(1), 0);
        assert_eq!(s.depth(7), 2);
        assert_eq!(s.depth(8), 3);
        assert_eq!(s.depth(1 << 40), 40);
        assert_eq!(s.depth((1 << 40) - 1), 39);
        let s = Schedule::DepthLogFloor { base: 10.0 };
        assert_eq!(s.depth(1000), 3);
        assert_eq!(s.depth(999), 2);
    }

    #[test]
    fn closed_form_rates() {
        assert_eq!(Schedule::RadiiPower { alpha: 2.0 }.radius_rates().unwrap().upper, 0.0);
        assert_eq!(Schedule::RadiiExp { kappa: 0.7 }.radius_rates().unwrap().lower, 0.7);
        assert_eq!(Schedule::DepthPowerFloor { kappa: 0.5 }.depth_rates().unwrap().upper, 0.0);
        assert_eq!(Schedule::DepthPowerFloor { kappa: 1.5 }.depth_rates().unwrap().upper, f64::INFINITY);
    }

    #[test]
    fn custom_rates_from_table() {
        let values: Vec<f64> = (1..=200).map(|n| (-0.5 * n as f64).exp()).collect();
        let r = Schedule::CustomRadii { values }.radius_rates().unwrap();
        assert!((r.upper - 0.5).abs() < 1e-12 && (r.lower - 0.5).abs() < 1e-12);
    }

    #[test]
    fn radii_power_values() {
        let s = Schedule::RadiiPower { alpha: 0.5 };
        assert_eq!(s.radius(10), 0.01);
        assert!(Schedule::RadiiPower { alpha: -1.0 }.validate().is_err());
        assert!(Schedule::CustomRadii { values: vec![0.1, 0.2] }.validate().is_err());
    }

    #[test]
    fn serde_round_trip() {
        let s = Schedule::DepthLogFloor { base: 2.0 };
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"kind":"depth_log_floor","base":2.0}"#);
        assert_eq!(serde_json::from_str::<Schedule>(&j).unwrap(), s);
        let d: Schedule = serde_json::from_str(r#"{"kind":"depth_log_floor"}"#).unwrap();
        assert_eq!(d, Schedule::DepthLogFloor { base: std::f64::consts::E });
    }
}
