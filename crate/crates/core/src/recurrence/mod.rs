//! Shrinking-target hitting experiments and Borel–Cantelli classification.

mod classify;
mod hits;
mod schedule;

pub use classify::{borel_cantelli_classify, Classification, Verdict};
pub use hits::{checkpoints, run_metric_hits, run_symbolic_hits, Checkpoint, Engine, HitOptions, HitSeries, TargetKind, TrialRecord};
pub use schedule::{Rates, Schedule};

use num_rational::BigRational;

use crate::coding::{itinerary, CylinderChain, EXACT_DEPTH_CAP};
use crate::error::{Error, Result};
use crate::exact::{from_f64, ln_abs, to_f64};
use crate::maps::{MapKind, MapModel, Point};
use crate::measures::InvariantMeasure;

/// Depth of the precomputed mass table for finite-alphabet linear maps.
const LINEAR_TABLE_DEPTH: usize = 4096;
/// Depth used to locate float targets and sample their itineraries.
const FLOAT_TARGET_DEPTH: usize = 48;

#[derive(Clone, Debug, PartialEq)]
enum DigitSource {
    Periodic(Vec<u32>),
    Finite(Vec<u32>),
}

/// A target `x0` together with its itinerary and the local quantities the
/// zero-one laws depend on.
#[derive(Clone, Debug)]
pub struct TargetPoint {
    pub point: Point,
    digits: DigitSource,
    /// `ln µ(P(t, x0))` for `t = 0, 1, …`.
    ln_masses: Vec<f64>,
    /// Upper and lower local `P_0`-dimension of `λ`; identically 1 on the
    /// line and the circle.
    pub delta_upper: f64,
    pub delta_lower: f64,
    /// Decay rate `τ̄`; exactly 0 when certified.
    pub tau_upper: f64,
    pub tau_certified: bool,
}

impl TargetPoint {
    /// Target given by a point; its itinerary must avoid partition endpoints.
    pub fn from_point(map: &MapModel, mu: &InvariantMeasure, x: Point) -> Result<Self> {
        let depth = match (map.kind(), &x) {
            (MapKind::DAryShift { .. } | MapKind::MarkovLinear(_), Point::Exact(_)) => 512,
            (MapKind::Gauss, Point::Exact(_)) => EXACT_DEPTH_CAP,
            _ => FLOAT_TARGET_DEPTH,
        };
        let it = itinerary(map, &x, depth)?;
        if let Some(&step) = it.boundary_steps.first() {
            return Err(Error::BoundaryPoint { step });
        }
        let digits = it.complete()?;
        // rational points of linear maps are eventually periodic; store the exact cycle
        let source = match (&x, map.is_symbolic()) {
            (Point::Exact(_), true) => periodic_tail(&digits).map_or(DigitSource::Finite(digits.clone()), |(pre, cyc)| {
                if pre == 0 { DigitSource::Periodic(cyc) } else { DigitSource::Finite(digits.clone()) }
            }),
            _ => DigitSource::Finite(digits),
        };
        Self::build(map, mu, x, source)
    }

    /// The periodic point with itinerary `word word word …`.
    pub fn periodic(map: &MapModel, mu: &InvariantMeasure, word: &[u32]) -> Result<Self> {
        if word.is_empty() {
            return Err(Error::InvalidParameter("empty target word".into()));
        }
        for (i, &d) in word.iter().enumerate() {
            let next = word[(i + 1) % word.len()];
            map.check_digit(d)?;
            if !map.transition_allowed(d, next) {
                return Err(Error::NotAdmissible { from: d, to: next });
            }
        }
        let point = if map.is_symbolic() {
            // one period maps block(w0) into itself affinely; take its fixed point
            let mut w = word.to_vec();
            w.push(word[0]);
            let c = crate::coding::cylinder_from_word(map, &w)?;
            let blk = map.partition_block(word[0])?;
            let scale = c.length() / blk.length();
            let offset = &c.interval.left - &scale * &blk.left;
            Point::Exact(offset / (BigRational::from_integer(1.into()) - scale))
        } else {
            let reps = 40 / word.len() + 1;
            let w: Vec<u32> = word.iter().cycle().take(reps * word.len()).copied().collect();
            let c = crate::coding::cylinder_from_word(map, &w)?;
            let mid = to_f64(&((&c.interval.left + &c.interval.right) / BigRational::from_integer(2.into())));
            Point::Approx(mid.rem_euclid(1.0))
        };
        Self::build(map, mu, point, DigitSource::Periodic(word.to_vec()))
    }

    fn build(map: &MapModel, mu: &InvariantMeasure, point: Point, digits: DigitSource) -> Result<Self> {
        let table_depth = match map.kind() {
            MapKind::DAryShift { .. } | MapKind::MarkovLinear(_) => LINEAR_TABLE_DEPTH,
            _ => match &digits {
                DigitSource::Periodic(_) => EXACT_DEPTH_CAP,
                DigitSource::Finite(d) => (d.len() - 1).min(EXACT_DEPTH_CAP),
            },
        };
        let digit_at = |k: usize| match &digits {
            DigitSource::Periodic(w) => Some(w[k % w.len()]),
            DigitSource::Finite(d) => d.get(k).copied(),
        };
        let mut ln_masses = Vec::with_capacity(table_depth + 1);
        let mut ln_lengths = Vec::with_capacity(table_depth + 1);
        match (map.kind(), mu) {
            (_, InvariantMeasure::MarkovStationary { p, matrix }) => {
                let mut acc = ln_abs(&p[digit_at(0).unwrap() as usize]);
                ln_masses.push(acc);
                for k in 1..=table_depth {
                    let Some(d) = digit_at(k) else { break };
                    acc += ln_abs(matrix.get(digit_at(k - 1).unwrap() as usize, d as usize));
                    ln_masses.push(acc);
                }
                ln_lengths = ln_masses.clone();
            }
            (MapKind::DAryShift { digits: d }, _) => {
                let step = (*d as f64).ln();
                for k in 0..=table_depth {
                    if digit_at(k).is_none() {
                        break;
                    }
                    ln_masses.push(-(k as f64 + 1.0) * step);
                }
                ln_lengths = ln_masses.clone();
            }
            _ => {
                let mut chain = CylinderChain::new(map, digit_at(0).unwrap())?;
                for k in 0..=table_depth {
                    if k > 0 {
                        let Some(d) = digit_at(k) else { break };
                        chain.push(d)?;
                    }
                    let c = chain.cylinder();
                    let ln_len = ln_abs(&c.length());
                    ln_lengths.push(ln_len);
                    // circle arcs may be lifted past 1; Lebesgue mass is then the length
                    let ln_mu = match mu {
                        InvariantMeasure::Gauss => mu.measure_interval(&c.interval.left, &c.interval.right)?.ln(),
                        _ => ln_len,
                    };
                    ln_masses.push(ln_mu);
                }
            }
        }
        let (tau_upper, tau_certified) = match (&digits, map.finite_alphabet()) {
            (_, Some(_)) | (DigitSource::Periodic(_), None) => (0.0, true),
            (DigitSource::Finite(_), None) => {
                let n = ln_lengths.len() - 1;
                let est = (n / 2..n)
                    .map(|k| (ln_lengths[k] - ln_lengths[k + 1]) / (k + 1) as f64)
                    .fold(0.0, f64::max);
                (est, false)
            }
        };
        Ok(TargetPoint { point, digits, ln_masses, delta_upper: 1.0, delta_lower: 1.0, tau_upper, tau_certified })
    }

    pub fn digit(&self, k: u64) -> Option<u32> {
        match &self.digits {
            DigitSource::Periodic(w) => Some(w[(k % w.len() as u64) as usize]),
            DigitSource::Finite(d) => d.get(k as usize).copied(),
        }
    }

    pub fn prefix(&self, len: usize) -> Result<Vec<u32>> {
        (0..len as u64)
            .map(|k| {
                self.digit(k).ok_or_else(|| {
                    Error::InsufficientResolution(format!("target itinerary known to depth {} only", k.saturating_sub(1)))
                })
            })
            .collect()
    }

    pub fn period(&self) -> Option<usize> {
        match &self.digits {
            DigitSource::Periodic(w) => Some(w.len()),
            DigitSource::Finite(_) => None,
        }
    }

    pub fn known_depth(&self) -> Option<usize> {
        match &self.digits {
            DigitSource::Periodic(_) => None,
            DigitSource::Finite(d) => Some(d.len() - 1),
        }
    }

    pub fn point_rational(&self) -> BigRational {
        match &self.point {
            Point::Exact(q) => q.clone(),
            Point::Approx(x) => from_f64(*x),
        }
    }

    /// `ln µ(P(t, x0))`, extrapolated linearly past the table.
    pub fn ln_mass(&self, t: u64) -> f64 {
        let n = self.ln_masses.len() as u64;
        if t < n {
            return self.ln_masses[t as usize];
        }
        let last = self.ln_masses[(n - 1) as usize];
        last - (t - (n - 1)) as f64 * self.mass_decay_rate().upper
    }

    pub fn mass(&self, t: u64) -> f64 {
        self.ln_mass(t).exp()
    }

    /// Per-digit exponential decay rate of `µ(P(t, x0))`.
    pub fn mass_decay_rate(&self) -> Rates {
        let n = self.ln_masses.len() - 1;
        if let Some(p) = self.period() {
            if n >= p {
                let r = (self.ln_masses[n - p] - self.ln_masses[n]) / p as f64;
                return Rates { upper: r, lower: r };
            }
        }
        if n == 0 {
            return Rates { upper: f64::INFINITY, lower: 0.0 };
        }
        let rates: Vec<f64> = (n / 2..n).map(|k| (self.ln_masses[0] - self.ln_masses[k + 1]) / (k + 1) as f64).collect();
        Rates {
            upper: rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            lower: rates.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// `L̄, L̲ = limsup/liminf (1/n) log(1/µ(P(t_n, x0)))`.
    pub fn code_rates(&self, sched: &Schedule) -> Option<Rates> {
        let w = sched.depth_rates()?;
        let lam = self.mass_decay_rate();
        let mul = |a: f64, b: f64| if a == 0.0 || b == 0.0 { 0.0 } else { a * b };
        Some(Rates { upper: mul(w.upper, lam.upper), lower: mul(w.lower, lam.lower) })
    }
}

/// Splits a digit list as `prefix ++ cycle ++ cycle …` when the whole tail
/// after a short prefix repeats.
fn periodic_tail(d: &[u32]) -> Option<(usize, Vec<u32>)> {
    let n = d.len();
    for pre in 0..n / 4 {
        for p in 1..=(n - pre) / 4 {
            if (pre + p..n).all(|k| d[k] == d[k - p]) {
                return Some((pre, d[pre..pre + p].to_vec()));
            }
        }
    }
    None
}
