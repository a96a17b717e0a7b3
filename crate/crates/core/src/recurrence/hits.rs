use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Schedule, TargetPoint};
use crate::coding::distance;
use crate::error::{Error, Result};
use crate::exact::to_f64;
use crate::maps::{InverseMap, MapKind, MapModel};
use crate::measures::InvariantMeasure;
use crate::seed::{trial_rng, trial_seed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Exact digit dynamics of a linear Markov map.
    Symbolic,
    /// Double-precision orbits.
    Float,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Metric,
    Symbolic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HitOptions {
    pub horizons: Vec<u64>,
    pub trials: u64,
    pub seed: u64,
    /// Defaults to symbolic for linear maps and float otherwise.
    pub engine: Option<Engine>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub n: u64,
    pub hits: u64,
    pub normalizer: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub checkpoints: Vec<Checkpoint>,
    /// Metric targets: `min d(T^n x, x0)/r_n` over each window
    /// `(N_{k-1}, N_k]` between consecutive horizons (`N_0 = 0`).
    pub window_min: Vec<f64>,
    /// Restarts caused by an orbit reaching a boundary.
    pub resampled: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitSeries {
    pub target_kind: TargetKind,
    pub engine: Engine,
    pub horizons: Vec<u64>,
    pub trials: Vec<TrialRecord>,
    pub mean_final_ratio: f64,
    pub ci95: (f64, f64),
}

impl HitSeries {
    pub fn final_ratios(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.checkpoints.last().unwrap().ratio).collect()
    }

    pub fn final_hits(&self) -> Vec<u64> {
        self.trials.iter().map(|t| t.checkpoints.last().unwrap().hits).collect()
    }
}

/// Log-spaced checkpoints `{1,2,5}·10^k` up to the largest horizon, merged
/// with the horizons.
pub fn checkpoints(horizons: &[u64]) -> Vec<u64> {
    let max = horizons.iter().copied().max().unwrap_or(0);
    let mut out: Vec<u64> = horizons.to_vec();
    let mut p = 1u64;
    while p <= max {
        for m in [1, 2, 5] {
            if p * m <= max {
                out.push(p * m);
            }
        }
        p = p.saturating_mul(10);
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Digits and (for float orbits) points of one orbit, generated on demand
/// and kept only as far back as the current step.
struct Orbit<'a> {
    source: Source<'a>,
    digits: VecDeque<u32>,
    points: VecDeque<f64>,
    base: u64,
}

enum Source<'a> {
    Chain { rng: ChaCha8Rng, cdf: Vec<Vec<f64>>, allowed: Vec<Vec<bool>>, uniform: Option<u32>, state: Option<u32> },
    Float { map: &'a MapModel, x: f64 },
}

struct OrbitEnded;

impl<'a> Orbit<'a> {
    fn push(&mut self) -> std::result::Result<(), OrbitEnded> {
        match &mut self.source {
            Source::Chain { rng, cdf, allowed, uniform, state } => {
                let d = if let Some(n) = uniform {
                    if *n == 2 { rng.gen::<u32>() & 1 } else { rng.gen_range(0..*n) }
                } else {
                    let row = match state {
                        None => &cdf[cdf.len() - 1],
                        Some(s) => &cdf[*s as usize],
                    };
                    let u: f64 = rng.gen();
                    let mut k = row.iter().position(|&v| u < v).unwrap_or(row.len() - 1);
                    if let Some(s) = state {
                        if !allowed[*s as usize][k] {
                            k = (0..row.len()).rev().find(|&j| allowed[*s as usize][j]).unwrap();
                        }
                    }
                    k as u32
                };
                *state = Some(d);
                self.digits.push_back(d);
            }
            Source::Float { map, x } => {
                let (d, y, _) = map.step_f64(*x).ok_or(OrbitEnded)?;
                self.digits.push_back(d);
                self.points.push_back(*x);
                if y <= 0.0 && matches!(map.kind(), MapKind::Gauss) {
                    return Err(OrbitEnded);
                }
                *x = y;
            }
        }
        Ok(())
    }

    fn digit(&mut self, k: u64) -> std::result::Result<u32, OrbitEnded> {
        while self.base + self.digits.len() as u64 <= k {
            self.push()?;
        }
        Ok(self.digits[(k - self.base) as usize])
    }

    fn point(&mut self, k: u64) -> std::result::Result<f64, OrbitEnded> {
        self.digit(k)?;
        Ok(self.points[(k - self.base) as usize])
    }

    fn release_before(&mut self, k: u64) {
        while self.base < k && !self.digits.is_empty() {
            self.digits.pop_front();
            self.points.pop_front();
            self.base += 1;
        }
    }
}

/// Everything a trial needs that does not depend on the seed.
struct Plan<'a> {
    map: &'a MapModel,
    mu: &'a InvariantMeasure,
    target: &'a TargetPoint,
    kind: TargetKind,
    engine: Engine,
    horizons: Vec<u64>,
    checkpoints: Vec<u64>,
    /// `r_j` or `t_j` for `j = 1..=N`, index `j-1`.
    radii: Vec<f64>,
    depths: Vec<u64>,
    normalizer_at: Vec<f64>,
    x0: f64,
    /// Affine inverse branches `(offset, scale)` by `(digit, next)`, for
    /// rebuilding points from digits on the symbolic engine.
    affine: Vec<Vec<(f64, f64)>>,
    block_left: Vec<f64>,
}

fn ball_mass(mu: &InvariantMeasure, x0: f64, r: f64, circle: bool) -> f64 {
    if circle {
        return (2.0 * r).min(1.0);
    }
    let (a, b) = ((x0 - r).max(0.0), (x0 + r).min(1.0));
    mu.measure_interval_f64(a, b)
}

impl<'a> Plan<'a> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        map: &'a MapModel,
        mu: &'a InvariantMeasure,
        target: &'a TargetPoint,
        sched: &Schedule,
        kind: TargetKind,
        opts: &HitOptions,
    ) -> Result<Self> {
        sched.validate()?;
        if opts.horizons.is_empty() || opts.horizons.contains(&0) {
            return Err(Error::InvalidParameter("horizons must be a non-empty list of positive integers".into()));
        }
        if opts.trials == 0 {
            return Err(Error::InvalidParameter("trials must be positive".into()));
        }
        if !mu.compatible_with(map) {
            return Err(Error::Unsupported(format!("{} measure with {} map", mu.name(), map.name())));
        }
        let engine = opts.engine.unwrap_or(if map.is_symbolic() { Engine::Symbolic } else { Engine::Float });
        if engine == Engine::Symbolic && !map.is_symbolic() {
            return Err(Error::Unsupported("the symbolic engine needs a linear Markov map".into()));
        }
        let mut horizons = opts.horizons.clone();
        horizons.sort_unstable();
        horizons.dedup();
        let n_max = *horizons.last().unwrap();
        let checkpoints = checkpoints(&horizons);
        let x0 = target.point.to_f64();
        let circle = map.is_circle();
        let (mut radii, mut depths) = (Vec::new(), Vec::new());
        let mut normalizer_at = Vec::with_capacity(checkpoints.len());
        let mut acc = 0.0;
        let mut next_cp = 0;
        for j in 1..=n_max {
            acc += match kind {
                TargetKind::Metric => {
                    let r = sched.radius(j);
                    radii.push(r);
                    ball_mass(mu, x0, r, circle)
                }
                TargetKind::Symbolic => {
                    let t = sched.depth(j);
                    depths.push(t);
                    target.mass(t)
                }
            };
            if checkpoints[next_cp] == j {
                normalizer_at.push(acc);
                next_cp += 1;
            }
        }
        let (affine, block_left) = match map.kind() {
            MapKind::DAryShift { .. } | MapKind::MarkovLinear(_) => {
                let d = map.finite_alphabet().unwrap() as u32;
                let affine = (0..d)
                    .map(|i| {
                        (0..d)
                            .map(|j| match map.inverse_map(i, j) {
                                Ok(InverseMap::Affine { offset, scale }) => (to_f64(&offset), to_f64(&scale)),
                                _ => (0.0, 0.0),
                            })
                            .collect()
                    })
                    .collect();
                let left = (0..d).map(|i| to_f64(&map.partition_block(i).unwrap().left)).collect();
                (affine, left)
            }
            _ => (Vec::new(), Vec::new()),
        };
        Ok(Plan {
            map,
            mu,
            target,
            kind,
            engine,
            horizons,
            checkpoints,
            radii,
            depths,
            normalizer_at,
            x0,
            affine,
            block_left,
        })
    }

    fn orbit(&self, rng: ChaCha8Rng) -> Orbit<'a> {
        let source = match self.engine {
            Engine::Symbolic => {
                let (uniform, cdf, allowed) = match self.map.kind() {
                    MapKind::DAryShift { digits } => (Some(*digits), Vec::new(), Vec::new()),
                    MapKind::MarkovLinear(m) => {
                        let d = m.dim();
                        let cum = |row: Vec<f64>| -> Vec<f64> {
                            row.iter()
                                .scan(0.0, |a, &x| {
                                    *a += x;
                                    Some(*a)
                                })
                                .collect()
                        };
                        // rows 0..d are transitions; the extra last row is the stationary law
                        let mut cdf: Vec<Vec<f64>> =
                            (0..d).map(|i| cum(m.matrix().rows()[i].iter().map(to_f64).collect())).collect();
                        cdf.push(cum(m.stationary().iter().map(to_f64).collect()));
                        let allowed = (0..d).map(|i| (0..d).map(|j| m.matrix().allowed(i, j)).collect()).collect();
                        (None, cdf, allowed)
                    }
                    _ => unreachable!(),
                };
                Source::Chain { rng, cdf, allowed, uniform, state: None }
            }
            Engine::Float => Source::Float { map: self.map, x: 0.0 },
        };
        Orbit { source, digits: VecDeque::new(), points: VecDeque::new(), base: 0 }
    }

    /// `T^k x` rebuilt from digits `k, k+1, …` to double precision.
    fn symbolic_point(&self, orbit: &mut Orbit, k: u64) -> f64 {
        let (mut off, mut scale) = (0.0, 1.0);
        let mut cur = orbit.digit(k).ok().unwrap();
        let mut i = k;
        while scale > 1e-18 {
            i += 1;
            let next = orbit.digit(i).ok().unwrap();
            let (o, s) = self.affine[cur as usize][next as usize];
            off += scale * o;
            scale *= s;
            cur = next;
        }
        off + scale * self.block_left[cur as usize]
    }

    fn run_trial(&self, master: u64, trial: u64) -> Result<TrialRecord> {
        let mut rng = trial_rng(master, trial);
        let mut resampled = 0u64;
        'restart: loop {
            if resampled > 1000 {
                return Err(Error::Numerical("every sampled orbit reached a boundary".into()));
            }
            // a fresh sub-stream per attempt keeps restarts reproducible
            let mut orbit = self.orbit(ChaCha8Rng::seed_from_u64(rng.gen()));
            if let Source::Float { x, .. } = &mut orbit.source {
                *x = self.mu.sample_f64(&mut rng);
            }
            let mut hits = 0u64;
            let mut cps = Vec::with_capacity(self.checkpoints.len());
            let mut window_min = Vec::with_capacity(self.horizons.len());
            let mut cur_min = f64::INFINITY;
            let (mut next_cp, mut next_h) = (0usize, 0usize);
            let n_max = *self.horizons.last().unwrap();
            let circle = self.map.is_circle();
            for j in 1..=n_max {
                orbit.release_before(j);
                let hit = match self.kind {
                    TargetKind::Symbolic => {
                        let t = self.depths[(j - 1) as usize];
                        let mut all = true;
                        let mut k = 0u64;
                        while k <= t {
                            let want = self.target.digit(k).ok_or_else(|| {
                                Error::InsufficientResolution(format!("target itinerary needed to depth {k}"))
                            })?;
                            let Ok(got) = orbit.digit(j + k) else {
                                resampled += 1;
                                continue 'restart;
                            };
                            if got != want {
                                all = false;
                                break;
                            }
                            k += 1;
                        }
                        all
                    }
                    TargetKind::Metric => {
                        let y = match self.engine {
                            Engine::Symbolic => self.symbolic_point(&mut orbit, j),
                            Engine::Float => match orbit.point(j) {
                                Ok(y) => y,
                                Err(OrbitEnded) => {
                                    resampled += 1;
                                    continue 'restart;
                                }
                            },
                        };
                        let r = self.radii[(j - 1) as usize];
                        let d = distance(y, self.x0, circle);
                        cur_min = cur_min.min(d / r);
                        d < r
                    }
                };
                if hit {
                    hits += 1;
                }
                if self.checkpoints[next_cp] == j {
                    let normalizer = self.normalizer_at[next_cp];
                    let ratio = if normalizer > 0.0 { hits as f64 / normalizer } else { f64::NAN };
                    cps.push(Checkpoint { n: j, hits, normalizer, ratio });
                    next_cp += 1;
                }
                if self.horizons[next_h] == j {
                    if self.kind == TargetKind::Metric {
                        window_min.push(cur_min);
                    }
                    cur_min = f64::INFINITY;
                    next_h += 1;
                }
            }
            return Ok(TrialRecord { trial, seed: trial_seed(master, trial), checkpoints: cps, window_min, resampled });
        }
    }
}

fn run(plan: Plan, opts: &HitOptions) -> Result<HitSeries> {
    let trials: Vec<TrialRecord> =
        (0..opts.trials).into_par_iter().map(|t| plan.run_trial(opts.seed, t)).collect::<Result<Vec<_>>>()?;
    let finals: Vec<f64> = trials.iter().map(|t| t.checkpoints.last().unwrap().ratio).collect();
    let (mean, se) = crate::measures::mean_and_stderr(&finals);
    Ok(HitSeries {
        target_kind: plan.kind,
        engine: plan.engine,
        horizons: plan.horizons,
        trials,
        mean_final_ratio: mean,
        ci95: (mean - 1.96 * se, mean + 1.96 * se),
    })
}

/// Hits of the balls `B(x0, r_j)`, `j = 1..=N`.
pub fn run_metric_hits(
    map: &MapModel,
    mu: &InvariantMeasure,
    target: &TargetPoint,
    sched: &Schedule,
    opts: &HitOptions,
) -> Result<HitSeries> {
    if !sched.is_radii() {
        return Err(Error::InvalidParameter("metric hits need a radii schedule".into()));
    }
    run(Plan::new(map, mu, target, sched, TargetKind::Metric, opts)?, opts)
}

/// Hits of the cylinders `P(t_j, x0)`, tested by comparing digit words.
pub fn run_symbolic_hits(
    map: &MapModel,
    mu: &InvariantMeasure,
    target: &TargetPoint,
    sched: &Schedule,
    opts: &HitOptions,
) -> Result<HitSeries> {
    if sched.is_radii() {
        return Err(Error::InvalidParameter("symbolic hits need a depth schedule".into()));
    }
    run(Plan::new(map, mu, target, sched, TargetKind::Symbolic, opts)?, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::Point;

    fn doubling() -> (MapModel, InvariantMeasure) {
        (MapModel::dary_shift(2).unwrap(), InvariantMeasure::Lebesgue)
    }

    fn opts(n: u64, trials: u64) -> HitOptions {
        HitOptions { horizons: vec![n], trials, seed: 11, engine: None }
    }

    #[test]
    fn checkpoint_grid() {
        assert_eq!(checkpoints(&[30, 100]), vec![1, 2, 5, 10, 20, 30, 50, 100]);
    }

    #[test]
    fn unit_ball_always_hit() {
        let (m, mu) = doubling();
        let t = TargetPoint::from_point(&m, &mu, Point::ratio(1, 3)).unwrap();
        let s = run_metric_hits(&m, &mu, &t, &Schedule::RadiiConst { r: 1.0 }, &opts(1000, 3)).unwrap();
        for tr in &s.trials {
            let last = tr.checkpoints.last().unwrap();
            assert_eq!(last.hits, 1000);
            assert!((last.ratio - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn depth_zero_is_first_digit_frequency() {
        let (m, mu) = doubling();
        let t = TargetPoint::periodic(&m, &mu, &[0, 1]).unwrap();
        let s = run_symbolic_hits(&m, &mu, &t, &Schedule::DepthConst { t: 0 }, &opts(20_000, 4)).unwrap();
        assert!((s.mean_final_ratio - 1.0).abs() < 0.03);
        let last = s.trials[0].checkpoints.last().unwrap();
        assert!((last.normalizer - 10_000.0).abs() < 1e-9);
    }

    #[test]
    fn bit_stable_across_runs() {
        let (m, mu) = doubling();
        let t = TargetPoint::periodic(&m, &mu, &[0, 1]).unwrap();
        let sched = Schedule::DepthLogFloor { base: 2.0 };
        let a = run_symbolic_hits(&m, &mu, &t, &sched, &opts(5000, 8)).unwrap();
        let b = run_symbolic_hits(&m, &mu, &t, &sched, &opts(5000, 8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shrinking_radii_never_adds_hits() {
        let (m, mu) = doubling();
        let t = TargetPoint::from_point(&m, &mu, Point::ratio(1, 3)).unwrap();
        let big = run_metric_hits(&m, &mu, &t, &Schedule::RadiiPower { alpha: 1.0 }, &opts(5000, 6)).unwrap();
        let small = run_metric_hits(&m, &mu, &t, &Schedule::RadiiPower { alpha: 0.9 }, &opts(5000, 6)).unwrap();
        for (b, s) in big.final_hits().iter().zip(small.final_hits()) {
            assert!(s <= *b);
        }
    }

    #[test]
    fn normalizer_matches_brute_force() {
        let (m, mu) = doubling();
        let t = TargetPoint::from_point(&m, &mu, Point::ratio(1, 3)).unwrap();
        let sched = Schedule::RadiiPower { alpha: 1.0 };
        let s = run_metric_hits(&m, &mu, &t, &sched, &opts(10_000, 1)).unwrap();
        let x0 = num_rational::BigRational::new(1.into(), 3.into());
        let mut exact = num_rational::BigRational::from_integer(0.into());
        for j in 1..=10_000u64 {
            let r = sched.radius_exact(j);
            let lo = (&x0 - &r).max(num_rational::BigRational::from_integer(0.into()));
            let hi = (&x0 + &r).min(num_rational::BigRational::from_integer(1.into()));
            exact += hi - lo;
        }
        let got = s.trials[0].checkpoints.last().unwrap().normalizer;
        assert!((got - to_f64(&exact)).abs() < 1e-12 * got.max(1.0) * 10.0);
    }

    #[test]
    fn engines_agree_on_gauss_rejection() {
        let g = MapModel::gauss();
        let mu = InvariantMeasure::Gauss;
        let t = TargetPoint::periodic(&g, &mu, &[1]).unwrap();
        let r = HitOptions { engine: Some(Engine::Symbolic), ..opts(10, 1) };
        assert!(run_metric_hits(&g, &mu, &t, &Schedule::RadiiConst { r: 0.1 }, &r).is_err());
    }
}
