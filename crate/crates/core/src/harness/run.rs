use serde::{Deserialize, Serialize};

use super::config::{Experiment, ExperimentConfig, GridConfig};
use super::HarnessError;
use crate::dimension::{
    bound_code_lower, bound_code_w, bound_doubling, bound_hoeffding, bound_radii_lower, bound_upper_finite,
    bound_upper_radii, build_cantor_stage, frostman_exponent, grid_regularity_probe, DimensionBound, FrostmanReport,
    GridSpec, ProbeTrace, StageRecord,
};
use crate::exact::to_f64;
use crate::maps::MapModel;
use crate::measures::{entropy_birkhoff, entropy_closed_form, entropy_smb, mean_and_stderr, EntropyEstimate, EntropyMethod, InvariantMeasure};
use crate::recurrence::{
    borel_cantelli_classify, run_metric_hits, run_symbolic_hits, Classification, HitOptions, HitSeries, Schedule,
    TargetPoint, Verdict,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    /// The only field allowed to differ between identical runs.
    pub timestamp: String,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
    pub ci95: Option<(f64, f64)>,
    pub verdict: Option<Verdict>,
    pub value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub entropy: f64,
    pub log_beta: f64,
    pub bounds: Vec<DimensionBound>,
    /// `(κ, lower bound)` for `r_n = e^{-κn}`.
    pub kappa_table: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CantorReport {
    pub stage: StageRecord,
    pub frostman: Option<FrostmanReport>,
    pub frostman_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Hits(HitSeries),
    Classification(Classification),
    Entropy(EntropyEstimate),
    Bounds(BoundsReport),
    Cantor(Box<CantorReport>),
    Grid(ProbeTrace),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub summary: Summary,
    pub payload: Payload,
}

impl ResultSet {
    /// The summary as derived from the per-trial records.
    pub fn recompute_summary(&self) -> Summary {
        summarize(&self.payload)
    }
}

fn summarize(p: &Payload) -> Summary {
    match p {
        Payload::Hits(h) => {
            let (mean, se) = mean_and_stderr(&h.final_ratios());
            Summary { mean: Some(mean), stderr: Some(se), ci95: Some((mean - 1.96 * se, mean + 1.96 * se)), ..Summary::default() }
        }
        Payload::Classification(c) => Summary { verdict: Some(c.verdict), ..Summary::default() },
        Payload::Entropy(e) => {
            if e.trial_values.is_empty() {
                Summary { mean: Some(e.value), value: Some(e.value), ..Summary::default() }
            } else {
                let (mean, se) = mean_and_stderr(&e.trial_values);
                Summary {
                    mean: Some(mean),
                    stderr: Some(se),
                    ci95: Some((mean - 1.96 * se, mean + 1.96 * se)),
                    value: Some(mean),
                    verdict: None,
                }
            }
        }
        Payload::Bounds(b) => Summary {
            value: b.bounds.iter().filter_map(|x| x.hausdorff_lower.or(x.grid_lower)).reduce(f64::max),
            ..Summary::default()
        },
        Payload::Cantor(c) => Summary { value: c.frostman.as_ref().map(|f| f.gamma), ..Summary::default() },
        Payload::Grid(g) => Summary { value: Some(g.max_ratio), ..Summary::default() },
    }
}

/// Runs the experiment inside the harness's worker pool.
pub fn run(config: &ExperimentConfig) -> Result<ResultSet, HarnessError> {
    let violations = config.violations();
    if !violations.is_empty() {
        return Err(HarnessError::Validation(violations));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| HarnessError::Io(format!("worker pool: {e}")))?;
    let payload = pool.install(|| dispatch(config))?;
    Ok(ResultSet {
        config: config.clone(),
        provenance: Provenance {
            tool: "reclab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            seed: config.seed,
        },
        summary: summarize(&payload),
        payload,
    })
}

struct Setup {
    map: MapModel,
    mu: InvariantMeasure,
    target: Option<TargetPoint>,
}

fn setup(c: &ExperimentConfig) -> crate::Result<Setup> {
    let map = c.map.build()?;
    let mu = c.measure.build(&map)?;
    let target = c.target.as_ref().map(|t| t.build(&map, &mu)).transpose()?;
    Ok(Setup { map, mu, target })
}

fn dispatch(c: &ExperimentConfig) -> crate::Result<Payload> {
    let Setup { map, mu, target } = setup(c)?;
    let sched = c.schedule.as_ref();
    Ok(match c.experiment {
        Experiment::Simulate => {
            let (t, s) = (target.as_ref().unwrap(), sched.unwrap());
            let opts = HitOptions { horizons: c.horizons.clone(), trials: c.trials, seed: c.seed, engine: c.engine };
            let series =
                if s.is_radii() { run_metric_hits(&map, &mu, t, s, &opts)? } else { run_symbolic_hits(&map, &mu, t, s, &opts)? };
            Payload::Hits(series)
        }
        Experiment::Classify => Payload::Classification(borel_cantelli_classify(&map, &mu, target.as_ref().unwrap(), sched.unwrap())?),
        Experiment::Entropy => {
            let n = *c.horizons.iter().max().unwrap();
            Payload::Entropy(match c.entropy_method {
                EntropyMethod::ClosedForm => entropy_closed_form(&map, &mu)?,
                EntropyMethod::Birkhoff => entropy_birkhoff(&map, &mu, n, c.trials, c.seed)?,
                EntropyMethod::Smb => entropy_smb(&map, &mu, &target.as_ref().unwrap().point, n as usize)?,
            })
        }
        Experiment::Bounds => Payload::Bounds(bounds_report(&map, &mu, target.as_ref().unwrap(), sched.unwrap(), &c.kappa_grid)?),
        Experiment::Cantor => {
            let stage = build_cantor_stage(&map, target.as_ref().unwrap(), sched.unwrap(), &c.levels)?;
            let (frostman, frostman_error) = match frostman_exponent(&stage, &map, c.frostman_cap) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            Payload::Cantor(Box::new(CantorReport { stage: stage.record(c.dump_blocks), frostman, frostman_error }))
        }
        Experiment::Gridprobe => {
            let grid = match c.grid {
                GridConfig::Dyadic => GridSpec::dyadic(),
                GridConfig::Rectangles { a, b } => GridSpec::rectangles(a, b)?,
                GridConfig::Cylinders => GridSpec::Cylinders(map.clone()),
            };
            Payload::Grid(grid_regularity_probe(&grid, &grid.default_balls(c.k_max))?)
        }
    })
}

/// Every bound that applies to the configured map, target and schedule.
pub fn bounds_report(
    map: &MapModel,
    mu: &InvariantMeasure,
    target: &TargetPoint,
    sched: &Schedule,
    kappa_grid: &[f64],
) -> crate::Result<BoundsReport> {
    let h = entropy_closed_form(map, mu)?.value;
    let log_beta = map.expansion_beta().ln();
    let (du, dl, tau) = (target.delta_upper, target.delta_lower, target.tau_upper);
    let mut bounds = Vec::new();
    if let Some(r) = sched.radius_rates() {
        let mut b = bound_radii_lower(h, du, r.upper, tau, log_beta)?;
        if !target.tau_certified {
            b.flags.push("decay rate estimated, not certified".into());
        }
        bounds.push(b);
        bounds.push(bound_doubling(du, r.upper, 1.0, log_beta)?);
        if let Some(d) = map.finite_alphabet() {
            bounds.push(bound_upper_radii(d, h, dl, r.lower)?);
        }
    }
    if let (Some(w), Some(l)) = (sched.depth_rates(), target.code_rates(sched)) {
        bounds.push(bound_code_lower(h, l.upper)?);
        bounds.push(bound_code_w(w.upper)?);
        if let Some(d) = map.finite_alphabet() {
            bounds.push(bound_upper_finite(d, h, l.lower)?);
        }
        if let Some(p) = bernoulli_weights(map) {
            bounds.push(bound_hoeffding(&p, l.lower)?);
        }
    }
    let kappa_table = kappa_grid
        .iter()
        .map(|&k| Ok((k, bound_radii_lower(h, du, k, tau, log_beta)?.hausdorff_lower.unwrap())))
        .collect::<crate::Result<_>>()?;
    Ok(BoundsReport { entropy: h, log_beta, bounds, kappa_table })
}

/// The weights of a Markov map whose rows all agree.
fn bernoulli_weights(map: &MapModel) -> Option<Vec<f64>> {
    let rows = map.markov()?.matrix().rows();
    rows.windows(2).all(|w| w[0] == w[1]).then(|| rows[0].iter().map(to_f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recurrence::Verdict;

    #[test]
    fn gauss_alpha_two_is_full() {
        let mut c = ExperimentConfig::default_for(Experiment::Classify);
        c.map = super::super::config::MapSpec::Gauss;
        c.target = Some(super::super::config::TargetSpec::Periodic { word: vec![1] });
        c.schedule = Some(Schedule::RadiiPower { alpha: 2.0 });
        let rs = run(&c).unwrap();
        assert_eq!(rs.summary.verdict, Some(Verdict::FullMeasure));
    }

    #[test]
    fn gauss_kappa_table_matches_closed_form() {
        let c = ExperimentConfig::default_for(Experiment::Bounds);
        let rs = run(&c).unwrap();
        let Payload::Bounds(b) = &rs.payload else { panic!() };
        let pi2 = std::f64::consts::PI.powi(2);
        for &(k, v) in &b.kappa_table {
            let closed = pi2 / (pi2 + 6.0 * k * std::f64::consts::LN_2);
            assert!((v - closed).abs() < 1e-12, "{k}: {v} vs {closed}");
        }
    }

    #[test]
    fn empty_horizons_fail_validation() {
        let mut c = ExperimentConfig::default_for(Experiment::Simulate);
        c.horizons.clear();
        assert!(matches!(run(&c), Err(HarnessError::Validation(_))));
    }

    #[test]
    fn summary_is_recomputable() {
        let mut c = ExperimentConfig::default_for(Experiment::Simulate);
        c.horizons = vec![2000];
        c.trials = 5;
        let rs = run(&c).unwrap();
        assert_eq!(rs.recompute_summary(), rs.summary);
    }
}
