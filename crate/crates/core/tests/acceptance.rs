//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;

use recurrence_lab::coding::cylinder_from_word;
use recurrence_lab::dimension::{
    bound_hoeffding, bound_radii_lower, bound_upper_finite, build_cantor_stage, frostman_exponent,
    grid_regularity_probe, GridSpec, DEFAULT_FROSTMAN_CAP,
};
use recurrence_lab::exact::{rational, to_f64};
use recurrence_lab::maps::{MapModel, Point};
use recurrence_lab::measures::{
    correlation_mass, entropy_birkhoff, entropy_closed_form, smb_regular_mass, InvariantMeasure,
};
use recurrence_lab::recurrence::{
    borel_cantelli_classify, run_metric_hits, run_symbolic_hits, Engine, HitOptions, Schedule, TargetPoint, Verdict,
};
use recurrence_lab::seed::trial_rng;

const GAUSS_ENTROPY: f64 = 2.373138;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn bernoulli(p: &[(i64, i64)]) -> (MapModel, InvariantMeasure) {
    let p: Vec<BigRational> = p.iter().map(|&(a, b)| rational(a, b)).collect();
    let m = MapModel::bernoulli(&p).unwrap();
    let mu = InvariantMeasure::natural_for(&m);
    (m, mu)
}

fn ratio_criterion() -> Outcome {
    let (m, mu) = bernoulli(&[(1, 2), (1, 2)]);
    let t = TargetPoint::periodic(&m, &mu, &[0, 1]).unwrap();
    let opts = HitOptions { horizons: vec![1_000_000], trials: 100, seed: 20240601, engine: Some(Engine::Symbolic) };
    let start = Instant::now();
    let s = run_symbolic_hits(&m, &mu, &t, &Schedule::DepthLogFloor { base: 2.0 }, &opts).unwrap();
    let el = start.elapsed();
    let pass = (0.9..=1.1).contains(&s.mean_final_ratio) && el <= Duration::from_secs(60);
    outcome(pass, format!("mean ratio {:.4}, {:.1}s", s.mean_final_ratio, secs(el)))
}

fn entropy_criterion() -> Outcome {
    let g = MapModel::gauss();
    let start = Instant::now();
    let e = entropy_birkhoff(&g, &InvariantMeasure::Gauss, 1_000_000, 20, 7).unwrap();
    let el = start.elapsed();
    let se = e.stderr.unwrap();
    let err = (e.value - GAUSS_ENTROPY).abs();
    let pass = err <= 0.02 && err <= 3.0 * se && el <= Duration::from_secs(30);
    outcome(pass, format!("mean {:.5}, |err| {:.5}, se {:.5}, {:.1}s", e.value, err, se, secs(el)))
}

/// `1/(q_n(q_n + q_{n-1}))` from the continuant recursion.
fn cf_length_oracle(word: &[u32]) -> BigRational {
    let (mut q_prev, mut q) = (BigInt::zero(), BigInt::one());
    for &d in word {
        let next = BigInt::from(d) * &q + &q_prev;
        q_prev = q;
        q = next;
    }
    BigRational::new(BigInt::one(), &q * (&q + &q_prev))
}

fn cf_criterion() -> Outcome {
    let g = MapModel::gauss();
    let mut rng = trial_rng(3, 0);
    let mut violations = 0;
    let mut oracle_mismatch = 0;
    for _ in 0..100 {
        let len = rng.gen_range(1..=16);
        let word: Vec<u32> = (0..len)
            .map(|_| if rng.gen_bool(0.1) { rng.gen_range(1..=10_000) } else { rng.gen_range(1..=12) })
            .collect();
        let lam = cylinder_from_word(&g, &word).unwrap().length();
        if lam != cf_length_oracle(&word) {
            oracle_mismatch += 1;
        }
        let (mut lo, mut hi) = (BigInt::one(), BigInt::one());
        for &d in &word {
            lo *= BigInt::from(d + 1).pow(2);
            hi *= BigInt::from(d).pow(2);
        }
        if lam < BigRational::new(BigInt::one(), lo) || lam > BigRational::new(BigInt::one(), hi) {
            violations += 1;
        }
    }
    outcome(violations == 0 && oracle_mismatch == 0, format!("{violations} violations, {oracle_mismatch} oracle mismatches"))
}

fn dichotomy_criterion() -> Outcome {
    let g = MapModel::gauss();
    let gmu = InvariantMeasure::Gauss;
    let gt = TargetPoint::periodic(&g, &gmu, &[1]).unwrap();
    let (b, bmu) = bernoulli(&[(1, 2), (1, 2)]);
    let bt = TargetPoint::periodic(&b, &bmu, &[0, 1]).unwrap();
    let cases = [
        (&g, &gmu, &gt, Schedule::RadiiPower { alpha: 2.0 }, Verdict::FullMeasure),
        (&g, &gmu, &gt, Schedule::RadiiPower { alpha: 0.5 }, Verdict::MeasureZero),
        (&b, &bmu, &bt, Schedule::DepthLogFloor { base: std::f64::consts::E }, Verdict::FullMeasure),
        (&b, &bmu, &bt, Schedule::DepthPowerFloor { kappa: 2.0 }, Verdict::MeasureZero),
    ];
    let mut wrong = Vec::new();
    for (m, mu, t, s, want) in &cases {
        let got = borel_cantelli_classify(m, mu, t, s).unwrap().verdict;
        if got != *want {
            wrong.push(format!("{} {}: {got:?}", m.name(), s.name()));
        }
    }
    // the windowed minimum of d(T^n x, x0)/r_n must grow from (0,10^4] to (10^4,10^6]
    let opts = HitOptions { horizons: vec![10_000, 1_000_000], trials: 100, seed: 99, engine: Some(Engine::Float) };
    let s = run_metric_hits(&g, &gmu, &gt, &Schedule::RadiiPower { alpha: 0.5 }, &opts).unwrap();
    let grew = s.trials.iter().filter(|t| t.window_min[1] > t.window_min[0]).count();
    let pass = wrong.is_empty() && grew >= 95;
    outcome(pass, format!("verdict mismatches {wrong:?}, liminf grew in {grew}/100"))
}

fn sharpness_criterion() -> Outcome {
    let (m, mu) = (MapModel::dary_shift(2).unwrap(), InvariantMeasure::Lebesgue);
    let ln2 = std::f64::consts::LN_2;
    let sched = Schedule::RadiiExp { kappa: ln2 };
    let h = entropy_closed_form(&m, &mu).unwrap().value;
    let ell = sched.radius_rates().unwrap().upper;
    let radii = bound_radii_lower(h, 1.0, ell, 0.0, ln2).unwrap().hausdorff_lower.unwrap();
    let hoeff = bound_hoeffding(&[0.5, 0.5], ell).unwrap().upper.unwrap();
    let upper = bound_upper_finite(2, h, ell).unwrap().upper.unwrap();
    let close = [radii, hoeff, upper].iter().all(|v| (v - 0.5).abs() <= 1e-12);

    let t = TargetPoint::from_point(&m, &mu, Point::ratio(1, 3)).unwrap();
    let start = Instant::now();
    let stage = build_cantor_stage(&m, &t, &sched, &[8, 12]).unwrap();
    let el = start.elapsed();
    let f = frostman_exponent(&stage, &m, DEFAULT_FROSTMAN_CAP).unwrap();
    let lam = stage.cantor_lambda().unwrap_or(0.0);
    let pass = close && f.gamma >= 0.43 && f.gamma >= lam - 0.1 && el <= Duration::from_secs(10);
    outcome(
        pass,
        format!(
            "bounds ({radii}, {hoeff}, {upper}), frostman {:.4} (cantor lambda {lam:.4}), build {:.2}s",
            f.gamma,
            secs(el)
        ),
    )
}

fn mass_criterion() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let d2 = MapModel::dary_shift(2).unwrap();
    let golden = MapModel::markov_linear(
        recurrence_lab::maps::StochasticMatrix::parse(&[
            vec!["1/2".into(), "1/2".into()],
            vec!["1".into(), "0".into()],
        ])
        .unwrap(),
    )
    .unwrap();
    let (mu2, mug) = (InvariantMeasure::natural_for(&d2), InvariantMeasure::natural_for(&golden));
    let stages = [
        (
            &d2,
            TargetPoint::from_point(&d2, &mu2, Point::ratio(1, 3)).unwrap(),
            Schedule::RadiiExp { kappa: std::f64::consts::LN_2 },
            vec![8, 12],
        ),
        (&d2, TargetPoint::from_point(&d2, &mu2, Point::ratio(2, 7)).unwrap(), Schedule::RadiiExp { kappa: 1.0 }, vec![6, 9]),
        (&golden, TargetPoint::periodic(&golden, &mug, &[0, 0, 1]).unwrap(), Schedule::RadiiExp { kappa: 1.0 }, vec![8, 12]),
    ];
    for (m, t, s, sizes) in stages {
        let stage = build_cantor_stage(m, &t, &s, &sizes).unwrap();
        let ok = stage.nesting_violations == 0 && stage.nu_level_sums_exact && stage.nu_parent_sums_exact;
        pass &= ok;
        notes.push(format!("{}{:?}: violations {}", m.name(), sizes, stage.nesting_violations));
    }
    outcome(pass, notes.join("; "))
}

fn words(len: usize) -> Vec<Vec<u32>> {
    (0..1u32 << len).map(|b| (0..len).map(|i| (b >> i) & 1).collect()).collect()
}

/// `µ(T^{-ℓ}A ∩ Q)` by summing every word of length `ℓ + |a|` that starts with
/// `q` and carries `a` at position `ℓ`.
fn correlation_oracle(p: &[BigRational], q: &[u32], a: &[u32], ell: usize) -> BigRational {
    let total = ell + a.len();
    let mut sum = BigRational::zero();
    for w in words(total) {
        if w[..q.len()] == *q && w[ell..] == *a {
            sum += w.iter().fold(BigRational::one(), |acc, &d| acc * &p[d as usize]);
        }
    }
    sum
}

fn correlation_criterion() -> Outcome {
    let weight = |p: &[BigRational], w: &[u32]| w.iter().fold(BigRational::one(), |acc, &d| acc * &p[d as usize]);
    let mut exact_fail = 0;
    let mut oracle_fail = 0;
    let mut worst = 0.0f64;
    for (pw, check_exact) in [([(1, 2), (1, 2)], true), ([(1, 3), (2, 3)], false)] {
        let (_, mu) = bernoulli(&pw);
        let p: Vec<BigRational> = pw.iter().map(|&(a, b)| rational(a, b)).collect();
        for m in 0..=6usize {
            let qs = words(m + 1);
            // the overlapping lag ℓ = m only enters the bounded case
            let first = if check_exact { m + 1 } else { m.max(1) };
            for ell in first..=m + 2 {
                for q in &qs {
                    for a in &qs {
                        let got = correlation_mass(&mu, q, a, ell).unwrap();
                        let prod = weight(&p, q) * weight(&p, a);
                        if check_exact && got != prod {
                            exact_fail += 1;
                        }
                        worst = worst.max(to_f64(&(&got / &prod)));
                        if m <= 3 && got != correlation_oracle(&p, q, a, ell) {
                            oracle_fail += 1;
                        }
                    }
                }
            }
        }
    }
    let pass = exact_fail == 0 && oracle_fail == 0 && worst <= 5.0;
    outcome(pass, format!("exact failures {exact_fail}, oracle mismatches {oracle_fail}, max C {worst}"))
}

fn grid_criterion() -> Outcome {
    let dy = GridSpec::dyadic();
    let dmax = grid_regularity_probe(&dy, &dy.default_balls(40)).unwrap().max_ratio;
    let rect = GridSpec::rectangles(0.7, 0.6).unwrap();
    let rmax = grid_regularity_probe(&rect, &rect.default_balls(40)).unwrap().max_ratio;
    outcome(dmax <= 3.0 && rmax > 100.0, format!("dyadic max {dmax:.4}, rectangle max {rmax:.4e}"))
}

fn smb_criterion() -> Outcome {
    let (m, mu) = bernoulli(&[(1, 3), (2, 3)]);
    let p = [rational(1, 3), rational(2, 3)];
    let (n, eps) = (14usize, 0.3);
    let h = -(1.0f64 / 3.0) * (1.0f64 / 3.0).ln() - (2.0f64 / 3.0) * (2.0f64 / 3.0).ln();
    let mut pass = true;
    let mut notes = Vec::new();
    for (first, last) in [(0u32, 0u32), (0, 1), (1, 0), (1, 1)] {
        let got = smb_regular_mass(&m, &mu, first, last, n, eps).unwrap();
        // oracle: group the n-1 free middle digits by their number of ones
        let fixed = &p[first as usize] * &p[last as usize];
        let mut oracle = BigRational::zero();
        for ones in 0..n {
            let mass = &fixed * num_traits::pow(p[1].clone(), ones) * num_traits::pow(p[0].clone(), n - 1 - ones);
            let ln = to_f64(&mass).ln();
            if ln > -(n as f64) * (h + eps) && ln < -(n as f64) * (h - eps) {
                oracle += mass * BigRational::from_integer(binomial(n - 1, ones));
            }
        }
        let need = &fixed / rational(2, 1);
        pass &= got == oracle && got >= need;
        notes.push(format!("({first},{last}) {:.4}/{:.4}{}", to_f64(&got), to_f64(&need), if got == oracle { "" } else { " oracle mismatch" }));
    }
    outcome(pass, format!("mass/half-product {}", notes.join(", ")))
}

fn binomial(n: usize, k: usize) -> BigInt {
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i) / BigInt::from(i + 1))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 recurrence ratio", ratio_criterion),
        ("2 gauss entropy", entropy_criterion),
        ("3 cf cylinder bounds", cf_criterion),
        ("4 dichotomy", dichotomy_criterion),
        ("5 dimension sharpness", sharpness_criterion),
        ("6 mass distribution", mass_criterion),
        ("7 correlations", correlation_criterion),
        ("8 grid regularity", grid_criterion),
        ("9 smb regular mass", smb_criterion),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let o = f();
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        eprintln!("{failed} criteria failed");
        std::process::exit(1);
    }
}
