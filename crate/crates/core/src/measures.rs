//! Invariant measures, stationary vectors and entropy estimators.

use std::f64::consts::{LN_2, PI};

use num_bigint::{BigInt, RandBigInt};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coding::{admissible_words, cylinder_from_word};
use crate::error::{Error, Result};
use crate::exact::{ln_abs, rational_pow, to_f64};
use crate::maps::{MapKind, MapModel, MarkovLinear, Point, StochasticMatrix};
use crate::seed::trial_rng;

/// A mass that is exact when the measure allows it.
#[derive(Clone, Debug, PartialEq)]
pub enum Mass {
    Exact(BigRational),
    /// Natural log of a mass computed in floating point, kept in log form so
    /// that deep cylinders do not underflow.
    Log(f64),
}

impl Mass {
    pub fn ln(&self) -> f64 {
        match self {
            Mass::Exact(q) => ln_abs(q),
            Mass::Log(l) => *l,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Mass::Exact(q) => to_f64(q),
            Mass::Log(l) => l.exp(),
        }
    }

    pub fn exact(&self) -> Option<&BigRational> {
        match self {
            Mass::Exact(q) => Some(q),
            Mass::Log(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InvariantMeasure {
    Lebesgue,
    /// Density `1/((1+x) ln 2)`.
    Gauss,
    /// The Markov measure of `(p, M)`; on the piecewise-linear realization it
    /// coincides with Lebesgue measure.
    MarkovStationary { p: Vec<BigRational>, matrix: StochasticMatrix },
}

impl InvariantMeasure {
    /// The absolutely continuous invariant measure of a map.
    pub fn natural_for(map: &MapModel) -> Self {
        match map.kind() {
            MapKind::Gauss => InvariantMeasure::Gauss,
            MapKind::MarkovLinear(m) => InvariantMeasure::markov(m),
            _ => InvariantMeasure::Lebesgue,
        }
    }

    pub fn markov(m: &MarkovLinear) -> Self {
        InvariantMeasure::MarkovStationary { p: m.stationary().to_vec(), matrix: m.matrix().clone() }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InvariantMeasure::Lebesgue => "lebesgue",
            InvariantMeasure::Gauss => "gauss",
            InvariantMeasure::MarkovStationary { .. } => "markov_stationary",
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match self {
            InvariantMeasure::Gauss => 1.0 / ((1.0 + x) * LN_2),
            _ => 1.0,
        }
    }

    /// `(K_lo, K_hi)` with `K_lo ≤ dµ/dλ ≤ K_hi`.
    pub fn density_bounds(&self) -> (f64, f64) {
        match self {
            InvariantMeasure::Gauss => (1.0 / (2.0 * LN_2), 1.0 / LN_2),
            _ => (1.0, 1.0),
        }
    }

    pub fn compatible_with(&self, map: &MapModel) -> bool {
        match (self, map.kind()) {
            (InvariantMeasure::Gauss, MapKind::Gauss) => true,
            (InvariantMeasure::Lebesgue, MapKind::Gauss) => false,
            (InvariantMeasure::Lebesgue, _) => true,
            (InvariantMeasure::MarkovStationary { p, matrix }, MapKind::MarkovLinear(m)) => {
                m.stationary() == p.as_slice() && m.matrix() == matrix
            }
            (InvariantMeasure::MarkovStationary { p, matrix }, MapKind::DAryShift { digits }) => {
                let u = BigRational::new(BigInt::one(), BigInt::from(*digits));
                p.len() == *digits as usize && matrix.rows().iter().flatten().all(|q| *q == u)
            }
            _ => false,
        }
    }

    /// Mass of `[a, b)`.
    pub fn measure_interval(&self, a: &BigRational, b: &BigRational) -> Result<Mass> {
        if a > b {
            return Err(Error::InvalidParameter("interval endpoints reversed".into()));
        }
        if a < &BigRational::zero() || b > &BigRational::one() {
            return Err(Error::InvalidParameter("interval outside [0,1]".into()));
        }
        match self {
            InvariantMeasure::Gauss => {
                if a == b {
                    return Ok(Mass::Exact(BigRational::zero()));
                }
                Ok(Mass::Log(ln_gauss_mass(a, b)))
            }
            _ => Ok(Mass::Exact(b - a)),
        }
    }

    pub fn measure_interval_f64(&self, a: f64, b: f64) -> f64 {
        match self {
            InvariantMeasure::Gauss => ((b - a) / (1.0 + a)).ln_1p() / LN_2,
            _ => b - a,
        }
    }

    /// Mass of the cylinder of `word`, exact on linear maps.
    pub fn cylinder_mass(&self, map: &MapModel, word: &[u32]) -> Result<Mass> {
        match (self, map.kind()) {
            (InvariantMeasure::MarkovStationary { p, matrix }, _) => {
                let mut m = p
                    .get(word[0] as usize)
                    .cloned()
                    .ok_or(Error::NoSuchBranch(word[0]))?;
                for w in word.windows(2) {
                    let step = matrix.get(w[0] as usize, w[1] as usize);
                    if step.is_zero() {
                        return Err(Error::NotAdmissible { from: w[0], to: w[1] });
                    }
                    m *= step;
                }
                Ok(Mass::Exact(m))
            }
            (InvariantMeasure::Lebesgue, MapKind::DAryShift { digits }) => {
                for &d in word {
                    map.check_digit(d)?;
                }
                Ok(Mass::Exact(rational_pow(&BigRational::new(BigInt::one(), BigInt::from(*digits)), word.len())))
            }
            _ => {
                let c = cylinder_from_word(map, word)?;
                match self {
                    InvariantMeasure::Gauss => Ok(Mass::Log(ln_gauss_mass(&c.interval.left, &c.interval.right))),
                    _ => Ok(Mass::Exact(c.length())),
                }
            }
        }
    }

    pub fn sample_f64(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.gen();
        match self {
            InvariantMeasure::Gauss => u.exp2() - 1.0,
            _ => u,
        }
    }

    /// A `bits`-bit dyadic sample; Gauss samples use rejection against the
    /// density ratio `1/(1+y)`.
    pub fn sample_exact(&self, rng: &mut ChaCha8Rng, bits: u64) -> BigRational {
        let den = BigInt::one() << bits;
        loop {
            let num = rng.gen_bigint_range(&BigInt::zero(), &den);
            let y = BigRational::new(num, den.clone());
            match self {
                InvariantMeasure::Gauss => {
                    let accept: f64 = rng.gen();
                    if accept * (1.0 + to_f64(&y)) < 1.0 && !y.is_zero() {
                        return y;
                    }
                }
                _ => return y,
            }
        }
    }
}

/// `ln µ_G([a,b))` with `µ_G([a,b)) = ln(1 + (b-a)/(1+a)) / ln 2`, accurate
/// even when the mass underflows.
fn ln_gauss_mass(a: &BigRational, b: &BigRational) -> f64 {
    let u = (b - a) / (BigRational::one() + a);
    let uf = to_f64(&u);
    if uf > 1e-200 {
        (uf.ln_1p() / LN_2).ln()
    } else {
        ln_abs(&u) - LN_2.ln()
    }
}

/// The unique stationary probability vector of a primitive matrix, by exact
/// elimination.
pub fn stationary_vector(m: &StochasticMatrix) -> Result<Vec<BigRational>> {
    if m.mixing_exponent().is_none() {
        return Err(Error::NotPrimitive);
    }
    let d = m.dim();
    // rows of (M^T - I), last row replaced by Σ p = 1
    let mut a: Vec<Vec<BigRational>> = (0..d)
        .map(|j| {
            let mut row: Vec<BigRational> = (0..d)
                .map(|i| if i == j { m.get(i, j) - BigRational::one() } else { m.get(i, j).clone() })
                .collect();
            row.push(BigRational::zero());
            row
        })
        .collect();
    a[d - 1] = vec![BigRational::one(); d + 1];
    for col in 0..d {
        let pivot = (col..d)
            .find(|&r| !a[r][col].is_zero())
            .ok_or_else(|| Error::Numerical("singular stationary system".into()))?;
        a.swap(col, pivot);
        let inv = a[col][col].recip();
        for k in col..=d {
            a[col][k] = &a[col][k] * &inv;
        }
        for r in 0..d {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for k in col..=d {
                    let v = &a[col][k] * &f;
                    a[r][k] -= v;
                }
            }
        }
    }
    Ok((0..d).map(|i| a[i][d].clone()).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMethod {
    ClosedForm,
    Birkhoff,
    Smb,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub method: EntropyMethod,
    /// Nats.
    pub value: f64,
    pub stderr: Option<f64>,
    pub n_iter: u64,
    pub n_trials: u64,
    pub seed: Option<u64>,
    /// Trials restarted because the orbit reached a boundary.
    pub resampled: u64,
    pub trial_values: Vec<f64>,
}

impl EntropyEstimate {
    fn exact(value: f64) -> Self {
        EntropyEstimate {
            method: EntropyMethod::ClosedForm,
            value,
            stderr: None,
            n_iter: 0,
            n_trials: 0,
            seed: None,
            resampled: 0,
            trial_values: Vec::new(),
        }
    }
}

fn markov_entropy(p: &[BigRational], matrix: &StochasticMatrix) -> f64 {
    let d = p.len();
    let mut h = 0.0;
    for i in 0..d {
        for j in 0..d {
            let pij = matrix.get(i, j);
            if !pij.is_zero() {
                h -= to_f64(&p[i]) * to_f64(pij) * ln_abs(pij);
            }
        }
    }
    h
}

/// `∫ log|B'| dλ` by the periodic trapezoid rule, doubled until stable.
fn blaschke_entropy(map: &MapModel) -> Result<f64> {
    let mut n = 64usize;
    let mut prev = f64::NAN;
    while n <= 1 << 22 {
        let sum: f64 = (0..n).map(|k| map.log_derivative_f64(k as f64 / n as f64)).sum();
        let cur = sum / n as f64;
        if (cur - prev).abs() < 1e-13 {
            return Ok(cur);
        }
        prev = cur;
        n *= 2;
    }
    Err(Error::Numerical("quadrature of log|B'| did not settle".into()))
}

pub fn entropy_closed_form(map: &MapModel, m: &InvariantMeasure) -> Result<EntropyEstimate> {
    if !m.compatible_with(map) {
        return Err(Error::Unsupported(format!("{} measure with {} map", m.name(), map.name())));
    }
    let h = match map.kind() {
        MapKind::DAryShift { digits } => (*digits as f64).ln(),
        MapKind::MarkovLinear(mk) => markov_entropy(mk.stationary(), mk.matrix()),
        MapKind::Gauss => PI * PI / (6.0 * LN_2),
        MapKind::Blaschke(_) => blaschke_entropy(map)?,
    };
    Ok(EntropyEstimate::exact(h))
}

/// Digits `i_0..i_{len-1}` of a point drawn from the Markov measure.
pub fn sample_markov_word(m: &MarkovLinear, rng: &mut ChaCha8Rng, len: usize) -> Vec<u32> {
    let cdf = |row: Vec<f64>| -> Vec<f64> {
        row.iter()
            .scan(0.0, |acc, &x| {
                *acc += x;
                Some(*acc)
            })
            .collect()
    };
    let first = cdf(m.stationary().iter().map(to_f64).collect());
    let rows: Vec<Vec<f64>> = (0..m.dim()).map(|i| cdf(m.matrix().rows()[i].iter().map(to_f64).collect())).collect();
    let pick = |c: &[f64], u: f64, allowed: &dyn Fn(usize) -> bool| -> u32 {
        let k = c.iter().position(|&v| u < v).unwrap_or(c.len() - 1);
        // guard against rounding landing on a zero-probability state
        if allowed(k) { k as u32 } else { (0..c.len()).rev().find(|&j| allowed(j)).unwrap() as u32 }
    };
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return out;
    }
    let mut cur = pick(&first, rng.gen(), &|_| true);
    out.push(cur);
    for _ in 1..len {
        let i = cur as usize;
        cur = pick(&rows[i], rng.gen(), &|j| m.matrix().allowed(i, j));
        out.push(cur);
    }
    out
}

/// Mean over trials of `(1/n) Σ_{k<n} log|T'(T^k x)|`, `x ~ m`.
pub fn entropy_birkhoff(
    map: &MapModel,
    m: &InvariantMeasure,
    n_iter: u64,
    n_trials: u64,
    seed: u64,
) -> Result<EntropyEstimate> {
    if n_iter == 0 || n_trials == 0 {
        return Err(Error::InvalidParameter("n_iter and n_trials must be positive".into()));
    }
    if !m.compatible_with(map) {
        return Err(Error::Unsupported(format!("{} measure with {} map", m.name(), map.name())));
    }
    let results: Vec<(f64, u64)> = (0..n_trials)
        .into_par_iter()
        .map(|trial| birkhoff_trial(map, m, n_iter, seed, trial))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = results.iter().map(|r| r.0).collect();
    let (mean, stderr) = mean_and_stderr(&values);
    Ok(EntropyEstimate {
        method: EntropyMethod::Birkhoff,
        value: mean,
        stderr: Some(stderr),
        n_iter,
        n_trials,
        seed: Some(seed),
        resampled: results.iter().map(|r| r.1).sum(),
        trial_values: values,
    })
}

fn birkhoff_trial(map: &MapModel, m: &InvariantMeasure, n_iter: u64, seed: u64, trial: u64) -> Result<(f64, u64)> {
    let mut rng = trial_rng(seed, trial);
    match map.kind() {
        MapKind::DAryShift { digits } => Ok(((*digits as f64).ln(), 0)),
        MapKind::MarkovLinear(mk) => {
            let d = mk.dim();
            let log_slope: Vec<Vec<f64>> = (0..d)
                .map(|i| (0..d).map(|j| mk.slope(i, j).map_or(0.0, |s| ln_abs(&s))).collect())
                .collect();
            // the branch used at step k is fixed by digits k and k+1
            let word = sample_markov_word(mk, &mut rng, n_iter as usize + 1);
            let sum: f64 = word.windows(2).map(|w| log_slope[w[0] as usize][w[1] as usize]).sum();
            Ok((sum / n_iter as f64, 0))
        }
        _ => {
            let mut resampled = 0;
            'restart: loop {
                if resampled > 1000 {
                    return Err(Error::Numerical("every sampled orbit reached a boundary".into()));
                }
                let mut x = m.sample_f64(&mut rng);
                let mut sum = 0.0;
                for _ in 0..n_iter {
                    if x <= 0.0 && matches!(map.kind(), MapKind::Gauss) {
                        resampled += 1;
                        continue 'restart;
                    }
                    sum += map.log_derivative_f64(x);
                    x = match map.step_f64(x) {
                        Some((_, y, _)) => y,
                        None => {
                            resampled += 1;
                            continue 'restart;
                        }
                    };
                }
                return Ok((sum / n_iter as f64, resampled));
            }
        }
    }
}

pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `(1/n) log(1/µ(P(n, x)))`.
pub fn entropy_smb(map: &MapModel, m: &InvariantMeasure, x: &Point, n: usize) -> Result<EntropyEstimate> {
    if n == 0 {
        return Err(Error::InvalidParameter("SMB depth must be positive".into()));
    }
    let it = crate::coding::itinerary(map, x, n)?;
    if let Some(&k) = it.boundary_steps.first() {
        return Err(Error::BoundaryPoint { step: k });
    }
    let word = it.complete()?;
    let ln_mass = m.cylinder_mass(map, &word)?.ln();
    Ok(EntropyEstimate {
        method: EntropyMethod::Smb,
        value: -ln_mass / n as f64,
        stderr: None,
        n_iter: n as u64,
        n_trials: 1,
        seed: None,
        resampled: 0,
        trial_values: Vec::new(),
    })
}

/// Exact `µ(T^{-ℓ}A ∩ Q)` for cylinders `Q` (word `q`) and `A` (word `a`)
/// of a finite Markov measure.
pub fn correlation_mass(m: &InvariantMeasure, q: &[u32], a: &[u32], ell: usize) -> Result<BigRational> {
    let InvariantMeasure::MarkovStationary { p, matrix } = m else {
        return Err(Error::Unsupported("correlations need a Markov measure".into()));
    };
    let word_mass = |w: &[u32]| -> BigRational {
        let mut acc = p[w[0] as usize].clone();
        for pair in w.windows(2) {
            acc *= matrix.get(pair[0] as usize, pair[1] as usize);
        }
        acc
    };
    let mq = q.len() - 1;
    if ell > mq {
        // (M^{ℓ-m})_{q_m, a_0} links the two blocks through the free middle
        let d = matrix.dim();
        let mut row: Vec<BigRational> = (0..d).map(|j| if j == q[mq] as usize { BigRational::one() } else { BigRational::zero() }).collect();
        for _ in 0..(ell - mq) {
            row = (0..d).map(|j| (0..d).map(|k| &row[k] * matrix.get(k, j)).sum()).collect();
        }
        let link = &row[a[0] as usize] / &p[a[0] as usize];
        return Ok(word_mass(q) * link * word_mass(a));
    }
    let overlap = mq + 1 - ell;
    for k in 0..overlap.min(a.len()) {
        if q[ell + k] != a[k] {
            return Ok(BigRational::zero());
        }
    }
    let mut merged = q.to_vec();
    merged.extend_from_slice(&a[overlap.min(a.len())..]);
    if merged.windows(2).any(|w| !matrix.allowed(w[0] as usize, w[1] as usize)) {
        return Ok(BigRational::zero());
    }
    Ok(word_mass(&merged))
}

/// `e^{-n(h+ε)} < µ < e^{-n(h-ε)}`.
pub fn smb_regular(ln_mass: f64, n: usize, h: f64, eps: f64) -> bool {
    let n = n as f64;
    ln_mass > -n * (h + eps) && ln_mass < -n * (h - eps)
}

/// Total mass of depth-`n` cylinders starting in block `first`, whose `n`-th
/// image is block `last`, and which are SMB-regular.
pub fn smb_regular_mass(map: &MapModel, m: &InvariantMeasure, first: u32, last: u32, n: usize, eps: f64) -> Result<BigRational> {
    let h = entropy_closed_form(map, m)?.value;
    let mut total = BigRational::zero();
    for w in admissible_words(map, n + 1)? {
        if w[0] != first || w[n] != last {
            continue;
        }
        let Mass::Exact(mass) = m.cylinder_mass(map, &w)? else {
            return Err(Error::Unsupported("exact enumeration needs exact masses".into()));
        };
        if smb_regular(ln_abs(&mass), n, h, eps) {
            total += mass;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rational;
    use crate::seed::trial_rng;

    fn matrix(rows: &[&[(i64, i64)]]) -> StochasticMatrix {
        StochasticMatrix::new(rows.iter().map(|r| r.iter().map(|&(a, b)| rational(a, b)).collect()).collect()).unwrap()
    }

    #[test]
    fn stationary_vectors() {
        let m = matrix(&[&[(1, 2), (1, 2)], &[(1, 2), (1, 2)]]);
        assert_eq!(stationary_vector(&m).unwrap(), vec![rational(1, 2), rational(1, 2)]);
        let m = matrix(&[&[(3, 4), (1, 4)], &[(1, 2), (1, 2)]]);
        assert_eq!(stationary_vector(&m).unwrap(), vec![rational(2, 3), rational(1, 3)]);
        let m = matrix(&[&[(0, 1), (1, 1)], &[(1, 1), (0, 1)]]);
        assert_eq!(stationary_vector(&m), Err(Error::NotPrimitive));
    }

    #[test]
    fn gauss_interval_masses() {
        let g = InvariantMeasure::Gauss;
        let full = g.measure_interval(&rational(0, 1), &rational(1, 1)).unwrap().to_f64();
        assert!((full - 1.0).abs() < 1e-15);
        let half = g.measure_interval(&rational(0, 1), &rational(1, 2)).unwrap().to_f64();
        assert!((half - 1.5f64.ln() / LN_2).abs() < 1e-15);
        assert!(g.measure_interval(&rational(1, 2), &rational(1, 4)).is_err());
        assert_eq!(
            InvariantMeasure::Lebesgue.measure_interval(&rational(1, 4), &rational(1, 2)).unwrap(),
            Mass::Exact(rational(1, 4))
        );
    }

    #[test]
    fn closed_form_entropies() {
        let m = MapModel::dary_shift(2).unwrap();
        let h = entropy_closed_form(&m, &InvariantMeasure::Lebesgue).unwrap().value;
        assert!((h - LN_2).abs() < 1e-15);
        let g = MapModel::gauss();
        let h = entropy_closed_form(&g, &InvariantMeasure::Gauss).unwrap().value;
        assert!((h - 2.373_138_220_9).abs() < 1e-9);
        assert!(entropy_closed_form(&g, &InvariantMeasure::Lebesgue).is_err());
        let b = MapModel::blaschke(vec![num_complex::Complex64::new(0.0, 0.0); 2]).unwrap();
        let h = entropy_closed_form(&b, &InvariantMeasure::Lebesgue).unwrap().value;
        assert!((h - LN_2).abs() < 1e-13);
    }

    #[test]
    fn birkhoff_constant_slope() {
        let m = MapModel::dary_shift(3).unwrap();
        let e = entropy_birkhoff(&m, &InvariantMeasure::Lebesgue, 100, 5, 1).unwrap();
        assert!(e.trial_values.iter().all(|&v| v == 3f64.ln()));
        let b = MapModel::blaschke(vec![num_complex::Complex64::new(0.0, 0.0); 2]).unwrap();
        let e = entropy_birkhoff(&b, &InvariantMeasure::Lebesgue, 1000, 3, 1).unwrap();
        assert!((e.value - LN_2).abs() < 1e-12);
    }

    #[test]
    fn smb_uniform() {
        let m = MapModel::dary_shift(2).unwrap();
        let e = entropy_smb(&m, &InvariantMeasure::Lebesgue, &Point::ratio(1, 3), 10).unwrap();
        assert!((e.value - 1.1 * LN_2).abs() < 1e-14);
        let q = rational(1, 4);
        let m4 = MapModel::bernoulli(&[q.clone(), q.clone(), q.clone(), q]).unwrap();
        let mu = InvariantMeasure::natural_for(&m4);
        let e = entropy_smb(&m4, &mu, &Point::ratio(1, 7), 10).unwrap();
        assert!((e.value - 1.1 * 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn gauss_samples_have_gauss_distribution() {
        let mut rng = trial_rng(5, 0);
        let g = InvariantMeasure::Gauss;
        let n = 20_000;
        let below_half = (0..n).filter(|_| to_f64(&g.sample_exact(&mut rng, 128)) < 0.5).count();
        let expected = 1.5f64.ln() / LN_2;
        assert!((below_half as f64 / n as f64 - expected).abs() < 0.015);
    }

    #[test]
    fn markov_words_follow_transitions() {
        let golden = MapModel::markov_linear(matrix(&[&[(1, 2), (1, 2)], &[(1, 1), (0, 1)]])).unwrap();
        let mut rng = trial_rng(9, 3);
        let w = sample_markov_word(golden.markov().unwrap(), &mut rng, 10_000);
        assert!(w.windows(2).all(|p| !(p[0] == 1 && p[1] == 1)));
        let ones = w.iter().filter(|&&d| d == 1).count() as f64 / w.len() as f64;
        assert!((ones - 1.0 / 3.0).abs() < 0.03);
    }

    #[test]
    fn overlapping_correlation() {
        let third = MapModel::bernoulli(&[rational(1, 3), rational(2, 3)]).unwrap();
        let mu = InvariantMeasure::natural_for(&third);
        // q = 0 1, a = 1 0, ℓ = 1: merged word 0 1 0
        let c = correlation_mass(&mu, &[0, 1], &[1, 0], 1).unwrap();
        assert_eq!(c, rational(1, 3) * rational(2, 3) * rational(1, 3));
        assert_eq!(correlation_mass(&mu, &[0, 1], &[0, 0], 1).unwrap(), rational(0, 1));
    }
}
