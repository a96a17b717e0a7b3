use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::bounds::cantor_lambda;
use super::digit_ratio;
use crate::coding::{inside_ball, refine_schedule_to_depths};
use crate::error::{Error, Result};
use crate::exact::{format_rational, ln_abs, to_f64};
use crate::interval::Interval;
use crate::maps::{InverseMap, MapModel};
use crate::measures::{entropy_closed_form, smb_regular, InvariantMeasure};
use crate::recurrence::{Schedule, TargetPoint};

/// Tolerance of the SMB-regular connecting words.
pub const SMB_EPS: f64 = 0.3;
pub const DEFAULT_FROSTMAN_CAP: f64 = 1e3;
/// Bound on `D^{N+1}` when enumerating connecting words.
const MAX_CONNECTOR_SEARCH: u128 = 1 << 22;
const MAX_BLOCKS: usize = 1 << 21;
/// Target digits available to the refine step for periodic targets.
const TARGET_DIGITS: usize = 4096;

/// One pair `J ⊂ J̃` of a construction level.
#[derive(Clone, Debug)]
pub struct StageBlock {
    /// Index of the enclosing block one level up.
    pub parent: usize,
    /// Digits of `J`; those of `J̃` are its first `tilde_depth + 1`.
    pub word: Vec<u8>,
    pub tilde: Interval,
    pub block: Interval,
    pub nu: BigRational,
}

#[derive(Clone, Debug)]
pub struct StageLevel {
    /// `N_j`; 0 on the root level.
    pub size: usize,
    pub k: usize,
    /// `d_j`: `T^{d_j}` maps each `J̃` onto `P(0, x0)` and each `J` onto `P(k_j, x0)`.
    pub tilde_depth: usize,
    pub blocks: Vec<StageBlock>,
    /// min and max of `λ(J̃)/λ(J_{j-1})`.
    pub alpha: f64,
    pub beta: f64,
    /// min of `λ(J)/λ(J̃)`.
    pub gamma: f64,
    /// min over parents of `λ(∪J̃ ∩ J_{j-1})/λ(J_{j-1})`.
    pub delta: f64,
    /// `P(k_j, x0) ⊂ B(x0, r_{d_j})`, checked exactly; `None` for depth schedules.
    pub hits_verified: Option<bool>,
}

impl StageLevel {
    pub fn depth(&self) -> usize {
        self.tilde_depth + self.k
    }

    /// `(a, b, c)` with `α = e^{-Na}`, `β = e^{-Nb}`, `γ = e^{-Nc}`.
    pub fn rates(&self) -> (f64, f64, f64) {
        let n = self.size as f64;
        (-self.alpha.ln() / n, -self.beta.ln() / n, -self.gamma.ln() / n)
    }
}

#[derive(Clone, Debug)]
pub struct CantorStage {
    pub map_id: &'static str,
    pub target: f64,
    pub schedule: String,
    /// `levels[0]` holds `J_0 = P(0, x0)`.
    pub levels: Vec<StageLevel>,
    pub nesting_violations: usize,
    pub nu_level_sums_exact: bool,
    pub nu_parent_sums_exact: bool,
    pub notes: Vec<String>,
}

type Affine = (BigRational, BigRational);

fn compose(f: &Affine, g: &Affine) -> Affine {
    (&f.0 + &f.1 * &g.0, &f.1 * &g.1)
}

fn apply(f: &Affine, iv: &Interval) -> Interval {
    Interval {
        left: &f.0 + &f.1 * &iv.left,
        right: &f.0 + &f.1 * &iv.right,
        left_closed: iv.left_closed,
        right_closed: iv.right_closed,
    }
}

// Unreduced arithmetic for the per-block loop; values stay exact, and
// reduction happens only when formatting.
fn raw_mul(a: &BigRational, b: &BigRational) -> BigRational {
    BigRational::new_raw(a.numer() * b.numer(), a.denom() * b.denom())
}

fn raw_add(a: &BigRational, b: &BigRational) -> BigRational {
    if a.denom() == b.denom() {
        BigRational::new_raw(a.numer() + b.numer(), a.denom().clone())
    } else {
        BigRational::new_raw(a.numer() * b.denom() + b.numer() * a.denom(), a.denom() * b.denom())
    }
}

fn raw_apply(f: &Affine, iv: &Interval) -> Interval {
    Interval {
        left: raw_add(&f.0, &raw_mul(&f.1, &iv.left)),
        right: raw_add(&f.0, &raw_mul(&f.1, &iv.right)),
        left_closed: iv.left_closed,
        right_closed: iv.right_closed,
    }
}

fn raw_length(iv: &Interval) -> BigRational {
    raw_add(&iv.right, &-&iv.left)
}

fn identity() -> Affine {
    (BigRational::zero(), BigRational::one())
}

/// The composed inverse branch taking `P_{w_last}` onto the cylinder of `w`.
fn word_affine(map: &MapModel, w: &[u32]) -> Result<Affine> {
    let mut f = identity();
    for pair in w.windows(2) {
        let InverseMap::Affine { offset, scale } = map.inverse_map(pair[0], pair[1])? else {
            return Err(Error::Unsupported("Cantor stages need affine branches".into()));
        };
        f = compose(&f, &(offset, scale));
    }
    Ok(f)
}

/// Admissible words of length `n + 1` from `first` to `last`.
fn connecting_words(map: &MapModel, d: u32, first: u32, last: u32, n: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut stack = vec![vec![first]];
    while let Some(w) = stack.pop() {
        let tail = *w.last().unwrap();
        if w.len() == n + 1 {
            if tail == last {
                out.push(w);
            }
            continue;
        }
        for b in (0..d).rev() {
            if map.transition_allowed(tail, b) {
                let mut v = w.clone();
                v.push(b);
                stack.push(v);
            }
        }
    }
    out
}

fn target_digits(target: &TargetPoint) -> Result<Vec<u32>> {
    let len = match target.known_depth() {
        Some(k) => k + 1,
        None => TARGET_DIGITS,
    };
    target.prefix(len)
}

/// Builds the nested families `J_j ⊂ J̃_j ⊂ J_{j-1}` for `sizes.len()`
/// levels, with `ν` split in proportion to `λ(J̃)`.
pub fn build_cantor_stage(map: &MapModel, target: &TargetPoint, sched: &Schedule, sizes: &[usize]) -> Result<CantorStage> {
    sched.validate()?;
    if !map.is_symbolic() {
        return Err(Error::Unsupported(format!("Cantor stages need a d-ary shift or Markov map, not {}", map.name())));
    }
    if sizes.is_empty() || sizes.len() > 3 || sizes.contains(&0) {
        return Err(Error::InvalidParameter("need 1 to 3 positive level sizes".into()));
    }
    let d = map.finite_alphabet().unwrap();
    if d > 256 {
        return Err(Error::Unsupported("alphabets above 256 digits".into()));
    }
    let mu = InvariantMeasure::natural_for(map);
    let h = entropy_closed_form(map, &mu)?.value;
    let x0 = target.point_rational();
    let x0_digits = target_digits(target)?;
    let first = x0_digits[0];
    let p0 = map.partition_block(first)?;

    let root = StageBlock {
        parent: 0,
        word: vec![first as u8],
        tilde: p0.clone(),
        block: p0.clone(),
        nu: BigRational::one(),
    };
    let mut levels = vec![StageLevel {
        size: 0,
        k: 0,
        tilde_depth: 0,
        blocks: vec![root],
        alpha: 1.0,
        beta: 1.0,
        gamma: 1.0,
        delta: 1.0,
        hits_verified: None,
    }];
    let mut parent_maps = vec![identity()];
    let mut nesting_violations = 0;
    let mut level_sums_exact = true;
    let mut parent_sums_exact = true;
    let mut notes = Vec::new();

    for (j, &n) in sizes.iter().enumerate() {
        let j = j + 1;
        let prev = levels.last().unwrap();
        let last = x0_digits[prev.k];
        let tilde_depth = prev.depth() + n;
        let k = if sched.is_radii() {
            let r = sched.radius_exact(tilde_depth as u64);
            refine_schedule_to_depths(map, &x0_digits, &x0, &[r])?[0]
        } else {
            sched.depth(tilde_depth as u64) as usize
        };
        if k >= x0_digits.len() {
            return Err(Error::InsufficientResolution(format!("level {j} needs target depth {k}")));
        }
        let x0_map = word_affine(map, &x0_digits[..=k])?;
        let image = apply(&x0_map, &map.partition_block(x0_digits[k])?);
        if k >= 1 && !image.closure_inside_interior_of(&p0) {
            return Err(Error::HypothesisViolated(format!(
                "level {j}: the closure of P({k}, x0) = {image} is not inside the interior of P(0, x0) = {p0}"
            )));
        }
        let hits_verified = sched
            .is_radii()
            .then(|| inside_ball(&image, &x0, &sched.radius_exact(tilde_depth as u64), map.is_circle()));

        let search = (d as u128).checked_pow(n as u32 + 1).unwrap_or(u128::MAX);
        if search > MAX_CONNECTOR_SEARCH {
            return Err(Error::InvalidParameter(format!("level size {n} is too large for a {d}-digit alphabet")));
        }
        let mut connectors = Vec::new();
        for s in connecting_words(map, d as u32, last, first, n) {
            let f = word_affine(map, &s)?;
            let ln_mass = ln_abs(&(&f.1 * p0.length()));
            if smb_regular(ln_mass, n, h, SMB_EPS) {
                connectors.push((s, f));
            }
        }
        if connectors.is_empty() {
            return Err(Error::HypothesisViolated(format!(
                "level {j}: no SMB-regular connecting words of length {n} (eps = {SMB_EPS})"
            )));
        }
        let total = prev.blocks.len() * connectors.len();
        if total > MAX_BLOCKS {
            return Err(Error::InvalidParameter(format!("level {j} would hold {total} blocks")));
        }
        let scale_sum: BigRational = connectors.iter().map(|(_, f)| &f.1).sum();
        let weights: Vec<BigRational> = connectors.iter().map(|(_, f)| &f.1 / &scale_sum).collect();
        let tail: Vec<u8> = x0_digits[1..=k].iter().map(|&x| x as u8).collect();

        // each connector's J̃ and J in the coordinates of its parent
        let relative: Vec<(Interval, Interval)> = connectors.iter().map(|(_, f)| (apply(f, &p0), apply(f, &image))).collect();
        let last_level = j == sizes.len();

        let mut blocks = Vec::with_capacity(total);
        let mut maps = Vec::with_capacity(if last_level { 0 } else { total });
        let (mut ln_alpha, mut ln_beta, mut ln_gamma, mut delta) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::INFINITY);
        let mut level_sum = BigRational::zero();
        for (pi, (parent, pmap)) in prev.blocks.iter().zip(&parent_maps).enumerate() {
            let ln_parent = ln_abs(&parent.block.length());
            let mut child_sum = BigRational::zero();
            if let Some(w) = weights.first() {
                // start from a zero with the children's common denominator
                child_sum = BigRational::new_raw(0.into(), parent.nu.denom() * w.denom());
            }
            let mut covered = 0.0;
            for (((s, f), w), (rel_tilde, rel_block)) in connectors.iter().zip(&weights).zip(&relative) {
                let tilde = raw_apply(pmap, rel_tilde);
                let block = raw_apply(pmap, rel_block);
                let nested = tilde.subset_of(&parent.block)
                    && if k >= 1 { block.closure_inside_interior_of(&tilde) } else { block == tilde };
                if !nested {
                    nesting_violations += 1;
                }
                let ln_tilde = ln_abs(&raw_length(&tilde));
                let ln_block = ln_abs(&raw_length(&block));
                ln_alpha = ln_alpha.min(ln_tilde - ln_parent);
                ln_beta = ln_beta.max(ln_tilde - ln_parent);
                ln_gamma = ln_gamma.min(ln_block - ln_tilde);
                covered += (ln_tilde - ln_parent).exp();

                let nu = raw_mul(&parent.nu, w);
                child_sum = if child_sum.denom() == nu.denom() { raw_add(&child_sum, &nu) } else { &child_sum + &nu };
                let mut word = Vec::with_capacity(parent.word.len() + n + k);
                word.extend_from_slice(&parent.word);
                word.extend(s[1..].iter().map(|&x| x as u8));
                word.extend_from_slice(&tail);
                blocks.push(StageBlock { parent: pi, word, tilde, block, nu });
                if !last_level {
                    let m = compose(&compose(pmap, f), &x0_map);
                    maps.push((m.0.reduced(), m.1.reduced()));
                }
            }
            delta = delta.min(covered);
            if child_sum != parent.nu {
                parent_sums_exact = false;
            }
            level_sum += child_sum.reduced();
        }
        if !level_sum.is_one() {
            level_sums_exact = false;
        }
        if k == 0 {
            notes.push(format!("level {j}: k = 0, so J = J̃"));
        }
        levels.push(StageLevel {
            size: n,
            k,
            tilde_depth,
            blocks,
            alpha: ln_alpha.exp(),
            beta: ln_beta.exp(),
            gamma: ln_gamma.exp(),
            delta: delta.min(1.0),
            hits_verified,
        });
        parent_maps = maps;
    }
    notes.push("asymptotic hypotheses on d_j and N_j are not checked at finite depth".into());
    Ok(CantorStage {
        map_id: map.name(),
        target: target.point.to_f64(),
        schedule: sched.name().into(),
        levels,
        nesting_violations,
        nu_level_sums_exact: level_sums_exact,
        nu_parent_sums_exact: parent_sums_exact,
        notes,
    })
}

impl CantorStage {
    pub fn leaves(&self) -> &[StageBlock] {
        &self.levels.last().unwrap().blocks
    }

    pub fn sizes(&self) -> Vec<u64> {
        self.levels[1..].iter().map(|l| l.size as u64).collect()
    }

    /// Worst-case `(a, b, c, δ)` over the levels.
    pub fn parameters(&self) -> (f64, f64, f64, f64) {
        self.levels[1..].iter().fold(
            (f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY, 1.0f64),
            |(a, b, c, d), l| {
                let (la, lb, lc) = l.rates();
                (a.max(la), b.min(lb), c.max(lc.max(0.0)), d.min(l.delta))
            },
        )
    }

    pub fn cantor_lambda(&self) -> Result<f64> {
        let (a, b, c, delta) = self.parameters();
        cantor_lambda(a, b, c, delta, &self.sizes())
    }

    /// Largest `Λ` satisfying the product condition at every built level,
    /// with `δ_{m+1} = 1` past the last level.
    pub fn lambda_hypothesis(&self) -> f64 {
        let lv = &self.levels[1..];
        let mut best = f64::INFINITY;
        let (mut lhs, mut rhs) = (0.0, 0.0);
        for (i, l) in lv.iter().enumerate() {
            lhs += l.beta.ln() - l.delta.ln();
            rhs += l.alpha.ln() + l.gamma.ln();
            let next = lv.get(i + 1).map_or(0.0, |n| -n.delta.ln());
            best = best.min((lhs + next) / rhs);
        }
        best
    }

    /// JSON form, listing at most `max_blocks` blocks per level.
    pub fn record(&self, max_blocks: usize) -> StageRecord {
        let levels = self
            .levels
            .iter()
            .map(|l| {
                let (a, b, c) = if l.size == 0 { (0.0, 0.0, 0.0) } else { l.rates() };
                LevelRecord {
                    size: l.size,
                    k: l.k,
                    tilde_depth: l.tilde_depth,
                    depth: l.depth(),
                    alpha: l.alpha,
                    beta: l.beta,
                    gamma: l.gamma,
                    delta: l.delta,
                    a,
                    b,
                    c,
                    hits_verified: l.hits_verified,
                    block_count: l.blocks.len(),
                    blocks: l
                        .blocks
                        .iter()
                        .take(max_blocks)
                        .map(|b| BlockRecord {
                            word: b.word.clone(),
                            lambda: format_rational(&b.block.length()),
                            nu: format_rational(&b.nu.reduced()),
                        })
                        .collect(),
                }
            })
            .collect();
        StageRecord {
            map: self.map_id.into(),
            target: self.target,
            schedule: self.schedule.clone(),
            levels,
            nesting_violations: self.nesting_violations,
            nu_level_sums_exact: self.nu_level_sums_exact,
            nu_parent_sums_exact: self.nu_parent_sums_exact,
            cantor_lambda: self.cantor_lambda().ok(),
            lambda_hypothesis: self.lambda_hypothesis(),
            notes: self.notes.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub word: Vec<u8>,
    #[serde(rename = "λ")]
    pub lambda: String,
    #[serde(rename = "ν")]
    pub nu: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub size: usize,
    pub k: usize,
    pub tilde_depth: usize,
    pub depth: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub hits_verified: Option<bool>,
    pub block_count: usize,
    pub blocks: Vec<BlockRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub map: String,
    pub target: f64,
    pub schedule: String,
    pub levels: Vec<LevelRecord>,
    pub nesting_violations: usize,
    pub nu_level_sums_exact: bool,
    pub nu_parent_sums_exact: bool,
    pub cantor_lambda: Option<f64>,
    pub lambda_hypothesis: f64,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrostmanReport {
    /// Largest `γ ∈ [0,1]` with `ν(Q) ≤ cap · λ(Q)^γ` on every block.
    pub gamma: f64,
    pub cap: f64,
    /// Least-squares slope of `ln ν` against `ln λ`, for diagnostics.
    pub slope: f64,
    pub residual_rms: f64,
    pub pairs: usize,
}

/// Frostman exponent over every cylinder `P(m, ·)` that contains a leaf.
pub fn frostman_exponent(stage: &CantorStage, map: &MapModel, cap: f64) -> Result<FrostmanReport> {
    if stage.levels.len() < 3 {
        return Err(Error::InsufficientResolution("Frostman exponent needs at least two levels".into()));
    }
    let leaves = stage.leaves();
    if leaves.len() < 10 {
        return Err(Error::InsufficientResolution(format!("only {} blocks", leaves.len())));
    }
    let d = map.finite_alphabet().unwrap_or(0);
    let ln_block: Vec<f64> = (0..d as u32).map(|i| ln_abs(&map.partition_block(i).unwrap().length())).collect();
    let ln_step = |a: u8, b: u8| digit_ratio(map, a as u32, b as u32).map_or(f64::NEG_INFINITY, f64::ln);

    let mut order: Vec<usize> = (0..leaves.len()).collect();
    order.sort_by(|&a, &b| leaves[a].word.cmp(&leaves[b].word));
    let max_len = leaves.iter().map(|l| l.word.len()).max().unwrap();
    let mut acc = vec![0.0f64; max_len];
    let mut ln_lam = vec![0.0f64; max_len];
    let mut best: HashMap<(usize, i64), (f64, f64)> = HashMap::new();
    let mut flush = |depth: usize, ln_l: f64, mass: f64| {
        let key = (depth, (ln_l * 1e9).round() as i64);
        let ln_nu = mass.ln();
        let e = best.entry(key).or_insert((ln_l, ln_nu));
        e.1 = e.1.max(ln_nu);
    };
    let mut prev: Option<&[u8]> = None;
    for &i in &order {
        let w = &leaves[i].word;
        let nu = to_f64(&leaves[i].nu);
        let l = prev.map_or(0, |p| p.iter().zip(w).take_while(|(a, b)| a == b).count());
        if let Some(p) = prev {
            for depth in l..p.len() {
                flush(depth, ln_lam[depth], acc[depth]);
            }
        }
        for depth in l..w.len() {
            acc[depth] = 0.0;
            ln_lam[depth] = if depth == 0 {
                ln_block[w[0] as usize]
            } else {
                ln_lam[depth - 1] + ln_step(w[depth - 1], w[depth])
            };
        }
        for a in &mut acc[..w.len()] {
            *a += nu;
        }
        prev = Some(w);
    }
    if let Some(p) = prev {
        for depth in 0..p.len() {
            flush(depth, ln_lam[depth], acc[depth]);
        }
    }
    let pairs: Vec<(f64, f64)> = best.into_values().collect();
    frostman_from_pairs(&pairs, cap)
}

/// Frostman exponent from `(ln λ(Q), ln ν(Q))` pairs.
pub fn frostman_from_pairs(pairs: &[(f64, f64)], cap: f64) -> Result<FrostmanReport> {
    if pairs.len() < 10 {
        return Err(Error::InsufficientResolution(format!("only {} blocks", pairs.len())));
    }
    if !(cap >= 1.0) {
        return Err(Error::InvalidParameter("Frostman cap must be at least 1".into()));
    }
    let ln_cap = cap.ln();
    let worst = |g: f64| pairs.iter().map(|&(ll, ln)| ln - g * ll).fold(f64::NEG_INFINITY, f64::max);
    let gamma = if worst(1.0) <= ln_cap {
        1.0
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if worst(mid) <= ln_cap { lo = mid } else { hi = mid }
        }
        lo
    };
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    let rss: f64 = pairs.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    Ok(FrostmanReport { gamma, cap, slope, residual_rms: (rss / n).sqrt(), pairs: pairs.len() })
}
