//! Concrete expanding maps of the interval and the circle.
//!
//! Every map carries a Markov partition `P_0` whose blocks are indexed by
//! digits. Digits run `0..D` for finite maps and `1..` for the Gauss map.

use std::f64::consts::PI;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exact::{floor_to_bigint, format_rational, from_f64, parse_rational, rational, to_f64};
use crate::interval::Interval;
use crate::measures::stationary_vector;

#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    Exact(BigRational),
    Approx(f64),
}

impl Point {
    pub fn ratio(num: i64, den: i64) -> Self {
        Point::Exact(rational(num, den))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Point::Exact(q) => to_f64(q),
            Point::Approx(x) => *x,
        }
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Point::Exact(q) => Some(q),
            Point::Approx(_) => None,
        }
    }

    /// Exact value, converting a float by its binary expansion.
    pub fn to_rational(&self) -> BigRational {
        match self {
            Point::Exact(q) => q.clone(),
            Point::Approx(x) => from_f64(*x),
        }
    }
}

impl From<f64> for Point {
    fn from(x: f64) -> Self {
        Point::Approx(x)
    }
}

impl From<BigRational> for Point {
    fn from(q: BigRational) -> Self {
        Point::Exact(q)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Exact(q) => write!(f, "{}", format_rational(q)),
            Point::Approx(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchCount {
    Finite(usize),
    CountablyInfinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepStatus {
    Interior,
    /// The input sat on an endpoint of a `P_0` block; the digit follows the
    /// half-open convention.
    Boundary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub digit: u32,
    pub image: Point,
    pub status: StepStatus,
}

/// A row-stochastic matrix with exact rational entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StochasticMatrix {
    rows: Vec<Vec<BigRational>>,
}

impl StochasticMatrix {
    pub fn new(rows: Vec<Vec<BigRational>>) -> Result<Self> {
        let d = rows.len();
        if d < 2 {
            return Err(Error::InvalidParameter("transition matrix needs at least 2 states".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidParameter(format!("row {i} has {} entries, expected {d}", row.len())));
            }
            if row.iter().any(|q| q < &BigRational::zero()) {
                return Err(Error::InvalidParameter(format!("row {i} has a negative entry")));
            }
            let sum: BigRational = row.iter().sum();
            if !sum.is_one() {
                return Err(Error::InvalidParameter(format!("row {i} sums to {}", format_rational(&sum))));
            }
        }
        Ok(StochasticMatrix { rows })
    }

    pub fn parse(rows: &[Vec<String>]) -> Result<Self> {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows)
    }

    /// Every row equal to `p`: the Bernoulli chain.
    pub fn bernoulli(p: &[BigRational]) -> Result<Self> {
        Self::new(vec![p.to_vec(); p.len()])
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> &BigRational {
        &self.rows[i][j]
    }

    pub fn allowed(&self, i: usize, j: usize) -> bool {
        !self.rows[i][j].is_zero()
    }

    pub fn rows(&self) -> &[Vec<BigRational>] {
        &self.rows
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        self.rows.iter().map(|r| r.iter().map(format_rational).collect()).collect()
    }

    /// Smallest `n` with every entry of `M^n` positive, searched up to
    /// Wielandt's bound `(D-1)^2 + 1`.
    pub fn mixing_exponent(&self) -> Option<usize> {
        let d = self.dim();
        let base: Vec<Vec<bool>> =
            (0..d).map(|i| (0..d).map(|j| self.allowed(i, j)).collect()).collect();
        let mut power = base.clone();
        for n in 1..=(d - 1) * (d - 1) + 1 {
            if power.iter().all(|r| r.iter().all(|&b| b)) {
                return Some(n);
            }
            power = (0..d)
                .map(|i| (0..d).map(|j| (0..d).any(|k| power[i][k] && base[k][j])).collect())
                .collect();
        }
        None
    }
}

/// Piecewise-affine Markov map preserving Lebesgue measure.
///
/// Block `P_i = [b_i, b_{i+1})` has length `p_i`. Its sub-block `P_{i,j}`
/// has length `p_i p_{ij}` and maps affinely and increasingly onto `P_j`,
/// so a cylinder of word `i_0..i_n` has length `p_{i_0} Π p_{i_k i_{k+1}}`.
#[derive(Clone, Debug)]
pub struct MarkovLinear {
    matrix: StochasticMatrix,
    stationary: Vec<BigRational>,
    block_start: Vec<BigRational>,
    sub_start: Vec<Vec<BigRational>>,
    mixing_exponent: usize,
    block_start_f: Vec<f64>,
    sub_start_f: Vec<Vec<f64>>,
    slope_f: Vec<Vec<f64>>,
}

impl MarkovLinear {
    pub fn new(matrix: StochasticMatrix) -> Result<Self> {
        let p = stationary_vector(&matrix)?;
        Self::with_stationary(matrix, p)
    }

    pub fn with_stationary(matrix: StochasticMatrix, p: Vec<BigRational>) -> Result<Self> {
        let d = matrix.dim();
        let mixing_exponent = matrix.mixing_exponent().ok_or(Error::NotPrimitive)?;
        if p.len() != d {
            return Err(Error::InvalidParameter("probability vector length differs from matrix size".into()));
        }
        for j in 0..d {
            let pj: BigRational = (0..d).map(|i| &p[i] * matrix.get(i, j)).sum();
            if pj != p[j] {
                return Err(Error::InvalidParameter(format!("p is not stationary at state {j}")));
            }
        }
        let mut block_start = vec![BigRational::zero()];
        for pi in &p {
            let last = block_start.last().unwrap().clone();
            block_start.push(last + pi);
        }
        let sub_start: Vec<Vec<BigRational>> = (0..d)
            .map(|i| {
                let mut acc = block_start[i].clone();
                let mut row = vec![acc.clone()];
                for j in 0..d {
                    acc += &p[i] * matrix.get(i, j);
                    row.push(acc.clone());
                }
                row
            })
            .collect();
        let slope_f = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        if matrix.allowed(i, j) {
                            to_f64(&(&p[j] / (&p[i] * matrix.get(i, j))))
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(MarkovLinear {
            block_start_f: block_start.iter().map(to_f64).collect(),
            sub_start_f: sub_start.iter().map(|r| r.iter().map(to_f64).collect()).collect(),
            slope_f,
            matrix,
            stationary: p,
            block_start,
            sub_start,
            mixing_exponent,
        })
    }

    pub fn matrix(&self) -> &StochasticMatrix {
        &self.matrix
    }

    pub fn stationary(&self) -> &[BigRational] {
        &self.stationary
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn mixing_exponent(&self) -> usize {
        self.mixing_exponent
    }

    /// Slope of the branch on `P_{i,j}`; `None` for forbidden transitions.
    pub fn slope(&self, i: usize, j: usize) -> Option<BigRational> {
        self.matrix
            .allowed(i, j)
            .then(|| &self.stationary[j] / (&self.stationary[i] * self.matrix.get(i, j)))
    }

    fn block_of(&self, x: &BigRational) -> usize {
        let d = self.dim();
        (0..d).rev().find(|&i| &self.block_start[i] <= x).unwrap_or(0)
    }

    fn sub_block_of(&self, i: usize, x: &BigRational) -> usize {
        let d = self.dim();
        (0..d)
            .rev()
            .find(|&j| self.matrix.allowed(i, j) && &self.sub_start[i][j] <= x)
            .unwrap_or(0)
    }
}

/// A finite Blaschke product restricted to the unit circle, in angle
/// coordinates `t ∈ [0,1)`, `z = e^{2πit}`.
///
/// The partition is anchored at a fixed point `ξ`: block `d` is the arc
/// `[c_d, c_{d+1})` of the lifted interval `[ξ, ξ+1)` on which the angle lift
/// rises from `Θ(ξ)+d` to `Θ(ξ)+d+1`.
#[derive(Clone, Debug)]
pub struct Blaschke {
    zeros: Vec<Complex64>,
    anchor: f64,
    anchor_lift: f64,
    cuts: Vec<f64>,
}

const NEWTON_TOL: f64 = 1e-14;

impl Blaschke {
    pub fn new(zeros: Vec<Complex64>) -> Result<Self> {
        if zeros.len() < 2 {
            return Err(Error::InvalidParameter("a Blaschke product needs at least 2 zeros to expand".into()));
        }
        if zeros.iter().any(|a| !(a.norm() < 1.0)) {
            return Err(Error::InvalidParameter("Blaschke zeros must lie in the open unit disk".into()));
        }
        if !zeros.iter().any(|a| *a == Complex64::new(0.0, 0.0)) {
            return Err(Error::InvalidParameter("one Blaschke zero must be 0 so that B(0)=0".into()));
        }
        let mut b = Blaschke { zeros, anchor: 0.0, anchor_lift: 0.0, cuts: Vec::new() };
        // Θ(t) - t is increasing and gains N-1 ≥ 1 over a period
        let f0 = b.lift(0.0);
        let m = f0.ceil();
        b.anchor = if f0 == m {
            0.0
        } else {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if b.lift(mid) - mid < m {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let r = 0.5 * (lo + hi);
            if r >= 1.0 { 0.0 } else { r }
        };
        b.anchor_lift = b.lift(b.anchor);
        let n = b.zeros.len();
        let mut cuts = vec![b.anchor];
        for d in 1..n {
            let target = b.anchor_lift + d as f64;
            cuts.push(b.solve_lift(target, b.anchor, b.anchor + 1.0));
        }
        cuts.push(b.anchor + 1.0);
        b.cuts = cuts;
        Ok(b)
    }

    pub fn zeros(&self) -> &[Complex64] {
        &self.zeros
    }

    pub fn degree(&self) -> usize {
        self.zeros.len()
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    /// Lifted block endpoints `c_0 = ξ < c_1 < … < c_N = ξ + 1`.
    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    /// Continuous lift `Θ` of the angle of `B(e^{2πit})`, in turns.
    pub fn lift(&self, t: f64) -> f64 {
        let z_conj = Complex64::from_polar(1.0, -2.0 * PI * t);
        self.zeros
            .iter()
            .map(|a| {
                if a.norm_sqr() == 0.0 {
                    t
                } else {
                    let w = Complex64::new(1.0, 0.0) - a * z_conj;
                    t + w.im.atan2(w.re) / PI - a.arg() / (2.0 * PI)
                }
            })
            .sum()
    }

    /// `|B'(z)| = Σ (1-|a|²)/|z-a|²`, equal to `Θ'(t)`.
    pub fn derivative(&self, t: f64) -> f64 {
        let z = Complex64::from_polar(1.0, 2.0 * PI * t);
        self.zeros.iter().map(|a| (1.0 - a.norm_sqr()) / (z - a).norm_sqr()).sum()
    }

    /// Minimum of `|B'|` on the circle.
    pub fn min_derivative_bound(&self) -> f64 {
        self.zeros.iter().map(|a| (1.0 - a.norm()) / (1.0 + a.norm())).sum()
    }

    fn to_frame(&self, t: f64) -> f64 {
        let t = t.rem_euclid(1.0);
        if t < self.anchor { t + 1.0 } else { t }
    }

    /// Solves `Θ(s) = target` for `s ∈ [lo, hi]` by safeguarded Newton.
    fn solve_lift(&self, target: f64, lo: f64, hi: f64) -> f64 {
        let (mut lo, mut hi) = (lo, hi);
        let mut s = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.lift(s) - target;
            if f > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let next = s - f / self.derivative(s);
            let next = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            if (next - s).abs() < NEWTON_TOL * 0.01 || hi - lo < NEWTON_TOL * 0.01 {
                return next;
            }
            s = next;
        }
        s
    }

    pub fn digit_of(&self, t: f64) -> u32 {
        let s = self.to_frame(t);
        let v = self.lift(s) - self.anchor_lift;
        (v.floor().max(0.0) as u32).min(self.degree() as u32 - 1)
    }

    pub fn apply(&self, t: f64) -> f64 {
        self.lift(t).rem_euclid(1.0)
    }

    /// Preimage in branch `d` of the lifted point `y ∈ [ξ, ξ+1]`, returned in
    /// the lifted frame.
    pub fn inverse_lifted(&self, d: u32, y: f64) -> f64 {
        let d = d as usize;
        let target = self.anchor_lift + d as f64 + (y - self.anchor);
        self.solve_lift(target, self.cuts[d], self.cuts[d + 1])
    }

    pub fn inverse(&self, d: u32, y: f64) -> f64 {
        self.inverse_lifted(d, self.to_frame(y)).rem_euclid(1.0)
    }

    pub fn lift_to_frame(&self, t: f64) -> f64 {
        self.to_frame(t)
    }
}

#[derive(Clone, Debug)]
pub enum MapKind {
    DAryShift { digits: u32 },
    MarkovLinear(MarkovLinear),
    Gauss,
    Blaschke(Blaschke),
}

/// How to pull an interval of `P_next` back through branch `digit`.
#[derive(Clone, Debug)]
pub enum InverseMap {
    /// `x = offset + scale * y`, increasing.
    Affine { offset: BigRational, scale: BigRational },
    /// `x = 1/(d + y)`, decreasing.
    Gauss(u32),
    /// Numerical inverse of a Blaschke branch in lifted coordinates.
    Blaschke(u32),
}

#[derive(Clone, Debug)]
pub struct MapModel {
    kind: MapKind,
    expansion_beta: f64,
    expansion_steps: usize,
}

impl MapModel {
    pub fn dary_shift(digits: u32) -> Result<Self> {
        if digits < 2 {
            return Err(Error::InvalidParameter("the D-ary shift needs D >= 2".into()));
        }
        Ok(MapModel { kind: MapKind::DAryShift { digits }, expansion_beta: digits as f64, expansion_steps: 1 })
    }

    pub fn markov_linear(matrix: StochasticMatrix) -> Result<Self> {
        Self::from_markov(MarkovLinear::new(matrix)?)
    }

    pub fn markov_linear_with(matrix: StochasticMatrix, p: Vec<BigRational>) -> Result<Self> {
        Self::from_markov(MarkovLinear::with_stationary(matrix, p)?)
    }

    pub fn bernoulli(p: &[BigRational]) -> Result<Self> {
        if p.iter().any(|q| q.is_zero()) {
            return Err(Error::InvalidParameter("Bernoulli weights must be positive".into()));
        }
        Self::markov_linear_with(StochasticMatrix::bernoulli(p)?, p.to_vec())
    }

    fn from_markov(m: MarkovLinear) -> Result<Self> {
        let (beta, steps) = markov_expansion(&m)?;
        Ok(MapModel { kind: MapKind::MarkovLinear(m), expansion_beta: beta, expansion_steps: steps })
    }

    pub fn gauss() -> Self {
        MapModel { kind: MapKind::Gauss, expansion_beta: 2.0, expansion_steps: 2 }
    }

    pub fn blaschke(zeros: Vec<Complex64>) -> Result<Self> {
        let b = Blaschke::new(zeros)?;
        let beta = b.min_derivative_bound();
        if beta <= 1.0 {
            return Err(Error::InvalidParameter(format!("Blaschke product is not expanding: min |B'| = {beta}")));
        }
        Ok(MapModel { kind: MapKind::Blaschke(b), expansion_beta: beta, expansion_steps: 1 })
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            MapKind::DAryShift { .. } => "dary_shift",
            MapKind::MarkovLinear(_) => "markov_linear",
            MapKind::Gauss => "gauss",
            MapKind::Blaschke(_) => "blaschke",
        }
    }

    /// The constant β: `|(T^k)'| ≥ β^k` with `k = expansion_steps()`.
    pub fn expansion_beta(&self) -> f64 {
        self.expansion_beta
    }

    pub fn expansion_steps(&self) -> usize {
        self.expansion_steps
    }

    pub fn branch_count(&self) -> BranchCount {
        match &self.kind {
            MapKind::DAryShift { digits } => BranchCount::Finite(*digits as usize),
            MapKind::MarkovLinear(m) => BranchCount::Finite(m.dim()),
            MapKind::Gauss => BranchCount::CountablyInfinite,
            MapKind::Blaschke(b) => BranchCount::Finite(b.degree()),
        }
    }

    pub fn finite_alphabet(&self) -> Option<usize> {
        match self.branch_count() {
            BranchCount::Finite(d) => Some(d),
            BranchCount::CountablyInfinite => None,
        }
    }

    pub fn is_circle(&self) -> bool {
        matches!(self.kind, MapKind::Blaschke(_))
    }

    /// Linear maps with exact digit dynamics.
    pub fn is_symbolic(&self) -> bool {
        matches!(self.kind, MapKind::DAryShift { .. } | MapKind::MarkovLinear(_))
    }

    pub fn mixing_exponent(&self) -> Option<usize> {
        match &self.kind {
            MapKind::MarkovLinear(m) => Some(m.mixing_exponent()),
            MapKind::DAryShift { .. } => Some(1),
            _ => None,
        }
    }

    pub fn markov(&self) -> Option<&MarkovLinear> {
        match &self.kind {
            MapKind::MarkovLinear(m) => Some(m),
            _ => None,
        }
    }

    pub fn check_digit(&self, d: u32) -> Result<()> {
        let ok = match &self.kind {
            MapKind::Gauss => d >= 1,
            _ => (d as usize) < self.finite_alphabet().unwrap(),
        };
        if ok { Ok(()) } else { Err(Error::NoSuchBranch(d)) }
    }

    /// Whether digit `b` may follow digit `a` in an itinerary.
    pub fn transition_allowed(&self, a: u32, b: u32) -> bool {
        match &self.kind {
            MapKind::MarkovLinear(m) => m.matrix.allowed(a as usize, b as usize),
            _ => true,
        }
    }

    /// Block `d` of `P_0`. Circle arcs are in lifted coordinates.
    pub fn partition_block(&self, d: u32) -> Result<Interval> {
        self.check_digit(d)?;
        Ok(match &self.kind {
            MapKind::DAryShift { digits } => Interval::half_open(
                rational(d as i64, *digits as i64),
                rational(d as i64 + 1, *digits as i64),
            ),
            MapKind::MarkovLinear(m) => Interval::half_open(
                m.block_start[d as usize].clone(),
                m.block_start[d as usize + 1].clone(),
            ),
            MapKind::Gauss => Interval {
                left: rational(1, d as i64 + 1),
                right: rational(1, d as i64),
                left_closed: false,
                right_closed: true,
            },
            MapKind::Blaschke(b) => {
                let shift = if b.cuts[d as usize] >= 1.0 { 1.0 } else { 0.0 };
                Interval::half_open(from_f64(b.cuts[d as usize] - shift), from_f64(b.cuts[d as usize + 1] - shift))
            }
        })
    }

    /// The digit of `x` under the half-open convention, with a boundary flag.
    pub fn digit_of(&self, x: &Point) -> Result<(u32, bool)> {
        match (&self.kind, x) {
            (MapKind::Gauss, _) => {
                let step = self.evaluate(x)?;
                Ok((step.digit, step.status == StepStatus::Boundary))
            }
            (MapKind::Blaschke(b), _) => {
                let t = x.to_f64();
                let d = b.digit_of(t);
                let s = b.lift_to_frame(t);
                Ok((d, s == b.cuts[d as usize]))
            }
            (_, Point::Approx(t)) => {
                let (d, _, boundary) = self.linear_step_f64(*t);
                Ok((d, boundary))
            }
            (MapKind::DAryShift { digits }, Point::Exact(q)) => {
                check_unit(q)?;
                let scaled = q * BigRational::from_integer(BigInt::from(*digits));
                let d = floor_to_bigint(&scaled).to_u32().unwrap();
                Ok((d, scaled.is_integer()))
            }
            (MapKind::MarkovLinear(m), Point::Exact(q)) => {
                check_unit(q)?;
                let i = m.block_of(q);
                Ok((i as u32, q == &m.block_start[i]))
            }
        }
    }

    /// One step of the map. Fails only when the Gauss orbit has reached 0.
    pub fn evaluate(&self, x: &Point) -> Result<Step> {
        match (&self.kind, x) {
            (MapKind::DAryShift { digits }, Point::Exact(q)) => {
                check_unit(q)?;
                let scaled = q * BigRational::from_integer(BigInt::from(*digits));
                let floor = floor_to_bigint(&scaled);
                let boundary = scaled.is_integer();
                let digit = floor.to_u32().unwrap();
                let image = scaled - BigRational::from_integer(floor);
                Ok(Step { digit, image: Point::Exact(image), status: status(boundary) })
            }
            (MapKind::MarkovLinear(m), Point::Exact(q)) => {
                check_unit(q)?;
                let i = m.block_of(q);
                let j = m.sub_block_of(i, q);
                let slope = m.slope(i, j).unwrap();
                let image = &m.block_start[j] + (q - &m.sub_start[i][j]) * slope;
                Ok(Step { digit: i as u32, image: Point::Exact(image), status: status(q == &m.block_start[i]) })
            }
            (MapKind::Gauss, Point::Exact(q)) => {
                check_unit(q)?;
                if q.is_zero() {
                    return Err(Error::OrbitEnded { step: 0 });
                }
                let inv = q.recip();
                let floor = floor_to_bigint(&inv);
                let digit = floor.to_u32().ok_or_else(|| {
                    Error::Numerical("continued-fraction digit exceeds 32 bits".into())
                })?;
                let image = inv - BigRational::from_integer(floor);
                let boundary = image.is_zero();
                Ok(Step { digit, image: Point::Exact(image), status: status(boundary) })
            }
            (MapKind::Blaschke(b), x) => {
                let t = x.to_f64();
                let d = b.digit_of(t);
                let boundary = b.lift_to_frame(t) == b.cuts[d as usize];
                Ok(Step { digit: d, image: Point::Approx(b.apply(t)), status: status(boundary) })
            }
            (_, Point::Approx(t)) => {
                let (digit, image, boundary) = self.step_f64(*t).ok_or(Error::OrbitEnded { step: 0 })?;
                Ok(Step { digit, image: Point::Approx(image), status: status(boundary) })
            }
        }
    }

    fn linear_step_f64(&self, x: f64) -> (u32, f64, bool) {
        match &self.kind {
            MapKind::DAryShift { digits } => {
                let scaled = x * *digits as f64;
                let d = (scaled.floor() as u32).min(digits - 1);
                (d, scaled - d as f64, scaled == scaled.floor())
            }
            MapKind::MarkovLinear(m) => {
                let d = m.dim();
                let i = (0..d).rev().find(|&i| m.block_start_f[i] <= x).unwrap_or(0);
                let j = (0..d)
                    .rev()
                    .find(|&j| m.matrix.allowed(i, j) && m.sub_start_f[i][j] <= x)
                    .unwrap_or(0);
                let image = m.block_start_f[j] + (x - m.sub_start_f[i][j]) * m.slope_f[i][j];
                (i as u32, image.clamp(0.0, 1.0 - f64::EPSILON), x == m.block_start_f[i])
            }
            _ => unreachable!("linear maps only"),
        }
    }

    /// Floating-point step `(digit, image, on_boundary)`; `None` once a Gauss
    /// orbit reaches 0.
    pub fn step_f64(&self, x: f64) -> Option<(u32, f64, bool)> {
        match &self.kind {
            MapKind::Gauss => {
                if x <= 0.0 {
                    return None;
                }
                let inv = 1.0 / x;
                let fl = inv.floor();
                let d = if fl >= u32::MAX as f64 { u32::MAX } else { fl as u32 };
                Some((d, inv - fl, inv == fl))
            }
            MapKind::Blaschke(b) => {
                let d = b.digit_of(x);
                Some((d, b.apply(x), false))
            }
            _ => Some(self.linear_step_f64(x)),
        }
    }

    /// `log |T'(x)|`. Errors only where the derivative is undefined: Gauss at
    /// 0 and Markov sub-block joints whose two sides have different slopes.
    pub fn log_derivative(&self, x: &Point) -> Result<f64> {
        match (&self.kind, x) {
            (MapKind::DAryShift { digits }, _) => Ok((*digits as f64).ln()),
            (MapKind::MarkovLinear(m), Point::Exact(q)) => {
                check_unit(q)?;
                let i = m.block_of(q);
                let j = m.sub_block_of(i, q);
                let slope = m.slope(i, j).unwrap();
                if q == &m.sub_start[i][j] && q != &m.block_start[i] {
                    let prev = (0..j).rev().find(|&k| m.matrix.allowed(i, k));
                    if let Some(k) = prev {
                        if m.slope(i, k).unwrap() != slope {
                            return Err(Error::BoundaryPoint { step: 0 });
                        }
                    }
                }
                Ok(crate::exact::ln_abs(&slope))
            }
            (MapKind::Gauss, Point::Exact(q)) => {
                if q.is_zero() {
                    return Err(Error::BoundaryPoint { step: 0 });
                }
                Ok(-2.0 * crate::exact::ln_abs(q))
            }
            _ => Ok(self.log_derivative_f64(x.to_f64())),
        }
    }

    pub fn log_derivative_f64(&self, x: f64) -> f64 {
        match &self.kind {
            MapKind::DAryShift { digits } => (*digits as f64).ln(),
            MapKind::MarkovLinear(m) => {
                let d = m.dim();
                let i = (0..d).rev().find(|&i| m.block_start_f[i] <= x).unwrap_or(0);
                let j = (0..d)
                    .rev()
                    .find(|&j| m.matrix.allowed(i, j) && m.sub_start_f[i][j] <= x)
                    .unwrap_or(0);
                m.slope_f[i][j].ln()
            }
            // -2 ln x stays finite down to the smallest subnormal
            MapKind::Gauss => -2.0 * x.max(f64::MIN_POSITIVE * f64::EPSILON).ln(),
            MapKind::Blaschke(b) => b.derivative(x).ln(),
        }
    }

    /// The branch of `digit` that lands on block `next`.
    pub fn inverse_map(&self, digit: u32, next: u32) -> Result<InverseMap> {
        self.check_digit(digit)?;
        self.check_digit(next)?;
        Ok(match &self.kind {
            MapKind::DAryShift { digits } => InverseMap::Affine {
                offset: rational(digit as i64, *digits as i64),
                scale: rational(1, *digits as i64),
            },
            MapKind::MarkovLinear(m) => {
                let (i, j) = (digit as usize, next as usize);
                let slope = m.slope(i, j).ok_or(Error::NotAdmissible { from: digit, to: next })?;
                let scale = slope.recip();
                let offset = &m.sub_start[i][j] - &m.block_start[j] * &scale;
                InverseMap::Affine { offset, scale }
            }
            MapKind::Gauss => InverseMap::Gauss(digit),
            MapKind::Blaschke(_) => InverseMap::Blaschke(digit),
        })
    }

    /// The unique `x` in block `digit` with `T(x) = y`.
    pub fn inverse_branch(&self, digit: u32, y: &Point) -> Result<Point> {
        self.check_digit(digit)?;
        if let MapKind::Blaschke(b) = &self.kind {
            return Ok(Point::Approx(b.inverse(digit, y.to_f64())));
        }
        if let MapKind::Gauss = self.kind {
            return Ok(match y {
                Point::Exact(q) => {
                    check_unit(q)?;
                    Point::Exact((q + BigRational::from_integer(BigInt::from(digit))).recip())
                }
                Point::Approx(t) => Point::Approx(1.0 / (digit as f64 + t)),
            });
        }
        let (next, _) = self.digit_of(y)?;
        if !self.transition_allowed(digit, next) {
            return Err(Error::OutsideBranchImage(digit));
        }
        match self.inverse_map(digit, next)? {
            InverseMap::Affine { offset, scale } => Ok(match y {
                Point::Exact(q) => Point::Exact(offset + scale * q),
                Point::Approx(t) => Point::Approx(to_f64(&offset) + to_f64(&scale) * t),
            }),
            _ => unreachable!(),
        }
    }
}

fn status(boundary: bool) -> StepStatus {
    if boundary { StepStatus::Boundary } else { StepStatus::Interior }
}

fn check_unit(q: &BigRational) -> Result<()> {
    if q < &BigRational::zero() || q >= &BigRational::one() {
        return Err(Error::InvalidParameter(format!("point {} outside [0,1)", format_rational(q))));
    }
    Ok(())
}

/// Smallest `k` for which every admissible `k`-step branch expands, with
/// `β` the k-th root of the weakest such slope.
fn markov_expansion(m: &MarkovLinear) -> Result<(f64, usize)> {
    let d = m.dim();
    let log_slope: Vec<Vec<Option<f64>>> = (0..d)
        .map(|i| (0..d).map(|j| m.slope(i, j).map(|s| crate::exact::ln_abs(&s))).collect())
        .collect();
    // worst[i][j] = min log slope over admissible k-step paths from i ending with transition into j
    let mut worst: Vec<Vec<Option<f64>>> = log_slope.clone();
    for k in 1..=8usize {
        let min = worst.iter().flatten().flatten().fold(f64::INFINITY, |a, &b| a.min(b));
        if min > 1e-12 {
            return Ok(((min / k as f64).exp(), k));
        }
        let mut next = vec![vec![None; d]; d];
        for i in 0..d {
            for mid in 0..d {
                let Some(a) = worst[i][mid] else { continue };
                for j in 0..d {
                    if let Some(b) = log_slope[mid][j] {
                        let v = a + b;
                        let slot: &mut Option<f64> = &mut next[i][j];
                        *slot = Some(slot.map_or(v, |s: f64| s.min(v)));
                    }
                }
            }
        }
        worst = next;
    }
    Err(Error::InvalidParameter("Markov map is not expanding within 8 steps".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn doubling_step() {
        let m = MapModel::dary_shift(2).unwrap();
        let s = m.evaluate(&Point::ratio(3, 10)).unwrap();
        assert_eq!(s.image, Point::ratio(3, 5));
        assert_eq!(s.digit, 0);
    }

    #[test]
    fn gauss_exact_step() {
        let g = MapModel::gauss();
        let s = g.evaluate(&Point::ratio(2, 5)).unwrap();
        assert_eq!((s.digit, s.image), (2, Point::ratio(1, 2)));
        assert_eq!(g.evaluate(&Point::ratio(0, 1)), Err(Error::OrbitEnded { step: 0 }));
        let s = g.evaluate(&Point::ratio(1, 2)).unwrap();
        assert_eq!(s.status, StepStatus::Boundary);
    }

    #[test]
    fn blaschke_monomial_doubles_angles() {
        let b = MapModel::blaschke(vec![Complex64::new(0.0, 0.0); 2]).unwrap();
        let s = b.evaluate(&Point::Approx(0.3)).unwrap();
        assert!(approx_eq(s.image.to_f64(), 0.6, 1e-15));
    }

    #[test]
    fn blaschke_needs_origin_zero() {
        assert!(MapModel::blaschke(vec![Complex64::new(0.5, 0.0); 2]).is_err());
        assert!(MapModel::blaschke(vec![Complex64::new(0.0, 0.0)]).is_err());
    }

    #[test]
    fn log_derivatives() {
        let m = MapModel::dary_shift(3).unwrap();
        assert!(approx_eq(m.log_derivative(&Point::ratio(1, 7)).unwrap(), 3f64.ln(), 1e-15));
        let g = MapModel::gauss();
        assert!(approx_eq(g.log_derivative(&Point::ratio(1, 2)).unwrap(), 4f64.ln(), 1e-15));
        let b = MapModel::blaschke(vec![Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0)]).unwrap();
        assert!(approx_eq(b.log_derivative(&Point::Approx(0.0)).unwrap(), 4f64.ln(), 1e-14));
    }

    #[test]
    fn blaschke_lift_derivative_matches_formula() {
        let b = Blaschke::new(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.3, 0.4),
            Complex64::new(-0.5, 0.1),
        ])
        .unwrap();
        for k in 0..20 {
            let t = k as f64 / 20.0 + 0.013;
            let h = 1e-6;
            let fd = (b.lift(t + h) - b.lift(t - h)) / (2.0 * h);
            assert!(approx_eq(fd, b.derivative(t), 1e-6), "t={t}");
        }
        assert!(approx_eq(b.lift(0.2 + 1.0) - b.lift(0.2), 3.0, 1e-12));
        let xi = b.anchor();
        assert!(approx_eq(b.apply(xi), xi, 1e-12));
    }

    #[test]
    fn inverse_branches() {
        let m = MapModel::dary_shift(2).unwrap();
        assert_eq!(m.inverse_branch(1, &Point::ratio(1, 2)).unwrap(), Point::ratio(3, 4));
        let g = MapModel::gauss();
        assert_eq!(g.inverse_branch(2, &Point::ratio(0, 1)).unwrap(), Point::ratio(1, 2));
        let half = rational(1, 2);
        let uniform = StochasticMatrix::new(vec![vec![half.clone(), half.clone()]; 2]).unwrap();
        let mk = MapModel::markov_linear(uniform).unwrap();
        // P_1 = [1/2,1), P_{1,0} = [1/2,3/4); y = 1/4 is the midpoint of P_0
        assert_eq!(mk.inverse_branch(1, &Point::ratio(1, 4)).unwrap(), Point::ratio(5, 8));
    }

    #[test]
    fn forbidden_transition_is_not_invertible() {
        let golden = StochasticMatrix::new(vec![
            vec![rational(1, 2), rational(1, 2)],
            vec![rational(1, 1), rational(0, 1)],
        ])
        .unwrap();
        let m = MapModel::markov_linear(golden).unwrap();
        // y in P_1 cannot be reached from branch 1
        let y = Point::ratio(5, 6);
        assert_eq!(m.inverse_branch(1, &y), Err(Error::OutsideBranchImage(1)));
        assert_eq!(m.expansion_steps(), 2);
    }

    #[test]
    fn non_primitive_matrices_rejected() {
        let swap = StochasticMatrix::new(vec![
            vec![rational(0, 1), rational(1, 1)],
            vec![rational(1, 1), rational(0, 1)],
        ])
        .unwrap();
        assert_eq!(swap.mixing_exponent(), None);
        assert!(matches!(MapModel::markov_linear(swap), Err(Error::NotPrimitive)));
        let absorbing = StochasticMatrix::new(vec![
            vec![rational(1, 1), rational(0, 1)],
            vec![rational(1, 1), rational(0, 1)],
        ])
        .unwrap();
        assert!(MapModel::markov_linear(absorbing).is_err());
    }

    #[test]
    fn mixing_exponent_of_golden_mean() {
        let golden = StochasticMatrix::new(vec![
            vec![rational(1, 2), rational(1, 2)],
            vec![rational(1, 1), rational(0, 1)],
        ])
        .unwrap();
        assert_eq!(golden.mixing_exponent(), Some(2));
    }

    #[test]
    fn markov_image_is_union_of_blocks() {
        let m = MapModel::markov_linear(
            StochasticMatrix::new(vec![
                vec![rational(3, 4), rational(1, 4)],
                vec![rational(1, 2), rational(1, 2)],
            ])
            .unwrap(),
        )
        .unwrap();
        let mk = m.markov().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let inv = m.inverse_map(i, j).unwrap();
                let InverseMap::Affine { offset, scale } = inv else { panic!() };
                let blk = m.partition_block(j).unwrap();
                assert_eq!(&offset + &scale * &blk.left, mk.sub_start[i as usize][j as usize]);
                assert_eq!(&offset + &scale * &blk.right, mk.sub_start[i as usize][j as usize + 1]);
            }
        }
    }

    #[test]
    fn blaschke_inverse_round_trip() {
        let b = MapModel::blaschke(vec![Complex64::new(0.0, 0.0), Complex64::new(0.2, -0.6)]).unwrap();
        for d in 0..2 {
            for k in 0..10 {
                let y = 0.05 + 0.09 * k as f64;
                let x = b.inverse_branch(d, &Point::Approx(y)).unwrap();
                let s = b.evaluate(&x).unwrap();
                assert_eq!(s.digit, d);
                let err = (s.image.to_f64() - y).abs();
                assert!(err.min(1.0 - err) < 1e-12);
            }
        }
    }
}
