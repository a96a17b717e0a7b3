//! Itineraries and exact cylinder intervals `P(n, x)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{format_rational, from_f64, round_to_bits};
use crate::interval::Interval;
use crate::maps::{InverseMap, MapKind, MapModel, Point, StepStatus};

/// Gauss cylinders keep exact endpoints up to this depth; deeper ones are
/// rounded to the requested mantissa width.
pub const EXACT_DEPTH_CAP: usize = 64;
pub const DEFAULT_PRECISION_BITS: u32 = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct Cylinder {
    pub word: Vec<u32>,
    pub interval: Interval,
    pub depth: usize,
    pub map_id: &'static str,
    /// Endpoints were rounded past [`EXACT_DEPTH_CAP`].
    pub rounded: bool,
}

impl Cylinder {
    pub fn length(&self) -> BigRational {
        self.interval.length()
    }

    pub fn record(&self) -> CylinderRecord {
        CylinderRecord {
            word: self.word.clone(),
            left: format_rational(&self.interval.left),
            right: format_rational(&self.interval.right),
            depth: self.depth,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CylinderRecord {
    pub word: Vec<u32>,
    pub left: String,
    pub right: String,
    pub depth: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Itinerary {
    pub digits: Vec<u32>,
    /// Steps at which the orbit sat on a `P_0` endpoint.
    pub boundary_steps: Vec<usize>,
    /// Step at which a Gauss orbit reached 0, leaving later digits undefined.
    pub ended_at: Option<usize>,
}

impl Itinerary {
    pub fn complete(self) -> Result<Vec<u32>> {
        match self.ended_at {
            Some(step) => Err(Error::OrbitEnded { step }),
            None => Ok(self.digits),
        }
    }
}

/// Digits `i_0..=i_n` of `x`. Linear maps and exact Gauss inputs iterate in
/// exact arithmetic; float inputs to the Gauss and Blaschke maps follow the
/// floating-point orbit.
pub fn itinerary(map: &MapModel, x: &Point, n: usize) -> Result<Itinerary> {
    let mut cur = match (map.kind(), x) {
        (MapKind::DAryShift { .. } | MapKind::MarkovLinear(_), Point::Approx(t)) => Point::Exact(from_f64(*t)),
        _ => x.clone(),
    };
    let mut it = Itinerary { digits: Vec::with_capacity(n + 1), boundary_steps: Vec::new(), ended_at: None };
    for k in 0..=n {
        match map.evaluate(&cur) {
            Ok(step) => {
                if step.status == StepStatus::Boundary {
                    it.boundary_steps.push(k);
                }
                it.digits.push(step.digit);
                cur = step.image;
            }
            Err(Error::OrbitEnded { .. }) => {
                it.ended_at = Some(k);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(it)
}

/// Composition `G_{i_0} ∘ … ∘ G_{i_{n-1}}` of the inverse branches along a
/// word, extended one digit at a time.
#[derive(Clone, Debug)]
enum Transform {
    Affine { offset: BigRational, scale: BigRational },
    /// `y ↦ (a y + b)/(c y + d)`.
    Mobius { a: BigInt, b: BigInt, c: BigInt, d: BigInt },
    /// Blaschke words are pulled back numerically from scratch.
    Numeric,
}

/// Incremental builder of the nested cylinders of one word.
#[derive(Clone, Debug)]
pub struct CylinderChain<'a> {
    map: &'a MapModel,
    word: Vec<u32>,
    transform: Transform,
    precision_bits: u32,
}

impl<'a> CylinderChain<'a> {
    pub fn new(map: &'a MapModel, first: u32) -> Result<Self> {
        map.check_digit(first)?;
        let transform = match map.kind() {
            MapKind::Gauss => Transform::Mobius {
                a: BigInt::zero(),
                b: BigInt::one(),
                c: BigInt::one(),
                d: BigInt::from(first),
            },
            MapKind::Blaschke(_) => Transform::Numeric,
            _ => Transform::Affine { offset: BigRational::zero(), scale: BigRational::one() },
        };
        Ok(CylinderChain { map, word: vec![first], transform, precision_bits: DEFAULT_PRECISION_BITS })
    }

    pub fn with_precision(mut self, bits: u32) -> Self {
        self.precision_bits = bits;
        self
    }

    pub fn word(&self) -> &[u32] {
        &self.word
    }

    pub fn depth(&self) -> usize {
        self.word.len() - 1
    }

    pub fn push(&mut self, digit: u32) -> Result<()> {
        self.map.check_digit(digit)?;
        let last = *self.word.last().unwrap();
        if !self.map.transition_allowed(last, digit) {
            return Err(Error::NotAdmissible { from: last, to: digit });
        }
        match &mut self.transform {
            Transform::Affine { offset, scale } => {
                let InverseMap::Affine { offset: o, scale: s } = self.map.inverse_map(last, digit)? else {
                    unreachable!()
                };
                *offset = &*offset + &*scale * o;
                *scale = &*scale * s;
            }
            Transform::Mobius { a, b, c, d } => {
                // right-multiply by [[0,1],[1,digit]]
                let k = BigInt::from(digit);
                let (na, nb) = (b.clone(), &*a + &*b * &k);
                let (nc, nd) = (d.clone(), &*c + &*d * &k);
                *a = na;
                *b = nb;
                *c = nc;
                *d = nd;
            }
            Transform::Numeric => {}
        }
        self.word.push(digit);
        Ok(())
    }

    pub fn cylinder(&self) -> Cylinder {
        let depth = self.depth();
        let mut rounded = false;
        let interval = match &self.transform {
            Transform::Affine { offset, scale } => {
                let blk = self.map.partition_block(*self.word.last().unwrap()).unwrap();
                Interval::half_open(offset + scale * &blk.left, offset + scale * &blk.right)
            }
            Transform::Mobius { a, b, c, d } => {
                // the image of [0,1): the end at y = 0 is closed
                let at0 = BigRational::new(b.clone(), d.clone());
                let at1 = BigRational::new(a + b, c + d);
                let (mut left, mut right, left_closed) =
                    if at0 < at1 { (at0, at1, true) } else { (at1, at0, false) };
                if depth > EXACT_DEPTH_CAP {
                    left = round_to_bits(&left, self.precision_bits);
                    right = round_to_bits(&right, self.precision_bits);
                    rounded = true;
                }
                Interval { left, right, left_closed, right_closed: !left_closed }
            }
            Transform::Numeric => {
                let MapKind::Blaschke(b) = self.map.kind() else { unreachable!() };
                let last = *self.word.last().unwrap() as usize;
                let (mut lo, mut hi) = (b.cuts()[last], b.cuts()[last + 1]);
                for &d in self.word[..self.word.len() - 1].iter().rev() {
                    lo = b.inverse_lifted(d, lo);
                    hi = b.inverse_lifted(d, hi);
                }
                let shift = lo.floor();
                rounded = true;
                Interval::half_open(from_f64(lo - shift), from_f64(hi - shift))
            }
        };
        Cylinder { word: self.word.clone(), interval, depth, map_id: self.map.name(), rounded }
    }
}

pub fn cylinder_from_word(map: &MapModel, word: &[u32]) -> Result<Cylinder> {
    cylinder_from_word_with(map, word, DEFAULT_PRECISION_BITS)
}

pub fn cylinder_from_word_with(map: &MapModel, word: &[u32], precision_bits: u32) -> Result<Cylinder> {
    let (&first, rest) = word
        .split_first()
        .ok_or_else(|| Error::InvalidParameter("empty digit word".into()))?;
    let mut chain = CylinderChain::new(map, first)?.with_precision(precision_bits);
    for &d in rest {
        chain.push(d)?;
    }
    Ok(chain.cylinder())
}

pub fn locate_cylinder(map: &MapModel, x: &Point, n: usize) -> Result<Cylinder> {
    let digits = itinerary(map, x, n)?.complete()?;
    cylinder_from_word(map, &digits)
}

/// Whether `iv ⊂ B(center, r)`, comparing closures. On the circle `center`
/// is moved to the lift nearest the interval.
pub fn inside_ball(iv: &Interval, center: &BigRational, r: &BigRational, circle: bool) -> bool {
    let c = if circle {
        let mid = (&iv.left + &iv.right) / BigRational::from_integer(2.into());
        let k = (&mid - center).round();
        center + k
    } else {
        center.clone()
    };
    if circle && r * BigRational::from_integer(2.into()) >= BigRational::one() {
        return true;
    }
    iv.left >= &c - r && iv.right <= &c + r
}

/// Distance in the map's metric: arc distance on the circle.
pub fn distance(x: f64, y: f64, circle: bool) -> f64 {
    let d = (x - y).abs();
    if circle { d.min(1.0 - d) } else { d }
}

/// For each radius, the smallest `t` with `P(t, x0) ⊂ B(x0, r)`.
pub fn refine_schedule_to_depths(
    map: &MapModel,
    x0_digits: &[u32],
    x0: &BigRational,
    radii: &[BigRational],
) -> Result<Vec<usize>> {
    let mut chain = CylinderChain::new(map, x0_digits[0])?;
    let mut cyl = chain.cylinder();
    let circle = map.is_circle();
    let mut out = Vec::with_capacity(radii.len());
    for r in radii {
        if !r.is_positive() {
            return Err(Error::InvalidParameter("radii must be positive".into()));
        }
        while !inside_ball(&cyl.interval, x0, r, circle) {
            let next = chain.depth() + 1;
            let &d = x0_digits.get(next).ok_or_else(|| {
                Error::InsufficientResolution(format!(
                    "target itinerary known to depth {} only",
                    x0_digits.len() - 1
                ))
            })?;
            chain.push(d)?;
            cyl = chain.cylinder();
        }
        out.push(chain.depth());
    }
    Ok(out)
}

/// All admissible words of length `len` over a finite alphabet, in
/// lexicographic order.
pub fn admissible_words(map: &MapModel, len: usize) -> Result<Vec<Vec<u32>>> {
    let d = map
        .finite_alphabet()
        .ok_or_else(|| Error::Unsupported("enumeration needs a finite alphabet".into()))? as u32;
    let mut words: Vec<Vec<u32>> = (0..d).map(|a| vec![a]).collect();
    for _ in 1..len {
        words = words
            .into_iter()
            .flat_map(|w| {
                let last = *w.last().unwrap();
                (0..d).filter(move |&b| map.transition_allowed(last, b)).map(move |b| {
                    let mut v = w.clone();
                    v.push(b);
                    v
                })
            })
            .collect();
    }
    Ok(words)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rational;
    use crate::maps::StochasticMatrix;

    #[test]
    fn binary_third() {
        let m = MapModel::dary_shift(2).unwrap();
        let it = itinerary(&m, &Point::ratio(1, 3), 4).unwrap();
        assert_eq!(it.digits, vec![0, 1, 0, 1, 0]);
        assert!(it.boundary_steps.is_empty());
    }

    #[test]
    fn decimal_digits_follow_half_open_convention() {
        let m = MapModel::dary_shift(10).unwrap();
        let it = itinerary(&m, &Point::ratio(1, 8), 2).unwrap();
        assert_eq!(it.digits, vec![1, 2, 5]);
        assert_eq!(it.boundary_steps, vec![2]);
    }

    #[test]
    fn golden_mean_continued_fraction() {
        let g = MapModel::gauss();
        let x = (5f64.sqrt() - 1.0) / 2.0;
        assert_eq!(itinerary(&g, &Point::Approx(x), 3).unwrap().digits, vec![1, 1, 1, 1]);
    }

    #[test]
    fn dyadic_cylinder() {
        let m = MapModel::dary_shift(2).unwrap();
        let c = cylinder_from_word(&m, &[0, 1]).unwrap();
        assert_eq!(c.interval, Interval::half_open(rational(1, 4), rational(1, 2)));
        let c = locate_cylinder(&m, &Point::Approx(0.3), 1).unwrap();
        assert_eq!(c.word, vec![0, 1]);
    }

    #[test]
    fn gauss_cylinders() {
        let g = MapModel::gauss();
        let c = cylinder_from_word(&g, &[1, 1, 1]).unwrap();
        assert_eq!((c.interval.left.clone(), c.interval.right.clone()), (rational(3, 5), rational(2, 3)));
        assert_eq!(c.length(), rational(1, 15));
        let c = locate_cylinder(&g, &Point::ratio(2, 5), 1).unwrap();
        assert_eq!(c.word, vec![2, 2]);
        assert!(c.interval.contains(&rational(2, 5)));
        let p0 = cylinder_from_word(&g, &[3]).unwrap();
        assert_eq!(p0.interval, g.partition_block(3).unwrap());
    }

    #[test]
    fn gauss_orbit_end_is_reported() {
        let g = MapModel::gauss();
        let it = itinerary(&g, &Point::ratio(2, 5), 4).unwrap();
        assert_eq!(it.digits, vec![2, 2]);
        assert_eq!(it.ended_at, Some(2));
        assert!(locate_cylinder(&g, &Point::ratio(2, 5), 4).is_err());
    }

    #[test]
    fn forbidden_word() {
        let golden = StochasticMatrix::new(vec![
            vec![rational(1, 2), rational(1, 2)],
            vec![rational(1, 1), rational(0, 1)],
        ])
        .unwrap();
        let m = MapModel::markov_linear(golden).unwrap();
        assert_eq!(cylinder_from_word(&m, &[1, 1]), Err(Error::NotAdmissible { from: 1, to: 1 }));
        assert!(cylinder_from_word(&m, &[0, 1, 0]).is_ok());
    }

    #[test]
    fn deep_gauss_cylinders_are_rounded() {
        let g = MapModel::gauss();
        let c = cylinder_from_word(&g, &vec![1; 70]).unwrap();
        assert!(c.rounded);
        assert!(c.interval.left < c.interval.right);
        assert!(!cylinder_from_word(&g, &vec![1; 60]).unwrap().rounded);
    }

    #[test]
    fn refinement_for_large_radius_is_zero() {
        let m = MapModel::dary_shift(2).unwrap();
        let digits = itinerary(&m, &Point::ratio(1, 3), 30).unwrap().digits;
        let t = refine_schedule_to_depths(&m, &digits, &rational(1, 3), &[rational(1, 1), rational(2, 1)]).unwrap();
        assert_eq!(t, vec![0, 0]);
    }

    #[test]
    fn words_tile_the_interval() {
        let m = MapModel::markov_linear(
            StochasticMatrix::new(vec![
                vec![rational(1, 3), rational(2, 3)],
                vec![rational(1, 1), rational(0, 1)],
            ])
            .unwrap(),
        )
        .unwrap();
        for len in 1..=6 {
            let mut cyls: Vec<_> = admissible_words(&m, len)
                .unwrap()
                .iter()
                .map(|w| cylinder_from_word(&m, w).unwrap().interval)
                .collect();
            cyls.sort_by(|a, b| a.left.cmp(&b.left));
            assert_eq!(cyls[0].left, rational(0, 1));
            assert_eq!(cyls.last().unwrap().right, rational(1, 1));
            for w in cyls.windows(2) {
                assert_eq!(w[0].right, w[1].left);
            }
        }
    }
}
