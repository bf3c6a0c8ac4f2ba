//! Closed real intervals and interval vectors (boxes).
//!
//! Every arithmetic result encloses the exact real result. Sums and
//! differences use an error-free transformation (TwoSum) to round each
//! endpoint in the outward direction only when the floating-point result is
//! inexact; products, quotients and the standard functions inflate each
//! computed endpoint by a fixed number of ULPs.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]` with finite endpoints and `lo <= hi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };
    pub const SYMMETRIC_UNIT: Interval = Interval { lo: -1.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() && lo <= hi {
            Ok(Interval { lo, hi })
        } else {
            Err(Error::InvalidInterval { lo, hi })
        }
    }

    /// Degenerate interval `[x, x]`.
    pub fn point(x: f64) -> Result<Self> {
        Self::new(x, x)
    }

    /// Endpoints produced by an enclosure computation. Overflow saturates
    /// at the largest finite values so the type invariant survives.
    fn enclosing(lo: f64, hi: f64) -> Self {
        debug_assert!(!lo.is_nan() && !hi.is_nan() && lo <= hi, "[{lo}, {hi}]");
        Interval {
            lo: lo.max(f64::MIN),
            hi: hi.min(f64::MAX),
        }
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Midpoint, computed without overflow; always inside the interval.
    #[inline]
    pub fn mid(&self) -> f64 {
        if self.lo == self.hi {
            return self.lo;
        }
        let m = 0.5 * self.lo + 0.5 * self.hi;
        m.clamp(self.lo, self.hi)
    }

    #[inline]
    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    #[inline]
    pub fn is_subset(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    #[inline]
    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn intersection(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Multiplication by a real scalar.
    pub fn scale(&self, w: f64) -> Interval {
        if w == 0.0 {
            return Interval::ZERO;
        }
        let (a, b) = if w > 0.0 {
            (self.lo, self.hi)
        } else {
            (self.hi, self.lo)
        };
        Interval::enclosing(mul_down(w, a), mul_up(w, b))
    }

    /// `1 / self`; fails when the interval contains zero.
    pub fn recip(&self) -> Result<Interval> {
        if self.contains(0.0) {
            return Err(Error::DivisionByZeroInterval {
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(Interval::enclosing(
            ulps_down(1.0 / self.hi, 1),
            ulps_up(1.0 / self.lo, 1),
        ))
    }

    pub fn div(&self, rhs: &Interval) -> Result<Interval> {
        Ok(*self * rhs.recip()?)
    }

    pub fn exp(&self) -> Interval {
        self.monotone(Monotone::Exp)
    }

    pub fn tanh(&self) -> Interval {
        self.monotone(Monotone::Tanh)
    }

    pub fn logistic(&self) -> Interval {
        self.monotone(Monotone::Logistic)
    }

    /// Image under one of the strictly increasing standard functions.
    pub fn monotone(&self, f: Monotone) -> Interval {
        Interval::enclosing(f.eval_down(self.lo), f.eval_up(self.hi))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval::enclosing(add_down(self.lo, rhs.lo), add_up(self.hi, rhs.hi))
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        self + (-rhs)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        if self.is_degenerate() {
            return rhs.scale(self.lo);
        }
        if rhs.is_degenerate() {
            return self.scale(rhs.lo);
        }
        let pairs = [
            (self.lo, rhs.lo),
            (self.lo, rhs.hi),
            (self.hi, rhs.lo),
            (self.hi, rhs.hi),
        ];
        let lo = pairs
            .iter()
            .map(|&(a, b)| mul_down(a, b))
            .fold(f64::INFINITY, f64::min);
        let hi = pairs
            .iter()
            .map(|&(a, b)| mul_up(a, b))
            .fold(f64::NEG_INFINITY, f64::max);
        Interval::enclosing(lo, hi)
    }
}

/// Strictly increasing scalar functions with interval extensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Monotone {
    Exp,
    Tanh,
    /// `1 / (1 + exp(-z))`
    Logistic,
}

impl Monotone {
    pub fn eval(self, z: f64) -> f64 {
        match self {
            Monotone::Exp => z.exp(),
            Monotone::Tanh => z.tanh(),
            Monotone::Logistic => logistic(z),
        }
    }

    /// ULPs of inflation applied to each endpoint. These bound the error of
    /// the platform libm (exp is faithfully rounded; tanh is documented at
    /// up to 2 ULP) plus, for logistic, the two roundings of the
    /// composition `1 / (1 + exp(-z))`.
    fn ulps(self) -> u32 {
        match self {
            Monotone::Exp => 1,
            Monotone::Tanh => 2,
            Monotone::Logistic => 4,
        }
    }

    fn exact_at(self, z: f64) -> Option<f64> {
        (z == 0.0).then_some(match self {
            Monotone::Exp => 1.0,
            Monotone::Tanh => 0.0,
            Monotone::Logistic => 0.5,
        })
    }

    fn eval_down(self, z: f64) -> f64 {
        let v = self
            .exact_at(z)
            .unwrap_or_else(|| ulps_down(self.eval(z), self.ulps()));
        // Clamp to the known ranges; the inflation must not leave them.
        match self {
            Monotone::Exp | Monotone::Logistic => v.max(0.0),
            Monotone::Tanh => v.max(-1.0),
        }
    }

    fn eval_up(self, z: f64) -> f64 {
        let v = self
            .exact_at(z)
            .unwrap_or_else(|| ulps_up(self.eval(z), self.ulps()));
        match self {
            Monotone::Exp => v,
            Monotone::Tanh | Monotone::Logistic => v.min(1.0),
        }
    }
}

#[inline]
pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[inline]
fn ulps_down(mut x: f64, n: u32) -> f64 {
    for _ in 0..n {
        x = x.next_down();
    }
    x
}

#[inline]
fn ulps_up(mut x: f64, n: u32) -> f64 {
    for _ in 0..n {
        x = x.next_up();
    }
    x
}

/// Rounding error of `a + b` (Knuth's TwoSum): `a + b == s + err` exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn add_down(a: f64, b: f64) -> f64 {
    let (s, err) = two_sum(a, b);
    if err < 0.0 || !s.is_finite() {
        s.next_down()
    } else {
        s
    }
}

#[inline]
fn add_up(a: f64, b: f64) -> f64 {
    let (s, err) = two_sum(a, b);
    if err > 0.0 || !s.is_finite() {
        s.next_up()
    } else {
        s
    }
}

#[inline]
fn mul_down(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        (a * b).next_down()
    }
}

#[inline]
fn mul_up(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        (a * b).next_up()
    }
}

/// Summary of how one box relates to another (see [`IvBox::compare`]).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxRelation {
    pub is_subset: bool,
    pub intersects: bool,
    pub width: f64,
    pub widest_dim: usize,
}

/// Axis-aligned box: a non-empty vector of intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct IvBox {
    components: Vec<Interval>,
}

impl IvBox {
    pub fn new(components: Vec<Interval>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        Ok(IvBox { components })
    }

    /// Box of degenerate components at `x`.
    pub fn from_point(x: &[f64]) -> Result<Self> {
        let components = x
            .iter()
            .map(|&v| Interval::point(v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(components)
    }

    /// Build from `(lo, hi)` pairs.
    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        let components = bounds
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>>>()?;
        Self::new(components)
    }

    pub(crate) fn from_vec_unchecked(components: Vec<Interval>) -> Self {
        debug_assert!(!components.is_empty());
        IvBox { components }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    #[inline]
    pub fn components(&self) -> &[Interval] {
        &self.components
    }

    #[inline]
    pub fn get(&self, i: usize) -> Option<&Interval> {
        self.components.get(i)
    }

    /// Largest component width.
    pub fn width(&self) -> f64 {
        self.components
            .iter()
            .map(Interval::width)
            .fold(0.0, f64::max)
    }

    /// Lowest index attaining [`IvBox::width`].
    pub fn widest_dim(&self) -> usize {
        let w = self.width();
        self.components
            .iter()
            .position(|c| c.width() == w)
            .unwrap_or(0)
    }

    /// Lowest index of the widest non-degenerate component, if any.
    pub fn bisectable_dim(&self) -> Option<usize> {
        let dim = self.widest_dim();
        (self.components[dim].width() > 0.0).then_some(dim)
    }

    /// Product of the widths of the non-degenerate components (zero if all
    /// components are degenerate).
    pub fn measure(&self) -> f64 {
        let mut any = false;
        let mut m = 1.0;
        for c in self.components.iter().filter(|c| !c.is_degenerate()) {
            any = true;
            m *= c.width();
        }
        if any {
            m
        } else {
            0.0
        }
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.components.iter().map(Interval::mid).collect()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.components.iter().zip(x).all(|(c, &v)| c.contains(v))
    }

    /// Split component `dim` at its midpoint. The halves share the midpoint
    /// bit-for-bit.
    pub fn bisect(&self, dim: usize) -> Result<(IvBox, IvBox)> {
        let c = *self.components.get(dim).ok_or(Error::IndexOutOfRange {
            what: "dimension",
            index: dim,
            limit: self.dim(),
        })?;
        if c.is_degenerate() {
            return Err(Error::DegenerateDimension { dim });
        }
        let m = c.mid();
        let mut left = self.components.clone();
        let mut right = self.components.clone();
        left[dim] = Interval { lo: c.lo, hi: m };
        right[dim] = Interval { lo: m, hi: c.hi };
        Ok((IvBox { components: left }, IvBox { components: right }))
    }

    fn check_dim(&self, other: &IvBox) -> Result<()> {
        if self.dim() == other.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            })
        }
    }

    pub fn is_subset(&self, other: &IvBox) -> Result<bool> {
        self.check_dim(other)?;
        Ok(self
            .components
            .iter()
            .zip(&other.components)
            .all(|(a, b)| a.is_subset(b)))
    }

    pub fn intersects(&self, other: &IvBox) -> Result<bool> {
        self.check_dim(other)?;
        Ok(self
            .components
            .iter()
            .zip(&other.components)
            .all(|(a, b)| a.intersects(b)))
    }

    /// Intersection, or `None` when the boxes are disjoint.
    pub fn intersection(&self, other: &IvBox) -> Result<Option<IvBox>> {
        self.check_dim(other)?;
        Ok(self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.intersection(b))
            .collect::<Option<Vec<_>>>()
            .map(|components| IvBox { components }))
    }

    /// Subset/intersection predicates against `other` plus this box's width
    /// and widest dimension. Comparisons are exact.
    pub fn compare(&self, other: &IvBox) -> Result<BoxRelation> {
        Ok(BoxRelation {
            is_subset: self.is_subset(other)?,
            intersects: self.intersects(other)?,
            width: self.width(),
            widest_dim: self.widest_dim(),
        })
    }
}

impl std::ops::Index<usize> for IvBox {
    type Output = Interval;
    fn index(&self, i: usize) -> &Interval {
        &self.components[i]
    }
}

impl fmt::Display for IvBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}
