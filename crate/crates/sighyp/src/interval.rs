//! Closed intervals with f64 endpoints, widened outward by one ulp after every
//! operation. The basic operations are correctly rounded, so one ulp is enough
//! for the enclosure to contain the exact result.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertInterval {
    pub lo: f64,
    pub hi: f64,
}

fn widen(lo: f64, hi: f64) -> CertInterval {
    CertInterval { lo: lo.next_down(), hi: hi.next_up() }
}

impl CertInterval {
    /// Exactly representable point.
    pub fn point(x: f64) -> Self {
        CertInterval { lo: x, hi: x }
    }

    /// A real constant whose f64 value is within half an ulp, e.g. `PI`.
    pub fn rounded(x: f64) -> Self {
        widen(x, x)
    }

    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        CertInterval { lo, hi }
    }

    pub fn pi() -> Self {
        Self::rounded(std::f64::consts::PI)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn is_negative(&self) -> bool {
        self.hi < 0.0
    }

    pub fn is_positive(&self) -> bool {
        self.lo > 0.0
    }

    pub fn hull(&self, o: &Self) -> Self {
        CertInterval { lo: self.lo.min(o.lo), hi: self.hi.max(o.hi) }
    }

    /// [−r, r] added, for remainder terms.
    pub fn pm(&self, r: f64) -> Self {
        assert!(r >= 0.0);
        *self + CertInterval { lo: -r, hi: r }
    }

    pub fn abs(&self) -> Self {
        if self.lo >= 0.0 {
            *self
        } else if self.hi <= 0.0 {
            -*self
        } else {
            CertInterval { lo: 0.0, hi: self.mag() }
        }
    }

    pub fn sqr(&self) -> Self {
        let a = self.abs();
        widen(a.lo * a.lo, a.hi * a.hi).clamp_nonneg()
    }

    pub fn sqrt(&self) -> Self {
        assert!(self.lo >= 0.0, "sqrt of {self}");
        widen(self.lo.sqrt(), self.hi.sqrt()).clamp_nonneg()
    }

    fn clamp_nonneg(self) -> Self {
        CertInterval { lo: self.lo.max(0.0), hi: self.hi }
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut out = CertInterval::point(1.0);
        for _ in 0..n {
            out = out * *self;
        }
        out
    }

    pub fn recip(&self) -> Self {
        CertInterval::point(1.0) / *self
    }
}

impl fmt::Display for CertInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.12e}, {:.12e}]", self.lo, self.hi)
    }
}

impl Add for CertInterval {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        widen(self.lo + o.lo, self.hi + o.hi)
    }
}

impl Sub for CertInterval {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        widen(self.lo - o.hi, self.hi - o.lo)
    }
}

impl Neg for CertInterval {
    type Output = Self;
    fn neg(self) -> Self {
        CertInterval { lo: -self.hi, hi: -self.lo }
    }
}

impl Mul for CertInterval {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let p = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        widen(lo, hi)
    }
}

impl Div for CertInterval {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        assert!(o.lo > 0.0 || o.hi < 0.0, "division by interval containing 0: {o}");
        let p = [self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        widen(lo, hi)
    }
}

impl Mul<f64> for CertInterval {
    type Output = Self;
    fn mul(self, o: f64) -> Self {
        self * CertInterval::point(o)
    }
}

impl Add<f64> for CertInterval {
    type Output = Self;
    fn add(self, o: f64) -> Self {
        self + CertInterval::point(o)
    }
}

/// Rectangular complex interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CInterval {
    pub re: CertInterval,
    pub im: CertInterval,
}

impl CInterval {
    pub fn new(re: CertInterval, im: CertInterval) -> Self {
        CInterval { re, im }
    }

    pub fn real(re: CertInterval) -> Self {
        CInterval { re, im: CertInterval::point(0.0) }
    }

    pub fn point(re: f64, im: f64) -> Self {
        CInterval { re: CertInterval::point(re), im: CertInterval::point(im) }
    }

    pub fn conj(&self) -> Self {
        CInterval { re: self.re, im: -self.im }
    }

    pub fn abs(&self) -> CertInterval {
        // a sum of squares: clamping the outward-rounded lower end at 0 is exact
        (self.re.sqr() + self.im.sqr()).clamp_nonneg().sqrt()
    }

    pub fn scale(&self, s: CertInterval) -> Self {
        CInterval { re: self.re * s, im: self.im * s }
    }

    pub fn contains(&self, z: num_complex::Complex64) -> bool {
        self.re.contains(z.re) && self.im.contains(z.im)
    }
}

impl Add for CInterval {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        CInterval { re: self.re + o.re, im: self.im + o.im }
    }
}

impl Sub for CInterval {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        CInterval { re: self.re - o.re, im: self.im - o.im }
    }
}

impl Neg for CInterval {
    type Output = Self;
    fn neg(self) -> Self {
        CInterval { re: -self.re, im: -self.im }
    }
}

impl Mul for CInterval {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        CInterval {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
}
