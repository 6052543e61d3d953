//! Coefficient fields: exact rationals, exact Gaussian rationals, double
//! precision complex numbers and first-order dual numbers over any of them.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::error::ParseError;

/// Arbitrary precision rational, always reduced with positive denominator.
pub type Rational = BigRational;

/// Minimal field interface shared by every numeric routine in the crate.
///
/// `inv` returns `None` for non-invertible elements. For genuine fields that
/// is only zero; for [`Dual`] numbers it is every element with zero real part.
pub trait Field: Clone + PartialEq + fmt::Debug + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(n: i64) -> Self;
    fn from_rational(r: &Rational) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn inv(&self) -> Option<Self>;
    fn is_zero(&self) -> bool;

    fn is_one(&self) -> bool {
        *self == Self::one()
    }

    fn div(&self, other: &Self) -> Option<Self> {
        other.inv().map(|i| self.mul(&i))
    }

    /// Integer power; negative exponents need an invertible base.
    fn powi(&self, e: i64) -> Option<Self> {
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut n = e.unsigned_abs();
        let mut acc = Self::one();
        let mut b = base;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&b);
            }
            b = b.mul(&b);
            n >>= 1;
        }
        Some(acc)
    }

    /// Whether equality tests on this type are exact.
    fn is_exact() -> bool {
        true
    }
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

impl Field for Rational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_i64(n: i64) -> Self {
        rat_int(n)
    }
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn inv(&self) -> Option<Self> {
        if Zero::is_zero(self) {
            None
        } else {
            Some(self.recip())
        }
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
}

/// Exact element of Q(i).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct GaussianRational {
    pub re: Rational,
    pub im: Rational,
}

impl GaussianRational {
    pub fn new(re: Rational, im: Rational) -> Self {
        GaussianRational { re, im }
    }

    pub fn real(re: Rational) -> Self {
        GaussianRational { re, im: Zero::zero() }
    }

    pub fn i() -> Self {
        GaussianRational { re: Zero::zero(), im: One::one() }
    }

    pub fn conj(&self) -> Self {
        GaussianRational { re: self.re.clone(), im: -&self.im }
    }

    pub fn norm_sqr(&self) -> Rational {
        &self.re * &self.re + &self.im * &self.im
    }
}

impl Field for GaussianRational {
    fn zero() -> Self {
        GaussianRational::real(Zero::zero())
    }
    fn one() -> Self {
        GaussianRational::real(One::one())
    }
    fn from_i64(n: i64) -> Self {
        GaussianRational::real(rat_int(n))
    }
    fn from_rational(r: &Rational) -> Self {
        GaussianRational::real(r.clone())
    }
    fn add(&self, o: &Self) -> Self {
        GaussianRational::new(&self.re + &o.re, &self.im + &o.im)
    }
    fn sub(&self, o: &Self) -> Self {
        GaussianRational::new(&self.re - &o.re, &self.im - &o.im)
    }
    fn mul(&self, o: &Self) -> Self {
        GaussianRational::new(
            &self.re * &o.re - &self.im * &o.im,
            &self.re * &o.im + &self.im * &o.re,
        )
    }
    fn neg(&self) -> Self {
        GaussianRational::new(-&self.re, -&self.im)
    }
    fn inv(&self) -> Option<Self> {
        let n = self.norm_sqr();
        if Zero::is_zero(&n) {
            return None;
        }
        Some(GaussianRational::new(&self.re / &n, -&self.im / &n))
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(&self.re) && Zero::is_zero(&self.im)
    }
}

impl fmt::Display for GaussianRational {
    /// Canonical form `a/b+c/d*i`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.im.is_negative() { "-" } else { "+" };
        write!(f, "{}{}{}*i", fmt_rational(&self.re), sign, fmt_rational(&self.im.abs()))
    }
}

impl FromStr for GaussianRational {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let Some(body) = t.strip_suffix("*i") else {
            return Ok(GaussianRational::real(parse_rational(t)?));
        };
        // split at the last sign that is not the leading one
        let split = body
            .char_indices()
            .skip(1)
            .filter(|(_, c)| *c == '+' || *c == '-')
            .map(|(i, _)| i)
            .last();
        match split {
            Some(i) => {
                let re = parse_rational(&body[..i])?;
                let im = parse_rational(&body[i..])?;
                Ok(GaussianRational::new(re, im))
            }
            None => Ok(GaussianRational::new(Zero::zero(), parse_rational(body)?)),
        }
    }
}

/// Always `num/den`, including integers.
pub fn fmt_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_rational(s: &str) -> Result<Rational, ParseError> {
    let t = s.trim().trim_start_matches('+');
    let bad = || ParseError::Number(s.to_string());
    match t.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(n, d))
        }
        None => {
            let n: BigInt = t.parse().map_err(|_| bad())?;
            Ok(Rational::from_integer(n))
        }
    }
}

/// Float complex numbers for large-scale exploration; equality is exact
/// bitwise comparison, so identity checks should use tolerances instead.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct C64(pub Complex64);

impl Field for C64 {
    fn zero() -> Self {
        C64(Complex64::new(0.0, 0.0))
    }
    fn one() -> Self {
        C64(Complex64::new(1.0, 0.0))
    }
    fn from_i64(n: i64) -> Self {
        C64(Complex64::new(n as f64, 0.0))
    }
    fn from_rational(r: &Rational) -> Self {
        C64(Complex64::new(rational_to_f64(r), 0.0))
    }
    fn add(&self, o: &Self) -> Self {
        C64(self.0 + o.0)
    }
    fn sub(&self, o: &Self) -> Self {
        C64(self.0 - o.0)
    }
    fn mul(&self, o: &Self) -> Self {
        C64(self.0 * o.0)
    }
    fn neg(&self) -> Self {
        C64(-self.0)
    }
    fn inv(&self) -> Option<Self> {
        if self.0.norm_sqr() == 0.0 {
            None
        } else {
            Some(C64(self.0.inv()))
        }
    }
    fn is_zero(&self) -> bool {
        self.0.re == 0.0 && self.0.im == 0.0
    }
    fn is_exact() -> bool {
        false
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => ln_abs_rational(r).exp() * if r.is_negative() { -1.0 } else { 1.0 },
    }
}

/// `ln |r|` without overflow, for arbitrarily large numerators and denominators.
pub fn ln_abs_rational(r: &Rational) -> f64 {
    if Zero::is_zero(r) {
        return f64::NEG_INFINITY;
    }
    ln_abs_bigint(r.numer()) - ln_abs_bigint(r.denom())
}

pub fn ln_abs_bigint(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.abs().to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top: BigInt = n.abs() >> shift;
    top.to_f64().unwrap().ln() + (shift as f64) * std::f64::consts::LN_2
}

/// First-order dual numbers `re + eps * E` with `E^2 = 0`; used to take
/// exact directional derivatives through any rational computation.
#[derive(Clone, PartialEq, Debug)]
pub struct Dual<F> {
    pub re: F,
    pub eps: F,
}

impl<F: Field> Dual<F> {
    pub fn new(re: F, eps: F) -> Self {
        Dual { re, eps }
    }

    pub fn constant(re: F) -> Self {
        Dual { re, eps: F::zero() }
    }
}

impl<F: Field> Field for Dual<F> {
    fn zero() -> Self {
        Dual::constant(F::zero())
    }
    fn one() -> Self {
        Dual::constant(F::one())
    }
    fn from_i64(n: i64) -> Self {
        Dual::constant(F::from_i64(n))
    }
    fn from_rational(r: &Rational) -> Self {
        Dual::constant(F::from_rational(r))
    }
    fn add(&self, o: &Self) -> Self {
        Dual::new(self.re.add(&o.re), self.eps.add(&o.eps))
    }
    fn sub(&self, o: &Self) -> Self {
        Dual::new(self.re.sub(&o.re), self.eps.sub(&o.eps))
    }
    fn mul(&self, o: &Self) -> Self {
        Dual::new(self.re.mul(&o.re), self.re.mul(&o.eps).add(&self.eps.mul(&o.re)))
    }
    fn neg(&self) -> Self {
        Dual::new(self.re.neg(), self.eps.neg())
    }
    fn inv(&self) -> Option<Self> {
        let r = self.re.inv()?;
        let e = self.eps.mul(&r).mul(&r).neg();
        Some(Dual::new(r, e))
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.eps.is_zero()
    }
    fn is_exact() -> bool {
        F::is_exact()
    }
}

/// Random nonzero rational `n/d` with `|n| <= num_bound`, `1 <= d <= den_bound`.
pub fn random_rational<R: Rng>(rng: &mut R, num_bound: i64, den_bound: i64) -> Rational {
    loop {
        let n = rng.gen_range(-num_bound..=num_bound);
        let d = rng.gen_range(1..=den_bound);
        if n != 0 {
            return rat(n, d);
        }
    }
}

pub fn random_gaussian<R: Rng>(rng: &mut R, num_bound: i64, den_bound: i64) -> GaussianRational {
    GaussianRational::new(
        random_rational(rng, num_bound, den_bound),
        random_rational(rng, num_bound, den_bound),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(a: i64, b: i64, c: i64, d: i64) -> GaussianRational {
        GaussianRational::new(rat(a, b), rat(c, d))
    }

    #[test]
    fn gaussian_roundtrip_text() {
        for x in [g(1, 2, -3, 4), g(0, 1, 5, 1), g(-7, 3, 0, 1)] {
            let s = x.to_string();
            assert_eq!(s.parse::<GaussianRational>().unwrap(), x, "{s}");
        }
        assert_eq!("3".parse::<GaussianRational>().unwrap(), g(3, 1, 0, 1));
        assert_eq!(g(1, 2, -3, 4).to_string(), "1/2-3/4*i");
    }

    #[test]
    fn i_squared_is_minus_one() {
        let i = GaussianRational::i();
        assert_eq!(i.mul(&i), GaussianRational::from_i64(-1));
    }

    #[test]
    fn dual_derivative_of_reciprocal() {
        // d/dx (1/x) at x = 3 is -1/9
        let x = Dual::new(rat_int(3), rat_int(1));
        let y = x.inv().unwrap();
        assert_eq!(y.eps, rat(-1, 9));
    }

    #[test]
    fn ln_abs_of_huge_values() {
        let big = Rational::from_integer(BigInt::from(3).pow(2000));
        let expect = 2000.0 * 3f64.ln();
        assert!((ln_abs_rational(&big) - expect).abs() < 1e-9 * expect);
    }

    fn arb_g() -> impl Strategy<Value = GaussianRational> {
        (-30i64..30, 1i64..12, -30i64..30, 1i64..12).prop_map(|(a, b, c, d)| g(a, b, c, d))
    }

    proptest! {
        #[test]
        fn gaussian_field_axioms(x in arb_g(), y in arb_g(), z in arb_g()) {
            prop_assert_eq!(x.add(&y).add(&z), x.add(&y.add(&z)));
            prop_assert_eq!(x.mul(&y).mul(&z), x.mul(&y.mul(&z)));
            prop_assert_eq!(x.mul(&y.add(&z)), x.mul(&y).add(&x.mul(&z)));
            prop_assert_eq!(x.mul(&y), y.mul(&x));
            if !x.is_zero() {
                prop_assert_eq!(x.mul(&x.inv().unwrap()), GaussianRational::one());
            }
        }
    }
}
