//! The projective line over a coefficient field, with an explicit
//! indeterminate outcome instead of silently picking a value.

use std::fmt;

use crate::error::{DskpError, ParseError};
use crate::field::{Field, GaussianRational, Rational};

#[derive(Clone, PartialEq, Debug)]
pub enum ProjectiveValue<F> {
    Finite(F),
    Infinity,
}

/// Result of an extended arithmetic operation.
pub type Proj<F> = Result<ProjectiveValue<F>, Indeterminate>;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Indeterminate;

impl fmt::Display for Indeterminate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "indeterminate form")
    }
}

impl From<Indeterminate> for DskpError {
    fn from(_: Indeterminate) -> Self {
        DskpError::Indeterminate
    }
}

use ProjectiveValue::{Finite, Infinity};

impl<F: Field> ProjectiveValue<F> {
    pub fn finite(x: F) -> Self {
        Finite(x)
    }

    pub fn int(n: i64) -> Self {
        Finite(F::from_i64(n))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Infinity)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Finite(x) if x.is_zero())
    }

    pub fn as_finite(&self) -> Option<&F> {
        match self {
            Finite(x) => Some(x),
            Infinity => None,
        }
    }

    /// Homogeneous coordinates `[z : w]`.
    pub fn homogeneous(&self) -> (F, F) {
        match self {
            Finite(x) => (x.clone(), F::one()),
            Infinity => (F::one(), F::zero()),
        }
    }

    /// Inverse of [`homogeneous`](Self::homogeneous); `[0 : 0]` and
    /// non-invertible denominators are indeterminate.
    pub fn from_homogeneous(z: F, w: F) -> Proj<F> {
        if w.is_zero() {
            if z.is_zero() {
                Err(Indeterminate)
            } else {
                Ok(Infinity)
            }
        } else {
            match w.inv() {
                Some(wi) => Ok(Finite(z.mul(&wi))),
                None => Err(Indeterminate),
            }
        }
    }

    pub fn add(&self, o: &Self) -> Proj<F> {
        match (self, o) {
            (Finite(a), Finite(b)) => Ok(Finite(a.add(b))),
            (Infinity, Infinity) => Err(Indeterminate),
            _ => Ok(Infinity),
        }
    }

    pub fn neg(&self) -> Self {
        match self {
            Finite(a) => Finite(a.neg()),
            Infinity => Infinity,
        }
    }

    pub fn sub(&self, o: &Self) -> Proj<F> {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Proj<F> {
        match (self, o) {
            (Finite(a), Finite(b)) => Ok(Finite(a.mul(b))),
            (Infinity, Finite(b)) | (Finite(b), Infinity) if b.is_zero() => Err(Indeterminate),
            _ => Ok(Infinity),
        }
    }

    pub fn inv(&self) -> Proj<F> {
        match self {
            Infinity => Ok(Finite(F::zero())),
            Finite(a) if a.is_zero() => Ok(Infinity),
            Finite(a) => a.inv().map(Finite).ok_or(Indeterminate),
        }
    }

    pub fn div(&self, o: &Self) -> Proj<F> {
        match (self, o) {
            (Infinity, Infinity) => Err(Indeterminate),
            (Finite(a), Finite(b)) if a.is_zero() && b.is_zero() => Err(Indeterminate),
            (Finite(_), Infinity) => Ok(Finite(F::zero())),
            (Infinity, Finite(_)) => Ok(Infinity),
            (Finite(a), Finite(b)) if b.is_zero() => {
                let _ = a;
                Ok(Infinity)
            }
            (Finite(a), Finite(b)) => b.inv().map(|bi| Finite(a.mul(&bi))).ok_or(Indeterminate),
        }
    }

    /// Apply the Moebius map `z -> (al z + be) / (ga z + de)`.
    pub fn mobius(&self, m: &[F; 4]) -> Proj<F> {
        let (z, w) = self.homogeneous();
        let nz = m[0].mul(&z).add(&m[1].mul(&w));
        let nw = m[2].mul(&z).add(&m[3].mul(&w));
        Self::from_homogeneous(nz, nw)
    }

    pub fn map<G: Field>(&self, f: impl Fn(&F) -> G) -> ProjectiveValue<G> {
        match self {
            Finite(a) => Finite(f(a)),
            Infinity => Infinity,
        }
    }
}

/// Free-function forms of the extended operations.
pub fn proj_add<F: Field>(x: &ProjectiveValue<F>, y: &ProjectiveValue<F>) -> Proj<F> {
    x.add(y)
}

pub fn proj_sub<F: Field>(x: &ProjectiveValue<F>, y: &ProjectiveValue<F>) -> Proj<F> {
    x.sub(y)
}

pub fn proj_mul<F: Field>(x: &ProjectiveValue<F>, y: &ProjectiveValue<F>) -> Proj<F> {
    x.mul(y)
}

pub fn proj_div<F: Field>(x: &ProjectiveValue<F>, y: &ProjectiveValue<F>) -> Proj<F> {
    x.div(y)
}

/// Inverse of a Moebius matrix (up to scale).
pub fn mobius_inverse<F: Field>(m: &[F; 4]) -> [F; 4] {
    [m[3].clone(), m[1].neg(), m[2].neg(), m[0].clone()]
}

impl fmt::Display for ProjectiveValue<Rational> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finite(x) => write!(f, "{}", crate::field::fmt_rational(x)),
            Infinity => write!(f, "inf"),
        }
    }
}

impl fmt::Display for ProjectiveValue<GaussianRational> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finite(x) => write!(f, "{x}"),
            Infinity => write!(f, "inf"),
        }
    }
}

pub fn parse_projective_rational(s: &str) -> Result<ProjectiveValue<Rational>, ParseError> {
    if s.trim() == "inf" {
        Ok(Infinity)
    } else {
        crate::field::parse_rational(s).map(Finite)
    }
}

pub fn parse_projective_gaussian(s: &str) -> Result<ProjectiveValue<GaussianRational>, ParseError> {
    if s.trim() == "inf" {
        Ok(Infinity)
    } else {
        s.parse::<GaussianRational>().map(Finite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{random_gaussian, rat};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type P = ProjectiveValue<Rational>;

    fn q(n: i64) -> P {
        P::int(n)
    }

    #[test]
    fn extended_rules() {
        assert_eq!(q(3).add(&Infinity), Ok(Infinity));
        assert_eq!(q(5).div(&Infinity), Ok(q(0)));
        assert_eq!(P::Infinity.sub(&Infinity), Err(Indeterminate));
        assert_eq!(q(0).mul(&Infinity), Err(Indeterminate));
        assert_eq!(q(0).div(&q(0)), Err(Indeterminate));
        assert_eq!(P::Infinity.div(&Infinity), Err(Indeterminate));
        assert_eq!(q(2).div(&q(0)), Ok(Infinity));
        assert_eq!(q(1).div(&q(4)), Ok(Finite(rat(1, 4))));
    }

    #[test]
    fn text_forms() {
        assert_eq!(q(3).to_string(), "3/1");
        assert_eq!(P::Infinity.to_string(), "inf");
        assert_eq!(parse_projective_rational("11/5").unwrap(), Finite(rat(11, 5)));
    }

    /// Homogeneous-coordinate oracle: [a:b] op [c:d] computed on pairs.
    fn homog_op(op: u8, x: &(GaussianRational, GaussianRational), y: &(GaussianRational, GaussianRational))
        -> (GaussianRational, GaussianRational) {
        let (a, b) = x;
        let (c, d) = y;
        match op {
            0 => (a.mul(d).add(&c.mul(b)), b.mul(d)),
            1 => (a.mul(d).sub(&c.mul(b)), b.mul(d)),
            2 => (a.mul(c), b.mul(d)),
            _ => (a.mul(d), b.mul(c)),
        }
    }

    #[test]
    fn agrees_with_homogeneous_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pick = |rng: &mut ChaCha8Rng| -> ProjectiveValue<GaussianRational> {
            match rng.gen_range(0..6) {
                0 => ProjectiveValue::Infinity,
                1 => ProjectiveValue::Finite(GaussianRational::zero()),
                _ => ProjectiveValue::Finite(random_gaussian(rng, 9, 5)),
            }
        };
        for _ in 0..1000 {
            let x = pick(&mut rng);
            let y = pick(&mut rng);
            let op = rng.gen_range(0..4u8);
            let got = match op {
                0 => x.add(&y),
                1 => x.sub(&y),
                2 => x.mul(&y),
                _ => x.div(&y),
            };
            let (z, w) = homog_op(op, &x.homogeneous(), &y.homogeneous());
            let oracle = ProjectiveValue::from_homogeneous(z, w);
            assert_eq!(got, oracle, "op {op} on {x:?}, {y:?}");
        }
    }
}
