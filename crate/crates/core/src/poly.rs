//! Sparse multivariate (Laurent) polynomials over the integers, keyed by
//! face labels.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::ParseError;
use crate::field::{Field, Rational};

/// A face label `(i, j)`.
pub type Var = (i32, i32);

/// Sorted by variable, no zero exponents.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct Monomial(pub Vec<(Var, i32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        Monomial(vec![(v, 1)])
    }

    pub fn from_pairs(mut pairs: Vec<(Var, i32)>) -> Self {
        pairs.sort();
        let mut out: Vec<(Var, i32)> = Vec::with_capacity(pairs.len());
        for (v, e) in pairs {
            match out.last_mut() {
                Some((w, f)) if *w == v => *f += e,
                _ => out.push((v, e)),
            }
        }
        out.retain(|&(_, e)| e != 0);
        Monomial(out)
    }

    pub fn mul(&self, o: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &o.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let e = a[i].1 + b[j].1;
                    if e != 0 {
                        out.push((a[i].0, e));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    pub fn inverse(&self) -> Monomial {
        Monomial(self.0.iter().map(|&(v, e)| (v, -e)).collect())
    }

    pub fn degree(&self) -> i64 {
        self.0.iter().map(|&(_, e)| e as i64).sum()
    }

    pub fn exponent(&self, v: Var) -> i32 {
        self.0.iter().find(|(w, _)| *w == v).map_or(0, |&(_, e)| e)
    }

    pub fn max_exponent(&self) -> i32 {
        self.0.iter().map(|&(_, e)| e).max().unwrap_or(0)
    }

    pub fn divides(&self, o: &Monomial) -> bool {
        self.0.iter().all(|&(v, e)| o.exponent(v) >= e)
    }

    /// Lexicographic monomial order, smaller labels more significant.
    pub fn lex_cmp(&self, o: &Monomial) -> std::cmp::Ordering {
        use std::cmp::Ordering::*;
        let (a, b) = (&self.0, &o.0);
        let (mut i, mut j) = (0, 0);
        loop {
            match (a.get(i), b.get(j)) {
                (None, None) => return Equal,
                (Some(&(_, e)), None) => return e.cmp(&0),
                (None, Some(&(_, f))) => return 0.cmp(&f),
                (Some(&(v, e)), Some(&(w, f))) => match v.cmp(&w) {
                    Less => return e.cmp(&0),
                    Greater => return 0.cmp(&f),
                    Equal if e != f => return e.cmp(&f),
                    Equal => {
                        i += 1;
                        j += 1;
                    }
                },
            }
        }
    }

    pub fn eval<F: Field>(&self, assign: &impl Fn(Var) -> F) -> Option<F> {
        let mut acc = F::one();
        for &(v, e) in &self.0 {
            acc = acc.mul(&assign(v).powi(e as i64)?);
        }
        Some(acc)
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct MultiPoly {
    terms: HashMap<Monomial, BigInt>,
}

impl MultiPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(BigInt::one())
    }

    pub fn constant(c: BigInt) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn var(v: Var) -> Self {
        Self::monomial(Monomial::var(v), BigInt::one())
    }

    pub fn monomial(m: Monomial, c: BigInt) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of stored nonzero terms.
    pub fn monomial_count(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, m: &Monomial) -> BigInt {
        self.terms.get(m).cloned().unwrap_or_default()
    }

    pub fn add_term(&mut self, m: Monomial, c: BigInt) {
        if c.is_zero() {
            return;
        }
        use std::collections::hash_map::Entry;
        match self.terms.entry(m) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigInt)> {
        self.terms.iter()
    }

    /// Terms in canonical order.
    pub fn sorted_terms(&self) -> Vec<(&Monomial, &BigInt)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }

    pub fn add(&self, o: &MultiPoly) -> MultiPoly {
        let mut r = self.clone();
        r.add_assign(o);
        r
    }

    pub fn add_assign(&mut self, o: &MultiPoly) {
        for (m, c) in &o.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn neg(&self) -> MultiPoly {
        MultiPoly { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }

    pub fn sub(&self, o: &MultiPoly) -> MultiPoly {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &MultiPoly) -> MultiPoly {
        let mut r = MultiPoly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                r.add_term(m1.mul(m2), c1 * c2);
            }
        }
        r
    }

    pub fn scale(&self, c: &BigInt) -> MultiPoly {
        if c.is_zero() {
            return MultiPoly::zero();
        }
        MultiPoly { terms: self.terms.iter().map(|(m, d)| (m.clone(), d * c)).collect() }
    }

    pub fn mul_monomial(&self, m: &Monomial) -> MultiPoly {
        MultiPoly { terms: self.terms.iter().map(|(n, c)| (n.mul(m), c.clone())).collect() }
    }

    pub fn pow(&self, e: u32) -> MultiPoly {
        let mut r = MultiPoly::one();
        for _ in 0..e {
            r = r.mul(self);
        }
        r
    }

    /// Substitute `v -> 1/v` for every variable.
    pub fn invert_vars(&self) -> MultiPoly {
        MultiPoly { terms: self.terms.iter().map(|(m, c)| (m.inverse(), c.clone())).collect() }
    }

    pub fn content(&self) -> BigInt {
        self.terms.values().fold(BigInt::zero(), |g, c| g.gcd(c))
    }

    /// Largest exponent of any variable in any term.
    pub fn max_exponent(&self) -> i32 {
        self.terms.keys().map(|m| m.max_exponent()).max().unwrap_or(0)
    }

    pub fn min_exponent(&self) -> i32 {
        self.terms.keys().flat_map(|m| m.0.iter().map(|&(_, e)| e)).min().unwrap_or(0)
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut v: Vec<Var> = self.terms.keys().flat_map(|m| m.0.iter().map(|&(v, _)| v)).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn eval<F: Field>(&self, assign: &impl Fn(Var) -> F) -> Option<F> {
        let mut acc = F::zero();
        for (m, c) in &self.terms {
            let c = F::from_rational(&Rational::from_integer(c.clone()));
            acc = acc.add(&c.mul(&m.eval(assign)?));
        }
        Some(acc)
    }

    /// Substitute polynomials for variables (missing variables stay).
    pub fn substitute(&self, f: &impl Fn(Var) -> Option<MultiPoly>) -> MultiPoly {
        let mut out = MultiPoly::zero();
        for (m, c) in &self.terms {
            let mut t = MultiPoly::constant(c.clone());
            for &(v, e) in &m.0 {
                match f(v) {
                    Some(p) => {
                        assert!(e >= 0, "substitution into a negative power");
                        t = t.mul(&p.pow(e as u32));
                    }
                    None => t = t.mul_monomial(&Monomial(vec![(v, e)])),
                }
            }
            out.add_assign(&t);
        }
        out
    }

    fn leading(&self) -> Option<(&Monomial, &BigInt)> {
        self.terms.iter().max_by(|a, b| a.0.lex_cmp(b.0))
    }

    /// Exact division by `d`; `None` if `d` does not divide `self`.
    pub fn div_exact(&self, d: &MultiPoly) -> Option<MultiPoly> {
        if d.is_zero() {
            return None;
        }
        let (dm, dc) = d.leading().map(|(m, c)| (m.clone(), c.clone()))?;
        let mut rem = self.clone();
        let mut q = MultiPoly::zero();
        while let Some((rm, rc)) = rem.leading().map(|(m, c)| (m.clone(), c.clone())) {
            if !dm.divides(&rm) {
                return None;
            }
            let (qc, r) = rc.div_rem(&dc);
            if !r.is_zero() {
                return None;
            }
            let qm = rm.mul(&dm.inverse());
            let t = MultiPoly::monomial(qm, qc);
            rem = rem.sub(&d.mul(&t));
            q.add_assign(&t);
        }
        Some(q)
    }

    /// Canonical text: terms in lexicographic monomial order, each written
    /// as `c` or `c*a(i,j)^e`.
    pub fn to_canonical_string(&self) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut s = String::new();
        for (idx, (m, c)) in self.sorted_terms().into_iter().enumerate() {
            if idx > 0 {
                s.push_str(if c.is_negative() { " - " } else { " + " });
            } else if c.is_negative() {
                s.push('-');
            }
            s.push_str(&c.abs().to_string());
            for &((i, j), e) in &m.0 {
                s.push_str(&format!("*a({i},{j})"));
                if e != 1 {
                    s.push_str(&format!("^{e}"));
                }
            }
        }
        s
    }

    pub fn parse_canonical(s: &str) -> Result<MultiPoly, ParseError> {
        let bad = || ParseError::Malformed(s.to_string());
        let s = s.trim();
        if s == "0" {
            return Ok(MultiPoly::zero());
        }
        let mut p = MultiPoly::zero();
        let normalized = s.replace(" - ", " + -");
        for term in normalized.split(" + ") {
            let mut parts = term.split('*');
            let c: BigInt = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            let mut pairs = Vec::new();
            for f in parts {
                let f = f.trim();
                let body = f.strip_prefix("a(").ok_or_else(bad)?;
                let close = body.find(')').ok_or_else(bad)?;
                let (ij, rest) = body.split_at(close);
                let mut it = ij.split(',');
                let i: i32 = it.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
                let j: i32 = it.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
                let e: i32 = match rest[1..].strip_prefix('^') {
                    Some(x) => x.parse().map_err(|_| bad())?,
                    None if rest.len() == 1 => 1,
                    None => return Err(bad()),
                };
                pairs.push(((i, j), e));
            }
            p.add_term(Monomial::from_pairs(pairs), c);
        }
        Ok(p)
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical_string())
    }
}

/// Free-function form of [`MultiPoly::mul`].
pub fn poly_mul(p: &MultiPoly, q: &MultiPoly) -> MultiPoly {
    p.mul(q)
}

pub fn monomial_count(p: &MultiPoly) -> usize {
    p.monomial_count()
}

/// A quotient of polynomials, reduced by integer content.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalFunction {
    pub numerator: MultiPoly,
    pub denominator: MultiPoly,
}

impl RationalFunction {
    pub fn new(numerator: MultiPoly, denominator: MultiPoly) -> Option<Self> {
        if denominator.is_zero() {
            return None;
        }
        let g = numerator.content().gcd(&denominator.content());
        let (mut n, mut d) = (numerator, denominator);
        if !g.is_one() && !g.is_zero() {
            n = MultiPoly { terms: n.terms.into_iter().map(|(m, c)| (m, c / &g)).collect() };
            d = MultiPoly { terms: d.terms.into_iter().map(|(m, c)| (m, c / &g)).collect() };
        }
        Some(RationalFunction { numerator: n, denominator: d })
    }

    pub fn eval<F: Field>(&self, assign: &impl Fn(Var) -> F) -> Option<F> {
        self.numerator.eval(assign)?.div(&self.denominator.eval(assign)?)
    }

    /// Equality as rational functions: `n1 d2 == n2 d1`.
    pub fn same_function(&self, o: &RationalFunction) -> bool {
        self.numerator.mul(&o.denominator) == o.numerator.mul(&self.denominator)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{random_gaussian, GaussianRational};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn a() -> MultiPoly {
        MultiPoly::var((0, 0))
    }
    fn b() -> MultiPoly {
        MultiPoly::var((1, 0))
    }

    #[test]
    fn difference_of_squares() {
        let p = a().sub(&b()).mul(&a().add(&b()));
        let q = a().pow(2).sub(&b().pow(2));
        assert_eq!(p, q);
        assert_eq!(p.monomial_count(), 2);
        assert_eq!(poly_mul(&p, &MultiPoly::one()), p);
        assert_eq!(monomial_count(&MultiPoly::zero()), 0);
    }

    #[test]
    fn canonical_text_roundtrip() {
        let p = a().sub(&b().scale(&BigInt::from(3))).pow(3).add(&MultiPoly::constant(BigInt::from(-7)));
        let s = p.to_canonical_string();
        assert_eq!(MultiPoly::parse_canonical(&s).unwrap(), p);
        assert_eq!(MultiPoly::var((0, -1)).to_canonical_string(), "1*a(0,-1)");
    }

    #[test]
    fn exact_division() {
        let p = a().add(&b()).pow(3);
        let d = a().add(&b());
        assert_eq!(p.div_exact(&d).unwrap(), a().add(&b()).pow(2));
        assert!(a().div_exact(&b()).is_none());
    }

    fn arb_poly() -> impl Strategy<Value = MultiPoly> {
        proptest::collection::vec((0i32..3, 0i32..3, -3i64..4, 0i32..3), 0..5).prop_map(|ts| {
            let mut p = MultiPoly::zero();
            for (i, j, c, e) in ts {
                p.add_term(Monomial::from_pairs(vec![((i, j), e), ((j, i), 1)]), BigInt::from(c));
            }
            p
        })
    }

    proptest! {
        #[test]
        fn ring_axioms(p in arb_poly(), q in arb_poly(), r in arb_poly()) {
            prop_assert_eq!(p.mul(&q), q.mul(&p));
            prop_assert_eq!(p.mul(&q).mul(&r), p.mul(&q.mul(&r)));
            prop_assert_eq!(p.mul(&q.add(&r)), p.mul(&q).add(&p.mul(&r)));
            prop_assert!(p.sub(&p).is_zero());
        }

        #[test]
        fn eval_is_a_homomorphism(p in arb_poly(), q in arb_poly(), seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<GaussianRational> = (0..9).map(|_| random_gaussian(&mut rng, 7, 5)).collect();
            let assign = |(i, j): Var| vals[(i * 3 + j) as usize].clone();
            let lhs = p.mul(&q).eval(&assign).unwrap();
            let rhs = p.eval(&assign).unwrap().mul(&q.eval(&assign).unwrap());
            prop_assert_eq!(lhs, rhs);
        }
    }
}
