//! Sensitivity of the dSKP solution to the initial value at the origin,
//! `rho(i,j,k) = d x(i,j,k) / d a_{0,0}`, at the linear special solution.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_bigint::BigInt;
use num_integer::binomial;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::error::{DskpError, Result};
use crate::field::{ln_abs_bigint, rat_int, rational_to_f64, Dual, Rational};
use crate::lattice::{evolve, Cell, HeightFunction, InitialData, LatticePoint, Recurrence};
use crate::projective::ProjectiveValue;

/// `q = (c^2 - b^2) / (a^2 - b^2)` for `x = ia + jb + kc + d`.
pub fn q_linear(a: &Rational, b: &Rational, c: &Rational) -> Result<Rational> {
    let den = a * a - b * b;
    if den.is_zero() {
        return Err(DskpError::Invalid("a^2 = b^2".into()));
    }
    Ok((c * c - b * b) / den)
}

/// `q` governing the logarithmic derivative at `x = a^i b^j c^k d`.
pub fn q_multiplicative(a: &Rational, b: &Rational, c: &Rational) -> Result<Rational> {
    let one = Rational::one();
    let den = c * (a - b) * (a * b - &one);
    if den.is_zero() {
        return Err(DskpError::Invalid("degenerate multiplicative parameters".into()));
    }
    Ok(a * (c - b) * (b * c - &one) / den)
}

/// Small integers `(a, b, c)` realizing `q` for the linear solution.
pub fn linear_parameters(q: &Rational) -> Option<(Rational, Rational, Rational)> {
    for s in 2..60i64 {
        for a in 1..=s {
            for b in -s..=s {
                for c in 1..=s {
                    if a.abs().max(b.abs()).max(c) != s || a == b.abs() || c == b.abs() || a == c {
                        continue;
                    }
                    let (ra, rb, rc) = (rat_int(a), rat_int(b), rat_int(c));
                    if q_linear(&ra, &rb, &rc).ok().as_ref() == Some(q) && b != 0 {
                        return Some((ra, rb, rc));
                    }
                }
            }
        }
    }
    None
}

fn lambda(q: &Rational) -> Result<Rational> {
    let one = Rational::one();
    if *q == one {
        return Err(DskpError::Invalid("q = 1".into()));
    }
    Ok(q / (one - q))
}

/// Coefficient of `z^a` in `(1 - z)^b (1 + q/(1-q) z)^(n-b)`.
pub fn cq_coefficient(q: &Rational, a: i64, b: i64, n: i64) -> Result<Rational> {
    if a < 0 || b < 0 || b > n {
        return Err(DskpError::Invalid(format!("C_q({a},{b},{n}) out of range")));
    }
    let l = lambda(q)?;
    let mut s = Rational::zero();
    for t in 0..=a.min(b) {
        if a - t > n - b {
            continue;
        }
        let c1 = binomial(BigInt::from(b), BigInt::from(t));
        let c2 = binomial(BigInt::from(n - b), BigInt::from(a - t));
        let term = Rational::from_integer(c1 * c2) * crate::field::Field::powi(&l, a - t).unwrap();
        if t % 2 == 0 {
            s += term;
        } else {
            s -= term;
        }
    }
    Ok(s)
}

/// Indices `(A, B, n)` of the product formula, or `None` where `rho = 0`.
fn cq_indices(i: i32, j: i32, k: i32) -> Option<(i64, i64, i64)> {
    if (i + j + k) % 2 != 0 || k < 2 {
        return None;
    }
    let n = (k - 2) as i64;
    let a = (k as i64 - 2 - i as i64 - j as i64) / 2;
    let b = (k as i64 - 2 + i as i64 - j as i64) / 2;
    (a >= 0 && b >= 0 && a <= n && b <= n).then_some((a, b, n))
}

/// Exact `rho(i,j,k)` from the product formula.
pub fn rho_exact(i: i32, j: i32, k: i32, q: &Rational) -> Result<Rational> {
    match k {
        0 => return Ok(if (i, j) == (0, 0) { Rational::one() } else { Rational::zero() }),
        1 => return Ok(Rational::zero()),
        _ => {}
    }
    let Some((a, b, n)) = cq_indices(i, j, k) else { return Ok(Rational::zero()) };
    let one = Rational::one();
    let scale = crate::field::Field::powi(&(&one - q), n).ok_or_else(|| DskpError::Invalid("q = 1".into()))?;
    Ok(-(scale * cq_coefficient(q, a, b, n)? * cq_coefficient(q, b, a, n)?))
}

/// `rho` as `(sign, ln|rho|)`, from integer sums; usable at large `k`.
pub fn rho_log(i: i32, j: i32, k: i32, q: &Rational) -> Result<(i8, f64)> {
    if k < 2 {
        let r = rho_exact(i, j, k, q)?;
        return Ok(if r.is_zero() { (0, f64::NEG_INFINITY) } else { (1, 0.0) });
    }
    let Some((a, b, n)) = cq_indices(i, j, k) else { return Ok((0, f64::NEG_INFINITY)) };
    // q = al/be, lambda = al/r with r = be - al
    let (al, be) = (q.numer().clone(), q.denom().clone());
    let r = &be - &al;
    if r.is_zero() {
        return Err(DskpError::Invalid("q = 1".into()));
    }
    let sum = |a: i64, b: i64| -> BigInt {
        let mut s = BigInt::zero();
        for t in 0..=a.min(b) {
            if a - t > n - b {
                continue;
            }
            let term = binomial(BigInt::from(b), BigInt::from(t))
                * binomial(BigInt::from(n - b), BigInt::from(a - t))
                * num_traits::pow(al.clone(), (a - t) as usize)
                * num_traits::pow(r.clone(), t as usize);
            if t % 2 == 0 {
                s += term;
            } else {
                s -= term;
            }
        }
        s
    };
    let (s1, s2) = (sum(a, b), sum(b, a));
    if s1.is_zero() || s2.is_zero() {
        return Ok((0, f64::NEG_INFINITY));
    }
    // rho = -s1 s2 r^j / be^n
    let mut sign = -(s1.signum() * s2.signum());
    if r.is_negative() && j.rem_euclid(2) == 1 {
        sign = -sign;
    }
    let ln = ln_abs_bigint(&s1) + ln_abs_bigint(&s2) + j as f64 * ln_abs_bigint(&r) - n as f64 * ln_abs_bigint(&be);
    Ok((if sign.is_positive() { 1 } else { -1 }, ln))
}

/// `rho` on every lattice point with `|i| + |j| <= k <= kmax`, by evolving
/// the linear solution over dual numbers.
pub fn rho_dual_oracle(q: &Rational, kmax: i32) -> Result<HashMap<(i32, i32, i32), Rational>> {
    let (a, b, c) = linear_parameters(q).ok_or_else(|| DskpError::Invalid("no small linear parameters for q".into()))?;
    let d = Rational::new(1.into(), 7.into());
    let r = 2 * kmax + 1;
    let data = InitialData::from_fn(HeightFunction::flat(r), |i, j| {
        let h = (i + j).rem_euclid(2);
        let x = rat_int(i as i64) * &a + rat_int(j as i64) * &b + rat_int(h as i64) * &c + &d;
        let eps = if (i, j) == (0, 0) { Rational::one() } else { Rational::zero() };
        ProjectiveValue::Finite(Dual::new(x, eps))
    });
    let sol = evolve(&data, Recurrence::Dskp, kmax)?;
    let mut out = HashMap::new();
    for k in 0..=kmax {
        for i in -k..=k {
            for j in -k..=k {
                if i.abs() + j.abs() > k || (i + j + k) % 2 != 0 {
                    continue;
                }
                let v = match sol.cell(LatticePoint::new(i, j, k)) {
                    Some(Cell::Value(ProjectiveValue::Finite(x))) => x.eps.clone(),
                    _ => return Err(DskpError::Singular(format!("no finite value at ({i},{j},{k})"))),
                };
                out.insert((i, j, k), v);
            }
        }
    }
    Ok(out)
}

/// Coefficients of `1 - t^2 / (1 + t^2 - q t (u + 1/u) - (1-q) t (v + 1/v))`
/// up to `t^degree`.
pub fn rho_generating_function(q: &Rational, degree: i32) -> HashMap<(i32, i32, i32), Rational> {
    type Series = HashMap<(i32, i32, i32), Rational>;
    let one = Rational::one();
    let p = &one - q;
    // X = t^2 - t L, and 1/(1+X) = sum (-X)^m
    let mut minus_x: Series = HashMap::new();
    minus_x.insert((0, 0, 2), -one.clone());
    for (di, dj, w) in [(1, 0, q.clone()), (-1, 0, q.clone()), (0, 1, p.clone()), (0, -1, p.clone())] {
        minus_x.insert((di, dj, 1), w);
    }
    let mul = |a: &Series, b: &Series| -> Series {
        let mut out: Series = HashMap::new();
        for (&(i1, j1, k1), x) in a {
            for (&(i2, j2, k2), y) in b {
                if k1 + k2 <= degree {
                    *out.entry((i1 + i2, j1 + j2, k1 + k2)).or_insert_with(Rational::zero) += x * y;
                }
            }
        }
        out
    };
    let mut inv: Series = HashMap::from([((0, 0, 0), one.clone())]);
    let mut power = inv.clone();
    for _ in 1..=degree {
        power = mul(&power, &minus_x);
        for (key, v) in &power {
            *inv.entry(*key).or_insert_with(Rational::zero) += v;
        }
    }
    let mut out: Series = HashMap::from([((0, 0, 0), one)]);
    for ((i, j, k), v) in inv {
        if k + 2 <= degree {
            *out.entry((i, j, k + 2)).or_insert_with(Rational::zero) -= v;
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

#[derive(Clone, Debug, Default)]
pub struct RecurrenceReport {
    pub checked: usize,
    pub violations: Vec<(i32, i32, i32)>,
}

/// Checks the linear relation for `rho` at every octahedron centre with
/// top level at most `kmax`.
pub fn rho_recurrence_check(q: &Rational, kmax: i32) -> Result<RecurrenceReport> {
    let one = Rational::one();
    let p = &one - q;
    let mut rep = RecurrenceReport::default();
    for k in 1..kmax {
        for i in -kmax..=kmax {
            for j in -kmax..=kmax {
                if (i + j + k) % 2 == 0 {
                    continue;
                }
                let r = |di: i32, dj: i32, dk: i32| rho_exact(i + di, j + dj, k + dk, q);
                let lhs = r(0, 0, 1)? + r(0, 0, -1)?;
                let rhs = q * (r(1, 0, 0)? + r(-1, 0, 0)?) + &p * (r(0, 1, 0)? + r(0, -1, 0)?);
                rep.checked += 1;
                if lhs != rhs {
                    rep.violations.push((i, j, k));
                }
            }
        }
    }
    Ok(rep)
}

/// `rho` in double precision by running the linear relation upwards.
pub fn rho_float_ladder(q: f64, kmax: i32) -> HashMap<(i32, i32, i32), f64> {
    let mut v: HashMap<(i32, i32, i32), f64> = HashMap::new();
    v.insert((0, 0, 0), 1.0);
    let get = |v: &HashMap<(i32, i32, i32), f64>, p: (i32, i32, i32)| v.get(&p).copied().unwrap_or(0.0);
    for k in 1..kmax {
        let mut next = Vec::new();
        for i in -(k + 1)..=(k + 1) {
            for j in -(k + 1)..=(k + 1) {
                if (i + j + k) % 2 == 0 {
                    continue;
                }
                let x = q * (get(&v, (i + 1, j, k)) + get(&v, (i - 1, j, k)))
                    + (1.0 - q) * (get(&v, (i, j + 1, k)) + get(&v, (i, j - 1, k)))
                    - get(&v, (i, j, k - 1));
                if x != 0.0 {
                    next.push(((i, j, k + 1), x));
                }
            }
        }
        v.extend(next);
    }
    v
}

/// `2 log(sqrt q + sqrt(q - 1))`, the growth rate at the origin for `q > 1`.
pub fn xi_origin(q: f64) -> f64 {
    2.0 * (q.sqrt() + (q - 1.0).sqrt()).ln()
}

/// `2 / (pi sqrt(q (1 - q)))`, the bound on `k rho` at the origin for `0 < q < 1`.
pub fn envelope_origin(q: f64) -> f64 {
    2.0 / (PI * (q * (1.0 - q)).sqrt())
}

pub fn inside_arctic_ellipse(x: f64, y: f64, q: f64) -> bool {
    x * x / (1.0 - q) + y * y / q < 1.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub x: f64,
    pub y: f64,
    pub rho: f64,
    pub k_rho: f64,
    pub log_rate: f64,
}

/// Lattice point for `(xk, yk, k)`: floors, then `j + 1` if parity is off.
pub fn scaled_point(x: f64, y: f64, k: i32) -> (i32, i32) {
    let i = (x * k as f64).floor() as i32;
    let mut j = (y * k as f64).floor() as i32;
    if (i + j + k) % 2 != 0 {
        j += 1;
    }
    (i, j)
}

pub fn scan_point(x: f64, y: f64, k: i32, q: &Rational) -> Result<ScanRow> {
    let (i, j) = scaled_point(x, y, k);
    let (s, ln) = rho_log(i, j, k, q)?;
    let rho = s as f64 * ln.exp();
    let kf = k as f64;
    Ok(ScanRow { x, y, rho, k_rho: kf * rho, log_rate: (ln + kf.ln()) / kf })
}

/// Uniform `nx x ny` grid over `[-1, 1]^2`, row-major in `y` then `x`.
pub fn asymptotic_scan(q: &Rational, k: i32, nx: usize, ny: usize) -> Result<Vec<ScanRow>> {
    if nx < 2 || ny < 2 {
        return Err(DskpError::Invalid("grid needs at least 2 points per axis".into()));
    }
    let pts: Vec<(f64, f64)> = (0..ny)
        .flat_map(|b| {
            (0..nx).map(move |a| (-1.0 + 2.0 * a as f64 / (nx - 1) as f64, -1.0 + 2.0 * b as f64 / (ny - 1) as f64))
        })
        .collect();
    pts.par_iter().map(|&(x, y)| scan_point(x, y, k, q)).collect()
}

pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut s = String::from("x,y,rho,k_rho,log_rate\n");
    for r in rows {
        s.push_str(&format!("{},{},{:e},{:e},{}\n", r.x, r.y, r.rho, r.k_rho, r.log_rate));
    }
    s
}

/// Exact `rho` as a float, for comparisons.
pub fn rho_f64(i: i32, j: i32, k: i32, q: &Rational) -> Result<f64> {
    rho_exact(i, j, k, q).map(|r| rational_to_f64(&r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::rat;
    use crate::poly::{Monomial, MultiPoly};

    fn qs() -> [Rational; 2] {
        [rat(7, 10), rat(6, 5)]
    }

    #[test]
    fn cq_edge_cases() {
        let q = rat(7, 10);
        for n in 0..6 {
            for b in 0..=n {
                assert_eq!(cq_coefficient(&q, 0, b, n).unwrap(), Rational::one());
            }
            for a in 0..=n {
                let expect = Rational::from_integer(binomial(BigInt::from(n), BigInt::from(a))) * crate::field::Field::powi(&rat(7, 3), a).unwrap();
                assert_eq!(cq_coefficient(&q, a, 0, n).unwrap(), expect);
            }
        }
        assert!(cq_coefficient(&q, 0, 4, 3).is_err());
    }

    #[test]
    fn cq_matches_polynomial_expansion() {
        // (1 - z)^3 (1 + 3 z)^2 with integer lambda, then rescale
        let z = MultiPoly::var((0, 0));
        let one = MultiPoly::constant(BigInt::one());
        let lin = one.sub(&z);
        let mut p = one.clone();
        for _ in 0..3 {
            p = p.mul(&lin);
        }
        let lam = one.add(&z.scale(&BigInt::from(3)));
        p = p.mul(&lam).mul(&lam);
        // lambda = 3 means q = 3/4
        let q = rat(3, 4);
        for a in 0..=5 {
            let coeff = p.coefficient(&Monomial::from_pairs(vec![((0, 0), a)]));
            assert_eq!(cq_coefficient(&q, a as i64, 3, 5).unwrap(), Rational::from_integer(coeff));
        }
    }

    #[test]
    fn small_values() {
        for q in qs() {
            assert_eq!(rho_exact(0, 0, 2, &q).unwrap(), -Rational::one());
            assert_eq!(rho_exact(0, 0, 0, &q).unwrap(), Rational::one());
            assert!(rho_exact(1, 0, 1, &q).unwrap().is_zero());
        }
    }

    #[test]
    fn matches_dual_number_oracle() {
        for q in qs() {
            let oracle = rho_dual_oracle(&q, 6).unwrap();
            for (&(i, j, k), v) in &oracle {
                assert_eq!(&rho_exact(i, j, k, &q).unwrap(), v, "({i},{j},{k}) q={q}");
            }
        }
    }

    #[test]
    fn matches_generating_function() {
        for q in qs() {
            let gf = rho_generating_function(&q, 8);
            for k in 0..=8 {
                for i in -10..=10 {
                    for j in -10..=10 {
                        let v = gf.get(&(i, j, k)).cloned().unwrap_or_else(Rational::zero);
                        assert_eq!(rho_exact(i, j, k, &q).unwrap(), v, "({i},{j},{k})");
                        if i.abs() + j.abs() > k {
                            assert!(v.is_zero());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn linear_relation_holds() {
        for q in qs() {
            let rep = rho_recurrence_check(&q, 8).unwrap();
            assert!(rep.violations.is_empty(), "{:?}", rep.violations);
            assert!(rep.checked > 0);
        }
    }

    #[test]
    fn log_domain_agrees() {
        for q in qs() {
            let qf = rational_to_f64(&q);
            let ladder = rho_float_ladder(qf, 40);
            for k in [10, 25, 40] {
                let scale = (-k..=k)
                    .flat_map(|i| (-k..=k).map(move |j| (i, j)))
                    .map(|(i, j)| rho_f64(i, j, k, &q).unwrap().abs())
                    .fold(0.0, f64::max);
                for i in -k..=k {
                    for j in -k..=k {
                        if (i + j + k) % 2 != 0 {
                            continue;
                        }
                        let exact = rho_f64(i, j, k, &q).unwrap();
                        let (s, ln) = rho_log(i, j, k, &q).unwrap();
                        let logv = if s == 0 { 0.0 } else { s as f64 * ln.exp() };
                        assert!((exact - logv).abs() <= 1e-9 * exact.abs().max(1e-300), "({i},{j},{k})");
                        let fl = ladder.get(&(i, j, k)).copied().unwrap_or(0.0);
                        assert!((exact - fl).abs() <= 1e-9 * scale, "({i},{j},{k}) {exact} {fl}");
                    }
                }
            }
        }
    }

    #[test]
    fn origin_asymptotics_at_k200() {
        let r = scan_point(0.0, 0.0, 200, &rat(6, 5)).unwrap();
        assert!((r.log_rate - xi_origin(1.2)).abs() <= 0.05 * xi_origin(1.2), "{r:?}");
        let r = scan_point(0.0, 0.0, 200, &rat(7, 10)).unwrap();
        assert!(r.k_rho.abs() <= envelope_origin(0.7) * 1.1, "{r:?}");
        let out = scan_point(0.9, 0.0, 200, &rat(7, 10)).unwrap();
        assert!(out.log_rate < 0.0, "{out:?}");
    }

    #[test]
    fn multiplicative_q() {
        let q = q_multiplicative(&rat(2, 1), &rat(3, 1), &rat(5, 1)).unwrap();
        assert_eq!(q, rat(2 * 2 * 14, 5 * -1 * 5));
    }
}
