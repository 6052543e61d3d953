//! The chi recurrences as leading coefficients of dSKP solutions with
//! degenerating initial data.
//!
//! Two independent routes are provided. [`chi_solution_via_limit`] expands
//! the determinants `det(C(a)^B~ | C(1)^B)` and `det(C(1)^B~ | C(a)^B)` as
//! exact polynomials in the degeneration parameters by interpolation.
//! [`chi_leading_polynomials`] collects the optimal tree/forest
//! configurations directly, which is what the monomial counts are read from.

use std::collections::HashMap;

mod expansion;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cwgraph::{aztec, aztec_apex, Weights};
use crate::dimer::ratio_function_y;
use crate::error::{size_guard, DskpError, Result};
use crate::field::{random_rational, rat_int, Field, Rational};
use crate::forests::{quadrangulate_aztec, Quadrangulation, TreeForestConfig};
use crate::lattice::{evolve, ChiVariant, HeightFunction, InitialData};
use crate::linalg::{det, Matrix};
use crate::poly::{Monomial, MultiPoly, Var};
use crate::projective::ProjectiveValue as PV;

pub const CHI_LIMIT_K_LIMIT: usize = 3;
/// `k` limit for the symbolic leading polynomials of chi_4; chi_3 and chi_5 allow one more.
pub const CHI_SYMBOLIC_K_LIMIT: usize = 3;

/// Weight of the `epsilon` exponent against the `delta` exponent in chi_5.
const LEX: i64 = 1 << 24;
const P_MINUS_ONE: u64 = expansion::P - 1;

fn flat(i: i32, j: i32) -> i32 {
    (i + j).rem_euclid(2)
}

/// Exponent of `epsilon` at a face of the flat surface.
pub fn epsilon_exponent(v: Var) -> i64 {
    (v.0 - v.1 + flat(v.0, v.1)) as i64
}

/// Exponent of `delta` at a face of the flat surface.
pub fn delta_exponent(v: Var) -> i64 {
    (v.0 + v.1 + flat(v.0, v.1)) as i64
}

fn variant_name(v: ChiVariant) -> &'static str {
    match v {
        ChiVariant::Chi3 => "chi3",
        ChiVariant::Chi4 => "chi4",
        ChiVariant::Chi5 => "chi5",
    }
}

/// Coefficients of the polynomial through `(0, ys[0]), (1, ys[1]), ...`.
pub fn interpolate(ys: &[Rational]) -> Vec<Rational> {
    let n = ys.len();
    let mut dd = ys.to_vec();
    for lvl in 1..n {
        for i in (lvl..n).rev() {
            dd[i] = (&dd[i] - &dd[i - 1]) / rat_int(lvl as i64);
        }
    }
    // Horner on the Newton form with nodes 0, 1, ..., n - 2.
    let mut coef = vec![Rational::from_integer(0.into()); n];
    for i in (0..n).rev() {
        // coef <- coef * (x - i) + dd[i]
        let mut next = vec![Rational::from_integer(0.into()); n];
        for d in 0..n {
            if coef[d] == Rational::from_integer(0.into()) {
                continue;
            }
            if d + 1 < n {
                next[d + 1] += &coef[d];
            }
            next[d] -= &coef[d] * rat_int(i as i64);
        }
        next[0] += &dd[i];
        coef = next;
    }
    coef
}

fn lowest(coefs: &[Rational]) -> Option<(usize, Rational)> {
    coefs.iter().enumerate().find(|(_, c)| !c.is_zero()).map(|(i, c)| (i, c.clone()))
}

/// Both determinants on a grid `t in 0..=dt`, `u in 0..=du`, then the
/// coefficient of `t^m` as a polynomial in `u` for the lowest nonzero `m`.
fn leading_in_t(
    q: &Quadrangulation,
    weight: &dyn Fn(usize, &Rational, &Rational) -> Rational,
    numerator: bool,
    dt: usize,
    du: usize,
) -> Result<Vec<Rational>> {
    let bt = q.b_tilde();
    let bs = q.b_set();
    let (wcols, ucols) = if numerator { (&bt, &bs) } else { (&bs, &bt) };
    let ones = q.c_block::<Rational>(ucols, None)?;
    let raw = q.c_block::<Rational>(wcols, None)?;
    let mut grid = vec![vec![Rational::zero(); du + 1]; dt + 1];
    for (ti, row) in grid.iter_mut().enumerate() {
        for (ui, cell) in row.iter_mut().enumerate() {
            let (t, u) = (rat_int(ti as i64), rat_int(ui as i64));
            let m: Matrix<Rational> = (0..q.faces.len())
                .map(|f| {
                    let w = weight(f, &t, &u);
                    let weighted = raw[f].iter().map(|x| x.mul(&w));
                    if numerator {
                        weighted.chain(ones[f].iter().cloned()).collect()
                    } else {
                        ones[f].iter().cloned().chain(weighted).collect()
                    }
                })
                .collect();
            *cell = det(&m);
        }
    }
    // t-coefficients for each u, then u-polynomials for each t-degree.
    let per_u: Vec<Vec<Rational>> = (0..=du)
        .map(|ui| interpolate(&grid.iter().map(|r| r[ui].clone()).collect::<Vec<_>>()))
        .collect();
    for m in 0..=dt {
        let poly = interpolate(&per_u.iter().map(|c| c[m].clone()).collect::<Vec<_>>());
        if poly.iter().any(|c| !c.is_zero()) {
            return Ok(poly);
        }
    }
    Err(DskpError::Singular("determinant vanishes identically".into()))
}

/// `Y = sigma * det(C(a)^B~ | C(1)^B) / det(C(1)^B~ | C(a)^B)`; finds `sigma`.
fn determinant_sign(q: &Quadrangulation, k: usize, a: &Weights<Rational>) -> Result<Rational> {
    let g = aztec(k)?;
    let pa: Weights<PV<Rational>> = a.iter().map(|(&v, x)| (v, PV::Finite(x.clone()))).collect();
    let y = ratio_function_y(&g, &pa)?;
    let y = y.as_finite().ok_or_else(|| DskpError::Singular("Y is infinite".into()))?.clone();
    let d = det(&q.c_matrix(a)?);
    let bt = q.b_tilde();
    let left = q.c_block(&bt, Some(a))?;
    let right = q.c_block::<Rational>(&q.b_set(), None)?;
    let n = det(&left.into_iter().zip(right).map(|(mut l, r)| {
        l.extend(r);
        l
    }).collect());
    let sigma = (y * d)
        .div(&n)
        .ok_or_else(|| DskpError::Singular("numerator determinant vanishes".into()))?;
    if sigma != rat_int(1) && sigma != rat_int(-1) {
        return Err(DskpError::Invalid(format!("determinant ratio is not +-Y (factor {sigma})")));
    }
    Ok(sigma)
}

/// `x(p)` at the apex of `A_k` as the leading coefficient of `Y(A_k, a)`
/// under the degeneration attached to `variant`:
/// chi_4 from `epsilon^e a`, chi_5 from `epsilon^e delta^d a`, chi_3 from
/// `epsilon^e (1 + rho a)` after subtracting the constant term 1.
pub fn chi_solution_via_limit(variant: ChiVariant, k: usize, a: &Weights<Rational>) -> Result<PV<Rational>> {
    size_guard("k for the chi limit by interpolation", k, CHI_LIMIT_K_LIMIT)?;
    let q = quadrangulate_aztec(k)?;
    let labels: Vec<Var> = q.faces.iter().map(|f| f.label).collect();
    let vals: Vec<Rational> = labels
        .iter()
        .map(|v| a.get(v).cloned().ok_or_else(|| DskpError::Invalid(format!("missing weight for {v:?}"))))
        .collect::<Result<_>>()?;
    let es: Vec<i64> = labels.iter().map(|&v| epsilon_exponent(v)).collect();
    let ds: Vec<i64> = labels.iter().map(|&v| delta_exponent(v)).collect();
    let emin = *es.iter().min().unwrap();
    let dmin = *ds.iter().min().unwrap();
    let espan = (*es.iter().max().unwrap() - emin) as usize;
    let dspan = (*ds.iter().max().unwrap() - dmin) as usize;

    let sigma = {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5167);
        let reference: Weights<Rational> = labels.iter().map(|&v| (v, random_rational(&mut rng, 40, 9))).collect();
        determinant_sign(&q, k, &reference)?
    };
    let weight = |f: usize, t: &Rational, u: &Rational| -> Rational {
        let tp = t.powi(es[f] - emin).expect("nonnegative power");
        match variant {
            ChiVariant::Chi4 => tp * &vals[f],
            ChiVariant::Chi5 => tp * u.powi(ds[f] - dmin).expect("nonnegative power") * &vals[f],
            ChiVariant::Chi3 => tp * (rat_int(1) + u * &vals[f]),
        }
    };
    let du_per_col = match variant {
        ChiVariant::Chi4 => 0,
        ChiVariant::Chi5 => dspan,
        ChiVariant::Chi3 => 1,
    };
    let nb = q.b_set().len();
    let nbt = q.b_tilde().len();
    let num = leading_in_t(&q, &weight, true, nbt * espan, nbt * du_per_col)?;
    let den = leading_in_t(&q, &weight, false, nb * espan, nb * du_per_col)?;
    let num: Vec<Rational> = num.into_iter().map(|c| c * &sigma).collect();
    let (n_lc, d_lc) = match variant {
        ChiVariant::Chi4 | ChiVariant::Chi5 => (lowest(&num), lowest(&den)),
        ChiVariant::Chi3 => {
            let len = num.len().max(den.len());
            let diff: Vec<Rational> = (0..len)
                .map(|i| {
                    num.get(i).cloned().unwrap_or_else(Rational::zero) - den.get(i).cloned().unwrap_or_else(Rational::zero)
                })
                .collect();
            (lowest(&diff), lowest(&den))
        }
    };
    match (n_lc, d_lc) {
        (Some((_, n)), Some((_, d))) => Ok(PV::Finite(n / d)),
        (None, _) => Ok(PV::Finite(Rational::zero())),
        _ => Err(DskpError::Singular("no leading coefficient".into())),
    }
}

/// Evolves the chi recurrence on the flat surface and reads the apex of `A_k`.
pub fn chi_solution_via_recurrence(variant: ChiVariant, k: usize, a: &Weights<Rational>) -> Result<PV<Rational>> {
    let r = k as i32 + 2;
    let hf = HeightFunction::flat(r);
    let data = InitialData::from_fn(hf, |i, j| match a.get(&(i, j)) {
        Some(x) => PV::Finite(x.clone()),
        None => PV::Finite(rat_int(1)),
    });
    let apex = aztec_apex(k);
    evolve(&data, variant.recurrence(), apex.k)?.get(apex).cloned()
}

/// Generic weights on the faces of `A_k`.
pub fn random_aztec_weights(k: usize, seed: u64) -> Result<Weights<Rational>> {
    let q = quadrangulate_aztec(k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(q.faces.iter().map(|f| (f.label, random_rational(&mut rng, 40, 9))).collect())
}

/// Numerator and denominator of the chi solution at the apex of `A_k` as
/// signed sums over contributing configurations.
#[derive(Clone, Debug)]
pub struct LeadingPolynomials {
    pub variant: ChiVariant,
    pub k: usize,
    pub numerator: MultiPoly,
    pub denominator: MultiPoly,
    /// Orders in `rho` of the numerator and denominator (chi_3 only).
    pub rho_orders: Option<(usize, usize)>,
}

impl LeadingPolynomials {
    pub fn eval(&self, a: &Weights<Rational>) -> Result<PV<Rational>> {
        let assign = |v: Var| a.get(&v).cloned().unwrap_or_else(Rational::zero);
        let n = self.numerator.eval(&assign).ok_or_else(|| DskpError::Singular("numerator".into()))?;
        let d = self.denominator.eval(&assign).ok_or_else(|| DskpError::Singular("denominator".into()))?;
        Ok(PV::from_homogeneous(n, d)?)
    }

    pub fn counts(&self) -> MonomialCounts {
        MonomialCounts {
            variant: variant_name(self.variant),
            k: self.k,
            numerator: self.numerator.monomial_count(),
            denominator: self.denominator.monomial_count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MonomialCounts {
    pub variant: &'static str,
    pub k: usize,
    pub numerator: usize,
    pub denominator: usize,
}

fn face_mask(faces: impl Iterator<Item = usize>) -> u64 {
    faces.fold(0u64, |m, f| m | (1u64 << f))
}

fn mask_poly(q: &Quadrangulation, terms: &HashMap<u64, i64>) -> MultiPoly {
    let mut p = MultiPoly::zero();
    for (&mask, &c) in terms {
        if c == 0 {
            continue;
        }
        let pairs = (0..q.faces.len()).filter(|f| mask >> f & 1 == 1).map(|f| (q.faces[f].label, 1)).collect();
        p.add_term(Monomial::from_pairs(pairs), BigInt::from(c));
    }
    p
}

/// Adds `sign * e_s(mask)` (elementary symmetric polynomial of the faces in `mask`).
fn add_elementary(acc: &mut HashMap<u64, i64>, mask: u64, s: usize, sign: i64) {
    let bits: Vec<u32> = (0..64).filter(|b| mask >> b & 1 == 1).collect();
    if s > bits.len() {
        return;
    }
    let mut idx: Vec<usize> = (0..s).collect();
    loop {
        let m = idx.iter().fold(0u64, |m, &i| m | (1u64 << bits[i]));
        *acc.entry(m).or_insert(0) += sign;
        let mut p = s;
        while p > 0 && idx[p - 1] == bits.len() - s + p - 1 {
            p -= 1;
        }
        if p == 0 {
            return;
        }
        idx[p - 1] += 1;
        for r in p..s {
            idx[r] = idx[r - 1] + 1;
        }
    }
}

fn tree_mask(c: &TreeForestConfig) -> u64 {
    face_mask(c.tree.iter().map(|&(_, f)| f))
}

fn forest_mask(c: &TreeForestConfig) -> u64 {
    face_mask(c.forest.iter().map(|&(_, f)| f))
}

/// Leading numerator and denominator polynomials for the chi solution at
/// the apex of `A_k`, from the tree/forest expansion of `Y`.
pub fn chi_leading_polynomials(variant: ChiVariant, k: usize) -> Result<LeadingPolynomials> {
    let limit = match variant {
        ChiVariant::Chi4 => CHI_SYMBOLIC_K_LIMIT,
        _ => CHI_SYMBOLIC_K_LIMIT + 1,
    };
    size_guard("k for chi leading polynomials", k, limit)?;
    let q = quadrangulate_aztec(k)?;
    if q.faces.len() > 64 {
        return Err(DskpError::Invalid("too many faces for bit masks".into()));
    }
    let w: Vec<i64> = q
        .faces
        .iter()
        .map(|f| match variant {
            ChiVariant::Chi5 => epsilon_exponent(f.label) * LEX + delta_exponent(f.label),
            _ => epsilon_exponent(f.label),
        })
        .collect();
    let neg: Vec<i64> = w.iter().map(|x| -x).collect();
    let (_, den_configs) = q.enumerate_optimal_tree_forest(&w)?;
    let (_, num_configs) = q.enumerate_optimal_tree_forest(&neg)?;
    let collect = |configs: &[TreeForestConfig], mask: fn(&TreeForestConfig) -> u64| -> HashMap<u64, i64> {
        let mut acc = HashMap::new();
        for c in configs {
            *acc.entry(mask(c)).or_insert(0) += c.sign as i64;
        }
        acc
    };
    match variant {
        ChiVariant::Chi4 | ChiVariant::Chi5 => Ok(LeadingPolynomials {
            variant,
            k,
            numerator: mask_poly(&q, &collect(&num_configs, tree_mask)),
            denominator: mask_poly(&q, &collect(&den_configs, forest_mask)),
            rho_orders: None,
        }),
        ChiVariant::Chi3 => chi3_by_expansion(&q, k),
    }
}

/// The chi_3 polynomials from the optimal chi_4 configurations, expanding
/// `prod (1 + rho a)` order by order. Exponential in `k`; an oracle for
/// [`chi3_by_expansion`].
pub fn chi3_from_configurations(k: usize) -> Result<LeadingPolynomials> {
    size_guard("k for chi3 from configurations", k, CHI_SYMBOLIC_K_LIMIT)?;
    let q = quadrangulate_aztec(k)?;
    let w: Vec<i64> = q.faces.iter().map(|f| epsilon_exponent(f.label)).collect();
    let neg: Vec<i64> = w.iter().map(|x| -x).collect();
    let (_, den_configs) = q.enumerate_optimal_tree_forest(&w)?;
    let (_, num_configs) = q.enumerate_optimal_tree_forest(&neg)?;
    let max_order = q.faces.len();
    let mut den = None;
    for s in 0..=max_order {
        let mut acc = HashMap::new();
        for c in &den_configs {
            add_elementary(&mut acc, forest_mask(c), s, c.sign as i64);
        }
        acc.retain(|_, v| *v != 0);
        if !acc.is_empty() {
            den = Some((s, acc));
            break;
        }
    }
    let mut num = None;
    for s in 0..=max_order {
        let mut acc = HashMap::new();
        for c in &num_configs {
            add_elementary(&mut acc, tree_mask(c), s, c.sign as i64);
        }
        for c in &den_configs {
            add_elementary(&mut acc, forest_mask(c), s, -(c.sign as i64));
        }
        acc.retain(|_, v| *v != 0);
        if !acc.is_empty() {
            num = Some((s, acc));
            break;
        }
    }
    let (Some((sn, num)), Some((sd, den))) = (num, den) else {
        return Err(DskpError::Singular("rho expansion vanishes".into()));
    };
    Ok(LeadingPolynomials {
        variant: ChiVariant::Chi3,
        k,
        numerator: mask_poly(&q, &num),
        denominator: mask_poly(&q, &den),
        rho_orders: Some((sn, sd)),
    })
}

/// Sign pattern of `(C^B~ | C^B)` with rows in face order.
fn c_signs(q: &Quadrangulation) -> Vec<Vec<i64>> {
    let cols: Vec<usize> = q.b_tilde().into_iter().chain(q.b_set()).collect();
    (0..q.faces.len()).map(|f| cols.iter().map(|&v| q.c_sign(f, v) as i64).collect()).collect()
}

/// The chi_3 polynomials from the low-order expansion of the leading
/// `epsilon` forms of both determinants at `a = 1 + x`.
fn chi3_by_expansion(q: &Quadrangulation, k: usize) -> Result<LeadingPolynomials> {
    let signs = c_signs(q);
    let val: Vec<i64> = q.faces.iter().map(|f| epsilon_exponent(f.label)).collect();
    let nbt = q.b_tilde().len();
    let n = signs.len();
    let den_w: Vec<bool> = (0..n).map(|j| j >= nbt).collect();
    let num_w: Vec<bool> = (0..n).map(|j| j < nbt).collect();
    let (dm0, de) = expansion::initial_form(&signs, &val, &den_w)?;
    let (nm0, ne) = expansion::initial_form(&signs, &val, &num_w)?;
    let sigma = {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5167);
        let reference: Weights<Rational> =
            q.faces.iter().map(|f| (f.label, random_rational(&mut rng, 40, 9))).collect();
        determinant_sign(q, k, &reference)?
    };
    let sigma = if sigma == rat_int(1) { 1 } else { P_MINUS_ONE };
    // Orders along a random line fix how far each expansion must go.
    let y: Vec<u64> = {
        let mut rng = ChaCha8Rng::seed_from_u64(0x11e);
        (0..n).map(|_| rng.gen_range(1..expansion::P)).collect()
    };
    let dl = expansion::along_line(&dm0, &de, &y);
    let nl = expansion::along_line(&nm0, &ne, &y);
    let diff_line: Vec<u64> =
        nl.iter().zip(&dl).map(|(&a, &b)| expansion::sub_mod(expansion::mul_mod(a, sigma), b)).collect();
    let sd = expansion::order(&dl).ok_or(DskpError::Singular("denominator vanishes".into()))?;
    let sn = expansion::order(&diff_line).ok_or(DskpError::Singular("chi3 numerator vanishes".into()))?;
    let dcor = expansion::corank(&dm0);
    let ncor = expansion::corank(&nm0);
    let (dlo, nlo) = std::thread::scope(|s| {
        let d = s.spawn(|| expansion::low_order_parts(&dm0, &de, sd.max(sn).saturating_sub(dcor)));
        let nlo = expansion::low_order_parts(&nm0, &ne, sn.saturating_sub(ncor));
        (d.join().expect("expansion thread"), nlo)
    });
    let (dlo, nlo) = (dlo?, nlo?);
    let part = |lo: &expansion::LowOrder, d: usize| -> HashMap<u64, u64> { lo.parts.get(d).cloned().unwrap_or_default() };
    let to_int = |h: &HashMap<u64, u64>| -> HashMap<u64, i64> {
        h.iter().map(|(&m, &c)| (m, expansion::to_i64(c))).collect()
    };
    let den = part(&dlo, sd);
    let mut num: HashMap<u64, u64> =
        part(&nlo, sn).into_iter().map(|(m, c)| (m, expansion::mul_mod(c, sigma))).collect();
    for (m, c) in part(&dlo, sn) {
        let cur = num.entry(m).or_insert(0);
        *cur = expansion::sub_mod(*cur, c);
    }
    num.retain(|_, c| *c != 0);
    if den.is_empty() || num.is_empty() {
        return Err(DskpError::TruncationInsufficient);
    }
    Ok(LeadingPolynomials {
        variant: ChiVariant::Chi3,
        k,
        numerator: mask_poly(q, &to_int(&num)),
        denominator: mask_poly(q, &to_int(&den)),
        rho_orders: Some((sn, sd)),
    })
}

pub fn chi_monomial_counts(variant: ChiVariant, k: usize) -> Result<MonomialCounts> {
    Ok(chi_leading_polynomials(variant, k)?.counts())
}

/// Compass direction of an arrow, in the lattice frame (`i` east, `j` north).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Compass {
    NE,
    NW,
    SE,
    SW,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Side {
    Numerator,
    Denominator,
}

/// Direction from vertex `v` to face `f`; `None` for the vertices at infinity.
fn compass(q: &Quadrangulation, k: usize, v: usize, f: usize) -> Option<Compass> {
    let n = 2 * k as i32;
    let (r, s) = q.vertices[v].coords;
    if r < 0 || r > n || s < 0 || s > n {
        return None;
    }
    let c = aztec_apex(k);
    let pos = (2 * c.i + r - s, 2 * c.j + r + s - n);
    let lab = q.faces[f].label;
    match (2 * lab.0 - pos.0, 2 * lab.1 - pos.1) {
        (1, 1) => Some(Compass::NE),
        (-1, 1) => Some(Compass::NW),
        (1, -1) => Some(Compass::SE),
        (-1, -1) => Some(Compass::SW),
        _ => None,
    }
}

/// The faces of the forest read on the white graph, oriented towards `w_r`.
fn white_tree(q: &Quadrangulation, c: &TreeForestConfig) -> Vec<(usize, usize)> {
    let edges: Vec<(usize, usize, usize)> = c
        .forest
        .iter()
        .map(|&(_, f)| (q.faces[f].corners[1], q.faces[f].corners[3], f))
        .collect();
    crate::forests::orient_towards(q.vertices.len(), &edges, &[q.w_r])
}

fn avoids(q: &Quadrangulation, k: usize, arrows: &[(usize, usize)], bad: Compass) -> bool {
    arrows.iter().all(|&(v, f)| compass(q, k, v, f) != Some(bad))
}

/// Configurations obeying the direction constraints that single out the
/// chi_4 or chi_5 leading terms.
///
/// Denominator: the white tree avoids SE (chi_5 also: the black forest
/// avoids NE). Numerator: the black forest avoids NW (chi_5 also: the white
/// tree avoids SW).
pub fn constrained_configurations(variant: ChiVariant, k: usize, side: Side) -> Result<Vec<TreeForestConfig>> {
    if variant == ChiVariant::Chi3 {
        return Err(DskpError::Invalid("no direction characterisation for chi3".into()));
    }
    let q = quadrangulate_aztec(k)?;
    let configs = q.enumerate_tree_forest()?;
    let keep = |c: &TreeForestConfig| -> bool {
        let chi5 = variant == ChiVariant::Chi5;
        match side {
            Side::Denominator => {
                avoids(&q, k, &white_tree(&q, c), Compass::SE) && (!chi5 || avoids(&q, k, &c.forest, Compass::NE))
            }
            Side::Numerator => {
                avoids(&q, k, &c.forest, Compass::NW) && (!chi5 || avoids(&q, k, &white_tree(&q, c), Compass::SW))
            }
        }
    };
    Ok(configs.into_iter().filter(|c| keep(c)).collect())
}

pub fn constrained_forest_count(variant: ChiVariant, k: usize, side: Side) -> Result<usize> {
    Ok(constrained_configurations(variant, k, side)?.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    const VARIANTS: [ChiVariant; 3] = [ChiVariant::Chi3, ChiVariant::Chi4, ChiVariant::Chi5];

    #[test]
    fn interpolation_recovers_coefficients() {
        let p = [rat_int(3), rat_int(-1), Rational::new(2.into(), 7.into()), rat_int(5)];
        let ys: Vec<Rational> = (0..6)
            .map(|x| {
                let x = rat_int(x);
                p.iter().rev().fold(Rational::zero(), |acc, c| acc * &x + c)
            })
            .collect();
        let c = interpolate(&ys);
        assert_eq!(&c[..4], &p);
        assert!(c[4..].iter().all(|x| x.is_zero()));
    }

    #[test]
    fn limit_matches_recurrence() {
        for v in VARIANTS {
            for k in 1..=2 {
                for seed in 0..2 {
                    let a = random_aztec_weights(k, seed).unwrap();
                    let lim = chi_solution_via_limit(v, k, &a).unwrap();
                    let rec = chi_solution_via_recurrence(v, k, &a).unwrap();
                    assert_eq!(lim, rec, "{v:?} k={k} seed={seed}");
                }
            }
        }
    }

    #[test]
    fn leading_polynomials_match_limit() {
        for v in VARIANTS {
            for k in 1..=2 {
                let lp = chi_leading_polynomials(v, k).unwrap();
                let a = random_aztec_weights(k, 7).unwrap();
                assert_eq!(lp.eval(&a).unwrap(), chi_solution_via_limit(v, k, &a).unwrap(), "{v:?} k={k}");
            }
        }
    }

    #[test]
    fn optimal_search_agrees_with_full_enumeration() {
        for k in 1..=2 {
            let q = quadrangulate_aztec(k).unwrap();
            let all = q.enumerate_tree_forest().unwrap();
            let w: Vec<i64> = q.faces.iter().map(|f| epsilon_exponent(f.label)).collect();
            let weight = |c: &TreeForestConfig| c.forest.iter().map(|&(_, f)| w[f]).sum::<i64>();
            let best = all.iter().map(weight).min().unwrap();
            let (opt, found) = q.enumerate_optimal_tree_forest(&w).unwrap();
            assert_eq!(opt, best);
            assert_eq!(found.len(), all.iter().filter(|c| weight(c) == best).count());
        }
    }

    #[test]
    fn chi3_expansion_matches_configurations() {
        for k in 1..=3 {
            let a = chi_leading_polynomials(ChiVariant::Chi3, k).unwrap();
            let b = chi3_from_configurations(k).unwrap();
            assert_eq!(a.rho_orders, b.rho_orders);
            assert_eq!(a.numerator, b.numerator, "k={k}");
            assert_eq!(a.denominator, b.denominator, "k={k}");
        }
    }

    #[test]
    fn constrained_configurations_are_the_optimal_ones() {
        for v in [ChiVariant::Chi4, ChiVariant::Chi5] {
            for k in 1..=3 {
                let lp = chi_leading_polynomials(v, k).unwrap();
                let terms = |p: &MultiPoly| {
                    let mut t: Vec<String> = p.terms().map(|(m, c)| format!("{m:?}{c}")).collect();
                    t.sort();
                    t
                };
                for (side, poly) in [(Side::Numerator, &lp.numerator), (Side::Denominator, &lp.denominator)] {
                    let q = quadrangulate_aztec(k).unwrap();
                    let configs = constrained_configurations(v, k, side).unwrap();
                    let mask = if side == Side::Numerator { tree_mask } else { forest_mask };
                    let mut acc = HashMap::new();
                    for c in &configs {
                        *acc.entry(mask(c)).or_insert(0) += c.sign as i64;
                    }
                    assert_eq!(acc.len(), configs.len());
                    assert_eq!(terms(&mask_poly(&q, &acc)), terms(poly), "{v:?} k={k} {side:?}");
                }
            }
        }
    }
}

