//! Oriented dimer partition functions, Kasteleyn determinants and the ratio
//! function `Y(G, a)`.

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cwgraph::{CwGraph, KasteleynOrientation, Weights};
use crate::error::{size_guard, DskpError, Result};
use crate::field::Field;
use crate::linalg::{det, det_bareiss, Matrix};
use crate::poly::{Monomial, MultiPoly, RationalFunction, Var};
use crate::projective::ProjectiveValue;

pub const MATCHING_VERTEX_LIMIT: usize = 60;
pub const BAREISS_VERTEX_LIMIT: usize = 12;
const CHART_RETRIES: usize = 5;

/// All perfect matchings as sorted edge lists, in lexicographic order.
pub fn enumerate_matchings(g: &CwGraph) -> Result<Vec<Vec<usize>>> {
    size_guard("vertices for matching enumeration", g.vertices.len(), MATCHING_VERTEX_LIMIT)?;
    let whites = g.whites();
    if whites.len() != g.blacks().len() {
        return Ok(Vec::new());
    }
    let mut by_white: Vec<Vec<usize>> = vec![Vec::new(); g.vertices.len()];
    for (n, e) in g.edges.iter().enumerate() {
        by_white[e.w].push(n);
    }
    let mut out = Vec::new();
    let mut used = vec![false; g.vertices.len()];
    let mut cur = Vec::new();
    fn rec(
        g: &CwGraph,
        whites: &[usize],
        by_white: &[Vec<usize>],
        idx: usize,
        used: &mut [bool],
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if idx == whites.len() {
            let mut m = cur.clone();
            m.sort_unstable();
            out.push(m);
            return;
        }
        for &e in &by_white[whites[idx]] {
            let b = g.edges[e].b;
            if !used[b] {
                used[b] = true;
                cur.push(e);
                rec(g, whites, by_white, idx + 1, used, cur, out);
                cur.pop();
                used[b] = false;
            }
        }
    }
    rec(g, &whites, &by_white, 0, &mut used, &mut cur, &mut out);
    out.sort();
    Ok(out)
}

/// Number of oriented dimer configurations, `sum_M 2^|M|`.
pub fn oriented_configuration_count(g: &CwGraph) -> Result<BigInt> {
    Ok(enumerate_matchings(g)?.iter().map(|m| BigInt::from(1) << m.len()).sum())
}

fn weight<F: Clone>(a: &Weights<F>, v: Var) -> Result<F> {
    a.get(&v).cloned().ok_or_else(|| DskpError::Invalid(format!("missing weight for face {v:?}")))
}

/// `phi_(w,b) (a_f(w,b) - a_f(b,w))`.
fn edge_term<F: Field>(g: &CwGraph, a: &Weights<F>, phi: &KasteleynOrientation, e: usize) -> Result<F> {
    let ed = &g.edges[e];
    let d = weight(a, g.faces[ed.right_wb].label)?.sub(&weight(a, g.faces[ed.right_bw].label)?);
    Ok(if phi.phi[e] < 0 { d.neg() } else { d })
}

/// `Z(G, a, phi)` by summing over perfect matchings.
pub fn z_oriented<F: Field>(g: &CwGraph, a: &Weights<F>, phi: &KasteleynOrientation) -> Result<F> {
    let mut z = F::zero();
    for m in enumerate_matchings(g)? {
        let mut t = F::one();
        for &e in &m {
            t = t.mul(&edge_term(g, a, phi, e)?);
        }
        z = z.add(&t);
    }
    Ok(z)
}

fn edge_poly(g: &CwGraph, phi: &KasteleynOrientation, e: usize) -> MultiPoly {
    let ed = &g.edges[e];
    let d = MultiPoly::var(g.faces[ed.right_wb].label).sub(&MultiPoly::var(g.faces[ed.right_bw].label));
    if phi.phi[e] < 0 {
        d.neg()
    } else {
        d
    }
}

/// Symbolic `Z(G, a, phi)` in the face variables, cancelling as it goes.
pub fn z_oriented_symbolic(g: &CwGraph, phi: &KasteleynOrientation) -> Result<MultiPoly> {
    let edge_polys: Vec<MultiPoly> = (0..g.edges.len()).map(|e| edge_poly(g, phi, e)).collect();
    let mut z = MultiPoly::zero();
    for m in enumerate_matchings(g)? {
        let mut t = MultiPoly::one();
        for &e in &m {
            t = t.mul(&edge_polys[e]);
        }
        z.add_assign(&t);
    }
    Ok(z)
}

/// `K_{w,b} = a_f(w,b) - a_f(b,w)`, rows in white order, columns in black order.
pub fn kasteleyn_matrix<F: Field>(g: &CwGraph, a: &Weights<F>) -> Result<Matrix<F>> {
    let whites = g.whites();
    let blacks = g.blacks();
    if whites.len() != blacks.len() {
        return Err(DskpError::Invalid("unbalanced bipartite graph".into()));
    }
    let mut row = vec![usize::MAX; g.vertices.len()];
    let mut col = vec![usize::MAX; g.vertices.len()];
    whites.iter().enumerate().for_each(|(n, &w)| row[w] = n);
    blacks.iter().enumerate().for_each(|(n, &b)| col[b] = n);
    let mut k = vec![vec![F::zero(); blacks.len()]; whites.len()];
    for ed in &g.edges {
        let v = weight(a, g.faces[ed.right_wb].label)?.sub(&weight(a, g.faces[ed.right_bw].label)?);
        k[row[ed.w]][col[ed.b]] = v;
    }
    Ok(k)
}

/// `det K`.
pub fn z_det<F: Field>(g: &CwGraph, a: &Weights<F>) -> Result<F> {
    Ok(det(&kasteleyn_matrix(g, a)?))
}

/// `det K` over the polynomial ring by fraction-free elimination.
pub fn z_det_symbolic(g: &CwGraph) -> Result<MultiPoly> {
    size_guard("vertices for symbolic determinant", g.vertices.len(), BAREISS_VERTEX_LIMIT)?;
    let vars: Weights<MultiPoly> = g.faces.iter().map(|f| (f.label, MultiPoly::var(f.label))).collect();
    let whites = g.whites();
    let blacks = g.blacks();
    let mut k = vec![vec![MultiPoly::zero(); blacks.len()]; whites.len()];
    for ed in &g.edges {
        let r = whites.iter().position(|&w| w == ed.w).unwrap();
        let c = blacks.iter().position(|&b| b == ed.b).unwrap();
        k[r][c] = vars[&g.faces[ed.right_wb].label].sub(&vars[&g.faces[ed.right_bw].label]);
    }
    Ok(det_bareiss(&k))
}

/// The sign `eps` with `Z(G, a, phi) = eps det K`, found at seeded random
/// weights.
pub fn epsilon(g: &CwGraph, phi: &KasteleynOrientation) -> Result<i8> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xe95);
    for _ in 0..8 {
        let a: Weights<crate::field::Rational> = g
            .faces
            .iter()
            .map(|f| (f.label, crate::field::random_rational(&mut rng, 50, 7)))
            .collect();
        let d = z_det(g, &a)?;
        if d.is_zero() {
            continue;
        }
        let z = z_oriented(g, &a, phi)?;
        if z == d {
            return Ok(1);
        }
        if z == d.neg() {
            return Ok(-1);
        }
        return Err(DskpError::Invalid("oriented partition function is not +-det K".into()));
    }
    Err(DskpError::Singular("det K vanished at every sample".into()))
}

/// Exponents of the prefactor `C(G, a)` without the power of `i`.
pub fn prefactor_monomial(g: &CwGraph) -> Monomial {
    Monomial::from_pairs(
        (0..g.faces.len())
            .map(|f| {
                let d = g.face_degree(f) as i32;
                let e = if g.faces[f].inner { d / 2 - 1 } else { (d + 1) / 2 };
                (g.faces[f].label, e)
            })
            .collect(),
    )
}

/// `i^|V|`, real because `|V|` is even.
pub fn prefactor_sign(g: &CwGraph) -> Result<i64> {
    let n = g.vertices.len();
    if n % 2 != 0 {
        return Err(DskpError::Invalid("odd number of vertices".into()));
    }
    Ok(if (n / 2) % 2 == 0 { 1 } else { -1 })
}

/// `C(G, a) = i^|V| prod_inner a^(d/2-1) prod_open a^ceil(d/2)`.
pub fn prefactor<F: Field>(g: &CwGraph, a: &Weights<F>) -> Result<F> {
    let s = F::from_i64(prefactor_sign(g)?);
    let m = prefactor_monomial(g)
        .eval(&|v: Var| a.get(&v).cloned().unwrap_or_else(F::zero))
        .ok_or_else(|| DskpError::Singular("prefactor needs nonzero weights".into()))?;
    Ok(s.mul(&m))
}

/// `Y = C Z(a^-1) / Z(a)` as numerator and denominator polynomials.
pub fn ratio_function_symbolic(g: &CwGraph, phi: &KasteleynOrientation) -> Result<RationalFunction> {
    let z = z_oriented_symbolic(g, phi)?;
    let num = z
        .invert_vars()
        .mul_monomial(&prefactor_monomial(g))
        .scale(&BigInt::from(prefactor_sign(g)?));
    if num.min_exponent() < 0 {
        return Err(DskpError::Invalid("prefactor does not clear the inverse weights".into()));
    }
    RationalFunction::new(num, z).ok_or_else(|| DskpError::Singular("Z vanishes identically".into()))
}

/// `Y(G, a)` for finite nonzero weights, via two determinants.
fn y_finite<F: Field>(g: &CwGraph, a: &Weights<F>) -> Result<ProjectiveValue<F>> {
    let inv: Weights<F> = a
        .iter()
        .map(|(&v, x)| x.inv().map(|y| (v, y)))
        .collect::<Option<_>>()
        .ok_or_else(|| DskpError::Singular("zero weight".into()))?;
    let num = prefactor(g, a)?.mul(&z_det(g, &inv)?);
    let den = z_det(g, a)?;
    Ok(ProjectiveValue::from_homogeneous(num, den)?)
}

fn random_mobius<F: Field>(rng: &mut ChaCha8Rng) -> [F; 4] {
    loop {
        let m: [i64; 4] = [rng.gen_range(-9..=9), rng.gen_range(-9..=9), rng.gen_range(-9..=9), rng.gen_range(-9..=9)];
        if m[0] * m[3] - m[1] * m[2] != 0 {
            return m.map(F::from_i64);
        }
    }
}

/// `Y(G, a)`. Weights that are `0` or `inf`, or a vanishing `Z`, trigger a
/// seeded Moebius change of chart.
pub fn ratio_function_y<F: Field>(g: &CwGraph, a: &Weights<ProjectiveValue<F>>) -> Result<ProjectiveValue<F>> {
    let direct: Option<Weights<F>> = a
        .iter()
        .map(|(&v, x)| match x.as_finite() {
            Some(y) if !y.is_zero() => Some((v, y.clone())),
            _ => None,
        })
        .collect();
    if let Some(fa) = direct {
        if let Ok(y) = y_finite(g, &fa) {
            return Ok(y);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xc4a27);
    for _ in 0..CHART_RETRIES {
        let m: [F; 4] = random_mobius(&mut rng);
        let moved: Option<Weights<F>> = a
            .iter()
            .map(|(&v, x)| match x.mobius(&m) {
                Ok(ProjectiveValue::Finite(y)) if !y.is_zero() => Some((v, y)),
                _ => None,
            })
            .collect();
        let Some(moved) = moved else { continue };
        if let Ok(y) = y_finite(g, &moved) {
            return Ok(y.mobius(&crate::projective::mobius_inverse(&m))?);
        }
    }
    Err(DskpError::Singular("Y is indeterminate in every tried chart".into()))
}

/// Speyer's dKP solution `C_dim(G, a) Z_dim(G, a)`.
pub fn dkp_solution<F: Field>(g: &CwGraph, a: &Weights<F>) -> Result<ProjectiveValue<F>> {
    let mut z = F::zero();
    for m in enumerate_matchings(g)? {
        let mut t = F::one();
        for &e in &m {
            let ed = &g.edges[e];
            let p = weight(a, g.faces[ed.right_wb].label)?.mul(&weight(a, g.faces[ed.right_bw].label)?);
            t = t.mul(&p);
        }
        z = z.add(&t.inv().ok_or_else(|| DskpError::Singular("zero weight in dKP".into()))?);
    }
    let c = prefactor_monomial(g)
        .eval(&|v: Var| a.get(&v).cloned().unwrap_or_else(F::zero))
        .ok_or_else(|| DskpError::Singular("zero weight in dKP".into()))?;
    Ok(ProjectiveValue::Finite(c.mul(&z)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cwgraph::{aztec, aztec_apex, build_cw_graph, kasteleyn_orientation};
    use crate::field::{random_rational, rat, Rational};
    use crate::lattice::{evolve_at, HeightFunction, InitialData, Recurrence};

    type P = ProjectiveValue<Rational>;

    fn weights_from(g: &CwGraph, mut f: impl FnMut(Var) -> Rational) -> Weights<Rational> {
        g.faces.iter().map(|x| (x.label, f(x.label))).collect()
    }

    #[test]
    fn matching_counts() {
        let counts: Vec<usize> = (1..=3).map(|k| enumerate_matchings(&aztec(k).unwrap()).unwrap().len()).collect();
        assert_eq!(counts, vec![2, 8, 64]);
        let oriented: Vec<BigInt> = (1..=3).map(|k| oriented_configuration_count(&aztec(k).unwrap()).unwrap()).collect();
        assert_eq!(oriented, vec![BigInt::from(8), BigInt::from(512), BigInt::from(262144)]);
    }

    #[test]
    fn symbolic_counts_small() {
        for (k, n) in [(1, 6), (2, 220)] {
            let g = aztec(k).unwrap();
            let phi = kasteleyn_orientation(&g).unwrap();
            let z = z_oriented_symbolic(&g, &phi).unwrap();
            assert_eq!(z.monomial_count(), n);
            assert!(z.max_exponent() <= 1);
            let d = z_det_symbolic(&g).unwrap();
            assert!(d == z || d == z.neg());
        }
    }

    #[test]
    fn det_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 1..=3 {
            let g = aztec(k).unwrap();
            let phi = kasteleyn_orientation(&g).unwrap();
            let eps = epsilon(&g, &phi).unwrap();
            for _ in 0..3 {
                let a = weights_from(&g, |_| random_rational(&mut rng, 20, 5));
                let z = z_oriented(&g, &a, &phi).unwrap();
                let d = z_det(&g, &a).unwrap();
                assert_eq!(z, if eps > 0 { d } else { d.neg() });
            }
        }
    }

    #[test]
    fn constant_weights_kill_z() {
        let g = aztec(2).unwrap();
        let phi = kasteleyn_orientation(&g).unwrap();
        let a = weights_from(&g, |_| rat(3, 1));
        assert_eq!(z_oriented(&g, &a, &phi).unwrap(), rat(0, 1));
    }

    #[test]
    fn y_matches_evolve_on_aztec() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for k in 1..=3usize {
            let g = aztec(k).unwrap();
            let h = HeightFunction::flat(k as i32 + 2);
            let data = InitialData::from_fn(h, |_, _| P::Finite(random_rational(&mut rng, 30, 4)));
            let a: Weights<P> = g.faces.iter().map(|f| (f.label, data.get(f.label.0, f.label.1).unwrap().clone())).collect();
            let y = ratio_function_y(&g, &a).unwrap();
            let x = evolve_at(&data, Recurrence::Dskp, aztec_apex(k)).unwrap();
            assert_eq!(y, x, "k={k}");
        }
    }

    #[test]
    fn y_matches_evolve_on_wrench_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h = HeightFunction::bump(6);
        let data = InitialData::from_fn(h.clone(), |_, _| P::Finite(random_rational(&mut rng, 30, 4)));
        let p = crate::lattice::LatticePoint::new(0, 0, 4);
        let g = build_cw_graph(&h, p).unwrap();
        let a: Weights<P> = g.faces.iter().map(|f| (f.label, data.get(f.label.0, f.label.1).unwrap().clone())).collect();
        assert_eq!(ratio_function_y(&g, &a).unwrap(), evolve_at(&data, Recurrence::Dskp, p).unwrap());
    }

    #[test]
    fn y_with_infinite_weight_uses_chart_change() {
        let h = HeightFunction::flat(3);
        let data = InitialData::from_fn(h, |i, j| if (i, j) == (1, 0) { P::Infinity } else { P::int((2 * i + 3 * j + 7) as i64) });
        let g = aztec(1).unwrap();
        let a: Weights<P> = g.faces.iter().map(|f| (f.label, data.get(f.label.0, f.label.1).unwrap().clone())).collect();
        assert_eq!(ratio_function_y(&g, &a).unwrap(), evolve_at(&data, Recurrence::Dskp, aztec_apex(1)).unwrap());
    }

    #[test]
    fn dkp_solution_small_cases() {
        let g = aztec(1).unwrap();
        assert_eq!(dkp_solution(&g, &weights_from(&g, |_| rat(1, 1))).unwrap(), P::int(2));
        assert_eq!(dkp_solution(&g, &weights_from(&g, |_| rat(2, 1))).unwrap(), P::int(4));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for k in 2..=3usize {
            let g = aztec(k).unwrap();
            let h = HeightFunction::flat(k as i32 + 2);
            let data = InitialData::from_fn(h, |_, _| P::Finite(num_traits::Signed::abs(&random_rational(&mut rng, 9, 4)) + rat(1, 1)));
            let a = weights_from(&g, |v| data.get(v.0, v.1).unwrap().as_finite().unwrap().clone());
            assert_eq!(dkp_solution(&g, &a).unwrap(), evolve_at(&data, Recurrence::Dkp, aztec_apex(k)).unwrap());
        }
    }
}
