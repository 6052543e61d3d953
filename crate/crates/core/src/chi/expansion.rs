//! Low-order expansion of `det(M0 + X E)` around `x = 0`, where `X` is the
//! diagonal of face variables. Arithmetic is modulo a Mersenne prime in the
//! ring where every `x_f^2` vanishes, so monomials are bit masks.

use std::collections::HashMap;

use crate::error::{DskpError, Result};

pub const P: u64 = (1 << 61) - 1;
const INF: i64 = 1 << 50;

fn mul(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % P as u128) as u64
}

fn add(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= P {
        s - P
    } else {
        s
    }
}

fn sub(a: u64, b: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + P - b
    }
}

fn pow(mut a: u64, mut e: u64) -> u64 {
    let mut r = 1;
    while e > 0 {
        if e & 1 == 1 {
            r = mul(r, a);
        }
        a = mul(a, a);
        e >>= 1;
    }
    r
}

fn inv(a: u64) -> u64 {
    pow(a, P - 2)
}

pub fn mul_mod(a: u64, b: u64) -> u64 {
    mul(a, b)
}

pub fn sub_mod(a: u64, b: u64) -> u64 {
    sub(a, b)
}

pub fn from_i64(x: i64) -> u64 {
    if x >= 0 {
        x as u64 % P
    } else {
        sub(0, (-x) as u64 % P)
    }
}

/// Symmetric residue; exact for integers of absolute value below `P / 2`.
pub fn to_i64(x: u64) -> i64 {
    if x > P / 2 {
        -((P - x) as i64)
    } else {
        x as i64
    }
}

/// Minimum-cost perfect assignment on a square matrix; returns row and
/// column potentials with `u[i] + v[j] <= cost[i][j]`, tight on the optimum.
pub fn assignment_potentials(cost: &[Vec<i64>]) -> Result<(Vec<i64>, Vec<i64>)> {
    let n = cost.len();
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let total: i64 = (1..=n).map(|j| cost[p[j] - 1][j - 1]).sum();
    if total >= INF {
        return Err(DskpError::Singular("no finite assignment".into()));
    }
    Ok((u[1..].to_vec(), v[1..].to_vec()))
}

/// Leading `epsilon` form of a matrix whose entry `(i, j)` is
/// `sign * epsilon^{val}` times `(1 + x_i)` when `weighted[j]`.
/// Returns `(M0, E)`: constant parts and coefficients of `x_i`.
pub fn initial_form(signs: &[Vec<i64>], val: &[i64], weighted: &[bool]) -> Result<(Vec<Vec<i64>>, Vec<Vec<i64>>)> {
    let n = signs.len();
    let cost: Vec<Vec<i64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match (signs[i][j], weighted[j]) {
                    (0, _) => INF,
                    (_, true) => val[i],
                    (_, false) => 0,
                })
                .collect()
        })
        .collect();
    let (u, v) = assignment_potentials(&cost)?;
    let mut m0 = vec![vec![0; n]; n];
    let mut e = vec![vec![0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if cost[i][j] < INF && u[i] + v[j] == cost[i][j] {
                m0[i][j] = signs[i][j];
                if weighted[j] {
                    e[i][j] = signs[i][j];
                }
            }
        }
    }
    Ok((m0, e))
}

/// Element of the truncated ring: mask of variables to coefficient.
type Poly = HashMap<u64, u64>;

fn deg(m: u64) -> usize {
    m.count_ones() as usize
}

fn poly_mul(a: &Poly, b: &Poly, cap: usize) -> Poly {
    let mut r = Poly::new();
    for (&ma, &ca) in a {
        let da = deg(ma);
        for (&mb, &cb) in b {
            if ma & mb != 0 || da + deg(mb) > cap {
                continue;
            }
            let cur = r.entry(ma | mb).or_insert(0);
            *cur = add(*cur, mul(ca, cb));
        }
    }
    r.retain(|_, x| *x != 0);
    r
}

fn poly_sub_assign(a: &mut Poly, b: &Poly) {
    for (&m, &x) in b {
        let cur = a.entry(m).or_insert(0);
        *cur = sub(*cur, x);
    }
    a.retain(|_, x| *x != 0);
}

fn poly_scale(a: &Poly, s: u64) -> Poly {
    a.iter().map(|(&m, &x)| (m, mul(x, s))).filter(|(_, x)| *x != 0).collect()
}

fn constant(a: &Poly) -> u64 {
    a.get(&0).copied().unwrap_or(0)
}

/// Inverse of a unit by the geometric series up to `cap`.
fn poly_inverse(u: &Poly, cap: usize) -> Poly {
    let c = inv(constant(u));
    let mut nil = poly_scale(u, c);
    nil.remove(&0);
    let neg: Poly = nil.iter().map(|(&m, &x)| (m, sub(0, x))).collect();
    let mut term: Poly = HashMap::from([(0u64, 1u64)]);
    let mut acc = term.clone();
    for _ in 0..cap {
        term = poly_mul(&term, &neg, cap);
        if term.is_empty() {
            break;
        }
        for (&m, &x) in &term {
            let cur = acc.entry(m).or_insert(0);
            *cur = add(*cur, x);
        }
    }
    acc.retain(|_, x| *x != 0);
    poly_scale(&acc, c)
}

/// Homogeneous parts of `det(M0 + X E)` up to degree `corank + extra`,
/// where `corank` is that of `M0`. Coefficients are residues modulo [`P`].
pub struct LowOrder {
    /// `parts[d]` is the degree `d` part.
    pub parts: Vec<Poly>,
}

fn rank_mod_p(m: &[Vec<i64>]) -> usize {
    let mut a: Vec<Vec<u64>> = m.iter().map(|r| r.iter().map(|&x| from_i64(x)).collect()).collect();
    let (rows, cols) = (a.len(), a.first().map_or(0, |r| r.len()));
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&r| a[r][c] != 0) else { continue };
        a.swap(rank, p);
        let pinv = inv(a[rank][c]);
        for r in 0..rows {
            if r != rank && a[r][c] != 0 {
                let f = mul(a[r][c], pinv);
                for k in c..cols {
                    let t = mul(f, a[rank][k]);
                    a[r][k] = sub(a[r][k], t);
                }
            }
        }
        rank += 1;
    }
    rank
}

pub fn corank(m0: &[Vec<i64>]) -> usize {
    m0.len() - rank_mod_p(m0)
}

fn det_mod_p(mut a: Vec<Vec<u64>>) -> u64 {
    let n = a.len();
    let mut d = 1;
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| a[r][c] != 0) else { return 0 };
        if p != c {
            a.swap(p, c);
            d = sub(0, d);
        }
        d = mul(d, a[c][c]);
        let pinv = inv(a[c][c]);
        for r in c + 1..n {
            if a[r][c] != 0 {
                let f = mul(a[r][c], pinv);
                for k in c..n {
                    let t = mul(f, a[c][k]);
                    a[r][k] = sub(a[r][k], t);
                }
            }
        }
    }
    d
}

/// Coefficients in `lambda` of `det(M0 + lambda Y E)` for `Y = diag(y)`.
pub fn along_line(m0: &[Vec<i64>], e: &[Vec<i64>], y: &[u64]) -> Vec<u64> {
    let n = m0.len();
    let ys: Vec<u64> = (0..=n as u64)
        .map(|l| {
            let a = (0..n)
                .map(|i| (0..n).map(|j| add(from_i64(m0[i][j]), mul(mul(l, y[i]), from_i64(e[i][j])))).collect())
                .collect();
            det_mod_p(a)
        })
        .collect();
    interpolate_mod_p(&ys)
}

/// Coefficients of the polynomial through `(l, ys[l])`, `l = 0, 1, ...`.
pub fn interpolate_mod_p(ys: &[u64]) -> Vec<u64> {
    let n = ys.len();
    let mut dd = ys.to_vec();
    for lvl in 1..n {
        let iv = inv(lvl as u64);
        for i in (lvl..n).rev() {
            dd[i] = mul(sub(dd[i], dd[i - 1]), iv);
        }
    }
    let mut coef = vec![0u64; n];
    for i in (0..n).rev() {
        let mut next = vec![0u64; n];
        for d in 0..n {
            if coef[d] == 0 {
                continue;
            }
            if d + 1 < n {
                next[d + 1] = add(next[d + 1], coef[d]);
            }
            next[d] = sub(next[d], mul(coef[d], i as u64));
        }
        next[0] = add(next[0], dd[i]);
        coef = next;
    }
    coef
}

/// Lowest index with a nonzero coefficient.
pub fn order(coefs: &[u64]) -> Option<usize> {
    coefs.iter().position(|&c| c != 0)
}

pub fn low_order_parts(m0: &[Vec<i64>], e: &[Vec<i64>], extra: usize) -> Result<LowOrder> {
    let n = m0.len();
    if n > 64 {
        return Err(DskpError::Invalid("too many rows for bit masks".into()));
    }
    // Entries of the Schur block start in degree one, so `extra + 1` suffices.
    let cap = extra + 1;
    let mut m: Vec<Vec<Poly>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut x = Poly::new();
                    if m0[i][j] != 0 {
                        x.insert(0, from_i64(m0[i][j]));
                    }
                    if e[i][j] != 0 {
                        x.insert(1u64 << i, from_i64(e[i][j]));
                    }
                    x
                })
                .collect()
        })
        .collect();
    let mut rows: Vec<usize> = (0..n).collect();
    let mut cols: Vec<usize> = (0..n).collect();
    let mut pivot_rows = Vec::new();
    let mut pivot_cols = Vec::new();
    let mut det_a: Poly = HashMap::from([(0u64, 1u64)]);
    loop {
        // Markowitz choice among unit entries.
        let row_nnz: Vec<usize> = rows.iter().map(|&i| cols.iter().filter(|&&j| !m[i][j].is_empty()).count()).collect();
        let col_nnz: Vec<usize> = cols.iter().map(|&j| rows.iter().filter(|&&i| !m[i][j].is_empty()).count()).collect();
        let mut best: Option<(usize, usize, usize)> = None;
        for (ri, &i) in rows.iter().enumerate() {
            for (ci, &j) in cols.iter().enumerate() {
                if constant(&m[i][j]) != 0 {
                    let score = (row_nnz[ri] - 1) * (col_nnz[ci] - 1);
                    if best.map_or(true, |b| score < b.2) {
                        best = Some((ri, ci, score));
                    }
                }
            }
        }
        let Some((ri, ci, _)) = best else { break };
        let (pi, pj) = (rows.remove(ri), cols.remove(ci));
        let piv = m[pi][pj].clone();
        det_a = poly_mul(&det_a, &piv, extra);
        let pinv = poly_inverse(&piv, cap);
        let prow: Vec<(usize, Poly)> =
            cols.iter().filter(|&&j| !m[pi][j].is_empty()).map(|&j| (j, m[pi][j].clone())).collect();
        for &i in &rows {
            if m[i][pj].is_empty() {
                continue;
            }
            let factor = poly_mul(&m[i][pj], &pinv, cap);
            for (j, x) in &prow {
                let t = poly_mul(&factor, x, cap);
                poly_sub_assign(&mut m[i][*j], &t);
            }
        }
        pivot_rows.push(pi);
        pivot_cols.push(pj);
    }
    let r = rows.len();
    let perm_sign = |order: Vec<usize>| -> u64 {
        let mut count = 0usize;
        for a in 0..order.len() {
            for b in a + 1..order.len() {
                if order[a] > order[b] {
                    count += 1;
                }
            }
        }
        if count % 2 == 0 {
            1
        } else {
            P - 1
        }
    };
    let sign = mul(
        perm_sign(pivot_rows.iter().chain(&rows).copied().collect()),
        perm_sign(pivot_cols.iter().chain(&cols).copied().collect()),
    );
    let det_a = poly_scale(&det_a, sign);

    // Laplace over column subsets of the nilpotent block, degrees up to `i + extra`.
    let mut layer: HashMap<u32, Poly> = HashMap::from([(0u32, HashMap::from([(0u64, 1u64)]))]);
    for (step, &i) in rows.iter().enumerate() {
        let lim = step + 1 + extra;
        let mut next: HashMap<u32, Poly> = HashMap::new();
        for (s, acc) in &layer {
            for (c, &j) in cols.iter().enumerate() {
                if s >> c & 1 == 1 || m[i][j].is_empty() {
                    continue;
                }
                let mut t = poly_mul(acc, &m[i][j], lim);
                if (s >> (c + 1)).count_ones() % 2 == 1 {
                    t = poly_scale(&t, P - 1);
                }
                let slot = next.entry(s | (1 << c)).or_default();
                for (mk, x) in t {
                    let cur = slot.entry(mk).or_insert(0);
                    *cur = add(*cur, x);
                }
            }
        }
        for p in next.values_mut() {
            p.retain(|_, x| *x != 0);
        }
        layer = next;
    }
    let block = layer.remove(&((1u32 << r) - 1)).unwrap_or_default();
    let full = poly_mul(&block, &det_a, r + extra);
    let mut parts = vec![Poly::new(); r + extra + 1];
    for (mk, x) in full {
        parts[deg(mk)].insert(mk, x);
    }
    Ok(LowOrder { parts })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force multilinear expansion by row choices.
    fn brute(m0: &[Vec<i64>], e: &[Vec<i64>]) -> HashMap<u64, i64> {
        let n = m0.len();
        let mut out = HashMap::new();
        for mask in 0u64..(1 << n) {
            let rows: Vec<Vec<i64>> = (0..n).map(|i| if mask >> i & 1 == 1 { e[i].clone() } else { m0[i].clone() }).collect();
            let d = det_i64(&rows);
            if d != 0 {
                out.insert(mask, d);
            }
        }
        out
    }

    fn det_i64(m: &[Vec<i64>]) -> i64 {
        let n = m.len();
        if n == 0 {
            return 1;
        }
        (0..n)
            .map(|j| {
                if m[0][j] == 0 {
                    return 0;
                }
                let minor: Vec<Vec<i64>> =
                    m[1..].iter().map(|r| r.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, &x)| x).collect()).collect();
                let s = if j % 2 == 0 { 1 } else { -1 };
                s * m[0][j] * det_i64(&minor)
            })
            .sum()
    }

    #[test]
    fn hungarian_small() {
        let cost = vec![vec![4, 1, 3], vec![2, 0, 5], vec![3, 2, 2]];
        let (u, v) = assignment_potentials(&cost).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!(u[i] + v[j] <= cost[i][j]);
            }
        }
        assert_eq!(u.iter().sum::<i64>() + v.iter().sum::<i64>(), 5);
    }

    #[test]
    fn matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for trial in 0..40 {
            let n = 6;
            let rank = 2 + trial % 4;
            // M0 of low rank as a product of random integer factors.
            let a: Vec<Vec<i64>> = (0..n).map(|_| (0..rank).map(|_| rng.gen_range(-2..=2)).collect()).collect();
            let b: Vec<Vec<i64>> = (0..rank).map(|_| (0..n).map(|_| rng.gen_range(-2..=2)).collect()).collect();
            let m0: Vec<Vec<i64>> =
                (0..n).map(|i| (0..n).map(|j| (0..rank).map(|t| a[i][t] * b[t][j]).sum()).collect()).collect();
            let e: Vec<Vec<i64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1..=1)).collect()).collect();
            let lo = low_order_parts(&m0, &e, 2).unwrap();
            let bf = brute(&m0, &e);
            let part = |d: usize| -> HashMap<u64, i64> {
                bf.iter().filter(|(m, _)| m.count_ones() as usize == d).map(|(&m, &c)| (m, c)).collect()
            };
            let conv = |h: &HashMap<u64, u64>| -> HashMap<u64, i64> { h.iter().map(|(&m, &c)| (m, to_i64(c))).collect() };
            for d in 0..lo.parts.len() {
                assert_eq!(conv(&lo.parts[d]), part(d), "trial {trial} degree {d}");
            }
        }
    }
}
