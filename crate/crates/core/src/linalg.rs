//! Dense exact linear algebra over a [`Field`], plus fraction-free
//! determinants over the polynomial ring.

use crate::field::Field;
use crate::poly::MultiPoly;

pub type Matrix<F> = Vec<Vec<F>>;

pub fn zeros<F: Field>(r: usize, c: usize) -> Matrix<F> {
    vec![vec![F::zero(); c]; r]
}

pub fn identity<F: Field>(n: usize) -> Matrix<F> {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = F::one();
    }
    m
}

pub fn transpose<F: Field>(m: &Matrix<F>) -> Matrix<F> {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len()).map(|j| m.iter().map(|row| row[j].clone()).collect()).collect()
}

pub fn matmul<F: Field>(a: &Matrix<F>, b: &Matrix<F>) -> Matrix<F> {
    let n = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..n)
                .map(|j| {
                    row.iter().zip(b.iter()).fold(F::zero(), |acc, (x, brow)| {
                        if x.is_zero() {
                            acc
                        } else {
                            acc.add(&x.mul(&brow[j]))
                        }
                    })
                })
                .collect()
        })
        .collect()
}

/// Determinant by Gaussian elimination with leftmost nonzero pivot.
pub fn det<F: Field>(m: &Matrix<F>) -> F {
    let n = m.len();
    let mut a = m.clone();
    let mut d = F::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !a[r][c].is_zero()) else {
            return F::zero();
        };
        if p != c {
            a.swap(p, c);
            d = d.neg();
        }
        let piv = a[c][c].clone();
        d = d.mul(&piv);
        let inv = piv.inv().expect("nonzero pivot is invertible");
        for r in c + 1..n {
            if a[r][c].is_zero() {
                continue;
            }
            let f = a[r][c].mul(&inv);
            for k in c..n {
                let t = f.mul(&a[c][k]);
                a[r][k] = a[r][k].sub(&t);
            }
        }
    }
    d
}

/// Reduced row echelon form; returns pivot columns.
pub fn rref<F: Field>(a: &mut Matrix<F>) -> Vec<usize> {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(p, r);
        let inv = a[r][c].inv().expect("invertible pivot");
        for k in c..cols {
            a[r][k] = a[r][k].mul(&inv);
        }
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for k in c..cols {
                    let t = f.mul(&a[r][k]);
                    a[i][k] = a[i][k].sub(&t);
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank<F: Field>(m: &Matrix<F>) -> usize {
    let mut a = m.clone();
    rref(&mut a).len()
}

pub fn inverse<F: Field>(m: &Matrix<F>) -> Option<Matrix<F>> {
    let n = m.len();
    let mut a: Matrix<F> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { F::one() } else { F::zero() }));
            r
        })
        .collect();
    let piv = rref(&mut a);
    if piv.len() < n || piv[n - 1] != n - 1 {
        return None;
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Basis of the right nullspace `{v : m v = 0}`.
pub fn nullspace<F: Field>(m: &Matrix<F>, cols: usize) -> Vec<Vec<F>> {
    let mut a = m.clone();
    let piv = rref(&mut a);
    let free: Vec<usize> = (0..cols).filter(|c| !piv.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![F::zero(); cols];
            v[f] = F::one();
            for (r, &pc) in piv.iter().enumerate() {
                v[pc] = a[r][f].neg();
            }
            v
        })
        .collect()
}

/// Fraction-free (Bareiss) determinant over the polynomial ring.
pub fn det_bareiss(m: &[Vec<MultiPoly>]) -> MultiPoly {
    let n = m.len();
    if n == 0 {
        return MultiPoly::one();
    }
    let mut a: Vec<Vec<MultiPoly>> = m.to_vec();
    let mut sign = false;
    let mut prev = MultiPoly::one();
    for c in 0..n - 1 {
        let Some(p) = (c..n).find(|&r| !a[r][c].is_zero()) else {
            return MultiPoly::zero();
        };
        if p != c {
            a.swap(p, c);
            sign = !sign;
        }
        for i in c + 1..n {
            for j in c + 1..n {
                let t = a[i][j].mul(&a[c][c]).sub(&a[i][c].mul(&a[c][j]));
                a[i][j] = t.div_exact(&prev).expect("Bareiss division is exact");
            }
            a[i][c] = MultiPoly::zero();
        }
        prev = a[c][c].clone();
    }
    let d = a[n - 1][n - 1].clone();
    if sign {
        d.neg()
    } else {
        d
    }
}

/// Determinant by Laplace expansion over any commutative coefficient type,
/// used as an oracle for small sizes.
pub fn det_laplace<F: Field>(m: &Matrix<F>) -> F {
    let n = m.len();
    if n == 0 {
        return F::one();
    }
    let mut total = F::zero();
    let rest: Vec<usize> = (1..n).collect();
    for c in 0..n {
        if m[0][c].is_zero() {
            continue;
        }
        let minor: Matrix<F> = rest
            .iter()
            .map(|&r| (0..n).filter(|&k| k != c).map(|k| m[r][k].clone()).collect())
            .collect();
        let t = m[0][c].mul(&det_laplace(&minor));
        total = if c % 2 == 0 { total.add(&t) } else { total.sub(&t) };
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{random_rational, rat, Rational};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn det_matches_laplace() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..6 {
            let m: Matrix<Rational> =
                (0..n).map(|_| (0..n).map(|_| random_rational(&mut rng, 5, 3)).collect()).collect();
            assert_eq!(det(&m), det_laplace(&m));
            let inv = inverse(&m).unwrap();
            assert_eq!(matmul(&m, &inv), identity(n));
        }
    }

    #[test]
    fn nullspace_is_annihilated() {
        let m: Matrix<Rational> = vec![
            vec![rat(1, 1), rat(2, 1), rat(3, 1)],
            vec![rat(2, 1), rat(4, 1), rat(6, 1)],
        ];
        let ns = nullspace(&m, 3);
        assert_eq!(ns.len(), 2);
        for v in ns {
            let mv = matmul(&m, &v.iter().map(|x| vec![x.clone()]).collect());
            assert!(mv.iter().all(|r| r[0] == rat(0, 1)));
        }
    }

    #[test]
    fn bareiss_on_symbolic_matrix() {
        let x = |i| MultiPoly::var((i, 0));
        let m = vec![vec![x(0), x(1)], vec![x(2), x(3)]];
        assert_eq!(det_bareiss(&m), x(0).mul(&x(3)).sub(&x(1).mul(&x(2))));
    }
}
