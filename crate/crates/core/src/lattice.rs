//! The octahedral-tetrahedral lattice, height functions, initial data and
//! forward iteration of the octahedron recurrences.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DskpError, ParseError, Result};
use crate::field::{Field, GaussianRational};
use crate::projective::{parse_projective_gaussian, ProjectiveValue};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint {
    pub i: i32,
    pub j: i32,
    pub k: i32,
}

impl LatticePoint {
    pub fn new(i: i32, j: i32, k: i32) -> Self {
        LatticePoint { i, j, k }
    }

    pub fn in_lattice(&self) -> bool {
        (self.i + self.j + self.k).rem_euclid(2) == 0
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Recurrence {
    Dkp,
    Dskp,
    Chi3,
    Chi4,
    Chi5,
}

impl FromStr for Recurrence {
    type Err = ParseError;
    fn from_str(s: &str) -> std::result::Result<Self, ParseError> {
        match s.to_ascii_lowercase().as_str() {
            "dkp" | "chi1" => Ok(Recurrence::Dkp),
            "dskp" | "chi2" => Ok(Recurrence::Dskp),
            "chi3" => Ok(Recurrence::Chi3),
            "chi4" => Ok(Recurrence::Chi4),
            "chi5" => Ok(Recurrence::Chi5),
            _ => Err(ParseError::Malformed(format!("unknown recurrence `{s}`"))),
        }
    }
}

impl fmt::Display for Recurrence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Recurrence::Dkp => "dkp",
            Recurrence::Dskp => "dskp",
            Recurrence::Chi3 => "chi3",
            Recurrence::Chi4 => "chi4",
            Recurrence::Chi5 => "chi5",
        };
        f.write_str(s)
    }
}

type PV<F> = ProjectiveValue<F>;

fn singular(msg: &str) -> DskpError {
    DskpError::Singular(msg.to_string())
}

fn bracket<F: Field>(a: &PV<F>, b: &PV<F>) -> F {
    let (az, aw) = a.homogeneous();
    let (bz, bw) = b.homogeneous();
    az.mul(&bw).sub(&aw.mul(&bz))
}

/// Solves the dSKP relation for `x_{e3}`.
pub fn dskp_step<F: Field>(x1: &PV<F>, xm1: &PV<F>, x2: &PV<F>, xm2: &PV<F>, xm3: &PV<F>) -> Result<PV<F>> {
    if x1 == x2 || x2 == xm1 || xm1 == xm2 || xm2 == x1 {
        return Err(singular("degenerate octahedron"));
    }
    let p = bracket(xm3, x2).mul(&bracket(xm2, x1));
    let q = bracket(x2, xm1).mul(&bracket(x1, xm3));
    let (zm1, wm1) = xm1.homogeneous();
    let (zm2, wm2) = xm2.homogeneous();
    let z = p.mul(&zm1).sub(&q.mul(&zm2));
    let w = p.mul(&wm1).sub(&q.mul(&wm2));
    PV::from_homogeneous(z, w).map_err(|_| singular("dSKP solve is indeterminate"))
}

/// `x_{e3} x_{-e3} = x_{e1} x_{-e1} + x_{e2} x_{-e2}`.
pub fn dkp_step<F: Field>(x1: &PV<F>, xm1: &PV<F>, x2: &PV<F>, xm2: &PV<F>, xm3: &PV<F>) -> Result<PV<F>> {
    let s = x1.mul(xm1)?.add(&x2.mul(xm2)?)?;
    s.div(xm3).map_err(|_| singular("dKP solve is indeterminate"))
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ChiVariant {
    Chi3,
    Chi4,
    Chi5,
}

impl ChiVariant {
    pub fn recurrence(self) -> Recurrence {
        match self {
            ChiVariant::Chi3 => Recurrence::Chi3,
            ChiVariant::Chi4 => Recurrence::Chi4,
            ChiVariant::Chi5 => Recurrence::Chi5,
        }
    }
}

impl FromStr for ChiVariant {
    type Err = ParseError;
    fn from_str(s: &str) -> std::result::Result<Self, ParseError> {
        match s.parse::<Recurrence>()? {
            Recurrence::Chi3 => Ok(ChiVariant::Chi3),
            Recurrence::Chi4 => Ok(ChiVariant::Chi4),
            Recurrence::Chi5 => Ok(ChiVariant::Chi5),
            _ => Err(ParseError::Malformed(format!("not a chi variant `{s}`"))),
        }
    }
}

fn finite<'a, F: Field>(x: &'a PV<F>) -> Result<&'a F> {
    x.as_finite().ok_or_else(|| singular("infinite input"))
}

fn fdiv<F: Field>(a: &F, b: &F) -> Result<F> {
    a.div(b).ok_or_else(|| singular("division by zero"))
}

/// Solves the chosen chi relation for `x_{e3}`; inputs must be finite.
pub fn chi_step<F: Field>(
    variant: ChiVariant,
    x1: &PV<F>,
    xm1: &PV<F>,
    x2: &PV<F>,
    xm2: &PV<F>,
    xm3: &PV<F>,
) -> Result<PV<F>> {
    let (x1, xm1, x2, xm2, xm3) = (finite(x1)?, finite(xm1)?, finite(x2)?, finite(xm2)?, finite(xm3)?);
    let v = match variant {
        ChiVariant::Chi3 => {
            let num = xm2.mul(xm1).sub(&x1.mul(x2)).sub(&xm2.sub(x1).mul(xm3));
            fdiv(&num, &xm1.sub(x2))?
        }
        ChiVariant::Chi4 => {
            let coef = fdiv(&F::one(), xm1)?.sub(&fdiv(&F::one(), x2)?);
            let rhs = fdiv(xm2, xm1)?.sub(&fdiv(&xm2.sub(x1), xm3)?).sub(&fdiv(x1, x2)?);
            fdiv(&rhs, &coef)?
        }
        ChiVariant::Chi5 => {
            let t = fdiv(&F::one(), xm3)?.sub(&fdiv(&F::one(), xm1)?);
            x1.add(&x2.mul(xm2).mul(&t))
        }
    };
    Ok(PV::Finite(v))
}

pub fn step<F: Field>(rec: Recurrence, x: [&PV<F>; 5]) -> Result<PV<F>> {
    let [a, b, c, d, e] = x;
    match rec {
        Recurrence::Dskp => dskp_step(a, b, c, d, e),
        Recurrence::Dkp => dkp_step(a, b, c, d, e),
        Recurrence::Chi3 => chi_step(ChiVariant::Chi3, a, b, c, d, e),
        Recurrence::Chi4 => chi_step(ChiVariant::Chi4, a, b, c, d, e),
        Recurrence::Chi5 => chi_step(ChiVariant::Chi5, a, b, c, d, e),
    }
}

/// Residual of the relation on a finite octahedron
/// `[x_{e1}, x_{-e1}, x_{e2}, x_{-e2}, x_{e3}, x_{-e3}]`, cleared of
/// denominators. Zero iff the relation holds.
pub fn relation_residual<F: Field>(rec: Recurrence, x: &[F; 6]) -> Option<F> {
    let [x1, xm1, x2, xm2, x3, xm3] = x;
    Some(match rec {
        Recurrence::Dskp => {
            let lhs = xm3.sub(x2).mul(&xm1.sub(x3)).mul(&xm2.sub(x1));
            let rhs = x2.sub(xm1).mul(&x3.sub(xm2)).mul(&x1.sub(xm3));
            lhs.add(&rhs)
        }
        Recurrence::Dkp => x3.mul(xm3).sub(&x1.mul(xm1)).sub(&x2.mul(xm2)),
        Recurrence::Chi3 => x3.sub(xm2).mul(xm1).add(&xm2.sub(x1).mul(xm3)).add(&x1.sub(x3).mul(x2)),
        Recurrence::Chi4 => x3
            .sub(xm2)
            .div(xm1)?
            .add(&xm2.sub(x1).div(xm3)?)
            .add(&x1.sub(x3).div(x2)?),
        Recurrence::Chi5 => {
            let lhs = x3.sub(x1).div(x2)?;
            let rhs = xm2.mul(&F::one().div(xm3)?.sub(&F::one().div(xm1)?));
            lhs.sub(&rhs)
        }
    })
}

/// A height function on the window `[i0, i1] x [j0, j1]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeightFunction {
    pub i0: i32,
    pub i1: i32,
    pub j0: i32,
    pub j1: i32,
    /// Row `i - i0`, column `j - j0`.
    pub h: Vec<Vec<i32>>,
}

impl HeightFunction {
    pub fn from_fn(i0: i32, i1: i32, j0: i32, j1: i32, f: impl Fn(i32, i32) -> i32) -> Result<Self> {
        let h = (i0..=i1).map(|i| (j0..=j1).map(|j| f(i, j)).collect()).collect();
        let hf = HeightFunction { i0, i1, j0, j1, h };
        hf.validate()?;
        Ok(hf)
    }

    /// `h(i, j) = [i + j]_2` on `[-r, r]^2`.
    pub fn flat(r: i32) -> Self {
        Self::from_fn(-r, r, -r, r, |i, j| (i + j).rem_euclid(2)).expect("flat height function")
    }

    /// A flat height function with a pyramid bump of top height 3 at
    /// `(1, 0)`; its graphs contain wrenches.
    pub fn bump(r: i32) -> Self {
        Self::from_fn(-r, r, -r, r, |i, j| (i + j).rem_euclid(2).max(3 - (i - 1).abs() - j.abs()))
            .expect("bump height function")
    }

    pub fn validate(&self) -> Result<()> {
        if self.i1 < self.i0 || self.j1 < self.j0 {
            return Err(DskpError::Invalid("empty window".into()));
        }
        let rows = (self.i1 - self.i0 + 1) as usize;
        let cols = (self.j1 - self.j0 + 1) as usize;
        if self.h.len() != rows || self.h.iter().any(|r| r.len() != cols) {
            return Err(DskpError::Invalid("height table does not match window".into()));
        }
        for i in self.i0..=self.i1 {
            for j in self.j0..=self.j1 {
                let h = self.get(i, j).unwrap();
                if !LatticePoint::new(i, j, h).in_lattice() {
                    return Err(DskpError::Invalid(format!("({i},{j},{h}) is not a lattice point")));
                }
                for (di, dj) in [(1, 0), (0, 1)] {
                    if let Some(h2) = self.get(i + di, j + dj) {
                        if (h - h2).abs() != 1 {
                            return Err(DskpError::Invalid(format!("height step at ({i},{j}) is not 1")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, i: i32, j: i32) -> bool {
        (self.i0..=self.i1).contains(&i) && (self.j0..=self.j1).contains(&j)
    }

    pub fn get(&self, i: i32, j: i32) -> Option<i32> {
        if self.contains(i, j) {
            Some(self.h[(i - self.i0) as usize][(j - self.j0) as usize])
        } else {
            None
        }
    }

    pub fn points(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        (self.i0..=self.i1).flat_map(move |i| (self.j0..=self.j1).map(move |j| (i, j)))
    }

    /// Checks that the cone of `p` meets the initial surface only inside
    /// the window.
    pub fn check_cone(&self, p: LatticePoint) -> Result<()> {
        let reach = |i: i32, j: i32| p.k - (i - p.i).abs() - (j - p.j).abs();
        for i in self.i0..=self.i1 {
            for j in self.j0..=self.j1 {
                let on_edge = i == self.i0 || i == self.i1 || j == self.j0 || j == self.j1;
                if !on_edge {
                    continue;
                }
                let h = self.get(i, j).unwrap();
                // one step outwards changes h by at most one and the cone by one
                if reach(i, j) - 1 > h - 1 {
                    let (oi, oj) = (
                        if i == self.i0 { i - 1 } else if i == self.i1 { i + 1 } else { i },
                        if j == self.j0 { j - 1 } else if j == self.j1 { j + 1 } else { j },
                    );
                    return Err(DskpError::WindowTooSmall(oi, oj));
                }
            }
        }
        Ok(())
    }
}

/// Height function plus a value on every window point.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialData<F> {
    pub heights: HeightFunction,
    pub a: Vec<Vec<PV<F>>>,
}

impl<F: Field> InitialData<F> {
    pub fn from_fn(heights: HeightFunction, mut f: impl FnMut(i32, i32) -> PV<F>) -> Self {
        let mut a = Vec::new();
        for i in heights.i0..=heights.i1 {
            a.push((heights.j0..=heights.j1).map(|j| f(i, j)).collect());
        }
        InitialData { heights, a }
    }

    pub fn get(&self, i: i32, j: i32) -> Option<&PV<F>> {
        if self.heights.contains(i, j) {
            Some(&self.a[(i - self.heights.i0) as usize][(j - self.heights.j0) as usize])
        } else {
            None
        }
    }

    pub fn map<G: Field>(&self, f: impl Fn(&PV<F>) -> PV<G>) -> InitialData<G> {
        InitialData {
            heights: self.heights.clone(),
            a: self.a.iter().map(|r| r.iter().map(&f).collect()).collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct InitialDataJson {
    i0: i32,
    i1: i32,
    j0: i32,
    j1: i32,
    h: Vec<Vec<i32>>,
    a: Vec<Vec<String>>,
}

impl InitialData<GaussianRational> {
    pub fn to_json(&self) -> serde_json::Value {
        let hf = &self.heights;
        serde_json::to_value(InitialDataJson {
            i0: hf.i0,
            i1: hf.i1,
            j0: hf.j0,
            j1: hf.j1,
            h: hf.h.clone(),
            a: self.a.iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect(),
        })
        .expect("serializable")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let d: InitialDataJson =
            serde_json::from_value(v.clone()).map_err(|e| ParseError::Malformed(e.to_string()))?;
        let heights = HeightFunction { i0: d.i0, i1: d.i1, j0: d.j0, j1: d.j1, h: d.h };
        heights.validate()?;
        let a = d
            .a
            .iter()
            .map(|r| r.iter().map(|s| parse_projective_gaussian(s)).collect::<std::result::Result<Vec<_>, _>>())
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if a.len() != heights.h.len() || a.iter().zip(&heights.h).any(|(x, y)| x.len() != y.len()) {
            return Err(DskpError::Invalid("value table does not match window".into()));
        }
        Ok(InitialData { heights, a })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell<F> {
    Value(PV<F>),
    Singular,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Initial,
    Computed(Recurrence),
}

#[derive(Clone, Debug)]
pub struct Solution<F> {
    pub heights: HeightFunction,
    pub recurrence: Recurrence,
    pub top: i32,
    values: HashMap<LatticePoint, Cell<F>>,
}

impl<F: Field> Solution<F> {
    pub fn cell(&self, p: LatticePoint) -> Option<&Cell<F>> {
        self.values.get(&p)
    }

    /// Value at `p`; singular cells and points outside the computed region
    /// are errors.
    pub fn get(&self, p: LatticePoint) -> Result<&PV<F>> {
        match self.values.get(&p) {
            Some(Cell::Value(v)) => Ok(v),
            Some(Cell::Singular) => Err(singular(&format!("value at ({},{},{}) is singular", p.i, p.j, p.k))),
            None => {
                if !p.in_lattice() {
                    return Err(DskpError::Invalid("point not in the lattice".into()));
                }
                match self.heights.get(p.i, p.j) {
                    Some(h) if p.k < h => Err(DskpError::Invalid("point below the initial surface".into())),
                    _ => {
                        self.heights.check_cone(p)?;
                        Err(DskpError::Invalid("point above the evolved levels".into()))
                    }
                }
            }
        }
    }

    pub fn provenance(&self, p: LatticePoint) -> Option<Provenance> {
        let h = self.heights.get(p.i, p.j)?;
        if !self.values.contains_key(&p) {
            None
        } else if p.k == h {
            Some(Provenance::Initial)
        } else {
            Some(Provenance::Computed(self.recurrence))
        }
    }

    /// Stored points at level `k`, sorted.
    pub fn level(&self, k: i32) -> Vec<(LatticePoint, &Cell<F>)> {
        let mut v: Vec<_> = self.values.iter().filter(|(p, _)| p.k == k).map(|(p, c)| (*p, c)).collect();
        v.sort_by_key(|(p, _)| *p);
        v
    }

    pub fn is_singular(&self, p: LatticePoint) -> bool {
        matches!(self.values.get(&p), Some(Cell::Singular))
    }
}

/// Evolves upwards to `target_level`, computing every point whose
/// octahedron inputs are available inside the window.
pub fn evolve<F: Field>(data: &InitialData<F>, rec: Recurrence, target_level: i32) -> Result<Solution<F>> {
    let hf = &data.heights;
    let mut values: HashMap<LatticePoint, Cell<F>> = HashMap::new();
    let mut kmin = i32::MAX;
    for (i, j) in hf.points() {
        let h = hf.get(i, j).unwrap();
        kmin = kmin.min(h);
        values.insert(LatticePoint::new(i, j, h), Cell::Value(data.get(i, j).unwrap().clone()));
    }
    for k in kmin + 1..=target_level {
        let mut new = Vec::new();
        for (i, j) in hf.points() {
            let p = LatticePoint::new(i, j, k);
            if !p.in_lattice() || k <= hf.get(i, j).unwrap() {
                continue;
            }
            let nb = [
                LatticePoint::new(i + 1, j, k - 1),
                LatticePoint::new(i - 1, j, k - 1),
                LatticePoint::new(i, j + 1, k - 1),
                LatticePoint::new(i, j - 1, k - 1),
                LatticePoint::new(i, j, k - 2),
            ];
            let cells: Option<Vec<&Cell<F>>> = nb.iter().map(|q| values.get(q)).collect();
            let Some(cells) = cells else { continue };
            let mut xs = Vec::with_capacity(5);
            for c in cells {
                match c {
                    Cell::Value(v) => xs.push(v),
                    Cell::Singular => break,
                }
            }
            let cell = if xs.len() < 5 {
                Cell::Singular
            } else {
                match step(rec, [xs[0], xs[1], xs[2], xs[3], xs[4]]) {
                    Ok(v) => Cell::Value(v),
                    Err(_) => Cell::Singular,
                }
            };
            new.push((p, cell));
        }
        values.extend(new);
    }
    Ok(Solution { heights: hf.clone(), recurrence: rec, top: target_level, values })
}

/// Value at a single point, failing when its cone leaves the window.
pub fn evolve_at<F: Field>(data: &InitialData<F>, rec: Recurrence, p: LatticePoint) -> Result<PV<F>> {
    data.heights.check_cone(p)?;
    evolve(data, rec, p.k)?.get(p).cloned()
}

/// Attempts one step below the initial surface at `(i, j)`, solving the
/// dSKP relation for `x_{-e3}` from the octahedron centred at
/// `(i, j, h(i, j) - 1)`. Only meaningful where the upper neighbours are
/// initial values.
pub fn dskp_probe_down<F: Field>(data: &InitialData<F>, i: i32, j: i32) -> Result<PV<F>> {
    let hf = &data.heights;
    let h = hf.get(i, j).ok_or(DskpError::WindowTooSmall(i, j))?;
    let around = [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)];
    let mut xs = Vec::new();
    for (a, b) in around {
        if hf.get(a, b).ok_or(DskpError::WindowTooSmall(a, b))? != h - 1 {
            return Err(DskpError::Invalid("neighbours are not one level below".into()));
        }
        xs.push(data.get(a, b).unwrap().clone());
    }
    let top = data.get(i, j).unwrap();
    // the relation is symmetric under e3 -> -e3
    dskp_step(&xs[0], &xs[1], &xs[2], &xs[3], top)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{rat, random_gaussian, Rational};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type G = GaussianRational;

    fn q(n: i64) -> PV<Rational> {
        PV::int(n)
    }

    #[test]
    fn dskp_linear_and_multiplicative() {
        assert_eq!(dskp_step(&q(1), &q(-1), &q(2), &q(-2), &q(-3)).unwrap(), q(3));
        let f = |n, d| PV::Finite(rat(n, d));
        let v = dskp_step(&f(2, 1), &f(1, 2), &f(3, 1), &f(1, 3), &f(1, 5)).unwrap();
        assert_eq!(v, q(5));
    }

    #[test]
    fn dkp_and_chi_examples() {
        assert_eq!(dkp_step(&q(1), &q(1), &q(1), &q(1), &q(2)).unwrap(), q(1));
        assert_eq!(dkp_step(&q(1), &q(1), &q(1), &q(1), &q(1)).unwrap(), q(2));
        assert_eq!(chi_step(ChiVariant::Chi3, &q(1), &q(9), &q(2), &q(1), &q(7)).unwrap(), q(1));
        assert_eq!(chi_step(ChiVariant::Chi4, &q(1), &q(1), &q(2), &q(1), &q(1)).unwrap(), q(1));
        assert!(dskp_step(&q(1), &q(2), &q(1), &q(4), &q(5)).is_err());
    }

    #[test]
    fn back_substitution_for_every_recurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for rec in [Recurrence::Dskp, Recurrence::Dkp, Recurrence::Chi3, Recurrence::Chi4, Recurrence::Chi5] {
            for _ in 0..50 {
                let xs: Vec<G> = (0..5).map(|_| random_gaussian(&mut rng, 9, 4)).collect();
                let pv: Vec<PV<G>> = xs.iter().cloned().map(PV::Finite).collect();
                let x3 = step(rec, [&pv[0], &pv[1], &pv[2], &pv[3], &pv[4]]).unwrap();
                let x3 = x3.as_finite().unwrap().clone();
                let oct = [xs[0].clone(), xs[1].clone(), xs[2].clone(), xs[3].clone(), x3, xs[4].clone()];
                assert!(relation_residual(rec, &oct).unwrap().is_zero(), "{rec}");
            }
        }
    }

    #[test]
    fn dskp_through_infinity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let xs: Vec<PV<G>> = (0..5).map(|_| PV::Finite(random_gaussian(&mut rng, 9, 4))).collect();
            let inf = PV::Infinity;
            let v = dskp_step(&xs[0], &xs[1], &inf, &xs[3], &xs[4]).unwrap();
            let back = dskp_step(&xs[0], &xs[1], &inf, &xs[3], &v);
            assert_eq!(back.unwrap(), xs[4]);
        }
    }

    #[test]
    fn octahedral_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..30 {
            let xs: Vec<G> = (0..5).map(|_| random_gaussian(&mut rng, 9, 4)).collect();
            let pv: Vec<PV<G>> = xs.iter().cloned().map(PV::Finite).collect();
            let x3 = dskp_step(&pv[0], &pv[1], &pv[2], &pv[3], &pv[4]).unwrap().as_finite().unwrap().clone();
            // pairs (e, -e) per axis
            let axes = [(xs[0].clone(), xs[1].clone()), (xs[2].clone(), xs[3].clone()), (x3, xs[4].clone())];
            for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                for flips in 0..8u8 {
                    let ax: Vec<(G, G)> = (0..3)
                        .map(|t| {
                            let (p, m) = axes[perm[t]].clone();
                            if flips >> t & 1 == 1 {
                                (m, p)
                            } else {
                                (p, m)
                            }
                        })
                        .collect();
                    let oct = [
                        ax[0].0.clone(),
                        ax[0].1.clone(),
                        ax[1].0.clone(),
                        ax[1].1.clone(),
                        ax[2].0.clone(),
                        ax[2].1.clone(),
                    ];
                    assert!(relation_residual(Recurrence::Dskp, &oct).unwrap().is_zero());
                }
            }
        }
    }

    fn linear_data(r: i32, a: i64, b: i64, c: i64, d: i64) -> InitialData<Rational> {
        InitialData::from_fn(HeightFunction::flat(r), |i, j| {
            let h = (i + j).rem_euclid(2) as i64;
            q(i as i64 * a + j as i64 * b + h * c + d)
        })
    }

    #[test]
    fn linear_solution_everywhere() {
        let data = linear_data(5, 1, 2, 3, 1);
        let sol = evolve(&data, Recurrence::Dskp, 4).unwrap();
        for k in 2..=4 {
            for (p, c) in sol.level(k) {
                assert_eq!(c, &Cell::Value(q(p.i as i64 + 2 * p.j as i64 + 3 * k as i64 + 1)));
            }
        }
        assert!(!sol.level(4).is_empty());
    }

    #[test]
    fn one_step_example_value() {
        let vals = [((0, 0), 0), ((1, 0), 1), ((-1, 0), 2), ((0, 1), 3), ((0, -1), 4)];
        let data = InitialData::from_fn(HeightFunction::flat(1), |i, j| {
            q(vals.iter().find(|(p, _)| *p == (i, j)).map_or(7, |&(_, v)| v))
        });
        let v = evolve_at(&data, Recurrence::Dskp, LatticePoint::new(0, 0, 2)).unwrap();
        assert_eq!(v, PV::Finite(rat(11, 5)));
    }

    #[test]
    fn cone_outside_window_is_reported() {
        let data = linear_data(1, 1, 2, 3, 1);
        let err = evolve_at(&data, Recurrence::Dskp, LatticePoint::new(0, 0, 4)).unwrap_err();
        assert!(matches!(err, DskpError::WindowTooSmall(_, _)));
    }

    #[test]
    fn dodgson_data_is_singular_below() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let vals: Vec<Rational> = (0..4).map(|_| crate::field::random_rational(&mut rng, 50, 7)).collect();
        let data = InitialData::from_fn(HeightFunction::flat(4), |i, j| {
            if (i + j).rem_euclid(2) == 0 {
                q(0)
            } else {
                PV::Finite(vals[((i - j).rem_euclid(4)) as usize].clone())
            }
        });
        for i in -2..=2i32 {
            for j in -2..=2i32 {
                if (i + j).rem_euclid(2) == 1 {
                    assert!(dskp_probe_down(&data, i, j).is_err());
                }
            }
        }
    }

    #[test]
    fn mobius_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..3 {
            let data = InitialData::from_fn(HeightFunction::flat(4), |_, _| PV::Finite(random_gaussian(&mut rng, 20, 5)));
            let m: [G; 4] = std::array::from_fn(|_| random_gaussian(&mut rng, 5, 3));
            let mapped = data.map(|x| x.mobius(&m).unwrap());
            let s1 = evolve(&data, Recurrence::Dskp, 4).unwrap();
            let s2 = evolve(&mapped, Recurrence::Dskp, 4).unwrap();
            for (p, c) in s1.level(4) {
                let Cell::Value(v) = c else { panic!("singular") };
                assert_eq!(s2.get(p).unwrap(), &v.mobius(&m).unwrap());
            }
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let mk = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data = InitialData::from_fn(HeightFunction::bump(4), |_, _| PV::Finite(random_gaussian(&mut rng, 20, 5)));
            evolve(&data, Recurrence::Dskp, 4).unwrap().level(4).into_iter().map(|(p, c)| (p, c.clone())).collect::<Vec<_>>()
        };
        assert_eq!(mk(1), mk(1));
        assert_ne!(mk(1), mk(2));
    }

    #[test]
    fn json_roundtrip() {
        let data = InitialData::from_fn(HeightFunction::flat(1), |i, j| {
            if i == 0 && j == 0 {
                PV::Infinity
            } else {
                PV::Finite(G::new(rat(i as i64, 3), rat(j as i64, 2)))
            }
        });
        let v = data.to_json();
        assert_eq!(InitialData::from_json(&v).unwrap(), data);
    }
}
