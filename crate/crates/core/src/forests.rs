//! Complementary trees and forests on the black diagonals of a sphere
//! quadrangulation, the Temperley bijection, and the `C` matrices.

use std::collections::VecDeque;

use num_bigint::BigInt;
use serde_json::json;

use crate::cwgraph::{Color, CwGraph, Edge, Face, Vertex, Weights};
use crate::error::{size_guard, DskpError, Result};
use crate::field::{Field, Rational};
use crate::linalg::{det, det_bareiss, matmul, Matrix};
use crate::poly::{Monomial, MultiPoly, Var};

pub const OPTIMAL_SEARCH_EDGE_LIMIT: usize = 64;
pub const TREE_FOREST_EDGE_LIMIT: usize = 40;

#[derive(Clone, Debug)]
pub struct QVertex {
    pub color: Color,
    pub coords: (i32, i32),
}

/// A quadrangle; `corners` are counterclockwise and start with the black
/// corner carrying sign `+1` in `C`.
#[derive(Clone, Debug)]
pub struct QFace {
    pub label: Var,
    pub coords: (i32, i32),
    pub corners: [usize; 4],
}

#[derive(Clone, Debug)]
pub struct Quadrangulation {
    pub vertices: Vec<QVertex>,
    pub faces: Vec<QFace>,
    pub w_r: usize,
    pub b_r: usize,
    /// Membership in `B`.
    pub in_b: Vec<bool>,
}

/// Directed diagonal: start vertex and the face it crosses.
pub type Arrow = (usize, usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeForestConfig {
    pub tree: Vec<Arrow>,
    pub forest: Vec<Arrow>,
    pub sign: i8,
}

/// Face label in `A_k` for rotated coordinates `(r, s)`.
pub fn aztec_face_label(k: usize, r: i32, s: i32) -> Var {
    let c = crate::cwgraph::aztec_apex(k);
    let k = k as i32;
    (c.i + (r - s) / 2, c.j + (r + s) / 2 - k)
}

/// Rotated coordinates `(r, s)` of a face label of `A_k`.
pub fn aztec_rs(k: usize, label: Var) -> (i32, i32) {
    let c = crate::cwgraph::aztec_apex(k);
    let (di, dj) = (label.0 - c.i, label.1 - c.j);
    let k = k as i32;
    (di + dj + k, dj - di + k)
}

/// The quadrangulation around `A_k`: `b_r` on the left, `b~` on the right,
/// `w_r` along top and bottom.
pub fn quadrangulate_aztec(k: usize) -> Result<Quadrangulation> {
    if k == 0 {
        return Err(DskpError::Invalid("k must be positive".into()));
    }
    let n = 2 * k as i32;
    let mut vertices = vec![
        QVertex { color: Color::White, coords: (-1, -1) },
        QVertex { color: Color::Black, coords: (-1, 0) },
        QVertex { color: Color::Black, coords: (n + 1, 0) },
    ];
    let (w_r, b_r, b_tilde) = (0, 1, 2);
    let mut id = std::collections::HashMap::new();
    for s in 0..=n {
        for r in 0..=n {
            if r % 2 == 0 && s % 2 == 1 {
                id.insert((r, s), vertices.len());
                vertices.push(QVertex { color: Color::White, coords: (r, s) });
            }
        }
    }
    for s in 0..=n {
        for r in 0..=n {
            if r % 2 == 1 && s % 2 == 0 {
                id.insert((r, s), vertices.len());
                vertices.push(QVertex { color: Color::Black, coords: (r, s) });
            }
        }
    }
    let at = |r: i32, s: i32| -> usize {
        if r < 0 {
            b_r
        } else if r > n {
            b_tilde
        } else if s < 0 || s > n {
            w_r
        } else {
            id[&(r, s)]
        }
    };
    let mut faces = Vec::new();
    for s in 0..=n {
        for r in 0..=n {
            if (r + s) % 2 != 0 {
                continue;
            }
            let (e, nn, w, so) = (at(r + 1, s), at(r, s + 1), at(r - 1, s), at(r, s - 1));
            // even faces start at the east corner, odd faces at the north one
            let corners = if r % 2 == 0 { [e, nn, w, so] } else { [nn, w, so, e] };
            faces.push(QFace { label: aztec_face_label(k, r, s), coords: (r, s), corners });
        }
    }
    let in_b = (0..vertices.len()).map(|v| v > b_tilde && vertices[v].color == Color::Black).collect();
    let q = Quadrangulation { vertices, faces, w_r, b_r, in_b };
    q.validate()?;
    Ok(q)
}

fn sgn_perm(p: &[usize]) -> i8 {
    let mut seen = vec![false; p.len()];
    let mut s = 1;
    for i in 0..p.len() {
        if seen[i] {
            continue;
        }
        let mut j = i;
        let mut len = 0;
        while !seen[j] {
            seen[j] = true;
            j = p[j];
            len += 1;
        }
        if len % 2 == 0 {
            s = -s;
        }
    }
    s
}

impl Quadrangulation {
    /// `W`, without `w_r`.
    pub fn whites(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| v != self.w_r && self.vertices[v].color == Color::White).collect()
    }

    /// `B~`, without `b_r`.
    pub fn b_tilde(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| v != self.b_r && self.vertices[v].color == Color::Black).collect()
    }

    pub fn b_set(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| self.in_b[v]).collect()
    }

    /// Roots of the forest: `(B~ + b_r) \ B`.
    pub fn forest_roots(&self) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|&v| self.vertices[v].color == Color::Black && !self.in_b[v])
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut sides: std::collections::HashMap<(usize, usize), usize> = Default::default();
        for (n, f) in self.faces.iter().enumerate() {
            if self.vertices[f.corners[0]].color != Color::Black {
                return Err(DskpError::Invalid(format!("face {n} does not start at a black corner")));
            }
            for t in 0..4 {
                let (x, y) = (f.corners[t], f.corners[(t + 1) % 4]);
                if self.vertices[x].color == self.vertices[y].color {
                    return Err(DskpError::Invalid(format!("face {n} is not alternating")));
                }
                if sides.insert((x, y), n).is_some() {
                    return Err(DskpError::Invalid("a directed side appears twice".into()));
                }
            }
        }
        if sides.keys().any(|&(x, y)| !sides.contains_key(&(y, x))) {
            return Err(DskpError::Invalid("quadrangulation is not closed".into()));
        }
        if !sides.contains_key(&(self.w_r, self.b_r)) {
            return Err(DskpError::Invalid("w_r and b_r are not adjacent".into()));
        }
        let v = self.vertices.len() as i64;
        let e = sides.len() as i64 / 2;
        let f = self.faces.len() as i64;
        if v - e + f != 2 {
            return Err(DskpError::Invalid("not a sphere".into()));
        }
        if self.whites().len() + self.b_tilde().len() != self.faces.len() {
            return Err(DskpError::Invalid("|W| + |B~| != |F|".into()));
        }
        Ok(())
    }

    /// `C(1)` entry for face `f` and vertex `v`.
    pub fn c_sign(&self, f: usize, v: usize) -> i8 {
        match self.faces[f].corners.iter().position(|&x| x == v) {
            Some(0) | Some(1) => 1,
            Some(_) => -1,
            None => 0,
        }
    }

    /// The other corner of `f` with the same color as `v`.
    pub fn across(&self, f: usize, v: usize) -> Option<usize> {
        let c = &self.faces[f].corners;
        c.iter().position(|&x| x == v).map(|t| c[(t + 2) % 4])
    }

    /// Edges of the black diagonal graph, one per face: `(b, b', face)`.
    pub fn black_graph(&self) -> Vec<(usize, usize, usize)> {
        self.faces.iter().enumerate().map(|(n, f)| (f.corners[0], f.corners[2], n)).collect()
    }

    /// Edges of the white diagonal graph, one per face.
    pub fn white_graph(&self) -> Vec<(usize, usize, usize)> {
        self.faces.iter().enumerate().map(|(n, f)| (f.corners[1], f.corners[3], n)).collect()
    }

    /// The dimer graph `G` on `W + B`, faces labelled as in the quadrangulation.
    pub fn dimer_graph(&self) -> CwGraph {
        let keep: Vec<usize> = self.whites().into_iter().chain(self.b_set()).collect();
        let mut map = vec![usize::MAX; self.vertices.len()];
        for (n, &v) in keep.iter().enumerate() {
            map[v] = n;
        }
        let vertices = keep
            .iter()
            .map(|&v| Vertex {
                color: self.vertices[v].color,
                pos: (self.vertices[v].coords.0 as f64, self.vertices[v].coords.1 as f64),
            })
            .collect();
        let mut right: std::collections::HashMap<(usize, usize), usize> = Default::default();
        for (n, f) in self.faces.iter().enumerate() {
            for t in 0..4 {
                // f lies left of corners[t] -> corners[t+1]
                right.insert((f.corners[(t + 1) % 4], f.corners[t]), n);
            }
        }
        let mut edges = Vec::new();
        let mut used = vec![false; self.faces.len()];
        let mut pairs: Vec<(usize, usize)> = right.keys().copied().collect();
        pairs.sort();
        for (x, y) in pairs {
            if self.vertices[x].color != Color::White || map[x] == usize::MAX || map[y] == usize::MAX {
                continue;
            }
            let (rwb, rbw) = (right[&(x, y)], right[&(y, x)]);
            used[rwb] = true;
            used[rbw] = true;
            edges.push(Edge { w: map[x], b: map[y], right_wb: rwb, right_bw: rbw });
        }
        let kept = |f: usize| self.faces[f].corners.iter().all(|&v| map[v] != usize::MAX);
        let mut fmap = vec![usize::MAX; self.faces.len()];
        let mut faces = Vec::new();
        for (n, f) in self.faces.iter().enumerate() {
            if used[n] {
                fmap[n] = faces.len();
                faces.push(Face { label: f.label, inner: kept(n) });
            }
        }
        for e in &mut edges {
            e.right_wb = fmap[e.right_wb];
            e.right_bw = fmap[e.right_bw];
        }
        CwGraph { vertices, edges, faces }
    }

    fn follow(&self, arrows: &[Arrow], color: Color) -> Result<Vec<Option<usize>>> {
        let mut next = vec![None; self.vertices.len()];
        for &(v, f) in arrows {
            if self.vertices[v].color != color {
                return Err(DskpError::Invalid("arrow starts at the wrong color".into()));
            }
            let to = self.across(f, v).ok_or_else(|| DskpError::Invalid("arrow leaves a non-incident face".into()))?;
            if next[v].replace(to).is_some() {
                return Err(DskpError::Invalid("two arrows leave one vertex".into()));
            }
        }
        Ok(next)
    }

    /// True when every non-root vertex of `color` reaches a root by `arrows`.
    fn is_rooted_forest(&self, arrows: &[Arrow], color: Color, roots: &[usize]) -> Result<bool> {
        let next = self.follow(arrows, color)?;
        for v in 0..self.vertices.len() {
            if self.vertices[v].color != color {
                continue;
            }
            let is_root = roots.contains(&v);
            if is_root != next[v].is_none() {
                return Ok(false);
            }
            let mut x = v;
            let mut steps = 0;
            while let Some(y) = next[x] {
                x = y;
                steps += 1;
                if steps > self.vertices.len() {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Temperley: a perfect matching of `G^D_r`, as `(vertex, face)` pairs,
    /// to the pair of dual trees rooted at `b_r` and `w_r`.
    pub fn temperley(&self, matching: &[Arrow]) -> Result<(Vec<Arrow>, Vec<Arrow>)> {
        let mut face_used = vec![false; self.faces.len()];
        for &(_, f) in matching {
            if std::mem::replace(&mut face_used[f], true) {
                return Err(DskpError::Invalid("face matched twice".into()));
            }
        }
        if face_used.iter().any(|u| !u) || matching.len() != self.faces.len() {
            return Err(DskpError::Invalid("not a perfect matching of the double graph".into()));
        }
        let (blk, wht): (Vec<Arrow>, Vec<Arrow>) =
            matching.iter().partition(|&&(v, _)| self.vertices[v].color == Color::Black);
        if !self.is_rooted_forest(&blk, Color::Black, &[self.b_r])?
            || !self.is_rooted_forest(&wht, Color::White, &[self.w_r])?
        {
            return Err(DskpError::Invalid("matching does not give spanning trees".into()));
        }
        Ok((blk, wht))
    }

    /// Reverse Temperley: a spanning tree of `G•` rooted at `b_r` to the
    /// perfect matching of `G^D_r`.
    pub fn reverse_temperley(&self, tree: &[Arrow]) -> Result<Vec<Arrow>> {
        if !self.is_rooted_forest(tree, Color::Black, &[self.b_r])? {
            return Err(DskpError::Invalid("not a spanning tree rooted at b_r".into()));
        }
        let mut in_tree = vec![false; self.faces.len()];
        tree.iter().for_each(|&(_, f)| in_tree[f] = true);
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.vertices.len()];
        for (x, y, f) in self.white_graph() {
            if !in_tree[f] {
                adj[x].push((y, f));
                adj[y].push((x, f));
            }
        }
        let mut out: Vec<Arrow> = tree.to_vec();
        let mut seen = vec![false; self.vertices.len()];
        seen[self.w_r] = true;
        let mut queue = VecDeque::from([self.w_r]);
        while let Some(x) = queue.pop_front() {
            for &(y, f) in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    out.push((y, f));
                    queue.push_back(y);
                }
            }
        }
        if out.len() != self.faces.len() {
            return Err(DskpError::Invalid("dual configuration is not a spanning tree".into()));
        }
        out.sort();
        Ok(out)
    }

    /// All perfect matchings of `G^D_r` (small graphs only).
    pub fn double_graph_matchings(&self) -> Result<Vec<Vec<Arrow>>> {
        size_guard("faces for double-graph matchings", self.faces.len(), 25)?;
        let verts: Vec<usize> = self.whites().into_iter().chain(self.b_tilde()).collect();
        let mut options: Vec<Vec<usize>> = vec![Vec::new(); self.vertices.len()];
        for (n, f) in self.faces.iter().enumerate() {
            for &c in &f.corners {
                if c != self.w_r && c != self.b_r {
                    options[c].push(n);
                }
            }
        }
        let mut out = Vec::new();
        let mut used = vec![false; self.faces.len()];
        let mut cur = Vec::new();
        fn rec(
            verts: &[usize],
            options: &[Vec<usize>],
            i: usize,
            used: &mut [bool],
            cur: &mut Vec<Arrow>,
            out: &mut Vec<Vec<Arrow>>,
        ) {
            if i == verts.len() {
                let mut m = cur.clone();
                m.sort();
                out.push(m);
                return;
            }
            for &f in &options[verts[i]] {
                if !used[f] {
                    used[f] = true;
                    cur.push((verts[i], f));
                    rec(verts, options, i + 1, used, cur, out);
                    cur.pop();
                    used[f] = false;
                }
            }
        }
        rec(&verts, &options, 0, &mut used, &mut cur, &mut out);
        Ok(out)
    }

    /// Number of spanning trees of `G•` by the matrix-tree theorem.
    pub fn spanning_tree_count(&self) -> BigInt {
        let verts: Vec<usize> = self.b_tilde();
        let idx = |v: usize| verts.iter().position(|&x| x == v);
        let n = verts.len();
        let mut lap: Matrix<Rational> = vec![vec![Rational::zero(); n]; n];
        for (x, y, _) in self.black_graph() {
            for (a, b) in [(x, y), (y, x)] {
                if let Some(i) = idx(a) {
                    lap[i][i] = lap[i][i].add(&Rational::one());
                    if let Some(j) = idx(b) {
                        lap[i][j] = lap[i][j].sub(&Rational::one());
                    }
                }
            }
        }
        det(&lap).to_integer()
    }

    /// A reference spanning tree of `G•` rooted at `b_r` (breadth first).
    pub fn reference_tree(&self) -> Vec<Arrow> {
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.vertices.len()];
        for (x, y, f) in self.black_graph() {
            adj[x].push((y, f));
            adj[y].push((x, f));
        }
        let mut seen = vec![false; self.vertices.len()];
        seen[self.b_r] = true;
        let mut queue = VecDeque::from([self.b_r]);
        let mut out = Vec::new();
        while let Some(x) = queue.pop_front() {
            for &(y, f) in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    out.push((y, f));
                    queue.push_back(y);
                }
            }
        }
        out.sort();
        out
    }

    /// `sgn(sigma) prod C(1)` for a pair of matchings `M1` (on `B~`) and
    /// `M2` (on `B`), with the canonical labelling of faces and columns.
    pub fn matching_pair_sign(&self, m1: &[Arrow], m2: &[Arrow]) -> Result<i8> {
        let cols: Vec<usize> = self.b_tilde().into_iter().chain(self.b_set()).collect();
        let l = self.faces.len();
        if cols.len() != l {
            return Err(DskpError::Invalid("|B~| + |B| != |F|".into()));
        }
        let m = self.b_tilde().len();
        let mut sigma = vec![usize::MAX; l];
        let find = |ms: &[Arrow], v: usize| ms.iter().find(|&&(x, _)| x == v).map(|&(_, f)| f);
        let mut sign = 1i8;
        for (j, &b) in cols.iter().enumerate() {
            let f = if j < m { find(m1, b) } else { find(m2, b) }
                .ok_or_else(|| DskpError::Invalid(format!("vertex {b} is unmatched")))?;
            sigma[j] = f;
            sign *= self.c_sign(f, b);
        }
        let mut seen = vec![false; l];
        for &f in &sigma {
            if std::mem::replace(&mut seen[f], true) {
                return Err(DskpError::Invalid("face used twice".into()));
            }
        }
        Ok(sign * sgn_perm(&sigma))
    }

    /// All complementary tree/forest pairs with their signs.
    pub fn enumerate_tree_forest(&self) -> Result<Vec<TreeForestConfig>> {
        let edges = self.black_graph();
        size_guard("edges of the black graph", edges.len(), TREE_FOREST_EDGE_LIMIT)?;
        let nb = self.b_tilde().len() + 1;
        let roots = self.forest_roots();
        let need_t = nb - 1;
        let need_f = nb - roots.len();
        if need_t + need_f != edges.len() {
            return Err(DskpError::Invalid("edge count does not split into a tree and a forest".into()));
        }
        let nv = self.vertices.len();
        let mut rooted = vec![false; nv];
        roots.iter().for_each(|&r| rooted[r] = true);
        let mut splits = Vec::new();
        let mut assign = vec![false; edges.len()];
        struct St<'a> {
            edges: &'a [(usize, usize, usize)],
            need_t: usize,
            need_f: usize,
        }
        fn find(p: &[usize], mut x: usize) -> usize {
            while p[x] != x {
                x = p[x];
            }
            x
        }
        #[allow(clippy::too_many_arguments)]
        fn rec(
            st: &St,
            i: usize,
            pt: &mut Vec<usize>,
            pf: &mut Vec<usize>,
            rf: &mut Vec<bool>,
            nt: usize,
            nf: usize,
            assign: &mut Vec<bool>,
            out: &mut Vec<Vec<bool>>,
        ) {
            if i == st.edges.len() {
                out.push(assign.clone());
                return;
            }
            let (x, y, _) = st.edges[i];
            if nt < st.need_t {
                let (a, b) = (find(pt, x), find(pt, y));
                if a != b {
                    pt[a] = b;
                    assign[i] = true;
                    rec(st, i + 1, pt, pf, rf, nt + 1, nf, assign, out);
                    pt[a] = a;
                }
            }
            if nf < st.need_f {
                let (a, b) = (find(pf, x), find(pf, y));
                if a != b && !(rf[a] && rf[b]) {
                    pf[a] = b;
                    let old = rf[b];
                    rf[b] = rf[a] || rf[b];
                    assign[i] = false;
                    rec(st, i + 1, pt, pf, rf, nt, nf + 1, assign, out);
                    rf[b] = old;
                    pf[a] = a;
                }
            }
        }
        let st = St { edges: &edges, need_t, need_f };
        let mut pt: Vec<usize> = (0..nv).collect();
        let mut pf: Vec<usize> = (0..nv).collect();
        rec(&st, 0, &mut pt, &mut pf, &mut rooted, 0, 0, &mut assign, &mut splits);

        splits.iter().map(|s| self.config_from_split(&edges, s)).collect()
    }

    fn config_from_split(&self, edges: &[(usize, usize, usize)], split: &[bool]) -> Result<TreeForestConfig> {
        let nv = self.vertices.len();
        let t_edges: Vec<_> = edges.iter().zip(split).filter(|(_, &s)| s).map(|(e, _)| *e).collect();
        let f_edges: Vec<_> = edges.iter().zip(split).filter(|(_, &s)| !s).map(|(e, _)| *e).collect();
        let tree = orient_towards(nv, &t_edges, &[self.b_r]);
        let forest = orient_towards(nv, &f_edges, &self.forest_roots());
        let sign = self.matching_pair_sign(&tree, &forest)?;
        Ok(TreeForestConfig { tree, forest, sign })
    }

    /// Configurations minimising `sum_{e in F} weight[f_e]`, with the optimum.
    ///
    /// Branch and bound over black edges in increasing weight. The bound is the
    /// cheapest completion of the forest alone (Kruskal on the graph with roots
    /// merged), together with a connectivity check for the tree.
    pub fn enumerate_optimal_tree_forest(&self, weight: &[i64]) -> Result<(i64, Vec<TreeForestConfig>)> {
        if weight.len() != self.faces.len() {
            return Err(DskpError::Invalid("one weight per face expected".into()));
        }
        let mut edges = self.black_graph();
        size_guard("edges for the optimal tree/forest search", edges.len(), OPTIMAL_SEARCH_EDGE_LIMIT)?;
        edges.sort_by_key(|e| (weight[e.2], e.2));
        let nv = self.vertices.len();
        let roots = self.forest_roots();
        let nb = self.b_tilde().len() + 1;
        // Forest union-find works on the quotient where all roots are one vertex.
        let mut quot: Vec<usize> = (0..nv).collect();
        roots.iter().for_each(|&r| quot[r] = roots[0]);
        let search = OptimalSearch {
            edges: edges.iter().map(|&(x, y, f)| (x, y, quot[x], quot[y], weight[f])).collect(),
            need_t: nb - 1,
            need_f: nb - roots.len(),
            nv,
        };
        if search.need_t + search.need_f != edges.len() {
            return Err(DskpError::Invalid("edge count does not split into a tree and a forest".into()));
        }
        let mut state = SearchState {
            pt: (0..nv).collect(),
            pf: (0..nv).collect(),
            assign: vec![false; edges.len()],
            best: i64::MAX,
            collect: false,
            found: Vec::new(),
        };
        search.rec(&mut state, 0, 0, 0, 0);
        if state.best == i64::MAX {
            return Err(DskpError::Invalid("no tree/forest configuration".into()));
        }
        state.collect = true;
        search.rec(&mut state, 0, 0, 0, 0);
        let configs = state
            .found
            .iter()
            .map(|s| self.config_from_split(&edges, s))
            .collect::<Result<Vec<_>>>()?;
        Ok((state.best, configs))
    }

    /// `sum sign(T,F) prod_{e in F} a_{f_e}`.
    pub fn tree_forest_polynomial(&self, configs: &[TreeForestConfig]) -> MultiPoly {
        let mut p = MultiPoly::zero();
        for c in configs {
            let m = Monomial::from_pairs(c.forest.iter().map(|&(_, f)| (self.faces[f].label, 1)).collect());
            p.add_term(m, BigInt::from(c.sign));
        }
        p
    }

    /// Columns of `C`: `W`, `B~`, `w_r`, `b_r`.
    pub fn c_columns(&self) -> Vec<usize> {
        let mut cols: Vec<usize> = self.whites();
        cols.extend(self.b_tilde());
        cols.push(self.w_r);
        cols.push(self.b_r);
        cols
    }

    /// `C(a)` restricted to the given columns; `None` weights give `C(1)`.
    pub fn c_block<F: Field>(&self, cols: &[usize], a: Option<&Weights<F>>) -> Result<Matrix<F>> {
        let mut m = vec![vec![F::zero(); cols.len()]; self.faces.len()];
        for (fi, face) in self.faces.iter().enumerate() {
            let w = match a {
                Some(a) => a
                    .get(&face.label)
                    .cloned()
                    .ok_or_else(|| DskpError::Invalid(format!("missing weight for {:?}", face.label)))?,
                None => F::one(),
            };
            for (ci, &v) in cols.iter().enumerate() {
                let s = self.c_sign(fi, v);
                if s != 0 {
                    m[fi][ci] = if s > 0 { w.clone() } else { w.neg() };
                }
            }
        }
        Ok(m)
    }

    /// `(C(1)^B~ | C(a)^B)`, rows in face order.
    pub fn c_matrix<F: Field>(&self, a: &Weights<F>) -> Result<Matrix<F>> {
        let left = self.c_block::<F>(&self.b_tilde(), None)?;
        let right = self.c_block(&self.b_set(), Some(a))?;
        Ok(left.into_iter().zip(right).map(|(mut l, r)| {
            l.extend(r);
            l
        }).collect())
    }

    /// The same matrix with polynomial entries.
    pub fn c_matrix_symbolic(&self) -> Result<Matrix<MultiPoly>> {
        let bt = self.b_tilde();
        let cols: Vec<usize> = bt.iter().copied().chain(self.b_set()).collect();
        Ok((0..self.faces.len())
            .map(|f| {
                cols.iter()
                    .enumerate()
                    .map(|(ci, &v)| {
                        let s = MultiPoly::constant(BigInt::from(self.c_sign(f, v)));
                        if ci < bt.len() {
                            s
                        } else {
                            s.mul(&MultiPoly::var(self.faces[f].label))
                        }
                    })
                    .collect()
            })
            .collect())
    }

    /// Matrix `M` (rows `B~`, columns faces) from a reference tree.
    pub fn m_matrix<F: Field>(&self, tree: &[Arrow]) -> Matrix<F> {
        let bt = self.b_tilde();
        let mut m = vec![vec![F::zero(); self.faces.len()]; bt.len()];
        for &(v, f) in tree {
            if let Some(r) = bt.iter().position(|&b| b == v) {
                m[r][f] = F::one();
            }
        }
        m
    }

    pub fn config_json(&self, c: &TreeForestConfig) -> serde_json::Value {
        let arrows = |xs: &[Arrow]| -> Vec<serde_json::Value> {
            xs.iter()
                .map(|&(v, f)| {
                    json!({
                        "from": self.vertices[v].coords,
                        "to": self.vertices[self.across(f, v).unwrap()].coords,
                        "face": self.faces[f].label,
                    })
                })
                .collect()
        };
        json!({"tree": arrows(&c.tree), "forest": arrows(&c.forest), "sign": c.sign})
    }
}

struct OptimalSearch {
    /// `(x, y, quotient x, quotient y, weight)`.
    edges: Vec<(usize, usize, usize, usize, i64)>,
    need_t: usize,
    need_f: usize,
    nv: usize,
}

struct SearchState {
    pt: Vec<usize>,
    pf: Vec<usize>,
    assign: Vec<bool>,
    best: i64,
    collect: bool,
    found: Vec<Vec<bool>>,
}

fn uf_find(p: &[usize], mut x: usize) -> usize {
    while p[x] != x {
        x = p[x];
    }
    x
}

impl OptimalSearch {
    /// Lower bound on the final forest weight, `None` when no completion exists.
    fn bound(&self, st: &SearchState, i: usize, nf: usize, wf: i64) -> Option<i64> {
        let mut pt = st.pt.clone();
        // Without path compression every union leaves exactly one non-root entry.
        let mut joined = (0..self.nv).filter(|&v| pt[v] != v).count();
        for &(x, y, _, _, _) in &self.edges[i..] {
            let (a, b) = (uf_find(&pt, x), uf_find(&pt, y));
            if a != b {
                pt[a] = b;
                joined += 1;
            }
        }
        if joined < self.need_t {
            return None;
        }
        let mut pf = st.pf.clone();
        let mut added = nf;
        let mut w = wf;
        for &(_, _, x, y, c) in &self.edges[i..] {
            if added == self.need_f {
                break;
            }
            let (a, b) = (uf_find(&pf, x), uf_find(&pf, y));
            if a != b {
                pf[a] = b;
                added += 1;
                w += c;
            }
        }
        (added == self.need_f).then_some(w)
    }

    fn rec(&self, st: &mut SearchState, i: usize, nt: usize, nf: usize, wf: i64) {
        if i == self.edges.len() {
            if st.collect {
                if wf == st.best {
                    st.found.push(st.assign.clone());
                }
            } else if wf < st.best {
                st.best = wf;
            }
            return;
        }
        match self.bound(st, i, nf, wf) {
            None => return,
            Some(lb) if lb > st.best || (!st.collect && lb == st.best) => return,
            _ => {}
        }
        let (x, y, qx, qy, c) = self.edges[i];
        if nf < self.need_f {
            let (a, b) = (uf_find(&st.pf, qx), uf_find(&st.pf, qy));
            if a != b {
                st.pf[a] = b;
                st.assign[i] = false;
                self.rec(st, i + 1, nt, nf + 1, wf + c);
                st.pf[a] = a;
            }
        }
        if nt < self.need_t {
            let (a, b) = (uf_find(&st.pt, x), uf_find(&st.pt, y));
            if a != b {
                st.pt[a] = b;
                st.assign[i] = true;
                self.rec(st, i + 1, nt + 1, nf, wf);
                st.pt[a] = a;
            }
        }
    }
}

pub(crate) fn orient_towards(nv: usize, edges: &[(usize, usize, usize)], roots: &[usize]) -> Vec<Arrow> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nv];
    for &(x, y, f) in edges {
        adj[x].push((y, f));
        adj[y].push((x, f));
    }
    let mut seen = vec![false; nv];
    let mut queue: VecDeque<usize> = roots.iter().copied().collect();
    roots.iter().for_each(|&r| seen[r] = true);
    let mut out = Vec::new();
    while let Some(x) = queue.pop_front() {
        for &(y, f) in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                out.push((y, f));
                queue.push_back(y);
            }
        }
    }
    out.sort();
    out
}

/// Determinants involved in the matrix relation between `K` and `C`.
#[derive(Clone, Debug, PartialEq)]
pub struct DetCRecord<F> {
    pub det_k: F,
    pub det_c: F,
    pub det_star: F,
    pub det_stack: F,
    /// The product's `W x B~` block vanishes and its `W x B` block is `K`.
    pub blocks_match: bool,
}

/// Evaluates both sides of `det K = +-det(C(1)^B~ | C(a)^B)`.
pub fn det_c_identity<F: Field>(q: &Quadrangulation, a: &Weights<F>) -> Result<DetCRecord<F>> {
    let g = q.dimer_graph();
    let k = crate::dimer::kasteleyn_matrix(&g, a)?;
    let c = q.c_matrix(a)?;
    let tree = q.reference_tree();
    let c1 = q.c_block::<F>(&q.whites(), None)?;
    let c1t_w: Matrix<F> = crate::linalg::transpose(&c1);
    let m: Matrix<F> = q.m_matrix(&tree);
    let stack: Matrix<F> = c1t_w.iter().cloned().chain(m.iter().cloned()).collect();
    let prod = matmul(&stack, &c);
    let nw = q.whites().len();
    let nbt = q.b_tilde().len();
    let mut blocks_match = true;
    for (r, row) in prod.iter().take(nw).enumerate() {
        if row[..nbt].iter().any(|x| !x.is_zero()) || row[nbt..] != k[r][..] {
            blocks_match = false;
        }
    }
    let star: Matrix<F> = prod[nw..].iter().map(|row| row[..nbt].to_vec()).collect();
    Ok(DetCRecord { det_k: det(&k), det_c: det(&c), det_star: det(&star), det_stack: det(&stack), blocks_match })
}

/// Symbolic `det(C(1)^B~ | C(a)^B)`.
pub fn det_c_symbolic(q: &Quadrangulation) -> Result<MultiPoly> {
    size_guard("faces for symbolic C determinant", q.faces.len(), 13)?;
    Ok(det_bareiss(&q.c_matrix_symbolic()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cwgraph::{aztec, fingerprint, kasteleyn_orientation};
    use crate::dimer::z_oriented_symbolic;
    use crate::field::random_rational;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn aztec_quadrangulation_sizes() {
        for k in 1..=4usize {
            let q = quadrangulate_aztec(k).unwrap();
            assert_eq!(q.faces.len(), 2 * k * (k + 1) + 1);
            assert_eq!(q.b_set().len(), k * (k + 1));
            assert_eq!(q.whites().len(), k * (k + 1));
            assert_eq!(fingerprint(&q.dimer_graph()), fingerprint(&aztec(k).unwrap()), "k={k}");
        }
    }

    #[test]
    fn temperley_round_trip() {
        for k in 1..=2 {
            let q = quadrangulate_aztec(k).unwrap();
            let ms = q.double_graph_matchings().unwrap();
            assert_eq!(BigInt::from(ms.len()), q.spanning_tree_count());
            for m in &ms {
                let (t, _) = q.temperley(m).unwrap();
                assert_eq!(&q.reverse_temperley(&t).unwrap(), m);
            }
        }
    }

    #[test]
    fn tree_forest_matches_z() {
        for (k, n) in [(1usize, 6usize), (2, 220)] {
            let q = quadrangulate_aztec(k).unwrap();
            let configs = q.enumerate_tree_forest().unwrap();
            assert_eq!(configs.len(), n);
            let roots = q.forest_roots().len();
            for c in &configs {
                assert_eq!(c.forest.len(), q.b_tilde().len() + 1 - roots);
            }
            let p = q.tree_forest_polynomial(&configs);
            assert_eq!(p.monomial_count(), n);
            let g = aztec(k).unwrap();
            let z = z_oriented_symbolic(&g, &kasteleyn_orientation(&g).unwrap()).unwrap();
            assert!(p == z || p == z.neg());
            assert_eq!(p, det_c_symbolic(&q).unwrap());
        }
    }

    #[test]
    fn c_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for k in 1..=3 {
            let q = quadrangulate_aztec(k).unwrap();
            let a: Weights<Rational> = q.faces.iter().map(|f| (f.label, random_rational(&mut rng, 20, 6))).collect();
            let r = det_c_identity(&q, &a).unwrap();
            assert!(r.blocks_match);
            assert!(r.det_k == r.det_c || r.det_k == r.det_c.neg());
            assert!(r.det_star == Rational::one() || r.det_star == Rational::one().neg());
            assert!(r.det_stack == Rational::one() || r.det_stack == Rational::one().neg());
        }
    }

    #[test]
    fn reversing_a_cycle_negates_the_contribution() {
        let q = quadrangulate_aztec(2).unwrap();
        let bt = q.b_tilde();
        let bs = q.b_set();
        let blacks = q.black_graph();
        // Find M1 (one arrow per B~ vertex) with a cycle, completed by M2 on B.
        let arrows_from = |v: usize| -> Vec<Arrow> {
            blacks.iter().filter(|e| e.0 == v || e.1 == v).map(|e| (v, e.2)).collect()
        };
        let mut found = None;
        'outer: for (i, &x) in bt.iter().enumerate() {
            for &y in &bt[i + 1..] {
                for &z in &bt {
                    if z == x || z == y {
                        continue;
                    }
                    let hop = |a: usize, b: usize| blacks.iter().find(|e| (e.0 == a && e.1 == b) || (e.0 == b && e.1 == a)).map(|e| e.2);
                    if let (Some(f1), Some(f2), Some(f3)) = (hop(x, y), hop(y, z), hop(z, x)) {
                        found = Some(vec![(x, f1), (y, f2), (z, f3)]);
                        break 'outer;
                    }
                }
            }
        }
        let cycle = found.expect("A_2 has a triangle in the black graph");
        // Complete greedily: remaining B~ vertices then B vertices, faces unused.
        fn complete(q: &Quadrangulation, order: &[usize], used: &mut Vec<bool>, acc: &mut Vec<Arrow>, i: usize,
                    arrows_from: &dyn Fn(usize) -> Vec<Arrow>) -> bool {
            if i == order.len() {
                return used.iter().all(|&u| u);
            }
            for (v, f) in arrows_from(order[i]) {
                if !used[f] {
                    used[f] = true;
                    acc.push((v, f));
                    if complete(q, order, used, acc, i + 1, arrows_from) {
                        return true;
                    }
                    acc.pop();
                    used[f] = false;
                }
            }
            false
        }
        let in_cycle: Vec<usize> = cycle.iter().map(|a| a.0).collect();
        let mut order: Vec<usize> = bt.iter().copied().filter(|v| !in_cycle.contains(v)).collect();
        let n1 = order.len();
        order.extend(bs.iter().copied());
        let mut used = vec![false; q.faces.len()];
        cycle.iter().for_each(|&(_, f)| used[f] = true);
        let mut acc = Vec::new();
        assert!(complete(&q, &order, &mut used, &mut acc, 0, &arrows_from));
        let mut m1 = cycle.clone();
        m1.extend_from_slice(&acc[..n1]);
        let m2 = acc[n1..].to_vec();
        let reversed: Vec<Arrow> = (0..3).map(|t| (cycle[(t + 1) % 3].0, cycle[t].1)).collect();
        let mut m1r = reversed;
        m1r.extend_from_slice(&acc[..n1]);
        let s = q.matching_pair_sign(&m1, &m2).unwrap();
        let sr = q.matching_pair_sign(&m1r, &m2).unwrap();
        assert_eq!(s, -sr);
    }
}
