//! Crosses-and-wrenches graphs with open faces, Kasteleyn orientations and
//! the two local moves.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde_json::json;

use crate::error::{DskpError, Result};
use crate::field::Field;
use crate::lattice::{dskp_step, HeightFunction, LatticePoint};
use crate::poly::Var;
use crate::projective::ProjectiveValue;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Color {
    White,
    Black,
}

impl Color {
    pub fn other(self) -> Color {
        match self {
            Color::White => Color::Black,
            Color::Black => Color::White,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Vertex {
    pub color: Color,
    pub pos: (f64, f64),
}

/// An edge `wb` with the faces to the right of `w -> b` and of `b -> w`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub w: usize,
    pub b: usize,
    pub right_wb: usize,
    pub right_bw: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Face {
    pub label: Var,
    pub inner: bool,
}

/// Face weights keyed by face label.
pub type Weights<F> = BTreeMap<Var, F>;

#[derive(Clone, Debug)]
pub struct CwGraph {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub faces: Vec<Face>,
}

/// Signs `phi_(w,b)` indexed like `CwGraph::edges`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KasteleynOrientation {
    pub phi: Vec<i8>,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Side {
    S,
    E,
    N,
    W,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Slot {
    Center,
    Corner(i32, i32),
}

type SquareKey = (i32, i32);

struct SquareShape {
    cross: bool,
    /// Corner offsets of the two handle endpoints for a wrench.
    ends: [(i32, i32); 2],
}

fn square_shape(h: &HeightFunction, i: i32, j: i32) -> Result<SquareShape> {
    let get = |a: i32, b: i32| h.get(a, b).ok_or(DskpError::WindowTooSmall(a, b));
    let (h00, h10, h11, h01) = (get(i, j)?, get(i + 1, j)?, get(i + 1, j + 1)?, get(i, j + 1)?);
    if h00 == h11 && h10 == h01 {
        Ok(SquareShape { cross: true, ends: [(0, 0); 2] })
    } else if h00 == h11 {
        Ok(SquareShape { cross: false, ends: [(1, 0), (0, 1)] })
    } else {
        Ok(SquareShape { cross: false, ends: [(0, 0), (1, 1)] })
    }
}

fn owner(shape: &SquareShape, side: Side) -> Slot {
    if shape.cross {
        return Slot::Center;
    }
    let owns = |c: (i32, i32)| match c {
        (0, 0) => [Side::W, Side::S],
        (1, 0) => [Side::S, Side::E],
        (1, 1) => [Side::E, Side::N],
        _ => [Side::N, Side::W],
    };
    let c = if owns(shape.ends[0]).contains(&side) { shape.ends[0] } else { shape.ends[1] };
    Slot::Corner(c.0, c.1)
}

fn slot_pos(sq: SquareKey, slot: Slot) -> (f64, f64) {
    let (cx, cy) = (sq.0 as f64 + 0.5, sq.1 as f64 + 0.5);
    match slot {
        Slot::Center => (cx, cy),
        Slot::Corner(a, b) => (cx + 0.25 * (2 * a - 1) as f64, cy + 0.25 * (2 * b - 1) as f64),
    }
}

fn cross2(u: (f64, f64), v: (f64, f64)) -> f64 {
    u.0 * v.1 - u.1 * v.0
}

/// Builds `G_p` for the height function `h`.
pub fn build_cw_graph(h: &HeightFunction, p: LatticePoint) -> Result<CwGraph> {
    if !p.in_lattice() {
        return Err(DskpError::Invalid(format!("({}, {}, {}) is not a lattice point", p.i, p.j, p.k)));
    }
    h.check_cone(p)?;
    let inner = |i: i32, j: i32| h.get(i, j).is_some_and(|v| v < p.k - (i - p.i).abs() - (j - p.j).abs());
    let inner_faces: Vec<Var> = h.points().filter(|&(i, j)| inner(i, j)).collect();
    if inner_faces.is_empty() {
        return Err(DskpError::Invalid("target point is not above the initial surface".into()));
    }

    // Unit segments of Z^2 touching an inner face, each giving one edge.
    // Horizontal (i,j)-(i+1,j): key (0,i,j); vertical (i,j)-(i,j+1): key (1,i,j).
    let mut segments = std::collections::BTreeSet::new();
    for &(i, j) in &inner_faces {
        segments.insert((0, i, j));
        segments.insert((0, i - 1, j));
        segments.insert((1, i, j));
        segments.insert((1, i, j - 1));
    }
    let mut squares: BTreeMap<SquareKey, SquareShape> = BTreeMap::new();
    for &(i, j) in &inner_faces {
        for sq in [(i - 1, j - 1), (i, j - 1), (i - 1, j), (i, j)] {
            if let std::collections::btree_map::Entry::Vacant(e) = squares.entry(sq) {
                e.insert(square_shape(h, sq.0, sq.1)?);
            }
        }
    }

    let mut vid: BTreeMap<(SquareKey, Slot), usize> = BTreeMap::new();
    let mut pos: Vec<(f64, f64)> = Vec::new();
    let mut vertex = |sq: SquareKey, slot: Slot| -> usize {
        *vid.entry((sq, slot)).or_insert_with(|| {
            pos.push(slot_pos(sq, slot));
            pos.len() - 1
        })
    };
    // (u, v, face A, face B)
    let mut raw: Vec<(usize, usize, Var, Var)> = Vec::new();
    for &(dir, i, j) in &segments {
        let (sa, sb, fa, fb) = if dir == 0 {
            ((i, j - 1), (i, j), (i, j), (i + 1, j))
        } else {
            ((i - 1, j), (i, j), (i, j), (i, j + 1))
        };
        let (side_a, side_b) = if dir == 0 { (Side::N, Side::S) } else { (Side::E, Side::W) };
        let oa = owner(&squares[&sa], side_a);
        let ob = owner(&squares[&sb], side_b);
        let u = vertex(sa, oa);
        let v = vertex(sb, ob);
        raw.push((u, v, fa, fb));
    }
    for (&sq, shape) in &squares {
        if shape.cross {
            continue;
        }
        let faces: Vec<Var> = [(0, 0), (1, 0), (1, 1), (0, 1)]
            .into_iter()
            .filter(|c| !shape.ends.contains(c))
            .map(|(a, b)| (sq.0 + a, sq.1 + b))
            .collect();
        if !faces.iter().any(|&(a, b)| inner(a, b)) {
            continue;
        }
        let u = vertex(sq, Slot::Corner(shape.ends[0].0, shape.ends[0].1));
        let v = vertex(sq, Slot::Corner(shape.ends[1].0, shape.ends[1].1));
        raw.push((u, v, faces[0], faces[1]));
    }

    // Faces: inner first, then open, each sorted by label.
    let mut open: Vec<Var> = raw.iter().flat_map(|e| [e.2, e.3]).filter(|&(a, b)| !inner(a, b)).collect();
    open.sort();
    open.dedup();
    let mut faces: Vec<Face> = inner_faces.iter().map(|&label| Face { label, inner: true }).collect();
    faces.extend(open.iter().map(|&label| Face { label, inner: false }));
    let fidx: HashMap<Var, usize> = faces.iter().enumerate().map(|(n, f)| (f.label, n)).collect();

    let nv = pos.len();
    let mut adj = vec![Vec::new(); nv];
    for &(u, v, _, _) in &raw {
        adj[u].push(v);
        adj[v].push(u);
    }
    let colors = two_color(&adj, |v| {
        let key = vid.iter().find(|(_, &id)| id == v).map(|(k, _)| k.0).unwrap();
        (key.0 + key.1).rem_euclid(2) == 0
    })?;

    let mut edges = Vec::with_capacity(raw.len());
    for &(u, v, fa, fb) in &raw {
        let (w, b) = if colors[u] == Color::White { (u, v) } else { (v, u) };
        let (pw, pb) = (pos[w], pos[b]);
        let mid = ((pw.0 + pb.0) / 2.0, (pw.1 + pb.1) / 2.0);
        let dir = (pb.0 - pw.0, pb.1 - pw.1);
        let to_a = (fa.0 as f64 - mid.0, fa.1 as f64 - mid.1);
        let a_right = cross2(dir, to_a) < 0.0;
        let (ra, rb) = (fidx[&fa], fidx[&fb]);
        let (right_wb, right_bw) = if a_right { (ra, rb) } else { (rb, ra) };
        edges.push(Edge { w, b, right_wb, right_bw });
    }
    let vertices = (0..nv).map(|v| Vertex { color: colors[v], pos: pos[v] }).collect();
    let g = CwGraph { vertices, edges, faces };
    g.validate()?;
    Ok(g)
}

fn two_color(adj: &[Vec<usize>], root_white: impl Fn(usize) -> bool) -> Result<Vec<Color>> {
    let mut col: Vec<Option<Color>> = vec![None; adj.len()];
    for s in 0..adj.len() {
        if col[s].is_some() {
            continue;
        }
        col[s] = Some(if root_white(s) { Color::White } else { Color::Black });
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            let c = col[v].unwrap();
            for &u in &adj[v] {
                match col[u] {
                    None => {
                        col[u] = Some(c.other());
                        queue.push_back(u);
                    }
                    Some(cu) if cu == c => return Err(DskpError::Invalid("graph is not bipartite".into())),
                    _ => {}
                }
            }
        }
    }
    Ok(col.into_iter().map(Option::unwrap).collect())
}

/// Aztec diamond `A_k`: flat heights, central face `(0,0)` for odd `k` and
/// `(1,0)` for even `k`.
pub fn aztec(k: usize) -> Result<CwGraph> {
    if k == 0 {
        return Err(DskpError::Invalid("Aztec diamond size must be positive".into()));
    }
    let k = k as i32;
    let h = HeightFunction::flat(k + 2);
    build_cw_graph(&h, aztec_apex(k as usize))
}

/// Apex point whose graph is `A_k`.
pub fn aztec_apex(k: usize) -> LatticePoint {
    let k = k as i32;
    let i = if k % 2 == 1 { 0 } else { 1 };
    LatticePoint::new(i, 0, k + 1)
}

impl CwGraph {
    pub fn whites(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| self.vertices[v].color == Color::White).collect()
    }

    pub fn blacks(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| self.vertices[v].color == Color::Black).collect()
    }

    pub fn face_index(&self, label: Var) -> Option<usize> {
        self.faces.iter().position(|f| f.label == label)
    }

    pub fn inner_faces(&self) -> Vec<usize> {
        (0..self.faces.len()).filter(|&f| self.faces[f].inner).collect()
    }

    pub fn open_faces(&self) -> Vec<usize> {
        (0..self.faces.len()).filter(|&f| !self.faces[f].inner).collect()
    }

    pub fn face_edges(&self, f: usize) -> Vec<usize> {
        (0..self.edges.len()).filter(|&e| self.edges[e].right_wb == f || self.edges[e].right_bw == f).collect()
    }

    pub fn face_degree(&self, f: usize) -> usize {
        self.edges.iter().filter(|e| e.right_wb == f || e.right_bw == f).count()
    }

    pub fn vertex_edges(&self, v: usize) -> Vec<usize> {
        (0..self.edges.len()).filter(|&e| self.edges[e].w == v || self.edges[e].b == v).collect()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.vertex_edges(v).len()
    }

    pub fn other_end(&self, e: usize, v: usize) -> usize {
        let ed = &self.edges[e];
        if ed.w == v {
            ed.b
        } else {
            ed.w
        }
    }

    /// Faces to the right and to the left of `e` traversed away from `v`.
    pub fn sides_from(&self, e: usize, v: usize) -> (usize, usize) {
        let ed = &self.edges[e];
        if ed.w == v {
            (ed.right_wb, ed.right_bw)
        } else {
            (ed.right_bw, ed.right_wb)
        }
    }

    /// Vertices incident to at least two distinct open faces.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|&v| {
                let mut open: Vec<usize> = self
                    .vertex_edges(v)
                    .into_iter()
                    .flat_map(|e| [self.edges[e].right_wb, self.edges[e].right_bw])
                    .filter(|&f| !self.faces[f].inner)
                    .collect();
                open.sort_unstable();
                open.dedup();
                open.len() >= 2
            })
            .collect()
    }

    /// Vertices of an inner face, clockwise (the face lies on the right).
    pub fn face_cycle(&self, f: usize) -> Result<Vec<usize>> {
        let mut next: HashMap<usize, usize> = HashMap::new();
        for e in self.face_edges(f) {
            let ed = &self.edges[e];
            let (from, to) = if ed.right_wb == f { (ed.w, ed.b) } else { (ed.b, ed.w) };
            if next.insert(from, to).is_some() {
                return Err(DskpError::Invalid(format!("face {:?} is not a simple cycle", self.faces[f].label)));
            }
        }
        let Some(&start) = next.keys().min() else {
            return Ok(Vec::new());
        };
        let mut cycle = vec![start];
        let mut v = next[&start];
        while v != start {
            cycle.push(v);
            v = *next
                .get(&v)
                .ok_or_else(|| DskpError::Invalid(format!("face {:?} is not closed", self.faces[f].label)))?;
            if cycle.len() > next.len() {
                return Err(DskpError::Invalid("face walk does not close".into()));
            }
        }
        if cycle.len() != next.len() {
            return Err(DskpError::Invalid(format!("face {:?} is not a simple cycle", self.faces[f].label)));
        }
        Ok(cycle)
    }

    /// Edges at `v` in counterclockwise order. For a vertex on the outer
    /// boundary the order starts right after the gap between open faces.
    pub fn rotation(&self, v: usize) -> Result<Vec<usize>> {
        let es = self.vertex_edges(v);
        let succ = |e: usize| -> Option<usize> {
            let (_, left) = self.sides_from(e, v);
            es.iter().copied().find(|&e2| e2 != e && self.sides_from(e2, v).0 == left)
        };
        let has_pred: Vec<bool> = es.iter().map(|&e| es.iter().any(|&e2| succ(e2) == Some(e))).collect();
        let start = es.iter().zip(&has_pred).find(|(_, &p)| !p).map(|(&e, _)| e).unwrap_or(es[0]);
        let mut order = vec![start];
        let mut cur = start;
        while let Some(n) = succ(cur) {
            if n == start {
                break;
            }
            if order.contains(&n) {
                return Err(DskpError::Invalid("inconsistent rotation".into()));
            }
            order.push(n);
            cur = n;
        }
        if order.len() != es.len() {
            return Err(DskpError::Invalid(format!("rotation at vertex {v} is not a single fan")));
        }
        Ok(order)
    }

    pub fn validate(&self) -> Result<()> {
        for (n, e) in self.edges.iter().enumerate() {
            if self.vertices[e.w].color != Color::White || self.vertices[e.b].color != Color::Black {
                return Err(DskpError::Invalid(format!("edge {n} is not white-black")));
            }
            if e.right_wb == e.right_bw {
                return Err(DskpError::Invalid(format!("edge {n} has the same face on both sides")));
            }
        }
        for f in self.inner_faces() {
            if self.face_degree(f) % 2 != 0 {
                return Err(DskpError::Invalid(format!("inner face {:?} has odd degree", self.faces[f].label)));
            }
            self.face_cycle(f)?;
        }
        for e in &self.edges {
            if !self.faces[e.right_wb].inner && !self.faces[e.right_bw].inner {
                return Err(DskpError::Invalid("edge separating two open faces".into()));
            }
        }
        Ok(())
    }

    /// Weighted-face JSON dump.
    pub fn to_json(&self, phi: Option<&KasteleynOrientation>) -> serde_json::Value {
        let boundary = self.boundary_vertices();
        let vertices: Vec<_> = self
            .vertices
            .iter()
            .enumerate()
            .map(|(n, v)| {
                json!({
                    "id": n,
                    "color": if v.color == Color::White { "white" } else { "black" },
                    "pos": [v.pos.0, v.pos.1],
                    "boundary": boundary.contains(&n),
                })
            })
            .collect();
        let edges: Vec<_> = self
            .edges
            .iter()
            .enumerate()
            .map(|(n, e)| {
                let mut o = json!({
                    "w": e.w,
                    "b": e.b,
                    "right_wb": self.faces[e.right_wb].label,
                    "right_bw": self.faces[e.right_bw].label,
                });
                if let Some(p) = phi {
                    o["phi"] = json!(p.phi[n]);
                }
                o
            })
            .collect();
        let faces: Vec<_> = self
            .faces
            .iter()
            .enumerate()
            .map(|(n, f)| json!({"label": f.label, "inner": f.inner, "degree": self.face_degree(n)}))
            .collect();
        json!({"vertices": vertices, "edges": edges, "faces": faces})
    }

    fn remove_vertices(&mut self, dead: &[usize]) {
        let mut map = vec![usize::MAX; self.vertices.len()];
        let mut kept = Vec::new();
        for (v, vert) in self.vertices.iter().enumerate() {
            if !dead.contains(&v) {
                map[v] = kept.len();
                kept.push(vert.clone());
            }
        }
        self.vertices = kept;
        self.edges.retain(|e| !dead.contains(&e.w) && !dead.contains(&e.b));
        for e in &mut self.edges {
            e.w = map[e.w];
            e.b = map[e.b];
        }
    }
}

/// Kasteleyn signs from the face conditions, solved over GF(2).
pub fn kasteleyn_orientation(g: &CwGraph) -> Result<KasteleynOrientation> {
    let ne = g.edges.len();
    let words = ne / 64 + 1;
    // Rows: edge bitset plus right-hand side in bit `ne`.
    let mut rows: Vec<Vec<u64>> = Vec::new();
    for f in g.inner_faces() {
        let mut row = vec![0u64; words];
        let es = g.face_edges(f);
        for &e in &es {
            row[e / 64] |= 1 << (e % 64);
        }
        if (es.len() / 2 + 1) % 2 == 1 {
            row[ne / 64] |= 1 << (ne % 64);
        }
        rows.push(row);
    }
    let bit = |r: &Vec<u64>, c: usize| (r[c / 64] >> (c % 64)) & 1 == 1;
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ne {
        let Some(p) = (r..rows.len()).find(|&i| bit(&rows[i], c)) else {
            continue;
        };
        rows.swap(r, p);
        let pr = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && bit(row, c) {
                for (x, y) in row.iter_mut().zip(&pr) {
                    *x ^= y;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    if rows[r..].iter().any(|row| bit(row, ne)) {
        return Err(DskpError::Invalid("no Kasteleyn orientation exists".into()));
    }
    let mut phi = vec![1i8; ne];
    for (i, &c) in pivots.iter().enumerate() {
        if bit(&rows[i], ne) {
            phi[c] = -1;
        }
    }
    let k = KasteleynOrientation { phi };
    debug_assert!(is_kasteleyn(g, &k));
    Ok(k)
}

/// Checks the face condition on every inner face.
pub fn is_kasteleyn(g: &CwGraph, k: &KasteleynOrientation) -> bool {
    k.phi.len() == g.edges.len()
        && g.inner_faces().into_iter().all(|f| {
            let es = g.face_edges(f);
            let prod: i32 = es.iter().map(|&e| k.phi[e] as i32).product();
            let want = if (es.len() / 2 + 1) % 2 == 0 { 1 } else { -1 };
            prod == want
        })
}

/// Another Kasteleyn orientation, differing by a sign flip at vertex `v`.
pub fn gauge_flip(g: &CwGraph, k: &KasteleynOrientation, v: usize) -> KasteleynOrientation {
    let mut phi = k.phi.clone();
    for e in g.vertex_edges(v) {
        phi[e] = -phi[e];
    }
    KasteleynOrientation { phi }
}

/// Result of a spider move at an inner square.
#[derive(Clone, Debug)]
pub struct SpiderMove {
    pub graph: CwGraph,
    pub phi: KasteleynOrientation,
    /// Surrounding faces in counterclockwise order, the first one across
    /// the edge `v1 v2`.
    pub around: [usize; 4],
}

/// Replaces the inner square `f` by a smaller square joined by four legs,
/// updating `phi` as negated on the square and `+1` on the legs.
pub fn spider_move(g: &CwGraph, phi: &KasteleynOrientation, f: usize) -> Result<SpiderMove> {
    if !g.faces.get(f).is_some_and(|x| x.inner) {
        return Err(DskpError::Invalid("spider move needs an inner face".into()));
    }
    let mut cyc = g.face_cycle(f)?;
    if cyc.len() != 4 {
        return Err(DskpError::Invalid(format!("face {:?} has degree {}, not 4", g.faces[f].label, cyc.len())));
    }
    cyc.reverse();
    let square: Vec<usize> = (0..4)
        .map(|i| {
            let (a, b) = (cyc[i], cyc[(i + 1) % 4]);
            g.face_edges(f).into_iter().find(|&e| {
                let ed = &g.edges[e];
                (ed.w == a && ed.b == b) || (ed.w == b && ed.b == a)
            })
        })
        .collect::<Option<_>>()
        .ok_or_else(|| DskpError::Invalid("square edges not found".into()))?;
    let around: Vec<usize> = square
        .iter()
        .map(|&e| if g.edges[e].right_wb == f { g.edges[e].right_bw } else { g.edges[e].right_wb })
        .collect();
    for a in 0..4 {
        for b in a + 1..4 {
            if around[a] == around[b] {
                return Err(DskpError::Invalid("spider move needs four distinct surrounding faces".into()));
            }
        }
    }

    let mut h = g.clone();
    let mut new_phi: Vec<i8> = phi.phi.clone();
    let centroid = cyc.iter().fold((0.0, 0.0), |acc, &v| (acc.0 + g.vertices[v].pos.0 / 4.0, acc.1 + g.vertices[v].pos.1 / 4.0));
    let u: Vec<usize> = cyc
        .iter()
        .map(|&v| {
            let p = g.vertices[v].pos;
            h.vertices.push(Vertex {
                color: g.vertices[v].color.other(),
                pos: ((p.0 + centroid.0) / 2.0, (p.1 + centroid.1) / 2.0),
            });
            h.vertices.len() - 1
        })
        .collect();
    // Square edges move inwards; swapping colors swaps the two sides.
    for i in 0..4 {
        let e = square[i];
        let old = g.edges[e].clone();
        let (a, b) = (u[i], u[(i + 1) % 4]);
        let (w, bl) = if h.vertices[a].color == Color::White { (a, b) } else { (b, a) };
        h.edges[e] = Edge { w, b: bl, right_wb: old.right_bw, right_bw: old.right_wb };
        new_phi[e] = -phi.phi[e];
    }
    for i in 0..4 {
        let (v, ui) = (cyc[i], u[i]);
        let (g_i, g_prev) = (around[i], around[(i + 3) % 4]);
        let e = if g.vertices[v].color == Color::White {
            Edge { w: v, b: ui, right_wb: g_i, right_bw: g_prev }
        } else {
            Edge { w: ui, b: v, right_wb: g_prev, right_bw: g_i }
        };
        h.edges.push(e);
        new_phi.push(1);
    }
    let out = KasteleynOrientation { phi: new_phi };
    h.validate()?;
    Ok(SpiderMove { graph: h, phi: out, around: [around[0], around[1], around[2], around[3]] })
}

/// New central weight for a spider move from the old central weight and the
/// surrounding weights in counterclockwise order.
pub fn spider_weight<F: Field>(
    center: &ProjectiveValue<F>,
    around: [&ProjectiveValue<F>; 4],
) -> Result<ProjectiveValue<F>> {
    // around[0..4] play the roles of south, east, north, west
    dskp_step(around[1], around[3], around[2], around[0], center)
}

/// Applies [`spider_move`] together with the weight update.
pub fn spider_move_weighted<F: Field>(
    g: &CwGraph,
    phi: &KasteleynOrientation,
    f: usize,
    a: &Weights<ProjectiveValue<F>>,
) -> Result<(SpiderMove, Weights<ProjectiveValue<F>>)> {
    let mv = spider_move(g, phi, f)?;
    let w = |face: usize| {
        a.get(&g.faces[face].label)
            .ok_or_else(|| DskpError::Invalid(format!("missing weight for {:?}", g.faces[face].label)))
    };
    let around = [w(mv.around[0])?, w(mv.around[1])?, w(mv.around[2])?, w(mv.around[3])?];
    let new_center = spider_weight(w(f)?, around)?;
    let mut out = a.clone();
    out.insert(g.faces[f].label, new_center);
    Ok((mv, out))
}

/// Splits vertex `v` into `v1 - u - v2`, the new edges separating the inner
/// faces `a1` and `a2`. Returns the new graph, the extended orientation and
/// the index of `u`.
pub fn expand_degree2(
    g: &CwGraph,
    phi: &KasteleynOrientation,
    v: usize,
    a1: usize,
    a2: usize,
) -> Result<(CwGraph, KasteleynOrientation, usize)> {
    if a1 == a2 || !g.faces[a1].inner || !g.faces[a2].inner {
        return Err(DskpError::Invalid("expansion needs two distinct inner faces".into()));
    }
    let rot = g.rotation(v)?;
    let n = rot.len();
    let gap = |face: usize| rot.iter().position(|&e| g.sides_from(e, v).1 == face);
    let (Some(t1), Some(t2)) = (gap(a1), gap(a2)) else {
        return Err(DskpError::Invalid("faces are not both incident to the vertex".into()));
    };
    let mut arc2 = Vec::new();
    let mut t = (t2 + 1) % n;
    loop {
        arc2.push(rot[t]);
        if t == t1 {
            break;
        }
        t = (t + 1) % n;
    }
    let mut h = g.clone();
    let color = g.vertices[v].color;
    let pos = g.vertices[v].pos;
    h.vertices.push(Vertex { color, pos });
    let v2 = h.vertices.len() - 1;
    h.vertices.push(Vertex { color: color.other(), pos });
    let u = h.vertices.len() - 1;
    for &e in &arc2 {
        if color == Color::White {
            h.edges[e].w = v2;
        } else {
            h.edges[e].b = v2;
        }
    }
    let mut new_phi = phi.phi.clone();
    let (e1, e2) = if color == Color::White {
        (
            Edge { w: v, b: u, right_wb: a2, right_bw: a1 },
            Edge { w: v2, b: u, right_wb: a1, right_bw: a2 },
        )
    } else {
        (
            Edge { w: u, b: v, right_wb: a1, right_bw: a2 },
            Edge { w: u, b: v2, right_wb: a2, right_bw: a1 },
        )
    };
    h.edges.push(e1);
    new_phi.push(1);
    h.edges.push(e2);
    new_phi.push(-1);
    h.validate()?;
    Ok((h, KasteleynOrientation { phi: new_phi }, u))
}

/// Removes the degree-2 vertex `u`, merging its two neighbours.
pub fn contract_degree2(g: &CwGraph, u: usize) -> Result<CwGraph> {
    let es = g.vertex_edges(u);
    if es.len() != 2 {
        return Err(DskpError::Invalid(format!("vertex {u} has degree {}, not 2", es.len())));
    }
    let (v1, v2) = (g.other_end(es[0], u), g.other_end(es[1], u));
    let (r, l) = g.sides_from(es[0], u);
    if v1 == v2 || r == l || !g.faces[r].inner || !g.faces[l].inner {
        return Err(DskpError::Invalid("contraction needs two distinct inner faces around the vertex".into()));
    }
    let mut h = g.clone();
    let nbrs1: Vec<usize> = g.vertex_edges(v1).into_iter().map(|e| g.other_end(e, v1)).collect();
    for (n, e) in g.edges.iter().enumerate() {
        if n == es[0] || n == es[1] {
            continue;
        }
        let other = if e.w == v2 { e.b } else if e.b == v2 { e.w } else { continue };
        if nbrs1.contains(&other) {
            return Err(DskpError::Invalid("contraction would create a multiple edge".into()));
        }
        if h.edges[n].w == v2 {
            h.edges[n].w = v1;
        } else {
            h.edges[n].b = v1;
        }
    }
    let mut drop = [es[0], es[1]];
    drop.sort_unstable();
    h.edges.remove(drop[1]);
    h.edges.remove(drop[0]);
    h.remove_vertices(&[u, v2]);
    h.validate()?;
    Ok(h)
}

/// All degree-2 vertices that can be contracted.
pub fn contractible_vertices(g: &CwGraph) -> Vec<usize> {
    (0..g.vertices.len()).filter(|&u| g.degree(u) == 2 && contract_degree2(g, u).is_ok()).collect()
}

/// Pairs of distinct inner faces around `v`, in rotation order.
pub fn expandable_pairs(g: &CwGraph, v: usize) -> Vec<(usize, usize)> {
    let Ok(rot) = g.rotation(v) else {
        return Vec::new();
    };
    let mut inner: Vec<usize> = rot.iter().map(|&e| g.sides_from(e, v).1).filter(|&f| g.faces[f].inner).collect();
    inner.dedup();
    let mut out = Vec::new();
    for a in 0..inner.len() {
        for b in a + 1..inner.len() {
            if inner[a] != inner[b] {
                out.push((inner[a], inner[b]));
            }
        }
    }
    out
}

/// Combinatorial fingerprint up to relabelling of vertices: the sorted list
/// of vertex face-neighbourhoods together with face degrees.
pub fn fingerprint(g: &CwGraph) -> (Vec<(Var, bool, usize)>, Vec<Vec<(Var, Var)>>) {
    let mut faces: Vec<(Var, bool, usize)> =
        (0..g.faces.len()).map(|f| (g.faces[f].label, g.faces[f].inner, g.face_degree(f))).collect();
    faces.sort();
    let mut verts: Vec<Vec<(Var, Var)>> = (0..g.vertices.len())
        .map(|v| {
            let mut s: Vec<(Var, Var)> = g
                .vertex_edges(v)
                .into_iter()
                .map(|e| {
                    let (r, l) = g.sides_from(e, v);
                    (g.faces[r].label, g.faces[l].label)
                })
                .collect();
            s.sort();
            s
        })
        .collect();
    verts.sort();
    (faces, verts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aztec_one_is_a_square() {
        let g = aztec(1).unwrap();
        assert_eq!(g.vertices.len(), 4);
        assert_eq!(g.edges.len(), 4);
        assert_eq!(g.inner_faces().len(), 1);
        assert_eq!(g.open_faces().len(), 4);
        assert_eq!(g.faces[0].label, (0, 0));
        assert_eq!(g.boundary_vertices().len(), 4);
        let k = kasteleyn_orientation(&g).unwrap();
        let prod: i32 = k.phi.iter().map(|&s| s as i32).product();
        assert_eq!(prod, -1);
    }

    #[test]
    fn aztec_counts() {
        for k in 1..=5usize {
            let g = aztec(k).unwrap();
            let kk = k as usize;
            assert_eq!(g.vertices.len(), 2 * kk * (kk + 1), "k={k}");
            assert_eq!(g.inner_faces().len(), 2 * kk * (kk - 1) + 1);
            assert_eq!(g.faces.len(), 2 * kk * (kk + 1) + 1);
            assert_eq!(g.open_faces().len(), 4 * kk);
            assert_eq!(g.whites().len(), g.blacks().len());
            assert!(g.inner_faces().iter().all(|&f| g.face_degree(f) == 4));
            let phi = kasteleyn_orientation(&g).unwrap();
            assert!(is_kasteleyn(&g, &phi));
            assert!(is_kasteleyn(&g, &gauge_flip(&g, &phi, 0)));
        }
    }

    #[test]
    fn wrench_graph_has_hexagons() {
        let h = HeightFunction::bump(6);
        let g = build_cw_graph(&h, LatticePoint::new(0, 0, 4)).unwrap();
        let degrees: Vec<usize> = g.inner_faces().iter().map(|&f| g.face_degree(f)).collect();
        assert!(degrees.contains(&6), "{degrees:?}");
        assert!(degrees.iter().all(|d| [4, 6, 8].contains(d)));
        assert_eq!(g.whites().len(), g.blacks().len());
        let phi = kasteleyn_orientation(&g).unwrap();
        assert!(is_kasteleyn(&g, &phi));
    }

    #[test]
    fn rotation_is_consistent() {
        let g = aztec(3).unwrap();
        for v in 0..g.vertices.len() {
            let rot = g.rotation(v).unwrap();
            assert_eq!(rot.len(), g.degree(v));
        }
    }

    #[test]
    fn expand_then_contract_is_identity() {
        let g = aztec(2).unwrap();
        let phi = kasteleyn_orientation(&g).unwrap();
        let mut tried = 0;
        for v in 0..g.vertices.len() {
            for (a1, a2) in expandable_pairs(&g, v) {
                let (h, phi2, u) = expand_degree2(&g, &phi, v, a1, a2).unwrap();
                assert!(is_kasteleyn(&h, &phi2));
                assert_eq!(h.face_degree(a1), g.face_degree(a1) + 2);
                let back = contract_degree2(&h, u).unwrap();
                assert_eq!(fingerprint(&back), fingerprint(&g));
                tried += 1;
            }
        }
        assert!(tried > 0);
    }

    #[test]
    fn spider_keeps_kasteleyn() {
        let g = aztec(3).unwrap();
        let phi = kasteleyn_orientation(&g).unwrap();
        let f = g.face_index((0, 0)).unwrap();
        let mv = spider_move(&g, &phi, f).unwrap();
        assert!(is_kasteleyn(&mv.graph, &mv.phi));
        assert_eq!(mv.graph.vertices.len(), g.vertices.len() + 4);
        for &a in &mv.around {
            assert_eq!(mv.graph.face_degree(a), g.face_degree(a) + 2);
        }
    }

    #[test]
    fn window_too_small_is_reported() {
        let h = HeightFunction::flat(2);
        assert!(matches!(build_cw_graph(&h, LatticePoint::new(0, 0, 6)), Err(DskpError::WindowTooSmall(..))));
    }
}
