//! A single apartment with its refined polysimplicial decomposition `[A_m]`.
//!
//! Rank-one systems use the coordinate `t` with `alpha(t) = t`. Rank-two
//! systems use coordinates in which the simple roots are the coordinate
//! functionals, so every root is an integer vector and every wall of
//! `[A_m]` is a line `<a, x> + c = 0` with `c` on a refined progression.

use crate::error::{Error, Result};
use crate::rational::{fmt_q, q, q_from_json, qi, rank as mat_rank, sign, solve, Q};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SystemName {
    A1,
    A2,
    C2,
    G2,
    A1xA1,
    BC1,
}

impl SystemName {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "A1" => Ok(Self::A1),
            "A2" => Ok(Self::A2),
            "C2" | "B2" => Ok(Self::C2),
            "G2" => Ok(Self::G2),
            "A1xA1" | "A1×A1" => Ok(Self::A1xA1),
            "BC1" | "SU3" => Ok(Self::BC1),
            other => Err(Error::UnsupportedSystem(other.to_string())),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::A1 => "A1",
            Self::A2 => "A2",
            Self::C2 => "C2",
            Self::G2 => "G2",
            Self::A1xA1 => "A1xA1",
            Self::BC1 => "BC1",
        }
    }
}

/// Admissible constants `offset + step * Z` for the affine roots over one root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Progression {
    pub offset: Q,
    pub step: Q,
}

impl Progression {
    pub fn contains(&self, c: Q) -> bool {
        ((c - self.offset) / self.step).is_integer()
    }

    /// The progression refined by a factor `m`.
    pub fn refine(&self, m: u32) -> Progression {
        Progression {
            offset: self.offset,
            step: self.step / qi(m as i64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootSystemSpec {
    pub name: SystemName,
    pub rank: usize,
    pub roots: Vec<Vec<i64>>,
    pub inner_product: Vec<Vec<Q>>,
    pub progressions: Vec<Progression>,
    /// Coordinate indices of each simple factor.
    pub components: Vec<Vec<usize>>,
    pub delta: i64,
}

fn with_negatives(pos: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let mut out = pos.to_vec();
    out.extend(pos.iter().map(|r| r.iter().map(|a| -a).collect::<Vec<_>>()));
    out
}

fn is_positive(root: &[i64]) -> bool {
    root.iter().find(|a| **a != 0).is_some_and(|a| *a > 0)
}

impl RootSystemSpec {
    pub fn new(name: SystemName, delta: i64) -> Result<Self> {
        if delta != 0 && delta != -1 {
            return Err(Error::Invalid(format!(
                "delta must be 0 or -1, got {delta}"
            )));
        }
        let unit = Progression {
            offset: Q::zero(),
            step: Q::one(),
        };
        let (rank, pos, ip, comps): (usize, Vec<Vec<i64>>, Vec<Vec<Q>>, Vec<Vec<usize>>) =
            match name {
                SystemName::A1 | SystemName::BC1 => {
                    (1, vec![vec![1]], vec![vec![qi(1)]], vec![vec![0]])
                }
                SystemName::A2 => (
                    2,
                    vec![vec![1, 0], vec![0, 1], vec![1, 1]],
                    vec![vec![q(2, 3), q(1, 3)], vec![q(1, 3), q(2, 3)]],
                    vec![vec![0, 1]],
                ),
                SystemName::C2 => (
                    2,
                    vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![2, 1]],
                    vec![vec![qi(1), qi(1)], vec![qi(1), qi(2)]],
                    vec![vec![0, 1]],
                ),
                SystemName::G2 => (
                    2,
                    vec![
                        vec![1, 0],
                        vec![0, 1],
                        vec![1, 1],
                        vec![2, 1],
                        vec![3, 1],
                        vec![3, 2],
                    ],
                    vec![vec![qi(2), qi(3)], vec![qi(3), qi(6)]],
                    vec![vec![0, 1]],
                ),
                SystemName::A1xA1 => (
                    2,
                    vec![vec![1, 0], vec![0, 1]],
                    vec![vec![qi(1), qi(0)], vec![qi(0), qi(1)]],
                    vec![vec![0], vec![1]],
                ),
            };
        let mut roots = with_negatives(&pos);
        let mut progressions = vec![unit; roots.len()];
        if name == SystemName::BC1 {
            let d = qi(delta);
            let p_alpha = Progression {
                offset: d / qi(4),
                step: q(1, 2),
            };
            let p_double = Progression {
                offset: (d + qi(1)) / qi(2),
                step: qi(1),
            };
            roots = vec![vec![1], vec![-1], vec![2], vec![-2]];
            progressions = vec![p_alpha, p_alpha, p_double, p_double];
        }
        Ok(Self {
            name,
            rank,
            roots,
            inner_product: ip,
            progressions,
            components: comps,
            delta,
        })
    }

    pub fn from_name(name: &str, delta: i64) -> Result<Self> {
        Self::new(SystemName::parse(name)?, delta)
    }

    /// Positive roots whose walls tile the apartment, with their progressions.
    /// Divisible roots of the non-reduced system are excluded.
    pub fn wall_roots(&self) -> Vec<(Vec<i64>, Progression)> {
        self.roots
            .iter()
            .zip(&self.progressions)
            .filter(|(r, _)| is_positive(r))
            .filter(|(r, _)| !(self.name == SystemName::BC1 && r[0] == 2))
            .map(|(r, p)| (r.clone(), *p))
            .collect()
    }

    pub fn progression_of(&self, root: &[i64]) -> Option<Progression> {
        self.roots
            .iter()
            .position(|r| r == root)
            .map(|i| self.progressions[i])
    }

    fn is_split(&self) -> bool {
        self.name != SystemName::BC1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point(pub Vec<Q>);

impl Point {
    pub fn new(coords: Vec<Q>) -> Self {
        Point(coords)
    }

    pub fn from_ints(c: &[i64]) -> Self {
        Point(c.iter().map(|&a| qi(a)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn add(&self, o: &Point) -> Point {
        Point(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, o: &Point) -> Point {
        Point(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: Q) -> Point {
        Point(self.0.iter().map(|a| a * s).collect())
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.0.iter().map(fmt_q).collect()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.to_strings().join(","))
    }
}

pub fn barycenter(pts: &[Point]) -> Point {
    let n = pts[0].dim();
    let k = qi(pts.len() as i64);
    Point(
        (0..n)
            .map(|i| pts.iter().map(|p| p.0[i]).sum::<Q>() / k)
            .collect(),
    )
}

/// Dimension of the affine span.
pub fn affine_dim(pts: &[Point]) -> usize {
    if pts.len() <= 1 {
        return 0;
    }
    let rows: Vec<Vec<Q>> = pts[1..].iter().map(|p| p.sub(&pts[0]).0).collect();
    mat_rank(rows)
}

/// An affine function `x -> <root, x> + constant`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AffineFunctional {
    pub root: Vec<i64>,
    pub constant: Q,
}

impl AffineFunctional {
    pub fn new(root: Vec<i64>, constant: Q) -> Self {
        Self { root, constant }
    }

    pub fn eval(&self, x: &Point) -> Q {
        self.root
            .iter()
            .zip(&x.0)
            .map(|(a, c)| qi(*a) * c)
            .sum::<Q>()
            + self.constant
    }

    pub fn linear(&self, x: &Point) -> Q {
        self.root
            .iter()
            .zip(&x.0)
            .map(|(a, c)| qi(*a) * c)
            .sum::<Q>()
    }

    pub fn neg(&self) -> Self {
        Self {
            root: self.root.iter().map(|a| -a).collect(),
            constant: -self.constant,
        }
    }
}

impl fmt::Display for AffineFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}+{}", self.root, fmt_q(&self.constant))
    }
}

/// A cell of `[A_m]`, encoded by the sorted extreme points of its closure.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Polysimplex {
    pub level: u32,
    pub vertices: Vec<Point>,
    pub dim: usize,
}

impl Polysimplex {
    pub fn new(level: u32, mut vertices: Vec<Point>) -> Self {
        vertices.sort();
        vertices.dedup();
        let dim = affine_dim(&vertices);
        Self {
            level,
            vertices,
            dim,
        }
    }

    pub fn vertex(level: u32, p: Point) -> Self {
        Self {
            level,
            vertices: vec![p],
            dim: 0,
        }
    }

    pub fn barycenter(&self) -> Point {
        barycenter(&self.vertices)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "vertices": self.vertices.iter().map(|v| v.to_strings()).collect::<Vec<_>>(),
            "dim": self.dim,
        })
    }
}

impl fmt::Display for Polysimplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vs: Vec<String> = self.vertices.iter().map(|v| v.to_string()).collect();
        write!(f, "[{}]", vs.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub bounds: Vec<(Q, Q)>,
}

impl Window {
    pub fn new(bounds: Vec<(Q, Q)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::DegenerateWindow("no coordinates".into()));
        }
        for (lo, hi) in &bounds {
            if lo >= hi {
                return Err(Error::DegenerateWindow(format!(
                    "[{}, {}]",
                    fmt_q(lo),
                    fmt_q(hi)
                )));
            }
        }
        Ok(Self { bounds })
    }

    pub fn cube(rank: usize, lo: Q, hi: Q) -> Result<Self> {
        Self::new(vec![(lo, hi); rank])
    }

    pub fn ints(rank: usize, lo: i64, hi: i64) -> Result<Self> {
        Self::cube(rank, qi(lo), qi(hi))
    }

    pub fn contains(&self, x: &Point) -> bool {
        x.0.len() == self.bounds.len()
            && x.0
                .iter()
                .zip(&self.bounds)
                .all(|(c, (lo, hi))| lo <= c && c <= hi)
    }

    pub fn padded(&self, pad: Q) -> Self {
        Self {
            bounds: self
                .bounds
                .iter()
                .map(|(lo, hi)| (lo - pad, hi + pad))
                .collect(),
        }
    }

    /// Range of the linear part of `root` over the box.
    pub fn linear_range(&self, root: &[i64]) -> (Q, Q) {
        let mut lo = Q::zero();
        let mut hi = Q::zero();
        for (a, (l, h)) in root.iter().zip(&self.bounds) {
            let (x, y) = (qi(*a) * l, qi(*a) * h);
            lo += x.min(y);
            hi += x.max(y);
        }
        (lo, hi)
    }

    pub fn diameter_bound(&self) -> Q {
        self.bounds.iter().map(|(lo, hi)| hi - lo).sum()
    }
}

/// JSON document describing an apartment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApartmentConfig {
    pub system: String,
    #[serde(default)]
    pub delta: i64,
    pub m: u32,
    pub window: Vec<[serde_json::Value; 2]>,
}

impl ApartmentConfig {
    pub fn build(&self) -> Result<Apartment> {
        let spec = RootSystemSpec::from_name(&self.system, self.delta)?;
        let bounds = self
            .window
            .iter()
            .map(|[a, b]| Ok((q_from_json(a)?, q_from_json(b)?)))
            .collect::<Result<Vec<_>>>()?;
        Apartment::build(spec, self.m, Window::new(bounds)?)
    }
}

/// A finite piece of `[A_m]`: every cell whose closure lies in the window.
#[derive(Debug, Clone)]
pub struct Apartment {
    pub spec: RootSystemSpec,
    pub m: u32,
    pub window: Window,
    cells: Vec<Polysimplex>,
    index: HashMap<Vec<Point>, usize>,
    faces: Vec<Vec<usize>>,
    cofaces: Vec<Vec<usize>>,
    lines: Vec<AffineFunctional>,
    signs: Vec<Vec<i8>>,
    by_sign: HashMap<Vec<i8>, usize>,
    bary: Vec<Point>,
}

/// Level-one cells of a rank-two split system whose barycenter lies in `[0,1)^2`.
fn anchored_tile(name: SystemName) -> &'static Vec<Vec<Point>> {
    static CACHE: OnceLock<std::sync::Mutex<HashMap<SystemName, &'static Vec<Vec<Point>>>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().expect("tile cache poisoned");
    if let Some(t) = guard.get(&name) {
        return t;
    }
    let spec = RootSystemSpec::new(name, 0).expect("known system");
    let tile: &'static Vec<Vec<Point>> = Box::leak(Box::new(compute_anchored_tile(&spec)));
    guard.insert(name, tile);
    tile
}

fn compute_anchored_tile(spec: &RootSystemSpec) -> Vec<Vec<Point>> {
    let bx = Window::ints(2, -1, 2).expect("box");
    let mut lines = Vec::new();
    for (root, _) in spec.wall_roots() {
        let (lo, hi) = bx.linear_range(&root);
        for k in lo.to_integer()..=hi.to_integer() {
            lines.push(AffineFunctional::new(root.clone(), qi(-k)));
        }
    }
    // Vertices: intersections of non-parallel lines inside the box.
    let mut verts = BTreeSet::new();
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let (a, b) = (&lines[i], &lines[j]);
            let det = a.root[0] * b.root[1] - a.root[1] * b.root[0];
            if det == 0 {
                continue;
            }
            let x = solve(
                vec![
                    vec![qi(a.root[0]), qi(a.root[1])],
                    vec![qi(b.root[0]), qi(b.root[1])],
                ],
                vec![-a.constant, -b.constant],
            )
            .expect("non-parallel");
            let p = Point(x);
            if bx.contains(&p) {
                verts.insert(p);
            }
        }
    }
    let verts: Vec<Point> = verts.into_iter().collect();
    let sv = |p: &Point| -> Vec<i8> { lines.iter().map(|l| sign(l.eval(p))).collect() };
    let vsig: Vec<Vec<i8>> = verts.iter().map(sv).collect();

    // Sample one point per 2-cell by stepping off each edge midpoint.
    let mut seen: BTreeSet<Vec<i8>> = BTreeSet::new();
    let mut cells2: Vec<Vec<Point>> = Vec::new();
    for (li, l) in lines.iter().enumerate() {
        let mut on: Vec<&Point> = verts
            .iter()
            .zip(&vsig)
            .filter(|(_, s)| s[li] == 0)
            .map(|(p, _)| p)
            .collect();
        on.sort();
        for w in on.windows(2) {
            let mid = barycenter(&[w[0].clone(), w[1].clone()]);
            let normal = if l.root[0] != 0 {
                Point(vec![q(1, l.root[0]), Q::zero()])
            } else {
                Point(vec![Q::zero(), q(1, l.root[1])])
            };
            let mut eps = qi(1);
            for o in &lines {
                let v = o.eval(&mid);
                let slope = o.linear(&normal);
                if !v.is_zero() && !slope.is_zero() {
                    let bound = (v / slope).abs();
                    if bound < eps * qi(2) {
                        eps = bound / qi(2);
                    }
                }
            }
            for dir in [1i64, -1] {
                let p = mid.add(&normal.scale(eps * qi(dir)));
                let s = sv(&p);
                if !seen.insert(s.clone()) {
                    continue;
                }
                let closure: Vec<Point> = verts
                    .iter()
                    .zip(&vsig)
                    .filter(|(_, vs)| vs.iter().zip(&s).all(|(a, b)| *a == 0 || a == b))
                    .map(|(v, _)| v.clone())
                    .collect();
                if polygon_is_closed(&closure, &lines) {
                    cells2.push(closure);
                }
            }
        }
    }
    let mut all: BTreeSet<Vec<Point>> = BTreeSet::new();
    for c in &cells2 {
        for f in polygon_faces(c, &lines) {
            all.insert(f);
        }
    }
    all.into_iter()
        .filter(|vs| {
            let b = barycenter(vs);
            b.0.iter().all(|c| c.floor().is_zero())
        })
        .collect()
}

/// Boundary edges of a convex polygon given by its closure points.
fn polygon_edges(vs: &[Point], lines: &[AffineFunctional]) -> Vec<(Point, Point)> {
    let mut edges = Vec::new();
    for l in lines {
        let mut on: Vec<Point> = vs.iter().filter(|v| l.eval(v).is_zero()).cloned().collect();
        if on.len() < 2 {
            continue;
        }
        let signs: BTreeSet<i8> = vs
            .iter()
            .map(|v| sign(l.eval(v)))
            .filter(|s| *s != 0)
            .collect();
        if signs.len() != 1 {
            continue;
        }
        on.sort();
        for w in on.windows(2) {
            edges.push((w[0].clone(), w[1].clone()));
        }
    }
    edges
}

fn polygon_is_closed(vs: &[Point], lines: &[AffineFunctional]) -> bool {
    if vs.len() < 3 || affine_dim(vs) != 2 {
        return false;
    }
    let edges = polygon_edges(vs, lines);
    let mut deg: HashMap<&Point, usize> = HashMap::new();
    for (a, b) in &edges {
        *deg.entry(a).or_default() += 1;
        *deg.entry(b).or_default() += 1;
    }
    vs.iter().all(|v| deg.get(v) == Some(&2))
}

fn polygon_faces(vs: &[Point], lines: &[AffineFunctional]) -> Vec<Vec<Point>> {
    let mut out = vec![vs.to_vec()];
    for (a, b) in polygon_edges(vs, lines) {
        out.push(vec![a, b]);
    }
    for v in vs {
        out.push(vec![v.clone()]);
    }
    out
}

impl Apartment {
    pub fn build(spec: RootSystemSpec, m: u32, window: Window) -> Result<Self> {
        if m == 0 {
            return Err(Error::Invalid("m must be positive".into()));
        }
        if window.bounds.len() != spec.rank {
            return Err(Error::DimensionMismatch {
                expected: spec.rank,
                got: window.bounds.len(),
            });
        }
        let mq = qi(m as i64);
        let mut cells: BTreeSet<Vec<Point>> = BTreeSet::new();
        if spec.rank == 1 {
            let (_, prog) = spec.wall_roots()[0].clone();
            let pr = prog.refine(m);
            // zeros of t + c lie at t = -c
            let (lo, hi) = window.bounds[0];
            let first = crate::rational::round_up_progression(lo, -pr.offset, pr.step, false);
            let mut pts = Vec::new();
            let mut t = first;
            while t <= hi {
                pts.push(Point(vec![t]));
                t += pr.step;
            }
            for p in &pts {
                cells.insert(vec![p.clone()]);
            }
            for w in pts.windows(2) {
                cells.insert(w.to_vec());
            }
        } else {
            if !spec.is_split() {
                return Err(Error::UnsupportedSystem(spec.name.as_str().into()));
            }
            let tile = anchored_tile(spec.name);
            let rng = |(lo, hi): (Q, Q)| {
                (
                    (lo * mq).floor().to_integer() - 1,
                    (hi * mq).ceil().to_integer() + 1,
                )
            };
            let (i0, i1) = rng(window.bounds[0]);
            let (j0, j1) = rng(window.bounds[1]);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    let shift = Point::from_ints(&[i, j]);
                    for c in tile {
                        let moved: Vec<Point> = c
                            .iter()
                            .map(|v| v.add(&shift).scale(Q::one() / mq))
                            .collect();
                        if moved.iter().all(|v| window.contains(v)) {
                            let mut s = moved;
                            s.sort();
                            cells.insert(s);
                        }
                    }
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::DegenerateWindow("window contains no cell".into()));
        }
        let cells: Vec<Polysimplex> = cells
            .into_iter()
            .map(|vs| Polysimplex::new(m, vs))
            .collect();
        let mut index = HashMap::new();
        for (i, c) in cells.iter().enumerate() {
            index.insert(c.vertices.clone(), i);
        }
        let mut by_vertex: HashMap<&Point, Vec<usize>> = HashMap::new();
        for (i, c) in cells.iter().enumerate() {
            for v in &c.vertices {
                by_vertex.entry(v).or_default().push(i);
            }
        }
        let mut faces = vec![Vec::new(); cells.len()];
        let mut cofaces = vec![Vec::new(); cells.len()];
        for (i, c) in cells.iter().enumerate() {
            let mut cand: BTreeSet<usize> = BTreeSet::new();
            for v in &c.vertices {
                cand.extend(by_vertex[v].iter().copied());
            }
            for j in cand {
                let f = &cells[j];
                if f.vertices
                    .iter()
                    .all(|v| c.vertices.binary_search(v).is_ok())
                {
                    faces[i].push(j);
                    cofaces[j].push(i);
                }
            }
        }
        let mut lines = Vec::new();
        for (root, prog) in spec.wall_roots() {
            let pr = prog.refine(m);
            let (lo, hi) = window.linear_range(&root);
            // zero set meets the box iff -c lies in [lo, hi]
            let mut c = crate::rational::round_up_progression(-hi, pr.offset, pr.step, false);
            while c <= -lo {
                lines.push(AffineFunctional::new(root.clone(), c));
                c += pr.step;
            }
        }
        let bary: Vec<Point> = cells.iter().map(|c| c.barycenter()).collect();
        let signs: Vec<Vec<i8>> = bary
            .iter()
            .map(|b| lines.iter().map(|l| sign(l.eval(b))).collect())
            .collect();
        let mut by_sign = HashMap::new();
        for (i, s) in signs.iter().enumerate() {
            by_sign.insert(s.clone(), i);
        }
        Ok(Self {
            spec,
            m,
            window,
            cells,
            index,
            faces,
            cofaces,
            lines,
            signs,
            by_sign,
            bary,
        })
    }

    pub fn rank(&self) -> usize {
        self.spec.rank
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Polysimplex] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> &Polysimplex {
        &self.cells[i]
    }

    pub fn dim(&self, i: usize) -> usize {
        self.cells[i].dim
    }

    pub fn barycenter(&self, i: usize) -> &Point {
        &self.bary[i]
    }

    pub fn index_of(&self, c: &Polysimplex) -> Result<usize> {
        self.index
            .get(&c.vertices)
            .copied()
            .ok_or(Error::CellNotInApartment)
    }

    pub fn index_of_vertices(&self, vs: &[Point]) -> Result<usize> {
        let mut v = vs.to_vec();
        v.sort();
        self.index.get(&v).copied().ok_or(Error::CellNotInApartment)
    }

    pub fn vertex_index(&self, x: &Point) -> Result<usize> {
        self.index
            .get(&vec![x.clone()])
            .copied()
            .ok_or(Error::NotAVertex)
    }

    /// Indices of all faces of cell `i`, including `i`.
    pub fn face_ids(&self, i: usize) -> &[usize] {
        &self.faces[i]
    }

    /// Indices of all cells having `i` as a face, including `i`.
    pub fn coface_ids(&self, i: usize) -> &[usize] {
        &self.cofaces[i]
    }

    pub fn is_face(&self, tau: usize, sigma: usize) -> bool {
        self.faces[sigma].binary_search(&tau).is_ok()
    }

    pub fn faces(&self, c: &Polysimplex) -> Result<Vec<Polysimplex>> {
        let i = self.index_of(c)?;
        Ok(self.faces[i]
            .iter()
            .map(|&j| self.cells[j].clone())
            .collect())
    }

    pub fn chamber_ids(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.cells[i].dim == self.rank())
            .collect()
    }

    pub fn vertex_ids(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.cells[i].dim == 0)
            .collect()
    }

    /// Positive-root walls whose zero set meets the window.
    pub fn lines(&self) -> &[AffineFunctional] {
        &self.lines
    }

    pub fn sign_vector(&self, i: usize) -> &[i8] {
        &self.signs[i]
    }

    pub fn sign_of(&self, psi: &AffineFunctional, i: usize) -> i8 {
        sign(psi.eval(&self.bary[i]))
    }

    pub fn locate(&self, x: &Point) -> Result<usize> {
        if !self.window.contains(x) {
            return Err(Error::OutsideWindow);
        }
        let s: Vec<i8> = self.lines.iter().map(|l| sign(l.eval(x))).collect();
        self.by_sign.get(&s).copied().ok_or(Error::OutsideWindow)
    }

    pub fn cell_by_sign(&self, s: &[i8]) -> Option<usize> {
        self.by_sign.get(s).copied()
    }

    /// Sign vector of the cell entered when leaving `from` towards `to`.
    pub fn departure_signs(&self, from: &Point, to: &Point) -> Vec<i8> {
        let dir = to.sub(from);
        self.lines
            .iter()
            .map(|l| {
                let v = sign(l.eval(from));
                if v != 0 {
                    v
                } else {
                    sign(l.linear(&dir))
                }
            })
            .collect()
    }

    /// True when every cell whose closure contains cell `i` lies in the window.
    /// Every cell of `[A_m]` sits inside one square of the grid `(1/m)Z^rank`,
    /// so a margin of `1/m` around the vertices suffices.
    pub fn star_complete(&self, i: usize) -> bool {
        let margin = Q::one() / qi(self.m as i64);
        self.cells[i].vertices.iter().all(|v| {
            v.0.iter()
                .zip(&self.window.bounds)
                .all(|(c, (lo, hi))| *lo + margin <= *c && *c <= *hi - margin)
        })
    }

    /// The walls of a chamber, oriented to be positive on it.
    pub fn simple_affine_roots(&self, i: usize) -> Result<Vec<AffineFunctional>> {
        if self.dim(i) != self.rank() {
            return Err(Error::NotAChamber);
        }
        let mut out = BTreeSet::new();
        for &f in &self.faces[i] {
            if self.dim(f) + 1 != self.rank() {
                continue;
            }
            let walls: Vec<usize> = (0..self.lines.len())
                .filter(|&l| self.signs[f][l] == 0)
                .collect();
            debug_assert_eq!(walls.len(), 1);
            for l in walls {
                let line = &self.lines[l];
                let psi = if self.signs[i][l] > 0 {
                    line.clone()
                } else {
                    line.neg()
                };
                out.insert(psi);
            }
        }
        Ok(out.into_iter().collect())
    }

    /// Positive coefficients `n_psi` with `sum n_psi psi == 1`, solved per simple factor.
    pub fn partition_of_unity(&self, i: usize) -> Result<Vec<(AffineFunctional, Q)>> {
        let delta = self.simple_affine_roots(i)?;
        let k = qi(self.spec.components.len() as i64);
        let mut out = Vec::new();
        for comp in &self.spec.components {
            let group: Vec<&AffineFunctional> = delta
                .iter()
                .filter(|psi| {
                    psi.root
                        .iter()
                        .enumerate()
                        .all(|(j, a)| *a == 0 || comp.contains(&j))
                })
                .collect();
            let n = group.len();
            if n != comp.len() + 1 {
                return Err(Error::Singular);
            }
            let mut a = vec![vec![Q::zero(); n]; n];
            let mut b = vec![Q::zero(); n];
            for (row, &j) in comp.iter().enumerate() {
                for (col, psi) in group.iter().enumerate() {
                    a[row][col] = qi(psi.root[j]);
                }
            }
            for (col, psi) in group.iter().enumerate() {
                a[n - 1][col] = psi.constant;
            }
            b[n - 1] = Q::one();
            let x = solve(a, b)?;
            for (psi, c) in group.into_iter().zip(x) {
                out.push((psi.clone(), c / k));
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(self.cells.iter().map(|c| c.to_json()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a1(m: u32, lo: i64, hi: i64) -> Apartment {
        Apartment::build(
            RootSystemSpec::new(SystemName::A1, 0).unwrap(),
            m,
            Window::ints(1, lo, hi).unwrap(),
        )
        .unwrap()
    }

    fn rank2(name: SystemName, m: u32, lo: i64, hi: i64) -> Apartment {
        Apartment::build(
            RootSystemSpec::new(name, 0).unwrap(),
            m,
            Window::ints(2, lo, hi).unwrap(),
        )
        .unwrap()
    }

    fn p1(n: i64, d: i64) -> Point {
        Point(vec![q(n, d)])
    }

    #[test]
    fn a1_unit_window_counts() {
        let apt = a1(1, -2, 2);
        assert_eq!(apt.len(), 9);
        assert_eq!(apt.vertex_ids().len(), 5);
        assert_eq!(apt.chamber_ids().len(), 4);
    }

    #[test]
    fn a1_half_subdivision() {
        let apt = a1(2, 0, 1);
        assert_eq!(apt.len(), 5);
        let vs: Vec<Point> = apt
            .vertex_ids()
            .iter()
            .map(|&i| apt.cell(i).vertices[0].clone())
            .collect();
        assert_eq!(vs, vec![p1(0, 1), p1(1, 2), p1(1, 1)]);
    }

    #[test]
    fn faces_of_edge_and_vertex() {
        let apt = a1(1, -2, 2);
        let e = Polysimplex::new(1, vec![p1(0, 1), p1(1, 1)]);
        let fs = apt.faces(&e).unwrap();
        assert_eq!(fs.len(), 3);
        assert!(fs.contains(&Polysimplex::vertex(1, p1(0, 1))));
        assert!(fs.contains(&Polysimplex::vertex(1, p1(1, 1))));
        assert_eq!(
            apt.faces(&Polysimplex::vertex(1, p1(0, 1))).unwrap().len(),
            1
        );
        assert_eq!(
            apt.faces(&Polysimplex::vertex(1, p1(7, 1))),
            Err(Error::CellNotInApartment)
        );
    }

    #[test]
    fn simple_roots_and_unity_in_rank_one() {
        let apt = a1(1, -2, 2);
        let c = apt.index_of_vertices(&[p1(0, 1), p1(1, 1)]).unwrap();
        let d = apt.simple_affine_roots(c).unwrap();
        assert_eq!(d.len(), 2);
        assert!(d.contains(&AffineFunctional::new(vec![1], qi(0))));
        assert!(d.contains(&AffineFunctional::new(vec![-1], qi(1))));
        let pu = apt.partition_of_unity(c).unwrap();
        assert!(pu.iter().all(|(_, n)| *n == qi(1)));

        let apt2 = a1(2, 0, 1);
        let c2 = apt2.index_of_vertices(&[p1(0, 1), p1(1, 2)]).unwrap();
        let d2 = apt2.simple_affine_roots(c2).unwrap();
        assert!(d2.contains(&AffineFunctional::new(vec![1], qi(0))));
        assert!(d2.contains(&AffineFunctional::new(vec![-1], q(1, 2))));
        let pu2 = apt2.partition_of_unity(c2).unwrap();
        assert!(pu2.iter().all(|(_, n)| *n == qi(2)));
        assert_eq!(
            apt.simple_affine_roots(apt.vertex_index(&p1(0, 1)).unwrap()),
            Err(Error::NotAChamber)
        );
    }

    #[test]
    fn locate_rank_one() {
        let apt = a1(1, -2, 2);
        let e = apt.locate(&p1(1, 3)).unwrap();
        assert_eq!(apt.cell(e).vertices, vec![p1(0, 1), p1(1, 1)]);
        let v = apt.locate(&p1(1, 1)).unwrap();
        assert_eq!(apt.cell(v).vertices, vec![p1(1, 1)]);
        assert_eq!(apt.locate(&p1(5, 1)), Err(Error::OutsideWindow));
    }

    /// Independent oracle: enumerate sign vectors of a dense rational grid
    /// together with all line intersections, over lines with |c| <= 5.
    fn brute_force_cell_count(spec: &RootSystemSpec, lo: i64, hi: i64) -> usize {
        let mut lines = Vec::new();
        for (root, _) in spec.wall_roots() {
            for c in -5..=5 {
                lines.push(AffineFunctional::new(root.clone(), qi(c)));
            }
        }
        let win = Window::ints(2, lo, hi).unwrap();
        let den = 12;
        // A sign vector is a cell inside the window when it is realised by a
        // grid point of the window and by no grid point of the surrounding ring.
        let mut groups: HashMap<Vec<i8>, Vec<Point>> = HashMap::new();
        let mut outside: BTreeSet<Vec<i8>> = BTreeSet::new();
        for i in ((lo - 1) * den)..=((hi + 1) * den) {
            for j in ((lo - 1) * den)..=((hi + 1) * den) {
                let p = Point(vec![q(i, den), q(j, den)]);
                let s: Vec<i8> = lines.iter().map(|l| sign(l.eval(&p))).collect();
                if !win.contains(&p) {
                    outside.insert(s);
                } else {
                    groups.entry(s).or_default().push(p);
                }
            }
        }
        groups.keys().filter(|s| !outside.contains(*s)).count()
    }

    #[test]
    fn a2_count_matches_independent_enumerator() {
        let spec = RootSystemSpec::new(SystemName::A2, 0).unwrap();
        let apt = Apartment::build(spec.clone(), 1, Window::ints(2, -2, 2).unwrap()).unwrap();
        assert_eq!(apt.len(), brute_force_cell_count(&spec, -2, 2));
    }

    #[test]
    fn other_rank_two_counts_match_enumerator() {
        for name in [SystemName::C2, SystemName::A1xA1] {
            let spec = RootSystemSpec::new(name, 0).unwrap();
            let apt = Apartment::build(spec.clone(), 1, Window::ints(2, -1, 1).unwrap()).unwrap();
            assert_eq!(apt.len(), brute_force_cell_count(&spec, -1, 1), "{name:?}");
        }
    }

    #[test]
    fn a2_chamber_has_seven_faces() {
        let apt = rank2(SystemName::A2, 1, -2, 2);
        for c in apt.chamber_ids() {
            assert_eq!(apt.face_ids(c).len(), 7);
            assert_eq!(apt.simple_affine_roots(c).unwrap().len(), 3);
        }
    }

    #[test]
    fn product_chamber_has_nine_faces() {
        let apt = rank2(SystemName::A1xA1, 1, -1, 1);
        for c in apt.chamber_ids() {
            assert_eq!(apt.face_ids(c).len(), 9);
            let pu = apt.partition_of_unity(c).unwrap();
            assert_eq!(pu.len(), 4);
        }
    }

    #[test]
    fn partition_of_unity_everywhere() {
        for name in [
            SystemName::A2,
            SystemName::C2,
            SystemName::G2,
            SystemName::A1xA1,
        ] {
            for m in [1, 2] {
                let apt = rank2(name, m, -1, 1);
                for c in apt.chamber_ids() {
                    let pu = apt.partition_of_unity(c).unwrap();
                    assert!(pu.iter().all(|(_, n)| *n > Q::zero()));
                    for v in apt.face_ids(c).iter().filter(|&&f| apt.dim(f) == 0) {
                        let x = &apt.cell(*v).vertices[0];
                        let total: Q = pu.iter().map(|(psi, n)| *n * psi.eval(x)).sum();
                        assert_eq!(total, Q::one());
                    }
                }
            }
        }
    }

    /// Number of fine `d`-cells inside each coarse `d`-cell, keyed by coarse cell.
    fn refinement_profile(name: SystemName, m: u32, d: usize) -> HashMap<usize, usize> {
        let coarse = rank2(name, 1, 0, 2);
        let fine = rank2(name, m, 0, 2);
        let mut per: HashMap<usize, usize> = HashMap::new();
        for i in 0..fine.len() {
            if fine.dim(i) != d {
                continue;
            }
            let host = coarse.locate(fine.barycenter(i)).unwrap();
            for v in &fine.cell(i).vertices {
                let hv = coarse.locate(v).unwrap();
                assert!(coarse.is_face(hv, host), "fine cell escapes its host");
            }
            if coarse.dim(host) == d {
                *per.entry(host).or_default() += 1;
            }
        }
        per
    }

    #[test]
    fn refinement_counts() {
        for name in [SystemName::A2, SystemName::C2, SystemName::A1xA1] {
            for m in [2u32, 3] {
                for d in 0..=2usize {
                    for (_, n) in refinement_profile(name, m, d) {
                        assert_eq!(n, (m as usize).pow(d as u32), "{name:?} m={m} d={d}");
                    }
                }
            }
        }
        for m in [2u32, 3] {
            for (_, n) in refinement_profile(SystemName::G2, m, 2) {
                assert_eq!(n, (m as usize).pow(2));
            }
        }
    }

    /// In G2 the refined walls do not cut every coarse edge into m pieces:
    /// the edge from (3/2,2) to (5/3,2) survives unsubdivided at m = 2.
    #[test]
    fn g2_edge_refinement_witness() {
        let coarse = rank2(SystemName::G2, 1, 0, 2);
        let fine = rank2(SystemName::G2, 2, 0, 2);
        let edge = vec![Point(vec![q(3, 2), qi(2)]), Point(vec![q(5, 3), qi(2)])];
        assert!(coarse.index_of_vertices(&edge).is_ok());
        assert!(fine.index_of_vertices(&edge).is_ok());
        let profile = refinement_profile(SystemName::G2, 2, 1);
        assert!(profile.values().any(|&n| n == 1));
        assert!(profile.values().any(|&n| n == 2));
    }

    #[test]
    fn cells_have_constant_signs() {
        let apt = rank2(SystemName::G2, 2, -1, 1);
        for i in 0..apt.len() {
            for l in apt.lines() {
                let b = sign(l.eval(apt.barycenter(i)));
                for v in &apt.cell(i).vertices {
                    let s = sign(l.eval(v));
                    assert!(s == 0 || s == b);
                }
                if b == 0 {
                    assert!(apt.cell(i).vertices.iter().all(|v| l.eval(v).is_zero()));
                }
            }
        }
    }

    #[test]
    fn bc1_vertices_follow_refined_progression() {
        let spec = RootSystemSpec::new(SystemName::BC1, -1).unwrap();
        let apt = Apartment::build(spec, 1, Window::ints(1, 0, 1).unwrap()).unwrap();
        let vs: Vec<Q> = apt
            .vertex_ids()
            .iter()
            .map(|&i| apt.cell(i).vertices[0].0[0])
            .collect();
        assert_eq!(vs, vec![q(1, 4), q(3, 4)]);
        assert!(RootSystemSpec::new(SystemName::BC1, 1).is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg: ApartmentConfig =
            serde_json::from_str(r#"{"system":"A1","m":2,"window":[["0","1"]]}"#).unwrap();
        assert_eq!(cfg.build().unwrap().len(), 5);
        let bad: ApartmentConfig =
            serde_json::from_str(r#"{"system":"E8","m":1,"window":[[0,1]]}"#).unwrap();
        assert!(matches!(bad.build(), Err(Error::UnsupportedSystem(_))));
        let degenerate: ApartmentConfig =
            serde_json::from_str(r#"{"system":"A1","m":1,"window":[[1,1]]}"#).unwrap();
        assert!(matches!(
            degenerate.build(),
            Err(Error::DegenerateWindow(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn locate_inverts_barycenter(m in 1u32..3, sys in 0usize..4) {
            let name = [SystemName::A2, SystemName::C2, SystemName::G2, SystemName::A1xA1][sys];
            let apt = rank2(name, m, -1, 1);
            for i in 0..apt.len() {
                prop_assert_eq!(apt.locate(apt.barycenter(i)).unwrap(), i);
            }
        }

        #[test]
        fn face_relation_is_a_partial_order(lo in -3i64..0, w in 1i64..4, m in 1u32..4) {
            let apt = a1(m, lo, lo + w);
            for i in 0..apt.len() {
                prop_assert!(apt.is_face(i, i));
                for &j in apt.face_ids(i) {
                    if j != i { prop_assert!(!apt.is_face(i, j)); }
                    for &k in apt.face_ids(j) { prop_assert!(apt.is_face(k, i)); }
                }
            }
        }
    }
}
