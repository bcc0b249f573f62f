//! Basic subcomplexes `Gamma_s(sigma', x)`, chamber sets `Upsilon_{x,s}`,
//! the retraction `m_{x,s}` with its maximal elements, intervals, and convexity.
//!
//! Cells are handled by their index in an [`Apartment`]. Membership tests
//! range over the walls meeting the window; a wall missing the window has
//! constant sign on every cell of it and cannot separate two cells.

use crate::affine_apartment::{
    AffineFunctional, Apartment, Point, Polysimplex, RootSystemSpec, SystemName, Window,
};
use crate::error::{Error, Result};
use crate::rational::{qi, sign, Q};
use num_traits::Zero;
use std::collections::BTreeSet;

/// A set of cells of one apartment.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SubComplex {
    pub cells: BTreeSet<usize>,
}

impl SubComplex {
    pub fn new(cells: impl IntoIterator<Item = usize>) -> Self {
        Self {
            cells: cells.into_iter().collect(),
        }
    }

    /// Smallest face-closed set containing `cells`.
    pub fn closure(apt: &Apartment, cells: impl IntoIterator<Item = usize>) -> Self {
        let mut out = BTreeSet::new();
        for c in cells {
            out.extend(apt.face_ids(c).iter().copied());
        }
        Self { cells: out }
    }

    /// All cells whose closure lies in the box `bounds`.
    pub fn in_box(apt: &Apartment, bounds: &[(Q, Q)]) -> Self {
        let w = Window {
            bounds: bounds.to_vec(),
        };
        Self::new((0..apt.len()).filter(|&i| apt.cell(i).vertices.iter().all(|v| w.contains(v))))
    }

    pub fn in_int_box(apt: &Apartment, lo: i64, hi: i64) -> Self {
        Self::in_box(apt, &vec![(qi(lo), qi(hi)); apt.rank()])
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.cells.contains(&i)
    }

    pub fn is_subset(&self, other: &SubComplex) -> bool {
        self.cells.is_subset(&other.cells)
    }

    pub fn is_face_closed(&self, apt: &Apartment) -> bool {
        self.cells
            .iter()
            .all(|&c| apt.face_ids(c).iter().all(|f| self.cells.contains(f)))
    }

    pub fn polysimplices(&self, apt: &Apartment) -> Vec<Polysimplex> {
        self.cells.iter().map(|&i| apt.cell(i).clone()).collect()
    }

    pub fn vertex_points(&self, apt: &Apartment) -> Vec<Point> {
        let mut out = BTreeSet::new();
        for &c in &self.cells {
            out.extend(apt.cell(c).vertices.iter().cloned());
        }
        out.into_iter().collect()
    }
}

/// Values of every wall at `x`, in the order of [`Apartment::lines`].
pub fn wall_values(apt: &Apartment, x: &Point) -> Vec<Q> {
    apt.lines().iter().map(|l| l.eval(x)).collect()
}

/// `sigma` lies in `Gamma_s(sigma', x)` given the wall values at `x`.
pub fn in_gamma_with(apt: &Apartment, sigma: usize, sigma_p: usize, xv: &[Q], s: Q) -> bool {
    let a = apt.sign_vector(sigma_p);
    let b = apt.sign_vector(sigma);
    for l in 0..xv.len() {
        for o in [1i8, -1] {
            let psi_sp = o * a[l];
            let psi_x = if o > 0 { xv[l] } else { -xv[l] };
            if psi_sp <= 0 && psi_x <= s && o * b[l] > 0 {
                return false;
            }
        }
    }
    true
}

pub fn in_gamma(apt: &Apartment, sigma: usize, sigma_p: usize, x: &Point, s: Q) -> bool {
    in_gamma_with(apt, sigma, sigma_p, &wall_values(apt, x), s)
}

fn check_vertex(apt: &Apartment, x: &Point) -> Result<usize> {
    apt.vertex_index(x)
}

fn check_s(s: Q) -> Result<()> {
    if s < Q::zero() {
        return Err(Error::Invalid("s must be nonnegative".into()));
    }
    Ok(())
}

pub fn gamma(apt: &Apartment, sigma_p: usize, x: &Point, s: Q) -> Result<SubComplex> {
    check_vertex(apt, x)?;
    check_s(s)?;
    let xv = wall_values(apt, x);
    Ok(SubComplex::new(
        (0..apt.len()).filter(|&c| in_gamma_with(apt, c, sigma_p, &xv, s)),
    ))
}

/// Chambers of `apt` whose simple affine roots are all at most `s` at `x`.
pub fn upsilon(apt: &Apartment, x: &Point, s: Q) -> Result<BTreeSet<usize>> {
    check_vertex(apt, x)?;
    check_s(s)?;
    let mut out = BTreeSet::new();
    for c in apt.chamber_ids() {
        if apt
            .simple_affine_roots(c)?
            .iter()
            .all(|psi| psi.eval(x) <= s)
        {
            out.insert(c);
        }
    }
    Ok(out)
}

/// Largest coordinate of `x - y` over `y` in a chamber of `Upsilon_{x,1}`.
///
/// For a chamber with simple affine roots `D`, every `y` in it satisfies
/// `alpha_psi(x - y) < s` for `psi` in `D`, a bounded simplex in `x - y`.
/// The bound is the largest vertex coordinate of that simplex over all
/// gradient patterns `D` that occur, and it scales linearly in `s`.
pub fn upsilon_radius(spec: &RootSystemSpec) -> Result<Q> {
    static CACHE: std::sync::OnceLock<std::sync::Mutex<std::collections::HashMap<SystemName, Q>>> =
        std::sync::OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(r) = cache.lock().expect("radius cache").get(&spec.name) {
        return Ok(*r);
    }
    let r = compute_upsilon_radius(spec)?;
    cache.lock().expect("radius cache").insert(spec.name, r);
    Ok(r)
}

fn compute_upsilon_radius(spec: &RootSystemSpec) -> Result<Q> {
    let apt = Apartment::build(spec.clone(), 1, Window::ints(spec.rank, -2, 2)?)?;
    let rank = spec.rank;
    let mut best = Q::zero();
    let mut seen: BTreeSet<Vec<Vec<i64>>> = BTreeSet::new();
    for c in apt.chamber_ids() {
        let mut grads: Vec<Vec<i64>> = apt
            .simple_affine_roots(c)?
            .into_iter()
            .map(|p| p.root)
            .collect();
        grads.sort();
        if !seen.insert(grads.clone()) {
            continue;
        }
        for skip in 0..grads.len() {
            let rows: Vec<&Vec<i64>> = grads
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, g)| g)
                .collect();
            for pick in subsets(rows.len(), rank) {
                let a: Vec<Vec<Q>> = pick
                    .iter()
                    .map(|&i| rows[i].iter().map(|&v| qi(v)).collect())
                    .collect();
                if let Ok(v) = crate::rational::solve(a, vec![qi(1); rank]) {
                    let p = Point(v);
                    if grads
                        .iter()
                        .all(|g| AffineFunctional::new(g.clone(), Q::zero()).eval(&p) <= qi(1))
                    {
                        for c in &p.0 {
                            best = best.max(num_traits::Signed::abs(c));
                        }
                    }
                }
            }
        }
    }
    Ok(best)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Padding used when computing `Upsilon_{x,s}` on a window centred at `x`.
pub fn upsilon_padding(spec: &RootSystemSpec, s: Q) -> Result<Q> {
    Ok((upsilon_radius(spec)? * s).max(qi(1)))
}

/// `Upsilon_{x,s}` computed in a fresh window around `x` padded by `pad`,
/// returned as polysimplices so that different paddings can be compared.
pub fn upsilon_padded(
    spec: &RootSystemSpec,
    m: u32,
    x: &Point,
    s: Q,
    pad: Q,
) -> Result<BTreeSet<Polysimplex>> {
    let window = Window::new(x.0.iter().map(|c| (c - pad, c + pad)).collect())?;
    let apt = Apartment::build(spec.clone(), m, window)?;
    Ok(upsilon(&apt, x, s)?
        .into_iter()
        .map(|c| apt.cell(c).clone())
        .collect())
}

/// Minimal faces `tau` of `sigma` with `sigma` in `Gamma_s(tau, x)`, by exhaustive search.
pub fn minimal_faces_exhaustive(apt: &Apartment, x: &Point, s: Q, sigma: usize) -> Vec<usize> {
    let xv = wall_values(apt, x);
    let good: Vec<usize> = apt
        .face_ids(sigma)
        .iter()
        .copied()
        .filter(|&t| in_gamma_with(apt, sigma, t, &xv, s))
        .collect();
    good.iter()
        .copied()
        .filter(|&t| !good.iter().any(|&u| u != t && apt.is_face(u, t)))
        .collect()
}

/// Which chamber to use in the constructive computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChamberChoice {
    First,
    Last,
}

/// The constructive retraction: walk from the barycenter of `sigma` towards `x`,
/// pick a chamber containing the cell entered, and cut by its vanishing pattern.
/// Fails with `Precondition` when the needed chamber is outside the window.
pub fn min_face_constructive(
    apt: &Apartment,
    x: &Point,
    s: Q,
    sigma: usize,
    choice: ChamberChoice,
) -> Result<usize> {
    let xi = check_vertex(apt, x)?;
    if sigma == xi {
        return Ok(xi);
    }
    let y = apt.barycenter(sigma).clone();
    let entered = apt
        .cell_by_sign(&apt.departure_signs(&y, x))
        .ok_or_else(|| Error::Precondition("cell towards x leaves the window".into()))?;
    let chambers: Vec<usize> = apt
        .coface_ids(entered)
        .iter()
        .copied()
        .filter(|&c| apt.dim(c) == apt.rank())
        .collect();
    if chambers.is_empty() || !apt.star_complete(entered) {
        return Err(Error::Precondition(
            "star of the entered cell leaves the window".into(),
        ));
    }
    let chamber = match choice {
        ChamberChoice::First => chambers[0],
        ChamberChoice::Last => chambers[chambers.len() - 1],
    };
    let delta = apt.simple_affine_roots(chamber)?;
    let bary = apt.barycenter(sigma);
    let mut zero: BTreeSet<AffineFunctional> = BTreeSet::new();
    for comp in &apt.spec.components {
        let on_x = comp
            .iter()
            .all(|&j| apt.cell(sigma).vertices.iter().all(|v| v.0[j] == x.0[j]));
        for psi in delta.iter().filter(|p| {
            p.root
                .iter()
                .enumerate()
                .all(|(j, a)| *a == 0 || comp.contains(&j))
        }) {
            if psi.eval(bary).is_zero() || (!on_x && psi.eval(x) > s) {
                zero.insert(psi.clone());
            }
        }
    }
    apt.face_ids(chamber)
        .iter()
        .copied()
        .find(|&f| {
            let b = apt.barycenter(f);
            delta
                .iter()
                .all(|psi| psi.eval(b).is_zero() == zero.contains(psi))
        })
        .ok_or_else(|| Error::Precondition("no face with the prescribed vanishing pattern".into()))
}

/// `m_{x,s}(sigma)`. Uses the constructive procedure when the window allows it,
/// otherwise the exhaustive search, and always verifies minimality.
pub fn min_face(apt: &Apartment, x: &Point, s: Q, sigma: usize) -> Result<usize> {
    check_vertex(apt, x)?;
    check_s(s)?;
    let mins = minimal_faces_exhaustive(apt, x, s, sigma);
    if mins.len() != 1 {
        return Err(Error::Precondition(format!(
            "expected a unique minimal face of {}, found {}",
            apt.cell(sigma),
            mins.len()
        )));
    }
    match min_face_constructive(apt, x, s, sigma, ChamberChoice::First) {
        Ok(c) if c == mins[0] => Ok(c),
        Ok(c) => Err(Error::Precondition(format!(
            "constructive retraction {} disagrees with exhaustive {}",
            apt.cell(c),
            apt.cell(mins[0])
        ))),
        Err(_) => Ok(mins[0]),
    }
}

/// The unique maximal coface of `sigma_p` inside `Gamma_s(sigma_p, x)`.
pub fn max_polysimplex(apt: &Apartment, x: &Point, s: Q, sigma_p: usize) -> Result<usize> {
    if min_face(apt, x, s, sigma_p)? != sigma_p {
        return Err(Error::Precondition(format!(
            "{} is not fixed by the retraction",
            apt.cell(sigma_p)
        )));
    }
    if !apt.star_complete(sigma_p) {
        return Err(Error::Precondition("star leaves the window".into()));
    }
    let xv = wall_values(apt, x);
    let cands: Vec<usize> = apt
        .coface_ids(sigma_p)
        .iter()
        .copied()
        .filter(|&c| in_gamma_with(apt, c, sigma_p, &xv, s))
        .collect();
    let top = *cands
        .iter()
        .max_by_key(|&&c| apt.dim(c))
        .expect("sigma_p is its own coface");
    if cands.iter().any(|&c| !apt.is_face(c, top)) {
        return Err(Error::Precondition("no unique maximal element".into()));
    }
    Ok(top)
}

/// All `tau` with `lo <= tau <= hi`.
pub fn interval(apt: &Apartment, lo: usize, hi: usize) -> Result<Vec<usize>> {
    if !apt.is_face(lo, hi) {
        return Err(Error::Precondition(
            "lower end is not a face of the upper end".into(),
        ));
    }
    Ok(apt
        .face_ids(hi)
        .iter()
        .copied()
        .filter(|&t| apt.is_face(lo, t))
        .collect())
}

/// Smallest convex subcomplex containing the given cells: all cells on the
/// nonnegative side of every wall half-space that contains their vertices.
pub fn convex_hull(apt: &Apartment, cells: impl IntoIterator<Item = usize>) -> SubComplex {
    let seed = SubComplex::closure(apt, cells);
    let verts = seed.vertex_points(apt);
    let halves = containing_halves(apt, &verts);
    SubComplex::new((0..apt.len()).filter(|&c| {
        let sv = apt.sign_vector(c);
        halves.iter().all(|&(l, o)| o * sv[l] >= 0)
    }))
}

fn containing_halves(apt: &Apartment, verts: &[Point]) -> Vec<(usize, i8)> {
    let mut halves = Vec::new();
    for (l, line) in apt.lines().iter().enumerate() {
        let signs: BTreeSet<i8> = verts.iter().map(|v| sign(line.eval(v))).collect();
        if !signs.contains(&-1) {
            halves.push((l, 1));
        }
        if !signs.contains(&1) {
            halves.push((l, -1));
        }
    }
    halves
}

/// Convexity via the half-space description: the cells cut out by every wall
/// half-space containing all vertices of `sigma` must be exactly `sigma`.
pub fn is_convex(apt: &Apartment, sigma: &SubComplex) -> bool {
    if sigma.is_empty() {
        return true;
    }
    if !sigma.is_face_closed(apt) {
        return false;
    }
    let halves = containing_halves(apt, &sigma.vertex_points(apt));
    (0..apt.len()).all(|c| {
        let sv = apt.sign_vector(c);
        let inside = halves.iter().all(|&(l, o)| o * sv[l] >= 0);
        inside == sigma.contains(c)
    })
}

/// Cells met by the closed segment `[p, q]`, or `None` if it leaves the window.
pub fn segment_trace(apt: &Apartment, p: &Point, q: &Point) -> Option<BTreeSet<usize>> {
    let dir = q.sub(p);
    let mut ts: BTreeSet<Q> = BTreeSet::new();
    ts.insert(Q::zero());
    ts.insert(qi(1));
    for l in apt.lines() {
        let slope = l.linear(&dir);
        if !slope.is_zero() {
            let t = -l.eval(p) / slope;
            if t > Q::zero() && t < qi(1) {
                ts.insert(t);
            }
        }
    }
    let ts: Vec<Q> = ts.into_iter().collect();
    let mut samples = ts.clone();
    samples.extend(ts.windows(2).map(|w| (w[0] + w[1]) / qi(2)));
    let mut out = BTreeSet::new();
    for t in samples {
        out.insert(apt.locate(&p.add(&dir.scale(t))).ok()?);
    }
    Some(out)
}

/// Convexity oracle: every segment between barycenters or vertices of `sigma`
/// only meets cells of `sigma`.
pub fn is_convex_by_segments(apt: &Apartment, sigma: &SubComplex) -> bool {
    if !sigma.is_face_closed(apt) {
        return false;
    }
    let pts: Vec<Point> = sigma
        .cells
        .iter()
        .map(|&c| apt.barycenter(c).clone())
        .collect();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            match segment_trace(apt, &pts[i], &pts[j]) {
                Some(tr) if tr.iter().all(|c| sigma.contains(*c)) => {}
                _ => return false,
            }
        }
    }
    true
}

/// `m_{x,s}` evaluated on every cell of `domain`.
pub fn retraction_map(
    apt: &Apartment,
    x: &Point,
    s: Q,
    domain: &SubComplex,
) -> Result<std::collections::BTreeMap<usize, usize>> {
    domain
        .cells
        .iter()
        .map(|&t| Ok((t, min_face(apt, x, s, t)?)))
        .collect()
}

/// The fiber of `m_{x,s}` over `sigma_p` among cells of `domain`.
pub fn fiber(
    apt: &Apartment,
    x: &Point,
    s: Q,
    sigma_p: usize,
    domain: &SubComplex,
) -> Result<BTreeSet<usize>> {
    Ok(retraction_map(apt, x, s, domain)?
        .into_iter()
        .filter(|(_, v)| *v == sigma_p)
        .map(|(k, _)| k)
        .collect())
}
