//! Finite quotient model of `sl2` and its dual, the additive character of
//! conductor `(p)`, and the Fourier transform.
//!
//! A coordinate lives in `p^{-A} Z / p^B Z`, stored as `u in [0, p^{A+B})` with
//! value `u / p^A`. An element is a triple in `(e, h, f)` order, where `e`
//! carries the root `alpha`, `h` the torus and `f` the root `-alpha`. The
//! pairing is diagonal, so the character of a pairing factors over the three
//! coordinates and every transform here is separable.

use crate::affine_apartment::{Apartment, Point, SystemName};
use crate::convex_combinatorics::{is_convex, SubComplex};
use crate::error::{Error, Result};
use crate::moy_prasad_lattices::{dual_spec, lattice_spec, FiltrationSpec};
use crate::rational::{fmt_q, Q};
use crate::sl2_padic_engine::{enumerate_group, lie_class, rlog, GroupSpec, Level, R};
use num_complex::Complex64;
use num_traits::Zero;
use serde_json::json;
use std::collections::BTreeMap;
use std::f64::consts::PI;

pub const TOLERANCE: f64 = 1e-9;
const DENSE_LIMIT: usize = 60_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FiniteLieModel {
    pub p: u64,
    pub a: u32,
    pub b: u32,
}

/// Thresholds in `(e, h, f)` order.
pub type Triple = [i64; 3];

pub fn triple(spec: &FiltrationSpec) -> Triple {
    [
        spec.threshold(&[1]).unwrap(),
        spec.torus,
        spec.threshold(&[-1]).unwrap(),
    ]
}

impl FiniteLieModel {
    pub fn new(p: u64, a: u32, b: u32) -> Result<Self> {
        if !crate::sl2_padic_engine::is_prime(p as i128) {
            return Err(Error::Invalid(format!("{p} is not prime")));
        }
        if b < a + 1 {
            return Err(Error::Invalid(format!(
                "need B >= A + 1 for the character to descend (A={a}, B={b})"
            )));
        }
        if ((a + b) as f64) * (p as f64).log2() > 24.0 {
            return Err(Error::Budget {
                needed: p.pow(a + b),
                budget: 1 << 24,
            });
        }
        Ok(Self { p, a, b })
    }

    /// Smallest model holding every threshold in `cs` and its dual.
    pub fn fitting(p: u64, cs: impl IntoIterator<Item = i64>) -> Result<Self> {
        let (mut lo, mut hi) = (0i64, 0i64);
        for c in cs {
            lo = lo.min(c).min(1 - c);
            hi = hi.max(c).max(1 - c);
        }
        let a = (-lo) as u32;
        Self::new(p, a, (hi as u32 + 1).max(a + 1))
    }

    /// Number of points on one coordinate axis.
    pub fn axis(&self) -> usize {
        self.p.pow(self.a + self.b) as usize
    }

    pub fn size(&self) -> usize {
        self.axis().pow(3)
    }

    /// A lattice with threshold above `B` truncates to zero and its dual to
    /// the whole model, which is still faithful; thresholds below `-A` are not.
    pub fn fits(&self, c: i64) -> bool {
        c >= -(self.a as i64)
    }

    fn check(&self, t: &Triple) -> Result<()> {
        if t.iter().all(|&c| self.fits(c)) {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "thresholds {t:?} do not fit the model (A={}, B={})",
                self.a, self.b
            )))
        }
    }

    /// Valuation of the coordinate `u`; `None` means zero in the model.
    pub fn val(&self, u: usize) -> Option<i64> {
        if u == 0 {
            return None;
        }
        let mut v = 0i64;
        let mut x = u as u64;
        while x % self.p == 0 {
            x /= self.p;
            v += 1;
        }
        Some(v - self.a as i64)
    }

    /// Representative coordinate of valuation `v`, or zero for `None`.
    pub fn rep(&self, v: Option<i64>) -> usize {
        match v {
            None => 0,
            Some(v) => self.p.pow((v + self.a as i64) as u32) as usize,
        }
    }

    /// Valuations that occur on one axis, including zero.
    pub fn valuations(&self) -> Vec<Option<i64>> {
        let mut out: Vec<Option<i64>> = (-(self.a as i64)..self.b as i64).map(Some).collect();
        out.push(None);
        out
    }

    fn meets(&self, u: usize, c: i64) -> bool {
        self.val(u).is_none_or(|v| v >= c)
    }

    /// `psi(x * y)` for coordinates `x = u/p^A`, `y = v/p^A`.
    pub fn psi_pair(&self, u: usize, v: usize) -> Complex64 {
        let modulus = self.p.pow(2 * self.a + 1) as u128;
        let k = (u as u128 * v as u128) % modulus;
        Complex64::from_polar(1.0, 2.0 * PI * k as f64 / modulus as f64)
    }

    /// `psi(x)` for a single coordinate.
    pub fn psi(&self, u: usize) -> Complex64 {
        let modulus = self.p.pow(self.a + 1) as u64;
        let k = u as u64 % modulus;
        Complex64::from_polar(1.0, 2.0 * PI * k as f64 / modulus as f64)
    }
}

/// One-dimensional transform `F(h)(u) = sum_v psi(uv) h(v)`.
pub fn dft1(model: &FiniteLieModel, h: &[Complex64]) -> Vec<Complex64> {
    let n = model.axis();
    (0..n)
        .map(|u| {
            (0..n)
                .filter(|&v| !h[v].is_zero())
                .map(|v| model.psi_pair(u, v) * h[v])
                .sum()
        })
        .collect()
}

/// Dense transform on all of the model, one axis at a time.
pub fn fourier(model: &FiniteLieModel, h: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = model.axis();
    if h.len() != n * n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n * n,
            got: h.len(),
        });
    }
    let kernel: Vec<Complex64> = (0..n * n).map(|i| model.psi_pair(i / n, i % n)).collect();
    let mut cur = h.to_vec();
    for axis in 0..3 {
        let stride = n.pow(2 - axis as u32);
        let mut next = vec![Complex64::zero(); cur.len()];
        for base in 0..cur.len() {
            if (base / stride) % n != 0 {
                continue;
            }
            for u in 0..n {
                let mut acc = Complex64::zero();
                for v in 0..n {
                    acc += kernel[u * n + v] * cur[base + v * stride];
                }
                next[base + u * stride] = acc;
            }
        }
        cur = next;
    }
    Ok(cur)
}

pub fn index(model: &FiniteLieModel, e: usize, h: usize, f: usize) -> usize {
    let n = model.axis();
    (e * n + h) * n + f
}

pub fn coords(model: &FiniteLieModel, i: usize) -> [usize; 3] {
    let n = model.axis();
    [i / (n * n), (i / n) % n, i % n]
}

/// Uniform probability measure on the lattice with thresholds `t`.
pub fn lattice_measure(model: &FiniteLieModel, t: &Triple) -> Result<Vec<Complex64>> {
    model.check(t)?;
    let n = model.axis();
    let mut out = vec![Complex64::zero(); n * n * n];
    let mut count = 0usize;
    for (i, slot) in out.iter_mut().enumerate() {
        let c = coords(model, i);
        if (0..3).all(|k| model.meets(c[k], t[k])) {
            *slot = Complex64::new(1.0, 0.0);
            count += 1;
        }
    }
    for x in out.iter_mut() {
        *x /= count as f64;
    }
    Ok(out)
}

pub fn lattice_indicator(model: &FiniteLieModel, t: &Triple) -> Vec<i64> {
    let n = model.axis();
    (0..n * n * n)
        .map(|i| {
            let c = coords(model, i);
            i64::from((0..3).all(|k| model.meets(c[k], t[k])))
        })
        .collect()
}

fn dual_triple(t: &Triple) -> Triple {
    [1 - t[0], 1 - t[1], 1 - t[2]]
}

/// Check outcome in the `{check, instance, max_error | exact, pass}` shape.
#[derive(Debug, Clone)]
pub struct FourierReport {
    pub check: String,
    pub instance: serde_json::Value,
    pub max_error: Option<f64>,
    pub pass: bool,
    pub witness: Option<String>,
}

impl FourierReport {
    fn numeric(check: &str, instance: serde_json::Value, err: f64) -> Self {
        Self {
            check: check.into(),
            instance,
            max_error: Some(err),
            pass: err <= TOLERANCE,
            witness: None,
        }
    }

    fn exact(check: &str, instance: serde_json::Value, witness: Option<String>) -> Self {
        Self {
            check: check.into(),
            instance,
            max_error: None,
            pass: witness.is_none(),
            witness,
        }
    }

    fn and(mut self, other: FourierReport) -> Self {
        self.pass &= other.pass;
        self.max_error = match (self.max_error, other.max_error) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        if self.witness.is_none() {
            self.witness = other.witness;
        }
        self
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({"check": self.check, "instance": self.instance, "pass": self.pass});
        match self.max_error {
            Some(e) => v["max_error"] = json!(e),
            None => v["exact"] = json!(true),
        }
        if let Some(w) = &self.witness {
            v["witness"] = json!(w);
        }
        v
    }
}

/// Signed combination `sum sign * delta_{lattice}` described by thresholds.
pub type Combination = Vec<(i64, Triple)>;

/// `sup |F(combination) - sum sign * 1_{dual}|` over the whole model.
///
/// The 1-D transforms of every lattice used are compared with the expected
/// dual indicator at every coordinate; the separable total is then compared at
/// one representative per valuation vector, which covers every point because
/// each factor depends only on the valuation. Small models are also checked
/// with the dense transform.
pub fn combination_error(
    model: &FiniteLieModel,
    comb: &Combination,
    target: &dyn Fn([Option<i64>; 3]) -> f64,
) -> Result<f64> {
    let n = model.axis();
    let mut transforms: BTreeMap<i64, Vec<Complex64>> = BTreeMap::new();
    let mut err = 0f64;
    for (_, t) in comb {
        model.check(t)?;
        for &c in t {
            if transforms.contains_key(&c) {
                continue;
            }
            let mut h = vec![Complex64::zero(); n];
            let support: Vec<usize> = (0..n).filter(|&u| model.meets(u, c)).collect();
            for &u in &support {
                h[u] = Complex64::new(1.0 / support.len() as f64, 0.0);
            }
            let fh = dft1(model, &h);
            for (u, z) in fh.iter().enumerate() {
                let expect = if model.meets(u, 1 - c) { 1.0 } else { 0.0 };
                err = err.max((z - Complex64::new(expect, 0.0)).norm());
            }
            transforms.insert(c, fh);
        }
    }
    let vals = model.valuations();
    for &ve in &vals {
        for &vh in &vals {
            for &vf in &vals {
                let u = [model.rep(ve), model.rep(vh), model.rep(vf)];
                let mut total = Complex64::zero();
                for (sign, t) in comb {
                    let mut term = Complex64::new(*sign as f64, 0.0);
                    for k in 0..3 {
                        term *= transforms[&t[k]][u[k]];
                    }
                    total += term;
                }
                err = err.max((total - Complex64::new(target([ve, vh, vf]), 0.0)).norm());
            }
        }
    }
    if model.size() <= DENSE_LIMIT {
        let mut h = vec![Complex64::zero(); model.size()];
        for (sign, t) in comb {
            for (x, y) in h.iter_mut().zip(lattice_measure(model, t)?) {
                *x += y * (*sign as f64);
            }
        }
        let fh = fourier(model, &h)?;
        for (i, z) in fh.iter().enumerate() {
            let c = coords(model, i);
            let v = [model.val(c[0]), model.val(c[1]), model.val(c[2])];
            err = err.max((z - Complex64::new(target(v), 0.0)).norm());
        }
    }
    Ok(err)
}

fn member_val(v: &[Option<i64>; 3], t: &Triple) -> bool {
    (0..3).all(|k| v[k].is_none_or(|x| x >= t[k]))
}

fn require_a1(apt: &Apartment) -> Result<()> {
    if apt.spec.name != SystemName::A1 {
        return Err(Error::UnsupportedSystem(apt.spec.name.as_str().into()));
    }
    Ok(())
}

fn cell_lattices(apt: &Apartment, cells: &SubComplex, r: Q) -> Result<Vec<(i64, Triple, Triple)>> {
    cells
        .cells
        .iter()
        .map(|&c| {
            let x: &Point = apt.barycenter(c);
            let sign = if apt.dim(c) % 2 == 0 { 1 } else { -1 };
            Ok((
                sign,
                triple(&lattice_spec(&apt.spec, x, r, true)?),
                triple(&dual_spec(&apt.spec, x, r)?),
            ))
        })
        .collect()
}

/// `F(delta_{g_{sigma,r+}}) = 1_{g*_{sigma,-r}}`.
pub fn verify_prop_lie(
    model: &FiniteLieModel,
    apt: &Apartment,
    sigma: usize,
    r: Q,
) -> Result<FourierReport> {
    require_a1(apt)?;
    let x = apt.barycenter(sigma);
    let lat = triple(&lattice_spec(&apt.spec, x, r, true)?);
    let dual = triple(&dual_spec(&apt.spec, x, r)?);
    if dual != dual_triple(&lat) {
        return Err(Error::Invalid(
            "dual thresholds disagree with the annihilator".into(),
        ));
    }
    let err = combination_error(model, &vec![(1, lat)], &|v| {
        if member_val(&v, &dual) {
            1.0
        } else {
            0.0
        }
    })?;
    Ok(FourierReport::numeric(
        "prop_lie",
        json!({"cell": apt.cell(sigma).to_json(), "r": fmt_q(&r), "p": model.p, "A": model.a, "B": model.b}),
        err,
    ))
}

/// Pointwise `1_{union of duals} = sum (-1)^dim 1_{dual}` over every valuation
/// vector of the model. A non-convex `sigma` is allowed and yields a witness.
pub fn verify_lemma_ep(
    model: &FiniteLieModel,
    apt: &Apartment,
    sigma: &SubComplex,
    r: Q,
) -> Result<FourierReport> {
    require_a1(apt)?;
    let terms = cell_lattices(apt, sigma, r)?;
    let vals = model.valuations();
    let mut witness = None;
    'outer: for &ve in &vals {
        for &vh in &vals {
            for &vf in &vals {
                let v = [ve, vh, vf];
                let mut sum = 0;
                let mut any = false;
                for (sign, _, d) in &terms {
                    if member_val(&v, d) {
                        sum += sign;
                        any = true;
                    }
                }
                if sum != i64::from(any) {
                    witness = Some(format!("valuations {v:?}: signed sum {sum}"));
                    break 'outer;
                }
            }
        }
    }
    Ok(FourierReport::exact(
        "lemma_ep",
        json!({"cells": sigma.len(), "r": fmt_q(&r), "convex": is_convex(apt, sigma)}),
        witness,
    ))
}

/// `F(sum (-1)^dim delta_{g_{sigma,r+}}) = 1_{g*_{Sigma,-r}}`.
pub fn verify_projector_fourier(
    model: &FiniteLieModel,
    apt: &Apartment,
    sigma: &SubComplex,
    r: Q,
) -> Result<FourierReport> {
    require_a1(apt)?;
    crate::projector_stabilizer::formal_projector(apt, sigma, r)?;
    let terms = cell_lattices(apt, sigma, r)?;
    let comb: Combination = terms.iter().map(|(s, l, _)| (*s, *l)).collect();
    let duals: Vec<Triple> = terms.iter().map(|(_, _, d)| *d).collect();
    let err = combination_error(model, &comb, &|v| {
        if duals.iter().any(|d| member_val(&v, d)) {
            1.0
        } else {
            0.0
        }
    })?;
    Ok(FourierReport::numeric(
        "projector_fourier",
        json!({"cells": sigma.len(), "r": fmt_q(&r), "p": model.p, "A": model.a, "B": model.b}),
        err,
    ))
}

/// The pullback of the depth-`r` combination under `a -> p^r a` is the
/// depth-zero one. Exact on thresholds and indicators; the Fourier side is
/// compared within tolerance.
pub fn verify_homothety(
    model: &FiniteLieModel,
    apt: &Apartment,
    sigma: &SubComplex,
    r: i64,
) -> Result<FourierReport> {
    require_a1(apt)?;
    if r < 0 {
        return Err(Error::Invalid("homothety needs r >= 0".into()));
    }
    let rq = Q::from_integer(r);
    let deep = cell_lattices(apt, sigma, rq)?;
    let base = cell_lattices(apt, sigma, Q::zero())?;
    let mut witness = None;
    for ((_, l1, d1), (_, l0, d0)) in deep.iter().zip(&base) {
        for k in 0..3 {
            if l1[k] != l0[k] + r || d1[k] != d0[k] - r {
                witness = Some(format!("thresholds {l1:?} vs {l0:?} shifted by {r}"));
            }
        }
    }
    let vals = model.valuations();
    for &ve in &vals {
        for &vh in &vals {
            for &vf in &vals {
                let v = [ve, vh, vf];
                let shifted = v.map(|x| x.map(|y| y + r));
                let s1: i64 = deep
                    .iter()
                    .filter(|(_, l, _)| member_val(&shifted, l))
                    .map(|t| t.0)
                    .sum();
                let s0: i64 = base
                    .iter()
                    .filter(|(_, l, _)| member_val(&v, l))
                    .map(|t| t.0)
                    .sum();
                if s1 != s0 && witness.is_none() {
                    witness = Some(format!(
                        "valuations {v:?}: depth {r} gives {s1}, depth 0 gives {s0}"
                    ));
                }
            }
        }
    }
    let mut report = FourierReport::exact(
        "homothety",
        json!({"cells": sigma.len(), "r": r, "p": model.p}),
        witness,
    );
    let comb1: Combination = deep.iter().map(|(s, l, _)| (*s, *l)).collect();
    let duals0: Vec<Triple> = base.iter().map(|(_, _, d)| *d).collect();
    // F(E_r)(b) should equal 1_{union of depth-0 duals}(p^r b).
    let err = combination_error(model, &comb1, &|v| {
        let scaled = v.map(|x| x.map(|y| y + r));
        if duals0.iter().any(|d| member_val(&scaled, d)) {
            1.0
        } else {
            0.0
        }
    })?;
    report = report.and(FourierReport::numeric("homothety", json!(null), err));
    Ok(report)
}

/// Pushes `sum (-1)^dim delta_{G_{sigma,r+}}` through `rlog` and compares with
/// the signed sum of uniform lattice measures on `g_{sigma,r+}` classes.
pub fn pushforward_compare(
    apt: &Apartment,
    sigma: &SubComplex,
    r: Q,
    lv: &Level,
    budget: u128,
) -> Result<FourierReport> {
    require_a1(apt)?;
    if lv.p == 2 {
        return Err(Error::Invalid("rlog needs p != 2".into()));
    }
    let terms = cell_lattices(apt, sigma, r)?;
    let mut group_side: BTreeMap<[i128; 3], R> = BTreeMap::new();
    let mut lie_side: BTreeMap<[i128; 3], R> = BTreeMap::new();
    for (&c, (sign, lat, _)) in sigma.cells.iter().zip(&terms) {
        if lat.iter().any(|&t| t < 0 || t > lv.n as i64) {
            return Err(Error::Precision(format!(
                "thresholds {lat:?} outside [0, N] with N = {}; truncated classes do not match",
                lv.n
            )));
        }
        let spec = GroupSpec {
            t: apt.barycenter(c).0[0],
            r,
            strict: true,
        };
        let set = enumerate_group(&spec, lv, budget)?;
        let w = R::new(*sign as i128, set.len() as i128);
        for g in set.values() {
            *group_side
                .entry(lie_class(&rlog(g, lv.p)?, lv)?)
                .or_insert_with(R::zero) += w;
        }
        // lattice classes: h, b, c residues divisible by p^threshold
        let steps: Vec<i128> = [lat[1], lat[0], lat[2]]
            .iter()
            .map(|&t| lv.p.pow(t as u32))
            .collect();
        let counts: Vec<i128> = steps.iter().map(|s| lv.pn / s).collect();
        let wl = R::new(*sign as i128, counts.iter().product());
        for i in 0..counts[0] {
            for j in 0..counts[1] {
                for k in 0..counts[2] {
                    *lie_side
                        .entry([i * steps[0], j * steps[1], k * steps[2]])
                        .or_insert_with(R::zero) += wl;
                }
            }
        }
    }
    group_side.retain(|_, w| !w.is_zero());
    lie_side.retain(|_, w| !w.is_zero());
    let witness = if group_side == lie_side {
        None
    } else {
        let diff = group_side
            .iter()
            .find(|(k, w)| lie_side.get(*k) != Some(w))
            .map(|(k, w)| format!("class {k:?}: group side {w}"))
            .unwrap_or_else(|| "lie side has extra classes".into());
        Some(diff)
    };
    Ok(FourierReport::exact(
        "pushforward",
        json!({"cells": sigma.len(), "r": fmt_q(&r), "p": lv.p, "N": lv.n, "support": group_side.len()}),
        witness,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine_apartment::{RootSystemSpec, Window};
    use crate::rational::{q, qi};
    use crate::sl2_padic_engine::DEFAULT_BUDGET;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn a1(m: u32, lo: i64, hi: i64) -> Apartment {
        Apartment::build(
            RootSystemSpec::new(SystemName::A1, 0).unwrap(),
            m,
            Window::ints(1, lo, hi).unwrap(),
        )
        .unwrap()
    }

    fn vertex(apt: &Apartment, t: i64) -> usize {
        apt.vertex_index(&Point(vec![qi(t)])).unwrap()
    }

    fn edge(apt: &Apartment, a: Q, b: Q) -> usize {
        apt.index_of_vertices(&[Point(vec![a]), Point(vec![b])])
            .unwrap()
    }

    #[test]
    fn character_normalization() {
        let m = FiniteLieModel::new(3, 1, 2).unwrap();
        let one = m.p.pow(m.a) as usize;
        assert!((m.psi(3 * one) - Complex64::new(1.0, 0.0)).norm() < TOLERANCE);
        assert!((m.psi(one) - Complex64::new(1.0, 0.0)).norm() > 0.5);
        let n = m.axis();
        for u in [1, 5, 17] {
            for v in [2, 7] {
                assert!((m.psi(u + v) - m.psi(u) * m.psi(v)).norm() < TOLERANCE);
                assert!((m.psi_pair(u, v) - m.psi_pair(u, (v + n) % n)).norm() < TOLERANCE);
            }
            // psi(x * 1) agrees with psi(x)
            assert!((m.psi_pair(u, one) - m.psi(u)).norm() < TOLERANCE);
        }
        assert!(FiniteLieModel::new(3, 2, 2).is_err());
    }

    #[test]
    fn fourier_basic_examples() {
        let m = FiniteLieModel::new(3, 0, 1).unwrap();
        let n = m.size();
        let uniform = vec![Complex64::new(1.0 / n as f64, 0.0); n];
        let fu = fourier(&m, &uniform).unwrap();
        let ann = lattice_indicator(&m, &[1, 1, 1]);
        for (z, e) in fu.iter().zip(&ann) {
            assert!((z - Complex64::new(*e as f64, 0.0)).norm() < TOLERANCE);
        }
        let mut delta = vec![Complex64::zero(); n];
        delta[0] = Complex64::new(1.0, 0.0);
        assert!(fourier(&m, &delta)
            .unwrap()
            .iter()
            .all(|z| (z - Complex64::new(1.0, 0.0)).norm() < TOLERANCE));
    }

    #[test]
    fn plancherel_and_involution() {
        let m = FiniteLieModel::new(3, 0, 1).unwrap();
        let n = m.size();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let h: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let fh = fourier(&m, &h).unwrap();
            let lhs: f64 = fh.iter().map(|z| z.norm_sqr()).sum();
            let rhs: f64 = h.iter().map(|z| z.norm_sqr()).sum::<f64>() * n as f64;
            assert!((lhs - rhs).abs() < 1e-6 * rhs);
            let ffh = fourier(&m, &fh).unwrap();
            let ax = m.axis();
            for i in 0..n {
                let c = coords(&m, i);
                let neg = index(&m, (ax - c[0]) % ax, (ax - c[1]) % ax, (ax - c[2]) % ax);
                assert!((ffh[i] - h[neg] * n as f64).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn orthogonality_per_lattice() {
        let m = FiniteLieModel::new(3, 1, 2).unwrap();
        for t in [[0, 1, 1], [-1, 0, 2], [2, 2, -1]] {
            let err = combination_error(&m, &vec![(1, t)], &|v| {
                if member_val(&v, &dual_triple(&t)) {
                    1.0
                } else {
                    0.0
                }
            })
            .unwrap();
            assert!(err < TOLERANCE, "{t:?}: {err}");
        }
    }

    #[test]
    fn prop_lie_examples() {
        let apt = a1(1, -3, 3);
        let m = FiniteLieModel::new(3, 1, 2).unwrap();
        let v0 = vertex(&apt, 0);
        assert!(verify_prop_lie(&m, &apt, v0, qi(0)).unwrap().pass);
        assert!(
            verify_prop_lie(&m, &apt, edge(&apt, qi(0), qi(1)), qi(0))
                .unwrap()
                .pass
        );
        let deep = verify_prop_lie(&m, &apt, v0, qi(1)).unwrap();
        assert!(deep.pass);
        let l0 = lattice_spec(&apt.spec, &Point(vec![qi(0)]), qi(0), true).unwrap();
        assert_eq!(
            lattice_spec(&apt.spec, &Point(vec![qi(0)]), qi(1), true).unwrap(),
            l0.shifted(1)
        );
        let small = FiniteLieModel::new(3, 0, 1).unwrap();
        assert!(verify_prop_lie(&small, &apt, vertex(&apt, 2), qi(0)).is_err());
        assert!(
            verify_prop_lie(&small, &apt, vertex(&apt, -2), qi(1))
                .unwrap()
                .pass
        );
    }

    #[test]
    fn lemma_ep_examples() {
        let apt = a1(1, -3, 3);
        let m = FiniteLieModel::new(3, 3, 4).unwrap();
        let sigma = SubComplex::in_int_box(&apt, 0, 2);
        assert!(verify_lemma_ep(&m, &apt, &sigma, qi(0)).unwrap().pass);
        let single = SubComplex::new([vertex(&apt, 1)]);
        assert!(verify_lemma_ep(&m, &apt, &single, qi(0)).unwrap().pass);
        let split = SubComplex::new([vertex(&apt, 0), vertex(&apt, 2)]);
        let rep = verify_lemma_ep(&m, &apt, &split, qi(0)).unwrap();
        assert!(!rep.pass);
        assert!(rep.witness.as_ref().unwrap().contains("signed sum 2"));
        assert_eq!(rep.to_json()["exact"], json!(true));
    }

    #[test]
    fn projector_fourier_examples() {
        let apt = a1(1, -3, 3);
        let m = FiniteLieModel::new(3, 1, 3).unwrap();
        assert!(
            verify_projector_fourier(&m, &apt, &SubComplex::in_int_box(&apt, 0, 1), qi(0))
                .unwrap()
                .pass
        );
        let v = SubComplex::new([vertex(&apt, 0)]);
        let a = verify_projector_fourier(&m, &apt, &v, qi(1)).unwrap();
        let b = verify_prop_lie(&m, &apt, vertex(&apt, 0), qi(1)).unwrap();
        assert!(a.pass && b.pass);
        let apt2 = a1(2, -2, 2);
        let sigma = SubComplex::in_box(&apt2, &[(qi(-1), qi(1))]);
        let m2 = FiniteLieModel::fitting(3, [-2, 3]).unwrap();
        assert!(
            verify_projector_fourier(&m2, &apt2, &sigma, q(1, 2))
                .unwrap()
                .pass
        );
    }

    #[test]
    fn homothety_examples() {
        let apt = a1(1, -4, 4);
        let m = FiniteLieModel::fitting(3, [-3, 4]).unwrap();
        assert!(
            verify_homothety(&m, &apt, &SubComplex::in_int_box(&apt, 0, 1), 1)
                .unwrap()
                .pass
        );
        assert!(
            verify_homothety(&m, &apt, &SubComplex::in_int_box(&apt, 0, 1), 0)
                .unwrap()
                .pass
        );
        let m2 = FiniteLieModel::fitting(2, [-5, 6]).unwrap();
        assert!(
            verify_homothety(&m2, &apt, &SubComplex::in_int_box(&apt, -2, 2), 2)
                .unwrap()
                .pass
        );
    }

    #[test]
    fn pushforward_examples() {
        let apt = a1(1, -3, 3);
        let lv = Level::new(3, 3).unwrap();
        for (lo, hi, r) in [(0, 0, 0), (0, 1, 0), (0, 1, 1)] {
            let rep = pushforward_compare(
                &apt,
                &SubComplex::in_int_box(&apt, lo, hi),
                qi(r),
                &lv,
                DEFAULT_BUDGET,
            )
            .unwrap();
            assert!(rep.pass, "{:?}", rep.witness);
        }
        assert!(pushforward_compare(
            &apt,
            &SubComplex::in_int_box(&apt, 0, 0),
            qi(0),
            &Level::new(2, 3).unwrap(),
            DEFAULT_BUDGET
        )
        .is_err());
    }
}
