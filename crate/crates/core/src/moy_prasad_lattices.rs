//! Threshold calculus for Moy–Prasad lattices `g_{x,r}`, `g_{x,r+}` and the
//! dual lattices `g*_{x,-r}` on a split apartment, plus the non-reduced rank-one
//! group thresholds.
//!
//! An element of the Lie algebra is abstracted by a [`ValuationVector`]: one
//! valuation for the torus part and one per root coordinate. The dual space
//! uses the component-diagonal dual basis, so a dual vector has the same shape.

use crate::affine_apartment::{Apartment, Point, RootSystemSpec, SystemName};
use crate::convex_combinatorics::SubComplex;
use crate::error::{Error, Result};
use crate::rational::{ceil_strict, floor_q, fmt_q, frac, qi, round_up_progression, Q};
use serde_json::json;
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Val {
    Fin(i64),
    Inf,
}

impl Val {
    pub fn meets(self, threshold: i64) -> bool {
        match self {
            Val::Inf => true,
            Val::Fin(v) => v >= threshold,
        }
    }

    pub fn to_json(self) -> serde_json::Value {
        match self {
            Val::Inf => json!("inf"),
            Val::Fin(v) => json!(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ValuationVector {
    pub torus: Val,
    pub roots: Vec<Val>,
}

/// Integer thresholds for a lattice: torus and one per root, in the order of
/// the root system's root list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FiltrationSpec {
    pub system: SystemName,
    pub torus: i64,
    pub roots: Vec<(Vec<i64>, i64)>,
}

pub fn root_name(system: SystemName, root: &[i64]) -> String {
    if system == SystemName::A1 {
        if root[0] > 0 {
            "alpha".into()
        } else {
            "-alpha".into()
        }
    } else {
        format!("{root:?}")
    }
}

impl FiltrationSpec {
    pub fn threshold(&self, root: &[i64]) -> Option<i64> {
        self.roots.iter().find(|(r, _)| r == root).map(|(_, c)| *c)
    }

    pub fn shifted(&self, n: i64) -> Self {
        Self {
            system: self.system,
            torus: self.torus + n,
            roots: self.roots.iter().map(|(r, c)| (r.clone(), c + n)).collect(),
        }
    }

    /// Componentwise `1 - c`, the thresholds of the annihilator lattice.
    pub fn dualize(&self) -> Self {
        Self {
            system: self.system,
            torus: 1 - self.torus,
            roots: self.roots.iter().map(|(r, c)| (r.clone(), 1 - c)).collect(),
        }
    }

    /// `self` contains `other` as lattices.
    pub fn contains(&self, other: &FiltrationSpec) -> bool {
        self.torus <= other.torus
            && self
                .roots
                .iter()
                .zip(&other.roots)
                .all(|((_, a), (_, b))| a <= b)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let roots: serde_json::Map<String, serde_json::Value> = self
            .roots
            .iter()
            .map(|(r, c)| (root_name(self.system, r), json!(c)))
            .collect();
        json!({"torus": self.torus, "roots": roots})
    }
}

fn split_roots(spec: &RootSystemSpec) -> Result<&Vec<Vec<i64>>> {
    if spec.name == SystemName::BC1 {
        return Err(Error::UnsupportedSystem(
            "BC1 lattices are handled by su3_thresholds".into(),
        ));
    }
    Ok(&spec.roots)
}

fn eval_root(root: &[i64], x: &Point) -> Q {
    root.iter().zip(&x.0).map(|(a, c)| qi(*a) * c).sum()
}

/// Thresholds of `g_{x,r}` (or `g_{x,r+}` when `strict`).
pub fn lattice_spec(
    spec: &RootSystemSpec,
    x: &Point,
    r: Q,
    strict: bool,
) -> Result<FiltrationSpec> {
    let roots = split_roots(spec)?;
    if x.dim() != spec.rank {
        return Err(Error::DimensionMismatch {
            expected: spec.rank,
            got: x.dim(),
        });
    }
    Ok(FiltrationSpec {
        system: spec.name,
        torus: ceil_strict(r, strict),
        roots: roots
            .iter()
            .map(|a| (a.clone(), ceil_strict(r - eval_root(a, x), strict)))
            .collect(),
    })
}

/// Same as [`lattice_spec`] but checks that `x` lies in the apartment's window.
pub fn lattice_spec_in(apt: &Apartment, x: &Point, r: Q, strict: bool) -> Result<FiltrationSpec> {
    if !apt.window.contains(x) {
        return Err(Error::OutsideWindow);
    }
    lattice_spec(&apt.spec, x, r, strict)
}

/// Thresholds of `g*_{x,-r}`, the dual of `g_{x,r+}` under the diagonal pairing.
pub fn dual_spec(spec: &RootSystemSpec, x: &Point, r: Q) -> Result<FiltrationSpec> {
    Ok(lattice_spec(spec, x, r, true)?.dualize())
}

pub fn member(spec: &FiltrationSpec, v: &ValuationVector) -> Result<bool> {
    if v.roots.len() != spec.roots.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.roots.len(),
            got: v.roots.len(),
        });
    }
    Ok(v.torus.meets(spec.torus)
        && v.roots
            .iter()
            .zip(&spec.roots)
            .all(|(val, (_, c))| val.meets(*c)))
}

/// Valuation of the diagonal pairing `<b, a>`: the minimum over components.
pub fn pairing_valuation(b: &ValuationVector, a: &ValuationVector) -> Val {
    let add = |x: Val, y: Val| match (x, y) {
        (Val::Fin(p), Val::Fin(q)) => Val::Fin(p + q),
        _ => Val::Inf,
    };
    let mut best = add(b.torus, a.torus);
    for (x, y) in b.roots.iter().zip(&a.roots) {
        best = best.min(add(*x, *y));
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    Lattice,
    Dual,
}

/// Cells whose barycenter spec contains `v`; a closed convex subcomplex.
pub fn region(apt: &Apartment, v: &ValuationVector, r: Q, kind: RegionKind) -> Result<SubComplex> {
    let mut cells = Vec::new();
    for i in 0..apt.len() {
        let b = apt.barycenter(i);
        let spec = match kind {
            RegionKind::Lattice => lattice_spec(&apt.spec, b, r, false)?,
            RegionKind::Dual => dual_spec(&apt.spec, b, r)?,
        };
        if member(&spec, v)? {
            cells.push(i);
        }
    }
    Ok(SubComplex::new(cells))
}

/// Radii in `[0,1)` where the non-strict filtration at `x` jumps.
pub fn jump_radii(spec: &RootSystemSpec, x: &Point) -> Result<Vec<Q>> {
    let roots = split_roots(spec)?;
    let mut cands: BTreeSet<Q> = BTreeSet::new();
    cands.insert(Q::from_integer(0));
    for a in roots {
        cands.insert(frac(eval_root(a, x)));
    }
    let mut out = Vec::new();
    for r in cands {
        if lattice_spec(spec, x, r, false)? != lattice_spec(spec, x, r, true)? {
            out.push(r);
        }
    }
    Ok(out)
}

/// Group thresholds for the non-reduced rank-one system, in the valuation of
/// the quadratic extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Su3Thresholds {
    /// `b`-threshold for `U_{alpha,x,r}`, rounded into `2Z + delta`.
    pub t_alpha: Q,
    /// `b`-threshold for `U_{2alpha,x,r}`, rounded into `2Z + delta + 1`.
    pub t_2alpha: Q,
    /// Raw `(a, b)` thresholds for `U_{(alpha),x,r}`.
    pub t_pair: (Q, Q),
    pub raw_alpha: Q,
    pub raw_2alpha: Q,
}

pub fn su3_thresholds(x: Q, r: Q, delta: i64) -> Result<Su3Thresholds> {
    if delta != 0 && delta != -1 {
        return Err(Error::Invalid(format!(
            "delta must be 0 or -1, got {delta}"
        )));
    }
    let d = qi(delta);
    let raw_alpha = qi(2) * r - qi(2) * x;
    let raw_2alpha = r - qi(2) * x;
    Ok(Su3Thresholds {
        t_alpha: round_up_progression(raw_alpha, d, qi(2), false),
        t_2alpha: round_up_progression(raw_2alpha, d + qi(1), qi(2), false),
        t_pair: (r - x - d / qi(2), raw_2alpha),
        raw_alpha,
        raw_2alpha,
    })
}

/// Checks `U_{alpha,x,r} ∩ U_{2alpha,x,r} = U_{2alpha,x,2r}` on elements of the
/// divisible root subgroup, whose `b`-valuations run over `2Z + delta + 1`.
/// Returns the first valuation where membership disagrees.
pub fn su3_intersection_witness(x: Q, r: Q, delta: i64, span: i64) -> Result<Option<i64>> {
    let here = su3_thresholds(x, r, delta)?;
    let double = su3_thresholds(x, qi(2) * r, delta)?;
    if here.raw_alpha.max(here.raw_2alpha) != double.raw_2alpha {
        return Ok(Some(i64::MIN));
    }
    let centre = floor_q(double.raw_2alpha);
    for v in (centre - span)..=(centre + span) {
        if (v - delta - 1).rem_euclid(2) != 0 {
            continue;
        }
        let vq = qi(v);
        let lhs = vq >= here.raw_alpha && vq >= here.raw_2alpha;
        let rhs = vq >= double.raw_2alpha;
        if lhs != rhs {
            return Ok(Some(v));
        }
    }
    Ok(None)
}

/// Brute-force least progression element at or above `x` by scanning.
pub fn progression_search(x: Q, offset: Q, step: Q) -> Q {
    let mut c = offset + step * qi(floor_q((x - offset) / step) - 2);
    while c < x {
        c += step;
    }
    c
}

pub fn su3_to_json(t: &Su3Thresholds) -> serde_json::Value {
    json!({
        "t_alpha": fmt_q(&t.t_alpha),
        "t_2alpha": fmt_q(&t.t_2alpha),
        "t_pair": [fmt_q(&t.t_pair.0), fmt_q(&t.t_pair.1)],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine_apartment::Window;
    use crate::convex_combinatorics::{is_convex, is_convex_by_segments};
    use crate::rational::q;
    use proptest::prelude::*;

    fn a1() -> RootSystemSpec {
        RootSystemSpec::new(SystemName::A1, 0).unwrap()
    }

    fn t(n: i64, d: i64) -> Point {
        Point(vec![q(n, d)])
    }

    fn vv(torus: Val, b: Val, c: Val) -> ValuationVector {
        ValuationVector {
            torus,
            roots: vec![b, c],
        }
    }

    #[test]
    fn a1_lattice_examples() {
        let s = lattice_spec(&a1(), &t(0, 1), qi(0), true).unwrap();
        assert_eq!(
            (s.torus, s.threshold(&[1]), s.threshold(&[-1])),
            (1, Some(1), Some(1))
        );
        let s = lattice_spec(&a1(), &t(1, 2), qi(0), true).unwrap();
        assert_eq!(
            (s.torus, s.threshold(&[1]), s.threshold(&[-1])),
            (1, Some(0), Some(1))
        );
        let base = lattice_spec(&a1(), &t(0, 1), qi(0), false).unwrap();
        assert_eq!(
            lattice_spec(&a1(), &t(0, 1), qi(1), false).unwrap(),
            base.shifted(1)
        );
        assert_eq!(s.to_json()["roots"]["alpha"], json!(0));
    }

    #[test]
    fn a1_dual_examples() {
        let d = dual_spec(&a1(), &t(0, 1), qi(0)).unwrap();
        assert_eq!(
            (d.threshold(&[1]), d.threshold(&[-1]), d.torus),
            (Some(0), Some(0), Some(0).unwrap())
        );
        let d = dual_spec(&a1(), &t(1, 2), qi(0)).unwrap();
        assert_eq!(
            (d.threshold(&[1]), d.threshold(&[-1]), d.torus),
            (Some(1), Some(0), 0)
        );
    }

    #[test]
    fn member_examples() {
        let s = lattice_spec(&a1(), &t(0, 1), qi(0), true).unwrap();
        assert!(member(&s, &vv(Val::Fin(1), Val::Fin(1), Val::Fin(1))).unwrap());
        assert!(!member(&s, &vv(Val::Fin(1), Val::Fin(0), Val::Fin(1))).unwrap());
        let h = lattice_spec(&a1(), &t(1, 2), qi(0), true).unwrap();
        assert!(member(&h, &vv(Val::Fin(1), Val::Fin(0), Val::Fin(1))).unwrap());
        assert!(member(
            &h,
            &ValuationVector {
                torus: Val::Inf,
                roots: vec![Val::Inf]
            }
        )
        .is_err());
    }

    #[test]
    fn region_examples() {
        let apt = Apartment::build(a1(), 1, Window::ints(1, -3, 3).unwrap()).unwrap();
        let reg = region(
            &apt,
            &vv(Val::Inf, Val::Fin(0), Val::Fin(0)),
            qi(0),
            RegionKind::Lattice,
        )
        .unwrap();
        assert_eq!(
            reg.cells
                .iter()
                .map(|&c| apt.cell(c).clone())
                .collect::<Vec<_>>(),
            vec![apt.cell(apt.vertex_index(&t(0, 1)).unwrap()).clone()]
        );
        let all = region(
            &apt,
            &vv(Val::Fin(5), Val::Inf, Val::Inf),
            qi(1),
            RegionKind::Lattice,
        )
        .unwrap();
        assert_eq!(all.len(), apt.len());
    }

    #[test]
    fn jump_examples() {
        assert_eq!(jump_radii(&a1(), &t(0, 1)).unwrap(), vec![qi(0)]);
        assert_eq!(jump_radii(&a1(), &t(1, 2)).unwrap(), vec![qi(0), q(1, 2)]);
        assert_eq!(
            jump_radii(&a1(), &t(1, 3)).unwrap(),
            vec![qi(0), q(1, 3), q(2, 3)]
        );
    }

    /// Scans a fine grid of radii and records where the spec changes.
    #[test]
    fn jumps_match_scan() {
        for x in [t(0, 1), t(1, 2), t(1, 3), t(2, 5)] {
            let mut scan = Vec::new();
            let den = 60;
            for k in 0..den {
                let r = q(k, den);
                let before = lattice_spec(&a1(), &x, r - q(1, 1000), false).unwrap();
                let at = lattice_spec(&a1(), &x, r, false).unwrap();
                let after = lattice_spec(&a1(), &x, r + q(1, 1000), false).unwrap();
                if before != at || at != after {
                    scan.push(r);
                }
            }
            assert_eq!(scan, jump_radii(&a1(), &x).unwrap());
        }
    }

    #[test]
    fn su3_examples() {
        let th = su3_thresholds(qi(0), qi(0), 0).unwrap();
        assert_eq!(th.t_alpha, qi(0));
        let th = su3_thresholds(qi(0), q(1, 2), -1).unwrap();
        assert_eq!(th.t_2alpha, qi(2));
        assert_eq!(th.t_2alpha, progression_search(th.raw_2alpha, qi(0), qi(2)));
        assert!(su3_thresholds(qi(0), qi(0), 1).is_err());
    }

    #[test]
    fn su3_rounded_alpha_threshold_is_not_a_membership_test_for_2alpha() {
        // At x = 0, r = 1/4, delta = 0 the rounded U_alpha threshold is 2 while
        // the raw one is 1/2; an element of U_{2alpha} with valuation 1 passes
        // the raw test for U_{2alpha,x,2r} but fails the rounded U_alpha test.
        let th = su3_thresholds(qi(0), q(1, 4), 0).unwrap();
        assert_eq!(th.t_alpha, qi(2));
        assert_eq!(su3_thresholds(qi(0), q(1, 2), 0).unwrap().t_2alpha, qi(1));
        assert_eq!(
            su3_intersection_witness(qi(0), q(1, 4), 0, 8).unwrap(),
            None
        );
    }

    proptest! {
        #[test]
        fn homothety(n in -20i64..20, d in 1i64..7, rn in 0i64..12, shift in 0i64..4, strict: bool) {
            let x = t(n, d);
            let r = q(rn, 4);
            let a = lattice_spec(&a1(), &x, r + qi(shift), strict).unwrap();
            prop_assert_eq!(a, lattice_spec(&a1(), &x, r, strict).unwrap().shifted(shift));
        }

        #[test]
        fn monotone_in_r(n in -20i64..20, r1 in 0i64..12, dr in 0i64..6) {
            let x = t(n, 3);
            let lo = lattice_spec(&a1(), &x, q(r1, 4), false).unwrap();
            let hi = lattice_spec(&a1(), &x, q(r1 + dr, 4), false).unwrap();
            prop_assert!(lo.contains(&hi));
        }

        #[test]
        fn duality_involution(n in -20i64..20, rn in 0i64..12) {
            let x = t(n, 6);
            let r = q(rn, 3);
            let d = dual_spec(&a1(), &x, r).unwrap();
            prop_assert_eq!(d.dualize(), lattice_spec(&a1(), &x, r, true).unwrap());
        }

        #[test]
        fn pairing_lands_in_the_maximal_ideal(n in -6i64..6, rn in 0i64..8, vals in proptest::collection::vec(-4i64..6, 6)) {
            let x = t(n, 2);
            let r = q(rn, 2);
            let l = lattice_spec(&a1(), &x, r, true).unwrap();
            let d = dual_spec(&a1(), &x, r).unwrap();
            let a = ValuationVector { torus: Val::Fin(l.torus + vals[0].abs()), roots: vec![Val::Fin(l.roots[0].1 + vals[1].abs()), Val::Fin(l.roots[1].1 + vals[2].abs())] };
            let b = ValuationVector { torus: Val::Fin(d.torus + vals[3].abs()), roots: vec![Val::Fin(d.roots[0].1 + vals[4].abs()), Val::Fin(d.roots[1].1 + vals[5].abs())] };
            prop_assert!(member(&l, &a).unwrap() && member(&d, &b).unwrap());
            prop_assert!(pairing_valuation(&b, &a).meets(1));
        }

        #[test]
        fn constant_on_cells(sys in 0usize..3, m in 1u32..3, rn in 0i64..6, strict: bool) {
            let name = [SystemName::A2, SystemName::C2, SystemName::G2][sys];
            let spec = RootSystemSpec::new(name, 0).unwrap();
            let apt = Apartment::build(spec.clone(), m, Window::ints(2, -1, 1).unwrap()).unwrap();
            let r = Q::new(rn, m as i64);
            for i in 0..apt.len() {
                let c = apt.cell(i);
                let at_b = lattice_spec(&spec, apt.barycenter(i), r, strict).unwrap();
                if c.vertices.len() > 1 {
                    // a second interior point: weighted towards the first vertex
                    let p = apt.barycenter(i).scale(q(3, 4)).add(&c.vertices[0].scale(q(1, 4)));
                    prop_assert_eq!(&at_b, &lattice_spec(&spec, &p, r, strict).unwrap());
                }
            }
        }

        #[test]
        fn su3_identity(xn in -12i64..12, rn in 0i64..16, delta in -1i64..1) {
            let x = q(xn, 4);
            let r = q(rn, 4);
            prop_assert_eq!(su3_intersection_witness(x, r, delta, 12).unwrap(), None);
            let th = su3_thresholds(x, r, delta).unwrap();
            prop_assert_eq!(th.t_alpha, progression_search(th.raw_alpha, qi(delta), qi(2)));
            prop_assert_eq!(th.t_2alpha, progression_search(th.raw_2alpha, qi(delta + 1), qi(2)));
        }

        #[test]
        fn regions_are_convex_in_a2(vals in proptest::collection::vec(-2i64..4, 7), rn in 0i64..3, dual: bool) {
            let spec = RootSystemSpec::new(SystemName::A2, 0).unwrap();
            let apt = Apartment::build(spec, 1, Window::ints(2, -2, 2).unwrap()).unwrap();
            let v = ValuationVector { torus: Val::Fin(vals[0]), roots: vals[1..].iter().map(|&a| if a == 3 { Val::Inf } else { Val::Fin(a) }).collect() };
            let kind = if dual { RegionKind::Dual } else { RegionKind::Lattice };
            let reg = region(&apt, &v, qi(rn), kind).unwrap();
            prop_assert!(is_convex(&apt, &reg));
            prop_assert!(is_convex_by_segments(&apt, &reg));
        }
    }
}
