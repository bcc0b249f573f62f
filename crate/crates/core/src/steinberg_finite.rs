//! Steinberg representation of `SL2(F_q)` realized as functions on the
//! projective line with total sum zero, plus the depth-zero comparison with
//! the truncated `p`-adic model.

use crate::affine_apartment::{Apartment, Point, SystemName};
use crate::convex_combinatorics::SubComplex;
use crate::error::{Error, Result};
use crate::rational::fmt_q;
use crate::sl2_padic_engine::{enumerate_group, CosetKey, GroupSpec, Level, TruncatedMeasure, R};
use num_rational::Ratio;
use num_traits::{One, Zero};
use serde_json::json;
use std::collections::BTreeSet;

/// Residue modulo a prime `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fp {
    pub q: u64,
    pub v: u64,
}

impl Fp {
    pub fn new(q: u64, v: i64) -> Self {
        Self {
            q,
            v: v.rem_euclid(q as i64) as u64,
        }
    }

    pub fn add(self, o: Fp) -> Fp {
        Fp {
            q: self.q,
            v: (self.v + o.v) % self.q,
        }
    }

    pub fn neg(self) -> Fp {
        Fp {
            q: self.q,
            v: (self.q - self.v) % self.q,
        }
    }

    pub fn mul(self, o: Fp) -> Fp {
        Fp {
            q: self.q,
            v: self.v * o.v % self.q,
        }
    }

    pub fn inv(self) -> Result<Fp> {
        if self.v == 0 {
            return Err(Error::Singular);
        }
        let mut r = 1u64;
        let (mut b, mut e) = (self.v, self.q - 2);
        while e > 0 {
            if e & 1 == 1 {
                r = r * b % self.q;
            }
            b = b * b % self.q;
            e >>= 1;
        }
        Ok(Fp { q: self.q, v: r })
    }
}

/// Matrix over `F_q` in row order `[a, b, c, d]`.
pub type FqMat = [u64; 4];

fn check_q(q: u64) -> Result<()> {
    if !crate::sl2_padic_engine::is_prime(q as i128) {
        return Err(Error::Invalid(format!("{q} is not prime")));
    }
    Ok(())
}

pub fn det(q: u64, g: &FqMat) -> u64 {
    (g[0] * g[3] % q + q * q - g[1] * g[2] % q) % q
}

pub fn mat_mul(q: u64, x: &FqMat, y: &FqMat) -> FqMat {
    [
        (x[0] * y[0] + x[1] * y[2]) % q,
        (x[0] * y[1] + x[1] * y[3]) % q,
        (x[2] * y[0] + x[3] * y[2]) % q,
        (x[2] * y[1] + x[3] * y[3]) % q,
    ]
}

pub fn sl2(q: u64) -> Vec<FqMat> {
    let mut out = Vec::new();
    for a in 0..q {
        for b in 0..q {
            for c in 0..q {
                for d in 0..q {
                    let g = [a, b, c, d];
                    if det(q, &g) == 1 {
                        out.push(g);
                    }
                }
            }
        }
    }
    out
}

/// Points of the projective line: `[x : 1]` is `x`, and `[1 : 0]` is `q`.
pub fn act(q: u64, g: &FqMat, point: u64) -> u64 {
    let (x, y) = if point == q { (1, 0) } else { (point, 1) };
    let nx = (g[0] * x + g[1] * y) % q;
    let ny = (g[2] * x + g[3] * y) % q;
    if ny == 0 {
        q
    } else {
        let inv = Fp { q, v: ny }.inv().expect("nonzero");
        Fp { q, v: nx }.mul(inv).v
    }
}

/// Number of fixed points on the projective line minus one.
pub fn steinberg_character(q: u64, g: &FqMat) -> Result<i64> {
    check_q(q)?;
    let g = g.map(|x| x % q);
    if det(q, &g) != 1 {
        return Err(Error::Invalid(format!("det of {g:?} mod {q} is not 1")));
    }
    Ok((0..=q).filter(|&x| act(q, &g, x) == x).count() as i64 - 1)
}

#[derive(Debug, Clone)]
pub struct HeckeReport {
    pub q: u64,
    pub invariant_dim: usize,
    pub eigen_identity: Ratio<i64>,
    pub eigen_reflection: Ratio<i64>,
    pub double_coset_ratio: usize,
}

impl HeckeReport {
    pub fn pass(&self) -> bool {
        self.invariant_dim == 1
            && self.eigen_identity == Ratio::one()
            && self.eigen_reflection == -Ratio::one()
            && self.double_coset_ratio as u64 == self.q
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "q": self.q,
            "invariant_dim": self.invariant_dim,
            "h_1": self.eigen_identity.to_string(),
            "h_s": self.eigen_reflection.to_string(),
            "cosets_in_BsB": self.double_coset_ratio,
            "pass": self.pass(),
        })
    }
}

fn translate(q: u64, g: &FqMat, v: &[Ratio<i64>]) -> Vec<Ratio<i64>> {
    // (g v)(x) = v(g^{-1} x)
    let ginv = [g[3], (q - g[1]) % q, (q - g[2]) % q, g[0]];
    (0..=q).map(|x| v[act(q, &ginv, x) as usize]).collect()
}

/// Builds `St^B` and checks that `h_w = |B|^{-1} 1_{BwB}` acts by `sgn(w)`.
pub fn hecke_sign_action(q: u64) -> Result<HeckeReport> {
    check_q(q)?;
    if q > 7 {
        return Err(Error::Budget {
            needed: q,
            budget: 7,
        });
    }
    let group = sl2(q);
    let borel: Vec<FqMat> = group.iter().filter(|g| g[2] == 0).copied().collect();
    // B-orbits on the projective line; invariant functions are constant on them.
    let mut orbit_of = vec![usize::MAX; (q + 1) as usize];
    let mut orbits = 0;
    for x in 0..=q {
        if orbit_of[x as usize] != usize::MAX {
            continue;
        }
        for b in &borel {
            orbit_of[act(q, b, x) as usize] = orbits;
        }
        orbits += 1;
    }
    let sizes: Vec<i64> = (0..orbits)
        .map(|o| orbit_of.iter().filter(|&&k| k == o).count() as i64)
        .collect();
    // zero-sum combinations of orbit indicators
    let invariant_dim = orbits - 1;
    if invariant_dim != 1 {
        return Ok(HeckeReport {
            q,
            invariant_dim,
            eigen_identity: Ratio::zero(),
            eigen_reflection: Ratio::zero(),
            double_coset_ratio: 0,
        });
    }
    let coeff = [
        Ratio::from_integer(sizes[1]),
        Ratio::from_integer(-sizes[0]),
    ];
    let v: Vec<Ratio<i64>> = orbit_of.iter().map(|&o| coeff[o]).collect();
    let apply = |set: &[FqMat]| -> Vec<Ratio<i64>> {
        let mut acc = vec![Ratio::zero(); v.len()];
        for g in set {
            for (a, b) in acc.iter_mut().zip(translate(q, g, &v)) {
                *a += b;
            }
        }
        acc.into_iter()
            .map(|x| x / Ratio::from_integer(borel.len() as i64))
            .collect()
    };
    let eigen = |w: &[Ratio<i64>]| -> Ratio<i64> {
        let i = v.iter().position(|x| !x.is_zero()).unwrap();
        let lambda = w[i] / v[i];
        if w.iter().zip(&v).all(|(a, b)| *a == lambda * b) {
            lambda
        } else {
            Ratio::zero()
        }
    };
    let big_cell: Vec<FqMat> = group.iter().filter(|g| g[2] != 0).copied().collect();
    Ok(HeckeReport {
        q,
        invariant_dim,
        eigen_identity: eigen(&apply(&borel)),
        eigen_reflection: eigen(&apply(&big_cell)),
        double_coset_ratio: big_cell.len() / borel.len(),
    })
}

/// `sum_g |chi(g)|^2` and `|SL2(F_q)|`.
pub fn character_norm(q: u64) -> Result<(i64, i64)> {
    let group = sl2(q);
    let mut total = 0;
    for g in &group {
        let c = steinberg_character(q, g)?;
        total += c * c;
    }
    Ok((total, group.len() as i64))
}

fn require_a1(apt: &Apartment) -> Result<()> {
    if apt.spec.name != SystemName::A1 {
        return Err(Error::UnsupportedSystem(apt.spec.name.as_str().into()));
    }
    Ok(())
}

/// Cells in the closure of the base chamber `[0, 1/m]`.
fn base_chamber_face(apt: &Apartment, cell: usize) -> bool {
    let hi = Ratio::new(1, apt.m as i64);
    apt.cell(cell)
        .vertices
        .iter()
        .all(|v| v.0[0] >= Ratio::zero() && v.0[0] <= hi)
}

fn i_plus(apt: &Apartment) -> GroupSpec {
    GroupSpec {
        t: Ratio::new(1, 2 * apt.m as i64),
        r: Ratio::zero(),
        strict: true,
    }
}

fn cell_group(apt: &Apartment, cell: usize) -> GroupSpec {
    GroupSpec {
        t: apt.barycenter(cell).0[0],
        r: Ratio::zero(),
        strict: true,
    }
}

/// `|U|` for the reductive quotient at a face of the base chamber: the
/// Steinberg degree `q` for a vertex (where the quotient is `SL2(F_p)`), and
/// `1` for the chamber.
pub fn unipotent_order(apt: &Apartment, cell: usize, p: u64) -> Result<i64> {
    if apt.dim(cell) == 0 {
        steinberg_character(p, &[1, 0, 0, 1])
    } else {
        Ok(1)
    }
}

#[derive(Debug, Clone)]
pub struct IndexReport {
    pub cell: String,
    pub index: u128,
    pub expected: i64,
    pub contained: bool,
}

impl IndexReport {
    pub fn pass(&self) -> bool {
        self.contained && self.index == self.expected as u128
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({"cell": self.cell, "index": self.index as u64, "expected": self.expected, "contained": self.contained, "pass": self.pass()})
    }
}

/// `[I+ : G_{sigma,0+}]` by class counting, against `|U_sigma|`.
pub fn unipotent_index_identity(
    apt: &Apartment,
    lv: &Level,
    cell: usize,
    budget: u128,
) -> Result<IndexReport> {
    require_a1(apt)?;
    if apt.m != 1 || !base_chamber_face(apt, cell) {
        return Err(Error::Precondition(format!(
            "{} is not a face of the base chamber",
            apt.cell(cell)
        )));
    }
    let ip = enumerate_group(&i_plus(apt), lv, budget)?;
    let gs = enumerate_group(&cell_group(apt, cell), lv, budget)?;
    let contained = gs.keys().all(|k| ip.contains_key(k));
    Ok(IndexReport {
        cell: apt.cell(cell).to_string(),
        index: if ip.len() % gs.len() == 0 {
            (ip.len() / gs.len()) as u128
        } else {
            0
        },
        expected: unipotent_order(apt, cell, lv.p as u64)?,
        contained,
    })
}

#[derive(Debug, Clone)]
pub struct DepthZeroReport {
    pub projector_side: R,
    pub unipotent_side: R,
}

impl DepthZeroReport {
    pub fn pass(&self) -> bool {
        self.projector_side == self.unipotent_side
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({"projector_side": self.projector_side.to_string(), "unipotent_side": self.unipotent_side.to_string(), "pass": self.pass()})
    }
}

/// Test function on `I+`: a set of level-`N` classes.
#[derive(Debug, Clone, Default)]
pub enum TestFunction {
    #[default]
    Zero,
    WholeIPlus,
    Classes(BTreeSet<CosetKey>),
}

/// `E_0^Sigma(f)` from the truncated measures against
/// `sum (-1)^dim |U_sigma| * mu^{I+}(f * 1_{G_{sigma,0+}})` with `mu^{I+}`
/// the normalized count of `I+` classes.
pub fn depth_zero_comparison(
    apt: &Apartment,
    lv: &Level,
    sigma: &SubComplex,
    f: &TestFunction,
    budget: u128,
) -> Result<DepthZeroReport> {
    require_a1(apt)?;
    if apt.m != 1 || !sigma.cells.iter().all(|&c| base_chamber_face(apt, c)) {
        return Err(Error::Precondition(
            "cells must be faces of the base chamber".into(),
        ));
    }
    let ip = enumerate_group(&i_plus(apt), lv, budget)?;
    let support: BTreeSet<CosetKey> = match f {
        TestFunction::Zero => BTreeSet::new(),
        TestFunction::WholeIPlus => ip.keys().copied().collect(),
        TestFunction::Classes(s) => {
            if !s.iter().all(|k| ip.contains_key(k)) {
                return Err(Error::Precondition(
                    "test function is not supported in I+".into(),
                ));
            }
            s.clone()
        }
    };
    let mut measure = TruncatedMeasure::zero(lv);
    let mut unip = R::zero();
    let ip_count = R::from_integer(ip.len() as i128);
    for &c in &sigma.cells {
        let sign: i128 = if apt.dim(c) % 2 == 0 { 1 } else { -1 };
        let set = enumerate_group(&cell_group(apt, c), lv, budget)?;
        measure.add_scaled(&TruncatedMeasure::uniform(&set, lv), sign);
        let overlap = support.iter().filter(|k| set.contains_key(k)).count() as i128;
        let u = unipotent_order(apt, c, lv.p as u64)? as i128;
        unip += R::from_integer(sign * u * overlap) / ip_count;
    }
    let proj: R = support
        .iter()
        .filter_map(|k| measure.weights.get(k))
        .map(|(_, w)| *w)
        .sum();
    Ok(DepthZeroReport {
        projector_side: proj,
        unipotent_side: unip,
    })
}

pub fn base_faces(apt: &Apartment) -> Result<SubComplex> {
    let lo = apt.vertex_index(&Point(vec![Ratio::zero()]))?;
    let hi = apt.vertex_index(&Point(vec![Ratio::new(1, apt.m as i64)]))?;
    let ch = apt.index_of_vertices(&[
        apt.cell(lo).vertices[0].clone(),
        apt.cell(hi).vertices[0].clone(),
    ])?;
    Ok(SubComplex::new([lo, hi, ch]))
}

pub fn describe_cell(apt: &Apartment, c: usize) -> String {
    apt.cell(c)
        .vertices
        .iter()
        .map(|v| fmt_q(&v.0[0]))
        .collect::<Vec<_>>()
        .join("-")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine_apartment::{RootSystemSpec, Window};
    use crate::sl2_padic_engine::{coset, Mat2, DEFAULT_BUDGET};

    fn a1() -> Apartment {
        Apartment::build(
            RootSystemSpec::new(SystemName::A1, 0).unwrap(),
            1,
            Window::ints(1, -2, 3).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn field_arithmetic() {
        let a = Fp::new(7, -3);
        assert_eq!(a.v, 4);
        assert_eq!(a.mul(a.inv().unwrap()).v, 1);
        assert_eq!(a.add(a.neg()).v, 0);
        assert!(Fp::new(7, 0).inv().is_err());
    }

    #[test]
    fn character_examples() {
        assert_eq!(steinberg_character(3, &[1, 0, 0, 1]).unwrap(), 3);
        assert_eq!(steinberg_character(3, &[1, 1, 0, 1]).unwrap(), 0);
        assert_eq!(steinberg_character(5, &[2, 0, 0, 3]).unwrap(), 1);
        assert!(steinberg_character(5, &[2, 0, 0, 2]).is_err());
        assert!(steinberg_character(4, &[1, 0, 0, 1]).is_err());
    }

    #[test]
    fn scalars_act_trivially() {
        for q in [3, 5, 7] {
            let minus = [q - 1, 0, 0, q - 1];
            assert!((0..=q).all(|x| act(q, &minus, x) == x));
        }
    }

    #[test]
    fn irreducibility_and_unipotent_vanishing() {
        for q in [2, 3, 5] {
            let (norm, order) = character_norm(q).unwrap();
            assert_eq!(norm, order, "q = {q}");
            for g in sl2(q) {
                let unipotent = (g[0] + g[3]) % q == 2 % q && g != [1, 0, 0, 1];
                if unipotent {
                    assert_eq!(steinberg_character(q, &g).unwrap(), 0);
                }
            }
        }
    }

    #[test]
    fn hecke_signs() {
        for q in [2, 3, 5, 7] {
            let rep = hecke_sign_action(q).unwrap();
            assert!(rep.pass(), "{:?}", rep);
        }
        assert!(hecke_sign_action(11).is_err());
    }

    #[test]
    fn index_examples() {
        let apt = a1();
        let faces = base_faces(&apt).unwrap();
        let chamber = *faces.cells.iter().find(|&&c| apt.dim(c) == 1).unwrap();
        let lv = Level::new(3, 3).unwrap();
        let rep = unipotent_index_identity(&apt, &lv, chamber, DEFAULT_BUDGET).unwrap();
        assert_eq!(rep.index, 1);
        let v0 = apt.vertex_index(&Point(vec![Ratio::zero()])).unwrap();
        let rep = unipotent_index_identity(&apt, &lv, v0, DEFAULT_BUDGET).unwrap();
        assert!(rep.pass() && rep.index == 3);
        let v1 = apt.vertex_index(&Point(vec![Ratio::one()])).unwrap();
        let rep =
            unipotent_index_identity(&apt, &Level::new(2, 4).unwrap(), v1, DEFAULT_BUDGET).unwrap();
        assert!(rep.pass() && rep.index == 2);
        for p in [2, 3, 5] {
            let lv = Level::new(p, 3).unwrap();
            for &c in &faces.cells {
                assert!(unipotent_index_identity(&apt, &lv, c, DEFAULT_BUDGET)
                    .unwrap()
                    .pass());
            }
        }
        let v2 = apt
            .vertex_index(&Point(vec![Ratio::from_integer(2)]))
            .unwrap();
        assert!(unipotent_index_identity(&apt, &lv, v2, DEFAULT_BUDGET).is_err());
    }

    #[test]
    fn depth_zero_examples() {
        let apt = a1();
        let sigma = base_faces(&apt).unwrap();
        let lv = Level::new(3, 3).unwrap();
        let whole =
            depth_zero_comparison(&apt, &lv, &sigma, &TestFunction::WholeIPlus, DEFAULT_BUDGET)
                .unwrap();
        assert!(whole.pass());
        assert_eq!(whole.projector_side, R::one());
        let id = coset(&Mat2::identity(), &lv).unwrap().0;
        let one = depth_zero_comparison(
            &apt,
            &lv,
            &sigma,
            &TestFunction::Classes([id].into()),
            DEFAULT_BUDGET,
        )
        .unwrap();
        assert!(one.pass());
        assert_eq!(
            one.projector_side,
            R::new(1, 729) + R::new(1, 729) - R::new(1, 2187)
        );
        let zero =
            depth_zero_comparison(&apt, &lv, &sigma, &TestFunction::Zero, DEFAULT_BUDGET).unwrap();
        assert!(zero.pass() && zero.projector_side.is_zero());
        let outside = coset(&Mat2::lower(R::one()), &lv).unwrap().0;
        assert!(depth_zero_comparison(
            &apt,
            &lv,
            &sigma,
            &TestFunction::Classes([outside].into()),
            DEFAULT_BUDGET
        )
        .is_err());
    }
}
