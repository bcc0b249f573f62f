//! Finite-precision model of `SL2(Q_p)`.
//!
//! Group elements are exact rational matrices (dense in `SL2(Q_p)`), so entry
//! valuations are computed exactly. Measures live on the coset space `G/K_N`
//! where `K_N = 1 + p^N M2(Z_p)`. A right coset `gK_N` is keyed canonically by
//! the lattice `g Z_p^2` in upper-triangular Hermite form `H` together with
//! `H^{-1} g mod p^N`.
//!
//! `AB/K_N` for compact open subgroups `A`, `B ⊇ K_N` is obtained by closing
//! `B/K_N` under left multiplication by topological generators of `A`; the
//! left action of `G` on `G/K_N` is well defined, so no Iwahori factorization
//! is needed to enumerate products.

use crate::affine_apartment::{Apartment, Point, RootSystemSpec, SystemName};
use crate::convex_combinatorics::{upsilon, SubComplex};
use crate::error::{Error, Result};
use crate::moy_prasad_lattices::lattice_spec;
use crate::projector_stabilizer::{formal_projector, reduce_against, FormalSignedSum};
use crate::rational::{fmt_q, Q};
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use std::collections::{BTreeMap, VecDeque};

pub type R = Ratio<i128>;

pub const DEFAULT_BUDGET: u128 = 2_000_000;

fn ri(n: i128) -> R {
    R::from_integer(n)
}

pub fn is_prime(p: i128) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

fn vp_int(mut n: i128, p: i128) -> i64 {
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}

/// `p`-adic valuation of a rational; `None` for zero.
pub fn val_p(x: &R, p: i128) -> Option<i64> {
    if x.is_zero() {
        None
    } else {
        Some(vp_int(*x.numer(), p) - vp_int(*x.denom(), p))
    }
}

fn val_at_least(x: &R, p: i128, t: i64) -> bool {
    val_p(x, p).is_none_or(|v| v >= t)
}

pub fn p_pow(p: i128, e: i64) -> R {
    if e >= 0 {
        ri(p.pow(e as u32))
    } else {
        R::new(1, p.pow((-e) as u32))
    }
}

fn modinv(a: i128, m: i128) -> i128 {
    let (mut r0, mut r1) = (a.rem_euclid(m), m);
    let (mut s0, mut s1) = (1i128, 0i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    debug_assert_eq!(r0, 1, "not invertible");
    s0.rem_euclid(m)
}

/// Residue in `[0, pn)` of a `p`-integral rational.
pub fn residue(x: &R, p: i128, pn: i128) -> Result<i128> {
    if !val_at_least(x, p, 0) {
        return Err(Error::Precision(format!("{x} is not p-integral")));
    }
    let num = x.numer().rem_euclid(pn);
    Ok((num * modinv(*x.denom(), pn)).rem_euclid(pn))
}

/// Representative `n / p^k` of `w` in `Q_p / Z_p` with `0 <= n < p^k`.
fn frac_p(w: &R, p: i128) -> (i128, u32) {
    let mut den = *w.denom();
    let mut k = 0u32;
    while den % p == 0 {
        den /= p;
        k += 1;
    }
    if k == 0 {
        return (0, 0);
    }
    let pk = p.pow(k);
    (
        (w.numer().rem_euclid(pk) * modinv(den, pk)).rem_euclid(pk),
        k,
    )
}

/// A truncated element of `Q_p`: `p^valuation * unit`, the unit known modulo
/// `p^precision`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PadicScalar {
    pub p: i128,
    pub valuation: Option<i64>,
    pub unit: i128,
    pub precision: u32,
}

impl PadicScalar {
    pub fn zero(p: i128, precision: u32) -> Self {
        Self {
            p,
            valuation: None,
            unit: 0,
            precision,
        }
    }

    pub fn from_rational(x: &R, p: i128, precision: u32) -> Result<Self> {
        match val_p(x, p) {
            None => Ok(Self::zero(p, precision)),
            Some(v) => {
                let u = x * p_pow(p, -v);
                Ok(Self {
                    p,
                    valuation: Some(v),
                    unit: residue(&u, p, p.pow(precision))?,
                    precision,
                })
            }
        }
    }

    pub fn to_rational(&self) -> R {
        match self.valuation {
            None => R::zero(),
            Some(v) => ri(self.unit) * p_pow(self.p, v),
        }
    }

    /// Absolute precision: the element is known modulo `p^abs_precision`.
    pub fn abs_precision(&self) -> i64 {
        self.valuation.unwrap_or(0) + self.precision as i64
    }

    pub fn mul(&self, o: &Self) -> Result<Self> {
        match (self.valuation, o.valuation) {
            (Some(a), Some(b)) => {
                let n = self.precision.min(o.precision);
                let pn = self.p.pow(n);
                Ok(Self {
                    p: self.p,
                    valuation: Some(a + b),
                    unit: (self.unit % pn) * (o.unit % pn) % pn,
                    precision: n,
                })
            }
            _ => Ok(Self::zero(self.p, self.precision.min(o.precision))),
        }
    }

    pub fn add(&self, o: &Self, floor: u32) -> Result<Self> {
        let abs = self.abs_precision().min(o.abs_precision());
        let sum = self.to_rational() + o.to_rational();
        let v = match val_p(&sum, self.p) {
            Some(v) if v < abs => v,
            _ => return Ok(Self::zero(self.p, floor)),
        };
        let rel = abs - v;
        if rel < floor as i64 {
            return Err(Error::Precision(format!(
                "relative precision {rel} below floor {floor}"
            )));
        }
        Self::from_rational(&sum, self.p, rel as u32)
    }

    pub fn inv(&self) -> Result<Self> {
        match self.valuation {
            None => Err(Error::Singular),
            Some(v) => {
                let pn = self.p.pow(self.precision);
                Ok(Self {
                    p: self.p,
                    valuation: Some(-v),
                    unit: modinv(self.unit, pn),
                    precision: self.precision,
                })
            }
        }
    }
}

/// An element of `SL2(Q)` viewed inside `SL2(Q_p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mat2 {
    pub a: R,
    pub b: R,
    pub c: R,
    pub d: R,
}

impl Mat2 {
    pub fn new(a: R, b: R, c: R, d: R) -> Result<Self> {
        let m = Self { a, b, c, d };
        if m.det() != R::one() {
            return Err(Error::Invalid(format!("determinant {} is not 1", m.det())));
        }
        Ok(m)
    }

    pub fn from_ints(e: [i128; 4]) -> Result<Self> {
        Self::new(ri(e[0]), ri(e[1]), ri(e[2]), ri(e[3]))
    }

    pub fn identity() -> Self {
        Self {
            a: R::one(),
            b: R::zero(),
            c: R::zero(),
            d: R::one(),
        }
    }

    pub fn upper(n: R) -> Self {
        Self {
            b: n,
            ..Self::identity()
        }
    }

    pub fn lower(m: R) -> Self {
        Self {
            c: m,
            ..Self::identity()
        }
    }

    pub fn torus(a: R) -> Self {
        Self {
            a,
            b: R::zero(),
            c: R::zero(),
            d: a.recip(),
        }
    }

    pub fn det(&self) -> R {
        self.a * self.d - self.b * self.c
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn inv(&self) -> Self {
        Self {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    pub fn entries(&self) -> [R; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn to_padic(&self, p: i128, precision: u32) -> Result<[PadicScalar; 4]> {
        let e = self.entries();
        Ok([
            PadicScalar::from_rational(&e[0], p, precision)?,
            PadicScalar::from_rational(&e[1], p, precision)?,
            PadicScalar::from_rational(&e[2], p, precision)?,
            PadicScalar::from_rational(&e[3], p, precision)?,
        ])
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!(self
            .entries()
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>())
    }
}

/// `G_{t,r}` (or `G_{t,r+}` when strict) on the standard apartment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupSpec {
    pub t: Q,
    pub r: Q,
    pub strict: bool,
}

/// Entry thresholds: `val(b) >= b`, `val(c) >= c`, and `val(a-1), val(d-1) >= torus`
/// (for `torus == 0`, `a` and `d` are units).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Thresholds {
    pub b: i64,
    pub c: i64,
    pub torus: i64,
}

fn a1_spec() -> RootSystemSpec {
    RootSystemSpec::new(SystemName::A1, 0).expect("A1 is always available")
}

impl GroupSpec {
    pub fn new(t: Q, r: Q, strict: bool) -> Result<Self> {
        if r < Q::zero() {
            return Err(Error::Invalid(format!("negative depth {}", fmt_q(&r))));
        }
        Ok(Self { t, r, strict })
    }

    pub fn thresholds(&self) -> Thresholds {
        let s = lattice_spec(&a1_spec(), &Point(vec![self.t]), self.r, self.strict)
            .expect("A1 lattice spec");
        Thresholds {
            b: s.threshold(&[1]).unwrap(),
            c: s.threshold(&[-1]).unwrap(),
            torus: s.torus,
        }
    }

    /// Whether the group is a product of its lower, torus and upper parts.
    pub fn iwahori_form(&self) -> bool {
        let th = self.thresholds();
        th.b + th.c >= 1
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({"t": fmt_q(&self.t), "r": fmt_q(&self.r), "strict": self.strict})
    }
}

pub fn member_group(g: &Mat2, spec: &GroupSpec, p: i128) -> bool {
    let th = spec.thresholds();
    let diag_ok = |x: &R| {
        if th.torus <= 0 {
            val_at_least(x, p, 0)
        } else {
            val_at_least(&(x - R::one()), p, th.torus)
        }
    };
    val_at_least(&g.b, p, th.b) && val_at_least(&g.c, p, th.c) && diag_ok(&g.a) && diag_ok(&g.d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IwahoriFactors {
    pub lower: R,
    pub torus: R,
    pub upper: R,
}

/// `g = u_-(m) diag(a, 1/a) u_+(n)` with `m = c/a`, `n = b/a`.
pub fn iwahori_factor(g: &Mat2, p: i128) -> Result<IwahoriFactors> {
    if val_p(&g.a, p) != Some(0) {
        return Err(Error::Precondition(format!(
            "entry a = {} is not a unit",
            g.a
        )));
    }
    let f = IwahoriFactors {
        lower: g.c / g.a,
        torus: g.a,
        upper: g.b / g.a,
    };
    debug_assert_eq!(
        Mat2::lower(f.lower)
            .mul(&Mat2::torus(f.torus))
            .mul(&Mat2::upper(f.upper)),
        *g
    );
    Ok(f)
}

/// Working level: prime `p` and truncation exponent `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Level {
    pub p: i128,
    pub n: u32,
    pub pn: i128,
}

impl Level {
    pub fn new(p: i128, n: u32) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::Invalid(format!("{p} is not prime")));
        }
        if n == 0 || (n as f64) * (p as f64).log2() > 30.0 {
            return Err(Error::Invalid(format!(
                "level {n} out of range for p = {p}"
            )));
        }
        Ok(Self { p, n, pn: p.pow(n) })
    }
}

/// Canonical label of a right coset `g K_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CosetKey {
    pub alpha: i64,
    pub u_num: i128,
    pub u_exp: u32,
    pub y: [i128; 4],
}

/// Key and canonical `SL2` representative of `g K_N`.
pub fn coset(g: &Mat2, lv: &Level) -> Result<(CosetKey, Mat2)> {
    let p = lv.p;
    let (v, w) = {
        let c1 = val_p(&g.c, p);
        let c2 = val_p(&g.d, p);
        let first_smaller = match (c1, c2) {
            (Some(x), Some(y)) => x <= y,
            (Some(_), None) => true,
            _ => false,
        };
        if first_smaller {
            ((g.a, g.c), (g.b, g.d))
        } else {
            ((g.b, g.d), (g.a, g.c))
        }
    };
    let beta = val_p(&v.1, p).ok_or(Error::Singular)?;
    let e = w.0 - w.1 * v.0 / v.1;
    let alpha = val_p(&e, p).ok_or(Error::Singular)?;
    if alpha + beta != 0 {
        return Err(Error::Invalid("coset of a matrix outside SL2".into()));
    }
    let u = v.0 * p_pow(p, beta) / v.1;
    let (u_num, u_exp) = frac_p(&(u * p_pow(p, -alpha)), p);
    let u_c = p_pow(p, alpha) * R::new(u_num, p.pow(u_exp));
    let h_inv = Mat2 {
        a: p_pow(p, beta),
        b: -u_c,
        c: R::zero(),
        d: p_pow(p, alpha),
    };
    let y = h_inv.mul(g);
    let yr = [
        residue(&y.a, p, lv.pn)?,
        residue(&y.b, p, lv.pn)?,
        residue(&y.c, p, lv.pn)?,
        residue(&y.d, p, lv.pn)?,
    ];
    let key = CosetKey {
        alpha,
        u_num,
        u_exp,
        y: yr,
    };
    let y0 = Mat2 {
        a: ri(yr[0]),
        b: ri(yr[1]),
        c: ri(yr[2]),
        d: ri(yr[3]),
    };
    let det = y0.det();
    let fix = Mat2 {
        a: R::one(),
        b: R::zero(),
        c: R::zero(),
        d: det.recip(),
    };
    let h = Mat2 {
        a: p_pow(p, alpha),
        b: u_c,
        c: R::zero(),
        d: p_pow(p, beta),
    };
    let rep = h.mul(&y0).mul(&fix);
    debug_assert_eq!(rep.det(), R::one());
    Ok((key, rep))
}

pub type CosetSet = BTreeMap<CosetKey, Mat2>;

fn primitive_root(p: i128) -> i128 {
    let phi = p - 1;
    let mut factors = Vec::new();
    let mut n = phi;
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            factors.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        factors.push(n);
    }
    let pow_mod = |mut b: i128, mut e: i128| {
        let mut r = 1i128;
        b %= p;
        while e > 0 {
            if e & 1 == 1 {
                r = r * b % p;
            }
            b = b * b % p;
            e >>= 1;
        }
        r
    };
    (2..p)
        .find(|&g| factors.iter().all(|&f| pow_mod(g, phi / f) != 1))
        .unwrap_or(1)
}

/// Topological generators of the group.
pub fn generators(spec: &GroupSpec, p: i128) -> Vec<Mat2> {
    let th = spec.thresholds();
    let mut gens = vec![Mat2::upper(p_pow(p, th.b)), Mat2::lower(p_pow(p, th.c))];
    if th.torus >= 1 {
        gens.push(Mat2::torus(R::one() + p_pow(p, th.torus)));
        if p == 2 && th.torus == 1 {
            gens.push(Mat2::torus(ri(-1)));
        }
    } else if p == 2 {
        gens.push(Mat2::torus(ri(-1)));
        gens.push(Mat2::torus(ri(5)));
    } else {
        gens.push(Mat2::torus(ri(primitive_root(p))));
        gens.push(Mat2::torus(ri(1 + p)));
    }
    gens
}

/// Index `[G : G ∩ K_N]`, i.e. the number of classes the enumeration produces.
pub fn expected_count(spec: &GroupSpec, lv: &Level) -> u128 {
    let th = spec.thresholds();
    let n = lv.n as i64;
    let p = lv.p as u128;
    let pw = |e: i64| p.pow(e.max(0) as u32);
    if spec.iwahori_form() {
        let torus = if th.torus >= 1 {
            pw(n - th.torus)
        } else {
            (p - 1) * pw(n - 1)
        };
        pw(n - th.b) * pw(n - th.c) * torus
    } else {
        // a conjugate of SL2(Z_p)
        pw(3 * n - 2) * (p * p - 1)
    }
}

/// Closure of `start` under left multiplication by `gens`.
pub fn orbit(start: &CosetSet, gens: &[Mat2], lv: &Level, budget: u128) -> Result<CosetSet> {
    let mut seen = start.clone();
    let mut queue: VecDeque<Mat2> = start.values().copied().collect();
    while let Some(g) = queue.pop_front() {
        for h in gens {
            let (k, rep) = coset(&h.mul(&g), lv)?;
            if let std::collections::btree_map::Entry::Vacant(e) = seen.entry(k) {
                e.insert(rep);
                queue.push_back(rep);
                if seen.len() as u128 > budget {
                    return Err(Error::Budget {
                        needed: seen.len() as u64,
                        budget: budget as u64,
                    });
                }
            }
        }
    }
    Ok(seen)
}

fn check_budget(needed: u128, budget: u128) -> Result<()> {
    if needed > budget {
        return Err(Error::Budget {
            needed: needed.min(u64::MAX as u128) as u64,
            budget: budget as u64,
        });
    }
    Ok(())
}

/// The classes `G K_N / K_N`.
pub fn enumerate_group(spec: &GroupSpec, lv: &Level, budget: u128) -> Result<CosetSet> {
    check_budget(expected_count(spec, lv), budget)?;
    let mut start = CosetSet::new();
    let (k, rep) = coset(&Mat2::identity(), lv)?;
    start.insert(k, rep);
    orbit(&start, &generators(spec, lv.p), lv, budget)
}

/// The same classes generated by ranging the three Iwahori factors over their
/// residues modulo `p^N`. The factor whose threshold may be negative is put
/// on the left so that every residue choice is well defined on cosets.
pub fn enumerate_by_factors(spec: &GroupSpec, lv: &Level, budget: u128) -> Result<CosetSet> {
    if !spec.iwahori_form() {
        return Err(Error::Precondition("group is not of Iwahori form".into()));
    }
    check_budget(expected_count(spec, lv), budget)?;
    let th = spec.thresholds();
    let p = lv.p;
    let n = lv.n as i64;
    let range = |c: i64| -> Vec<R> {
        if c >= n {
            return vec![R::zero()];
        }
        (0..p.pow((n - c) as u32))
            .map(|k| ri(k) * p_pow(p, c))
            .collect()
    };
    let torus: Vec<R> = if th.torus >= 1 {
        range(th.torus).into_iter().map(|x| x + R::one()).collect()
    } else {
        (1..lv.pn).filter(|k| k % p != 0).map(ri).collect()
    };
    let (ub, lc) = (range(th.b), range(th.c));
    let mut out = CosetSet::new();
    for a in &torus {
        for m in &lc {
            for nn in &ub {
                let g = if th.b < 0 {
                    Mat2::upper(*nn).mul(&Mat2::torus(*a)).mul(&Mat2::lower(*m))
                } else {
                    Mat2::lower(*m).mul(&Mat2::torus(*a)).mul(&Mat2::upper(*nn))
                };
                let (k, rep) = coset(&g, lv)?;
                out.insert(k, rep);
            }
        }
    }
    Ok(out)
}

/// A finitely supported signed measure on `G/K_N` with exact weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedMeasure {
    pub p: i128,
    pub n: u32,
    pub weights: BTreeMap<CosetKey, (Mat2, R)>,
}

impl TruncatedMeasure {
    pub fn zero(lv: &Level) -> Self {
        Self {
            p: lv.p,
            n: lv.n,
            weights: BTreeMap::new(),
        }
    }

    pub fn uniform(set: &CosetSet, lv: &Level) -> Self {
        let w = R::new(1, set.len() as i128);
        Self {
            p: lv.p,
            n: lv.n,
            weights: set.iter().map(|(k, g)| (*k, (*g, w))).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &TruncatedMeasure, coeff: i128) {
        for (k, (g, w)) in &other.weights {
            let e = self.weights.entry(*k).or_insert((*g, R::zero()));
            e.1 += *w * ri(coeff);
            if e.1.is_zero() {
                self.weights.remove(k);
            }
        }
    }

    pub fn total_mass(&self) -> R {
        self.weights.values().map(|(_, w)| *w).sum()
    }

    pub fn support_len(&self) -> usize {
        self.weights.len()
    }

    pub fn same_weights(&self, other: &TruncatedMeasure) -> bool {
        self.weights.len() == other.weights.len()
            && self
                .weights
                .iter()
                .zip(&other.weights)
                .all(|((k1, (_, w1)), (k2, (_, w2)))| k1 == k2 && w1 == w2)
    }

    pub fn weight_at(&self, g: &Mat2, lv: &Level) -> Result<R> {
        let (k, _) = coset(g, lv)?;
        Ok(self
            .weights
            .get(&k)
            .map(|(_, w)| *w)
            .unwrap_or_else(R::zero))
    }

    /// Smallest `V` with all representative entries in `p^{-V} Z_p`.
    pub fn scale(&self) -> i64 {
        self.weights
            .values()
            .flat_map(|(g, _)| g.entries())
            .filter_map(|x| val_p(&x, self.p))
            .map(|v| -v)
            .max()
            .unwrap_or(0)
            .max(0)
    }

    pub fn to_json(&self) -> Result<serde_json::Value> {
        let v = self.scale();
        let modulus = self.p.pow(self.n + v as u32);
        let mut entries = Vec::new();
        for (g, w) in self.weights.values() {
            let mut enc = Vec::new();
            for x in g.entries() {
                enc.push(residue(&(x * p_pow(self.p, v)), self.p, modulus)?);
            }
            entries.push(json!([enc, w.numer().to_string(), w.denom().to_string()]));
        }
        Ok(json!({"entries": entries, "p": self.p, "N": self.n, "V": v}))
    }
}

/// Probability measure `delta_A * delta_B`: uniform on `AB/K_N`.
pub fn convolve_uniform(
    a: &GroupSpec,
    b: &GroupSpec,
    lv: &Level,
    budget: u128,
) -> Result<TruncatedMeasure> {
    let th = b.thresholds();
    if th.b > lv.n as i64 || th.c > lv.n as i64 || th.torus > lv.n as i64 {
        return Err(Error::Precision(format!(
            "level {} too small: right factor {} does not contain K_N",
            lv.n,
            b.to_json()
        )));
    }
    let bset = enumerate_group(b, lv, budget)?;
    let prod = orbit(&bset, &generators(a, lv.p), lv, budget)?;
    Ok(TruncatedMeasure::uniform(&prod, lv))
}

fn symbol_group(sym_cell_bary: &Point, depth: Q, strict: bool) -> GroupSpec {
    GroupSpec {
        t: sym_cell_bary.0[0],
        r: depth,
        strict,
    }
}

/// `sum coeff * (delta_{G_symbol} * delta_target)` over a formal signed sum.
pub fn measure_of_symbols(
    e: &FormalSignedSum,
    target: &GroupSpec,
    lv: &Level,
    budget: u128,
) -> Result<TruncatedMeasure> {
    let terms: Vec<_> = e.terms.iter().collect();
    let parts: Vec<Result<(TruncatedMeasure, i64)>> = terms
        .par_iter()
        .map(|(sym, &coeff)| {
            let g = symbol_group(&sym.cell.barycenter(), sym.depth, sym.strict);
            convolve_uniform(&g, target, lv, budget).map(|m| (m, coeff))
        })
        .collect();
    let mut out = TruncatedMeasure::zero(lv);
    for part in parts {
        let (m, c) = part?;
        out.add_scaled(&m, c as i128);
    }
    Ok(out)
}

fn require_a1(apt: &Apartment) -> Result<()> {
    if apt.spec.name != SystemName::A1 {
        return Err(Error::UnsupportedSystem(format!(
            "{} (SL2 needs A1)",
            apt.spec.name.as_str()
        )));
    }
    Ok(())
}

/// `E_r^Sigma * delta_target` as an exact signed measure.
pub fn apply_projector(
    apt: &Apartment,
    sigma: &SubComplex,
    r: Q,
    target: &GroupSpec,
    lv: &Level,
    budget: u128,
) -> Result<TruncatedMeasure> {
    require_a1(apt)?;
    let e = formal_projector(apt, sigma, r)?;
    measure_of_symbols(&e, target, lv, budget)
}

/// Analytic measure of the symbolically reduced projector, for comparison with
/// [`apply_projector`]. The target must be `G_{x, (r+s)+}`.
pub fn apply_reduced_projector(
    apt: &Apartment,
    sigma: &SubComplex,
    r: Q,
    s: Q,
    x: Q,
    lv: &Level,
    budget: u128,
) -> Result<TruncatedMeasure> {
    require_a1(apt)?;
    let e = formal_projector(apt, sigma, r)?;
    let reduced = reduce_against(apt, &e, &Point(vec![x]), s)?;
    measure_of_symbols(
        &reduced,
        &GroupSpec {
            t: x,
            r: r + s,
            strict: true,
        },
        lv,
        budget,
    )
}

/// Traceless matrix `[[h, b], [c, -h]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LieElem {
    pub h: R,
    pub b: R,
    pub c: R,
}

impl LieElem {
    pub fn conj(&self, g: &Mat2) -> LieElem {
        let x = Mat2 {
            a: self.h,
            b: self.b,
            c: self.c,
            d: -self.h,
        };
        let y = g.mul(&x).mul(&g.inv());
        LieElem {
            h: y.a,
            b: y.b,
            c: y.c,
        }
    }
}

/// `(g - g^{-1}) / 2`.
pub fn rlog(g: &Mat2, p: i128) -> Result<LieElem> {
    if p == 2 {
        return Err(Error::Invalid("rlog needs p != 2".into()));
    }
    Ok(LieElem {
        h: (g.a - g.d) / ri(2),
        b: g.b,
        c: g.c,
    })
}

pub fn lie_member(x: &LieElem, spec: &GroupSpec, p: i128) -> bool {
    let th = spec.thresholds();
    val_at_least(&x.b, p, th.b)
        && val_at_least(&x.c, p, th.c)
        && val_at_least(&x.h, p, th.torus.max(0))
}

/// Residues of `(h, b, c)` scaled to integrality, identifying a class of the
/// lattice modulo `p^N gl2(Z_p)`.
pub fn lie_class(x: &LieElem, lv: &Level) -> Result<[i128; 3]> {
    Ok([
        residue(&x.h, lv.p, lv.pn)?,
        residue(&x.b, lv.p, lv.pn)?,
        residue(&x.c, lv.p, lv.pn)?,
    ])
}

/// Random element of the group: factor triple, or a unipotent word for a
/// vertex parahoric.
pub fn random_element(spec: &GroupSpec, p: i128, depth: u32, rng: &mut impl Rng) -> Mat2 {
    let th = spec.thresholds();
    let span = p.pow(depth);
    let mut pick = |c: i64| ri(rng.gen_range(0..span)) * p_pow(p, c);
    if spec.iwahori_form() {
        let a = if th.torus >= 1 {
            R::one() + pick(th.torus)
        } else {
            let mut u = pick(0);
            while val_p(&u, p) != Some(0) {
                u = pick(0);
            }
            u
        };
        Mat2::lower(pick(th.c))
            .mul(&Mat2::torus(a))
            .mul(&Mat2::upper(pick(th.b)))
    } else {
        Mat2::upper(pick(th.b))
            .mul(&Mat2::lower(pick(th.c)))
            .mul(&Mat2::upper(pick(th.b)))
            .mul(&Mat2::lower(pick(th.c)))
    }
}

pub fn random_k_n(lv: &Level, rng: &mut impl Rng) -> Mat2 {
    let spec = GroupSpec {
        t: Q::zero(),
        r: Q::from_integer(lv.n as i64),
        strict: false,
    };
    random_element(&spec, lv.p, 3, rng)
}

#[derive(Debug, Clone, Default)]
pub struct IndicatorReport {
    pub samples: usize,
    pub in_union: usize,
    pub counterexamples: Vec<String>,
}

impl IndicatorReport {
    pub fn pass(&self) -> bool {
        self.counterexamples.is_empty()
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({"samples": self.samples, "in_union": self.in_union, "counterexamples": self.counterexamples, "pass": self.pass()})
    }
}

fn cell_groups(apt: &Apartment, sigma: &SubComplex, r: Q) -> Vec<(GroupSpec, i64)> {
    sigma
        .cells
        .iter()
        .map(|&c| {
            let sign = if apt.dim(c) % 2 == 0 { 1 } else { -1 };
            (
                GroupSpec {
                    t: apt.barycenter(c).0[0],
                    r,
                    strict: false,
                },
                sign,
            )
        })
        .collect()
}

/// Signed sum of `1_{G_{sigma,r}}(g)` and membership in the union.
pub fn signed_indicator(groups: &[(GroupSpec, i64)], g: &Mat2, p: i128) -> (i64, bool) {
    let mut sum = 0;
    let mut any = false;
    for (spec, sign) in groups {
        if member_group(g, spec, p) {
            sum += sign;
            any = true;
        }
    }
    (sum, any)
}

fn envelope_sample(groups: &[(GroupSpec, i64)], p: i128, rng: &mut impl Rng) -> Mat2 {
    let pick = |rng: &mut ChaCha8Rng| groups[rng.gen_range(0..groups.len())].0;
    let mut rng2 = ChaCha8Rng::seed_from_u64(rng.gen());
    match rng2.gen_range(0..4) {
        0 => random_element(&pick(&mut rng2), p, 4, &mut rng2),
        1 => {
            let a = random_element(&pick(&mut rng2), p, 4, &mut rng2);
            a.mul(&random_element(&pick(&mut rng2), p, 4, &mut rng2))
        }
        2 => {
            let base = GroupSpec {
                t: Q::zero(),
                r: Q::zero(),
                strict: false,
            };
            random_element(&base, p, 4, &mut rng2)
        }
        _ => {
            let k: i64 = rng2.gen_range(-3..4);
            let e: i128 = rng2.gen_range(1..p.pow(2));
            if rng2.gen_bool(0.5) {
                Mat2::upper(ri(e) * p_pow(p, k))
            } else {
                Mat2::lower(ri(e) * p_pow(p, k))
            }
        }
    }
}

/// Inclusion-exclusion for the union of the groups `G_{sigma,r}` over sampled
/// elements.
pub fn indicator_euler_check(
    apt: &Apartment,
    sigma: &SubComplex,
    r: Q,
    p: i128,
    samples: usize,
    seed: u64,
) -> Result<IndicatorReport> {
    require_a1(apt)?;
    formal_projector(apt, sigma, r)?;
    let groups = cell_groups(apt, sigma, r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut elems = vec![Mat2::identity()];
    for (spec, _) in &groups {
        let th = spec.thresholds();
        elems.push(Mat2::upper(p_pow(p, th.b)));
        elems.push(Mat2::lower(p_pow(p, th.c)));
        elems.push(Mat2::upper(p_pow(p, th.b - 1)));
    }
    while elems.len() < samples.max(1) {
        elems.push(envelope_sample(&groups, p, &mut rng));
    }
    let mut rep = IndicatorReport::default();
    for g in elems {
        rep.samples += 1;
        let (sum, any) = signed_indicator(&groups, &g, p);
        if any {
            rep.in_union += 1;
        }
        if sum != i64::from(any) {
            rep.counterexamples.push(format!(
                "{} -> signed sum {sum}, in union {any}",
                g.to_json()
            ));
        }
    }
    Ok(rep)
}

/// Checks `G_x ∩ G_{Sigma,r} = G_x ∩ G_{Sigma',r}` on elements sampled from
/// `G_x = G_{x,0}`.
pub fn stabilization_indicator_check(
    apt: &Apartment,
    x: Q,
    r: Q,
    sigma: &SubComplex,
    sigma_prime: &SubComplex,
    p: i128,
    samples: usize,
    seed: u64,
) -> Result<IndicatorReport> {
    require_a1(apt)?;
    if !sigma_prime.is_subset(sigma) {
        return Err(Error::Precondition(
            "Sigma' is not contained in Sigma".into(),
        ));
    }
    let ups = upsilon(apt, &Point(vec![x]), r)?;
    if !ups.iter().all(|c| sigma_prime.contains(*c)) {
        return Err(Error::Precondition(
            "Upsilon_{x,r} is not contained in Sigma'".into(),
        ));
    }
    let big = cell_groups(apt, sigma, r);
    let small = cell_groups(apt, sigma_prime, r);
    let gx = GroupSpec {
        t: x,
        r: Q::zero(),
        strict: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = IndicatorReport::default();
    for _ in 0..samples {
        let mut g = random_element(&gx, p, 4, &mut rng);
        if rng.gen_bool(0.5) {
            let (spec, _) = small[rng.gen_range(0..small.len())];
            let h = random_element(&spec, p, 4, &mut rng);
            if member_group(&h, &gx, p) {
                g = h;
            }
        }
        debug_assert!(member_group(&g, &gx, p));
        rep.samples += 1;
        let (_, a) = signed_indicator(&big, &g, p);
        let (_, b) = signed_indicator(&small, &g, p);
        if a {
            rep.in_union += 1;
        }
        if a != b {
            rep.counterexamples
                .push(format!("{}: Sigma {a}, Sigma' {b}", g.to_json()));
        }
    }
    Ok(rep)
}

/// Spot check that the measure is invariant under right translation by `K_N`
/// and left translation by `left`.
pub fn invariance_spot_check(
    mu: &TruncatedMeasure,
    left: &GroupSpec,
    lv: &Level,
    samples: usize,
    seed: u64,
) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support: Vec<_> = mu.weights.values().collect();
    if support.is_empty() {
        return Ok(true);
    }
    for _ in 0..samples {
        let (g, w) = support[rng.gen_range(0..support.len())];
        let k = random_k_n(lv, &mut rng);
        if mu.weight_at(&g.mul(&k), lv)? != *w {
            return Ok(false);
        }
        let a = random_element(left, lv.p, 3, &mut rng);
        if mu.weight_at(&a.mul(g), lv)? != *w {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn mass_is(mu: &TruncatedMeasure, m: R) -> bool {
    mu.total_mass() == m && mu.weights.values().all(|(_, w)| !w.is_zero())
}

pub fn max_abs_weight(mu: &TruncatedMeasure) -> R {
    mu.weights
        .values()
        .map(|(_, w)| w.abs())
        .max()
        .unwrap_or_else(R::zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine_apartment::Window;
    use crate::convex_combinatorics::SubComplex;
    use crate::rational::{q, qi};
    use proptest::prelude::*;
    use rand::Rng;

    fn gs(t: Q, r: Q, strict: bool) -> GroupSpec {
        GroupSpec::new(t, r, strict).unwrap()
    }

    fn pr(n: i128, d: i128) -> R {
        R::new(n, d)
    }

    fn a1(lo: i64, hi: i64) -> Apartment {
        Apartment::build(
            RootSystemSpec::new(SystemName::A1, 0).unwrap(),
            1,
            Window::ints(1, lo, hi).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn padic_scalar_arithmetic() {
        let x = PadicScalar::from_rational(&pr(18, 5), 3, 4).unwrap();
        assert_eq!(x.valuation, Some(2));
        assert_eq!(x.unit, (2 * modinv(5, 81)) % 81);
        assert_eq!(x.mul(&x.inv().unwrap()).unwrap().to_rational(), R::one());
        let y = PadicScalar::from_rational(&pr(-18, 5), 3, 4).unwrap();
        assert_eq!(x.add(&y, 1).unwrap().valuation, None);
        let z = PadicScalar::from_rational(&pr(1, 1), 3, 2).unwrap();
        let w = PadicScalar::from_rational(&pr(35, 1), 3, 2).unwrap();
        assert_eq!(z.add(&w, 1).unwrap().valuation, None);
        let two = PadicScalar::from_rational(&pr(2, 1), 3, 2).unwrap();
        assert_eq!(z.add(&two, 1).unwrap().valuation, Some(1));
        assert!(matches!(z.add(&two, 2), Err(Error::Precision(_))));
    }

    #[test]
    fn member_group_examples() {
        let p = 3;
        let g = Mat2::upper(pr(1, p));
        assert!(!member_group(&g, &gs(qi(0), qi(0), false), p));
        assert!(member_group(&g, &gs(qi(1), qi(0), false), p));
        for (t, r, s) in [
            (q(0, 1), q(0, 1), true),
            (q(1, 2), q(3, 2), false),
            (q(-2, 1), q(5, 1), true),
        ] {
            assert!(member_group(&Mat2::identity(), &gs(t, r, s), p));
        }
        assert!(Mat2::from_ints([1, 1, 0, 2]).is_err());
    }

    #[test]
    fn iwahori_examples() {
        let p = 3;
        let g = Mat2::from_ints([1, p, p, 1 + p * p]).unwrap();
        let f = iwahori_factor(&g, p).unwrap();
        assert_eq!((f.lower, f.torus, f.upper), (ri(p), R::one(), ri(p)));
        let f = iwahori_factor(&Mat2::identity(), p).unwrap();
        assert_eq!(
            (f.lower, f.torus, f.upper),
            (R::zero(), R::one(), R::zero())
        );
        assert!(iwahori_factor(&Mat2::from_ints([3, 1, -1, 0]).unwrap(), p).is_err());
    }

    #[test]
    fn iwahori_random_round_trip() {
        let (p, spec) = (3, gs(q(1, 2), qi(0), true));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let g = random_element(&spec, p, 4, &mut rng);
            assert!(member_group(&g, &spec, p));
            let f = iwahori_factor(&g, p).unwrap();
            assert!(val_at_least(&f.lower, p, 1));
            assert!(val_at_least(&f.upper, p, 0));
            assert!(val_at_least(&(f.torus - R::one()), p, 1));
            let back = Mat2::lower(f.lower)
                .mul(&Mat2::torus(f.torus))
                .mul(&Mat2::upper(f.upper));
            assert_eq!(back, g);
        }
    }

    #[test]
    fn coset_keys_are_canonical() {
        let lv = Level::new(3, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for spec in [
            gs(qi(0), qi(0), false),
            gs(qi(2), qi(0), true),
            gs(q(-3, 2), qi(0), true),
        ] {
            for _ in 0..40 {
                let g = random_element(&spec, 3, 4, &mut rng);
                let (k, rep) = coset(&g, &lv).unwrap();
                let k2 = coset(&g.mul(&random_k_n(&lv, &mut rng)), &lv).unwrap().0;
                assert_eq!(k, k2);
                assert_eq!(coset(&rep, &lv).unwrap().0, k);
                let off = Mat2::upper(p_pow(3, 2));
                assert_ne!(coset(&g.mul(&off), &lv).unwrap().0, k);
            }
        }
    }

    #[test]
    fn enumerate_examples() {
        let lv = Level::new(2, 3).unwrap();
        let set = enumerate_group(&gs(qi(0), qi(0), true), &lv, DEFAULT_BUDGET).unwrap();
        assert_eq!(set.len(), 64);
        assert_eq!(
            set,
            enumerate_by_factors(&gs(qi(0), qi(0), true), &lv, DEFAULT_BUDGET).unwrap()
        );
        for a in set.values() {
            for b in set.values() {
                assert!(set.contains_key(&coset(&a.mul(b), &lv).unwrap().0));
            }
        }
        let top = enumerate_group(&gs(qi(0), qi(2), true), &lv, DEFAULT_BUDGET).unwrap();
        assert_eq!(top.len(), 1);
        assert!(matches!(
            enumerate_group(&gs(qi(0), qi(0), true), &lv, 10),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn enumeration_matches_factor_counts() {
        for (p, n) in [(2, 4), (3, 3)] {
            let lv = Level::new(p, n).unwrap();
            for spec in [
                gs(qi(0), qi(0), true),
                gs(q(1, 2), qi(0), false),
                gs(qi(2), qi(0), true),
                gs(qi(-2), qi(0), true),
                gs(q(3, 2), qi(1), false),
                gs(qi(1), qi(0), false),
            ] {
                let set = enumerate_group(&spec, &lv, DEFAULT_BUDGET).unwrap();
                assert_eq!(set.len() as u128, expected_count(&spec, &lv), "{spec:?}");
                if spec.iwahori_form() {
                    assert_eq!(
                        set,
                        enumerate_by_factors(&spec, &lv, DEFAULT_BUDGET).unwrap(),
                        "{spec:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn convolve_examples() {
        let lv = Level::new(2, 4).unwrap();
        let k = gs(qi(0), qi(0), true);
        let kk = convolve_uniform(&k, &k, &lv, DEFAULT_BUDGET).unwrap();
        let dk = TruncatedMeasure::uniform(&enumerate_group(&k, &lv, DEFAULT_BUDGET).unwrap(), &lv);
        assert!(kk.same_weights(&dk));
        let small = gs(qi(0), qi(1), true);
        assert!(convolve_uniform(&small, &k, &lv, DEFAULT_BUDGET)
            .unwrap()
            .same_weights(&dk));
        // sigma = edge (1,2), sigma' = vertex 2, x = 0, r = 0. The edge lies in
        // the closed ball of radius 2 around x, so it is in Gamma_1 but not
        // in Gamma_2, and the two products differ at s = 2.
        let apt = a1(-4, 4);
        let edge = apt
            .index_of_vertices(&[Point(vec![qi(1)]), Point(vec![qi(2)])])
            .unwrap();
        let v2 = apt.vertex_index(&Point(vec![qi(2)])).unwrap();
        let x = Point(vec![qi(0)]);
        for (s, inside) in [(1, true), (2, false)] {
            assert_eq!(
                crate::convex_combinatorics::in_gamma(&apt, edge, v2, &x, qi(s)),
                inside
            );
            let target = gs(qi(0), qi(s), true);
            let lhs =
                convolve_uniform(&gs(q(3, 2), qi(0), true), &target, &lv, DEFAULT_BUDGET).unwrap();
            let rhs =
                convolve_uniform(&gs(qi(2), qi(0), true), &target, &lv, DEFAULT_BUDGET).unwrap();
            assert_eq!(lhs.same_weights(&rhs), inside, "s = {s}");
            assert_eq!(lhs.total_mass(), R::one());
        }
        let target = gs(qi(0), qi(2), true);
        let tight = Level::new(2, 2).unwrap();
        assert!(matches!(
            convolve_uniform(&k, &target, &tight, DEFAULT_BUDGET),
            Err(Error::Precision(_))
        ));
    }

    #[test]
    fn convolution_invariance() {
        let lv = Level::new(3, 3).unwrap();
        let (a, b) = (gs(qi(1), qi(0), true), gs(qi(0), qi(1), true));
        let mu = convolve_uniform(&a, &b, &lv, DEFAULT_BUDGET).unwrap();
        assert!(invariance_spot_check(&mu, &a, &lv, 50, 3).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let support: Vec<_> = mu.weights.values().collect();
        for _ in 0..20 {
            let (g, w) = support[rng.gen_range(0..support.len())];
            let h = random_element(&b, 3, 3, &mut rng);
            assert_eq!(mu.weight_at(&g.mul(&h), &lv).unwrap(), *w);
        }
    }

    #[test]
    fn projector_examples() {
        let apt = a1(-3, 3);
        let lv = Level::new(3, 3).unwrap();
        let target = gs(qi(0), qi(0), true);
        let sigma = SubComplex::in_int_box(&apt, 0, 1);
        let mu = apply_projector(&apt, &sigma, qi(0), &target, &lv, DEFAULT_BUDGET).unwrap();
        let dk =
            TruncatedMeasure::uniform(&enumerate_group(&target, &lv, DEFAULT_BUDGET).unwrap(), &lv);
        assert!(mu.same_weights(&dk));
        let v0 = SubComplex::in_int_box(&apt, 0, 0);
        let single = apply_projector(&apt, &v0, qi(0), &target, &lv, DEFAULT_BUDGET).unwrap();
        assert!(
            single.same_weights(&convolve_uniform(&target, &target, &lv, DEFAULT_BUDGET).unwrap())
        );
    }

    #[test]
    fn projector_stabilizes() {
        let apt = a1(-4, 4);
        let lv = Level::new(2, 4).unwrap();
        let target = gs(qi(0), qi(1), true);
        let big = SubComplex::in_int_box(&apt, -2, 2);
        let small = SubComplex::in_int_box(&apt, -1, 1);
        let a = apply_projector(&apt, &big, qi(0), &target, &lv, DEFAULT_BUDGET).unwrap();
        let b = apply_projector(&apt, &small, qi(0), &target, &lv, DEFAULT_BUDGET).unwrap();
        assert!(a.same_weights(&b));
        let reduced =
            apply_reduced_projector(&apt, &big, qi(0), qi(1), qi(0), &lv, DEFAULT_BUDGET).unwrap();
        assert!(a.same_weights(&reduced));
        assert_eq!(a.total_mass(), R::one());
        let again = apply_projector(&apt, &big, qi(0), &target, &lv, DEFAULT_BUDGET).unwrap();
        assert_eq!(a.to_json().unwrap(), again.to_json().unwrap());
    }

    #[test]
    fn projector_fixes_cell_groups() {
        let apt = a1(-4, 4);
        let lv = Level::new(2, 4).unwrap();
        let sigma = SubComplex::in_int_box(&apt, -1, 2);
        for &c in &sigma.cells {
            let target = gs(apt.barycenter(c).0[0], qi(0), true);
            let mu = apply_projector(&apt, &sigma, qi(0), &target, &lv, DEFAULT_BUDGET).unwrap();
            let d = TruncatedMeasure::uniform(
                &enumerate_group(&target, &lv, DEFAULT_BUDGET).unwrap(),
                &lv,
            );
            assert!(mu.same_weights(&d), "cell {}", apt.cell(c));
        }
    }

    #[test]
    fn measure_json_shape() {
        let lv = Level::new(2, 2).unwrap();
        let mu = convolve_uniform(
            &gs(qi(1), qi(0), true),
            &gs(qi(0), qi(0), true),
            &lv,
            DEFAULT_BUDGET,
        )
        .unwrap();
        let j = mu.to_json().unwrap();
        assert_eq!(j["entries"].as_array().unwrap().len(), mu.support_len());
        assert_eq!(j["p"], json!(2));
        assert!(j["V"].as_i64().unwrap() >= 0);
    }

    #[test]
    fn rlog_examples() {
        let p = 3;
        let x = rlog(&Mat2::upper(ri(5)), p).unwrap();
        assert_eq!(
            x,
            LieElem {
                h: R::zero(),
                b: ri(5),
                c: R::zero()
            }
        );
        assert_eq!(
            rlog(&Mat2::identity(), p).unwrap(),
            LieElem {
                h: R::zero(),
                b: R::zero(),
                c: R::zero()
            }
        );
        assert!(rlog(&Mat2::identity(), 2).is_err());
    }

    #[test]
    fn rlog_bijective_on_classes() {
        let lv = Level::new(3, 3).unwrap();
        let spec = gs(qi(0), qi(0), true);
        let set = enumerate_group(&spec, &lv, DEFAULT_BUDGET).unwrap();
        assert_eq!(set.len(), 729);
        let classes: std::collections::BTreeSet<_> = set
            .values()
            .map(|g| lie_class(&rlog(g, 3).unwrap(), &lv).unwrap())
            .collect();
        assert_eq!(classes.len(), 729);
    }

    #[test]
    fn rlog_preserves_thresholds() {
        let p = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let specs = [
            gs(qi(0), qi(0), true),
            gs(q(1, 2), q(1, 2), false),
            gs(qi(1), qi(1), true),
            gs(q(-1, 2), qi(2), false),
        ];
        for spec in specs {
            for other in specs {
                for _ in 0..30 {
                    let g = random_element(&other, p, 4, &mut rng);
                    assert_eq!(
                        member_group(&g, &spec, p),
                        lie_member(&rlog(&g, p).unwrap(), &spec, p)
                    );
                }
            }
        }
    }

    #[test]
    fn indicator_examples() {
        let apt = a1(-4, 4);
        let p = 3;
        let sigma = SubComplex::in_int_box(&apt, 0, 2);
        let groups = cell_groups(&apt, &sigma, qi(0));
        let g = Mat2::new(ri(1 + p), ri(p), ri(p), pr(1 + p * p, 1 + p)).unwrap();
        assert!(member_group(&g, &gs(qi(0), qi(0), true), p));
        assert_eq!(signed_indicator(&groups, &g, p).0, 1);
        let far = Mat2::upper(pr(1, p * p * p));
        assert_eq!(signed_indicator(&groups, &far, p), (0, false));
        let rep = indicator_euler_check(&apt, &sigma, qi(0), p, 400, 1).unwrap();
        assert!(rep.pass(), "{:?}", rep.counterexamples);
        assert!(rep.in_union > 0 && rep.in_union < rep.samples);
    }

    #[test]
    fn indicator_stabilization() {
        let apt = a1(-5, 5);
        let big = SubComplex::in_int_box(&apt, -3, 3);
        let small = SubComplex::in_int_box(&apt, -1, 1);
        let rep =
            stabilization_indicator_check(&apt, qi(0), qi(1), &big, &small, 3, 300, 2).unwrap();
        assert!(rep.pass(), "{:?}", rep.counterexamples);
        let tiny = SubComplex::in_int_box(&apt, 0, 0);
        assert!(stabilization_indicator_check(&apt, qi(0), qi(1), &big, &tiny, 3, 10, 2).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn rlog_is_equivariant(seed: u64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_element(&gs(qi(0), qi(0), true), 5, 3, &mut rng);
            let h = random_element(&gs(qi(0), qi(0), false), 5, 3, &mut rng);
            let lhs = rlog(&h.mul(&g).mul(&h.inv()), 5).unwrap();
            prop_assert_eq!(lhs, rlog(&g, 5).unwrap().conj(&h));
        }

        #[test]
        fn coset_key_right_invariant(seed: u64, tn in -4i64..5) {
            let lv = Level::new(5, 2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_element(&gs(q(tn, 2), qi(0), true), 5, 3, &mut rng);
            let k = random_k_n(&lv, &mut rng);
            prop_assert_eq!(coset(&g, &lv).unwrap().0, coset(&g.mul(&k), &lv).unwrap().0);
        }

        #[test]
        fn membership_matches_factor_thresholds(seed: u64, tn in -6i64..7, rn in 0i64..6, strict: bool) {
            let spec = gs(q(tn, 3), q(rn, 3), strict);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_element(&spec, 3, 4, &mut rng);
            prop_assert!(member_group(&g, &spec, 3));
        }
    }
}
