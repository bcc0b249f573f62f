//! Symbolic signed sums `E_r^Sigma` and the telescoping certificate for their
//! stabilization under convolution with `delta_{G_{x,(r+s)+}}`.

use crate::affine_apartment::{Apartment, Point, Polysimplex};
use crate::convex_combinatorics::{
    in_gamma_with, interval, is_convex, max_polysimplex, retraction_map, upsilon, upsilon_padding,
    wall_values, SubComplex,
};
use crate::error::{Error, Result};
use crate::rational::{fmt_q, qi, Q};
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet};

/// The Haar probability measure on `G_{cell, depth}` (or `G_{cell, depth+}` when strict).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubgroupSymbol {
    pub cell: Polysimplex,
    pub depth: Q,
    pub strict: bool,
}

impl SubgroupSymbol {
    pub fn to_json(&self) -> serde_json::Value {
        json!({"cell": self.cell.to_json(), "depth": fmt_q(&self.depth), "strict": self.strict})
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FormalSignedSum {
    pub terms: BTreeMap<SubgroupSymbol, i64>,
}

impl FormalSignedSum {
    pub fn add(&mut self, sym: SubgroupSymbol, coeff: i64) {
        let e = self.terms.entry(sym.clone()).or_insert(0);
        *e += coeff;
        if *e == 0 {
            self.terms.remove(&sym);
        }
    }

    pub fn single(sym: SubgroupSymbol) -> Self {
        let mut f = Self::default();
        f.add(sym, 1);
        f
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn count_sign(&self, positive: bool) -> usize {
        self.terms
            .values()
            .filter(|c| (**c > 0) == positive)
            .count()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.terms
                .iter()
                .map(|(s, c)| {
                    let mut v = s.to_json();
                    v["coeff"] = json!(c);
                    v
                })
                .collect(),
        )
    }
}

fn check_depth(r: Q, m: u32) -> Result<()> {
    if r < Q::from_integer(0) || !(r * qi(m as i64)).is_integer() {
        return Err(Error::DepthNotOnGrid(fmt_q(&r), m));
    }
    Ok(())
}

/// One term `(-1)^dim sigma delta_{G_{sigma, r+}}` per cell of a convex `sigma`.
pub fn formal_projector(apt: &Apartment, sigma: &SubComplex, r: Q) -> Result<FormalSignedSum> {
    check_depth(r, apt.m)?;
    if sigma.is_empty() {
        return Err(Error::NotConvex("empty complex".into()));
    }
    if !is_convex(apt, sigma) {
        return Err(Error::NotConvex(format!("{} cells", sigma.len())));
    }
    let mut out = FormalSignedSum::default();
    for &c in &sigma.cells {
        let sign = if apt.dim(c) % 2 == 0 { 1 } else { -1 };
        out.add(
            SubgroupSymbol {
                cell: apt.cell(c).clone(),
                depth: r,
                strict: true,
            },
            sign,
        );
    }
    Ok(out)
}

pub fn euler_sum<'a>(apt: &Apartment, cells: impl IntoIterator<Item = &'a usize>) -> i64 {
    cells
        .into_iter()
        .map(|&c| if apt.dim(c) % 2 == 0 { 1 } else { -1 })
        .sum()
}

/// One class of the partition of `Sigma \ Sigma'` by fibers of the retraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TelescopeClass {
    pub sigma_min: usize,
    pub sigma_max: usize,
    pub cells: BTreeSet<usize>,
    pub euler: i64,
    pub is_interval: bool,
    pub nondegenerate: bool,
}

impl TelescopeClass {
    pub fn ok(&self) -> bool {
        self.is_interval && self.nondegenerate && self.euler == 0
    }
}

#[derive(Debug, Clone, Default)]
pub struct TelescopeCertificate {
    pub classes: Vec<TelescopeClass>,
    pub counterexamples: Vec<String>,
}

impl TelescopeCertificate {
    pub fn certified(&self) -> bool {
        self.counterexamples.is_empty() && self.classes.iter().all(|c| c.ok())
    }

    pub fn to_json(&self, apt: &Apartment) -> serde_json::Value {
        json!({
            "certified": self.certified(),
            "classes": self.classes.iter().map(|c| json!({
                "sigma_prime": apt.cell(c.sigma_min).to_json(),
                "sigma_max": apt.cell(c.sigma_max).to_json(),
                "fiber": c.cells.iter().map(|&t| apt.cell(t).to_json()).collect::<Vec<_>>(),
                "euler": c.euler,
                "is_interval": c.is_interval,
                "nondegenerate": c.nondegenerate,
            })).collect::<Vec<_>>(),
            "counterexamples": self.counterexamples,
        })
    }
}

/// Checks the hypotheses shared by the telescoping and the reduction:
/// `x` in `Sigma'`, `Sigma'` inside `Sigma`, both convex, and `Upsilon_{x,s}`
/// inside `Sigma'`. The window must contain the padded box around `x` so that
/// `Upsilon_{x,s}` is computed completely.
pub fn check_stab_preconditions(
    apt: &Apartment,
    x: &Point,
    s: Q,
    inner: &SubComplex,
    outer: &SubComplex,
) -> Result<()> {
    let xi = apt.vertex_index(x)?;
    if !inner.contains(xi) {
        return Err(Error::Precondition("x is not in the inner complex".into()));
    }
    if !inner.is_subset(outer) {
        return Err(Error::Precondition(
            "inner complex is not contained in the outer one".into(),
        ));
    }
    if !is_convex(apt, inner) {
        return Err(Error::Precondition("inner complex is not convex".into()));
    }
    if !is_convex(apt, outer) {
        return Err(Error::Precondition("outer complex is not convex".into()));
    }
    if let Some(&c) = outer.cells.iter().find(|&&c| !apt.star_complete(c)) {
        return Err(Error::Precondition(format!(
            "outer complex reaches the window boundary at {}",
            apt.cell(c)
        )));
    }
    let pad = upsilon_padding(&apt.spec, s)?;
    let fits =
        x.0.iter()
            .zip(&apt.window.bounds)
            .all(|(c, (lo, hi))| *lo <= c - pad && c + pad <= *hi);
    if !fits {
        return Err(Error::Precondition(
            "window too small to resolve Upsilon_{x,s}".into(),
        ));
    }
    let ups = upsilon(apt, x, s)?;
    if !ups.iter().all(|c| inner.contains(*c)) {
        return Err(Error::Precondition(
            "Upsilon_{x,s} is not contained in the inner complex".into(),
        ));
    }
    Ok(())
}

pub fn telescope_partition(
    apt: &Apartment,
    x: &Point,
    s: Q,
    inner: &SubComplex,
    outer: &SubComplex,
) -> Result<TelescopeCertificate> {
    check_stab_preconditions(apt, x, s, inner, outer)?;
    let diff = SubComplex::new(outer.cells.difference(&inner.cells).copied());
    let map = retraction_map(apt, x, s, &diff)?;
    let mut groups: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (t, sp) in map {
        groups.entry(sp).or_default().insert(t);
    }
    let mut cert = TelescopeCertificate::default();
    for (sp, cells) in groups {
        let top = match max_polysimplex(apt, x, s, sp) {
            Ok(t) => t,
            Err(e) => {
                cert.counterexamples
                    .push(format!("no maximal element over {}: {e}", apt.cell(sp)));
                continue;
            }
        };
        let iv: BTreeSet<usize> = interval(apt, sp, top)?.into_iter().collect();
        let class = TelescopeClass {
            sigma_min: sp,
            sigma_max: top,
            euler: euler_sum(apt, &cells),
            is_interval: iv == cells,
            nondegenerate: top != sp,
            cells,
        };
        if !class.ok() {
            cert.counterexamples.push(format!(
                "class over {}: interval={} nondegenerate={} euler={}",
                apt.cell(sp),
                class.is_interval,
                class.nondegenerate,
                class.euler
            ));
        }
        cert.classes.push(class);
    }
    Ok(cert)
}

/// Replaces every symbol `(tau, r, strict)` by `(m_{x,s}(tau), r, strict)`,
/// after checking the root-wise inclusion criterion for each replacement:
/// every wall positive on `tau` is positive on its image or exceeds `s` at `x`.
pub fn reduce_against(
    apt: &Apartment,
    e: &FormalSignedSum,
    x: &Point,
    s: Q,
) -> Result<FormalSignedSum> {
    let xv = wall_values(apt, x);
    let mut out = FormalSignedSum::default();
    for (sym, &coeff) in &e.terms {
        let tau = apt.index_of(&sym.cell)?;
        let image = crate::convex_combinatorics::min_face(apt, x, s, tau)?;
        if !in_gamma_with(apt, tau, image, &xv, s) {
            return Err(Error::Precondition(format!(
                "{} not in Gamma_s of its image",
                sym.cell
            )));
        }
        let (a, b) = (apt.sign_vector(tau), apt.sign_vector(image));
        for l in 0..xv.len() {
            for o in [1i8, -1] {
                let psi_x = if o > 0 { xv[l] } else { -xv[l] };
                if o * a[l] > 0 && !(o * b[l] > 0 || psi_x > s) {
                    return Err(Error::Precondition(format!(
                        "root-wise criterion fails for {} at wall {}",
                        sym.cell,
                        apt.lines()[l]
                    )));
                }
            }
        }
        out.add(
            SubgroupSymbol {
                cell: apt.cell(image).clone(),
                ..sym.clone()
            },
            coeff,
        );
    }
    Ok(out)
}

/// Full symbolic stabilization check for one admissible tuple.
#[derive(Debug, Clone)]
pub struct StabReport {
    pub certificate: TelescopeCertificate,
    pub reduced_outer: FormalSignedSum,
    pub reduced_inner: FormalSignedSum,
    pub euler_outer: i64,
    pub euler_inner: i64,
}

impl StabReport {
    pub fn pass(&self) -> bool {
        self.certificate.certified()
            && self.reduced_outer == self.reduced_inner
            && self.euler_outer == self.euler_inner
    }

    pub fn to_json(&self, apt: &Apartment) -> serde_json::Value {
        json!({
            "pass": self.pass(),
            "partition": self.certificate.to_json(apt),
            "euler": {"outer": self.euler_outer, "inner": self.euler_inner},
            "reduced": {"outer": self.reduced_outer.to_json(), "inner": self.reduced_inner.to_json()},
        })
    }
}

pub fn verify_stab(
    apt: &Apartment,
    x: &Point,
    r: Q,
    s: Q,
    inner: &SubComplex,
    outer: &SubComplex,
) -> Result<StabReport> {
    let certificate = telescope_partition(apt, x, s, inner, outer)?;
    let reduced_outer = reduce_against(apt, &formal_projector(apt, outer, r)?, x, s)?;
    let reduced_inner = reduce_against(apt, &formal_projector(apt, inner, r)?, x, s)?;
    Ok(StabReport {
        certificate,
        reduced_outer,
        reduced_inner,
        euler_outer: euler_sum(apt, &outer.cells),
        euler_inner: euler_sum(apt, &inner.cells),
    })
}
