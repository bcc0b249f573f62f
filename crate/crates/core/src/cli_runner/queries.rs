//! Single-instance verbs that print data rather than verdicts. Their inputs
//! come from the `query` object of the config.

use super::RunConfig;
use crate::affine_apartment::{Apartment, ApartmentConfig, Point};
use crate::convex_combinatorics::{
    fiber, gamma, interval, max_polysimplex, min_face, upsilon, SubComplex,
};
use crate::error::{Error, Result};
use crate::moy_prasad_lattices::{
    dual_spec, jump_radii, lattice_spec, region, RegionKind, Val, ValuationVector,
};
use crate::projector_stabilizer::{check_stab_preconditions, verify_stab};
use crate::rational::{fmt_q, q_from_json, Q};
use crate::sl2_padic_engine::{convolve_uniform, GroupSpec, Level};
use serde_json::{json, Value};

fn query(cfg: &RunConfig) -> Result<&Value> {
    cfg.query
        .as_ref()
        .ok_or_else(|| Error::Config("key `query`: this verb needs a query object".into()))
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key)
        .ok_or_else(|| Error::Config(format!("key `query.{key}` is missing")))
}

fn rational(v: &Value, key: &str) -> Result<Q> {
    q_from_json(field(v, key)?).map_err(|e| Error::Config(format!("key `query.{key}`: {e}")))
}

fn point(v: &Value) -> Result<Point> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Config("a point must be an array of coordinates".into()))?;
    Ok(Point(arr.iter().map(q_from_json).collect::<Result<_>>()?))
}

/// The apartment described by `query.apartment`, or the first configured
/// system and refinement on the config window.
fn apartment(cfg: &RunConfig) -> Result<Apartment> {
    if let Some(a) = cfg.query.as_ref().and_then(|q| q.get("apartment")) {
        let ac: ApartmentConfig = serde_json::from_value(a.clone())
            .map_err(|e| Error::Config(format!("key `query.apartment`: {e}")))?;
        return ac.build();
    }
    let system = cfg
        .systems
        .first()
        .ok_or_else(|| Error::Config("key `systems` is empty".into()))?;
    let m = *cfg
        .m
        .first()
        .ok_or_else(|| Error::Config("key `m` is empty".into()))?;
    let spec = crate::affine_apartment::RootSystemSpec::from_name(system, cfg.delta)?;
    let w = crate::affine_apartment::Window::ints(spec.rank, cfg.window[0], cfg.window[1])?;
    Apartment::build(spec, m, w)
}

/// A cell given by its vertex list.
fn cell(apt: &Apartment, v: &Value) -> Result<usize> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Config("a cell must be an array of vertices".into()))?;
    let vs = arr.iter().map(point).collect::<Result<Vec<_>>>()?;
    apt.index_of_vertices(&vs)
}

/// A box `[[lo, hi], ...]` as a subcomplex.
fn boxed(apt: &Apartment, v: &Value) -> Result<SubComplex> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Config("a box must be an array of [lo, hi] pairs".into()))?;
    let bounds = arr
        .iter()
        .map(|pair| match pair.as_array().map(|p| p.as_slice()) {
            Some([a, b]) => Ok((q_from_json(a)?, q_from_json(b)?)),
            _ => Err(Error::Config("a box side must be [lo, hi]".into())),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SubComplex::in_box(apt, &bounds))
}

fn cells_json(apt: &Apartment, cells: impl IntoIterator<Item = usize>) -> Value {
    Value::Array(cells.into_iter().map(|c| apt.cell(c).to_json()).collect())
}

/// Cell inventory; with `query.x`, `query.s` and `query.cell` also the
/// retraction data `{sigma_prime, sigma_max, fiber}` plus `gamma` and `upsilon`.
pub fn apartment_query(cfg: &RunConfig) -> Result<Value> {
    let apt = apartment(cfg)?;
    let Some(q) = cfg.query.as_ref().filter(|q| q.get("cell").is_some()) else {
        return Ok(json!({"cells": apt.to_json(), "count": apt.len()}));
    };
    let x = point(field(q, "x")?)?;
    let s = rational(q, "s")?;
    let sigma = cell(&apt, field(q, "cell")?)?;
    let sp = min_face(&apt, &x, s, sigma)?;
    let smax = max_polysimplex(&apt, &x, s, sp)?;
    let all = SubComplex::new(0..apt.len());
    Ok(json!({
        "sigma": apt.cell(sigma).to_json(),
        "sigma_prime": apt.cell(sp).to_json(),
        "sigma_max": apt.cell(smax).to_json(),
        "fiber": cells_json(&apt, fiber(&apt, &x, s, sp, &all)?),
        "interval": cells_json(&apt, interval(&apt, sp, smax)?),
        "gamma": cells_json(&apt, gamma(&apt, sp, &x, s)?.cells),
        "upsilon": cells_json(&apt, upsilon(&apt, &x, s)?),
    }))
}

/// Stabilization certificate for `query = {x, s, r, inner, outer}` where the
/// complexes are boxes. Returns the certificate and whether it passed.
pub fn stab_certificate(cfg: &RunConfig) -> Result<(bool, Value)> {
    let apt = apartment(cfg)?;
    let q = query(cfg)?;
    let x = point(field(q, "x")?)?;
    let s = rational(q, "s")?;
    let r = rational(q, "r")?;
    let inner = boxed(&apt, field(q, "inner")?)?;
    let outer = boxed(&apt, field(q, "outer")?)?;
    let pre = check_stab_preconditions(&apt, &x, s, &inner, &outer);
    let mut out = json!({"preconditions": pre.as_ref().map(|_| "ok".to_string()).unwrap_or_else(|e| e.to_string())});
    if pre.is_err() {
        return Ok((false, out));
    }
    let rep = verify_stab(&apt, &x, r, s, &inner, &outer)?;
    out["certificate"] = rep.to_json(&apt);
    out["pass"] = json!(rep.pass());
    Ok((rep.pass(), out))
}

fn val(v: &Value) -> Result<Val> {
    match v {
        Value::String(s) if s == "inf" => Ok(Val::Inf),
        Value::Number(n) => n
            .as_i64()
            .map(Val::Fin)
            .ok_or_else(|| Error::Config(format!("bad valuation {n}"))),
        other => Err(Error::Config(format!("bad valuation {other}"))),
    }
}

/// `mp spec`, `mp region` and `mp jumps`.
pub fn mp_query(cfg: &RunConfig, what: &str) -> Result<Value> {
    let q = query(cfg)?;
    let apt = apartment(cfg)?;
    match what {
        "spec" => {
            let x = point(field(q, "x")?)?;
            let r = rational(q, "r")?;
            let strict = q.get("strict").and_then(Value::as_bool).unwrap_or(false);
            Ok(json!({
                "lattice": lattice_spec(&apt.spec, &x, r, strict)?.to_json(),
                "dual": dual_spec(&apt.spec, &x, r)?.to_json(),
            }))
        }
        "region" => {
            let r = rational(q, "r")?;
            let v = field(q, "valuations")?;
            let roots = field(v, "roots")?
                .as_array()
                .ok_or_else(|| Error::Config("key `query.valuations.roots`".into()))?;
            let vv = ValuationVector {
                torus: val(field(v, "torus")?)?,
                roots: roots.iter().map(val).collect::<Result<_>>()?,
            };
            let kind = match q.get("kind").and_then(Value::as_str).unwrap_or("lattice") {
                "lattice" => RegionKind::Lattice,
                "dual" => RegionKind::Dual,
                other => {
                    return Err(Error::Config(format!(
                        "key `query.kind`: unknown kind `{other}`"
                    )))
                }
            };
            let reg = region(&apt, &vv, r, kind)?;
            Ok(json!({"cells": cells_json(&apt, reg.cells.iter().copied()), "count": reg.len()}))
        }
        "jumps" => {
            let x = point(field(q, "x")?)?;
            Ok(json!({"jumps": jump_radii(&apt.spec, &x)?.iter().map(fmt_q).collect::<Vec<_>>()}))
        }
        other => Err(Error::Config(format!("unknown mp query `{other}`"))),
    }
}

fn group(v: &Value) -> Result<GroupSpec> {
    let strict = v.get("strict").and_then(Value::as_bool).unwrap_or(true);
    GroupSpec::new(rational(v, "t")?, rational(v, "r")?, strict)
}

/// `delta_A * delta_B` for `query = {p, N, a: {t, r, strict}, b: {...}}`.
pub fn sl2_convolve_query(cfg: &RunConfig) -> Result<Value> {
    let q = query(cfg)?;
    let p = field(q, "p")?
        .as_i64()
        .ok_or_else(|| Error::Config("key `query.p` must be an integer".into()))?;
    let n = field(q, "N")?
        .as_u64()
        .ok_or_else(|| Error::Config("key `query.N` must be an integer".into()))?;
    let lv = Level::new(p as i128, n as u32)?;
    let mu = convolve_uniform(
        &group(field(q, "a")?)?,
        &group(field(q, "b")?)?,
        &lv,
        cfg.budget,
    )?;
    mu.to_json()
}
