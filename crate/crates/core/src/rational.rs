//! Exact rational helpers shared by every module.

use crate::error::{Error, Result};
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};

pub type Q = Ratio<i64>;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(n)
}

pub fn ceil_q(x: Q) -> i64 {
    x.ceil().to_integer()
}

pub fn floor_q(x: Q) -> i64 {
    x.floor().to_integer()
}

/// Least integer `n` with `n >= x`, or `n > x` when `strict`.
pub fn ceil_strict(x: Q, strict: bool) -> i64 {
    if strict {
        floor_q(x) + 1
    } else {
        ceil_q(x)
    }
}

/// Fractional part in `[0, 1)`.
pub fn frac(x: Q) -> Q {
    x - x.floor()
}

/// Least element of `offset + step * Z` that is `>= x` (or `> x` when strict).
pub fn round_up_progression(x: Q, offset: Q, step: Q, strict: bool) -> Q {
    let k = ceil_strict((x - offset) / step, strict);
    offset + step * qi(k)
}

pub fn sign(x: Q) -> i8 {
    if x.is_zero() {
        0
    } else if x.is_positive() {
        1
    } else {
        -1
    }
}

/// Formats as `"n"` or `"n/d"`.
pub fn fmt_q(x: &Q) -> String {
    if x.denom().is_one() {
        format!("{}", x.numer())
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::Config(format!("cannot parse rational `{s}`"));
    match s.split_once('/') {
        Some((a, b)) => {
            let n: i64 = a.trim().parse().map_err(|_| bad())?;
            let d: i64 = b.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ok(q(n, d))
        }
        None => Ok(qi(s.parse().map_err(|_| bad())?)),
    }
}

/// Solves the square system `a x = b` exactly by Gaussian elimination.
pub fn solve(mut a: Vec<Vec<Q>>, mut b: Vec<Q>) -> Result<Vec<Q>> {
    let n = a.len();
    if a.iter().any(|row| row.len() != n) || b.len() != n {
        return Err(Error::Singular);
    }
    for col in 0..n {
        let piv = (col..n)
            .find(|&r| !a[r][col].is_zero())
            .ok_or(Error::Singular)?;
        a.swap(col, piv);
        b.swap(col, piv);
        let p = a[col][col];
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col] / p;
                for c in col..n {
                    let v = a[col][c];
                    a[r][c] -= f * v;
                }
                let v = b[col];
                b[r] -= f * v;
            }
        }
    }
    Ok((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Rank of a rational matrix.
pub fn rank(mut a: Vec<Vec<Q>>) -> usize {
    let rows = a.len();
    if rows == 0 {
        return 0;
    }
    let cols = a[0].len();
    let mut r = 0;
    for c in 0..cols {
        if let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) {
            a.swap(r, p);
            for i in 0..rows {
                if i != r && !a[i][c].is_zero() {
                    let f = a[i][c] / a[r][c];
                    for k in c..cols {
                        let v = a[r][k];
                        a[i][k] -= f * v;
                    }
                }
            }
            r += 1;
            if r == rows {
                break;
            }
        }
    }
    r
}

pub fn gcd(a: i64, b: i64) -> i64 {
    a.gcd(&b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strict_ceiling() {
        assert_eq!(ceil_strict(qi(1), false), 1);
        assert_eq!(ceil_strict(qi(1), true), 2);
        assert_eq!(ceil_strict(q(-1, 2), false), 0);
        assert_eq!(ceil_strict(q(-1, 2), true), 0);
        assert_eq!(ceil_strict(q(1, 2), true), 1);
    }

    #[test]
    fn progression_rounding() {
        assert_eq!(round_up_progression(q(1, 2), qi(1), qi(2), false), qi(1));
        assert_eq!(round_up_progression(qi(1), qi(1), qi(2), true), qi(3));
        assert_eq!(round_up_progression(qi(0), qi(-1), qi(2), false), qi(1));
    }

    #[test]
    fn parse_and_format_round_trip() {
        for s in ["3", "-1/2", "7/3", "0"] {
            assert_eq!(fmt_q(&parse_q(s).unwrap()), s);
        }
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("x").is_err());
    }

    #[test]
    fn solves_small_system() {
        let a = vec![vec![qi(2), qi(1)], vec![qi(1), qi(3)]];
        let x = solve(a, vec![qi(3), qi(5)]).unwrap();
        assert_eq!(x, vec![q(4, 5), q(7, 5)]);
        assert_eq!(
            solve(
                vec![vec![qi(1), qi(2)], vec![qi(2), qi(4)]],
                vec![qi(1), qi(1)]
            ),
            Err(Error::Singular)
        );
    }

    proptest! {
        #[test]
        fn progression_rounding_is_least(n in -50i64..50, d in 1i64..12, off in -3i64..3, st in 1i64..4, strict: bool) {
            let x = q(n, d);
            let step = q(st, 2);
            let off = q(off, 4);
            let y = round_up_progression(x, off, step, strict);
            let ok = if strict { y > x } else { y >= x };
            prop_assert!(ok);
            prop_assert!(((y - off) / step).is_integer());
            let below = y - step;
            let tight = if strict { below <= x } else { below < x };
            prop_assert!(tight);
        }
    }
}

/// Reads a rational from JSON: integers, floats with exact binary value
/// that are integral, or strings of the form `"n/d"`.
pub fn q_from_json(v: &serde_json::Value) -> Result<Q> {
    match v {
        serde_json::Value::String(s) => parse_q(s),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(qi(i))
            } else {
                Err(Error::Config(format!(
                    "non-integral number {n}; write rationals as \"n/d\""
                )))
            }
        }
        other => Err(Error::Config(format!("expected rational, got {other}"))),
    }
}
