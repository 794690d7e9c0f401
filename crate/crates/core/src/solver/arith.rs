//! Arithmetic over integers, floats, time points and durations.

use std::cmp::Ordering;

use super::{SolveError, Solver};
use crate::term::{Term, TimePoint};

fn type_err(builtin: &str, expected: &str, got: &Term) -> SolveError {
    SolveError::BuiltinType { builtin: builtin.into(), expected: expected.into(), got: got.clone() }
}

/// Milliseconds denoted by a duration literal such as `10S`, `5M`, `2H`,
/// `1D` or `250ms`.
pub fn duration_atom_ms(text: &str) -> Option<i64> {
    let split = text.find(|c: char| !c.is_ascii_digit())?;
    let (num, unit) = text.split_at(split);
    let n: i64 = num.parse().ok()?;
    let factor = match unit {
        "ms" | "MS" => 1,
        "S" | "s" | "sec" => 1_000,
        "M" | "min" => 60_000,
        "H" | "h" => 3_600_000,
        "D" | "d" => 86_400_000,
        _ => return None,
    };
    Some(n * factor)
}

/// Milliseconds of `timespan(D,H,M,S)` or a duration atom or integer.
pub fn duration_ms(t: &Term) -> Option<i64> {
    match t {
        Term::Int(i) => Some(*i),
        Term::Atom(a) | Term::Str(a) => duration_atom_ms(a),
        _ if t.is_functor("timespan", 4) => {
            let v: Option<Vec<i64>> = t.args().iter().map(Term::as_int).collect();
            let v = v?;
            Some(((v[0] * 24 + v[1]) * 60 + v[2]) * 60_000 + v[3] * 1000)
        }
        _ => None,
    }
}

#[derive(Clone, Copy, Debug)]
enum Num {
    I(i64),
    F(f64),
    T(i64),
}

fn to_term(n: Num) -> Term {
    match n {
        Num::I(i) => Term::Int(i),
        Num::F(f) => Term::Float(f),
        Num::T(ms) => Term::Time(TimePoint::from_millis(ms)),
    }
}

fn as_f(n: Num) -> f64 {
    match n {
        Num::I(i) | Num::T(i) => i as f64,
        Num::F(f) => f,
    }
}

fn eval_num(s: &Solver<'_>, t: &Term) -> Result<Num, SolveError> {
    let t = s.deref(t);
    match &t {
        Term::Int(i) => Ok(Num::I(*i)),
        Term::Float(f) => Ok(Num::F(*f)),
        Term::Time(tp) => Ok(Num::T(tp.millis())),
        Term::Var(_) => Err(SolveError::Instantiation(t.clone())),
        Term::Atom(a) => duration_atom_ms(a).map(Num::I).ok_or_else(|| type_err("is/2", "number", &t)),
        Term::Compound(_) => {
            if let Some(tp) = TimePoint::from_term(&s.resolve(&t)) {
                return Ok(Num::T(tp.millis()));
            }
            if t.is_functor("timespan", 4) {
                let r = s.resolve(&t);
                return duration_ms(&r).map(Num::I).ok_or_else(|| type_err("is/2", "timespan", &r));
            }
            let (name, arity) = t.functor().expect("compound");
            let args = t.args();
            if arity == 1 {
                let x = eval_num(s, &args[0])?;
                return match name {
                    "-" => Ok(match x {
                        Num::I(i) => Num::I(-i),
                        Num::F(f) => Num::F(-f),
                        Num::T(_) => return Err(type_err("is/2", "number", &t)),
                    }),
                    "+" => Ok(x),
                    "abs" => Ok(match x {
                        Num::I(i) => Num::I(i.abs()),
                        Num::F(f) => Num::F(f.abs()),
                        other => other,
                    }),
                    _ => Err(type_err("is/2", "evaluable", &t)),
                };
            }
            if arity != 2 {
                return Err(type_err("is/2", "evaluable", &t));
            }
            let a = eval_num(s, &args[0])?;
            let b = eval_num(s, &args[1])?;
            binary(name, a, b).ok_or_else(|| type_err("is/2", "evaluable", &t))
        }
        _ => Err(type_err("is/2", "number", &t)),
    }
}

fn binary(op: &str, a: Num, b: Num) -> Option<Num> {
    use Num::*;
    Some(match (op, a, b) {
        ("+", T(t), I(d)) | ("+", I(d), T(t)) => T(t + d),
        ("-", T(t), I(d)) => T(t - d),
        ("-", T(x), T(y)) => I(x - y),
        (_, T(_), _) | (_, _, T(_)) => return None,
        ("+", I(x), I(y)) => I(x.checked_add(y)?),
        ("-", I(x), I(y)) => I(x.checked_sub(y)?),
        ("*", I(x), I(y)) => I(x.checked_mul(y)?),
        ("/", I(x), I(y)) => {
            if y == 0 {
                return None;
            }
            if x % y == 0 {
                I(x / y)
            } else {
                F(x as f64 / y as f64)
            }
        }
        ("//", I(x), I(y)) if y != 0 => I(x.div_euclid(y)),
        ("mod", I(x), I(y)) if y != 0 => I(x.rem_euclid(y)),
        ("min", I(x), I(y)) => I(x.min(y)),
        ("max", I(x), I(y)) => I(x.max(y)),
        ("+", x, y) => F(as_f(x) + as_f(y)),
        ("-", x, y) => F(as_f(x) - as_f(y)),
        ("*", x, y) => F(as_f(x) * as_f(y)),
        ("/", x, y) => F(as_f(x) / as_f(y)),
        ("min", x, y) => F(as_f(x).min(as_f(y))),
        ("max", x, y) => F(as_f(x).max(as_f(y))),
        _ => return None,
    })
}

pub(crate) fn eval(s: &Solver<'_>, t: &Term) -> Result<Term, SolveError> {
    eval_num(s, t).map(to_term)
}

/// Order two evaluable terms (numbers, time points, durations).
pub(crate) fn compare(s: &Solver<'_>, a: &Term, b: &Term) -> Result<Ordering, SolveError> {
    let x = as_f(eval_num(s, a)?);
    let y = as_f(eval_num(s, b)?);
    x.partial_cmp(&y).ok_or_else(|| type_err("compare/2", "comparable numbers", a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn durations() {
        assert_eq!(duration_atom_ms("10S"), Some(10_000));
        assert_eq!(duration_atom_ms("1D"), Some(86_400_000));
        assert_eq!(duration_atom_ms("S"), None);
        let ts = Term::compound("timespan", vec![Term::int(0), Term::int(0), Term::int(1), Term::int(10)]);
        assert_eq!(duration_ms(&ts), Some(70_000));
    }
}
