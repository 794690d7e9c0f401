//! The standard builtin table.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::OnceLock;

use super::arith::{self, duration_ms};
use super::{SolveError, Solver};
use crate::kb::{is_locator, normalize_oid, resolve_import, AddPolicy, IcKind};
use crate::parser::format_term;
use crate::term::{Term, TimePoint};

pub(crate) type Builtin = fn(&mut Solver<'_>, &[Term]) -> Result<bool, SolveError>;

fn table() -> &'static HashMap<(&'static str, usize), Builtin> {
    static TABLE: OnceLock<HashMap<(&'static str, usize), Builtin>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut m: HashMap<(&'static str, usize), Builtin> = HashMap::new();
        let entries: &[(&'static str, usize, Builtin)] = &[
            ("=", 2, b_unify),
            ("\\=", 2, b_not_unify),
            ("==", 2, b_identical),
            ("\\==", 2, b_not_identical),
            ("is", 2, b_is),
            ("<", 2, b_lt),
            (">", 2, b_gt),
            ("<=", 2, b_le),
            ("=<", 2, b_le),
            (">=", 2, b_ge),
            ("=:=", 2, b_num_eq),
            ("=\\=", 2, b_num_ne),
            ("sysTime", 1, b_systime),
            ("time", 1, b_systime),
            ("interval", 2, b_interval),
            ("println", 1, b_println),
            ("print", 1, b_println),
            ("add", 1, b_add1),
            ("add", 2, b_add2),
            ("add", 3, b_add3),
            ("remove", 1, b_remove),
            ("update", 2, b_update),
            ("update", 3, b_update),
            ("commit", 0, b_commit),
            ("$check_integrity", 0, b_check_integrity),
            ("$progress", 1, b_progress),
            ("consume", 1, b_consume),
            ("consume", 2, b_consume),
            ("derive", 1, b_derive),
            ("member", 2, b_member),
            ("length", 2, b_length),
            ("dbopen", 2, b_dbopen),
            ("sql_select", 3, b_sql_select),
            ("sql_select", 4, b_sql_select),
            ("on_exception", 2, b_on_exception),
            ("ground", 1, b_ground),
            ("var", 1, b_var),
        ];
        for (n, a, f) in entries {
            m.insert((*n, *a), *f);
        }
        for (n, a, f) in crate::ec::builtins() {
            m.insert((n, a), f);
        }
        for (n, a, f) in crate::messaging::builtins() {
            m.insert((n, a), f);
        }
        m
    })
}

pub(crate) fn lookup(name: &str, arity: usize) -> Option<Builtin> {
    if let Some(f) = table().get(&(name, arity)) {
        return Some(*f);
    }
    crate::messaging::variadic_builtin(name, arity)
}

/// Names and arities of the standard builtins plus control constructs.
pub fn builtin_names() -> Vec<(String, usize)> {
    let mut v: Vec<(String, usize)> = table().keys().map(|(n, a)| (n.to_string(), *a)).collect();
    for (n, a) in [
        ("true", 0),
        ("fail", 0),
        ("!", 0),
        (",", 2),
        (";", 2),
        ("call", 1),
        ("not", 1),
        ("first", 1),
        ("once", 1),
        ("transaction", 1),
        ("rollback", 0),
        ("findall", 3),
    ] {
        v.push((n.to_string(), a));
    }
    v.sort();
    v
}

pub(crate) fn type_error(builtin: &str, expected: &str, got: Term) -> SolveError {
    SolveError::BuiltinType { builtin: builtin.into(), expected: expected.into(), got }
}

/// Text of an atom, string or other term (formatted).
pub(crate) fn text_of(t: &Term) -> String {
    match t {
        Term::Atom(a) | Term::Str(a) => a.to_string(),
        other => format_term(other),
    }
}

fn b_unify(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    Ok(s.unify(&a[0], &a[1]))
}

fn b_not_unify(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    Ok(!s.unifiable(&a[0], &a[1]))
}

fn b_identical(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    Ok(s.resolve(&a[0]) == s.resolve(&a[1]))
}

fn b_not_identical(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    Ok(s.resolve(&a[0]) != s.resolve(&a[1]))
}

fn b_is(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let v = arith::eval(s, &a[1])?;
    Ok(s.unify(&a[0], &v))
}

/// Two-element lists compare pointwise as intervals.
fn interval_pair(s: &Solver<'_>, a: &Term, b: &Term) -> Option<(Term, Term, Term, Term)> {
    let x = s.resolve(a).as_list()?;
    let y = s.resolve(b).as_list()?;
    if x.len() == 2 && y.len() == 2 {
        Some((x[0].clone(), x[1].clone(), y[0].clone(), y[1].clone()))
    } else {
        None
    }
}

fn compare_with(
    s: &mut Solver<'_>,
    a: &[Term],
    ok: fn(Ordering) -> bool,
) -> Result<bool, SolveError> {
    if let Some((a1, a2, b1, b2)) = interval_pair(s, &a[0], &a[1]) {
        return Ok(ok(arith::compare(s, &a1, &b1)?) && ok(arith::compare(s, &a2, &b2)?));
    }
    Ok(ok(arith::compare(s, &a[0], &a[1])?))
}

fn b_lt(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    compare_with(s, a, |o| o == Ordering::Less)
}

fn b_gt(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    compare_with(s, a, |o| o == Ordering::Greater)
}

fn b_le(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    compare_with(s, a, |o| o != Ordering::Greater)
}

fn b_ge(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    compare_with(s, a, |o| o != Ordering::Less)
}

fn b_num_eq(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    Ok(arith::compare(s, &a[0], &a[1])? == Ordering::Equal)
}

fn b_num_ne(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    Ok(arith::compare(s, &a[0], &a[1])? != Ordering::Equal)
}

fn b_systime(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let now = Term::Time(s.runtime().now());
    Ok(s.unify(&a[0], &now))
}

/// `interval(Span, T)`: succeeds when at least `Span` has elapsed since this
/// call site last succeeded under the same activation. The first call succeeds.
fn b_interval(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let span_t = s.resolve(&a[0]);
    let span = duration_ms(&span_t).ok_or_else(|| type_error("interval/2", "timespan", span_t))?;
    let t = match arith::eval(s, &a[1])? {
        Term::Time(tp) => tp,
        Term::Int(ms) => TimePoint::from_millis(ms),
        other => return Err(type_error("interval/2", "time point", other)),
    };
    let (serial, lit) = s.site();
    let key = Term::compound(
        "site",
        vec![
            s.config().activation.clone().unwrap_or(Term::atom("top")),
            Term::Int(serial as i64),
            Term::Int(lit as i64),
        ],
    );
    let rt = s.runtime();
    match rt.timer_last(&key) {
        Some(last) if t.millis() - last.millis() < span => Ok(false),
        _ => {
            rt.timer_set(key, t);
            Ok(true)
        }
    }
}

fn b_println(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let t = s.resolve(&a[0]);
    let line = match t.as_list() {
        Some(items) if !items.is_empty() => items.iter().map(text_of).collect::<String>(),
        _ => text_of(&t),
    };
    s.runtime().output.write_line(line);
    Ok(true)
}

fn text_arg(s: &Solver<'_>, t: &Term, builtin: &str) -> Result<String, SolveError> {
    match s.resolve(t) {
        Term::Str(x) | Term::Atom(x) => Ok(x.to_string()),
        v @ Term::Var(_) => Err(SolveError::Instantiation(v)),
        other if other.is_callable() => Ok(format!("{}.", format_term(&other))),
        other => Err(type_error(builtin, "module text", other)),
    }
}

fn b_add1(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let text = text_arg(s, &a[0], "add/1")?;
    if is_locator(&text) {
        let source = resolve_import(&text)?;
        s.load_module(Term::atom(text.trim()), &source, &[], AddPolicy::Append)?;
    } else {
        let oid = s.kb().next_auto_oid();
        s.load_module(oid, &text, &[], AddPolicy::Append)?;
    }
    Ok(true)
}

fn oid_arg(s: &Solver<'_>, t: &Term) -> Result<Term, SolveError> {
    let oid = s.resolve(t);
    if oid.is_var() {
        return Err(SolveError::Instantiation(oid));
    }
    Ok(normalize_oid(&oid))
}

fn b_add2(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let oid = oid_arg(s, &a[0])?;
    let text = text_arg(s, &a[1], "add/2")?;
    s.load_module(oid, &text, &[], AddPolicy::Append)?;
    Ok(true)
}

fn b_add3(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let oid = oid_arg(s, &a[0])?;
    let text = text_arg(s, &a[1], "add/3")?;
    let args_t = s.resolve(&a[2]);
    let args = args_t.as_list().ok_or_else(|| type_error("add/3", "argument list", args_t.clone()))?;
    s.load_module(oid, &text, &args, AddPolicy::Append)?;
    Ok(true)
}

fn b_remove(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let oid = oid_arg(s, &a[0])?;
    if !s.kb().contains(&oid) {
        return Ok(false);
    }
    let m = s.kb().remove_module(&oid)?;
    s.note_update(m);
    Ok(true)
}

fn b_update(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let oid = oid_arg(s, &a[0])?;
    let text = text_arg(s, &a[1], "update")?;
    let args = match a.get(2) {
        Some(t) => {
            let r = s.resolve(t);
            r.as_list().ok_or_else(|| type_error("update/3", "argument list", r.clone()))?
        }
        None => Vec::new(),
    };
    s.load_module(oid, &text, &args, AddPolicy::Replace)?;
    Ok(true)
}

fn b_commit(s: &mut Solver<'_>, _a: &[Term]) -> Result<bool, SolveError> {
    s.kb().commit();
    Ok(true)
}

fn b_check_integrity(s: &mut Solver<'_>, _a: &[Term]) -> Result<bool, SolveError> {
    let mut ics: Vec<(IcKind, Term)> =
        s.kb().integrity_constraints().iter().map(|ic| (ic.kind, ic.goal.clone())).collect();
    let x = Term::var("K", 0);
    let g = Term::var("G", 1);
    let facts = s.find_all(
        &Term::list(vec![x.clone(), g.clone()]),
        vec![Term::compound("integrity", vec![x, g])],
        None,
    )?;
    for f in facts {
        let parts = f.as_list().unwrap_or_default();
        let kind = match parts[0].as_atom() {
            Some("must_hold") => IcKind::MustHold,
            Some("must_fail") => IcKind::MustFail,
            _ => continue,
        };
        ics.push((kind, parts[1].clone()));
    }
    for (kind, goal) in ics {
        let holds = !s.find_all(&Term::atom("true"), vec![goal], Some(1))?.is_empty();
        if holds != (kind == IcKind::MustHold) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn b_progress(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    if let Some(n) = s.deref(&a[0]).as_int() {
        s.progress = s.progress.max(n.clamp(0, 255) as u8);
    }
    Ok(true)
}

/// `consume(eis(K))`, `consume(eis(K), all|first|last)`, or `consume(Event)`
/// which deletes matching `occurs/2` facts.
fn b_consume(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let target = s.resolve(&a[0]);
    let policy = match a.get(1).map(|p| s.resolve(p)) {
        None => crate::ec::ConsumePolicy::All,
        Some(p) => match p.as_atom().and_then(crate::ec::ConsumePolicy::parse) {
            Some(policy) => policy,
            None => return Err(type_error("consume/2", "all, first or last", p)),
        },
    };
    let marker = if target.is_functor("eis", 1) {
        crate::ec::consume(s.kb(), &target, policy)
    } else {
        let pattern = target.clone();
        Some(s.kb().remove_where(|_, c| {
            c.is_fact()
                && c.head.is_functor("occurs", 2)
                && crate::term::unify(&c.head.args()[0], &pattern, &crate::term::Bindings::new()).is_some()
        }))
    };
    if let Some(m) = marker {
        s.note_update(m);
    }
    Ok(true)
}

/// `derive([P|Args])` calls `P(Args..)`.
fn b_derive(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let t = s.resolve(&a[0]);
    let goal = match t.list_parts() {
        Some((items, Term::Nil)) if !items.is_empty() => {
            let name = items[0]
                .as_text()
                .ok_or_else(|| type_error("derive/1", "predicate name", items[0].clone()))?
                .to_string();
            Term::compound(name, items[1..].to_vec())
        }
        _ if t.is_callable() => t.clone(),
        _ => return Err(type_error("derive/1", "[Predicate|Args]", t)),
    };
    s.push_goal(goal);
    Ok(true)
}

fn b_member(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let list = s.resolve(&a[1]);
    let items = list.list_parts().map(|(items, _)| items).unwrap_or_default();
    Ok(s.unify_alternatives(a[0].clone(), items))
}

fn b_length(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let list = s.resolve(&a[0]);
    match list.as_list() {
        Some(items) => Ok(s.unify(&a[1], &Term::Int(items.len() as i64))),
        None => Err(SolveError::Instantiation(list)),
    }
}

const SQL_EXCEPTION: &str = "java.sql.SQLException";

fn b_dbopen(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let name = text_of(&s.resolve(&a[0]));
    if !s.runtime().tables.has_db(&name) {
        return s.raise(Term::atom(SQL_EXCEPTION));
    }
    Ok(s.unify(&a[1], &Term::compound("db", vec![Term::atom(name)])))
}

/// `sql_select(db(Name), Table, [Col, Var, ...], [where, Col = Val, ...])`.
fn b_sql_select(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let db = s.resolve(&a[0]);
    let db_name = match db.args().first() {
        Some(n) if db.is_functor("db", 1) => text_of(n),
        _ => text_of(&db),
    };
    let table_name = text_of(&s.resolve(&a[1]));
    let Some(table) = s.runtime().tables.table(&db_name, &table_name) else {
        return s.raise(Term::atom(SQL_EXCEPTION));
    };
    let col = |name: &Term| -> Result<usize, SolveError> {
        let n = text_of(name);
        table
            .columns
            .iter()
            .position(|c| *c == n)
            .ok_or_else(|| type_error("sql_select", "known column", name.clone()))
    };
    let select = s.resolve(&a[2]).as_list().unwrap_or_default();
    let mut targets = Vec::new();
    let mut cols = Vec::new();
    for pair in select.chunks(2) {
        if pair.len() == 2 {
            cols.push(col(&pair[0])?);
            targets.push(pair[1].clone());
        }
    }
    if let Some(w) = a.get(3) {
        for cond in s.resolve(w).as_list().unwrap_or_default() {
            if cond.is_functor("=", 2) {
                cols.push(col(&cond.args()[0])?);
                targets.push(cond.args()[1].clone());
            }
        }
    }
    let values = table
        .rows
        .iter()
        .map(|row| Term::list(cols.iter().map(|&c| row[c].clone())))
        .collect();
    Ok(s.unify_alternatives(Term::list(targets), values))
}

fn b_on_exception(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    let ty = s.resolve(&a[0]);
    let handler = s.resolve(&a[1]);
    s.push_handler(ty, handler);
    Ok(true)
}

fn b_ground(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    Ok(s.resolve(&a[0]).is_ground())
}

fn b_var(s: &mut Solver<'_>, a: &[Term]) -> Result<bool, SolveError> {
    Ok(s.deref(&a[0]).is_var())
}
