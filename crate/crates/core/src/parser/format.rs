use std::fmt::{self, Write};

use super::{infix_prec, Clause, Literal};
use crate::term::Term;

/// Canonical text for a term. Re-parsing the output of a ground term yields
/// an equal term.
pub fn format_term(t: &Term) -> String {
    let mut s = String::new();
    write_term(&mut s, t, 1200);
    s
}

pub fn format_literal(l: &Literal) -> String {
    match l {
        Literal::Cut => "!".to_string(),
        other => {
            let mut s = String::new();
            write_term(&mut s, &other.to_goal(), 999);
            s
        }
    }
}

pub fn format_clause(c: &Clause) -> String {
    let mut s = String::new();
    write_term(&mut s, &c.head, 1199);
    if !c.body.is_empty() {
        s.push_str(" :- ");
        let lits: Vec<String> = c.body.iter().map(format_literal).collect();
        s.push_str(&lits.join(", "));
    }
    s.push('.');
    s
}

fn is_plain_name(a: &str) -> bool {
    let segs: Vec<&str> = a.split('.').collect();
    let well_formed = segs.iter().all(|seg| {
        let mut chars = seg.chars();
        matches!(chars.next(), Some(c) if c.is_alphabetic())
            && chars.all(|c| c.is_alphanumeric() || c == '_')
    });
    // An upper-case first letter lexes as a variable unless the name is dotted.
    let first_lower = a.chars().next().is_some_and(char::is_lowercase);
    well_formed && (first_lower || segs.len() > 1)
}

/// Atom text, quoted when it would not re-lex as the same atom.
pub fn quote_atom(a: &str) -> String {
    if is_plain_name(a) || a == "!" || a == ";" {
        return a.to_string();
    }
    quoted(a)
}

fn quoted(a: &str) -> String {
    let mut s = String::from("'");
    for c in a.chars() {
        match c {
            '\'' => s.push_str("\\'"),
            '\\' => s.push_str("\\\\"),
            '\n' => s.push_str("\\n"),
            '\t' => s.push_str("\\t"),
            c => s.push(c),
        }
    }
    s.push('\'');
    s
}

fn write_str_lit(out: &mut String, text: &str) {
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn write_float(out: &mut String, f: f64) {
    if f.is_finite() {
        let text = format!("{f:?}");
        out.push_str(&text);
    } else if f.is_nan() {
        out.push_str("nan");
    } else if f > 0.0 {
        out.push_str("inf");
    } else {
        out.push_str("'-inf'");
    }
}

fn write_term(out: &mut String, t: &Term, max: u32) {
    match t {
        Term::Var(v) => {
            let _ = write!(out, "{v}");
        }
        Term::Atom(a) => out.push_str(&quote_atom(a)),
        Term::Int(i) => {
            if *i < 0 && max < 1200 {
                let _ = write!(out, "({i})");
            } else {
                let _ = write!(out, "{i}");
            }
        }
        Term::Float(f) => {
            if *f < 0.0 && max < 1200 {
                out.push('(');
                write_float(out, *f);
                out.push(')');
            } else {
                write_float(out, *f);
            }
        }
        Term::Str(s) => write_str_lit(out, s),
        Term::Time(tp) => write_term(out, &tp.to_compound(), max),
        Term::Nil => out.push_str("[]"),
        Term::Cons(_) => {
            let (items, tail) = t.list_parts().unwrap_or((Vec::new(), Term::Nil));
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_arg(out, item);
            }
            if !matches!(tail, Term::Nil) {
                out.push('|');
                write_arg(out, &tail);
            }
            out.push(']');
        }
        Term::Compound(c) => {
            if c.args.len() == 2 {
                if let Some((prec, lmax, rmax)) = infix_prec(&c.functor) {
                    let paren = prec > max;
                    if paren {
                        out.push('(');
                    }
                    write_term(out, &c.args[0], lmax);
                    match &*c.functor {
                        "," => out.push_str(", "),
                        op => {
                            out.push(' ');
                            out.push_str(op);
                            out.push(' ');
                        }
                    }
                    write_term(out, &c.args[1], rmax);
                    if paren {
                        out.push(')');
                    }
                    return;
                }
            }
            // `!` and `;` stand bare only as atoms, not as functors.
            if is_plain_name(&c.functor) {
                out.push_str(&c.functor);
            } else {
                out.push_str(&quoted(&c.functor));
            }
            out.push('(');
            for (i, a) in c.args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_arg(out, a);
            }
            out.push(')');
        }
    }
}

fn write_arg(out: &mut String, t: &Term) {
    // Negative numbers need no parentheses as plain arguments.
    match t {
        Term::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Term::Float(f) => write_float(out, *f),
        _ => write_term(out, t, 999),
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_term(self))
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_literal(self))
    }
}
