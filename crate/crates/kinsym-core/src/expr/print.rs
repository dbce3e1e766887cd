//! Infix printing with minimal parentheses.
//!
//! The printer and parser are tuned so that `parse(print(e)) == e`
//! structurally for any tree the parser itself can produce (n-ary sums and
//! products stay flat, rational literals fold back to `Num`).

use super::{Expr, Rat};
use std::fmt::{self, Write as _};

const PREC_ADD: u8 = 10;
const PREC_MUL: u8 = 20;
const PREC_POW: u8 = 30;
const PREC_ATOM: u8 = 40;

fn prec(e: &Expr) -> u8 {
    match e {
        // Negative or non-integer literals need parentheses in most contexts.
        Expr::Num(r) => {
            if r.is_integer() && *r.numer() >= 0 {
                PREC_ATOM
            } else {
                5
            }
        }
        Expr::Sym(_) | Expr::Un(..) | Expr::App(_) => PREC_ATOM,
        Expr::Add(_) => PREC_ADD,
        Expr::Mul(_) => PREC_MUL,
        Expr::Pow(..) => PREC_POW,
    }
}

pub fn fmt_expr(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let mut s = String::new();
    write_prec(e, &mut s, 0)?;
    f.write_str(&s)
}

fn write_num(r: &Rat, out: &mut String) -> fmt::Result {
    if r.is_integer() {
        write!(out, "{}", r.numer())
    } else {
        write!(out, "{}/{}", r.numer(), r.denom())
    }
}

/// True for `(-1) * single` products, which print as a leading minus.
fn as_negated(e: &Expr) -> Option<&Expr> {
    if let Expr::Mul(v) = e {
        if v.len() == 2 {
            if let Expr::Num(r) = &v[0] {
                if *r == Rat::from_integer(-1) {
                    return Some(&v[1]);
                }
            }
        }
    }
    None
}

fn write_prec(e: &Expr, out: &mut String, min_prec: u8) -> fmt::Result {
    if prec(e) < min_prec {
        out.push('(');
        write_prec(e, out, 0)?;
        out.push(')');
        return Ok(());
    }
    match e {
        Expr::Num(r) => write_num(r, out),
        Expr::Sym(s) => {
            out.push_str(s);
            Ok(())
        }
        Expr::Add(terms) => {
            for (i, t) in terms.iter().enumerate() {
                if i == 0 {
                    write_prec(t, out, PREC_ADD + 1)?;
                } else if let Some(inner) = as_negated(t) {
                    out.push_str(" - ");
                    write_prec(inner, out, PREC_MUL + 1)?;
                } else {
                    out.push_str(" + ");
                    write_prec(t, out, PREC_ADD + 1)?;
                }
            }
            Ok(())
        }
        Expr::Mul(factors) => {
            for (i, fac) in factors.iter().enumerate() {
                if i > 0 {
                    out.push('*');
                }
                write_prec(fac, out, PREC_MUL + 1)?;
            }
            Ok(())
        }
        Expr::Pow(b, ex) => {
            write_prec(b, out, PREC_POW + 1)?;
            out.push('^');
            write_prec(ex, out, PREC_ATOM)?;
            Ok(())
        }
        Expr::Un(op, a) => {
            out.push_str(op.name());
            out.push('(');
            write_prec(a, out, 0)?;
            out.push(')');
            Ok(())
        }
        Expr::App(a) => {
            out.push_str(&a.name);
            let any_deriv = a.deriv.iter().any(|d| *d > 0);
            if any_deriv {
                if a.args.len() == 1 {
                    for _ in 0..a.deriv[0] {
                        out.push('\'');
                    }
                } else {
                    out.push('[');
                    for (i, d) in a.deriv.iter().enumerate() {
                        if i > 0 {
                            out.push(',');
                        }
                        write!(out, "{d}")?;
                    }
                    out.push(']');
                }
            }
            out.push('(');
            for (i, arg) in a.args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_prec(arg, out, 0)?;
            }
            out.push(')');
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse, parse_with_funcs, FuncDecls};

    fn round_trip(src: &str) {
        let decls = FuncDecls::new(&["G", "Psi", "Phi"]);
        let e = parse_with_funcs(src, &decls).unwrap();
        let printed = e.to_string();
        let back = parse_with_funcs(&printed, &decls)
            .unwrap_or_else(|err| panic!("printed `{printed}` failed to parse: {err}"));
        assert_eq!(back, e, "{src} -> {printed}");
    }

    #[test]
    fn print_parse_round_trips() {
        for src in [
            "t + x*c - f",
            "P*f^(-1) + Q",
            "-x^2",
            "(c^2 + n)^(3/2)",
            "c^a",
            "3/2*t",
            "x*(3/2)",
            "exp(a*c) - ln(abs(f))",
            "G''(t*f) + Psi[1,0](c, f)",
            "(t + x)*(t - x)",
            "2 - 3*t",
            "atan(t/k)",
            "1 - (t - a*c)^2/(t^2 - 2*a*x)",
        ] {
            round_trip(src);
        }
    }

    #[test]
    fn negated_terms_print_with_minus() {
        let e = parse("t - x").unwrap();
        assert_eq!(e.to_string(), "t - x");
    }
}
