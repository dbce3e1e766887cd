//! Exact symbolic differentiation.

use super::{App, Expr, Rat};

/// Sum that drops structural zeros as it goes.
fn dadd(terms: Vec<Expr>) -> Expr {
    let kept: Vec<Expr> = terms.into_iter().filter(|t| !t.is_zero_const()).collect();
    match kept.len() {
        0 => Expr::num(0),
        1 => kept.into_iter().next().unwrap(),
        _ => Expr::Add(kept),
    }
}

/// Product that short-circuits on zero and drops unit factors.
fn dmul(factors: Vec<Expr>) -> Expr {
    if factors.iter().any(Expr::is_zero_const) {
        return Expr::num(0);
    }
    let kept: Vec<Expr> = factors.into_iter().filter(|t| !t.is_one_const()).collect();
    match kept.len() {
        0 => Expr::num(1),
        1 => kept.into_iter().next().unwrap(),
        _ => Expr::Mul(kept),
    }
}

impl Expr {
    /// Partial derivative with respect to the symbol `v`.
    ///
    /// Placeholder applications differentiate via the chain rule, bumping the
    /// derivative multi-index of the affected argument slot.
    pub fn diff(&self, v: &str) -> Expr {
        match self {
            Expr::Num(_) => Expr::num(0),
            Expr::Sym(s) => {
                if s == v {
                    Expr::num(1)
                } else {
                    Expr::num(0)
                }
            }
            Expr::Add(terms) => dadd(terms.iter().map(|t| t.diff(v)).collect()),
            Expr::Mul(factors) => {
                let mut terms = Vec::new();
                for (i, fi) in factors.iter().enumerate() {
                    let di = fi.diff(v);
                    if di.is_zero_const() {
                        continue;
                    }
                    let mut prod = vec![di];
                    for (j, fj) in factors.iter().enumerate() {
                        if j != i {
                            prod.push(fj.clone());
                        }
                    }
                    terms.push(dmul(prod));
                }
                dadd(terms)
            }
            Expr::Pow(b, e) => {
                let db = b.diff(v);
                let de = e.diff(v);
                if de.is_zero_const() {
                    if db.is_zero_const() {
                        return Expr::num(0);
                    }
                    // e * b^(e-1) * b'
                    let em1 = match e.as_ref() {
                        Expr::Num(r) => Expr::Num(r - Rat::from_integer(1)),
                        other => dadd(vec![other.clone(), Expr::num(-1)]),
                    };
                    dmul(vec![(**e).clone(), Expr::pow((**b).clone(), em1), db])
                } else {
                    // b^e * (e' ln b + e b'/b)
                    let t1 = dmul(vec![de, Expr::ln((**b).clone())]);
                    let t2 = dmul(vec![
                        (**e).clone(),
                        db,
                        Expr::pow((**b).clone(), Expr::num(-1)),
                    ]);
                    dmul(vec![self.clone(), dadd(vec![t1, t2])])
                }
            }
            Expr::Un(op, a) => {
                let da = a.diff(v);
                if da.is_zero_const() {
                    return Expr::num(0);
                }
                use super::UnOp::*;
                let outer = match op {
                    Exp => self.clone(),
                    Ln => Expr::pow((**a).clone(), Expr::num(-1)),
                    Sqrt => dmul(vec![
                        Expr::rat(1, 2),
                        Expr::pow((**a).clone(), Expr::rat(-1, 2)),
                    ]),
                    // d|u|/du = u/|u| away from u = 0
                    Abs => dmul(vec![
                        (**a).clone(),
                        Expr::pow(self.clone(), Expr::num(-1)),
                    ]),
                    Sin => Expr::cos((**a).clone()),
                    Cos => dmul(vec![Expr::num(-1), Expr::sin((**a).clone())]),
                    Atan => Expr::pow(
                        dadd(vec![Expr::num(1), Expr::powi((**a).clone(), 2)]),
                        Expr::num(-1),
                    ),
                };
                dmul(vec![outer, da])
            }
            Expr::App(app) => {
                let mut terms = Vec::new();
                for (i, arg) in app.args.iter().enumerate() {
                    let darg = arg.diff(v);
                    if darg.is_zero_const() {
                        continue;
                    }
                    let mut deriv = app.deriv.clone();
                    deriv[i] += 1;
                    let bumped = Expr::App(App {
                        name: app.name.clone(),
                        deriv,
                        args: app.args.clone(),
                    });
                    terms.push(dmul(vec![bumped, darg]));
                }
                dadd(terms)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse, parse_with_funcs, Expr, FuncDecls};

    #[test]
    fn polynomial_rules() {
        let e = parse("t^3 + 2*t*x").unwrap();
        let d = e.diff("t").normalize();
        let want = parse("3*t^2 + 2*x").unwrap().normalize();
        assert_eq!(d, want);
    }

    #[test]
    fn chain_rule_through_builtins() {
        let e = parse("exp(a*c)").unwrap();
        let d = e.diff("c").normalize();
        let want = parse("a*exp(a*c)").unwrap().normalize();
        assert_eq!(d, want);
    }

    #[test]
    fn symbolic_exponent_uses_log_rule() {
        let e = parse("c^a").unwrap();
        let d = e.diff("c").normalize();
        let want = parse("a*c^a*c^(-1)").unwrap().normalize();
        assert_eq!(d, want);
    }

    #[test]
    fn placeholder_chain_rule_tags_slots() {
        let decls = FuncDecls::new(&["G"]);
        let e = parse_with_funcs("G(t*f)", &decls).unwrap();
        let d = e.diff("f").normalize();
        let want = parse_with_funcs("t*G'(t*f)", &decls).unwrap().normalize();
        assert_eq!(d, want);
    }

    #[test]
    fn constant_symbols_vanish() {
        let e = parse("P*f + Q*c").unwrap();
        assert_eq!(e.diff("x"), Expr::num(0));
    }

    #[test]
    fn multi_arg_placeholder() {
        let decls = FuncDecls::new(&["Psi"]);
        let e = parse_with_funcs("Psi(c, t*f)", &decls).unwrap();
        let d = e.diff("t").normalize();
        let want = parse_with_funcs("f*Psi[0,1](c, t*f)", &decls)
            .unwrap()
            .normalize();
        assert_eq!(d, want);
    }
}
