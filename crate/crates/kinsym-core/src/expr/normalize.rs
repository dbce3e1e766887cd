//! Canonical form and polynomial expansion.
//!
//! `normalize` flattens nested sums/products, folds rational constants,
//! collects like terms by summing coefficients, and merges repeated bases by
//! summing exponents. `expand` additionally distributes products over sums
//! and unrolls small integer powers of sums, so that every polynomial
//! identity reduces to the literal zero.

use super::{Expr, Rat, UnOp};
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.abs().max(1)
}

fn mk_rat(n: i128, d: i128) -> Option<Rat> {
    if d == 0 {
        return None;
    }
    let g = gcd(n, d);
    let (mut n, mut d) = (n / g, d / g);
    if d < 0 {
        n = -n;
        d = -d;
    }
    if n.abs() > i64::MAX as i128 || d > i64::MAX as i128 {
        return None;
    }
    Some(Rat::new_raw(n as i64, d as i64))
}

/// Overflow-checked sum; `None` means "leave the operands unfolded".
fn rat_add(a: Rat, b: Rat) -> Option<Rat> {
    let (an, ad) = (*a.numer() as i128, *a.denom() as i128);
    let (bn, bd) = (*b.numer() as i128, *b.denom() as i128);
    mk_rat(an * bd + bn * ad, ad * bd)
}

fn rat_mul(a: Rat, b: Rat) -> Option<Rat> {
    let (an, ad) = (*a.numer() as i128, *a.denom() as i128);
    let (bn, bd) = (*b.numer() as i128, *b.denom() as i128);
    mk_rat(an * bn, ad * bd)
}

fn rat_pow(r: Rat, k: i64) -> Option<Rat> {
    if k == 0 {
        return Some(Rat::one());
    }
    let base = if k < 0 {
        if r.is_zero() {
            return None;
        }
        Rat::new_raw(*r.denom(), *r.numer()).reduced()
    } else {
        r
    };
    let mut acc = Rat::one();
    for _ in 0..k.unsigned_abs().min(64) {
        acc = rat_mul(acc, base)?;
    }
    Some(acc)
}

impl Expr {
    /// Canonical structural form: flat sorted sums/products with folded
    /// constants, collected terms, and merged exponents.
    pub fn normalize(&self) -> Expr {
        norm(self)
    }

    /// Normal form after distributing products over sums and unrolling small
    /// integer powers of sums.
    pub fn expand(&self) -> Expr {
        expand_norm(&norm(self))
    }
}

fn norm(e: &Expr) -> Expr {
    match e {
        Expr::Num(_) | Expr::Sym(_) => e.clone(),
        Expr::Add(v) => norm_add(v.iter().map(norm).collect()),
        Expr::Mul(v) => norm_mul(v.iter().map(norm).collect(), 0),
        Expr::Pow(b, ex) => norm_pow(norm(b), norm(ex)),
        Expr::Un(op, a) => norm_un(*op, norm(a)),
        Expr::App(app) => Expr::App(super::App {
            name: app.name.clone(),
            deriv: app.deriv.clone(),
            args: app.args.iter().map(norm).collect(),
        }),
    }
}

/// Split a normalized term into (coefficient, key); `None` key means the term
/// is a pure constant.
fn split_coeff(t: Expr) -> (Rat, Option<Expr>) {
    match t {
        Expr::Num(r) => (r, None),
        Expr::Mul(v) => {
            if let Expr::Num(r) = &v[0] {
                let r = *r;
                let rest = &v[1..];
                let key = if rest.len() == 1 {
                    rest[0].clone()
                } else {
                    Expr::Mul(rest.to_vec())
                };
                (r, Some(key))
            } else {
                (Rat::one(), Some(Expr::Mul(v)))
            }
        }
        other => (Rat::one(), Some(other)),
    }
}

fn rebuild_term(coeff: Rat, key: Expr) -> Expr {
    if coeff.is_one() {
        return key;
    }
    match key {
        Expr::Mul(v) => {
            let mut out = Vec::with_capacity(v.len() + 1);
            out.push(Expr::Num(coeff));
            out.extend(v);
            Expr::Mul(out)
        }
        other => Expr::Mul(vec![Expr::Num(coeff), other]),
    }
}

fn norm_add(children: Vec<Expr>) -> Expr {
    let mut stack = children;
    let mut konst = Rat::zero();
    let mut coeffs: BTreeMap<Expr, Rat> = BTreeMap::new();
    let mut unmerged: Vec<Expr> = Vec::new();
    while let Some(c) = stack.pop() {
        if let Expr::Add(v) = c {
            stack.extend(v);
            continue;
        }
        let (r, key) = split_coeff(c);
        match key {
            None => match rat_add(konst, r) {
                Some(k) => konst = k,
                None => unmerged.push(Expr::Num(r)),
            },
            Some(k) => {
                let slot = coeffs.entry(k.clone()).or_insert_with(Rat::zero);
                match rat_add(*slot, r) {
                    Some(s) => *slot = s,
                    None => unmerged.push(rebuild_term(r, k)),
                }
            }
        }
    }
    let mut terms = unmerged;
    for (key, coeff) in coeffs {
        if coeff.is_zero() {
            continue;
        }
        terms.push(rebuild_term(coeff, key));
    }
    if !konst.is_zero() {
        terms.push(Expr::Num(konst));
    }
    terms.sort();
    match terms.len() {
        0 => Expr::num(0),
        1 => terms.pop().unwrap(),
        _ => Expr::Add(terms),
    }
}

fn norm_mul(children: Vec<Expr>, depth: u32) -> Expr {
    let mut stack = children;
    let mut konst = Rat::one();
    let mut exps: BTreeMap<Expr, Vec<Expr>> = BTreeMap::new();
    let mut factors: Vec<Expr> = Vec::new();
    while let Some(c) = stack.pop() {
        match c {
            Expr::Mul(v) => stack.extend(v),
            Expr::Num(r) => {
                if r.is_zero() {
                    return Expr::num(0);
                }
                match rat_mul(konst, r) {
                    Some(k) => konst = k,
                    None => factors.push(Expr::Num(r)),
                }
            }
            Expr::Pow(b, e) => exps.entry(*b).or_default().push(*e),
            other => exps.entry(other).or_default().push(Expr::num(1)),
        }
    }
    let mut requeue = false;
    for (base, exp_terms) in exps {
        let ex = norm_add(exp_terms);
        if ex.is_zero_const() {
            continue;
        }
        let fac = if ex.is_one_const() {
            base
        } else {
            norm_pow(base, ex)
        };
        if matches!(fac, Expr::Num(_) | Expr::Mul(_)) {
            requeue = true;
        }
        factors.push(fac);
    }
    if requeue && depth < 8 {
        factors.push(Expr::Num(konst));
        return norm_mul(factors, depth + 1);
    }
    factors.sort();
    if factors.is_empty() {
        return Expr::Num(konst);
    }
    if !konst.is_one() {
        factors.insert(0, Expr::Num(konst));
    }
    if factors.len() == 1 {
        factors.pop().unwrap()
    } else {
        Expr::Mul(factors)
    }
}

fn norm_pow(b: Expr, e: Expr) -> Expr {
    if let Expr::Num(k) = &e {
        if k.is_zero() {
            return Expr::num(1);
        }
        if k.is_one() {
            return b;
        }
    }
    match (&b, &e) {
        (Expr::Num(r), _) if r.is_one() => return Expr::num(1),
        (Expr::Num(r), Expr::Num(k)) if k.is_integer() && k.numer().abs() <= 16 => {
            if let Some(v) = rat_pow(*r, *k.numer()) {
                return Expr::Num(v);
            }
        }
        _ => {}
    }
    if let Expr::Num(k) = &e {
        if k.is_integer() {
            // (u^a)^k = u^(a k) and (u v)^k = u^k v^k for integer k.
            if let Expr::Pow(b2, e2) = &b {
                let merged = norm_mul(vec![(**e2).clone(), e.clone()], 0);
                return norm_pow((**b2).clone(), merged);
            }
            if let Expr::Mul(v) = &b {
                let parts = v.iter().map(|f| norm_pow(f.clone(), e.clone())).collect();
                return norm_mul(parts, 0);
            }
        }
    }
    Expr::Pow(Box::new(b), Box::new(e))
}

fn norm_un(op: UnOp, a: Expr) -> Expr {
    if op == UnOp::Sqrt {
        return norm_pow(a, Expr::rat(1, 2));
    }
    if let Expr::Num(r) = &a {
        match op {
            UnOp::Exp if r.is_zero() => return Expr::num(1),
            UnOp::Ln if r.is_one() => return Expr::num(0),
            UnOp::Abs => return Expr::Num(r.abs()),
            UnOp::Sin | UnOp::Atan if r.is_zero() => return Expr::num(0),
            UnOp::Cos if r.is_zero() => return Expr::num(1),
            _ => {}
        }
    }
    Expr::Un(op, Box::new(a))
}

/// Distribution budget: a product expands only while the running term count
/// stays at or below this bound.
const MAX_EXPAND_TERMS: usize = 4096;

fn expand_norm(e: &Expr) -> Expr {
    match e {
        Expr::Num(_) | Expr::Sym(_) => e.clone(),
        Expr::Add(v) => norm_add(v.iter().map(expand_norm).collect()),
        Expr::Mul(v) => distribute(v.iter().map(expand_norm).collect()),
        Expr::Pow(b, ex) => {
            let eb = expand_norm(b);
            let ee = expand_norm(ex);
            if let (Expr::Add(terms), Expr::Num(k)) = (&eb, &ee) {
                if k.is_integer() && *k.numer() >= 2 && *k.numer() <= 8 {
                    let n = *k.numer() as usize;
                    if terms.len().checked_pow(n as u32).is_some_and(|t| t <= MAX_EXPAND_TERMS) {
                        return distribute(vec![eb.clone(); n]);
                    }
                }
            }
            norm_pow(eb, ee)
        }
        Expr::Un(op, a) => norm_un(*op, expand_norm(a)),
        Expr::App(app) => Expr::App(super::App {
            name: app.name.clone(),
            deriv: app.deriv.clone(),
            args: app.args.iter().map(expand_norm).collect(),
        }),
    }
}

fn distribute(factors: Vec<Expr>) -> Expr {
    let mut scalars: Vec<Expr> = Vec::new();
    let mut sums: Vec<Vec<Expr>> = Vec::new();
    for f in factors {
        match f {
            Expr::Add(terms) => sums.push(terms),
            other => scalars.push(other),
        }
    }
    if sums.is_empty() {
        return norm_mul(scalars, 0);
    }
    let total: usize = sums.iter().map(Vec::len).try_fold(1usize, |a, n| a.checked_mul(n)).unwrap_or(usize::MAX);
    if total > MAX_EXPAND_TERMS {
        let mut all = scalars;
        all.extend(sums.into_iter().map(Expr::Add));
        return norm_mul(all, 0);
    }
    let mut terms = Vec::with_capacity(total);
    let mut idx = vec![0usize; sums.len()];
    loop {
        let mut parts = scalars.clone();
        for (s, &i) in sums.iter().zip(&idx) {
            parts.push(s[i].clone());
        }
        terms.push(norm_mul(parts, 0));
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return norm_add(terms);
            }
            idx[pos] += 1;
            if idx[pos] < sums[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse, Expr};

    fn n(src: &str) -> Expr {
        parse(src).unwrap().normalize()
    }

    #[test]
    fn cancels_inverse_powers() {
        assert_eq!(n("c^2*c^(-2)"), Expr::num(1));
    }

    #[test]
    fn collects_like_terms() {
        assert_eq!(n("t + x - x - t"), Expr::num(0));
        assert_eq!(n("2*t + 3*t"), parse("5*t").unwrap().normalize());
    }

    #[test]
    fn merges_symbolic_exponents() {
        assert_eq!(n("c^(a + 2)*c^(-a)"), parse("c^2").unwrap());
    }

    #[test]
    fn folds_rational_arithmetic() {
        assert_eq!(n("2^3/4 + 1/2"), Expr::rat(5, 2));
    }

    #[test]
    fn normalize_is_idempotent_on_samples() {
        for src in [
            "(t + x)*(t - x)",
            "P*f^(-1) + Q*c^2 - 3*t*x",
            "exp(a*c)*c^a/sqrt(f)",
            "1 - (t - a*c)^2/(t^2 - 2*a*x)",
        ] {
            let once = parse(src).unwrap().normalize();
            assert_eq!(once.normalize(), once, "{src}");
        }
    }

    #[test]
    fn expand_detects_polynomial_identities() {
        assert_eq!(parse("(c+1)^2 - c^2 - 2*c - 1").unwrap().expand(), Expr::num(0));
        assert_eq!(
            parse("(t+x)*(t-x) - t^2 + x^2").unwrap().expand(),
            Expr::num(0)
        );
        assert_eq!(
            parse("(a+b)^3 - a^3 - 3*a^2*b - 3*a*b^2 - b^3").unwrap().expand(),
            Expr::num(0)
        );
    }

    #[test]
    fn sqrt_becomes_half_power() {
        assert_eq!(n("sqrt(f)*sqrt(f)"), parse("f").unwrap());
    }
}
