//! First-stage comparator: rewrite to a canonical form and decide
//! `Equal` / `NotEqual` / `Unknown`.
//!
//! The rule set is small on purpose. It folds exact rational constants,
//! flattens and sorts sums and products, collects like terms and like
//! factors, rewrites `a^y` (positive literal `a`) to `exp(y*log(a))` and
//! `e^y` to `exp(y)`. There are no trigonometric or log/exp identities, so
//! plenty of true identities come back `Unknown`.
//!
//! Division by a literal zero yields an absorbing undefined marker: the
//! enclosing tree is kept as-is and comparison reports `Unknown`.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::expr::{BinOp, Constant, Expr, Func};

/// Three-valued outcome of symbolic comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Equal,
    NotEqual,
    Unknown,
}

/// Integer powers of rationals are folded only below these limits.
const MAX_FOLD_EXPONENT: u64 = 4096;
const MAX_FOLD_BITS: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Canon {
    Rat(BigRational),
    Const(Constant),
    Var(String),
    Call(Func, Box<Canon>),
    Pow(Box<Canon>, Box<Canon>),
    /// Coefficient and sorted factors with pairwise distinct bases.
    Mul(BigRational, Vec<Canon>),
    /// Constant term and sorted terms with pairwise distinct non-coefficient parts.
    Add(BigRational, Vec<Canon>),
    /// Contains a division by zero, so undefined at every point (evaluation
    /// is strict). All such expressions share this one form, printed `1/0`.
    Undefined,
}

impl Canon {
    fn kind(&self) -> u8 {
        match self {
            Canon::Rat(_) => 0,
            Canon::Const(_) => 1,
            Canon::Var(_) => 2,
            Canon::Call(..) => 3,
            Canon::Pow(..) => 4,
            Canon::Mul(..) => 5,
            Canon::Add(..) => 6,
            Canon::Undefined => 7,
        }
    }

    fn is_rat(&self, value: i64) -> bool {
        matches!(self, Canon::Rat(r) if *r == BigRational::from_integer(value.into()))
    }

    fn contains_var(&self) -> bool {
        match self {
            Canon::Var(_) => true,
            Canon::Rat(_) | Canon::Const(_) => false,
            Canon::Call(_, a) => a.contains_var(),
            Canon::Pow(b, e) => b.contains_var() || e.contains_var(),
            Canon::Mul(_, fs) | Canon::Add(_, fs) => fs.iter().any(Canon::contains_var),
            Canon::Undefined => false,
        }
    }
}

// Kind first, then children, then literal values.
impl Ord for Canon {
    fn cmp(&self, other: &Self) -> Ordering {
        use Canon::*;
        self.kind().cmp(&other.kind()).then_with(|| match (self, other) {
            (Rat(a), Rat(b)) => a.cmp(b),
            (Const(a), Const(b)) => a.cmp(b),
            (Var(a), Var(b)) => a.cmp(b),
            (Call(f, a), Call(g, b)) => a.cmp(b).then(f.cmp(g)),
            (Pow(b1, e1), Pow(b2, e2)) => b1.cmp(b2).then_with(|| e1.cmp(e2)),
            (Mul(k1, f1), Mul(k2, f2)) | (Add(k1, f1), Add(k2, f2)) => {
                f1.cmp(f2).then_with(|| k1.cmp(k2))
            }
            (Undefined, Undefined) => Ordering::Equal,
            _ => unreachable!("kinds already compared equal"),
        })
    }
}

impl PartialOrd for Canon {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn rat(value: i64) -> BigRational {
    BigRational::from_integer(value.into())
}

fn is_integer(r: &BigRational) -> bool {
    r.denom().is_one()
}

/// Splits `c` into a rational coefficient and the remaining part.
fn split_coef(c: Canon) -> (BigRational, Canon) {
    match c {
        Canon::Mul(k, mut fs) if fs.len() == 1 => (k, fs.pop().expect("one factor")),
        Canon::Mul(k, fs) => (k, Canon::Mul(BigRational::one(), fs)),
        other => (BigRational::one(), other),
    }
}

fn make_term(coef: BigRational, rest: Canon) -> Canon {
    if coef.is_zero() {
        return Canon::Rat(coef);
    }
    if coef.is_one() {
        return rest;
    }
    match rest {
        Canon::Mul(_, fs) => Canon::Mul(coef, fs),
        other => Canon::Mul(coef, vec![other]),
    }
}

fn split_pow(c: Canon) -> (Canon, Canon) {
    match c {
        Canon::Pow(b, e) => (*b, *e),
        other => (other, Canon::Rat(BigRational::one())),
    }
}

fn is_negative_exponent(e: &Canon) -> bool {
    match e {
        Canon::Rat(r) => r.is_negative(),
        Canon::Mul(k, _) => k.is_negative(),
        _ => false,
    }
}

fn make_add(items: Vec<Canon>) -> Canon {
    let mut constant = BigRational::zero();
    let mut like: BTreeMap<Canon, BigRational> = BTreeMap::new();
    let add_term = |t: Canon, like: &mut BTreeMap<Canon, BigRational>| {
        let (k, rest) = split_coef(t);
        *like.entry(rest).or_insert_with(BigRational::zero) += k;
    };
    for item in items {
        match item {
            Canon::Rat(r) => constant += r,
            Canon::Add(k, ts) => {
                constant += k;
                for t in ts {
                    add_term(t, &mut like);
                }
            }
            other => add_term(other, &mut like),
        }
    }
    let mut terms: Vec<Canon> = like
        .into_iter()
        .filter(|(_, k)| !k.is_zero())
        .map(|(rest, k)| make_term(k, rest))
        .collect();
    terms.sort();
    match terms.len() {
        0 => Canon::Rat(constant),
        1 if constant.is_zero() => terms.pop().expect("one term"),
        _ => Canon::Add(constant, terms),
    }
}

fn make_mul(items: Vec<Canon>) -> Canon {
    try_make_mul(items).expect("no two zero bases are merged")
}

/// `None` when merging factors produces `0^negative`.
fn try_make_mul(items: Vec<Canon>) -> Option<Canon> {
    let mut coef = BigRational::one();
    let mut bases: BTreeMap<Canon, Vec<Canon>> = BTreeMap::new();
    let add_factor = |f: Canon, bases: &mut BTreeMap<Canon, Vec<Canon>>| {
        let (b, e) = split_pow(f);
        bases.entry(b).or_default().push(e);
    };
    for item in items {
        match item {
            Canon::Rat(r) => coef *= r,
            Canon::Mul(k, fs) => {
                coef *= k;
                for f in fs {
                    add_factor(f, &mut bases);
                }
            }
            other => add_factor(other, &mut bases),
        }
    }
    if coef.is_zero() {
        return Some(Canon::Rat(coef));
    }
    let mut factors = Vec::with_capacity(bases.len());
    for (base, exps) in bases {
        let exponent = make_add(exps);
        let base = match primitive_sum(&base, &exponent) {
            Some((content, primitive)) => {
                coef *= content;
                primitive
            }
            None => base,
        };
        match make_pow(base, exponent)? {
            Canon::Rat(r) => coef *= r,
            Canon::Mul(k, fs) => {
                coef *= k;
                factors.extend(fs);
            }
            f => factors.push(f),
        }
    }
    if coef.is_zero() {
        return Some(Canon::Rat(coef));
    }
    // Rewrites such as e^2 -> exp(2) can produce a factor equal to another
    // base; merge again until bases are distinct.
    let mut seen: Vec<Canon> = factors.iter().map(|f| split_pow(f.clone()).0).collect();
    seen.sort();
    let distinct = seen.windows(2).all(|w| w[0] != w[1]);
    if !distinct {
        let mut again = vec![Canon::Rat(coef)];
        again.extend(factors);
        return try_make_mul(again);
    }
    factors.sort();
    // a rational multiple of a sum is distributed: -(1 - y) -> y - 1
    if let [Canon::Add(k, ts)] = factors.as_slice() {
        if !coef.is_one() {
            let mut items = vec![Canon::Rat(&coef * k)];
            items.extend(ts.iter().map(|t| make_mul(vec![Canon::Rat(coef.clone()), t.clone()])));
            return Some(make_add(items));
        }
    }
    Some(match factors.len() {
        0 => Canon::Rat(coef),
        1 if coef.is_one() => factors.pop().expect("one factor"),
        _ => Canon::Mul(coef, factors),
    })
}

/// For a sum raised to an integer power, splits off the leading term's
/// coefficient `c`: `(c*t + ...)^n = c^n * (t + .../c)^n`. This gives sums
/// inside products a single representation, so `-(a+b)*y` and `(-a-b)*y`
/// normalize alike.
fn primitive_sum(base: &Canon, exponent: &Canon) -> Option<(BigRational, Canon)> {
    let (Canon::Add(k, ts), Canon::Rat(n)) = (base, exponent) else {
        return None;
    };
    if !is_integer(n) {
        return None;
    }
    // lead by the coefficient-free part, which scaling leaves unchanged
    let (c, _) = ts
        .iter()
        .map(|t| split_coef(t.clone()))
        .min_by(|a, b| a.1.cmp(&b.1))
        .expect("sums have terms");
    if c.is_one() {
        return None;
    }
    let content = fold_rational_power(&c, n)?;
    let r = c.recip();
    let mut items = vec![Canon::Rat(k * &r)];
    items.extend(ts.iter().map(|t| make_mul(vec![Canon::Rat(r.clone()), t.clone()])));
    Some((content, make_add(items)))
}

fn negate(c: Canon) -> Canon {
    make_mul(vec![Canon::Rat(rat(-1)), c])
}

fn fold_rational_power(base: &BigRational, exponent: &BigRational) -> Option<BigRational> {
    let n = exponent.to_integer();
    let magnitude = n.magnitude().to_u64()?;
    let bits = base.numer().bits().max(base.denom().bits()).max(1);
    if magnitude > MAX_FOLD_EXPONENT || bits.saturating_mul(magnitude) > MAX_FOLD_BITS {
        return None;
    }
    let n = i32::try_from(n).ok()?;
    Some(base.pow(n))
}

/// `None` signals a division by zero (`0^negative`).
fn make_pow(base: Canon, exponent: Canon) -> Option<Canon> {
    if exponent.is_rat(0) {
        return Some(Canon::Rat(BigRational::one()));
    }
    if exponent.is_rat(1) {
        return Some(base);
    }
    match (&base, &exponent) {
        (Canon::Rat(b), Canon::Rat(e)) if is_integer(e) => {
            if b.is_zero() {
                return if e.is_positive() {
                    Some(Canon::Rat(BigRational::zero()))
                } else {
                    None
                };
            }
            Some(match fold_rational_power(b, e) {
                Some(v) => Canon::Rat(v),
                None => Canon::Pow(Box::new(base), Box::new(exponent)),
            })
        }
        // integer powers distribute over products and nest into powers
        (Canon::Mul(k, fs), Canon::Rat(n)) if is_integer(n) => {
            let Some(kn) = fold_rational_power(k, n) else {
                return Some(Canon::Pow(Box::new(base), Box::new(exponent)));
            };
            let mut items = vec![Canon::Rat(kn)];
            for f in fs {
                items.push(make_pow(f.clone(), exponent.clone())?);
            }
            try_make_mul(items)
        }
        (Canon::Pow(b, e), Canon::Rat(n)) if is_integer(n) => {
            make_pow((**b).clone(), make_mul(vec![(**e).clone(), exponent.clone()]))
        }
        (Canon::Rat(b), _) if b.is_one() => Some(Canon::Rat(BigRational::one())),
        (Canon::Rat(b), _) if b.is_positive() => {
            let log = make_call(Func::Log, base.clone());
            Some(make_call(Func::Exp, make_mul(vec![exponent, log])))
        }
        (Canon::Const(Constant::E), _) => Some(make_call(Func::Exp, exponent)),
        _ => Some(Canon::Pow(Box::new(base), Box::new(exponent))),
    }
}

fn reciprocal(c: Canon) -> Option<Canon> {
    match c {
        Canon::Rat(r) if r.is_zero() => None,
        Canon::Rat(r) => Some(Canon::Rat(r.recip())),
        Canon::Mul(k, fs) => {
            let mut items = vec![Canon::Rat(k.recip())];
            for f in fs {
                items.push(reciprocal(f)?);
            }
            try_make_mul(items)
        }
        Canon::Pow(b, e) => make_pow(*b, negate(*e)),
        other => make_pow(other, Canon::Rat(rat(-1))),
    }
}

fn exact_sqrt(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    (&n * &n == *r.numer() && &d * &d == *r.denom()).then(|| BigRational::new(n, d))
}

fn make_call(func: Func, arg: Canon) -> Canon {
    let func = if func == Func::Ln { Func::Log } else { func };
    if let Canon::Rat(r) = &arg {
        let folded = match func {
            Func::Sin | Func::Tan if r.is_zero() => Some(BigRational::zero()),
            Func::Cos | Func::Exp if r.is_zero() => Some(BigRational::one()),
            Func::Log if r.is_one() => Some(BigRational::zero()),
            Func::Sqrt => exact_sqrt(r),
            Func::Abs => Some(r.abs()),
            _ => None,
        };
        if let Some(v) = folded {
            return Canon::Rat(v);
        }
    }
    if func == Func::Abs {
        if let Canon::Const(_) = arg {
            return arg;
        }
    }
    Canon::Call(func, Box::new(arg))
}

fn decimal_to_rational(value: f64) -> BigRational {
    // shortest round-trip text, i.e. what the user most plausibly typed
    let text = value.to_string();
    let (int_part, frac_part) = text.split_once('.').unwrap_or((&text, ""));
    let digits = format!("{int_part}{frac_part}");
    let numer = BigInt::parse_bytes(digits.as_bytes(), 10).expect("decimal digits");
    let denom = num_traits::pow(BigInt::from(10u32), frac_part.len());
    BigRational::new(numer, denom)
}

fn canonicalize(e: &Expr) -> Canon {
    match e {
        Expr::Int(n) => Canon::Rat(BigRational::from_integer(BigInt::from(n.clone()))),
        Expr::Decimal(d) => Canon::Rat(decimal_to_rational(d.value())),
        Expr::Const(c) => Canon::Const(*c),
        Expr::Var(name) => Canon::Var(name.clone()),
        Expr::Neg(inner) => match canonicalize(inner) {
            Canon::Undefined => Canon::Undefined,
            c => negate(c),
        },
        Expr::Call(func, arg) => match canonicalize(arg) {
            Canon::Undefined => Canon::Undefined,
            c => make_call(*func, c),
        },
        Expr::Binary(op, lhs, rhs) => {
            let a = canonicalize(lhs);
            let b = canonicalize(rhs);
            if matches!(a, Canon::Undefined) || matches!(b, Canon::Undefined) {
                return Canon::Undefined;
            }
            let result = match op {
                BinOp::Add => Some(make_add(vec![a.clone(), b.clone()])),
                BinOp::Sub => Some(make_add(vec![a.clone(), negate(b.clone())])),
                BinOp::Mul => try_make_mul(vec![a.clone(), b.clone()]),
                BinOp::Div => reciprocal(b.clone()).and_then(|r| try_make_mul(vec![a.clone(), r])),
                BinOp::Pow => make_pow(a.clone(), b.clone()),
            };
            result.unwrap_or(Canon::Undefined)
        }
    }
}

fn integer_expr(n: &BigInt) -> Expr {
    let e = Expr::Int(n.magnitude().clone());
    if n.is_negative() {
        Expr::neg(e)
    } else {
        e
    }
}

fn rational_expr(r: &BigRational) -> Expr {
    if r.is_negative() {
        return Expr::neg(rational_expr(&-r));
    }
    let numer = integer_expr(r.numer());
    if is_integer(r) {
        numer
    } else {
        Expr::div(numer, integer_expr(r.denom()))
    }
}

fn product(items: Vec<Expr>) -> Expr {
    items
        .into_iter()
        .reduce(Expr::mul)
        .unwrap_or_else(|| Expr::int(1))
}

fn product_expr(coef: &BigRational, factors: &[Canon]) -> Expr {
    let mut numer = Vec::new();
    let mut denom = Vec::new();
    let p = coef.numer().magnitude();
    let q = coef.denom().magnitude();
    let has_numer_factor = factors
        .iter()
        .any(|f| !matches!(f, Canon::Pow(_, e) if is_negative_exponent(e)));
    if !p.is_one() || !has_numer_factor {
        numer.push(Expr::Int(p.clone()));
    }
    if !q.is_one() {
        denom.push(Expr::Int(q.clone()));
    }
    for f in factors {
        match f {
            Canon::Pow(b, e) if is_negative_exponent(e) => {
                let positive = make_pow((**b).clone(), negate((**e).clone()))
                    .expect("non-rational base");
                denom.push(to_expr(&positive));
            }
            other => numer.push(to_expr(other)),
        }
    }
    if coef.is_negative() {
        numer[0] = Expr::neg(numer[0].clone());
    }
    let numer = product(numer);
    if denom.is_empty() {
        numer
    } else {
        Expr::div(numer, product(denom))
    }
}

fn to_expr(c: &Canon) -> Expr {
    match c {
        Canon::Rat(r) => rational_expr(r),
        Canon::Const(k) => Expr::Const(*k),
        Canon::Var(name) => Expr::Var(name.clone()),
        Canon::Call(func, arg) => Expr::call(*func, to_expr(arg)),
        Canon::Pow(_, e) if is_negative_exponent(e) => {
            product_expr(&BigRational::one(), std::slice::from_ref(c))
        }
        Canon::Pow(b, e) => Expr::pow(to_expr(b), to_expr(e)),
        Canon::Mul(k, fs) => product_expr(k, fs),
        Canon::Add(k, ts) => {
            let mut acc: Option<Expr> = None;
            for t in ts {
                acc = Some(match acc {
                    None => to_expr(t),
                    Some(prev) => {
                        let (coef, _) = split_coef(t.clone());
                        if coef.is_negative() {
                            Expr::sub(prev, to_expr(&negate(t.clone())))
                        } else {
                            Expr::add(prev, to_expr(t))
                        }
                    }
                });
            }
            let acc = acc.expect("sums have at least one term");
            if k.is_zero() {
                acc
            } else if k.is_negative() {
                Expr::sub(acc, rational_expr(&-k))
            } else {
                Expr::add(acc, rational_expr(k))
            }
        }
        Canon::Undefined => Expr::div(Expr::int(1), Expr::int(0)),
    }
}

/// Rewrites `e` into its canonical form.
///
/// The result is a fixpoint: `normalize(&normalize(e)) == normalize(e)`.
pub fn normalize(e: &Expr) -> Expr {
    to_expr(&canonicalize(e))
}

/// True when the normal form contains a division by a literal zero.
pub fn has_domain_error(e: &Expr) -> bool {
    matches!(canonicalize(e), Canon::Undefined)
}

/// Compares `a` and `b` by normalizing `a - b`.
///
/// `Equal` and `NotEqual` are only returned when the normal form is
/// literally zero or a constant certified nonzero; everything else is
/// `Unknown`.
pub fn symbolic_compare(a: &Expr, b: &Expr) -> Verdict {
    let diff = canonicalize(&Expr::sub(a.clone(), b.clone()));
    match &diff {
        Canon::Rat(r) if r.is_zero() => Verdict::Equal,
        Canon::Rat(_) => Verdict::NotEqual,
        Canon::Undefined => Verdict::Unknown,
        c if !c.contains_var() => match enclose(c) {
            Some(iv) if iv.excludes_zero() => Verdict::NotEqual,
            _ => Verdict::Unknown,
        },
        _ => Verdict::Unknown,
    }
}

/// Closed rational interval.
#[derive(Debug, Clone)]
struct Interval {
    lo: BigRational,
    hi: BigRational,
}

impl Interval {
    fn point(r: BigRational) -> Self {
        Interval { lo: r.clone(), hi: r }
    }

    fn from_decimals(lo: i64, hi: i64, scale: u32) -> Self {
        let denom = BigInt::from(10u64.pow(scale));
        Interval {
            lo: BigRational::new(lo.into(), denom.clone()),
            hi: BigRational::new(hi.into(), denom),
        }
    }

    fn excludes_zero(&self) -> bool {
        self.lo.is_positive() || self.hi.is_negative()
    }

    fn add(&self, other: &Interval) -> Interval {
        Interval {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
        }
    }

    fn mul(&self, other: &Interval) -> Interval {
        let products = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let lo = products.iter().min().expect("four products").clone();
        let hi = products.iter().max().expect("four products").clone();
        Interval { lo, hi }
    }

    fn recip(&self) -> Option<Interval> {
        self.excludes_zero().then(|| Interval {
            lo: self.hi.recip(),
            hi: self.lo.recip(),
        })
    }

    fn abs(&self) -> Interval {
        if self.lo.is_negative() && self.hi.is_positive() {
            Interval {
                lo: BigRational::zero(),
                hi: self.hi.clone().max(-self.lo.clone()),
            }
        } else if self.hi.is_negative() || self.hi.is_zero() {
            Interval {
                lo: -self.hi.clone(),
                hi: -self.lo.clone(),
            }
        } else {
            self.clone()
        }
    }

    fn powi(&self, n: u32) -> Interval {
        let base = if n.is_multiple_of(2) { self.abs() } else { self.clone() };
        Interval {
            lo: base.lo.pow(n as i32),
            hi: base.hi.pow(n as i32),
        }
    }
}

/// Rational enclosure of a variable-free canonical expression built from
/// rationals, `pi`, `e`, sums, products, integer powers and `abs`.
fn enclose(c: &Canon) -> Option<Interval> {
    match c {
        Canon::Rat(r) => Some(Interval::point(r.clone())),
        Canon::Const(Constant::Pi) => Some(Interval::from_decimals(
            314159265358979,
            314159265358980,
            14,
        )),
        Canon::Const(Constant::E) => Some(Interval::from_decimals(
            271828182845904,
            271828182845905,
            14,
        )),
        Canon::Add(k, ts) => ts.iter().try_fold(Interval::point(k.clone()), |acc, t| {
            Some(acc.add(&enclose(t)?))
        }),
        Canon::Mul(k, fs) => fs.iter().try_fold(Interval::point(k.clone()), |acc, f| {
            Some(acc.mul(&enclose(f)?))
        }),
        Canon::Pow(b, e) => {
            let Canon::Rat(n) = &**e else { return None };
            if !is_integer(n) {
                return None;
            }
            let n = n.to_integer().to_i32()?;
            if n.unsigned_abs() > 64 {
                return None;
            }
            let powered = enclose(b)?.powi(n.unsigned_abs());
            if n < 0 {
                powered.recip()
            } else {
                Some(powered)
            }
        }
        Canon::Call(Func::Abs, a) => Some(enclose(a)?.abs()),
        _ => None,
    }
}

/// Exact value of a literal integer, if `e` is one after normalization.
pub fn as_integer(e: &Expr) -> Option<BigInt> {
    match canonicalize(e) {
        Canon::Rat(r) if is_integer(&r) => Some(r.to_integer()),
        _ => None,
    }
}
