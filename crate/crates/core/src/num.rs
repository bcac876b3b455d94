//! Exact numeric helpers: rational parsing, the budget parameter γ and
//! quadratic surds for labels that involve `C/γ`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational number used for sizes, probabilities and costs.
pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Parses `"p/q"`, an integer, or a decimal such as `"0.61"` or `"2.5e-3"`
/// into an exact rational.
pub fn parse_rational(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Q::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(pos) => {
            let e: i64 = s[pos + 1..].parse().map_err(|_| bad())?;
            (&s[..pos], e)
        }
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.as_bytes().first() {
        Some(b'-') => (true, &mantissa[1..]),
        Some(b'+') => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let all: String = format!("{int_part}{frac_part}");
    let num: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().map_err(|_| bad())? };
    let shift = exp - frac_part.len() as i64;
    let ten = BigInt::from(10);
    let mut value = if shift >= 0 {
        Q::from_integer(num * num_traits::pow(ten, shift as usize))
    } else {
        Q::new(num, num_traits::pow(ten, (-shift) as usize))
    };
    if neg {
        value = -value;
    }
    Ok(value)
}

/// `"p/q"`, or `"p"` for integers.
pub fn fmt_rational(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        if x.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Exact rational value of a finite float.
pub fn from_f64(x: f64) -> Q {
    Q::from_float(x).expect("finite float")
}

pub fn lcm_denominators<'a>(values: impl IntoIterator<Item = &'a Q>) -> BigInt {
    values.into_iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

/// Greatest common divisor of two positive rationals: the largest rational
/// `g` such that both are integer multiples of `g`.
pub fn gcd_rational(a: &Q, b: &Q) -> Q {
    let l = a.denom().lcm(b.denom());
    let an = a.numer() * (&l / a.denom());
    let bn = b.numer() * (&l / b.denom());
    Q::new(an.gcd(&bn), l)
}

/// Exact square root of a rational if it has one.
pub fn rational_sqrt(x: &Q) -> Option<Q> {
    if x.is_negative() {
        return None;
    }
    let n = x.numer().sqrt();
    let d = x.denom().sqrt();
    if &(&n * &n) == x.numer() && &(&d * &d) == x.denom() {
        Some(Q::new(n, d))
    } else {
        None
    }
}

/// The risk-budget parameter γ. Stored through its exact square so that
/// `γ = √2` compares exactly against rational risks.
#[derive(Clone, Debug, PartialEq)]
pub struct Gamma {
    square: Q,
    value: f64,
}

impl Gamma {
    pub fn rational(g: Q) -> Result<Self> {
        if g.is_negative() {
            return Err(Error::InvalidParams(format!("gamma must be nonnegative, got {}", fmt_rational(&g))));
        }
        Ok(Self { value: to_f64(&g), square: &g * &g })
    }

    /// `γ = √s`.
    pub fn sqrt_of(s: Q) -> Result<Self> {
        if s.is_negative() {
            return Err(Error::InvalidParams("gamma² must be nonnegative".into()));
        }
        Ok(Self { value: to_f64(&s).sqrt(), square: s })
    }

    pub fn sqrt2() -> Self {
        Self::sqrt_of(qi(2)).unwrap()
    }

    /// Accepts decimals, `p/q`, `sqrt2`, `sqrt(2)` and `√2`.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        let inner = t
            .strip_prefix("sqrt(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| t.strip_prefix("sqrt"))
            .or_else(|| t.strip_prefix('√'));
        match inner {
            Some(r) => Self::sqrt_of(parse_rational(r)?),
            None => Self::rational(parse_rational(t)?),
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn square(&self) -> &Q {
        &self.square
    }

    pub fn as_rational(&self) -> Option<Q> {
        rational_sqrt(&self.square)
    }

    /// Exact test `risk · C ≤ γ`.
    pub fn admits(&self, risk: &Q, penalty: &Q) -> bool {
        let x = risk * penalty;
        if x.is_negative() {
            return true;
        }
        &x * &x <= self.square
    }

    /// Exact test `risk · C ≤ γ · (1 + BUDGET_TOL)`, mirroring the float
    /// comparison the online deciders use.
    pub fn admits_with_tolerance(&self, risk: &Q, penalty: &Q) -> bool {
        let x = risk * penalty;
        if x.is_negative() {
            return true;
        }
        let slack = Q::one() + budget_tol_exact();
        &x * &x <= &self.square * &slack * &slack
    }

    /// `δ = C/γ` as a surd.
    pub fn delta(&self, penalty: &Q) -> Surd {
        assert!(!self.square.is_zero(), "delta needs gamma > 0");
        match self.as_rational() {
            Some(g) => Surd::rational(penalty / g),
            None => Surd::new(Q::zero(), penalty / &self.square, self.square.clone()),
        }
    }

    /// `1 + 2/γ` as a surd.
    pub fn surgery_factor(&self) -> Surd {
        Surd::rational(Q::one()) + self.delta(&qi(2))
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.as_rational() {
            Some(g) => write!(f, "{}", fmt_rational(&g)),
            None => write!(f, "sqrt({})", fmt_rational(&self.square)),
        }
    }
}

/// Relative tolerance on budget and greedy comparisons.
pub const BUDGET_TOL: f64 = 1e-12;

pub fn budget_tol_exact() -> Q {
    q(1, 1_000_000_000_000)
}

/// `a + b·√r` with `r > 0` rational. Purely rational values carry `r = 1`
/// and `b = 0`.
#[derive(Clone, Debug)]
pub struct Surd {
    a: Q,
    b: Q,
    r: Q,
}

impl Surd {
    pub fn new(a: Q, b: Q, r: Q) -> Self {
        assert!(r.is_positive(), "surd radicand must be positive");
        match rational_sqrt(&r) {
            Some(s) => Self { a: a + b * s, b: Q::zero(), r: Q::one() },
            None if b.is_zero() => Self { a, b, r: Q::one() },
            None => Self { a, b, r },
        }
    }

    pub fn rational(a: Q) -> Self {
        Self { a, b: Q::zero(), r: Q::one() }
    }

    pub fn zero() -> Self {
        Self::rational(Q::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn rational_part(&self) -> &Q {
        &self.a
    }

    pub fn as_rational(&self) -> Option<&Q> {
        self.b.is_zero().then_some(&self.a)
    }

    pub fn to_f64(&self) -> f64 {
        to_f64(&self.a) + to_f64(&self.b) * to_f64(&self.r).sqrt()
    }

    fn radicand_with(&self, other: &Surd) -> Q {
        match (self.b.is_zero(), other.b.is_zero()) {
            (true, _) => other.r.clone(),
            (_, true) => self.r.clone(),
            _ => {
                assert_eq!(self.r, other.r, "mixing surds with different radicands");
                self.r.clone()
            }
        }
    }

    pub fn scale(&self, k: &Q) -> Surd {
        Surd::new(&self.a * k, &self.b * k, self.r.clone())
    }

    pub fn signum(&self) -> Ordering {
        let sa = self.a.cmp(&Q::zero());
        let sb = self.b.cmp(&Q::zero());
        if sb == Ordering::Equal {
            return sa;
        }
        if sa == Ordering::Equal || sa == sb {
            return sb;
        }
        // opposite signs: compare a² with b²r
        let a2 = &self.a * &self.a;
        let b2r = &self.b * &self.b * &self.r;
        match a2.cmp(&b2r) {
            Ordering::Greater => sa,
            Ordering::Less => sb,
            Ordering::Equal => Ordering::Equal,
        }
    }
}

impl Add for Surd {
    type Output = Surd;
    fn add(self, o: Surd) -> Surd {
        let r = self.radicand_with(&o);
        Surd::new(self.a + o.a, self.b + o.b, r)
    }
}

impl<'a> Add<&'a Surd> for &'a Surd {
    type Output = Surd;
    fn add(self, o: &Surd) -> Surd {
        let r = self.radicand_with(o);
        Surd::new(&self.a + &o.a, &self.b + &o.b, r)
    }
}

impl Sub for Surd {
    type Output = Surd;
    fn sub(self, o: Surd) -> Surd {
        self + (-o)
    }
}

impl Neg for Surd {
    type Output = Surd;
    fn neg(self) -> Surd {
        Surd { a: -self.a, b: -self.b, r: self.r }
    }
}

impl Mul for &Surd {
    type Output = Surd;
    fn mul(self, o: &Surd) -> Surd {
        let r = self.radicand_with(o);
        Surd::new(&self.a * &o.a + &self.b * &o.b * &r, &self.a * &o.b + &self.b * &o.a, r)
    }
}

impl PartialEq for Surd {
    fn eq(&self, o: &Surd) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Surd {}

impl PartialOrd for Surd {
    fn partial_cmp(&self, o: &Surd) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Surd {
    fn cmp(&self, o: &Surd) -> Ordering {
        (self.clone() - o.clone()).signum()
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            write!(f, "{}", fmt_rational(&self.a))
        } else {
            write!(f, "{} + {}*sqrt({})", fmt_rational(&self.a), fmt_rational(&self.b), fmt_rational(&self.r))
        }
    }
}

/// Decimal rendering of an exact rational with `digits` fractional digits.
pub fn fmt_decimal(x: &Q, digits: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10), digits);
    let scaled = (x * Q::from_integer(scale.clone())).round().to_integer();
    let (sign, mag) = (scaled.sign(), scaled.abs());
    let (int, frac) = mag.div_rem(&scale);
    let s = if digits == 0 { int.to_string() } else { format!("{int}.{:0>width$}", frac.to_string(), width = digits) };
    if sign == Sign::Minus {
        format!("-{s}")
    } else {
        s
    }
}
