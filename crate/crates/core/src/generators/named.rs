//! Named instance families.

use num_traits::{One, ToPrimitive, Zero};

use crate::dist::SizeDistribution;
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::num::{fmt_rational, q, qi, to_f64, Q};

/// Parameters shared by the families. Unused fields are ignored.
#[derive(Clone, Debug)]
pub struct GenParams {
    pub n: usize,
    pub penalty: Q,
    /// Size `α` of [`example3`].
    pub alpha: Option<Q>,
    /// Number of slow blocks of [`exp_lower_bound`].
    pub n1: Option<usize>,
    pub eps: Option<Q>,
}

impl GenParams {
    pub fn new(n: usize, penalty: Q) -> Self {
        Self { n, penalty, alpha: None, n1: None, eps: None }
    }
}

pub const NAMES: &[&str] = &[
    "three_point",
    "bernoulli",
    "example1",
    "example3",
    "example4",
    "exp_increasing",
    "exp_decreasing",
    "exp_blocks",
    "exp_lower_bound",
    "concluding_alternating",
];

pub fn gen_named(name: &str, p: &GenParams) -> Result<Instance> {
    let missing = |what: &str| Error::InvalidParams(format!("{name} needs --{what}"));
    match name {
        "three_point" => three_point(p.n, &p.penalty),
        "bernoulli" => bernoulli(p.n, &p.penalty),
        "example1" => example1(p.n, &p.penalty),
        "example3" => example3(p.n, &p.penalty, p.alpha.as_ref().ok_or_else(|| missing("alpha"))?),
        "example4" => example4(p.n, &p.penalty),
        "exp_increasing" => exp_increasing(p.n, &p.penalty),
        "exp_decreasing" => exp_decreasing(p.n, &p.penalty),
        "exp_blocks" => exp_blocks(p.n, &p.penalty),
        "exp_lower_bound" => exp_lower_bound(
            p.n1.ok_or_else(|| missing("n1"))?,
            p.eps.as_ref().ok_or_else(|| missing("eps"))?,
            &p.penalty,
        )
        .map(|g| g.instance),
        "concluding_alternating" => concluding_alternating(p.n, &p.penalty),
        other => Err(Error::UnknownName(other.to_string())),
    }
}

fn check(n: usize, c: &Q) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParams("n must be at least 1".into()));
    }
    if c < &Q::one() {
        return Err(Error::InvalidParams(format!("penalty {} is below 1", fmt_rational(c))));
    }
    Ok(())
}

/// `0` w.p. `1 - 1/C`, `0.4` and `0.61` w.p. `1/2C` each.
pub fn three_point_law(c: &Q) -> Result<SizeDistribution> {
    let half = Q::one() / (qi(2) * c);
    let mut pairs = vec![(q(2, 5), half.clone()), (q(61, 100), half)];
    let zero = Q::one() - Q::one() / c;
    if !zero.is_zero() {
        pairs.push((Q::zero(), zero));
    }
    SizeDistribution::discrete(pairs)
}

pub fn three_point(n: usize, c: &Q) -> Result<Instance> {
    check(n, c)?;
    Instance::iid(three_point_law(c)?, n, c.clone(), Q::one())
}

/// Sizes `Bernoulli(1/C)`.
pub fn bernoulli(n: usize, c: &Q) -> Result<Instance> {
    check(n, c)?;
    Instance::iid(SizeDistribution::bernoulli(Q::one() / c, Q::one())?, n, c.clone(), Q::one())
}

fn big_or_tiny(n: usize, p_big: Q) -> Result<SizeDistribution> {
    let tiny = q(1, n as i64);
    if p_big.is_one() {
        return SizeDistribution::point(Q::one());
    }
    SizeDistribution::discrete(vec![(Q::one(), p_big.clone()), (tiny, Q::one() - p_big)])
}

/// `1` w.p. `1/C`, else `1/n`.
pub fn example1(n: usize, c: &Q) -> Result<Instance> {
    check(n, c)?;
    Instance::iid(big_or_tiny(n, Q::one() / c)?, n, c.clone(), Q::one())
}

/// `0` w.p. `1 - 1/C`, `α` and `1 - α/2` w.p. `1/2C` each.
pub fn example3(n: usize, c: &Q, alpha: &Q) -> Result<Instance> {
    check(n, c)?;
    if alpha <= &Q::zero() || alpha >= &Q::one() {
        return Err(Error::InvalidParams("alpha must lie in (0, 1)".into()));
    }
    let half = Q::one() / (qi(2) * c);
    let mut pairs = vec![(alpha.clone(), half.clone()), (Q::one() - alpha / qi(2), half)];
    let zero = Q::one() - Q::one() / c;
    if !zero.is_zero() {
        pairs.push((Q::zero(), zero));
    }
    Instance::iid(SizeDistribution::discrete(pairs)?, n, c.clone(), Q::one())
}

/// `1` w.p. `1/C²`, else `1/n`.
pub fn example4(n: usize, c: &Q) -> Result<Instance> {
    check(n, c)?;
    Instance::iid(big_or_tiny(n, Q::one() / (c * c))?, n, c.clone(), Q::one())
}

fn exp_schedule(n: usize, c: &Q, rate: impl Fn(usize) -> f64) -> Result<Instance> {
    check(n, c)?;
    if c.is_one() {
        return Err(Error::InvalidParams("exponential schedules need C > 1".into()));
    }
    let items = (0..n).map(|i| SizeDistribution::exponential(rate(i))).collect::<Result<Vec<_>>>()?;
    Instance::new(items, c.clone(), Q::one())
}

fn ramp(i: usize, n: usize) -> f64 {
    if n == 1 {
        0.0
    } else {
        2.0 * i as f64 / (n - 1) as f64
    }
}

/// Rates rising linearly from `ln C` to `3 ln C`.
pub fn exp_increasing(n: usize, c: &Q) -> Result<Instance> {
    let l = to_f64(c).ln();
    exp_schedule(n, c, |i| (1.0 + ramp(i, n)) * l)
}

/// Rates falling linearly from `3 ln C` to `ln C`.
pub fn exp_decreasing(n: usize, c: &Q) -> Result<Instance> {
    let l = to_f64(c).ln();
    exp_schedule(n, c, |i| (3.0 - ramp(i, n)) * l)
}

/// Three sections with rates `ln C`, `2 ln C`, `ln C`.
pub fn exp_blocks(n: usize, c: &Q) -> Result<Instance> {
    let l = to_f64(c).ln();
    let (a, b) = (n / 3, 2 * n / 3);
    exp_schedule(n, c, |i| if i < a || i >= b { l } else { 2.0 * l })
}

#[derive(Clone, Debug)]
pub struct LowerBoundInstance {
    pub instance: Instance,
    pub beta: f64,
    pub mu: f64,
    pub lambda: f64,
    pub k: usize,
    /// `48 n1 (3ε + 1/(ε ln C))`.
    pub opt_bound: f64,
}

/// `n1` blocks, each `k` items of rate `μ` then one item of rate `λ`, with
/// `β = 6 n1 ln C / ε`, `μ = β ln C`, `k = ⌈3εμ⌉`, `λ = (1+ε) ln C`.
pub fn exp_lower_bound(n1: usize, eps: &Q, c: &Q) -> Result<LowerBoundInstance> {
    check(n1, c)?;
    let e = to_f64(eps);
    if !(e > 0.0 && e < 1.0) {
        return Err(Error::InvalidParams("eps must lie in (0, 1)".into()));
    }
    let l = to_f64(c).ln();
    if e * l < 4.0 {
        return Err(Error::InvalidParams(format!("eps·ln C = {} is below 4", e * l)));
    }
    let beta = 6.0 * n1 as f64 * l / e;
    let mu = beta * l;
    let k = (3.0 * e * mu).ceil().to_usize().unwrap();
    let lambda = (1.0 + e) * l;
    let laws = vec![SizeDistribution::exponential(mu)?, SizeDistribution::exponential(lambda)?];
    let mut law_of = Vec::with_capacity(n1 * (k + 1));
    for _ in 0..n1 {
        law_of.extend(std::iter::repeat(0u32).take(k));
        law_of.push(1);
    }
    Ok(LowerBoundInstance {
        instance: Instance::from_laws(laws, law_of, c.clone(), Q::one())?,
        beta,
        mu,
        lambda,
        k,
        opt_bound: 48.0 * n1 as f64 * (3.0 * e + 1.0 / (e * l)),
    })
}

/// `X_1 = 1/n`, then alternating `Bernoulli(1/C)` and `1` w.p. `1/C²` else
/// `1/n`.
pub fn concluding_alternating(n: usize, c: &Q) -> Result<Instance> {
    check(n, c)?;
    let mut items = vec![SizeDistribution::point(q(1, n as i64))?];
    let even = SizeDistribution::bernoulli(Q::one() / c, Q::one())?;
    let odd = big_or_tiny(n, Q::one() / (c * c))?;
    for i in 2..=n {
        items.push(if i % 2 == 0 { even.clone() } else { odd.clone() });
    }
    Instance::new(items, c.clone(), Q::one())
}
