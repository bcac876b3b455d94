//! Item-size laws and the probability computations on them.

use std::fmt;

use num_traits::{One, Signed, Zero};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::num::{fmt_rational, from_f64, parse_rational, to_f64, Q};

/// One support point of a finite discrete law.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub value: Q,
    pub prob: Q,
}

/// A nonnegative item-size law.
#[derive(Clone, Debug, PartialEq)]
pub enum SizeDistribution {
    /// Atoms sorted by value, merged, with probabilities summing to one.
    FiniteDiscrete(Vec<Atom>),
    Exponential { rate: f64 },
}

/// A value that is exact for discrete laws and floating point otherwise.
#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    Exact(Q),
    Float(f64),
}

impl Scalar {
    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(x) => to_f64(x),
            Scalar::Float(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<&Q> {
        match self {
            Scalar::Exact(x) => Some(x),
            Scalar::Float(_) => None,
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(x) => write!(f, "{}", fmt_rational(x)),
            Scalar::Float(x) => write!(f, "{x}"),
        }
    }
}

impl SizeDistribution {
    /// Validates and canonicalizes `(value, prob)` pairs.
    pub fn discrete(pairs: Vec<(Q, Q)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::ProbabilitySumNotOne("0".into()));
        }
        let mut total = Q::zero();
        for (v, p) in &pairs {
            if v.is_negative() {
                return Err(Error::NegativeValue(fmt_rational(v)));
            }
            if !p.is_positive() {
                return Err(Error::NonPositiveProbability(fmt_rational(p)));
            }
            total += p;
        }
        if !total.is_one() {
            return Err(Error::ProbabilitySumNotOne(fmt_rational(&total)));
        }
        let mut sorted = pairs;
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        let mut atoms: Vec<Atom> = Vec::with_capacity(sorted.len());
        for (value, prob) in sorted {
            match atoms.last_mut() {
                Some(last) if last.value == value => last.prob += prob,
                _ => atoms.push(Atom { value, prob }),
            }
        }
        Ok(SizeDistribution::FiniteDiscrete(atoms))
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::NonPositiveRate(rate));
        }
        Ok(SizeDistribution::Exponential { rate })
    }

    pub fn point(value: Q) -> Result<Self> {
        Self::discrete(vec![(value, Q::one())])
    }

    /// `size` with probability `p`, zero otherwise.
    pub fn bernoulli(p: Q, size: Q) -> Result<Self> {
        if p.is_one() {
            return Self::point(size);
        }
        Self::discrete(vec![(Q::zero(), Q::one() - &p), (size, p)])
    }

    pub fn atoms(&self) -> Option<&[Atom]> {
        match self {
            SizeDistribution::FiniteDiscrete(a) => Some(a),
            SizeDistribution::Exponential { .. } => None,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, SizeDistribution::FiniteDiscrete(_))
    }

    /// `P(X > slack)`, exact for discrete laws.
    pub fn tail(&self, slack: &Q) -> Scalar {
        match self {
            SizeDistribution::FiniteDiscrete(atoms) => {
                Scalar::Exact(atoms.iter().filter(|a| &a.value > slack).map(|a| &a.prob).sum())
            }
            SizeDistribution::Exponential { rate } => {
                let s = to_f64(slack);
                Scalar::Float(if s < 0.0 { 1.0 } else { (-rate * s).exp() })
            }
        }
    }

    /// `P(X + used > cap)`. A size exactly filling the bin does not overflow.
    pub fn overflow_prob(&self, used: &Q, cap: &Q) -> Result<Scalar> {
        if used > cap {
            return Err(Error::UsedExceedsCapacity { used: fmt_rational(used), cap: fmt_rational(cap) });
        }
        Ok(self.tail(&(cap - used)))
    }

    /// `E[min(X, cap)]`.
    pub fn truncated_mean(&self, cap: &Q) -> Scalar {
        match self {
            SizeDistribution::FiniteDiscrete(atoms) => Scalar::Exact(
                atoms.iter().map(|a| if &a.value < cap { &a.value * &a.prob } else { cap * &a.prob }).sum(),
            ),
            SizeDistribution::Exponential { rate } => Scalar::Float((-(-rate * to_f64(cap)).exp_m1()) / rate),
        }
    }

    pub fn mean(&self) -> Scalar {
        match self {
            SizeDistribution::FiniteDiscrete(atoms) => {
                Scalar::Exact(atoms.iter().map(|a| &a.value * &a.prob).sum())
            }
            SizeDistribution::Exponential { rate } => Scalar::Float(1.0 / rate),
        }
    }

    /// Index of the atom selected by the uniform draw `u ∈ [0,1)` under the
    /// cumulative inverse, compared exactly.
    pub fn atom_index_for(&self, u: f64) -> Option<usize> {
        let atoms = self.atoms()?;
        let u = from_f64(u);
        let mut cum = Q::zero();
        for (k, a) in atoms.iter().enumerate() {
            cum += &a.prob;
            if u < cum {
                return Some(k);
            }
        }
        Some(atoms.len() - 1)
    }

    /// Inverse-CDF transform of one uniform draw.
    pub fn quantile(&self, u: f64) -> Scalar {
        match self {
            SizeDistribution::FiniteDiscrete(atoms) => {
                Scalar::Exact(atoms[self.atom_index_for(u).unwrap()].value.clone())
            }
            SizeDistribution::Exponential { rate } => Scalar::Float(-(-u).ln_1p() / rate),
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> Scalar {
        self.quantile(rng.uniform())
    }

    /// Parses the compact text form: `exp:RATE`, `point:V`,
    /// `bernoulli:P` (size 1), or `discrete:V@P,V@P,...`.
    pub fn parse(text: &str) -> Result<Self> {
        let (kind, rest) = text
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("distribution spec needs KIND:PARAMS, got {text:?}")))?;
        match kind.trim() {
            "exp" | "exponential" => {
                let rate: f64 = rest.trim().parse().map_err(|_| Error::Parse(format!("bad rate {rest:?}")))?;
                Self::exponential(rate)
            }
            "point" => Self::point(parse_rational(rest)?),
            "bernoulli" => Self::bernoulli(parse_rational(rest)?, Q::one()),
            "discrete" => {
                let mut pairs = Vec::new();
                for part in rest.split(',') {
                    let (v, p) = part
                        .split_once('@')
                        .ok_or_else(|| Error::Parse(format!("atom needs VALUE@PROB, got {part:?}")))?;
                    pairs.push((parse_rational(v)?, parse_rational(p)?));
                }
                Self::discrete(pairs)
            }
            other => Err(Error::Parse(format!("unknown distribution kind {other:?}"))),
        }
    }

    /// Structured form: `{"discrete": [["0.4", "1/100"], ...]}` or
    /// `{"exponential": "3.91"}`. Strings or JSON numbers are accepted. A
    /// bare string is read with [`SizeDistribution::parse`].
    pub fn from_json(v: &Value) -> Result<Self> {
        if let Value::String(s) = v {
            return Self::parse(s);
        }
        let obj = v.as_object().ok_or_else(|| Error::Parse("distribution must be an object".into()))?;
        if let Some(atoms) = obj.get("discrete") {
            let arr = atoms.as_array().ok_or_else(|| Error::Parse("discrete atoms must be an array".into()))?;
            let mut pairs = Vec::with_capacity(arr.len());
            for a in arr {
                let pair = a.as_array().filter(|p| p.len() == 2).ok_or_else(|| {
                    Error::Parse("each atom must be a [value, prob] pair".into())
                })?;
                pairs.push((json_rational(&pair[0])?, json_rational(&pair[1])?));
            }
            return Self::discrete(pairs);
        }
        if let Some(rate) = obj.get("exponential") {
            let r = match rate {
                Value::String(s) => s.trim().parse().map_err(|_| Error::Parse(format!("bad rate {s:?}")))?,
                Value::Number(n) => n.as_f64().unwrap_or(f64::NAN),
                _ => return Err(Error::Parse("rate must be a number or string".into())),
            };
            return Self::exponential(r);
        }
        Err(Error::Parse("distribution needs a `discrete` or `exponential` field".into()))
    }

    pub fn to_json(&self) -> Value {
        match self {
            SizeDistribution::FiniteDiscrete(atoms) => json!({
                "discrete": atoms.iter().map(|a| json!([fmt_rational(&a.value), fmt_rational(&a.prob)])).collect::<Vec<_>>()
            }),
            SizeDistribution::Exponential { rate } => json!({ "exponential": format!("{rate}") }),
        }
    }
}

pub(crate) fn json_rational(v: &Value) -> Result<Q> {
    match v {
        Value::String(s) => parse_rational(s),
        Value::Number(n) => parse_rational(&n.to_string()),
        _ => Err(Error::Parse(format!("expected a rational, got {v}"))),
    }
}

/// Seeded generator. Equal `(seed, stream)` pairs give equal sequences.
#[derive(Clone, Debug)]
pub struct Rng {
    inner: ChaCha8Rng,
    seed: u64,
    stream: u64,
}

impl Rng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner, seed, stream }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.inner.gen_range(0..n)
    }
}
