//! Instances: an ordered item sequence, a penalty and a capacity.
//!
//! Laws are interned so that i.i.d. inputs of length 10^5 store one law.
//! [`CompiledInstance`] is the floating-point view the simulator runs on.

use std::path::Path;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::dist::{json_rational, SizeDistribution};
use crate::error::{Error, Result};
use crate::num::{fmt_rational, lcm_denominators, to_f64, Q};

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    laws: Vec<SizeDistribution>,
    law_of: Vec<u32>,
    penalty: Q,
    capacity: Q,
}

impl Instance {
    pub fn new(items: Vec<SizeDistribution>, penalty: Q, capacity: Q) -> Result<Self> {
        let mut laws: Vec<SizeDistribution> = Vec::new();
        let mut law_of = Vec::with_capacity(items.len());
        for d in items {
            let idx = match laws.iter().position(|l| l == &d) {
                Some(k) => k,
                None => {
                    laws.push(d);
                    laws.len() - 1
                }
            };
            law_of.push(idx as u32);
        }
        Self::from_laws(laws, law_of, penalty, capacity)
    }

    /// `n` copies of one law.
    pub fn iid(d: SizeDistribution, n: usize, penalty: Q, capacity: Q) -> Result<Self> {
        Self::from_laws(vec![d], vec![0; n], penalty, capacity)
    }

    pub fn from_laws(laws: Vec<SizeDistribution>, law_of: Vec<u32>, penalty: Q, capacity: Q) -> Result<Self> {
        if law_of.is_empty() {
            return Err(Error::InvalidInstance("instance has no items".into()));
        }
        if penalty < Q::one() {
            return Err(Error::InvalidInstance(format!("penalty {} is below 1", fmt_rational(&penalty))));
        }
        if !capacity.is_positive() {
            return Err(Error::InvalidInstance(format!("capacity {} is not positive", fmt_rational(&capacity))));
        }
        if law_of.iter().any(|&k| k as usize >= laws.len()) {
            return Err(Error::InvalidInstance("item refers to a missing law".into()));
        }
        Ok(Self { laws, law_of, penalty, capacity })
    }

    pub fn len(&self) -> usize {
        self.law_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.law_of.is_empty()
    }

    pub fn item(&self, i: usize) -> &SizeDistribution {
        &self.laws[self.law_of[i] as usize]
    }

    pub fn items(&self) -> impl Iterator<Item = &SizeDistribution> + '_ {
        self.law_of.iter().map(move |&k| &self.laws[k as usize])
    }

    pub fn law_index(&self, i: usize) -> usize {
        self.law_of[i] as usize
    }

    pub fn laws(&self) -> &[SizeDistribution] {
        &self.laws
    }

    pub fn law_indices(&self) -> &[u32] {
        &self.law_of
    }

    pub fn penalty(&self) -> &Q {
        &self.penalty
    }

    pub fn capacity(&self) -> &Q {
        &self.capacity
    }

    pub fn is_discrete(&self) -> bool {
        self.laws.iter().all(SizeDistribution::is_discrete)
    }

    pub fn is_iid(&self) -> bool {
        let first = self.law_of[0];
        self.law_of.iter().all(|&k| self.laws[k as usize] == self.laws[first as usize])
    }

    /// First index of a non-discrete item, if any.
    pub fn first_non_discrete(&self) -> Option<usize> {
        (0..self.len()).find(|&i| !self.item(i).is_discrete())
    }

    /// The first `k` items (at least one).
    pub fn prefix(&self, k: usize) -> Result<Instance> {
        let k = k.clamp(1, self.len());
        let mut used = vec![false; self.laws.len()];
        for &l in &self.law_of[..k] {
            used[l as usize] = true;
        }
        let mut remap = vec![u32::MAX; self.laws.len()];
        let mut laws = Vec::new();
        for (j, d) in self.laws.iter().enumerate() {
            if used[j] {
                remap[j] = laws.len() as u32;
                laws.push(d.clone());
            }
        }
        let law_of = self.law_of[..k].iter().map(|&l| remap[l as usize]).collect();
        Self::from_laws(laws, law_of, self.penalty.clone(), self.capacity.clone())
    }

    pub fn with_penalty(&self, penalty: Q) -> Result<Instance> {
        Self::from_laws(self.laws.clone(), self.law_of.clone(), penalty, self.capacity.clone())
    }

    pub fn with_capacity(&self, capacity: Q) -> Result<Instance> {
        Self::from_laws(self.laws.clone(), self.law_of.clone(), self.penalty.clone(), capacity)
    }

    /// Run-length encoded JSON: consecutive equal laws share one entry with
    /// a `count` field.
    pub fn to_json(&self) -> Value {
        let mut items = Vec::new();
        let mut i = 0;
        while i < self.len() {
            let mut j = i + 1;
            while j < self.len() && self.law_of[j] == self.law_of[i] {
                j += 1;
            }
            let mut v = self.item(i).to_json();
            if j - i > 1 {
                v.as_object_mut().unwrap().insert("count".into(), json!(j - i));
            }
            items.push(v);
            i = j;
        }
        json!({
            "penalty": fmt_rational(&self.penalty),
            "capacity": fmt_rational(&self.capacity),
            "items": items,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::Parse("instance must be an object".into()))?;
        let penalty = json_rational(obj.get("penalty").ok_or_else(|| Error::Parse("missing penalty".into()))?)?;
        let capacity = match obj.get("capacity") {
            Some(c) => json_rational(c)?,
            None => Q::one(),
        };
        let items = obj
            .get("items")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("missing items array".into()))?;
        let mut laws: Vec<SizeDistribution> = Vec::new();
        let mut law_of = Vec::new();
        for it in items {
            let d = SizeDistribution::from_json(it)?;
            let count = match it.get("count") {
                None => 1,
                Some(c) => c.as_u64().ok_or_else(|| Error::Parse("count must be a positive integer".into()))?,
            };
            let idx = match laws.iter().position(|l| l == &d) {
                Some(k) => k,
                None => {
                    laws.push(d);
                    laws.len() - 1
                }
            };
            law_of.extend(std::iter::repeat(idx as u32).take(count as usize));
        }
        Self::from_laws(laws, law_of, penalty, capacity)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_json())? + "\n")?;
        Ok(())
    }

    /// Floating-point form for simulation. Discrete atoms and the capacity
    /// are scaled by the lcm of their denominators so that bin usages are
    /// integers and every comparison against capacity is exact.
    pub fn compile(&self) -> Result<CompiledInstance> {
        let mut values: Vec<&Q> = vec![&self.capacity];
        let mut max_atom = Q::zero();
        for d in &self.laws {
            if let Some(atoms) = d.atoms() {
                for a in atoms {
                    values.push(&a.value);
                    if a.value > max_atom {
                        max_atom = a.value.clone();
                    }
                }
            }
        }
        let scale = lcm_denominators(values);
        let limit = BigInt::from(1u64 << 53);
        let top = (&self.capacity + &max_atom) * Q::from_integer(scale.clone());
        if top.to_integer() >= limit {
            return Err(Error::NotSimulable(format!(
                "scaled sizes reach {} which is not exact in f64",
                top.to_integer()
            )));
        }
        let scale_f = scale.to_f64().unwrap();
        let scale_q = Q::from_integer(scale);
        let laws = self
            .laws
            .iter()
            .map(|d| match d {
                SizeDistribution::FiniteDiscrete(atoms) => {
                    let values: Vec<f64> = atoms.iter().map(|a| to_f64(&(&a.value * &scale_q))).collect();
                    let mut suffix = vec![0.0; atoms.len() + 1];
                    let mut acc = Q::zero();
                    for k in (0..atoms.len()).rev() {
                        acc += &atoms[k].prob;
                        suffix[k] = to_f64(&acc);
                    }
                    let mut cum = Vec::with_capacity(atoms.len());
                    let mut c = Q::zero();
                    for a in atoms {
                        c += &a.prob;
                        cum.push(to_f64(&c));
                    }
                    *cum.last_mut().unwrap() = f64::INFINITY;
                    CompiledLaw::Discrete { values, suffix, cum }
                }
                SizeDistribution::Exponential { rate } => CompiledLaw::Exponential { rate: rate / scale_f },
            })
            .collect();
        Ok(CompiledInstance {
            laws,
            law_of: self.law_of.clone(),
            cap: to_f64(&(&self.capacity * &scale_q)),
            scale: scale_f,
            penalty: to_f64(&self.penalty),
        })
    }
}

/// A law in scaled units.
#[derive(Clone, Debug)]
pub enum CompiledLaw {
    /// `suffix[k]` is `P(X >= values[k])`; `cum[k]` is `P(X <= values[k])`
    /// with the last entry forced to infinity.
    Discrete { values: Vec<f64>, suffix: Vec<f64>, cum: Vec<f64> },
    Exponential { rate: f64 },
}

impl CompiledLaw {
    /// `P(X > slack)`.
    #[inline]
    pub fn tail(&self, slack: f64) -> f64 {
        match self {
            CompiledLaw::Discrete { values, suffix, .. } => suffix[values.partition_point(|&v| v <= slack)],
            CompiledLaw::Exponential { rate } => {
                if slack <= 0.0 {
                    1.0
                } else {
                    (-rate * slack).exp()
                }
            }
        }
    }

    /// Maps one uniform draw to a scaled size.
    #[inline]
    pub fn draw(&self, u: f64) -> f64 {
        match self {
            CompiledLaw::Discrete { values, cum, .. } => values[cum.partition_point(|&c| c <= u)],
            CompiledLaw::Exponential { rate } => -(-u).ln_1p() / rate,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, CompiledLaw::Discrete { .. })
    }
}

#[derive(Clone, Debug)]
pub struct CompiledInstance {
    pub laws: Vec<CompiledLaw>,
    pub law_of: Vec<u32>,
    /// Capacity in scaled units.
    pub cap: f64,
    /// Sizes in scaled units are original sizes times `scale`.
    pub scale: f64,
    pub penalty: f64,
}

impl CompiledInstance {
    pub fn len(&self) -> usize {
        self.law_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.law_of.is_empty()
    }

    pub fn law(&self, i: usize) -> &CompiledLaw {
        &self.laws[self.law_of[i] as usize]
    }
}
