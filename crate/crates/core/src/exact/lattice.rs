//! Discrete instances on an integer grid.

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::num::{lcm_denominators, Q};

/// All sizes and the capacity multiplied by the lcm of their denominators.
/// The same factor [`Instance::compile`] uses, so scaled usages here equal
/// the engine's floating-point usages.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub scale: BigInt,
    pub cap: i64,
    pub penalty: Q,
    /// Per law: `(scaled value, probability)`, ascending by value.
    pub laws: Vec<Vec<(i64, Q)>>,
    pub law_of: Vec<u32>,
}

impl Lattice {
    pub fn new(inst: &Instance) -> Result<Self> {
        if let Some(i) = inst.first_non_discrete() {
            return Err(Error::NonDiscreteItem(i));
        }
        let mut values = vec![inst.capacity()];
        for d in inst.laws() {
            values.extend(d.atoms().unwrap().iter().map(|a| &a.value));
        }
        let scale = lcm_denominators(values);
        let sq = Q::from_integer(scale.clone());
        let int = |x: &Q| -> Result<i64> {
            (x * &sq)
                .to_integer()
                .to_i64()
                .filter(|v| v.checked_mul(4).is_some())
                .ok_or_else(|| Error::InstanceTooLarge("scaled sizes exceed 64-bit range".into()))
        };
        let cap = int(inst.capacity())?;
        let mut laws = Vec::new();
        for d in inst.laws() {
            let mut atoms = Vec::new();
            for a in d.atoms().unwrap() {
                atoms.push((int(&a.value)?, a.prob.clone()));
            }
            laws.push(atoms);
        }
        Ok(Self { scale, cap, penalty: inst.penalty().clone(), laws, law_of: inst.law_indices().to_vec() })
    }

    pub fn len(&self) -> usize {
        self.law_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.law_of.is_empty()
    }

    pub fn atoms(&self, t: usize) -> &[(i64, Q)] {
        &self.laws[self.law_of[t] as usize]
    }

    /// `P(X_t + usage > cap)`.
    pub fn overflow(&self, t: usize, usage: i64) -> Q {
        self.atoms(t).iter().filter(|(v, _)| usage + v > self.cap).map(|(_, p)| p).sum()
    }

    pub fn to_q(&self, scaled: i64) -> Q {
        Q::new(BigInt::from(scaled), self.scale.clone())
    }
}
