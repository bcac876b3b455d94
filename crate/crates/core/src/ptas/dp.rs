//! Optimal policy for discretized items over level vectors.
//!
//! A state counts the live bins at each usage level `j · unit`. Bins whose
//! usage passes the capacity pay `C` and leave the state.

use std::collections::HashMap;

use num_traits::{One, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::num::{fmt_rational, Q};
use crate::ptas::discretize::{level_of, DiscretizationParams};

/// Round index and the nonzero counts `(level, count)` sorted by level.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LevelVector {
    pub t: u32,
    counts: Vec<(u32, u32)>,
}

impl LevelVector {
    pub fn empty(t: u32) -> Self {
        Self { t, counts: Vec::new() }
    }

    /// Builds the canonical form from any list of bin levels.
    pub fn from_levels(t: u32, levels: impl IntoIterator<Item = u32>) -> Self {
        let mut v: Vec<u32> = levels.into_iter().collect();
        v.sort_unstable();
        let mut counts: Vec<(u32, u32)> = Vec::new();
        for l in v {
            match counts.last_mut() {
                Some((j, k)) if *j == l => *k += 1,
                _ => counts.push((l, 1)),
            }
        }
        Self { t, counts }
    }

    pub fn count(&self, level: u32) -> u32 {
        self.counts.binary_search_by_key(&level, |c| c.0).map(|i| self.counts[i].1).unwrap_or(0)
    }

    pub fn nonzero(&self) -> &[(u32, u32)] {
        &self.counts
    }

    pub fn bins(&self) -> u32 {
        self.counts.iter().map(|c| c.1).sum()
    }

    /// `k_0 .. k_r`.
    pub fn dense(&self, r: usize) -> Vec<u32> {
        let mut v = vec![0; r + 1];
        for &(j, k) in &self.counts {
            if (j as usize) <= r {
                v[j as usize] = k;
            }
        }
        v
    }

    fn add(&mut self, level: u32, delta: i32) {
        match self.counts.binary_search_by_key(&level, |c| c.0) {
            Ok(i) => {
                let k = self.counts[i].1 as i32 + delta;
                if k == 0 {
                    self.counts.remove(i);
                } else {
                    self.counts[i].1 = k as u32;
                }
            }
            Err(i) => {
                debug_assert!(delta > 0);
                self.counts.insert(i, (level, delta as u32));
            }
        }
    }

    /// Next-round state after the action, with the bin at `to` unless it broke.
    fn step(&self, from: Option<u32>, to: Option<u32>) -> Self {
        let mut s = Self { t: self.t + 1, counts: self.counts.clone() };
        if let Some(j) = from {
            s.add(j, -1);
        }
        if let Some(j) = to {
            s.add(j, 1);
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PtasAction {
    Open,
    /// Any live bin at this level.
    Use(u32),
}

/// Optimal action per visited state, tied to the parameters that built it.
#[derive(Clone, Debug)]
pub struct PtasTable {
    pub params: DiscretizationParams,
    pub capacity: Q,
    pub entries: HashMap<LevelVector, PtasAction>,
}

impl PtasTable {
    pub fn get(&self, s: &LevelVector) -> Option<PtasAction> {
        self.entries.get(s).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn check_params(&self, params: &DiscretizationParams) -> Result<()> {
        if &self.params != params {
            return Err(Error::ParamsMismatch);
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let mut keys: Vec<&LevelVector> = self.entries.keys().collect();
        keys.sort();
        let entries: Vec<Value> = keys
            .into_iter()
            .map(|k| {
                let action = match self.entries[k] {
                    PtasAction::Open => json!("open"),
                    PtasAction::Use(j) => json!({ "use": j }),
                };
                json!({ "t": k.t, "levels": k.counts, "action": action })
            })
            .collect();
        json!({
            "params": self.params.to_json(),
            "unit": fmt_rational(&self.params.unit()),
            "capacity": fmt_rational(&self.capacity),
            "entries": entries,
        })
    }

    /// Fails with `ParamsMismatch` unless the file was written under `params`.
    pub fn from_json(v: &Value, params: &DiscretizationParams) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("ptas table: {m}"));
        let stored = DiscretizationParams::from_json(&v["params"])?;
        if &stored != params {
            return Err(Error::ParamsMismatch);
        }
        let capacity = crate::num::parse_rational(v["capacity"].as_str().ok_or_else(|| bad("missing capacity"))?)?;
        let mut entries = HashMap::new();
        for e in v["entries"].as_array().ok_or_else(|| bad("missing entries"))? {
            let t = e["t"].as_u64().ok_or_else(|| bad("missing t"))? as u32;
            let counts: Vec<(u32, u32)> = serde_json::from_value(e["levels"].clone())?;
            let s = LevelVector::from_levels(t, counts.iter().flat_map(|&(j, k)| std::iter::repeat(j).take(k as usize)));
            if s.counts != counts {
                return Err(bad("levels are not canonical"));
            }
            let action = match &e["action"] {
                Value::String(a) if a == "open" => PtasAction::Open,
                a => PtasAction::Use(a["use"].as_u64().ok_or_else(|| bad("bad action"))? as u32),
            };
            entries.insert(s, action);
        }
        Ok(Self { params: stored, capacity, entries })
    }
}

#[derive(Clone, Debug)]
pub struct PtasSolution {
    pub value: Q,
    pub table: PtasTable,
}

/// Atoms of each item in levels.
pub(crate) fn level_atoms(inst: &Instance, unit: &Q) -> Result<Vec<Vec<(u32, Q)>>> {
    (0..inst.len())
        .map(|t| {
            let atoms = inst.item(t).atoms().ok_or(Error::NonDiscreteItem(t))?;
            atoms
                .iter()
                .map(|a| {
                    let l = level_of(&a.value, unit)?;
                    let l = u32::try_from(l).map_err(|_| Error::InvalidParams("level out of range".into()))?;
                    Ok((l, a.prob.clone()))
                })
                .collect()
        })
        .collect()
}

struct Solver {
    atoms: Vec<Vec<(u32, Q)>>,
    cap: u32,
    penalty: Q,
    memo: HashMap<LevelVector, (Q, PtasAction)>,
    limit: usize,
}

impl Solver {
    /// Expected cost of putting item `t` on a bin at `from` (`None` = new).
    fn branch(&mut self, s: &LevelVector, from: Option<u32>) -> Result<Q> {
        let t = s.t as usize;
        let base = from.unwrap_or(0);
        let mut acc = Q::zero();
        for k in 0..self.atoms[t].len() {
            let (x, p) = self.atoms[t][k].clone();
            let to = base as u64 + x as u64;
            let (next, c) = if to > self.cap as u64 {
                (s.step(from, None), self.penalty.clone())
            } else {
                (s.step(from, Some(to as u32)), Q::zero())
            };
            acc += p * (c + self.value(next)?);
        }
        Ok(acc)
    }

    fn value(&mut self, s: LevelVector) -> Result<Q> {
        if s.t as usize == self.atoms.len() {
            return Ok(Q::zero());
        }
        if let Some((v, _)) = self.memo.get(&s) {
            return Ok(v.clone());
        }
        if self.memo.len() >= self.limit {
            return Err(Error::StateSpaceTooLarge { limit: self.limit });
        }
        let mut best: Option<(Q, PtasAction)> = None;
        let levels: Vec<u32> = s.counts.iter().map(|c| c.0).collect();
        for j in levels {
            let v = self.branch(&s, Some(j))?;
            if best.as_ref().map_or(true, |b| v < b.0) {
                best = Some((v, PtasAction::Use(j)));
            }
        }
        let v = Q::one() + self.branch(&s, None)?;
        if best.as_ref().map_or(true, |b| v < b.0) {
            best = Some((v, PtasAction::Open));
        }
        let best = best.unwrap();
        self.memo.insert(s, best.clone());
        Ok(best.0)
    }
}

/// Optimum for discretized items into bins of size `capacity` (in units of
/// the normalized capacity).
pub fn ptas_dp_at(inst_hat: &Instance, params: &DiscretizationParams, capacity: &Q, max_states: usize) -> Result<PtasSolution> {
    let unit = params.unit();
    let atoms = level_atoms(inst_hat, &unit)?;
    let cap = (capacity / &unit).floor().to_integer();
    let cap = u32::try_from(cap).map_err(|_| Error::InvalidParams("capacity has too many levels".into()))?;
    let mut solver = Solver { atoms, cap, penalty: inst_hat.penalty().clone(), memo: HashMap::new(), limit: max_states };
    let value = solver.value(LevelVector::empty(0))?;
    let entries = solver.memo.into_iter().map(|(k, (_, a))| (k, a)).collect();
    Ok(PtasSolution { value, table: PtasTable { params: params.clone(), capacity: capacity.clone(), entries } })
}

/// Optimum at bin size `1 + 4ε`.
pub fn ptas_dp(inst_hat: &Instance, params: &DiscretizationParams, max_states: usize) -> Result<PtasSolution> {
    ptas_dp_at(inst_hat, params, &params.dp_capacity(), max_states)
}
