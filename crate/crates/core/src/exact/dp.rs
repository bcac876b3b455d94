//! Offline sequential optimum and related exact dynamic programs.
//!
//! A state is the round index and the sorted usages of the live bins
//! (unbroken, usage within capacity). Opening costs 1 when it happens and
//! an overflow costs `C` on the branch where it happens, so broken bins
//! leave the state at once.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::dist::SizeDistribution;
use crate::engine::{Choice, View};
use crate::error::{Error, Result};
use crate::exact::lattice::Lattice;
use crate::instance::{CompiledInstance, Instance};
use crate::num::{fmt_rational, parse_rational, Gamma, Q};
use crate::policies::Policy;

pub const DEFAULT_MAX_STATES: usize = 10_000_000;

/// A DP action. `Use` names a bin by its scaled usage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TableAction {
    Open,
    Use(i64),
}

type Key = (u32, Vec<i64>);

/// Optimal action per reachable state.
#[derive(Clone, Debug)]
pub struct ActionTable {
    pub scale: BigInt,
    pub entries: HashMap<Key, TableAction>,
}

impl ActionTable {
    pub fn get(&self, t: usize, usages: &[i64]) -> Option<TableAction> {
        self.entries.get(&(t as u32, usages.to_vec())).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `{"scale": D, "entries": [{"t", "usages", "action"}]}` with usages in
    /// original units. Entries are sorted for stable output.
    pub fn to_json(&self) -> Value {
        let sq = Q::from_integer(self.scale.clone());
        let unit = |v: i64| fmt_rational(&(Q::from_integer(BigInt::from(v)) / &sq));
        let mut keys: Vec<&Key> = self.entries.keys().collect();
        keys.sort();
        let entries: Vec<Value> = keys
            .into_iter()
            .map(|k| {
                let action = match self.entries[k] {
                    TableAction::Open => json!("open"),
                    TableAction::Use(u) => json!({ "use": unit(u) }),
                };
                json!({ "t": k.0, "usages": k.1.iter().map(|&u| unit(u)).collect::<Vec<_>>(), "action": action })
            })
            .collect();
        json!({ "scale": self.scale.to_string(), "entries": entries })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("action table: {m}"));
        let scale: BigInt = v["scale"].as_str().and_then(|s| s.parse().ok()).ok_or_else(|| bad("missing scale"))?;
        let sq = Q::from_integer(scale.clone());
        let scaled = |s: &Value| -> Result<i64> {
            let x = parse_rational(s.as_str().ok_or_else(|| bad("usage must be a string"))?)? * &sq;
            if !x.is_integer() {
                return Err(bad("usage off the grid"));
            }
            x.to_integer().to_i64().ok_or_else(|| bad("usage out of range"))
        };
        let mut entries = HashMap::new();
        for e in v["entries"].as_array().ok_or_else(|| bad("missing entries"))? {
            let t = e["t"].as_u64().ok_or_else(|| bad("missing t"))? as u32;
            let usages = e["usages"]
                .as_array()
                .ok_or_else(|| bad("missing usages"))?
                .iter()
                .map(scaled)
                .collect::<Result<Vec<_>>>()?;
            let action = match &e["action"] {
                Value::String(s) if s == "open" => TableAction::Open,
                a => TableAction::Use(scaled(&a["use"])?),
            };
            entries.insert((t, usages), action);
        }
        Ok(Self { scale, entries })
    }
}

#[derive(Clone, Debug)]
pub struct DpSolution {
    pub value: Q,
    pub table: ActionTable,
}

impl DpSolution {
    pub fn states(&self) -> usize {
        self.table.len()
    }
}

fn insert_sorted(s: &[i64], x: i64) -> Vec<i64> {
    let mut v = s.to_vec();
    let at = v.partition_point(|&u| u < x);
    v.insert(at, x);
    v
}

fn remove_at(s: &[i64], k: usize) -> Vec<i64> {
    let mut v = s.to_vec();
    v.remove(k);
    v
}

fn replace_at(s: &[i64], k: usize, x: i64) -> Vec<i64> {
    insert_sorted(&remove_at(s, k), x)
}

struct Optimum<'a> {
    lat: &'a Lattice,
    memo: HashMap<Key, (Q, TableAction)>,
    limit: usize,
}

impl Optimum<'_> {
    fn value(&mut self, t: usize, s: Vec<i64>) -> Result<Q> {
        if t == self.lat.len() {
            return Ok(Q::zero());
        }
        let key = (t as u32, s);
        if let Some((v, _)) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        if self.memo.len() >= self.limit {
            return Err(Error::StateSpaceTooLarge { limit: self.limit });
        }
        let s = &key.1;
        let (lat, cap, c) = (self.lat, self.lat.cap, self.lat.penalty.clone());
        let mut best: Option<(Q, TableAction)> = None;
        let mut k = 0;
        while k < s.len() {
            let u = s[k];
            let mut v = Q::zero();
            for (x, p) in lat.atoms(t) {
                let next =
                    if u + x > cap { &c + self.value(t + 1, remove_at(s, k))? } else { self.value(t + 1, replace_at(s, k, u + x))? };
                v += p * next;
            }
            if best.as_ref().map_or(true, |(b, _)| &v < b) {
                best = Some((v, TableAction::Use(u)));
            }
            while k < s.len() && s[k] == u {
                k += 1;
            }
        }
        let mut v = Q::one();
        for (x, p) in lat.atoms(t) {
            let next = if *x > cap { &c + self.value(t + 1, s.clone())? } else { self.value(t + 1, insert_sorted(s, *x))? };
            v += p * next;
        }
        if best.as_ref().map_or(true, |(b, _)| &v < b) {
            best = Some((v, TableAction::Open));
        }
        let best = best.unwrap();
        self.memo.insert(key, best.clone());
        Ok(best.0)
    }
}

/// Minimum expected cost over all policies, with an optimal action for
/// every state reachable under any policy.
pub fn optimal_cost_dp(inst: &Instance, max_states: usize) -> Result<DpSolution> {
    let lat = Lattice::new(inst)?;
    let mut opt = Optimum { lat: &lat, memo: HashMap::new(), limit: max_states };
    let value = opt.value(0, Vec::new())?;
    let entries = opt.memo.into_iter().map(|(k, (_, a))| (k, a)).collect();
    Ok(DpSolution { value, table: ActionTable { scale: lat.scale, entries } })
}

/// Replays an [`ActionTable`] in the engine.
pub struct TablePolicy {
    table: ActionTable,
    name: String,
}

impl TablePolicy {
    /// Fails when the table's grid differs from the compiled instance's.
    pub fn new(table: ActionTable, compiled: &CompiledInstance) -> Result<Self> {
        if table.scale.to_f64() != Some(compiled.scale) {
            return Err(Error::InvalidPolicy("action table grid does not match the instance".into()));
        }
        Ok(Self { table, name: "dp".into() })
    }
}

impl Policy for TablePolicy {
    /// Unknown states open a bin.
    fn decide(&self, v: &View) -> Choice {
        let mut live: Vec<i64> =
            v.bins.iter().filter(|b| !b.broken && b.usage <= v.cap).map(|b| b.usage as i64).collect();
        live.sort_unstable();
        match self.table.get(v.t, &live) {
            Some(TableAction::Use(u)) => v
                .bins
                .iter()
                .position(|b| !b.broken && b.usage <= v.cap && b.usage as i64 == u)
                .map_or(Choice::Open, Choice::Use),
            _ => Choice::Open,
        }
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Arithmetic used by [`single_bin_optimal_iid`]: exact rationals for small
/// horizons, `f64` for long ones.
pub trait Field: Clone {
    fn from_q(x: &Q) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn min(self, o: Self) -> Self;
}

impl Field for Q {
    fn from_q(x: &Q) -> Self {
        x.clone()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn min(self, o: Self) -> Self {
        std::cmp::min(self, o)
    }
}

impl Field for f64 {
    fn from_q(x: &Q) -> Self {
        crate::num::to_f64(x)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn min(self, o: Self) -> Self {
        f64::min(self, o)
    }
}

pub const DEFAULT_USAGE_LIMIT: usize = 100_000;

/// Reachable usages of a single bin fed i.i.d. items, ascending.
pub fn usage_closure(atoms: &[(i64, Q)], cap: i64, limit: usize) -> Result<Vec<i64>> {
    let mut seen = std::collections::BTreeSet::from([0i64]);
    let mut stack = vec![0i64];
    while let Some(s) = stack.pop() {
        for (x, _) in atoms {
            let u = s + x;
            if u <= cap && seen.insert(u) {
                if seen.len() > limit {
                    return Err(Error::UsageSetTooLarge { limit });
                }
                stack.push(u);
            }
        }
    }
    Ok(seen.into_iter().collect())
}

/// Optimal cost of one-active-bin policies on `k` i.i.d. items, for every
/// `k` in `0..=n`. The active bin is either kept or abandoned for a fresh
/// one before each item; an overflowing bin is abandoned.
pub fn single_bin_optimal_iid<F: Field>(
    d: &SizeDistribution,
    n: usize,
    penalty: &Q,
    cap: &Q,
    usage_limit: usize,
) -> Result<Vec<F>> {
    let inst = Instance::iid(d.clone(), 1, penalty.clone(), cap.clone())?;
    let lat = Lattice::new(&inst)?;
    let atoms = lat.atoms(0);
    let states = usage_closure(atoms, lat.cap, usage_limit)?;
    let index: HashMap<i64, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    const OVER: usize = usize::MAX;
    let step = |s: i64| -> Vec<usize> {
        atoms.iter().map(|(x, _)| if s + x > lat.cap { OVER } else { index[&(s + x)] }).collect()
    };
    let next: Vec<Vec<usize>> = states.iter().map(|&s| step(s)).collect();
    let from_empty: Vec<usize> = atoms.iter().map(|(x, _)| if *x > lat.cap { OVER } else { index[x] }).collect();
    let probs: Vec<F> = atoms.iter().map(|(_, p)| F::from_q(p)).collect();
    let (one, c, zero) = (F::from_q(&Q::one()), F::from_q(penalty), F::from_q(&Q::zero()));

    // w[s]: k items left, active bin at usage states[s]; none: no active bin.
    let mut w: Vec<F> = vec![zero.clone(); states.len()];
    let mut none = zero.clone();
    let mut curve = vec![zero.clone()];
    let expect = |targets: &[usize], w: &[F], none: &F| -> F {
        let mut acc = zero.clone();
        for (k, &to) in targets.iter().enumerate() {
            let v = if to == OVER { c.add(none) } else { w[to].clone() };
            acc = acc.add(&probs[k].mul(&v));
        }
        acc
    };
    for _ in 0..n {
        let open = one.add(&expect(&from_empty, &w, &none));
        let nw: Vec<F> = next.iter().map(|t| expect(t, &w, &none).min(open.clone())).collect();
        w = nw;
        none = open;
        curve.push(none.clone());
    }
    Ok(curve)
}

/// Minimum expected number of opened bins over policies that keep every
/// bin's risk within `γ/C`. A bin whose first item alone exceeds the budget
/// receives nothing else.
pub fn min_opened_budgeted(inst: &Instance, gamma: &Gamma, max_items: usize, max_states: usize) -> Result<Q> {
    if inst.len() > max_items {
        return Err(Error::InstanceTooLarge(format!("{} items, limit {max_items}", inst.len())));
    }
    let lat = Lattice::new(inst)?;
    let mut memo: HashMap<(u32, Vec<(i64, Q)>), Q> = HashMap::new();
    budgeted_value(&lat, gamma, 0, Vec::new(), &mut memo, max_states)
}

fn budgeted_value(
    lat: &Lattice,
    gamma: &Gamma,
    t: usize,
    s: Vec<(i64, Q)>,
    memo: &mut HashMap<(u32, Vec<(i64, Q)>), Q>,
    limit: usize,
) -> Result<Q> {
    if t == lat.len() {
        return Ok(Q::zero());
    }
    let key = (t as u32, s);
    if let Some(v) = memo.get(&key) {
        return Ok(v.clone());
    }
    if memo.len() >= limit {
        return Err(Error::StateSpaceTooLarge { limit });
    }
    let s = &key.1;
    let cap = lat.cap;
    let place = |s: &[(i64, Q)], k: Option<usize>, usage: i64, risk: Q| -> Vec<(i64, Q)> {
        let mut v: Vec<(i64, Q)> = s.to_vec();
        if let Some(k) = k {
            v.remove(k);
        }
        if usage <= cap {
            v.push((usage, risk));
            v.sort();
        }
        v
    };
    let mut best: Option<Q> = None;
    for k in 0..s.len() {
        if k > 0 && s[k] == s[k - 1] {
            continue;
        }
        let (u, r) = &s[k];
        let risk = r + lat.overflow(t, *u);
        if !gamma.admits(&risk, &lat.penalty) {
            continue;
        }
        let mut v = Q::zero();
        for (x, p) in lat.atoms(t) {
            v += p * budgeted_value(lat, gamma, t + 1, place(s, Some(k), u + x, risk.clone()), memo, limit)?;
        }
        if best.as_ref().map_or(true, |b| &v < b) {
            best = Some(v);
        }
    }
    let risk = lat.overflow(t, 0);
    let mut v = Q::one();
    for (x, p) in lat.atoms(t) {
        v += p * budgeted_value(lat, gamma, t + 1, place(s, None, *x, risk.clone()), memo, limit)?;
    }
    if best.as_ref().map_or(true, |b| &v < b) {
        best = Some(v);
    }
    let best = best.unwrap();
    memo.insert(key, best.clone());
    Ok(best)
}
