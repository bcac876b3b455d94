//! Discounted single-bin MDP for i.i.d. finite-support items and the
//! threshold policy it induces.
//!
//! The state is the usage of the one active bin, or the absorbing overflow
//! state `1⁺`. Action `continue` packs the next item into the active bin;
//! action `open` starts a fresh bin with it.

use std::collections::{BTreeSet, HashMap};

use num_traits::Zero;
use serde::Serialize;

use crate::dist::SizeDistribution;
use crate::error::{Error, Result};
use crate::num::{fmt_rational, to_f64, Q};

#[derive(Clone, Debug)]
pub struct MdpStateSpace {
    /// Reachable usages at most the capacity, ascending. Index
    /// `states.len()` stands for `1⁺`.
    pub states: Vec<Q>,
    /// `next[s][k]`: state after adding atom `k` to state `s` (`1⁺` stays).
    pub next: Vec<Vec<usize>>,
    pub probs: Vec<f64>,
    /// `C · P(X + s > cap)` per state, `C` at `1⁺`.
    pub continue_cost: Vec<f64>,
    /// `1 + C · P(X > cap)`.
    pub open_cost: f64,
}

impl MdpStateSpace {
    pub fn plus(&self) -> usize {
        self.states.len()
    }

    pub fn len(&self) -> usize {
        self.states.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub fn build_state_space(d: &SizeDistribution, penalty: &Q, cap: &Q, cap_states: usize) -> Result<MdpStateSpace> {
    let atoms = d.atoms().ok_or(Error::NonDiscreteItem(0))?;
    let mut seen: BTreeSet<Q> = BTreeSet::new();
    seen.insert(Q::zero());
    let mut frontier = vec![Q::zero()];
    while let Some(s) = frontier.pop() {
        for a in atoms {
            let u = &s + &a.value;
            if &u <= cap && !seen.contains(&u) {
                if seen.len() >= cap_states {
                    return Err(Error::StateSpaceTooLarge { limit: cap_states });
                }
                seen.insert(u.clone());
                frontier.push(u);
            }
        }
    }
    let states: Vec<Q> = seen.into_iter().collect();
    let index: HashMap<&Q, usize> = states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let plus = states.len();
    let mut next = Vec::with_capacity(plus + 1);
    let mut continue_cost = Vec::with_capacity(plus + 1);
    let c = to_f64(penalty);
    for s in &states {
        next.push(
            atoms
                .iter()
                .map(|a| {
                    let u = s + &a.value;
                    if &u <= cap {
                        index[&u]
                    } else {
                        plus
                    }
                })
                .collect(),
        );
        let over: Q = atoms.iter().filter(|a| &(s + &a.value) > cap).map(|a| &a.prob).sum();
        continue_cost.push(to_f64(&(penalty * over)));
    }
    next.push(vec![plus; atoms.len()]);
    continue_cost.push(c);
    let open_over: Q = atoms.iter().filter(|a| &a.value > cap).map(|a| &a.prob).sum();
    Ok(MdpStateSpace {
        states,
        next,
        probs: atoms.iter().map(|a| to_f64(&a.prob)).collect(),
        continue_cost,
        open_cost: 1.0 + to_f64(&(penalty * open_over)),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ValueTable {
    pub values: Vec<f64>,
    pub discount: f64,
    /// Sup-norm change of each sweep.
    pub residuals: Vec<f64>,
}

impl ValueTable {
    pub fn residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn iterations(&self) -> usize {
        self.residuals.len()
    }
}

fn q_continue(space: &MdpStateSpace, v: &[f64], discount: f64, s: usize) -> f64 {
    let ev: f64 = space.next[s].iter().zip(&space.probs).map(|(&n, p)| p * v[n]).sum();
    space.continue_cost[s] + discount * ev
}

/// Opening is continuing from an empty bin plus one bin.
fn q_open(space: &MdpStateSpace, v: &[f64], discount: f64) -> f64 {
    space.open_cost - space.continue_cost[0] + q_continue(space, v, discount, 0)
}

/// Iterates the Bellman operator from `V ≡ 0` until the sup-norm change is
/// below `tol`.
pub fn value_iteration(space: &MdpStateSpace, discount: f64, tol: f64) -> Result<ValueTable> {
    if !(discount > 0.0 && discount < 1.0) || !(tol > 0.0) {
        return Err(Error::InvalidParams(format!("discount {discount} or tol {tol} out of range")));
    }
    let mut v = vec![0.0; space.len()];
    let mut residuals = Vec::new();
    loop {
        let open = q_open(space, &v, discount);
        let nv: Vec<f64> = (0..space.len()).map(|s| q_continue(space, &v, discount, s).min(open)).collect();
        let r = nv.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = nv;
        residuals.push(r);
        if r < tol {
            break;
        }
    }
    Ok(ValueTable { values: v, discount, residuals })
}

/// Tie tolerance between the two Bellman branches.
pub const TIE_TOL: f64 = 1e-9;

/// `true` where continuing is optimal, ties included.
pub fn continue_set(space: &MdpStateSpace, table: &ValueTable) -> Vec<bool> {
    let open = q_open(space, &table.values, table.discount);
    (0..space.len()).map(|s| q_continue(space, &table.values, table.discount, s) <= open + TIE_TOL).collect()
}

/// Largest usage state (not `1⁺`) where continuing is optimal.
pub fn extract_threshold(space: &MdpStateSpace, table: &ValueTable) -> Q {
    let cont = continue_set(space, table);
    (0..space.plus()).rev().find(|&s| cont[s]).map(|s| space.states[s].clone()).unwrap_or_else(Q::zero)
}

#[derive(Clone, Debug)]
pub struct MdpOptions {
    pub discount: f64,
    pub tol: f64,
    pub cap_states: usize,
}

impl Default for MdpOptions {
    fn default() -> Self {
        Self { discount: 0.999, tol: 1e-10, cap_states: 100_000 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdReport {
    #[serde(serialize_with = "ser_q")]
    pub alpha: Q,
    pub states: usize,
    pub iterations: usize,
    pub residual: f64,
    /// Continue states form a prefix of the sorted usages.
    pub interval: bool,
    pub monotone: bool,
}

fn ser_q<S: serde::Serializer>(x: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_rational(x))
}

impl ThresholdReport {
    /// The threshold as a fraction of the capacity.
    pub fn alpha_fraction(&self, cap: &Q) -> Q {
        &self.alpha / cap
    }
}

pub fn threshold(d: &SizeDistribution, penalty: &Q, cap: &Q, opts: &MdpOptions) -> Result<ThresholdReport> {
    let space = build_state_space(d, penalty, cap, opts.cap_states)?;
    let table = value_iteration(&space, opts.discount, opts.tol)?;
    let cont = continue_set(&space, &table);
    let first_open = cont[..space.plus()].iter().position(|c| !c).unwrap_or(space.plus());
    let interval = cont[first_open..space.plus()].iter().all(|c| !c);
    let monotone = table.values.windows(2).all(|w| w[0] <= w[1] + TIE_TOL);
    Ok(ThresholdReport {
        alpha: extract_threshold(&space, &table),
        states: space.len(),
        iterations: table.iterations(),
        residual: table.residual(),
        interval,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{q, qi};

    fn states(d: &str) -> Vec<Q> {
        let d = SizeDistribution::parse(d).unwrap();
        build_state_space(&d, &qi(50), &qi(1), 1000).unwrap().states
    }

    #[test]
    fn closures() {
        assert_eq!(states("bernoulli:1/50"), vec![qi(0), qi(1)]);
        assert_eq!(states("discrete:0.4@1/2,0.61@1/2"), vec![qi(0), q(2, 5), q(61, 100), q(4, 5)]);
        assert_eq!(states("point:0"), vec![qi(0)]);
    }

    #[test]
    fn point_mass_zero_never_costs() {
        let d = SizeDistribution::point(qi(0)).unwrap();
        let sp = build_state_space(&d, &qi(50), &qi(1), 10).unwrap();
        let t = value_iteration(&sp, 0.999, 1e-10).unwrap();
        assert_eq!(t.values[0], 0.0);
    }

    #[test]
    fn bernoulli_actions() {
        let d = SizeDistribution::bernoulli(q(1, 50), qi(1)).unwrap();
        let sp = build_state_space(&d, &qi(50), &qi(1), 10).unwrap();
        let t = value_iteration(&sp, 0.999, 1e-10).unwrap();
        let c = continue_set(&sp, &t);
        assert!(c[0]);
        assert!(!c[1]);
        assert_eq!(extract_threshold(&sp, &t), qi(0));
    }

    #[test]
    fn residuals_contract() {
        let d = SizeDistribution::parse("discrete:0@49/50,0.4@1/100,0.61@1/100").unwrap();
        let sp = build_state_space(&d, &qi(50), &qi(1), 100).unwrap();
        let t = value_iteration(&sp, 0.9, 1e-12).unwrap();
        for w in t.residuals.windows(2) {
            assert!(w[1] <= 0.9 * w[0] + 1e-15);
        }
    }
}
