//! Exact optimum of reduction instances under the two-bin structure: every
//! `X_i` goes to bin 1 and every `X_i'` to bin 2.
//!
//! All random items come first, so once their outcomes are known the rest
//! is an offline packing of deterministic items. The search finds the
//! fewest extra bins for each outcome without breaking any bin, and checks
//! that no visited bin content carries between decimal digits.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::generators::reduction::{ReductionArtifacts, Role};
use crate::num::Q;

#[derive(Clone, Debug)]
pub struct SearchLimits {
    pub max_vars: usize,
    pub max_clauses: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self { max_vars: 3, max_clauses: 12 }
    }
}

#[derive(Clone, Debug)]
pub struct SearchReport {
    pub value: Q,
    pub outcomes: usize,
    /// Outcomes packed into bins 1 and 2 alone.
    pub two_bin_outcomes: usize,
    pub states: usize,
    /// Additions whose digit sums would carry. Expected zero.
    pub carries: usize,
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Load {
    value: BigInt,
    digits: Vec<u8>,
}

struct Packer<'a> {
    art: &'a ReductionArtifacts,
    sizes: Vec<(BigInt, Vec<u8>)>,
    start: usize,
    memo: HashMap<(usize, Vec<BigInt>), u32>,
    carries: usize,
}

impl Packer<'_> {
    fn add(&mut self, load: &Load, t: usize) -> Option<Load> {
        let (v, d) = &self.sizes[t];
        let value = &load.value + v;
        if value > self.art.capacity {
            return None;
        }
        let digits: Vec<u8> = load.digits.iter().zip(d).map(|(a, b)| a + b).collect();
        if digits.iter().any(|&x| x > 9) {
            self.carries += 1;
        }
        Some(Load { value, digits })
    }

    /// Fewest new bins needed for items `t..`.
    fn extra(&mut self, t: usize, bins: Vec<Load>) -> u32 {
        if t == self.sizes.len() {
            return 0;
        }
        let key = (t, bins.iter().map(|b| b.value.clone()).collect::<Vec<_>>());
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let mut best = u32::MAX;
        for k in 0..bins.len() {
            if k > 0 && bins[k].value == bins[k - 1].value {
                continue;
            }
            if let Some(l) = self.add(&bins[k], t) {
                let mut next = bins.clone();
                next[k] = l;
                next.sort();
                best = best.min(self.extra(t + 1, next));
                if best == 0 {
                    break;
                }
            }
        }
        if best > 0 {
            let empty = Load { value: BigInt::zero(), digits: vec![0; self.art.layout.width() as usize] };
            if let Some(l) = self.add(&empty, t) {
                let mut next = bins.clone();
                next.push(l);
                next.sort();
                best = best.min(1 + self.extra(t + 1, next));
            }
        }
        self.memo.insert(key, best);
        best
    }
}

fn check_limits(art: &ReductionArtifacts, limits: &SearchLimits) -> Result<()> {
    if art.n_vars() > limits.max_vars || art.n_clauses() > limits.max_clauses {
        return Err(Error::InstanceTooLarge(format!(
            "{} variables and {} clauses, limits {} and {}",
            art.n_vars(),
            art.n_clauses(),
            limits.max_vars,
            limits.max_clauses
        )));
    }
    Ok(())
}

/// `X_i ∈ {a_i, b_i}` and `X_i' ∈ {a_i, b_i}` for outcome `mask`: bit `2i`
/// picks `b` for `X_{i+1}`, bit `2i+1` picks `b` for `X'_{i+1}`.
fn outcome(art: &ReductionArtifacts, mask: usize) -> (Vec<bool>, Vec<bool>) {
    let n = art.n_vars();
    ((0..n).map(|i| mask >> (2 * i) & 1 == 1).collect(), (0..n).map(|i| mask >> (2 * i + 1) & 1 == 1).collect())
}

fn digits(art: &ReductionArtifacts, x: &BigInt) -> Vec<u8> {
    art.layout.digits(x).expect("reduction sizes fit the layout")
}

pub fn restricted_policy_search(art: &ReductionArtifacts, limits: &SearchLimits) -> Result<SearchReport> {
    check_limits(art, limits)?;
    let n = art.n_vars();
    let start = 2 * n;
    let sizes: Vec<(BigInt, Vec<u8>)> = (0..art.instance.len())
        .map(|t| {
            let v = art.instance.item(t).atoms().unwrap()[0].value.to_integer();
            let d = digits(art, &v);
            (v, d)
        })
        .collect();
    let mut p = Packer { art, sizes, start, memo: HashMap::new(), carries: 0 };
    let outcomes = 1usize << (2 * n);
    let mut total = 0u64;
    let mut two = 0;
    for mask in 0..outcomes {
        let (x, xp) = outcome(art, mask);
        let mut loads = Vec::new();
        for side in [&x, &xp] {
            let mut l = Load { value: BigInt::zero(), digits: vec![0; art.layout.width() as usize] };
            for (i, &is_b) in side.iter().enumerate() {
                let v = if is_b { &art.b[i] } else { &art.a[i] };
                l.value += v;
                for (a, b) in l.digits.iter_mut().zip(digits(art, v)) {
                    *a += b;
                }
            }
            loads.push(l);
        }
        loads.sort();
        let e = p.extra(p.start, loads);
        if e == 0 {
            two += 1;
        }
        total += 2 + e as u64;
    }
    Ok(SearchReport {
        value: Q::new(BigInt::from(total), BigInt::from(outcomes)),
        outcomes,
        two_bin_outcomes: two,
        states: p.memo.len(),
        carries: p.carries,
    })
}

/// The constructive two-or-three-bin policy, evaluated over all outcomes.
///
/// With no collision `X_i = X_i'`, `c_i` joins `a_i`, `d_i` the other bin,
/// slack items top up bin 1's clause digits to 4 and spill into bin 2, and
/// `h` goes to bin 2 if it fits or to a third bin. After a first collision
/// on `b`, everything left goes to bin 3. After a first collision on `a` at
/// `i`, `c_i` goes to bin 1 and `d_i` to bin 2, every other `c_k` joins the
/// `a_k` copy when bin 1 holds `a_k` and bin 2 otherwise, and all slack
/// items and `h` go to bin 2.
pub fn constructive_policy_value(art: &ReductionArtifacts) -> Result<Q> {
    let n = art.n_vars();
    let outcomes = 1usize << (2 * n);
    let mut total = 0u64;
    for mask in 0..outcomes {
        let (x, xp) = outcome(art, mask);
        let mut bins: Vec<BigInt> = vec![BigInt::zero(); 2];
        let put = |bins: &mut Vec<BigInt>, k: usize, v: &BigInt| -> Result<()> {
            while bins.len() <= k {
                bins.push(BigInt::zero());
            }
            bins[k] += v;
            if bins[k] > art.capacity {
                return Err(Error::InvalidParams(format!("constructive policy overflows bin {} on outcome {mask}", k + 1)));
            }
            Ok(())
        };
        for i in 0..n {
            put(&mut bins, 0, if x[i] { &art.b[i] } else { &art.a[i] })?;
            put(&mut bins, 1, if xp[i] { &art.b[i] } else { &art.a[i] })?;
        }
        let collision = (0..n).find(|&i| x[i] == xp[i]);
        let rest_start = 2 * n;
        let rest: Vec<(Role, BigInt)> = (rest_start..art.instance.len())
            .map(|t| (art.roles[t], art.instance.item(t).atoms().unwrap()[0].value.to_integer()))
            .collect();
        match collision {
            Some(i) if x[i] => {
                for (_, v) in &rest {
                    put(&mut bins, 2, v)?;
                }
            }
            Some(i) => {
                for (role, v) in &rest {
                    let k = match *role {
                        Role::C(k) | Role::D(k) => {
                            let k0 = k - 1;
                            let c_to_1 = if k0 == i { true } else { !x[k0] };
                            let is_c = matches!(role, Role::C(_));
                            if is_c == c_to_1 {
                                0
                            } else {
                                1
                            }
                        }
                        _ => 1,
                    };
                    put(&mut bins, k, v)?;
                }
            }
            None => {
                let pow = |j: usize| crate::generators::reduction::pow10(art.layout.clause(j as u32));
                let clause_digit = |u: &BigInt, j: usize| -> u32 {
                    let d: BigInt = (u / pow(j)) % BigInt::from(10);
                    d.try_into().unwrap()
                };
                for (role, v) in &rest {
                    match *role {
                        Role::C(k) | Role::D(k) => {
                            let a_in_1 = !x[k - 1];
                            let is_c = matches!(role, Role::C(_));
                            put(&mut bins, if is_c == a_in_1 { 0 } else { 1 }, v)?;
                        }
                        Role::F(j) | Role::G(j) | Role::H(j) => {
                            let k = if clause_digit(&bins[0], j) < 4 { 0 } else { 1 };
                            put(&mut bins, k, v)?;
                        }
                        Role::Total => {
                            if &bins[1] + v <= art.capacity {
                                put(&mut bins, 1, v)?;
                            } else if &bins[0] + v <= art.capacity {
                                put(&mut bins, 0, v)?;
                            } else {
                                put(&mut bins, 2, v)?;
                            }
                        }
                        Role::X(_) | Role::XPrime(_) => unreachable!(),
                    }
                }
            }
        }
        total += bins.len() as u64;
    }
    Ok(Q::new(BigInt::from(total), BigInt::from(outcomes)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::cnf::{count_sat_bruteforce, symmetrize_2cnf, Cnf};
    use crate::generators::reduction::{reduction_instance, reduction_value_corrected};
    use crate::num::qi;

    #[test]
    fn one_variable_formula() {
        let phi = symmetrize_2cnf(&Cnf::new(1, vec![vec![1, 1]]).unwrap()).unwrap();
        let s = count_sat_bruteforce(&phi).unwrap();
        let art = reduction_instance(&phi, &qi(10)).unwrap();
        let want = reduction_value_corrected(phi.n_vars, s).unwrap();
        let r = restricted_policy_search(&art, &SearchLimits::default()).unwrap();
        assert_eq!(r.value, want);
        assert_eq!(r.carries, 0);
        assert_eq!(constructive_policy_value(&art).unwrap(), want);
    }
}
