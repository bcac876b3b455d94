//! Independent oracles and random instance builders shared by the
//! integration tests. Nothing here calls the library's solvers.

#![allow(dead_code)]

use std::collections::BTreeSet;

use adaptive_binpack::dist::SizeDistribution;
use adaptive_binpack::exact::PolicyTree;
use adaptive_binpack::num::{q, qi, Gamma, Q};
use adaptive_binpack::generators::reduction::DEFAULT_PENALTY;
use adaptive_binpack::generators::{reduction_instance, symmetrize_2cnf, Cnf};
use adaptive_binpack::{Error, Instance};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Up to `max_atoms` distinct values from `values`, random probabilities
/// with denominator 12.
pub fn random_law(r: &mut ChaCha8Rng, values: &[Q], max_atoms: usize) -> SizeDistribution {
    let k = r.gen_range(1..=max_atoms.min(values.len()));
    let picked: Vec<Q> = values.choose_multiple(r, k).cloned().collect();
    let mut weights: Vec<i64> = (0..k).map(|_| r.gen_range(1..=6)).collect();
    let total: i64 = weights.iter().sum();
    if total == 0 {
        weights[0] = 1;
    }
    let pairs = picked.into_iter().zip(weights).map(|(v, w)| (v, q(w, total))).collect();
    SizeDistribution::discrete(pairs).unwrap()
}

/// Tenths in `[0, 1.2]`.
pub fn tenths() -> Vec<Q> {
    (0..=12).map(|k| q(k, 10)).collect()
}

pub fn random_instance(r: &mut ChaCha8Rng, n: usize, max_atoms: usize, values: &[Q], penalty: i64) -> Instance {
    let items = (0..n).map(|_| random_law(r, values, max_atoms)).collect();
    Instance::new(items, qi(penalty), qi(1)).unwrap()
}

pub fn random_iid(r: &mut ChaCha8Rng, n: usize, max_atoms: usize, values: &[Q], penalty: i64) -> Instance {
    Instance::iid(random_law(r, values, max_atoms), n, qi(penalty), qi(1)).unwrap()
}

/// Common denominator of the capacity and every atom.
fn scale_of(inst: &Instance) -> BigInt {
    let mut l = inst.capacity().denom().clone();
    for d in inst.items() {
        for a in d.atoms().unwrap() {
            l = l.lcm(a.value.denom());
        }
    }
    l
}

fn scaled(x: &Q, s: &BigInt) -> i64 {
    (x * Q::from_integer(s.clone())).to_integer().to_i64().unwrap()
}

/// Minimum expected cost over all policies by recursion on the full
/// labeled history: every bin label, in opening order, with its usage and
/// whether it broke. No state merging.
pub fn brute_force_optimum(inst: &Instance) -> Q {
    let s = scale_of(inst);
    let cap = scaled(inst.capacity(), &s);
    let items: Vec<Vec<(i64, Q)>> =
        inst.items().map(|d| d.atoms().unwrap().iter().map(|a| (scaled(&a.value, &s), a.prob.clone())).collect()).collect();
    fn go(t: usize, bins: &mut Vec<(i64, bool)>, items: &[Vec<(i64, Q)>], cap: i64, c: &Q) -> Q {
        if t == items.len() {
            return Q::zero();
        }
        let mut best: Option<Q> = None;
        for j in 0..=bins.len() {
            let fresh = j == bins.len();
            if !fresh && bins[j].1 {
                continue;
            }
            if fresh {
                bins.push((0, false));
            }
            let mut v = if fresh { Q::one() } else { Q::zero() };
            let saved = bins[j];
            for (x, p) in &items[t] {
                let u = saved.0 + x;
                let broke = u > cap;
                bins[j] = (u, broke);
                let mut w = go(t + 1, bins, items, cap, c);
                if broke {
                    w += c;
                }
                v += p * w;
            }
            bins[j] = saved;
            if fresh {
                bins.pop();
            }
            if best.as_ref().map_or(true, |b| &v < b) {
                best = Some(v);
            }
        }
        best.unwrap()
    }
    go(0, &mut Vec::new(), &items, cap, inst.penalty())
}

/// Sum over root-leaf paths of path probability times path cost.
pub fn leaf_sum_cost(tree: &PolicyTree, inst: &Instance) -> Q {
    fn go(tree: &PolicyTree, inst: &Instance, i: usize, prob: &Q, acc: &Q, total: &mut Q) {
        let u = &tree.nodes[i];
        if u.arcs.is_empty() {
            *total += prob * acc;
            return;
        }
        let atoms = inst.item(u.level as usize).atoms().unwrap();
        let open = if u.open { Q::one() } else { Q::zero() };
        for a in &u.arcs {
            let atom = &atoms[a.atom as usize];
            go(tree, inst, a.child as usize, &(prob * &atom.prob), &(acc + &open + &a.cost), total);
        }
    }
    let mut total = Q::zero();
    go(tree, inst, 0, &Q::one(), &Q::zero(), &mut total);
    total
}

/// True when along every path each bin label's summed overflow risk stays
/// within `γ/C`, counting every item after the first, and no broken bin is
/// reused. Risk of an item is `P(X > cap − usage)` at packing time.
pub fn path_budgeted(tree: &PolicyTree, inst: &Instance, gamma: &Gamma) -> bool {
    let cap = inst.capacity().clone();
    let c = inst.penalty().clone();
    let within = |risk: &Q| -> bool {
        // (risk · C)² ≤ γ²
        let rc = risk * &c;
        &rc * &rc <= *gamma.square()
    };
    fn go(
        tree: &PolicyTree,
        inst: &Instance,
        i: usize,
        bins: &mut Vec<(Q, Q, u32)>,
        cap: &Q,
        within: &dyn Fn(&Q) -> bool,
    ) -> bool {
        let u = &tree.nodes[i];
        let Some(j) = u.bin else { return true };
        let j = j as usize;
        if j >= bins.len() {
            bins.resize(j + 1, (Q::zero(), Q::zero(), 0));
        }
        let saved = bins[j].clone();
        let (usage, risk, k) = saved.clone();
        if &usage > cap {
            return false;
        }
        let d = inst.item(u.level as usize);
        let p: Q = d.atoms().unwrap().iter().filter(|a| a.value > cap - &usage).map(|a| a.prob.clone()).sum();
        let r = &risk + &p;
        if k > 0 && !within(&r) {
            return false;
        }
        for a in &u.arcs {
            let atom = &d.atoms().unwrap()[a.atom as usize];
            bins[j] = (&usage + &atom.value, r.clone(), k + 1);
            if !go(tree, inst, a.child as usize, bins, cap, within) {
                return false;
            }
        }
        bins[j] = saved;
        true
    }
    go(tree, inst, 0, &mut Vec::new(), &cap, &within)
}

/// Reachable subset sums of `values` up to `cap`, by plain search.
pub fn subset_sums(values: &[Q], cap: &Q) -> BTreeSet<Q> {
    let mut seen = BTreeSet::from([Q::zero()]);
    let mut frontier = vec![Q::zero()];
    while let Some(s) = frontier.pop() {
        for v in values {
            let t = &s + v;
            if &t <= cap && seen.insert(t.clone()) {
                frontier.push(t);
            }
        }
    }
    seen
}

/// Brute-force optimum for already discretized items into bins of size
/// `cap`: the labeled-history recursion on exact rational usages.
pub fn brute_force_at_capacity(inst: &Instance, cap: &Q) -> Q {
    brute_force_optimum(&inst.with_capacity(cap.clone()).unwrap())
}

/// `√x` bracket check: `a ≤ √s · b` exactly, for `a, b ≥ 0`.
pub fn le_sqrt_times(a: &Q, s: &Q, b: &Q) -> bool {
    a * a <= s * b * b
}

/// `a ≤ (3 + 2√2) b` exactly, for `a, b ≥ 0`.
pub fn le_three_plus_two_sqrt2(a: &Q, b: &Q) -> bool {
    // a − 3b ≤ 2√2 b
    let lhs = a - qi(3) * b;
    lhs <= Q::zero() || &lhs * &lhs <= qi(8) * b * b
}

/// Random 2CNF over one or two variables whose symmetrization meets the
/// reduction's occurrence bound; inputs that break it are redrawn.
pub fn random_reducible_2cnf(r: &mut ChaCha8Rng) -> Cnf {
    loop {
        let nv = r.gen_range(1..=2usize);
        let clauses = (0..r.gen_range(1..=3))
            .map(|_| {
                (0..2)
                    .map(|_| {
                        let v = r.gen_range(1..=nv as i32);
                        if r.gen_bool(0.5) {
                            v
                        } else {
                            -v
                        }
                    })
                    .collect()
            })
            .collect();
        let phi = Cnf::new(nv, clauses).unwrap();
        let sym = symmetrize_2cnf(&phi).unwrap();
        match reduction_instance(&sym, &qi(DEFAULT_PENALTY)) {
            Err(Error::OccurrenceBound { .. }) => continue,
            Err(e) => panic!("{e}"),
            Ok(_) => return phi,
        }
    }
}
