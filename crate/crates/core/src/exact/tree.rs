//! Explicit policy trees over discrete instances.
//!
//! Level `t` nodes decide item `t`; their arcs are the atoms of item `t` in
//! order. A node carries the chosen bin label and `open = true` when that
//! label is new on the root path. An arc carries the overflow cost, `C` when
//! the outcome breaks the chosen bin and zero otherwise.

use num_traits::{One, Zero};

use crate::engine::{Choice, PackingState};
use crate::error::{Error, Result};
use crate::exact::lattice::Lattice;
use crate::instance::Instance;
use crate::num::{Gamma, Q};
use crate::policies::Policy;

pub const DEFAULT_TREE_LIMIT: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct TreeArc {
    pub atom: u32,
    pub cost: Q,
    pub child: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    pub level: u32,
    /// `None` at leaves.
    pub bin: Option<u32>,
    pub open: bool,
    pub arcs: Vec<TreeArc>,
}

/// Nodes in preorder; every child has a larger index than its parent.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyTree {
    pub n: usize,
    pub nodes: Vec<TreeNode>,
}

impl PolicyTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|u| u.arcs.is_empty()).count()
    }

    /// Parent index of every node, `u32::MAX` at the root.
    pub fn parents(&self) -> Vec<u32> {
        let mut p = vec![u32::MAX; self.nodes.len()];
        for (i, u) in self.nodes.iter().enumerate() {
            for a in &u.arcs {
                p[a.child as usize] = i as u32;
            }
        }
        p
    }
}

/// Node count of a full tree over the instance's supports.
pub fn tree_size(inst: &Instance) -> Option<usize> {
    let mut total: usize = 1;
    let mut level: usize = 1;
    for d in inst.items() {
        level = level.checked_mul(d.atoms()?.len())?;
        total = total.checked_add(level)?;
    }
    Some(total)
}

/// Replays `policy` on every outcome sequence.
pub fn build_policy_tree(inst: &Instance, policy: &dyn Policy, limit: usize) -> Result<PolicyTree> {
    if let Some(i) = inst.first_non_discrete() {
        return Err(Error::NonDiscreteItem(i));
    }
    match tree_size(inst) {
        Some(s) if s <= limit => {}
        _ => return Err(Error::TreeTooLarge { limit }),
    }
    let compiled = inst.compile()?;
    let lat = Lattice::new(inst)?;
    let mut tree = PolicyTree { n: inst.len(), nodes: Vec::new() };
    grow(&mut tree, &compiled, &lat, &PackingState::new(), 0, policy)?;
    Ok(tree)
}

fn grow(
    tree: &mut PolicyTree,
    inst: &crate::instance::CompiledInstance,
    lat: &Lattice,
    state: &PackingState,
    t: usize,
    policy: &dyn Policy,
) -> Result<u32> {
    let id = tree.nodes.len() as u32;
    if t == tree.n {
        tree.nodes.push(TreeNode { level: t as u32, bin: None, open: false, arcs: Vec::new() });
        return Ok(id);
    }
    let choice = policy.decide(&state.view(inst, t));
    tree.nodes.push(TreeNode { level: t as u32, bin: None, open: choice == Choice::Open, arcs: Vec::new() });
    let law = inst.law(t);
    let mut arcs = Vec::new();
    let mut bin = 0;
    for (k, (x, _)) in lat.atoms(t).iter().enumerate() {
        let mut s = state.clone();
        let before = s.broken;
        bin = s.pack_step(choice, *x as f64, law, inst.law_of[t] as usize, inst.cap)?;
        let cost = if s.broken > before { lat.penalty.clone() } else { Q::zero() };
        let child = grow(tree, inst, lat, &s, t + 1, policy)?;
        arcs.push(TreeArc { atom: k as u32, cost, child });
    }
    let node = &mut tree.nodes[id as usize];
    node.bin = Some(bin as u32);
    node.arcs = arcs;
    Ok(id)
}

fn check_shape(tree: &PolicyTree, inst: &Instance) -> Result<()> {
    let bad = |m: String| Err(Error::InconsistentTree(m));
    if tree.n != inst.len() || tree.nodes.is_empty() {
        return bad(format!("tree has {} levels for {} items", tree.n, inst.len()));
    }
    for (i, u) in tree.nodes.iter().enumerate() {
        let t = u.level as usize;
        if t == tree.n {
            if !u.arcs.is_empty() {
                return bad(format!("leaf {i} has arcs"));
            }
            continue;
        }
        let atoms = inst.item(t).atoms().ok_or(Error::NonDiscreteItem(t))?;
        if u.bin.is_none() || u.arcs.len() != atoms.len() {
            return bad(format!("node {i} does not branch on the support of item {t}"));
        }
        for (k, a) in u.arcs.iter().enumerate() {
            let c = a.child as usize;
            if a.atom as usize != k || c <= i || c >= tree.nodes.len() || tree.nodes[c].level as usize != t + 1 {
                return bad(format!("arc {k} of node {i} is malformed"));
            }
        }
    }
    if tree.nodes[0].level != 0 {
        return bad("root is not at level 0".into());
    }
    Ok(())
}

/// `cost(u) = ℓ_u + Σ_a p_a (c_a + cost(child))`, evaluated bottom-up.
fn evaluate(tree: &PolicyTree, inst: &Instance, with_arcs: bool) -> Result<Q> {
    check_shape(tree, inst)?;
    let mut v = vec![Q::zero(); tree.nodes.len()];
    for i in (0..tree.nodes.len()).rev() {
        let u = &tree.nodes[i];
        if u.arcs.is_empty() {
            continue;
        }
        let atoms = inst.item(u.level as usize).atoms().unwrap();
        let mut acc = if u.open { Q::one() } else { Q::zero() };
        for (a, atom) in u.arcs.iter().zip(atoms) {
            let mut x = v[a.child as usize].clone();
            if with_arcs {
                x += &a.cost;
            }
            acc += &atom.prob * x;
        }
        v[i] = acc;
    }
    Ok(v.swap_remove(0))
}

pub fn eval_policy_tree(tree: &PolicyTree, inst: &Instance) -> Result<Q> {
    evaluate(tree, inst, true)
}

/// Expected number of opened bins.
pub fn eval_opened(tree: &PolicyTree, inst: &Instance) -> Result<Q> {
    evaluate(tree, inst, false)
}

/// First place where a root-leaf path breaks the risk budget `γ/C`: a bin
/// receiving an item while over budget, or a bin whose risk crosses the
/// budget after its first item.
pub fn budget_violation(tree: &PolicyTree, inst: &Instance, gamma: &Gamma) -> Result<Option<String>> {
    check_shape(tree, inst)?;
    let lat = Lattice::new(inst)?;
    // (usage, risk, items) per bin label
    let mut bins: Vec<(i64, Q, u32)> = Vec::new();
    Ok(walk_budget(tree, &lat, gamma, 0, &mut bins))
}

fn walk_budget(tree: &PolicyTree, lat: &Lattice, gamma: &Gamma, i: usize, bins: &mut Vec<(i64, Q, u32)>) -> Option<String> {
    let u = &tree.nodes[i];
    let Some(j) = u.bin else { return None };
    let (t, j) = (u.level as usize, j as usize);
    if j >= bins.len() {
        bins.resize(j + 1, (0, Q::zero(), 0));
    }
    let saved = bins[j].clone();
    let (usage, risk, items) = saved.clone();
    if usage > lat.cap {
        return Some(format!("node {i} uses broken bin {j}"));
    }
    if items > 0 && !gamma.admits(&risk, &lat.penalty) {
        return Some(format!("node {i} adds item {t} to bin {j}, already over budget"));
    }
    let r = &risk + lat.overflow(t, usage);
    if items > 0 && !gamma.admits(&r, &lat.penalty) {
        return Some(format!("node {i} pushes bin {j} over budget"));
    }
    for (a, (x, _)) in u.arcs.iter().zip(lat.atoms(t)) {
        bins[j] = (usage + x, r.clone(), items + 1);
        if let Some(m) = walk_budget(tree, lat, gamma, a.child as usize, bins) {
            return Some(m);
        }
    }
    bins[j] = saved;
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::SizeDistribution;
    use crate::num::{q, qi};
    use crate::policies::{BudgetedGreedy, ThresholdGreedy};

    #[test]
    fn single_item_tree() {
        let inst = Instance::iid(SizeDistribution::parse("discrete:0.5@1/2,2@1/2").unwrap(), 1, qi(10), qi(1)).unwrap();
        let tree = build_policy_tree(&inst, &ThresholdGreedy::new(f64::INFINITY), 100).unwrap();
        assert_eq!(tree.len(), 3);
        assert!(tree.root().open);
        assert_eq!(tree.root().arcs[1].cost, qi(10));
        assert_eq!(eval_policy_tree(&tree, &inst).unwrap(), qi(6));
        assert_eq!(eval_opened(&tree, &inst).unwrap(), qi(1));
    }

    #[test]
    fn budgeted_greedy_tree_is_budgeted() {
        let d = SizeDistribution::bernoulli(q(1, 10), qi(1)).unwrap();
        let inst = Instance::iid(d, 3, qi(10), qi(1)).unwrap();
        let g = Gamma::parse("1").unwrap();
        let tree = build_policy_tree(&inst, &BudgetedGreedy::new(0.1), 100).unwrap();
        assert_eq!(budget_violation(&tree, &inst, &g).unwrap(), None);
        let fg = build_policy_tree(&inst, &ThresholdGreedy::new(f64::INFINITY), 100).unwrap();
        assert!(budget_violation(&fg, &inst, &g).unwrap().is_some());
    }

    #[test]
    fn size_limit() {
        let inst = Instance::iid(SizeDistribution::parse("discrete:0@1/2,1@1/2").unwrap(), 20, qi(2), qi(1)).unwrap();
        assert!(matches!(build_policy_tree(&inst, &BudgetedGreedy::new(1.0), 1000), Err(Error::TreeTooLarge { .. })));
    }
}
