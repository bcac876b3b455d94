//! Turns any policy tree into one that respects the risk budget `γ/C`, at
//! a cost factor of at most `1 + 2/γ`.
//!
//! Each original bin is cut into segments. A segment closes right after
//! the first item that pushes its risk above the budget, and later uses of
//! the bin start a new segment in a fresh bin. When the offending item is
//! not the first of its segment it is moved to a bin of its own.
//!
//! The report carries the intermediate label costs with `δ = C/γ`:
//! overflow labels raised to `C + 2δ`, then `C + δ` on segments, then `C`
//! with one extra open per moved item.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exact::lattice::Lattice;
use crate::exact::tree::{eval_policy_tree, PolicyTree, TreeNode};
use crate::instance::Instance;
use crate::num::{Gamma, Surd, Q};

#[derive(Clone, Debug)]
pub struct SurgeryReport {
    pub tree: PolicyTree,
    pub input_cost: Q,
    /// Input labels with overflow cost `C + 2δ`.
    pub inflated: Surd,
    /// Segment labels `C + δ`, one open per segment.
    pub phase1: Surd,
    /// Segment labels `C`, plus one open per moved item.
    pub phase2: Q,
    pub output_cost: Q,
    /// `(1 + 2/γ) · input_cost`.
    pub bound: Surd,
    /// Nodes whose item was moved to a bin of its own.
    pub moved: usize,
    /// Nodes where a segment closed.
    pub cuts: usize,
}

impl SurgeryReport {
    /// `output ≤ phase2 ≤ phase1 ≤ inflated ≤ bound`, exactly.
    pub fn chain_holds(&self) -> bool {
        let out = Surd::rational(self.output_cost.clone());
        let p2 = Surd::rational(self.phase2.clone());
        out <= p2 && p2 <= self.phase1 && self.phase1 <= self.inflated && self.inflated <= self.bound
    }
}

#[derive(Clone)]
struct Segment {
    phys: u32,
    usage: i64,
    risk: Q,
    items: u32,
}

struct Surgery<'a> {
    src: &'a PolicyTree,
    lat: &'a Lattice,
    gamma: &'a Gamma,
    out: Vec<TreeNode>,
    input_open: Q,
    input_arcs: Q,
    open1: Q,
    over1: Q,
    moved_mass: Q,
    moved: usize,
    cuts: usize,
}

impl Surgery<'_> {
    fn visit(&mut self, i: usize, reach: &Q, segs: &[Option<Segment>], phys: &[i64]) -> Result<()> {
        let u = &self.src.nodes[i];
        let Some(j) = u.bin else { return Ok(()) };
        let (t, j) = (u.level as usize, j as usize);
        let (lat, cap) = (self.lat, self.lat.cap);
        let mut segs = segs.to_vec();
        let mut phys = phys.to_vec();
        if j >= segs.len() {
            segs.resize(j + 1, None);
        }
        if u.open {
            self.input_open += reach;
        }
        let fresh = u.open || segs[j].is_none();
        if fresh {
            phys.push(0);
            segs[j] = Some(Segment { phys: phys.len() as u32 - 1, usage: 0, risk: Q::zero(), items: 0 });
            self.open1 += reach;
        }
        let seg = segs[j].clone().unwrap();
        let risk = &seg.risk + lat.overflow(t, seg.usage);
        let over = !self.gamma.admits(&risk, &lat.penalty);
        let moved = over && seg.items > 0;
        if over {
            self.cuts += 1;
        }
        let target = if moved {
            phys.push(0);
            self.moved += 1;
            self.moved_mass += reach;
            phys.len() - 1
        } else {
            seg.phys as usize
        };
        if phys[target] > cap {
            return Err(Error::InconsistentTree(format!("node {i} reuses a broken bin")));
        }
        self.out[i].bin = Some(target as u32);
        self.out[i].open = moved || fresh;
        for (k, (x, p)) in lat.atoms(t).iter().enumerate() {
            let arc = &u.arcs[k];
            let r = reach * p;
            self.input_arcs += &r * &arc.cost;
            if seg.usage + x > cap {
                self.over1 += &r;
            }
            let mut ph = phys.clone();
            ph[target] += x;
            self.out[i].arcs[k].cost = if ph[target] > cap { lat.penalty.clone() } else { Q::zero() };
            let mut sg = segs.clone();
            sg[j] = if over {
                None
            } else {
                Some(Segment { phys: seg.phys, usage: seg.usage + x, risk: risk.clone(), items: seg.items + 1 })
            };
            self.visit(arc.child as usize, &r, &sg, &ph)?;
        }
        Ok(())
    }
}

pub fn budgetize_policy_tree(tree: &PolicyTree, gamma: &Gamma, inst: &Instance) -> Result<SurgeryReport> {
    if gamma.square().is_zero() {
        return Err(Error::InvalidParams("budgetize needs gamma > 0".into()));
    }
    let input_cost = eval_policy_tree(tree, inst)?;
    let lat = Lattice::new(inst)?;
    let mut s = Surgery {
        src: tree,
        lat: &lat,
        gamma,
        out: tree.nodes.clone(),
        input_open: Q::zero(),
        input_arcs: Q::zero(),
        open1: Q::zero(),
        over1: Q::zero(),
        moved_mass: Q::zero(),
        moved: 0,
        cuts: 0,
    };
    s.visit(0, &Q::one(), &[], &[])?;
    let c = lat.penalty.clone();
    let delta = gamma.delta(&c);
    let factor = gamma.surgery_factor();
    let inflated = Surd::rational(s.input_open.clone()) + (&factor * &Surd::rational(s.input_arcs.clone()));
    let phase1 = Surd::rational(s.open1.clone()) + &(Surd::rational(c.clone()) + delta) * &Surd::rational(s.over1.clone());
    let phase2 = &s.open1 + &s.moved_mass + &c * &s.over1;
    let out = PolicyTree { n: tree.n, nodes: s.out };
    let output_cost = eval_policy_tree(&out, inst)?;
    Ok(SurgeryReport {
        bound: &factor * &Surd::rational(input_cost.clone()),
        tree: out,
        input_cost,
        inflated,
        phase1,
        phase2,
        output_cost,
        moved: s.moved,
        cuts: s.cuts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::SizeDistribution;
    use crate::exact::tree::{budget_violation, build_policy_tree};
    use crate::num::{q, qi};
    use crate::policies::{BudgetedGreedy, ThresholdGreedy};

    fn bernoulli(n: usize, c: i64) -> Instance {
        Instance::iid(SizeDistribution::bernoulli(q(1, c), qi(1)).unwrap(), n, qi(c), qi(1)).unwrap()
    }

    #[test]
    fn full_greedy_on_bernoulli() {
        let inst = bernoulli(4, 50);
        let g = Gamma::sqrt2();
        let tree = build_policy_tree(&inst, &ThresholdGreedy::new(f64::INFINITY), 1000).unwrap();
        let r = budgetize_policy_tree(&tree, &g, &inst).unwrap();
        assert!(r.chain_holds());
        assert_eq!(budget_violation(&r.tree, &inst, &g).unwrap(), None);
        assert!(r.moved > 0);
    }

    #[test]
    fn budgeted_input_is_unchanged() {
        let inst = bernoulli(4, 10);
        let g = Gamma::parse("1").unwrap();
        let tree = build_policy_tree(&inst, &BudgetedGreedy::new(0.1), 1000).unwrap();
        let r = budgetize_policy_tree(&tree, &g, &inst).unwrap();
        assert_eq!(r.tree, tree);
        assert_eq!(r.output_cost, r.input_cost);
        assert_eq!(r.cuts, 0);
    }

    #[test]
    fn huge_budget_is_identity() {
        let inst = bernoulli(4, 10);
        let tree = build_policy_tree(&inst, &ThresholdGreedy::new(f64::INFINITY), 1000).unwrap();
        let r = budgetize_policy_tree(&tree, &Gamma::parse("40").unwrap(), &inst).unwrap();
        assert_eq!(r.tree, tree);
    }
}
