//! Exact optimum of a tiny instance, and exact costs of the online policies
//! through their policy trees.

use adaptive_binpack::exact::{
    build_policy_tree, eval_opened, eval_policy_tree, optimal_cost_dp, DEFAULT_MAX_STATES, DEFAULT_TREE_LIMIT,
};
use adaptive_binpack::num::{fmt_decimal, qi};
use adaptive_binpack::policies::PolicyConfig;
use adaptive_binpack::{Instance, SizeDistribution};

fn main() -> adaptive_binpack::Result<()> {
    let items = ["discrete:0.3@1/2,0.6@1/2", "discrete:0.5@2/3,1.2@1/3", "discrete:0.2@3/4,0.9@1/4", "point:0.4"]
        .iter()
        .map(|s| SizeDistribution::parse(s))
        .collect::<adaptive_binpack::Result<Vec<_>>>()?;
    let inst = Instance::new(items, qi(4), qi(1))?;
    let opt = optimal_cost_dp(&inst, DEFAULT_MAX_STATES)?;
    println!("optimum {} over {} states", fmt_decimal(&opt.value, 6), opt.states());

    let compiled = inst.compile()?;
    for spec in ["bg:1", "bg:2", "fg", "tg:2/5", "ft:1/2"] {
        let policy = PolicyConfig::parse(spec)?.prepare(&inst, &compiled)?;
        let tree = build_policy_tree(&inst, policy.as_ref(), DEFAULT_TREE_LIMIT)?;
        let cost = eval_policy_tree(&tree, &inst)?;
        println!(
            "{spec:<8} cost {}  opened {}  ({} tree nodes)",
            fmt_decimal(&cost, 6),
            fmt_decimal(&eval_opened(&tree, &inst)?, 6),
            tree.len()
        );
    }
    Ok(())
}
