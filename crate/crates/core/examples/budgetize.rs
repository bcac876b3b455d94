//! Turning an arbitrary policy tree into one that respects the risk budget,
//! and comparing its cost with the input.

use adaptive_binpack::exact::{budget_violation, budgetize_policy_tree, build_policy_tree, DEFAULT_TREE_LIMIT};
use adaptive_binpack::num::{fmt_decimal, qi, Gamma};
use adaptive_binpack::policies::PolicyConfig;
use adaptive_binpack::{Instance, SizeDistribution};

fn main() -> adaptive_binpack::Result<()> {
    let d = SizeDistribution::parse("discrete:0.2@9/10,0.9@1/10")?;
    let inst = Instance::iid(d, 5, qi(10), qi(1))?;
    let compiled = inst.compile()?;
    let fg = PolicyConfig::parse("fg")?.prepare(&inst, &compiled)?;
    let tree = build_policy_tree(&inst, fg.as_ref(), DEFAULT_TREE_LIMIT)?;
    for g in ["1", "sqrt(2)", "2"] {
        let gamma = Gamma::parse(g)?;
        println!("γ = {g}: input violation: {:?}", budget_violation(&tree, &inst, &gamma)?);
        let rep = budgetize_policy_tree(&tree, &gamma, &inst)?;
        println!(
            "  output cost {} ≤ bound {:.6} (input {}), moved {}, cuts {}, chain holds: {}, output violation: {:?}",
            fmt_decimal(&rep.output_cost, 6),
            rep.bound.to_f64(),
            fmt_decimal(&rep.input_cost, 6),
            rep.moved,
            rep.cuts,
            rep.chain_holds(),
            budget_violation(&rep.tree, &inst, &gamma)?
        );
    }
    Ok(())
}
