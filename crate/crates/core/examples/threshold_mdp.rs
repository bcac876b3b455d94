//! Threshold of the discounted single-bin MDP for an i.i.d. law, and the
//! exact cost of the resulting one-bin-at-a-time policy.

use adaptive_binpack::exact::{build_policy_tree, eval_policy_tree, single_bin_optimal_iid, DEFAULT_TREE_LIMIT, DEFAULT_USAGE_LIMIT};
use adaptive_binpack::mdp::{threshold, MdpOptions};
use adaptive_binpack::num::{fmt_decimal, fmt_rational, qi};
use adaptive_binpack::policies::PolicyConfig;
use adaptive_binpack::{Instance, Q, SizeDistribution};
use num_traits::One;

fn main() -> adaptive_binpack::Result<()> {
    let d = SizeDistribution::parse("discrete:0.2@1/2,0.35@3/10,0.7@1/5")?;
    let c = qi(8);
    let rep = threshold(&d, &c, &Q::one(), &MdpOptions::default())?;
    println!(
        "alpha {} after {} iterations over {} states (interval {}, monotone {})",
        fmt_rational(&rep.alpha),
        rep.iterations,
        rep.states,
        rep.interval,
        rep.monotone
    );
    let n = 6;
    let inst = Instance::iid(d.clone(), n, c.clone(), Q::one())?;
    let policy = PolicyConfig::MdpThreshold.prepare(&inst, &inst.compile()?)?;
    let cost = eval_policy_tree(&build_policy_tree(&inst, policy.as_ref(), DEFAULT_TREE_LIMIT)?, &inst)?;
    let single = single_bin_optimal_iid::<Q>(&d, n, &c, &Q::one(), DEFAULT_USAGE_LIMIT)?;
    println!("{}: exact cost {} vs best single-bin {}", policy.name(), fmt_decimal(&cost, 6), fmt_decimal(&single[n], 6));
    Ok(())
}
