//! Monte Carlo comparison of the online policies on the three-point family,
//! against the best single-bin policy.

use adaptive_binpack::engine::{monte_carlo_with, McOptions};
use adaptive_binpack::exact::{single_bin_optimal_iid, DEFAULT_USAGE_LIMIT};
use adaptive_binpack::generators::named::{three_point, three_point_law};
use adaptive_binpack::num::qi;
use adaptive_binpack::policies::PolicyConfig;
use adaptive_binpack::Q;
use num_traits::One;

fn main() -> adaptive_binpack::Result<()> {
    let (n, c) = (5_000, qi(50));
    let inst = three_point(n, &c)?;
    let compiled = inst.compile()?;
    let reference = single_bin_optimal_iid::<f64>(&three_point_law(&c)?, n, &c, &Q::one(), DEFAULT_USAGE_LIMIT)?;
    let opts = McOptions { checkpoints: vec![1000, 2500, n], workers: None };
    println!("{:<12} {:>8} {:>10} {:>10} {:>8}", "policy", "prefix", "mean", "stderr", "ratio");
    for spec in ["bg:1", "bg:sqrt(2)", "bg:2", "fg", "tg:2/5", "mdp"] {
        let policy = PolicyConfig::parse(spec)?.prepare(&inst, &compiled)?;
        let s = monte_carlo_with(&compiled, policy.as_ref(), 200, 1, &opts)?;
        for p in &s.prefixes {
            println!(
                "{:<12} {:>8} {:>10.2} {:>10.2} {:>8.3}",
                s.policy,
                p.prefix,
                p.mean_cost,
                p.stderr,
                p.mean_cost / reference[p.prefix]
            );
        }
    }
    Ok(())
}
