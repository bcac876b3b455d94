//! Discretize a small instance, solve the level-vector DP at bin size
//! 1 + 4ε, and follow the resulting policy on real items at 1 + 6ε.

use adaptive_binpack::exact::{optimal_cost_dp, DEFAULT_MAX_STATES};
use adaptive_binpack::num::{fmt_decimal, fmt_rational, q, qi};
use adaptive_binpack::ptas::{discretize_instance, ptas_dp, track_monte_carlo, DiscretizationParams};
use adaptive_binpack::{Instance, SizeDistribution};

fn main() -> adaptive_binpack::Result<()> {
    let items = ["discrete:0.001@1/2,0.45@1/2", "discrete:0.3@2/3,0.8@1/3", "discrete:0.6@1/2,1.1@1/2", "point:0.25"]
        .iter()
        .map(|s| SizeDistribution::parse(s))
        .collect::<adaptive_binpack::Result<Vec<_>>>()?;
    let inst = Instance::new(items, qi(5), qi(1))?;
    let eps = q(3, 10);
    // a grid of ε⁴ keeps the level count small
    let params = DiscretizationParams::with_grid(eps.clone(), &eps * &eps * &eps * &eps)?;
    let hat = discretize_instance(&inst, &params)?;
    for (i, d) in hat.items().enumerate() {
        println!("item {i}: {}", d.to_json());
    }
    let opt = optimal_cost_dp(&inst, DEFAULT_MAX_STATES)?.value;
    let sol = ptas_dp(&hat, &params, DEFAULT_MAX_STATES)?;
    println!("optimum at capacity 1:  {}", fmt_decimal(&opt, 6));
    println!("DP at capacity {}: {} ({} states)", fmt_rational(&params.dp_capacity()), fmt_decimal(&sol.value, 6), sol.table.len());
    let st = track_monte_carlo(&sol.table, &inst, &params, 20_000, 7, None)?;
    println!(
        "tracked at capacity {}: mean {:.4} ± {:.4}, discretized mean {:.4}",
        fmt_rational(&params.track_capacity()),
        st.mean_cost,
        st.stderr,
        st.mean_hat_cost
    );
    Ok(())
}
