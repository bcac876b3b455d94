//! Budgeted greedy with γ = 1 against the per-rate split on the two-rate
//! exponential family, next to the lower bound n1/2 and the upper bound on
//! the optimum.

use adaptive_binpack::engine::monte_carlo;
use adaptive_binpack::generators::named::exp_lower_bound;
use adaptive_binpack::num::{q, qi};
use adaptive_binpack::policies::PolicyConfig;

fn main() -> adaptive_binpack::Result<()> {
    let n1 = 3;
    let lb = exp_lower_bound(n1, &q(4, 5), &qi(150))?;
    println!("β = {:.1}, μ = {:.1}, λ = {:.3}, k = {}, {} items", lb.beta, lb.mu, lb.lambda, lb.k, lb.instance.len());
    let compiled = lb.instance.compile()?;
    for spec in ["bg:1", "split:2"] {
        let policy = PolicyConfig::parse(spec)?.prepare(&lb.instance, &compiled)?;
        let s = monte_carlo(&compiled, policy.as_ref(), 300, 5)?;
        println!("{spec:<8} mean cost {:.3} ± {:.3} (opened {:.1}, broken {:.3})", s.mean_cost, s.stderr, s.mean_opened, s.mean_broken);
    }
    println!("n1/2 = {:.1}, upper bound on the optimum {:.1}", n1 as f64 / 2.0, lb.opt_bound);
    Ok(())
}
