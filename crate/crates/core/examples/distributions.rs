//! Item laws: parsing, overflow probabilities, truncated means and sampling.

use adaptive_binpack::num::{fmt_rational, q};
use adaptive_binpack::{Rng, SizeDistribution};

fn main() -> adaptive_binpack::Result<()> {
    let d = SizeDistribution::parse("discrete:0@49/50,0.4@1/100,0.61@1/100")?;
    let e = SizeDistribution::exponential(50f64.ln())?;
    let cap = q(1, 1);
    for used in [q(0, 1), q(2, 5), q(61, 100)] {
        println!(
            "used {:>6}: discrete P(overflow) = {:<8} exponential P(overflow) = {:.6}",
            fmt_rational(&used),
            d.overflow_prob(&used, &cap)?.to_string(),
            e.overflow_prob(&used, &cap)?.to_f64()
        );
    }
    println!("E[min(X, 1)] = {} / {:.6}", d.truncated_mean(&cap), e.truncated_mean(&cap).to_f64());

    let mut rng = Rng::new(42, 0);
    let draws: Vec<String> = (0..8).map(|_| format!("{:.3}", e.sample(&mut rng).to_f64())).collect();
    println!("exponential draws: {}", draws.join(" "));
    Ok(())
}
