//! A user-defined decision rule plugged into the simulator: best fit by
//! expected usage, opening only when every bin is past half full.

use adaptive_binpack::engine::{monte_carlo, run_episode, Choice, View};
use adaptive_binpack::generators::named::exp_blocks;
use adaptive_binpack::num::qi;
use adaptive_binpack::policies::Policy;
use adaptive_binpack::Rng;

struct FullestUnderHalf;

impl Policy for FullestUnderHalf {
    fn decide(&self, v: &View) -> Choice {
        v.bins
            .iter()
            .enumerate()
            .filter(|(_, b)| !b.broken && b.usage <= v.cap / 2.0)
            .max_by(|a, b| a.1.usage.total_cmp(&b.1.usage))
            .map_or(Choice::Open, |(j, _)| Choice::Use(j))
    }

    fn name(&self) -> String {
        "fullest-under-half".into()
    }
}

fn main() -> adaptive_binpack::Result<()> {
    let inst = exp_blocks(300, &qi(20))?.compile()?;
    let rec = run_episode(&inst, &FullestUnderHalf, &mut Rng::new(3, 0))?;
    println!("one episode: {} bins, {} broken, cost {}", rec.opened, rec.broken, rec.cost);
    let s = monte_carlo(&inst, &FullestUnderHalf, 500, 3)?;
    println!("{}: mean cost {:.2} ± {:.2}", s.policy, s.mean_cost, s.stderr);
    Ok(())
}
