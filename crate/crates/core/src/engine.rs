//! The packing state machine and the Monte Carlo harness.
//!
//! Sizes inside the engine are in the scaled units of a
//! [`CompiledInstance`]. Every item consumes exactly one uniform draw, so
//! two policies run with the same `(seed, trial)` see the same outcomes, and
//! the first `k` items of a run are a run of the length-`k` prefix.

use rayon::prelude::*;
use serde::Serialize;

use crate::dist::Rng;
use crate::error::{Error, Result};
use crate::instance::{CompiledInstance, CompiledLaw};
use crate::policies::Policy;

/// Env var overriding the Monte Carlo worker count.
pub const WORKERS_ENV: &str = "ADAPTIVE_BINPACK_WORKERS";

const BLOCK: u64 = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Choice {
    Open,
    Use(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BinState {
    pub usage: f64,
    pub risk: f64,
    pub broken: bool,
    /// Law index of the item that opened the bin.
    pub origin_law: u32,
    pub items: u32,
}

#[derive(Clone, Debug, Default)]
pub struct PackingState {
    pub bins: Vec<BinState>,
    pub opened: usize,
    pub broken: usize,
    pub last_opened: Option<usize>,
}

/// What a policy sees before item `t` is packed.
#[derive(Clone, Copy)]
pub struct View<'a> {
    pub t: usize,
    pub bins: &'a [BinState],
    pub last_opened: Option<usize>,
    pub law: &'a CompiledLaw,
    pub law_index: usize,
    pub cap: f64,
    pub penalty: f64,
}

impl View<'_> {
    /// Overflow probability of the incoming item in a bin at `usage`.
    #[inline]
    pub fn overflow_prob(&self, usage: f64) -> f64 {
        self.law.tail(self.cap - usage)
    }
}

impl PackingState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn view<'a>(&'a self, inst: &'a CompiledInstance, t: usize) -> View<'a> {
        View {
            t,
            bins: &self.bins,
            last_opened: self.last_opened,
            law: inst.law(t),
            law_index: inst.law_of[t] as usize,
            cap: inst.cap,
            penalty: inst.penalty,
        }
    }

    /// Packs an item of realized `size`. Risk is charged before the add.
    /// Returns the receiving bin.
    pub fn pack_step(&mut self, choice: Choice, size: f64, law: &CompiledLaw, law_index: usize, cap: f64) -> Result<usize> {
        let j = match choice {
            Choice::Open => {
                self.bins.push(BinState { usage: 0.0, risk: 0.0, broken: false, origin_law: law_index as u32, items: 0 });
                self.opened += 1;
                self.last_opened = Some(self.bins.len() - 1);
                self.bins.len() - 1
            }
            Choice::Use(j) => match self.bins.get(j) {
                None => return Err(Error::UseOfNonexistentBin(j)),
                Some(b) if b.broken => return Err(Error::UseOfBrokenBin(j)),
                Some(_) => j,
            },
        };
        let b = &mut self.bins[j];
        b.risk += law.tail(cap - b.usage);
        b.usage += size;
        b.items += 1;
        if b.usage > cap {
            b.broken = true;
            self.broken += 1;
        }
        Ok(j)
    }

    pub fn cost(&self, penalty: f64) -> f64 {
        self.opened as f64 + penalty * self.broken as f64
    }

    pub fn total_risk(&self) -> f64 {
        self.bins.iter().map(|b| b.risk).sum()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BinRecord {
    /// `(item index, size)` in original units.
    pub items: Vec<(usize, f64)>,
    pub risk: f64,
    /// Sum of `min(X, cap) / cap` over the bin's items.
    pub truncated_sum: f64,
    pub broken: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EpisodeRecord {
    pub opened: usize,
    pub broken: usize,
    pub cost: f64,
    pub bins: Vec<BinRecord>,
}

/// Runs one episode and records every placement.
pub fn run_episode(inst: &CompiledInstance, policy: &dyn Policy, rng: &mut Rng) -> Result<EpisodeRecord> {
    let mut items: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut trunc: Vec<f64> = Vec::new();
    let state = drive(inst, policy, rng, &[], &mut |_, j, t, x| {
        if j == items.len() {
            items.push(Vec::new());
            trunc.push(0.0);
        }
        items[j].push((t, x / inst.scale));
        trunc[j] += x.min(inst.cap) / inst.cap;
    }, &mut |_| {})?;
    let bins = state
        .bins
        .iter()
        .zip(items)
        .zip(trunc)
        .map(|((b, items), truncated_sum)| BinRecord { items, risk: b.risk, truncated_sum, broken: b.broken })
        .collect();
    Ok(EpisodeRecord {
        opened: state.opened,
        broken: state.broken,
        cost: state.cost(inst.penalty),
        bins,
    })
}

/// Core loop. `on_pack(state, bin, t, size)` runs after each placement and
/// `on_checkpoint(state)` after item `k-1` for each `k` in `checkpoints`.
fn drive(
    inst: &CompiledInstance,
    policy: &dyn Policy,
    rng: &mut Rng,
    checkpoints: &[usize],
    on_pack: &mut dyn FnMut(&PackingState, usize, usize, f64),
    on_checkpoint: &mut dyn FnMut(&PackingState),
) -> Result<PackingState> {
    let mut state = PackingState::new();
    let mut session = policy.session();
    let mut next_cp = 0;
    for t in 0..inst.len() {
        let choice = session.decide(&state.view(inst, t));
        let law = inst.law(t);
        let x = law.draw(rng.uniform());
        let j = state.pack_step(choice, x, law, inst.law_of[t] as usize, inst.cap)?;
        session.update(t, j, &state.bins[j]);
        on_pack(&state, j, t, x);
        while next_cp < checkpoints.len() && checkpoints[next_cp] == t + 1 {
            on_checkpoint(&state);
            next_cp += 1;
        }
    }
    Ok(state)
}

/// Running mean and co-moment matrix of a `K`-vector, merged pairwise.
#[derive(Clone, Debug)]
pub struct CoMoments<const K: usize> {
    pub n: u64,
    pub mean: [f64; K],
    pub m2: [[f64; K]; K],
}

impl<const K: usize> Default for CoMoments<K> {
    fn default() -> Self {
        Self { n: 0, mean: [0.0; K], m2: [[0.0; K]; K] }
    }
}

impl<const K: usize> CoMoments<K> {
    pub fn push(&mut self, x: [f64; K]) {
        self.n += 1;
        let n = self.n as f64;
        let mut d = [0.0; K];
        for k in 0..K {
            d[k] = x[k] - self.mean[k];
            self.mean[k] += d[k] / n;
        }
        for a in 0..K {
            for b in 0..K {
                self.m2[a][b] += d[a] * (x[b] - self.mean[b]);
            }
        }
    }

    pub fn merge(&mut self, o: &Self) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = o.clone();
            return;
        }
        let (na, nb) = (self.n as f64, o.n as f64);
        let n = na + nb;
        let mut d = [0.0; K];
        for k in 0..K {
            d[k] = o.mean[k] - self.mean[k];
        }
        for a in 0..K {
            for b in 0..K {
                self.m2[a][b] += o.m2[a][b] + d[a] * d[b] * na * nb / n;
            }
        }
        for k in 0..K {
            self.mean[k] += d[k] * nb / n;
        }
        self.n += o.n;
    }

    /// Mean of `w · x`.
    pub fn combo_mean(&self, w: [f64; K]) -> f64 {
        (0..K).map(|k| w[k] * self.mean[k]).sum()
    }

    /// Standard error of the mean of `w · x` (sample variance over `n`).
    pub fn combo_stderr(&self, w: [f64; K]) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let mut q = 0.0;
        for a in 0..K {
            for b in 0..K {
                q += w[a] * w[b] * self.m2[a][b];
            }
        }
        let var = (q / (self.n - 1) as f64).max(0.0);
        (var / self.n as f64).sqrt()
    }
}

/// Per bin index counts across trials.
#[derive(Clone, Debug, Default, Serialize)]
pub struct BinCounts {
    pub opens: u64,
    pub breaks: u64,
    pub trunc_sum: f64,
    pub trunc_sq: f64,
}

#[derive(Clone, Debug, Default)]
struct Accum {
    main: CoMoments<4>,
    bins: Vec<BinCounts>,
    prefixes: Vec<CoMoments<2>>,
}

impl Accum {
    fn merge(&mut self, o: &Accum) {
        self.main.merge(&o.main);
        if self.bins.len() < o.bins.len() {
            self.bins.resize(o.bins.len(), BinCounts::default());
        }
        for (a, b) in self.bins.iter_mut().zip(&o.bins) {
            a.opens += b.opens;
            a.breaks += b.breaks;
            a.trunc_sum += b.trunc_sum;
            a.trunc_sq += b.trunc_sq;
        }
        if self.prefixes.is_empty() {
            self.prefixes = o.prefixes.clone();
        } else {
            for (a, b) in self.prefixes.iter_mut().zip(&o.prefixes) {
                a.merge(b);
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BinFrequency {
    pub bin: usize,
    pub open_freq: f64,
    pub break_freq: f64,
    pub mean_truncated: f64,
    /// Mean of the squared truncated sum.
    pub truncated_sq: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PrefixStats {
    pub prefix: usize,
    pub mean_cost: f64,
    pub stderr: f64,
    pub mean_opened: f64,
    pub mean_broken: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MonteCarloStats {
    pub policy: String,
    pub trials: u64,
    pub seed: u64,
    pub penalty: f64,
    pub mean_cost: f64,
    pub stderr: f64,
    pub mean_opened: f64,
    pub mean_broken: f64,
    pub mean_total_risk: f64,
    pub mean_truncated: f64,
    pub per_bin: Vec<BinFrequency>,
    pub prefixes: Vec<PrefixStats>,
    #[serde(skip)]
    moments: CoMoments<4>,
}

impl MonteCarloStats {
    /// Mean and standard error of `w · (opened, broken, total_risk, truncated)`.
    pub fn combo(&self, w: [f64; 4]) -> (f64, f64) {
        (self.moments.combo_mean(w), self.moments.combo_stderr(w))
    }

    /// `mean(broken) - mean(total risk)` and its standard error.
    pub fn risk_gap(&self) -> (f64, f64) {
        self.combo([0.0, 1.0, -1.0, 0.0])
    }

    /// `mean(cost) - (1+γ)·mean(opened)` and its standard error.
    pub fn cost_vs_opened_gap(&self, gamma: f64) -> (f64, f64) {
        self.combo([-gamma, self.penalty, 0.0, 0.0])
    }

    /// `mean(truncated sum) - mean(cost)` and its standard error.
    pub fn size_vs_cost_gap(&self) -> (f64, f64) {
        self.combo([-1.0, -self.penalty, 0.0, 1.0])
    }

    /// For bin `j`: mean and standard error of `1{break j} - b·1{open j}`.
    pub fn break_gap(&self, j: usize, b: f64) -> (f64, f64) {
        let m = self.trials as f64;
        let (po, pb) = match self.per_bin.get(j) {
            Some(f) => (f.open_freq, f.break_freq),
            None => return (0.0, 0.0),
        };
        let mean = pb - b * po;
        let second = pb * (1.0 - 2.0 * b) + b * b * po;
        (mean, var_to_stderr(second - mean * mean, m))
    }

    /// For bin `j`: mean and standard error of `T_j - 2·1{open j}` where `T_j`
    /// is the truncated size sum of the bin.
    pub fn size_gap(&self, j: usize) -> (f64, f64) {
        let m = self.trials as f64;
        let f = match self.per_bin.get(j) {
            Some(f) => f,
            None => return (0.0, 0.0),
        };
        let mean = f.mean_truncated - 2.0 * f.open_freq;
        let second = f.truncated_sq - 4.0 * f.mean_truncated + 4.0 * f.open_freq;
        (mean, var_to_stderr(second - mean * mean, m))
    }
}

fn var_to_stderr(pop_var: f64, m: f64) -> f64 {
    if m < 2.0 {
        return 0.0;
    }
    let var = pop_var.max(0.0) * m / (m - 1.0);
    (var / m).sqrt()
}

#[derive(Clone, Debug, Default)]
pub struct McOptions {
    /// Report prefix statistics after these item counts.
    pub checkpoints: Vec<usize>,
    /// Worker threads; `None` reads the env var, else all cores.
    pub workers: Option<usize>,
}

pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&w: &usize| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

pub fn monte_carlo(inst: &CompiledInstance, policy: &dyn Policy, trials: u64, seed: u64) -> Result<MonteCarloStats> {
    monte_carlo_with(inst, policy, trials, seed, &McOptions::default())
}

/// Trial `i` uses stream `i` of `seed`. Trials run in fixed blocks whose
/// accumulators are merged in block order, so results do not depend on the
/// worker count.
pub fn monte_carlo_with(
    inst: &CompiledInstance,
    policy: &dyn Policy,
    trials: u64,
    seed: u64,
    opts: &McOptions,
) -> Result<MonteCarloStats> {
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    let mut cps: Vec<usize> = opts.checkpoints.iter().copied().filter(|&k| k >= 1 && k <= inst.len()).collect();
    cps.sort_unstable();
    cps.dedup();
    let blocks = trials.div_ceil(BLOCK);
    let run_block = |b: u64| -> Result<Accum> {
        let mut acc = Accum { prefixes: vec![CoMoments::default(); cps.len()], ..Default::default() };
        for trial in b * BLOCK..((b + 1) * BLOCK).min(trials) {
            let mut rng = Rng::new(seed, trial);
            let mut trunc: Vec<f64> = Vec::new();
            let mut cp = 0;
            let prefixes = &mut acc.prefixes;
            let state = drive(
                inst,
                policy,
                &mut rng,
                &cps,
                &mut |_, j, _, x| {
                    if j == trunc.len() {
                        trunc.push(0.0);
                    }
                    trunc[j] += x.min(inst.cap) / inst.cap;
                },
                &mut |s| {
                    prefixes[cp].push([s.opened as f64, s.broken as f64]);
                    cp += 1;
                },
            )?;
            let tsum: f64 = trunc.iter().sum();
            acc.main.push([state.opened as f64, state.broken as f64, state.total_risk(), tsum]);
            if acc.bins.len() < state.bins.len() {
                acc.bins.resize(state.bins.len(), BinCounts::default());
            }
            for (j, b) in state.bins.iter().enumerate() {
                let c = &mut acc.bins[j];
                c.opens += 1;
                c.breaks += b.broken as u64;
                c.trunc_sum += trunc[j];
                c.trunc_sq += trunc[j] * trunc[j];
            }
        }
        Ok(acc)
    };
    let workers = opts.workers.unwrap_or_else(default_workers).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
    let parts: Vec<Result<Accum>> = pool.install(|| (0..blocks).into_par_iter().map(run_block).collect());
    let mut total = Accum { prefixes: vec![CoMoments::default(); cps.len()], ..Default::default() };
    for p in parts {
        total.merge(&p?);
    }
    Ok(finish(policy.name(), inst.penalty, trials, seed, &cps, total))
}

fn finish(policy: String, penalty: f64, trials: u64, seed: u64, cps: &[usize], acc: Accum) -> MonteCarloStats {
    let m = trials as f64;
    let w_cost = [1.0, penalty, 0.0, 0.0];
    let per_bin = acc
        .bins
        .iter()
        .enumerate()
        .map(|(bin, c)| BinFrequency {
            bin,
            open_freq: c.opens as f64 / m,
            break_freq: c.breaks as f64 / m,
            mean_truncated: c.trunc_sum / m,
            truncated_sq: c.trunc_sq / m,
        })
        .collect();
    let prefixes = cps
        .iter()
        .zip(&acc.prefixes)
        .map(|(&prefix, mo)| PrefixStats {
            prefix,
            mean_cost: mo.combo_mean([1.0, penalty]),
            stderr: mo.combo_stderr([1.0, penalty]),
            mean_opened: mo.mean[0],
            mean_broken: mo.mean[1],
        })
        .collect();
    MonteCarloStats {
        policy,
        trials,
        seed,
        penalty,
        mean_cost: acc.main.combo_mean(w_cost),
        stderr: acc.main.combo_stderr(w_cost),
        mean_opened: acc.main.mean[0],
        mean_broken: acc.main.mean[1],
        mean_total_risk: acc.main.mean[2],
        mean_truncated: acc.main.mean[3],
        per_bin,
        prefixes,
        moments: acc.main,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law_point(v: f64) -> CompiledLaw {
        CompiledLaw::Discrete { values: vec![v], suffix: vec![1.0, 0.0], cum: vec![f64::INFINITY] }
    }

    #[test]
    fn pack_step_examples() {
        let l = law_point(30.0);
        let mut s = PackingState::new();
        s.pack_step(Choice::Open, 30.0, &l, 0, 100.0).unwrap();
        assert_eq!((s.opened, s.broken, s.bins[0].usage), (1, 0, 30.0));

        s.bins[0].usage = 80.0;
        s.pack_step(Choice::Use(0), 30.0, &l, 0, 100.0).unwrap();
        assert!(s.bins[0].broken);
        assert_eq!(s.broken, 1);
        assert_eq!(s.bins[0].risk, 1.0);

        let mut s = PackingState::new();
        s.pack_step(Choice::Open, 70.0, &l, 0, 100.0).unwrap();
        s.pack_step(Choice::Use(0), 30.0, &l, 0, 100.0).unwrap();
        assert!(!s.bins[0].broken);
        assert_eq!(s.bins[0].usage, 100.0);
    }

    #[test]
    fn pack_step_errors() {
        let l = law_point(30.0);
        let mut s = PackingState::new();
        assert!(matches!(s.pack_step(Choice::Use(0), 1.0, &l, 0, 100.0), Err(Error::UseOfNonexistentBin(0))));
        s.pack_step(Choice::Open, 200.0, &l, 0, 100.0).unwrap();
        assert!(matches!(s.pack_step(Choice::Use(0), 1.0, &l, 0, 100.0), Err(Error::UseOfBrokenBin(0))));
    }

    #[test]
    fn comoments_merge_matches_sequential() {
        let xs: Vec<[f64; 2]> = (0..100).map(|i| [i as f64, ((i * 7) % 13) as f64]).collect();
        let mut all = CoMoments::<2>::default();
        xs.iter().for_each(|x| all.push(*x));
        let mut a = CoMoments::<2>::default();
        let mut b = CoMoments::<2>::default();
        xs[..37].iter().for_each(|x| a.push(*x));
        xs[37..].iter().for_each(|x| b.push(*x));
        a.merge(&b);
        for i in 0..2 {
            assert!((a.mean[i] - all.mean[i]).abs() < 1e-12);
            for j in 0..2 {
                assert!((a.m2[i][j] - all.m2[i][j]).abs() < 1e-8);
            }
        }
    }
}
