//! Runs a discretized policy on the original items.
//!
//! One uniform draw per item yields the coupled triple `(X, X', X̂)`. Each
//! bin of the discretized run maps to a chain of real bins: items follow
//! the discretized choice into the current real copy, and a copy is retired
//! once `|X(B) − X'(B)| > ε`, so the next item for that source opens a new
//! copy. Real bins have size `1 + 6ε`.

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{Rng, SizeDistribution};
use crate::engine::default_workers;
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::num::{fmt_rational, from_f64, to_f64, Q};
use crate::ptas::discretize::{discretize_step1, level_of, normalize, round_up, DiscretizationParams};
use crate::ptas::dp::{LevelVector, PtasAction, PtasTable};

/// One law prepared for coupled sampling.
#[derive(Clone, Debug)]
pub struct CoupledLaw {
    /// Normalized values and cumulative probabilities.
    atoms: Vec<(Q, Q)>,
    p_small: Q,
    /// Small draws with `u` below this map to `X' = 0`, the rest to `ε⁴`.
    zero_cut: Q,
    small_cut: Q,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledDraw {
    pub x: Q,
    pub x1: Q,
    pub xhat: Q,
}

impl CoupledLaw {
    pub fn new(d: &SizeDistribution, cap: &Q, params: &DiscretizationParams) -> Result<Self> {
        let law = normalize(d, cap, params)?;
        let step1 = discretize_step1(&law, params)?;
        let small_cut = params.small_cut();
        let mut cum = Q::zero();
        let mut atoms = Vec::new();
        let mut p_small = Q::zero();
        for a in law.atoms().unwrap() {
            cum += &a.prob;
            if a.value <= small_cut {
                p_small = cum.clone();
            }
            atoms.push((a.value.clone(), cum.clone()));
        }
        let up: Q = step1.atoms().unwrap().iter().filter(|a| a.value == small_cut).map(|a| a.prob.clone()).sum();
        let zero_cut = &p_small - &up;
        Ok(Self { atoms, p_small, zero_cut, small_cut })
    }

    /// `X` by the inverse CDF of `u`, `X'` from the same `u` inside the
    /// small band `[0, P(X ≤ ε⁴))`, then `X̂` by rounding.
    pub fn draw(&self, u: &Q, params: &DiscretizationParams) -> CoupledDraw {
        let k = self.atoms.iter().position(|(_, c)| u < c).unwrap_or(self.atoms.len() - 1);
        let x = self.atoms[k].0.clone();
        let x1 = if u < &self.p_small {
            if u < &self.zero_cut {
                Q::zero()
            } else {
                self.small_cut.clone()
            }
        } else {
            x.clone()
        };
        let xhat = round_up(&x1, params);
        CoupledDraw { x, x1, xhat }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrackRecord {
    /// Real bins opened, copies included.
    pub opened: usize,
    pub broken: usize,
    pub cost: f64,
    pub hat_opened: usize,
    pub hat_broken: usize,
    pub hat_cost: f64,
    /// Real copies per discretized bin, in opening order.
    pub copies: Vec<u32>,
}

struct HatBin {
    level: i64,
    broken: bool,
    copy: Option<usize>,
    copies: u32,
}

struct RealBin {
    x: Q,
    x1: Q,
    retired: bool,
}

/// Laws prepared once per instance.
pub struct Tracker<'a> {
    table: &'a PtasTable,
    params: &'a DiscretizationParams,
    laws: Vec<CoupledLaw>,
    law_of: Vec<u32>,
    unit: Q,
    hat_cap: i64,
    real_cap: Q,
    penalty: Q,
}

impl<'a> Tracker<'a> {
    pub fn new(table: &'a PtasTable, inst: &Instance, params: &'a DiscretizationParams) -> Result<Self> {
        table.check_params(params)?;
        if let Some(i) = inst.first_non_discrete() {
            return Err(Error::NonDiscreteItem(i));
        }
        let laws = inst
            .laws()
            .iter()
            .map(|d| CoupledLaw::new(d, inst.capacity(), params))
            .collect::<Result<Vec<_>>>()?;
        let unit = params.unit();
        let hat_cap = i64::try_from((&table.capacity / &unit).floor().to_integer())
            .map_err(|_| Error::InvalidParams("capacity has too many levels".into()))?;
        Ok(Self {
            table,
            params,
            laws,
            law_of: inst.law_indices().to_vec(),
            unit,
            hat_cap,
            real_cap: params.track_capacity(),
            penalty: inst.penalty().clone(),
        })
    }

    pub fn episode(&self, rng: &mut Rng) -> Result<TrackRecord> {
        let eps = self.params.eps();
        let mut hats: Vec<HatBin> = Vec::new();
        let mut reals: Vec<RealBin> = Vec::new();
        let (mut broken, mut hat_broken) = (0usize, 0usize);
        for t in 0..self.law_of.len() {
            let state = LevelVector::from_levels(
                t as u32,
                hats.iter().filter(|h| !h.broken).map(|h| h.level as u32),
            );
            let action = self
                .table
                .get(&state)
                .ok_or_else(|| Error::InvalidPolicy(format!("state at item {t} is missing from the action table")))?;
            let j = match action {
                PtasAction::Open => {
                    hats.push(HatBin { level: 0, broken: false, copy: None, copies: 0 });
                    hats.len() - 1
                }
                PtasAction::Use(l) => hats
                    .iter()
                    .position(|h| !h.broken && h.level == l as i64)
                    .ok_or_else(|| Error::InvalidPolicy(format!("no live bin at level {l} for item {t}")))?,
            };
            let u = from_f64(rng.uniform());
            let d = self.laws[self.law_of[t] as usize].draw(&u, self.params);
            let c = match hats[j].copy {
                Some(c) if !reals[c].retired => c,
                _ => {
                    reals.push(RealBin { x: Q::zero(), x1: Q::zero(), retired: false });
                    hats[j].copy = Some(reals.len() - 1);
                    hats[j].copies += 1;
                    reals.len() - 1
                }
            };
            let h = &mut hats[j];
            h.level += level_of(&d.xhat, &self.unit)?;
            if h.level > self.hat_cap {
                h.broken = true;
                hat_broken += 1;
            }
            let r = &mut reals[c];
            r.x += &d.x;
            r.x1 += &d.x1;
            if r.x > self.real_cap {
                broken += 1;
                r.retired = true;
                if !h.broken {
                    let usage = Q::from_integer(h.level.into()) * &self.unit;
                    return Err(Error::DeviationLogicBreach { item: t, source_usage: fmt_rational(&usage) });
                }
            }
            if (&r.x - &r.x1).abs() > *eps {
                r.retired = true;
            }
        }
        let c = to_f64(&self.penalty);
        Ok(TrackRecord {
            opened: reals.len(),
            broken,
            cost: reals.len() as f64 + c * broken as f64,
            hat_opened: hats.len(),
            hat_broken,
            hat_cost: hats.len() as f64 + c * hat_broken as f64,
            copies: hats.iter().map(|h| h.copies).collect(),
        })
    }
}

/// One tracked episode on the original items.
pub fn track_execute(table: &PtasTable, inst: &Instance, params: &DiscretizationParams, rng: &mut Rng) -> Result<TrackRecord> {
    Tracker::new(table, inst, params)?.episode(rng)
}

#[derive(Clone, Debug, Serialize)]
pub struct SourceStats {
    pub bin: usize,
    /// Fraction of episodes where the discretized run opened this bin.
    pub open_freq: f64,
    /// Mean number of real copies, zero when not opened.
    pub mean_copies: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrackStats {
    pub trials: u64,
    pub seed: u64,
    pub mean_cost: f64,
    pub stderr: f64,
    pub mean_opened: f64,
    pub mean_broken: f64,
    pub mean_hat_cost: f64,
    pub hat_stderr: f64,
    pub sources: Vec<SourceStats>,
}

#[derive(Default)]
struct Acc {
    n: u64,
    cost: f64,
    cost_sq: f64,
    hat: f64,
    hat_sq: f64,
    opened: f64,
    broken: f64,
    opens: Vec<u64>,
    copies: Vec<u64>,
}

impl Acc {
    fn push(&mut self, r: &TrackRecord) {
        self.n += 1;
        self.cost += r.cost;
        self.cost_sq += r.cost * r.cost;
        self.hat += r.hat_cost;
        self.hat_sq += r.hat_cost * r.hat_cost;
        self.opened += r.opened as f64;
        self.broken += r.broken as f64;
        if self.opens.len() < r.copies.len() {
            self.opens.resize(r.copies.len(), 0);
            self.copies.resize(r.copies.len(), 0);
        }
        for (j, &k) in r.copies.iter().enumerate() {
            self.opens[j] += 1;
            self.copies[j] += k as u64;
        }
    }

    fn merge(&mut self, o: Acc) {
        self.n += o.n;
        self.cost += o.cost;
        self.cost_sq += o.cost_sq;
        self.hat += o.hat;
        self.hat_sq += o.hat_sq;
        self.opened += o.opened;
        self.broken += o.broken;
        if self.opens.len() < o.opens.len() {
            self.opens.resize(o.opens.len(), 0);
            self.copies.resize(o.opens.len(), 0);
        }
        for j in 0..o.opens.len() {
            self.opens[j] += o.opens[j];
            self.copies[j] += o.copies[j];
        }
    }
}

fn stderr(sum: f64, sq: f64, m: f64) -> f64 {
    if m < 2.0 {
        return 0.0;
    }
    let mean = sum / m;
    let var = ((sq / m - mean * mean) * m / (m - 1.0)).max(0.0);
    (var / m).sqrt()
}

const BLOCK: u64 = 64;

/// Tracked episodes `0..trials`, episode `i` on stream `i` of `seed`. Block
/// sums are merged in block order, so the result does not depend on
/// `workers`.
pub fn track_monte_carlo(
    table: &PtasTable,
    inst: &Instance,
    params: &DiscretizationParams,
    trials: u64,
    seed: u64,
    workers: Option<usize>,
) -> Result<TrackStats> {
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    let tracker = Tracker::new(table, inst, params)?;
    let run = |b: u64| -> Result<Acc> {
        let mut acc = Acc::default();
        for i in b * BLOCK..((b + 1) * BLOCK).min(trials) {
            acc.push(&tracker.episode(&mut Rng::new(seed, i))?);
        }
        Ok(acc)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or_else(default_workers).max(1))
        .build()
        .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
    let parts: Vec<Result<Acc>> = pool.install(|| (0..trials.div_ceil(BLOCK)).into_par_iter().map(run).collect());
    let mut acc = Acc::default();
    for p in parts {
        acc.merge(p?);
    }
    let m = acc.n as f64;
    Ok(TrackStats {
        trials,
        seed,
        mean_cost: acc.cost / m,
        stderr: stderr(acc.cost, acc.cost_sq, m),
        mean_opened: acc.opened / m,
        mean_broken: acc.broken / m,
        mean_hat_cost: acc.hat / m,
        hat_stderr: stderr(acc.hat, acc.hat_sq, m),
        sources: acc
            .opens
            .iter()
            .zip(&acc.copies)
            .enumerate()
            .map(|(bin, (&o, &k))| SourceStats { bin, open_freq: o as f64 / m, mean_copies: k as f64 / m })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{q, qi};
    use crate::ptas::discretize::{discretize, discretize_instance};
    use crate::ptas::dp::ptas_dp;

    fn params() -> DiscretizationParams {
        DiscretizationParams::with_grid(q(3, 10), q(81, 10_000)).unwrap()
    }

    #[test]
    fn coupled_marginals_match() {
        let p = params();
        let d = SizeDistribution::discrete(vec![
            (Q::zero(), q(1, 5)),
            (q(1, 1000), q(1, 5)),
            (q(3, 1000), q(1, 5)),
            (q(1, 2), q(2, 5)),
        ])
        .unwrap();
        let law = CoupledLaw::new(&d, &qi(1), &p).unwrap();
        let hat = discretize(&d, &p).unwrap();
        // integrate X̂ over u exactly: breakpoints are the cumulative probs and the zero cut
        let mut cuts: Vec<Q> = law.atoms.iter().map(|a| a.1.clone()).collect();
        cuts.push(law.zero_cut.clone());
        cuts.push(Q::zero());
        cuts.sort();
        cuts.dedup();
        let mut got: std::collections::BTreeMap<Q, Q> = Default::default();
        for w in cuts.windows(2) {
            let mid = (&w[0] + &w[1]) / qi(2);
            let dr = law.draw(&mid, &p);
            *got.entry(dr.xhat).or_insert_with(Q::zero) += &w[1] - &w[0];
        }
        let want: std::collections::BTreeMap<Q, Q> = hat.atoms().unwrap().iter().map(|a| (a.value.clone(), a.prob.clone())).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn deterministic_items_never_copy() {
        let p = params();
        let inst = Instance::iid(SizeDistribution::point(q(2, 5)).unwrap(), 4, qi(10), qi(1)).unwrap();
        let hat = discretize_instance(&inst, &p).unwrap();
        let sol = ptas_dp(&hat, &p, 10_000).unwrap();
        let r = track_execute(&sol.table, &inst, &p, &mut Rng::new(1, 0)).unwrap();
        assert!(r.copies.iter().all(|&k| k == 1));
        assert_eq!(r.opened, r.hat_opened);
        assert_eq!(r.cost, r.hat_cost);
        assert_eq!(r.hat_cost, to_f64(&sol.value));
    }

    #[test]
    fn mismatched_params_rejected() {
        let p = params();
        let inst = Instance::iid(SizeDistribution::point(q(2, 5)).unwrap(), 2, qi(10), qi(1)).unwrap();
        let sol = ptas_dp(&discretize_instance(&inst, &p).unwrap(), &p, 1000).unwrap();
        let other = DiscretizationParams::new(q(3, 10)).unwrap();
        assert!(matches!(track_execute(&sol.table, &inst, &other, &mut Rng::new(1, 0)), Err(Error::ParamsMismatch)));
    }
}
