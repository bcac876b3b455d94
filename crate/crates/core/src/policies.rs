//! Online decision rules.
//!
//! Each rule is a pure function of a [`View`]. [`Policy::session`] may hand
//! out a stateful accelerator for long simulations; it must return the same
//! choices as [`Policy::decide`] on every state.

use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};

use crate::engine::{BinState, Choice, View};
use crate::error::{Error, Result};
use crate::instance::{CompiledInstance, CompiledLaw, Instance};
use crate::num::{fmt_rational, from_f64, parse_rational, to_f64, Gamma, BUDGET_TOL, Q};

/// `risk + p ≤ budget`, with the shared relative tolerance.
#[inline]
fn within_budget(risk: f64, p: f64, budget_tol: f64) -> bool {
    risk + p <= budget_tol
}

/// Lowest-index unbroken bin whose risk plus the incoming overflow
/// probability stays within `budget` (that is `γ/C`).
pub fn budgeted_greedy_decide(v: &View, budget: f64) -> Choice {
    let thr = budget * (1.0 + BUDGET_TOL);
    for (j, b) in v.bins.iter().enumerate() {
        if !b.broken && b.usage <= v.cap && within_budget(b.risk, v.overflow_prob(b.usage), thr) {
            return Choice::Use(j);
        }
    }
    Choice::Open
}

/// Budgeted greedy restricted to bins opened by an item of the same law.
pub fn rate_split_decide(v: &View, budget: f64) -> Choice {
    let thr = budget * (1.0 + BUDGET_TOL);
    for (j, b) in v.bins.iter().enumerate() {
        if !b.broken
            && b.origin_law as usize == v.law_index
            && within_budget(b.risk, v.overflow_prob(b.usage), thr)
        {
            return Choice::Use(j);
        }
    }
    Choice::Open
}

/// Greedy over unbroken bins with usage at most `alpha` (scaled units).
/// Uses the bin with least overflow probability when `C·p ≤ 1`.
pub fn threshold_greedy_decide(v: &View, alpha: f64) -> Choice {
    let mut best: Option<(usize, f64)> = None;
    for (j, b) in v.bins.iter().enumerate() {
        if b.broken || b.usage > alpha || b.usage > v.cap {
            continue;
        }
        let p = v.overflow_prob(b.usage);
        if best.map_or(true, |(_, bp)| p < bp) {
            best = Some((j, p));
        }
    }
    match best {
        Some((j, p)) if v.penalty * p <= 1.0 + BUDGET_TOL => Choice::Use(j),
        _ => Choice::Open,
    }
}

pub fn full_greedy_decide(v: &View) -> Choice {
    threshold_greedy_decide(v, f64::INFINITY)
}

/// One active bin, the last opened, kept while its usage is at most `alpha`.
pub fn fixed_threshold_decide(v: &View, alpha: f64) -> Choice {
    match v.last_opened {
        Some(j) if !v.bins[j].broken && v.bins[j].usage <= alpha => Choice::Use(j),
        _ => Choice::Open,
    }
}

pub trait Session {
    fn decide(&mut self, v: &View) -> Choice;
    /// Called after item `t` landed in `bin`, with the bin's new state.
    fn update(&mut self, _t: usize, _bin: usize, _state: &BinState) {}
}

pub trait Policy: Send + Sync {
    fn decide(&self, v: &View) -> Choice;
    fn name(&self) -> String;
    fn session(&self) -> Box<dyn Session + '_> {
        Box::new(Plain(self))
    }
}

struct Plain<'a, P: ?Sized>(&'a P);

impl<P: Policy + ?Sized> Session for Plain<'_, P> {
    fn decide(&mut self, v: &View) -> Choice {
        self.0.decide(v)
    }
}

fn need<'a>(spec: &str, a: Option<&'a str>) -> Result<&'a str> {
    a.ok_or_else(|| Error::InvalidPolicy(format!("{spec:?} needs a parameter")))
}

#[derive(Clone, Debug, PartialEq)]
pub enum PolicyConfig {
    BudgetedGreedy(Gamma),
    FullGreedy,
    FixedThreshold(Q),
    ThresholdGreedy(Q),
    MdpThreshold,
    /// Budgeted greedy run separately per item law.
    RateSplit(Gamma),
}

impl PolicyConfig {
    /// Parses `bg:γ`, `fg`, `ft:α`, `tg:α`, `mdp` or `split:γ`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let alpha = |a: &str| -> Result<Q> {
            let x = parse_rational(a)?;
            if x.is_negative() || x > Q::one() {
                return Err(Error::InvalidPolicy(format!("threshold {a} outside [0, 1]")));
            }
            Ok(x)
        };
        let gamma = |a: &str| -> Result<Gamma> {
            let g = Gamma::parse(a)?;
            if g.square().is_zero() {
                return Err(Error::InvalidPolicy("gamma must be positive".into()));
            }
            Ok(g)
        };
        match (kind, arg) {
            ("bg", a) => Ok(PolicyConfig::BudgetedGreedy(gamma(need(s, a)?)?)),
            ("split", a) => Ok(PolicyConfig::RateSplit(gamma(need(s, a)?)?)),
            ("fg", None) => Ok(PolicyConfig::FullGreedy),
            ("ft", a) => Ok(PolicyConfig::FixedThreshold(alpha(need(s, a)?)?)),
            ("tg", a) => Ok(PolicyConfig::ThresholdGreedy(alpha(need(s, a)?)?)),
            ("mdp", None) => Ok(PolicyConfig::MdpThreshold),
            _ => Err(Error::InvalidPolicy(format!("unknown policy {s:?}"))),
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        s.split(',').filter(|p| !p.trim().is_empty()).map(Self::parse).collect()
    }

    /// Binds the rule to an instance. The `mdp` rule solves the threshold
    /// MDP for the instance's law here.
    pub fn prepare(&self, inst: &Instance, compiled: &CompiledInstance) -> Result<Box<dyn Policy>> {
        let name = self.to_string();
        let floors = || Arc::new(Floors::new(compiled));
        let frac = |a: &Q| to_f64(&(a * inst.capacity() * from_f64(compiled.scale)));
        let budget = |g: &Gamma| g.value() / compiled.penalty;
        Ok(match self {
            PolicyConfig::BudgetedGreedy(g) => {
                Box::new(BudgetedGreedy { budget: budget(g), name, floors: Some(floors()) })
            }
            PolicyConfig::RateSplit(g) => Box::new(RateSplit { budget: budget(g), name, floors: Some(floors()) }),
            PolicyConfig::FullGreedy => {
                Box::new(ThresholdGreedy { alpha: f64::INFINITY, name, floors: Some(floors()) })
            }
            PolicyConfig::ThresholdGreedy(a) => {
                Box::new(ThresholdGreedy { alpha: frac(a), name, floors: Some(floors()) })
            }
            PolicyConfig::FixedThreshold(a) => Box::new(FixedThreshold { alpha: frac(a), name }),
            PolicyConfig::MdpThreshold => {
                if !inst.is_iid() || !inst.is_discrete() {
                    return Err(Error::InvalidPolicy("mdp needs an i.i.d. finite discrete instance".into()));
                }
                let report = crate::mdp::threshold(inst.item(0), inst.penalty(), inst.capacity(), &Default::default())?;
                let alpha = report.alpha_fraction(inst.capacity());
                Box::new(FixedThreshold { alpha: frac(&alpha), name: format!("mdp(ft:{})", fmt_rational(&alpha)) })
            }
        })
    }
}

impl fmt::Display for PolicyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyConfig::BudgetedGreedy(g) => write!(f, "bg:{g}"),
            PolicyConfig::RateSplit(g) => write!(f, "split:{g}"),
            PolicyConfig::FullGreedy => write!(f, "fg"),
            PolicyConfig::FixedThreshold(a) => write!(f, "ft:{}", fmt_rational(a)),
            PolicyConfig::ThresholdGreedy(a) => write!(f, "tg:{}", fmt_rational(a)),
            PolicyConfig::MdpThreshold => write!(f, "mdp"),
        }
    }
}

/// Per-instance data for retiring bins that can never be chosen again.
struct Floors {
    cap: f64,
    penalty: f64,
    laws: Vec<CompiledLaw>,
    /// Last item index of each law.
    last: Vec<usize>,
    mode: FloorMode,
}

enum FloorMode {
    /// Few distinct laws: minimum tail over the laws still to come.
    PerLaw,
    /// All exponential: the largest rate still to come, per position.
    ExpSuffix(Vec<f64>),
    Off,
}

const RETIRE_MARGIN: f64 = 1e-9;

impl Floors {
    fn new(inst: &CompiledInstance) -> Self {
        let mut last = vec![0; inst.laws.len()];
        for (t, &l) in inst.law_of.iter().enumerate() {
            last[l as usize] = t;
        }
        let mode = if inst.laws.len() <= 8 {
            FloorMode::PerLaw
        } else if inst.laws.iter().all(|l| !l.is_discrete()) {
            let mut m = vec![0.0; inst.len() + 1];
            for t in (0..inst.len()).rev() {
                let r = match inst.law(t) {
                    CompiledLaw::Exponential { rate } => *rate,
                    CompiledLaw::Discrete { .. } => unreachable!(),
                };
                m[t] = r.max(m[t + 1]);
            }
            FloorMode::ExpSuffix(m)
        } else {
            FloorMode::Off
        };
        Self { cap: inst.cap, penalty: inst.penalty, laws: inst.laws.clone(), last, mode }
    }

    /// A lower bound on the overflow probability at `slack` of every item
    /// after `t`. Infinite when no items remain.
    fn after(&self, t: usize, slack: f64) -> f64 {
        match &self.mode {
            FloorMode::PerLaw => self
                .laws
                .iter()
                .zip(&self.last)
                .filter(|(_, &last)| last > t)
                .map(|(l, _)| l.tail(slack))
                .fold(f64::INFINITY, f64::min),
            FloorMode::ExpSuffix(m) => {
                if t + 1 >= m.len() - 1 {
                    f64::INFINITY
                } else if slack <= 0.0 {
                    1.0
                } else {
                    (-m[t + 1] * slack).exp()
                }
            }
            FloorMode::Off => 0.0,
        }
    }

    /// As [`Floors::after`] but only over items of law `l`.
    fn after_law(&self, t: usize, slack: f64, l: usize) -> f64 {
        if self.last[l] > t {
            self.laws[l].tail(slack)
        } else {
            f64::INFINITY
        }
    }
}

/// Segment tree over bin slots holding the largest slack and least risk of
/// the live bins below each node. Removed slots hold `(-inf, +inf)`.
struct SlotTree {
    size: usize,
    max_s: Vec<f64>,
    min_r: Vec<f64>,
}

impl SlotTree {
    fn new() -> Self {
        let size = 64;
        Self { size, max_s: vec![f64::NEG_INFINITY; 2 * size], min_r: vec![f64::INFINITY; 2 * size] }
    }

    fn grow(&mut self, need: usize) {
        if need < self.size {
            return;
        }
        let mut size = self.size;
        while size <= need {
            size *= 2;
        }
        let mut t = Self { size, max_s: vec![f64::NEG_INFINITY; 2 * size], min_r: vec![f64::INFINITY; 2 * size] };
        for j in 0..self.size {
            t.max_s[size + j] = self.max_s[self.size + j];
            t.min_r[size + j] = self.min_r[self.size + j];
        }
        for i in (1..size).rev() {
            t.pull(i);
        }
        *self = t;
    }

    #[inline]
    fn pull(&mut self, i: usize) {
        self.max_s[i] = self.max_s[2 * i].max(self.max_s[2 * i + 1]);
        self.min_r[i] = self.min_r[2 * i].min(self.min_r[2 * i + 1]);
    }

    fn set(&mut self, j: usize, slack: f64, risk: f64) {
        self.grow(j);
        let mut i = self.size + j;
        self.max_s[i] = slack;
        self.min_r[i] = risk;
        while i > 1 {
            i /= 2;
            self.pull(i);
        }
    }

    fn remove(&mut self, j: usize) {
        if j < self.size {
            self.set(j, f64::NEG_INFINITY, f64::INFINITY);
        }
    }

    /// First live leaf not pruned by `prune(max_s, min_r)` and accepted by
    /// `accept(j, slack, risk)`. Leaves that fail are reported to `failed`.
    fn first(
        &self,
        prune: &dyn Fn(f64, f64) -> bool,
        accept: &dyn Fn(usize, f64, f64) -> bool,
        failed: &mut Vec<usize>,
    ) -> Option<usize> {
        self.descend(1, prune, accept, failed)
    }

    fn descend(
        &self,
        i: usize,
        prune: &dyn Fn(f64, f64) -> bool,
        accept: &dyn Fn(usize, f64, f64) -> bool,
        failed: &mut Vec<usize>,
    ) -> Option<usize> {
        if self.max_s[i] == f64::NEG_INFINITY || prune(self.max_s[i], self.min_r[i]) {
            return None;
        }
        if i >= self.size {
            let j = i - self.size;
            if accept(j, self.max_s[i], self.min_r[i]) {
                return Some(j);
            }
            failed.push(j);
            return None;
        }
        self.descend(2 * i, prune, accept, failed).or_else(|| self.descend(2 * i + 1, prune, accept, failed))
    }
}

pub struct BudgetedGreedy {
    budget: f64,
    name: String,
    floors: Option<Arc<Floors>>,
}

impl BudgetedGreedy {
    /// An unbound instance of the rule with budget `γ/C`.
    pub fn new(budget: f64) -> Self {
        Self { budget, name: format!("bg(budget {budget})"), floors: None }
    }
}

impl Policy for BudgetedGreedy {
    fn decide(&self, v: &View) -> Choice {
        budgeted_greedy_decide(v, self.budget)
    }

    fn name(&self) -> String {
        self.name.clone()
    }

    fn session(&self) -> Box<dyn Session + '_> {
        match &self.floors {
            Some(f) => Box::new(BudgetSession::new(self.budget, f, None)),
            None => Box::new(Plain(self)),
        }
    }
}

pub struct RateSplit {
    budget: f64,
    name: String,
    floors: Option<Arc<Floors>>,
}

impl Policy for RateSplit {
    fn decide(&self, v: &View) -> Choice {
        rate_split_decide(v, self.budget)
    }

    fn name(&self) -> String {
        self.name.clone()
    }

    fn session(&self) -> Box<dyn Session + '_> {
        match &self.floors {
            Some(f) => Box::new(SplitSession { streams: Vec::new(), slot_of: Vec::new(), budget: self.budget, floors: f }),
            None => Box::new(Plain(self)),
        }
    }
}

/// Accelerated budgeted greedy. With `law = Some(l)` it serves only the
/// items of law `l`, on its own slot numbering.
struct BudgetSession<'a> {
    tree: SlotTree,
    thr: f64,
    floors: &'a Floors,
    law: Option<usize>,
}

impl<'a> BudgetSession<'a> {
    fn new(budget: f64, floors: &'a Floors, law: Option<usize>) -> Self {
        Self { tree: SlotTree::new(), thr: budget * (1.0 + BUDGET_TOL), floors, law }
    }

    fn floor(&self, t: usize, slack: f64) -> f64 {
        match self.law {
            None => self.floors.after(t, slack),
            Some(l) => self.floors.after_law(t, slack, l),
        }
    }

    fn dead(&self, t: usize, slack: f64, risk: f64) -> bool {
        risk + self.floor(t, slack) > self.thr * (1.0 + RETIRE_MARGIN)
    }

    /// Returns a slot index.
    fn find(&mut self, v: &View) -> Option<usize> {
        let thr = self.thr;
        let law = v.law;
        let mut failed = Vec::new();
        let hit = self.tree.first(
            &|s, r| law.tail(s) + r > thr,
            &|_, s, r| within_budget(r, law.tail(s), thr),
            &mut failed,
        );
        for j in failed {
            let (s, r) = (self.tree.max_s[self.tree.size + j], self.tree.min_r[self.tree.size + j]);
            if self.dead(v.t, s, r) {
                self.tree.remove(j);
            }
        }
        hit
    }

    fn record(&mut self, t: usize, slot: usize, b: &BinState) {
        let slack = self.floors.cap - b.usage;
        if b.broken || self.dead(t, slack, b.risk) {
            self.tree.remove(slot);
        } else {
            self.tree.set(slot, slack, b.risk);
        }
    }
}

impl Session for BudgetSession<'_> {
    fn decide(&mut self, v: &View) -> Choice {
        match self.find(v) {
            Some(j) => Choice::Use(j),
            None => Choice::Open,
        }
    }

    fn update(&mut self, t: usize, bin: usize, b: &BinState) {
        self.record(t, bin, b);
    }
}

struct SplitSession<'a> {
    /// One budgeted session per law, created on first use.
    streams: Vec<Option<(BudgetSession<'a>, Vec<usize>)>>,
    /// Bin index to (law, slot).
    slot_of: Vec<(usize, usize)>,
    budget: f64,
    floors: &'a Floors,
}

impl Session for SplitSession<'_> {
    fn decide(&mut self, v: &View) -> Choice {
        match self.streams.get_mut(v.law_index).and_then(Option::as_mut) {
            Some((s, bins)) => match s.find(v) {
                Some(slot) => Choice::Use(bins[slot]),
                None => Choice::Open,
            },
            None => Choice::Open,
        }
    }

    fn update(&mut self, t: usize, bin: usize, b: &BinState) {
        let l = b.origin_law as usize;
        if bin == self.slot_of.len() {
            if self.streams.len() <= l {
                self.streams.resize_with(l + 1, || None);
            }
            let (budget, floors) = (self.budget, self.floors);
            let (_, bins) = self.streams[l].get_or_insert_with(|| (BudgetSession::new(budget, floors, Some(l)), Vec::new()));
            bins.push(bin);
            self.slot_of.push((l, bins.len() - 1));
        }
        let (l, slot) = self.slot_of[bin];
        self.streams[l].as_mut().unwrap().0.record(t, slot, b);
    }
}

pub struct ThresholdGreedy {
    alpha: f64,
    name: String,
    floors: Option<Arc<Floors>>,
}

impl ThresholdGreedy {
    /// An unbound instance; `alpha` is in scaled units.
    pub fn new(alpha: f64) -> Self {
        Self { alpha, name: format!("tg(scaled {alpha})"), floors: None }
    }
}

impl Policy for ThresholdGreedy {
    fn decide(&self, v: &View) -> Choice {
        threshold_greedy_decide(v, self.alpha)
    }

    fn name(&self) -> String {
        self.name.clone()
    }

    fn session(&self) -> Box<dyn Session + '_> {
        match &self.floors {
            Some(f) => Box::new(GreedySession { tree: SlotTree::new(), alpha: self.alpha, floors: f }),
            None => Box::new(Plain(self)),
        }
    }
}

struct GreedySession<'a> {
    tree: SlotTree,
    alpha: f64,
    floors: &'a Floors,
}

impl Session for GreedySession<'_> {
    fn decide(&mut self, v: &View) -> Choice {
        let top = self.tree.max_s[1];
        if top == f64::NEG_INFINITY {
            return Choice::Open;
        }
        let law = v.law;
        let p_min = law.tail(top);
        if v.penalty * p_min > 1.0 + BUDGET_TOL {
            return Choice::Open;
        }
        let mut failed = Vec::new();
        let hit = self.tree.first(&|s, _| law.tail(s) > p_min, &|_, s, _| law.tail(s) <= p_min, &mut failed);
        hit.map_or(Choice::Open, Choice::Use)
    }

    fn update(&mut self, t: usize, bin: usize, b: &BinState) {
        let slack = self.floors.cap - b.usage;
        let limit = (1.0 + BUDGET_TOL) * (1.0 + RETIRE_MARGIN);
        if b.broken || b.usage > self.alpha || self.floors.penalty * self.floors.after(t, slack) > limit {
            self.tree.remove(bin);
        } else {
            self.tree.set(bin, slack, 0.0);
        }
    }
}

pub struct FixedThreshold {
    alpha: f64,
    name: String,
}

impl FixedThreshold {
    /// An unbound instance; `alpha` is in scaled units.
    pub fn new(alpha: f64) -> Self {
        Self { alpha, name: format!("ft(scaled {alpha})") }
    }
}

impl Policy for FixedThreshold {
    fn decide(&self, v: &View) -> Choice {
        fixed_threshold_decide(v, self.alpha)
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}
