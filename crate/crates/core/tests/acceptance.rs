//! Acceptance run: one line per criterion. The process exits nonzero when a
//! criterion fails that is not in `KNOWN_FAIL`.

mod common;

use std::time::{Duration, Instant};

use adaptive_binpack::engine::{monte_carlo_with, McOptions, MonteCarloStats};
use adaptive_binpack::exact::{
    budget_violation, budgetize_policy_tree, build_policy_tree, constructive_policy_value, eval_opened,
    eval_policy_tree, min_opened_budgeted, optimal_cost_dp, restricted_policy_search, single_bin_optimal_iid,
    SearchLimits, DEFAULT_MAX_STATES, DEFAULT_TREE_LIMIT, DEFAULT_USAGE_LIMIT,
};
use adaptive_binpack::generators::named::{exp_blocks, exp_decreasing, exp_increasing, exp_lower_bound, three_point, three_point_law};
use adaptive_binpack::generators::reduction::DEFAULT_PENALTY;
use adaptive_binpack::generators::{
    count_sat_bruteforce, reduction_instance, reduction_value, reduction_value_corrected, symmetrize_2cnf,
};
use adaptive_binpack::mdp::{threshold, MdpOptions};
use adaptive_binpack::num::{fmt_rational, q, qi, to_f64, Gamma, Surd, Q};
use adaptive_binpack::policies::PolicyConfig;
use adaptive_binpack::ptas::{discretize_instance, ptas_dp, track_monte_carlo, DiscretizationParams};
use adaptive_binpack::{Error, Instance, Result};
use num_traits::{One, Zero};
use rand::Rng;

/// Criteria whose stated form does not hold; see the README.
const KNOWN_FAIL: &[usize] = &[6, 11];

/// Absolute slack on float comparisons of Monte Carlo means.
const FLOAT_SLACK: f64 = 1e-9;

struct Check {
    pass: bool,
    detail: String,
}

type McCriterion = fn(Option<usize>) -> Result<(Check, Vec<String>)>;

fn gammas() -> Vec<(&'static str, Gamma)> {
    vec![("1", Gamma::parse("1").unwrap()), ("sqrt(2)", Gamma::sqrt2()), ("2", Gamma::parse("2").unwrap())]
}

fn policy(inst: &Instance, spec: &str) -> Result<Box<dyn adaptive_binpack::policies::Policy>> {
    PolicyConfig::parse(spec)?.prepare(inst, &inst.compile()?)
}

fn simulate(inst: &Instance, spec: &str, trials: u64, seed: u64, checkpoints: Vec<usize>, workers: Option<usize>) -> Result<MonteCarloStats> {
    let compiled = inst.compile()?;
    let p = PolicyConfig::parse(spec)?.prepare(inst, &compiled)?;
    monte_carlo_with(&compiled, p.as_ref(), trials, seed, &McOptions { checkpoints, workers })
}

fn json(s: &impl serde::Serialize) -> String {
    serde_json::to_string(s).unwrap()
}

/// `out ≤ (1 + 2/γ) · input`, exactly: with `d = out − input`, `d ≤ 0` or
/// `d² γ² ≤ 4 input²`.
fn within_surgery_bound(out: &Q, input: &Q, g: &Gamma) -> bool {
    let d = out - input;
    d <= Q::zero() || &d * &d * g.square() <= qi(4) * input * input
}

fn c1() -> Result<Check> {
    let mut r = common::rng(1);
    let vals = common::tenths();
    let mut bad = Vec::new();
    for i in 0..50 {
        let n = r.gen_range(1..=6);
        let c = [2, 3, 5, 10][r.gen_range(0..4)];
        let inst = common::random_instance(&mut r, n, 3, &vals, c);
        let dp = optimal_cost_dp(&inst, DEFAULT_MAX_STATES)?.value;
        let bf = common::brute_force_optimum(&inst);
        if dp != bf {
            bad.push(format!("#{i}: dp {} brute {}", fmt_rational(&dp), fmt_rational(&bf)));
        }
    }
    Ok(Check { pass: bad.is_empty(), detail: format!("{}/50 equal {}", 50 - bad.len(), bad.join("; ")) })
}

fn c2(workers: Option<usize>) -> Result<(Check, Vec<String>)> {
    let inst = three_point(200, &qi(50))?;
    let (mut pass, mut parts, mut out) = (true, Vec::new(), Vec::new());
    for spec in ["bg:sqrt(2)", "fg", "tg:2/5"] {
        let s = simulate(&inst, spec, 100_000, 2, vec![], workers)?;
        let (gap, se) = s.risk_gap();
        pass &= gap.abs() <= 4.0 * se + FLOAT_SLACK;
        parts.push(format!("{spec} gap {gap:.2e} (4σ {:.2e})", 4.0 * se));
        out.push(json(&s));
    }
    Ok((Check { pass, detail: parts.join(", ") }, out))
}

fn c3(workers: Option<usize>) -> Result<(Check, Vec<String>)> {
    let c = qi(50);
    let cases = [("three_point", three_point(200, &c)?), ("exp_blocks", exp_blocks(200, &c)?)];
    let (mut pass, mut worst, mut out) = (true, f64::NEG_INFINITY, Vec::new());
    for (name, inst) in &cases {
        for (g, gamma) in gammas() {
            let s = simulate(inst, &format!("bg:{g}"), 20_000, 3, vec![], workers)?;
            let b = gamma.value() / to_f64(&c);
            for j in 0..s.per_bin.len() {
                let (m, se) = s.break_gap(j, b);
                if m > 4.0 * se + FLOAT_SLACK {
                    pass = false;
                    eprintln!("criterion 3: {name} bg:{g} bin {j} gap {m} > 4σ {}", 4.0 * se);
                }
                worst = worst.max(m - 4.0 * se);
            }
            let (m, se) = s.cost_vs_opened_gap(gamma.value());
            if m > 4.0 * se + FLOAT_SLACK {
                pass = false;
                eprintln!("criterion 3: {name} bg:{g} cost gap {m} > 4σ {}", 4.0 * se);
            }
            worst = worst.max(m - 4.0 * se);
            out.push(json(&s));
        }
    }
    Ok((Check { pass, detail: format!("6 runs, max(gap − 4σ) = {worst:.3e}") }, out))
}

fn c4() -> Result<Check> {
    let mut r = common::rng(4);
    let vals = common::tenths();
    let (mut bad, mut checked, mut preserved) = (Vec::new(), 0, 0);
    for i in 0..30 {
        let n = r.gen_range(2..=5);
        let c = [2, 4, 10][r.gen_range(0..3)];
        let inst = common::random_instance(&mut r, n, 3, &vals, c);
        for (g, gamma) in gammas() {
            for spec in ["fg", "tg:2/5"] {
                let tree = build_policy_tree(&inst, policy(&inst, spec)?.as_ref(), DEFAULT_TREE_LIMIT)?;
                let rep = budgetize_policy_tree(&tree, &gamma, &inst)?;
                let input = common::leaf_sum_cost(&tree, &inst);
                let output = common::leaf_sum_cost(&rep.tree, &inst);
                let ok = budget_violation(&rep.tree, &inst, &gamma)?.is_none()
                    && common::path_budgeted(&rep.tree, &inst, &gamma)
                    && input == rep.input_cost
                    && output == rep.output_cost
                    && within_surgery_bound(&output, &input, &gamma)
                    && rep.chain_holds();
                checked += 1;
                if !ok {
                    bad.push(format!("#{i} {spec} γ={g}"));
                }
            }
            let bg = build_policy_tree(&inst, policy(&inst, &format!("bg:{g}"))?.as_ref(), DEFAULT_TREE_LIMIT)?;
            let rep = budgetize_policy_tree(&bg, &gamma, &inst)?;
            if rep.tree == bg && rep.output_cost == rep.input_cost {
                preserved += 1;
            } else {
                bad.push(format!("#{i} bg:{g} changed"));
            }
        }
    }
    Ok(Check {
        pass: bad.is_empty(),
        detail: format!("{checked} surgeries bounded and budgeted, {preserved}/90 budgeted inputs unchanged {}", bad.join("; ")),
    })
}

fn c5() -> Result<Check> {
    let mut r = common::rng(5);
    let vals = common::tenths();
    let mut bad = Vec::new();
    let mut max_ratio = 0.0f64;
    for i in 0..20 {
        let n = r.gen_range(1..=5);
        let c = [2, 4, 10][r.gen_range(0..3)];
        let inst = common::random_iid(&mut r, n, 3, &vals, c);
        let opt = optimal_cost_dp(&inst, DEFAULT_MAX_STATES)?.value;
        for (g, gamma) in gammas() {
            let tree = build_policy_tree(&inst, policy(&inst, &format!("bg:{g}"))?.as_ref(), DEFAULT_TREE_LIMIT)?;
            let opened = eval_opened(&tree, &inst)?;
            let best = min_opened_budgeted(&inst, &gamma, 5, DEFAULT_MAX_STATES)?;
            if opened != best {
                bad.push(format!("#{i} bg:{g} opened {} min {}", fmt_rational(&opened), fmt_rational(&best)));
            }
            if g == "sqrt(2)" {
                let cost = common::leaf_sum_cost(&tree, &inst);
                if cost != eval_policy_tree(&tree, &inst)? || !common::le_three_plus_two_sqrt2(&cost, &opt) {
                    bad.push(format!("#{i} bg:sqrt(2) cost {} opt {}", fmt_rational(&cost), fmt_rational(&opt)));
                }
                if !opt.is_zero() {
                    max_ratio = max_ratio.max(to_f64(&(cost / &opt)));
                }
            }
        }
    }
    let bound = Surd::new(qi(3), qi(2), qi(2)).to_f64();
    Ok(Check {
        pass: bad.is_empty(),
        detail: format!("60 opened-bin equalities, bg:sqrt(2)/opt max {max_ratio:.3} ≤ {bound:.3} {}", bad.join("; ")),
    })
}

fn c6(workers: Option<usize>) -> Result<(Check, Vec<String>)> {
    let (n, c) = (100_000, qi(50));
    let inst = three_point(n, &c)?;
    let curve = single_bin_optimal_iid::<f64>(&three_point_law(&c)?, n, &c, &Q::one(), DEFAULT_USAGE_LIMIT)?;
    let reference = curve[n];
    let mut ratio = std::collections::BTreeMap::new();
    let mut out = Vec::new();
    for spec in ["bg:1", "bg:sqrt(2)", "bg:2", "tg:2/5", "fg"] {
        let s = simulate(&inst, spec, 1000, 6, vec![], workers)?;
        ratio.insert(spec, s.mean_cost / reference);
        out.push(json(&s));
    }
    let bands = [("bg:1", 1.5, 2.1), ("bg:sqrt(2)", 1.6, 2.2), ("bg:2", 2.4, 3.1)];
    let mut pass = bands.iter().all(|(p, lo, hi)| (lo..=hi).contains(&&ratio[p]));
    let floor = 10.0 * ratio["bg:1"];
    pass &= ratio["tg:2/5"] >= floor && ratio["fg"] >= floor;
    let detail = format!(
        "ref {reference:.1}; bg:1 {:.3}, bg:sqrt(2) {:.3}, bg:2 {:.3}, tg:2/5 {:.2}, fg {:.2} (need ≥ {floor:.2})",
        ratio["bg:1"], ratio["bg:sqrt(2)"], ratio["bg:2"], ratio["tg:2/5"], ratio["fg"]
    );
    Ok((Check { pass, detail }, out))
}

fn c7(workers: Option<usize>) -> Result<(Check, Vec<String>)> {
    let (n, c) = (10_000, qi(50));
    let checkpoints: Vec<usize> = (1..=10).map(|k| k * n / 10).collect();
    let specs = ["bg:1", "bg:sqrt(2)", "bg:2", "fg", "tg:2/5", "tg:3/5", "ft:3/5", "ft:4/5"];
    let schedules = [("increasing", exp_increasing(n, &c)?), ("decreasing", exp_decreasing(n, &c)?), ("blocks", exp_blocks(n, &c)?)];
    let (mut worst, mut at, mut out) = (0.0f64, String::new(), Vec::new());
    for (name, inst) in &schedules {
        let runs = specs
            .iter()
            .map(|spec| simulate(inst, spec, 300, 7, checkpoints.clone(), workers))
            .collect::<Result<Vec<_>>>()?;
        for k in 0..checkpoints.len() {
            let best = runs.iter().map(|s| s.prefixes[k].mean_cost).fold(f64::INFINITY, f64::min);
            let bg2 = runs[2].prefixes[k].mean_cost;
            let r = bg2 / best;
            if r > worst {
                worst = r;
                at = format!("{name} prefix {}", checkpoints[k]);
            }
        }
        out.extend(runs.iter().map(json));
    }
    Ok((Check { pass: worst <= 2.5, detail: format!("max bg:2/best {worst:.3} at {at} (limit 2.5)") }, out))
}

fn c8(workers: Option<usize>) -> Result<(Check, Vec<String>)> {
    let lb = exp_lower_bound(6, &q(4, 5), &qi(150))?;
    let bg = simulate(&lb.instance, "bg:1", 2000, 8, vec![], workers)?;
    let split = simulate(&lb.instance, "split:2", 2000, 8, vec![], workers)?;
    let low = 3.0 - 4.0 * bg.stderr;
    let high = lb.opt_bound + 4.0 * split.stderr;
    let pass = bg.mean_cost >= low && split.mean_cost <= high;
    let detail = format!(
        "{} items; bg:1 {:.2} ≥ {low:.2}, split:2 {:.2} ≤ {high:.1}",
        lb.instance.len(),
        bg.mean_cost,
        split.mean_cost
    );
    Ok((Check { pass, detail }, vec![json(&bg), json(&split)]))
}

fn c9(workers: Option<usize>) -> Result<(Check, Vec<String>)> {
    let eps = q(3, 10);
    let params = DiscretizationParams::with_grid(eps.clone(), &eps * &eps * &eps * &eps)?;
    let vals: Vec<Q> =
        [(0, 1), (1, 1000), (1, 200), (1, 10), (1, 4), (2, 5), (1, 2), (3, 5), (3, 4), (1, 1), (6, 5), (3, 2)]
            .iter()
            .map(|&(a, b)| q(a, b))
            .collect();
    let mut r = common::rng(9);
    let (mut bad, mut breaches, mut out) = (Vec::new(), 0, Vec::new());
    let (mut dp_ratio, mut track_ratio) = (0.0f64, 0.0f64);
    for i in 0..20 {
        let n = r.gen_range(1..=5);
        let c = [2, 4, 10][r.gen_range(0..3)];
        let inst = common::random_instance(&mut r, n, 3, &vals, c);
        let opt = optimal_cost_dp(&inst, DEFAULT_MAX_STATES)?.value;
        let sol = ptas_dp(&discretize_instance(&inst, &params)?, &params, DEFAULT_MAX_STATES)?;
        if sol.value > q(13, 10) * &opt {
            bad.push(format!("#{i} dp {} > 1.3·{}", fmt_rational(&sol.value), fmt_rational(&opt)));
        }
        let o = to_f64(&opt);
        dp_ratio = dp_ratio.max(to_f64(&sol.value) / o);
        match track_monte_carlo(&sol.table, &inst, &params, 10_000, 90 + i, workers) {
            Ok(s) => {
                if s.mean_cost > 2.2 * o + 4.0 * s.stderr + FLOAT_SLACK {
                    bad.push(format!("#{i} tracked {:.3} > 2.2·{o:.3} + 4σ", s.mean_cost));
                }
                track_ratio = track_ratio.max(s.mean_cost / o);
                out.push(json(&s));
            }
            Err(Error::DeviationLogicBreach { .. }) => breaches += 1,
            Err(e) => return Err(e),
        }
    }
    let pass = bad.is_empty() && breaches == 0;
    let detail = format!(
        "max dp/opt {dp_ratio:.3} (≤ 1.3), max tracked/opt {track_ratio:.3} (≤ 2.2 + 4σ), breaches {breaches} {}",
        bad.join("; ")
    );
    Ok((Check { pass, detail }, out))
}

fn c10() -> Result<Check> {
    let mut r = common::rng(10);
    let vals = common::tenths();
    let mut bad = Vec::new();
    let mut slack = f64::INFINITY;
    for i in 0..20 {
        let d = common::random_law(&mut r, &vals, 4);
        let c = qi(r.gen_range(2..=20));
        let rep = threshold(&d, &c, &Q::one(), &MdpOptions::default())?;
        if !rep.monotone || !rep.interval {
            bad.push(format!("#{i} monotone {} interval {}", rep.monotone, rep.interval));
        }
        let n = r.gen_range(1..=6);
        let inst = Instance::iid(d.clone(), n, c.clone(), Q::one())?;
        let tree = build_policy_tree(&inst, policy(&inst, "mdp")?.as_ref(), DEFAULT_TREE_LIMIT)?;
        let cost = eval_policy_tree(&tree, &inst)?;
        let single = single_bin_optimal_iid::<Q>(&d, n, &c, &Q::one(), DEFAULT_USAGE_LIMIT)?.swap_remove(n);
        let bound = &single + Q::one();
        if cost > bound {
            bad.push(format!("#{i} P_α {} > {}", fmt_rational(&cost), fmt_rational(&bound)));
        }
        slack = slack.min(to_f64(&(bound - cost)));
    }
    Ok(Check { pass: bad.is_empty(), detail: format!("20 supports, min(single+1 − cost) {slack:.4} {}", bad.join("; ")) })
}

fn c11() -> Result<Check> {
    let mut r = common::rng(11);
    let (mut stated_ok, mut constructive_ok, mut corrected_ok) = (0, 0, 0);
    let mut parts = Vec::new();
    for _ in 0..5 {
        let phi = symmetrize_2cnf(&common::random_reducible_2cnf(&mut r))?;
        let s = count_sat_bruteforce(&phi)?;
        let art = reduction_instance(&phi, &qi(DEFAULT_PENALTY))?;
        let found = restricted_policy_search(&art, &SearchLimits::default())?.value;
        let stated = reduction_value(phi.n_vars, s)?;
        let corrected = reduction_value_corrected(phi.n_vars, s)?;
        let built = constructive_policy_value(&art)?;
        stated_ok += (found == stated) as usize;
        corrected_ok += (found == corrected) as usize;
        constructive_ok += (built == found) as usize;
        parts.push(format!("s={s} search {} stated {}", fmt_rational(&found), fmt_rational(&stated)));
    }
    Ok(Check {
        pass: stated_ok == 5 && constructive_ok == 5,
        detail: format!(
            "search = stated {stated_ok}/5, search = corrected {corrected_ok}/5, constructive = search {constructive_ok}/5 [{}]",
            parts.join(", ")
        ),
    })
}

fn print_line(id: usize, pass: bool, took: Duration, limit: Option<Duration>, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let budget = limit.map(|l| format!(" / {}s", l.as_secs())).unwrap_or_default();
    println!("criterion {id:>2}: {status} [{:.1}s{budget}] {detail}", took.as_secs_f64());
}

fn main() {
    let wmax = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).max(4);
    let secs = Duration::from_secs;
    let exact: [(usize, fn() -> Result<Check>, u64); 4] = [(1, c1, 120), (4, c4, 180), (5, c5, 300), (10, c10, 180)];
    let mc: [(usize, McCriterion, u64); 6] = [(2, c2, 60), (3, c3, 120), (6, c6, 600), (7, c7, 900), (8, c8, 300), (9, c9, 600)];
    let mut outcomes: Vec<(usize, bool)> = Vec::new();
    let mut mc_json: Vec<(usize, McCriterion, Vec<String>)> = Vec::new();

    // ACCEPTANCE_ONLY=2,9 runs a subset; skipped criteria count as failures
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    for id in 1..=11 {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            println!("criterion {id:>2}: FAIL [skipped by ACCEPTANCE_ONLY]");
            outcomes.push((id, false));
            continue;
        }
        let start = Instant::now();
        let (limit, result) = if let Some(&(_, f, l)) = exact.iter().find(|e| e.0 == id) {
            (secs(l), f())
        } else if let Some(&(_, f, l)) = mc.iter().find(|e| e.0 == id) {
            let r = f(Some(wmax)).map(|(c, js)| {
                mc_json.push((id, f, js));
                c
            });
            (secs(l), r)
        } else {
            (secs(1200), c11())
        };
        let took = start.elapsed();
        let (pass, detail) = match result {
            Ok(c) => (c.pass && took <= limit, c.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        print_line(id, pass, took, Some(limit), &detail);
        outcomes.push((id, pass));
    }

    let start = Instant::now();
    let mut differing = Vec::new();
    for (id, f, first) in &mc_json {
        match f(Some(1)) {
            Ok((_, again)) if &again == first => {}
            Ok(_) => differing.push(format!("{id}")),
            Err(e) => differing.push(format!("{id} ({e})")),
        }
    }
    let ran: Vec<String> = mc_json.iter().map(|m| m.0.to_string()).collect();
    let pass = differing.is_empty() && ran.len() == mc.len();
    let detail = format!(
        "workers {wmax} vs 1 on criteria {}: {}",
        ran.join(","),
        if differing.is_empty() { "identical JSON".to_string() } else { format!("differ on {}", differing.join(",")) }
    );
    print_line(12, pass, start.elapsed(), None, &detail);
    outcomes.push((12, pass));

    let unexpected: Vec<usize> = outcomes.iter().filter(|(id, p)| !p && !KNOWN_FAIL.contains(id)).map(|o| o.0).collect();
    let known: Vec<usize> = outcomes.iter().filter(|(id, p)| !p && KNOWN_FAIL.contains(id)).map(|o| o.0).collect();
    println!("summary: {} pass, known failures {known:?}, unexpected failures {unexpected:?}", outcomes.iter().filter(|o| o.1).count());
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
