//! Acceptance suite. Each test prints one `PASS`/`FAIL` line for its
//! criterion straight to the terminal, whether or not output capture is on,
//! and then asserts.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use coe_core::causal::pc_lower_bound;
use coe_core::dataset::{
    simulate_trial, CovariateEffect, DesireModel, ResponseModel, SimulationConfig, TargetSpec,
};
use coe_core::likelihood::oracle::{Oracle, DEFAULT_GROUP_CAP};
use coe_core::likelihood::{log_marginal, BetaPrior};
use coe_core::model_space::{
    enumerate_posterior, mh_sample, top_models, McmcConfig, ModelPrior, PriorKind, SearchOptions,
};
use coe_core::partition::{GroupCounts, ModelId, Tally};
use serde_json::Value;

fn verdict(id: u32, name: &str, passed: bool, detail: &str, elapsed: Duration) {
    let line = format!(
        "\ncriterion {id} [{}] {name}: {detail} ({:.2}s)\n",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    // Bypasses the test harness capture so every line shows up in the log.
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(passed, "criterion {id} failed: {detail}");
}

fn coe() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_coe"));
    cmd.env_remove("COE_LOG");
    cmd
}

/// Every `(n, x)` with `n <= max_n`.
fn tallies(max_n: u64) -> Vec<Tally> {
    (0..=max_n).flat_map(|n| (0..=n).map(move |x| Tally::new(n, x))).collect()
}

fn parallel_max<T: Sync>(items: &[T], f: impl Fn(&T) -> f64 + Sync) -> f64 {
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get());
    let chunk = items.len().div_ceil(threads).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| s.spawn(|| part.iter().map(&f).fold(0.0f64, f64::max)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).fold(0.0, f64::max)
    })
}

#[test]
fn criterion_1_closed_form_matches_quadrature() {
    let start = Instant::now();
    let oracle = Oracle::new(BetaPrior::UNIFORM, DEFAULT_GROUP_CAP).unwrap();
    let t = tallies(8);
    // Every joint configuration of the comparable treated group, the target
    // response and both matching untreated strata; the two exchangeable
    // remainder groups cycle through all their own configurations.
    let mut cases = Vec::new();
    for &a11 in &t {
        for r in [false, true] {
            for &a00 in &t {
                for &a01 in &t {
                    let i = cases.len();
                    let counts = GroupCounts {
                        a11,
                        abar11: t[i % t.len()],
                        a01,
                        a00,
                        abar0: t[(i * 7) % t.len()],
                    };
                    cases.push((counts, r));
                }
            }
        }
    }
    let worst = parallel_max(&cases, |(counts, r)| {
        let closed = log_marginal(counts, *r).log_value;
        let reference = oracle.log_marginal(counts, *r).unwrap();
        (closed - reference).exp_m1().abs()
    });
    let passed = worst <= 1e-8 && start.elapsed() < Duration::from_secs(120);
    verdict(
        1,
        "closed form vs quadrature oracle",
        passed,
        &format!("{} configurations, worst relative error {worst:.3e} (limit 1e-8)", cases.len()),
        start.elapsed(),
    );
}

fn hypergeom_grid_from_cli() -> (Vec<Vec<f64>>, Duration) {
    let start = Instant::now();
    let out = coe().args(["figure", "hypergeom", "10", "10"]).output().unwrap();
    let elapsed = start.elapsed();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let grid = text
        .lines()
        .skip(1)
        .map(|line| line.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    (grid, elapsed)
}

#[test]
fn criterion_2a_balanced_split_tops_each_anti_diagonal() {
    let (grid, elapsed) = hypergeom_grid_from_cli();
    let mut misses = Vec::new();
    for total in 0..=20usize {
        let cells: Vec<(usize, usize)> =
            (0..=10).filter_map(|x00| total.checked_sub(x00).filter(|&x01| x01 <= 10).map(|x01| (x00, x01))).collect();
        let best = cells.iter().map(|&(i, j)| grid[i][j]).fold(f64::MIN, f64::max);
        let gap = cells.iter().map(|&(i, j)| i.abs_diff(j)).min().unwrap();
        let balanced = cells.iter().filter(|&&(i, j)| i.abs_diff(j) == gap);
        for &(i, j) in balanced {
            if grid[i][j] < best * (1.0 - 1e-12) {
                misses.push((i, j));
            }
        }
    }
    let passed = grid.len() == 11 && misses.is_empty() && elapsed < Duration::from_secs(1);
    verdict(
        2,
        "figure hypergeom 10 10, anti-diagonal argmax at the balanced split",
        passed,
        &format!("21 anti-diagonals checked, balanced cells below the maximum: {misses:?}"),
        elapsed,
    );
}

#[test]
fn criterion_2b_interior_global_maximum_at_five_five() {
    let (grid, elapsed) = hypergeom_grid_from_cli();
    let mut best = (f64::MIN, (0, 0));
    for (i, row) in grid.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let total = i + j;
            if total > 0 && total < 20 && v > best.0 {
                best = (v, (i, j));
            }
        }
    }
    let (value, at) = best;
    let passed = at == (5, 5) && elapsed < Duration::from_secs(1);
    verdict(
        2,
        "figure hypergeom 10 10, interior global maximum at (5,5)",
        passed,
        &format!(
            "interior maximum {value:.6} at {at:?}; value at (5,5) is {:.6}",
            grid[5][5]
        ),
        elapsed,
    );
}

/// Six covariates, 150 subjects, two weak response effects: the posterior
/// spreads over many models without any one dominating.
fn sampler_fixture() -> coe_core::dataset::Dataset {
    let config = SimulationConfig {
        n: 150,
        seed: 0,
        covariate_cardinalities: vec![2; 6],
        covariate_names: None,
        covariate_probabilities: None,
        assignment_ratio: 0.5,
        desire_model: DesireModel { base: 0.5, covariate_effects: vec![] },
        response_model: ResponseModel {
            base: 0.25,
            treatment: 0.25,
            desire: 0.0,
            interaction: 0.0,
            covariate_effects: vec![
                CovariateEffect { covariate: 1, shifts: vec![0.0, 0.15] },
                CovariateEffect { covariate: 4, shifts: vec![0.0, 0.1] },
            ],
        },
        target: Some(TargetSpec::new(vec![1, 0, 0, 1, 1, 0])),
    };
    simulate_trial(&config, 17).unwrap()
}

#[test]
fn criterion_3_sampler_matches_enumeration() {
    let start = Instant::now();
    let data = sampler_fixture();
    let mut details = Vec::new();
    let mut passed = true;
    for prior in [PriorKind::Uniform, PriorKind::ChenChen] {
        let exact = enumerate_posterior(&data, prior, &SearchOptions::default()).unwrap();
        let config = McmcConfig::new(50_000, 2024).with_chains(4);
        let sampled = mh_sample(&data, prior, &config, BetaPrior::UNIFORM).unwrap();
        let tv = sampled.total_variation(&exact);
        passed &= tv <= 0.02;
        details.push(format!(
            "{prior:?}: TV {tv:.4} over {} exact-support models (top mass {:.3})",
            exact.support_size(),
            exact.best().unwrap().posterior
        ));
    }
    passed &= start.elapsed() < Duration::from_secs(60);
    verdict(
        3,
        "Metropolis-Hastings vs enumeration, k = 6, 4 x 5e4 steps",
        passed,
        &format!("{} (limit 0.02)", details.join("; ")),
        start.elapsed(),
    );
}

#[test]
fn criterion_4_chen_chen_weights_at_k_4() {
    let start = Instant::now();
    let prior = ModelPrior::new(PriorKind::ChenChen, 4);
    let mut wrong = Vec::new();
    for mask in 0u64..16 {
        let model = ModelId::from_mask(mask);
        let expected = match model.size() {
            0 => 1.0 / 5.0,
            1 => 1.0 / 20.0,
            2 => 1.0 / 30.0,
            _ => 0.0,
        };
        if prior.weight(model) != expected {
            wrong.push((model.to_string(), prior.weight(model), expected));
        }
    }
    verdict(
        4,
        "Chen-Chen prior weights, k = 4",
        wrong.is_empty(),
        &format!("16 models compared by exact equality, mismatches: {wrong:?}"),
        start.elapsed(),
    );
}

#[test]
fn criterion_5_lower_bound_semantics() {
    let start = Instant::now();
    let at_most_one = (0..=1000).map(|i| f64::from(i) / 1000.0).all(|rr| pc_lower_bound(rr) == 0.0);
    let at_two = pc_lower_bound(2.0) == 0.5;
    let grid: Vec<f64> = (1..=1000).map(|i| 1.0 + f64::from(i) * 0.01).collect();
    let increasing = grid.windows(2).all(|w| pc_lower_bound(w[0]) < pc_lower_bound(w[1]))
        && pc_lower_bound(grid[0]) > 0.0;
    verdict(
        5,
        "probability of causation lower bound",
        at_most_one && at_two && increasing,
        &format!(
            "zero on [0,1]: {at_most_one}; 0.5 at RR = 2: {at_two}; strictly increasing on 1000 points of (1, 11]: {increasing}"
        ),
        start.elapsed(),
    );
}

fn planted_config() -> SimulationConfig {
    SimulationConfig {
        n: 2000,
        seed: 0,
        covariate_cardinalities: vec![2; 6],
        covariate_names: None,
        covariate_probabilities: None,
        assignment_ratio: 0.5,
        desire_model: DesireModel { base: 0.5, covariate_effects: vec![] },
        response_model: ResponseModel {
            base: 0.2,
            treatment: 0.2,
            desire: 0.0,
            interaction: 0.0,
            covariate_effects: vec![CovariateEffect { covariate: 0, shifts: vec![0.0, 0.3] }],
        },
        target: Some(TargetSpec::new(vec![1, 0, 0, 0, 0, 0])),
    }
}

#[test]
fn criterion_6_planted_covariate_is_recovered() {
    let start = Instant::now();
    let config = planted_config();
    let planted = ModelId::from_indices([0]);
    let mut hits = [0u32; 2];
    for seed in 0..20 {
        let data = simulate_trial(&config, seed).unwrap();
        for (slot, prior) in [PriorKind::Uniform, PriorKind::ChenChen].into_iter().enumerate() {
            let table = enumerate_posterior(&data, prior, &SearchOptions::default()).unwrap();
            if top_models(&table, 3).iter().any(|e| e.model == planted) {
                hits[slot] += 1;
            }
        }
    }
    let passed = hits.iter().all(|&h| h >= 18) && start.elapsed() < Duration::from_secs(120);
    verdict(
        6,
        "planted covariate {0} in the top 3, n = 2000, k = 6",
        passed,
        &format!("uniform {}/20 seeds, chen-chen {}/20 seeds (need 18)", hits[0], hits[1]),
        start.elapsed(),
    );
}

#[test]
fn criterion_7_marginal_sums_to_one() {
    let start = Instant::now();
    let sizes: Vec<[u64; 5]> = (0..6u64.pow(5))
        .map(|code| {
            let mut s = [0u64; 5];
            let mut c = code;
            for slot in &mut s {
                *slot = c % 6;
                c /= 6;
            }
            s
        })
        .collect();
    let worst = parallel_max(&sizes, |&[n11, nbar11, n01, n00, nbar0]| {
        let mut total = 0.0;
        for r in [false, true] {
            for x11 in 0..=n11 {
                for xbar11 in 0..=nbar11 {
                    for x01 in 0..=n01 {
                        for x00 in 0..=n00 {
                            for xbar0 in 0..=nbar0 {
                                let counts = GroupCounts {
                                    a11: Tally::new(n11, x11),
                                    abar11: Tally::new(nbar11, xbar11),
                                    a01: Tally::new(n01, x01),
                                    a00: Tally::new(n00, x00),
                                    abar0: Tally::new(nbar0, xbar0),
                                };
                                total += log_marginal(&counts, r).log_value.exp();
                            }
                        }
                    }
                }
            }
        }
        (total - 1.0).abs()
    });
    verdict(
        7,
        "marginal likelihood normalizes over all responses",
        worst <= 1e-10,
        &format!("{} size configurations, worst |sum - 1| = {worst:.3e} (limit 1e-10)", sizes.len()),
        start.elapsed(),
    );
}

fn scratch_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance_report");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_in(dir: &Path, args: &[&str]) {
    let out = coe().args(args).current_dir(dir).output().unwrap();
    assert!(out.status.success(), "coe {args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn criterion_8_report_matches_the_selected_characteristics_layout() {
    let start = Instant::now();
    let dir = scratch_dir();
    run_in(&dir, &["simulate", "--preset", "student-cohort", "--n", "161", "--seed", "8", "--out", "cohort.csv", "--target-out", "target.json"]);
    run_in(&dir, &["analyze", "--data", "cohort.csv", "--target", "target.json", "--prior", "chen-chen", "--out", "report.json"]);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();

    let covariates: Vec<&str> =
        report["dataset"]["covariates"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    let best = &report["best"];
    let model: Vec<u64> = best["model"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    let selected = best["selected"].as_array().unwrap();
    let target_levels = report["dataset"]["target"]["covariates"].as_array().unwrap();
    let mut problems = Vec::new();
    if covariates.len() != 14 {
        problems.push(format!("{} covariates", covariates.len()));
    }
    if selected.len() != model.len() {
        problems.push("selected list does not match the model".into());
    }
    for (s, &j) in selected.iter().zip(&model) {
        let j = j as usize;
        if s["index"] != j || s["name"] != covariates[j] || s["level"] != target_levels[j] {
            problems.push(format!("selected entry {s} disagrees with covariate {j}"));
        }
    }
    if !best["rr"].is_number() || !best["pc_lower"].is_number() {
        problems.push("best model lacks a numeric RR or bound".into());
    }
    if report["models"][0]["model"] != best["model"] || report["models"][0]["rr"] != best["rr"] {
        problems.push("first row is not the best model".into());
    }
    let rr = best["rr"].as_f64().unwrap_or(f64::NAN);
    let names: Vec<String> =
        selected.iter().map(|s| format!("{}={}", s["name"].as_str().unwrap(), s["level"])).collect();
    verdict(
        8,
        "report carries selected characteristics and RR (structure only)",
        problems.is_empty(),
        &format!("best model selects [{}] with RR {rr:.3}; problems: {problems:?}", names.join(", ")),
        start.elapsed(),
    );
}
