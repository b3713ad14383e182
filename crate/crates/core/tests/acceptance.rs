//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness. Bare numeric arguments select criteria
//! (`cargo test --test acceptance -- 4 9`); any other non-flag argument is a
//! libtest-style filter that selects nothing. A FAIL is reported but only
//! turns into a non-zero exit when `ACCEPTANCE_STRICT=1`.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use codedcache::baselines::brute_force_placement_oracle;
use codedcache::coded_cache::{brute_force_multicast_oracle, coded_multicast_load, coded_multicast_load_exact};
use codedcache::dqn::gradcheck::{grad_check, random_problem};
use codedcache::dqn::{double_q_target, DuelingNet, NetShape};
use codedcache::env::{build_action_space, cost_from_loads, Delays, LocalState, RewardParams};
use codedcache::federated::aggregate;
use codedcache::harness::experiment::{build_scheme, run_experiment, simulate, MetricRecord};
use codedcache::harness::sweep::{sweep, sweep_in_memory, window_start};
use codedcache::harness::{parse_config, ExperimentConfig};
use codedcache::popularity::zipf_profile;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

fn within(limit: Duration, elapsed: Duration) -> bool {
    elapsed < limit
}

/// Desk-scale network shared by the trend criteria.
fn trend_config() -> ExperimentConfig {
    parse_config(
        "[network]\n\
         n_contents=50 k_faps=5 cache_size=10 requests_per_slot=20 slots=3000\n\
         [popularity]\n\
         profiles=10\n\
         [reward]\n\
         normalize_reward_rows=true\n\
         [output]\n\
         seeds=1,2,3,4,5 checkpoints=false\n",
    )
    .expect("trend config parses")
}

fn small_config() -> ExperimentConfig {
    parse_config(
        "[network]\n\
         n_contents=10 k_faps=3 cache_size=2 requests_per_slot=9 slots=2000\n\
         [popularity]\n\
         profiles=1 alpha_range=1,1\n\
         [reward]\n\
         normalize_reward_rows=true\n\
         [output]\n\
         seeds=1,2,3,4,5 checkpoints=false\n",
    )
    .expect("small config parses")
}

/// Per (scheme, seed): mean and standard deviation of `f` over the converged window.
fn window_stats(records: &[MetricRecord], slots: usize, f: impl Fn(&MetricRecord) -> f64) -> BTreeMap<(String, u64), (f64, f64)> {
    let start = window_start(slots);
    let mut groups: BTreeMap<(String, u64), Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.slot >= start) {
        groups.entry((r.scheme.clone(), r.seed)).or_default().push(f(r));
    }
    groups
        .into_iter()
        .map(|(key, xs)| {
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (key, (mean, var.sqrt()))
        })
        .collect()
}

/// Seed-mean of a per-(scheme, seed) statistic.
fn seed_mean(stats: &BTreeMap<(String, u64), (f64, f64)>, scheme: &str, pick: impl Fn(&(f64, f64)) -> f64) -> f64 {
    let xs: Vec<f64> = stats.iter().filter(|((s, _), _)| s == scheme).map(|(_, v)| pick(v)).collect();
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for k in 2..=6 {
        for t in 1..k {
            for u in 0..=k {
                let exact = coded_multicast_load_exact(u, k, t).unwrap();
                let oracle = brute_force_multicast_oracle(u, k, t).unwrap();
                let float = coded_multicast_load(u, k, t).unwrap();
                let oracle_f = *oracle.numer() as f64 / *oracle.denom() as f64;
                if exact != oracle || float.to_bits() != oracle_f.to_bits() {
                    mismatches.push((k, t, u));
                }
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    Verdict::new(
        mismatches.is_empty() && within(Duration::from_secs(1), elapsed),
        format!("{checked} (K,t,u) cases, mismatches {mismatches:?}, {elapsed:.2?} (limit 1 s)"),
    )
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let p = random_problem(&mut rng).unwrap();
        let report = grad_check(&p.net, &p.states, &p.actions, &p.targets, 1e-5).unwrap();
        worst = worst.max(report.max_rel_error);
    }
    let elapsed = start.elapsed();
    Verdict::new(
        worst < 1e-4 && within(Duration::from_secs(30), elapsed),
        format!("20 nets, max relative error {worst:.2e} (tol 1e-4), {elapsed:.2?} (limit 30 s)"),
    )
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n_models = rng.gen_range(1..8);
        let dim = rng.gen_range(1..64);
        let snaps: Vec<Vec<f64>> = (0..n_models)
            .map(|_| (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect())
            .collect();
        let weights: Vec<f64> = (0..n_models).map(|_| rng.gen_range(1.0..100.0)).collect();
        let total: f64 = weights.iter().sum();
        let g = aggregate(&snaps, &weights).unwrap();
        for j in 0..dim {
            let mean: f64 = snaps.iter().zip(&weights).map(|(s, w)| w * s[j]).sum::<f64>() / total;
            worst = worst.max((g[j] - mean).abs());
        }
    }
    let mean_ok = worst < 1e-12;

    let mut identity_ok = true;
    for _ in 0..200 {
        let theta: Vec<f64> = (0..rng.gen_range(1..64)).map(|_| rng.gen_range(-1e3..1e3)).collect();
        let n_models = rng.gen_range(1..8);
        let weights: Vec<f64> = (0..n_models).map(|_| rng.gen_range(0.5..50.0)).collect();
        let g = aggregate(&vec![theta.clone(); n_models], &weights).unwrap();
        identity_ok &= g.iter().zip(&theta).all(|(a, b)| a.to_bits() == b.to_bits());
    }

    // A one-F-AP run of both learners; M < N_c <= K*M admits no N_c at K = 1.
    let mut single = small_config();
    single.k_faps = 1;
    single.slots = 50;
    let fed = build_scheme("fdrl", &single, 1);
    let cen = build_scheme("centralized", &single, 1);
    let k1 = match (&fed, &cen) {
        (Ok(_), Ok(_)) => match (simulate_one(&single, "fdrl"), simulate_one(&single, "centralized")) {
            (Ok(a), Ok(b)) => (a == b, "K=1 trajectories compared".to_string()),
            (a, b) => (false, format!("K=1 run failed: fdrl {:?}, centralized {:?}", a.err(), b.err())),
        },
        _ => (
            false,
            format!(
                "K=1 run impossible: fdrl: {}; centralized: {}",
                fed.err().map_or("ok".into(), |e| e.to_string()),
                cen.err().map_or("ok".into(), |e| e.to_string())
            ),
        ),
    };

    let elapsed = start.elapsed();
    Verdict::new(
        mean_ok && identity_ok && k1.0 && within(Duration::from_secs(10), elapsed),
        format!(
            "weighted mean max err {worst:.1e} (tol 1e-12) {}, identical models bitwise {}, {}, {elapsed:.2?} (limit 10 s)",
            ok(mean_ok),
            ok(identity_ok),
            k1.1
        ),
    )
}

fn simulate_one(cfg: &ExperimentConfig, scheme: &str) -> codedcache::Result<Vec<(f64, usize)>> {
    let mut cfg = cfg.clone();
    cfg.schemes = vec![scheme.to_string()];
    let run = simulate(&cfg, 1)?;
    Ok(run.records.iter().map(|r| (r.delay_ms, r.n_cached)).collect())
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "violated"
    }
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let mut cfg = small_config();
    cfg.schemes = vec!["fdrl".into()];
    let geom = cfg.geometry();
    let pop = zipf_profile(1.0, geom.n_contents).unwrap();
    let oracle = brute_force_placement_oracle(pop.probabilities(), geom, cfg.delays(), cfg.requests_per_slot).unwrap();
    let grid = build_action_space(geom, &cfg.action_grid).unwrap();
    let best = oracle.restricted_to(grid.candidates()).unwrap();

    let mut seeds_ok = 0;
    let mut parts = Vec::new();
    for &seed in &cfg.seeds {
        let run = simulate(&cfg, seed).unwrap();
        let stats = window_stats(&run.records, cfg.slots, |r| r.delay_ms);
        let mean = stats[&("fdrl".to_string(), seed)].0;
        let gap = (mean - best.expected_delay) / best.expected_delay;
        if gap.abs() <= 0.05 {
            seeds_ok += 1;
        }
        parts.push(format!("seed {seed}: {mean:.3} ({:+.2}%)", 100.0 * gap));
    }
    let elapsed = start.elapsed();
    Verdict::new(
        seeds_ok >= 4 && within(Duration::from_secs(600), elapsed),
        format!(
            "grid optimum N_c={} {:.3} ms; {}; {seeds_ok}/5 within 5% (need 4); {elapsed:.2?} (limit 10 min)",
            best.n_cached,
            best.expected_delay,
            parts.join(", ")
        ),
    )
}

fn criteria_5_6() -> (Verdict, Verdict) {
    let start = Instant::now();
    let cfg = trend_config();
    let mut records = Vec::new();
    for &seed in &cfg.seeds {
        records.extend(simulate(&cfg, seed).unwrap().records);
    }
    let elapsed = start.elapsed();
    let delay = window_stats(&records, cfg.slots, |r| r.delay_ms);
    let gain = window_stats(&records, cfg.slots, |r| r.local_caching_gain);
    let d = |s: &str| seed_mean(&delay, s, |v| v.0);
    let sd = |s: &str| seed_mean(&delay, s, |v| v.1);
    let g = |s: &str| seed_mean(&gain, s, |v| v.0);

    let lower = d("fdrl") < d("lfu") && d("fdrl") < d("apcc");
    let steadier = sd("fdrl") < sd("lfu");
    let c5 = Verdict::new(
        lower && steadier && within(Duration::from_secs(1800), elapsed),
        format!(
            "delay fdrl {:.3} < lfu {:.3} and apcc {:.3}: {}; std fdrl {:.3} < lfu {:.3}: {}; \
             (centralized {:.3}, nucc {:.3}); {elapsed:.2?} (limit 30 min)",
            d("fdrl"),
            d("lfu"),
            d("apcc"),
            ok(lower),
            sd("fdrl"),
            sd("lfu"),
            ok(steadier),
            d("centralized"),
            d("nucc"),
        ),
    );
    let ordered = g("lfu") > g("fdrl") && g("fdrl") > g("apcc");
    let c6 = Verdict::new(
        ordered,
        format!("local caching gain lfu {:.4} > fdrl {:.4} > apcc {:.4}", g("lfu"), g("fdrl"), g("apcc")),
    );
    (c5, c6)
}

fn criterion_7() -> Verdict {
    let start = Instant::now();
    let cfg = trend_config();
    let out = sweep_in_memory(&cfg, "M", &[5.0, 10.0, 15.0, 20.0]).unwrap();
    let elapsed = start.elapsed();
    let tol = cfg.d_a * cfg.k_faps as f64 * 0.01;
    let mut violations = Vec::new();
    let mut lines = Vec::new();
    for scheme in &cfg.schemes {
        let curve: Vec<f64> = out.summary.iter().filter(|s| &s.scheme == scheme).map(|s| s.mean_delay_ms).collect();
        for w in curve.windows(2) {
            if w[1] - w[0] > tol {
                violations.push(format!("{scheme} {:.3}->{:.3}", w[0], w[1]));
            }
        }
        lines.push(format!("{scheme} [{}]", curve.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(", ")));
    }
    Verdict::new(
        violations.is_empty() && within(Duration::from_secs(7200), elapsed),
        format!(
            "M=5,10,15,20: {}; increases beyond {tol} ms: {violations:?}; {elapsed:.2?} (limit 2 h)",
            lines.join("; ")
        ),
    )
}

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let cfg = trend_config();
    let out = sweep_in_memory(&cfg, "Z", &[1.0, 3.0, 10.0]).unwrap();
    let elapsed = start.elapsed();
    let at = |scheme: &str, z: f64| {
        out.summary
            .iter()
            .find(|s| s.scheme == scheme && s.value == z)
            .map(|s| s.mean_delay_ms)
            .unwrap()
    };
    let lfu_up = at("lfu", 10.0) > at("lfu", 1.0);
    let nucc_up = at("nucc", 10.0) > at("nucc", 1.0);
    let rel = (at("fdrl", 10.0) - at("fdrl", 3.0)) / at("fdrl", 3.0);
    let fdrl_flat = rel < 0.05;
    Verdict::new(
        lfu_up && nucc_up && fdrl_flat && within(Duration::from_secs(7200), elapsed),
        format!(
            "lfu Z=1 {:.3} -> Z=10 {:.3}: {}; nucc Z=1 {:.3} -> Z=10 {:.3}: {}; fdrl Z=3 {:.3} -> Z=10 {:.3} ({:+.2}%, < 5%): {}; {elapsed:.2?} (limit 2 h)",
            at("lfu", 1.0),
            at("lfu", 10.0),
            ok(lfu_up),
            at("nucc", 1.0),
            at("nucc", 10.0),
            ok(nucc_up),
            at("fdrl", 3.0),
            at("fdrl", 10.0),
            100.0 * rel,
            ok(fdrl_flat)
        ),
    )
}

/// Linear dueling net whose Q-values are `value_bias + adv_bias - mean(adv_bias)`.
fn biased_net(input: usize, value_bias: f64, adv_bias: &[f64]) -> DuelingNet {
    let shape = NetShape {
        input,
        trunk: vec![],
        value_hidden: vec![],
        advantage_hidden: vec![],
        n_actions: adv_bias.len(),
    };
    let mut net = DuelingNet::zeros(shape).unwrap();
    let layers = net.layers().to_vec();
    let v = layers[0].param_range();
    net.params_mut()[v.end - 1] = value_bias;
    let a = layers[1].param_range();
    net.params_mut()[a.end - adv_bias.len()..a.end].copy_from_slice(adv_bias);
    net
}

fn criterion_9() -> Verdict {
    let delays = Delays { d_f: 5.0, d_a: 1.0 };
    let params = RewardParams {
        mu1: 0.95,
        mu2: 0.05,
        phi: 3.0,
        normalize_rows: false,
    };
    let one_row = cost_from_loads(&[0.0], 0, 5, delays, params).reward;
    let expect_one = 3.0 * (-(0.05f64 * 1.0 * 5.0)).exp();
    let empty = cost_from_loads(&[], 0, 5, delays, params).reward;
    // two rows with loads 1.5 and 0.25
    let two = cost_from_loads(&[1.5, 0.25], 0, 5, delays, params).reward;
    let expect_two = 3.0 * (-(0.95 * 5.0 * 1.5 + 0.25 + 0.95 * 5.0 * 0.25 + 0.25f64)).exp();

    let state = LocalState::from_values(vec![0.2, 0.5, 0.3]).unwrap();
    let online = biased_net(3, 2.0, &[-1.0, 1.0]);
    let target = biased_net(3, 1.5, &[0.5, -0.5]);
    let y = double_q_target(0.5, &state, &online, &target, 0.9).unwrap();
    let y0 = double_q_target(0.5, &state, &online, &target, 0.0).unwrap();

    let errs = [
        (one_row - expect_one).abs(),
        (empty - 3.0).abs(),
        (two - expect_two).abs(),
        (y - 1.4).abs(),
        (y0 - 0.5).abs(),
    ];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    Verdict::new(
        worst < 1e-9,
        format!(
            "reward one idle row {one_row:.9} (3e^-0.25), no rows {empty}, two rows {two:.6e}; \
             double-Q target {y:.12} (1.4), gamma 0 {y0}; max err {worst:.1e} (tol 1e-9)"
        ),
    )
}

fn criterion_10() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut cfg = small_config();
    cfg.slots = 300;
    cfg.seeds = vec![4, 9];
    cfg.checkpoints = true;
    cfg.out_dir = out.clone();
    let mut files: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for _ in 0..2 {
        if out.exists() {
            std::fs::remove_dir_all(&out).unwrap();
        }
        run_experiment(&cfg).unwrap();
        sweep(&cfg, "V", &[6.0, 9.0]).unwrap();
        let mut found = Vec::new();
        collect_files(&out, &out, &mut found);
        found.sort();
        files.push(found);
    }
    let names: Vec<&String> = files[0].iter().map(|(n, _)| n).collect();
    let n_csv = names.iter().filter(|n| n.ends_with(".csv")).count();
    let differing: Vec<&String> = files[0]
        .iter()
        .zip(&files[1])
        .filter(|(a, b)| a != b)
        .map(|(a, _)| &a.0)
        .collect();
    let identical = files[0].len() == files[1].len() && differing.is_empty();
    Verdict::new(
        identical && n_csv >= 3,
        format!(
            "two reruns of run + V sweep: {} files ({n_csv} CSV) byte-identical: {} {differing:?}",
            names.len(),
            ok(identical)
        ),
    )
}

fn collect_files(root: &std::path::Path, dir: &std::path::Path, out: &mut Vec<(String, Vec<u8>)>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect_files(root, &path, out);
        } else {
            let rel = path.strip_prefix(root).unwrap().display().to_string();
            out.push((rel, std::fs::read(&path).unwrap()));
        }
    }
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let wanted = |c: u32| {
        if args.is_empty() {
            true
        } else {
            selected.contains(&c)
        }
    };

    let mut results: Vec<(u32, Verdict)> = Vec::new();
    let mut report = |c: u32, v: Verdict| {
        println!("criterion {c:>2}: {}  {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((c, v));
    };
    let simple: [(u32, fn() -> Verdict); 5] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (9, criterion_9),
        (10, criterion_10),
    ];
    for (c, f) in simple.iter().filter(|(c, _)| *c < 9 && wanted(*c)) {
        report(*c, f());
    }
    if wanted(4) {
        report(4, criterion_4());
    }
    if wanted(5) || wanted(6) {
        let (c5, c6) = criteria_5_6();
        if wanted(5) {
            report(5, c5);
        }
        if wanted(6) {
            report(6, c6);
        }
    }
    if wanted(7) {
        report(7, criterion_7());
    }
    if wanted(8) {
        report(8, criterion_8());
    }
    for (c, f) in simple.iter().filter(|(c, _)| *c >= 9 && wanted(*c)) {
        report(*c, f());
    }

    let failed: Vec<u32> = results.iter().filter(|(_, v)| !v.pass).map(|(c, _)| *c).collect();
    println!(
        "acceptance: {} passed, {} failed {:?}",
        results.len() - failed.len(),
        failed.len(),
        failed
    );
    if !failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
