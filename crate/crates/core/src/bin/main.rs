use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use codedcache::baselines::brute_force_placement_oracle;
use codedcache::dqn::gradcheck::{grad_check, random_problem};
use codedcache::env::{build_action_space, CacheGeometry, Delays};
use codedcache::harness::{self, ExperimentConfig, PlotSpec};
use codedcache::popularity::zipf_profile;
use codedcache::Result;

#[derive(Parser)]
#[command(name = "codedcache", version, about = "Federated DRL coded caching simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file; omitted keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $CODEDCACHE_OUT or ./results).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated schemes: fdrl, centralized, lfu, apcc, nucc.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scheme on paired request streams and write metrics.csv.
    Run(Common),
    /// Repeat the experiment over values of M, Z, K or V.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Render SVG charts from metrics or sweep summary CSVs.
    Plot {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        window: usize,
    },
    /// Exhaustive optimal placement for a small stationary Zipf instance.
    Oracle {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Rows per slot (V).
        #[arg(long, default_value_t = 9)]
        rows: usize,
        #[arg(long, default_value_t = 5.0)]
        d_f: f64,
        #[arg(long, default_value_t = 1.0)]
        d_a: f64,
    },
    /// Finite-difference check of the network gradient on random small nets.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        nets: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| codedcache::Error::Io {
                path: path.clone(),
                source: e,
            })?;
            harness::parse_config(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &c.out {
        cfg.out_dir = out.clone();
    }
    if let Some(s) = &c.schemes {
        cfg.schemes = s.clone();
    }
    for w in cfg.validate()? {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let cfg = load_config(&common)?;
            let out = harness::run_experiment(&cfg)?;
            println!("wrote {} records to {}", out.records.len(), out.metrics_csv.display());
            for (scheme, seeds) in summary_by_scheme(&out.records, cfg.slots) {
                println!("{scheme:>12}  converged delay {:.3} ms", seeds);
            }
        }
        Command::Sweep { common, param, values } => {
            let cfg = load_config(&common)?;
            let out = harness::sweep(&cfg, &param, &values)?;
            println!("{:>8} {:>12} {:>12} {:>10}", param, "scheme", "delay_ms", "std");
            for s in &out.summary {
                println!("{:>8} {:>12} {:>12.3} {:>10.3}", s.value, s.scheme, s.mean_delay_ms, s.std_delay_ms);
            }
        }
        Command::Plot { csv, out, window } => {
            for path in harness::render_plots(&csv, &PlotSpec { out_dir: out, window })? {
                println!("wrote {}", path.display());
            }
        }
        Command::Oracle {
            n,
            k,
            m,
            alpha,
            rows,
            d_f,
            d_a,
        } => {
            let geom = CacheGeometry {
                n_contents: n,
                k_faps: k,
                cache_size: m,
            };
            let pop = zipf_profile(alpha, n)?;
            let res = brute_force_placement_oracle(pop.probabilities(), geom, Delays { d_f, d_a }, rows)?;
            let grid = build_action_space(geom, &[])?;
            for p in &res.per_n_cached {
                let mark = if grid.index_of(p.n_cached).is_some() { "grid" } else { "" };
                println!("N_c = {:>2}  delay {:>10.4} ms  set {:?} {mark}", p.n_cached, p.expected_delay, p.cached_set);
            }
            println!("best: N_c = {} delay {:.4} ms", res.best.n_cached, res.best.expected_delay);
            if let Some(g) = res.restricted_to(grid.candidates()) {
                println!("best on grid: N_c = {} delay {:.4} ms", g.n_cached, g.expected_delay);
            }
        }
        Command::Gradcheck { nets, seed, h } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut worst: f64 = 0.0;
            for i in 0..nets {
                let p = random_problem(&mut rng)?;
                let report = grad_check(&p.net, &p.states, &p.actions, &p.targets, h)?;
                println!("net {i:>2}: max relative error {:.3e}", report.max_rel_error);
                worst = worst.max(report.max_rel_error);
            }
            println!("worst: {worst:.3e}");
        }
    }
    Ok(())
}

fn summary_by_scheme(records: &[harness::MetricRecord], slots: usize) -> Vec<(String, f64)> {
    let means = harness::sweep::converged_means(records, slots, |r| r.delay_ms);
    let mut out: Vec<(String, f64, usize)> = Vec::new();
    for (scheme, _, d) in means {
        match out.iter_mut().find(|(s, _, _)| *s == scheme) {
            Some(e) => {
                e.1 += d;
                e.2 += 1;
            }
            None => out.push((scheme, d, 1)),
        }
    }
    out.into_iter().map(|(s, d, n)| (s, d / n as f64)).collect()
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
