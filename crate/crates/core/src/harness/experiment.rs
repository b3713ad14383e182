//! The slot loop shared by every scheme.

use std::path::PathBuf;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::csv::write_metrics;
use crate::baselines::{Apcc, Centralized, Lfu, Nucc};
use crate::dqn::{checkpoint, DuelingNet};
use crate::env::global_rows;
use crate::federated::FederatedScheme;
use crate::popularity::{build_process, empirical_popularity, mean_popularity, PopularityProcess, RequestBatch};
use crate::scheme::{Scheme, SlotObservation};
use crate::seeds::{self, Component};
use crate::{Error, Result};

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub scheme: String,
    pub seed: u64,
    pub slot: usize,
    pub delay_ms: f64,
    pub hit_rate: f64,
    pub caching_fraction: f64,
    /// `hit_rate * caching_fraction`.
    pub local_caching_gain: f64,
    pub n_cached: usize,
    pub reward: f64,
    pub loss: f64,
}

/// Request batches of every F-AP, slot by slot; one stream per seed is shared
/// by all schemes.
#[derive(Debug, Clone)]
pub struct RequestStream {
    processes: Vec<PopularityProcess>,
    requests_per_slot: usize,
}

impl RequestStream {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        let processes = (0..cfg.k_faps)
            .map(|k| {
                build_process(
                    cfg.profiles,
                    (cfg.alpha_min, cfg.alpha_max),
                    cfg.stay_prob,
                    cfg.n_contents,
                    seeds::derive(seed, Component::Popularity, k as u64),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RequestStream {
            processes,
            requests_per_slot: cfg.requests_per_slot,
        })
    }

    /// Advances every chain, then samples the slot's batches.
    pub fn next_slot(&mut self) -> Vec<RequestBatch> {
        self.processes
            .iter_mut()
            .map(|p| {
                p.advance();
                p.sample_requests(self.requests_per_slot)
            })
            .collect()
    }

    pub fn processes(&self) -> &[PopularityProcess] {
        &self.processes
    }
}

pub fn build_scheme(name: &str, cfg: &ExperimentConfig, seed: u64) -> Result<Box<dyn Scheme>> {
    let geom = cfg.geometry();
    Ok(match name {
        "fdrl" => Box::new(FederatedScheme::new(cfg, seed)?),
        "centralized" => Box::new(Centralized::new(cfg, seed)?),
        "lfu" => Box::new(Lfu::new(geom)?),
        "apcc" => Box::new(Apcc::new(geom, cfg.apcc_threshold())?),
        "nucc" => Box::new(Nucc::new(cfg)?),
        other => return Err(Error::Config(format!("unknown scheme '{other}'"))),
    })
}

/// Runs `schemes` side by side on one paired request stream.
pub fn simulate_with(cfg: &ExperimentConfig, seed: u64, schemes: &mut [&mut dyn Scheme]) -> Result<Vec<MetricRecord>> {
    let mut stream = RequestStream::new(cfg, seed)?;
    let delays = cfg.delays();
    let params = cfg.reward_params();
    let mut records = Vec::with_capacity(cfg.slots * schemes.len());
    for slot in 1..=cfg.slots {
        let batches = stream.next_slot();
        let rows = global_rows(&batches)?;
        let locals = batches
            .iter()
            .map(|b| empirical_popularity(b, cfg.n_contents))
            .collect::<Result<Vec<_>>>()?;
        let global = mean_popularity(&locals);
        let obs = SlotObservation {
            slot,
            batches: &batches,
            rows: &rows,
            local_popularity: &locals,
            global_popularity: &global,
        };
        for scheme in schemes.iter_mut() {
            let decision = scheme.decision();
            let cost = decision.evaluate(&rows, cfg.k_faps, delays, params)?;
            let hit_rate = cost.hit_rate();
            let caching_fraction = decision.caching_fraction();
            let n_cached = decision.n_cached();
            let report = scheme.observe(&obs, &cost)?;
            records.push(MetricRecord {
                scheme: scheme.name().to_string(),
                seed,
                slot,
                delay_ms: cost.delay_ms,
                hit_rate,
                caching_fraction,
                local_caching_gain: hit_rate * caching_fraction,
                n_cached,
                reward: cost.reward,
                loss: report.loss,
            });
        }
    }
    Ok(records)
}

/// Metrics and final networks of one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<MetricRecord>,
    /// `(scheme, model name, network)`.
    pub models: Vec<(String, String, DuelingNet)>,
}

pub fn simulate(cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    let mut schemes = cfg
        .schemes
        .iter()
        .map(|name| build_scheme(name, cfg, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut refs: Vec<&mut dyn Scheme> = schemes.iter_mut().map(|s| s.as_mut() as &mut dyn Scheme).collect();
    let records = simulate_with(cfg, seed, &mut refs)?;
    let models = schemes
        .iter()
        .flat_map(|s| {
            s.models()
                .into_iter()
                .map(|(name, net)| (s.name().to_string(), name, net.clone()))
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(SeedRun { seed, records, models })
}

/// Every seed of `cfg`, in parallel; records sorted by (scheme, seed, slot).
pub fn run_seeds(cfg: &ExperimentConfig) -> Result<(Vec<MetricRecord>, Vec<SeedRun>)> {
    cfg.validate()?;
    let mut runs = cfg
        .seeds
        .par_iter()
        .map(|&seed| simulate(cfg, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut records: Vec<MetricRecord> = runs.iter_mut().flat_map(|r| std::mem::take(&mut r.records)).collect();
    sort_records(&mut records);
    Ok((records, runs))
}

pub fn sort_records(records: &mut [MetricRecord]) {
    records.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.seed.cmp(&b.seed))
            .then(a.slot.cmp(&b.slot))
    });
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<MetricRecord>,
    pub metrics_csv: PathBuf,
    pub checkpoints: Vec<PathBuf>,
}

/// Runs every seed and writes `metrics.csv`, `config.txt` and, when enabled,
/// `checkpoints/<scheme>_seed<seed>_<model>.ccnet` under `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let (records, runs) = run_seeds(cfg)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let config_path = cfg.out_dir.join("config.txt");
    std::fs::write(&config_path, super::config::emit_config(cfg)).map_err(|e| Error::io(&config_path, e))?;
    let metrics_csv = cfg.out_dir.join("metrics.csv");
    write_metrics(&metrics_csv, &records)?;
    let mut checkpoints = Vec::new();
    if cfg.checkpoints {
        let dir = cfg.out_dir.join("checkpoints");
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for run in &runs {
            for (scheme, name, net) in &run.models {
                let path = dir.join(format!("{scheme}_seed{}_{name}.ccnet", run.seed));
                checkpoint::save(net, &path)?;
                checkpoints.push(path);
            }
        }
    }
    Ok(ExperimentOutput {
        records,
        metrics_csv,
        checkpoints,
    })
}
