//! Parameter sweeps summarized over the converged window (last 20% of slots).

use super::config::ExperimentConfig;
use super::csv::{write_summary, write_sweep};
use super::experiment::{run_seeds, MetricRecord};
use crate::{Error, Result};

pub const SWEEPABLE: [&str; 4] = ["M", "Z", "K", "V"];

/// Per-seed converged-window means.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub scheme: String,
    pub seed: u64,
    pub mean_delay_ms: f64,
    pub mean_local_caching_gain: f64,
}

/// Mean and sample standard deviation over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub parameter: String,
    pub value: f64,
    pub scheme: String,
    pub seeds: usize,
    pub mean_delay_ms: f64,
    pub std_delay_ms: f64,
    pub mean_local_caching_gain: f64,
    pub std_local_caching_gain: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SweepSummary>,
}

/// First slot of the converged window: the last `ceil(T/5)` slots.
pub fn window_start(slots: usize) -> usize {
    slots - slots.div_ceil(5) + 1
}

/// Mean of `f` over the converged window, per (scheme, seed), in record order.
pub fn converged_means(records: &[MetricRecord], slots: usize, f: impl Fn(&MetricRecord) -> f64) -> Vec<(String, u64, f64)> {
    let start = window_start(slots);
    let mut out: Vec<(String, u64, f64, usize)> = Vec::new();
    for r in records.iter().filter(|r| r.slot >= start) {
        match out.last_mut() {
            Some((s, seed, sum, n)) if *s == r.scheme && *seed == r.seed => {
                *sum += f(r);
                *n += 1;
            }
            _ => out.push((r.scheme.clone(), r.seed, f(r), 1)),
        }
    }
    out.into_iter().map(|(s, seed, sum, n)| (s, seed, sum / n as f64)).collect()
}

/// Sample mean and standard deviation (`n - 1`), zero spread for one sample.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-seed rows for one finished experiment.
pub fn summarize_rows(parameter: &str, value: f64, records: &[MetricRecord], slots: usize) -> Vec<SweepRow> {
    let delays = converged_means(records, slots, |r| r.delay_ms);
    let gains = converged_means(records, slots, |r| r.local_caching_gain);
    delays
        .into_iter()
        .zip(gains)
        .map(|((scheme, seed, d), (_, _, g))| SweepRow {
            parameter: parameter.to_string(),
            value,
            scheme,
            seed,
            mean_delay_ms: d,
            mean_local_caching_gain: g,
        })
        .collect()
}

pub fn summarize(rows: &[SweepRow]) -> Vec<SweepSummary> {
    let mut keys: Vec<(f64, String)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(v, s)| *v == r.value && *s == r.scheme) {
            keys.push((r.value, r.scheme.clone()));
        }
    }
    keys.into_iter()
        .map(|(value, scheme)| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.value == value && r.scheme == scheme).collect();
            let d: Vec<f64> = group.iter().map(|r| r.mean_delay_ms).collect();
            let g: Vec<f64> = group.iter().map(|r| r.mean_local_caching_gain).collect();
            let (md, sd) = mean_std(&d);
            let (mg, sg) = mean_std(&g);
            SweepSummary {
                parameter: group[0].parameter.clone(),
                value,
                scheme,
                seeds: group.len(),
                mean_delay_ms: md,
                std_delay_ms: sd,
                mean_local_caching_gain: mg,
                std_local_caching_gain: sg,
            }
        })
        .collect()
}

/// Runs the experiment at every value of `parameter` and summarizes it.
/// Nothing is written; see [`sweep`].
pub fn sweep_in_memory(cfg: &ExperimentConfig, parameter: &str, values: &[f64]) -> Result<SweepOutput> {
    if !SWEEPABLE.contains(&parameter) {
        return Err(Error::InvalidParameter(format!(
            "cannot sweep '{parameter}', expected one of {SWEEPABLE:?}"
        )));
    }
    if values.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one value".into()));
    }
    let mut rows = Vec::new();
    for &value in values {
        let point = cfg.with_param(parameter, value)?;
        let (records, _) = run_seeds(&point)?;
        rows.extend(summarize_rows(parameter, value, &records, point.slots));
    }
    let summary = summarize(&rows);
    Ok(SweepOutput { rows, summary })
}

/// [`sweep_in_memory`], then writes `sweep_<P>.csv` and
/// `sweep_<P>_summary.csv` under `cfg.out_dir`.
pub fn sweep(cfg: &ExperimentConfig, parameter: &str, values: &[f64]) -> Result<SweepOutput> {
    let out = sweep_in_memory(cfg, parameter, values)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    write_sweep(&cfg.out_dir.join(format!("sweep_{parameter}.csv")), &out.rows)?;
    write_summary(&cfg.out_dir.join(format!("sweep_{parameter}_summary.csv")), &out.summary)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_is_last_fifth() {
        assert_eq!(window_start(100), 81);
        assert_eq!(window_start(3000), 2401);
        assert_eq!(window_start(7), 6);
        assert_eq!(window_start(1), 1);
    }

    #[test]
    fn mean_std_values() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_unknown_parameter() {
        let cfg = ExperimentConfig::default();
        assert!(matches!(sweep_in_memory(&cfg, "gamma", &[0.5]), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn single_value_sweep_matches_experiment() {
        let cfg = ExperimentConfig {
            n_contents: 12,
            k_faps: 3,
            cache_size: 2,
            requests_per_slot: 6,
            slots: 25,
            seeds: vec![1, 2],
            schemes: vec!["lfu".into(), "apcc".into(), "nucc".into()],
            ..ExperimentConfig::default()
        };
        let out = sweep_in_memory(&cfg, "M", &[2.0]).unwrap();
        let (records, _) = run_seeds(&cfg).unwrap();
        assert_eq!(out.rows, summarize_rows("M", 2.0, &records, 25));
        assert_eq!(out.summary.len(), 3);
        assert!(out.summary.iter().all(|s| s.seeds == 2));
    }
}
