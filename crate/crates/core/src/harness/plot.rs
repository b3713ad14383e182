//! Self-contained SVG line charts of metric and sweep CSVs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::csv::{read_metrics, read_summary, read_table, METRICS_HEADER, SUMMARY_HEADER};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub out_dir: PathBuf,
    /// Rolling-mean window for time series, in slots.
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

/// Tick label with at most four significant digits.
fn tick(v: f64) -> String {
    let s = format!("{:.4}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

impl LineChart {
    pub fn to_svg(&self) -> String {
        let (x0, x1) = bounds(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
        let (y0, y1) = bounds(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for i in 0..=5 {
            let f = i as f64 / 5.0;
            let xv = x0 + f * (x1 - x0);
            let yv = y0 + f * (y1 - y0);
            let (px, py) = (sx(xv), sy(yv));
            let _ = writeln!(
                out,
                r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#ccc"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                TOP,
                TOP + ph,
                TOP + ph + 18.0,
                tick(xv)
            );
            let _ = writeln!(
                out,
                r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ccc"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT + pw,
                LEFT - 6.0,
                py + 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 18.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for (i, s) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
            let ly = TOP + 16.0 + 20.0 * i as f64;
            let lx = LEFT + pw + 12.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/><text x="{:.2}" y="{:.2}" class="legend">{}</text>"#,
                lx + 24.0,
                lx + 30.0,
                ly + 4.0,
                escape(&s.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Trailing mean over up to `window` points.
pub fn rolling_mean(values: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for i in 0..values.len() {
        sum += values[i];
        if i >= w {
            sum -= values[i - w];
        }
        out.push(sum / (i + 1).min(w) as f64);
    }
    out
}

/// Seed-mean of one metric per (scheme, slot), smoothed.
fn time_series(records: &[super::experiment::MetricRecord], window: usize, f: impl Fn(&super::experiment::MetricRecord) -> f64) -> Vec<Series> {
    let mut schemes: Vec<String> = records.iter().map(|r| r.scheme.clone()).collect();
    schemes.sort();
    schemes.dedup();
    schemes
        .into_iter()
        .map(|name| {
            let mut by_slot: std::collections::BTreeMap<usize, (f64, usize)> = Default::default();
            for r in records.iter().filter(|r| r.scheme == name) {
                let e = by_slot.entry(r.slot).or_default();
                e.0 += f(r);
                e.1 += 1;
            }
            let slots: Vec<f64> = by_slot.keys().map(|&s| s as f64).collect();
            let means: Vec<f64> = by_slot.values().map(|(s, n)| s / *n as f64).collect();
            let smooth = rolling_mean(&means, window);
            Series {
                name,
                points: slots.into_iter().zip(smooth).collect(),
            }
        })
        .collect()
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "plot".into())
}

/// Charts for one CSV, keyed by output file name.
fn charts_for(path: &Path, window: usize) -> Result<Vec<(String, LineChart)>> {
    let table = read_table(path)?;
    let name = stem(path);
    if table.rows.is_empty() {
        return Err(Error::Schema(format!("{}: no records to plot", path.display())));
    }
    if table.header == METRICS_HEADER {
        let records = read_metrics(path)?;
        let title_window = format!("rolling mean over {window} slots");
        Ok(vec![
            (
                format!("{name}_delay.svg"),
                LineChart {
                    title: format!("Average delay ({title_window})"),
                    x_label: "slot".into(),
                    y_label: "delay (ms)".into(),
                    series: time_series(&records, window, |r| r.delay_ms),
                },
            ),
            (
                format!("{name}_gain.svg"),
                LineChart {
                    title: format!("Local caching gain ({title_window})"),
                    x_label: "slot".into(),
                    y_label: "hit rate x caching fraction".into(),
                    series: time_series(&records, window, |r| r.local_caching_gain),
                },
            ),
        ])
    } else if table.header == SUMMARY_HEADER {
        let rows = read_summary(path)?;
        let parameter = rows[0].parameter.clone();
        let mut schemes: Vec<String> = rows.iter().map(|r| r.scheme.clone()).collect();
        schemes.sort();
        schemes.dedup();
        let series = schemes
            .into_iter()
            .map(|s| {
                let mut points: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| r.scheme == s)
                    .map(|r| (r.value, r.mean_delay_ms))
                    .collect();
                points.sort_by(|a, b| a.0.total_cmp(&b.0));
                Series { name: s, points }
            })
            .collect();
        Ok(vec![(
            format!("{name}_delay.svg"),
            LineChart {
                title: format!("Converged delay versus {parameter}"),
                x_label: parameter,
                y_label: "delay (ms)".into(),
                series,
            },
        )])
    } else {
        Err(Error::Schema(format!(
            "{}: header {:?} matches neither the metrics nor the sweep summary schema",
            path.display(),
            table.header
        )))
    }
}

/// Validates every input first, then writes one or two SVGs per CSV.
pub fn render_plots(csv_paths: &[PathBuf], spec: &PlotSpec) -> Result<Vec<PathBuf>> {
    if spec.window == 0 {
        return Err(Error::InvalidParameter("smoothing window must be positive".into()));
    }
    let mut charts = Vec::new();
    for p in csv_paths {
        charts.extend(charts_for(p, spec.window)?);
    }
    std::fs::create_dir_all(&spec.out_dir).map_err(|e| Error::io(&spec.out_dir, e))?;
    charts
        .into_iter()
        .map(|(file, chart)| {
            let path = spec.out_dir.join(file);
            std::fs::write(&path, chart.to_svg()).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::csv::write_metrics;
    use crate::harness::experiment::MetricRecord;

    fn rec(scheme: &str, slot: usize, delay: f64) -> MetricRecord {
        MetricRecord {
            scheme: scheme.into(),
            seed: 1,
            slot,
            delay_ms: delay,
            hit_rate: 0.5,
            caching_fraction: 0.5,
            local_caching_gain: 0.25,
            n_cached: 3,
            reward: 1.0,
            loss: f64::NAN,
        }
    }

    #[test]
    fn rolling_mean_values() {
        assert_eq!(rolling_mean(&[1.0, 3.0, 5.0, 7.0], 2), vec![1.0, 2.0, 4.0, 6.0]);
        assert_eq!(rolling_mean(&[2.0, 4.0], 10), vec![2.0, 3.0]);
    }

    #[test]
    fn empty_csv_is_an_error_and_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("metrics.csv");
        write_metrics(&csv, &[]).unwrap();
        let out = dir.path().join("plots");
        let spec = PlotSpec {
            out_dir: out.clone(),
            window: 50,
        };
        assert!(render_plots(&[csv], &spec).is_err());
        assert!(!out.exists());
    }

    #[test]
    fn one_polyline_and_legend_entry_per_scheme() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("metrics.csv");
        let names = ["apcc", "fdrl", "lfu", "nucc"];
        let recs: Vec<_> = names
            .iter()
            .flat_map(|s| (1..=30).map(move |t| rec(s, t, t as f64)))
            .collect();
        write_metrics(&csv, &recs).unwrap();
        let spec = PlotSpec {
            out_dir: dir.path().join("p"),
            window: 5,
        };
        let files = render_plots(std::slice::from_ref(&csv), &spec).unwrap();
        assert_eq!(files.len(), 2);
        let svg = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 4);
        for n in names {
            assert!(svg.contains(&format!(r#"class="legend">{n}</text>"#)));
        }
        let again = render_plots(&[csv], &spec).unwrap();
        assert_eq!(std::fs::read(&again[0]).unwrap(), svg.into_bytes());
    }

    #[test]
    fn unknown_schema_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("x.csv");
        std::fs::write(&csv, "a,b\n1,2\n").unwrap();
        let spec = PlotSpec {
            out_dir: dir.path().to_path_buf(),
            window: 5,
        };
        assert!(matches!(render_plots(&[csv], &spec), Err(Error::Schema(_))));
    }
}
