use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::experiment::RunReport;
use super::sweep::SweepReport;
use crate::error::{Error, Result};
use crate::neighborhood::LnsReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    /// CSV plus a `<stem>.series.json` file of plottable series.
    PlotData,
}

#[derive(Debug, Clone, Copy)]
pub enum Report<'a> {
    Runs(&'a [RunReport]),
    Sweep(&'a SweepReport),
    SweepSummary(&'a SweepReport),
    Lns(&'a LnsReport),
}

fn f6(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.6}")
    }
}

fn joined<T>(items: &[T], fmt: impl Fn(&T) -> String) -> String {
    items.iter().map(fmt).collect::<Vec<_>>().join(";")
}

fn to_csv(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub const RUN_COLUMNS: [&str; 11] = [
    "feature", "fusion", "layer", "n_runs", "mean_wa", "std_wa", "wa_per_seed", "seeds", "n_train", "n_test", "fingerprint",
];
pub const SWEEP_COLUMNS: [&str; 8] = ["layer", "feature", "fusion", "n_runs", "mean_wa", "std_wa", "wa_per_seed", "status"];
pub const SUMMARY_COLUMNS: [&str; 10] = [
    "feature",
    "fusion",
    "layers_ok",
    "layers_failed",
    "mean_of_layer_means",
    "std_of_layer_means",
    "pooled_mean",
    "pooled_std",
    "best_layer",
    "best_mean_wa",
];
pub const LNS_COLUMNS: [&str; 4] = ["layer", "K", "mean_lns", "vocab_size"];

/// CSV text of a report. Floats carry six decimals; timings are left out so
/// equal inputs give identical bytes.
pub fn report_csv(report: Report<'_>) -> Result<String> {
    match report {
        Report::Runs(runs) => to_csv(
            &RUN_COLUMNS,
            runs.iter()
                .map(|r| {
                    vec![
                        r.feature.to_string(),
                        r.fusion.to_string(),
                        r.layer.to_string(),
                        r.n_runs().to_string(),
                        f6(r.mean_wa),
                        f6(r.std_wa),
                        joined(&r.wa, |x| f6(*x)),
                        joined(&r.seeds, |s| s.to_string()),
                        r.n_train.to_string(),
                        r.n_test.to_string(),
                        r.fingerprint.clone(),
                    ]
                })
                .collect(),
        ),
        Report::Sweep(sweep) => to_csv(
            &SWEEP_COLUMNS,
            sweep
                .rows
                .iter()
                .map(|row| {
                    let (n, mean, std, wa) = match &row.run {
                        Some(r) => (r.n_runs().to_string(), f6(r.mean_wa), f6(r.std_wa), joined(&r.wa, |x| f6(*x))),
                        None => ("0".into(), String::new(), String::new(), String::new()),
                    };
                    vec![
                        row.layer.to_string(),
                        row.feature.to_string(),
                        row.fusion.to_string(),
                        n,
                        mean,
                        std,
                        wa,
                        row.status.to_string(),
                    ]
                })
                .collect(),
        ),
        Report::SweepSummary(sweep) => to_csv(
            &SUMMARY_COLUMNS,
            sweep
                .summaries()
                .into_iter()
                .map(|s| {
                    vec![
                        s.feature.to_string(),
                        s.fusion.to_string(),
                        s.layers_ok.to_string(),
                        s.layers_failed.to_string(),
                        f6(s.mean_of_layer_means),
                        f6(s.std_of_layer_means),
                        f6(s.pooled_mean),
                        f6(s.pooled_std),
                        s.best_layer.map_or_else(String::new, |l| l.to_string()),
                        f6(s.best_mean_wa),
                    ]
                })
                .collect(),
        ),
        Report::Lns(lns) => to_csv(
            &LNS_COLUMNS,
            lns.rows
                .iter()
                .map(|r| vec![r.layer.to_string(), r.k.to_string(), f6(r.mean_lns), r.vocab_size.to_string()])
                .collect(),
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub x: Vec<usize>,
    pub y: Vec<f64>,
    pub error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotData {
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Layer-indexed series: one per fusion mode for WA, one per K for LNS.
pub fn plot_data(report: Report<'_>) -> PlotData {
    match report {
        Report::Runs(runs) => {
            let mut keys: Vec<_> = runs.iter().map(|r| (r.feature, r.fusion)).collect();
            keys.sort();
            keys.dedup();
            PlotData {
                x_label: "layer".into(),
                y_label: "weighted accuracy".into(),
                series: keys
                    .into_iter()
                    .map(|(feat, fus)| {
                        let mut rs: Vec<&RunReport> = runs.iter().filter(|r| r.feature == feat && r.fusion == fus).collect();
                        rs.sort_by_key(|r| r.layer);
                        Series {
                            name: format!("{feat}/{fus}"),
                            x: rs.iter().map(|r| r.layer).collect(),
                            y: rs.iter().map(|r| round6(r.mean_wa)).collect(),
                            error: rs.iter().map(|r| round6(r.std_wa)).collect(),
                        }
                    })
                    .collect(),
            }
        }
        Report::Sweep(sweep) | Report::SweepSummary(sweep) => {
            let runs: Vec<RunReport> = sweep.rows.iter().filter_map(|r| r.run.clone()).collect();
            plot_data(Report::Runs(&runs))
        }
        Report::Lns(lns) => PlotData {
            x_label: "layer".into(),
            y_label: "mean LNS".into(),
            series: lns
                .ks
                .iter()
                .map(|&k| {
                    let rows: Vec<_> = lns.rows.iter().filter(|r| r.k == k).collect();
                    Series {
                        name: format!("K={k}"),
                        x: rows.iter().map(|r| r.layer).collect(),
                        y: rows.iter().map(|r| round6(r.mean_lns)).collect(),
                        error: vec![0.0; rows.len()],
                    }
                })
                .collect(),
        },
    }
}

pub fn series_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path.file_stem().map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    csv_path.with_file_name(format!("{stem}.series.json"))
}

/// Writes the report to `path` and returns every file written.
pub fn emit_report(report: Report<'_>, format: ReportFormat, path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, report_csv(report)?).map_err(|e| Error::io(path, e))?;
    let mut written = vec![path.to_path_buf()];
    if format == ReportFormat::PlotData {
        let sp = series_path(path);
        let mut json = serde_json::to_string_pretty(&plot_data(report)).expect("plot data serializes");
        json.push('\n');
        fs::write(&sp, json).map_err(|e| Error::io(&sp, e))?;
        written.push(sp);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighborhood::LnsRow;
    use crate::ser::config::{Feature, Fusion};
    use crate::ser::sweep::{RowStatus, SweepRow};

    fn run(layer: usize, wa: Vec<f64>) -> RunReport {
        let (mean_wa, std_wa) = crate::ser::metrics::mean_std(&wa);
        RunReport {
            fingerprint: "abc".into(),
            feature: Feature::Awe,
            fusion: Fusion::Concat,
            layer,
            seeds: (1..=wa.len() as u64).collect(),
            wa,
            mean_wa,
            std_wa,
            n_train: 8,
            n_test: 2,
            wall_time_s: 1.5,
        }
    }

    #[test]
    fn lns_columns_are_exact() {
        let r = LnsReport {
            ks: vec![5],
            rows: vec![LnsRow {
                layer: 0,
                k: 5,
                mean_lns: 0.25,
                vocab_size: 9,
            }],
        };
        assert_eq!(report_csv(Report::Lns(&r)).unwrap(), "layer,K,mean_lns,vocab_size\n0,5,0.250000,9\n");
    }

    #[test]
    fn sweep_rows_and_failures() {
        let sweep = SweepReport {
            rows: vec![
                SweepRow {
                    layer: 0,
                    feature: Feature::Awe,
                    fusion: Fusion::Concat,
                    status: RowStatus::Ok,
                    run: Some(run(0, vec![0.5, 1.0])),
                },
                SweepRow {
                    layer: 1,
                    feature: Feature::Awe,
                    fusion: Fusion::Concat,
                    status: RowStatus::Failed("boom, badly".into()),
                    run: None,
                },
            ],
        };
        let text = report_csv(Report::Sweep(&sweep)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "0,awe,concat,2,0.750000,0.250000,0.500000;1.000000,ok");
        assert_eq!(lines[2], "1,awe,concat,0,,,,\"failed: boom, badly\"");
        let summary = report_csv(Report::SweepSummary(&sweep)).unwrap();
        assert!(summary.lines().nth(1).unwrap().starts_with("awe,concat,1,1,0.750000,0.000000,0.750000,0.250000,0,"));
    }

    #[test]
    fn plot_data_files() {
        let dir = tempfile::tempdir().unwrap();
        let runs = vec![run(2, vec![0.9]), run(1, vec![0.8])];
        let out = emit_report(Report::Runs(&runs), ReportFormat::PlotData, dir.path().join("runs.csv")).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out[1].ends_with("runs.series.json"));
        let data = plot_data(Report::Runs(&runs));
        assert_eq!(data.series[0].x, vec![1, 2]);
        assert_eq!(data.series[0].y, vec![0.8, 0.9]);
        let csv = fs::read_to_string(&out[0]).unwrap();
        assert!(!csv.contains("1.5"), "wall time must not be written");
    }
}
