use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::plot::{density_plot, line_plot, Series};
use super::{BenchReport, CellRow, Experiment, Method, Result};

pub const CSV_HEADER: [&str; 13] = [
    "experiment",
    "cell_id",
    "n",
    "factor",
    "d_l",
    "d_r",
    "variant",
    "method",
    "mean_bias_pct",
    "std_bias_pct",
    "reps",
    "seed",
    "config_hash",
];

/// Writes one row per cell; an empty report still gets the header.
pub fn write_report_csv<W: Write>(rows: &[CellRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_report_csv<R: Read>(input: R) -> Result<Vec<CellRow>> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<std::result::Result<Vec<CellRow>, _>>()?;
    Ok(rows)
}

/// Writes `<experiment>.csv`, `<experiment>.json` and, where the experiment
/// has one, an SVG plot into `dir`. Returns the written paths.
pub fn emit_report(report: &BenchReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let stem = report.experiment.as_str();
    let mut written = Vec::new();

    let csv_path = dir.join(format!("{stem}.csv"));
    write_report_csv(&report.rows, fs::File::create(&csv_path)?)?;
    written.push(csv_path);

    let json_path = dir.join(format!("{stem}.json"));
    fs::write(&json_path, serde_json::to_string_pretty(report)?)?;
    written.push(json_path);

    let svg = match report.experiment {
        Experiment::StrengthSweep => Some(strength_plot(report)),
        Experiment::BiasSweep => Some(size_plot(report)),
        Experiment::Fidelity => report.density.as_ref().map(|d| {
            density_plot(
                "Learned (aligned) vs true mediator",
                &[("learned, aligned", d.aligned.as_slice()), ("true", d.truth.as_slice())],
            )
        }),
        Experiment::DimGrid | Experiment::Ablation => None,
    };
    if let Some(svg) = svg {
        let path = dir.join(format!("{stem}.svg"));
        fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}

fn series_by_method(report: &BenchReport, x: impl Fn(&CellRow) -> f64) -> Vec<Series> {
    let mut out = Vec::new();
    for m in [Method::Cfdivae, Method::Backdoor, Method::OracleZ] {
        let mut points: Vec<(f64, f64, f64)> = report
            .rows_for(m)
            .map(|r| (x(r), r.mean_bias_pct.abs(), r.std_bias_pct))
            .collect();
        if points.is_empty() {
            continue;
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        out.push(Series {
            name: m.as_str().to_string(),
            points,
        });
    }
    out
}

fn strength_plot(report: &BenchReport) -> String {
    let ticks = report.provenance.spec.factors.clone();
    line_plot(
        "Estimation bias vs confounding strength",
        "scaling factor",
        "|bias| (%)",
        &series_by_method(report, |r| r.factor),
        &ticks,
    )
}

fn size_plot(report: &BenchReport) -> String {
    let ticks: Vec<f64> = report.provenance.spec.sizes.iter().map(|&n| n as f64).collect();
    line_plot(
        "Estimation bias vs sample size",
        "n",
        "|bias| (%)",
        &series_by_method(report, |r| r.n as f64),
        &ticks,
    )
}
