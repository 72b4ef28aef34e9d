use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{best_layer, LayerSweepResult, Result, SweepError, TransferCell};

/// Everything one report covers.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub sweeps: Vec<LayerSweepResult>,
    pub transfer: Vec<TransferCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub json: PathBuf,
    pub sweeps_csv: PathBuf,
    pub best_layers_csv: PathBuf,
    pub transfer_csv: PathBuf,
}

pub const SCHEMA: &str = "periscope-report/1";

#[derive(Serialize)]
struct JsonReport<'a> {
    schema: &'static str,
    sweeps: Vec<JsonSweep<'a>>,
    transfer: Vec<JsonCell<'a>>,
}

#[derive(Serialize)]
struct JsonSweep<'a> {
    model_id: &'a str,
    training_strategy: &'a str,
    partition: &'a str,
    protocol: &'a str,
    total_layers: usize,
    best: JsonBest<'a>,
    rows: Vec<JsonRow<'a>>,
}

#[derive(Serialize)]
struct JsonBest<'a> {
    layer_index: usize,
    layer_name: &'a str,
    relative_depth: f64,
    eer_percent: f64,
}

#[derive(Serialize)]
struct JsonRow<'a> {
    layer_index: usize,
    layer_name: &'a str,
    relative_depth: f64,
    eer_percent: f64,
    genuine_count: usize,
    impostor_count: usize,
}

#[derive(Serialize)]
struct JsonCell<'a> {
    model_id: &'a str,
    training_strategy: &'a str,
    selector: &'a str,
    target: &'a str,
    layer_index: usize,
    layer_name: &'a str,
    relative_depth: f64,
    eer_percent: f64,
}

fn pct(rate: f64) -> f64 {
    rate * 100.0
}

fn pct2(rate: f64) -> String {
    crate::verimetrics::percent(rate)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

/// Writes `report.json`, `sweeps.csv`, `best_layers.csv` and `transfer.csv`
/// into `dir`. EER is reported in percent.
pub fn emit_report(dir: impl AsRef<Path>, report: &Report) -> Result<ReportFiles> {
    if report.sweeps.is_empty() && report.transfer.is_empty() {
        return Err(SweepError::Invalid("nothing to report".into()));
    }
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let files = ReportFiles {
        json: dir.join("report.json"),
        sweeps_csv: dir.join("sweeps.csv"),
        best_layers_csv: dir.join("best_layers.csv"),
        transfer_csv: dir.join("transfer.csv"),
    };

    let mut sweeps = Vec::with_capacity(report.sweeps.len());
    for s in &report.sweeps {
        let (best, eer) = best_layer(s)?;
        let best_row = s.rows.iter().find(|r| r.layer_index == best).expect("best row exists");
        sweeps.push(JsonSweep {
            model_id: &s.model_id,
            training_strategy: &s.training_strategy,
            partition: &s.partition.id,
            protocol: &s.partition.protocol,
            total_layers: s.total_layers,
            best: JsonBest {
                layer_index: best,
                layer_name: &best_row.layer_name,
                relative_depth: best_row.relative_depth,
                eer_percent: pct(eer),
            },
            rows: s
                .rows
                .iter()
                .map(|r| JsonRow {
                    layer_index: r.layer_index,
                    layer_name: &r.layer_name,
                    relative_depth: r.relative_depth,
                    eer_percent: pct(r.eer),
                    genuine_count: r.genuine_count,
                    impostor_count: r.impostor_count,
                })
                .collect(),
        });
    }
    let transfer = report
        .transfer
        .iter()
        .map(|c| JsonCell {
            model_id: &c.model_id,
            training_strategy: &c.training_strategy,
            selector: &c.selector,
            target: &c.target,
            layer_index: c.layer_index,
            layer_name: &c.layer_name,
            relative_depth: c.relative_depth,
            eer_percent: pct(c.eer),
        })
        .collect();
    let json = JsonReport {
        schema: SCHEMA,
        sweeps,
        transfer,
    };
    let mut w = BufWriter::new(File::create(&files.json)?);
    serde_json::to_writer_pretty(&mut w, &json).map_err(std::io::Error::other)?;
    w.write_all(b"\n")?;
    w.flush()?;

    let mut w = csv_writer(&files.sweeps_csv)?;
    w.write_record([
        "model",
        "strategy",
        "partition",
        "protocol",
        "layer",
        "layer_name",
        "relative_depth",
        "eer_percent",
        "genuine",
        "impostor",
    ])?;
    for s in &report.sweeps {
        for r in &s.rows {
            w.write_record([
                s.model_id.clone(),
                s.training_strategy.clone(),
                s.partition.id.clone(),
                s.partition.protocol.clone(),
                r.layer_index.to_string(),
                r.layer_name.clone(),
                format!("{:.4}", r.relative_depth),
                pct2(r.eer),
                r.genuine_count.to_string(),
                r.impostor_count.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(&files.best_layers_csv)?;
    w.write_record([
        "model",
        "strategy",
        "partition",
        "protocol",
        "eer_percent",
        "layer",
        "total_layers",
        "relative_depth",
    ])?;
    for s in &report.sweeps {
        let (best, eer) = best_layer(s)?;
        w.write_record([
            s.model_id.clone(),
            s.training_strategy.clone(),
            s.partition.id.clone(),
            s.partition.protocol.clone(),
            pct2(eer),
            best.to_string(),
            s.total_layers.to_string(),
            format!("{:.4}", best as f64 / s.total_layers as f64),
        ])?;
    }
    w.flush()?;

    let mut w = csv_writer(&files.transfer_csv)?;
    w.write_record(["model", "strategy", "selector", "target", "layer", "eer_percent"])?;
    for c in &report.transfer {
        w.write_record([
            c.model_id.clone(),
            c.training_strategy.clone(),
            c.selector.clone(),
            c.target.clone(),
            c.layer_index.to_string(),
            pct2(c.eer),
        ])?;
    }
    w.flush()?;
    Ok(files)
}
