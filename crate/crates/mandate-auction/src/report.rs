//! Result writers: CSV and JSON-lines files with bit-exact floating point.
//!
//! Column layouts are stable interfaces. Campaign CSV carries
//! `replicate,seed,aggregate_demand,stop_out,issued`; sweep CSV carries
//! `axis_value,bid,stop_out,xi,flags`. Floats are serialized with 17
//! significant digits so re-ingestion reproduces the original bits.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiments::{CampaignResult, ReplicateRecord, SweepTable};
use crate::scenario::OutputFormat;

pub const CAMPAIGN_CSV_HEADER: &str = "replicate,seed,aggregate_demand,stop_out,issued";
pub const SWEEP_CSV_HEADER: &str = "axis_value,bid,stop_out,xi,flags";

/// 17 significant digits: enough to reproduce any f64 exactly on parse.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

/// Writes campaign outputs under `directory` with the given `stem`:
/// `<stem>.csv` and/or `<stem>.jsonl` plus `<stem>_summary.json`.
pub fn emit_campaign(
    result: &CampaignResult,
    directory: &Path,
    formats: &[OutputFormat],
    stem: &str,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for format in formats {
        match format {
            OutputFormat::Csv => {
                let mut out = String::from(CAMPAIGN_CSV_HEADER);
                out.push('\n');
                for r in &result.records {
                    out.push_str(&format!(
                        "{},{},{},{},{}\n",
                        r.replicate,
                        r.seed,
                        format_float(r.aggregate_demand),
                        format_float(r.stop_out),
                        r.issued
                    ));
                }
                let path = directory.join(format!("{stem}.csv"));
                write_atomic(&path, &out)?;
                written.push(path);
            }
            OutputFormat::JsonLines => {
                let mut out = String::new();
                for r in &result.records {
                    out.push_str(&serde_json::to_string(r).expect("record serializes"));
                    out.push('\n');
                }
                let path = directory.join(format!("{stem}.jsonl"));
                write_atomic(&path, &out)?;
                written.push(path);
            }
        }
    }
    let summary_path = directory.join(format!("{stem}_summary.json"));
    let summary = serde_json::to_string_pretty(&result.summary).expect("summary serializes");
    write_atomic(&summary_path, &summary)?;
    written.push(summary_path);
    Ok(written)
}

/// Writes sweep outputs under `directory` with the given `stem`.
pub fn emit_sweep(
    table: &SweepTable,
    directory: &Path,
    formats: &[OutputFormat],
    stem: &str,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for format in formats {
        match format {
            OutputFormat::Csv => {
                let mut out = String::from(SWEEP_CSV_HEADER);
                out.push('\n');
                for row in &table.rows {
                    out.push_str(&format!(
                        "{},{},{},{},{}\n",
                        format_float(row.axis_value),
                        format_float(row.bid),
                        format_float(row.stop_out),
                        format_float(row.xi),
                        row.flags.join(";")
                    ));
                }
                let path = directory.join(format!("{stem}.csv"));
                write_atomic(&path, &out)?;
                written.push(path);
            }
            OutputFormat::JsonLines => {
                let mut out = String::new();
                for row in &table.rows {
                    out.push_str(&serde_json::to_string(row).expect("row serializes"));
                    out.push('\n');
                }
                let path = directory.join(format!("{stem}.jsonl"));
                write_atomic(&path, &out)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

/// A re-parsed campaign CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignCsvRow {
    pub replicate: u64,
    pub seed: u64,
    pub aggregate_demand: f64,
    pub stop_out: f64,
    pub issued: bool,
}

/// Reads back a campaign CSV written by [`emit_campaign`].
pub fn read_campaign_csv(path: &Path) -> Result<Vec<CampaignCsvRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != CAMPAIGN_CSV_HEADER {
        return Err(Error::Scenario(format!(
            "unexpected campaign CSV header `{header}`"
        )));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Scenario(format!(
                "campaign CSV row {} has {} fields, expected 5",
                idx + 2,
                fields.len()
            )));
        }
        let parse_err = |what: &str| Error::Scenario(format!("row {}: bad {what}", idx + 2));
        rows.push(CampaignCsvRow {
            replicate: fields[0].parse().map_err(|_| parse_err("replicate"))?,
            seed: fields[1].parse().map_err(|_| parse_err("seed"))?,
            aggregate_demand: fields[2]
                .parse()
                .map_err(|_| parse_err("aggregate_demand"))?,
            stop_out: fields[3].parse().map_err(|_| parse_err("stop_out"))?,
            issued: fields[4].parse().map_err(|_| parse_err("issued"))?,
        });
    }
    Ok(rows)
}

/// Reads back a JSON-lines replicate file.
pub fn read_campaign_jsonl(path: &Path) -> Result<Vec<ReplicateRecord>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .map(|line| {
            serde_json::from_str(line)
                .map_err(|e| Error::Scenario(format!("bad JSON-lines record: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::AllocationRule;
    use crate::experiments::{
        run_campaign, run_sweep, stop_out_statistics, BidStrategy, SweepAxis, SweepBaseline,
        SweepSpec,
    };
    use crate::market::{Interval, MarketParams, TypeDistribution};

    fn params() -> MarketParams {
        MarketParams {
            benchmark_yield: 0.08,
            demand_sensitivity: 0.034,
            bidders: 10,
            expected_resale_yield: 0.04,
            risk_free_yield: 0.0,
            max_yield: 0.06,
            min_bid: 0.1,
        }
    }

    fn sample_campaign(replicates: u64) -> CampaignResult {
        let dist = TypeDistribution::Uniform {
            budget: Interval::new(0.1, 0.169),
            risk_limit: Interval::new(0.04, 0.05),
        };
        run_campaign(
            &dist,
            &BidStrategy::Equilibrium {
                rule: AllocationRule::identity(),
                budget_floor: 0.1,
            },
            &params(),
            replicates,
            42,
            0,
        )
        .unwrap()
    }

    #[test]
    fn symmetric_campaign_rows_share_the_reference_stop_out() {
        let dist = TypeDistribution::PointMass {
            budget: 0.1,
            risk_limit: 0.046,
        };
        let result = run_campaign(
            &dist,
            &BidStrategy::Equilibrium {
                rule: AllocationRule::identity(),
                budget_floor: 0.1,
            },
            &params(),
            3,
            7,
            0,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_campaign(&result, dir.path(), &[OutputFormat::Csv], "campaign").unwrap();
        let rows = read_campaign_csv(&files[0]).unwrap();
        assert_eq!(rows.len(), 3);
        for row in &rows {
            assert!((row.stop_out - 0.046).abs() < 1e-12);
            assert!(row.issued);
        }
    }

    #[test]
    fn csv_round_trip_reproduces_summary_statistics_bit_exactly() {
        let result = sample_campaign(256);
        let dir = tempfile::tempdir().unwrap();
        let files = emit_campaign(&result, dir.path(), &[OutputFormat::Csv], "campaign").unwrap();
        let rows = read_campaign_csv(&files[0]).unwrap();

        for (row, record) in rows.iter().zip(&result.records) {
            assert_eq!(
                row.aggregate_demand.to_bits(),
                record.aggregate_demand.to_bits()
            );
            assert_eq!(row.stop_out.to_bits(), record.stop_out.to_bits());
        }
        let stop_outs: Vec<f64> = rows.iter().map(|r| r.stop_out).collect();
        let (mean, min, max, quantiles) = stop_out_statistics(&stop_outs);
        assert_eq!(mean.to_bits(), result.summary.mean_stop_out.to_bits());
        assert_eq!(min.to_bits(), result.summary.min_stop_out.to_bits());
        assert_eq!(max.to_bits(), result.summary.max_stop_out.to_bits());
        for (got, want) in quantiles.iter().zip(result.summary.stop_out_quantiles) {
            assert_eq!(got.1.to_bits(), want.1.to_bits());
        }
    }

    #[test]
    fn jsonl_round_trip_reproduces_records_exactly() {
        let result = sample_campaign(64);
        let dir = tempfile::tempdir().unwrap();
        let files =
            emit_campaign(&result, dir.path(), &[OutputFormat::JsonLines], "campaign").unwrap();
        let records = read_campaign_jsonl(&files[0]).unwrap();
        assert_eq!(records, result.records);
    }

    #[test]
    fn empty_sweep_emits_a_header_only_file() {
        let table = SweepTable {
            axis: SweepAxis::Sensitivity,
            rows: vec![],
            bid_monotonicity: crate::experiments::Monotonicity::Constant,
            final_gap_to_min_bid: f64::NAN,
        };
        let dir = tempfile::tempdir().unwrap();
        let files = emit_sweep(&table, dir.path(), &[OutputFormat::Csv], "sweep").unwrap();
        let text = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(text, format!("{SWEEP_CSV_HEADER}\n"));
    }

    #[test]
    fn sweep_csv_columns_are_stable() {
        let spec = SweepSpec {
            axis: SweepAxis::Sensitivity,
            values: vec![0.01, 0.02, 0.03],
            hold_scaled_min_bid: false,
        };
        let baseline = SweepBaseline {
            params: params(),
            rule: AllocationRule::identity(),
            budget_floor: 0.1,
            eval_budget: 0.169,
        };
        let table = run_sweep(&spec, &baseline).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_sweep(&table, dir.path(), &[OutputFormat::Csv], "sweep").unwrap();
        let text = std::fs::read_to_string(&files[0]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), SWEEP_CSV_HEADER);
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn identical_runs_emit_byte_identical_files() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let formats = [OutputFormat::Csv, OutputFormat::JsonLines];
        let files_a =
            emit_campaign(&sample_campaign(128), dir_a.path(), &formats, "campaign").unwrap();
        let files_b =
            emit_campaign(&sample_campaign(128), dir_b.path(), &formats, "campaign").unwrap();
        for (a, b) in files_a.iter().zip(&files_b) {
            let bytes_a = std::fs::read(a).unwrap();
            let bytes_b = std::fs::read(b).unwrap();
            assert_eq!(bytes_a, bytes_b);
        }
    }
}
