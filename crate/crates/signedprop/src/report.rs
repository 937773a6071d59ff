//! Experiment reports and CSV emission.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use signedprop_core::balance::SidReport;
use signedprop_core::propagate::EnergyTrace;

use crate::experiments::DepthRecord;

/// Everything one run produced, serialized as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: u32,
    pub command: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seed: u64,
    pub accuracies: Vec<DepthRecord>,
    pub energy: Option<EnergyTrace>,
    pub sid: Option<SidReport>,
    /// Seconds per named phase.
    pub wall_times: BTreeMap<String, f64>,
}

impl ExperimentReport {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: u64) -> Self {
        Self {
            schema: crate::config::SCHEMA,
            command: command.to_owned(),
            config: serde_json::to_value(config).expect("configs serialize to JSON"),
            config_hash: crate::config::config_hash(config),
            seed,
            accuracies: Vec::new(),
            energy: None,
            sid: None,
            wall_times: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize to JSON")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Fixed four-decimal rendering; `NA` for missing or non-finite values.
pub fn fmt4(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "NA".to_owned()
    }
}

pub fn fmt4_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), fmt4)
}

/// A header and string cells, written after a `# config-hash:` comment line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Extra `# key: value` lines after the hash.
    pub notes: Vec<String>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| (*s).to_owned()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, mut out: W, config_hash: &str) -> std::io::Result<()> {
        writeln!(out, "# config-hash: {config_hash}")?;
        for note in &self.notes {
            writeln!(out, "# {note}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()
    }

    pub fn to_string(&self, config_hash: &str) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf, config_hash)
            .expect("writing to memory");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Method;

    #[test]
    fn four_decimals() {
        assert_eq!(fmt4(89.87), "89.8700");
        assert_eq!(fmt4(-0.00004), "-0.0000");
        assert_eq!(fmt4(f64::NAN), "NA");
        assert_eq!(fmt4_opt(None), "NA");
    }

    #[test]
    fn csv_layout() {
        let mut t = CsvTable::new(&["method", "P_pct"]);
        t.push(vec!["sgc".into(), fmt4(100.0)]);
        assert_eq!(
            t.to_string("ab"),
            "# config-hash: ab\nmethod,P_pct\nsgc,100.0000\n"
        );
    }

    #[test]
    fn report_round_trips_through_json() {
        let mut r = ExperimentReport::new(
            "depth-sweep",
            &crate::config::DepthSweepConfig::default(),
            7,
        );
        r.accuracies.push(DepthRecord {
            seed: 7,
            depth: 300,
            method: Method::LabelSbp,
            accuracy: 78.5,
            energy: 0.1 + 0.2,
        });
        r.energy = Some(EnergyTrace {
            energy: vec![1.0 / 3.0, 1e-300],
            norm: vec![2.0_f64.sqrt(), 0.0],
        });
        r.sid = Some(SidReport {
            p_avg: 1.0 / 7.0,
            n_avg: 0.0,
            sid: 1.0 / 14.0,
            p_pct: 10.0,
            n_pct: 0.0,
            sid_pct: 5.0,
        });
        r.wall_times.insert("propagate".into(), 0.123456789);
        let back = ExperimentReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
