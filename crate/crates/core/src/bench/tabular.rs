use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{kendall_tau, BenchError};
use crate::indicators::{rank_sums, IndicatorReport};
use crate::netgen::{Architecture, SearchSpace, SpaceKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub train_acc: f64,
    pub test_acc: f64,
}

/// Accuracies (percent) keyed by canonical architecture string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularBench {
    pub space: SpaceKind,
    pub rows: BTreeMap<String, Accuracy>,
}

#[derive(Debug, Deserialize, Serialize)]
struct Row {
    arch: String,
    train_acc: f64,
    test_acc: f64,
}

impl TabularBench {
    pub fn new(space: SpaceKind) -> Self {
        TabularBench {
            space,
            rows: BTreeMap::new(),
        }
    }

    /// Reads CSV with header `arch,train_acc,test_acc`. Row numbers in errors
    /// count the header as line 1.
    pub fn read<R: Read>(reader: R, space: &SearchSpace) -> Result<Self, BenchError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers().map_err(|e| BenchError::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        if headers != vec!["arch", "train_acc", "test_acc"] {
            return Err(BenchError::Parse {
                line: 1,
                message: "header must be `arch,train_acc,test_acc`".into(),
            });
        }
        let mut bench = TabularBench::new(space.kind);
        for (i, rec) in rdr.deserialize::<Row>().enumerate() {
            let line = i + 2;
            let row = rec.map_err(|e| BenchError::Parse {
                line,
                message: e.to_string(),
            })?;
            let arch = Architecture::parse(&row.arch, space).map_err(|e| BenchError::Parse {
                line,
                message: e.to_string(),
            })?;
            for v in [row.train_acc, row.test_acc] {
                if !(0.0..=100.0).contains(&v) {
                    return Err(BenchError::Parse {
                        line,
                        message: format!("accuracy {v} outside [0, 100]"),
                    });
                }
            }
            bench.rows.insert(
                arch.to_string(space),
                Accuracy {
                    train_acc: row.train_acc,
                    test_acc: row.test_acc,
                },
            );
        }
        Ok(bench)
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(writer);
        for (arch, acc) in &self.rows {
            w.serialize(Row {
                arch: arch.clone(),
                train_acc: acc.train_acc,
                test_acc: acc.test_acc,
            })
            .map_err(|e| BenchError::Io(e.to_string()))?;
        }
        if self.rows.is_empty() {
            w.write_record(["arch", "train_acc", "test_acc"])
                .map_err(|e| BenchError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| BenchError::Io(e.to_string()))
    }
}

pub fn load_tabular(
    path: &std::path::Path,
    space: &SearchSpace,
) -> Result<TabularBench, BenchError> {
    let f = std::fs::File::open(path)
        .map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    TabularBench::read(f, space)
}

/// Tau-b of one score against train and test accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauPair {
    pub train: f64,
    pub test: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub kappa: TauPair,
    pub regions: TauPair,
    pub mse: TauPair,
    /// Negated rank-sum, so that higher means predicted better.
    pub ranksum: TauPair,
    pub count: usize,
}

/// Correlates every report with its accuracy row.
pub fn correlation_report(
    bench: &TabularBench,
    reports: &[IndicatorReport],
) -> Result<CorrelationReport, BenchError> {
    let mut accs = Vec::with_capacity(reports.len());
    for r in reports {
        accs.push(
            *bench
                .rows
                .get(&r.arch)
                .ok_or_else(|| BenchError::UnknownArch(r.arch.clone()))?,
        );
    }
    if reports.len() < 2 {
        return Err(BenchError::TooFewArchs {
            needed: 2,
            found: reports.len(),
        });
    }
    let train: Vec<f64> = accs.iter().map(|a| a.train_acc).collect();
    let test: Vec<f64> = accs.iter().map(|a| a.test_acc).collect();
    let pair = |xs: Vec<f64>| -> Result<TauPair, BenchError> {
        Ok(TauPair {
            train: kendall_tau(&xs, &train)?,
            test: kendall_tau(&xs, &test)?,
        })
    };
    let refs: Vec<&IndicatorReport> = reports.iter().collect();
    Ok(CorrelationReport {
        kappa: pair(reports.iter().map(|r| r.kappa).collect())?,
        regions: pair(reports.iter().map(|r| r.regions).collect())?,
        mse: pair(reports.iter().map(|r| r.mse).collect())?,
        ranksum: pair(rank_sums(&refs).into_iter().map(|s| -s).collect())?,
        count: reports.len(),
    })
}
