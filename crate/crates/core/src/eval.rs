//! Ranking evaluation against human ground truth.
//!
//! Ground truth is a CSV with header `path,class,rank1,rank2,rank3,rank4,rank5`
//! where the rank cells name the five concepts, most significant first. Paths
//! are relative to the CSV's directory unless absolute. The class doubles as
//! the scorer's target class.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concepts::{kendall_tau, ConceptRanking, InferredConcept};
use crate::error::{Error, Result};
use crate::explain::{explain, ExplainConfig, OperatorImportance};
use crate::operators::OperatorRegistry;
use crate::raster::Raster;
use crate::rng::substream_seed;
use crate::scorer::Scorer;

pub const GROUND_TRUTH_HEADER: [&str; 7] = ["path", "class", "rank1", "rank2", "rank3", "rank4", "rank5"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub path: String,
    pub class: String,
    pub ranking: ConceptRanking,
}

pub fn parse_ground_truth(text: &str, source: &str) -> Result<Vec<GroundTruthRecord>> {
    let err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| err(1, e.to_string()))?.clone();
    if header.iter().map(str::trim).ne(GROUND_TRUTH_HEADER) {
        return Err(err(
            1,
            format!("header must be `{}`", GROUND_TRUTH_HEADER.join(",")),
        ));
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != GROUND_TRUTH_HEADER.len() {
            return Err(err(
                line,
                format!("expected {} fields, found {}", GROUND_TRUTH_HEADER.len(), row.len()),
            ));
        }
        let path = row[0].trim();
        let class = row[1].trim();
        if path.is_empty() || class.is_empty() {
            return Err(err(line, "path and class must be non-empty".into()));
        }
        let order = (2..7)
            .map(|k| row[k].trim().parse::<InferredConcept>())
            .collect::<Result<Vec<_>>>()
            .map_err(|e| err(line, e.to_string()))?;
        let ranking = ConceptRanking::from_order(order).map_err(|e| err(line, e.to_string()))?;
        records.push(GroundTruthRecord {
            path: path.to_string(),
            class: class.to_string(),
            ranking,
        });
    }
    if records.is_empty() {
        return Err(Error::InvalidParameter(format!("{source}: no ground-truth rows")));
    }
    Ok(records)
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthRecord>> {
    let text = fs::read_to_string(path)?;
    parse_ground_truth(&text, &path.display().to_string())
}

pub fn write_ground_truth<W: Write>(records: &[GroundTruthRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    out.write_record(GROUND_TRUTH_HEADER).map_err(io)?;
    for r in records {
        let mut row = vec![r.path.as_str(), r.class.as_str()];
        row.extend(r.ranking.names());
        out.write_record(&row).map_err(io)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassTau {
    pub class: String,
    pub mean_tau: f64,
    /// Population standard deviation.
    pub std_tau: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageResult {
    pub path: String,
    pub class: String,
    pub seed: u64,
    pub tau: f64,
    pub predicted: Vec<String>,
    pub ground_truth: Vec<String>,
    pub importances: Vec<OperatorImportance>,
    pub warnings: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageFailure {
    pub path: String,
    pub class: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub surrogate: String,
    pub slope_transform: String,
    pub m: usize,
    pub classes: Vec<ClassTau>,
    pub images: Vec<ImageResult>,
    pub failures: Vec<ImageFailure>,
    pub warning_count: usize,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("class,mean_tau,std_tau,n\n");
        for c in &self.classes {
            s.push_str(&format!("{},{},{},{}\n", csv_cell(&c.class), c.mean_tau, c.std_tau, c.n));
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn resolve(base_dir: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

/// Explain every image and compare its concept ranking with the annotation.
///
/// Image `i` runs with its own seed derived from `cfg`'s seed and `i`, so the
/// report does not depend on scheduling. Failed images are listed and
/// excluded; if every image fails, the first failure is returned as the
/// error.
pub fn evaluate(
    records: &[GroundTruthRecord],
    base_dir: &Path,
    registry: &OperatorRegistry,
    scorer: &dyn Scorer,
    cfg: &ExplainConfig,
) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("no ground-truth records".into()));
    }
    let seed = cfg.sampling.seed;
    let outcomes: Vec<Result<ImageResult>> = records
        .par_iter()
        .enumerate()
        .map(|(i, rec)| {
            let image_seed = substream_seed(seed, "image", i as u64);
            let img = Raster::load(&resolve(base_dir, &rec.path))?;
            let run = explain(&img, &rec.path, registry, scorer, &rec.class, &cfg.with_seed(image_seed))?;
            let predicted = run.explanation.ranking.clone().ok_or_else(|| {
                Error::RegistryMismatch("evaluation needs the default operator registry".into())
            })?;
            Ok(ImageResult {
                path: rec.path.clone(),
                class: rec.class.clone(),
                seed: image_seed,
                tau: kendall_tau(&predicted, &rec.ranking),
                predicted: predicted.names().iter().map(|s| s.to_string()).collect(),
                ground_truth: rec.ranking.names().iter().map(|s| s.to_string()).collect(),
                importances: run.explanation.importances,
                warnings: run.explanation.warnings.len(),
            })
        })
        .collect();

    let mut images = Vec::new();
    let mut failures = Vec::new();
    let mut first_error = None;
    for (rec, outcome) in records.iter().zip(outcomes) {
        match outcome {
            Ok(r) => images.push(r),
            Err(e) => {
                failures.push(ImageFailure {
                    path: rec.path.clone(),
                    class: rec.class.clone(),
                    error: e.to_string(),
                });
                first_error.get_or_insert(e);
            }
        }
    }
    if images.is_empty() {
        return Err(first_error.expect("records are non-empty"));
    }
    let mut by_class: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in &images {
        by_class.entry(&r.class).or_default().push(r.tau);
    }
    let classes = by_class
        .into_iter()
        .map(|(class, taus)| {
            let (mean_tau, std_tau) = mean_std(&taus);
            ClassTau {
                class: class.to_string(),
                mean_tau,
                std_tau,
                n: taus.len(),
            }
        })
        .collect();
    let warning_count = failures.len() + images.iter().map(|r| r.warnings).sum::<usize>();
    Ok(EvalReport {
        seed,
        surrogate: cfg.surrogate.clone(),
        slope_transform: cfg.transform.to_string(),
        m: cfg.sampling.m,
        classes,
        images,
        failures,
        warning_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GT: &str = "path,class,rank1,rank2,rank3,rank4,rank5\n\
        a.png,oak,rugged,plated,furrow,vertical_stripped,smooth\n\
        b.png,pine,smooth,rugged,plated,furrow,vertical_stripped\n";

    #[test]
    fn parses_and_round_trips() {
        let recs = parse_ground_truth(GT, "gt.csv").unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].class, "pine");
        assert_eq!(recs[1].ranking.order[0], InferredConcept::Smooth);
        let mut buf = Vec::new();
        write_ground_truth(&recs, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), GT);
    }

    #[test]
    fn malformed_rows_name_their_line() {
        let bad_concept = GT.replace("b.png,pine,smooth", "b.png,pine,glossy");
        let err = parse_ground_truth(&bad_concept, "gt.csv").unwrap_err();
        assert!(err.to_string().starts_with("gt.csv:3:"), "{err}");
        let repeated = GT.replace("a.png,oak,rugged,plated", "a.png,oak,rugged,rugged");
        let err = parse_ground_truth(&repeated, "gt.csv").unwrap_err();
        assert!(err.to_string().starts_with("gt.csv:2:"), "{err}");
        let short = format!("{GT}c.png,oak,rugged\n");
        let err = parse_ground_truth(&short, "gt.csv").unwrap_err();
        assert!(err.to_string().starts_with("gt.csv:4:"), "{err}");
        assert!(parse_ground_truth("path,class,rank1,rank2,rank3,rank4,rank5\n", "e").is_err());
        assert!(parse_ground_truth("", "e").is_err());
        assert!(parse_ground_truth("file,label\n", "e").is_err());
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[1.0, 0.6]);
        assert!((m - 0.8).abs() < 1e-15);
        assert!((s - 0.2).abs() < 1e-15);
        assert_eq!(mean_std(&[1.0, 1.0, 1.0]), (1.0, 0.0));
    }
}
