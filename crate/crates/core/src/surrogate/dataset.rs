use std::collections::HashSet;
use std::io::{Read, Write};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operators::{compose, OperatorRegistry, PerturbWarning, PerturbationPlan};
use crate::raster::Raster;
use crate::scorer::{score, Scorer};
use crate::segment::SegmentationParams;

/// Design matrix `phi` (one plan per row) with the matching confidences `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationDataset {
    operator_ids: Vec<String>,
    phi: Vec<PerturbationPlan>,
    c: Vec<f64>,
    target_class: String,
    image_id: String,
}

impl PerturbationDataset {
    /// Checks: one confidence per row, row width equals the operator count,
    /// rows pairwise distinct and every operator switched on in some row.
    pub fn new(
        operator_ids: Vec<String>,
        phi: Vec<PerturbationPlan>,
        c: Vec<f64>,
        target_class: impl Into<String>,
        image_id: impl Into<String>,
    ) -> Result<Self> {
        if phi.len() != c.len() {
            return Err(Error::InvalidParameter(format!(
                "{} plans but {} confidences",
                phi.len(),
                c.len()
            )));
        }
        if let Some(row) = phi.iter().position(|p| p.len() != operator_ids.len()) {
            return Err(Error::RegistryMismatch(format!(
                "row {row} has {} bits for {} operators",
                phi[row].len(),
                operator_ids.len()
            )));
        }
        let mut seen = HashSet::with_capacity(phi.len());
        if let Some(row) = phi.iter().position(|p| !seen.insert(p)) {
            return Err(Error::InvalidParameter(format!("row {row} repeats an earlier plan")));
        }
        if let Some(op) = (0..operator_ids.len()).find(|&j| !phi.iter().any(|p| p.get(j))) {
            return Err(Error::InvalidParameter(format!(
                "operator {} is never applied",
                operator_ids[op]
            )));
        }
        if let Some(v) = c.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite confidence {v}")));
        }
        Ok(Self {
            operator_ids,
            phi,
            c,
            target_class: target_class.into(),
            image_id: image_id.into(),
        })
    }

    pub fn operator_ids(&self) -> &[String] {
        &self.operator_ids
    }

    pub fn phi(&self) -> &[PerturbationPlan] {
        &self.phi
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn target_class(&self) -> &str {
        &self.target_class
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.operator_ids.len()
    }

    /// Same rows with confidences replaced, e.g. rescaled.
    pub fn with_confidences(&self, c: Vec<f64>) -> Result<Self> {
        Self::new(
            self.operator_ids.clone(),
            self.phi.clone(),
            c,
            self.target_class.clone(),
            self.image_id.clone(),
        )
    }

    /// CSV with a header of operator ids plus `confidence`, one 0/1 row per
    /// plan.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = self.operator_ids.iter().map(String::as_str).collect();
        header.push("confidence");
        out.write_record(&header).map_err(csv_io)?;
        for (plan, c) in self.phi.iter().zip(&self.c) {
            let mut row: Vec<String> = plan
                .bits()
                .iter()
                .map(|&b| if b { "1" } else { "0" }.to_string())
                .collect();
            row.push(c.to_string());
            out.write_record(&row).map_err(csv_io)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Inverse of [`write_csv`](Self::write_csv); `source` names the input in
    /// error messages.
    pub fn read_csv<R: Read>(
        r: R,
        source: &str,
        target_class: &str,
        image_id: &str,
    ) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = reader
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .clone();
        if header.len() < 2 || &header[header.len() - 1] != "confidence" {
            return Err(parse_err(1, "header must be operator ids followed by `confidence`".into()));
        }
        let ids: Vec<String> = header.iter().take(header.len() - 1).map(String::from).collect();
        let mut phi = Vec::new();
        let mut c = Vec::new();
        for (k, record) in reader.records().enumerate() {
            let line = k + 2;
            let record = record.map_err(|e| parse_err(line, e.to_string()))?;
            if record.len() != header.len() {
                return Err(parse_err(
                    line,
                    format!("expected {} fields, found {}", header.len(), record.len()),
                ));
            }
            let mut bits = Vec::with_capacity(ids.len());
            for cell in record.iter().take(ids.len()) {
                bits.push(match cell.trim() {
                    "0" => false,
                    "1" => true,
                    other => return Err(parse_err(line, format!("`{other}` is not 0 or 1"))),
                });
            }
            let conf = record[ids.len()].trim();
            let value: f64 = conf
                .parse()
                .map_err(|_| parse_err(line, format!("`{conf}` is not a number")))?;
            phi.push(PerturbationPlan::from_bits(bits));
            c.push(value);
        }
        Self::new(ids, phi, c, target_class, image_id)
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

#[derive(Clone, Debug)]
pub struct BuildOptions {
    pub seg_params: SegmentationParams,
    /// Maximum concurrent scorer calls; 0 uses the global thread pool.
    pub parallelism: usize,
    pub image_id: String,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            seg_params: SegmentationParams::default(),
            parallelism: 0,
            image_id: String::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BuildOutcome {
    pub dataset: PerturbationDataset,
    /// Perturbation warnings, tagged with the plan index.
    pub warnings: Vec<(usize, PerturbWarning)>,
}

/// Score every plan's composition. Row `i` of the result belongs to
/// `plans[i]` regardless of completion order. On failure the error carries
/// the lowest failing plan index.
pub fn build_dataset(
    img: &Raster,
    plans: &[PerturbationPlan],
    registry: &OperatorRegistry,
    scorer: &dyn Scorer,
    target_class: &str,
    opts: &BuildOptions,
) -> Result<BuildOutcome> {
    opts.seg_params.validate()?;
    let labels = scorer.descriptor().class_labels;
    if !labels.is_empty() && !labels.iter().any(|l| l == target_class) {
        return Err(Error::InvalidParameter(format!(
            "target class `{target_class}` is not a scorer label ({})",
            labels.join(", ")
        )));
    }
    let first_failure = AtomicUsize::new(usize::MAX);
    let run_one = |(i, plan): (usize, &PerturbationPlan)| -> Option<Result<(f64, Vec<PerturbWarning>)>> {
        if i > first_failure.load(Ordering::Relaxed) {
            return None;
        }
        let outcome = (|| {
            let composed = compose(img, plan, registry, &opts.seg_params)?;
            let probs = score(scorer, &composed.image).map_err(|e| Error::PlanScoring {
                plan_index: i,
                source: Box::new(e),
            })?;
            let p = probs.prob_of(target_class).ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "target class `{target_class}` is not a scorer label ({})",
                    probs.labels().join(", ")
                ))
            })?;
            Ok((p, composed.warnings))
        })();
        if outcome.is_err() {
            first_failure.fetch_min(i, Ordering::Relaxed);
        }
        Some(outcome)
    };
    let results: Vec<Option<Result<(f64, Vec<PerturbWarning>)>>> = if opts.parallelism == 1 {
        plans.iter().enumerate().map(run_one).collect()
    } else if opts.parallelism == 0 {
        plans.par_iter().enumerate().map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.parallelism)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(|| plans.par_iter().enumerate().map(run_one).collect())
    };

    let mut c = Vec::with_capacity(plans.len());
    let mut warnings = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Some(Ok((p, w))) => {
                c.push(p);
                warnings.extend(w.into_iter().map(|w| (i, w)));
            }
            Some(Err(e)) => return Err(e),
            None => unreachable!("plans after a failure are skipped only when one exists"),
        }
    }
    let dataset = PerturbationDataset::new(
        registry.ids(),
        plans.to_vec(),
        c,
        target_class,
        opts.image_id.clone(),
    )?;
    Ok(BuildOutcome { dataset, warnings })
}
