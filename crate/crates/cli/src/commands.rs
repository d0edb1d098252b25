use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::{info, warn};
use serde_json::json;

use opexplain::chart::bar_chart;
use opexplain::concepts::InferredConcept;
use opexplain::eval::{evaluate as run_evaluate, parse_ground_truth, write_ground_truth, GroundTruthRecord};
use opexplain::explain::{explain as run_explain, ExplainConfig};
use opexplain::operators::{compose, cuco_score, OperatorRegistry, PerturbationPlan};
use opexplain::raster::{to_grayscale, Raster};
use opexplain::scorer::{Scorer, ScorerSpec};
use opexplain::segment::{otsu_threshold, segment_grooves, SegmentationParams};
use opexplain::surrogate::{SlopeTransform, SURROGATES};
use opexplain::synth::{generate, SynthKind};

use crate::config::FileConfig;
use crate::sheet::contact_sheet;
use crate::{RunArgs, UsageError};

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

fn load(path: &Path) -> Result<Raster> {
    Ok(Raster::load(path)?)
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn perturb(file: &FileConfig, input: &Path, ops: &str, composed: bool, out: Option<PathBuf>) -> Result<()> {
    let reg = OperatorRegistry::default();
    let indices = reg.parse_ids(ops)?;
    if indices.is_empty() {
        return Err(UsageError("--ops selects no operator".into()).into());
    }
    let img = load(input)?;
    let out = file.out_dir(out)?;
    create_dir(&out)?;
    let seg = SegmentationParams::default();
    let mut tiles = vec![img.clone()];
    for &i in &indices {
        let plan = PerturbationPlan::from_indices(reg.len(), &[i]);
        let result = compose(&img, &plan, &reg, &seg)?;
        for w in &result.warnings {
            warn!("{}: {}", w.operator, w.message);
        }
        result.image.save_png(&out.join(format!("{}.png", reg.get(i).id())))?;
        tiles.push(result.image);
    }
    if composed {
        let plan = PerturbationPlan::from_indices(reg.len(), &indices);
        compose(&img, &plan, &reg, &seg)?
            .image
            .save_png(&out.join("composed.png"))?;
    }
    contact_sheet(&tiles)?.save_png(&out.join("contact_sheet.png"))?;
    info!("wrote {} perturbed images to {}", indices.len(), out.display());
    Ok(())
}

pub fn segment(file: &FileConfig, input: &Path, out: Option<PathBuf>) -> Result<()> {
    let img = load(input)?;
    let out = file.out_dir(out)?;
    create_dir(&out)?;
    let mask = segment_grooves(&img, &SegmentationParams::default());
    let name = stem(input);
    mask.to_raster().save_png(&out.join(format!("{name}_groove.png")))?;
    mask.complement()
        .to_raster()
        .save_png(&out.join(format!("{name}_surface.png")))?;
    let (w, h) = img.dims();
    let groove = mask.count();
    let summary = json!({
        "input": input.display().to_string(),
        "width": w,
        "height": h,
        "threshold": otsu_threshold(&to_grayscale(&img)).ok(),
        "groove_pixels": groove,
        "surface_pixels": (w as usize * h as usize) - groove,
        "groove_fraction": groove as f64 / (w as f64 * h as f64),
    });
    write(
        &out.join(format!("{name}_segment.json")),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    Ok(())
}

struct Run {
    cfg: ExplainConfig,
    scorer: Box<dyn Scorer>,
    out: PathBuf,
}

fn run_setup(file: &FileConfig, args: &RunArgs) -> Result<Run> {
    let spec: String = file
        .pick(args.scorer.clone(), "scorer")?
        .ok_or_else(|| UsageError("a scorer is required (--scorer or `scorer=` in --config)".into()))?;
    let spec: ScorerSpec = spec.parse()?;
    let mut cfg = ExplainConfig::default();
    if let Some(m) = file.pick(args.m, "m")? {
        cfg.sampling.m = m;
    }
    if let Some(p) = file.pick(args.inclusion_prob, "inclusion_prob")? {
        cfg.sampling.inclusion_prob = p;
    }
    if let Some(name) = file.pick(args.surrogate.clone(), "surrogate")? {
        if !SURROGATES.iter().any(|(n, _)| *n == name) {
            let valid: Vec<&str> = SURROGATES.iter().map(|(n, _)| *n).collect();
            return Err(UsageError(format!("unknown surrogate `{name}` (valid: {})", valid.join(", "))).into());
        }
        cfg.surrogate = name;
    }
    if let Some(t) = file.pick::<String>(args.transform.clone(), "transform")? {
        cfg.transform = t.parse::<SlopeTransform>()?;
    }
    let seed = file.pick(args.seed, "seed")?.unwrap_or(0);
    let cfg = cfg.with_seed(seed);
    let out = file.out_dir(args.out.clone())?;
    let scorer = spec.build()?;
    Ok(Run { cfg, scorer, out })
}

fn class_from_ground_truth(gt_path: &Path, input: &Path) -> Result<String> {
    let text = fs::read_to_string(gt_path)
        .map_err(|e| UsageError(format!("cannot read {}: {e}", gt_path.display())))?;
    let records = parse_ground_truth(&text, &gt_path.display().to_string())?;
    let base = gt_path.parent().unwrap_or(Path::new("."));
    let wanted = input.canonicalize().ok();
    records
        .iter()
        .find(|r| {
            let p = base.join(&r.path);
            Path::new(&r.path) == input || (wanted.is_some() && p.canonicalize().ok() == wanted)
        })
        .map(|r| r.class.clone())
        .ok_or_else(|| {
            UsageError(format!("{} has no row for {}", gt_path.display(), input.display())).into()
        })
}

pub fn explain(
    file: &FileConfig,
    input: &Path,
    class: Option<String>,
    ground_truth: Option<&Path>,
    args: &RunArgs,
) -> Result<()> {
    let class = match (class, ground_truth) {
        (Some(c), _) => c,
        (None, Some(gt)) => class_from_ground_truth(gt, input)?,
        (None, None) => return Err(UsageError("give --class or --ground-truth".into()).into()),
    };
    let run = run_setup(file, args)?;
    let img = load(input)?;
    let reg = OperatorRegistry::default();
    let image_id = input.display().to_string();
    let result = run_explain(&img, &image_id, &reg, run.scorer.as_ref(), &class, &run.cfg)?;
    for w in &result.explanation.warnings {
        warn!("{w}");
    }
    create_dir(&run.out)?;
    let name = stem(input);
    write(
        &run.out.join(format!("{name}_explanation.json")),
        serde_json::to_string_pretty(&result.explanation)? + "\n",
    )?;
    let rows: Vec<(String, f64)> = result
        .importance
        .ranked()
        .into_iter()
        .map(|i| (result.importance.operator_ids[i].clone(), result.importance.values[i]))
        .collect();
    let title = format!("Operator importance ({}, class {class})", run.cfg.surrogate);
    write(&run.out.join(format!("{name}_importance.svg")), bar_chart(&title, &rows))?;
    if let (Some(sig), Some(ranking)) = (&result.explanation.significance, &result.explanation.ranking) {
        let rows: Vec<(String, f64)> = ranking
            .order
            .iter()
            .map(|&c: &InferredConcept| (c.name().to_string(), sig.get(c)))
            .collect();
        write(
            &run.out.join(format!("{name}_concepts.svg")),
            bar_chart("Concept significance", &rows),
        )?;
    }
    if let Some(r) = &result.explanation.ranking {
        println!("{}", r.names().join(" > "));
    }
    Ok(())
}

pub fn cuco(
    file: &FileConfig,
    inputs: &[PathBuf],
    plans: &[String],
    orders: usize,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let reg = OperatorRegistry::default();
    let plans = plans
        .iter()
        .map(|p| PerturbationPlan::from_ids(&reg, p))
        .collect::<opexplain::Result<Vec<_>>>()?;
    let seed = file.pick(seed, "seed")?.unwrap_or(0);
    let seg = SegmentationParams::default();
    let mut csv = String::from("image,plan,orders,seed,mae\n");
    for input in inputs {
        let img = load(input)?;
        for plan in &plans {
            let mae = cuco_score(&img, plan, &reg, &seg, orders, seed)?;
            csv.push_str(&format!(
                "{},{},{orders},{seed},{mae}\n",
                csv_cell(&input.display().to_string()),
                plan.describe(&reg)
            ));
        }
    }
    print!("{csv}");
    if let Some(dir) = file.pick(out, "out")? {
        create_dir(&dir)?;
        write(&dir.join("cuco.csv"), &csv)?;
    }
    Ok(())
}

pub fn evaluate(file: &FileConfig, gt_path: &Path, args: &RunArgs) -> Result<()> {
    let text = fs::read_to_string(gt_path)
        .map_err(|e| UsageError(format!("cannot read {}: {e}", gt_path.display())))?;
    let records = parse_ground_truth(&text, &gt_path.display().to_string())?;
    let run = run_setup(file, args)?;
    let base = gt_path.parent().unwrap_or(Path::new("."));
    let reg = OperatorRegistry::default();
    let report = run_evaluate(&records, base, &reg, run.scorer.as_ref(), &run.cfg)?;
    for f in &report.failures {
        warn!("{}: {}", f.path, f.error);
    }
    create_dir(&run.out)?;
    let csv = report.to_csv();
    write(&run.out.join("eval.csv"), &csv)?;
    write(&run.out.join("eval.json"), report.to_json()?)?;
    print!("{csv}");
    Ok(())
}

pub fn synth(file: &FileConfig, kind: &str, n: usize, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let kinds: Vec<SynthKind> = if kind == "all" {
        SynthKind::ALL.to_vec()
    } else {
        vec![kind.parse()?]
    };
    let seed = file.pick(seed, "seed")?.unwrap_or(0);
    let out = file.out_dir(out)?;
    create_dir(&out)?;
    let mut records = Vec::new();
    for k in kinds {
        for i in 0..n {
            let s = generate(k, seed, i as u64);
            let name = format!("{}_{i:03}.png", k.name());
            s.image.save_png(&out.join(&name))?;
            if let Some(mask) = &s.groove_truth {
                let dir = out.join("masks");
                create_dir(&dir)?;
                mask.to_raster().save_png(&dir.join(&name))?;
            }
            records.push(GroundTruthRecord {
                path: name,
                class: s.class.clone(),
                ranking: s.ranking.clone(),
            });
        }
    }
    let mut buf = Vec::new();
    write_ground_truth(&records, &mut buf)?;
    write(&out.join("manifest.csv"), buf)?;
    info!("wrote {} images to {}", records.len(), out.display());
    Ok(())
}
