//! Subcommand implementations.

use std::path::{Path, PathBuf};

use clap::Args;
use ropesat::augment::augment_dataset;
use ropesat::eval::{compute_metrics, cross_validate, permute_labels, CvResult, MetricsReport, SplitMode};
use ropesat::explain::{class_overlap_report, BandTable, DenominatorMode};
use ropesat::model::checkpoint::{load_checkpoint, save_checkpoint};
use ropesat::model::{predict, ModelParams};
use ropesat::model::train::curves_csv;
use ropesat::preprocess::{pca_projection, PcaReport};
use ropesat::preprocess::{preprocess_dataset, PreprocessConfig};
use ropesat::spectra::{load_dataset, save_dataset, DatasetFormat};
use ropesat::synthgen::{default_profiles, generate_cohort, load_profiles, planted_band_profiles};
use ropesat::Dataset;
use serde_json::{json, Value};

use crate::config::{manifest, RunConfig};
use crate::{plot, CliError, Common};

fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn runtime(msg: impl Into<String>) -> CliError {
    CliError::Runtime(msg.into())
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load_or_default(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    }
    Ok(())
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    ensure_parent(path)?;
    std::fs::write(path, bytes).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| validation(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| validation(format!("{}: {e}", path.display())))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

/// CSV text preceded by a `# {manifest}` comment line.
fn csv_with_manifest(manifest: &Value, body: &str) -> String {
    format!("# {manifest}\n{body}")
}

fn load_data(path: &Path) -> Result<Dataset, CliError> {
    if !path.is_file() {
        return Err(validation(format!("data file {} does not exist", path.display())));
    }
    Ok(load_dataset(path, DatasetFormat::from_path(path))?)
}

fn save_data(mut ds: Dataset, manifest: &Value, path: &Path) -> Result<(), CliError> {
    ds.provenance.insert("manifest".into(), manifest.clone());
    ensure_parent(path)?;
    Ok(save_dataset(&ds, path, DatasetFormat::from_path(path))?)
}

fn is_preprocessed(ds: &Dataset) -> bool {
    ds.provenance.contains_key("preprocess")
}

/// The configured data file, or a synthetic cohort built from the
/// configured profiles when no file is given.
fn input_data(cfg: &RunConfig) -> Result<Dataset, CliError> {
    match &cfg.data {
        Some(path) => load_data(path),
        None => {
            let profiles = match &cfg.profiles {
                Some(p) => load_profiles(p)?,
                None => default_profiles(),
            };
            Ok(generate_cohort(&profiles, cfg.n_per_class, &cfg.grid, cfg.seed)?)
        }
    }
}

fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    flag.or_else(|| cfg.out_dir.clone())
        .ok_or_else(|| validation("an output directory is required (--out-dir or out_dir in the config)"))
}

#[derive(Args)]
pub struct SynthArgs {
    #[command(flatten)]
    common: Common,
    /// Class profiles (JSON); defaults to the built-in three-class cohort.
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Use the built-in planted-band profiles.
    #[arg(long, conflicts_with = "profiles")]
    planted: bool,
    /// Spectra per class.
    #[arg(long)]
    n: Option<usize>,
    /// Output dataset (`.jsonl` or `.csv`).
    #[arg(long)]
    out: PathBuf,
}

pub fn synth(a: SynthArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&a.common)?;
    if a.profiles.is_some() {
        cfg.profiles = a.profiles;
    }
    if let Some(n) = a.n {
        cfg.n_per_class = n;
    }
    cfg.validate()?;
    let profiles = match (&cfg.profiles, a.planted) {
        (Some(p), _) => load_profiles(p)?,
        (None, true) => planted_band_profiles(),
        (None, false) => default_profiles(),
    };
    let ds = generate_cohort(&profiles, cfg.n_per_class, &cfg.grid, cfg.seed)?;
    let m = manifest("synth", &cfg, json!({"planted": a.planted, "spectra": ds.len()}));
    save_data(ds, &m, &a.out)
}

#[derive(Args)]
pub struct DataArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

pub fn preprocess(a: DataArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&a.common)?;
    if a.data.is_some() {
        cfg.data = a.data;
    }
    cfg.validate()?;
    let path = cfg.data.clone().ok_or_else(|| validation("--data is required"))?;
    let ds = load_data(&path)?;
    if is_preprocessed(&ds) {
        return Err(validation(format!("{} is already preprocessed", path.display())));
    }
    let out = preprocess_dataset(&ds, &cfg.preprocess)?;
    let m = manifest("preprocess", &cfg, json!({"input": path}));
    save_data(out, &m, &a.out)
}

#[derive(Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Augmented copies per training spectrum.
    #[arg(long)]
    copies: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

pub fn augment(a: AugmentArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&a.common)?;
    if a.data.is_some() {
        cfg.data = a.data;
    }
    if let Some(c) = a.copies {
        cfg.augment.copies_per_sample = c;
    }
    if let Some(seed) = a.common.seed {
        cfg.augment.seed = seed;
    }
    cfg.validate()?;
    let path = cfg.data.clone().ok_or_else(|| validation("--data is required"))?;
    let ds = load_data(&path)?;
    let out = augment_dataset(&ds, &cfg.augment)?;
    let m = manifest("augment", &cfg, json!({"input": path, "parents": ds.len()}));
    save_data(out, &m, &a.out)
}

/// Flags shared by `train` and `eval`.
#[derive(Args)]
pub struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Raw dataset; a synthetic cohort is generated when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Augmented copies per training spectrum.
    #[arg(long)]
    copies: Option<usize>,
}

impl FitArgs {
    fn resolve(self) -> Result<(RunConfig, PathBuf), CliError> {
        let mut cfg = load_config(&self.common)?;
        if self.data.is_some() {
            cfg.data = self.data;
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        if let Some(c) = self.copies {
            cfg.augment.copies_per_sample = c;
        }
        cfg.validate()?;
        let dir = out_dir(self.out_dir, &cfg)?;
        Ok((cfg, dir))
    }
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    fit: FitArgs,
}

fn write_checkpoint(params: &ModelParams, meta: &Value, path: &Path) -> Result<(), CliError> {
    ensure_parent(path)?;
    Ok(save_checkpoint(params, meta, path)?)
}

fn checkpoint_metadata(m: &Value, cfg: &RunConfig, ds: &Dataset) -> Value {
    json!({
        "manifest": m,
        "class_names": ds.class_names,
        "preprocess": cfg.preprocess,
        "grid": ds.grid,
    })
}

fn fold_seeds_json(r: &CvResult) -> Value {
    r.folds
        .iter()
        .map(|f| json!({"fold": f.fold, "augment": f.seeds.augment, "model": f.seeds.model, "train": f.seeds.train}))
        .collect()
}

fn check_leakage(r: &CvResult) -> Result<(), CliError> {
    for f in &r.folds {
        if !f.leakage.is_empty() {
            return Err(runtime(format!(
                "fold {}: {} augmented records have parents outside the training part",
                f.fold,
                f.leakage.len()
            )));
        }
    }
    Ok(())
}

fn raw_input(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let ds = input_data(cfg)?;
    if is_preprocessed(&ds) {
        return Err(validation("train and eval expect raw spectra; the data is already preprocessed"));
    }
    Ok(ds)
}

pub fn train(a: TrainArgs) -> Result<(), CliError> {
    let (mut cfg, dir) = a.fit.resolve()?;
    cfg.split_mode = SplitMode::Holdout8020;
    let ds = raw_input(&cfg)?;
    let result = cross_validate(&cfg.cv_config(), &ds)?;
    check_leakage(&result)?;
    let fold = &result.folds[0];
    let m = manifest(
        "train",
        &cfg,
        json!({"fold_seeds": fold_seeds_json(&result), "train_size": fold.train_size, "augmented_size": fold.augmented_size}),
    );
    write_checkpoint(&fold.params, &checkpoint_metadata(&m, &cfg, &fold.test), &dir.join("model.ckpt"))?;
    write_file(&dir.join("curves.csv"), csv_with_manifest(&m, &curves_csv(&fold.curves)))?;
    save_data(fold.test.clone(), &m, &dir.join("test.jsonl"))?;
    write_file(
        &dir.join("metrics.json"),
        pretty(&json!({"manifest": m, "split": result.plan, "metrics": fold.metrics})),
    )
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    fit: FitArgs,
    /// Shuffle labels with this seed before splitting (permutation control).
    #[arg(long)]
    permute_labels: Option<u64>,
}

/// Out-of-fold predictions of every round scored together.
fn pooled_metrics(r: &CvResult) -> Result<MetricsReport, CliError> {
    let mut labels = Vec::new();
    let mut probs = Vec::new();
    for f in &r.folds {
        labels.extend(f.test.label_indices());
        probs.extend(predict(&f.params, &f.test)?);
    }
    let names = &r.folds[0].test.class_names;
    Ok(compute_metrics(&labels, &probs, names)?)
}

fn roc_series(report: &MetricsReport) -> Vec<(String, Vec<(f64, f64)>)> {
    report
        .per_class
        .iter()
        .map(|c| {
            let auc = c.auc.value.map_or("n/a".to_string(), |v| format!("{v:.3}"));
            (format!("{} (AUC {auc})", c.class), c.roc.clone())
        })
        .collect()
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    let (cfg, dir) = a.fit.resolve()?;
    let mut ds = raw_input(&cfg)?;
    if let Some(seed) = a.permute_labels {
        ds = permute_labels(&ds, seed);
    }
    let result = cross_validate(&cfg.cv_config(), &ds)?;
    check_leakage(&result)?;
    let pooled = pooled_metrics(&result)?;
    let m = manifest(
        "eval",
        &cfg,
        json!({"fold_seeds": fold_seeds_json(&result), "permute_labels": a.permute_labels}),
    );
    let folds: Vec<Value> = result
        .folds
        .iter()
        .map(|f| {
            json!({
                "fold": f.fold,
                "seeds": f.seeds,
                "train_size": f.train_size,
                "augmented_size": f.augmented_size,
                "leakage": f.leakage,
                "metrics": f.metrics,
            })
        })
        .collect();
    for f in &result.folds {
        let fdir = dir.join(format!("fold_{}", f.fold));
        write_checkpoint(&f.params, &checkpoint_metadata(&m, &cfg, &f.test), &fdir.join("model.ckpt"))?;
        write_file(&fdir.join("curves.csv"), csv_with_manifest(&m, &curves_csv(&f.curves)))?;
        save_data(f.test.clone(), &m, &fdir.join("test.jsonl"))?;
    }
    let meta = m.to_string();
    write_file(
        &dir.join("confusion.svg"),
        plot::confusion_chart("Pooled confusion matrix", &pooled.class_names, &pooled.confusion, &meta),
    )?;
    write_file(
        &dir.join("roc.svg"),
        plot::line_chart("One-vs-rest ROC (pooled)", "false positive rate", "true positive rate", &roc_series(&pooled), &meta),
    )?;
    write_file(
        &dir.join("cv_report.json"),
        pretty(&json!({
            "manifest": m,
            "split": result.plan,
            "folds": folds,
            "aggregate": result.aggregate,
            "pooled": pooled,
        })),
    )
}

#[derive(Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Test spectra, raw or preprocessed.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Comma-separated thresholds.
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    /// Band table (JSON object of name → [high, low]).
    #[arg(long)]
    bands: Option<PathBuf>,
    #[arg(long, value_enum)]
    denominator: Option<Denominator>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
pub enum Denominator {
    WeightsInBand,
    BandMass,
}

fn class_mean(ds: &Dataset, class: &str) -> Vec<f64> {
    let members: Vec<&[f64]> = ds
        .spectra
        .iter()
        .filter(|s| s.label == class)
        .map(|s| s.values.as_slice())
        .collect();
    let mut mean = vec![0.0; ds.grid.points];
    for v in &members {
        for (a, x) in mean.iter_mut().zip(*v) {
            *a += x;
        }
    }
    let n = members.len().max(1) as f64;
    mean.iter_mut().for_each(|a| *a /= n);
    mean
}

fn file_stem(class: &str) -> String {
    class
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn explain(a: ExplainArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&a.common)?;
    if a.data.is_some() {
        cfg.data = a.data;
    }
    if a.bands.is_some() {
        cfg.bands = a.bands;
    }
    if let Some(b) = a.betas {
        cfg.betas = b;
    }
    if let Some(d) = a.denominator {
        cfg.denominator_mode = match d {
            Denominator::WeightsInBand => DenominatorMode::WeightsInBand,
            Denominator::BandMass => DenominatorMode::BandMass,
        };
    }
    cfg.validate()?;
    let dir = out_dir(a.out_dir, &cfg)?;
    if !a.checkpoint.is_file() {
        return Err(validation(format!("checkpoint {} does not exist", a.checkpoint.display())));
    }
    let (params, meta) = load_checkpoint(&a.checkpoint).map_err(|e| validation(e.to_string()))?;
    let path = cfg.data.clone().ok_or_else(|| validation("--data is required"))?;
    let mut ds = load_data(&path)?;
    if !is_preprocessed(&ds) {
        let pre: PreprocessConfig = match meta.get("preprocess") {
            Some(v) => serde_json::from_value(v.clone())
                .map_err(|e| validation(format!("checkpoint preprocess settings: {e}")))?,
            None => cfg.preprocess.clone(),
        };
        ds = preprocess_dataset(&ds, &pre)?;
    }
    if let Some(names) = meta.get("class_names") {
        if *names != json!(ds.class_names) {
            return Err(validation(format!(
                "data classes {:?} differ from the checkpoint's {names}",
                ds.class_names
            )));
        }
    }
    let bands = match &cfg.bands {
        Some(p) => BandTable::load(p)?,
        None => BandTable::default(),
    };
    let report = class_overlap_report(&params, &ds, &bands, &cfg.betas, cfg.denominator_mode)?;
    let m = manifest("explain", &cfg, json!({"checkpoint": a.checkpoint, "input": path}));
    write_file(&dir.join("overlap.csv"), csv_with_manifest(&m, &report.to_csv()))?;
    let meta_str = m.to_string();
    let band_list: Vec<(String, f64, f64)> = bands.iter().map(|(n, (h, l))| (n.to_string(), h, l)).collect();
    for (class, map) in &report.class_maps {
        let svg = plot::saliency_chart(
            &format!("Grad-CAM class map: {class}"),
            &map.grid.wavenumbers(),
            &map.weights,
            Some(&class_mean(&ds, class)),
            &band_list,
            &meta_str,
        );
        write_file(&dir.join(format!("saliency_{}.svg", file_stem(class))), svg)?;
    }
    for (class, reason) in &report.skipped {
        eprintln!("ropesat: no class map for `{class}`: {reason}");
    }
    write_file(&dir.join("overlap.json"), pretty(&json!({"manifest": m, "report": report})))
}

#[derive(Args)]
pub struct PcaArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    components: usize,
    /// Report JSON.
    #[arg(long)]
    out: PathBuf,
    /// Optional scatter plot.
    #[arg(long)]
    svg: Option<PathBuf>,
}

fn pca_svg(report: &PcaReport, meta: &str) -> Result<String, CliError> {
    if report.explained_variance_ratio.len() < 2 {
        return Err(validation("a PCA plot needs at least two components"));
    }
    let mut classes: Vec<String> = Vec::new();
    for l in &report.labels {
        if !classes.contains(l) {
            classes.push(l.clone());
        }
    }
    let idx = |l: &str| classes.iter().position(|c| c == l).unwrap_or(0);
    let points: Vec<(usize, f64, f64)> = report
        .labels
        .iter()
        .zip(&report.scores)
        .map(|(l, s)| (idx(l), s[0], s[1]))
        .collect();
    let densities: Vec<_> = report
        .densities
        .iter()
        .map(|(class, d)| {
            let curve = |k: usize| -> Vec<(f64, f64)> {
                let c = &d.components[k];
                c.x.iter().copied().zip(c.density.iter().copied()).collect()
            };
            (idx(class), curve(0), curve(1))
        })
        .collect();
    let evr = (report.explained_variance_ratio[0], report.explained_variance_ratio[1]);
    Ok(plot::pca_chart(&classes, &points, &densities, evr, meta))
}

pub fn pca(a: PcaArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&a.common)?;
    if a.data.is_some() {
        cfg.data = a.data;
    }
    cfg.validate()?;
    let path = cfg.data.clone().ok_or_else(|| validation("--data is required"))?;
    let mut ds = load_data(&path)?;
    if !is_preprocessed(&ds) {
        ds = preprocess_dataset(&ds, &cfg.preprocess)?;
    }
    let report = pca_projection(&ds, a.components)?;
    let m = manifest("pca", &cfg, json!({"input": path, "components": a.components}));
    if let Some(svg) = &a.svg {
        write_file(svg, pca_svg(&report, &m.to_string())?)?;
    }
    let mut v = serde_json::to_value(&report).map_err(|e| runtime(e.to_string()))?;
    v["manifest"] = m;
    write_file(&a.out, pretty(&v))
}

#[derive(Args)]
pub struct PlotArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    kind: PlotKind,
    /// Report produced by another subcommand.
    #[arg(long)]
    input: PathBuf,
    /// Class to draw for `overlap` and `saliency`; defaults to the first.
    #[arg(long)]
    class: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
pub enum PlotKind {
    /// Loss and accuracy per epoch from a curves CSV.
    Curves,
    /// Confusion matrix from a metrics or CV report.
    Confusion,
    /// ROC curves from a metrics or CV report.
    Roc,
    /// Score scatter from a PCA report.
    Pca,
    /// Overlap ratio against threshold from an overlap report.
    Overlap,
    /// Class saliency map from an overlap report.
    Saliency,
}

fn metrics_in(v: &Value) -> Result<MetricsReport, CliError> {
    let r = v.get("pooled").or_else(|| v.get("metrics")).unwrap_or(v);
    serde_json::from_value(r.clone()).map_err(|e| validation(format!("not a metrics report: {e}")))
}

fn parse_curves(text: &str) -> Result<Vec<(String, Vec<(f64, f64)>)>, CliError> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| validation("empty curves file"))?
        .split(',')
        .collect();
    if header.first() != Some(&"epoch") {
        return Err(validation("curves file must start with an `epoch` column"));
    }
    let mut series: Vec<(String, Vec<(f64, f64)>)> =
        header[1..].iter().map(|h| (h.to_string(), Vec::new())).collect();
    for (n, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        let bad = || validation(format!("curves row {}: `{line}`", n + 1));
        let epoch: f64 = cells.first().and_then(|c| c.parse().ok()).ok_or_else(bad)?;
        for (k, s) in series.iter_mut().enumerate() {
            match cells.get(k + 1).copied().unwrap_or("") {
                "" => {}
                c => s.1.push((epoch, c.parse().map_err(|_| bad())?)),
            }
        }
    }
    Ok(series.into_iter().filter(|s| !s.1.is_empty()).collect())
}

fn pick_class(v: &Value, class: Option<String>) -> Result<String, CliError> {
    match class {
        Some(c) => Ok(c),
        None => v["report"]["class_maps"]
            .as_object()
            .and_then(|m| m.keys().next().cloned())
            .or_else(|| v["report"]["rows"][0]["class"].as_str().map(String::from))
            .ok_or_else(|| validation("overlap report has no classes")),
    }
}

pub fn plot(a: PlotArgs) -> Result<(), CliError> {
    let cfg = load_config(&a.common)?;
    let text = std::fs::read_to_string(&a.input)
        .map_err(|e| validation(format!("{}: {e}", a.input.display())))?;
    let m = manifest("plot", &cfg, json!({"input": a.input}));
    let meta = m.to_string();
    let parse = || -> Result<Value, CliError> { read_json(&a.input) };
    let svg = match a.kind {
        PlotKind::Curves => {
            plot::line_chart("Training curves", "epoch", "value", &parse_curves(&text)?, &meta)
        }
        PlotKind::Confusion => {
            let r = metrics_in(&parse()?)?;
            plot::confusion_chart("Confusion matrix", &r.class_names, &r.confusion, &meta)
        }
        PlotKind::Roc => {
            let r = metrics_in(&parse()?)?;
            plot::line_chart("One-vs-rest ROC", "false positive rate", "true positive rate", &roc_series(&r), &meta)
        }
        PlotKind::Pca => {
            let mut v = parse()?;
            if let Some(o) = v.as_object_mut() {
                o.remove("manifest");
            }
            let report: PcaReport =
                serde_json::from_value(v).map_err(|e| validation(format!("not a PCA report: {e}")))?;
            pca_svg(&report, &meta)?
        }
        PlotKind::Overlap => {
            let v = parse()?;
            let class = pick_class(&v, a.class)?;
            let rows = v["report"]["rows"]
                .as_array()
                .ok_or_else(|| validation("not an overlap report"))?;
            let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
            for r in rows.iter().filter(|r| r["class"] == class.as_str()) {
                let band = r["band"].as_str().unwrap_or_default().to_string();
                let point = (r["beta"].as_f64().unwrap_or(f64::NAN), r["gamma"].as_f64().unwrap_or(f64::NAN));
                match series.iter_mut().find(|s| s.0 == band) {
                    Some(s) => s.1.push(point),
                    None => series.push((band, vec![point])),
                }
            }
            if series.is_empty() {
                return Err(validation(format!("no overlap rows for class `{class}`")));
            }
            plot::line_chart(&format!("Band overlap: {class}"), "beta", "gamma", &series, &meta)
        }
        PlotKind::Saliency => {
            let v = parse()?;
            let class = pick_class(&v, a.class)?;
            let map: ropesat::explain::SaliencyMap =
                serde_json::from_value(v["report"]["class_maps"][&class].clone())
                    .map_err(|_| validation(format!("no class map for `{class}`")))?;
            let bands = match &cfg.bands {
                Some(p) => BandTable::load(p)?,
                None => BandTable::default(),
            };
            let list: Vec<(String, f64, f64)> = bands.iter().map(|(n, (h, l))| (n.to_string(), h, l)).collect();
            plot::saliency_chart(
                &format!("Grad-CAM class map: {class}"),
                &map.grid.wavenumbers(),
                &map.weights,
                None,
                &list,
                &meta,
            )
        }
    };
    write_file(&a.out, svg)
}
