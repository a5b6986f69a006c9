//! Config-driven audits: partition, train targets per regime, attack,
//! evaluate and write deterministic reports.
//!
//! Every seed is derived from `[seeds] master`: run `i` uses
//! `derive(master, [SWEEP, i])`, and within a run the target of
//! (regime, kind) and its attacks use further derived seeds. Reports contain
//! no timings or paths outside the output directory, so the same config
//! always produces the same bytes.

mod config;
mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use config::{
    AttackConfig, AuditConfig, AuditSection, DatasetConfig, FamilyOverride, FederatedSection,
    Regime, SeedConfig, SyntheticSource, TransferConfig,
};
pub use report::{
    AuditCell, AuditReport, CaptureRow, CellSummary, RunInfo, SingleOutSection, TransferReport,
    TransferRow,
};

use crate::attacks::{
    run_attack, run_transfer_matrix, AttackContext, AttackFamily, AttackResult, TransferTarget,
};
use crate::data::{
    detect_single_outs, load_csv, ColumnKind, make_federated_shards, make_partition, DataPartition, Dataset,
    DatasetSummary, QuasiIdentifierSet, SchemaHint, SingleOutReport,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalOptions, Summary};
use crate::federated::{train_federated, FederatedModel};
use crate::models::{
    generalization_gap, grid_search, train_model, BlackBox, GeneralizationReport, GridRegime,
    HyperGrid, ModelKind, ModelSpec, TrainedModel,
};
use crate::seed;

pub const TOOLKIT: &str = concat!("tabmia ", env!("CARGO_PKG_VERSION"));

/// Share of the target training split held out for grid-search validation.
const VALIDATION_SHARE: f64 = 0.2;

/// What a command did; `failures` counts cells recorded as errors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CommandOutcome {
    pub failures: usize,
    pub files: Vec<PathBuf>,
    pub message: String,
}

/// Process exit code: 0 success, 2 configuration error, 3 partial
/// failures, 1 any other error.
pub fn exit_code(outcome: &Result<CommandOutcome>) -> i32 {
    match outcome {
        Ok(o) if o.failures == 0 => 0,
        Ok(_) => 3,
        Err(Error::Config(_)) => 2,
        Err(_) => 1,
    }
}

/// Command-line adjustments applied on top of a config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub regimes: Vec<Regime>,
    pub families: Vec<AttackFamily>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut AuditConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.seeds.master = s;
        }
        if let Some(o) = &self.out {
            cfg.audit.out = o.clone();
        }
        if !self.regimes.is_empty() {
            cfg.audit.regimes = self.regimes.clone();
        }
        if !self.families.is_empty() {
            cfg.audit.families = self.families.clone();
        }
        cfg.check()
    }
}

/// A trained target as the adversary sees it.
pub enum Target {
    Central(TrainedModel),
    Federated(FederatedModel),
}

impl Target {
    pub fn black_box(&self) -> &dyn BlackBox {
        match self {
            Target::Central(m) => m,
            Target::Federated(m) => m,
        }
    }
}

fn regime_tag(r: Regime) -> u64 {
    r as u64 + 1
}

fn kind_tag(k: ModelKind) -> u64 {
    k as u64 + 1
}

/// Grid-search `kind` on a held-out slice of the target training split,
/// then refit the winning configuration on the whole split.
fn central_target(
    ds: &Dataset,
    part: &DataPartition,
    kind: ModelKind,
    regime: GridRegime,
    seed: u64,
) -> Result<TrainedModel> {
    let grid = HyperGrid::new(kind, regime);
    let specs = grid.specs(seed);
    if specs.len() == 1 {
        return train_model(ds, &part.target_train, &specs[0]);
    }
    let mut rows = part.target_train.clone();
    rows.shuffle(&mut seed::rng(seed::derive_seed(seed, &[1])));
    let n_val = ((rows.len() as f64 * VALIDATION_SHARE).round() as usize).clamp(1, rows.len() - 1);
    let validation = rows.split_off(rows.len() - n_val);
    rows.sort_unstable();
    let outcome = grid_search(ds, &grid, &rows, &validation, seed)?;
    log::info!(
        "{kind}: grid candidate {} of {} won ({})",
        outcome.index + 1,
        outcome.evaluated,
        outcome.model.spec().describe()
    );
    train_model(ds, &part.target_train, outcome.model.spec())
}

/// Train the target of one (regime, kind) cell. Returns the model, the
/// spec the adversary assumes and the train/test accuracy.
pub fn train_target(
    ds: &Dataset,
    part: &DataPartition,
    regime: Regime,
    kind: ModelKind,
    cfg: &AuditConfig,
    seed: u64,
) -> Result<(Target, ModelSpec, GeneralizationReport)> {
    match regime {
        Regime::CentralWeak | Regime::CentralDefended => {
            let grid = if regime == Regime::CentralWeak {
                GridRegime::Weak
            } else {
                GridRegime::Defense
            };
            let model = central_target(ds, part, kind, grid, seed)?;
            let gen = generalization_gap(&model, ds, &part.target_train, &part.target_test)?;
            let spec = model.spec().clone();
            Ok((Target::Central(model), spec, gen))
        }
        Regime::Federated => {
            let fl = cfg.federated.config(seed);
            fl.validate()?;
            let shards = make_federated_shards(part, fl.n_participants, seed)?;
            let trains: Vec<Vec<usize>> = shards.into_iter().map(|s| s.train).collect();
            let spec = ModelSpec::new(kind).with_seed(seed);
            let global = train_federated(ds, &trains, &spec, &fl)?;
            let gen = generalization_gap(global.model(), ds, &part.target_train, &part.target_test)?;
            Ok((Target::Federated(global.export()), spec, gen))
        }
    }
}

/// Everything an audit produced, before it is written to disk.
pub struct AuditRun {
    pub report: AuditReport,
    pub partitions: Vec<DataPartition>,
    /// Attack outputs keyed by cell file stem.
    pub results: BTreeMap<String, AttackResult>,
}

fn load_dataset(cfg: &AuditConfig, base_dir: &Path) -> Result<Dataset> {
    let ds = cfg.dataset.load(base_dir)?;
    cfg.check_dataset(&ds)?;
    Ok(ds)
}

fn single_outs(cfg: &AuditConfig, ds: &Dataset) -> Result<Option<SingleOutReport>> {
    if cfg.dataset.quasi_identifiers.is_empty() {
        return Ok(None);
    }
    let q = QuasiIdentifierSet::from_names(ds, &cfg.dataset.quasi_identifiers)?;
    Ok(Some(detect_single_outs(ds, &q)))
}

fn summarize(values: impl Iterator<Item = Option<f64>>) -> Option<Summary> {
    let v: Vec<f64> = values.flatten().collect();
    Summary::of(&v)
}

/// Run the configured audit without touching the file system (apart from
/// reading the dataset).
pub fn run_audit(cfg: &AuditConfig, base_dir: &Path) -> Result<AuditRun> {
    cfg.check()?;
    let ds = load_dataset(cfg, base_dir)?;
    let singles = single_outs(cfg, &ds)?;
    let opts = |s: u64| EvalOptions {
        alphas: cfg.audit.alphas.clone(),
        bootstrap: cfg.audit.bootstrap,
        seed: s,
    };

    let mut runs = Vec::new();
    let mut partitions = Vec::new();
    let mut cells = Vec::new();
    let mut results = BTreeMap::new();
    for run in 0..cfg.seeds.sweep {
        let run_seed = cfg.seeds.run_seed(run);
        let part = make_partition(&ds, run_seed)?;
        let partition_file = format!("partition_s{run}.json");
        runs.push(RunInfo {
            index: run,
            seed: run_seed,
            population: part.population.len(),
            target_train: part.target_train.len(),
            target_test: part.target_test.len(),
            inference_members: part.inference_members.len(),
            partition_file,
        });
        for &regime in &cfg.audit.regimes {
            for &kind in &cfg.audit.kinds {
                let target_seed = seed::derive_seed(
                    run_seed,
                    &[seed::stage::TARGET, regime_tag(regime), kind_tag(kind)],
                );
                let attack_seed = seed::derive_seed(
                    run_seed,
                    &[seed::stage::ATTACK_MODEL, regime_tag(regime), kind_tag(kind)],
                );
                let blank = |family| AuditCell {
                    regime,
                    kind,
                    family,
                    run,
                    attack_seed,
                    generalization: None,
                    metrics: None,
                    roc_file: None,
                    scores_file: None,
                    notes: Vec::new(),
                    error: None,
                };
                let trained = train_target(&ds, &part, regime, kind, cfg, target_seed);
                let (target, spec, gen) = match trained {
                    Ok(t) => {
                        log::info!(
                            "run {run} {regime}/{kind}: train {:.3} test {:.3}",
                            t.2.train_accuracy,
                            t.2.test_accuracy
                        );
                        t
                    }
                    Err(e) => {
                        log::warn!("run {run} {regime}/{kind}: target failed: {e}");
                        for &family in &cfg.audit.families {
                            cells.push(AuditCell {
                                error: Some(format!("target training failed: {e}")),
                                ..blank(family)
                            });
                        }
                        continue;
                    }
                };
                let ctx = AttackContext::new(
                    &ds,
                    &part,
                    target.black_box(),
                    spec,
                    cfg.audit.population_sample,
                    attack_seed,
                );
                let mut ctx = match ctx {
                    Ok(c) => c.with_label(format!("{regime}/{kind}")),
                    Err(e) => {
                        for &family in &cfg.audit.families {
                            cells.push(AuditCell {
                                generalization: Some(gen),
                                error: Some(format!("target query failed: {e}")),
                                ..blank(family)
                            });
                        }
                        continue;
                    }
                };
                for &family in &cfg.audit.families {
                    let mut cell = AuditCell {
                        generalization: Some(gen),
                        ..blank(family)
                    };
                    let spec = cfg.attacks.spec(family, attack_seed);
                    let evaluated = run_attack(&mut ctx, &spec)
                        .and_then(|r| evaluate(&r, &opts(attack_seed), singles.as_ref()).map(|m| (r, m)));
                    match evaluated {
                        Ok((result, metrics)) => {
                            let stem = cell.stem();
                            cell.scores_file = Some(format!("scores_{stem}.csv"));
                            if family.has_roc() {
                                cell.roc_file = Some(format!("roc_{stem}.csv"));
                            } else {
                                cell.notes.push("binary scores; no ROC curve written".into());
                            }
                            if metrics.single_out_capture.is_none() && singles.is_some() {
                                cell.notes.push("no single-out among inference members".into());
                            }
                            cell.metrics = Some(metrics);
                            results.insert(stem, result);
                        }
                        Err(e) => {
                            log::warn!("run {run} {regime}/{kind}/{family} failed: {e}");
                            cell.error = Some(e.to_string());
                        }
                    }
                    cells.push(cell);
                }
            }
        }
        partitions.push(part);
    }

    let mut summary = Vec::new();
    let mut captures = Vec::new();
    for &regime in &cfg.audit.regimes {
        for &kind in &cfg.audit.kinds {
            for &family in &cfg.audit.families {
                let group: Vec<&AuditCell> = cells
                    .iter()
                    .filter(|c| c.regime == regime && c.kind == kind && c.family == family)
                    .collect();
                let ms = || group.iter().filter_map(|c| c.metrics.as_ref());
                let alpha = cfg.audit.alphas[0];
                summary.push(CellSummary {
                    regime,
                    kind,
                    family,
                    succeeded: ms().count(),
                    failed: group.iter().filter(|c| c.error.is_some()).count(),
                    auc: summarize(ms().map(|m| Some(m.auc))),
                    tpr_at_fpr: summarize(ms().map(|m| m.tpr_at(alpha))),
                    advantage: summarize(ms().map(|m| Some(m.advantage))),
                    recall: summarize(ms().map(|m| m.recall)),
                    single_out_capture: summarize(ms().map(|m| m.single_out_capture)),
                    gap: summarize(group.iter().map(|c| c.generalization.map(|g| g.gap))),
                });
                captures.push(CaptureRow {
                    regime,
                    kind,
                    family,
                    capture: summarize(ms().map(|m| m.single_out_capture)),
                    recall: summarize(ms().map(|m| m.recall)),
                });
            }
        }
    }

    let single_outs = singles.map(|s| SingleOutSection {
        qi_columns: s.qi_columns.clone(),
        equivalence_classes: s.equivalence_classes.len(),
        n_single_outs: s.n_single_outs(),
        single_out_indices: s.single_out_indices.clone(),
        captures,
    });

    let transfer = match &cfg.transfer {
        Some(t) => Some(transfer_report(cfg, t, &ds, &partitions[0], runs[0].seed)?),
        None => None,
    };

    let failures = cells.iter().filter(|c| c.error.is_some()).count()
        + transfer.as_ref().map_or(0, TransferReport::failures);
    Ok(AuditRun {
        report: AuditReport {
            toolkit: TOOLKIT.into(),
            config: cfg.clone(),
            dataset: ds.summary(),
            runs,
            cells,
            summary,
            single_outs,
            transfer,
            failures,
        },
        partitions,
        results,
    })
}

fn transfer_report(
    cfg: &AuditConfig,
    t: &TransferConfig,
    ds: &Dataset,
    part: &DataPartition,
    run_seed: u64,
) -> Result<TransferReport> {
    let seed = seed::derive_seed(run_seed, &[seed::stage::TRANSFER]);
    let attacks: Vec<_> = t.families.iter().map(|&f| cfg.attacks.spec(f, seed)).collect();
    let targets: Vec<TransferTarget> = t.targets.iter().map(|&k| TransferTarget::new(k)).collect();
    let matrix = run_transfer_matrix(
        ds,
        part,
        &attacks,
        &targets,
        &t.surrogates,
        seed,
        cfg.audit.population_sample,
    )?;
    let alpha = cfg.audit.alphas[0];
    let opts = EvalOptions {
        alphas: vec![alpha],
        bootstrap: 0,
        seed,
    };
    let mut rows: Vec<TransferRow> = matrix
        .cells
        .iter()
        .map(|c| {
            let metrics = c.result.as_ref().map(|r| evaluate(r, &opts, None));
            let (m, error) = match metrics {
                Some(Ok(m)) => (Some(m), None),
                Some(Err(e)) => (None, Some(e.to_string())),
                None => (None, c.error.clone()),
            };
            TransferRow {
                family: c.family,
                target: c.target,
                surrogate: c.surrogate,
                baseline: c.baseline,
                auc: m.as_ref().map(|m| m.auc),
                tpr_at_fpr: m.as_ref().and_then(|m| m.tpr_at(alpha)),
                advantage: m.as_ref().map(|m| m.advantage),
                best_in_row: false,
                error,
            }
        })
        .collect();
    // mark the best surrogate per (family, target); first wins ties
    let mut best: BTreeMap<(AttackFamily, ModelKind), (usize, f64)> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        if let Some(a) = r.auc {
            let e = best.entry((r.family, r.target)).or_insert((i, a));
            if a > e.1 {
                *e = (i, a);
            }
        }
    }
    for (i, _) in best.values() {
        rows[*i].best_in_row = true;
    }
    Ok(TransferReport {
        run_seed,
        families: matrix.families,
        targets: matrix.targets,
        surrogates: matrix.surrogates,
        rows,
    })
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Write the report, metrics table, per-cell score and ROC files,
/// partition manifests and transfer tables into `dir`.
pub fn write_audit(run: &AuditRun, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    let report = &run.report;
    write_file(dir, "report.json", report.to_json()?.as_bytes(), &mut files)?;
    write_file(
        dir,
        "metrics.csv",
        &csv_bytes(|b| report.write_metrics_csv(b))?,
        &mut files,
    )?;
    for (info, part) in report.runs.iter().zip(&run.partitions) {
        write_file(dir, &info.partition_file, part.to_json()?.as_bytes(), &mut files)?;
    }
    for cell in &report.cells {
        let Some(result) = run.results.get(&cell.stem()) else {
            continue;
        };
        if let Some(name) = &cell.scores_file {
            write_file(dir, name, &csv_bytes(|b| result.write_csv(b))?, &mut files)?;
        }
        if let Some(name) = &cell.roc_file {
            let curve = crate::eval::roc_curve(&result.scores, &result.truth)?;
            write_file(dir, name, &csv_bytes(|b| curve.write_csv(b))?, &mut files)?;
        }
    }
    if let Some(t) = &report.transfer {
        write_transfer_tables(t, dir, &mut files)?;
    }
    Ok(files)
}

fn write_transfer_tables(t: &TransferReport, dir: &Path, files: &mut Vec<PathBuf>) -> Result<()> {
    for &family in &t.families {
        write_file(
            dir,
            &format!("transfer_{family}.csv"),
            &csv_bytes(|b| t.write_family_csv(family, b))?,
            files,
        )?;
    }
    Ok(())
}

fn out_dir(cfg: &AuditConfig, base_dir: &Path) -> PathBuf {
    if cfg.audit.out.is_absolute() {
        cfg.audit.out.clone()
    } else {
        base_dir.join(&cfg.audit.out)
    }
}

/// Summary written by `ingest`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub source: String,
    /// FNV-1a 64 of the file bytes.
    pub fingerprint: String,
    pub summary: DatasetSummary,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Load a CSV, print its summary and write `dataset_manifest.json` into
/// `out` when given.
pub fn cmd_ingest(path: &Path, label: &str, hint: &SchemaHint, out: Option<&Path>) -> Result<CommandOutcome> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let ds = load_csv(path, hint, label)?;
    let manifest = DatasetManifest {
        source: path
            .file_name()
            .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned()),
        fingerprint: format!("{:016x}", fnv1a(&bytes)),
        summary: ds.summary(),
    };
    let mut files = Vec::new();
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        write_file(dir, "dataset_manifest.json", text.as_bytes(), &mut files)?;
    }
    let mut message = format!("{} ({}): {}\n", manifest.source, manifest.fingerprint, manifest.summary);
    for c in &manifest.summary.columns {
        let role = if c.name == manifest.summary.label_column { " [label]" } else { "" };
        match c.kind {
            ColumnKind::Numeric => message.push_str(&format!("  {:<20} numeric{role}\n", c.name)),
            ColumnKind::Categorical => message.push_str(&format!(
                "  {:<20} categorical ({} values){role}\n",
                c.name,
                c.categories.len()
            )),
        }
    }
    Ok(CommandOutcome {
        failures: 0,
        files,
        message,
    })
}

/// Full audit; outputs go to `[audit] out` (relative to `base_dir`).
pub fn cmd_audit(cfg: &AuditConfig, base_dir: &Path) -> Result<CommandOutcome> {
    let run = run_audit(cfg, base_dir)?;
    let files = write_audit(&run, &out_dir(cfg, base_dir))?;
    Ok(CommandOutcome {
        failures: run.report.failures,
        files,
        message: run.report.render_text(),
    })
}

/// Transfer matrix only; needs a `[transfer]` section.
pub fn cmd_transfer(cfg: &AuditConfig, base_dir: &Path) -> Result<CommandOutcome> {
    cfg.check()?;
    let t = cfg
        .transfer
        .as_ref()
        .ok_or_else(|| Error::Config("transfer needs a [transfer] section".into()))?;
    let ds = load_dataset(cfg, base_dir)?;
    let run_seed = cfg.seeds.run_seed(0);
    let part = make_partition(&ds, run_seed)?;
    let report = transfer_report(cfg, t, &ds, &part, run_seed)?;
    let dir = out_dir(cfg, base_dir);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut files = Vec::new();
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    write_file(&dir, "transfer.json", json.as_bytes(), &mut files)?;
    write_file(&dir, "partition_s0.json", part.to_json()?.as_bytes(), &mut files)?;
    write_transfer_tables(&report, &dir, &mut files)?;
    let mut message = String::new();
    for r in report.rows.iter().filter(|r| r.best_in_row) {
        message.push_str(&format!(
            "{} / target {}: best surrogate {} (auc {:.3}){}\n",
            r.family,
            r.target,
            r.surrogate,
            r.auc.unwrap_or(f64::NAN),
            if r.baseline { " [baseline]" } else { "" }
        ));
    }
    Ok(CommandOutcome {
        failures: report.failures(),
        files,
        message,
    })
}

/// Single-out report plus per-attack capture rates; needs quasi-identifiers.
pub fn cmd_singleouts(cfg: &AuditConfig, base_dir: &Path) -> Result<CommandOutcome> {
    if cfg.dataset.quasi_identifiers.is_empty() {
        return Err(Error::Config("singleouts needs [dataset] quasi_identifiers".into()));
    }
    let mut cfg = cfg.clone();
    cfg.transfer = None;
    let run = run_audit(&cfg, base_dir)?;
    let section = run
        .report
        .single_outs
        .clone()
        .ok_or_else(|| Error::Config("no quasi-identifiers configured".into()))?;
    let dir = out_dir(&cfg, base_dir);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut files = Vec::new();
    let mut json = serde_json::to_string_pretty(&section)?;
    json.push('\n');
    write_file(&dir, "singleouts.json", json.as_bytes(), &mut files)?;
    let table = csv_bytes(|b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["regime", "kind", "family", "capture_mean", "capture_std", "recall_mean"])?;
        for c in &section.captures {
            w.write_record([
                c.regime.to_string(),
                c.kind.to_string(),
                c.family.to_string(),
                c.capture.map(|s| s.mean.to_string()).unwrap_or_default(),
                c.capture.map(|s| s.std.to_string()).unwrap_or_default(),
                c.recall.map(|s| s.mean.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    })?;
    write_file(&dir, "singleouts.csv", &table, &mut files)?;
    Ok(CommandOutcome {
        failures: run.report.failures,
        files,
        message: format!(
            "{} single-out(s) over {}\n",
            section.n_single_outs,
            section.qi_columns.join(", ")
        ),
    })
}

/// Render an existing `report.json` as text.
pub fn cmd_report(path: &Path) -> Result<CommandOutcome> {
    let report = AuditReport::load(path)?;
    Ok(CommandOutcome {
        failures: report.failures,
        files: Vec::new(),
        message: report.render_text(),
    })
}
