//! Stage orchestration: each stage reads the artifacts of its upstream
//! stages from the output directory and writes its own atomically, so runs
//! can resume per stage and identical configs reproduce identical bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::causal::{self, smd_balance, CausalConfig, TreatmentValues, WeightVector};
use crate::dataset::{
    self, balance_classes, impute_column_means, read_feature_csv, stratified_split,
    AccidentMapping, FeatureTable, ROAD_CODE_COLUMN,
};
use crate::gbt::{self, TrainConfig, TreeEnsemble};
use crate::indicators::{aggregate_views, compute_indicators, IndicatorConfig, IndicatorVector};
use crate::mask::{load_mask, parse_mask_filename};
use crate::report;
use crate::schema::CategorySchema;
use crate::shap;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Extract,
    Prep,
    Train,
    Explain,
    Causal,
    Matrix,
}

pub const ALL_STAGES: [Stage; 6] = [
    Stage::Extract,
    Stage::Prep,
    Stage::Train,
    Stage::Explain,
    Stage::Causal,
    Stage::Matrix,
];

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Extract => "extract",
            Stage::Prep => "prep",
            Stage::Train => "train",
            Stage::Explain => "explain",
            Stage::Causal => "causal",
            Stage::Matrix => "matrix",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        ALL_STAGES.iter().copied().find(|s| s.name() == name)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub masks_dir: PathBuf,
    pub schema_path: Option<PathBuf>,
    pub mapping_path: Option<PathBuf>,
    pub accidents_csv: PathBuf,
    pub roads_csv: PathBuf,
    pub output_dir: PathBuf,
    pub indicator: IndicatorConfig,
    pub train: TrainConfig,
    pub causal: CausalConfig,
    pub test_fraction: f64,
    pub balance_training_set: bool,
    pub fishnet_cell_size: f64,
    /// Cap on rows attributed in the explain stage.
    pub shap_sample: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            masks_dir: PathBuf::from("masks"),
            schema_path: None,
            mapping_path: None,
            accidents_csv: PathBuf::from("accidents.csv"),
            roads_csv: PathBuf::from("roads.csv"),
            output_dir: PathBuf::from("out"),
            indicator: IndicatorConfig::default(),
            train: TrainConfig::default(),
            causal: CausalConfig::default(),
            test_fraction: 0.2,
            balance_training_set: true,
            fishnet_cell_size: 0.01,
            shap_sample: 500,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.indicator.validate()?;
        self.train.validate()?;
        self.causal.validate()?;
        if !(0.0 < self.test_fraction && self.test_fraction < 1.0) {
            return Err(Error::Pipeline(format!(
                "test_fraction must be in (0,1), got {}",
                self.test_fraction
            )));
        }
        Ok(())
    }

    fn schema(&self) -> Result<CategorySchema> {
        match &self.schema_path {
            Some(p) => CategorySchema::load(p),
            None => Ok(CategorySchema::default()),
        }
    }

    fn mapping(&self) -> Result<AccidentMapping> {
        match &self.mapping_path {
            Some(p) => AccidentMapping::load(p),
            None => Ok(AccidentMapping::default()),
        }
    }

    fn artifact(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    fn require(&self, name: &str, produced_by: Stage) -> Result<PathBuf> {
        let path = self.artifact(name);
        if !path.exists() {
            return Err(Error::MissingStage {
                artifact: name.to_string(),
                stage: produced_by.name().to_string(),
            });
        }
        Ok(path)
    }
}

/// Write via a temp file in the same directory, then rename into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name()
            .map(|s| s.to_string_lossy())
            .unwrap_or_default()
    ));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn atomic_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    atomic_write(path, text.as_bytes())
}

/// Like the CSV writers, but routed through the atomic path: write to a
/// buffer first.
fn atomic_via<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&Path) -> Result<()>,
{
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name()
            .map(|s| s.to_string_lossy())
            .unwrap_or_default()
    ));
    write(&tmp)?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

/// masks -> indicators.csv (one aggregated row per point).
pub fn run_extract(cfg: &RunConfig) -> Result<usize> {
    use rayon::prelude::*;
    let schema = cfg.schema()?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(&cfg.masks_dir)
        .map_err(|e| Error::io(cfg.masks_dir.display().to_string(), e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "png").unwrap_or(false))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Pipeline(format!(
            "no .png masks found in {}",
            cfg.masks_dir.display()
        )));
    }
    let per_view: Vec<(String, IndicatorVector)> = files
        .par_iter()
        .map(|path| {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_default();
            let (point_id, _heading) = parse_mask_filename(&stem).ok_or_else(|| {
                Error::Pipeline(format!(
                    "mask filename {stem:?} is not <point_id>_<heading>"
                ))
            })?;
            let mask = load_mask(path, &schema)?;
            let v = compute_indicators(&mask, &schema, &cfg.indicator)?;
            Ok((point_id, v))
        })
        .collect::<Result<_>>()?;
    let mut grouped: BTreeMap<String, Vec<IndicatorVector>> = BTreeMap::new();
    for (pid, v) in per_view {
        grouped.entry(pid).or_default().push(v);
    }
    let mut rows = BTreeMap::new();
    for (pid, views) in grouped {
        let agg = aggregate_views(&views)?;
        rows.insert(pid, (agg, views.len()));
    }
    let n = rows.len();
    atomic_via(&cfg.artifact("indicators.csv"), |p| {
        report::write_indicator_csv(p, &rows)
    })?;
    Ok(n)
}

#[derive(Serialize)]
struct FishnetJson {
    origin_lon: f64,
    origin_lat: f64,
    cell_size: f64,
    cells: Vec<FishnetCellJson>,
}

#[derive(Serialize)]
struct FishnetCellJson {
    row: i64,
    col: i64,
    counts: Vec<usize>,
    indicator_means: [f64; 11],
    n_points: usize,
}

/// indicators.csv + accidents + roads -> features.csv, train.csv,
/// test.csv, fishnet.json, balance_log.json.
pub fn run_prep(cfg: &RunConfig) -> Result<()> {
    let ind_path = cfg.require("indicators.csv", Stage::Extract)?;
    let indicators_rows = report::read_indicator_csv(&ind_path)?;
    let indicators: BTreeMap<String, IndicatorVector> = indicators_rows
        .iter()
        .map(|(k, (v, _))| (k.clone(), *v))
        .collect();
    let mapping = cfg.mapping()?;
    let records = dataset::read_accidents_csv(&cfg.accidents_csv, &mapping)?;
    let roads = dataset::read_roads_csv(&cfg.roads_csv)?;

    let mut table = dataset::join_feature_table(&records, &indicators, &roads)?;
    let means = impute_column_means(&mut table)?;
    atomic_via(&cfg.artifact("features.csv"), |p| {
        dataset::write_feature_csv(p, &table)
    })?;
    atomic_json(&cfg.artifact("imputation.json"), &means)?;

    let (mut train, test) = stratified_split(&table, cfg.test_fraction, cfg.seed)?;
    let road_col = table
        .column_index(ROAD_CODE_COLUMN)
        .ok_or_else(|| Error::Pipeline("feature table lacks the road code column".into()))?;
    let mut balance_log_json = serde_json::json!({ "balanced": false });
    if cfg.balance_training_set {
        let (balanced, log) = balance_classes(&train, cfg.seed, 5, None, &[road_col])?;
        balance_log_json = serde_json::json!({
            "balanced": true,
            "target_size": log.target_size,
            "synthetic_rows": log.synthetic.len(),
        });
        train = balanced;
    }
    atomic_via(&cfg.artifact("train.csv"), |p| {
        dataset::write_feature_csv(p, &train)
    })?;
    atomic_via(&cfg.artifact("test.csv"), |p| {
        dataset::write_feature_csv(p, &test)
    })?;
    atomic_json(&cfg.artifact("balance_log.json"), &balance_log_json)?;

    let grid = dataset::fishnet_aggregate(&records, &indicators, cfg.fishnet_cell_size)?;
    let fishnet = FishnetJson {
        origin_lon: grid.origin_lon,
        origin_lat: grid.origin_lat,
        cell_size: grid.cell_size,
        cells: grid
            .cells
            .iter()
            .map(|(&(row, col), cell)| FishnetCellJson {
                row,
                col,
                counts: cell.counts.clone(),
                indicator_means: cell.indicator_means(),
                n_points: cell.n_points,
            })
            .collect(),
    };
    atomic_json(&cfg.artifact("fishnet.json"), &fishnet)
}

fn features_and_labels(table: &FeatureTable) -> (Vec<Vec<f64>>, Vec<usize>) {
    (
        table.rows.iter().map(|r| r.features.clone()).collect(),
        table.rows.iter().map(|r| r.class).collect(),
    )
}

/// train.csv/test.csv -> model.json, eval.json.
pub fn run_train(cfg: &RunConfig) -> Result<()> {
    let train = read_feature_csv(&cfg.require("train.csv", Stage::Prep)?)?;
    let test = read_feature_csv(&cfg.require("test.csv", Stage::Prep)?)?;
    let (x, y) = features_and_labels(&train);
    let model = gbt::fit_multiclass(&x, &y, train.num_classes(), &cfg.train)?;
    atomic_via(&cfg.artifact("model.json"), |p| model.save(p))?;
    let (tx, ty) = features_and_labels(&test);
    let eval = gbt::evaluate_classifier(&model, &tx, &ty)?;
    let (trx, try_) = features_and_labels(&train);
    let train_eval = gbt::evaluate_classifier(&model, &trx, &try_)?;
    atomic_json(
        &cfg.artifact("eval.json"),
        &serde_json::json!({
            "test": eval,
            "train": train_eval,
            "n_train": train.rows.len(),
            "n_test": test.rows.len(),
        }),
    )
}

/// model.json + train.csv -> importance.csv/svg, per-class importances,
/// dependence plot of the top feature.
pub fn run_explain(cfg: &RunConfig) -> Result<()> {
    use rayon::prelude::*;
    let model = TreeEnsemble::load(&cfg.require("model.json", Stage::Train)?)?;
    let table = read_feature_csv(&cfg.require("train.csv", Stage::Prep)?)?;
    let n = table.rows.len().min(cfg.shap_sample);
    let features: Vec<Vec<f64>> = table.rows[..n].iter().map(|r| r.features.clone()).collect();
    let attributions: Vec<shap::Attribution> = features
        .par_iter()
        .enumerate()
        .map(|(i, x)| shap::tree_shap(&model, x, i))
        .collect::<Result<_>>()?;

    let global = shap::global_importance(&attributions)?;
    atomic_via(&cfg.artifact("importance.csv"), |p| {
        report::write_importance_csv(p, &table.feature_names, &global)
    })?;
    atomic_write(
        &cfg.artifact("importance.svg"),
        report::importance_bar_svg(&table.feature_names, &global).as_bytes(),
    )?;

    let mut per_class = BTreeMap::new();
    for (k, name) in table.class_names.iter().enumerate() {
        per_class.insert(name.clone(), shap::class_importance(&attributions, k)?);
    }
    atomic_json(&cfg.artifact("importance_by_class.json"), &per_class)?;

    let top = gbt::argmax(&global.mean_abs);
    let pairs = shap::dependence_table(&attributions, &features, top, 0);
    atomic_write(
        &cfg.artifact("dependence_top.svg"),
        report::dependence_svg(&table.feature_names[top], &pairs).as_bytes(),
    )?;
    let dep_csv = {
        let mut s = String::from("value,attribution\n");
        for (v, p) in &pairs {
            s.push_str(&format!("{v},{p}\n"));
        }
        s
    };
    atomic_write(&cfg.artifact("dependence_top.csv"), dep_csv.as_bytes())
}

/// features.csv -> GPS diagnostics and balance reports per treatment.
pub fn run_causal(cfg: &RunConfig) -> Result<()> {
    use rayon::prelude::*;
    let table = read_feature_csv(&cfg.require("features.csv", Stage::Prep)?)?;
    let road_col = table.column_index(ROAD_CODE_COLUMN);
    let results: Vec<Result<(causal::GpsDiagnostics, causal::BalanceReport)>> = (0..table
        .num_features())
        .into_par_iter()
        .map(|t| diagnose_treatment(&table, t, road_col, &cfg.causal))
        .collect();
    let mut diagnostics = Vec::new();
    let mut balance = Vec::new();
    let mut failures = Vec::new();
    for (t, res) in results.into_iter().enumerate() {
        match res {
            Ok((d, b)) => {
                diagnostics.push(d);
                balance.push((table.feature_names[t].clone(), b));
            }
            Err(e) => failures.push((table.feature_names[t].clone(), e.to_string())),
        }
    }
    atomic_json(
        &cfg.artifact("causal_diagnostics.json"),
        &serde_json::json!({
            "diagnostics": diagnostics,
            "balance": balance,
            "failures": failures,
        }),
    )
}

fn diagnose_treatment(
    table: &FeatureTable,
    treatment_col: usize,
    road_col: Option<usize>,
    cfg: &CausalConfig,
) -> Result<(causal::GpsDiagnostics, causal::BalanceReport)> {
    let covariates: Vec<Vec<f64>> = table
        .rows
        .iter()
        .map(|r| {
            r.features
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != treatment_col)
                .map(|(_, &v)| v)
                .collect()
        })
        .collect();
    let name = &table.feature_names[treatment_col];
    let (model, raw, values): (_, WeightVector, TreatmentValues) =
        if Some(treatment_col) == road_col {
            let z: Vec<i64> = table
                .rows
                .iter()
                .map(|r| r.features[treatment_col].round() as i64)
                .collect();
            let (m, w) = causal::fit_gps_categorical(&covariates, &z, treatment_col, cfg)?;
            (m, w, TreatmentValues::Categorical(z))
        } else {
            let z: Vec<f64> = table
                .rows
                .iter()
                .map(|r| r.features[treatment_col])
                .collect();
            let (m, w) = causal::fit_gps_continuous(&covariates, &z, treatment_col, cfg)?;
            (m, w, TreatmentValues::Continuous(z))
        };
    let w = causal::truncate_weights(&raw, cfg.truncation_percentile)?;
    let diag = causal::gps_diagnostics(&model, &covariates, &values, &w, name)?;
    let balance = smd_balance(&covariates, &values, &w)?;
    Ok((diag, balance))
}

/// features.csv -> effect_matrix.csv/json/svg.
pub fn run_matrix(cfg: &RunConfig) -> Result<()> {
    let table = read_feature_csv(&cfg.require("features.csv", Stage::Prep)?)?;
    let matrix = causal::build_effect_matrix(&table, &cfg.causal)?;
    atomic_via(&cfg.artifact("effect_matrix.csv"), |p| {
        report::write_effect_matrix_csv(p, &matrix)
    })?;
    atomic_json(&cfg.artifact("effect_matrix.json"), &matrix)?;
    atomic_write(
        &cfg.artifact("effect_matrix.svg"),
        report::effect_matrix_svg(&matrix).as_bytes(),
    )
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
}

#[derive(Serialize)]
pub struct StageRecord {
    pub stage: String,
    pub wall_ms: u128,
}

pub fn config_hash(cfg: &RunConfig) -> Result<String> {
    let canonical = serde_json::to_vec(cfg)?;
    let digest = Sha256::digest(&canonical);
    Ok(format!("{digest:x}"))
}

/// Run the requested stages in dependency order and write manifest.json.
pub fn run_pipeline(cfg: &RunConfig, stages: &[Stage]) -> Result<Manifest> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| Error::io(cfg.output_dir.display().to_string(), e))?;
    let mut records = Vec::new();
    for stage in ALL_STAGES {
        if !stages.contains(&stage) {
            continue;
        }
        let start = Instant::now();
        match stage {
            Stage::Extract => {
                run_extract(cfg)?;
            }
            Stage::Prep => run_prep(cfg)?,
            Stage::Train => run_train(cfg)?,
            Stage::Explain => run_explain(cfg)?,
            Stage::Causal => run_causal(cfg)?,
            Stage::Matrix => run_matrix(cfg)?,
        }
        records.push(StageRecord {
            stage: stage.name().to_string(),
            wall_ms: start.elapsed().as_millis(),
        });
    }
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: config_hash(cfg)?,
        seed: cfg.seed,
        stages: records,
    };
    atomic_json(&cfg.artifact("manifest.json"), &manifest)?;
    Ok(manifest)
}
