//! Tabular dataset plumbing: accident records, road types, the joined
//! feature table, and the preprocessing steps (imputation, class
//! balancing, stratified split, standardization, fishnet aggregation).

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::indicators::{IndicatorVector, INDICATOR_NAMES};
use crate::{Error, Result};

pub const ACCIDENT_CLASS_NAMES: [&str; 5] = [
    "Collision",
    "Crash",
    "VehicleBreakdown",
    "TrafficHazard",
    "Debris",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AccidentClass {
    Collision,
    Crash,
    VehicleBreakdown,
    TrafficHazard,
    Debris,
}

impl AccidentClass {
    pub fn index(self) -> usize {
        match self {
            AccidentClass::Collision => 0,
            AccidentClass::Crash => 1,
            AccidentClass::VehicleBreakdown => 2,
            AccidentClass::TrafficHazard => 3,
            AccidentClass::Debris => 4,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        [
            AccidentClass::Collision,
            AccidentClass::Crash,
            AccidentClass::VehicleBreakdown,
            AccidentClass::TrafficHazard,
            AccidentClass::Debris,
        ]
        .get(i)
        .copied()
    }

    pub fn name(self) -> &'static str {
        ACCIDENT_CLASS_NAMES[self.index()]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AccidentRecord {
    pub point_id: String,
    pub timestamp: String,
    pub raw_type: String,
    pub accident_class: AccidentClass,
    pub lon: f64,
    pub lat: f64,
}

/// Four-level road hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoadCategory {
    Path,
    Linkroad,
    Specialroad,
    PrincipalTag,
}

impl RoadCategory {
    pub fn code(self) -> u8 {
        match self {
            RoadCategory::Path => 0,
            RoadCategory::Linkroad => 1,
            RoadCategory::Specialroad => 2,
            RoadCategory::PrincipalTag => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(RoadCategory::Path),
            1 => Some(RoadCategory::Linkroad),
            2 => Some(RoadCategory::Specialroad),
            3 => Some(RoadCategory::PrincipalTag),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RoadCategory::Path => "Path",
            RoadCategory::Linkroad => "Linkroad",
            RoadCategory::Specialroad => "Specialroad",
            RoadCategory::PrincipalTag => "PrincipalTag",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "Path" => Some(RoadCategory::Path),
            "Linkroad" => Some(RoadCategory::Linkroad),
            "Specialroad" => Some(RoadCategory::Specialroad),
            "PrincipalTag" => Some(RoadCategory::PrincipalTag),
            _ => None,
        }
    }

    /// Hierarchy assignment of source road-network type strings.
    pub fn from_osm_type(osm: &str) -> Option<Self> {
        match osm {
            "footway" | "path" | "cycleway" | "pedestrian" => Some(RoadCategory::Path),
            "motorway_link" | "trunk_link" | "primary_link" => Some(RoadCategory::Linkroad),
            "service" | "track" | "unclassified" | "residential" => Some(RoadCategory::Specialroad),
            "motorway" | "trunk" | "primary" | "secondary" | "tertiary" => {
                Some(RoadCategory::PrincipalTag)
            }
            _ => None,
        }
    }
}

/// Raw accident category -> one of the five classes. The source data uses
/// 18 raw categories; the mapping ships as an editable JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AccidentMapping {
    pub entries: BTreeMap<String, AccidentClass>,
}

pub const MIN_RAW_CATEGORIES: usize = 18;

impl AccidentMapping {
    pub fn validate(&self) -> Result<()> {
        if self.entries.len() < MIN_RAW_CATEGORIES {
            return Err(Error::Dataset(format!(
                "accident mapping has {} entries, expected at least {MIN_RAW_CATEGORIES}",
                self.entries.len()
            )));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mapping: AccidentMapping = serde_json::from_str(&text)?;
        mapping.validate()?;
        Ok(mapping)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn reclassify(&self, raw_type: &str) -> Result<AccidentClass> {
        self.entries
            .get(raw_type)
            .copied()
            .ok_or_else(|| Error::UnmappedAccidentType(raw_type.to_string()))
    }
}

/// Best-guess default for the 18 source categories; user-overridable.
impl Default for AccidentMapping {
    fn default() -> Self {
        use AccidentClass::*;
        let entries = [
            ("COLLISION", Collision),
            ("COLLISION WITH INJURY", Collision),
            ("COLLISION/PRIVATE PROPERTY", Collision),
            ("COLLISN/ LVNG SCN", Collision),
            ("AUTO/ PED", Collision),
            ("FLEET ACC/ INJURY", Collision),
            ("CRASH URGENT", Crash),
            ("CRASH SERVICE", Crash),
            ("TRAFFIC FATALITY", Crash),
            ("FLEET ACC/ FATAL", Crash),
            ("STALLED VEHICLE", VehicleBreakdown),
            ("DISABLED VEHICLE", VehicleBreakdown),
            ("VEHICLE FIRE", VehicleBreakdown),
            ("TRAFFIC HAZARD", TrafficHazard),
            ("TRFC HAZD/ DEBRIS", TrafficHazard),
            ("HIGH WATER", TrafficHazard),
            ("LOOSE LIVESTOCK", Debris),
            ("DEBRIS IN ROADWAY", Debris),
        ];
        AccidentMapping {
            entries: entries
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        }
    }
}

/// Joined modeling table: 11 indicators + road code per row, with a class
/// label. Missing cells are NaN until imputation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureTable {
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureRow {
    pub point_id: String,
    pub features: Vec<f64>,
    pub class: usize,
}

pub const ROAD_CODE_COLUMN: &str = "road_code";

/// The standard 12 modeling features.
pub fn standard_feature_names() -> Vec<String> {
    INDICATOR_NAMES
        .iter()
        .map(|s| s.to_string())
        .chain(std::iter::once(ROAD_CODE_COLUMN.to_string()))
        .collect()
}

impl FeatureTable {
    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.class_names.len()];
        for row in &self.rows {
            counts[row.class] += 1;
        }
        counts
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.features[j]).collect()
    }

    /// Per-column mean over non-missing entries; error on fully-missing columns.
    pub fn column_means(&self) -> Result<Vec<f64>> {
        (0..self.num_features())
            .map(|j| {
                let mut sum = 0.0;
                let mut n = 0usize;
                for row in &self.rows {
                    let v = row.features[j];
                    if !v.is_nan() {
                        sum += v;
                        n += 1;
                    }
                }
                if n == 0 {
                    Err(Error::Dataset(format!(
                        "column {:?} has no non-missing values",
                        self.feature_names[j]
                    )))
                } else {
                    Ok(sum / n as f64)
                }
            })
            .collect()
    }

    pub fn has_missing(&self) -> bool {
        self.rows
            .iter()
            .any(|r| r.features.iter().any(|v| v.is_nan()))
    }
}

/// Replace missing cells with column means computed on this table; the
/// returned means must be reused verbatim on held-out data.
pub fn impute_column_means(table: &mut FeatureTable) -> Result<Vec<f64>> {
    let means = table.column_means()?;
    apply_imputation(table, &means);
    Ok(means)
}

/// Fill missing cells with previously computed (training) means.
pub fn apply_imputation(table: &mut FeatureTable, means: &[f64]) {
    for row in &mut table.rows {
        for (v, &m) in row.features.iter_mut().zip(means) {
            if v.is_nan() {
                *v = m;
            }
        }
    }
}

/// Deterministic per-class split. Test size per class = round(count * fraction).
pub fn stratified_split(
    table: &FeatureTable,
    test_fraction: f64,
    seed: u64,
) -> Result<(FeatureTable, FeatureTable)> {
    if !(0.0 < test_fraction && test_fraction < 1.0) {
        return Err(Error::Dataset(format!(
            "test_fraction must be in (0,1), got {test_fraction}"
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, row) in table.rows.iter().enumerate() {
        by_class.entry(row.class).or_default().push(i);
    }
    for (&class, idxs) in &by_class {
        if idxs.len() < 2 {
            return Err(Error::Dataset(format!(
                "class {:?} has {} row(s); need at least 2 to split",
                table.class_names[class],
                idxs.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_idx = Vec::new();
    let mut train_idx = Vec::new();
    for (_, mut idxs) in by_class {
        idxs.shuffle(&mut rng);
        let n_test =
            ((idxs.len() as f64 * test_fraction).round() as usize).clamp(1, idxs.len() - 1);
        test_idx.extend_from_slice(&idxs[..n_test]);
        train_idx.extend_from_slice(&idxs[n_test..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let pick = |idxs: &[usize]| FeatureTable {
        feature_names: table.feature_names.clone(),
        class_names: table.class_names.clone(),
        rows: idxs.iter().map(|&i| table.rows[i].clone()).collect(),
    };
    Ok((pick(&train_idx), pick(&test_idx)))
}

/// Provenance of one synthetic row, for reconstruction checks.
#[derive(Debug, Clone, Serialize)]
pub struct SmoteRecord {
    pub class: usize,
    pub parent_a: Vec<f64>,
    pub parent_b: Vec<f64>,
    pub lambda: f64,
}

#[derive(Debug, Default)]
pub struct BalanceLog {
    pub synthetic: Vec<SmoteRecord>,
    pub target_size: usize,
}

/// SMOTE oversampling of minority classes plus random undersampling of
/// majority classes, to a common target size (default: median class size).
/// Distances are Euclidean in standardized continuous-feature space; a
/// synthetic row's categorical columns copy the nearer parent.
pub fn balance_classes(
    table: &FeatureTable,
    seed: u64,
    k_neighbors: usize,
    target: Option<usize>,
    categorical_columns: &[usize],
) -> Result<(FeatureTable, BalanceLog)> {
    if table.has_missing() {
        return Err(Error::Dataset(
            "balance_classes requires imputed input".into(),
        ));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, row) in table.rows.iter().enumerate() {
        by_class.entry(row.class).or_default().push(i);
    }
    for (&class, idxs) in &by_class {
        if idxs.len() < 2 {
            return Err(Error::Dataset(format!(
                "class {:?} has a single row; SMOTE needs neighbors",
                table.class_names[class]
            )));
        }
    }
    let mut sizes: Vec<usize> = by_class.values().map(|v| v.len()).collect();
    sizes.sort_unstable();
    let target = target.unwrap_or(sizes[sizes.len() / 2]);
    if target == 0 {
        return Err(Error::Dataset("balance target must be positive".into()));
    }

    // standardization for the distance metric only
    let m = table.num_features();
    let continuous: Vec<usize> = (0..m)
        .filter(|j| !categorical_columns.contains(j))
        .collect();
    let mut mean = vec![0.0; m];
    let mut std = vec![1.0; m];
    let n = table.rows.len() as f64;
    for &j in &continuous {
        let col = table.column(j);
        let mu = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
        mean[j] = mu;
        std[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        continuous
            .iter()
            .map(|&j| ((a[j] - b[j]) / std[j]).powi(2))
            .sum::<f64>()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out_rows = Vec::new();
    let mut log = BalanceLog {
        synthetic: Vec::new(),
        target_size: target,
    };
    for (&class, idxs) in &by_class {
        if idxs.len() >= target {
            let mut pool = idxs.clone();
            pool.shuffle(&mut rng);
            let mut kept: Vec<usize> = pool[..target].to_vec();
            kept.sort_unstable();
            out_rows.extend(kept.into_iter().map(|i| table.rows[i].clone()));
        } else {
            out_rows.extend(idxs.iter().map(|&i| table.rows[i].clone()));
            let k = k_neighbors.min(idxs.len() - 1).max(1);
            // brute-force same-class neighbor lists
            let neighbors: Vec<Vec<usize>> = idxs
                .iter()
                .map(|&i| {
                    let mut ds: Vec<(f64, usize)> = idxs
                        .iter()
                        .filter(|&&o| o != i)
                        .map(|&o| (dist(&table.rows[i].features, &table.rows[o].features), o))
                        .collect();
                    ds.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    ds.into_iter().take(k).map(|(_, o)| o).collect()
                })
                .collect();
            for s in 0..target - idxs.len() {
                let pick = rng.gen_range(0..idxs.len());
                let a_idx = idxs[pick];
                let b_idx = neighbors[pick][rng.gen_range(0..neighbors[pick].len())];
                let lambda: f64 = rng.gen_range(0.0..=1.0);
                let a = &table.rows[a_idx].features;
                let b = &table.rows[b_idx].features;
                let mut features: Vec<f64> = a
                    .iter()
                    .zip(b)
                    .map(|(&av, &bv)| av + lambda * (bv - av))
                    .collect();
                for &j in categorical_columns {
                    features[j] = if lambda <= 0.5 { a[j] } else { b[j] };
                }
                log.synthetic.push(SmoteRecord {
                    class,
                    parent_a: a.clone(),
                    parent_b: b.clone(),
                    lambda,
                });
                out_rows.push(FeatureRow {
                    point_id: format!("smote_{class}_{s}"),
                    features,
                    class,
                });
            }
        }
    }
    Ok((
        FeatureTable {
            feature_names: table.feature_names.clone(),
            class_names: table.class_names.clone(),
            rows: out_rows,
        },
        log,
    ))
}

/// Zero-mean unit-variance transform of continuous columns; categorical
/// columns are left untouched. Returns per-column (mean, std) with
/// (0, 1) recorded for categorical columns.
pub fn standardize_features(
    table: &mut FeatureTable,
    categorical_columns: &[usize],
) -> Result<Vec<(f64, f64)>> {
    if table.rows.is_empty() {
        return Err(Error::Dataset("cannot standardize an empty table".into()));
    }
    let m = table.num_features();
    let n = table.rows.len() as f64;
    let mut stats = vec![(0.0, 1.0); m];
    for j in 0..m {
        if categorical_columns.contains(&j) {
            continue;
        }
        let col = table.column(j);
        let mu = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
        if var <= 0.0 {
            return Err(Error::Dataset(format!(
                "column {:?} has zero variance",
                table.feature_names[j]
            )));
        }
        let sd = var.sqrt();
        stats[j] = (mu, sd);
        for row in &mut table.rows {
            row.features[j] = (row.features[j] - mu) / sd;
        }
    }
    Ok(stats)
}

/// Uniform equal-angle grid over accident points, half-open cells
/// [min, min + size) in both axes.
#[derive(Debug, Clone, Serialize)]
pub struct FishnetGrid {
    pub origin_lon: f64,
    pub origin_lat: f64,
    pub cell_size: f64,
    pub cells: BTreeMap<(i64, i64), FishnetCell>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct FishnetCell {
    /// Accident count per class index.
    pub counts: Vec<usize>,
    pub indicator_sums: [f64; 11],
    pub n_points: usize,
}

impl FishnetCell {
    pub fn indicator_means(&self) -> [f64; 11] {
        let mut out = self.indicator_sums;
        if self.n_points > 0 {
            for v in out.iter_mut() {
                *v /= self.n_points as f64;
            }
        }
        out
    }
}

pub fn fishnet_aggregate(
    records: &[AccidentRecord],
    indicators: &BTreeMap<String, IndicatorVector>,
    cell_size: f64,
) -> Result<FishnetGrid> {
    if cell_size <= 0.0 {
        return Err(Error::Dataset(format!(
            "cell_size must be > 0, got {cell_size}"
        )));
    }
    if records.is_empty() {
        return Ok(FishnetGrid {
            origin_lon: 0.0,
            origin_lat: 0.0,
            cell_size,
            cells: BTreeMap::new(),
        });
    }
    let origin_lon = records.iter().map(|r| r.lon).fold(f64::INFINITY, f64::min);
    let origin_lat = records.iter().map(|r| r.lat).fold(f64::INFINITY, f64::min);
    let mut cells: BTreeMap<(i64, i64), FishnetCell> = BTreeMap::new();
    for rec in records {
        let col = ((rec.lon - origin_lon) / cell_size).floor() as i64;
        let row = ((rec.lat - origin_lat) / cell_size).floor() as i64;
        let cell = cells.entry((row, col)).or_insert_with(|| FishnetCell {
            counts: vec![0; ACCIDENT_CLASS_NAMES.len()],
            ..FishnetCell::default()
        });
        cell.counts[rec.accident_class.index()] += 1;
        if let Some(v) = indicators.get(&rec.point_id) {
            for (s, x) in cell.indicator_sums.iter_mut().zip(v.as_array()) {
                *s += x;
            }
            cell.n_points += 1;
        }
    }
    Ok(FishnetGrid {
        origin_lon,
        origin_lat,
        cell_size,
        cells,
    })
}

// ---------------------------------------------------------------------------
// CSV interfaces
// ---------------------------------------------------------------------------

pub fn read_accidents_csv(path: &Path, mapping: &AccidentMapping) -> Result<Vec<AccidentRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for record in reader.deserialize() {
        let raw: RawAccidentRow = record?;
        let class = mapping.reclassify(&raw.raw_type)?;
        if !raw.lon.is_finite() || !raw.lat.is_finite() {
            return Err(Error::Dataset(format!(
                "non-finite coordinates for point {:?}",
                raw.point_id
            )));
        }
        out.push(AccidentRecord {
            point_id: raw.point_id,
            timestamp: raw.timestamp,
            raw_type: raw.raw_type,
            accident_class: class,
            lon: raw.lon,
            lat: raw.lat,
        });
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct RawAccidentRow {
    point_id: String,
    timestamp: String,
    raw_type: String,
    lon: f64,
    lat: f64,
}

pub fn write_accidents_csv(path: &Path, records: &[AccidentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["point_id", "timestamp", "raw_type", "lon", "lat"])?;
    for r in records {
        w.write_record([
            r.point_id.as_str(),
            r.timestamp.as_str(),
            r.raw_type.as_str(),
            &format!("{}", r.lon),
            &format!("{}", r.lat),
        ])?;
    }
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// `point_id, road_category` rows.
pub fn read_roads_csv(path: &Path) -> Result<BTreeMap<String, RoadCategory>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let point_id = record
            .get(0)
            .ok_or_else(|| Error::Dataset("road CSV missing point_id".into()))?;
        let cat_name = record
            .get(1)
            .ok_or_else(|| Error::Dataset("road CSV missing road_category".into()))?;
        let cat = RoadCategory::from_name(cat_name)
            .or_else(|| RoadCategory::from_osm_type(cat_name))
            .ok_or_else(|| Error::Dataset(format!("unknown road category {cat_name:?}")))?;
        out.insert(point_id.to_string(), cat);
    }
    Ok(out)
}

pub fn write_roads_csv(path: &Path, roads: &BTreeMap<String, RoadCategory>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["point_id", "road_category"])?;
    for (pid, cat) in roads {
        w.write_record([pid.as_str(), cat.name()])?;
    }
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Join per-point indicators with road types and accident classes into the
/// 12-feature modeling table. Points missing a road type get a NaN road
/// code (later imputed).
pub fn join_feature_table(
    records: &[AccidentRecord],
    indicators: &BTreeMap<String, IndicatorVector>,
    roads: &BTreeMap<String, RoadCategory>,
) -> Result<FeatureTable> {
    let mut rows = Vec::new();
    for rec in records {
        let Some(v) = indicators.get(&rec.point_id) else {
            continue;
        };
        let mut features: Vec<f64> = v.as_array().to_vec();
        features.push(
            roads
                .get(&rec.point_id)
                .map(|c| f64::from(c.code()))
                .unwrap_or(f64::NAN),
        );
        rows.push(FeatureRow {
            point_id: rec.point_id.clone(),
            features,
            class: rec.accident_class.index(),
        });
    }
    if rows.is_empty() {
        return Err(Error::Dataset(
            "no accident records matched an indicator row".into(),
        ));
    }
    Ok(FeatureTable {
        feature_names: standard_feature_names(),
        class_names: ACCIDENT_CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
        rows,
    })
}

/// Feature CSV: `point_id, <features...>, accident_class`.
pub fn write_feature_csv(path: &Path, table: &FeatureTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["point_id".to_string()];
    header.extend(table.feature_names.iter().cloned());
    header.push("accident_class".to_string());
    w.write_record(&header)?;
    for row in &table.rows {
        let mut rec = vec![row.point_id.clone()];
        rec.extend(row.features.iter().map(|v| {
            if v.is_nan() {
                String::new()
            } else {
                format!("{v}")
            }
        }));
        rec.push(table.class_names[row.class].clone());
        w.write_record(&rec)?;
    }
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_feature_csv(path: &Path) -> Result<FeatureTable> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let ncols = headers.len();
    if ncols < 3 {
        return Err(Error::Dataset(
            "feature CSV needs point_id, features, class".into(),
        ));
    }
    let feature_names: Vec<String> = headers
        .iter()
        .skip(1)
        .take(ncols - 2)
        .map(|s| s.to_string())
        .collect();
    let class_names: Vec<String> = ACCIDENT_CLASS_NAMES.iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let point_id = record.get(0).unwrap_or_default().to_string();
        let mut features = Vec::with_capacity(feature_names.len());
        for j in 1..ncols - 1 {
            let field = record.get(j).unwrap_or_default();
            if field.is_empty() {
                features.push(f64::NAN);
            } else {
                features.push(field.parse::<f64>().map_err(|_| {
                    Error::Dataset(format!("bad numeric field {field:?} in {point_id:?}"))
                })?);
            }
        }
        let class_name = record.get(ncols - 1).unwrap_or_default();
        let class = class_names
            .iter()
            .position(|c| c == class_name)
            .ok_or_else(|| Error::Dataset(format!("unknown class {class_name:?}")))?;
        rows.push(FeatureRow {
            point_id,
            features,
            class,
        });
    }
    Ok(FeatureTable {
        feature_names,
        class_names,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_table(class_sizes: &[usize]) -> FeatureTable {
        let mut rows = Vec::new();
        let mut id = 0;
        for (class, &size) in class_sizes.iter().enumerate() {
            for i in 0..size {
                rows.push(FeatureRow {
                    point_id: format!("p{id}"),
                    features: vec![class as f64 + i as f64 * 0.01, i as f64, 1.0],
                    class,
                });
                id += 1;
            }
        }
        FeatureTable {
            feature_names: vec!["a".into(), "b".into(), ROAD_CODE_COLUMN.into()],
            class_names: (0..class_sizes.len()).map(|c| format!("c{c}")).collect(),
            rows,
        }
    }

    #[test]
    fn reclassification_and_completeness() {
        let mapping = AccidentMapping::default();
        mapping.validate().unwrap();
        assert_eq!(mapping.entries.len(), 18);
        assert_eq!(
            mapping.reclassify("COLLISION").unwrap(),
            AccidentClass::Collision
        );
        assert!(matches!(
            mapping.reclassify("NOT A TYPE"),
            Err(Error::UnmappedAccidentType(_))
        ));
        let mut short = mapping.clone();
        short.entries.remove("COLLISION");
        assert!(short.validate().is_err());
    }

    #[test]
    fn impute_means() {
        let mut table = toy_table(&[3]);
        table.rows[1].features[0] = f64::NAN;
        table.rows[0].features[0] = 1.0;
        table.rows[2].features[0] = 3.0;
        let means = impute_column_means(&mut table).unwrap();
        assert!((means[0] - 2.0).abs() < 1e-12);
        assert!((table.rows[1].features[0] - 2.0).abs() < 1e-12);

        // no missing -> unchanged
        let mut t2 = toy_table(&[3]);
        let before: Vec<Vec<f64>> = t2.rows.iter().map(|r| r.features.clone()).collect();
        impute_column_means(&mut t2).unwrap();
        let after: Vec<Vec<f64>> = t2.rows.iter().map(|r| r.features.clone()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn training_mean_reused_on_test() {
        let mut train = toy_table(&[2]);
        train.rows[0].features[0] = 2.0;
        train.rows[1].features[0] = 4.0;
        let means = impute_column_means(&mut train).unwrap();
        let mut test = toy_table(&[1]);
        test.rows[0].features[0] = f64::NAN;
        apply_imputation(&mut test, &means);
        assert!((test.rows[0].features[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn fully_missing_column_errors() {
        let mut table = toy_table(&[2]);
        for r in &mut table.rows {
            r.features[1] = f64::NAN;
        }
        assert!(impute_column_means(&mut table).is_err());
    }

    #[test]
    fn stratified_split_counts() {
        let table = toy_table(&[20, 20, 20, 20, 20]);
        let (train, test) = stratified_split(&table, 0.2, 7).unwrap();
        assert_eq!(train.rows.len() + test.rows.len(), 100);
        let counts = test.class_counts();
        assert!(counts.iter().all(|&c| c == 4), "{counts:?}");
        // partition: no shared point ids
        let train_ids: std::collections::BTreeSet<_> =
            train.rows.iter().map(|r| r.point_id.clone()).collect();
        assert!(test.rows.iter().all(|r| !train_ids.contains(&r.point_id)));
    }

    #[test]
    fn split_deterministic_and_half() {
        let table = toy_table(&[10, 10]);
        let (tr1, te1) = stratified_split(&table, 0.5, 42).unwrap();
        let (tr2, te2) = stratified_split(&table, 0.5, 42).unwrap();
        let ids = |t: &FeatureTable| {
            t.rows
                .iter()
                .map(|r| r.point_id.clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(ids(&tr1), ids(&tr2));
        assert_eq!(ids(&te1), ids(&te2));
        assert!(te1.class_counts().iter().all(|&c| c == 5));
    }

    #[test]
    fn split_rejects_singleton_class() {
        let table = toy_table(&[5, 1]);
        assert!(stratified_split(&table, 0.2, 1).is_err());
    }

    #[test]
    fn smote_interpolation_identity() {
        // two-point class on the diagonal: synthetics stay on the segment
        let mut table = toy_table(&[4]);
        table.class_names.push("c1".into());
        for (i, f) in [(0.0, 0.0), (1.0, 1.0)] {
            table.rows.push(FeatureRow {
                point_id: format!("d{i}"),
                features: vec![i, f, 0.0],
                class: 1,
            });
        }
        let (balanced, log) = balance_classes(&table, 3, 1, Some(4), &[2]).unwrap();
        let counts = balanced.class_counts();
        assert_eq!(counts, vec![4, 4]);
        for rec in &log.synthetic {
            assert!((0.0..=1.0).contains(&rec.lambda));
        }
        for row in balanced
            .rows
            .iter()
            .filter(|r| r.class == 1 && r.point_id.starts_with("smote"))
        {
            assert!((row.features[0] - row.features[1]).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&row.features[0]));
        }
    }

    #[test]
    fn balance_counts_and_identity() {
        let table = toy_table(&[100, 10]);
        let (balanced, log) = balance_classes(&table, 11, 5, Some(50), &[2]).unwrap();
        assert_eq!(balanced.class_counts(), vec![50, 50]);
        assert_eq!(log.synthetic.len(), 40);
        // independent tally of synthetic vs real rows
        let synth = balanced
            .rows
            .iter()
            .filter(|r| r.point_id.starts_with("smote"))
            .count();
        assert_eq!(synth, 40);

        // already balanced, target = current size -> same multiset of ids
        let even = toy_table(&[8, 8]);
        let (same, log2) = balance_classes(&even, 5, 3, Some(8), &[2]).unwrap();
        assert!(log2.synthetic.is_empty());
        let mut a: Vec<String> = even.rows.iter().map(|r| r.point_id.clone()).collect();
        let mut b: Vec<String> = same.rows.iter().map(|r| r.point_id.clone()).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn smote_synthetic_rows_are_convex_combinations() {
        let table = toy_table(&[30, 6]);
        let (_, log) = balance_classes(&table, 9, 5, Some(20), &[2]).unwrap();
        assert_eq!(log.synthetic.len(), 14);
        for rec in &log.synthetic {
            for j in 0..2 {
                let expect = rec.parent_a[j] + rec.lambda * (rec.parent_b[j] - rec.parent_a[j]);
                let lo = rec.parent_a[j].min(rec.parent_b[j]) - 1e-12;
                let hi = rec.parent_a[j].max(rec.parent_b[j]) + 1e-12;
                assert!(expect >= lo && expect <= hi);
            }
        }
    }

    #[test]
    fn standardize_cases() {
        let mut table = toy_table(&[2]);
        table.rows[0].features[0] = 0.0;
        table.rows[1].features[0] = 2.0;
        let stats = standardize_features(&mut table, &[2]).unwrap();
        assert!((table.rows[0].features[0] + 1.0).abs() < 1e-12);
        assert!((table.rows[1].features[0] - 1.0).abs() < 1e-12);
        assert!((stats[0].0 - 1.0).abs() < 1e-12);
        // categorical column untouched
        assert_eq!(table.rows[0].features[2], 1.0);

        // constant column errors
        let mut bad = toy_table(&[2]);
        bad.rows[0].features[1] = 5.0;
        bad.rows[1].features[1] = 5.0;
        let err = standardize_features(&mut bad, &[2]).unwrap_err();
        assert!(err.to_string().contains('b'), "{err}");
    }

    #[test]
    fn standardize_idempotent_within_tolerance() {
        let mut table = toy_table(&[10]);
        standardize_features(&mut table, &[2]).unwrap();
        let snapshot: Vec<Vec<f64>> = table.rows.iter().map(|r| r.features.clone()).collect();
        standardize_features(&mut table, &[2]).unwrap();
        for (r, s) in table.rows.iter().zip(&snapshot) {
            for (a, b) in r.features.iter().zip(s) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn impute_then_standardize_equals_standardize_on_complete_table() {
        let mut a = toy_table(&[10]);
        let mut b = a.clone();
        impute_column_means(&mut a).unwrap();
        standardize_features(&mut a, &[2]).unwrap();
        standardize_features(&mut b, &[2]).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            for (x, y) in ra.features.iter().zip(&rb.features) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    fn record(pid: &str, lon: f64, lat: f64, class: AccidentClass) -> AccidentRecord {
        AccidentRecord {
            point_id: pid.into(),
            timestamp: "2024-06-01T00:00:00".into(),
            raw_type: "COLLISION".into(),
            accident_class: class,
            lon,
            lat,
        }
    }

    #[test]
    fn fishnet_quadrants() {
        let records = vec![
            record("a", 0.25, 0.25, AccidentClass::Collision),
            record("b", 0.75, 0.25, AccidentClass::Crash),
            record("c", 0.25, 0.75, AccidentClass::Collision),
            record("d", 0.75, 0.75, AccidentClass::Debris),
        ];
        let grid = fishnet_aggregate(&records, &BTreeMap::new(), 0.5).unwrap();
        assert_eq!(grid.cells.len(), 4);
        let total: usize = grid
            .cells
            .values()
            .map(|c| c.counts.iter().sum::<usize>())
            .sum();
        assert_eq!(total, 4);
    }

    #[test]
    fn fishnet_single_cell_and_boundary() {
        let records = vec![
            record("a", 0.1, 0.1, AccidentClass::Collision),
            record("b", 0.2, 0.2, AccidentClass::Collision),
        ];
        let mut indicators = BTreeMap::new();
        indicators.insert("a".to_string(), IndicatorVector::from_array([0.2; 11]));
        indicators.insert("b".to_string(), IndicatorVector::from_array([0.4; 11]));
        let grid = fishnet_aggregate(&records, &indicators, 1.0).unwrap();
        assert_eq!(grid.cells.len(), 1);
        let cell = grid.cells.values().next().unwrap();
        assert_eq!(cell.counts[0], 2);
        assert!((cell.indicator_means()[0] - 0.3).abs() < 1e-12);

        // boundary point goes to the higher-index cell
        let records = vec![
            record("a", 0.0, 0.0, AccidentClass::Collision),
            record("b", 1.0, 0.0, AccidentClass::Collision),
        ];
        let grid = fishnet_aggregate(&records, &BTreeMap::new(), 1.0).unwrap();
        assert!(grid.cells.contains_key(&(0, 0)));
        assert!(grid.cells.contains_key(&(0, 1)));
    }

    #[test]
    fn feature_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let mut table = toy_table(&[3, 3, 2, 2, 2]);
        table.feature_names = vec!["bc".into(), "sor".into(), ROAD_CODE_COLUMN.into()];
        table.class_names = ACCIDENT_CLASS_NAMES.iter().map(|s| s.to_string()).collect();
        table.rows[1].features[0] = f64::NAN;
        write_feature_csv(&path, &table).unwrap();
        let back = read_feature_csv(&path).unwrap();
        assert_eq!(back.feature_names, table.feature_names);
        assert_eq!(back.rows.len(), table.rows.len());
        assert!(back.rows[1].features[0].is_nan());
        assert_eq!(back.rows[4].class, table.rows[4].class);
    }

    #[test]
    fn road_table_bijection() {
        for code in 0..4u8 {
            let cat = RoadCategory::from_code(code).unwrap();
            assert_eq!(cat.code(), code);
            assert_eq!(RoadCategory::from_name(cat.name()), Some(cat));
        }
        assert_eq!(
            RoadCategory::from_osm_type("footway"),
            Some(RoadCategory::Path)
        );
        assert_eq!(
            RoadCategory::from_osm_type("motorway"),
            Some(RoadCategory::PrincipalTag)
        );
        assert_eq!(RoadCategory::from_osm_type("waterway"), None);
    }
}
