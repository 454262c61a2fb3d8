//! Synthetic data generators with known ground truth: block-composed label
//! masks whose indicator values are computable in closed form, confounded
//! treatment/outcome samples with known effect sizes, and a full synthetic
//! city directory for end-to-end runs.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{
    write_accidents_csv, write_roads_csv, AccidentClass, AccidentMapping, AccidentRecord,
    FeatureRow, FeatureTable, RoadCategory,
};
use crate::indicators::{aggregate_views, IndicatorConfig, IndicatorVector};
use crate::mask::{save_mask, LabelMask, VALID_HEADINGS};
use crate::schema::{CategorySchema, Role};
use crate::{Error, Result};

/// A mask built from full-width horizontal bands plus small planted
/// rectangles, so every indicator has a closed-form expected value.
#[derive(Debug, Clone)]
pub struct SceneRecipe {
    pub width: u32,
    pub height: u32,
    /// (class id, fraction of rows) painted top-down; remaining rows are
    /// road. Band classes must not belong to the obstacle role set.
    pub bands: Vec<(u8, f64)>,
    /// Pole blocks planted inside the road band.
    pub obstacle_blocks: usize,
    pub block_size: u32,
    /// Traffic-sign squares planted inside the road band.
    pub sign_squares: usize,
    pub sign_size: u32,
}

impl Default for SceneRecipe {
    fn default() -> Self {
        SceneRecipe {
            width: 64,
            height: 64,
            bands: vec![(10, 0.25), (2, 0.125), (8, 0.125), (1, 0.125)],
            obstacle_blocks: 2,
            block_size: 4,
            sign_squares: 1,
            sign_size: 6,
        }
    }
}

/// A painted axis-aligned rectangle: class plus half-open pixel bounds.
#[derive(Debug, Clone, Copy)]
struct Rect {
    class: u8,
    x0: u32,
    x1: u32,
    y0: u32,
    y1: u32,
}

impl Rect {
    fn area(&self) -> u64 {
        u64::from(self.x1 - self.x0) * u64::from(self.y1 - self.y0)
    }

    fn intersect_area(&self, x0: u32, x1: u32, y0: u32, y1: u32) -> u64 {
        let w = self.x1.min(x1).saturating_sub(self.x0.max(x0));
        let h = self.y1.min(y1).saturating_sub(self.y0.max(y0));
        u64::from(w) * u64::from(h)
    }
}

pub struct SceneOracle {
    pub mask: LabelMask,
    pub expected: IndicatorVector,
    /// Planted connected components in the obstacle role set.
    pub planted_components: usize,
}

/// Build a mask from a recipe and compute its expected indicator vector
/// arithmetically from the painted rectangles, without scanning pixels.
pub fn gen_scene(
    recipe: &SceneRecipe,
    schema: &CategorySchema,
    cfg: &IndicatorConfig,
) -> Result<SceneOracle> {
    let (w, h) = (recipe.width, recipe.height);
    if w == 0 || h == 0 {
        return Err(Error::Synth("scene dimensions must be positive".into()));
    }
    let obstacle = cfg.role_set(schema, Role::Obstacle);
    let class = |name: &str| {
        schema
            .class_id(name)
            .ok_or_else(|| Error::Synth(format!("schema lacks a {name:?} class")))
    };
    let road_class = class("road")?;
    let sign_class = class("traffic sign")?;
    let pole_class = class("pole")?;

    // resolve bands to whole rows, top-down
    let mut rects: Vec<Rect> = Vec::new();
    let mut y = 0u32;
    let mut seen = std::collections::BTreeSet::new();
    for &(class, fraction) in &recipe.bands {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::Synth(format!(
                "band fraction {fraction} out of [0, 1]"
            )));
        }
        if obstacle.contains(&class) || class == sign_class || class == road_class {
            return Err(Error::Synth(format!(
                "band class {class} conflicts with planted or filler classes"
            )));
        }
        if !seen.insert(class) {
            return Err(Error::Synth(format!("duplicate band class {class}")));
        }
        let rows = (fraction * h as f64).round() as u32;
        if y + rows > h {
            return Err(Error::Synth("band fractions exceed the mask height".into()));
        }
        if rows > 0 {
            rects.push(Rect {
                class,
                x0: 0,
                x1: w,
                y0: y,
                y1: y + rows,
            });
            y += rows;
        }
    }
    let road_y0 = y;
    if road_y0 >= h {
        return Err(Error::Synth("no rows left for the road band".into()));
    }
    let road = Rect {
        class: road_class,
        x0: 0,
        x1: w,
        y0: road_y0,
        y1: h,
    };

    // plant pole blocks and sign squares on one shared grid inside the road
    // band, leaving at least a 1px road margin around every rectangle so
    // each one is its own connected component even under 8-connectivity
    let mut slots: Vec<(u32, u8)> = Vec::new(); // (size, class)
    for spec in [
        (recipe.obstacle_blocks, recipe.block_size, pole_class),
        (recipe.sign_squares, recipe.sign_size, sign_class),
    ] {
        let (count, size, class) = spec;
        if count == 0 {
            continue;
        }
        if size == 0 || u64::from(size) * u64::from(size) < cfg.min_component_px as u64 {
            return Err(Error::Synth(format!(
                "planted rectangles of size {size} fall below the component floor"
            )));
        }
        slots.extend(std::iter::repeat((size, class)).take(count));
    }
    let mut planted: Vec<Rect> = Vec::new();
    if !slots.is_empty() {
        let cell = slots.iter().map(|&(s, _)| s).max().expect("non-empty") + 2;
        let per_row = (w.saturating_sub(1)) / cell;
        if per_row == 0 {
            return Err(Error::Synth(
                "mask too narrow for planted rectangles".into(),
            ));
        }
        for (i, &(size, class)) in slots.iter().enumerate() {
            let gx = i as u32 % per_row;
            let gy = i as u32 / per_row;
            let x0 = 1 + gx * cell;
            let y0 = road_y0 + 1 + gy * cell;
            if x0 + size + 1 > w || y0 + size + 1 > h {
                return Err(Error::Synth(
                    "road band too small for the requested planted rectangles".into(),
                ));
            }
            planted.push(Rect {
                class,
                x0,
                x1: x0 + size,
                y0,
                y1: y0 + size,
            });
        }
    }

    // paint
    let mut data = vec![road_class; (w * h) as usize];
    for r in rects.iter().chain(&planted) {
        for yy in r.y0..r.y1 {
            for xx in r.x0..r.x1 {
                data[(yy * w + xx) as usize] = r.class;
            }
        }
    }
    let mask = LabelMask::new(w, h, data, VALID_HEADINGS[0], "synthetic", schema)?;

    // closed-form class pixel counts
    let total = u64::from(w) * u64::from(h);
    let mut counts: BTreeMap<u8, u64> = BTreeMap::new();
    for r in &rects {
        *counts.entry(r.class).or_insert(0) += r.area();
    }
    let mut planted_px = 0u64;
    for r in &planted {
        *counts.entry(r.class).or_insert(0) += r.area();
        planted_px += r.area();
    }
    *counts.entry(road_class).or_insert(0) += road.area() - planted_px;
    counts.retain(|_, &mut c| c > 0);

    let set_ratio = |set: &std::collections::BTreeSet<u8>| -> f64 {
        let px: u64 = counts
            .iter()
            .filter(|(c, _)| set.contains(c))
            .map(|(_, &n)| n)
            .sum();
        px as f64 / total as f64
    };
    let ratio = |role: Role| set_ratio(&cfg.role_set(schema, role));

    // entropy over present classes, normalized by ln(N)
    let n_present = counts.len();
    let bc = if n_present <= 1 {
        0.0
    } else {
        let mut e = 0.0;
        for &c in counts.values() {
            let p = c as f64 / total as f64;
            e -= p * p.ln();
        }
        e / (n_present as f64).ln()
    };

    // center-region pixel bounds, same floor/ceil convention as extraction
    let cr = &cfg.center_region;
    let cx0 = (cr.x0 * w as f64).floor() as u32;
    let cx1 = (cr.x1 * w as f64).ceil().min(w as f64) as u32;
    let cy0 = (cr.y0 * h as f64).floor() as u32;
    let cy1 = (cr.y1 * h as f64).ceil().min(h as f64) as u32;
    let center_px = u64::from(cx1 - cx0) * u64::from(cy1 - cy0);
    let obstruction = cfg.role_set(schema, Role::Obstruction);
    let mut obstructed = 0u64;
    for r in rects.iter().chain(&planted) {
        if obstruction.contains(&r.class) {
            obstructed += r.intersect_area(cx0, cx1, cy0, cy1);
        }
    }
    let sor = obstructed as f64 / center_px as f64;

    let vod = planted.len() as f64 / (total as f64 / 10_000.0);
    // squares: circularity 4*pi*s^2 / (4s)^2 = pi/4 regardless of size
    let tsi = if recipe.sign_squares > 0 {
        (std::f64::consts::PI / 4.0).min(1.0)
    } else {
        0.0
    };

    let expected = IndicatorVector {
        bc,
        sor,
        bor: ratio(Role::Building),
        vod,
        vo: {
            let mut sky_terrain = cfg.role_set(schema, Role::Sky);
            sky_terrain.extend(cfg.role_set(schema, Role::Terrain));
            set_ratio(&sky_terrain)
        },
        dar: ratio(Role::Road),
        es: ratio(Role::Escape),
        sr: ratio(Role::Sidewalk),
        vc: ratio(Role::Vegetation),
        tsi,
        vd: ratio(Role::Vehicle),
    };
    Ok(SceneOracle {
        mask,
        expected,
        planted_components: planted.len(),
    })
}

/// Draw a randomized but feasible recipe.
pub fn random_recipe(rng: &mut ChaCha8Rng) -> SceneRecipe {
    // band classes drawn from non-obstacle, non-sign, non-road classes
    let pool: [u8; 6] = [1, 2, 8, 9, 10, 13]; // sidewalk, building, vegetation, terrain, sky, car
    let n_bands = rng.gen_range(1..=4);
    let mut order: Vec<u8> = pool.to_vec();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut bands = Vec::new();
    let mut budget = 0.5f64; // keep at least half the rows for road
    for &class in order.iter().take(n_bands) {
        let f = rng.gen_range(0.05..=budget.max(0.051)).min(budget);
        if f >= 0.05 {
            bands.push((class, (f * 16.0).round() / 16.0));
            budget -= bands.last().unwrap().1;
        }
    }
    SceneRecipe {
        width: 64,
        height: 64,
        bands,
        obstacle_blocks: rng.gen_range(0..=4),
        block_size: 3,
        sign_squares: rng.gen_range(0..=2),
        sign_size: rng.gen_range(4..=8),
    }
}

#[derive(Debug, Clone)]
pub struct ConfoundedSpec {
    pub n: usize,
    /// Confounder loading on the treatment: Z = a*U + eps.
    pub a: f64,
    /// Confounder loading on the outcome logit.
    pub gamma: f64,
    pub beta0: f64,
    /// Log odds ratio per standard deviation of treatment; the target.
    pub beta1: f64,
    pub seed: u64,
}

impl Default for ConfoundedSpec {
    fn default() -> Self {
        ConfoundedSpec {
            n: 5000,
            a: 1.2,
            gamma: 0.7,
            beta0: -1.0,
            beta1: 0.5,
            seed: 0,
        }
    }
}

pub struct ConfoundedSample {
    pub table: FeatureTable,
    pub true_odds_ratio: f64,
    pub treatment_column: usize,
}

/// Treatment Z = a*U + eps with confounder U ~ N(0,1); outcome
/// Y ~ Bernoulli(expit(beta0 + beta1 * Z_std + gamma * U)). Z is
/// standardized by its theoretical scale sqrt(a^2 + 1) in the outcome
/// model, so exp(beta1) is the true per-SD odds ratio. U appears among the
/// covariates; adjustment is possible, ignoring it is biased.
pub fn gen_confounded_sample(spec: &ConfoundedSpec) -> Result<ConfoundedSample> {
    if spec.n < 10 {
        return Err(Error::Synth("need at least 10 samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let z_scale = (spec.a * spec.a + 1.0).sqrt();
    let mut rows = Vec::with_capacity(spec.n);
    let mut events = 0usize;
    for i in 0..spec.n {
        let u: f64 = std_normal.sample(&mut rng);
        let eps: f64 = std_normal.sample(&mut rng);
        let z = spec.a * u + eps;
        let noise1: f64 = std_normal.sample(&mut rng);
        let noise2: f64 = std_normal.sample(&mut rng);
        let logit = spec.beta0 + spec.beta1 * (z / z_scale) + spec.gamma * u;
        let p = 1.0 / (1.0 + (-logit).exp());
        let y = rng.gen_bool(p.clamp(1e-12, 1.0 - 1e-12));
        if y {
            events += 1;
        }
        rows.push(FeatureRow {
            point_id: format!("s{i:05}"),
            features: vec![z, u, noise1, noise2],
            class: y as usize,
        });
    }
    if events < 5 || spec.n - events < 5 {
        return Err(Error::Synth(format!(
            "degenerate outcome: {events} events of {}",
            spec.n
        )));
    }
    Ok(ConfoundedSample {
        table: FeatureTable {
            feature_names: vec!["z".into(), "u".into(), "n1".into(), "n2".into()],
            class_names: vec!["none".into(), "event".into()],
            rows,
        },
        true_odds_ratio: spec.beta1.exp(),
        treatment_column: 0,
    })
}

/// Unconfounded logistic sample: (outcomes, standardized treatment).
pub fn gen_logistic_sample(beta0: f64, beta1: f64, n: usize, seed: u64) -> (Vec<bool>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for _ in 0..n {
        let zi: f64 = std_normal.sample(&mut rng);
        let p = 1.0 / (1.0 + (-(beta0 + beta1 * zi)).exp());
        y.push(rng.gen_bool(p.clamp(1e-12, 1.0 - 1e-12)));
        z.push(zi);
    }
    (y, z)
}

pub struct SyntheticCity {
    pub n_points: usize,
    pub n_masks: usize,
    pub n_accidents: usize,
    pub n_roads: usize,
}

/// Write a complete input directory: four-heading mask PNGs per point, an
/// accident CSV, a road CSV, the category schema, and the accident-type
/// mapping. Accident types depend on scene composition through a logistic
/// model, so the downstream classifier has real signal to find.
pub fn generate_city(dir: &Path, n_points: usize, seed: u64) -> Result<SyntheticCity> {
    if n_points == 0 {
        return Err(Error::Synth("need at least one point".into()));
    }
    let schema = CategorySchema::default();
    let cfg = IndicatorConfig::default();
    let masks_dir = dir.join("masks");
    std::fs::create_dir_all(&masks_dir)
        .map_err(|e| Error::io(masks_dir.display().to_string(), e))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mapping = AccidentMapping::default();
    // raw categories grouped by the class they map to
    let mut by_class: Vec<Vec<&str>> = vec![Vec::new(); 5];
    for (raw, &class) in &mapping.entries {
        by_class[class.index()].push(raw.as_str());
    }
    if by_class.iter().any(Vec::is_empty) {
        return Err(Error::Synth("accident mapping misses a class".into()));
    }
    let road_levels = [
        RoadCategory::Path,
        RoadCategory::Linkroad,
        RoadCategory::Specialroad,
        RoadCategory::PrincipalTag,
    ];

    let mut accidents = Vec::new();
    let mut roads = BTreeMap::new();
    let mut n_masks = 0usize;

    for i in 0..n_points {
        let point_id = format!("p{i:05}");
        let lon = -122.5 + 0.2 * rng.gen::<f64>();
        let lat = 37.6 + 0.2 * rng.gen::<f64>();
        let mut views = Vec::new();
        for &heading in &VALID_HEADINGS {
            let recipe = random_recipe(&mut rng);
            let scene = gen_scene(&recipe, &schema, &cfg)?;
            let mut mask = scene.mask;
            mask.view_heading = heading;
            mask.point_id = point_id.clone();
            let path = masks_dir.join(format!("{point_id}_{heading}.png"));
            save_mask(&mask, &path)?;
            n_masks += 1;
            views.push(scene.expected);
        }
        let m = aggregate_views(&views)?;

        // class probabilities depend on the scene: vehicle-heavy scenes
        // lean Collision, obstructed scenes lean Crash, and so on; vod is
        // per 10000 px and runs an order of magnitude above the ratios
        let logits = [
            4.0 * m.vd + 2.0 * m.dar,
            5.0 * m.sor + 2.0 * m.bor,
            4.0 * m.sr + 2.0 * m.es,
            0.2 * m.vod + 1.0 * m.bc,
            3.0 * m.vo + 2.0 * m.vc,
        ];
        let mean = logits.iter().sum::<f64>() / logits.len() as f64;
        let exps: Vec<f64> = logits.iter().map(|l| ((l - mean) * 2.0).exp()).collect();
        let total: f64 = exps.iter().sum();
        // mix with a uniform floor so every class stays represented
        let probs: Vec<f64> = exps.iter().map(|e| 0.75 * e / total + 0.25 / 5.0).collect();
        let draw: f64 = rng.gen::<f64>();
        let mut cum = 0.0;
        let mut class = AccidentClass::from_index(4).expect("class 4 exists");
        for (k, p) in probs.iter().enumerate() {
            cum += p;
            if draw <= cum {
                class = AccidentClass::from_index(k).expect("k < 5");
                break;
            }
        }
        let raws = &by_class[class.index()];
        let raw = raws[rng.gen_range(0..raws.len())];
        accidents.push(AccidentRecord {
            point_id: point_id.clone(),
            timestamp: format!("2024-01-{:02}T{:02}:00:00", 1 + i % 28, i % 24),
            raw_type: raw.to_string(),
            accident_class: class,
            lon,
            lat,
        });
        // road category loosely follows drivable-area share
        let bias = if m.dar > 0.6 { 2 } else { 0 };
        let cat = road_levels[(rng.gen_range(0..road_levels.len()) + bias) % road_levels.len()];
        roads.insert(point_id, cat);
    }

    write_accidents_csv(&dir.join("accidents.csv"), &accidents)?;
    write_roads_csv(&dir.join("roads.csv"), &roads)?;
    schema.save(&dir.join("schema.json"))?;
    mapping.save(&dir.join("mapping.json"))?;
    Ok(SyntheticCity {
        n_points,
        n_masks,
        n_accidents: accidents.len(),
        n_roads: roads.len(),
    })
}
