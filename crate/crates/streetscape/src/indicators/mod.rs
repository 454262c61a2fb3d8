//! The eleven streetscape indicators computed from a label mask.
//!
//! Ratio indicators are pixel-share fractions over named role sets.
//! Background complexity is normalized Shannon entropy over the classes
//! present. Visible obstacle density and traffic sign integrity are built
//! on connected components.

pub mod components;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::mask::LabelMask;
use crate::schema::{CategorySchema, Role};
use crate::{Error, Result};

pub use components::{connected_components, Component};

/// Fractional rectangle in [0,1] image coordinates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct CenterRegion {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct IndicatorConfig {
    pub center_region: CenterRegion,
    /// 4 or 8.
    pub connectivity: u8,
    pub min_component_px: usize,
    /// Optional role-set overrides; unlisted roles use the schema's sets.
    pub role_overrides: Vec<(Role, BTreeSet<u8>)>,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        IndicatorConfig {
            // forward sightline band: central half in x, lower two thirds in y
            center_region: CenterRegion {
                x0: 0.25,
                x1: 0.75,
                y0: 1.0 / 3.0,
                y1: 1.0,
            },
            connectivity: 4,
            min_component_px: 5,
            role_overrides: Vec::new(),
        }
    }
}

impl IndicatorConfig {
    pub fn validate(&self) -> Result<()> {
        let r = &self.center_region;
        if !(0.0..=1.0).contains(&r.x0)
            || !(0.0..=1.0).contains(&r.x1)
            || !(0.0..=1.0).contains(&r.y0)
            || !(0.0..=1.0).contains(&r.y1)
            || r.x0 >= r.x1
            || r.y0 >= r.y1
        {
            return Err(Error::IndicatorConfig(format!(
                "center region must satisfy 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1, got {r:?}"
            )));
        }
        if self.connectivity != 4 && self.connectivity != 8 {
            return Err(Error::IndicatorConfig(format!(
                "connectivity must be 4 or 8, got {}",
                self.connectivity
            )));
        }
        if self.min_component_px == 0 {
            return Err(Error::IndicatorConfig(
                "min_component_px must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Effective role set, honouring overrides.
    pub fn role_set(&self, schema: &CategorySchema, role: Role) -> BTreeSet<u8> {
        self.role_overrides
            .iter()
            .find(|(r, _)| *r == role)
            .map(|(_, ids)| ids.clone())
            .unwrap_or_else(|| schema.role_set(role))
    }
}

/// The eleven per-view indicators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorVector {
    /// Background complexity: normalized entropy over present classes.
    pub bc: f64,
    /// Sight obstruction risk: obstruction share of the center region.
    pub sor: f64,
    /// Building obstruction ratio.
    pub bor: f64,
    /// Visible obstacle density: components per 10000 px.
    pub vod: f64,
    /// Visual openness: sky + terrain share.
    pub vo: f64,
    /// Drivable area ratio.
    pub dar: f64,
    /// Emergency space: escape-role share.
    pub es: f64,
    /// Sidewalk ratio.
    pub sr: f64,
    /// Vegetation coverage.
    pub vc: f64,
    /// Traffic sign integrity: mean circularity of sign components.
    pub tsi: f64,
    /// Vehicle density: vehicle pixel share.
    pub vd: f64,
}

pub const INDICATOR_NAMES: [&str; 11] = [
    "bc", "sor", "bor", "vod", "vo", "dar", "es", "sr", "vc", "tsi", "vd",
];

impl IndicatorVector {
    pub fn as_array(&self) -> [f64; 11] {
        [
            self.bc, self.sor, self.bor, self.vod, self.vo, self.dar, self.es, self.sr, self.vc,
            self.tsi, self.vd,
        ]
    }

    pub fn from_array(v: [f64; 11]) -> Self {
        IndicatorVector {
            bc: v[0],
            sor: v[1],
            bor: v[2],
            vod: v[3],
            vo: v[4],
            dar: v[5],
            es: v[6],
            sr: v[7],
            vc: v[8],
            tsi: v[9],
            vd: v[10],
        }
    }
}

/// Fraction of total pixels per class id; absent classes report 0.
pub fn class_proportions(mask: &LabelMask, schema: &CategorySchema) -> Vec<f64> {
    let total = mask.total_pixels() as f64;
    mask.class_counts(schema.num_classes())
        .into_iter()
        .map(|c| c as f64 / total)
        .collect()
}

/// Pixel share of the union of the given class ids.
pub fn class_ratio(mask: &LabelMask, roles: &BTreeSet<u8>) -> f64 {
    let hits = mask.data.iter().filter(|id| roles.contains(id)).count();
    hits as f64 / mask.total_pixels() as f64
}

/// Normalized Shannon entropy over classes present; 0 for a single class.
pub fn background_complexity(mask: &LabelMask, schema: &CategorySchema) -> f64 {
    let proportions = class_proportions(mask, schema);
    let present: Vec<f64> = proportions.into_iter().filter(|&p| p > 0.0).collect();
    normalized_entropy(&present)
}

/// −Σ p ln p / ln N over strictly positive proportions.
pub fn normalized_entropy(present: &[f64]) -> f64 {
    let n = present.len();
    if n <= 1 {
        return 0.0;
    }
    let entropy: f64 = present.iter().map(|&p| -p * p.ln()).sum();
    entropy / (n as f64).ln()
}

/// Pixel bounds of the fractional center region, half-open in both axes.
fn center_bounds(mask: &LabelMask, region: &CenterRegion) -> Result<(u32, u32, u32, u32)> {
    let x0 = (region.x0 * mask.width as f64).floor() as u32;
    let x1 = ((region.x1 * mask.width as f64).ceil() as u32).min(mask.width);
    let y0 = (region.y0 * mask.height as f64).floor() as u32;
    let y1 = ((region.y1 * mask.height as f64).ceil() as u32).min(mask.height);
    if x0 >= x1 || y0 >= y1 {
        return Err(Error::EmptyCenterRegion);
    }
    Ok((x0, x1, y0, y1))
}

/// Obstruction-class share of the center region.
pub fn sight_obstruction_risk(
    mask: &LabelMask,
    schema: &CategorySchema,
    cfg: &IndicatorConfig,
) -> Result<f64> {
    let roles = cfg.role_set(schema, Role::Obstruction);
    let (x0, x1, y0, y1) = center_bounds(mask, &cfg.center_region)?;
    let mut hits = 0usize;
    let mut total = 0usize;
    for y in y0..y1 {
        for x in x0..x1 {
            total += 1;
            if roles.contains(&mask.class_at(x, y)) {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / total as f64)
}

/// Obstacle component count per 10000 px of image area.
pub fn visible_obstacle_density(
    mask: &LabelMask,
    schema: &CategorySchema,
    cfg: &IndicatorConfig,
) -> f64 {
    let roles = cfg.role_set(schema, Role::Obstacle);
    let count = connected_components(mask, &roles, cfg).len();
    let area = mask.total_pixels() as f64;
    count as f64 / (area / 10000.0)
}

/// Mean circularity 4πA/P² over traffic-sign components, each term clamped
/// to [0,1]; 0 when no sign components exist.
pub fn traffic_sign_integrity(
    mask: &LabelMask,
    schema: &CategorySchema,
    cfg: &IndicatorConfig,
) -> f64 {
    let roles = cfg.role_set(schema, Role::TrafficSign);
    let comps = connected_components(mask, &roles, cfg);
    if comps.is_empty() {
        return 0.0;
    }
    let sum: f64 = comps
        .iter()
        .map(|c| {
            let circ = 4.0 * std::f64::consts::PI * c.area as f64
                / (c.perimeter as f64 * c.perimeter as f64);
            circ.clamp(0.0, 1.0)
        })
        .sum();
    sum / comps.len() as f64
}

/// All eleven indicators for one view.
pub fn compute_indicators(
    mask: &LabelMask,
    schema: &CategorySchema,
    cfg: &IndicatorConfig,
) -> Result<IndicatorVector> {
    cfg.validate()?;
    let ratio = |role: Role| class_ratio(mask, &cfg.role_set(schema, role));
    Ok(IndicatorVector {
        bc: background_complexity(mask, schema),
        sor: sight_obstruction_risk(mask, schema, cfg)?,
        bor: ratio(Role::Building),
        vod: visible_obstacle_density(mask, schema, cfg),
        vo: {
            let mut sky_terrain = cfg.role_set(schema, Role::Sky);
            sky_terrain.extend(cfg.role_set(schema, Role::Terrain));
            class_ratio(mask, &sky_terrain)
        },
        dar: ratio(Role::Road),
        es: ratio(Role::Escape),
        sr: ratio(Role::Sidewalk),
        vc: ratio(Role::Vegetation),
        tsi: traffic_sign_integrity(mask, schema, cfg),
        vd: ratio(Role::Vehicle),
    })
}

/// Per-field arithmetic mean over the views of one point.
pub fn aggregate_views(vectors: &[IndicatorVector]) -> Result<IndicatorVector> {
    if vectors.is_empty() {
        return Err(Error::Mask("cannot aggregate zero views".into()));
    }
    let n = vectors.len() as f64;
    let mut acc = [0.0f64; 11];
    for v in vectors {
        for (a, x) in acc.iter_mut().zip(v.as_array()) {
            *a += x;
        }
    }
    for a in acc.iter_mut() {
        *a /= n;
    }
    Ok(IndicatorVector::from_array(acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::LabelMask;
    use proptest::prelude::*;

    fn schema() -> CategorySchema {
        CategorySchema::default()
    }

    fn uniform_mask(id: u8, w: u32, h: u32) -> LabelMask {
        LabelMask::new(w, h, vec![id; (w * h) as usize], 0, "t", &schema()).unwrap()
    }

    #[test]
    fn proportions_sum_to_one() {
        let mask = LabelMask::new(4, 1, vec![0, 1, 10, 10], 0, "t", &schema()).unwrap();
        let p = class_proportions(&mask, &schema());
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(p[10], 0.5);
    }

    #[test]
    fn proportions_70_20_10() {
        let mut data = Vec::with_capacity(10_000);
        data.extend(std::iter::repeat(0u8).take(7000));
        data.extend(std::iter::repeat(1u8).take(2000));
        data.extend(std::iter::repeat(2u8).take(1000));
        let mask = LabelMask::new(100, 100, data, 0, "t", &schema()).unwrap();
        let p = class_proportions(&mask, &schema());
        assert!((p[0] - 0.70).abs() < 1e-12);
        assert!((p[1] - 0.20).abs() < 1e-12);
        assert!((p[2] - 0.10).abs() < 1e-12);
    }

    #[test]
    fn ratio_cases() {
        // 30% sky + 10% terrain -> vo = 0.4
        let mut data = vec![0u8; 100];
        for v in data.iter_mut().take(30) {
            *v = 10;
        }
        for v in data.iter_mut().skip(30).take(10) {
            *v = 9;
        }
        let mask = LabelMask::new(10, 10, data, 0, "t", &schema()).unwrap();
        let s = schema();
        let mut sky_terrain = s.role_set(Role::Sky);
        sky_terrain.extend(s.role_set(Role::Terrain));
        assert!((class_ratio(&mask, &sky_terrain) - 0.4).abs() < 1e-12);

        let road = uniform_mask(0, 10, 10);
        assert_eq!(class_ratio(&road, &s.role_set(Role::Road)), 1.0);
        assert_eq!(class_ratio(&road, &s.role_set(Role::Vegetation)), 0.0);
    }

    #[test]
    fn entropy_guards() {
        assert_eq!(
            background_complexity(&uniform_mask(3, 5, 5), &schema()),
            0.0
        );
        // 50/50 two classes is maximal
        let mask = LabelMask::new(2, 1, vec![0, 1], 0, "t", &schema()).unwrap();
        assert!((background_complexity(&mask, &schema()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_70_20_10_matches_independent_value() {
        // frozen from -sum(p ln p)/ln 3 evaluated independently
        let expected = {
            let ps = [0.7f64, 0.2, 0.1];
            ps.iter().map(|p| -p * p.ln()).sum::<f64>() / 3f64.ln()
        };
        assert!((expected - 0.7299).abs() < 1e-4);
        let mut data = Vec::new();
        data.extend(std::iter::repeat(0u8).take(7000));
        data.extend(std::iter::repeat(1u8).take(2000));
        data.extend(std::iter::repeat(2u8).take(1000));
        let mask = LabelMask::new(100, 100, data, 0, "t", &schema()).unwrap();
        assert!((background_complexity(&mask, &schema()) - expected).abs() < 1e-12);
    }

    #[test]
    fn sor_full_and_empty() {
        let cfg = IndicatorConfig::default();
        // all building -> 1.0
        assert_eq!(
            sight_obstruction_risk(&uniform_mask(2, 12, 12), &schema(), &cfg).unwrap(),
            1.0
        );
        // all road -> 0.0
        assert_eq!(
            sight_obstruction_risk(&uniform_mask(0, 12, 12), &schema(), &cfg).unwrap(),
            0.0
        );
    }

    #[test]
    fn sor_half_vegetation_center() {
        // default center of a 100x100 mask: x 25..75, y 33..100
        let cfg = IndicatorConfig::default();
        let mut data = vec![0u8; 100 * 100];
        // vegetation in x 25..50, half the region width
        for y in 33..100 {
            for x in 25..50 {
                data[y * 100 + x] = 8;
            }
        }
        let mask = LabelMask::new(100, 100, data, 0, "t", &schema()).unwrap();
        // independent hand count
        let roles = cfg.role_set(&schema(), Role::Obstruction);
        let mut hits = 0usize;
        let mut total = 0usize;
        for y in 33..100u32 {
            for x in 25..75u32 {
                total += 1;
                if roles.contains(&mask.class_at(x, y)) {
                    hits += 1;
                }
            }
        }
        let expected = hits as f64 / total as f64;
        assert!((expected - 0.5).abs() < 1e-12);
        let got = sight_obstruction_risk(&mask, &schema(), &cfg).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn degenerate_center_region_errors() {
        let bad = IndicatorConfig {
            center_region: CenterRegion {
                x0: 0.6,
                x1: 0.4,
                y0: 0.0,
                y1: 1.0,
            },
            ..IndicatorConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(compute_indicators(&uniform_mask(0, 4, 4), &schema(), &bad).is_err());
    }

    #[test]
    fn label_permutation_invariance() {
        // permute ids via a fixed bijection, permute role sets identically
        let perm: Vec<u8> = (0..19u8).map(|i| (i + 7) % 19).collect();
        let s = schema();
        let permuted_roles: Vec<(Role, BTreeSet<u8>)> = s
            .role_sets
            .iter()
            .map(|(r, ids)| (*r, ids.iter().map(|&i| perm[i as usize]).collect()))
            .collect();
        let s2 = CategorySchema::new(s.classes.clone(), permuted_roles).unwrap();
        let mut data = vec![0u8; 64 * 64];
        for (i, v) in data.iter_mut().enumerate() {
            *v = ((i * 7 + i / 64) % 19) as u8;
        }
        let mask = LabelMask::new(64, 64, data.clone(), 0, "t", &s).unwrap();
        let data2: Vec<u8> = data.iter().map(|&i| perm[i as usize]).collect();
        let mask2 = LabelMask::new(64, 64, data2, 0, "t", &s2).unwrap();
        let cfg = IndicatorConfig::default();
        let a = compute_indicators(&mask, &s, &cfg).unwrap();
        let b = compute_indicators(&mask2, &s2, &cfg).unwrap();
        // entropy sums in class-id order, so allow the last few ulps
        for (x, y) in a.as_array().iter().zip(b.as_array()) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn vod_arithmetic() {
        let cfg = IndicatorConfig {
            min_component_px: 1,
            ..IndicatorConfig::default()
        };
        // 100x100 with 3 pole blocks
        let mut data = vec![0u8; 100 * 100];
        for (bx, by) in [(0, 0), (20, 20), (40, 40)] {
            for y in 0..3 {
                for x in 0..3 {
                    data[(by + y) * 100 + bx + x] = 5;
                }
            }
        }
        let mask = LabelMask::new(100, 100, data, 0, "t", &schema()).unwrap();
        assert!((visible_obstacle_density(&mask, &schema(), &cfg) - 3.0).abs() < 1e-12);
        assert_eq!(
            visible_obstacle_density(&uniform_mask(0, 200, 200), &schema(), &cfg),
            0.0
        );
    }

    #[test]
    fn tsi_square_sign() {
        let cfg = IndicatorConfig::default();
        let mut data = vec![0u8; 50 * 50];
        for y in 10..20 {
            for x in 10..20 {
                data[y * 50 + x] = 7;
            }
        }
        let mask = LabelMask::new(50, 50, data, 0, "t", &schema()).unwrap();
        let expected = 4.0 * std::f64::consts::PI * 100.0 / (40.0 * 40.0);
        assert!((expected - 0.7854).abs() < 1e-4);
        assert!((traffic_sign_integrity(&mask, &schema(), &cfg) - expected).abs() < 1e-12);

        // two identical squares -> same mean
        let mut data2 = vec![0u8; 50 * 50];
        for (bx, by) in [(5usize, 5usize), (30, 30)] {
            for y in 0..10 {
                for x in 0..10 {
                    data2[(by + y) * 50 + bx + x] = 7;
                }
            }
        }
        let mask2 = LabelMask::new(50, 50, data2, 0, "t", &schema()).unwrap();
        assert!((traffic_sign_integrity(&mask2, &schema(), &cfg) - expected).abs() < 1e-12);

        assert_eq!(
            traffic_sign_integrity(&uniform_mask(0, 50, 50), &schema(), &cfg),
            0.0
        );
    }

    #[test]
    fn all_road_composition() {
        let v = compute_indicators(
            &uniform_mask(0, 64, 64),
            &schema(),
            &IndicatorConfig::default(),
        )
        .unwrap();
        assert_eq!(v.dar, 1.0);
        assert_eq!(v.bc, 0.0);
        assert_eq!(v.vo, 0.0);
        assert_eq!(v.vod, 0.0);
        assert_eq!(v.tsi, 0.0);
    }

    #[test]
    fn determinism_bitwise() {
        let mut data = vec![0u8; 64 * 64];
        for (i, v) in data.iter_mut().enumerate() {
            *v = (i % 19) as u8;
        }
        let mask = LabelMask::new(64, 64, data, 0, "t", &schema()).unwrap();
        let cfg = IndicatorConfig::default();
        let a = compute_indicators(&mask, &schema(), &cfg).unwrap();
        let b = compute_indicators(&mask, &schema(), &cfg).unwrap();
        assert_eq!(
            a.as_array().map(f64::to_bits),
            b.as_array().map(f64::to_bits)
        );
    }

    #[test]
    fn aggregate_views_cases() {
        let v = |bc: f64| {
            let mut a = [0.1f64; 11];
            a[0] = bc;
            IndicatorVector::from_array(a)
        };
        let four = [v(0.2), v(0.4), v(0.6), v(0.8)];
        let agg = aggregate_views(&four).unwrap();
        assert!((agg.bc - 0.5).abs() < 1e-12);
        let one = aggregate_views(&[v(0.3)]).unwrap();
        assert_eq!(one, v(0.3));
        assert!(aggregate_views(&[]).is_err());
    }

    #[test]
    fn aggregate_identical_views_exact() {
        let v =
            IndicatorVector::from_array([0.1, 0.2, 0.3, 2.5, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.05]);
        let agg = aggregate_views(&[v, v, v, v]).unwrap();
        assert_eq!(
            agg.as_array().map(f64::to_bits),
            v.as_array().map(f64::to_bits)
        );
    }

    proptest! {
        #[test]
        fn indicators_in_range(data in prop::collection::vec(0u8..19, 256)) {
            let mask = LabelMask::new(16, 16, data, 0, "t", &schema()).unwrap();
            let v = compute_indicators(&mask, &schema(), &IndicatorConfig::default()).unwrap();
            for (name, x) in INDICATOR_NAMES.iter().zip(v.as_array()) {
                prop_assert!(x.is_finite(), "{name} not finite");
            }
            for x in [v.bc, v.sor, v.bor, v.vo, v.dar, v.es, v.sr, v.vc, v.tsi, v.vd] {
                prop_assert!((0.0..=1.0).contains(&x));
            }
            prop_assert!(v.vod >= 0.0);
        }

        #[test]
        fn entropy_invariant_under_pixel_replication(data in prop::collection::vec(0u8..19, 64)) {
            let mask = LabelMask::new(8, 8, data.clone(), 0, "t", &schema()).unwrap();
            // 2x replication preserves proportions exactly
            let mut big = Vec::with_capacity(256);
            for y in 0..16 {
                for x in 0..16 {
                    big.push(data[(y / 2) * 8 + x / 2]);
                }
            }
            let mask2 = LabelMask::new(16, 16, big, 0, "t", &schema()).unwrap();
            let a = background_complexity(&mask, &schema());
            let b = background_complexity(&mask2, &schema());
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
