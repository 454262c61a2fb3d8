//! Semantic class schema: the class domain of label masks plus the named
//! role sets indicators are computed over.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Roles a semantic class can play in indicator formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Road,
    Sidewalk,
    Building,
    Vegetation,
    Terrain,
    Sky,
    Vehicle,
    TrafficSign,
    Obstruction,
    Obstacle,
    Escape,
}

pub const ALL_ROLES: [Role; 11] = [
    Role::Road,
    Role::Sidewalk,
    Role::Building,
    Role::Vegetation,
    Role::Terrain,
    Role::Sky,
    Role::Vehicle,
    Role::TrafficSign,
    Role::Obstruction,
    Role::Obstacle,
    Role::Escape,
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategorySchema {
    /// Class names indexed by id; ids are contiguous from 0.
    pub classes: Vec<String>,
    /// Class-id sets per role. Sets may overlap.
    pub role_sets: Vec<(Role, BTreeSet<u8>)>,
}

impl CategorySchema {
    pub fn new(classes: Vec<String>, role_sets: Vec<(Role, BTreeSet<u8>)>) -> Result<Self> {
        let schema = CategorySchema { classes, role_sets };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::Schema("no classes declared".into()));
        }
        if self.classes.len() > 256 {
            return Err(Error::Schema("more than 256 classes".into()));
        }
        let mut seen = BTreeSet::new();
        for name in &self.classes {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate class name {name:?}")));
            }
        }
        let n = self.classes.len() as u16;
        for (role, ids) in &self.role_sets {
            for &id in ids {
                if u16::from(id) >= n {
                    return Err(Error::Schema(format!(
                        "role {role:?} references undeclared class id {id}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn is_valid_id(&self, id: u8) -> bool {
        usize::from(id) < self.classes.len()
    }

    /// Class ids in the given role; empty set if the role is not declared.
    pub fn role_set(&self, role: Role) -> BTreeSet<u8> {
        self.role_sets
            .iter()
            .find(|(r, _)| *r == role)
            .map(|(_, ids)| ids.clone())
            .unwrap_or_default()
    }

    pub fn class_id(&self, name: &str) -> Option<u8> {
        self.classes.iter().position(|c| c == name).map(|i| i as u8)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let schema: CategorySchema = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// The default 19-class urban schema with role sets for every indicator.
impl Default for CategorySchema {
    fn default() -> Self {
        let classes: Vec<String> = [
            "road",
            "sidewalk",
            "building",
            "wall",
            "fence",
            "pole",
            "traffic light",
            "traffic sign",
            "vegetation",
            "terrain",
            "sky",
            "person",
            "rider",
            "car",
            "truck",
            "bus",
            "train",
            "motorcycle",
            "bicycle",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();

        let set = |ids: &[u8]| ids.iter().copied().collect::<BTreeSet<u8>>();
        let role_sets = vec![
            (Role::Road, set(&[0])),
            (Role::Sidewalk, set(&[1])),
            (Role::Building, set(&[2])),
            (Role::Vegetation, set(&[8])),
            (Role::Terrain, set(&[9])),
            (Role::Sky, set(&[10])),
            (Role::Vehicle, set(&[13, 14, 15, 16, 17, 18])),
            (Role::TrafficSign, set(&[7])),
            // building, wall, fence, pole, vegetation
            (Role::Obstruction, set(&[2, 3, 4, 5, 8])),
            // pole, traffic light, traffic sign, fence, wall
            (Role::Obstacle, set(&[5, 6, 7, 4, 3])),
            // sidewalk, terrain
            (Role::Escape, set(&[1, 9])),
        ];
        CategorySchema { classes, role_sets }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_is_valid_with_19_classes() {
        let schema = CategorySchema::default();
        schema.validate().unwrap();
        assert_eq!(schema.num_classes(), 19);
        for role in ALL_ROLES {
            assert!(!schema.role_set(role).is_empty(), "role {role:?} empty");
        }
    }

    #[test]
    fn role_referencing_unknown_id_rejected() {
        let mut schema = CategorySchema::default();
        schema
            .role_sets
            .push((Role::Sky, [200u8].into_iter().collect()));
        assert!(schema.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let schema = CategorySchema::default();
        let text = serde_json::to_string(&schema).unwrap();
        let back: CategorySchema = serde_json::from_str(&text).unwrap();
        assert_eq!(back.classes, schema.classes);
        assert_eq!(back.role_set(Role::Vehicle), schema.role_set(Role::Vehicle));
    }
}
