//! Asset catalog keyed by UUID.
//!
//! Geometry, materials and metadata are kept in separate keyed stores; an
//! asset record references one entry of each. Catalog document:
//!
//! ```text
//! {"geometry":{"<key>":{"kind":"box","size":[x,y,z]}, ...},
//!  "materials":{"<key>":{"albedo":[r,g,b]}, ...},
//!  "assets":[{"uuid":"...","geometry":"<key>","material":"<key>",
//!             "metadata":{"class":"cube", ...}}, ...]}
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::geometry::{Triangle, Vec3};

pub const DEFAULT_CATALOG: &str = include_str!("default_catalog.json");

#[derive(Debug, Error, PartialEq)]
pub enum CatalogError {
    #[error("malformed catalog: {0}")]
    Parse(String),
    #[error("duplicate asset uuid {0}")]
    DuplicateUuid(Uuid),
    #[error("unknown asset uuid {0}")]
    UnknownUuid(Uuid),
    #[error("asset {uuid}: unresolved {store} reference `{key}`")]
    Unresolved { uuid: Uuid, store: &'static str, key: String },
    #[error("asset {uuid}: invalid geometry `{key}`: {message}")]
    InvalidGeometry { uuid: Uuid, key: String, message: String },
    #[error("asset {uuid}: albedo of `{key}` outside [0, 1]")]
    InvalidMaterial { uuid: Uuid, key: String },
    #[error("catalog has no asset of class `{0}`")]
    MissingClass(String),
}

/// Parametric geometry. Objects stand on their local `y = 0` plane with
/// `-y` pointing up (world y points down).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GeometrySpec {
    /// Ground plane; its extent is chosen by the generator.
    Plane,
    /// Axis-aligned box, `size` = (length along x, height, width along z).
    Box { size: [f64; 3] },
    /// Pole with a rectangular panel on top, the panel facing -z.
    Signpost {
        pole_height: f64,
        pole_width: f64,
        panel_width: f64,
        panel_height: f64,
        panel_depth: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub albedo: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetRecord {
    pub uuid: Uuid,
    pub geometry: String,
    pub material: String,
    /// Free-form pairs; `class` selects the asset's role in a preset.
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl AssetRecord {
    pub fn class(&self) -> Option<&str> {
        self.metadata.get("class").map(String::as_str)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogDoc {
    geometry: BTreeMap<String, GeometrySpec>,
    materials: BTreeMap<String, MaterialSpec>,
    assets: Vec<AssetRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Catalog {
    pub geometry: BTreeMap<String, GeometrySpec>,
    pub materials: BTreeMap<String, MaterialSpec>,
    pub records: BTreeMap<Uuid, AssetRecord>,
}

impl Catalog {
    /// Parses a catalog document and checks that every reference resolves.
    pub fn load(text: &str) -> Result<Self, CatalogError> {
        let doc: CatalogDoc = serde_json::from_str(text).map_err(|e| CatalogError::Parse(e.to_string()))?;
        let mut records = BTreeMap::new();
        for record in doc.assets {
            let uuid = record.uuid;
            if records.insert(uuid, record).is_some() {
                return Err(CatalogError::DuplicateUuid(uuid));
            }
        }
        let catalog = Self {
            geometry: doc.geometry,
            materials: doc.materials,
            records,
        };
        for record in catalog.records.values() {
            catalog.resolve(record)?;
        }
        Ok(catalog)
    }

    pub fn builtin() -> Self {
        Self::load(DEFAULT_CATALOG).expect("built-in catalog is valid")
    }

    pub fn lookup(&self, uuid: &Uuid) -> Result<&AssetRecord, CatalogError> {
        self.records.get(uuid).ok_or(CatalogError::UnknownUuid(*uuid))
    }

    /// Geometry and material of a record, validated.
    pub fn resolve(&self, record: &AssetRecord) -> Result<(&GeometrySpec, &MaterialSpec), CatalogError> {
        let geometry = self.geometry.get(&record.geometry).ok_or_else(|| CatalogError::Unresolved {
            uuid: record.uuid,
            store: "geometry",
            key: record.geometry.clone(),
        })?;
        geometry.validate().map_err(|message| CatalogError::InvalidGeometry {
            uuid: record.uuid,
            key: record.geometry.clone(),
            message,
        })?;
        let material = self.materials.get(&record.material).ok_or_else(|| CatalogError::Unresolved {
            uuid: record.uuid,
            store: "material",
            key: record.material.clone(),
        })?;
        if !material.albedo.iter().all(|c| (0.0..=1.0).contains(c)) {
            return Err(CatalogError::InvalidMaterial {
                uuid: record.uuid,
                key: record.material.clone(),
            });
        }
        Ok((geometry, material))
    }

    /// Records whose `class` metadata equals `class`, in uuid order.
    pub fn of_class(&self, class: &str) -> Vec<&AssetRecord> {
        self.records.values().filter(|r| r.class() == Some(class)).collect()
    }

    pub fn require_class(&self, class: &str) -> Result<Vec<&AssetRecord>, CatalogError> {
        let found = self.of_class(class);
        if found.is_empty() {
            Err(CatalogError::MissingClass(class.to_string()))
        } else {
            Ok(found)
        }
    }
}

/// Vertices and triangles of a primitive in object coordinates.
pub struct MeshData {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<Triangle>,
}

impl MeshData {
    fn append(&mut self, other: MeshData) {
        let offset = self.vertices.len() as u32;
        self.vertices.extend(other.vertices);
        self.triangles
            .extend(other.triangles.into_iter().map(|t| Triangle(t.0.map(|i| i + offset))));
    }
}

/// Axis-aligned box between two corners.
pub fn box_mesh(min: Vec3, max: Vec3) -> MeshData {
    let vertices = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 == 0 { min.x } else { max.x },
                if i & 2 == 0 { min.y } else { max.y },
                if i & 4 == 0 { min.z } else { max.z },
            )
        })
        .collect();
    let quads = [
        [0, 4, 6, 2],
        [1, 3, 7, 5],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 2, 3, 1],
        [4, 5, 7, 6],
    ];
    let triangles = quads
        .iter()
        .flat_map(|q| [Triangle([q[0], q[1], q[2]]), Triangle([q[0], q[2], q[3]])])
        .collect();
    MeshData { vertices, triangles }
}

/// Rectangle in the local `y = 0` plane.
pub fn plane_mesh(x: [f64; 2], z: [f64; 2]) -> MeshData {
    MeshData {
        vertices: vec![
            Vec3::new(x[0], 0.0, z[0]),
            Vec3::new(x[1], 0.0, z[0]),
            Vec3::new(x[1], 0.0, z[1]),
            Vec3::new(x[0], 0.0, z[1]),
        ],
        triangles: vec![Triangle([0, 1, 2]), Triangle([0, 2, 3])],
    }
}

impl GeometrySpec {
    pub fn validate(&self) -> Result<(), String> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be positive, got {v}"))
            }
        };
        match self {
            GeometrySpec::Plane => Ok(()),
            GeometrySpec::Box { size } => size.iter().try_for_each(|s| positive("box size", *s)),
            GeometrySpec::Signpost {
                pole_height,
                pole_width,
                panel_width,
                panel_height,
                panel_depth,
            } => {
                positive("pole_height", *pole_height)?;
                positive("pole_width", *pole_width)?;
                positive("panel_width", *panel_width)?;
                positive("panel_height", *panel_height)?;
                positive("panel_depth", *panel_depth)?;
                if panel_height > pole_height {
                    return Err("panel is taller than the pole".into());
                }
                Ok(())
            }
        }
    }

    /// Mesh of a solid primitive; `None` for planes, which the generator sizes.
    pub fn solid_mesh(&self) -> Option<MeshData> {
        match self {
            GeometrySpec::Plane => None,
            GeometrySpec::Box { size } => Some(box_mesh(
                Vec3::new(-size[0] / 2.0, -size[1], -size[2] / 2.0),
                Vec3::new(size[0] / 2.0, 0.0, size[2] / 2.0),
            )),
            GeometrySpec::Signpost {
                pole_height,
                pole_width,
                panel_width,
                panel_height,
                panel_depth,
            } => {
                let w = pole_width / 2.0;
                let mut mesh = box_mesh(Vec3::new(-w, -pole_height, -w), Vec3::new(w, 0.0, w));
                mesh.append(box_mesh(
                    Vec3::new(-panel_width / 2.0, -pole_height, -w - panel_depth),
                    Vec3::new(panel_width / 2.0, -pole_height + panel_height, -w),
                ));
                Some(mesh)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = r#"{
      "geometry": {"g": {"kind": "box", "size": [1, 2, 3]}},
      "materials": {"m": {"albedo": [0.1, 0.2, 0.3]}},
      "assets": [
        {"uuid": "00000000-0000-4000-8000-000000000001", "geometry": "g", "material": "m",
         "metadata": {"class": "cube", "color": "red"}},
        {"uuid": "00000000-0000-4000-8000-000000000002", "geometry": "g", "material": "m",
         "metadata": {"class": "cube"}}
      ]}"#;

    fn id(n: u128) -> Uuid {
        Uuid::from_u128(0x0000_0000_0000_4000_8000_0000_0000_0000 | n)
    }

    #[test]
    fn load_and_lookup() {
        let catalog = Catalog::load(TWO).unwrap();
        let first = catalog.lookup(&id(1)).unwrap();
        assert_eq!(first.geometry, "g");
        assert_eq!(first.metadata["color"], "red");
        assert_eq!(catalog.lookup(&id(2)).unwrap().class(), Some("cube"));
        assert_eq!(catalog.of_class("cube").len(), 2);
    }

    #[test]
    fn duplicate_uuid_is_named() {
        let text = TWO.replace("000000000002", "000000000001");
        let err = Catalog::load(&text).unwrap_err();
        assert_eq!(err, CatalogError::DuplicateUuid(id(1)));
        assert!(err.to_string().contains("00000000-0000-4000-8000-000000000001"));
    }

    #[test]
    fn unknown_uuid() {
        let catalog = Catalog::load(TWO).unwrap();
        assert_eq!(catalog.lookup(&id(9)).unwrap_err(), CatalogError::UnknownUuid(id(9)));
    }

    #[test]
    fn dangling_reference_names_uuid() {
        let text = TWO.replacen(r#""material": "m""#, r#""material": "nope""#, 1);
        let err = Catalog::load(&text).unwrap_err();
        assert!(matches!(&err, CatalogError::Unresolved { uuid, store: "material", .. } if *uuid == id(1)));
    }

    #[test]
    fn builtin_has_required_classes() {
        let catalog = Catalog::builtin();
        for class in ["ground", "cube", "signpost"] {
            assert!(catalog.require_class(class).is_ok(), "{class}");
        }
        assert!(catalog.require_class("tree").is_err());
    }

    #[test]
    fn box_faces_are_outward_and_closed() {
        let mesh = box_mesh(Vec3::new(-1.0, -2.0, -3.0), Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(mesh.triangles.len(), 12);
        // divergence theorem: signed volume from outward faces equals the box volume
        let volume: f64 = mesh
            .triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.corners(&mesh.vertices);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum();
        assert!((volume - 48.0).abs() < 1e-12, "{volume}");
    }

    #[test]
    fn signpost_mesh() {
        let spec = GeometrySpec::Signpost {
            pole_height: 2.5,
            pole_width: 0.1,
            panel_width: 0.8,
            panel_height: 0.6,
            panel_depth: 0.05,
        };
        let mesh = spec.solid_mesh().unwrap();
        assert_eq!(mesh.vertices.len(), 16);
        assert_eq!(mesh.triangles.len(), 24);
        assert!(mesh.triangles.iter().all(|t| t.validate(16).is_ok()));
        assert!(mesh.vertices.iter().all(|v| v.y <= 0.0 && v.y >= -2.5));
    }
}
