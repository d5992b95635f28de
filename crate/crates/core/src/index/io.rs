//! Versioned JSON container for [`NNIndex`].
//!
//! The container stores the parameters, the family descriptor, the points
//! and every table as a list of `(key, slots)` buckets sorted by key, so the
//! same index always serializes to the same bytes. Hash functions are not
//! stored: they are redrawn from the descriptor and seed on load, and the
//! stored tables must match them.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{draw_functions, key_of, IndexParams, Key, NNIndex, PointId, Table};
use crate::error::{LshError, Result};
use crate::hash::{FamilyDescriptor, HashFamily};
use crate::point::Point;

pub const INDEX_FORMAT: &str = "lshlab-index";
pub const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Bucket {
    key: Key,
    slots: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Container {
    format: String,
    version: u32,
    params: IndexParams,
    family: FamilyDescriptor,
    dim: usize,
    ids: Vec<PointId>,
    points: Vec<Point>,
    tables: Vec<Vec<Bucket>>,
}

impl NNIndex {
    pub fn to_json(&self) -> String {
        let tables = self
            .tables
            .iter()
            .map(|t| {
                let mut buckets: Vec<Bucket> = t
                    .iter()
                    .map(|(key, slots)| Bucket {
                        key: key.clone(),
                        slots: slots.clone(),
                    })
                    .collect();
                buckets.sort_by(|a, b| a.key.cmp(&b.key));
                buckets
            })
            .collect();
        let container = Container {
            format: INDEX_FORMAT.to_string(),
            version: INDEX_FORMAT_VERSION,
            params: self.params.clone(),
            family: self.family.descriptor().clone(),
            dim: self.dim,
            ids: self.ids.clone(),
            points: self.points.clone(),
            tables,
        };
        serde_json::to_string(&container).expect("index serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Container = serde_json::from_str(text)?;
        if c.format != INDEX_FORMAT {
            return Err(LshError::Parse(format!("not an index file (format {:?})", c.format)));
        }
        if c.version != INDEX_FORMAT_VERSION {
            return Err(LshError::Parse(format!(
                "unsupported index version {} (expected {INDEX_FORMAT_VERSION})",
                c.version
            )));
        }
        c.params.validate()?;
        let family = HashFamily::from_descriptor(&c.family)?;
        if family.dim() != c.dim || c.points.iter().any(|p| p.dim() != c.dim) {
            return Err(LshError::Parse("index file: inconsistent dimensions".into()));
        }
        if c.ids.len() != c.points.len() || c.points.is_empty() {
            return Err(LshError::Parse("index file: ids and points disagree".into()));
        }
        if c.tables.len() != c.params.tables {
            return Err(LshError::Parse("index file: table count differs from params".into()));
        }
        let functions = draw_functions(&family, &c.params);
        let mut tables = Vec::with_capacity(c.tables.len());
        for (t, buckets) in c.tables.into_iter().enumerate() {
            let mut table = Table::default();
            let mut entries = 0;
            for b in buckets {
                for &slot in &b.slots {
                    let p = c
                        .points
                        .get(slot as usize)
                        .ok_or_else(|| LshError::Parse(format!("index file: slot {slot} out of range")))?;
                    if key_of(&functions[t], p) != b.key {
                        return Err(LshError::Parse(format!(
                            "index file: table {t} does not match its hash functions"
                        )));
                    }
                }
                entries += b.slots.len();
                if table.insert(b.key, b.slots).is_some() {
                    return Err(LshError::Parse(format!("index file: repeated key in table {t}")));
                }
            }
            if entries != c.points.len() {
                return Err(LshError::Parse(format!(
                    "index file: table {t} does not hold every point once"
                )));
            }
            tables.push(table);
        }
        Ok(NNIndex {
            params: c.params,
            family,
            dim: c.dim,
            ids: c.ids,
            points: c.points,
            functions,
            tables,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
