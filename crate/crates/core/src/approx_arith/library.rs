use std::path::Path;

use serde::Deserialize;

use super::model::{FullAdderModel, Gate, Netlist, EXACT_MODEL};
use crate::{Error, Result};

/// The library shipped with the crate: the exact cell plus seven
/// approximate cells.
pub const DEFAULT_LIBRARY_TOML: &str = include_str!("../../data/adders.toml");

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LibraryFile {
    #[serde(default)]
    model: Vec<ModelEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelEntry {
    name: String,
    table: Vec<[u8; 2]>,
    netlist: Option<Vec<Gate>>,
    sum: Option<String>,
    cout: Option<String>,
    cost: Option<f64>,
    transistor_count: Option<u32>,
}

impl ModelEntry {
    fn into_model(self) -> Result<FullAdderModel> {
        let name = self.name;
        if self.table.len() != 8 {
            return Err(Error::config(format!(
                "model `{name}`: table has {} rows, expected 8",
                self.table.len()
            )));
        }
        let mut table = [(false, false); 8];
        for (row, [s, c]) in self.table.into_iter().enumerate() {
            if s > 1 || c > 1 {
                return Err(Error::config(format!(
                    "model `{name}`: row {row:03b} is not binary"
                )));
            }
            table[row] = (s == 1, c == 1);
        }
        let netlist = match (self.netlist, self.sum, self.cout) {
            (None, None, None) => None,
            (Some(gates), Some(sum), Some(cout)) => Some(Netlist { gates, sum, cout }),
            _ => {
                return Err(Error::config(format!(
                    "model `{name}`: netlist, sum and cout must be given together"
                )))
            }
        };
        let cost = match (self.cost, self.transistor_count) {
            (Some(c), _) => c,
            (None, Some(t)) => t as f64,
            (None, None) => {
                return Err(Error::config(format!(
                    "model `{name}`: needs a cost or a transistor_count"
                )))
            }
        };
        FullAdderModel::new(name, table, netlist, cost, self.transistor_count)
    }
}

/// An immutable, ordered set of adder models that always contains `exact`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelLibrary {
    models: Vec<FullAdderModel>,
}

impl Default for ModelLibrary {
    fn default() -> Self {
        ModelLibrary::from_toml_str(DEFAULT_LIBRARY_TOML).expect("bundled adder library is valid")
    }
}

impl ModelLibrary {
    pub fn new(models: Vec<FullAdderModel>) -> Result<Self> {
        for (i, m) in models.iter().enumerate() {
            if models[..i].iter().any(|o| o.name() == m.name()) {
                return Err(Error::config(format!(
                    "duplicate adder model `{}`",
                    m.name()
                )));
            }
        }
        if !models.iter().any(|m| m.name() == EXACT_MODEL) {
            return Err(Error::config("adder library has no `exact` model"));
        }
        Ok(ModelLibrary { models })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: LibraryFile =
            toml::from_str(text).map_err(|e| Error::config(format!("adder library: {e}")))?;
        let models = file
            .model
            .into_iter()
            .map(ModelEntry::into_model)
            .collect::<Result<Vec<_>>>()?;
        ModelLibrary::new(models)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ModelLibrary::from_toml_str(&text)
    }

    pub fn get(&self, name: &str) -> Result<&FullAdderModel> {
        self.models
            .iter()
            .find(|m| m.name() == name)
            .ok_or_else(|| Error::config(format!("unknown adder model `{name}`")))
    }

    pub fn exact(&self) -> &FullAdderModel {
        self.get(EXACT_MODEL)
            .expect("library invariant: exact present")
    }

    pub fn models(&self) -> &[FullAdderModel] {
        &self.models
    }

    /// Models whose table differs from exact addition in at least one row.
    pub fn lossy_models(&self) -> impl Iterator<Item = &FullAdderModel> {
        self.models.iter().filter(|m| !m.is_exact())
    }

    /// Returns a copy with `name`'s cost replaced.
    pub fn with_cost(&self, name: &str, cost: f64) -> Result<Self> {
        self.get(name)?;
        if !(cost.is_finite() && cost >= 0.0) {
            return Err(Error::config(format!("cost must be >= 0, got {cost}")));
        }
        let models = self
            .models
            .iter()
            .map(|m| {
                if m.name() == name {
                    m.clone().with_cost(cost)
                } else {
                    m.clone()
                }
            })
            .collect();
        Ok(ModelLibrary { models })
    }
}
