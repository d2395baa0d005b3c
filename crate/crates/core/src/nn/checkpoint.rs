//! Versioned JSON checkpoints holding named parameter sets, optimizer state
//! and arbitrary metadata.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Adam, Mat, NnError, Params};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleRecord {
    pub shapes: Vec<[usize; 2]>,
    pub params: Vec<f64>,
}

impl ModuleRecord {
    pub fn from_params<P: Params>(p: &P) -> Self {
        Self { shapes: p.shapes(), params: p.to_flat() }
    }

    /// Loads into `p`, which must already have the recorded shapes.
    pub fn load_into<P: Params>(&self, p: &mut P) -> Result<(), NnError> {
        if p.shapes() != self.shapes {
            return Err(NnError::Checkpoint(format!("shapes {:?} do not match {:?}", self.shapes, p.shapes())));
        }
        p.set_flat(&self.params).map_err(|e| NnError::Checkpoint(e.to_string()))
    }

    fn validate(&self) -> Result<(), NnError> {
        let mut n: usize = 0;
        for [r, c] in &self.shapes {
            n = r
                .checked_mul(*c)
                .and_then(|k| n.checked_add(k))
                .ok_or_else(|| NnError::Checkpoint("shape overflow".into()))?;
        }
        if n != self.params.len() {
            return Err(NnError::Checkpoint(format!("{} values for shapes totalling {n}", self.params.len())));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerRecord {
    pub t: u64,
    pub m: ModuleRecord,
    pub v: ModuleRecord,
}

impl OptimizerRecord {
    pub fn from_adam(a: &Adam) -> Self {
        let rec = |ts: &[Mat]| ModuleRecord {
            shapes: ts.iter().map(|t| [t.nrows(), t.ncols()]).collect(),
            params: ts.iter().flat_map(|t| t.as_slice().iter().copied()).collect(),
        };
        Self { t: a.t, m: rec(&a.m), v: rec(&a.v) }
    }

    pub fn load_into(&self, a: &mut Adam) -> Result<(), NnError> {
        let fill = |rec: &ModuleRecord, ts: &mut [Mat]| -> Result<(), NnError> {
            let shapes: Vec<[usize; 2]> = ts.iter().map(|t| [t.nrows(), t.ncols()]).collect();
            if shapes != rec.shapes {
                return Err(NnError::Checkpoint("optimizer shapes do not match".into()));
            }
            let mut at = 0;
            for t in ts.iter_mut() {
                let n = t.len();
                t.as_mut_slice().copy_from_slice(&rec.params[at..at + n]);
                at += n;
            }
            Ok(())
        };
        self.m.validate()?;
        self.v.validate()?;
        fill(&self.m, &mut a.m)?;
        fill(&self.v, &mut a.v)?;
        a.t = self.t;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub modules: BTreeMap<String, ModuleRecord>,
    #[serde(default)]
    pub optimizers: BTreeMap<String, OptimizerRecord>,
    /// Free-form state owned by the caller (iteration, rng, config).
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl Default for Checkpoint {
    fn default() -> Self {
        Self { version: CHECKPOINT_VERSION, modules: BTreeMap::new(), optimizers: BTreeMap::new(), meta: serde_json::Value::Null }
    }
}

impl Checkpoint {
    pub fn put<P: Params>(&mut self, name: &str, p: &P) {
        self.modules.insert(name.to_string(), ModuleRecord::from_params(p));
    }

    pub fn put_optimizer(&mut self, name: &str, a: &Adam) {
        self.optimizers.insert(name.to_string(), OptimizerRecord::from_adam(a));
    }

    pub fn get<P: Params>(&self, name: &str, p: &mut P) -> Result<(), NnError> {
        self.modules
            .get(name)
            .ok_or_else(|| NnError::Checkpoint(format!("missing module {name:?}")))?
            .load_into(p)
    }

    pub fn get_optimizer(&self, name: &str, a: &mut Adam) -> Result<(), NnError> {
        self.optimizers
            .get(name)
            .ok_or_else(|| NnError::Checkpoint(format!("missing optimizer {name:?}")))?
            .load_into(a)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        let c: Self = serde_json::from_str(text).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        if c.version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!("unsupported version {}", c.version)));
        }
        for m in c.modules.values() {
            m.validate()?;
        }
        for o in c.optimizers.values() {
            o.m.validate()?;
            o.v.validate()?;
        }
        Ok(c)
    }

    /// Writes atomically through a temporary sibling file.
    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_json()).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        std::fs::rename(&tmp, path).map_err(|e| NnError::Checkpoint(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let text = std::fs::read_to_string(path).map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
