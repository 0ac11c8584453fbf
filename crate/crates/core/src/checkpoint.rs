//! Binary snapshots of the networks and, optionally, the optimizer.
//!
//! Layout: the magic bytes `UNISURF\0`, a little-endian `u32` format
//! version, a little-endian `u64` header length, a JSON header, then every
//! parameter as little-endian `f64` in row-major order, followed by the Adam
//! first and second moments when the header says they are present.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::fields::{FieldConfig, Fields};
use crate::trainer::{Adam, TrainConfig, TrainState, Trainer};

pub const MAGIC: &[u8; 8] = b"UNISURF\0";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    model: FieldConfig,
    shapes: Vec<(usize, usize)>,
    train: Option<TrainHeader>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainHeader {
    config: TrainConfig,
    iteration: u64,
    adam_steps: u64,
}

/// Trained networks plus what is needed to continue training them.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub fields: Fields,
    pub train: Option<(TrainConfig, TrainState)>,
}

impl Checkpoint {
    pub fn of_fields(fields: Fields) -> Self {
        Self {
            fields,
            train: None,
        }
    }

    pub fn of_trainer(trainer: &Trainer) -> Self {
        Self {
            fields: trainer.fields.clone(),
            train: Some((trainer.config.clone(), trainer.state.clone())),
        }
    }

    /// Rebuilds a trainer that continues exactly where this one stopped.
    pub fn into_trainer(self) -> Result<Trainer> {
        match self.train {
            Some((config, state)) => Trainer::resume(self.fields, config, Some(state)),
            None => Err(Error::Usage("checkpoint holds no training state".into())),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let values: Vec<&Matrix> = self.fields.params().map(|p| &p.value).collect();
        let header = Header {
            model: self.fields.config.clone(),
            shapes: values.iter().map(|m| m.dim()).collect(),
            train: self.train.as_ref().map(|(config, state)| TrainHeader {
                config: config.clone(),
                iteration: state.iteration,
                adam_steps: state.adam.steps,
            }),
        };
        let json = serde_json::to_vec(&header).expect("serializable header");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        let mut put = |m: &Matrix| m.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
        values.iter().for_each(|m| put(m));
        if let Some((_, state)) = &self.train {
            state.adam.m.iter().chain(&state.adam.v).for_each(put);
        }
        out
    }

    /// Parses bytes read from `path`; `path` only labels errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |m: String| Error::data(path, m);
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8).map_err(|_| bad("not a checkpoint".into()))? != MAGIC {
            return Err(bad("not a checkpoint".into()));
        }
        let version = u32::from_le_bytes(r.take(4).map_err(bad)?.try_into().unwrap());
        if version != VERSION {
            return Err(bad(format!(
                "checkpoint format version {version}, this build reads version {VERSION}"
            )));
        }
        let len = u64::from_le_bytes(r.take(8).map_err(bad)?.try_into().unwrap()) as usize;
        let header: Header = serde_json::from_slice(r.take(len).map_err(bad)?)
            .map_err(|e| bad(format!("header: {e}")))?;
        header.model.validate().map_err(|e| bad(e.to_string()))?;

        let mut fields = Fields::new(header.model, 0).map_err(|e| bad(e.to_string()))?;
        let expected: Vec<(usize, usize)> = fields.params().map(|p| p.value.dim()).collect();
        if expected != header.shapes {
            return Err(bad("parameter shapes do not match the network configuration".into()));
        }
        for p in fields.params_mut() {
            p.value = r.matrix(p.value.dim()).map_err(bad)?;
        }
        let train = match header.train {
            Some(t) => {
                let mut read_all = || -> std::result::Result<Vec<Matrix>, String> {
                    expected.iter().map(|&s| r.matrix(s)).collect()
                };
                let m = read_all().map_err(bad)?;
                let v = read_all().map_err(bad)?;
                let state = TrainState {
                    iteration: t.iteration,
                    adam: Adam {
                        m,
                        v,
                        steps: t.adam_steps,
                    },
                };
                Some((t.config, state))
            }
            None => None,
        };
        if r.pos != bytes.len() {
            return Err(bad(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { fields, train })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| "checkpoint is truncated".to_string())?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn matrix(&mut self, shape: (usize, usize)) -> std::result::Result<Matrix, String> {
        let raw = self.take(shape.0 * shape.1 * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Matrix::from_shape_vec(shape, data).expect("sized buffer"))
    }
}
