//! Meta model and run checkpoints, plus meta-level pretraining for warm
//! starts.
//!
//! File layout, all little-endian:
//!
//! ```text
//! magic "BIERLCKP" | u32 version | u64 header length | JSON header | f64 payload
//! ```
//!
//! The payload holds the flat meta parameters followed by the inner
//! parameters; their lengths are recorded in the header.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envs::Task;
use crate::error::{Error, Result};
use crate::hyper::HyperParams;
use crate::meta::bo::BoState;
use crate::meta::PopulationReplayBuffer;
use crate::nn::{LstmSpec, MetaModel, MlpSpec};
use crate::run::{Mode, Run, RunSetup, RunState};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"BIERLCKP";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointKind {
    Meta,
    Run,
}

/// Architecture of a stored meta model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaArch {
    pub spec_hash: String,
    pub encoder: LstmSpec,
    pub generator: MlpSpec,
}

/// Base seeds of every random stream. Streams are keyed by these and the
/// counters, so together they are the complete generator state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub es_seed: u64,
    pub meta_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counters {
    pub iteration: u64,
    pub inner_evals: u64,
    pub lookahead_evals: u64,
    pub meta_updates: u64,
}

/// Run state that is not a parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunExtras {
    pub mode: Mode,
    pub hyper: HyperParams,
    pub buffer: PopulationReplayBuffer,
    pub bo: Option<BoState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    version: u32,
    kind: CheckpointKind,
    meta: Option<MetaArch>,
    rng: RngState,
    counters: Counters,
    config: serde_json::Value,
    run: Option<RunExtras>,
    meta_len: usize,
    theta_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub kind: CheckpointKind,
    pub meta: Option<MetaArch>,
    pub rng: RngState,
    pub counters: Counters,
    /// Snapshot of the configuration that produced the checkpoint.
    pub config: serde_json::Value,
    pub run: Option<RunExtras>,
    /// Flat ϑ; empty when there is no meta model.
    pub meta_params: Vec<f64>,
    /// Flat θ; empty for meta-only checkpoints.
    pub theta: Vec<f64>,
}

fn arch_of(model: &MetaModel) -> MetaArch {
    MetaArch {
        spec_hash: model.spec_hash(),
        encoder: model.encoder,
        generator: model.generator.clone(),
    }
}

impl Checkpoint {
    pub fn for_meta(model: &MetaModel, rng: RngState, config: serde_json::Value) -> Self {
        Self {
            version: FORMAT_VERSION,
            kind: CheckpointKind::Meta,
            meta: Some(arch_of(model)),
            rng,
            counters: Counters::default(),
            config,
            run: None,
            meta_params: model.flat().to_vec(),
            theta: Vec::new(),
        }
    }

    pub fn for_run(setup: &RunSetup, state: &RunState, config: serde_json::Value) -> Self {
        Self {
            version: FORMAT_VERSION,
            kind: CheckpointKind::Run,
            meta: state.meta.as_ref().map(arch_of),
            rng: RngState { es_seed: setup.es.seed, meta_seed: setup.meta.seed },
            counters: Counters {
                iteration: state.iteration,
                inner_evals: state.inner_evals,
                lookahead_evals: state.lookahead_evals,
                meta_updates: state.meta_updates,
            },
            config,
            run: Some(RunExtras {
                mode: setup.mode,
                hyper: state.hyper,
                buffer: state.buffer.clone(),
                bo: state.bo.clone(),
            }),
            meta_params: state.meta.as_ref().map(|m| m.flat().to_vec()).unwrap_or_default(),
            theta: state.theta.clone(),
        }
    }

    /// Rebuilds the stored meta model, optionally requiring a spec hash.
    pub fn meta_model(&self, expected_hash: Option<&str>) -> Result<MetaModel> {
        let arch = self
            .meta
            .as_ref()
            .ok_or_else(|| Error::Incompatible("checkpoint holds no meta model".into()))?;
        if let Some(h) = expected_hash {
            if h != arch.spec_hash {
                return Err(Error::Incompatible(format!(
                    "meta model spec hash {} does not match the configured architecture {h} \
                     (population size, interval and hidden width must be equal)",
                    arch.spec_hash
                )));
            }
        }
        MetaModel::from_flat(arch.encoder, arch.generator.clone(), self.meta_params.clone())
    }

    /// Rebuilds run state for `setup`, refusing checkpoints from a
    /// different mode, seed or architecture.
    pub fn run_state(&self, setup: &RunSetup) -> Result<RunState> {
        let extras = self
            .run
            .as_ref()
            .ok_or_else(|| Error::Incompatible("checkpoint holds no run state".into()))?;
        if extras.mode != setup.mode {
            return Err(Error::Incompatible(format!(
                "checkpoint is from mode {}, run is {}",
                extras.mode, setup.mode
            )));
        }
        let rng = RngState { es_seed: setup.es.seed, meta_seed: setup.meta.seed };
        if rng != self.rng {
            return Err(Error::Incompatible(format!(
                "checkpoint seeds {:?} differ from the run's {:?}",
                self.rng, rng
            )));
        }
        let meta = match setup.mode {
            Mode::Pm => Some(self.meta_model(Some(&setup.meta_spec_hash()))?),
            _ => None,
        };
        Ok(RunState {
            iteration: self.counters.iteration,
            theta: self.theta.clone(),
            meta,
            buffer: extras.buffer.clone(),
            hyper: extras.hyper,
            bo: extras.bo.clone(),
            inner_evals: self.counters.inner_evals,
            lookahead_evals: self.counters.lookahead_evals,
            meta_updates: self.counters.meta_updates,
        })
    }

    /// Serialized bytes.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            version: self.version,
            kind: self.kind,
            meta: self.meta.clone(),
            rng: self.rng,
            counters: self.counters,
            config: self.config.clone(),
            run: self.run.clone(),
            meta_len: self.meta_params.len(),
            theta_len: self.theta.len(),
        };
        let json = serde_json::to_vec(&header)
            .map_err(|e| Error::State(format!("checkpoint header not serializable: {e}")))?;
        let mut out = Vec::with_capacity(20 + json.len() + 8 * (header.meta_len + header.theta_len));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for v in self.meta_params.iter().chain(&self.theta) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    /// Parses bytes read from `path` (used in error messages only).
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::format(path, reason);
        let mut rest = bytes;
        let mut take = |n: usize, what: &str| -> Result<&[u8]> {
            if rest.len() < n {
                return Err(bad(&format!("truncated {what}")));
            }
            let (head, tail) = rest.split_at(n);
            rest = tail;
            Ok(head)
        };
        if take(8, "magic")? != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(take(4, "version")?.try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::Incompatible(format!(
                "checkpoint format version {version}, this build reads {FORMAT_VERSION}"
            )));
        }
        let header_len = u64::from_le_bytes(take(8, "header length")?.try_into().expect("8 bytes"));
        let header_len = usize::try_from(header_len).map_err(|_| bad("header length overflow"))?;
        let header: Header = serde_json::from_slice(take(header_len, "header")?)
            .map_err(|e| bad(&format!("header: {e}")))?;
        if header.version != version {
            return Err(bad("header version disagrees with preamble"));
        }
        let floats = header
            .meta_len
            .checked_add(header.theta_len)
            .and_then(|c| c.checked_mul(8))
            .ok_or_else(|| bad("payload length overflow"))?;
        let payload = take(floats, "payload")?;
        if !rest.is_empty() {
            return Err(bad("trailing bytes after payload"));
        }
        let mut values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let meta_params: Vec<f64> = values.by_ref().take(header.meta_len).collect();
        let theta: Vec<f64> = values.collect();

        if let Some(arch) = &header.meta {
            let probe = MetaModel::zeros(arch.encoder, arch.generator.output_dim);
            if probe.generator != arch.generator || probe.spec_hash() != arch.spec_hash {
                return Err(Error::Incompatible(format!(
                    "stored spec hash {} does not describe the stored architecture",
                    arch.spec_hash
                )));
            }
            if meta_params.len() != probe.len() {
                return Err(bad(&format!(
                    "meta payload has {} values, architecture needs {}",
                    meta_params.len(),
                    probe.len()
                )));
            }
        } else if !meta_params.is_empty() {
            return Err(bad("meta payload without an architecture"));
        }

        Ok(Self {
            version,
            kind: header.kind,
            meta: header.meta,
            rng: header.rng,
            counters: header.counters,
            config: header.config,
            run: header.run,
            meta_params,
            theta,
        })
    }
}

/// Writes atomically: a sibling temporary file is renamed over `path`.
pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let bytes = checkpoint.to_bytes()?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes, path)
}

pub fn save_meta(path: &Path, model: &MetaModel, rng: RngState, config: serde_json::Value) -> Result<()> {
    save_checkpoint(path, &Checkpoint::for_meta(model, rng, config))
}

/// Loads a meta model that must fit `setup`'s architecture.
pub fn load_meta(path: &Path, setup: &RunSetup) -> Result<MetaModel> {
    load_checkpoint(path)?.meta_model(Some(&setup.meta_spec_hash()))
}

/// Trains a fresh meta model with the integrated PM loop on `task` for
/// `meta_updates` meta updates (`meta_updates · k` inner iterations) and
/// returns it. Only the meta model is kept.
pub fn pretrain_meta(task: &Task, meta_updates: u64, setup: &RunSetup) -> Result<MetaModel> {
    let setup = RunSetup { mode: Mode::Pm, ..setup.clone() };
    let fresh = setup.fresh_meta();
    if meta_updates == 0 {
        return Ok(fresh);
    }
    let theta0 = task.initial_params(setup.es.seed);
    let total = meta_updates * setup.meta.k as u64;
    let mut run = Run::new(setup, task, theta0, Some(fresh))?;
    run.run_until(total, |_, _| Ok(()))?;
    run.into_state().meta.ok_or_else(|| Error::State("PM run lost its meta model".into()))
}
