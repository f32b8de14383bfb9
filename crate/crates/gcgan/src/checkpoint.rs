//! Checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"GCGANCKP"            8-byte magic
//! u32                    format version
//! u64                    header length in bytes
//! header                 UTF-8 JSON, see `Header`
//! f32 * sum(numel)       tensor data, in header order
//! ```
//!
//! Tensor names are `<role>/<param>` for network weights,
//! `<role>/adam.m/<param>` and `<role>/adam.v/<param>` for optimizer
//! moments and `buffer/<role>/<k>` for stored fake images. Roles are
//! `g_xy`, `g_xtyt` (separate mode only), `d_y`, `d_yt`, `g_yx`, `d_x`.

use std::fs;
use std::io::Write;
use std::path::Path;

use gcgan_core::models::{NetSpec, Network, Param, Role, TranslationModel};
use gcgan_core::optim::Adam;
use gcgan_core::training::{ImageBuffer, RngState, TrainConfig, TrainState, Trainer};
use gcgan_core::{Shape, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"GCGANCKP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct NetEntry {
    role: String,
    spec: NetSpec,
    adam_steps: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct BufferEntry {
    role: String,
    capacity: usize,
    count: usize,
    rng: RngState,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Shape,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    library_version: String,
    config: TrainConfig,
    /// Next epoch to run.
    epoch: usize,
    step: usize,
    networks: Vec<NetEntry>,
    buffers: Vec<BufferEntry>,
    tensors: Vec<TensorEntry>,
}

fn corrupt(path: &Path, msg: impl Into<String>) -> Error {
    Error::Checkpoint { path: path.to_path_buf(), msg: msg.into() }
}

/// Serializes the whole training state.
pub fn encode(trainer: &Trainer<f32>) -> Result<Vec<u8>> {
    let state = &trainer.state;
    let model = &state.model;
    let mut networks = Vec::new();
    let mut tensors: Vec<(String, &Tensor<f32>)> = Vec::new();
    for (role, id) in model.distinct() {
        let net = model.by_id(id);
        let adam = &state.optimizers[id];
        networks.push(NetEntry { role: role.name().into(), spec: *net.spec(), adam_steps: adam.steps });
        for (i, p) in net.params().iter().enumerate() {
            tensors.push((format!("{}/{}", role.name(), p.name), &p.value));
            tensors.push((format!("{}/adam.m/{}", role.name(), p.name), &adam.m[i]));
            tensors.push((format!("{}/adam.v/{}", role.name(), p.name), &adam.v[i]));
        }
    }
    let mut buffers = Vec::new();
    for (role, buf) in &state.buffers {
        buffers.push(BufferEntry {
            role: role.name().into(),
            capacity: buf.capacity(),
            count: buf.images().len(),
            rng: buf.rng_state(),
        });
        for (k, img) in buf.images().iter().enumerate() {
            tensors.push((format!("buffer/{}/{k}", role.name()), img));
        }
    }
    let header = Header {
        library_version: env!("CARGO_PKG_VERSION").into(),
        config: trainer.cfg.clone(),
        epoch: trainer.epoch,
        step: trainer.step,
        networks,
        buffers,
        tensors: tensors.iter().map(|(n, t)| TensorEntry { name: n.clone(), shape: t.shape() }).collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Invalid(e.to_string()))?;
    let payload: usize = tensors.iter().map(|(_, t)| t.len() * 4).sum();
    let mut out = Vec::with_capacity(20 + json.len() + payload);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in &tensors {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Writes to a sibling temporary file and renames it over `path`, so a
/// reader never sees a partial checkpoint.
pub fn save(path: &Path, trainer: &Trainer<f32>) -> Result<()> {
    let bytes = encode(trainer)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(Error::io(&tmp))?;
        f.write_all(&bytes).map_err(Error::io(&tmp))?;
        f.sync_all().map_err(Error::io(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(Error::io(path))
}

struct Parsed {
    header: Header,
    tensors: Vec<(String, Tensor<f32>)>,
}

fn parse(path: &Path, bytes: &[u8]) -> Result<Parsed> {
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(corrupt(path, "not a gcgan checkpoint"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch { path: path.to_path_buf(), found: version, expected: FORMAT_VERSION });
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = &bytes[20..];
    if body.len() < len {
        return Err(corrupt(path, "truncated header"));
    }
    let header: Header = serde_json::from_slice(&body[..len]).map_err(|e| corrupt(path, format!("bad header: {e}")))?;
    let mut data = &body[len..];
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for entry in &header.tensors {
        let n: usize = entry.shape.iter().product();
        if data.len() < n * 4 {
            return Err(corrupt(path, format!("truncated data for `{}`", entry.name)));
        }
        let values = data[..n * 4].chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect();
        data = &data[n * 4..];
        tensors.push((entry.name.clone(), Tensor::from_vec(entry.shape, values)?));
    }
    if !data.is_empty() {
        return Err(corrupt(path, format!("{} trailing bytes", data.len())));
    }
    Ok(Parsed { header, tensors })
}

fn read(path: &Path) -> Result<Parsed> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    parse(path, &bytes)
}

impl Parsed {
    fn take(&mut self, path: &Path, name: &str) -> Result<Tensor<f32>> {
        let i = self
            .tensors
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| corrupt(path, format!("missing tensor `{name}`")))?;
        Ok(self.tensors.swap_remove(i).1)
    }

    fn network(&mut self, path: &Path, entry: &NetEntry) -> Result<(Network<f32>, Adam<f32>)> {
        let blank = Network::<f32>::new(entry.spec, 0)?;
        let mut params = Vec::new();
        let (mut m, mut v) = (Vec::new(), Vec::new());
        for p in blank.params() {
            params.push(Param { name: p.name.clone(), value: self.take(path, &format!("{}/{}", entry.role, p.name))? });
            m.push(self.take(path, &format!("{}/adam.m/{}", entry.role, p.name))?);
            v.push(self.take(path, &format!("{}/adam.v/{}", entry.role, p.name))?);
        }
        let net = Network::from_params(entry.spec, params)?;
        Ok((net, Adam { config: Default::default(), steps: entry.adam_steps, m, v }))
    }
}

fn role(path: &Path, name: &str) -> Result<Role> {
    Role::from_name(name).ok_or_else(|| corrupt(path, format!("unknown network role `{name}`")))
}

/// Restores a trainer exactly as it was saved.
pub fn load(path: &Path) -> Result<Trainer<f32>> {
    let mut parsed = read(path)?;
    let header = parsed.header.clone();
    let cfg = header.config.clone();
    let mut parts = Vec::new();
    let mut adams = Vec::new();
    for entry in &header.networks {
        let (net, mut adam) = parsed.network(path, entry)?;
        adam.config = cfg.adam;
        let r = role(path, &entry.role)?;
        parts.push((r, net));
        adams.push((r, adam));
    }
    let model = TranslationModel::from_parts(cfg.sharing, parts)?;
    let mut state = TrainState::from_model(model, &cfg);
    for (r, adam) in adams {
        let id = state.model.id(r).expect("role just inserted");
        state.optimizers[id] = adam;
    }
    state.buffers.clear();
    for b in &header.buffers {
        let images = (0..b.count)
            .map(|k| parsed.take(path, &format!("buffer/{}/{k}", b.role)))
            .collect::<Result<Vec<_>>>()?;
        state.buffers.push((role(path, &b.role)?, ImageBuffer::from_parts(b.capacity, images, b.rng)?));
    }
    Ok(Trainer { cfg, state, epoch: header.epoch, step: header.step })
}

/// Only the deliverable translator `G_XY`, plus the config it was trained
/// with.
pub fn load_translator(path: &Path) -> Result<(Network<f32>, TrainConfig)> {
    let mut parsed = read(path)?;
    let entry = parsed
        .header
        .networks
        .iter()
        .find(|n| n.role == Role::Gxy.name())
        .cloned()
        .ok_or_else(|| corrupt(path, "no g_xy network"))?;
    let (net, _) = parsed.network(path, &entry)?;
    Ok((net, parsed.header.config))
}
