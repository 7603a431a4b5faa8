//! Versioned binary checkpoint of a [`Trainer`]: header, network tensors,
//! optimiser moments and the latent bank. Values are stored as `f64` so a
//! resumed run continues bit for bit.

use std::fs;
use std::path::Path;

use super::optim::MomentBuffer;
use super::trainer::NetworkMoments;
use super::{CurriculumSchedule, LatentBank, TrainConfig, Trainer};
use crate::dataset::ShapeSamples;
use crate::error::{Result, SdfError};
use crate::model::{GrowthState, LatentCode, Layer, MlpNetwork, NetworkConfig};

const MAGIC: &[u8; 8] = b"CSDFCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64s(&mut self, v: &[f64]) {
        self.usize(v.len());
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
    fn str(&mut self, s: &str) {
        self.usize(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
    fn layer(&mut self, l: &Layer) {
        self.usize(l.in_dim);
        self.usize(l.out_dim);
        self.f64s(&l.weight);
        self.f64s(&l.bias);
    }
    fn moments(&mut self, m: &MomentBuffer) {
        self.u64(m.step);
        self.f64s(&m.m);
        self.f64s(&m.v);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(SdfError::parse(self.pos as u64, "unexpected end of checkpoint"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        let at = self.pos;
        usize::try_from(self.u64()?).map_err(|_| SdfError::parse(at as u64, "length overflow"))
    }
    fn len(&mut self, item: usize) -> Result<usize> {
        let at = self.pos;
        let n = self.usize()?;
        if n.saturating_mul(item) > self.bytes.len() - self.pos {
            return Err(SdfError::parse(at as u64, format!("length {n} exceeds the file")));
        }
        Ok(n)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn str(&mut self) -> Result<String> {
        let n = self.len(1)?;
        let at = self.pos;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| SdfError::parse(at as u64, "invalid UTF-8"))
    }
    fn layer(&mut self) -> Result<Layer> {
        Ok(Layer {
            in_dim: self.usize()?,
            out_dim: self.usize()?,
            weight: self.f64s()?,
            bias: self.f64s()?,
        })
    }
    fn moments(&mut self) -> Result<MomentBuffer> {
        Ok(MomentBuffer {
            step: self.u64()?,
            m: self.f64s()?,
            v: self.f64s()?,
        })
    }
}

impl Trainer {
    pub fn checkpoint_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.0.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        w.str(&self.tag);
        w.u64(self.cfg.seed);
        w.usize(self.epoch);
        let c = self.net.config();
        for v in [c.latent_dim, c.hidden_width, c.max_depth, c.skip_layer] {
            w.usize(v);
        }
        let g = self.net.growth();
        w.usize(g.active_depth);
        w.0.extend_from_slice(&g.alpha.to_le_bytes());
        w.0.push(g.fading as u8);
        for l in self.net.hidden_layers() {
            w.layer(l);
        }
        w.layer(self.net.output_layer());
        for pair in self.moments.hidden.iter().chain(std::iter::once(&self.moments.output)) {
            w.moments(&pair[0]);
            w.moments(&pair[1]);
        }
        w.usize(self.bank.len());
        for i in 0..self.bank.len() {
            w.str(&self.bank.ids[i]);
            w.f64s(&self.bank.codes[i].0);
            w.moments(&self.bank.moments[i]);
        }
        w.0
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.checkpoint_bytes())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Rebuilds a trainer from checkpoint bytes. The dataset, schedule and
    /// config are supplied by the caller and must match the original run;
    /// the seed and shape ids are checked.
    pub fn from_checkpoint_bytes(bytes: &[u8], dataset: &[ShapeSamples], schedule: CurriculumSchedule, cfg: TrainConfig) -> Result<Trainer> {
        let state = read_state(bytes)?;
        if state.seed != cfg.seed {
            return Err(SdfError::invalid(format!(
                "checkpoint was trained with seed {} but the config says {}",
                state.seed, cfg.seed
            )));
        }
        Trainer::restore(dataset, state.net, state.bank, state.moments, state.epoch, state.tag, schedule, cfg)
    }

    pub fn load_checkpoint(path: &Path, dataset: &[ShapeSamples], schedule: CurriculumSchedule, cfg: TrainConfig) -> Result<Trainer> {
        let bytes = fs::read(path).map_err(|e| SdfError::File {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        Self::from_checkpoint_bytes(&bytes, dataset, schedule, cfg)
    }
}

/// Everything a checkpoint holds.
pub struct CheckpointState {
    pub tag: String,
    pub seed: u64,
    pub epoch: usize,
    pub net: MlpNetwork,
    pub bank: LatentBank,
    pub(crate) moments: NetworkMoments,
}

pub fn read_state(bytes: &[u8]) -> Result<CheckpointState> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8).ok() != Some(MAGIC.as_slice()) {
        return Err(SdfError::parse(0, "not a checkpoint file"));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(SdfError::CheckpointVersion {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let tag = r.str()?;
    let seed = r.u64()?;
    let epoch = r.usize()?;
    let config = NetworkConfig {
        latent_dim: r.usize()?,
        hidden_width: r.usize()?,
        max_depth: r.usize()?,
        skip_layer: r.usize()?,
    };
    let growth = GrowthState {
        active_depth: r.usize()?,
        alpha: r.f64()?,
        fading: r.take(1)?[0] != 0,
    };
    let at = r.pos as u64;
    if growth.active_depth > config.max_depth {
        return Err(SdfError::parse(at, "active depth exceeds max depth"));
    }
    let hidden = (0..growth.active_depth).map(|_| r.layer()).collect::<Result<Vec<_>>>()?;
    let output = r.layer()?;
    let latent_dim = config.latent_dim;
    let net = MlpNetwork::from_parts(config, hidden, output, growth)?;
    let pair = |r: &mut Reader, l: &Layer| -> Result<[MomentBuffer; 2]> {
        let at = r.pos as u64;
        let p = [r.moments()?, r.moments()?];
        if p[0].m.len() != l.weight.len() || p[1].m.len() != l.bias.len() || p[0].v.len() != p[0].m.len() || p[1].v.len() != p[1].m.len() {
            return Err(SdfError::parse(at, "optimizer state does not match the layer"));
        }
        Ok(p)
    };
    let mut hidden_m = Vec::with_capacity(net.hidden_layers().len());
    for l in net.hidden_layers() {
        hidden_m.push(pair(&mut r, l)?);
    }
    let output_m = pair(&mut r, net.output_layer())?;
    let n = r.len(8)?;
    let mut ids = Vec::with_capacity(n);
    let mut codes = Vec::with_capacity(n);
    let mut moments = Vec::with_capacity(n);
    for _ in 0..n {
        ids.push(r.str()?);
        let at = r.pos as u64;
        let code = r.f64s()?;
        let m = r.moments()?;
        if code.len() != latent_dim || m.m.len() != code.len() || m.v.len() != code.len() {
            return Err(SdfError::parse(at, "latent code has the wrong dimension"));
        }
        codes.push(LatentCode(code));
        moments.push(m);
    }
    if r.pos != bytes.len() {
        return Err(SdfError::parse(r.pos as u64, "trailing bytes"));
    }
    Ok(CheckpointState {
        tag,
        seed,
        epoch,
        net,
        bank: LatentBank { ids, codes, moments },
        moments: NetworkMoments {
            hidden: hidden_m,
            output: output_m,
        },
    })
}
