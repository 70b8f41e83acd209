//! On-disk checkpoint: a directory holding
//!
//! * `manifest.txt`: `key=value` lines (format version, architecture, variable
//!   names, scale vector, split bounds, seed, causality settings, and the
//!   declared shape of every parameter array);
//! * `params.bin`: named little-endian `f64` arrays with their shapes;
//! * `causality.csv`: the net transfer-entropy matrix the model was trained on.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{CauGnnModel, ModelConfig};
use crate::autodiff::{Parameters, Tensor};
use crate::causality::{CausalityConfig, CausalityMatrix};
use crate::data::SplitBounds;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const PAYLOAD_MAGIC: &[u8; 8] = b"CGNNPAR1";

/// Everything besides weights needed to reproduce predictions on a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointMeta {
    pub variable_names: Vec<String>,
    pub scale: Vec<f64>,
    pub split: SplitBounds,
    pub horizon: usize,
    pub seed: u64,
    pub causality: CausalityConfig,
    pub dataset_sha256: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: CauGnnModel,
    pub meta: CheckpointMeta,
    pub causality: CausalityMatrix,
}

fn list<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn parse_list<T: std::str::FromStr>(key: &str, s: &str) -> Result<Vec<T>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::Checkpoint(format!("bad value `{v}` for `{key}`")))
        })
        .collect()
}

struct Manifest(BTreeMap<String, String>);

impl Manifest {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                row: i + 1,
                msg: format!("expected key=value, got `{line}`"),
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self(map))
    }

    fn raw(&self, key: &str) -> Result<&str> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Checkpoint(format!("manifest lacks `{key}`")))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.raw(key)?;
        v.parse()
            .map_err(|_| Error::Checkpoint(format!("bad value `{v}` for `{key}`")))
    }
}

impl Checkpoint {
    pub fn manifest_text(&self) -> String {
        let c = self.model.config();
        let m = &self.meta;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k}={v}").unwrap();
        kv("format_version", FORMAT_VERSION.to_string());
        kv("variant", c.variant.to_string());
        kv("kernel_sizes", list(&c.kernel_sizes));
        kv("channels_per_kernel", c.channels_per_kernel.to_string());
        kv("gnn_hidden", list(&c.gnn_hidden));
        kv("window", c.window.to_string());
        kv("use_causality", c.use_causality.to_string());
        kv("use_cnn", c.use_cnn.to_string());
        kv("neighbor_mode", c.neighbor_mode.to_string());
        kv("readout", c.readout.to_string());
        kv("horizon", m.horizon.to_string());
        kv("seed", m.seed.to_string());
        kv("n_vars", m.variable_names.len().to_string());
        for (i, name) in m.variable_names.iter().enumerate() {
            kv(&format!("variable.{i}"), name.clone());
        }
        for (i, sc) in m.scale.iter().enumerate() {
            kv(&format!("scale.{i}"), sc.to_string());
        }
        kv("train_end", m.split.train_end.to_string());
        kv("valid_end", m.split.valid_end.to_string());
        kv("bins", m.causality.bins.to_string());
        kv("k", m.causality.k.to_string());
        kv("l", m.causality.l.to_string());
        kv("threshold", m.causality.threshold.to_string());
        if let Some(h) = &m.dataset_sha256 {
            kv("dataset_sha256", h.clone());
        }
        for (_, name, t) in self.model.params().iter() {
            kv(&format!("param.{name}"), list(t.shape()));
        }
        s
    }

    pub fn payload_bytes(&self) -> Vec<u8> {
        let params = self.model.params();
        let mut out = Vec::with_capacity(16 + params.element_count() * 8);
        out.extend_from_slice(PAYLOAD_MAGIC);
        out.extend_from_slice(&(params.len() as u32).to_le_bytes());
        for (_, name, t) in params.iter() {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("manifest.txt"), self.manifest_text())?;
        std::fs::write(dir.join("params.bin"), self.payload_bytes())?;
        self.causality.save(dir.join("causality.csv"))?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest = Manifest::parse(&std::fs::read_to_string(dir.join("manifest.txt"))?)?;
        let version: u32 = manifest.get("format_version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let config = ModelConfig {
            kernel_sizes: parse_list("kernel_sizes", manifest.raw("kernel_sizes")?)?,
            channels_per_kernel: manifest.get("channels_per_kernel")?,
            gnn_hidden: parse_list("gnn_hidden", manifest.raw("gnn_hidden")?)?,
            window: manifest.get("window")?,
            variant: manifest.raw("variant")?.parse()?,
            use_causality: manifest.get("use_causality")?,
            use_cnn: manifest.get("use_cnn")?,
            neighbor_mode: manifest.raw("neighbor_mode")?.parse()?,
            readout: manifest.raw("readout")?.parse()?,
        };
        let n: usize = manifest.get("n_vars")?;
        let variable_names = (0..n)
            .map(|i| manifest.raw(&format!("variable.{i}")).map(str::to_string))
            .collect::<Result<_>>()?;
        let scale = (0..n)
            .map(|i| manifest.get(&format!("scale.{i}")))
            .collect::<Result<_>>()?;
        let meta = CheckpointMeta {
            variable_names,
            scale,
            split: SplitBounds {
                train_end: manifest.get("train_end")?,
                valid_end: manifest.get("valid_end")?,
            },
            horizon: manifest.get("horizon")?,
            seed: manifest.get("seed")?,
            causality: CausalityConfig {
                bins: manifest.get("bins")?,
                k: manifest.get("k")?,
                l: manifest.get("l")?,
                threshold: manifest.get("threshold")?,
            },
            dataset_sha256: manifest.0.get("dataset_sha256").cloned(),
        };

        let params = parse_payload(&std::fs::read(dir.join("params.bin"))?)?;
        for (_, name, t) in params.iter() {
            let declared: Vec<usize> = parse_list(name, manifest.raw(&format!("param.{name}"))?)?;
            if declared != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "`{}` declared as {:?} in the manifest but stored as {:?}",
                    name,
                    declared,
                    t.shape()
                )));
            }
        }
        let model = CauGnnModel::from_parameters(config, params)?;
        let causality = CausalityMatrix::load(dir.join("causality.csv"))?;
        if causality.names() != meta.variable_names.as_slice() {
            return Err(Error::SchemaMismatch {
                expected: meta.variable_names.clone(),
                found: causality.names().to_vec(),
            });
        }
        Ok(Self {
            model,
            meta,
            causality,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("parameter payload is truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn parse_payload(bytes: &[u8]) -> Result<Parameters> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != PAYLOAD_MAGIC {
        return Err(Error::Checkpoint("parameter payload has a bad magic header".into()));
    }
    let count = r.u32()?;
    let mut params = Parameters::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let numel: usize = shape.iter().product();
        let raw = r.take(numel.checked_mul(8).ok_or_else(|| Error::Checkpoint("array too large".into()))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        params.insert(name, Tensor::new(shape, data)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after parameter payload".into()));
    }
    Ok(params)
}
