//! CNN feature extraction per variable followed by graph propagation over the
//! causality graph and a per-node scalar readout.

mod checkpoint;
mod config;
mod layers;

pub use checkpoint::{Checkpoint, CheckpointMeta, FORMAT_VERSION};
pub use config::{GnnVariant, ModelConfig, NeighborMode, Readout};
pub use layers::{gin_layer, kgnn_layer, neighbor_matrix, GinVars};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ParamId, Parameters, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
struct ConvIds {
    weight: ParamId,
    bias: ParamId,
}

#[derive(Clone, Debug, PartialEq)]
enum LayerIds {
    KGnn {
        w_self: ParamId,
        w_neigh: ParamId,
    },
    Gin {
        eps: ParamId,
        w1: ParamId,
        b1: ParamId,
        w2: ParamId,
        b2: ParamId,
    },
}

#[derive(Clone, Debug, PartialEq)]
enum ReadoutIds {
    Linear { weight: ParamId, bias: ParamId },
    Gnn { w_self: ParamId, w_neigh: ParamId },
}

/// Model parameters plus the architecture they belong to.
#[derive(Clone, Debug, PartialEq)]
pub struct CauGnnModel {
    config: ModelConfig,
    params: Parameters,
    convs: Vec<ConvIds>,
    layers: Vec<LayerIds>,
    readout: ReadoutIds,
}

/// Expected `(name, shape, fan_in)` for every parameter, in registration order.
fn parameter_plan(config: &ModelConfig) -> Vec<(String, Vec<usize>, usize)> {
    let mut plan = Vec::new();
    if config.use_cnn {
        for (i, &k) in config.kernel_sizes.iter().enumerate() {
            let c = config.channels_per_kernel;
            plan.push((format!("conv{i}.weight"), vec![c, k], k));
            plan.push((format!("conv{i}.bias"), vec![c], k));
        }
    }
    let mut d_in = config.feature_dim();
    for (l, &d_out) in config.gnn_hidden.iter().enumerate() {
        match config.variant {
            GnnVariant::KGnn => {
                plan.push((format!("gnn{l}.w_self"), vec![d_in, d_out], d_in));
                plan.push((format!("gnn{l}.w_neigh"), vec![d_in, d_out], d_in));
            }
            GnnVariant::Gin => {
                plan.push((format!("gin{l}.eps"), vec![1], 0));
                plan.push((format!("gin{l}.w1"), vec![d_in, d_out], d_in));
                plan.push((format!("gin{l}.b1"), vec![1, d_out], d_in));
                plan.push((format!("gin{l}.w2"), vec![d_out, d_out], d_out));
                plan.push((format!("gin{l}.b2"), vec![1, d_out], d_out));
            }
        }
        d_in = d_out;
    }
    match config.readout {
        Readout::Linear => {
            plan.push(("readout.weight".into(), vec![d_in, 1], d_in));
            plan.push(("readout.bias".into(), vec![1], d_in));
        }
        Readout::GnnLayer => {
            plan.push(("readout.w_self".into(), vec![d_in, 1], d_in));
            plan.push(("readout.w_neigh".into(), vec![d_in, 1], d_in));
        }
    }
    plan
}

impl CauGnnModel {
    /// Fresh model; weights are uniform in `+-1/sqrt(fan_in)`, GIN `eps` starts at 0.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Parameters::new();
        for (name, shape, fan_in) in parameter_plan(&config) {
            let len: usize = shape.iter().product();
            let data = if fan_in == 0 {
                vec![0.0; len]
            } else {
                let bound = 1.0 / (fan_in as f64).sqrt();
                (0..len).map(|_| rng.random_range(-bound..bound)).collect()
            };
            params.insert(name, Tensor::new(shape, data)?);
        }
        Self::from_parameters(config, params)
    }

    /// Rebinds a parameter collection (e.g. loaded from a checkpoint) to `config`.
    pub fn from_parameters(config: ModelConfig, params: Parameters) -> Result<Self> {
        config.validate()?;
        let plan = parameter_plan(&config);
        if plan.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter arrays, found {}",
                plan.len(),
                params.len()
            )));
        }
        for (name, shape, _) in &plan {
            let id = params
                .find(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))?;
            if params.get(id).shape() != shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "parameter `{}` has shape {:?}, expected {:?}",
                    name,
                    params.get(id).shape(),
                    shape
                )));
            }
        }
        let id = |name: String| params.find(&name).expect("checked above");
        let convs = if config.use_cnn {
            (0..config.kernel_sizes.len())
                .map(|i| ConvIds {
                    weight: id(format!("conv{i}.weight")),
                    bias: id(format!("conv{i}.bias")),
                })
                .collect()
        } else {
            Vec::new()
        };
        let layers = (0..config.gnn_hidden.len())
            .map(|l| match config.variant {
                GnnVariant::KGnn => LayerIds::KGnn {
                    w_self: id(format!("gnn{l}.w_self")),
                    w_neigh: id(format!("gnn{l}.w_neigh")),
                },
                GnnVariant::Gin => LayerIds::Gin {
                    eps: id(format!("gin{l}.eps")),
                    w1: id(format!("gin{l}.w1")),
                    b1: id(format!("gin{l}.b1")),
                    w2: id(format!("gin{l}.w2")),
                    b2: id(format!("gin{l}.b2")),
                },
            })
            .collect();
        let readout = match config.readout {
            Readout::Linear => ReadoutIds::Linear {
                weight: id("readout.weight".into()),
                bias: id("readout.bias".into()),
            },
            Readout::GnnLayer => ReadoutIds::Gnn {
                w_self: id("readout.w_self".into()),
                w_neigh: id("readout.w_neigh".into()),
            },
        };
        Ok(Self {
            config,
            params,
            convs,
            layers,
            readout,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Parameters {
        &mut self.params
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim()
    }

    /// `[B*n, W]` scaled windows to `[B*n, d]` node features: per kernel,
    /// `channels` valid convolutions with ReLU, flattened channel-major and
    /// concatenated across kernels. Without the CNN the input is returned.
    pub fn extract_features(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let shape = tape.shape(x).to_vec();
        if shape.len() != 2 || shape[1] != self.config.window {
            return Err(Error::Shape {
                op: "extract_features",
                lhs: shape,
                rhs: vec![self.config.window],
            });
        }
        if !self.config.use_cnn {
            return Ok(x);
        }
        let rows = shape[0];
        let mut parts = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            let w = tape.param(&self.params, conv.weight);
            let b = tape.param(&self.params, conv.bias);
            let y = tape.conv1d(x, w, Some(b))?;
            let y = tape.relu(y);
            let width = tape.shape(y)[1] * tape.shape(y)[2];
            parts.push(tape.reshape(y, &[rows, width])?);
        }
        tape.concat(&parts, 1)
    }

    /// Records the full forward pass for `batch` samples.
    ///
    /// `windows` holds `batch` consecutive `n x W` scaled windows; `neighbors`
    /// is the `n x n` matrix from [`neighbor_matrix`]. Returns `[batch, n]`
    /// predictions in scaled units.
    pub fn forward(&self, tape: &mut Tape, windows: &[f64], batch: usize, neighbors: &Tensor) -> Result<Var> {
        let w = self.config.window;
        let ns = neighbors.shape();
        if ns.len() != 2 || ns[0] != ns[1] {
            return Err(Error::InvalidShape(format!("neighbor matrix must be square, got {ns:?}")));
        }
        let n = ns[0];
        if batch == 0 || windows.len() != batch * n * w {
            return Err(Error::Shape {
                op: "forward",
                lhs: vec![batch, n, w],
                rhs: vec![windows.len()],
            });
        }
        let rows = batch * n;
        let x = tape.constant(Tensor::matrix(rows, w, windows.to_vec())?);
        let mut h = self.extract_features(tape, x)?;
        let mix = tape.constant(neighbors.clone());
        for layer in &self.layers {
            h = match *layer {
                LayerIds::KGnn { w_self, w_neigh } => {
                    let ws = tape.param(&self.params, w_self);
                    let wn = tape.param(&self.params, w_neigh);
                    kgnn_layer(tape, h, mix, ws, wn, true)?
                }
                LayerIds::Gin { eps, w1, b1, w2, b2 } => {
                    let vars = GinVars {
                        eps: tape.param(&self.params, eps),
                        w1: tape.param(&self.params, w1),
                        b1: tape.param(&self.params, b1),
                        w2: tape.param(&self.params, w2),
                        b2: tape.param(&self.params, b2),
                    };
                    gin_layer(tape, h, mix, vars)?
                }
            };
        }
        let out = match self.readout {
            ReadoutIds::Linear { weight, bias } => {
                let wv = tape.param(&self.params, weight);
                let bv = tape.param(&self.params, bias);
                let y = tape.matmul(h, wv)?;
                tape.add(y, bv)?
            }
            ReadoutIds::Gnn { w_self, w_neigh } => {
                let ws = tape.param(&self.params, w_self);
                let wn = tape.param(&self.params, w_neigh);
                kgnn_layer(tape, h, mix, ws, wn, false)?
            }
        };
        tape.reshape(out, &[batch, n])
    }

    /// Inference without gradient bookkeeping beyond one throwaway tape.
    pub fn predict_batch(&self, windows: &[f64], batch: usize, neighbors: &Tensor) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, windows, batch, neighbors)?;
        Ok(tape.value(out).to_vec())
    }

    /// One `n x W` window and a row-major `n x n` adjacency to `n` scaled predictions.
    pub fn predict(&self, window: &[f64], adjacency: &[f64]) -> Result<Vec<f64>> {
        let n = window.len() / self.config.window.max(1);
        if n * self.config.window != window.len() {
            return Err(Error::Shape {
                op: "predict",
                lhs: vec![window.len()],
                rhs: vec![self.config.window],
            });
        }
        if adjacency.len() != n * n {
            return Err(Error::Shape {
                op: "predict: adjacency",
                lhs: vec![n, n],
                rhs: vec![adjacency.len()],
            });
        }
        let mix = self.neighbors(adjacency, n)?;
        self.predict_batch(window, 1, &mix)
    }

    /// Neighbor matrix for this model's causality and neighbor settings.
    pub fn neighbors(&self, adjacency: &[f64], n: usize) -> Result<Tensor> {
        neighbor_matrix(adjacency, n, self.config.use_causality, self.config.neighbor_mode)
    }
}
