use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Graph layer family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GnnVariant {
    /// `h_i' = relu(h_i W1 + sum_{j in N(i)} h_j W2)`
    KGnn,
    /// `h_i' = MLP((1 + eps) h_i + sum_{j in N(i)} h_j)`
    Gin,
}

/// Which adjacency entries make `j` a neighbor of `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NeighborMode {
    /// `j` drives `i` (`adjacency[j][i] > 0`): messages flow cause to effect.
    Causes,
    /// Either direction.
    Symmetric,
}

/// How the last hidden layer is mapped to one value per node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Readout {
    /// Shared linear map `last_hidden -> 1` plus a scalar bias.
    Linear,
    /// A final k-GNN layer `last_hidden -> 1` without activation.
    GnnLayer,
}

macro_rules! text_enum {
    ($ty:ty, $what:literal, $($variant:path => $text:literal),+ $(,)?) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $text),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($variant),)+
                    other => Err(Error::Config(format!(concat!("unknown ", $what, " `{}`"), other))),
                }
            }
        }
    };
}

text_enum!(GnnVariant, "variant", GnnVariant::KGnn => "kgnn", GnnVariant::Gin => "gin");
text_enum!(NeighborMode, "neighbor mode", NeighborMode::Causes => "causes", NeighborMode::Symmetric => "symmetric");
text_enum!(Readout, "readout", Readout::Linear => "linear", Readout::GnnLayer => "gnn");

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub kernel_sizes: Vec<usize>,
    pub channels_per_kernel: usize,
    pub gnn_hidden: Vec<usize>,
    pub window: usize,
    pub variant: GnnVariant,
    /// Off: complete graph without self loops instead of the causality graph.
    pub use_causality: bool,
    /// Off: the scaled raw window is the node feature vector.
    pub use_cnn: bool,
    pub neighbor_mode: NeighborMode,
    pub readout: Readout,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kernel_sizes: vec![3, 5, 7],
            channels_per_kernel: 12,
            gnn_hidden: vec![30, 10],
            window: 32,
            variant: GnnVariant::KGnn,
            use_causality: true,
            use_cnn: true,
            neighbor_mode: NeighborMode::Causes,
            readout: Readout::Linear,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("window must be positive".into()));
        }
        if self.gnn_hidden.is_empty() || self.gnn_hidden.contains(&0) {
            return Err(Error::Config(format!(
                "GNN hidden sizes must be a nonempty list of positive sizes, got {:?}",
                self.gnn_hidden
            )));
        }
        if self.use_cnn {
            if self.kernel_sizes.is_empty() {
                return Err(Error::Config("at least one kernel size is required".into()));
            }
            if self.channels_per_kernel == 0 {
                return Err(Error::Config("channels per kernel must be >= 1".into()));
            }
            if let Some(&k) = self.kernel_sizes.iter().find(|&&k| k == 0 || k > self.window) {
                return Err(Error::Config(format!(
                    "kernel size {} does not fit a window of {}",
                    k, self.window
                )));
            }
        }
        Ok(())
    }

    /// Per-node feature length: `sum_i channels * (W - k_i + 1)`, or `W` without the CNN.
    pub fn feature_dim(&self) -> usize {
        if self.use_cnn {
            self.kernel_sizes
                .iter()
                .map(|&k| self.channels_per_kernel * (self.window + 1 - k))
                .sum()
        } else {
            self.window
        }
    }

    /// Short label for reports, e.g. `CauGNN`, `CauGIN-nCau`.
    pub fn label(&self) -> String {
        let mut s = match self.variant {
            GnnVariant::KGnn => "CauGNN".to_string(),
            GnnVariant::Gin => "CauGIN".to_string(),
        };
        if !self.use_causality {
            s.push_str("-nCau");
        }
        if !self.use_cnn {
            s.push_str("-nCNN");
        } else if self.kernel_sizes.len() == 1 {
            s.push_str("-1CNN");
        }
        s
    }
}
