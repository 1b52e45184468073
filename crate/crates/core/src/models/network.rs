//! The three model families behind one type.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numcore::{mse_loss_masked, Differentiable, LstmNet, Mlp, Param, Prng, Tensor2};

/// Architecture of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NetworkKind {
    /// `[1, hidden, hidden, 1]` ReLU network on the current sample.
    Fnn { hidden: usize },
    /// `[window, hidden, hidden, 1]` ReLU network on a history buffer.
    FnnHib { window: usize, hidden: usize },
    /// Stacked LSTM with an affine head.
    Lstm { layers: usize, hidden: usize },
}

impl NetworkKind {
    pub fn fnn() -> Self {
        NetworkKind::Fnn { hidden: 64 }
    }

    pub fn fnn_hib(window: usize) -> Self {
        NetworkKind::FnnHib { window, hidden: 64 }
    }

    pub fn lstm() -> Self {
        NetworkKind::Lstm { layers: 2, hidden: 64 }
    }

    /// The three default families in reporting order.
    pub fn defaults(window: usize) -> [NetworkKind; 3] {
        [Self::fnn(), Self::fnn_hib(window), Self::lstm()]
    }

    pub fn key(self) -> &'static str {
        match self {
            NetworkKind::Fnn { .. } => "fnn",
            NetworkKind::FnnHib { .. } => "fnn-hib",
            NetworkKind::Lstm { .. } => "lstm",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            NetworkKind::Fnn { .. } => "FNN",
            NetworkKind::FnnHib { .. } => "FNN-HIB",
            NetworkKind::Lstm { .. } => "LSTM",
        }
    }

    /// Same family with a different hidden width.
    pub fn with_hidden(self, hidden: usize) -> Self {
        match self {
            NetworkKind::Fnn { .. } => NetworkKind::Fnn { hidden },
            NetworkKind::FnnHib { window, .. } => NetworkKind::FnnHib { window, hidden },
            NetworkKind::Lstm { layers, .. } => NetworkKind::Lstm { layers, hidden },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NetworkKind::Fnn { hidden } => hidden >= 1,
            NetworkKind::FnnHib { window, hidden } => window >= 1 && hidden >= 1,
            NetworkKind::Lstm { layers, hidden } => layers >= 1 && hidden >= 1,
        };
        if !ok {
            return Err(Error::InvalidParam(format!("invalid network kind {self:?}")));
        }
        Ok(())
    }

    /// Compact text form, e.g. `fnn-hib(window=50,hidden=64)`.
    pub fn describe(&self) -> String {
        match *self {
            NetworkKind::Fnn { hidden } => format!("fnn(hidden={hidden})"),
            NetworkKind::FnnHib { window, hidden } => format!("fnn-hib(window={window},hidden={hidden})"),
            NetworkKind::Lstm { layers, hidden } => format!("lstm(layers={layers},hidden={hidden})"),
        }
    }

    /// Parses [`describe`](Self::describe) output.
    pub fn parse_described(s: &str) -> Result<Self> {
        let bad = || Error::ModelFormat(format!("cannot parse network kind '{s}'"));
        let (name, rest) = s.trim().split_once('(').ok_or_else(bad)?;
        let args = rest.strip_suffix(')').ok_or_else(bad)?;
        let mut window = None;
        let mut hidden = None;
        let mut layers = None;
        for kv in args.split(',').filter(|a| !a.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(bad)?;
            let v: usize = v.trim().parse().map_err(|_| bad())?;
            match k.trim() {
                "window" => window = Some(v),
                "hidden" => hidden = Some(v),
                "layers" => layers = Some(v),
                _ => return Err(bad()),
            }
        }
        let kind = match name.trim() {
            "fnn" => NetworkKind::Fnn { hidden: hidden.ok_or_else(bad)? },
            "fnn-hib" => NetworkKind::FnnHib {
                window: window.ok_or_else(bad)?,
                hidden: hidden.ok_or_else(bad)?,
            },
            "lstm" => NetworkKind::Lstm {
                layers: layers.ok_or_else(bad)?,
                hidden: hidden.ok_or_else(bad)?,
            },
            _ => return Err(bad()),
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Parses a family name (`fnn`, `fnn-hib`, `lstm`) into its default architecture.
/// The buffered model gets a 50-sample window; callers override it from config.
impl FromStr for NetworkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fnn" => Ok(NetworkKind::fnn()),
            "fnn-hib" | "fnn_hib" | "fnnhib" => Ok(NetworkKind::fnn_hib(50)),
            "lstm" => Ok(NetworkKind::lstm()),
            other => Err(Error::InvalidParam(format!(
                "unknown model kind '{other}' (expected fnn, fnn-hib or lstm)"
            ))),
        }
    }
}

/// Model parameters for one of the three families.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Mlp(Mlp),
    Lstm(LstmNet),
}

impl Network {
    pub fn new(kind: NetworkKind, rng: &mut Prng) -> Result<Self> {
        kind.validate()?;
        Ok(match kind {
            NetworkKind::Fnn { hidden } => Network::Mlp(Mlp::new(&[1, hidden, hidden, 1], rng)),
            NetworkKind::FnnHib { window, hidden } => Network::Mlp(Mlp::new(&[window, hidden, hidden, 1], rng)),
            NetworkKind::Lstm { layers, hidden } => Network::Lstm(LstmNet::new(1, hidden, layers, 1, rng)),
        })
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            Network::Mlp(m) => m.params(),
            Network::Lstm(l) => l.params(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Network::Mlp(m) => m.params_mut(),
            Network::Lstm(l) => l.params_mut(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Stable names for every parameter tensor, in [`params`](Self::params) order.
    pub fn param_names(&self) -> Vec<String> {
        match self {
            Network::Mlp(m) => (1..=m.layers.len())
                .flat_map(|i| [format!("fc{i}.W"), format!("fc{i}.b")])
                .collect(),
            Network::Lstm(l) => {
                let mut names: Vec<String> = (1..=l.layers.len())
                    .flat_map(|i| [format!("lstm{i}.W"), format!("lstm{i}.U"), format!("lstm{i}.b")])
                    .collect();
                names.push("head.W".into());
                names.push("head.b".into());
                names
            }
        }
    }

    /// Expected `(rows, cols)` of every parameter tensor for `kind`.
    pub fn expected_shapes(kind: NetworkKind) -> Vec<(usize, usize)> {
        match kind {
            NetworkKind::Fnn { hidden } => vec![(hidden, 1), (1, hidden), (hidden, hidden), (1, hidden), (1, hidden), (1, 1)],
            NetworkKind::FnnHib { window, hidden } => {
                vec![(hidden, window), (1, hidden), (hidden, hidden), (1, hidden), (1, hidden), (1, 1)]
            }
            NetworkKind::Lstm { layers, hidden } => {
                let mut v = Vec::new();
                for l in 0..layers {
                    let inp = if l == 0 { 1 } else { hidden };
                    v.extend([(inp, 4 * hidden), (hidden, 4 * hidden), (1, 4 * hidden)]);
                }
                v.extend([(1, hidden), (1, 1)]);
                v
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Loss (and, with `grad`, accumulated gradients) on one batch.
    pub fn batch_loss(&mut self, batch: &Batch, grad: bool) -> Result<f64> {
        match (self, batch) {
            (Network::Mlp(m), Batch::Rows { x, y }) => {
                let (pred, cache) = m.forward(x)?;
                let mask = vec![true; y.len()];
                let (loss, g) = mse_loss_masked(pred.data(), y, &mask)?;
                if grad {
                    let dy = Tensor2::from_vec(pred.rows(), 1, g)?;
                    m.backward(&cache, &dy)?;
                }
                Ok(loss)
            }
            (Network::Lstm(l), Batch::Sequences { xs, batch, y, mask }) => {
                let (pred, cache) = l.forward(xs, *batch)?;
                let (loss, g) = mse_loss_masked(pred.data(), y, mask)?;
                if grad {
                    let dy = Tensor2::from_vec(pred.rows(), 1, g)?;
                    l.backward(&cache, &dy)?;
                }
                Ok(loss)
            }
            _ => Err(Error::InvalidParam("batch layout does not match the network family".into())),
        }
    }
}

/// A training or checking batch.
#[derive(Debug, Clone)]
pub enum Batch {
    /// One sample per row of `x`, scalar targets `y`.
    Rows { x: Tensor2, y: Vec<f64> },
    /// Time-major sequences (`T*B x 1`) with per-step targets and a loss mask.
    Sequences {
        xs: Tensor2,
        batch: usize,
        y: Vec<f64>,
        mask: Vec<bool>,
    },
}

/// A network bound to a fixed batch, for gradient checking.
pub struct NetworkObjective<'a> {
    pub net: &'a mut Network,
    pub batch: &'a Batch,
}

impl Differentiable for NetworkObjective<'_> {
    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.net.params_mut()
    }

    fn loss(&self) -> Result<f64> {
        // Forward-only evaluation on a scratch copy keeps `&self`.
        let mut scratch = self.net.clone();
        scratch.batch_loss(self.batch, false)
    }

    fn loss_and_grad(&mut self) -> Result<f64> {
        self.net.batch_loss(self.batch, true)
    }
}
