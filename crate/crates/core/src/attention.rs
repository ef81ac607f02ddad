//! Single-head scaled dot-product attention and the position-wise MLP
//! shared by the encoder and decoder blocks.

use crate::error::Result;
use crate::params::{Bound, ParamId, ParamStore};
use crate::rng::SplitMix64;
use crate::tensor::{Tensor, Var};

/// Query/key/value/output projections, each `[width, width]`, no biases.
#[derive(Clone, Debug)]
pub struct AttentionWeights {
    pub width: usize,
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub wo: ParamId,
}

impl AttentionWeights {
    pub fn init(store: &mut ParamStore, prefix: &str, width: usize, rng: &mut SplitMix64) -> Self {
        let mut mat = |name: &str| {
            store.add(
                format!("{prefix}.{name}"),
                Tensor::glorot([width, width], width, width, rng),
            )
        };
        Self {
            width,
            wq: mat("wq"),
            wk: mat("wk"),
            wv: mat("wv"),
            wo: mat("wo"),
        }
    }
}

/// Attention output `[n, width]` and the row-stochastic weights `[n, m]`.
pub struct Attended<'g> {
    pub output: Var<'g>,
    pub weights: Var<'g>,
}

/// `softmax((X Wq)(C Wk)ᵀ / √width) (C Wv) Wo` for queries `X` `[n, width]`
/// and context `C` `[m, width]`.
pub fn attend<'g>(queries: &Var<'g>, context: &Var<'g>, w: &AttentionWeights, p: &Bound<'g>) -> Result<Attended<'g>> {
    let q = queries.matmul(&p[w.wq])?;
    let k = context.matmul(&p[w.wk])?;
    let v = context.matmul(&p[w.wv])?;
    let scores = q.matmul(&k.transpose()?)?.scale(1.0 / (w.width as f64).sqrt());
    let weights = scores.softmax();
    let output = weights.matmul(&v)?.matmul(&p[w.wo])?;
    Ok(Attended { output, weights })
}

/// Two-layer MLP `silu(x W1 + b1) W2 + b2` with hidden width `2 · width`.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl Mlp {
    pub fn init(store: &mut ParamStore, prefix: &str, width: usize, rng: &mut SplitMix64) -> Self {
        let hidden = 2 * width;
        Self {
            w1: store.add(
                format!("{prefix}.w1"),
                Tensor::glorot([width, hidden], width, hidden, rng),
            ),
            b1: store.add(format!("{prefix}.b1"), Tensor::zeros([hidden])),
            w2: store.add(
                format!("{prefix}.w2"),
                Tensor::glorot([hidden, width], hidden, width, rng),
            ),
            b2: store.add(format!("{prefix}.b2"), Tensor::zeros([width])),
        }
    }

    pub fn forward<'g>(&self, x: &Var<'g>, p: &Bound<'g>) -> Result<Var<'g>> {
        let h = x.matmul(&p[self.w1])?.add_row_bias(&p[self.b1])?.silu();
        h.matmul(&p[self.w2])?.add_row_bias(&p[self.b2])
    }
}
