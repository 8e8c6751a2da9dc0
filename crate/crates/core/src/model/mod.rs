//! Transformer encoder with a distance/height parser network and
//! dependency-constrained attention, plus the vanilla baseline.

pub mod checkpoint;
pub mod config;
pub mod graph;
pub mod params;
pub mod tensor;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{load_checkpoint, save_checkpoint, write_atomic, Checkpoint};
pub use config::{Arch, ModelConfig, Positional};
pub use graph::{Gradients, Graph, Var};
pub use params::{init_params, Block, Linear, Norm, Params, Parser};
pub use tensor::Tensor;

use crate::depfn::DepMatrix;
use crate::error::{Error, Result};
use crate::trees::SyntaxProfile;

/// Configuration plus weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub config: ModelConfig,
    pub params: Params<Tensor>,
}

impl ModelState {
    /// Fresh weights from `config.seed`.
    pub fn init(config: ModelConfig) -> Result<Self> {
        let params = init_params(&config, config.seed)?;
        Ok(ModelState { config, params })
    }
}

/// Dropout source used during training; absent at evaluation time.
pub struct DropoutRng<'a> {
    pub rate: f64,
    pub rng: &'a mut ChaCha8Rng,
}

impl DropoutRng<'_> {
    fn apply(&mut self, g: &mut Graph, x: Var) -> Var {
        if self.rate <= 0.0 {
            return x;
        }
        let keep = 1.0 - self.rate;
        let mask = (0..g.value(x).len())
            .map(|_| {
                if self.rng.gen::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect();
        g.dropout(x, mask)
    }
}

fn maybe_dropout(g: &mut Graph, x: Var, drop: &mut Option<&mut DropoutRng<'_>>) -> Var {
    match drop {
        Some(d) => d.apply(g, x),
        None => x,
    }
}

/// Tape handles for one sentence.
pub struct SentenceVars {
    pub logits: Var,
    pub distances: Option<Var>,
    pub heights: Option<Var>,
    pub dep: Option<Var>,
}

/// Puts every parameter on the tape.
pub fn bind(g: &mut Graph, params: &Params<Tensor>) -> Params<Var> {
    params.map(|t| g.input(t.clone()))
}

fn linear(g: &mut Graph, x: Var, l: &Linear<Var>) -> Var {
    let y = g.matmul(x, l.weight);
    g.add_row(y, l.bias)
}

/// Fixed sinusoidal position table for `n` positions.
pub fn sinusoidal_table(n: usize, d: usize) -> Tensor {
    let mut t = Tensor::zeros(n, d);
    for pos in 0..n {
        for k in 0..d {
            let i = (k / 2) as f64;
            let angle = pos as f64 / 10000f64.powf(2.0 * i / d as f64);
            t.set(pos, k, if k % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    t
}

struct ParserVars {
    distances: Var,
    heights: Var,
    dep: Var,
}

fn parser_graph(g: &mut Graph, p: &Params<Var>, cfg: &ModelConfig, x: Var) -> ParserVars {
    let n = g.value(x).rows;
    let w = (cfg.conv_kernel / 2) as isize;
    let mut z = x;
    for conv in &p.parser.conv {
        let parts: Vec<Var> = (-w..=w).map(|o| g.shift(z, o)).collect();
        let window = g.concat_cols(&parts);
        let y = linear(g, window, conv);
        z = g.tanh(y);
    }
    let left = g.slice_rows(z, 0, n - 1);
    let right = g.slice_rows(z, 1, n - 1);
    let pair = g.concat_cols(&[left, right]);
    let dh = linear(g, pair, &p.parser.distance_hidden);
    let dh = g.tanh(dh);
    let distances = linear(g, dh, &p.parser.distance_out);
    let hh = linear(g, z, &p.parser.height_hidden);
    let hh = g.tanh(hh);
    let heights = linear(g, hh, &p.parser.height_out);
    let dep = g.dep_matrix(distances, heights, p.temperatures);
    ParserVars {
        distances,
        heights,
        dep,
    }
}

/// `softmax([w_parent, w_child])` for one head as two 1×1 nodes.
fn relation_weights(g: &mut Graph, relation: Var, head: usize) -> (Var, Var) {
    let row = g.slice_rows(relation, head, 1);
    let probs = g.softmax_rows(row);
    (g.slice_cols(probs, 0, 1), g.slice_cols(probs, 1, 1))
}

/// Unnormalized `(p_parent·P_D + p_child·P_Dᵀ) ⊙ σ(QKᵀ/√d_k)`.
fn constrained_weights(
    g: &mut Graph,
    qh: Var,
    kh: Var,
    dep: Var,
    dep_t: Var,
    parent: Var,
    child: Var,
) -> Var {
    let dk = g.value(qh).cols as f64;
    let scores = g.matmul_t(qh, kh);
    let scores = g.scale(scores, 1.0 / dk.sqrt());
    let gate = g.sigmoid(scores);
    let a = g.scale_by(dep, parent);
    let b = g.scale_by(dep_t, child);
    let mix = g.add(a, b);
    g.mul(mix, gate)
}

fn block_graph(
    g: &mut Graph,
    b: &Block<Var>,
    cfg: &ModelConfig,
    x: Var,
    dep: Option<Var>,
    drop: &mut Option<&mut DropoutRng<'_>>,
) -> Var {
    let dk = cfg.head_dim();
    let xn = g.layer_norm(x, b.attn_norm.gain, b.attn_norm.bias);
    let q = linear(g, xn, &b.query);
    let k = linear(g, xn, &b.key);
    let v = linear(g, xn, &b.value);
    let dep_t = dep.map(|d| g.transpose(d));
    let mut heads = Vec::with_capacity(cfg.heads);
    for hd in 0..cfg.heads {
        let qh = g.slice_cols(q, hd * dk, dk);
        let kh = g.slice_cols(k, hd * dk, dk);
        let vh = g.slice_cols(v, hd * dk, dk);
        let weights = match (dep, dep_t) {
            (Some(dep), Some(dep_t)) => {
                let (parent, child) = relation_weights(g, b.relation, hd);
                constrained_weights(g, qh, kh, dep, dep_t, parent, child)
            }
            _ => {
                let scores = g.matmul_t(qh, kh);
                let scores = g.scale(scores, 1.0 / (dk as f64).sqrt());
                g.softmax_rows(scores)
            }
        };
        let weights = maybe_dropout(g, weights, drop);
        heads.push(g.matmul(weights, vh));
    }
    let cat = g.concat_cols(&heads);
    let attn = linear(g, cat, &b.attn_out);
    let x = g.add(x, attn);
    let xn = g.layer_norm(x, b.ff_norm.gain, b.ff_norm.bias);
    let hidden = linear(g, xn, &b.ff_in);
    let hidden = g.gelu(hidden);
    let hidden = maybe_dropout(g, hidden, drop);
    let ff = linear(g, hidden, &b.ff_out);
    g.add(x, ff)
}

/// Records the forward pass of one pad-free sentence.
/// With `vanilla` set, every block uses softmax attention and no parser runs.
pub fn forward_graph(
    g: &mut Graph,
    p: &Params<Var>,
    cfg: &ModelConfig,
    ids: &[u32],
    vanilla: bool,
    mut drop: Option<&mut DropoutRng<'_>>,
) -> SentenceVars {
    let n = ids.len();
    let idx: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
    let mut x = g.gather(p.embedding, &idx);
    match cfg.positional {
        Positional::Sinusoidal => {
            let pe = g.input(sinusoidal_table(n, cfg.d_model));
            x = g.add(x, pe);
        }
        Positional::Learned => {
            let table = p.position.expect("learned positions have a table");
            let pos: Vec<usize> = (0..n).collect();
            let pe = g.gather(table, &pos);
            x = g.add(x, pe);
        }
        Positional::None => {}
    }
    let mut parsed: Option<ParserVars> = None;
    for (k, block) in p.blocks.iter().enumerate() {
        if !vanilla && k == cfg.parser_position {
            parsed = Some(parser_graph(g, p, cfg, x));
        }
        let dep = parsed.as_ref().map(|pv| pv.dep);
        x = block_graph(g, block, cfg, x, dep, &mut drop);
    }
    if !vanilla && parsed.is_none() {
        parsed = Some(parser_graph(g, p, cfg, x));
    }
    let x = g.layer_norm(x, p.final_norm.gain, p.final_norm.bias);
    let logits = match p.output {
        Some(w) => g.matmul(x, w),
        None => g.matmul_t(x, p.embedding),
    };
    let logits = g.add_row(logits, p.output_bias);
    SentenceVars {
        logits,
        distances: parsed.as_ref().map(|pv| pv.distances),
        heights: parsed.as_ref().map(|pv| pv.heights),
        dep: parsed.as_ref().map(|pv| pv.dep),
    }
}

/// Output of [`encoder_forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// n × vocab; rows at padding positions are zero.
    pub logits: Tensor,
    /// Over the non-padding tokens; absent for the vanilla architecture.
    pub profile: Option<SyntaxProfile>,
    pub dep: Option<DepMatrix>,
}

fn compact_ids(
    ids: &[u32],
    pad_mask: &[bool],
    cfg: &ModelConfig,
) -> Result<(Vec<u32>, Vec<usize>)> {
    if ids.len() != pad_mask.len() {
        return Err(Error::LengthMismatch {
            expected: ids.len(),
            found: pad_mask.len(),
        });
    }
    if ids.len() > cfg.max_seq_len {
        return Err(Error::InvalidInput(format!(
            "sequence length {} exceeds max_seq_len {}",
            ids.len(),
            cfg.max_seq_len
        )));
    }
    if let Some(&id) = ids.iter().find(|&&id| id as usize >= cfg.vocab_size) {
        return Err(Error::IndexOutOfRange {
            index: id as isize,
            len: cfg.vocab_size,
        });
    }
    let keep: Vec<usize> = (0..ids.len()).filter(|&i| !pad_mask[i]).collect();
    if keep.is_empty() {
        return Err(Error::InvalidInput(
            "sequence has no non-padding tokens".into(),
        ));
    }
    Ok((keep.iter().map(|&i| ids[i]).collect(), keep))
}

fn scatter_rows(t: &Tensor, keep: &[usize], n: usize) -> Tensor {
    let mut out = Tensor::zeros(n, t.cols);
    for (r, &i) in keep.iter().enumerate() {
        out.row_mut(i).copy_from_slice(t.row(r));
    }
    out
}

fn run(ids: &[u32], pad_mask: &[bool], state: &ModelState, vanilla: bool) -> Result<ForwardOutput> {
    let cfg = &state.config;
    cfg.validate()?;
    let (compact, keep) = compact_ids(ids, pad_mask, cfg)?;
    let mut g = Graph::new();
    let p = bind(&mut g, &state.params);
    let out = forward_graph(&mut g, &p, cfg, &compact, vanilla, None);
    let logits = scatter_rows(g.value(out.logits), &keep, ids.len());
    let profile = match (out.distances, out.heights) {
        (Some(d), Some(h)) => Some(SyntaxProfile::new(
            g.value(d).data.clone(),
            g.value(h).data.clone(),
        )?),
        _ => None,
    };
    let dep = match out.dep {
        Some(v) => Some(DepMatrix::from_rows(
            compact.len(),
            g.value(v).data.clone(),
        )?),
        None => None,
    };
    Ok(ForwardOutput {
        logits,
        profile,
        dep,
    })
}

/// MLM logits with the parser's distances, heights and dependency matrix.
/// `pad_mask[i]` marks padding; padding is dropped before any computation.
pub fn encoder_forward(
    ids: &[u32],
    pad_mask: &[bool],
    state: &ModelState,
) -> Result<ForwardOutput> {
    run(ids, pad_mask, state, state.config.arch == Arch::Vanilla)
}

/// Logits of the same weights with softmax attention in every block.
pub fn vanilla_forward(ids: &[u32], pad_mask: &[bool], state: &ModelState) -> Result<Tensor> {
    Ok(run(ids, pad_mask, state, true)?.logits)
}

/// Distances and heights the parser network assigns to embeddings `z`.
pub fn parser_forward(z: &Tensor, state: &ModelState) -> Result<SyntaxProfile> {
    if z.rows == 0 {
        return Err(Error::InvalidInput(
            "parser needs at least one token".into(),
        ));
    }
    if z.cols != state.config.d_model {
        return Err(Error::Shape(format!(
            "parser input has {} columns, expected {}",
            z.cols, state.config.d_model
        )));
    }
    let mut g = Graph::new();
    let p = bind(&mut g, &state.params);
    let x = g.input(z.clone());
    let pv = parser_graph(&mut g, &p, &state.config, x);
    SyntaxProfile::new(
        g.value(pv.distances).data.clone(),
        g.value(pv.heights).data.clone(),
    )
}

/// One head of dependency-constrained attention:
/// `out_i = Σ_j (p_parent·P_D(j|i) + p_child·P_D(i|j)) · σ(q_i·k_j/√d_k) · v_j`
/// with `(p_parent, p_child) = softmax(w_parent, w_child)`.
pub fn dep_constrained_attention(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    p_d: &DepMatrix,
    w_parent: f64,
    w_child: f64,
) -> Result<Tensor> {
    let n = p_d.n();
    if q.rows != n || k.rows != n || v.rows != n || q.cols != k.cols {
        return Err(Error::Shape(format!(
            "attention inputs q {:?}, k {:?}, v {:?} with P_D of size {n}",
            q.shape(),
            k.shape(),
            v.shape()
        )));
    }
    let mut g = Graph::new();
    let (qv, kv, vv) = (g.input(q.clone()), g.input(k.clone()), g.input(v.clone()));
    let dep = g.input(Tensor::from_vec(n, n, p_d.as_slice().to_vec()));
    let dep_t = g.transpose(dep);
    let rel = g.input(Tensor::from_vec(1, 2, vec![w_parent, w_child]));
    let (parent, child) = relation_weights(&mut g, rel, 0);
    let w = constrained_weights(&mut g, qv, kv, dep, dep_t, parent, child);
    let out = g.matmul(w, vv);
    Ok(g.value(out).clone())
}

/// `(p_parent, p_child)` for one head's relation weights.
pub fn relation_probs(w_parent: f64, w_child: f64) -> (f64, f64) {
    let mut g = Graph::new();
    let rel = g.input(Tensor::from_vec(1, 2, vec![w_parent, w_child]));
    let (a, b) = relation_weights(&mut g, rel, 0);
    (g.value(a).data[0], g.value(b).data[0])
}
