//! Layers, parameter storage, optimizer and the checkpoint format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Range of the uniform initializer for weight matrices.
pub const INIT_RANGE: f64 = 0.1;

/// Owns every trainable tensor of a model. Tied weights are one entry with
/// several names.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params {
    tensors: Vec<Tensor>,
    names: Vec<String>,
    aliases: Vec<(String, ParamId)>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.tensors.push(tensor.with_requires_grad(true));
        self.names.push(name.into());
        ParamId(self.tensors.len() - 1)
    }

    /// Uniform(−0.1, 0.1) weight.
    pub fn add_uniform<R: Rng>(&mut self, name: &str, shape: &[usize], rng: &mut R) -> ParamId {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-INIT_RANGE..INIT_RANGE)).collect();
        self.add(name, Tensor::new(shape, data).expect("parameter shape"))
    }

    pub fn add_zeros(&mut self, name: &str, shape: &[usize]) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    /// Registers `name` as another name for an existing parameter.
    pub fn alias(&mut self, name: impl Into<String>, target: ParamId) {
        self.aliases.push((name.into(), target));
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(ParamId)
            .or_else(|| self.aliases.iter().find(|(n, _)| n == name).map(|(_, id)| *id))
    }

    pub fn aliases(&self) -> &[(String, ParamId)] {
        &self.aliases
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    /// Number of distinct scalar parameters (tied storage counted once).
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub fn zero_grad(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::zero_grad);
    }

    /// Adds the parameter gradients recorded on `tape` into the stored
    /// gradient slots.
    pub fn accumulate_grads(&mut self, tape: &Tape) {
        for (id, g) in tape.param_grads() {
            self.tensors[id.0]
                .grad_mut()
                .iter_mut()
                .zip(g)
                .for_each(|(acc, x)| *acc += x);
        }
    }

    pub fn global_grad_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.grad().iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    /// Flat copy of every parameter value, in id order.
    pub fn flat_values(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
    }
}

/// Train-time vs. inference-time behaviour of stochastic layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted-dropout mask: kept units are scaled by `1/(1−rate)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMask {
    rate: f64,
    mask: Option<Tensor>,
}

impl DropoutMask {
    pub fn identity() -> Self {
        Self {
            rate: 0.0,
            mask: None,
        }
    }

    pub fn sample<R: Rng>(rate: f64, shape: &[usize], mode: Mode, rng: &mut R) -> Self {
        assert!((0.0..1.0).contains(&rate), "dropout rate {rate} outside [0, 1)");
        if mode == Mode::Eval || rate == 0.0 {
            return Self { rate, mask: None };
        }
        let keep = 1.0 - rate;
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        Self {
            rate,
            mask: Some(Tensor::new(shape, data).expect("mask shape")),
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn is_identity(&self) -> bool {
        self.mask.is_none()
    }

    pub fn mask(&self) -> Option<&Tensor> {
        self.mask.as_ref()
    }

    /// Stacks the `[B×n]` mask `times` times along the rows, so one sample
    /// is reused at every time step of a time-major `[T·B×n]` sequence.
    pub fn repeated(&self, times: usize) -> Self {
        let mask = self.mask.as_ref().map(|m| {
            let (rows, cols) = (m.shape()[0], m.shape()[1]);
            let data = m.data().repeat(times);
            Tensor::matrix(rows * times, cols, data).expect("mask shape")
        });
        Self {
            rate: self.rate,
            mask,
        }
    }

    pub fn apply(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        match &self.mask {
            None => Ok(x),
            Some(m) => {
                let m = tape.constant(m.clone());
                tape.mul(x, m)
            }
        }
    }
}

/// Lookup table of `d`-dimensional vectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Embedding {
    pub table: ParamId,
    pub vocab: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new<R: Rng>(params: &mut Params, name: &str, vocab: usize, dim: usize, rng: &mut R) -> Self {
        let table = params.add_uniform(name, &[vocab, dim], rng);
        Self { table, vocab, dim }
    }

    /// `[ids.len() × d]` rows of the table.
    pub fn lookup(&self, tape: &mut Tape, params: &Params, ids: &[usize]) -> Result<Var> {
        let table = tape.param(self.table, params.get(self.table));
        tape.gather(table, ids)
    }
}

/// Output projection sharing storage with an embedding table:
/// `logits = h · tableᵀ + bias`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TiedProjection {
    pub table: ParamId,
    pub bias: ParamId,
}

impl TiedProjection {
    pub fn new(params: &mut Params, name: &str, embedding: &Embedding) -> Self {
        params.alias(format!("{name}.weight"), embedding.table);
        let bias = params.add_zeros(&format!("{name}.bias"), &[embedding.vocab]);
        Self {
            table: embedding.table,
            bias,
        }
    }

    /// A projection with its own `[vocab × dim]` weight.
    pub fn untied<R: Rng>(params: &mut Params, name: &str, vocab: usize, dim: usize, rng: &mut R) -> Self {
        let table = params.add_uniform(&format!("{name}.weight"), &[vocab, dim], rng);
        let bias = params.add_zeros(&format!("{name}.bias"), &[vocab]);
        Self { table, bias }
    }

    pub fn logits(&self, tape: &mut Tape, params: &Params, h: Var) -> Result<Var> {
        let w = tape.param(self.table, params.get(self.table));
        let b = tape.param(self.bias, params.get(self.bias));
        let z = tape.matmul_nt(h, w)?;
        tape.add_row(z, b)
    }
}

/// One LSTM layer. Gate blocks are stacked in the order
/// input, forget, cell candidate, output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LstmCell {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new<R: Rng>(params: &mut Params, name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let w_ih = params.add_uniform(&format!("{name}.w_ih"), &[4 * hidden, input], rng);
        let w_hh = params.add_uniform(&format!("{name}.w_hh"), &[4 * hidden, hidden], rng);
        let bias = params.add_zeros(&format!("{name}.bias"), &[4 * hidden]);
        Self {
            w_ih,
            w_hh,
            bias,
            input,
            hidden,
        }
    }

    /// Input-side pre-activation `x · W_ihᵀ + b` for any number of rows.
    pub fn input_projection(&self, tape: &mut Tape, params: &Params, x: Var) -> Result<Var> {
        let w = tape.param(self.w_ih, params.get(self.w_ih));
        let b = tape.param(self.bias, params.get(self.bias));
        let z = tape.matmul_nt(x, w)?;
        tape.add_row(z, b)
    }

    /// Recurrent half of a step, given the input pre-activation.
    pub fn recur(&self, tape: &mut Tape, params: &Params, pre_x: Var, h_prev: Var, c_prev: Var) -> Result<(Var, Var)> {
        let w = tape.param(self.w_hh, params.get(self.w_hh));
        let rec = tape.matmul_nt(h_prev, w)?;
        let gates = tape.add(pre_x, rec)?;
        let hsz = self.hidden;
        let i = tape.narrow(gates, 1, 0, hsz)?;
        let f = tape.narrow(gates, 1, hsz, hsz)?;
        let g = tape.narrow(gates, 1, 2 * hsz, hsz)?;
        let o = tape.narrow(gates, 1, 3 * hsz, hsz)?;
        let (i, f, g, o) = (tape.sigmoid(i), tape.sigmoid(f), tape.tanh(g), tape.sigmoid(o));
        let keep = tape.mul(f, c_prev)?;
        let write = tape.mul(i, g)?;
        let c = tape.add(keep, write)?;
        let tc = tape.tanh(c);
        let h = tape.mul(o, tc)?;
        Ok((h, c))
    }

    /// Single step on `x[B×in]` with states `[B×h]`.
    pub fn step(&self, tape: &mut Tape, params: &Params, x: Var, h_prev: Var, c_prev: Var) -> Result<(Var, Var)> {
        let in_shape = tape.value(x).shape().to_vec();
        if in_shape.len() != 2 || in_shape[1] != self.input {
            return Err(Error::shape("lstm_step", &in_shape, &[self.input]));
        }
        for s in [h_prev, c_prev] {
            let shape = tape.value(s).shape();
            if shape != [in_shape[0], self.hidden] {
                return Err(Error::shape("lstm_step", shape, &[in_shape[0], self.hidden]));
            }
        }
        let pre = self.input_projection(tape, params, x)?;
        self.recur(tape, params, pre, h_prev, c_prev)
    }
}

/// Hidden and cell state of every layer of a stack, each `[B×h]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Vec<Tensor>,
    pub c: Vec<Tensor>,
}

impl LstmState {
    pub fn zeros(layers: usize, batch: usize, hidden: usize) -> Self {
        Self {
            h: vec![Tensor::zeros(&[batch, hidden]); layers],
            c: vec![Tensor::zeros(&[batch, hidden]); layers],
        }
    }
}

/// Stacked LSTM layers with dropout on each layer's output.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmStack {
    pub layers: Vec<LstmCell>,
    pub dropout: f64,
}

impl LstmStack {
    pub fn new<R: Rng>(
        params: &mut Params,
        name: &str,
        input: usize,
        hidden: usize,
        num_layers: usize,
        dropout: f64,
        rng: &mut R,
    ) -> Self {
        let layers = (0..num_layers)
            .map(|l| {
                let in_dim = if l == 0 { input } else { hidden };
                LstmCell::new(params, &format!("{name}.l{l}"), in_dim, hidden, rng)
            })
            .collect();
        Self { layers, dropout }
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].hidden
    }

    /// One variational mask per layer, shared by every step of a window.
    pub fn sample_masks<R: Rng>(&self, batch: usize, steps: usize, mode: Mode, rng: &mut R) -> Vec<DropoutMask> {
        self.layers
            .iter()
            .map(|l| DropoutMask::sample(self.dropout, &[batch, l.hidden], mode, rng).repeated(steps))
            .collect()
    }

    /// Runs the stack over a time-major sequence `inputs[T·B×in]`.
    ///
    /// Returns the top layer's outputs `[T·B×h]` (after its dropout) and
    /// the final state, detached from the tape.
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &Params,
        inputs: Var,
        batch: usize,
        state: &LstmState,
        masks: &[DropoutMask],
    ) -> Result<(Var, LstmState)> {
        let rows = tape.value(inputs).shape()[0];
        let steps = rows / batch;
        let mut layer_in = inputs;
        let mut next = LstmState {
            h: Vec::with_capacity(self.layers.len()),
            c: Vec::with_capacity(self.layers.len()),
        };
        for (l, cell) in self.layers.iter().enumerate() {
            let pre = cell.input_projection(tape, params, layer_in)?;
            let mut h = tape.constant(state.h[l].clone());
            let mut c = tape.constant(state.c[l].clone());
            let mut outs = Vec::with_capacity(steps);
            for t in 0..steps {
                let pre_t = tape.narrow(pre, 0, t * batch, batch)?;
                (h, c) = cell.recur(tape, params, pre_t, h, c)?;
                outs.push(h);
            }
            next.h.push(tape.value(h).clone().with_requires_grad(false));
            next.c.push(tape.value(c).clone().with_requires_grad(false));
            let seq = if outs.len() == 1 {
                outs[0]
            } else {
                tape.concat_many(&outs, 0)?
            };
            layer_in = match masks.get(l) {
                Some(m) => m.apply(tape, seq)?,
                None => seq,
            };
        }
        for t in next.h.iter_mut().chain(next.c.iter_mut()) {
            t.zero_grad();
        }
        Ok((layer_in, next))
    }
}

/// Scales every gradient by `clip_max / ‖g‖` when the global L2 norm
/// exceeds `clip_max`; returns the factor applied.
pub fn clip_global_norm(params: &mut Params, clip_max: f64) -> f64 {
    assert!(clip_max > 0.0);
    let norm = params.global_grad_norm();
    if norm <= clip_max {
        return 1.0;
    }
    let factor = clip_max / norm;
    for id in params.ids().collect::<Vec<_>>() {
        params.get_mut(id).grad_mut().iter_mut().for_each(|g| *g *= factor);
    }
    factor
}

/// Plain SGD with global-norm clipping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgdOptimizer {
    pub lr: f64,
    pub clip_max: f64,
}

impl SgdOptimizer {
    pub fn new(lr: f64, clip_max: f64) -> Self {
        Self { lr, clip_max }
    }

    /// `p ← p − lr·∇p` for every parameter, then zeroes the gradients.
    pub fn apply(&self, params: &mut Params) {
        sgd_apply(params, self.lr)
    }

    /// Clips, applies and returns the post-clip global gradient norm.
    pub fn step(&self, params: &mut Params) -> f64 {
        clip_global_norm(params, self.clip_max);
        let norm = params.global_grad_norm();
        self.apply(params);
        norm
    }
}

pub fn sgd_apply(params: &mut Params, lr: f64) {
    for id in params.ids().collect::<Vec<_>>() {
        let t = params.get_mut(id);
        let grads = t.grad().to_vec();
        t.data_mut()
            .iter_mut()
            .zip(&grads)
            .for_each(|(p, g)| *p -= lr * g);
        t.zero_grad();
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"CSLMCKPT";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into the data section.
    offset: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestAlias {
    name: String,
    target: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    meta: serde_json::Value,
    params: Vec<ManifestEntry>,
    aliases: Vec<ManifestAlias>,
}

/// Writes `params` plus caller metadata.
///
/// Layout: `CSLMCKPT`, u32 version, u64 manifest length, JSON manifest
/// (names, shapes, byte offsets, aliases, metadata), then every tensor as
/// row-major little-endian f64. Tied tensors are written once.
pub fn save_checkpoint(path: &Path, params: &Params, meta: serde_json::Value) -> Result<()> {
    let mut offset = 0u64;
    let entries = params
        .ids()
        .map(|id| {
            let t = params.get(id);
            let e = ManifestEntry {
                name: params.name(id).to_string(),
                shape: t.shape().to_vec(),
                offset,
            };
            offset += 8 * t.numel() as u64;
            e
        })
        .collect();
    let aliases = params
        .aliases()
        .iter()
        .map(|(name, id)| ManifestAlias {
            name: name.clone(),
            target: params.name(*id).to_string(),
        })
        .collect();
    let manifest = serde_json::to_vec(&Manifest {
        meta,
        params: entries,
        aliases,
    })?;

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(CHECKPOINT_MAGIC).map_err(io)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(manifest.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&manifest).map_err(io)?;
    for id in params.ids() {
        for v in params.get(id).data() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn load_checkpoint(path: &Path) -> Result<(Params, serde_json::Value)> {
    let bad = |message: String| Error::Checkpoint {
        path: path.to_path_buf(),
        message,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
    if buf.len() < 20 || &buf[..8] != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(buf[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let mlen = u64::from_le_bytes(buf[12..20].try_into().unwrap()) as usize;
    let data_start = 20 + mlen;
    if buf.len() < data_start {
        return Err(bad("truncated manifest".into()));
    }
    let manifest: Manifest = serde_json::from_slice(&buf[20..data_start])?;
    let data = &buf[data_start..];
    let mut params = Params::new();
    for e in &manifest.params {
        let n: usize = e.shape.iter().product();
        let start = e.offset as usize;
        let end = start + 8 * n;
        if end > data.len() {
            return Err(bad(format!("tensor {} extends past end of file", e.name)));
        }
        let values = data[start..end]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let t = Tensor::new(&e.shape, values).map_err(|err| bad(err.to_string()))?;
        params.add(e.name.clone(), t);
    }
    for a in &manifest.aliases {
        let target = params
            .id(&a.target)
            .ok_or_else(|| bad(format!("alias {} targets unknown tensor {}", a.name, a.target)))?;
        params.alias(a.name.clone(), target);
    }
    Ok((params, manifest.meta))
}
