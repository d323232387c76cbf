use std::collections::HashMap;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::arch::{reachable_from, reaching, Architecture};
use super::space::{SearchSpace, GRAPH_VERTICES};
use super::{NetError, Op};
use crate::numkit::{kaiming_normal, Matrix, Rng};

/// Channel-major feature map shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(c: usize, h: usize, w: usize) -> Self {
        Shape { c, h, w }
    }

    pub fn flat(n: usize) -> Self {
        Shape { c: n, h: 1, w: 1 }
    }

    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Kind {
    Input,
    /// Same-padded, stride-1 convolution. Weights laid out `[cout][cin][k][k]`.
    Conv {
        src: usize,
        k: usize,
        weight: usize,
        bias: Option<usize>,
    },
    /// Records one activation bit per element.
    Relu {
        src: usize,
        bit_offset: usize,
    },
    /// 3x3 average pooling, stride 1, padding excluded from the divisor.
    AvgPool3 {
        src: usize,
    },
    Zero,
    Sum {
        srcs: Vec<usize>,
    },
    GlobalAvgPool {
        src: usize,
    },
    /// Weights laid out `[out][in]`.
    Dense {
        src: usize,
        weight: usize,
        bias: Option<usize>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Node {
    kind: Kind,
    shape: Shape,
}

/// A named contiguous block of parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub range: Range<usize>,
}

/// Bias initialization for dense layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BiasInit {
    None,
    Zero,
    /// Same N(0, 2/fan_in) draw as the weights.
    Kaiming,
}

/// A concrete initialized ReLU network evaluated one sample at a time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompiledNet {
    nodes: Vec<Node>,
    params: Vec<f64>,
    groups: Vec<ParamGroup>,
    bit_count: usize,
    output: usize,
    features: usize,
}

/// Per-sample activation sign patterns, packed 64 bits per word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationBits {
    pub bit_count: usize,
    pub rows: Vec<Vec<u64>>,
}

impl ActivationBits {
    pub fn bit(&self, row: usize, i: usize) -> bool {
        self.rows[row][i / 64] >> (i % 64) & 1 == 1
    }

    /// Number of distinct patterns across rows.
    pub fn unique_count(&self) -> usize {
        let mut set: std::collections::HashSet<&[u64]> = std::collections::HashSet::new();
        for r in &self.rows {
            set.insert(r.as_slice());
        }
        set.len()
    }
}

/// All intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    values: Vec<Vec<f64>>,
}

impl Trace {
    pub fn logits<'a>(&'a self, net: &CompiledNet) -> &'a [f64] {
        &self.values[net.output]
    }

    pub fn features<'a>(&'a self, net: &CompiledNet) -> &'a [f64] {
        &self.values[net.features]
    }
}

/// Incremental construction of a [`CompiledNet`]. Parameters are drawn from
/// the builder's RNG in call order, so construction is deterministic.
pub struct NetBuilder<'r> {
    nodes: Vec<Node>,
    params: Vec<f64>,
    groups: Vec<ParamGroup>,
    bit_count: usize,
    rng: &'r mut Rng,
}

impl<'r> NetBuilder<'r> {
    /// Starts a network; node 0 is the input.
    pub fn new(input: Shape, rng: &'r mut Rng) -> Self {
        NetBuilder {
            nodes: vec![Node {
                kind: Kind::Input,
                shape: input,
            }],
            params: Vec::new(),
            groups: Vec::new(),
            bit_count: 0,
            rng,
        }
    }

    pub fn input(&self) -> usize {
        0
    }

    pub fn shape(&self, node: usize) -> Shape {
        self.nodes[node].shape
    }

    fn push(&mut self, kind: Kind, shape: Shape) -> usize {
        self.nodes.push(Node { kind, shape });
        self.nodes.len() - 1
    }

    fn alloc(&mut self, name: &str, values: Vec<f64>) -> usize {
        let start = self.params.len();
        self.params.extend(values);
        self.groups.push(ParamGroup {
            name: name.to_string(),
            range: start..self.params.len(),
        });
        start
    }

    pub fn conv(
        &mut self,
        src: usize,
        cout: usize,
        k: usize,
        bias: bool,
        name: &str,
    ) -> Result<usize, NetError> {
        let s = self.shape(src);
        if k.is_multiple_of(2) {
            return Err(NetError::InvalidArch(format!(
                "conv kernel {k} must be odd"
            )));
        }
        let fan_in = s.c * k * k;
        let w = kaiming_normal(self.rng, fan_in, cout * fan_in)?;
        let weight = self.alloc(&format!("{name}.weight"), w);
        let bias = if bias {
            Some(self.alloc(&format!("{name}.bias"), vec![0.0; cout]))
        } else {
            None
        };
        Ok(self.push(
            Kind::Conv {
                src,
                k,
                weight,
                bias,
            },
            Shape::new(cout, s.h, s.w),
        ))
    }

    pub fn relu(&mut self, src: usize) -> usize {
        let s = self.shape(src);
        let bit_offset = self.bit_count;
        self.bit_count += s.len();
        self.push(Kind::Relu { src, bit_offset }, s)
    }

    pub fn avg_pool3(&mut self, src: usize) -> usize {
        let s = self.shape(src);
        self.push(Kind::AvgPool3 { src }, s)
    }

    pub fn zero(&mut self, shape: Shape) -> usize {
        self.push(Kind::Zero, shape)
    }

    pub fn sum(&mut self, srcs: Vec<usize>) -> Result<usize, NetError> {
        let shape = self.shape(
            *srcs
                .first()
                .ok_or_else(|| NetError::InvalidArch("empty sum".into()))?,
        );
        if srcs.iter().any(|&s| self.shape(s) != shape) {
            return Err(NetError::ShapeMismatch(
                "summed tensors differ in shape".into(),
            ));
        }
        if srcs.len() == 1 {
            return Ok(srcs[0]);
        }
        Ok(self.push(Kind::Sum { srcs }, shape))
    }

    pub fn global_avg_pool(&mut self, src: usize) -> usize {
        let s = self.shape(src);
        self.push(Kind::GlobalAvgPool { src }, Shape::flat(s.c))
    }

    pub fn dense(
        &mut self,
        src: usize,
        fout: usize,
        bias: BiasInit,
        name: &str,
    ) -> Result<usize, NetError> {
        let fin = self.shape(src).len();
        let w = kaiming_normal(self.rng, fin, fout * fin)?;
        let weight = self.alloc(&format!("{name}.weight"), w);
        let bias = match bias {
            BiasInit::None => None,
            BiasInit::Zero => Some(self.alloc(&format!("{name}.bias"), vec![0.0; fout])),
            BiasInit::Kaiming => {
                let b = kaiming_normal(self.rng, fin, fout)?;
                Some(self.alloc(&format!("{name}.bias"), b))
            }
        };
        Ok(self.push(Kind::Dense { src, weight, bias }, Shape::flat(fout)))
    }

    /// `output` produces the logits; `features` is the value fed to the final
    /// dense layer.
    pub fn finish(self, output: usize, features: usize) -> CompiledNet {
        CompiledNet {
            nodes: self.nodes,
            params: self.params,
            groups: self.groups,
            bit_count: self.bit_count,
            output,
            features,
        }
    }
}

/// Builds the stem, cell stack and pooling classifier for `arch`.
///
/// Conv edges are ReLU followed by a bias-free convolution; one ReLU is shared
/// by all conv edges leaving the same node. Edges off every input-to-output
/// path of the cell compute nothing that reaches the logits and are emitted as
/// zero tensors without parameters.
pub fn compile(
    arch: &Architecture,
    space: &SearchSpace,
    rng: &mut Rng,
) -> Result<CompiledNet, NetError> {
    space.validate()?;
    arch.validate(space)?;
    let m = &space.macro_cfg;
    let mut b = NetBuilder::new(
        Shape::new(m.input_channels, m.input_size, m.input_size),
        rng,
    );
    let mut x = b.conv(b.input(), m.stem_channels, 3, false, "stem")?;
    for cell in 0..m.cells {
        x = match arch {
            Architecture::Cell { ops } => build_cell(&mut b, space, ops, x, cell)?,
            Architecture::Graph { adjacency, ops } => {
                build_graph(&mut b, space, adjacency, ops, x, cell)?
            }
        };
    }
    let features = b.global_avg_pool(x);
    let out = b.dense(features, m.classes, BiasInit::Zero, "classifier")?;
    Ok(b.finish(out, features))
}

fn apply_op(
    b: &mut NetBuilder,
    op: Op,
    src: usize,
    relu_cache: &mut HashMap<usize, usize>,
    conv_bias: bool,
    name: &str,
) -> Result<Option<usize>, NetError> {
    Ok(match op {
        Op::None => None,
        Op::Skip => Some(src),
        Op::AvgPool3x3 => Some(b.avg_pool3(src)),
        Op::Conv1x1 | Op::Conv3x3 => {
            let act = *relu_cache.entry(src).or_insert_with(|| b.relu(src));
            let c = b.shape(src).c;
            Some(b.conv(act, c, op.kernel().unwrap(), conv_bias, name)?)
        }
    })
}

fn build_cell(
    b: &mut NetBuilder,
    space: &SearchSpace,
    ops: &[usize],
    input: usize,
    cell: usize,
) -> Result<usize, NetError> {
    let n = space.nodes;
    let op_at = |i: usize, j: usize| {
        space
            .edges
            .iter()
            .position(|&e| e == (i, j))
            .map(|k| space.op_vocab[ops[k]])
            .unwrap_or(Op::None)
    };
    let fwd = reachable_from(n, 0, |i, j| op_at(i, j) != Op::None);
    let bwd = reaching(n, n - 1, |i, j| op_at(i, j) != Op::None);
    let shape = b.shape(input);
    let mut relu_cache = HashMap::new();
    let mut values = vec![input];
    for j in 1..n {
        let mut incoming = Vec::new();
        for i in 0..j {
            if !(fwd[i] && bwd[j]) {
                continue;
            }
            let name = format!("cell{cell}.edge{i}-{j}");
            if let Some(v) = apply_op(
                b,
                op_at(i, j),
                values[i],
                &mut relu_cache,
                space.macro_cfg.conv_bias,
                &name,
            )? {
                incoming.push(v);
            }
        }
        let v = if incoming.is_empty() {
            b.zero(shape)
        } else {
            b.sum(incoming)?
        };
        values.push(v);
    }
    Ok(values[n - 1])
}

fn build_graph(
    b: &mut NetBuilder,
    space: &SearchSpace,
    adjacency: &[[bool; GRAPH_VERTICES]; GRAPH_VERTICES],
    ops: &[usize],
    input: usize,
    cell: usize,
) -> Result<usize, NetError> {
    let n = GRAPH_VERTICES;
    let mut relu_cache = HashMap::new();
    let mut outputs: Vec<Option<usize>> = vec![None; n];
    outputs[0] = Some(input);
    for v in 1..n {
        let preds: Vec<usize> = (0..v)
            .filter(|&u| adjacency[u][v])
            .filter_map(|u| outputs[u])
            .collect();
        if preds.is_empty() {
            continue;
        }
        let summed = b.sum(preds)?;
        outputs[v] = if v == n - 1 {
            Some(summed)
        } else {
            let op = space.op_vocab[ops[v - 1]];
            let name = format!("cell{cell}.vertex{v}");
            apply_op(
                b,
                op,
                summed,
                &mut relu_cache,
                space.macro_cfg.conv_bias,
                &name,
            )?
        };
    }
    outputs[n - 1].ok_or_else(|| NetError::InvalidArch("output vertex unreachable".into()))
}

impl CompiledNet {
    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    pub fn group(&self, name: &str) -> Option<Range<usize>> {
        self.groups
            .iter()
            .find(|g| g.name == name)
            .map(|g| g.range.clone())
    }

    pub fn input_len(&self) -> usize {
        self.nodes[0].shape.len()
    }

    pub fn classes(&self) -> usize {
        self.nodes[self.output].shape.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.nodes[self.features].shape.len()
    }

    /// Number of ReLU neurons, i.e. activation bits per sample.
    pub fn bit_count(&self) -> usize {
        self.bit_count
    }

    fn check_batch(&self, x: &Matrix) -> Result<(), NetError> {
        if x.cols() != self.input_len() {
            return Err(NetError::ShapeMismatch(format!(
                "batch rows have {} values, network expects {}",
                x.cols(),
                self.input_len()
            )));
        }
        if x.rows() == 0 {
            return Err(NetError::ShapeMismatch("empty batch".into()));
        }
        Ok(())
    }

    pub fn forward_sample(&self, x: &[f64]) -> Trace {
        debug_assert_eq!(x.len(), self.input_len());
        let mut values: Vec<Vec<f64>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let s = node.shape;
            let v = match &node.kind {
                Kind::Input => x.to_vec(),
                Kind::Zero => vec![0.0; s.len()],
                Kind::Conv {
                    src,
                    k,
                    weight,
                    bias,
                } => {
                    let input = &values[*src];
                    let ins = self.nodes[*src].shape;
                    let mut out = vec![0.0; s.len()];
                    conv_forward(input, ins, &self.params[*weight..], *k, s.c, &mut out);
                    if let Some(b) = bias {
                        for (co, chunk) in out.chunks_mut(s.h * s.w).enumerate() {
                            chunk.iter_mut().for_each(|o| *o += self.params[b + co]);
                        }
                    }
                    out
                }
                Kind::Relu { src, .. } => values[*src].iter().map(|&v| v.max(0.0)).collect(),
                Kind::AvgPool3 { src } => avg_pool3_forward(&values[*src], s),
                Kind::Sum { srcs } => {
                    let mut out = values[srcs[0]].clone();
                    for &o in &srcs[1..] {
                        for (a, b) in out.iter_mut().zip(&values[o]) {
                            *a += b;
                        }
                    }
                    out
                }
                Kind::GlobalAvgPool { src } => {
                    let ins = self.nodes[*src].shape;
                    let hw = (ins.h * ins.w) as f64;
                    values[*src]
                        .chunks(ins.h * ins.w)
                        .map(|c| c.iter().sum::<f64>() / hw)
                        .collect()
                }
                Kind::Dense { src, weight, bias } => {
                    let input = &values[*src];
                    let fin = input.len();
                    (0..s.len())
                        .map(|o| {
                            let w = &self.params[weight + o * fin..weight + (o + 1) * fin];
                            let mut acc: f64 = w.iter().zip(input).map(|(a, b)| a * b).sum();
                            if let Some(b) = bias {
                                acc += self.params[b + o];
                            }
                            acc
                        })
                        .collect()
                }
            };
            values.push(v);
        }
        Trace { values }
    }

    /// Activation bits of a traced sample: bit = 1 iff the ReLU input is
    /// strictly positive.
    pub fn bits_of(&self, trace: &Trace) -> Vec<u64> {
        let mut words = vec![0u64; self.bit_count.div_ceil(64)];
        for node in &self.nodes {
            if let Kind::Relu { src, bit_offset } = node.kind {
                for (i, &v) in trace.values[src].iter().enumerate() {
                    if v > 0.0 {
                        let b = bit_offset + i;
                        words[b / 64] |= 1 << (b % 64);
                    }
                }
            }
        }
        words
    }

    /// Accumulates `d(dlogits · logits)/dθ` into `grad`.
    pub fn backward_sample(&self, trace: &Trace, dlogits: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        let values = &trace.values;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[self.output] = Some(dlogits.to_vec());
        for idx in (0..self.nodes.len()).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let s = node.shape;
            match &node.kind {
                Kind::Input | Kind::Zero => {}
                Kind::Conv {
                    src,
                    k,
                    weight,
                    bias,
                } => {
                    let ins = self.nodes[*src].shape;
                    if let Some(b) = bias {
                        for (co, chunk) in g.chunks(s.h * s.w).enumerate() {
                            grad[b + co] += chunk.iter().sum::<f64>();
                        }
                    }
                    let w_len = s.c * ins.c * k * k;
                    let dsrc = accum(&mut grads, *src, ins.len());
                    conv_backward(
                        &values[*src],
                        ins,
                        &self.params[*weight..*weight + w_len],
                        *k,
                        s.c,
                        &g,
                        &mut grad[*weight..*weight + w_len],
                        dsrc,
                    );
                }
                Kind::Relu { src, .. } => {
                    let pre = &values[*src];
                    let dsrc = accum(&mut grads, *src, s.len());
                    for ((d, &gi), &p) in dsrc.iter_mut().zip(&g).zip(pre) {
                        if p > 0.0 {
                            *d += gi;
                        }
                    }
                }
                Kind::AvgPool3 { src } => {
                    let dsrc = accum(&mut grads, *src, s.len());
                    avg_pool3_backward(&g, s, dsrc);
                }
                Kind::Sum { srcs } => {
                    for &o in srcs {
                        let d = accum(&mut grads, o, s.len());
                        for (a, b) in d.iter_mut().zip(&g) {
                            *a += b;
                        }
                    }
                }
                Kind::GlobalAvgPool { src } => {
                    let ins = self.nodes[*src].shape;
                    let hw = ins.h * ins.w;
                    let dsrc = accum(&mut grads, *src, ins.len());
                    for (c, chunk) in dsrc.chunks_mut(hw).enumerate() {
                        let v = g[c] / hw as f64;
                        chunk.iter_mut().for_each(|d| *d += v);
                    }
                }
                Kind::Dense { src, weight, bias } => {
                    let input = &values[*src];
                    let fin = input.len();
                    if let Some(b) = bias {
                        for (o, &go) in g.iter().enumerate() {
                            grad[b + o] += go;
                        }
                    }
                    for (o, &go) in g.iter().enumerate() {
                        let row = &mut grad[weight + o * fin..weight + (o + 1) * fin];
                        for (r, &xi) in row.iter_mut().zip(input) {
                            *r += go * xi;
                        }
                    }
                    let dsrc = accum(&mut grads, *src, fin);
                    for (o, &go) in g.iter().enumerate() {
                        let w = &self.params[weight + o * fin..weight + (o + 1) * fin];
                        for (d, &wi) in dsrc.iter_mut().zip(w) {
                            *d += go * wi;
                        }
                    }
                }
            }
        }
    }

    /// Logits and activation bits for every row of `x`.
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ActivationBits), NetError> {
        self.check_batch(x)?;
        let per_row: Vec<(Vec<f64>, Vec<u64>)> = (0..x.rows())
            .into_par_iter()
            .map(|i| {
                let t = self.forward_sample(x.row(i));
                (t.logits(self).to_vec(), self.bits_of(&t))
            })
            .collect();
        let classes = self.classes();
        let mut logits = Matrix::zeros(x.rows(), classes);
        let mut rows = Vec::with_capacity(x.rows());
        for (i, (l, b)) in per_row.into_iter().enumerate() {
            logits.row_mut(i).copy_from_slice(&l);
            rows.push(b);
        }
        Ok((
            logits,
            ActivationBits {
                bit_count: self.bit_count,
                rows,
            },
        ))
    }

    pub fn logits(&self, x: &Matrix) -> Result<Matrix, NetError> {
        Ok(self.forward(x)?.0)
    }

    /// Row `i` is the gradient of the summed logits of sample `i` with respect
    /// to every parameter.
    pub fn jacobian(&self, x: &Matrix) -> Result<Matrix, NetError> {
        self.check_batch(x)?;
        let p = self.params.len();
        let ones = vec![1.0; self.classes()];
        let rows: Vec<Vec<f64>> = (0..x.rows())
            .into_par_iter()
            .map(|i| {
                let t = self.forward_sample(x.row(i));
                let mut g = vec![0.0; p];
                self.backward_sample(&t, &ones, &mut g);
                g
            })
            .collect();
        let mut j = Matrix::zeros(x.rows(), p);
        for (i, r) in rows.into_iter().enumerate() {
            j.row_mut(i).copy_from_slice(&r);
        }
        Ok(j)
    }

    /// Inputs of the final dense layer, one row per sample.
    pub fn last_layer_features(&self, x: &Matrix) -> Result<Matrix, NetError> {
        self.check_batch(x)?;
        let f = self.feature_dim();
        let rows: Vec<Vec<f64>> = (0..x.rows())
            .into_par_iter()
            .map(|i| self.forward_sample(x.row(i)).features(self).to_vec())
            .collect();
        let mut out = Matrix::zeros(x.rows(), f);
        for (i, r) in rows.into_iter().enumerate() {
            out.row_mut(i).copy_from_slice(&r);
        }
        Ok(out)
    }
}

fn accum(grads: &mut [Option<Vec<f64>>], idx: usize, len: usize) -> &mut Vec<f64> {
    grads[idx].get_or_insert_with(|| vec![0.0; len])
}

fn conv_forward(input: &[f64], ins: Shape, weight: &[f64], k: usize, cout: usize, out: &mut [f64]) {
    let (h, w) = (ins.h, ins.w);
    let p = k / 2;
    for co in 0..cout {
        let o = &mut out[co * h * w..(co + 1) * h * w];
        for ci in 0..ins.c {
            let inp = &input[ci * h * w..(ci + 1) * h * w];
            for dy in 0..k {
                let (y0, y1) = valid_range(h, dy, p);
                for dx in 0..k {
                    let wv = weight[((co * ins.c + ci) * k + dy) * k + dx];
                    if wv == 0.0 {
                        continue;
                    }
                    let (x0, x1) = valid_range(w, dx, p);
                    for y in y0..y1 {
                        let yy = y + dy - p;
                        let orow = &mut o[y * w + x0..y * w + x1];
                        let irow = &inp[yy * w + x0 + dx - p..yy * w + x1 + dx - p];
                        for (a, b) in orow.iter_mut().zip(irow) {
                            *a += wv * b;
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    input: &[f64],
    ins: Shape,
    weight: &[f64],
    k: usize,
    cout: usize,
    gout: &[f64],
    gweight: &mut [f64],
    ginput: &mut [f64],
) {
    let (h, w) = (ins.h, ins.w);
    let p = k / 2;
    for co in 0..cout {
        let g = &gout[co * h * w..(co + 1) * h * w];
        for ci in 0..ins.c {
            let inp = &input[ci * h * w..(ci + 1) * h * w];
            let gin = &mut ginput[ci * h * w..(ci + 1) * h * w];
            for dy in 0..k {
                let (y0, y1) = valid_range(h, dy, p);
                for dx in 0..k {
                    let widx = ((co * ins.c + ci) * k + dy) * k + dx;
                    let wv = weight[widx];
                    let (x0, x1) = valid_range(w, dx, p);
                    let mut gw = 0.0;
                    for y in y0..y1 {
                        let yy = y + dy - p;
                        let grow = &g[y * w + x0..y * w + x1];
                        let lo = yy * w + x0 + dx - p;
                        let irow = &inp[lo..lo + (x1 - x0)];
                        gw += grow.iter().zip(irow).map(|(a, b)| a * b).sum::<f64>();
                        let girow = &mut gin[lo..lo + (x1 - x0)];
                        for (d, &gv) in girow.iter_mut().zip(grow) {
                            *d += wv * gv;
                        }
                    }
                    gweight[widx] += gw;
                }
            }
        }
    }
}

/// Output positions `y` for which `y + d - p` lies inside `0..n`.
fn valid_range(n: usize, d: usize, p: usize) -> (usize, usize) {
    let lo = p.saturating_sub(d);
    let hi = (n + p).saturating_sub(d).min(n);
    (lo, hi.max(lo))
}

fn avg_pool3_forward(input: &[f64], s: Shape) -> Vec<f64> {
    let mut out = vec![0.0; s.len()];
    for c in 0..s.c {
        let base = c * s.h * s.w;
        for y in 0..s.h {
            for x in 0..s.w {
                let (mut acc, mut n) = (0.0, 0usize);
                for yy in y.saturating_sub(1)..(y + 2).min(s.h) {
                    for xx in x.saturating_sub(1)..(x + 2).min(s.w) {
                        acc += input[base + yy * s.w + xx];
                        n += 1;
                    }
                }
                out[base + y * s.w + x] = acc / n as f64;
            }
        }
    }
    out
}

fn avg_pool3_backward(g: &[f64], s: Shape, ginput: &mut [f64]) {
    for c in 0..s.c {
        let base = c * s.h * s.w;
        for y in 0..s.h {
            for x in 0..s.w {
                let ys = y.saturating_sub(1)..(y + 2).min(s.h);
                let xs = x.saturating_sub(1)..(x + 2).min(s.w);
                let n = ys.len() * xs.len();
                let v = g[base + y * s.w + x] / n as f64;
                for yy in ys {
                    for xx in xs.clone() {
                        ginput[base + yy * s.w + xx] += v;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::MacroConfig;

    fn random_batch(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = Rng::new(seed);
        let data = (0..rows * cols).map(|_| rng.standard_normal()).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    fn small_space() -> SearchSpace {
        SearchSpace::cell201().with_macro(MacroConfig {
            stem_channels: 4,
            ..MacroConfig::default()
        })
    }

    fn arch(space: &SearchSpace, s: &str) -> Architecture {
        Architecture::parse(s, space).unwrap()
    }

    #[test]
    fn parameter_count_single_conv() {
        let space = small_space();
        let a = arch(
            &space,
            "|skip_connect~0|+|skip_connect~0|skip_connect~1|+|nor_conv_3x3~0|skip_connect~1|skip_connect~2|",
        );
        let net = compile(&a, &space, &mut Rng::new(0)).unwrap();
        // stem 3*4*9, conv 4*4*9, classifier 4*10 + 10
        assert_eq!(net.param_count(), 108 + 144 + 50);
        assert_eq!(net.bit_count(), 4 * 64);
    }

    #[test]
    fn dead_edges_have_no_parameters() {
        let space = small_space();
        // node 1 never reaches the output, so its conv is dropped
        let a = arch(
            &space,
            "|nor_conv_3x3~0|+|none~0|none~1|+|skip_connect~0|none~1|none~2|",
        );
        let net = compile(&a, &space, &mut Rng::new(0)).unwrap();
        assert_eq!(net.param_count(), 108 + 50);
        assert_eq!(net.bit_count(), 0);
    }

    #[test]
    fn all_none_outputs_classifier_bias() {
        let space = SearchSpace::cell201();
        let a = Architecture::uniform_cell(&space, Op::None).unwrap();
        let mut net = compile(&a, &space, &mut Rng::new(1)).unwrap();
        let b = net.group("classifier.bias").unwrap();
        for (i, p) in net.params_mut()[b].iter_mut().enumerate() {
            *p = i as f64 * 0.5;
        }
        let logits = net.logits(&random_batch(3, 192, 2)).unwrap();
        for r in 0..3 {
            for c in 0..10 {
                assert_eq!(logits[(r, c)], c as f64 * 0.5);
            }
        }
    }

    #[test]
    fn all_skip_scales_the_pooled_stem() {
        let space = SearchSpace::cell201();
        let skip = compile(
            &Architecture::uniform_cell(&space, Op::Skip).unwrap(),
            &space,
            &mut Rng::new(3),
        )
        .unwrap();
        // same seed: stem and classifier draws line up because the cell has no parameters
        let none_out = {
            let a = arch(
                &space,
                "|none~0|+|none~0|none~1|+|skip_connect~0|none~1|none~2|",
            );
            compile(&a, &space, &mut Rng::new(3)).unwrap()
        };
        let x = random_batch(4, 192, 4);
        let fs = skip.last_layer_features(&x).unwrap();
        let f1 = none_out.last_layer_features(&x).unwrap();
        // paths 0-3, 0-1-3, 0-2-3, 0-1-2-3
        for (a, b) in fs.data().iter().zip(f1.data()) {
            assert!((a - 4.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn bits_are_scale_invariant() {
        let space = SearchSpace::cell201();
        let mut rng = Rng::new(5);
        for _ in 0..5 {
            let a = crate::netgen::random_arch(&space, &mut rng).unwrap();
            let net = compile(&a, &space, &mut rng).unwrap();
            let x = random_batch(3, 192, rng.next_u64());
            let x2 = x.scale(3.7);
            assert_eq!(net.forward(&x).unwrap().1, net.forward(&x2).unwrap().1);
        }
    }

    fn fd_check(net: &CompiledNet, x: &Matrix) {
        let j = net.jacobian(x).unwrap();
        let h = 1e-5;
        let mut probe = net.clone();
        let bits0 = net.forward(x).unwrap().1;
        let step = (net.param_count() / 60).max(1);
        let mut checked = 0;
        for p in (0..net.param_count()).step_by(step) {
            let orig = probe.params()[p];
            probe.params_mut()[p] = orig + h;
            let (lp, bp) = probe.forward(x).unwrap();
            probe.params_mut()[p] = orig - h;
            let (lm, bm) = probe.forward(x).unwrap();
            probe.params_mut()[p] = orig;
            if bp != bits0 || bm != bits0 {
                continue;
            }
            for i in 0..x.rows() {
                let fd =
                    (lp.row(i).iter().sum::<f64>() - lm.row(i).iter().sum::<f64>()) / (2.0 * h);
                let an = j[(i, p)];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                assert!(rel < 1e-4, "param {p} row {i}: fd {fd} analytic {an}");
            }
            checked += 1;
        }
        assert!(checked > 10);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let space = SearchSpace::cell201();
        for s in [
            "|nor_conv_3x3~0|+|nor_conv_1x1~0|avg_pool_3x3~1|+|skip_connect~0|nor_conv_3x3~1|nor_conv_1x1~2|",
            "|avg_pool_3x3~0|+|nor_conv_3x3~0|nor_conv_3x3~1|+|none~0|skip_connect~1|nor_conv_3x3~2|",
        ] {
            let net = compile(&arch(&space, s), &space, &mut Rng::new(6)).unwrap();
            fd_check(&net, &random_batch(2, 192, 7));
        }
    }

    #[test]
    fn graph_jacobian_matches_finite_differences() {
        let space = SearchSpace::graph101();
        let mut rng = Rng::new(8);
        let a = crate::netgen::random_arch(&space, &mut rng).unwrap();
        let net = compile(&a, &space, &mut rng).unwrap();
        fd_check(&net, &random_batch(2, 192, 9));
    }

    #[test]
    fn duplicate_inputs_give_duplicate_rows() {
        let space = SearchSpace::cell201();
        let a = arch(
            &space,
            "|nor_conv_3x3~0|+|skip_connect~0|nor_conv_1x1~1|+|skip_connect~0|nor_conv_3x3~1|avg_pool_3x3~2|",
        );
        let net = compile(&a, &space, &mut Rng::new(10)).unwrap();
        let mut x = random_batch(3, 192, 11);
        let r0 = x.row(0).to_vec();
        x.row_mut(2).copy_from_slice(&r0);
        let j = net.jacobian(&x).unwrap();
        assert_eq!(j.row(0), j.row(2));
        let (_, bits) = net.forward(&x).unwrap();
        assert_eq!(bits.unique_count(), 2);
    }

    #[test]
    fn builder_mlp_breakpoints() {
        let mut rng = Rng::new(12);
        let mut b = NetBuilder::new(Shape::flat(1), &mut rng);
        let h = b.dense(b.input(), 5, BiasInit::Kaiming, "hidden").unwrap();
        let a = b.relu(h);
        let out = b.dense(a, 2, BiasInit::Zero, "out").unwrap();
        let net = b.finish(out, a);
        assert_eq!(net.param_count(), 5 + 5 + 10 + 2);
        assert_eq!(net.bit_count(), 5);
        let x = Matrix::from_vec(1, 1, vec![0.3]).unwrap();
        let t = net.forward_sample(x.row(0));
        let bits = net.bits_of(&t);
        let w = &net.params()[0..5];
        let bias = &net.params()[5..10];
        for k in 0..5 {
            assert_eq!(bits[0] >> k & 1 == 1, w[k] * 0.3 + bias[k] > 0.0);
        }
    }

    #[test]
    fn rejects_wrong_input_width() {
        let space = SearchSpace::toy();
        let net = compile(
            &Architecture::uniform_cell(&space, Op::Skip).unwrap(),
            &space,
            &mut Rng::new(0),
        )
        .unwrap();
        assert!(matches!(
            net.forward(&random_batch(2, 5, 0)),
            Err(NetError::ShapeMismatch(_))
        ));
    }
}
