//! Reverse-mode automatic differentiation over dense value buffers.
//!
//! The tape is a Wengert list scoped to exactly the operation set the model
//! needs: affine maps, pointwise nonlinearities, log-softmax, elementwise
//! arithmetic, depthwise temporal convolution, gather/concat plumbing, and a
//! fused CTC recursion. One tape is built per forward pass and discarded
//! after `backward`.

use super::{tensor::Tensor, Scalar};
use crate::varloss::ctc as ctc_lattice;
use crate::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<F> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    AddScalar(usize, F),
    MulScalar(usize, F),
    Tanh(usize),
    Sigmoid(usize),
    Softplus(usize),
    Exp(usize),
    Ln(usize),
    /// Square root with subgradient 0 at x = 0 (domain boundary).
    Sqrt(usize),
    /// y = W x with W of shape [m, n].
    MatVec {
        w: usize,
        x: usize,
    },
    /// One kernel per row, slid along the row with the given stride.
    DepthwiseConv {
        input: usize,
        weights: usize,
        stride: usize,
    },
    Gather {
        input: usize,
        indices: Vec<usize>,
    },
    Concat {
        parts: Vec<usize>,
    },
    /// Elementwise sum of same-shape parts.
    AddMany {
        parts: Vec<usize>,
    },
    Sum(usize),
    /// vec * scalar with `scalar` a length-1 node.
    ScaleByScalar {
        vec: usize,
        scalar: usize,
    },
    /// Clamp to [0, 1]; gradient passes in the open interval, zero at rails.
    Clamp01(usize),
    LogSoftmax(usize),
    /// Fused CTC negative log-likelihood over a [T, C] log-prob matrix.
    Ctc {
        log_probs: usize,
        extended: Vec<usize>,
        blank: usize,
    },
}

struct Node<F> {
    op: Op<F>,
    values: Vec<F>,
    shape: Vec<usize>,
    needs_grad: bool,
}

/// Reverse-mode tape.
pub struct Tape<F> {
    nodes: Vec<Node<F>>,
}

/// Gradients produced by [`Tape::backward`].
pub struct Gradients<F> {
    grads: Vec<Vec<F>>,
}

impl<F: Scalar> Gradients<F> {
    /// Gradient of the loss with respect to `var` (zeros if detached).
    pub fn wrt(&self, var: Var) -> &[F] {
        &self.grads[var.0]
    }
}

impl<F: Scalar> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn values(&self, var: Var) -> &[F] {
        &self.nodes[var.0].values
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        &self.nodes[var.0].shape
    }

    pub fn scalar_value(&self, var: Var) -> F {
        debug_assert_eq!(self.nodes[var.0].values.len(), 1);
        self.nodes[var.0].values[0]
    }

    fn push(&mut self, op: Op<F>, values: Vec<F>, shape: Vec<usize>, needs_grad: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        self.nodes.push(Node {
            op,
            values,
            shape,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, i: usize) -> bool {
        self.nodes[i].needs_grad
    }

    // ---- leaves ------------------------------------------------------

    pub fn leaf(&mut self, values: Vec<F>, shape: Vec<usize>, requires_grad: bool) -> Var {
        self.push(Op::Leaf, values, shape, requires_grad)
    }

    pub fn constant(&mut self, values: Vec<F>) -> Var {
        let shape = vec![values.len()];
        self.push(Op::Leaf, values, shape, false)
    }

    pub fn constant_scalar(&mut self, value: F) -> Var {
        self.push(Op::Leaf, vec![value], vec![1], false)
    }

    /// Register a tensor as a trainable leaf.
    pub fn param(&mut self, tensor: &Tensor<F>) -> Var {
        self.push(
            Op::Leaf,
            tensor.values().to_vec(),
            tensor.shape().to_vec(),
            true,
        )
    }

    /// Register a tensor as a constant input.
    pub fn input(&mut self, tensor: &Tensor<F>) -> Var {
        self.push(
            Op::Leaf,
            tensor.values().to_vec(),
            tensor.shape().to_vec(),
            false,
        )
    }

    // ---- elementwise -------------------------------------------------

    fn binary_elementwise(&mut self, a: Var, b: Var, name: &str, f: impl Fn(F, F) -> F) -> Var {
        assert_eq!(
            self.nodes[a.0].values.len(),
            self.nodes[b.0].values.len(),
            "{name}: operand lengths {} vs {}",
            self.nodes[a.0].values.len(),
            self.nodes[b.0].values.len()
        );
        let values: Vec<F> = self.nodes[a.0]
            .values
            .iter()
            .zip(&self.nodes[b.0].values)
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        let needs = self.needs(a.0) || self.needs(b.0);
        let op = match name {
            "add" => Op::Add(a.0, b.0),
            "sub" => Op::Sub(a.0, b.0),
            "mul" => Op::Mul(a.0, b.0),
            "div" => Op::Div(a.0, b.0),
            _ => unreachable!(),
        };
        self.push(op, values, shape, needs)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary_elementwise(a, b, "add", |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary_elementwise(a, b, "sub", |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary_elementwise(a, b, "mul", |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.binary_elementwise(a, b, "div", |x, y| x / y)
    }

    fn unary(&mut self, a: Var, op: Op<F>, f: impl Fn(F) -> F) -> Var {
        let values: Vec<F> = self.nodes[a.0].values.iter().map(|&x| f(x)).collect();
        let shape = self.nodes[a.0].shape.clone();
        let needs = self.needs(a.0);
        self.push(op, values, shape, needs)
    }

    pub fn add_scalar(&mut self, a: Var, k: F) -> Var {
        self.unary(a, Op::AddScalar(a.0, k), |x| x + k)
    }

    pub fn mul_scalar(&mut self, a: Var, k: F) -> Var {
        self.unary(a, Op::MulScalar(a.0, k), |x| x * k)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.mul_scalar(a, -F::one())
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a.0), |x| x.tanh())
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a.0), sigmoid)
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, Op::Softplus(a.0), softplus)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp(a.0), |x| x.exp())
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.unary(a, Op::Ln(a.0), |x| x.ln())
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sqrt(a.0), |x| x.sqrt())
    }

    pub fn clamp01(&mut self, a: Var) -> Var {
        self.unary(a, Op::Clamp01(a.0), |x| x.max(F::zero()).min(F::one()))
    }

    // ---- linear algebra ----------------------------------------------

    /// y = W x, with W a [m, n] matrix node and x a length-n vector node.
    pub fn matvec(&mut self, w: Var, x: Var) -> Var {
        let wshape = self.nodes[w.0].shape.clone();
        assert_eq!(wshape.len(), 2, "matvec: W must be 2-D, got {wshape:?}");
        let (m, n) = (wshape[0], wshape[1]);
        assert_eq!(
            self.nodes[x.0].values.len(),
            n,
            "matvec: W is {m}x{n} but x has length {}",
            self.nodes[x.0].values.len()
        );
        let wv = &self.nodes[w.0].values;
        let xv = &self.nodes[x.0].values;
        let mut out = vec![F::zero(); m];
        for i in 0..m {
            let row = &wv[i * n..(i + 1) * n];
            let mut acc = F::zero();
            for j in 0..n {
                acc += row[j] * xv[j];
            }
            out[i] = acc;
        }
        let needs = self.needs(w.0) || self.needs(x.0);
        self.push(Op::MatVec { w: w.0, x: x.0 }, out, vec![m], needs)
    }

    /// Depthwise 1-D convolution: input [d, w], one length-k kernel per row,
    /// output [d, floor((w - k) / stride) + 1].
    pub fn depthwise_conv(&mut self, input: Var, weights: Var, stride: usize) -> Var {
        let ishape = self.nodes[input.0].shape.clone();
        let wshape = self.nodes[weights.0].shape.clone();
        assert_eq!(ishape.len(), 2, "conv input must be 2-D");
        assert_eq!(wshape.len(), 2, "conv weights must be 2-D");
        assert_eq!(ishape[0], wshape[0], "conv: row counts differ");
        let (d, w, k) = (ishape[0], ishape[1], wshape[1]);
        assert!(k <= w, "conv: kernel {k} wider than input {w}");
        assert!(stride >= 1);
        let w_out = (w - k) / stride + 1;
        let iv = &self.nodes[input.0].values;
        let wv = &self.nodes[weights.0].values;
        let mut out = vec![F::zero(); d * w_out];
        for row in 0..d {
            for o in 0..w_out {
                let mut acc = F::zero();
                for j in 0..k {
                    acc += wv[row * k + j] * iv[row * w + o * stride + j];
                }
                out[row * w_out + o] = acc;
            }
        }
        let needs = self.needs(input.0) || self.needs(weights.0);
        self.push(
            Op::DepthwiseConv {
                input: input.0,
                weights: weights.0,
                stride,
            },
            out,
            vec![d, w_out],
            needs,
        )
    }

    // ---- structural --------------------------------------------------

    pub fn gather(&mut self, input: Var, indices: Vec<usize>) -> Var {
        let iv = &self.nodes[input.0].values;
        let values: Vec<F> = indices.iter().map(|&i| iv[i]).collect();
        let shape = vec![values.len()];
        let needs = self.needs(input.0);
        self.push(
            Op::Gather {
                input: input.0,
                indices,
            },
            values,
            shape,
            needs,
        )
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let mut values = Vec::new();
        let mut needs = false;
        for p in parts {
            values.extend_from_slice(&self.nodes[p.0].values);
            needs |= self.needs(p.0);
        }
        let shape = vec![values.len()];
        self.push(
            Op::Concat {
                parts: parts.iter().map(|p| p.0).collect(),
            },
            values,
            shape,
            needs,
        )
    }

    /// Concatenate equal-length rows into a [rows, cols] matrix node.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Var {
        assert!(!rows.is_empty());
        let cols = self.nodes[rows[0].0].values.len();
        let mut values = Vec::with_capacity(rows.len() * cols);
        let mut needs = false;
        for r in rows {
            assert_eq!(
                self.nodes[r.0].values.len(),
                cols,
                "stack_rows: ragged rows"
            );
            values.extend_from_slice(&self.nodes[r.0].values);
            needs |= self.needs(r.0);
        }
        let shape = vec![rows.len(), cols];
        self.push(
            Op::Concat {
                parts: rows.iter().map(|r| r.0).collect(),
            },
            values,
            shape,
            needs,
        )
    }

    pub fn add_many(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let len = self.nodes[parts[0].0].values.len();
        let mut values = vec![F::zero(); len];
        let mut needs = false;
        for p in parts {
            assert_eq!(self.nodes[p.0].values.len(), len, "add_many: ragged parts");
            for (acc, v) in values.iter_mut().zip(&self.nodes[p.0].values) {
                *acc += *v;
            }
            needs |= self.needs(p.0);
        }
        let shape = self.nodes[parts[0].0].shape.clone();
        self.push(
            Op::AddMany {
                parts: parts.iter().map(|p| p.0).collect(),
            },
            values,
            shape,
            needs,
        )
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total: F = self.nodes[a.0].values.iter().cloned().sum();
        let needs = self.needs(a.0);
        self.push(Op::Sum(a.0), vec![total], vec![1], needs)
    }

    pub fn scale_by_scalar(&mut self, vec: Var, scalar: Var) -> Var {
        assert_eq!(
            self.nodes[scalar.0].values.len(),
            1,
            "scale_by_scalar: scalar operand has length {}",
            self.nodes[scalar.0].values.len()
        );
        let s = self.nodes[scalar.0].values[0];
        let values: Vec<F> = self.nodes[vec.0].values.iter().map(|&v| v * s).collect();
        let shape = self.nodes[vec.0].shape.clone();
        let needs = self.needs(vec.0) || self.needs(scalar.0);
        self.push(
            Op::ScaleByScalar {
                vec: vec.0,
                scalar: scalar.0,
            },
            values,
            shape,
            needs,
        )
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let xs = &self.nodes[a.0].values;
        let max = xs.iter().cloned().fold(F::neg_infinity(), F::max);
        let lse = max
            + xs.iter()
                .map(|&x| (x - max).exp())
                .fold(F::zero(), |acc, v| acc + v)
                .ln();
        let values: Vec<F> = xs.iter().map(|&x| x - lse).collect();
        let shape = self.nodes[a.0].shape.clone();
        let needs = self.needs(a.0);
        self.push(Op::LogSoftmax(a.0), values, shape, needs)
    }

    // ---- CTC -----------------------------------------------------------

    /// CTC negative log-likelihood of `targets` given a [T, C] matrix of
    /// per-frame log-probabilities. `blank` is the reserved blank class.
    ///
    /// Fails with [`Error::InfeasibleAlignment`] when the target cannot fit
    /// in the available frames (the loss would be +inf).
    pub fn ctc_loss(&mut self, log_probs: Var, targets: &[usize], blank: usize) -> Result<Var> {
        let shape = self.nodes[log_probs.0].shape.clone();
        if shape.len() != 2 {
            return Err(Error::shape(
                "ctc_loss",
                "[T, C] matrix",
                format!("{shape:?}"),
            ));
        }
        let (frames, classes) = (shape[0], shape[1]);
        ctc_lattice::validate_targets(targets, classes, blank)?;
        let needed = ctc_lattice::min_frames(targets);
        if needed > frames {
            return Err(Error::InfeasibleAlignment { needed, frames });
        }

        let extended = ctc_lattice::extend_with_blanks(targets, blank);
        let lp = &self.nodes[log_probs.0].values;
        let alpha = ctc_lattice::forward_lattice(lp, frames, classes, &extended, blank);
        let log_p = ctc_lattice::lattice_log_prob(&alpha, frames, extended.len());
        let needs = self.needs(log_probs.0);
        Ok(self.push(
            Op::Ctc {
                log_probs: log_probs.0,
                extended,
                blank,
            },
            vec![-log_p],
            vec![1],
            needs,
        ))
    }

    // ---- backward ------------------------------------------------------

    /// Reverse sweep from a scalar loss node. Returns per-node gradients.
    pub fn backward(&self, loss: Var) -> Gradients<F> {
        assert_eq!(
            self.nodes[loss.0].values.len(),
            1,
            "backward: loss must be scalar"
        );
        let mut grads: Vec<Vec<F>> = self
            .nodes
            .iter()
            .map(|n| vec![F::zero(); n.values.len()])
            .collect();
        grads[loss.0][0] = F::one();

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad || grads[i].iter().all(|g| *g == F::zero()) {
                continue;
            }
            let g = std::mem::take(&mut grads[i]);
            self.accumulate(i, &g, &mut grads);
            grads[i] = g;
        }
        Gradients { grads }
    }

    fn accumulate(&self, i: usize, g: &[F], grads: &mut [Vec<F>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                for (ga, &gi) in grads[*a].iter_mut().zip(g) {
                    *ga += gi;
                }
                for (gb, &gi) in grads[*b].iter_mut().zip(g) {
                    *gb += gi;
                }
            }
            Op::Sub(a, b) => {
                for (ga, &gi) in grads[*a].iter_mut().zip(g) {
                    *ga += gi;
                }
                for (gb, &gi) in grads[*b].iter_mut().zip(g) {
                    *gb -= gi;
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (&self.nodes[*a].values, &self.nodes[*b].values);
                for j in 0..g.len() {
                    grads[*a][j] += g[j] * bv[j];
                }
                for j in 0..g.len() {
                    grads[*b][j] += g[j] * av[j];
                }
            }
            Op::Div(a, b) => {
                let (av, bv) = (&self.nodes[*a].values, &self.nodes[*b].values);
                for j in 0..g.len() {
                    grads[*a][j] += g[j] / bv[j];
                }
                for j in 0..g.len() {
                    grads[*b][j] -= g[j] * av[j] / (bv[j] * bv[j]);
                }
            }
            Op::AddScalar(a, _) => {
                for (ga, &gi) in grads[*a].iter_mut().zip(g) {
                    *ga += gi;
                }
            }
            Op::MulScalar(a, k) => {
                for (ga, &gi) in grads[*a].iter_mut().zip(g) {
                    *ga += gi * *k;
                }
            }
            Op::Tanh(a) => {
                for j in 0..g.len() {
                    let y = node.values[j];
                    grads[*a][j] += g[j] * (F::one() - y * y);
                }
            }
            Op::Sigmoid(a) => {
                for j in 0..g.len() {
                    let y = node.values[j];
                    grads[*a][j] += g[j] * y * (F::one() - y);
                }
            }
            Op::Softplus(a) => {
                let av = &self.nodes[*a].values;
                for j in 0..g.len() {
                    grads[*a][j] += g[j] * sigmoid(av[j]);
                }
            }
            Op::Exp(a) => {
                for j in 0..g.len() {
                    grads[*a][j] += g[j] * node.values[j];
                }
            }
            Op::Ln(a) => {
                let av = &self.nodes[*a].values;
                for j in 0..g.len() {
                    grads[*a][j] += g[j] / av[j];
                }
            }
            Op::Sqrt(a) => {
                let half = F::from_f64_c(0.5);
                for j in 0..g.len() {
                    let y = node.values[j];
                    if y > F::zero() {
                        grads[*a][j] += g[j] * half / y;
                    }
                }
            }
            Op::Clamp01(a) => {
                let av = &self.nodes[*a].values;
                for j in 0..g.len() {
                    if av[j] > F::zero() && av[j] < F::one() {
                        grads[*a][j] += g[j];
                    }
                }
            }
            Op::MatVec { w, x } => {
                let n = self.nodes[*x].values.len();
                let xv = &self.nodes[*x].values;
                let wv = &self.nodes[*w].values;
                for i_row in 0..g.len() {
                    let gi = g[i_row];
                    if gi == F::zero() {
                        continue;
                    }
                    let gw = &mut grads[*w][i_row * n..(i_row + 1) * n];
                    for j in 0..n {
                        gw[j] += gi * xv[j];
                    }
                }
                for i_row in 0..g.len() {
                    let gi = g[i_row];
                    if gi == F::zero() {
                        continue;
                    }
                    let wrow = &wv[i_row * n..(i_row + 1) * n];
                    for j in 0..n {
                        grads[*x][j] += gi * wrow[j];
                    }
                }
            }
            Op::DepthwiseConv {
                input,
                weights,
                stride,
            } => {
                let ishape = &self.nodes[*input].shape;
                let wshape = &self.nodes[*weights].shape;
                let (d, w, k) = (ishape[0], ishape[1], wshape[1]);
                let w_out = (w - k) / stride + 1;
                let iv = &self.nodes[*input].values;
                let wv = &self.nodes[*weights].values;
                for row in 0..d {
                    for o in 0..w_out {
                        let go = g[row * w_out + o];
                        if go == F::zero() {
                            continue;
                        }
                        for j in 0..k {
                            grads[*weights][row * k + j] += go * iv[row * w + o * stride + j];
                        }
                    }
                }
                for row in 0..d {
                    for o in 0..w_out {
                        let go = g[row * w_out + o];
                        if go == F::zero() {
                            continue;
                        }
                        for j in 0..k {
                            grads[*input][row * w + o * stride + j] += go * wv[row * k + j];
                        }
                    }
                }
            }
            Op::Gather { input, indices } => {
                for (j, &src) in indices.iter().enumerate() {
                    grads[*input][src] += g[j];
                }
            }
            Op::Concat { parts } => {
                let mut offset = 0;
                for p in parts {
                    let len = self.nodes[*p].values.len();
                    for j in 0..len {
                        grads[*p][j] += g[offset + j];
                    }
                    offset += len;
                }
            }
            Op::AddMany { parts } => {
                for p in parts {
                    for (gp, &gi) in grads[*p].iter_mut().zip(g) {
                        *gp += gi;
                    }
                }
            }
            Op::Sum(a) => {
                let gi = g[0];
                for ga in grads[*a].iter_mut() {
                    *ga += gi;
                }
            }
            Op::ScaleByScalar { vec, scalar } => {
                let s = self.nodes[*scalar].values[0];
                let vv = &self.nodes[*vec].values;
                let mut gs = F::zero();
                for j in 0..g.len() {
                    grads[*vec][j] += g[j] * s;
                    gs += g[j] * vv[j];
                }
                grads[*scalar][0] += gs;
            }
            Op::LogSoftmax(a) => {
                // dx_j = g_j - softmax_j * sum(g)
                let gsum: F = g.iter().cloned().sum();
                for j in 0..g.len() {
                    let p = node.values[j].exp();
                    grads[*a][j] += g[j] - p * gsum;
                }
            }
            Op::Ctc {
                log_probs,
                extended,
                blank,
            } => {
                let shape = &self.nodes[*log_probs].shape;
                let (frames, classes) = (shape[0], shape[1]);
                let lp = &self.nodes[*log_probs].values;
                let occ = ctc_lattice::occupancy(lp, frames, classes, extended, *blank);
                // loss = -log p, so d loss / d lp[t][k] = -occupancy.
                let upstream = g[0];
                for (gj, &oj) in grads[*log_probs].iter_mut().zip(&occ) {
                    *gj -= upstream * oj;
                }
            }
        }
    }
}

fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// softplus(x) = ln(1 + e^x), computed without overflow for large |x|.
fn softplus<F: Scalar>(x: F) -> F {
    x.max(F::zero()) + (-x.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    type T64 = Tape<f64>;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn matvec_forward_and_gradients() {
        let mut tape = T64::new();
        let w = tape.leaf(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![2, 3], true);
        let x = tape.leaf(vec![1.0, 0.5, -1.0], vec![3], true);
        let y = tape.matvec(w, x);
        assert_eq!(tape.values(y), &[1.0 + 1.0 - 3.0, 4.0 + 2.5 - 6.0]);
        let loss = tape.sum(y);
        let grads = tape.backward(loss);
        // dL/dW[i][j] = x[j], dL/dx[j] = sum_i W[i][j]
        assert_eq!(grads.wrt(w), &[1.0, 0.5, -1.0, 1.0, 0.5, -1.0]);
        assert_eq!(grads.wrt(x), &[5.0, 7.0, 9.0]);
    }

    #[test]
    fn elementwise_chain_gradient_matches_closed_form() {
        // f(a) = sum(tanh(a) * a), df/da = tanh(a) + a (1 - tanh^2 a)
        let mut tape = T64::new();
        let a = tape.leaf(vec![0.3, -1.2, 2.0], vec![3], true);
        let t = tape.tanh(a);
        let p = tape.mul(t, a);
        let loss = tape.sum(p);
        let grads = tape.backward(loss);
        for (j, &x) in [0.3_f64, -1.2, 2.0].iter().enumerate() {
            let expect = x.tanh() + x * (1.0 - x.tanh() * x.tanh());
            assert_close(grads.wrt(a)[j], expect, 1e-12);
        }
    }

    #[test]
    fn clamp_gradient_is_zero_at_rails() {
        let mut tape = T64::new();
        let a = tape.leaf(vec![-0.5, 0.5, 1.5], vec![3], true);
        let c = tape.clamp01(a);
        assert_eq!(tape.values(c), &[0.0, 0.5, 1.0]);
        let loss = tape.sum(c);
        let grads = tape.backward(loss);
        assert_eq!(grads.wrt(a), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn log_softmax_gradient_rows_sum_to_zero() {
        let mut tape = T64::new();
        let a = tape.leaf(vec![0.2, 1.1, -0.4], vec![3], true);
        let ls = tape.log_softmax(a);
        let picked = tape.gather(ls, vec![1]);
        let loss = tape.sum(picked);
        let grads = tape.backward(loss);
        let g = grads.wrt(a);
        assert_close(g.iter().sum::<f64>(), 0.0, 1e-12);
        // d/dx_j of ls_1 = delta_1j - p_j
        let p = super::super::softmax(&[0.2_f64, 1.1, -0.4]).unwrap();
        assert_close(g[0], -p[0], 1e-12);
        assert_close(g[1], 1.0 - p[1], 1e-12);
    }

    #[test]
    fn depthwise_conv_identity_kernel() {
        let mut tape = T64::new();
        let input = tape.leaf(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![2, 3], false);
        let weights = tape.leaf(vec![1.0, 1.0], vec![2, 1], false);
        let out = tape.depthwise_conv(input, weights, 1);
        assert_eq!(tape.shape(out), &[2, 3]);
        assert_eq!(tape.values(out), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn ctc_single_frame_single_label() {
        // T=1, y=[a] with p(a) = 0.9: loss = -ln 0.9.
        let mut tape = T64::new();
        let lp = tape.leaf(vec![0.9_f64.ln(), 0.1_f64.ln()], vec![1, 2], true);
        let loss = tape.ctc_loss(lp, &[0], 1).unwrap();
        assert_close(tape.scalar_value(loss), -(0.9_f64.ln()), 1e-12);
    }

    #[test]
    fn ctc_two_frames_uniform_matches_path_count() {
        // T=2, y=[a], uniform over {a, b, -}: paths aa, a-, -a give 3/9.
        let p = (1.0_f64 / 3.0).ln();
        let mut tape = T64::new();
        let lp = tape.leaf(vec![p; 6], vec![2, 3], true);
        let loss = tape.ctc_loss(lp, &[0], 2).unwrap();
        assert_close(tape.scalar_value(loss), -(3.0_f64 / 9.0).ln(), 1e-12);
    }

    #[test]
    fn ctc_occupancy_sums_to_one_per_frame() {
        let mut tape = T64::new();
        let raw = tape.leaf(
            vec![
                0.3, -0.2, 0.9, 0.1, 0.0, -1.0, 0.4, 0.2, -0.3, 1.2, 0.5, 0.7,
            ],
            vec![4, 3],
            true,
        );
        // log-softmax per row
        let rows: Vec<Var> = (0..4)
            .map(|t| {
                let r = tape.gather(raw, vec![3 * t, 3 * t + 1, 3 * t + 2]);
                tape.log_softmax(r)
            })
            .collect();
        let lp = tape.stack_rows(&rows);
        let loss = tape.ctc_loss(lp, &[0, 1], 2).unwrap();
        let grads = tape.backward(loss);
        // gradient w.r.t. log-probs sums to -1 per frame (occupancy sums to 1)
        let g = grads.wrt(lp);
        for t in 0..4 {
            let row_sum: f64 = g[3 * t..3 * t + 3].iter().sum();
            assert_close(row_sum, -1.0, 1e-10);
        }
    }

    #[test]
    fn ctc_infeasible_target_is_an_error() {
        let mut tape = T64::new();
        let lp = tape.leaf(vec![(1.0_f64 / 3.0).ln(); 6], vec![2, 3], false);
        let err = tape.ctc_loss(lp, &[0, 0], 2).unwrap_err();
        match err {
            Error::InfeasibleAlignment { needed, frames } => {
                assert_eq!(needed, 3);
                assert_eq!(frames, 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn ctc_empty_target_is_all_blanks() {
        let mut tape = T64::new();
        let lp = tape.leaf(
            vec![0.7_f64.ln(), 0.3_f64.ln(), 0.6_f64.ln(), 0.4_f64.ln()],
            vec![2, 2],
            false,
        );
        let loss = tape.ctc_loss(lp, &[], 1).unwrap();
        assert_close(tape.scalar_value(loss), -(0.3_f64 * 0.4).ln(), 1e-12);
    }

    #[test]
    fn scale_by_scalar_gradients() {
        let mut tape = T64::new();
        let v = tape.leaf(vec![1.0, 2.0], vec![2], true);
        let s = tape.leaf(vec![3.0], vec![1], true);
        let y = tape.scale_by_scalar(v, s);
        let loss = tape.sum(y);
        let grads = tape.backward(loss);
        assert_eq!(grads.wrt(v), &[3.0, 3.0]);
        assert_eq!(grads.wrt(s), &[3.0]);
    }

    #[test]
    fn sqrt_subgradient_zero_at_origin() {
        let mut tape = T64::new();
        let a = tape.leaf(vec![0.0, 4.0], vec![2], true);
        let r = tape.sqrt(a);
        let loss = tape.sum(r);
        let grads = tape.backward(loss);
        assert_eq!(grads.wrt(a)[0], 0.0);
        assert_close(grads.wrt(a)[1], 0.25, 1e-15);
    }
}
