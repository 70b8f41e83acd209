//! Define-by-run reverse-mode differentiation.
//!
//! A [`Tape`] records every operation applied to its [`Var`] handles. Nodes are
//! appended in evaluation order, so walking the node list backwards is a valid
//! topological order for the chain rule. A fresh tape is built for every
//! forward pass.

use super::gemm::{gemm, Layout};
use super::params::{ParamId, Parameters};
use super::tensor::{concat_layout, numel, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf(Option<ParamId>),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Matmul(Var, Var),
    BlockMatmul { mix: Var, x: Var },
    Conv1d { x: Var, kernel: Var, bias: Option<Var> },
    Relu(Var),
    Abs(Var),
    Sum(Var),
    Mean(Var),
    Concat { parts: Vec<Var>, axis: usize },
    Reshape(Var),
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Per-node gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

fn is_scalar_shape(shape: &[usize]) -> bool {
    shape.iter().all(|&d| d == 1)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(numel(&shape), value.len());
        self.nodes.push(Node {
            shape,
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Records a copy of `t`; gradients flow to it iff `t.requires_grad()`.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf(None), t.requires_grad())
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        let shape = t.shape().to_vec();
        self.push(shape, t.into_data(), Op::Leaf(None), false)
    }

    pub fn scalar(&mut self, v: f64) -> Var {
        self.push(Vec::new(), vec![v], Op::Leaf(None), false)
    }

    /// Records parameter `id`; [`Tape::backward_into`] accumulates into its gradient.
    pub fn param(&mut self, params: &Parameters, id: ParamId) -> Var {
        let t = params.get(id);
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf(Some(id)), t.requires_grad())
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor::new(n.shape.clone(), n.value.clone()).expect("node shape is consistent")
    }

    fn elementwise(
        &mut self,
        op_name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let (shape, value) = if sa == sb {
            (sa.clone(), va.iter().zip(vb).map(|(&x, &y)| f(x, y)).collect())
        } else if is_scalar_shape(sb) && (!is_scalar_shape(sa) || sa.len() >= sb.len()) {
            // with two single-element operands the higher-rank shape wins
            let y = vb[0];
            (sa.clone(), va.iter().map(|&x| f(x, y)).collect())
        } else if is_scalar_shape(sa) {
            let x = va[0];
            (sb.clone(), vb.iter().map(|&y| f(x, y)).collect())
        } else {
            return Err(Error::Shape {
                op: op_name,
                lhs: sa.clone(),
                rhs: sb.clone(),
            });
        };
        let rg = self.rg(&[a, b]);
        Ok(self.push(shape, value, op, rg))
    }

    /// Elementwise sum; one side may be a scalar.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise (Hadamard) product; one side may be a scalar.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::Shape {
                op: "matmul",
                lhs: sa.clone(),
                rhs: sb.clone(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            &self.nodes[a.0].value,
            Layout::row_major(k),
            &self.nodes[b.0].value,
            Layout::row_major(n),
            &mut out,
            0.0,
        );
        let rg = self.rg(&[a, b]);
        Ok(self.push(vec![m, n], out, Op::Matmul(a, b), rg))
    }

    /// Left-multiplies every consecutive `n`-row block of `x` (`[B*n, c]`) by the
    /// shared `[n, n]` matrix `mix`. This is a batch of `mix @ x_b` matmuls.
    pub fn block_matmul(&mut self, mix: Var, x: Var) -> Result<Var> {
        let (sm, sx) = (&self.nodes[mix.0].shape, &self.nodes[x.0].shape);
        if sm.len() != 2 || sm[0] != sm[1] || sx.len() != 2 || sm[0] == 0 || sx[0] % sm[0] != 0 {
            return Err(Error::Shape {
                op: "block_matmul",
                lhs: sm.clone(),
                rhs: sx.clone(),
            });
        }
        let (n, rows, c) = (sm[0], sx[0], sx[1]);
        let mut out = vec![0.0; rows * c];
        let (mv, xv) = (&self.nodes[mix.0].value, &self.nodes[x.0].value);
        for b in 0..rows / n {
            let block = b * n * c..(b + 1) * n * c;
            gemm(
                n,
                n,
                c,
                mv,
                Layout::row_major(n),
                &xv[block.clone()],
                Layout::row_major(c),
                &mut out[block],
                0.0,
            );
        }
        let shape = sx.clone();
        let rg = self.rg(&[mix, x]);
        Ok(self.push(shape, out, Op::BlockMatmul { mix, x }, rg))
    }

    /// Valid 1D cross-correlation (no kernel flip).
    ///
    /// * `x: [L]`, `kernel: [K]`, optional scalar bias `-> [L-K+1]`
    /// * `x: [N, L]`, `kernel: [C, K]`, optional `bias: [C]` `-> [N, C, L-K+1]`
    pub fn conv1d(&mut self, x: Var, kernel: Var, bias: Option<Var>) -> Result<Var> {
        let (sx, sk) = (self.nodes[x.0].shape.clone(), self.nodes[kernel.0].shape.clone());
        let shape_err = |lhs: &[usize], rhs: &[usize]| Error::Shape {
            op: "conv1d",
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        };
        let (rows, len, channels, klen, batched) = match (sx.len(), sk.len()) {
            (1, 1) => (1, sx[0], 1, sk[0], false),
            (2, 2) => (sx[0], sx[1], sk[0], sk[1], true),
            _ => return Err(shape_err(&sx, &sk)),
        };
        if klen == 0 || klen > len {
            return Err(shape_err(&sx, &sk));
        }
        if let Some(b) = bias {
            let sb = &self.nodes[b.0].shape;
            if numel(sb) != channels || (batched && sb.len() != 1) {
                return Err(shape_err(&sk, sb));
            }
        }
        let out_len = len - klen + 1;
        let xv = &self.nodes[x.0].value;
        let kv = &self.nodes[kernel.0].value;
        let bv = bias.map(|b| &self.nodes[b.0].value);
        let mut out = vec![0.0; rows * channels * out_len];
        for i in 0..rows {
            let xi = &xv[i * len..(i + 1) * len];
            for c in 0..channels {
                let kc = &kv[c * klen..(c + 1) * klen];
                let b0 = bv.map_or(0.0, |b| b[c]);
                let dst = &mut out[(i * channels + c) * out_len..(i * channels + c + 1) * out_len];
                for (t, o) in dst.iter_mut().enumerate() {
                    let mut acc = b0;
                    for (w, v) in kc.iter().zip(&xi[t..t + klen]) {
                        acc += w * v;
                    }
                    *o = acc;
                }
            }
        }
        let shape = if batched {
            vec![rows, channels, out_len]
        } else {
            vec![out_len]
        };
        let mut deps = vec![x, kernel];
        deps.extend(bias);
        let rg = self.rg(&deps);
        Ok(self.push(shape, out, Op::Conv1d { x, kernel, bias }, rg))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.iter().map(|&x| x.max(0.0)).collect();
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.rg(&[a]);
        self.push(shape, value, Op::Relu(a), rg)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.iter().map(|&x| x.abs()).collect();
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.rg(&[a]);
        self.push(shape, value, Op::Abs(a), rg)
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.nodes[a.0].value.iter().sum();
        let rg = self.rg(&[a]);
        self.push(Vec::new(), vec![s], Op::Sum(a), rg)
    }

    /// Mean of all elements, as a scalar.
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let v = &self.nodes[a.0].value;
        if v.is_empty() {
            return Err(Error::InvalidShape("mean of an empty tensor".into()));
        }
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let rg = self.rg(&[a]);
        Ok(self.push(Vec::new(), vec![m], Op::Mean(a), rg))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let shapes: Vec<&[usize]> = parts.iter().map(|p| self.nodes[p.0].shape.as_slice()).collect();
        let (shape, layout) = concat_layout(&shapes, axis)?;
        let mut value = Vec::with_capacity(numel(&shape));
        for o in 0..layout.outer {
            for (p, &w) in parts.iter().zip(&layout.widths) {
                value.extend_from_slice(&self.nodes[p.0].value[o * w..(o + 1) * w]);
            }
        }
        let rg = self.rg(parts);
        Ok(self.push(
            shape,
            value,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            rg,
        ))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let from = &self.nodes[a.0].shape;
        if numel(from) != numel(shape) {
            return Err(Error::Shape {
                op: "reshape",
                lhs: from.clone(),
                rhs: shape.to_vec(),
            });
        }
        let value = self.nodes[a.0].value.clone();
        let rg = self.rg(&[a]);
        Ok(self.push(shape.to_vec(), value, Op::Reshape(a), rg))
    }

    /// Reverse sweep from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = &self.nodes[loss.0].shape;
        if !is_scalar_shape(shape) {
            return Err(Error::NonScalarLoss(shape.clone()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![1.0]);
        }
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// [`Tape::backward`], then adds each parameter leaf's gradient into `params`.
    pub fn backward_into(&self, loss: Var, params: &mut Parameters) -> Result<Gradients> {
        let grads = self.backward(loss)?;
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Op::Leaf(Some(id)), Some(g)) = (&node.op, &grads.grads[i]) {
                params.get_mut(*id).accumulate_grad(g);
            }
        }
        Ok(grads)
    }

    fn slot<'a>(&self, grads: &'a mut [Option<Vec<f64>>], v: Var) -> Option<&'a mut Vec<f64>> {
        let node = &self.nodes[v.0];
        if !node.requires_grad {
            return None;
        }
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; node.value.len()]))
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf(_) => {}
            Op::Add(a, b) => {
                self.accum_broadcast(grads, *a, g, 1.0);
                self.accum_broadcast(grads, *b, g, 1.0);
            }
            Op::Sub(a, b) => {
                self.accum_broadcast(grads, *a, g, 1.0);
                self.accum_broadcast(grads, *b, g, -1.0);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                let ga: Vec<f64> = g.iter().enumerate().map(|(i, gi)| gi * pick(vb, i)).collect();
                let gb: Vec<f64> = g.iter().enumerate().map(|(i, gi)| gi * pick(va, i)).collect();
                self.accum_broadcast(grads, *a, &ga, 1.0);
                self.accum_broadcast(grads, *b, &gb, 1.0);
            }
            Op::Matmul(a, b) => {
                let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                if let Some(ga) = self.slot(grads, *a) {
                    // dA = G B^T
                    gemm(m, n, k, g, Layout::row_major(n), vb, Layout::transposed(n), ga, 1.0);
                }
                if let Some(gb) = self.slot(grads, *b) {
                    // dB = A^T G
                    gemm(k, m, n, va, Layout::transposed(k), g, Layout::row_major(n), gb, 1.0);
                }
            }
            Op::BlockMatmul { mix, x } => {
                let n = self.nodes[mix.0].shape[0];
                let c = self.nodes[x.0].shape[1];
                let blocks = self.nodes[x.0].shape[0] / n;
                let (vm, vx) = (&self.nodes[mix.0].value, &self.nodes[x.0].value);
                if let Some(gx) = self.slot(grads, *x) {
                    for b in 0..blocks {
                        let r = b * n * c..(b + 1) * n * c;
                        gemm(
                            n,
                            n,
                            c,
                            vm,
                            Layout::transposed(n),
                            &g[r.clone()],
                            Layout::row_major(c),
                            &mut gx[r],
                            1.0,
                        );
                    }
                }
                if let Some(gm) = self.slot(grads, *mix) {
                    for b in 0..blocks {
                        let r = b * n * c..(b + 1) * n * c;
                        gemm(
                            n,
                            c,
                            n,
                            &g[r.clone()],
                            Layout::row_major(c),
                            &vx[r],
                            Layout::transposed(c),
                            gm,
                            1.0,
                        );
                    }
                }
            }
            Op::Conv1d { x, kernel, bias } => self.conv1d_backward(node, g, *x, *kernel, *bias, grads),
            Op::Relu(a) => {
                let va = &self.nodes[a.0].value;
                if let Some(ga) = self.slot(grads, *a) {
                    for ((d, gi), x) in ga.iter_mut().zip(g).zip(va) {
                        if *x > 0.0 {
                            *d += gi;
                        }
                    }
                }
            }
            Op::Abs(a) => {
                let va = &self.nodes[a.0].value;
                if let Some(ga) = self.slot(grads, *a) {
                    for ((d, gi), x) in ga.iter_mut().zip(g).zip(va) {
                        if *x > 0.0 {
                            *d += gi;
                        } else if *x < 0.0 {
                            *d -= gi;
                        }
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(ga) = self.slot(grads, *a) {
                    ga.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::Mean(a) => {
                if let Some(ga) = self.slot(grads, *a) {
                    let s = g[0] / ga.len() as f64;
                    ga.iter_mut().for_each(|d| *d += s);
                }
            }
            Op::Concat { parts, axis } => {
                let shapes: Vec<&[usize]> =
                    parts.iter().map(|p| self.nodes[p.0].shape.as_slice()).collect();
                let (_, layout) = concat_layout(&shapes, *axis).expect("validated at record time");
                let row: usize = layout.widths.iter().sum();
                let mut offset = 0;
                for (p, &w) in parts.iter().zip(&layout.widths) {
                    if let Some(gp) = self.slot(grads, *p) {
                        for o in 0..layout.outer {
                            let src = &g[o * row + offset..o * row + offset + w];
                            for (d, s) in gp[o * w..(o + 1) * w].iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                    }
                    offset += w;
                }
            }
            Op::Reshape(a) => {
                if let Some(ga) = self.slot(grads, *a) {
                    for (d, s) in ga.iter_mut().zip(g) {
                        *d += s;
                    }
                }
            }
        }
    }

    fn accum_broadcast(&self, grads: &mut [Option<Vec<f64>>], v: Var, g: &[f64], sign: f64) {
        if let Some(gv) = self.slot(grads, v) {
            if gv.len() == g.len() {
                for (d, s) in gv.iter_mut().zip(g) {
                    *d += sign * s;
                }
            } else {
                // scalar operand broadcast over the other side
                gv[0] += sign * g.iter().sum::<f64>();
            }
        }
    }

    fn conv1d_backward(
        &self,
        node: &Node,
        g: &[f64],
        x: Var,
        kernel: Var,
        bias: Option<Var>,
        grads: &mut [Option<Vec<f64>>],
    ) {
        let sx = &self.nodes[x.0].shape;
        let sk = &self.nodes[kernel.0].shape;
        let (rows, len) = if sx.len() == 2 { (sx[0], sx[1]) } else { (1, sx[0]) };
        let (channels, klen) = if sk.len() == 2 { (sk[0], sk[1]) } else { (1, sk[0]) };
        let out_len = *node.shape.last().expect("conv output has a time axis");
        let (xv, kv) = (&self.nodes[x.0].value, &self.nodes[kernel.0].value);

        if let Some(gx) = self.slot(grads, x) {
            for i in 0..rows {
                let gxi = &mut gx[i * len..(i + 1) * len];
                for c in 0..channels {
                    let kc = &kv[c * klen..(c + 1) * klen];
                    let gc = &g[(i * channels + c) * out_len..(i * channels + c + 1) * out_len];
                    for (t, gt) in gc.iter().enumerate() {
                        for (j, w) in kc.iter().enumerate() {
                            gxi[t + j] += gt * w;
                        }
                    }
                }
            }
        }
        if let Some(gk) = self.slot(grads, kernel) {
            for i in 0..rows {
                let xi = &xv[i * len..(i + 1) * len];
                for c in 0..channels {
                    let gc = &g[(i * channels + c) * out_len..(i * channels + c + 1) * out_len];
                    let gkc = &mut gk[c * klen..(c + 1) * klen];
                    for (j, d) in gkc.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for (gt, xv) in gc.iter().zip(&xi[j..j + out_len]) {
                            acc += gt * xv;
                        }
                        *d += acc;
                    }
                }
            }
        }
        if let Some(b) = bias {
            if let Some(gb) = self.slot(grads, b) {
                for i in 0..rows {
                    for (c, d) in gb.iter_mut().enumerate() {
                        let gc = &g[(i * channels + c) * out_len..(i * channels + c + 1) * out_len];
                        *d += gc.iter().sum::<f64>();
                    }
                }
            }
        }
    }
}

#[inline]
fn pick(v: &[f64], i: usize) -> f64 {
    if v.len() == 1 {
        v[0]
    } else {
        v[i]
    }
}
