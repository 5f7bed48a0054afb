//! Forward builders and backward rules for every tape op.

use std::sync::Arc;

use super::{GradError, NodeId, Op, Segments, Tape, Tensor};
use crate::math::{taylor_2atanh, taylor_2atanh_deriv};

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<(), GradError> {
    if a.shape() != b.shape() {
        return Err(GradError::Shape {
            op,
            msg: format!("{:?} vs {:?}", a.shape(), b.shape()),
        });
    }
    Ok(())
}

impl Tape {
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GradError> {
        same_shape("add", self.value(a), self.value(b))?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let out = Tensor::new(self.value(a).shape().to_vec(), data);
        Ok(self.push_op(out, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GradError> {
        same_shape("sub", self.value(a), self.value(b))?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x - y)
            .collect();
        let out = Tensor::new(self.value(a).shape().to_vec(), data);
        Ok(self.push_op(out, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GradError> {
        same_shape("mul", self.value(a), self.value(b))?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let out = Tensor::new(self.value(a).shape().to_vec(), data);
        Ok(self.push_op(out, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        let data = self.value(a).data().iter().map(|x| k * x).collect();
        let out = Tensor::new(self.value(a).shape().to_vec(), data);
        self.push_op(out, Op::Scale(a, k), &[a])
    }

    pub fn add_scalar(&mut self, a: NodeId, k: f64) -> NodeId {
        let data = self.value(a).data().iter().map(|x| k + x).collect();
        let out = Tensor::new(self.value(a).shape().to_vec(), data);
        self.push_op(out, Op::AddScalar(a, k), &[a])
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GradError> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(GradError::Shape {
                op: "matmul",
                msg: format!("{sa:?} x {sb:?}"),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut data = vec![0.0; m * n];
        let da = self.value(a).data();
        let db = self.value(b).data();
        for i in 0..m {
            for p in 0..k {
                let aip = da[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                let brow = &db[p * n..(p + 1) * n];
                let crow = &mut data[i * n..(i + 1) * n];
                for (cv, bv) in crow.iter_mut().zip(brow) {
                    *cv += aip * bv;
                }
            }
        }
        let out = Tensor::matrix(m, n, data);
        Ok(self.push_op(out, Op::MatMul(a, b), &[a, b]))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let data = self.value(a).data().iter().map(|x| x.tanh()).collect();
        let out = Tensor::new(self.value(a).shape().to_vec(), data);
        self.push_op(out, Op::Tanh(a), &[a])
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let data = self.value(a).data().iter().map(|x| crate::math::sigmoid(*x)).collect();
        let out = Tensor::new(self.value(a).shape().to_vec(), data);
        self.push_op(out, Op::Sigmoid(a), &[a])
    }

    /// Elementwise absolute value; the subgradient at exactly 0 is 0.
    pub fn abs(&mut self, a: NodeId) -> NodeId {
        let data = self.value(a).data().iter().map(|x| x.abs()).collect();
        let out = Tensor::new(self.value(a).shape().to_vec(), data);
        self.push_op(out, Op::Abs(a), &[a])
    }

    pub fn log(&mut self, a: NodeId) -> NodeId {
        let data = self.value(a).data().iter().map(|x| x.ln()).collect();
        let out = Tensor::new(self.value(a).shape().to_vec(), data);
        self.push_op(out, Op::Log(a), &[a])
    }

    /// Clamp to `[lo, hi]`; gradient is 1 inside the interval, 0 outside.
    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let data = self.value(a).data().iter().map(|x| x.clamp(lo, hi)).collect();
        let out = Tensor::new(self.value(a).shape().to_vec(), data);
        self.push_op(out, Op::Clamp(a, lo, hi), &[a])
    }

    /// Raw `2 atanh(x)`: the asymptotes at +-1 are not guarded, so saturated
    /// inputs produce infinities that the training loop is expected to catch.
    pub fn atanh2(&mut self, a: NodeId) -> NodeId {
        let data = self.value(a).data().iter().map(|x| 2.0 * x.atanh()).collect();
        let out = Tensor::new(self.value(a).shape().to_vec(), data);
        self.push_op(out, Op::Atanh2(a), &[a])
    }

    /// `out[i] = a.flat[idx[i]]`, reshaped to `out_shape`.
    pub fn gather(
        &mut self,
        a: NodeId,
        idx: Arc<Vec<usize>>,
        out_shape: Vec<usize>,
    ) -> Result<NodeId, GradError> {
        if idx.len() != out_shape.iter().product::<usize>() {
            return Err(GradError::Shape {
                op: "gather",
                msg: format!("{} indices vs shape {:?}", idx.len(), out_shape),
            });
        }
        let src = self.value(a).data();
        if let Some(&bad) = idx.iter().find(|&&i| i >= src.len()) {
            return Err(GradError::Shape {
                op: "gather",
                msg: format!("index {bad} out of range for {} elements", src.len()),
            });
        }
        let data = idx.iter().map(|&i| src[i]).collect();
        let out = Tensor::new(out_shape, data);
        Ok(self.push_op(out, Op::Gather(a, idx), &[a]))
    }

    /// 1-D scatter-add: `out[idx[i]] += a.flat[i]`, output length `out_len`.
    pub fn scatter_add(
        &mut self,
        a: NodeId,
        idx: Arc<Vec<usize>>,
        out_len: usize,
    ) -> Result<NodeId, GradError> {
        if idx.len() != self.value(a).numel() {
            return Err(GradError::Shape {
                op: "scatter_add",
                msg: format!("{} indices vs {} elements", idx.len(), self.value(a).numel()),
            });
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= out_len) {
            return Err(GradError::Shape {
                op: "scatter_add",
                msg: format!("index {bad} out of range for length {out_len}"),
            });
        }
        let mut data = vec![0.0; out_len];
        for (&i, &v) in idx.iter().zip(self.value(a).data()) {
            data[i] += v;
        }
        let out = Tensor::vector(data);
        Ok(self.push_op(out, Op::ScatterAdd(a, idx), &[a]))
    }

    /// Segmented leave-one-out products (prefix/suffix, no division).
    pub fn loo_product(
        &mut self,
        a: NodeId,
        segments: Arc<Segments>,
    ) -> Result<NodeId, GradError> {
        let n = self.value(a).numel();
        if segments.members.len() != n {
            return Err(GradError::Shape {
                op: "loo_product",
                msg: format!("{} segment members vs {} elements", segments.members.len(), n),
            });
        }
        let src = self.value(a).data();
        let mut data = vec![0.0; n];
        let mut vals = Vec::new();
        let mut loo = Vec::new();
        for s in 0..segments.num_segments() {
            let mem = segments.segment(s);
            vals.clear();
            vals.extend(mem.iter().map(|&i| src[i]));
            loo.resize(mem.len(), 0.0);
            crate::math::leave_one_out_products(&vals, &mut loo[..mem.len()]);
            for (slot, &i) in mem.iter().enumerate() {
                data[i] = loo[slot];
            }
        }
        let out = Tensor::new(self.value(a).shape().to_vec(), data);
        Ok(self.push_op(out, Op::LooProduct(a, segments), &[a]))
    }

    /// Elementwise odd Taylor polynomial of `2 arctanh`, degree `q`.
    pub fn taylor_odd_poly(&mut self, a: NodeId, q: usize) -> NodeId {
        let data = self.value(a).data().iter().map(|&x| taylor_2atanh(x, q)).collect();
        let out = Tensor::new(self.value(a).shape().to_vec(), data);
        self.push_op(out, Op::TaylorOddPoly(a, q), &[a])
    }

    /// 1-D concatenation.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId, GradError> {
        let mut data = Vec::new();
        for &p in parts {
            if self.value(p).shape().len() != 1 {
                return Err(GradError::Shape {
                    op: "concat",
                    msg: format!("expected 1-D parts, got {:?}", self.value(p).shape()),
                });
            }
            data.extend_from_slice(self.value(p).data());
        }
        let out = Tensor::vector(data);
        Ok(self.push_op(out, Op::Concat(parts.to_vec()), parts))
    }

    /// Sum of all elements, as a `[1]` tensor.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let out = Tensor::scalar(self.value(a).data().iter().sum());
        self.push_op(out, Op::Sum(a), &[a])
    }

    /// Same data, new shape.
    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> Result<NodeId, GradError> {
        if shape.iter().product::<usize>() != self.value(a).numel() {
            return Err(GradError::Shape {
                op: "reshape",
                msg: format!("{:?} -> {:?}", self.value(a).shape(), shape),
            });
        }
        let out = Tensor::new(shape, self.value(a).data().to_vec());
        Ok(self.push_op(out, Op::Reshape(a), &[a]))
    }

    /// Mean of all elements, as a `[1]` tensor.
    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let n = self.value(a).numel().max(1);
        let s = self.sum(a);
        self.scale(s, 1.0 / n as f64)
    }
}

/// Propagate the gradient of node `i` into its inputs.
pub(crate) fn backward_step(tape: &mut Tape, i: usize) {
    let op = tape.nodes[i].op.clone();
    let g = match tape.grad_of(NodeId(i)) {
        Some(g) => g,
        None => return,
    };
    let gd = g.data();
    match op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            tape.accumulate(a, |dst| {
                for (d, gv) in dst.iter_mut().zip(gd) {
                    *d += gv;
                }
            });
            tape.accumulate(b, |dst| {
                for (d, gv) in dst.iter_mut().zip(gd) {
                    *d += gv;
                }
            });
        }
        Op::Sub(a, b) => {
            tape.accumulate(a, |dst| {
                for (d, gv) in dst.iter_mut().zip(gd) {
                    *d += gv;
                }
            });
            tape.accumulate(b, |dst| {
                for (d, gv) in dst.iter_mut().zip(gd) {
                    *d -= gv;
                }
            });
        }
        Op::Mul(a, b) => {
            let av: Vec<f64> = tape.value(a).data().to_vec();
            let bv: Vec<f64> = tape.value(b).data().to_vec();
            tape.accumulate(a, |dst| {
                for ((d, gv), bvv) in dst.iter_mut().zip(gd).zip(&bv) {
                    *d += gv * bvv;
                }
            });
            tape.accumulate(b, |dst| {
                for ((d, gv), avv) in dst.iter_mut().zip(gd).zip(&av) {
                    *d += gv * avv;
                }
            });
        }
        Op::Scale(a, k) => {
            tape.accumulate(a, |dst| {
                for (d, gv) in dst.iter_mut().zip(gd) {
                    *d += k * gv;
                }
            });
        }
        Op::AddScalar(a, _) => {
            tape.accumulate(a, |dst| {
                for (d, gv) in dst.iter_mut().zip(gd) {
                    *d += gv;
                }
            });
        }
        Op::MatMul(a, b) => {
            let (m, k) = {
                let s = tape.value(a).shape();
                (s[0], s[1])
            };
            let n = tape.value(b).shape()[1];
            let av: Vec<f64> = tape.value(a).data().to_vec();
            let bv: Vec<f64> = tape.value(b).data().to_vec();
            // dA = dC * B^T
            tape.accumulate(a, |dst| {
                for i in 0..m {
                    for p in 0..k {
                        let mut acc = 0.0;
                        let grow = &gd[i * n..(i + 1) * n];
                        let brow = &bv[p * n..(p + 1) * n];
                        for (gv, bvv) in grow.iter().zip(brow) {
                            acc += gv * bvv;
                        }
                        dst[i * k + p] += acc;
                    }
                }
            });
            // dB = A^T * dC
            tape.accumulate(b, |dst| {
                for i in 0..m {
                    for p in 0..k {
                        let aip = av[i * k + p];
                        if aip == 0.0 {
                            continue;
                        }
                        let grow = &gd[i * n..(i + 1) * n];
                        let drow = &mut dst[p * n..(p + 1) * n];
                        for (d, gv) in drow.iter_mut().zip(grow) {
                            *d += aip * gv;
                        }
                    }
                }
            });
        }
        Op::Tanh(a) => {
            let yv: Vec<f64> = tape.value(NodeId(i)).data().to_vec();
            tape.accumulate(a, |dst| {
                for ((d, gv), y) in dst.iter_mut().zip(gd).zip(&yv) {
                    *d += gv * (1.0 - y * y);
                }
            });
        }
        Op::Sigmoid(a) => {
            let yv: Vec<f64> = tape.value(NodeId(i)).data().to_vec();
            tape.accumulate(a, |dst| {
                for ((d, gv), y) in dst.iter_mut().zip(gd).zip(&yv) {
                    *d += gv * y * (1.0 - y);
                }
            });
        }
        Op::Abs(a) => {
            let xv: Vec<f64> = tape.value(a).data().to_vec();
            tape.accumulate(a, |dst| {
                for ((d, gv), x) in dst.iter_mut().zip(gd).zip(&xv) {
                    let s = if *x > 0.0 {
                        1.0
                    } else if *x < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    *d += gv * s;
                }
            });
        }
        Op::Log(a) => {
            let xv: Vec<f64> = tape.value(a).data().to_vec();
            tape.accumulate(a, |dst| {
                for ((d, gv), x) in dst.iter_mut().zip(gd).zip(&xv) {
                    *d += gv / x;
                }
            });
        }
        Op::Clamp(a, lo, hi) => {
            let xv: Vec<f64> = tape.value(a).data().to_vec();
            tape.accumulate(a, |dst| {
                for ((d, gv), x) in dst.iter_mut().zip(gd).zip(&xv) {
                    if *x > lo && *x < hi {
                        *d += gv;
                    }
                }
            });
        }
        Op::Atanh2(a) => {
            let xv: Vec<f64> = tape.value(a).data().to_vec();
            tape.accumulate(a, |dst| {
                for ((d, gv), x) in dst.iter_mut().zip(gd).zip(&xv) {
                    *d += gv * 2.0 / (1.0 - x * x);
                }
            });
        }
        Op::Gather(a, idx) => {
            tape.accumulate(a, |dst| {
                for (&j, gv) in idx.iter().zip(gd) {
                    dst[j] += gv;
                }
            });
        }
        Op::ScatterAdd(a, idx) => {
            tape.accumulate(a, |dst| {
                for (d, &j) in dst.iter_mut().zip(idx.iter()) {
                    *d += gd[j];
                }
            });
        }
        Op::LooProduct(a, segments) => {
            let xv: Vec<f64> = tape.value(a).data().to_vec();
            tape.accumulate(a, |dst| {
                let mut reduced = Vec::new();
                let mut loo = Vec::new();
                for s in 0..segments.num_segments() {
                    let mem = segments.segment(s);
                    let d = mem.len();
                    // d(out_i)/d(x_j) = product over the segment minus {i, j};
                    // computed per i by a leave-one-out pass over the segment
                    // with element i removed. O(d^2), division-free.
                    for (pos_i, &gi) in mem.iter().enumerate() {
                        let gout = gd[gi];
                        if gout == 0.0 || d < 2 {
                            continue;
                        }
                        reduced.clear();
                        reduced.extend(
                            mem.iter()
                                .enumerate()
                                .filter(|(p, _)| *p != pos_i)
                                .map(|(_, &j)| xv[j]),
                        );
                        loo.resize(reduced.len(), 0.0);
                        crate::math::leave_one_out_products(&reduced, &mut loo[..reduced.len()]);
                        let mut slot = 0;
                        for (pos_j, &gj) in mem.iter().enumerate() {
                            if pos_j == pos_i {
                                continue;
                            }
                            dst[gj] += gout * loo[slot];
                            slot += 1;
                        }
                    }
                }
            });
        }
        Op::TaylorOddPoly(a, q) => {
            let xv: Vec<f64> = tape.value(a).data().to_vec();
            tape.accumulate(a, |dst| {
                for ((d, gv), x) in dst.iter_mut().zip(gd).zip(&xv) {
                    *d += gv * taylor_2atanh_deriv(*x, q);
                }
            });
        }
        Op::Concat(parts) => {
            let mut offset = 0;
            for p in parts {
                let len = tape.value(p).numel();
                let slice: Vec<f64> = gd[offset..offset + len].to_vec();
                tape.accumulate(p, |dst| {
                    for (d, gv) in dst.iter_mut().zip(&slice) {
                        *d += gv;
                    }
                });
                offset += len;
            }
        }
        Op::Sum(a) => {
            let gv = gd[0];
            tape.accumulate(a, |dst| {
                for d in dst.iter_mut() {
                    *d += gv;
                }
            });
        }
        Op::Reshape(a) => {
            tape.accumulate(a, |dst| {
                for (d, gv) in dst.iter_mut().zip(gd) {
                    *d += gv;
                }
            });
        }
    }
}
