//! Reverse-mode differentiation over a recorded computation graph.
//!
//! Operations append nodes to a [`Graph`]; each node stores its forward value
//! and a vector-Jacobian product used by [`Graph::backward`]. The op set is
//! the minimum needed for the codec architecture: affine maps, convolutions,
//! gated recurrences, softmax, and the reshape/concat plumbing between them.

use super::tensor::Tensor;
use super::NnError;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

/// Computes gradients for each parent given (upstream grad, parent values, own value).
type BackFn = Box<dyn Fn(&Tensor, &[&Tensor], &Tensor) -> Vec<Tensor>>;

struct Node {
    value: Tensor,
    parents: Vec<NodeId>,
    backward: Option<BackFn>,
    needs_grad: bool,
}

/// Gradients of a scalar loss, indexed by the node they belong to.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }
}

/// A forward-pass recording that can be differentiated once built.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(
        &mut self,
        value: Tensor,
        parents: Vec<NodeId>,
        backward: Option<BackFn>,
    ) -> NodeId {
        let needs_grad = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node {
            value,
            parents,
            backward: if needs_grad { backward } else { None },
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Inserts a trainable leaf.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.nodes.push(Node {
            value,
            parents: vec![],
            backward: None,
            needs_grad: true,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Inserts a non-trainable input (data, noise, targets).
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.nodes.push(Node {
            value,
            parents: vec![],
            backward: None,
            needs_grad: false,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn shapes(&self, a: NodeId, b: NodeId) -> NnError {
        NnError::ShapeMismatch {
            left: self.value(a).shape().to_vec(),
            right: self.value(b).shape().to_vec(),
        }
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let out = self.value(a).zip(self.value(b), |x, y| x + y)?;
        Ok(self.push(
            out,
            vec![a, b],
            Some(Box::new(|g, _, _| vec![g.clone(), g.clone()])),
        ))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let out = self.value(a).zip(self.value(b), |x, y| x - y)?;
        Ok(self.push(
            out,
            vec![a, b],
            Some(Box::new(|g, _, _| vec![g.clone(), g.map(|v| -v)])),
        ))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let out = self.value(a).zip(self.value(b), |x, y| x * y)?;
        Ok(self.push(
            out,
            vec![a, b],
            Some(Box::new(|g, p, _| {
                vec![
                    g.zip(p[1], |gv, bv| gv * bv).expect("shape checked"),
                    g.zip(p[0], |gv, av| gv * av).expect("shape checked"),
                ]
            })),
        ))
    }

    /// `k*a + c` with scalar constants.
    pub fn affine(&mut self, a: NodeId, k: f64, c: f64) -> NodeId {
        let out = self.value(a).map(|v| k * v + c);
        self.push(
            out,
            vec![a],
            Some(Box::new(move |g, _, _| vec![g.map(|v| k * v)])),
        )
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        self.affine(a, k, 0.0)
    }

    /// Adds a `[n]` bias to the last axis of `a`.
    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId, NnError> {
        let av = self.value(a);
        let bv = self.value(bias);
        let n = av.cols();
        if bv.shape() != [n] {
            return Err(self.shapes(a, bias));
        }
        let mut out = av.clone();
        for chunk in out.data_mut().chunks_mut(n) {
            for (o, b) in chunk.iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        Ok(self.push(
            out,
            vec![a, bias],
            Some(Box::new(move |g, _, _| {
                let mut db = vec![0.0; n];
                for chunk in g.data().chunks(n) {
                    for (d, &gv) in db.iter_mut().zip(chunk) {
                        *d += gv;
                    }
                }
                vec![
                    g.clone(),
                    Tensor::from_vec(vec![n], db).expect("finite grads"),
                ]
            })),
        ))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(
            out,
            vec![a, b],
            Some(Box::new(|g, p, _| {
                let da = g.matmul(&p[1].transposed()).expect("shape checked");
                let db = p[0].transposed().matmul(g).expect("shape checked");
                vec![da, db]
            })),
        ))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(|v| v.max(0.0));
        self.push(
            out,
            vec![a],
            Some(Box::new(|g, p, _| {
                vec![g
                    .zip(p[0], |gv, x| if x > 0.0 { gv } else { 0.0 })
                    .expect("shape checked")]
            })),
        )
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(|v| 1.0 / (1.0 + (-v).exp()));
        self.push(
            out,
            vec![a],
            Some(Box::new(|g, _, y| {
                vec![g.zip(y, |gv, s| gv * s * (1.0 - s)).expect("shape checked")]
            })),
        )
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(f64::tanh);
        self.push(
            out,
            vec![a],
            Some(Box::new(|g, _, y| {
                vec![g.zip(y, |gv, t| gv * (1.0 - t * t)).expect("shape checked")]
            })),
        )
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(f64::sqrt);
        self.push(
            out,
            vec![a],
            Some(Box::new(|g, _, y| {
                vec![g.zip(y, |gv, s| gv / (2.0 * s)).expect("shape checked")]
            })),
        )
    }

    /// Row-wise softmax over the last axis, computed with max subtraction.
    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let av = self.value(a);
        let n = av.cols();
        let mut out = av.clone();
        for row in out.data_mut().chunks_mut(n) {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                z += *v;
            }
            for v in row.iter_mut() {
                *v /= z;
            }
        }
        self.push(
            out,
            vec![a],
            Some(Box::new(move |g, _, y| {
                let mut dx = g.clone();
                for (grow, yrow) in dx.data_mut().chunks_mut(n).zip(y.data().chunks(n)) {
                    let dot: f64 = grow.iter().zip(yrow).map(|(gv, yv)| gv * yv).sum();
                    for (gv, &yv) in grow.iter_mut().zip(yrow) {
                        *gv = yv * (*gv - dot);
                    }
                }
                vec![dx]
            })),
        )
    }

    /// Sums every element into a `[1]` scalar.
    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(
            out,
            vec![a],
            Some(Box::new(|g, p, _| {
                let gv = g.data()[0];
                vec![p[0].map(|_| gv)]
            })),
        )
    }

    /// Broadcast division of `a` by a `[1]` scalar node.
    pub fn div_by_scalar(&mut self, a: NodeId, s: NodeId) -> Result<NodeId, NnError> {
        if self.value(s).shape() != [1] {
            return Err(self.shapes(a, s));
        }
        let sv = self.value(s).data()[0];
        let out = self.value(a).map(|v| v / sv);
        Ok(self.push(
            out,
            vec![a, s],
            Some(Box::new(|g, p, _| {
                let sv = p[1].data()[0];
                let da = g.map(|v| v / sv);
                let ds: f64 = g
                    .data()
                    .iter()
                    .zip(p[0].data())
                    .map(|(gv, av)| -gv * av / (sv * sv))
                    .sum();
                vec![da, Tensor::scalar(ds)]
            })),
        ))
    }

    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> Result<NodeId, NnError> {
        let out = self.value(a).reshaped(shape)?;
        let orig = self.value(a).shape().to_vec();
        Ok(self.push(
            out,
            vec![a],
            Some(Box::new(move |g, _, _| {
                vec![g.reshaped(orig.clone()).expect("same element count")]
            })),
        ))
    }

    /// Extracts row `i` of a 2-D tensor as `[1, cols]`.
    pub fn row(&mut self, a: NodeId, i: usize) -> Result<NodeId, NnError> {
        let av = self.value(a);
        let (r, c) = (av.rows(), av.cols());
        if i >= r {
            return Err(NnError::InvalidShape(format!("row {i} of {r}")));
        }
        let out = Tensor::from_vec(vec![1, c], av.data()[i * c..(i + 1) * c].to_vec())
            .expect("finite slice");
        Ok(self.push(
            out,
            vec![a],
            Some(Box::new(move |g, p, _| {
                let mut dx = Tensor::zeros(p[0].shape().to_vec());
                dx.data_mut()[i * c..(i + 1) * c].copy_from_slice(g.data());
                vec![dx]
            })),
        ))
    }

    /// Stacks `[1, c]` rows into `[n, c]`.
    pub fn stack_rows(&mut self, rows: &[NodeId]) -> Result<NodeId, NnError> {
        let c = self.value(rows[0]).cols();
        let mut data = Vec::with_capacity(rows.len() * c);
        for &r in rows {
            let v = self.value(r);
            if v.shape() != [1, c] {
                return Err(self.shapes(rows[0], r));
            }
            data.extend_from_slice(v.data());
        }
        let out = Tensor::from_vec(vec![rows.len(), c], data).expect("finite rows");
        Ok(self.push(
            out,
            rows.to_vec(),
            Some(Box::new(move |g, p, _| {
                (0..p.len())
                    .map(|i| {
                        Tensor::from_vec(vec![1, c], g.data()[i * c..(i + 1) * c].to_vec())
                            .expect("finite grads")
                    })
                    .collect()
            })),
        ))
    }

    /// Reverses the row order of a 2-D tensor (time reversal).
    pub fn reverse_rows(&mut self, a: NodeId) -> NodeId {
        let av = self.value(a);
        let (r, c) = (av.rows(), av.cols());
        let reverse = move |t: &Tensor| {
            let mut data = Vec::with_capacity(r * c);
            for i in (0..r).rev() {
                data.extend_from_slice(&t.data()[i * c..(i + 1) * c]);
            }
            Tensor::from_vec(vec![r, c], data).expect("finite rows")
        };
        let out = reverse(av);
        self.push(
            out,
            vec![a],
            Some(Box::new(move |g, _, _| vec![reverse(g)])),
        )
    }

    /// Concatenates two 2-D tensors along columns.
    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows() != bv.rows() {
            return Err(self.shapes(a, b));
        }
        let (r, ca, cb) = (av.rows(), av.cols(), bv.cols());
        let mut data = Vec::with_capacity(r * (ca + cb));
        for i in 0..r {
            data.extend_from_slice(&av.data()[i * ca..(i + 1) * ca]);
            data.extend_from_slice(&bv.data()[i * cb..(i + 1) * cb]);
        }
        let out = Tensor::from_vec(vec![r, ca + cb], data).expect("finite rows");
        Ok(self.push(
            out,
            vec![a, b],
            Some(Box::new(move |g, _, _| {
                let mut da = Vec::with_capacity(r * ca);
                let mut db = Vec::with_capacity(r * cb);
                for i in 0..r {
                    let row = &g.data()[i * (ca + cb)..(i + 1) * (ca + cb)];
                    da.extend_from_slice(&row[..ca]);
                    db.extend_from_slice(&row[ca..]);
                }
                vec![
                    Tensor::from_vec(vec![r, ca], da).expect("finite grads"),
                    Tensor::from_vec(vec![r, cb], db).expect("finite grads"),
                ]
            })),
        ))
    }

    /// Flattens `[1, C, T, F]` feature maps into time-major `[T, C*F]` rows.
    pub fn chw_to_time_major(&mut self, a: NodeId) -> Result<NodeId, NnError> {
        let av = self.value(a);
        let s = av.shape().to_vec();
        if s.len() != 4 || s[0] != 1 {
            return Err(NnError::InvalidShape(format!(
                "expected [1, C, T, F], got {s:?}"
            )));
        }
        let (c, t, f) = (s[1], s[2], s[3]);
        let mut data = vec![0.0; c * t * f];
        for ci in 0..c {
            for ti in 0..t {
                for fi in 0..f {
                    data[ti * (c * f) + ci * f + fi] = av.data()[ci * t * f + ti * f + fi];
                }
            }
        }
        let out = Tensor::from_vec(vec![t, c * f], data).expect("finite values");
        Ok(self.push(
            out,
            vec![a],
            Some(Box::new(move |g, _, _| {
                let mut dx = vec![0.0; c * t * f];
                for ci in 0..c {
                    for ti in 0..t {
                        for fi in 0..f {
                            dx[ci * t * f + ti * f + fi] = g.data()[ti * (c * f) + ci * f + fi];
                        }
                    }
                }
                vec![Tensor::from_vec(vec![1, c, t, f], dx).expect("finite grads")]
            })),
        ))
    }

    /// 2-D convolution with "same" zero padding and the given strides.
    ///
    /// `x` is `[B, C, H, W]`, `kernels` is `[C', C, kh, kw]`; output is
    /// `[B, C', ceil(H/sh), ceil(W/sw)]`. Padding splits TensorFlow-style
    /// (smaller half before, remainder after).
    pub fn conv2d(
        &mut self,
        x: NodeId,
        kernels: NodeId,
        stride: (usize, usize),
    ) -> Result<NodeId, NnError> {
        let xv = self.value(x);
        let kv = self.value(kernels);
        let xs = xv.shape().to_vec();
        let ks = kv.shape().to_vec();
        if xs.len() != 4 || ks.len() != 4 || xs[1] != ks[1] {
            return Err(self.shapes(x, kernels));
        }
        let (sh, sw) = stride;
        if sh == 0 || sw == 0 {
            return Err(NnError::InvalidShape("zero stride".into()));
        }
        let (bsz, cin, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        let (cout, _, kh, kw) = (ks[0], ks[1], ks[2], ks[3]);
        if h < kh || w < kw {
            return Err(NnError::InvalidShape(format!(
                "input {h}x{w} smaller than kernel {kh}x{kw}"
            )));
        }
        let ho = h.div_ceil(sh);
        let wo = w.div_ceil(sw);
        let pad_h = ((ho - 1) * sh + kh).saturating_sub(h);
        let pad_w = ((wo - 1) * sw + kw).saturating_sub(w);
        let (pt, pl) = (pad_h / 2, pad_w / 2);

        let conv = move |xv: &Tensor, kv: &Tensor| {
            let mut out = vec![0.0; bsz * cout * ho * wo];
            for b in 0..bsz {
                for co in 0..cout {
                    for i in 0..ho {
                        for j in 0..wo {
                            let mut acc = 0.0;
                            for ci in 0..cin {
                                for u in 0..kh {
                                    let hi = (i * sh + u) as isize - pt as isize;
                                    if hi < 0 || hi >= h as isize {
                                        continue;
                                    }
                                    for v in 0..kw {
                                        let wi = (j * sw + v) as isize - pl as isize;
                                        if wi < 0 || wi >= w as isize {
                                            continue;
                                        }
                                        acc += xv.data()
                                            [((b * cin + ci) * h + hi as usize) * w + wi as usize]
                                            * kv.data()[((co * cin + ci) * kh + u) * kw + v];
                                    }
                                }
                            }
                            out[((b * cout + co) * ho + i) * wo + j] = acc;
                        }
                    }
                }
            }
            Tensor::from_vec(vec![bsz, cout, ho, wo], out).expect("finite conv")
        };
        let out = conv(xv, kv);
        Ok(self.push(
            out,
            vec![x, kernels],
            Some(Box::new(move |g, p, _| {
                let (xv, kv) = (p[0], p[1]);
                let mut dx = vec![0.0; bsz * cin * h * w];
                let mut dk = vec![0.0; cout * cin * kh * kw];
                for b in 0..bsz {
                    for co in 0..cout {
                        for i in 0..ho {
                            for j in 0..wo {
                                let gv = g.data()[((b * cout + co) * ho + i) * wo + j];
                                if gv == 0.0 {
                                    continue;
                                }
                                for ci in 0..cin {
                                    for u in 0..kh {
                                        let hi = (i * sh + u) as isize - pt as isize;
                                        if hi < 0 || hi >= h as isize {
                                            continue;
                                        }
                                        for v in 0..kw {
                                            let wi = (j * sw + v) as isize - pl as isize;
                                            if wi < 0 || wi >= w as isize {
                                                continue;
                                            }
                                            let xi = ((b * cin + ci) * h + hi as usize) * w
                                                + wi as usize;
                                            let ki = ((co * cin + ci) * kh + u) * kw + v;
                                            dx[xi] += gv * kv.data()[ki];
                                            dk[ki] += gv * xv.data()[xi];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                vec![
                    Tensor::from_vec(vec![bsz, cin, h, w], dx).expect("finite grads"),
                    Tensor::from_vec(vec![cout, cin, kh, kw], dk).expect("finite grads"),
                ]
            })),
        ))
    }

    /// Inserts a scalar node whose gradient with respect to `parent` was
    /// computed externally (used for losses with closed-form gradients).
    pub fn scalar_with_grad(
        &mut self,
        parent: NodeId,
        value: f64,
        grad: Tensor,
    ) -> Result<NodeId, NnError> {
        if grad.shape() != self.value(parent).shape() {
            return Err(NnError::ShapeMismatch {
                left: grad.shape().to_vec(),
                right: self.value(parent).shape().to_vec(),
            });
        }
        Ok(self.push(
            Tensor::scalar(value),
            vec![parent],
            Some(Box::new(move |g, _, _| {
                let gv = g.data()[0];
                vec![grad.map(|v| gv * v)]
            })),
        ))
    }

    /// Reverse-mode sweep from a scalar loss node.
    ///
    /// Returns the gradient of the loss with respect to every node that
    /// requires one; other nodes report `None`.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, NnError> {
        if self.nodes.is_empty() || loss.0 >= self.nodes.len() {
            return Err(NnError::NoForwardPass);
        }
        if self.value(loss).shape() != [1] {
            return Err(NnError::InvalidShape(format!(
                "loss must be a scalar, got {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            let (Some(back), Some(g)) = (&node.backward, &grads[id]) else {
                continue;
            };
            let pvals: Vec<&Tensor> = node.parents.iter().map(|p| &self.nodes[p.0].value).collect();
            let pgrads = back(g, &pvals, &node.value);
            debug_assert_eq!(pgrads.len(), node.parents.len());
            for (p, pg) in node.parents.iter().zip(pgrads) {
                if !self.nodes[p.0].needs_grad {
                    continue;
                }
                match &mut grads[p.0] {
                    Some(acc) => acc.add_assign(&pg)?,
                    slot => *slot = Some(pg),
                }
            }
        }
        Ok(Gradients { grads })
    }
}
