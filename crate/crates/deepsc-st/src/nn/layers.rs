//! Layer primitives built on the graph: dense, conv, and bidirectional GRU.

use super::graph::{Graph, NodeId};
use super::tensor::Tensor;
use super::NnError;

/// Activation applied after an affine layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    None,
}

pub fn apply_activation(g: &mut Graph, x: NodeId, act: Activation) -> NodeId {
    match act {
        Activation::Relu => g.relu(x),
        Activation::Tanh => g.tanh(x),
        Activation::None => x,
    }
}

/// Emits `act(x W + b)` for a 2-D `x` of shape `[n, in]`.
pub fn emit_dense(
    g: &mut Graph,
    x: NodeId,
    w: NodeId,
    b: NodeId,
    act: Activation,
) -> Result<NodeId, NnError> {
    let y = g.matmul(x, w)?;
    let y = g.add_bias(y, b)?;
    Ok(apply_activation(g, y, act))
}

/// Parameters for one GRU direction. Weight shapes: `w*` are `[in, H]`,
/// `u*` are `[H, H]`, `b*` are `[H]`.
#[derive(Debug, Clone)]
pub struct GruDirection<T> {
    pub wz: T,
    pub uz: T,
    pub bz: T,
    pub wr: T,
    pub ur: T,
    pub br: T,
    pub wh: T,
    pub uh: T,
    pub bh: T,
}

impl<T> GruDirection<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> GruDirection<U> {
        GruDirection {
            wz: f(&self.wz),
            uz: f(&self.uz),
            bz: f(&self.bz),
            wr: f(&self.wr),
            ur: f(&self.ur),
            br: f(&self.br),
            wh: f(&self.wh),
            uh: f(&self.uh),
            bh: f(&self.bh),
        }
    }

    pub fn fields(&self) -> [(&'static str, &T); 9] {
        [
            ("wz", &self.wz),
            ("uz", &self.uz),
            ("bz", &self.bz),
            ("wr", &self.wr),
            ("ur", &self.ur),
            ("br", &self.br),
            ("wh", &self.wh),
            ("uh", &self.uh),
            ("bh", &self.bh),
        ]
    }
}

/// Forward- and reverse-direction GRU parameters of one bidirectional layer.
#[derive(Debug, Clone)]
pub struct BiGruParams<T> {
    pub fwd: GruDirection<T>,
    pub bwd: GruDirection<T>,
}

impl<T> BiGruParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> BiGruParams<U> {
        BiGruParams {
            fwd: self.fwd.map(&mut f),
            bwd: self.bwd.map(&mut f),
        }
    }
}

/// Single-direction GRU over `x` of shape `[T, in]`, zero initial state.
///
/// Update: `z = sigmoid(xWz + hUz + bz)`, `r = sigmoid(xWr + hUr + br)`,
/// `c = tanh(xWh + (r.h)Uh + bh)`, `h' = (1-z).h + z.c`.
pub fn emit_gru(
    g: &mut Graph,
    p: &GruDirection<NodeId>,
    x: NodeId,
) -> Result<NodeId, NnError> {
    let steps = g.value(x).rows();
    let hidden = g.value(p.uz).rows();
    let mut h = g.constant(Tensor::zeros(vec![1, hidden]));
    let mut outputs = Vec::with_capacity(steps);
    for t in 0..steps {
        let xt = g.row(x, t)?;
        let z = {
            let a = g.matmul(xt, p.wz)?;
            let b = g.matmul(h, p.uz)?;
            let s = g.add(a, b)?;
            let s = g.add_bias(s, p.bz)?;
            g.sigmoid(s)
        };
        let r = {
            let a = g.matmul(xt, p.wr)?;
            let b = g.matmul(h, p.ur)?;
            let s = g.add(a, b)?;
            let s = g.add_bias(s, p.br)?;
            g.sigmoid(s)
        };
        let c = {
            let a = g.matmul(xt, p.wh)?;
            let rh = g.mul(r, h)?;
            let b = g.matmul(rh, p.uh)?;
            let s = g.add(a, b)?;
            let s = g.add_bias(s, p.bh)?;
            g.tanh(s)
        };
        let keep = g.affine(z, -1.0, 1.0);
        let kept = g.mul(keep, h)?;
        let new = g.mul(z, c)?;
        h = g.add(kept, new)?;
        outputs.push(h);
    }
    g.stack_rows(&outputs)
}

/// Bidirectional GRU: forward pass concatenated with the time-reversed
/// output of a reverse pass over the time-reversed input.
pub fn emit_bigru(
    g: &mut Graph,
    p: &BiGruParams<NodeId>,
    x: NodeId,
) -> Result<NodeId, NnError> {
    let fwd = emit_gru(g, &p.fwd, x)?;
    let xr = g.reverse_rows(x);
    let bwd = emit_gru(g, &p.bwd, xr)?;
    let bwd = g.reverse_rows(bwd);
    g.concat_cols(fwd, bwd)
}

/// `act(x W + b)` applied along the last axis of an arbitrary-rank tensor.
pub fn dense_forward(
    x: &Tensor,
    w: &Tensor,
    b: &Tensor,
    act: Activation,
) -> Result<Tensor, NnError> {
    let cols = x.cols();
    let rows = x.len() / cols;
    let mut out_shape = x.shape().to_vec();
    *out_shape.last_mut().expect("nonempty shape") = w.cols();
    let mut g = Graph::new();
    let xn = g.constant(x.reshaped(vec![rows, cols])?);
    let wn = g.constant(w.clone());
    let bn = g.constant(b.clone());
    let y = emit_dense(&mut g, xn, wn, bn, act)?;
    g.value(y).reshaped(out_shape)
}

/// Strided "same" convolution of `[B, C, H, W]` by `[C', C, kh, kw]` kernels.
pub fn conv2d_forward(
    x: &Tensor,
    kernels: &Tensor,
    stride: (usize, usize),
    act: Activation,
) -> Result<Tensor, NnError> {
    let mut g = Graph::new();
    let xn = g.constant(x.clone());
    let kn = g.constant(kernels.clone());
    let y = g.conv2d(xn, kn, stride)?;
    let y = apply_activation(&mut g, y, act);
    Ok(g.value(y).clone())
}

/// Bidirectional GRU over `[B, T, in]`, returning `[B, T, 2H]`.
pub fn bigru_forward(
    x: &Tensor,
    params: &BiGruParams<Tensor>,
    hidden: usize,
) -> Result<Tensor, NnError> {
    let s = x.shape().to_vec();
    if s.len() != 3 {
        return Err(NnError::InvalidShape(format!("expected [B, T, in], got {s:?}")));
    }
    if params.fwd.uz.shape() != [hidden, hidden] {
        return Err(NnError::InvalidShape(format!(
            "hidden size {hidden} does not match recurrent weights {:?}",
            params.fwd.uz.shape()
        )));
    }
    let (bsz, steps, nin) = (s[0], s[1], s[2]);
    let mut out = Vec::with_capacity(bsz * steps * 2 * hidden);
    for b in 0..bsz {
        let slice = &x.data()[b * steps * nin..(b + 1) * steps * nin];
        let mut g = Graph::new();
        let xn = g.constant(Tensor::from_vec(vec![steps, nin], slice.to_vec())?);
        let ids = params.map(|t| g.constant(t.clone()));
        let y = emit_bigru(&mut g, &ids, xn)?;
        out.extend_from_slice(g.value(y).data());
    }
    Tensor::from_vec(vec![bsz, steps, 2 * hidden], out)
}

/// Row-stochastic softmax over the last axis.
pub fn softmax(x: &Tensor) -> Tensor {
    let cols = x.cols();
    let rows = x.len() / cols;
    let mut g = Graph::new();
    let xn = g.constant(x.reshaped(vec![rows, cols]).expect("divisible"));
    let y = g.softmax_rows(xn);
    g.value(y)
        .reshaped(x.shape().to_vec())
        .expect("same element count")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rand_tensor(rng: &mut ChaCha20Rng, shape: Vec<usize>) -> Tensor {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-0.8..0.8)).collect()).unwrap()
    }

    fn rand_gru(rng: &mut ChaCha20Rng, nin: usize, h: usize) -> GruDirection<Tensor> {
        GruDirection {
            wz: rand_tensor(rng, vec![nin, h]),
            uz: rand_tensor(rng, vec![h, h]),
            bz: rand_tensor(rng, vec![h]),
            wr: rand_tensor(rng, vec![nin, h]),
            ur: rand_tensor(rng, vec![h, h]),
            br: rand_tensor(rng, vec![h]),
            wh: rand_tensor(rng, vec![nin, h]),
            uh: rand_tensor(rng, vec![h, h]),
            bh: rand_tensor(rng, vec![h]),
        }
    }

    #[test]
    fn dense_identity_passthrough() {
        let x = Tensor::from_rows(&[vec![0.3, -0.7], vec![1.5, 2.0]]).unwrap();
        let w = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let b = Tensor::zeros(vec![2]);
        let y = dense_forward(&x, &w, &b, Activation::None).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn dense_hand_arithmetic() {
        let x = Tensor::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let w = Tensor::from_rows(&[vec![1.0, 3.0], vec![2.0, 4.0]]).unwrap();
        let b = Tensor::zeros(vec![2]);
        let y = dense_forward(&x, &w, &b, Activation::None).unwrap();
        assert_eq!(y.data(), &[3.0, 7.0]);
    }

    #[test]
    fn dense_shape_mismatch_is_an_error() {
        let x = Tensor::zeros(vec![1, 3]);
        let w = Tensor::zeros(vec![2, 2]);
        let b = Tensor::zeros(vec![2]);
        assert!(dense_forward(&x, &w, &b, Activation::None).is_err());
    }

    #[test]
    fn dense_weight_gradient_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let x = rand_tensor(&mut rng, vec![3, 4]);
        let w0 = rand_tensor(&mut rng, vec![4, 5]);
        let b = rand_tensor(&mut rng, vec![5]);
        let loss_of = |w: &Tensor| {
            let mut g = Graph::new();
            let xn = g.constant(x.clone());
            let wn = g.leaf(w.clone());
            let bn = g.constant(b.clone());
            let y = emit_dense(&mut g, xn, wn, bn, Activation::Relu).unwrap();
            let l = g.sum_all(y);
            (g, wn, l)
        };
        let (g, wn, l) = loss_of(&w0);
        let grads = g.backward(l).unwrap();
        let analytic = grads.get(wn).unwrap();
        for i in 0..w0.len() {
            let h = 1e-5;
            let mut wp = w0.clone();
            wp.data_mut()[i] += h;
            let mut wm = w0.clone();
            wm.data_mut()[i] -= h;
            let (gp, _, lp) = loss_of(&wp);
            let (gm, _, lm) = loss_of(&wm);
            let fd = (gp.value(lp).data()[0] - gm.value(lm).data()[0]) / (2.0 * h);
            let a = analytic.data()[i];
            let denom = a.abs().max(fd.abs()).max(1.0);
            assert!((a - fd).abs() / denom <= 1e-6, "coord {i}: {a} vs {fd}");
        }
    }

    #[test]
    fn conv_identity_kernel_passthrough() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let x = rand_tensor(&mut rng, vec![1, 1, 5, 6]);
        let k = Tensor::from_vec(vec![1, 1, 1, 1], vec![1.0]).unwrap();
        let y = conv2d_forward(&x, &k, (1, 1), Activation::None).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv_output_length_is_ceil_of_stride() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let x = rand_tensor(&mut rng, vec![1, 1, 99, 7]);
        let k = rand_tensor(&mut rng, vec![2, 1, 3, 3]);
        let y1 = conv2d_forward(&x, &k, (2, 2), Activation::None).unwrap();
        assert_eq!(y1.shape()[2], 50);
        let k2 = rand_tensor(&mut rng, vec![2, 2, 3, 3]);
        let y2 = conv2d_forward(&y1, &k2, (2, 2), Activation::None).unwrap();
        assert_eq!(y2.shape()[2], 25);
    }

    #[test]
    fn conv_matches_naive_oracle() {
        // Direct nested-loop valid-region convolution, written independently
        // of the graph implementation.
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let (h, w, kh, kw, cin, cout) = (6, 5, 3, 3, 2, 3);
        let x = rand_tensor(&mut rng, vec![1, cin, h, w]);
        let k = rand_tensor(&mut rng, vec![cout, cin, kh, kw]);
        let y = conv2d_forward(&x, &k, (1, 1), Activation::None).unwrap();
        // stride 1, same padding, odd kernel: center-aligned window
        for co in 0..cout {
            for i in 0..h {
                for j in 0..w {
                    let mut acc = 0.0;
                    for ci in 0..cin {
                        for u in 0..kh {
                            for v in 0..kw {
                                let hi = i as isize + u as isize - (kh / 2) as isize;
                                let wi = j as isize + v as isize - (kw / 2) as isize;
                                if hi < 0 || hi >= h as isize || wi < 0 || wi >= w as isize {
                                    continue;
                                }
                                acc += x.data()[(ci * h + hi as usize) * w + wi as usize]
                                    * k.data()[((co * cin + ci) * kh + u) * kw + v];
                            }
                        }
                    }
                    let got = y.data()[(co * h + i) * w + j];
                    assert!((acc - got).abs() < 1e-10, "({co},{i},{j}): {acc} vs {got}");
                }
            }
        }
    }

    #[test]
    fn gru_all_zero_parameters_give_zero_outputs() {
        let zeros = |shape: Vec<usize>| Tensor::zeros(shape);
        let dir = GruDirection {
            wz: zeros(vec![3, 2]),
            uz: zeros(vec![2, 2]),
            bz: zeros(vec![2]),
            wr: zeros(vec![3, 2]),
            ur: zeros(vec![2, 2]),
            br: zeros(vec![2]),
            wh: zeros(vec![3, 2]),
            uh: zeros(vec![2, 2]),
            bh: zeros(vec![2]),
        };
        let params = BiGruParams {
            fwd: dir.clone(),
            bwd: dir,
        };
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let x = rand_tensor(&mut rng, vec![1, 4, 3]);
        let y = bigru_forward(&x, &params, 2).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bigru_time_reversal_swaps_direction_halves() {
        // With identical parameters in both directions, reversing the input
        // swaps the two output halves, each time-reversed.
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let dir = rand_gru(&mut rng, 3, 2);
        let params = BiGruParams {
            fwd: dir.clone(),
            bwd: dir,
        };
        let x = rand_tensor(&mut rng, vec![1, 5, 3]);
        let mut xr = Tensor::zeros(vec![1, 5, 3]);
        for t in 0..5 {
            for f in 0..3 {
                xr.data_mut()[(4 - t) * 3 + f] = x.data()[t * 3 + f];
            }
        }
        let y = bigru_forward(&x, &params, 2).unwrap();
        let yr = bigru_forward(&xr, &params, 2).unwrap();
        for t in 0..5 {
            for u in 0..2 {
                // forward half of reversed input == time-reversed backward half
                let a = yr.data()[t * 4 + u];
                let b = y.data()[(4 - t) * 4 + 2 + u];
                assert!((a - b).abs() < 1e-12);
                let c = yr.data()[t * 4 + 2 + u];
                let d = y.data()[(4 - t) * 4 + u];
                assert!((c - d).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gru_gradient_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let dir0 = rand_gru(&mut rng, 2, 2);
        let x = rand_tensor(&mut rng, vec![2, 2]);
        let loss_of = |dir: &GruDirection<Tensor>| {
            let mut g = Graph::new();
            let xn = g.constant(x.clone());
            let ids = dir.map(|t| g.leaf(t.clone()));
            let y = emit_gru(&mut g, &ids, xn).unwrap();
            let y2 = g.mul(y, y).unwrap();
            let l = g.sum_all(y2);
            (g, ids, l)
        };
        let (g, ids, l) = loss_of(&dir0);
        let grads = g.backward(l).unwrap();
        for (name, node) in ids.fields() {
            let base = match name {
                "wz" => &dir0.wz,
                "uz" => &dir0.uz,
                "bz" => &dir0.bz,
                "wr" => &dir0.wr,
                "ur" => &dir0.ur,
                "br" => &dir0.br,
                "wh" => &dir0.wh,
                "uh" => &dir0.uh,
                _ => &dir0.bh,
            };
            let analytic = grads.get(*node).unwrap();
            for i in 0..base.len() {
                let h = 1e-5;
                let perturb = |delta: f64| {
                    let mut d = dir0.clone();
                    let t = match name {
                        "wz" => &mut d.wz,
                        "uz" => &mut d.uz,
                        "bz" => &mut d.bz,
                        "wr" => &mut d.wr,
                        "ur" => &mut d.ur,
                        "br" => &mut d.br,
                        "wh" => &mut d.wh,
                        "uh" => &mut d.uh,
                        _ => &mut d.bh,
                    };
                    t.data_mut()[i] += delta;
                    let (g, _, l) = loss_of(&d);
                    g.value(l).data()[0]
                };
                let fd = (perturb(h) - perturb(-h)) / (2.0 * h);
                let a = analytic.data()[i];
                let denom = a.abs().max(fd.abs()).max(1.0);
                assert!(
                    (a - fd).abs() / denom <= 1e-5,
                    "{name}[{i}]: {a} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn softmax_uniform_logits() {
        let x = Tensor::zeros(vec![2, 4]);
        let y = softmax(&x);
        assert!(y.data().iter().all(|&v| (v - 0.25).abs() < 1e-12));
    }
}
