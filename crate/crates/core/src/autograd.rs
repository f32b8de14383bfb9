//! Reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Tape`] records every operation in execution order; [`Tape::backward`]
//! walks it in reverse. Parameters enter the tape through [`Tape::param`],
//! which is keyed by `(network, index)` so that a network applied several
//! times in one objective (shared translators, identity mapping, cycles)
//! contributes a single accumulated gradient.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::kernels::{col2im, im2col, normalize_plane, normalize_plane_backward, reflect, ConvGeom};
use crate::scalar::{gemm, Mat, Real};
use crate::tensor::{numel, Shape, Tensor};
use crate::transforms::GeoTransform;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

/// Identifies one parameter tensor of one network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamKey {
    pub net: usize,
    pub index: usize,
}

enum Op<T> {
    Leaf,
    Conv {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
        cols: Vec<T>,
    },
    ConvTranspose {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
    },
    ReflectPad(Var, usize),
    InstanceNorm {
        x: Var,
        affine: Option<(Var, Var)>,
        xhat: Vec<T>,
        inv_std: Vec<T>,
    },
    Relu(Var),
    LeakyRelu(Var, T),
    Tanh(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, T),
    Offset(Var),
    Transform(Var, GeoTransform),
    Abs(Var),
    Mean(Var),
    MeanAbs(Var),
    MeanSquaredError(Var, T),
    PairwiseL1(Var, Var),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    params: BTreeMap<ParamKey, Var>,
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), params: BTreeMap::new() }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].value.shape()
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A value that never receives a gradient.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A free input whose gradient is reported by [`Gradients::wrt`].
    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Registers a parameter tensor. Repeated calls with the same key return
    /// the same node, so gradients from every use accumulate in one place.
    pub fn param(&mut self, key: ParamKey, value: &Tensor<T>, trainable: bool) -> Var {
        if let Some(&v) = self.params.get(&key) {
            return v;
        }
        let v = self.push(value.clone(), Op::Leaf, trainable);
        self.params.insert(key, v);
        v
    }

    /// `x (N,C,H,W) * w (O,C,K,K) + b (1,O,1,1)` with zero padding.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Var {
        let [n, c, h, wd] = self.shape(x);
        let [o, wc, k, k2] = self.shape(w);
        assert_eq!(wc, c, "conv2d: weight expects {wc} input channels, got {c}");
        assert_eq!(k, k2, "conv2d: square kernels only");
        let geom = ConvGeom::new(c, h, wd, k, stride, pad).expect("conv2d: kernel larger than padded input");
        let (rows, p) = (geom.col_rows(), geom.col_cols());
        let keep_cols = self.needs(w);
        let mut all_cols = if keep_cols { vec![T::zero(); n * rows * p] } else { Vec::new() };
        let mut scratch = if keep_cols { Vec::new() } else { vec![T::zero(); rows * p] };
        let mut out = vec![T::zero(); n * o * p];
        {
            let xv = self.value(x).data();
            let wv = self.value(w).data();
            for i in 0..n {
                let cols = if keep_cols { &mut all_cols[i * rows * p..(i + 1) * rows * p] } else { &mut scratch[..] };
                im2col(&xv[i * c * h * wd..(i + 1) * c * h * wd], &geom, cols);
                gemm(Mat::new(wv, o, rows), Mat::new(cols, rows, p), T::zero(), &mut out[i * o * p..(i + 1) * o * p]);
            }
            if let Some(b) = b {
                add_channel_bias(&mut out, self.value(b).data(), n, o, p);
            }
        }
        let needs = self.needs(x) || self.needs(w) || b.is_some_and(|b| self.needs(b));
        let value = Tensor::from_vec([n, o, geom.oh, geom.ow], out).expect("conv2d output");
        self.push(value, Op::Conv { x, w, b, geom, cols: all_cols }, needs)
    }

    /// Transposed convolution, the adjoint of [`conv2d`](Self::conv2d) with
    /// the same kernel, stride and padding. `w` is `(C_in, C_out, K, K)`;
    /// the output is `(H - 1) * stride - 2 * pad + K + output_pad` tall.
    pub fn conv_transpose2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
        output_pad: usize,
    ) -> Var {
        let [n, c, h, wd] = self.shape(x);
        let [wc, o, k, k2] = self.shape(w);
        assert_eq!(wc, c, "conv_transpose2d: weight expects {wc} input channels, got {c}");
        assert_eq!(k, k2, "conv_transpose2d: square kernels only");
        assert!(output_pad < stride, "conv_transpose2d: output padding must be below the stride");
        let oh = (h - 1) * stride + k + output_pad - 2 * pad;
        let ow = (wd - 1) * stride + k + output_pad - 2 * pad;
        let geom = ConvGeom::new(o, oh, ow, k, stride, pad).expect("conv_transpose2d geometry");
        debug_assert_eq!((geom.oh, geom.ow), (h, wd));
        let (rows, p) = (geom.col_rows(), geom.col_cols());
        let mut cols = vec![T::zero(); rows * p];
        let mut out = vec![T::zero(); n * o * oh * ow];
        {
            let xv = self.value(x).data();
            let wv = self.value(w).data();
            for i in 0..n {
                gemm(Mat::new(wv, c, rows).t(), Mat::new(&xv[i * c * p..(i + 1) * c * p], c, p), T::zero(), &mut cols);
                col2im(&cols, &geom, &mut out[i * o * oh * ow..(i + 1) * o * oh * ow]);
            }
            if let Some(b) = b {
                add_channel_bias(&mut out, self.value(b).data(), n, o, oh * ow);
            }
        }
        let needs = self.needs(x) || self.needs(w) || b.is_some_and(|b| self.needs(b));
        let value = Tensor::from_vec([n, o, oh, ow], out).expect("conv_transpose2d output");
        self.push(value, Op::ConvTranspose { x, w, b, geom }, needs)
    }

    pub fn reflect_pad(&mut self, x: Var, pad: usize) -> Var {
        let [n, c, h, w] = self.shape(x);
        assert!(pad < h && pad < w, "reflect_pad: padding {pad} too large for {h}x{w}");
        let (ph, pw) = (h + 2 * pad, w + 2 * pad);
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(n * c * ph * pw);
        for plane in src.chunks_exact(h * w) {
            for i in 0..ph {
                let si = reflect(i as isize - pad as isize, h);
                for j in 0..pw {
                    out.push(plane[si * w + reflect(j as isize - pad as isize, w)]);
                }
            }
        }
        let needs = self.needs(x);
        self.push(Tensor::from_vec([n, c, ph, pw], out).unwrap(), Op::ReflectPad(x, pad), needs)
    }

    /// Per-sample, per-channel normalization; `affine` is `(gamma, beta)`,
    /// each `(1, C, 1, 1)`.
    pub fn instance_norm(&mut self, x: Var, affine: Option<(Var, Var)>, eps: T) -> Var {
        let [n, c, h, w] = self.shape(x);
        let m = h * w;
        let mut xhat = vec![T::zero(); n * c * m];
        let mut inv_std = vec![T::zero(); n * c];
        for (p, plane) in self.value(x).data().chunks_exact(m).enumerate() {
            inv_std[p] = normalize_plane(plane, eps, &mut xhat[p * m..(p + 1) * m]);
        }
        let mut out = xhat.clone();
        if let Some((gamma, beta)) = affine {
            let (gv, bv) = (self.value(gamma).data(), self.value(beta).data());
            for (p, plane) in out.chunks_exact_mut(m).enumerate() {
                let ch = p % c;
                for v in plane {
                    *v = *v * gv[ch] + bv[ch];
                }
            }
        }
        let needs = self.needs(x) || affine.is_some_and(|(g, b)| self.needs(g) || self.needs(b));
        let value = Tensor::from_vec([n, c, h, w], out).unwrap();
        self.push(value, Op::InstanceNorm { x, affine, xhat, inv_std }, needs)
    }

    fn unary(&mut self, x: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let value = self.value(x).map(f);
        let needs = self.needs(x);
        self.push(value, op, needs)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, Op::Relu(x), |v| if v < T::zero() { T::zero() } else { v })
    }

    pub fn leaky_relu(&mut self, x: Var, slope: T) -> Var {
        assert!(slope > T::zero(), "leaky_relu: slope must be positive");
        self.unary(x, Op::LeakyRelu(x, slope), move |v| if v > T::zero() { v } else { v * slope })
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Op::Tanh(x), T::tanh)
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.unary(x, Op::Abs(x), T::abs)
    }

    pub fn scale(&mut self, x: Var, k: T) -> Var {
        self.unary(x, Op::Scale(x, k), move |v| v * k)
    }

    /// `x + k` elementwise.
    pub fn offset(&mut self, x: Var, k: T) -> Var {
        self.unary(x, Op::Offset(x), move |v| v + k)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add: shape mismatch");
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let needs = self.needs(a) || self.needs(b);
        self.push(value, Op::Add(a, b), needs)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "sub: shape mismatch");
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let needs = self.needs(a) || self.needs(b);
        self.push(value, Op::Sub(a, b), needs)
    }

    pub fn transform(&mut self, x: Var, t: GeoTransform) -> Var {
        let value = t.apply(self.value(x));
        let needs = self.needs(x);
        self.push(value, Op::Transform(x, t), needs)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).mean());
        let needs = self.needs(x);
        self.push(value, Op::Mean(x), needs)
    }

    /// `mean(|x|)` as a scalar.
    pub fn mean_abs(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let value = Tensor::scalar(xv.data().iter().map(|v| v.abs()).sum::<T>() / T::of(xv.len() as f64));
        let needs = self.needs(x);
        self.push(value, Op::MeanAbs(x), needs)
    }

    /// Mean-L1 distance between two equally shaped values.
    pub fn l1(&mut self, a: Var, b: Var) -> Var {
        let d = self.sub(a, b);
        self.mean_abs(d)
    }

    /// `mean((x - target)^2)` as a scalar.
    pub fn mse_to(&mut self, x: Var, target: T) -> Var {
        let xv = self.value(x);
        let s = xv.data().iter().map(|&v| (v - target) * (v - target)).sum::<T>();
        let value = Tensor::scalar(s / T::of(xv.len() as f64));
        let needs = self.needs(x);
        self.push(value, Op::MeanSquaredError(x, target), needs)
    }

    /// Per-sample mean absolute difference, shape `(N, 1, 1, 1)`.
    pub fn pairwise_l1(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "pairwise_l1: shape mismatch");
        let (av, bv) = (self.value(a), self.value(b));
        let n = av.batch();
        let m = av.item_len();
        let out: Vec<T> = av
            .data()
            .chunks_exact(m)
            .zip(bv.data().chunks_exact(m))
            .map(|(x, y)| x.iter().zip(y).map(|(&p, &q)| (p - q).abs()).sum::<T>() / T::of(m as f64))
            .collect();
        let needs = self.needs(a) || self.needs(b);
        self.push(Tensor::from_vec([n, 1, 1, 1], out).unwrap(), Op::PairwiseL1(a, b), needs)
    }

    /// `sum_i w_i * v_i` over scalars (or equally shaped values).
    pub fn weighted_sum(&mut self, terms: &[(Var, T)]) -> Option<Var> {
        let mut acc: Option<Var> = None;
        for &(v, w) in terms {
            let scaled = if w == T::one() { v } else { self.scale(v, w) };
            acc = Some(match acc {
                None => scaled,
                Some(a) => self.add(a, scaled),
            });
        }
        acc
    }

    /// Which side of its kink every input of a piecewise-linear op
    /// (`relu`, `leaky_relu`, `abs` and the L1 reductions) falls on. Two
    /// recordings of the same graph with equal patterns lie on one smooth
    /// piece of the function.
    pub fn kink_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for node in &self.nodes {
            match node.op {
                Op::Relu(x) | Op::Abs(x) | Op::MeanAbs(x) => {
                    out.extend(self.value(x).data().iter().map(|&v| v < T::zero()))
                }
                Op::LeakyRelu(x, _) => out.extend(self.value(x).data().iter().map(|&v| v > T::zero())),
                Op::PairwiseL1(a, b) => {
                    out.extend(self.value(a).data().iter().zip(self.value(b).data()).map(|(&p, &q)| p < q))
                }
                _ => {}
            }
        }
        out
    }

    /// Gradients of the one-element value `loss` w.r.t. every node that
    /// depends on a trainable leaf.
    pub fn backward(&self, loss: Var) -> Gradients<T> {
        assert_eq!(self.value(loss).len(), 1, "backward: loss must be a single value");
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.shape(loss), T::one()));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
            }
        }
        Gradients { grads, params: self.params.clone() }
    }

    fn propagate(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let mut acc = |v: Var, t: Tensor<T>| accumulate(grads, v, t);
        match &node.op {
            Op::Leaf => {}
            Op::Conv { x, w, b, geom, cols } => {
                let [n, o, _, _] = node.value.shape();
                let (rows, p) = (geom.col_rows(), geom.col_cols());
                let gd = g.data();
                if self.needs(*w) {
                    let mut dw = vec![T::zero(); o * rows];
                    for i in 0..n {
                        gemm(
                            Mat::new(&gd[i * o * p..(i + 1) * o * p], o, p),
                            Mat::new(&cols[i * rows * p..(i + 1) * rows * p], rows, p).t(),
                            T::one(),
                            &mut dw,
                        );
                    }
                    acc(*w, Tensor::from_vec(self.shape(*w), dw).unwrap());
                }
                if let Some(b) = b.filter(|b| self.needs(*b)) {
                    acc(b, channel_sums(gd, n, o, p, self.shape(b)));
                }
                if self.needs(*x) {
                    let wv = self.value(*w).data();
                    let xs = self.shape(*x);
                    let item = xs[1] * xs[2] * xs[3];
                    let mut dx = vec![T::zero(); numel(xs)];
                    let mut dcols = vec![T::zero(); rows * p];
                    for i in 0..n {
                        gemm(Mat::new(wv, o, rows).t(), Mat::new(&gd[i * o * p..(i + 1) * o * p], o, p), T::zero(), &mut dcols);
                        col2im(&dcols, geom, &mut dx[i * item..(i + 1) * item]);
                    }
                    acc(*x, Tensor::from_vec(xs, dx).unwrap());
                }
            }
            Op::ConvTranspose { x, w, b, geom } => {
                let [n, o, oh, ow] = node.value.shape();
                let (rows, p) = (geom.col_rows(), geom.col_cols());
                let c = self.shape(*x)[1];
                let gd = g.data();
                let out_item = o * oh * ow;
                let mut dcols = vec![T::zero(); rows * p];
                let mut dx = self.needs(*x).then(|| vec![T::zero(); n * c * p]);
                let mut dw = self.needs(*w).then(|| vec![T::zero(); c * rows]);
                let wv = self.value(*w).data();
                let xv = self.value(*x).data();
                for i in 0..n {
                    im2col(&gd[i * out_item..(i + 1) * out_item], geom, &mut dcols);
                    if let Some(dx) = dx.as_mut() {
                        gemm(Mat::new(wv, c, rows), Mat::new(&dcols, rows, p), T::zero(), &mut dx[i * c * p..(i + 1) * c * p]);
                    }
                    if let Some(dw) = dw.as_mut() {
                        gemm(Mat::new(&xv[i * c * p..(i + 1) * c * p], c, p), Mat::new(&dcols, rows, p).t(), T::one(), dw);
                    }
                }
                if let Some(dx) = dx {
                    acc(*x, Tensor::from_vec(self.shape(*x), dx).unwrap());
                }
                if let Some(dw) = dw {
                    acc(*w, Tensor::from_vec(self.shape(*w), dw).unwrap());
                }
                if let Some(b) = b.filter(|b| self.needs(*b)) {
                    acc(b, channel_sums(gd, n, o, oh * ow, self.shape(b)));
                }
            }
            Op::ReflectPad(x, pad) => {
                let xs = self.shape(*x);
                let [_, _, h, w] = xs;
                let (ph, pw) = (h + 2 * pad, w + 2 * pad);
                let mut dx = vec![T::zero(); numel(xs)];
                for (dplane, gplane) in dx.chunks_exact_mut(h * w).zip(g.data().chunks_exact(ph * pw)) {
                    for i in 0..ph {
                        let si = reflect(i as isize - *pad as isize, h);
                        for j in 0..pw {
                            dplane[si * w + reflect(j as isize - *pad as isize, w)] += gplane[i * pw + j];
                        }
                    }
                }
                acc(*x, Tensor::from_vec(xs, dx).unwrap());
            }
            Op::InstanceNorm { x, affine, xhat, inv_std } => {
                let [_, c, h, w] = node.value.shape();
                let m = h * w;
                let gd = g.data();
                let mut gxhat = gd.to_vec();
                if let Some((gamma, beta)) = affine {
                    let gv = self.value(*gamma).data();
                    let mut dgamma = vec![T::zero(); c];
                    let mut dbeta = vec![T::zero(); c];
                    for (p, (gp, xp)) in gd.chunks_exact(m).zip(xhat.chunks_exact(m)).enumerate() {
                        let ch = p % c;
                        dgamma[ch] += gp.iter().zip(xp).map(|(&a, &b)| a * b).sum::<T>();
                        dbeta[ch] += gp.iter().copied().sum::<T>();
                    }
                    for (p, plane) in gxhat.chunks_exact_mut(m).enumerate() {
                        let k = gv[p % c];
                        plane.iter_mut().for_each(|v| *v *= k);
                    }
                    if self.needs(*gamma) {
                        acc(*gamma, Tensor::from_vec(self.shape(*gamma), dgamma).unwrap());
                    }
                    if self.needs(*beta) {
                        acc(*beta, Tensor::from_vec(self.shape(*beta), dbeta).unwrap());
                    }
                }
                if self.needs(*x) {
                    let mut dx = vec![T::zero(); gxhat.len()];
                    for (p, ((d, gp), xp)) in
                        dx.chunks_exact_mut(m).zip(gxhat.chunks_exact(m)).zip(xhat.chunks_exact(m)).enumerate()
                    {
                        normalize_plane_backward(gp, xp, inv_std[p], d);
                    }
                    acc(*x, Tensor::from_vec(self.shape(*x), dx).unwrap());
                }
            }
            Op::Relu(x) => acc(*x, g.zip_map(&node.value, |g, y| if y > T::zero() { g } else { T::zero() })),
            Op::LeakyRelu(x, slope) => {
                let s = *slope;
                acc(*x, g.zip_map(&node.value, move |g, y| if y > T::zero() { g } else { g * s }));
            }
            Op::Tanh(x) => acc(*x, g.zip_map(&node.value, |g, y| g * (T::one() - y * y))),
            Op::Abs(x) => acc(*x, g.zip_map(self.value(*x), |g, v| g * sign(v))),
            Op::Scale(x, k) => {
                let k = *k;
                acc(*x, g.map(move |v| v * k));
            }
            Op::Offset(x) => acc(*x, g.clone()),
            Op::Add(a, b) => {
                if self.needs(*a) {
                    acc(*a, g.clone());
                }
                if self.needs(*b) {
                    acc(*b, g.clone());
                }
            }
            Op::Sub(a, b) => {
                if self.needs(*a) {
                    acc(*a, g.clone());
                }
                if self.needs(*b) {
                    acc(*b, g.map(|v| -v));
                }
            }
            Op::Transform(x, t) => acc(*x, t.inverse().apply(g)),
            Op::Mean(x) => {
                let xs = self.shape(*x);
                acc(*x, Tensor::full(xs, g.item() / T::of(numel(xs) as f64)));
            }
            Op::MeanAbs(x) => {
                let xv = self.value(*x);
                let k = g.item() / T::of(xv.len() as f64);
                acc(*x, xv.map(move |v| sign(v) * k));
            }
            Op::MeanSquaredError(x, target) => {
                let xv = self.value(*x);
                let k = g.item() * T::of(2.0) / T::of(xv.len() as f64);
                let t = *target;
                acc(*x, xv.map(move |v| (v - t) * k));
            }
            Op::PairwiseL1(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let m = av.item_len();
                let inv_m = T::one() / T::of(m as f64);
                let mut da = vec![T::zero(); av.len()];
                for (i, ((d, x), y)) in
                    da.chunks_exact_mut(m).zip(av.data().chunks_exact(m)).zip(bv.data().chunks_exact(m)).enumerate()
                {
                    let k = g.data()[i] * inv_m;
                    for ((d, &p), &q) in d.iter_mut().zip(x).zip(y) {
                        *d = sign(p - q) * k;
                    }
                }
                let da = Tensor::from_vec(av.shape(), da).unwrap();
                if self.needs(*b) {
                    acc(*b, da.map(|v| -v));
                }
                if self.needs(*a) {
                    acc(*a, da);
                }
            }
        }
    }
}

fn sign<T: Real>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Tensor<T>>], v: Var, t: Tensor<T>) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&t),
        slot @ None => *slot = Some(t),
    }
}

fn add_channel_bias<T: Real>(out: &mut [T], bias: &[T], n: usize, o: usize, p: usize) {
    for i in 0..n {
        for (ch, &bv) in bias.iter().enumerate().take(o) {
            out[(i * o + ch) * p..(i * o + ch + 1) * p].iter_mut().for_each(|v| *v += bv);
        }
    }
}

fn channel_sums<T: Real>(g: &[T], n: usize, o: usize, p: usize, shape: Shape) -> Tensor<T> {
    let mut db = vec![T::zero(); o];
    for i in 0..n {
        for (ch, d) in db.iter_mut().enumerate() {
            *d += g[(i * o + ch) * p..(i * o + ch + 1) * p].iter().copied().sum::<T>();
        }
    }
    Tensor::from_vec(shape, db).unwrap()
}

/// Result of [`Tape::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    params: BTreeMap<ParamKey, Var>,
}

impl<T: Real> Gradients<T> {
    /// Gradient w.r.t. a leaf created by [`Tape::leaf`] or [`Tape::param`].
    /// `None` means the loss does not depend on it.
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn param(&self, key: ParamKey) -> Option<&Tensor<T>> {
        self.params.get(&key).and_then(|&v| self.wrt(v))
    }
}
