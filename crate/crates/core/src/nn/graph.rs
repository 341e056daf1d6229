//! Reverse-mode automatic differentiation over a recorded tape.

use super::tensor::{matmul, matmul_at, matmul_bt, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Geometry of a 2D convolution or pooling window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2d {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl Conv2d {
    fn out_len(&self, n: usize) -> usize {
        let ext = self.dilation * (self.kernel - 1) + 1;
        let padded = n + 2 * self.padding;
        assert!(padded >= ext, "window larger than padded input");
        (padded - ext) / self.stride + 1
    }

    /// Input index for output index `o` and kernel tap `t`, if inside the input.
    #[inline]
    fn src(&self, o: usize, t: usize, n: usize) -> Option<usize> {
        let i = (o * self.stride + t * self.dilation) as isize - self.padding as isize;
        (i >= 0 && (i as usize) < n).then_some(i as usize)
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Relu(Var),
    Scale(Var, f64),
    Transpose(Var),
    SliceCols {
        x: Var,
        start: usize,
    },
    ConcatCols(Vec<Var>),
    Softmax(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Tensor,
        inv_std: Vec<f64>,
    },
    Conv {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: Conv2d,
    },
    ChannelAffine {
        x: Var,
        gamma: Var,
        beta: Var,
    },
    MaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    ToSequence(Var),
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    Mask {
        x: Var,
        mask: Vec<f64>,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<Option<usize>>,
        probs: Tensor,
        count: usize,
    },
    Pick {
        x: Var,
        index: usize,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    grad: bool,
}

/// A tape of tensor operations. Values are computed eagerly as nodes are
/// recorded; [`Graph::backward`] walks the tape in reverse.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients indexed by [`Var`].
pub struct Grads(Vec<Option<Tensor>>);

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.0[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.0[v.0].take()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op, grad: bool) -> Var {
        self.nodes.push(Node { value, op, grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].grad)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Trainable leaf.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Leaf that receives no gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = matmul(self.value(a), self.value(b));
        let g = self.needs(&[a, b]);
        self.push(v, Op::MatMul(a, b), g)
    }

    /// Adds a row vector `b[n]` to every row of `a[m,n]`.
    pub fn add_bias(&mut self, a: Var, b: Var) -> Var {
        let (m, n) = self.value(a).dims2();
        let bias = self.value(b).data();
        assert_eq!(bias.len(), n);
        let mut out = self.value(a).clone();
        for i in 0..m {
            for (o, &x) in out.data_mut()[i * n..(i + 1) * n].iter_mut().zip(bias) {
                *o += x;
            }
        }
        let g = self.needs(&[a, b]);
        self.push(out, Op::AddBias(a, b), g)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        let g = self.needs(&[a, b]);
        self.push(out, Op::Add(a, b), g)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        let g = self.needs(&[a]);
        self.push(out, Op::Relu(a), g)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|x| x * s);
        let g = self.needs(&[a]);
        self.push(out, Op::Scale(a, s), g)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        let g = self.needs(&[a]);
        self.push(out, Op::Transpose(a), g)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let x = self.value(a);
        let (m, n) = x.dims2();
        assert!(start + len <= n);
        let mut out = Vec::with_capacity(m * len);
        for i in 0..m {
            out.extend_from_slice(&x.row(i)[start..start + len]);
        }
        let g = self.needs(&[a]);
        self.push(Tensor::new(vec![m, len], out), Op::SliceCols { x: a, start }, g)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let m = self.value(parts[0]).dims2().0;
        let n: usize = parts.iter().map(|&p| self.value(p).dims2().1).sum();
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(i));
            }
        }
        let g = self.needs(parts);
        self.push(Tensor::new(vec![m, n], out), Op::ConcatCols(parts.to_vec()), g)
    }

    /// Row-wise softmax. With `causal`, entry `(i, j)` is masked out for `j > i`.
    pub fn softmax(&mut self, a: Var, causal: bool) -> Var {
        let x = self.value(a);
        let (m, n) = x.dims2();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = x.row(i);
            let width = if causal { (i + 1).min(n) } else { n };
            let max = row[..width].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..width {
                let e = (row[j] - max).exp();
                out[i * n + j] = e;
                sum += e;
            }
            for o in &mut out[i * n..i * n + width] {
                *o /= sum;
            }
        }
        let g = self.needs(&[a]);
        self.push(Tensor::new(vec![m, n], out), Op::Softmax(a), g)
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        const EPS: f64 = 1e-5;
        let xv = self.value(x);
        let (m, n) = xv.dims2();
        let (gv, bv) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = vec![0.0; m * n];
        let mut inv_std = Vec::with_capacity(m);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = xv.row(i);
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + EPS).sqrt();
            inv_std.push(is);
            for j in 0..n {
                let h = (row[j] - mean) * is;
                xhat[i * n + j] = h;
                out[i * n + j] = h * gv[j] + bv[j];
            }
        }
        let g = self.needs(&[x, gamma, beta]);
        let op = Op::LayerNorm {
            x,
            gamma,
            beta,
            xhat: Tensor::new(vec![m, n], xhat),
            inv_std,
        };
        self.push(Tensor::new(vec![m, n], out), op, g)
    }

    /// `x[C,H,W]` convolved with `w[O,C,k,k]`, optional bias `b[O]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, geom: Conv2d) -> Var {
        let xv = self.value(x);
        let (c, h, wd) = xv.dims3();
        let wv = self.value(w);
        let [o, c2, k, k2] = wv.shape() else {
            panic!("conv weight must be rank 4")
        };
        let (o, k) = (*o, *k);
        assert_eq!((*c2, *k2), (c, geom.kernel));
        assert_eq!(k, geom.kernel);
        let (ho, wo) = (geom.out_len(h), geom.out_len(wd));
        let mut out = vec![0.0; o * ho * wo];
        if let Some(b) = b {
            for (oc, &bias) in self.value(b).data().iter().enumerate() {
                out[oc * ho * wo..(oc + 1) * ho * wo].fill(bias);
            }
        }
        let (xd, wdata) = (xv.data(), wv.data());
        for oc in 0..o {
            let plane = &mut out[oc * ho * wo..(oc + 1) * ho * wo];
            for ic in 0..c {
                let xin = &xd[ic * h * wd..(ic + 1) * h * wd];
                for ki in 0..k {
                    for kj in 0..k {
                        let wt = wdata[((oc * c + ic) * k + ki) * k + kj];
                        for oy in 0..ho {
                            let Some(iy) = geom.src(oy, ki, h) else { continue };
                            let xrow = &xin[iy * wd..(iy + 1) * wd];
                            let orow = &mut plane[oy * wo..(oy + 1) * wo];
                            for (ox, ov) in orow.iter_mut().enumerate() {
                                if let Some(ix) = geom.src(ox, kj, wd) {
                                    *ov += wt * xrow[ix];
                                }
                            }
                        }
                    }
                }
            }
        }
        let mut deps = vec![x, w];
        deps.extend(b);
        let g = self.needs(&deps);
        self.push(Tensor::new(vec![o, ho, wo], out), Op::Conv { x, w, b, geom }, g)
    }

    /// Per-channel `gamma[c]·x + beta[c]` on a feature map.
    pub fn channel_affine(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let xv = self.value(x);
        let (c, h, w) = xv.dims3();
        let (gv, bv) = (self.value(gamma).data(), self.value(beta).data());
        let mut out = xv.clone();
        for ch in 0..c {
            for v in &mut out.data_mut()[ch * h * w..(ch + 1) * h * w] {
                *v = *v * gv[ch] + bv[ch];
            }
        }
        let g = self.needs(&[x, gamma, beta]);
        self.push(out, Op::ChannelAffine { x, gamma, beta }, g)
    }

    /// Max pooling; padded positions never win.
    pub fn max_pool(&mut self, x: Var, geom: Conv2d) -> Var {
        let xv = self.value(x);
        let (c, h, w) = xv.dims3();
        let (ho, wo) = (geom.out_len(h), geom.out_len(w));
        let mut out = vec![f64::NEG_INFINITY; c * ho * wo];
        let mut argmax = vec![usize::MAX; c * ho * wo];
        for ch in 0..c {
            for oy in 0..ho {
                for ox in 0..wo {
                    let o = (ch * ho + oy) * wo + ox;
                    for ki in 0..geom.kernel {
                        let Some(iy) = geom.src(oy, ki, h) else { continue };
                        for kj in 0..geom.kernel {
                            let Some(ix) = geom.src(ox, kj, w) else { continue };
                            let i = (ch * h + iy) * w + ix;
                            if xv.data()[i] > out[o] {
                                out[o] = xv.data()[i];
                                argmax[o] = i;
                            }
                        }
                    }
                }
            }
        }
        let g = self.needs(&[x]);
        self.push(Tensor::new(vec![c, ho, wo], out), Op::MaxPool { x, argmax }, g)
    }

    /// `[C,H,W]` feature map to `[H·W, C]` sequence in row-major position order.
    pub fn to_sequence(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let (c, h, w) = xv.dims3();
        let mut out = vec![0.0; c * h * w];
        for ch in 0..c {
            for p in 0..h * w {
                out[p * c + ch] = xv.data()[ch * h * w + p];
            }
        }
        let g = self.needs(&[x]);
        self.push(Tensor::new(vec![h * w, c], out), Op::ToSequence(x), g)
    }

    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = self.value(table);
        let (_, d) = t.dims2();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            out.extend_from_slice(t.row(i));
        }
        let g = self.needs(&[table]);
        let op = Op::Embedding {
            table,
            ids: ids.to_vec(),
        };
        self.push(Tensor::new(vec![ids.len(), d], out), op, g)
    }

    /// Elementwise multiplication by a fixed mask (dropout).
    pub fn mask(&mut self, x: Var, mask: Vec<f64>) -> Var {
        let mut out = self.value(x).clone();
        assert_eq!(out.len(), mask.len());
        for (o, m) in out.data_mut().iter_mut().zip(&mask) {
            *o *= m;
        }
        let g = self.needs(&[x]);
        self.push(out, Op::Mask { x, mask }, g)
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of
    /// `logits[n,V]`; `None` targets are skipped.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[Option<usize>]) -> Var {
        let lv = self.value(logits);
        let (n, v) = lv.dims2();
        assert_eq!(n, targets.len());
        let mut probs = vec![0.0; n * v];
        let mut total = 0.0;
        let mut count = 0;
        for i in 0..n {
            let row = lv.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|x| (x - max).exp()).sum();
            let log_z = max + sum.ln();
            for j in 0..v {
                probs[i * v + j] = (row[j] - log_z).exp();
            }
            if let Some(t) = targets[i] {
                total += log_z - row[t];
                count += 1;
            }
        }
        assert!(count > 0, "cross entropy over zero targets");
        let g = self.needs(&[logits]);
        let op = Op::CrossEntropy {
            logits,
            targets: targets.to_vec(),
            probs: Tensor::new(vec![n, v], probs),
            count,
        };
        self.push(Tensor::scalar(total / count as f64), op, g)
    }

    /// Single element of `x` (flat index) as a scalar.
    pub fn pick(&mut self, x: Var, index: usize) -> Var {
        let v = self.value(x).data()[index];
        let g = self.needs(&[x]);
        self.push(Tensor::scalar(v), Op::Pick { x, index }, g)
    }

    /// Gradients of the scalar `root` with respect to every node that needs one.
    pub fn backward(&self, root: Var) -> Grads {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::full(self.value(root).shape(), 1.0));
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.grad {
                continue;
            }
            self.propagate(&node.op, &node.value, &g, &mut grads);
            grads[i] = Some(g);
        }
        Grads(grads)
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.nodes[v.0].grad {
            return;
        }
        match &mut grads[v.0] {
            Some(t) => t.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.nodes[a.0].grad {
                    self.accumulate(grads, *a, matmul_bt(g, self.value(*b)));
                }
                if self.nodes[b.0].grad {
                    self.accumulate(grads, *b, matmul_at(self.value(*a), g));
                }
            }
            Op::AddBias(a, b) => {
                self.accumulate(grads, *a, g.clone());
                let (m, n) = g.dims2();
                let mut gb = vec![0.0; n];
                for i in 0..m {
                    for (s, x) in gb.iter_mut().zip(g.row(i)) {
                        *s += x;
                    }
                }
                self.accumulate(grads, *b, Tensor::new(vec![n], gb));
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Relu(a) => {
                let mut ga = g.clone();
                for (x, y) in ga.data_mut().iter_mut().zip(out.data()) {
                    if *y <= 0.0 {
                        *x = 0.0;
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::Scale(a, s) => self.accumulate(grads, *a, g.map(|x| x * s)),
            Op::Transpose(a) => self.accumulate(grads, *a, g.transpose()),
            Op::SliceCols { x, start } => {
                let (m, n) = self.value(*x).dims2();
                let len = g.dims2().1;
                let mut gx = vec![0.0; m * n];
                for i in 0..m {
                    gx[i * n + start..i * n + start + len].copy_from_slice(g.row(i));
                }
                self.accumulate(grads, *x, Tensor::new(vec![m, n], gx));
            }
            Op::ConcatCols(parts) => {
                let (m, _) = g.dims2();
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).dims2().1;
                    let mut gp = Vec::with_capacity(m * n);
                    for i in 0..m {
                        gp.extend_from_slice(&g.row(i)[offset..offset + n]);
                    }
                    offset += n;
                    self.accumulate(grads, p, Tensor::new(vec![m, n], gp));
                }
            }
            Op::Softmax(a) => {
                let (m, n) = out.dims2();
                let mut ga = vec![0.0; m * n];
                for i in 0..m {
                    let (p, gr) = (out.row(i), g.row(i));
                    let dot: f64 = p.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..n {
                        ga[i * n + j] = p[j] * (gr[j] - dot);
                    }
                }
                self.accumulate(grads, *a, Tensor::new(vec![m, n], ga));
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let (m, n) = g.dims2();
                let gv = self.value(*gamma).data();
                let mut gx = vec![0.0; m * n];
                let mut gg = vec![0.0; n];
                let mut gb = vec![0.0; n];
                for i in 0..m {
                    let (gr, hr) = (g.row(i), xhat.row(i));
                    let mut sum = 0.0;
                    let mut sum_h = 0.0;
                    for j in 0..n {
                        let dh = gr[j] * gv[j];
                        sum += dh;
                        sum_h += dh * hr[j];
                        gg[j] += gr[j] * hr[j];
                        gb[j] += gr[j];
                    }
                    for j in 0..n {
                        let dh = gr[j] * gv[j];
                        gx[i * n + j] = inv_std[i] / n as f64 * (n as f64 * dh - sum - hr[j] * sum_h);
                    }
                }
                self.accumulate(grads, *x, Tensor::new(vec![m, n], gx));
                self.accumulate(grads, *gamma, Tensor::new(vec![n], gg));
                self.accumulate(grads, *beta, Tensor::new(vec![n], gb));
            }
            Op::Conv { x, w, b, geom } => self.conv_backward(*x, *w, *b, *geom, g, grads),
            Op::ChannelAffine { x, gamma, beta } => {
                let (c, h, w) = g.dims3();
                let gv = self.value(*gamma).data();
                let xv = self.value(*x).data();
                let mut gx = g.clone();
                let mut gg = vec![0.0; c];
                let mut gb = vec![0.0; c];
                for ch in 0..c {
                    let r = ch * h * w..(ch + 1) * h * w;
                    for (k, v) in gx.data_mut()[r.clone()].iter_mut().enumerate() {
                        let i = r.start + k;
                        gg[ch] += g.data()[i] * xv[i];
                        gb[ch] += g.data()[i];
                        *v *= gv[ch];
                    }
                }
                self.accumulate(grads, *x, gx);
                self.accumulate(grads, *gamma, Tensor::new(vec![c], gg));
                self.accumulate(grads, *beta, Tensor::new(vec![c], gb));
            }
            Op::MaxPool { x, argmax } => {
                let mut gx = Tensor::zeros(self.value(*x).shape());
                for (o, &i) in argmax.iter().enumerate() {
                    if i != usize::MAX {
                        gx.data_mut()[i] += g.data()[o];
                    }
                }
                self.accumulate(grads, *x, gx);
            }
            Op::ToSequence(x) => {
                let (c, h, w) = self.value(*x).dims3();
                let mut gx = vec![0.0; c * h * w];
                for ch in 0..c {
                    for p in 0..h * w {
                        gx[ch * h * w + p] = g.data()[p * c + ch];
                    }
                }
                self.accumulate(grads, *x, Tensor::new(vec![c, h, w], gx));
            }
            Op::Embedding { table, ids } => {
                let mut gt = Tensor::zeros(self.value(*table).shape());
                let d = g.dims2().1;
                for (r, &id) in ids.iter().enumerate() {
                    for (a, b) in gt.data_mut()[id * d..(id + 1) * d].iter_mut().zip(g.row(r)) {
                        *a += b;
                    }
                }
                self.accumulate(grads, *table, gt);
            }
            Op::Mask { x, mask } => {
                let mut gx = g.clone();
                for (a, m) in gx.data_mut().iter_mut().zip(mask) {
                    *a *= m;
                }
                self.accumulate(grads, *x, gx);
            }
            Op::CrossEntropy {
                logits,
                targets,
                probs,
                count,
            } => {
                let scale = g.data()[0] / *count as f64;
                let (_, v) = probs.dims2();
                let mut gl = Tensor::zeros(probs.shape());
                for (i, t) in targets.iter().enumerate() {
                    let Some(t) = t else { continue };
                    let row = &mut gl.data_mut()[i * v..(i + 1) * v];
                    for (o, p) in row.iter_mut().zip(probs.row(i)) {
                        *o = p * scale;
                    }
                    row[*t] -= scale;
                }
                self.accumulate(grads, *logits, gl);
            }
            Op::Pick { x, index } => {
                let mut gx = Tensor::zeros(self.value(*x).shape());
                gx.data_mut()[*index] = g.data()[0];
                self.accumulate(grads, *x, gx);
            }
        }
    }

    fn conv_backward(
        &self,
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: Conv2d,
        g: &Tensor,
        grads: &mut [Option<Tensor>],
    ) {
        let xv = self.value(x);
        let wv = self.value(w);
        let (c, h, wd) = xv.dims3();
        let (o, ho, wo) = g.dims3();
        let k = geom.kernel;
        let (need_x, need_w) = (self.nodes[x.0].grad, self.nodes[w.0].grad);
        let mut gx = vec![0.0; if need_x { c * h * wd } else { 0 }];
        let mut gw = vec![0.0; if need_w { wv.len() } else { 0 }];
        let (xd, wdata, gd) = (xv.data(), wv.data(), g.data());
        for oc in 0..o {
            let gplane = &gd[oc * ho * wo..(oc + 1) * ho * wo];
            for ic in 0..c {
                let base = ic * h * wd;
                for ki in 0..k {
                    for kj in 0..k {
                        let wi = ((oc * c + ic) * k + ki) * k + kj;
                        let wt = wdata[wi];
                        let mut acc = 0.0;
                        for oy in 0..ho {
                            let Some(iy) = geom.src(oy, ki, h) else { continue };
                            for ox in 0..wo {
                                let Some(ix) = geom.src(ox, kj, wd) else { continue };
                                let gv = gplane[oy * wo + ox];
                                let xi = base + iy * wd + ix;
                                if need_x {
                                    gx[xi] += wt * gv;
                                }
                                acc += xd[xi] * gv;
                            }
                        }
                        if need_w {
                            gw[wi] += acc;
                        }
                    }
                }
            }
        }
        if need_x {
            self.accumulate(grads, x, Tensor::new(vec![c, h, wd], gx));
        }
        if need_w {
            self.accumulate(grads, w, Tensor::new(wv.shape().to_vec(), gw));
        }
        if let Some(b) = b {
            let gb = (0..o)
                .map(|oc| gd[oc * ho * wo..(oc + 1) * ho * wo].iter().sum())
                .collect();
            self.accumulate(grads, b, Tensor::new(vec![o], gb));
        }
    }
}
