//! Fully-convolutional baseline with SGD training and MAC accounting.

mod checkpoint;

pub use checkpoint::{decode_fcnn, encode_fcnn, read_fcnn, write_fcnn};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub w: usize,
    pub h: usize,
    pub c: usize,
}

impl Shape {
    pub const fn new(w: usize, h: usize, c: usize) -> Self {
        Self { w, h, c }
    }

    pub fn len(&self) -> usize {
        self.w * self.h * self.c
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.w, self.h, self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    /// Valid convolution, stride 1, followed by ReLU.
    Conv { kw: usize, kh: usize },
    /// 2×2 window, stride 2, floor semantics; a dimension of 1 passes
    /// through with a clipped window.
    MaxPool,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub input: Shape,
    pub output: Shape,
}

fn pooled(n: usize) -> usize {
    (n / 2).max(1)
}

impl LayerSpec {
    pub fn conv(input: Shape, output: Shape, kw: usize, kh: usize) -> Self {
        Self { kind: LayerKind::Conv { kw, kh }, input, output }
    }

    pub fn maxpool(input: Shape, output: Shape) -> Self {
        Self { kind: LayerKind::MaxPool, input, output }
    }

    pub fn dense(input: Shape, n_out: usize) -> Self {
        Self { kind: LayerKind::Dense, input, output: Shape::new(1, 1, n_out) }
    }

    /// Multiply-accumulates of one forward pass, from the shapes alone.
    pub fn macs(&self) -> u64 {
        let o = self.output;
        match self.kind {
            LayerKind::Conv { kw, kh } => (o.w * o.h * o.c * kw * kh * self.input.c) as u64,
            LayerKind::MaxPool => 0,
            LayerKind::Dense => (self.input.len() * o.c) as u64,
        }
    }

    pub fn weight_count(&self) -> usize {
        match self.kind {
            LayerKind::Conv { kw, kh } => self.output.c * self.input.c * kw * kh,
            LayerKind::MaxPool => 0,
            LayerKind::Dense => self.input.len() * self.output.c,
        }
    }

    pub fn bias_count(&self) -> usize {
        match self.kind {
            LayerKind::MaxPool => 0,
            _ => self.output.c,
        }
    }

    /// Output shape this layer produces from its input.
    pub fn derived_output(&self) -> Option<Shape> {
        let i = self.input;
        match self.kind {
            LayerKind::Conv { kw, kh } => {
                if kw == 0 || kh == 0 || kw > i.w || kh > i.h {
                    return None;
                }
                Some(Shape::new(i.w - kw + 1, i.h - kh + 1, self.output.c))
            }
            LayerKind::MaxPool => Some(Shape::new(pooled(i.w), pooled(i.h), i.c)),
            LayerKind::Dense => Some(Shape::new(1, 1, self.output.c)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.is_empty() || self.output.is_empty() {
            return Err(Error::Config(format!("empty shape in {:?}", self.kind)));
        }
        match self.derived_output() {
            Some(o) if o == self.output => Ok(()),
            _ => Err(Error::Config(format!(
                "{:?} cannot map {} to {}",
                self.kind, self.input, self.output
            ))),
        }
    }
}

fn chain(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::Config("network has no layers".into()));
    }
    for s in specs {
        s.validate()?;
    }
    for pair in specs.windows(2) {
        if pair[0].output != pair[1].input {
            return Err(Error::Config(format!(
                "layer output {} does not feed input {}",
                pair[0].output, pair[1].input
            )));
        }
    }
    Ok(())
}

/// The eight-layer baseline. Conv3 uses a 2×2 kernel, the only valid
/// kernel for a 4×2 → 3×1 map.
pub fn baseline_specs() -> Vec<LayerSpec> {
    let s = Shape::new;
    vec![
        LayerSpec::conv(s(24, 16, 1), s(22, 14, 64), 3, 3),
        LayerSpec::maxpool(s(22, 14, 64), s(11, 7, 64)),
        LayerSpec::conv(s(11, 7, 64), s(9, 5, 52), 3, 3),
        LayerSpec::maxpool(s(9, 5, 52), s(4, 2, 52)),
        LayerSpec::conv(s(4, 2, 52), s(3, 1, 36), 2, 2),
        LayerSpec::maxpool(s(3, 1, 36), s(1, 1, 36)),
        LayerSpec::conv(s(1, 1, 36), s(1, 1, 10), 1, 1),
        LayerSpec::dense(s(1, 1, 10), 10),
    ]
}

/// Same shapes with the nominal 3×3 kernel on Conv3. Its MAC arithmetic is
/// well defined but the layer itself is geometrically invalid.
pub fn baseline_nominal_specs() -> Vec<LayerSpec> {
    let mut specs = baseline_specs();
    specs[4].kind = LayerKind::Conv { kw: 3, kh: 3 };
    specs
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacCounter {
    pub per_layer: Vec<u64>,
    pub total_forward: u64,
    /// Forward plus a backward pass counted as twice the forward.
    pub total_training: u64,
    /// Forward plus a backward pass counted as equal to the forward.
    pub total_training_2x: u64,
    pub examples: u64,
}

impl MacCounter {
    pub fn for_specs(specs: &[LayerSpec]) -> Self {
        let per_layer: Vec<u64> = specs.iter().map(LayerSpec::macs).collect();
        Self {
            total_forward: per_layer.iter().sum(),
            per_layer,
            total_training: 0,
            total_training_2x: 0,
            examples: 0,
        }
    }

    pub fn record_training(&mut self, examples: u64) {
        self.examples += examples;
        self.total_training = self.examples * 3 * self.total_forward;
        self.total_training_2x = self.examples * 2 * self.total_forward;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fcnn {
    pub specs: Vec<LayerSpec>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

pub fn build_fcnn(specs: &[LayerSpec], seed: u64) -> Result<Fcnn> {
    chain(specs)?;
    let mut r = rng::stream(seed, 0xFC);
    let weights = specs
        .iter()
        .map(|s| {
            let fan_in = match s.kind {
                LayerKind::Conv { kw, kh } => kw * kh * s.input.c,
                _ => s.input.len(),
            };
            let limit = (6.0 / fan_in as f64).sqrt();
            (0..s.weight_count()).map(|_| r.gen_range(-limit..limit)).collect()
        })
        .collect();
    let biases = specs.iter().map(|s| vec![0.0; s.bias_count()]).collect();
    Ok(Fcnn { specs: specs.to_vec(), weights, biases })
}

/// Per-layer outputs of a forward pass plus pooling routes.
struct Trace {
    acts: Vec<Vec<f64>>,
    routes: Vec<Vec<usize>>,
}

impl Fcnn {
    pub fn input_shape(&self) -> Shape {
        self.specs[0].input
    }

    pub fn n_outputs(&self) -> usize {
        self.specs.last().map_or(0, |s| s.output.len())
    }

    pub fn weight_count(&self) -> usize {
        self.specs.iter().map(LayerSpec::weight_count).sum()
    }

    pub fn parameter_count(&self) -> usize {
        self.weight_count() + self.specs.iter().map(LayerSpec::bias_count).sum::<usize>()
    }

    pub fn macs(&self) -> MacCounter {
        MacCounter::for_specs(&self.specs)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_shape().len() {
            return Err(Error::Parameter(format!(
                "input has {} values, network expects {}",
                x.len(),
                self.input_shape()
            )));
        }
        Ok(())
    }

    /// Class scores (pre-softmax).
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.trace(x).acts.pop().unwrap_or_default())
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let mut acts = vec![x.to_vec()];
        let mut routes = Vec::with_capacity(self.specs.len());
        for (l, s) in self.specs.iter().enumerate() {
            let input = acts.last().unwrap();
            let mut route = Vec::new();
            let out = match s.kind {
                LayerKind::Conv { kw, kh } => conv_forward(s, kw, kh, input, &self.weights[l], &self.biases[l]),
                LayerKind::MaxPool => pool_forward(s, input, &mut route),
                LayerKind::Dense => dense_forward(s, input, &self.weights[l], &self.biases[l]),
            };
            routes.push(route);
            acts.push(out);
        }
        Trace { acts, routes }
    }

    /// Softmax cross-entropy loss and its gradients for one example.
    pub fn loss_and_grad(&self, x: &[f64], label: usize) -> Result<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        self.check_input(x)?;
        if label >= self.n_outputs() {
            return Err(Error::Parameter(format!("label {label} out of range")));
        }
        let tr = self.trace(x);
        let scores = tr.acts.last().unwrap();
        let probs = softmax(scores);
        let loss = -probs[label].max(1e-300).ln();
        let mut delta: Vec<f64> = probs;
        delta[label] -= 1.0;
        let mut gw: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut gb: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        for l in (0..self.specs.len()).rev() {
            let s = &self.specs[l];
            let input = &tr.acts[l];
            delta = match s.kind {
                LayerKind::Conv { kw, kh } => {
                    // Through the ReLU.
                    for (d, &a) in delta.iter_mut().zip(&tr.acts[l + 1]) {
                        if a <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    conv_backward(s, kw, kh, input, &self.weights[l], &delta, &mut gw[l], &mut gb[l])
                }
                LayerKind::MaxPool => {
                    let mut back = vec![0.0; input.len()];
                    for (o, &src) in tr.routes[l].iter().enumerate() {
                        back[src] += delta[o];
                    }
                    back
                }
                LayerKind::Dense => dense_backward(s, input, &self.weights[l], &delta, &mut gw[l], &mut gb[l]),
            };
        }
        Ok((loss, gw, gb))
    }

    pub fn loss(&self, x: &[f64], label: usize) -> Result<f64> {
        let scores = self.forward(x)?;
        Ok(-softmax(&scores)[label].max(1e-300).ln())
    }

    fn apply(&mut self, lr: f64, gw: &[Vec<f64>], gb: &[Vec<f64>]) {
        for (w, g) in self.weights.iter_mut().zip(gw) {
            w.iter_mut().zip(g).for_each(|(w, g)| *w -= lr * g);
        }
        for (b, g) in self.biases.iter_mut().zip(gb) {
            b.iter_mut().zip(g).for_each(|(b, g)| *b -= lr * g);
        }
    }
}

fn conv_forward(s: &LayerSpec, kw: usize, kh: usize, x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let (i, o) = (s.input, s.output);
    let mut out = vec![0.0; o.len()];
    for oc in 0..o.c {
        let plane = &mut out[oc * o.w * o.h..(oc + 1) * o.w * o.h];
        plane.fill(b[oc]);
        for ic in 0..i.c {
            let xin = &x[ic * i.w * i.h..(ic + 1) * i.w * i.h];
            for ky in 0..kh {
                for kx in 0..kw {
                    let k = w[((oc * i.c + ic) * kh + ky) * kw + kx];
                    for y in 0..o.h {
                        let row = &xin[(y + ky) * i.w + kx..(y + ky) * i.w + kx + o.w];
                        for (p, &v) in plane[y * o.w..(y + 1) * o.w].iter_mut().zip(row) {
                            *p += k * v;
                        }
                    }
                }
            }
        }
    }
    out.iter_mut().for_each(|v| *v = v.max(0.0));
    out
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(s: &LayerSpec, kw: usize, kh: usize, x: &[f64], w: &[f64], d: &[f64], gw: &mut [f64], gb: &mut [f64]) -> Vec<f64> {
    let (i, o) = (s.input, s.output);
    let mut dx = vec![0.0; i.len()];
    for oc in 0..o.c {
        let dplane = &d[oc * o.w * o.h..(oc + 1) * o.w * o.h];
        gb[oc] += dplane.iter().sum::<f64>();
        for ic in 0..i.c {
            let base = ic * i.w * i.h;
            for ky in 0..kh {
                for kx in 0..kw {
                    let widx = ((oc * i.c + ic) * kh + ky) * kw + kx;
                    let k = w[widx];
                    let mut acc = 0.0;
                    for y in 0..o.h {
                        let off = base + (y + ky) * i.w + kx;
                        for xo in 0..o.w {
                            let g = dplane[y * o.w + xo];
                            acc += g * x[off + xo];
                            dx[off + xo] += g * k;
                        }
                    }
                    gw[widx] += acc;
                }
            }
        }
    }
    dx
}

fn pool_forward(s: &LayerSpec, x: &[f64], route: &mut Vec<usize>) -> Vec<f64> {
    let (i, o) = (s.input, s.output);
    let mut out = Vec::with_capacity(o.len());
    route.clear();
    for c in 0..o.c {
        for y in 0..o.h {
            for xo in 0..o.w {
                let mut best = usize::MAX;
                for yy in 2 * y..(2 * y + 2).min(i.h) {
                    for xx in 2 * xo..(2 * xo + 2).min(i.w) {
                        let idx = c * i.w * i.h + yy * i.w + xx;
                        if best == usize::MAX || x[idx] > x[best] {
                            best = idx;
                        }
                    }
                }
                route.push(best);
                out.push(x[best]);
            }
        }
    }
    out
}

fn dense_forward(s: &LayerSpec, x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let n = s.input.len();
    (0..s.output.c)
        .map(|o| b[o] + w[o * n..(o + 1) * n].iter().zip(x).map(|(w, x)| w * x).sum::<f64>())
        .collect()
}

fn dense_backward(s: &LayerSpec, x: &[f64], w: &[f64], d: &[f64], gw: &mut [f64], gb: &mut [f64]) -> Vec<f64> {
    let n = s.input.len();
    let mut dx = vec![0.0; n];
    for (o, &g) in d.iter().enumerate() {
        gb[o] += g;
        for k in 0..n {
            gw[o * n + k] += g * x[k];
            dx[k] += g * w[o * n + k];
        }
    }
    dx
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdLog {
    pub epoch_loss: Vec<f64>,
    pub macs: MacCounter,
}

/// Plain SGD with batch size 1 over a seeded shuffle per epoch.
pub fn train_sgd(net: &mut Fcnn, data: &[(Vec<f64>, usize)], lr: f64, epochs: usize, seed: u64) -> Result<SgdLog> {
    use rand::seq::SliceRandom;
    if !(lr >= 0.0) {
        return Err(Error::Parameter("learning rate must be non-negative".into()));
    }
    if data.is_empty() {
        return Err(Error::Parameter("training set is empty".into()));
    }
    let mut macs = net.macs();
    let mut epoch_loss = Vec::with_capacity(epochs);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..epochs {
        order.shuffle(&mut rng::seeded(rng::derive_seed(seed, &[0x5344, epoch as u64])));
        let mut total = 0.0;
        for &k in &order {
            let (x, y) = &data[k];
            let (loss, gw, gb) = net.loss_and_grad(x, *y)?;
            total += loss;
            net.apply(lr, &gw, &gb);
        }
        macs.record_training(data.len() as u64);
        epoch_loss.push(total / data.len() as f64);
    }
    Ok(SgdLog { epoch_loss, macs })
}

/// Fraction correct, evaluated in parallel.
pub fn accuracy(net: &Fcnn, data: &[(Vec<f64>, usize)]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Parameter("nothing to evaluate".into()));
    }
    let hits = data
        .par_iter()
        .map(|(x, y)| Ok(usize::from(net.predict(x)? == *y)))
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_shapes_chain_and_count() {
        let specs = baseline_specs();
        assert_eq!(specs.len(), 8);
        chain(&specs).unwrap();
        let m = MacCounter::for_specs(&specs);
        assert_eq!(m.per_layer, vec![177_408, 0, 1_347_840, 0, 22_464, 0, 360, 100]);
        assert_eq!(m.total_forward, 1_548_172);
        let weights: usize = specs.iter().map(LayerSpec::weight_count).sum();
        assert_eq!(weights, 38_476);
    }

    #[test]
    fn nominal_kernels_give_closed_form_but_fail_geometry() {
        let specs = baseline_nominal_specs();
        assert_eq!(MacCounter::for_specs(&specs).total_forward, 1_576_252);
        assert!(chain(&specs).is_err());
    }

    #[test]
    fn maxpool_of_constant_is_constant() {
        let s = LayerSpec::maxpool(Shape::new(5, 4, 2), Shape::new(2, 2, 2));
        s.validate().unwrap();
        let mut r = Vec::new();
        assert_eq!(pool_forward(&s, &[3.5; 40], &mut r), vec![3.5; 8]);
    }
}
