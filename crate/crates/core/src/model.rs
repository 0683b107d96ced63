//! Multi-function CNN: parameter storage, forward pass and backpropagation.
//!
//! All parameters live in one flat buffer. For each conv block the layout is
//! weights `[out][in][3][3]` followed by bias `[out]`; the dense head follows
//! as weights `[classes][features]` and bias `[classes]`. Gradients use the
//! same layout, which keeps the optimizer, checkpointing and finite-difference
//! checks trivial.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::activation::Activation;
use crate::arch::{ArchSpec, BlockPlan, KERNEL};
use crate::error::{Error, Result};
use crate::genome::Genome;
use crate::tensor::{Probabilities, Tensor4};

/// Floating-point types the engine runs in: f32 for training, f64 for
/// gradient checking.
pub trait Scalar: Float + Default + Debug + Send + Sync + 'static {}
impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Debug, Clone, PartialEq)]
struct ConvSlot {
    plan: BlockPlan,
    activation: Activation,
    weights: usize,
    bias: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct DenseSlot {
    inputs: usize,
    outputs: usize,
    weights: usize,
    bias: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    arch: ArchSpec,
    genome: Genome,
    convs: Vec<ConvSlot>,
    dense: DenseSlot,
    params: Vec<T>,
}

/// Mean cross-entropy over a batch and its gradient in the flat layout.
#[derive(Debug, Clone)]
pub struct LossGradient<T> {
    pub loss: T,
    pub gradient: Vec<T>,
}

fn layout(arch: &ArchSpec, genome: &Genome) -> (Vec<ConvSlot>, DenseSlot, usize) {
    let mut offset = 0;
    let convs = arch
        .blocks()
        .into_iter()
        .zip(genome.genes())
        .map(|(plan, &activation)| {
            let weights = offset;
            offset += plan.out_channels * plan.in_channels * KERNEL * KERNEL;
            let bias = offset;
            offset += plan.out_channels;
            ConvSlot {
                plan,
                activation,
                weights,
                bias,
            }
        })
        .collect::<Vec<_>>();
    let inputs = arch.feature_channels();
    let outputs = arch.num_classes;
    let dense = DenseSlot {
        inputs,
        outputs,
        weights: offset,
        bias: offset + inputs * outputs,
    };
    offset += inputs * outputs + outputs;
    (convs, dense, offset)
}

/// Builds a model whose i-th conv block uses `genome[i]`. Weights are uniform
/// in `±sqrt(6 / fan_in)`, biases zero. The same `(arch, genome, seed)` always
/// yields the same weights.
pub fn build_model<T: Scalar>(arch: &ArchSpec, genome: &Genome, seed: u64) -> Result<Model<T>> {
    let mut model = Model::zeroed(arch, genome)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for slot in &model.convs {
        let fan_in = slot.plan.in_channels * KERNEL * KERNEL;
        let n = slot.bias - slot.weights;
        fill_uniform(
            &mut model.params[slot.weights..slot.weights + n],
            fan_in,
            &mut rng,
        );
    }
    let d = model.dense.clone();
    fill_uniform(
        &mut model.params[d.weights..d.weights + d.inputs * d.outputs],
        d.inputs,
        &mut rng,
    );
    Ok(model)
}

fn fill_uniform<T: Scalar>(out: &mut [T], fan_in: usize, rng: &mut ChaCha8Rng) {
    let limit = (6.0 / fan_in as f64).sqrt();
    for v in out {
        let u: f64 = rng.random_range(-limit..limit);
        *v = T::from(u).unwrap();
    }
}

impl<T: Scalar> Model<T> {
    /// A model with every parameter zero.
    pub fn zeroed(arch: &ArchSpec, genome: &Genome) -> Result<Self> {
        arch.validate()?;
        if genome.len() != arch.n_conv_layers {
            return Err(Error::GenomeArity {
                expected: arch.n_conv_layers,
                found: genome.len(),
            });
        }
        let (convs, dense, total) = layout(arch, genome);
        Ok(Self {
            arch: *arch,
            genome: genome.clone(),
            convs,
            dense,
            params: vec![T::zero(); total],
        })
    }

    /// Rebuilds a model from a flat parameter vector (e.g. a checkpoint).
    pub fn from_params(arch: &ArchSpec, genome: &Genome, params: Vec<T>) -> Result<Self> {
        let mut model = Self::zeroed(arch, genome)?;
        if params.len() != model.params.len() {
            return Err(Error::Shape(alloc::format!(
                "{} parameters supplied, architecture needs {}",
                params.len(),
                model.params.len()
            )));
        }
        model.params = params;
        Ok(model)
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn genome(&self) -> &Genome {
        &self.genome
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Storage size at 4 bytes per parameter, regardless of `T`.
    pub fn param_bytes(&self) -> u64 {
        self.arch.param_bytes()
    }

    /// Mutable access to the dense head's bias, mostly useful for tests.
    pub fn dense_bias_mut(&mut self) -> &mut [T] {
        let d = &self.dense;
        &mut self.params[d.bias..d.bias + d.outputs]
    }

    /// Range of one conv block's weights within the flat buffer.
    pub fn conv_weight_range(&self, block: usize) -> core::ops::Range<usize> {
        let s = &self.convs[block];
        s.weights..s.bias
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            arch: self.arch,
            genome: self.genome.clone(),
            convs: self.convs.clone(),
            dense: self.dense.clone(),
            params: self.params.iter().map(|&v| U::from(v).unwrap()).collect(),
        }
    }

    fn check_batch(&self, batch: &Tensor4<T>) -> Result<()> {
        if batch.sample_shape() != self.arch.input_shape {
            return Err(Error::Shape(alloc::format!(
                "batch samples are {:?}, model expects {:?}",
                batch.sample_shape(),
                self.arch.input_shape
            )));
        }
        Ok(())
    }

    fn check_labels(&self, labels: &[usize], batch: usize) -> Result<()> {
        if labels.len() != batch {
            return Err(Error::Shape(alloc::format!(
                "{} labels for a batch of {batch}",
                labels.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= self.arch.num_classes) {
            return Err(Error::Label {
                label,
                num_classes: self.arch.num_classes,
            });
        }
        Ok(())
    }

    /// Class probabilities, one row per sample.
    pub fn forward(&self, batch: &Tensor4<T>) -> Result<Probabilities<T>> {
        self.check_batch(batch)?;
        let classes = self.arch.num_classes;
        let mut data = Vec::with_capacity(batch.batch() * classes);
        for i in 0..batch.batch() {
            let trace = self.forward_sample(batch.sample(i));
            data.extend_from_slice(&trace.probs);
        }
        Ok(Probabilities {
            rows: batch.batch(),
            cols: classes,
            data,
        })
    }

    /// Mean softmax cross-entropy over the batch.
    pub fn loss(&self, batch: &Tensor4<T>, labels: &[usize]) -> Result<T> {
        self.check_batch(batch)?;
        self.check_labels(labels, batch.batch())?;
        if batch.batch() == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut total = T::zero();
        for (i, &label) in labels.iter().enumerate() {
            total = total + self.forward_sample(batch.sample(i)).loss(label);
        }
        Ok(total / T::from(batch.batch()).unwrap())
    }

    /// Mean loss and its exact gradient with respect to every parameter.
    pub fn backward(&self, batch: &Tensor4<T>, labels: &[usize]) -> Result<LossGradient<T>> {
        self.check_batch(batch)?;
        self.check_labels(labels, batch.batch())?;
        if batch.batch() == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut gradient = vec![T::zero(); self.params.len()];
        let mut total = T::zero();
        for (i, &label) in labels.iter().enumerate() {
            let trace = self.forward_sample(batch.sample(i));
            total = total + trace.loss(label);
            self.backward_sample(batch.sample(i), &trace, label, &mut gradient);
        }
        let scale = T::one() / T::from(batch.batch()).unwrap();
        for g in &mut gradient {
            *g = *g * scale;
        }
        Ok(LossGradient {
            loss: total * scale,
            gradient,
        })
    }

    fn forward_sample(&self, sample: &[T]) -> Trace<T> {
        let mut blocks = Vec::with_capacity(self.convs.len());
        let mut input: Option<Vec<T>> = None;
        for slot in &self.convs {
            let p = &slot.plan;
            let x = input.as_deref().unwrap_or(sample);
            let hw = p.height * p.width;
            let mut pre = vec![T::zero(); p.out_channels * hw];
            conv3x3_forward(
                x,
                p,
                &self.params[slot.weights..slot.bias],
                &self.params[slot.bias..slot.bias + p.out_channels],
                &mut pre,
            );
            let post: Vec<T> = pre.iter().map(|&z| slot.activation.forward(z)).collect();
            let (next, pool_index) = if p.pool_after {
                let (pooled, idx) = max_pool2(&post, p.out_channels, p.height, p.width);
                (pooled, idx)
            } else {
                (post.clone(), Vec::new())
            };
            blocks.push(BlockTrace {
                input: input.take(),
                pre,
                post,
                pool_index,
            });
            input = Some(next);
        }
        let last = input.expect("at least one conv block");
        let d = &self.dense;
        let plane = last.len() / d.inputs;
        let inv = T::one() / T::from(plane).unwrap();
        let features: Vec<T> = last
            .chunks_exact(plane)
            .map(|c| c.iter().fold(T::zero(), |a, &v| a + v) * inv)
            .collect();
        let weights = &self.params[d.weights..d.weights + d.inputs * d.outputs];
        let bias = &self.params[d.bias..d.bias + d.outputs];
        let logits: Vec<T> = (0..d.outputs)
            .map(|k| dot(&weights[k * d.inputs..(k + 1) * d.inputs], &features) + bias[k])
            .collect();
        let max = logits.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
        let sum = exps.iter().fold(T::zero(), |a, &b| a + b);
        let probs = exps.iter().map(|&e| e / sum).collect();
        Trace {
            blocks,
            plane,
            features,
            logits,
            log_sum_exp: max + sum.ln(),
            probs,
        }
    }

    fn backward_sample(&self, sample: &[T], trace: &Trace<T>, label: usize, grad: &mut [T]) {
        let d = &self.dense;
        let mut dlogits = trace.probs.clone();
        dlogits[label] = dlogits[label] - T::one();

        let mut dfeatures = vec![T::zero(); d.inputs];
        for (k, &dl) in dlogits.iter().enumerate() {
            let row = d.weights + k * d.inputs;
            axpy(dl, &trace.features, &mut grad[row..row + d.inputs]);
            grad[d.bias + k] = grad[d.bias + k] + dl;
            axpy(dl, &self.params[row..row + d.inputs], &mut dfeatures);
        }

        // Gradient w.r.t. the last block's (possibly pooled) output.
        let inv = T::one() / T::from(trace.plane).unwrap();
        let mut dout: Vec<T> = dfeatures
            .iter()
            .flat_map(|&df| core::iter::repeat_n(df * inv, trace.plane))
            .collect();

        for (b, slot) in self.convs.iter().enumerate().rev() {
            let p = &slot.plan;
            let bt = &trace.blocks[b];
            let mut dpost = if p.pool_after {
                let mut up = vec![T::zero(); bt.post.len()];
                for (g, &idx) in dout.iter().zip(&bt.pool_index) {
                    up[idx as usize] = up[idx as usize] + *g;
                }
                up
            } else {
                dout
            };
            for ((g, &z), &y) in dpost.iter_mut().zip(&bt.pre).zip(&bt.post) {
                *g = *g * slot.activation.derivative(z, y);
            }
            let x = bt.input.as_deref().unwrap_or(sample);
            let need_input_grad = b > 0;
            let mut dx = if need_input_grad {
                vec![T::zero(); x.len()]
            } else {
                Vec::new()
            };
            let (gw, rest) = grad[slot.weights..].split_at_mut(slot.bias - slot.weights);
            conv3x3_backward(
                x,
                p,
                &self.params[slot.weights..slot.bias],
                &dpost,
                gw,
                &mut rest[..p.out_channels],
                need_input_grad.then_some(&mut dx[..]),
            );
            dpost.clear();
            dout = dx;
        }
    }
}

struct BlockTrace<T> {
    /// `None` for the first block, whose input is the sample itself.
    input: Option<Vec<T>>,
    pre: Vec<T>,
    post: Vec<T>,
    pool_index: Vec<u32>,
}

struct Trace<T> {
    blocks: Vec<BlockTrace<T>>,
    plane: usize,
    features: Vec<T>,
    logits: Vec<T>,
    log_sum_exp: T,
    probs: Vec<T>,
}

impl<T: Float> Trace<T> {
    fn loss(&self, label: usize) -> T {
        self.log_sum_exp - self.logits[label]
    }
}

#[inline]
fn dot<T: Float>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
fn axpy<T: Float>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

/// Copies `channels` planes of `h x w` into planes of `(h+2) x (w+2)` with a
/// zero border.
fn pad_planes<T: Float>(x: &[T], channels: usize, h: usize, w: usize) -> Vec<T> {
    let pw = w + 2;
    let plane = (h + 2) * pw;
    let mut out = vec![T::zero(); channels * plane];
    for c in 0..channels {
        for r in 0..h {
            let dst = c * plane + (r + 1) * pw + 1;
            out[dst..dst + w].copy_from_slice(&x[(c * h + r) * w..][..w]);
        }
    }
    out
}

// The convolution works on "padded-width" rows: output pixel (r, c) lives at
// `r * (w+2) + c` and tap (ky, kx) reads the padded input at that index plus
// `ky * (w+2) + kx`. Each tap is then a single contiguous axpy or dot over
// `h * (w+2) - 2` elements; the two spare columns per row are discarded.

fn conv3x3_forward<T: Float>(x: &[T], p: &BlockPlan, w: &[T], b: &[T], out: &mut [T]) {
    let (h, wd) = (p.height, p.width);
    let pw = wd + 2;
    let plane = (h + 2) * pw;
    let len = h * pw - 2;
    let xpad = pad_planes(x, p.in_channels, h, wd);
    let mut acc = vec![T::zero(); len];
    for co in 0..p.out_channels {
        acc.fill(b[co]);
        for ci in 0..p.in_channels {
            let src = &xpad[ci * plane..(ci + 1) * plane];
            let kernel = &w[(co * p.in_channels + ci) * 9..][..9];
            for (t, &k) in kernel.iter().enumerate() {
                let off = (t / 3) * pw + t % 3;
                axpy(k, &src[off..off + len], &mut acc);
            }
        }
        let dst = &mut out[co * h * wd..(co + 1) * h * wd];
        for r in 0..h {
            dst[r * wd..(r + 1) * wd].copy_from_slice(&acc[r * pw..r * pw + wd]);
        }
    }
}

fn conv3x3_backward<T: Float>(
    x: &[T],
    p: &BlockPlan,
    w: &[T],
    dz: &[T],
    gw: &mut [T],
    gb: &mut [T],
    dx: Option<&mut [T]>,
) {
    let (h, wd) = (p.height, p.width);
    let hw = h * wd;
    let pw = wd + 2;
    let plane = (h + 2) * pw;
    let len = h * pw - 2;
    let xpad = pad_planes(x, p.in_channels, h, wd);
    let mut dxpad = if dx.is_some() {
        vec![T::zero(); p.in_channels * plane]
    } else {
        Vec::new()
    };
    // Padded-width copy of one output gradient plane; spare columns stay 0.
    let mut g = vec![T::zero(); len];
    for co in 0..p.out_channels {
        let dzc = &dz[co * hw..(co + 1) * hw];
        gb[co] = gb[co] + dzc.iter().fold(T::zero(), |a, &v| a + v);
        for r in 0..h {
            g[r * pw..r * pw + wd].copy_from_slice(&dzc[r * wd..(r + 1) * wd]);
        }
        for ci in 0..p.in_channels {
            let src = &xpad[ci * plane..(ci + 1) * plane];
            let base = (co * p.in_channels + ci) * 9;
            for t in 0..9 {
                let off = (t / 3) * pw + t % 3;
                gw[base + t] = gw[base + t] + dot(&g, &src[off..off + len]);
                if dx.is_some() {
                    let d = &mut dxpad[ci * plane + off..ci * plane + off + len];
                    axpy(w[base + t], &g, d);
                }
            }
        }
    }
    if let Some(dx) = dx {
        for ci in 0..p.in_channels {
            for r in 0..h {
                let src = ci * plane + (r + 1) * pw + 1;
                dx[(ci * h + r) * wd..][..wd].copy_from_slice(&dxpad[src..src + wd]);
            }
        }
    }
}

/// 2x2 stride-2 max pooling (floor). Returns pooled values and, for each
/// output, the index of the winning input within the full feature map.
/// Ties keep the first element in row-major window order.
fn max_pool2<T: Float>(x: &[T], channels: usize, h: usize, w: usize) -> (Vec<T>, Vec<u32>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(channels * oh * ow);
    let mut idx = Vec::with_capacity(channels * oh * ow);
    for c in 0..channels {
        let base = c * h * w;
        for y in 0..oh {
            for xx in 0..ow {
                let mut best = base + (2 * y) * w + 2 * xx;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = base + (2 * y + dy) * w + 2 * xx + dx;
                    if x[i] > x[best] {
                        best = i;
                    }
                }
                out.push(x[best]);
                idx.push(best as u32);
            }
        }
    }
    (out, idx)
}
