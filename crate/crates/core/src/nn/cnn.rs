//! Conv blocks (conv → ReLU, repeated, then max-pool) followed by dense layers.
//!
//! Parameters are passed as one `[weight, bias]` pair per conv or dense layer,
//! in forward order. The last dense layer has no activation.

use rand::Rng;

use super::activation::{maxpool2d, relu, relu_backward, MaxPool};
use super::conv::{conv2d_backward, conv2d_forward, conv_output_size};
use super::dense::{dense_backward, dense_forward};
use crate::error::{config_err, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvBlockSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: usize,
    pub pool_window: usize,
    /// Convolutions in this block; the first maps `in → out`, the rest `out → out`.
    pub convs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnSpec {
    input_shape: [usize; 3],
    blocks: Vec<ConvBlockSpec>,
    dense_dims: Vec<usize>,
    /// Spatial size after every block, resolved at construction.
    block_out: Vec<[usize; 3]>,
}

impl CnnSpec {
    /// `dense_widths` lists the hidden widths followed by the output width.
    pub fn new(input_shape: [usize; 3], blocks: Vec<ConvBlockSpec>, dense_widths: &[usize]) -> Result<Self> {
        if input_shape.contains(&0) {
            return Err(config_err!("input shape {input_shape:?} has a zero dimension"));
        }
        if dense_widths.is_empty() || dense_widths.contains(&0) {
            return Err(config_err!("dense widths must be non-empty and positive, got {dense_widths:?}"));
        }
        let [mut c, mut h, mut w] = input_shape;
        let mut block_out = Vec::with_capacity(blocks.len());
        for (i, b) in blocks.iter().enumerate() {
            let n = i + 1;
            if b.in_channels != c {
                return Err(config_err!("block {n} expects {} input channels, previous stage has {c}", b.in_channels));
            }
            if [b.out_channels, b.kernel_size, b.stride, b.pool_window, b.convs].contains(&0) {
                return Err(config_err!("block {n}: channels, kernel, stride, pool window and conv count must be positive"));
            }
            for _ in 0..b.convs {
                let (Some(nh), Some(nw)) = (
                    conv_output_size(h, b.kernel_size, b.stride, b.padding),
                    conv_output_size(w, b.kernel_size, b.stride, b.padding),
                ) else {
                    return Err(config_err!(
                        "block {n}: kernel {} exceeds padded input {}x{}",
                        b.kernel_size,
                        h + 2 * b.padding,
                        w + 2 * b.padding
                    ));
                };
                h = nh;
                w = nw;
            }
            if h % b.pool_window != 0 || w % b.pool_window != 0 {
                return Err(config_err!("block {n}: pool window {} does not divide {h}x{w}", b.pool_window));
            }
            c = b.out_channels;
            h /= b.pool_window;
            w /= b.pool_window;
            block_out.push([c, h, w]);
        }
        let mut dense_dims = vec![c * h * w];
        dense_dims.extend_from_slice(dense_widths);
        Ok(Self {
            input_shape,
            blocks,
            dense_dims,
            block_out,
        })
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn blocks(&self) -> &[ConvBlockSpec] {
        &self.blocks
    }

    pub fn output_dim(&self) -> usize {
        *self.dense_dims.last().expect("non-empty")
    }

    /// Flattened feature size entering the first dense layer.
    pub fn flat_dim(&self) -> usize {
        self.dense_dims[0]
    }

    pub fn conv_count(&self) -> usize {
        self.blocks.iter().map(|b| b.convs).sum()
    }

    pub fn dense_count(&self) -> usize {
        self.dense_dims.len() - 1
    }

    pub fn layer_count(&self) -> usize {
        self.conv_count() + self.dense_count()
    }

    /// `[weight_shape, bias_shape]` for every layer in forward order.
    pub fn layer_shapes(&self) -> Vec<[Vec<usize>; 2]> {
        let mut out = Vec::with_capacity(self.layer_count());
        for b in &self.blocks {
            for j in 0..b.convs {
                let cin = if j == 0 { b.in_channels } else { b.out_channels };
                out.push([
                    vec![b.out_channels, cin, b.kernel_size, b.kernel_size],
                    vec![b.out_channels],
                ]);
            }
        }
        for d in self.dense_dims.windows(2) {
            out.push([vec![d[1], d[0]], vec![d[1]]]);
        }
        out
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<Tensor>> {
        self.layer_shapes()
            .into_iter()
            .map(|[ws, bs]| {
                let (fan_in, fan_out) = match ws[..] {
                    [co, ci, k, _] => (ci * k * k, co * k * k),
                    [o, i] => (i, o),
                    _ => unreachable!(),
                };
                vec![glorot_uniform(&ws, fan_in, fan_out, rng), Tensor::zeros(&bs)]
            })
            .collect()
    }

    fn check_params(&self, params: &[&[Tensor]]) -> Result<()> {
        let shapes = self.layer_shapes();
        if params.len() != shapes.len() {
            return Err(config_err!("expected {} CNN layers, got {}", shapes.len(), params.len()));
        }
        for (i, (p, [ws, bs])) in params.iter().zip(&shapes).enumerate() {
            if p.len() != 2 || p[0].shape() != ws.as_slice() || p[1].shape() != bs.as_slice() {
                return Err(config_err!(
                    "CNN layer {i}: expected weight {ws:?} and bias {bs:?}, got {:?}",
                    p.iter().map(|t| t.shape().to_vec()).collect::<Vec<_>>()
                ));
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor, params: &[&[Tensor]]) -> Result<CnnTrace> {
        if x.shape() != self.input_shape {
            return Err(config_err!("input shape {:?} does not match configured {:?}", x.shape(), self.input_shape));
        }
        self.check_params(params)?;
        let mut layers = params.iter();
        let mut act = x.clone();
        let mut convs = Vec::with_capacity(self.conv_count());
        let mut pools = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            for _ in 0..b.convs {
                let p = layers.next().expect("checked");
                let pre = conv2d_forward(&act, &p[0], &p[1], b.stride, b.padding)?;
                let post = relu(&pre);
                convs.push(Cached { input: act, pre });
                act = post;
            }
            let pool = maxpool2d(&act, b.pool_window)?;
            act = pool.output.clone();
            pools.push(pool);
        }
        let mut act = act.reshape(vec![self.flat_dim()])?;
        let mut dense = Vec::with_capacity(self.dense_count());
        for (i, p) in layers.enumerate() {
            let pre = dense_forward(&act, &p[0], &p[1])?;
            let post = if i + 1 < self.dense_count() { relu(&pre) } else { pre.clone() };
            dense.push(Cached { input: act, pre });
            act = post;
        }
        Ok(CnnTrace {
            output: act,
            convs,
            pools,
            dense,
        })
    }

    /// Gradients for every layer (same layout as `params`) given `∂L/∂output`.
    pub fn backward(&self, params: &[&[Tensor]], trace: &CnnTrace, grad_out: &Tensor) -> Result<Vec<Vec<Tensor>>> {
        self.check_params(params)?;
        if grad_out.shape() != trace.output.shape() {
            return Err(config_err!("CNN output gradient {:?} vs output {:?}", grad_out.shape(), trace.output.shape()));
        }
        let n_conv = self.conv_count();
        let mut grads: Vec<Vec<Tensor>> = vec![Vec::new(); params.len()];
        let mut g = grad_out.clone();
        for (i, cache) in trace.dense.iter().enumerate().rev() {
            if i + 1 < self.dense_count() {
                g = relu_backward(&cache.pre, &g)?;
            }
            let p = params[n_conv + i];
            let dg = dense_backward(&cache.input, &p[0], &p[1], &g)?;
            grads[n_conv + i] = vec![dg.weight, dg.bias];
            g = dg.input;
        }
        let last = *self.block_out.last().unwrap_or(&self.input_shape);
        let mut g = g.reshape(last.to_vec())?;
        let mut idx = n_conv;
        for (b, pool) in self.blocks.iter().zip(&trace.pools).rev() {
            g = pool.backward(&g)?;
            for _ in 0..b.convs {
                idx -= 1;
                let cache = &trace.convs[idx];
                g = relu_backward(&cache.pre, &g)?;
                let p = params[idx];
                let cg = conv2d_backward(&cache.input, &p[0], &p[1], b.stride, b.padding, &g)?;
                grads[idx] = vec![cg.kernel, cg.bias];
                g = cg.input;
            }
        }
        Ok(grads)
    }
}

#[derive(Debug, Clone)]
struct Cached {
    input: Tensor,
    pre: Tensor,
}

/// Activations cached by [`CnnSpec::forward`] for the matching backward pass.
#[derive(Debug, Clone)]
pub struct CnnTrace {
    pub output: Tensor,
    convs: Vec<Cached>,
    pools: Vec<MaxPool>,
    dense: Vec<Cached>,
}

pub fn glorot_uniform<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-limit..=limit)).collect();
    Tensor::new(shape.to_vec(), data).expect("sized from shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn block(cin: usize, cout: usize) -> ConvBlockSpec {
        ConvBlockSpec {
            in_channels: cin,
            out_channels: cout,
            kernel_size: 3,
            stride: 1,
            padding: 1,
            pool_window: 2,
            convs: 1,
        }
    }

    fn default_like(input: [usize; 3]) -> CnnSpec {
        CnnSpec::new(input, vec![block(input[0], 16), block(16, 32), block(32, 64)], &[64, 16]).unwrap()
    }

    fn refs(p: &[Vec<Tensor>]) -> Vec<&[Tensor]> {
        p.iter().map(|v| v.as_slice()).collect()
    }

    #[test]
    fn output_is_sixteen_long() {
        let spec = default_like([3, 32, 32]);
        assert_eq!(spec.flat_dim(), 64 * 4 * 4);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let params = spec.init(&mut rng);
        let x = Tensor::filled(&[3, 32, 32], 0.3);
        let trace = spec.forward(&x, &refs(&params)).unwrap();
        assert_eq!(trace.output.shape(), &[16]);
        assert!(trace.output.is_finite());
    }

    #[test]
    fn zero_input_zero_bias_gives_zero() {
        let spec = default_like([1, 8, 8]);
        let params = spec.init(&mut ChaCha20Rng::seed_from_u64(2));
        let trace = spec.forward(&Tensor::zeros(&[1, 8, 8]), &refs(&params)).unwrap();
        assert!(trace.output.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_respects_glorot_bounds() {
        let spec = default_like([1, 8, 8]);
        let params = spec.init(&mut ChaCha20Rng::seed_from_u64(3));
        let k = &params[0][0];
        let limit = (6.0f64 / (9 + 16 * 9) as f64).sqrt();
        assert!(k.data().iter().all(|v| v.abs() <= limit));
        assert!(params.iter().all(|l| l[1].data().iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn rejects_bad_geometry() {
        let mut b = block(1, 4);
        b.pool_window = 3;
        let err = CnnSpec::new([1, 8, 8], vec![b], &[16]).unwrap_err().to_string();
        assert!(err.contains("pool window 3"), "{err}");
        assert!(CnnSpec::new([1, 8, 8], vec![block(3, 4)], &[16]).is_err());
        let spec = default_like([1, 8, 8]);
        let params = spec.init(&mut ChaCha20Rng::seed_from_u64(3));
        assert!(spec.forward(&Tensor::zeros(&[1, 4, 4]), &refs(&params)).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut b2 = block(2, 3);
        b2.convs = 2;
        let spec = CnnSpec::new([1, 8, 8], vec![block(1, 2), b2], &[5, 4]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let mut params = spec.init(&mut rng);
        for l in &mut params {
            for v in l[1].data_mut() {
                *v = rng.random_range(-0.1..0.1);
            }
        }
        let x = Tensor::new(vec![1, 8, 8], (0..64).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let probe: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let objective = |p: &[Vec<Tensor>]| -> f64 {
            let out = spec.forward(&x, &refs(p)).unwrap().output;
            out.data().iter().zip(&probe).map(|(a, b)| a * b).sum()
        };
        let trace = spec.forward(&x, &refs(&params)).unwrap();
        let grads = spec.backward(&refs(&params), &trace, &Tensor::from_vec(probe.clone())).unwrap();
        let h = 1e-6;
        for li in 0..params.len() {
            for ti in 0..2 {
                for k in (0..params[li][ti].len()).step_by(3) {
                    let mut plus = params.clone();
                    plus[li][ti].data_mut()[k] += h;
                    let mut minus = params.clone();
                    minus[li][ti].data_mut()[k] -= h;
                    let numeric = (objective(&plus) - objective(&minus)) / (2.0 * h);
                    let analytic = grads[li][ti].data()[k];
                    assert!(
                        (analytic - numeric).abs() <= 1e-4 * (1.0 + numeric.abs()),
                        "layer {li} tensor {ti} idx {k}: {analytic} vs {numeric}"
                    );
                }
            }
        }
    }
}
