//! 2-D cross-correlation (no kernel flip), `out[o,i,j] = b[o] + Σ in[c, i·s+m-p, j·s+n-p]·K[o,c,m,n]`.

use crate::error::{config_err, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Geometry {
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

fn geometry(input: &Tensor, kernel: &Tensor, bias: &Tensor, stride: usize, pad: usize) -> Result<Geometry> {
    let (c_in, h, w) = input.dims3()?;
    let [c_out, kc, kh, kw] = kernel.shape()[..] else {
        return Err(config_err!("kernel must be [C_out, C_in, k, k], got {:?}", kernel.shape()));
    };
    if kc != c_in {
        return Err(config_err!("kernel expects {kc} input channels, input has {c_in}"));
    }
    if kh != kw {
        return Err(config_err!("kernel must be square, got {kh}x{kw}"));
    }
    if bias.shape() != [c_out] {
        return Err(config_err!("bias shape {:?} does not match {c_out} output channels", bias.shape()));
    }
    if stride == 0 {
        return Err(config_err!("stride must be at least 1"));
    }
    if kh > h + 2 * pad || kw > w + 2 * pad {
        return Err(config_err!(
            "kernel {kh}x{kw} larger than padded input {}x{}",
            h + 2 * pad,
            w + 2 * pad
        ));
    }
    Ok(Geometry {
        c_in,
        h,
        w,
        c_out,
        k: kh,
        stride,
        pad,
        oh: (h + 2 * pad - kh) / stride + 1,
        ow: (w + 2 * pad - kw) / stride + 1,
    })
}

/// Output spatial size for one dimension.
pub fn conv_output_size(size: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    (stride > 0 && kernel <= size + 2 * padding).then(|| (size + 2 * padding - kernel) / stride + 1)
}

impl Geometry {
    /// Input coordinate touched by output `o` and kernel tap `t`, if inside the image.
    #[inline]
    fn src(&self, o: usize, t: usize, limit: usize) -> Option<usize> {
        (o * self.stride + t).checked_sub(self.pad).filter(|&x| x < limit)
    }
}

pub fn conv2d_forward(
    input: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let g = geometry(input, kernel, bias, stride, padding)?;
    let x = input.data();
    let kd = kernel.data();
    let mut out = vec![0.0; g.c_out * g.oh * g.ow];
    for co in 0..g.c_out {
        let plane = &mut out[co * g.oh * g.ow..(co + 1) * g.oh * g.ow];
        plane.fill(bias.data()[co]);
        for ci in 0..g.c_in {
            let xin = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
            for m in 0..g.k {
                for n in 0..g.k {
                    let kv = kd[((co * g.c_in + ci) * g.k + m) * g.k + n];
                    if kv == 0.0 {
                        continue;
                    }
                    for i in 0..g.oh {
                        let Some(r) = g.src(i, m, g.h) else { continue };
                        let row = &xin[r * g.w..(r + 1) * g.w];
                        let orow = &mut plane[i * g.ow..(i + 1) * g.ow];
                        for (j, o) in orow.iter_mut().enumerate() {
                            if let Some(c) = g.src(j, n, g.w) {
                                *o += row[c] * kv;
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![g.c_out, g.oh, g.ow], out)
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor,
    pub kernel: Tensor,
    pub bias: Tensor,
}

pub fn conv2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
    grad_out: &Tensor,
) -> Result<ConvGrads> {
    let g = geometry(input, kernel, bias, stride, padding)?;
    if grad_out.shape() != [g.c_out, g.oh, g.ow] {
        return Err(config_err!(
            "upstream gradient {:?} does not match conv output [{}, {}, {}]",
            grad_out.shape(),
            g.c_out,
            g.oh,
            g.ow
        ));
    }
    let x = input.data();
    let kd = kernel.data();
    let go = grad_out.data();
    let mut gx = vec![0.0; x.len()];
    let mut gk = vec![0.0; kd.len()];
    let mut gb = vec![0.0; g.c_out];

    for co in 0..g.c_out {
        let gplane = &go[co * g.oh * g.ow..(co + 1) * g.oh * g.ow];
        gb[co] = gplane.iter().sum();
        for ci in 0..g.c_in {
            let base = ci * g.h * g.w;
            for m in 0..g.k {
                for n in 0..g.k {
                    let kidx = ((co * g.c_in + ci) * g.k + m) * g.k + n;
                    let kv = kd[kidx];
                    let mut acc = 0.0;
                    for i in 0..g.oh {
                        let Some(r) = g.src(i, m, g.h) else { continue };
                        for j in 0..g.ow {
                            if let Some(c) = g.src(j, n, g.w) {
                                let upstream = gplane[i * g.ow + j];
                                acc += upstream * x[base + r * g.w + c];
                                gx[base + r * g.w + c] += upstream * kv;
                            }
                        }
                    }
                    gk[kidx] += acc;
                }
            }
        }
    }
    Ok(ConvGrads {
        input: Tensor::new(input.shape().to_vec(), gx)?,
        kernel: Tensor::new(kernel.shape().to_vec(), gk)?,
        bias: Tensor::new(vec![g.c_out], gb)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn scalar_kernel_scales_input() {
        let out = conv2d_forward(
            &t(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]),
            &t(&[1, 1, 1, 1], &[2.0]),
            &t(&[1], &[0.0]),
            1,
            0,
        )
        .unwrap();
        assert_eq!(out.shape(), &[1, 2, 2]);
        assert_eq!(out.data(), &[2.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn zero_kernel_and_bias_give_zero() {
        let input = t(&[2, 3, 3], &(0..18).map(|x| x as f64 - 7.0).collect::<Vec<_>>());
        let out = conv2d_forward(&input, &Tensor::zeros(&[4, 2, 3, 3]), &Tensor::zeros(&[4]), 1, 1).unwrap();
        assert_eq!(out.shape(), &[4, 3, 3]);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ones_kernel_gives_sliding_window_sums() {
        // ramp 1..9 laid out row-major
        let input = t(&[1, 3, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let out = conv2d_forward(&input, &Tensor::filled(&[1, 1, 2, 2], 1.0), &t(&[1], &[0.0]), 1, 0).unwrap();
        // hand-computed: 1+2+4+5, 2+3+5+6, 4+5+7+8, 5+6+8+9
        assert_eq!(out.data(), &[12.0, 16.0, 24.0, 28.0]);
    }

    #[test]
    fn identity_kernel_is_identity_map() {
        let input = t(&[1, 2, 3], &[0.5, -1.0, 2.0, 3.5, 0.0, -7.0]);
        let out = conv2d_forward(&input, &t(&[1, 1, 1, 1], &[1.0]), &t(&[1], &[0.0]), 1, 0).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn no_kernel_flip() {
        // asymmetric kernel picks the right neighbour, not the left
        let input = t(&[1, 1, 3], &[1.0, 10.0, 100.0]);
        let out = conv2d_forward(&input, &t(&[1, 1, 1, 1], &[1.0]), &t(&[1], &[0.0]), 1, 0).unwrap();
        assert_eq!(out.data(), input.data());
        let input = t(&[1, 2, 2], &[1.0, 10.0, 100.0, 1000.0]);
        let k = t(&[1, 1, 2, 2], &[0.0, 1.0, 0.0, 0.0]);
        let out = conv2d_forward(&input, &k, &t(&[1], &[0.0]), 1, 0).unwrap();
        assert_eq!(out.data(), &[10.0]);
    }

    #[test]
    fn stride_and_padding_shapes() {
        let out = conv2d_forward(&Tensor::zeros(&[1, 5, 5]), &Tensor::zeros(&[2, 1, 3, 3]), &Tensor::zeros(&[2]), 2, 1).unwrap();
        assert_eq!(out.shape(), &[2, 3, 3]);
        assert_eq!(conv_output_size(32, 3, 1, 1), Some(32));
        assert_eq!(conv_output_size(2, 5, 1, 1), None);
    }

    #[test]
    fn shape_errors_name_dimensions() {
        let err = conv2d_forward(&Tensor::zeros(&[2, 4, 4]), &Tensor::zeros(&[1, 3, 3, 3]), &Tensor::zeros(&[1]), 1, 0)
            .unwrap_err()
            .to_string();
        assert!(err.contains("3 input channels") && err.contains("2"), "{err}");
        assert!(conv2d_forward(&Tensor::zeros(&[1, 2, 2]), &Tensor::zeros(&[1, 1, 3, 3]), &Tensor::zeros(&[1]), 1, 0).is_err());
        assert!(conv2d_forward(&Tensor::zeros(&[1, 4, 4]), &Tensor::zeros(&[1, 1, 3, 3]), &Tensor::zeros(&[2]), 1, 0).is_err());
        assert!(conv2d_forward(&Tensor::zeros(&[1, 4, 4]), &Tensor::zeros(&[1, 1, 3, 3]), &Tensor::zeros(&[1]), 0, 0).is_err());
    }
}
