use crate::error::{config_err, Result};
use crate::tensor::Tensor;

fn check(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<(usize, usize)> {
    let [d_out, d_in] = w.shape()[..] else {
        return Err(config_err!("weight must be [d_out, d_in], got {:?}", w.shape()));
    };
    if x.len() != d_in {
        return Err(config_err!("input has {} features, weight expects {d_in}", x.len()));
    }
    if b.shape() != [d_out] {
        return Err(config_err!("bias shape {:?} does not match d_out = {d_out}", b.shape()));
    }
    Ok((d_out, d_in))
}

/// `W·x + b`; `x` may have any shape with `d_in` elements (it is flattened).
pub fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (d_out, d_in) = check(x, w, b)?;
    let wd = w.data();
    let xd = x.data();
    let out = (0..d_out)
        .map(|o| {
            let row = &wd[o * d_in..(o + 1) * d_in];
            b.data()[o] + row.iter().zip(xd).map(|(a, c)| a * c).sum::<f64>()
        })
        .collect();
    Tensor::new(vec![d_out], out)
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

pub fn dense_backward(x: &Tensor, w: &Tensor, b: &Tensor, grad_out: &Tensor) -> Result<DenseGrads> {
    let (d_out, d_in) = check(x, w, b)?;
    if grad_out.len() != d_out {
        return Err(config_err!("upstream gradient has {} entries, expected {d_out}", grad_out.len()));
    }
    let wd = w.data();
    let xd = x.data();
    let go = grad_out.data();
    let mut gx = vec![0.0; d_in];
    let mut gw = vec![0.0; d_out * d_in];
    for o in 0..d_out {
        let g = go[o];
        let row = &wd[o * d_in..(o + 1) * d_in];
        let grow = &mut gw[o * d_in..(o + 1) * d_in];
        for i in 0..d_in {
            grow[i] = g * xd[i];
            gx[i] += g * row[i];
        }
    }
    Ok(DenseGrads {
        input: Tensor::new(x.shape().to_vec(), gx)?,
        weight: Tensor::new(w.shape().to_vec(), gw)?,
        bias: Tensor::new(vec![d_out], go.to_vec())?,
    })
}
