use crate::error::{config_err, Result};
use crate::tensor::Tensor;

pub fn relu(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

/// Upstream gradient masked by `x > 0`; the subgradient at exactly 0 is 0.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    if x.shape() != grad_out.shape() {
        return Err(config_err!(
            "relu gradient shape {:?} does not match input {:?}",
            grad_out.shape(),
            x.shape()
        ));
    }
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::new(x.shape().to_vec(), data)
}

/// Non-overlapping max-pool result, remembering each window's argmax.
#[derive(Debug, Clone)]
pub struct MaxPool {
    pub output: Tensor,
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

pub fn maxpool2d(x: &Tensor, window: usize) -> Result<MaxPool> {
    let (c, h, w) = x.dims3()?;
    if window == 0 || h % window != 0 || w % window != 0 {
        return Err(config_err!(
            "pool window {window} does not divide spatial size {h}x{w}"
        ));
    }
    let (oh, ow) = (h / window, w / window);
    let data = x.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                let mut best_idx = ch * h * w + i * window * w + j * window;
                let mut best = data[best_idx];
                for di in 0..window {
                    for dj in 0..window {
                        let idx = ch * h * w + (i * window + di) * w + j * window + dj;
                        if data[idx] > best {
                            best = data[idx];
                            best_idx = idx;
                        }
                    }
                }
                out.push(best);
                argmax.push(best_idx);
            }
        }
    }
    Ok(MaxPool {
        output: Tensor::new(vec![c, oh, ow], out)?,
        input_shape: x.shape().to_vec(),
        argmax,
    })
}

impl MaxPool {
    /// Route each upstream gradient to its window's argmax.
    pub fn backward(&self, grad_out: &Tensor) -> Result<Tensor> {
        if grad_out.shape() != self.output.shape() {
            return Err(config_err!(
                "pool gradient shape {:?} does not match output {:?}",
                grad_out.shape(),
                self.output.shape()
            ));
        }
        let mut g = Tensor::zeros(&self.input_shape);
        let gd = g.data_mut();
        for (&idx, &up) in self.argmax.iter().zip(grad_out.data()) {
            gd[idx] += up;
        }
        Ok(g)
    }
}
