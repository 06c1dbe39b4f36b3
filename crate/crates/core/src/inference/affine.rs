use rayon::prelude::*;

use super::{EncryptedTensor, HeError};
use crate::bfv::{BfvParams, Ciphertext};
use crate::nn::{QLayer, QuantLayer, Shape};
use crate::ring::RingPoly;

/// A linear layer as explicit sparse rows: `out_i = Σ w·x_j + bias_i`.
/// Convolution and pooling both lower to this form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseAffine {
    pub rows: Vec<Vec<(usize, i64)>>,
    pub bias: Vec<i64>,
    pub input_len: usize,
}

impl SparseAffine {
    /// Lowers a conv, dense or pool layer; `None` for flatten/activations.
    pub fn from_layer(layer: &QLayer) -> Option<Self> {
        match layer {
            QLayer::Conv2d {
                weight,
                bias,
                input,
                output,
                kernel,
                stride,
                pad,
            } => {
                let k = *kernel;
                let mut rows = Vec::with_capacity(output.len());
                let mut biases = Vec::with_capacity(output.len());
                for oc in 0..output.c {
                    for oy in 0..output.h {
                        for ox in 0..output.w {
                            let mut row = Vec::new();
                            for ic in 0..input.c {
                                for ky in 0..k {
                                    for kx in 0..k {
                                        let iy = (oy * stride + ky) as isize - *pad as isize;
                                        let ix = (ox * stride + kx) as isize - *pad as isize;
                                        if iy < 0 || ix < 0 || iy >= input.h as isize || ix >= input.w as isize {
                                            continue;
                                        }
                                        let w = weight[oc * input.c * k * k + ic * k * k + ky * k + kx];
                                        row.push((ic * input.h * input.w + iy as usize * input.w + ix as usize, w));
                                    }
                                }
                            }
                            rows.push(row);
                            biases.push(bias[oc]);
                        }
                    }
                }
                Some(Self {
                    rows,
                    bias: biases,
                    input_len: input.len(),
                })
            }
            QLayer::Dense {
                weight,
                bias,
                input,
                output,
            } => Some(Self {
                rows: (0..*output)
                    .map(|o| (0..*input).map(|j| (j, weight[o * input + j])).collect())
                    .collect(),
                bias: bias.clone(),
                input_len: *input,
            }),
            QLayer::SumPool2 { input, output } => {
                let mut rows = Vec::with_capacity(output.len());
                for c in 0..output.c {
                    for oy in 0..output.h {
                        for ox in 0..output.w {
                            let base = c * input.h * input.w;
                            rows.push(
                                [(0, 0), (0, 1), (1, 0), (1, 1)]
                                    .iter()
                                    .map(|&(dy, dx)| (base + (2 * oy + dy) * input.w + 2 * ox + dx, 1))
                                    .collect(),
                            );
                        }
                    }
                }
                Some(Self {
                    bias: vec![0; rows.len()],
                    rows,
                    input_len: input.len(),
                })
            }
            QLayer::Flatten | QLayer::Relu { .. } | QLayer::Lif { .. } => None,
        }
    }
}

/// `Σ w_j·x_j + bias` evaluated coefficient-wise in one pass, with a single
/// reduction mod q per coefficient. Bit-identical to the chain of plaintext
/// multiplications and additions it replaces.
fn fused_row(row: &[(usize, i64)], bias: i64, x: &[Ciphertext], params: &BfvParams) -> Ciphertext {
    let n = params.n();
    let q = params.q();
    let terms: Vec<(&Ciphertext, i64)> = row.iter().filter(|(_, w)| *w != 0).map(|&(j, w)| (&x[j], w)).collect();
    // Zero weights still widen the result, exactly as the literal chain does.
    let parts = row.iter().map(|&(j, _)| x[j].len()).max().unwrap_or(2);
    let depth = row.iter().map(|&(j, _)| x[j].mult_depth()).max().unwrap_or(0);
    let weight_l1: u128 = terms.iter().map(|(_, w)| w.unsigned_abs() as u128).sum();
    let fits_i64 = weight_l1 * q as u128 <= i64::MAX as u128;
    let ring = params.ring();
    let mut out = Vec::with_capacity(parts);
    for p in 0..parts {
        let coeffs: Vec<u64> = if fits_i64 {
            let mut acc = vec![0i64; n];
            for (ct, w) in &terms {
                if let Some(part) = ct.parts().get(p) {
                    for (a, &c) in acc.iter_mut().zip(part.coeffs()) {
                        *a += w * c as i64;
                    }
                }
            }
            acc.into_iter().map(|a| a.rem_euclid(q as i64) as u64).collect()
        } else {
            let mut acc = vec![0i128; n];
            for (ct, w) in &terms {
                if let Some(part) = ct.parts().get(p) {
                    for (a, &c) in acc.iter_mut().zip(part.coeffs()) {
                        *a += *w as i128 * c as i128;
                    }
                }
            }
            acc.into_iter().map(|a| a.rem_euclid(q as i128) as u64).collect()
        };
        out.push(RingPoly::from_coeffs(ring, coeffs).expect("n coefficients"));
    }
    let m = ring.modulus();
    let c00 = m.add(out[0].coeffs()[0], params.scale_plaintext(bias));
    let mut c0 = out[0].coeffs().to_vec();
    c0[0] = c00;
    out[0] = RingPoly::from_coeffs(ring, c0).expect("n coefficients");
    Ciphertext::from_parts(params.clone(), out, depth)
}

fn check_input<'a>(sparse: &SparseAffine, x: &'a EncryptedTensor) -> Result<&'a BfvParams, HeError> {
    if x.len() != sparse.input_len {
        return Err(HeError::Shape(format!(
            "layer expects {} inputs, tensor has {}",
            sparse.input_len,
            x.len()
        )));
    }
    let params = x
        .cts
        .first()
        .map(Ciphertext::params)
        .ok_or_else(|| HeError::Shape("empty tensor".into()))?;
    for ct in &x.cts {
        params.check_compatible(ct.params())?;
    }
    Ok(params)
}

/// Homomorphic evaluation of a conv, dense, pool or flatten layer.
pub fn he_affine(layer: &QuantLayer, x: &EncryptedTensor) -> Result<EncryptedTensor, HeError> {
    let Some(sparse) = SparseAffine::from_layer(&layer.op) else {
        return match layer.op {
            QLayer::Flatten => Ok(EncryptedTensor {
                cts: x.cts.clone(),
                shape: Shape::flat(x.len()),
                scale: layer.scale,
            }),
            _ => Err(HeError::Shape(format!("{} is not an affine layer", layer.name))),
        };
    };
    let params = check_input(&sparse, x)?;
    for &b in &sparse.bias {
        params.check_plaintext(b)?;
    }
    let cts = sparse
        .rows
        .par_iter()
        .zip(&sparse.bias)
        .map(|(row, &b)| fused_row(row, b, &x.cts, params))
        .collect();
    Ok(EncryptedTensor {
        cts,
        shape: layer.output,
        scale: layer.scale,
    })
}

/// The same layer built literally from `he_mul_plain` and `he_add` /
/// `he_add_plain` calls; slow, used to validate the fused kernel.
pub fn he_affine_reference(layer: &QuantLayer, x: &EncryptedTensor) -> Result<EncryptedTensor, HeError> {
    let sparse = SparseAffine::from_layer(&layer.op)
        .ok_or_else(|| HeError::Shape(format!("{} is not an affine layer", layer.name)))?;
    let params = check_input(&sparse, x)?;
    let mut cts = Vec::with_capacity(sparse.rows.len());
    for (row, &b) in sparse.rows.iter().zip(&sparse.bias) {
        let mut acc = Ciphertext::zero(params);
        for &(j, w) in row {
            acc = acc.add(&x.cts[j].mul_plain(w)?)?;
        }
        cts.push(acc.add_plain(b)?);
    }
    Ok(EncryptedTensor {
        cts,
        shape: layer.output,
        scale: layer.scale,
    })
}
