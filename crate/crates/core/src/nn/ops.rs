//! Dense layers and activations with hand-written backward passes.
//!
//! Backward functions accumulate into `Param::grad` (they never overwrite) and
//! return the gradient with respect to the layer input.

use super::{Matrix, Param};
use crate::error::{Error, Result};

fn check_finite(op: &'static str, m: Matrix) -> Result<Matrix> {
    if m.is_finite() {
        Ok(m)
    } else {
        Err(Error::NonFinite(format!("{op} produced NaN/Inf")))
    }
}

fn check_bias(op: &'static str, b: &Param, cols: usize) -> Result<()> {
    if b.shape() != (1, cols) {
        return Err(Error::Shape {
            op,
            left: b.shape(),
            right: (1, cols),
        });
    }
    Ok(())
}

/// `x[L x Din] * w[Din x Dout] + b[1 x Dout]`.
pub fn linear(x: &Matrix, w: &Param, b: &Param) -> Result<Matrix> {
    let (din, dout) = w.shape();
    if x.cols() != din {
        return Err(Error::Shape {
            op: "linear",
            left: x.shape(),
            right: w.shape(),
        });
    }
    check_bias("linear bias", b, dout)?;
    let wv = w.value.data();
    let bv = b.value.data();
    let mut out = Matrix::zeros(x.rows(), dout);
    for l in 0..x.rows() {
        let orow = out.row_mut(l);
        orow.copy_from_slice(bv);
        for (i, &xi) in x.row(l).iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let wrow = &wv[i * dout..(i + 1) * dout];
            for (o, &wij) in orow.iter_mut().zip(wrow) {
                *o += xi * wij;
            }
        }
    }
    check_finite("linear", out)
}

pub fn linear_backward(x: &Matrix, w: &mut Param, b: &mut Param, dout: &Matrix) -> Matrix {
    let (din, nout) = w.shape();
    debug_assert_eq!(dout.shape(), (x.rows(), nout));
    let mut dx = Matrix::zeros(x.rows(), din);
    let wv = w.value.data();
    let wg = w.grad.data_mut();
    let bg = b.grad.data_mut();
    for l in 0..x.rows() {
        let g = dout.row(l);
        for (bj, gj) in bg.iter_mut().zip(g) {
            *bj += gj;
        }
        let xrow = x.row(l);
        let dxrow = dx.row_mut(l);
        for i in 0..din {
            let wrow = &wv[i * nout..(i + 1) * nout];
            let wgrow = &mut wg[i * nout..(i + 1) * nout];
            let xi = xrow[i];
            let mut acc = 0.0;
            for j in 0..nout {
                wgrow[j] += xi * g[j];
                acc += wrow[j] * g[j];
            }
            dxrow[i] = acc;
        }
    }
    dx
}

/// Kernel width implied by a `(k * Din) x Dout` kernel matrix; must be odd.
pub fn conv_width(kernel: &Param, din: usize) -> Result<usize> {
    let rows = kernel.value.rows();
    if din == 0 || rows % din != 0 {
        return Err(Error::Shape {
            op: "conv1d kernel",
            left: kernel.shape(),
            right: (rows, din),
        });
    }
    let k = rows / din;
    if k % 2 == 0 {
        return Err(Error::invalid("kernel", format!("conv1d width {k} is even")));
    }
    Ok(k)
}

/// Same-padded temporal cross-correlation.
///
/// The kernel is stored as `(k * Din) x Dout`, row `t * Din + i` holding tap `t`
/// of input channel `i`. With `p = (k - 1) / 2`:
/// `out[l, j] = b[j] + sum_t sum_i x[l + t - p, i] * K[t * Din + i, j]`,
/// where out-of-range frames read as zero.
pub fn conv1d(x: &Matrix, kernel: &Param, b: &Param) -> Result<Matrix> {
    let din = x.cols();
    let k = conv_width(kernel, din)?;
    let dout = kernel.value.cols();
    check_bias("conv1d bias", b, dout)?;
    let pad = (k - 1) / 2;
    let len = x.rows();
    let kv = kernel.value.data();
    let mut out = Matrix::zeros(len, dout);
    for l in 0..len {
        let orow = out.row_mut(l);
        orow.copy_from_slice(b.value.data());
        for t in 0..k {
            let src = l + t;
            if src < pad || src - pad >= len {
                continue;
            }
            let xrow = x.row(src - pad);
            let tap = &kv[t * din * dout..(t + 1) * din * dout];
            for (i, &xi) in xrow.iter().enumerate() {
                let wrow = &tap[i * dout..(i + 1) * dout];
                for (o, &w) in orow.iter_mut().zip(wrow) {
                    *o += xi * w;
                }
            }
        }
    }
    check_finite("conv1d", out)
}

pub fn conv1d_backward(x: &Matrix, kernel: &mut Param, b: &mut Param, dout: &Matrix) -> Matrix {
    let din = x.cols();
    let nout = kernel.value.cols();
    let k = kernel.value.rows() / din;
    let pad = (k - 1) / 2;
    let len = x.rows();
    debug_assert_eq!(dout.shape(), (len, nout));
    let mut dx = Matrix::zeros(len, din);
    let kv = kernel.value.data();
    let kg = kernel.grad.data_mut();
    let bg = b.grad.data_mut();
    for l in 0..len {
        let g = dout.row(l);
        for (bj, gj) in bg.iter_mut().zip(g) {
            *bj += gj;
        }
        for t in 0..k {
            let src = l + t;
            if src < pad || src - pad >= len {
                continue;
            }
            let s = src - pad;
            let base = t * din * nout;
            for i in 0..din {
                let xi = x[(s, i)];
                let off = base + i * nout;
                let wrow = &kv[off..off + nout];
                let wgrow = &mut kg[off..off + nout];
                let mut acc = 0.0;
                for j in 0..nout {
                    wgrow[j] += xi * g[j];
                    acc += wrow[j] * g[j];
                }
                dx[(s, i)] += acc;
            }
        }
    }
    dx
}

pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| v.max(0.0))
}

/// Subgradient at exactly 0 is 0.
pub fn relu_backward(x: &Matrix, dout: &Matrix) -> Matrix {
    Matrix::from_fn(x.rows(), x.cols(), |r, c| {
        if x[(r, c)] > 0.0 {
            dout[(r, c)]
        } else {
            0.0
        }
    })
}

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Matrix) -> Matrix {
    x.map(sigmoid_scalar)
}

/// Backward through `y = sigmoid(x)`, given the forward output `y`.
pub fn sigmoid_backward(y: &Matrix, dout: &Matrix) -> Matrix {
    Matrix::from_fn(y.rows(), y.cols(), |r, c| {
        let s = y[(r, c)];
        dout[(r, c)] * s * (1.0 - s)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Rng;

    fn random(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.normal())
    }

    #[test]
    fn linear_identity_and_zero() {
        let mut rng = Rng::new(1);
        let x = random(&mut rng, 4, 3);
        let out = linear(&x, &Param::new(Matrix::identity(3)), &Param::zeros(1, 3)).unwrap();
        assert_eq!(out, x);
        let out = linear(&x, &Param::zeros(3, 5), &Param::zeros(1, 5)).unwrap();
        assert_eq!(out, Matrix::zeros(4, 5));
    }

    #[test]
    fn linear_matches_double_loop() {
        let mut rng = Rng::new(2);
        let x = random(&mut rng, 3, 2);
        let w = Param::new(random(&mut rng, 2, 2));
        let b = Param::new(random(&mut rng, 1, 2));
        let out = linear(&x, &w, &b).unwrap();
        for l in 0..3 {
            for j in 0..2 {
                let mut s = b.value[(0, j)];
                for i in 0..2 {
                    s += x[(l, i)] * w.value[(i, j)];
                }
                assert!((out[(l, j)] - s).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn linear_shape_error_names_shapes() {
        let err = linear(&Matrix::zeros(2, 3), &Param::zeros(4, 1), &Param::zeros(1, 1)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2, 3)") && msg.contains("(4, 1)"), "{msg}");
    }

    #[test]
    fn conv_identity_zero_input_and_even_width() {
        let mut rng = Rng::new(3);
        let x = random(&mut rng, 6, 3);
        let out = conv1d(&x, &Param::new(Matrix::identity(3)), &Param::zeros(1, 3)).unwrap();
        assert_eq!(out, x);

        let b = Param::new(Matrix::from_vec(1, 2, vec![0.5, -1.5]).unwrap());
        let kern = Param::new(random(&mut rng, 9, 2));
        let out = conv1d(&Matrix::zeros(5, 3), &kern, &b).unwrap();
        for l in 0..5 {
            assert_eq!(out.row(l), &[0.5, -1.5]);
        }

        let even = Param::new(Matrix::zeros(6, 2));
        assert!(matches!(conv1d(&x, &even, &Param::zeros(1, 2)), Err(Error::Invalid { .. })));
    }

    #[test]
    fn conv_matches_triple_loop() {
        let mut rng = Rng::new(4);
        let (len, din, dout, k) = (5, 2, 3, 3);
        let x = random(&mut rng, len, din);
        let kern = Param::new(random(&mut rng, k * din, dout));
        let b = Param::new(random(&mut rng, 1, dout));
        let out = conv1d(&x, &kern, &b).unwrap();
        for l in 0..len as isize {
            for j in 0..dout {
                let mut s = b.value[(0, j)];
                for t in 0..k as isize {
                    let src = l + t - 1;
                    if src < 0 || src >= len as isize {
                        continue;
                    }
                    for i in 0..din {
                        s += x[(src as usize, i)] * kern.value[(t as usize * din + i, j)];
                    }
                }
                assert!((out[(l as usize, j)] - s).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn activations() {
        let x = Matrix::from_vec(1, 3, vec![-3.0, 0.0, 3f64.ln()]).unwrap();
        assert_eq!(relu(&x).data()[0], 0.0);
        let s = sigmoid(&x);
        assert_eq!(s.data()[1], 0.5);
        assert!((s.data()[2] - 0.75).abs() < 1e-15);
        let g = relu_backward(&x, &Matrix::filled(1, 3, 1.0));
        assert_eq!(g.data(), &[0.0, 0.0, 1.0]);
    }
}
