use super::Matrix;
use crate::error::{Error, Result};

pub const DEFAULT_STEP: f64 = 1e-5;

/// Central-difference gradient check.
///
/// `f` maps a point to `(loss, analytic gradient)`. Returns
/// `max_i |analytic_i - numeric_i| / max(1, |numeric_i|)`.
pub fn grad_check<F>(mut f: F, point: &Matrix, h: f64) -> Result<f64>
where
    F: FnMut(&Matrix) -> Result<(f64, Matrix)>,
{
    let (loss, analytic) = f(point)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("loss {loss} at probe point")));
    }
    point.ensure_same_shape("grad_check", &analytic)?;
    let mut probe = point.clone();
    let mut worst: f64 = 0.0;
    for i in 0..point.data().len() {
        let x0 = point.data()[i];
        probe.data_mut()[i] = x0 + h;
        let (up, _) = f(&probe)?;
        probe.data_mut()[i] = x0 - h;
        let (down, _) = f(&probe)?;
        probe.data_mut()[i] = x0;
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::NonFinite(format!("loss at coordinate {i}")));
        }
        let numeric = (up - down) / (2.0 * h);
        let err = (analytic.data()[i] - numeric).abs() / numeric.abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}
