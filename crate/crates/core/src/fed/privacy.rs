use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};

/// Laplace(0, b) by inverse CDF.
pub fn laplace<R: Rng>(b: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.gen_range(-0.5..0.5);
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Adds i.i.d. Laplace noise with `b = 1/ε` and L2-normalizes each row.
pub fn apply_privacy_noise<R: Rng>(x: &Array2<f64>, epsilon: f64, rng: &mut R) -> Result<Array2<f64>> {
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("privacy epsilon must be positive, got {epsilon}")));
    }
    let b = 1.0 / epsilon;
    let mut out = x.mapv(|v| v + if b > 0.0 { laplace(b, rng) } else { 0.0 });
    for mut row in out.rows_mut() {
        let n = row.dot(&row).sqrt();
        if n > 0.0 {
            row.mapv_inplace(|v| v / n);
        }
    }
    Ok(out)
}
