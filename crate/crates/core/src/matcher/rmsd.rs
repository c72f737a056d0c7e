use nalgebra::Vector3;

use crate::CrystalError;

/// Average free length per atom, `(V / n)^(1/3)`.
pub fn free_length(volume: f64, n: usize) -> f64 {
    (volume / n as f64).cbrt()
}

/// RMS and maximum Cartesian displacement divided by `(V / n)^(1/3)`.
pub fn normalized_rmsd(disp: &[Vector3<f64>], volume: f64, n: usize) -> Result<(f64, f64), CrystalError> {
    if n == 0 || !(volume > 0.0) {
        return Err(CrystalError::InvalidParameters(format!(
            "normalized_rmsd needs n >= 1 and volume > 0 (got n={n}, volume={volume})"
        )));
    }
    if disp.is_empty() {
        return Ok((0.0, 0.0));
    }
    let norm = free_length(volume, n);
    let sq: Vec<f64> = disp.iter().map(|d| d.norm_squared()).collect();
    let mean = sq.iter().sum::<f64>() / sq.len() as f64;
    let max = sq.iter().copied().fold(0.0, f64::max);
    Ok((mean.sqrt() / norm, max.sqrt() / norm))
}
