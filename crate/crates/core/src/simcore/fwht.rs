use crate::error::{invalid, Result};

/// In-place unnormalized Walsh–Hadamard butterfly.
pub fn fwht_in_place(data: &mut [f64]) {
    let n = data.len();
    let mut h = 1;
    while h < n {
        for block in (0..n).step_by(2 * h) {
            for i in block..block + h {
                let a = data[i];
                let b = data[i + h];
                data[i] = a + b;
                data[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Normalized Fourier coefficients `f̂(x) = (1/N) Σ_y (-1)^{x·y} f(y)`.
pub fn walsh_hadamard_transform(table: &[f64]) -> Result<Vec<f64>> {
    let n = table.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(invalid(format!("transform length {n} is not a power of two")));
    }
    let mut out = table.to_vec();
    fwht_in_place(&mut out);
    let scale = 1.0 / n as f64;
    for v in &mut out {
        *v *= scale;
    }
    Ok(out)
}
