use crate::error::Result;
use crate::tensor::{check_same_dims, Element, Tensor};

/// Returned when the two images are identical.
pub const PSNR_CAP_DB: f64 = 100.0;

/// `10 log10(peak^2 / MSE)` over every element (all channels).
pub fn psnr<T: Element>(a: &Tensor<T>, b: &Tensor<T>, peak: f64) -> Result<f64> {
    check_same_dims(a, b)?;
    let n = a.len().max(1) as f64;
    let sse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| {
            let d = x.to_f64().unwrap() - y.to_f64().unwrap();
            d * d
        })
        .sum();
    let mse = sse / n;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_images_hit_the_cap() {
        let a = Tensor::full([1, 3, 4, 4], 0.3f32);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), 100.0);
    }

    #[test]
    fn uniform_offset_of_a_tenth_is_20_db() {
        let a = Tensor::full([1, 3, 8, 8], 0.3f64);
        let b = Tensor::full([1, 3, 8, 8], 0.4f64);
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-12);
        let a = Tensor::zeros([1, 3, 8, 8]);
        let b = Tensor::full([1, 3, 8, 8], 0.1f32);
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-6);
    }

    #[test]
    fn shape_mismatch() {
        let a = Tensor::<f32>::zeros([1, 3, 4, 4]);
        let b = Tensor::<f32>::zeros([1, 3, 4, 5]);
        assert!(psnr(&a, &b, 1.0).is_err());
    }
}
