//! Squared-error losses and their gradients.

use crate::error::Result;
use crate::image::Image;
use crate::mask::MaskPartition;
use crate::scalar::Scalar;

/// `Σ_{j∈J} (output_j − y_j)²`; the gradient is `2(output_j − y_j)` on `J`
/// and exactly zero on `J^c`.
pub fn masked_loss<T: Scalar>(output: &Image<T>, y: &Image<T>, partition: &MaskPartition) -> Result<(T, Image<T>)> {
    output.check_shape(y)?;
    partition.check_image(y)?;
    let c = y.channels();
    let two = T::of(2.0);
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); y.data().len()];
    for &p in partition.masked() {
        for k in p * c..(p + 1) * c {
            let d = output.data()[k] - y.data()[k];
            loss += d * d;
            grad[k] = two * d;
        }
    }
    Ok((loss, output.with_data(grad)?))
}

/// `Σ_j (output_j − target_j)²` with gradient `2(output − target)`.
pub fn full_loss<T: Scalar>(output: &Image<T>, target: &Image<T>) -> Result<(T, Image<T>)> {
    output.check_shape(target)?;
    let two = T::of(2.0);
    let diff: Vec<T> = output.data().iter().zip(target.data()).map(|(&a, &b)| a - b).collect();
    let loss = diff.iter().map(|&d| d * d).sum();
    Ok((loss, output.with_data(diff.into_iter().map(|d| two * d).collect())?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{sample_mask, MaskMode};
    use proptest::prelude::*;

    fn rand_image(h: usize, w: usize, seed: u64) -> Image<f64> {
        let mut s = seed;
        Image::from_fn(h, w, 1, 1.0, |_, _, _| {
            s = crate::rng::splitmix64(s);
            (s >> 11) as f64 / (1u64 << 53) as f64
        })
    }

    #[test]
    fn masked_loss_cases() {
        let y = rand_image(6, 6, 1);
        let m = sample_mask(6, 6, 0.2, MaskMode::Uniform, 2).unwrap();
        // agree on J, disagree elsewhere
        let mut out = y.map(|v| v + 3.0);
        for &p in m.masked() {
            out.data_mut()[p] = y.data()[p];
        }
        assert_eq!(masked_loss(&out, &y, &m).unwrap().0, 0.0);
        let j = m.masked()[0];
        out.data_mut()[j] += 0.5;
        assert!((masked_loss(&out, &y, &m).unwrap().0 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn full_loss_cases() {
        let t = rand_image(4, 5, 3);
        let (l, g) = full_loss(&t, &t).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.data().iter().all(|&v| v == 0.0));
        let (l, _) = full_loss(&t.map(|v| v + 0.5), &t).unwrap();
        assert!((l - 20.0 * 0.25).abs() < 1e-12);
        assert!(full_loss(&t, &rand_image(5, 4, 0)).is_err());
    }

    #[test]
    fn full_mask_equals_full_loss() {
        let a = rand_image(5, 5, 4);
        let b = rand_image(5, 5, 5);
        let (lm, gm) = masked_loss(&a, &b, &MaskPartition::full(5, 5)).unwrap();
        let (lf, gf) = full_loss(&a, &b).unwrap();
        assert!((lm - lf).abs() < 1e-12);
        assert_eq!(gm, gf);
    }

    proptest! {
        #[test]
        fn gradient_zero_off_mask_and_loss_insensitive(seed in any::<u64>()) {
            let out = rand_image(7, 7, seed);
            let y = rand_image(7, 7, seed ^ 1);
            let m = sample_mask(7, 7, 0.3, MaskMode::Uniform, seed).unwrap();
            let (l, g) = masked_loss(&out, &y, &m).unwrap();
            let mut moved = out.clone();
            for p in m.complement() {
                prop_assert_eq!(g.data()[p].to_bits(), 0u64);
                moved.data_mut()[p] += 10.0;
            }
            prop_assert_eq!(masked_loss(&moved, &y, &m).unwrap().0, l);
        }
    }
}
