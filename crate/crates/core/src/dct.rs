//! Orthonormal 2D DCT-II and its inverse, computed separably with dense
//! cosine bases.

use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct DctPlan<T> {
    height: usize,
    width: usize,
    // basis[k * n + i] = alpha_k cos(pi (2i + 1) k / 2n)
    rows: Vec<T>,
    cols: Vec<T>,
}

fn basis<T: Scalar>(n: usize) -> Vec<T> {
    let mut b = Vec::with_capacity(n * n);
    for k in 0..n {
        let alpha = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        for i in 0..n {
            let arg = std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64;
            b.push(T::of(alpha * arg.cos()));
        }
    }
    b
}

impl<T: Scalar> DctPlan<T> {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width, rows: basis(height), cols: basis(width) }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Forward transform of a row-major `height × width` plane.
    pub fn forward(&self, plane: &[T]) -> Vec<T> {
        self.apply(plane, false)
    }

    pub fn inverse(&self, coeffs: &[T]) -> Vec<T> {
        self.apply(coeffs, true)
    }

    fn apply(&self, input: &[T], transpose: bool) -> Vec<T> {
        let (h, w) = (self.height, self.width);
        assert_eq!(input.len(), h * w, "plane size does not match DCT plan");
        // along rows: tmp[r][k] = sum_i in[r][i] * M[k][i]  (or M[i][k] for the inverse)
        let mut tmp = vec![T::zero(); h * w];
        for r in 0..h {
            let row = &input[r * w..(r + 1) * w];
            let out = &mut tmp[r * w..(r + 1) * w];
            for (i, &x) in row.iter().enumerate() {
                if x == T::zero() {
                    continue;
                }
                for (k, o) in out.iter_mut().enumerate() {
                    let m = if transpose { self.cols[i * w + k] } else { self.cols[k * w + i] };
                    *o += x * m;
                }
            }
        }
        // along columns: out[k][c] = sum_r M[k][r] * tmp[r][c]
        let mut out = vec![T::zero(); h * w];
        for k in 0..h {
            let dst = &mut out[k * w..(k + 1) * w];
            for r in 0..h {
                let m = if transpose { self.rows[r * h + k] } else { self.rows[k * h + r] };
                let src = &tmp[r * w..(r + 1) * w];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += m * s;
                }
            }
        }
        out
    }
}

pub fn dct2<T: Scalar>(plane: &[T], height: usize, width: usize) -> Vec<T> {
    DctPlan::new(height, width).forward(plane)
}

pub fn idct2<T: Scalar>(coeffs: &[T], height: usize, width: usize) -> Vec<T> {
    DctPlan::new(height, width).inverse(coeffs)
}
