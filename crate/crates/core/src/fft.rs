//! Unitary discrete Fourier transform.
//!
//! `F[k, n] = T^{-1/2} exp(-2 pi i k n / T)`. Power-of-two lengths run an
//! iterative radix-2 Cooley-Tukey transform; other lengths fall back to a
//! precomputed dense matrix.

use alloc::vec::Vec;

use crate::math;
use crate::tensor::ComplexVec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => -1.0,
            Direction::Inverse => 1.0,
        }
    }
}

#[derive(Debug, Clone)]
enum Kernel {
    Radix2 {
        /// `exp(-2 pi i j / n)` for `j < n/2`.
        tw_re: Vec<f64>,
        tw_im: Vec<f64>,
        bitrev: Vec<usize>,
    },
    Dense {
        /// `cos(2 pi m / n)`, `sin(2 pi m / n)` for `m < n`, indexed by `k*j mod n`.
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
}

/// Precomputed tables for a unitary DFT of fixed length.
#[derive(Debug, Clone)]
pub struct DftPlan {
    len: usize,
    scale: f64,
    kernel: Kernel,
}

impl DftPlan {
    pub fn new(len: usize) -> Self {
        assert!(len >= 1, "DFT length must be positive");
        let scale = 1.0 / math::sqrt(len as f64);
        let kernel = if len.is_power_of_two() {
            let half = len / 2;
            let (tw_im, tw_re): (Vec<f64>, Vec<f64>) = (0..half)
                .map(|j| {
                    let (s, c) = math::sin_cos(-math::TAU * j as f64 / len as f64);
                    (s, c)
                })
                .unzip();
            let bits = len.trailing_zeros();
            let bitrev = (0..len)
                .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
                .collect();
            Kernel::Radix2 {
                tw_re,
                tw_im,
                bitrev,
            }
        } else {
            let (sin, cos) = (0..len)
                .map(|m| math::sin_cos(math::TAU * m as f64 / len as f64))
                .unzip();
            Kernel::Dense { cos, sin }
        };
        DftPlan { len, scale, kernel }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_radix2(&self) -> bool {
        matches!(self.kernel, Kernel::Radix2 { .. })
    }

    pub fn forward(&self, z: &ComplexVec) -> ComplexVec {
        self.apply(z, Direction::Forward)
    }

    pub fn inverse(&self, z: &ComplexVec) -> ComplexVec {
        self.apply(z, Direction::Inverse)
    }

    pub fn apply(&self, z: &ComplexVec, dir: Direction) -> ComplexVec {
        let mut out = z.clone();
        self.apply_in_place(&mut out.re, &mut out.im, dir);
        out
    }

    /// Transforms `(re, im)` in place. Panics if the length differs from the plan.
    pub fn apply_in_place(&self, re: &mut [f64], im: &mut [f64], dir: Direction) {
        assert_eq!(re.len(), self.len, "DFT input length");
        assert_eq!(im.len(), self.len, "DFT input length");
        match &self.kernel {
            Kernel::Radix2 {
                tw_re,
                tw_im,
                bitrev,
            } => radix2(re, im, tw_re, tw_im, bitrev, dir),
            Kernel::Dense { cos, sin } => dense(re, im, cos, sin, dir),
        }
        for v in re.iter_mut().chain(im.iter_mut()) {
            *v *= self.scale;
        }
    }
}

fn radix2(
    re: &mut [f64],
    im: &mut [f64],
    tw_re: &[f64],
    tw_im: &[f64],
    bitrev: &[usize],
    dir: Direction,
) {
    let n = re.len();
    for (i, &j) in bitrev.iter().enumerate() {
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    // twiddles are stored for the forward sign; conjugate for the inverse
    let conj = match dir {
        Direction::Forward => 1.0,
        Direction::Inverse => -1.0,
    };
    let mut size = 2;
    while size <= n {
        let half = size / 2;
        let step = n / size;
        for start in (0..n).step_by(size) {
            for k in 0..half {
                let wr = tw_re[k * step];
                let wi = conj * tw_im[k * step];
                let a = start + k;
                let b = a + half;
                let xr = re[b] * wr - im[b] * wi;
                let xi = re[b] * wi + im[b] * wr;
                re[b] = re[a] - xr;
                im[b] = im[a] - xi;
                re[a] += xr;
                im[a] += xi;
            }
        }
        size *= 2;
    }
}

fn dense(re: &mut [f64], im: &mut [f64], cos: &[f64], sin: &[f64], dir: Direction) {
    let n = re.len();
    let sign = dir.sign();
    let mut out_re = alloc::vec![0.0; n];
    let mut out_im = alloc::vec![0.0; n];
    for k in 0..n {
        let (mut sr, mut si) = (0.0, 0.0);
        for j in 0..n {
            let m = (k * j) % n;
            let (c, s) = (cos[m], sign * sin[m]);
            sr += re[j] * c - im[j] * s;
            si += re[j] * s + im[j] * c;
        }
        out_re[k] = sr;
        out_im[k] = si;
    }
    re.copy_from_slice(&out_re);
    im.copy_from_slice(&out_im);
}

/// Unitary forward DFT.
pub fn dft(z: &ComplexVec) -> ComplexVec {
    DftPlan::new(z.len()).forward(z)
}

/// Unitary inverse DFT.
pub fn idft(z: &ComplexVec) -> ComplexVec {
    DftPlan::new(z.len()).inverse(z)
}

/// Textbook `O(T^2)` unitary DFT, evaluating every exponential directly.
///
/// Reference path for checking [`DftPlan`]; no tables are shared with it.
pub fn naive_dft(z: &ComplexVec, dir: Direction) -> ComplexVec {
    let n = z.len();
    let scale = 1.0 / math::sqrt(n as f64);
    let mut out = ComplexVec::zeros(n);
    for k in 0..n {
        let (mut sr, mut si) = (0.0, 0.0);
        for j in 0..n {
            let angle = dir.sign() * math::TAU * ((k * j) % n) as f64 / n as f64;
            let (s, c) = math::sin_cos(angle);
            sr += z.re[j] * c - z.im[j] * s;
            si += z.re[j] * s + z.im[j] * c;
        }
        out.re[k] = sr * scale;
        out.im[k] = si * scale;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn dc_of_ones() {
        let out = dft(&ComplexVec::from_real(&[1.0, 1.0, 1.0, 1.0]));
        let expected = [2.0, 0.0, 0.0, 0.0];
        for k in 0..4 {
            assert!((out.re[k] - expected[k]).abs() < 1e-12);
            assert!(out.im[k].abs() < 1e-12);
        }
    }

    #[test]
    fn roots_of_unity_land_in_bin_one() {
        // [1, i, -1, -i] = exp(+2 pi i n / 4) is the k = 1 basis vector up to sqrt(T)
        let z = ComplexVec::new(vec![1.0, 0.0, -1.0, 0.0], vec![0.0, 1.0, 0.0, -1.0]);
        let out = dft(&z);
        let expected = [(0.0, 0.0), (2.0, 0.0), (0.0, 0.0), (0.0, 0.0)];
        for (k, &(r, i)) in expected.iter().enumerate() {
            assert!((out.re[k] - r).abs() < 1e-12, "bin {k}");
            assert!((out.im[k] - i).abs() < 1e-12, "bin {k}");
        }
    }

    #[test]
    fn both_kernels_match_naive() {
        for n in [1usize, 2, 3, 4, 5, 8, 10, 12, 16, 32, 64] {
            let re: Vec<f64> = (0..n).map(|i| math::sin(1.3 * i as f64 + 0.2)).collect();
            let im: Vec<f64> = (0..n).map(|i| math::cos(0.7 * i as f64 * i as f64)).collect();
            let z = ComplexVec::new(re, im);
            let plan = DftPlan::new(n);
            for dir in [Direction::Forward, Direction::Inverse] {
                let diff = plan.apply(&z, dir).max_abs_diff(&naive_dft(&z, dir));
                assert!(diff < 1e-12, "n={n} {dir:?} diff={diff}");
            }
        }
    }

    #[test]
    fn inverse_undoes_forward() {
        let z = ComplexVec::from_phases(&[0.1, -1.0, 2.5, 0.4, 3.0, -2.2, 0.0, 1.1]);
        let back = idft(&dft(&z));
        assert!(back.max_abs_diff(&z) < 1e-14);
    }
}
