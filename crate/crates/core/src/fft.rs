//! Complex FFT for arbitrary lengths.
//!
//! Powers of two use an iterative radix-2 transform; every other length goes
//! through Bluestein's chirp-z identity on a padded power-of-two transform.
//! Both directions are unnormalized.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

pub use num_complex::Complex64;

#[derive(Debug, Clone)]
struct Radix2 {
    len: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<u32>,
}

impl Radix2 {
    fn new(len: usize) -> Self {
        debug_assert!(len.is_power_of_two());
        let twiddles = (0..len / 2)
            .map(|k| {
                let angle = -2.0 * PI * k as f64 / len as f64;
                Complex64::new(libm::cos(angle), libm::sin(angle))
            })
            .collect();
        let bits = len.trailing_zeros();
        let bitrev = (0..len as u32)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (32 - bits)
                }
            })
            .collect();
        Self {
            len,
            twiddles,
            bitrev,
        }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        let n = self.len;
        for i in 0..n {
            let j = self.bitrev[i] as usize;
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            size *= 2;
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Radix2(Radix2),
    Bluestein {
        inner: Radix2,
        chirp: Vec<Complex64>,
        kernel_spectrum: Vec<Complex64>,
    },
}

/// A reusable transform of one fixed length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    len: usize,
    kind: Kind,
}

impl FftPlan {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "FFT length must be positive");
        if len.is_power_of_two() {
            return Self {
                len,
                kind: Kind::Radix2(Radix2::new(len)),
            };
        }
        let padded = (2 * len - 1).next_power_of_two();
        let inner = Radix2::new(padded);
        // n^2 mod 2N keeps the chirp angle small for long transforms.
        let modulus = 2 * len as u64;
        let chirp: Vec<Complex64> = (0..len as u64)
            .map(|n| {
                let q = (n * n) % modulus;
                let angle = -PI * q as f64 / len as f64;
                Complex64::new(libm::cos(angle), libm::sin(angle))
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); padded];
        kernel[0] = chirp[0].conj();
        for n in 1..len {
            kernel[n] = chirp[n].conj();
            kernel[padded - n] = chirp[n].conj();
        }
        inner.forward(&mut kernel);
        Self {
            len,
            kind: Kind::Bluestein {
                inner,
                chirp,
                kernel_spectrum: kernel,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place forward transform, `X_k = sum_n x_n exp(-2 pi i k n / N)`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        match &self.kind {
            Kind::Radix2(r) => r.forward(buf),
            Kind::Bluestein {
                inner,
                chirp,
                kernel_spectrum,
            } => {
                let m = inner.len;
                let mut work = vec![Complex64::new(0.0, 0.0); m];
                for (w, (x, c)) in work.iter_mut().zip(buf.iter().zip(chirp)) {
                    *w = x * c;
                }
                inner.forward(&mut work);
                for (w, k) in work.iter_mut().zip(kernel_spectrum) {
                    *w = (*w * k).conj();
                }
                // inverse via conjugation
                inner.forward(&mut work);
                let scale = 1.0 / m as f64;
                for (x, (w, c)) in buf.iter_mut().zip(work.iter().zip(chirp)) {
                    *x = w.conj() * scale * c;
                }
            }
        }
    }

    /// In-place inverse transform without the `1/N` factor.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        for x in buf.iter_mut() {
            *x = x.conj();
        }
        self.forward(buf);
        for x in buf.iter_mut() {
            *x = x.conj();
        }
    }
}

/// Full complex spectrum of a real signal.
pub fn real_spectrum(plan: &FftPlan, signal: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    plan.forward(&mut buf);
    buf
}

/// Real part of the normalized inverse transform.
pub fn real_inverse(plan: &FftPlan, spectrum: &mut [Complex64]) -> Vec<f64> {
    plan.inverse(spectrum);
    let scale = 1.0 / spectrum.len() as f64;
    spectrum.iter().map(|c| c.re * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .fold(Complex64::new(0.0, 0.0), |acc, (j, v)| {
                        let angle = -2.0 * PI * ((k * j) % n) as f64 / n as f64;
                        acc + v * Complex64::new(libm::cos(angle), libm::sin(angle))
                    })
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_for_many_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for len in [1usize, 2, 3, 5, 8, 12, 17, 64, 100, 125, 256, 301] {
            let x: Vec<Complex64> = (0..len)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let expected = naive_dft(&x);
            let mut got = x.clone();
            FftPlan::new(len).forward(&mut got);
            for (a, b) in got.iter().zip(&expected) {
                assert!(
                    (a - b).norm() < 1e-9 * (len as f64),
                    "len {len}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn inverse_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for len in [16usize, 15, 1000] {
            let x: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let plan = FftPlan::new(len);
            let mut spec = real_spectrum(&plan, &x);
            let back = real_inverse(&plan, &mut spec);
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
