//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use hetreco::device::{DeviceFilter, Platform};
use hetreco::session::ComputeSession;
use num_complex::{Complex32, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn reference_session() -> ComputeSession {
    let mut s = ComputeSession::new(&Platform::new(), &DeviceFilter::any()).unwrap();
    s.load_builtin_kernels().unwrap();
    s
}

pub fn interp_session() -> ComputeSession {
    let platform = Platform::from_spec("interp").unwrap();
    let mut s = ComputeSession::new(&platform, &"source".parse().unwrap()).unwrap();
    s.load_builtin_kernels().unwrap();
    s
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_c32(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex32> {
    (0..n).map(|_| Complex32::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

pub fn random_f32(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// `||a - b|| / ||b||`, accumulated in f64.
pub fn rel_l2_c(a: &[Complex32], b: &[Complex32]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| f64::from((x - y).norm_sqr())).sum();
    let den: f64 = b.iter().map(|y| f64::from(y.norm_sqr())).sum();
    (num / den).sqrt()
}

pub fn rel_l2_f(a: &[f32], b: &[f32]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| f64::from(x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| f64::from(*y).powi(2)).sum();
    (num / den).sqrt()
}

/// Direct O(N^2) 2D DFT of every `nx*ny` plane, in f64. The inverse carries
/// the `1/(nx*ny)` factor.
pub fn naive_dft2(data: &[Complex32], nx: usize, ny: usize, inverse: bool) -> Vec<Complex32> {
    let plane = nx * ny;
    let sign = if inverse { 1.0 } else { -1.0 };
    let scale = if inverse { 1.0 / plane as f64 } else { 1.0 };
    let mut out = Vec::with_capacity(data.len());
    for p in data.chunks(plane) {
        for ky in 0..ny {
            for kx in 0..nx {
                let mut acc = Complex64::new(0.0, 0.0);
                for y in 0..ny {
                    for x in 0..nx {
                        let phase = sign * 2.0 * PI * ((kx * x) as f64 / nx as f64 + (ky * y) as f64 / ny as f64);
                        let v = p[x + nx * y];
                        acc += Complex64::new(v.re.into(), v.im.into()) * Complex64::from_polar(1.0, phase);
                    }
                }
                acc *= scale;
                out.push(Complex32::new(acc.re as f32, acc.im as f32));
            }
        }
    }
    out
}
