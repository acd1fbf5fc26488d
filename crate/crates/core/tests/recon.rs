mod common;

use common::{random_c32, reference_session, rel_l2_c, rel_l2_f, rng};
use hetreco::ndarray::{Data, NDArray};
use hetreco::ops::fft::{Direction, FftPlan};
use hetreco::ops::phantom::{gen_phantom, PhantomSpec};
use hetreco::ops::{complex_element_prod, rss_combine, rss_recon, sens_recon, ximage_sum};
use num_complex::Complex32;

#[test]
fn sensitivity_recon_recovers_truth() {
    let p = gen_phantom(&PhantomSpec { nx: 32, ny: 64, frames: 3, coils: 5, seed: 4 }).unwrap();
    let mut session = reference_session();
    let m = sens_recon(&mut session, &p.kspace, &p.maps).unwrap();
    assert_eq!(m.arrays[0].dims(), &[32, 64, 3]);
    let err = rel_l2_c(m.arrays[0].as_c32().unwrap(), p.truth.arrays[0].as_c32().unwrap());
    assert!(err <= 1e-4, "rel L2 {err:e}");
}

#[test]
fn rss_single_coil_is_modulus_of_inverse_fft() {
    let (nx, ny, frames) = (16, 8, 2);
    let y = random_c32(&mut rng(5), nx * ny * frames);
    let mut x = y.clone();
    FftPlan::new(nx, ny).unwrap().transform(&mut x, Direction::Inverse).unwrap();
    let expect: Vec<f32> = x.iter().map(|v| v.norm()).collect();
    let kspace = Data::kdata(NDArray::from_c32(&[nx, ny, 1, frames], y).unwrap());
    let r = rss_recon(&mut reference_session(), &kspace).unwrap();
    let got = r.arrays[0].as_f32().unwrap();
    let worst = got.iter().zip(&expect).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
    assert!(worst <= 1e-6, "max abs diff {worst:e}");
}

#[test]
fn rss_three_four_five() {
    let mut x = vec![Complex32::default(); 2 * 2 * 2];
    x[3] = Complex32::new(3.0, 0.0);
    x[4 + 3] = Complex32::new(0.0, 4.0);
    let r = rss_combine(&mut reference_session(), &Data::xdata(NDArray::from_c32(&[2, 2, 2], x).unwrap())).unwrap();
    let v = r.arrays[0].as_f32().unwrap();
    assert!((v[3] - 5.0).abs() <= 1e-5);
    assert_eq!(&v[..3], &[0.0; 3]);
}

#[test]
fn sensitivity_recon_is_linear_in_kspace() {
    let p = gen_phantom(&PhantomSpec { nx: 16, ny: 16, frames: 2, coils: 3, seed: 2 }).unwrap();
    let z = random_c32(&mut rng(8), 16 * 16 * 3 * 2);
    let k = p.kspace.arrays[0].as_c32().unwrap();
    let combo: Vec<_> = k.iter().zip(&z).map(|(a, b)| a * 2.0 + b).collect();
    let mut session = reference_session();
    let run = |s: &mut _, v: Vec<Complex32>| {
        let d = Data::kdata(NDArray::from_c32(&[16, 16, 3, 2], v).unwrap());
        sens_recon(s, &d, &p.maps).unwrap().arrays[0].as_c32().unwrap().to_vec()
    };
    let lhs = run(&mut session, combo);
    let (a, b) = (run(&mut session, k.to_vec()), run(&mut session, z));
    let rhs: Vec<_> = a.iter().zip(&b).map(|(x, y)| x * 2.0 + y).collect();
    assert!(rel_l2_c(&lhs, &rhs) <= 1e-5);
}

#[test]
fn stages_match_host_composition() {
    // conj-product then coil sum, checked against a direct host loop.
    let (nx, ny, coils, frames) = (4, 4, 3, 2);
    let mut r = rng(11);
    let x = random_c32(&mut r, nx * ny * coils * frames);
    let s = random_c32(&mut r, nx * ny * coils);
    let mut session = reference_session();
    let xd = Data::xdata(NDArray::from_c32(&[nx, ny, coils, frames], x.clone()).unwrap());
    let sd = Data::xdata(NDArray::from_c32(&[nx, ny, coils], s.clone()).unwrap());
    let prod = complex_element_prod(&mut session, &xd, &sd, true).unwrap();
    let sum = ximage_sum(&mut session, &prod).unwrap();
    let plane = nx * ny;
    let mut expect = vec![Complex32::default(); plane * frames];
    for f in 0..frames {
        for c in 0..coils {
            for p in 0..plane {
                expect[p + plane * f] += x[p + plane * (c + coils * f)] * s[p + plane * c].conj();
            }
        }
    }
    assert!(rel_l2_c(sum.arrays[0].as_c32().unwrap(), &expect) <= 1e-6);

    let rss = rss_combine(&mut session, &xd).unwrap();
    let expect: Vec<f32> = (0..plane * frames)
        .map(|i| {
            let (p, f) = (i % plane, i / plane);
            (0..coils).map(|c| x[p + plane * (c + coils * f)].norm_sqr()).sum::<f32>().sqrt()
        })
        .collect();
    assert!(rel_l2_f(rss.arrays[0].as_f32().unwrap(), &expect) <= 1e-6);
}
