//! The interpreted source kernels against the native routines.

mod common;

use common::{interp_session, random_c32, random_f32, reference_session, rel_l2_c, rel_l2_f, rng};
use hetreco::ndarray::{Data, DataKind, NDArray};
use hetreco::ops::fft::Direction;
use hetreco::ops::phantom::{gen_phantom, PhantomSpec};
use hetreco::ops::{complex_element_prod, fft2d, matrix_add, negate, rss_combine, rss_recon, sens_recon, ximage_sum};

const TOL: f64 = 1e-5;

#[test]
fn negate_agrees_exactly() {
    let mut r = rng(1);
    let bytes = Data::xdata(NDArray::from_u8(&[7, 5], (0..35).map(|i| (i * 37 % 256) as u8).collect()).unwrap());
    let floats = Data::xdata(NDArray::from_f32(&[3, 3, 2], random_f32(&mut r, 18)).unwrap());
    for (data, max) in [(&bytes, None), (&bytes, Some(100.0)), (&floats, None), (&floats, Some(2.5))] {
        assert_eq!(negate(&mut reference_session(), data, max).unwrap(), negate(&mut interp_session(), data, max).unwrap());
    }
}

#[test]
fn fft_agrees() {
    for (seed, dims) in [(2, vec![8, 4]), (3, vec![4, 16, 2]), (4, vec![1, 8]), (5, vec![16, 16])] {
        let n = dims.iter().product();
        let x = Data::xdata(NDArray::from_c32(&dims, random_c32(&mut rng(seed), n)).unwrap());
        for dir in [Direction::Forward, Direction::Inverse] {
            let a = fft2d(&mut reference_session(), &x, dir).unwrap();
            let b = fft2d(&mut interp_session(), &x, dir).unwrap();
            let err = rel_l2_c(b.arrays[0].as_c32().unwrap(), a.arrays[0].as_c32().unwrap());
            assert!(err <= TOL, "{dims:?} {dir:?}: {err:e}");
        }
    }
}

#[test]
fn coil_ops_agree() {
    let mut r = rng(6);
    let (nx, ny, c, f) = (4, 8, 3, 2);
    let x = Data::xdata(NDArray::from_c32(&[nx, ny, c, f], random_c32(&mut r, nx * ny * c * f)).unwrap());
    let s = Data::xdata(NDArray::from_c32(&[nx, ny, c], random_c32(&mut r, nx * ny * c)).unwrap());
    for conj in [false, true] {
        let a = complex_element_prod(&mut reference_session(), &x, &s, conj).unwrap();
        let b = complex_element_prod(&mut interp_session(), &x, &s, conj).unwrap();
        assert!(rel_l2_c(b.arrays[0].as_c32().unwrap(), a.arrays[0].as_c32().unwrap()) <= TOL);
    }
    let a = ximage_sum(&mut reference_session(), &x).unwrap();
    let b = ximage_sum(&mut interp_session(), &x).unwrap();
    assert!(rel_l2_c(b.arrays[0].as_c32().unwrap(), a.arrays[0].as_c32().unwrap()) <= TOL);
    let a = rss_combine(&mut reference_session(), &x).unwrap();
    let b = rss_combine(&mut interp_session(), &x).unwrap();
    assert!(rel_l2_f(b.arrays[0].as_f32().unwrap(), a.arrays[0].as_f32().unwrap()) <= TOL);
}

#[test]
fn matrix_add_is_bitwise_equal() {
    let mut r = rng(7);
    let ab = Data::new(
        DataKind::Generic,
        vec![
            NDArray::from_f32(&[9, 7], random_f32(&mut r, 63)).unwrap(),
            NDArray::from_f32(&[9, 7], random_f32(&mut r, 63)).unwrap(),
        ],
    );
    assert_eq!(matrix_add(&mut reference_session(), &ab).unwrap(), matrix_add(&mut interp_session(), &ab).unwrap());
}

#[test]
fn reconstructions_agree() {
    let p = gen_phantom(&PhantomSpec { nx: 16, ny: 8, frames: 2, coils: 3, seed: 5 }).unwrap();
    let a = sens_recon(&mut reference_session(), &p.kspace, &p.maps).unwrap();
    let b = sens_recon(&mut interp_session(), &p.kspace, &p.maps).unwrap();
    assert!(rel_l2_c(b.arrays[0].as_c32().unwrap(), a.arrays[0].as_c32().unwrap()) <= TOL);
    let a = rss_recon(&mut reference_session(), &p.kspace).unwrap();
    let b = rss_recon(&mut interp_session(), &p.kspace).unwrap();
    assert!(rel_l2_f(b.arrays[0].as_f32().unwrap(), a.arrays[0].as_f32().unwrap()) <= TOL);
}

#[test]
fn interpreter_reports_device_errors() {
    let mut s = interp_session();
    let h = s.register_data(&Data::xdata(NDArray::from_u8(&[2], vec![1, 2]).unwrap())).unwrap();
    s.enqueue(hetreco::session::Launch {
        kernel: "negate".into(),
        global_size: 3,
        input: h,
        output: h,
        aux: None,
        params: 255f64.to_le_bytes().to_vec(),
    })
    .unwrap();
    match s.synchronize() {
        Err(hetreco::Error::DeviceError { kernel, message }) => {
            assert_eq!(kernel, "negate");
            assert!(message.contains("work item 2"), "{message}");
        }
        other => panic!("unexpected {other:?}"),
    }
}
