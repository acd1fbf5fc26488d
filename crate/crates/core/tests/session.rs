mod common;

use std::sync::Arc;

use common::reference_session;
use hetreco::backend::reference::ReferenceBackend;
use hetreco::device::{DeviceFilter, Platform};
use hetreco::ndarray::{ArraySpec, Data, DataKind, ElementType, NDArray};
use hetreco::ops::kernel_names;
use hetreco::session::{ComputeSession, Launch};
use hetreco::Error;

fn image(values: Vec<u8>) -> Data {
    Data::xdata(NDArray::from_u8(&[values.len()], values).unwrap())
}

#[test]
fn register_fetch_round_trip_and_counters() {
    let mut s = reference_session();
    let d = Data::new(
        DataKind::Generic,
        vec![
            NDArray::from_u8(&[3], vec![1, 2, 3]).unwrap(),
            NDArray::from_f64(&[2, 2], vec![1.5, -2.0, 0.25, 8.0]).unwrap(),
        ],
    );
    let h = s.register_data(&d).unwrap();
    assert_eq!(s.counters().host_to_device, 1);
    assert_eq!(s.fetch_data(h).unwrap(), d);
    assert_eq!(s.counters().device_to_host, 1);
    let layout = s.layout(h).unwrap();
    assert_eq!(layout.records[1].offset_bytes, 256);
    s.allocate(DataKind::Generic, &[ArraySpec::new(ElementType::Float32, &[4])]).unwrap();
    assert_eq!(s.counters().host_to_device, 1, "allocation is not a transfer");
}

#[test]
fn handles_are_session_scoped() {
    let mut a = reference_session();
    let mut b = reference_session();
    let h = a.register_data(&image(vec![1])).unwrap();
    assert!(matches!(b.fetch_data(h), Err(Error::UnknownHandle(_))));
    a.unregister_data(h).unwrap();
    assert!(matches!(a.fetch_data(h), Err(Error::UnknownHandle(_))));
    assert_eq!(a.allocated_bytes(), 0);
}

#[test]
fn allocation_beyond_device_memory_fails() {
    let platform = Platform::with_reference(Arc::new(ReferenceBackend::with_memory(4096)));
    let mut s = ComputeSession::new(&platform, &DeviceFilter::any()).unwrap();
    s.register_data(&image(vec![0; 1000])).unwrap();
    let err = s.register_data(&image(vec![0; 4000])).unwrap_err();
    assert!(matches!(err, Error::AllocationFailure { .. }), "{err}");
}

#[test]
fn queue_runs_in_order_on_synchronize() {
    let mut s = reference_session();
    let h = s.register_data(&image(vec![10, 20])).unwrap();
    let negate = |max: f64| Launch {
        kernel: kernel_names::NEGATE.into(),
        global_size: 2,
        input: h,
        output: h,
        aux: None,
        params: max.to_le_bytes().to_vec(),
    };
    s.enqueue(negate(255.0)).unwrap();
    s.enqueue(negate(250.0)).unwrap();
    assert_eq!(s.queued(), 2);
    s.synchronize().unwrap();
    assert_eq!(s.queued(), 0);
    // 250 - (255 - v) = v - 5
    assert_eq!(s.fetch_data(h).unwrap().arrays[0].as_u8().unwrap(), &[5, 15]);
}

#[test]
fn device_error_names_kernel_and_discards_queue() {
    let mut s = reference_session();
    let h = s.register_data(&image(vec![1, 2])).unwrap();
    let bad = Launch {
        kernel: kernel_names::NEGATE.into(),
        global_size: 7,
        input: h,
        output: h,
        aux: None,
        params: 255f64.to_le_bytes().to_vec(),
    };
    let good = Launch { global_size: 2, ..bad.clone() };
    s.enqueue(bad).unwrap();
    s.enqueue(good).unwrap();
    match s.synchronize() {
        Err(Error::DeviceError { kernel, .. }) => assert_eq!(kernel, "negate"),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(s.queued(), 0);
    assert_eq!(s.fetch_data(h).unwrap().arrays[0].as_u8().unwrap(), &[1, 2], "no partial effects");
}

#[test]
fn enqueue_validates_kernel_and_handles() {
    let mut s = reference_session();
    let h = s.register_data(&image(vec![1])).unwrap();
    let launch = Launch { kernel: "nope".into(), global_size: 1, input: h, output: h, aux: None, params: vec![] };
    assert!(matches!(s.enqueue(launch.clone()), Err(Error::UnknownKernel(_))));
    let aliasing = Launch { kernel: kernel_names::COMPLEX_ELEMENT_PROD.into(), aux: Some(h), ..launch };
    assert!(matches!(s.enqueue(aliasing), Err(Error::InvalidParams(_))));
}

#[test]
fn empty_data_is_rejected() {
    let mut s = reference_session();
    assert!(matches!(s.register_data(&Data::new(DataKind::Generic, vec![])), Err(Error::EmptyData)));
}
