use std::sync::Arc;

use hetreco::backend::{Backend, CompiledKernel, StagingPath};
use hetreco::device::{DeviceClass, DeviceDescriptor, DeviceFilter, DeviceType, Platform};
use hetreco::kernels::ProgramSource;
use hetreco::{Error, Result};
use proptest::prelude::*;

/// A backend that only describes devices; nothing is ever built on it.
struct Fake {
    id: &'static str,
    devices: Vec<(DeviceType, &'static str, &'static str, u64, &'static str)>,
}

impl Backend for Fake {
    fn id(&self) -> &str {
        self.id
    }

    fn devices(&self) -> Vec<DeviceDescriptor> {
        self.devices
            .iter()
            .enumerate()
            .map(|(i, &(device_type, vendor, name, mem, api))| DeviceDescriptor {
                backend_id: self.id.into(),
                device_index: i,
                device_type,
                vendor: vendor.into(),
                name: name.into(),
                api_version: api.into(),
                global_memory_bytes: mem,
                base_alignment_bytes: 128,
                supports_source_kernels: true,
            })
            .collect()
    }

    fn staging_path(&self) -> StagingPath {
        StagingPath::Copied
    }

    fn build(&self, _: &DeviceDescriptor, _: &[ProgramSource]) -> Result<Vec<CompiledKernel>> {
        Err(Error::UnsupportedFeature("fake backend".into()))
    }
}

fn mixed_platform() -> Platform {
    let mut p = Platform::new();
    p.register(Arc::new(Fake {
        id: "fake",
        devices: vec![
            (DeviceType::Accelerator, "Xilinx", "Alveo", 16 << 30, "1.2"),
            (DeviceType::Gpu, "AMD", "Radeon small", 2 << 30, "2.0"),
            (DeviceType::Gpu, "NVIDIA", "GeForce big", 8 << 30, "1.2"),
            (DeviceType::Gpu, "Intel", "Arc twin", 8 << 30, "3.0"),
        ],
    }));
    p
}

#[test]
fn ranking_prefers_gpu_then_memory_then_order() {
    let p = mixed_platform();
    assert_eq!(p.select(&DeviceFilter::any()).unwrap().name, "GeForce big");
    assert_eq!(p.select(&"accelerator".parse().unwrap()).unwrap().name, "Alveo");
    assert_eq!(p.select(&DeviceFilter::of_type(DeviceClass::Cpu)).unwrap().backend_id, "reference");
    assert_eq!(p.select(&"vendor=amd".parse().unwrap()).unwrap().name, "Radeon small");
    assert_eq!(p.select(&"gpu,version=2.5".parse().unwrap()).unwrap().name, "Arc twin");
    for _ in 0..10 {
        assert_eq!(p.select(&DeviceFilter::any()).unwrap(), p.select(&DeviceFilter::any()).unwrap());
    }
}

#[test]
fn no_match_lists_candidates() {
    let p = mixed_platform();
    match p.select(&"vendor=qualcomm".parse().unwrap()) {
        Err(Error::NoMatchingDevice { filter, candidates }) => {
            assert_eq!(filter, "vendor=qualcomm");
            for label in ["reference:0", "fake:0", "fake:3"] {
                assert!(candidates.contains(label), "{candidates}");
            }
        }
        other => panic!("unexpected {other:?}"),
    }
}

fn filter() -> impl Strategy<Value = DeviceFilter> {
    (
        prop::option::of(prop::sample::select(vec![DeviceClass::Any, DeviceClass::Cpu, DeviceClass::Gpu, DeviceClass::Accelerator])),
        prop::option::of(prop::sample::select(vec!["amd", "NVIDIA", "hetreco", "x"])),
        prop::option::of(prop::sample::select(vec!["big", "Alveo", "ref", "twin"])),
        prop::option::of(prop::sample::select(vec!["1.0", "1.2", "2.0", "9.9"])),
    )
        .prop_map(|(class, vendor, name, version)| {
            let mut f = class.map_or_else(DeviceFilter::any, DeviceFilter::of_type);
            if let Some(v) = vendor {
                f = f.vendor(v);
            }
            if let Some(n) = name {
                f = f.name(n);
            }
            if let Some(v) = version {
                f = f.min_version(v).unwrap();
            }
            f
        })
}

proptest! {
    #[test]
    fn adding_criteria_only_shrinks_candidates(base in filter(), extra in filter()) {
        let p = mixed_platform();
        let narrowed = DeviceFilter {
            device_type: base.device_type.or(extra.device_type),
            vendor_substring: base.vendor_substring.clone().or(extra.vendor_substring),
            name_substring: base.name_substring.clone().or(extra.name_substring),
            min_api_version: base.min_api_version.or(extra.min_api_version),
            source_kernels: base.source_kernels || extra.source_kernels,
        };
        let wide = p.candidates(&base);
        for d in p.candidates(&narrowed) {
            prop_assert!(wide.contains(&d));
        }
        match p.select(&base) {
            Ok(d) => prop_assert!(wide.contains(&d)),
            Err(Error::NoMatchingDevice { .. }) => prop_assert!(wide.is_empty()),
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
        // Display/parse round trip.
        prop_assert_eq!(p.candidates(&base.to_string().parse().unwrap()), wide);
    }
}
