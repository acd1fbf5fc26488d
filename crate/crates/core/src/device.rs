//! Device enumeration and one-call selection by declarative criteria.
//!
//! A [`Platform`] is a snapshot of the registered backends. The reference CPU
//! backend is always registered first, so enumeration never comes back empty.
//! Source-kernel backends follow in registration order.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use once_cell::sync::Lazy;
use serde::Serialize;

use crate::backend::{interp::InterpBackend, reference::ReferenceBackend, Backend};
use crate::error::{Error, Result};

/// Environment variable holding the default device filter for the CLI.
pub const DEVICE_ENV: &str = "HETRECO_DEVICE";
/// Environment variable listing optional backends to register (`interp`).
pub const BACKENDS_ENV: &str = "HETRECO_BACKENDS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DeviceType {
    Cpu,
    Gpu,
    Accelerator,
}

impl DeviceType {
    fn rank(self) -> u8 {
        match self {
            DeviceType::Gpu => 2,
            DeviceType::Accelerator => 1,
            DeviceType::Cpu => 0,
        }
    }
}

impl fmt::Display for DeviceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeviceType::Cpu => "CPU",
            DeviceType::Gpu => "GPU",
            DeviceType::Accelerator => "ACCELERATOR",
        })
    }
}

/// `(major, minor)` API version, ordered numerically.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ApiVersion {
    pub major: u32,
    pub minor: u32,
}

impl FromStr for ApiVersion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidFilter(format!("malformed version `{s}`, expected X.Y"));
        let (major, minor) = s.trim().split_once('.').ok_or_else(bad)?;
        Ok(ApiVersion {
            major: major.parse().map_err(|_| bad())?,
            minor: minor.parse().map_err(|_| bad())?,
        })
    }
}

impl fmt::Display for ApiVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.major, self.minor)
    }
}

/// Capability record of one compute device.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DeviceDescriptor {
    pub backend_id: String,
    pub device_index: usize,
    pub device_type: DeviceType,
    pub vendor: String,
    pub name: String,
    pub api_version: String,
    pub global_memory_bytes: u64,
    pub base_alignment_bytes: u64,
    pub supports_source_kernels: bool,
}

impl DeviceDescriptor {
    /// Parsed API version; descriptors with an unparsable version never satisfy
    /// a minimum-version filter.
    pub fn version(&self) -> Option<ApiVersion> {
        self.api_version.parse().ok()
    }

    /// Alignment used when packing data for this device: at least 256 bytes.
    pub fn data_alignment(&self) -> u64 {
        self.base_alignment_bytes.max(256)
    }

    pub fn label(&self) -> String {
        format!("{}:{}", self.backend_id, self.device_index)
    }
}

/// Requested device class; `Any` is the same as leaving it unset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum DeviceClass {
    #[default]
    Any,
    Cpu,
    Gpu,
    Accelerator,
}

impl DeviceClass {
    fn admits(self, ty: DeviceType) -> bool {
        matches!(
            (self, ty),
            (DeviceClass::Any, _)
                | (DeviceClass::Cpu, DeviceType::Cpu)
                | (DeviceClass::Gpu, DeviceType::Gpu)
                | (DeviceClass::Accelerator, DeviceType::Accelerator)
        )
    }
}

/// Declarative selection criteria. Absent fields match everything.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct DeviceFilter {
    pub device_type: Option<DeviceClass>,
    pub vendor_substring: Option<String>,
    pub name_substring: Option<String>,
    pub min_api_version: Option<ApiVersion>,
    /// Only devices that compile kernel source text at load time.
    pub source_kernels: bool,
}

impl DeviceFilter {
    pub fn any() -> Self {
        Self::default()
    }

    pub fn of_type(class: DeviceClass) -> Self {
        Self { device_type: Some(class), ..Self::default() }
    }

    pub fn vendor(mut self, s: impl Into<String>) -> Self {
        self.vendor_substring = Some(s.into());
        self
    }

    pub fn name(mut self, s: impl Into<String>) -> Self {
        self.name_substring = Some(s.into());
        self
    }

    pub fn source_kernels(mut self) -> Self {
        self.source_kernels = true;
        self
    }

    /// Rejects malformed version strings up front.
    pub fn min_version(mut self, version: &str) -> Result<Self> {
        self.min_api_version = Some(version.parse()?);
        Ok(self)
    }

    fn class(&self) -> DeviceClass {
        self.device_type.unwrap_or_default()
    }

    pub fn matches(&self, device: &DeviceDescriptor) -> bool {
        fn contains(hay: &str, needle: &Option<String>) -> bool {
            needle
                .as_ref()
                .is_none_or(|n| hay.to_lowercase().contains(&n.to_lowercase()))
        }
        self.class().admits(device.device_type)
            && contains(&device.vendor, &self.vendor_substring)
            && contains(&device.name, &self.name_substring)
            && self
                .min_api_version
                .is_none_or(|min| device.version().is_some_and(|v| v >= min))
            && (!self.source_kernels || device.supports_source_kernels)
    }
}

/// Parses the compact form used on the command line and in `HETRECO_DEVICE`:
/// comma-separated tokens `any|cpu|gpu|accelerator`, `vendor=..`, `name=..`,
/// `version=X.Y`, `source` (source-compiling devices only). The empty string
/// is the ANY filter.
impl FromStr for DeviceFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut filter = DeviceFilter::default();
        for token in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match token.split_once('=') {
                Some((key, value)) => match key.trim().to_lowercase().as_str() {
                    "vendor" => filter.vendor_substring = Some(value.trim().to_string()),
                    "name" => filter.name_substring = Some(value.trim().to_string()),
                    "version" => filter.min_api_version = Some(value.parse()?),
                    "type" => filter.device_type = Some(parse_class(value)?),
                    other => {
                        return Err(Error::InvalidFilter(format!("unknown filter key `{other}`")))
                    }
                },
                None if token.eq_ignore_ascii_case("source") => filter.source_kernels = true,
                None => filter.device_type = Some(parse_class(token)?),
            }
        }
        Ok(filter)
    }
}

fn parse_class(s: &str) -> Result<DeviceClass> {
    match s.trim().to_lowercase().as_str() {
        "any" => Ok(DeviceClass::Any),
        "cpu" => Ok(DeviceClass::Cpu),
        "gpu" => Ok(DeviceClass::Gpu),
        "accelerator" | "acc" => Ok(DeviceClass::Accelerator),
        other => Err(Error::InvalidFilter(format!("unknown device class `{other}`"))),
    }
}

impl fmt::Display for DeviceFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        match self.class() {
            DeviceClass::Any => {}
            DeviceClass::Cpu => parts.push("cpu".to_string()),
            DeviceClass::Gpu => parts.push("gpu".to_string()),
            DeviceClass::Accelerator => parts.push("accelerator".to_string()),
        }
        if let Some(v) = &self.vendor_substring {
            parts.push(format!("vendor={v}"));
        }
        if let Some(n) = &self.name_substring {
            parts.push(format!("name={n}"));
        }
        if let Some(v) = &self.min_api_version {
            parts.push(format!("version={v}"));
        }
        if self.source_kernels {
            parts.push("source".to_string());
        }
        if parts.is_empty() {
            f.write_str("any")
        } else {
            f.write_str(&parts.join(","))
        }
    }
}

/// Snapshot of registered backends and their devices.
#[derive(Clone)]
pub struct Platform {
    backends: Vec<Arc<dyn Backend>>,
}

impl fmt::Debug for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.backends.iter().map(|b| b.id().to_string())).finish()
    }
}

impl Default for Platform {
    fn default() -> Self {
        Self::new()
    }
}

impl Platform {
    /// Reference backend only.
    pub fn new() -> Self {
        Self::with_reference(Arc::new(ReferenceBackend::default()))
    }

    /// Uses a custom reference backend (e.g. with a memory cap).
    pub fn with_reference(reference: Arc<ReferenceBackend>) -> Self {
        Platform { backends: vec![reference] }
    }

    /// Appends an optional backend after the ones already registered.
    pub fn register(&mut self, backend: Arc<dyn Backend>) -> &mut Self {
        self.backends.push(backend);
        self
    }

    /// Builds a platform from a comma-separated backend list (`interp`).
    pub fn from_spec(spec: &str) -> Result<Self> {
        let mut platform = Platform::new();
        for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match name {
                "interp" => platform.register(Arc::new(InterpBackend::default())),
                other => return Err(Error::InvalidFilter(format!("unknown backend `{other}`"))),
            };
        }
        Ok(platform)
    }

    pub fn backends(&self) -> &[Arc<dyn Backend>] {
        &self.backends
    }

    pub fn backend(&self, id: &str) -> Option<&Arc<dyn Backend>> {
        self.backends.iter().find(|b| b.id() == id)
    }

    pub fn enumerate(&self) -> Vec<DeviceDescriptor> {
        self.backends.iter().flat_map(|b| b.devices()).collect()
    }

    /// Devices satisfying every present field of `filter`, in enumeration order.
    pub fn candidates(&self, filter: &DeviceFilter) -> Vec<DeviceDescriptor> {
        self.enumerate().into_iter().filter(|d| filter.matches(d)).collect()
    }

    /// Highest-ranked matching device: GPU > ACCELERATOR > CPU, then larger
    /// global memory, then enumeration order.
    pub fn select(&self, filter: &DeviceFilter) -> Result<DeviceDescriptor> {
        let all = self.enumerate();
        all.iter()
            .enumerate()
            .filter(|(_, d)| filter.matches(d))
            .min_by(|(ia, a), (ib, b)| {
                b.device_type
                    .rank()
                    .cmp(&a.device_type.rank())
                    .then(b.global_memory_bytes.cmp(&a.global_memory_bytes))
                    .then(ia.cmp(ib))
            })
            .map(|(_, d)| d.clone())
            .ok_or_else(|| Error::NoMatchingDevice {
                filter: filter.to_string(),
                candidates: all
                    .iter()
                    .map(|d| format!("[{} {} `{}` {} v{}]", d.label(), d.device_type, d.name, d.vendor, d.api_version))
                    .collect::<Vec<_>>()
                    .join(", "),
            })
    }
}

static DEFAULT_PLATFORM: Lazy<Platform> = Lazy::new(|| {
    let spec = std::env::var(BACKENDS_ENV).unwrap_or_default();
    Platform::from_spec(&spec).unwrap_or_default()
});

/// Process-wide platform snapshot: the reference backend plus whatever
/// `HETRECO_BACKENDS` names at first use.
pub fn default_platform() -> &'static Platform {
    &DEFAULT_PLATFORM
}

pub fn enumerate_devices() -> Vec<DeviceDescriptor> {
    default_platform().enumerate()
}

pub fn select_device(filter: &DeviceFilter) -> Result<DeviceDescriptor> {
    default_platform().select(filter)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_parse() {
        assert_eq!("1.2".parse::<ApiVersion>().unwrap(), ApiVersion { major: 1, minor: 2 });
        assert!("1".parse::<ApiVersion>().is_err());
        assert!("a.b".parse::<ApiVersion>().is_err());
        assert!(ApiVersion { major: 1, minor: 10 } > ApiVersion { major: 1, minor: 2 });
    }

    #[test]
    fn filter_strings() {
        let f: DeviceFilter = "gpu".parse().unwrap();
        assert_eq!(f.device_type, Some(DeviceClass::Gpu));
        let f: DeviceFilter = "vendor=amd".parse().unwrap();
        assert_eq!(f.vendor_substring.as_deref(), Some("amd"));
        let f: DeviceFilter = "cpu, name=Reference ,version=1.1".parse().unwrap();
        assert_eq!(f.to_string(), "cpu,name=Reference,version=1.1");
        assert_eq!("".parse::<DeviceFilter>().unwrap(), DeviceFilter::any());
        assert!("version=1".parse::<DeviceFilter>().is_err());
        assert!("tpu".parse::<DeviceFilter>().is_err());
        assert!(DeviceFilter::any().min_version("x").is_err());
    }

    #[test]
    fn reference_only_host() {
        let p = Platform::new();
        let devices = p.enumerate();
        assert_eq!(devices.len(), 1);
        assert_eq!(devices[0].device_type, DeviceType::Cpu);
        assert_eq!(p.enumerate(), devices);
        assert_eq!(p.select(&DeviceFilter::any()).unwrap(), devices[0]);
        let err = p.select(&DeviceFilter::of_type(DeviceClass::Gpu)).unwrap_err();
        match err {
            Error::NoMatchingDevice { filter, candidates } => {
                assert_eq!(filter, "gpu");
                assert!(candidates.contains("reference:0"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn case_insensitive_substrings() {
        let p = Platform::new();
        let d = &p.enumerate()[0];
        let upper = DeviceFilter::any().vendor(d.vendor.to_uppercase());
        assert!(upper.matches(d));
        assert!(!DeviceFilter::any().name("no-such-device").matches(d));
    }

    #[test]
    fn source_token_picks_interpreter() {
        let p = Platform::from_spec("interp").unwrap();
        assert_eq!(p.select(&DeviceFilter::any()).unwrap().backend_id, "reference");
        let f: DeviceFilter = "source".parse().unwrap();
        assert_eq!(f.to_string(), "source");
        assert_eq!(p.select(&f).unwrap().backend_id, "interp");
        assert!(Platform::new().select(&f).is_err());
        assert!(Platform::from_spec("cuda").is_err());
    }
}
