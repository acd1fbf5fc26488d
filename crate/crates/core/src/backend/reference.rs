//! Built-in CPU backend. Needs no external runtime; kernels are native
//! routines registered under their kernel names.

use std::collections::HashMap;
use std::sync::Arc;

use super::{Backend, CompiledKernel, Kernel, StagingPath};
use crate::device::{DeviceDescriptor, DeviceType};
use crate::error::{Error, Result};
use crate::kernels::{ProgramSource, SourceBody};
use crate::ops::native;

pub const ID: &str = "reference";
const DEFAULT_MEMORY: u64 = 8 << 30;

#[derive(Debug)]
pub struct ReferenceBackend {
    memory_bytes: u64,
    intrinsics: HashMap<String, Arc<dyn Kernel>>,
}

impl Default for ReferenceBackend {
    fn default() -> Self {
        Self::with_memory(DEFAULT_MEMORY)
    }
}

impl ReferenceBackend {
    /// A reference device reporting `memory_bytes` of global memory; sessions
    /// refuse allocations beyond it.
    pub fn with_memory(memory_bytes: u64) -> Self {
        let intrinsics = native::intrinsics()
            .into_iter()
            .map(|k| (k.name().to_string(), k as Arc<dyn Kernel>))
            .collect();
        ReferenceBackend { memory_bytes: memory_bytes.max(1), intrinsics }
    }

    pub fn intrinsic_names(&self) -> Vec<&str> {
        let mut names: Vec<_> = self.intrinsics.keys().map(String::as_str).collect();
        names.sort_unstable();
        names
    }
}

impl Backend for ReferenceBackend {
    fn id(&self) -> &str {
        ID
    }

    fn devices(&self) -> Vec<DeviceDescriptor> {
        vec![DeviceDescriptor {
            backend_id: ID.into(),
            device_index: 0,
            device_type: DeviceType::Cpu,
            vendor: "hetreco".into(),
            name: format!("Reference CPU ({} threads)", rayon::current_num_threads()),
            api_version: "1.2".into(),
            global_memory_bytes: self.memory_bytes,
            base_alignment_bytes: 64,
            supports_source_kernels: false,
        }]
    }

    fn staging_path(&self) -> StagingPath {
        StagingPath::Mapped
    }

    /// Resolves each unit to the intrinsic of the same name. Source text is
    /// accepted only when an intrinsic with the unit's name exists.
    fn build(&self, _device: &DeviceDescriptor, sources: &[ProgramSource]) -> Result<Vec<CompiledKernel>> {
        sources
            .iter()
            .map(|src| match self.intrinsics.get(&src.unit_name) {
                Some(kernel) => Ok(CompiledKernel { unit_name: src.unit_name.clone(), kernel: Arc::clone(kernel) }),
                None => match src.body {
                    SourceBody::Text(_) => {
                        Err(Error::UnsupportedSource { backend: ID.into(), unit: src.unit_name.clone() })
                    }
                    SourceBody::Intrinsic => Err(Error::UnknownKernel(src.unit_name.clone())),
                },
            })
            .collect()
    }
}
