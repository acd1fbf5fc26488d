//! Optional backend that builds kernels from source text at load time and
//! runs them with an interpreter. It plays the role of a device that only
//! understands source kernels: compile failures surface the build log, and
//! its results can be checked against the native routines.
//!
//! The language is small: `kernel NAME { ... }` blocks holding `let`,
//! assignment, `if`/`else`, `for i in a..b`, `return` and `fail "msg"`.
//! All values are f64. Buffers are selected with `IN`, `OUT` and `AUX`;
//! `hdr(buf, word)` reads a layout-header word, `ld_f32`/`ld_u8` and
//! `st_f32`/`st_u8` address buffers by byte offset, `par_u32`/`par_f32`/
//! `par_f64` read the parameter block, and `gid()` is the work-item index.

mod compile;
mod exec;

use std::sync::Arc;

use super::{Backend, CompiledKernel, Kernel, KernelArgs, StagingPath};
use crate::device::{DeviceDescriptor, DeviceType};
use crate::error::{Error, Result};
use crate::kernels::{BuildDiagnostic, ProgramSource, SourceBody};

pub const ID: &str = "interp";
const DEFAULT_MEMORY: u64 = 1 << 30;

#[derive(Debug)]
pub struct InterpBackend {
    memory_bytes: u64,
}

impl Default for InterpBackend {
    fn default() -> Self {
        InterpBackend { memory_bytes: DEFAULT_MEMORY }
    }
}

impl InterpBackend {
    pub fn with_memory(memory_bytes: u64) -> Self {
        InterpBackend { memory_bytes: memory_bytes.max(1) }
    }
}

#[derive(Debug)]
struct InterpKernel(compile::KernelDef);

impl Kernel for InterpKernel {
    fn name(&self) -> &str {
        &self.0.name
    }

    fn execute(&self, args: KernelArgs<'_>) -> std::result::Result<(), String> {
        exec::run(&self.0, args)
    }
}

impl Backend for InterpBackend {
    fn id(&self) -> &str {
        ID
    }

    fn devices(&self) -> Vec<DeviceDescriptor> {
        vec![DeviceDescriptor {
            backend_id: ID.into(),
            device_index: 0,
            device_type: DeviceType::Cpu,
            vendor: "hetreco".into(),
            name: "Interpreted source-kernel device".into(),
            api_version: "1.2".into(),
            global_memory_bytes: self.memory_bytes,
            base_alignment_bytes: 128,
            supports_source_kernels: true,
        }]
    }

    fn staging_path(&self) -> StagingPath {
        StagingPath::Copied
    }

    fn build(&self, _device: &DeviceDescriptor, sources: &[ProgramSource]) -> Result<Vec<CompiledKernel>> {
        let mut kernels = Vec::new();
        let mut diagnostics = Vec::new();
        for src in sources {
            let SourceBody::Text(text) = &src.body else {
                return Err(Error::UnknownKernel(src.unit_name.clone()));
            };
            match compile::compile_unit(text) {
                Ok(defs) => kernels.extend(defs.into_iter().map(|def| CompiledKernel {
                    unit_name: src.unit_name.clone(),
                    kernel: Arc::new(InterpKernel(def)),
                })),
                Err(e) => diagnostics.push(BuildDiagnostic {
                    unit_name: src.unit_name.clone(),
                    log: format!("{}:{}: error: {}\n1 error generated.", src.unit_name, e.pos, e.message),
                }),
            }
        }
        if diagnostics.is_empty() {
            Ok(kernels)
        } else {
            Err(Error::CompileError(diagnostics))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(units: &[(&str, &str)]) -> Result<Vec<CompiledKernel>> {
        let backend = InterpBackend::default();
        let device = backend.devices().remove(0);
        let sources: Vec<_> = units.iter().map(|(n, t)| ProgramSource::text(*n, *t)).collect();
        backend.build(&device, &sources)
    }

    #[test]
    fn build_log_names_unit_and_position() {
        let Err(Error::CompileError(diags)) = build(&[("good", "kernel a { }"), ("bad", "kernel b {\n x = 1; }")])
        else {
            panic!("expected a compile error");
        };
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].unit_name, "bad");
        assert!(diags[0].log.starts_with("bad:2:2: error: assignment to undeclared variable `x`"), "{}", diags[0].log);
    }

    #[test]
    fn runs_over_global_range() {
        let k = build(&[("fill", "kernel fill { st_f32(OUT, 4 * gid(), gid() * par_f32(0)); }")]).unwrap();
        let mut out = vec![0u8; 16];
        let params = 2.5f32.to_le_bytes();
        k[0].kernel
            .execute(KernelArgs { global_size: 4, input: None, output: &mut out, output_header: &[], params: &params, aux: None })
            .unwrap();
        let values: Vec<f32> = out.chunks(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        assert_eq!(values, [0.0, 2.5, 5.0, 7.5]);
    }

    #[test]
    fn out_of_bounds_store_is_a_device_error() {
        let k = build(&[("oob", "kernel oob { st_u8(OUT, gid(), 1); }")]).unwrap();
        let mut out = vec![0u8; 2];
        let err = k[0].kernel
            .execute(KernelArgs { global_size: 3, input: None, output: &mut out, output_header: &[], params: &[], aux: None })
            .unwrap_err();
        assert!(err.contains("work item 2"), "{err}");
    }
}
