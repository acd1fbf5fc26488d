//! The contract every execution substrate implements: describe devices,
//! build kernels from program sources, and run a kernel over a global index
//! space with the fixed five-argument convention.
//!
//! Device memory is owned by the session (see [`DeviceBuffer`]); a backend
//! only sees borrowed byte slices at execution time.

pub mod interp;
pub mod reference;

use std::fmt;
use std::sync::Arc;

use bytemuck::{Pod, Zeroable};

use crate::device::DeviceDescriptor;
use crate::error::Result;
use crate::kernels::ProgramSource;

/// How host data reaches the device allocation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StagingPath {
    /// Host writes land directly in device-visible memory.
    Mapped,
    /// Host writes go through an intermediate staging copy.
    Copied,
}

/// A packed data buffer plus its serialized layout header.
#[derive(Clone, Copy)]
pub struct BufferView<'a> {
    pub data: &'a [u8],
    pub header: &'a [u8],
}

/// Arguments of one kernel invocation.
///
/// Slot order is fixed for every kernel: input data, input header, output
/// data, output header, parameter block. Kernels that take a second operand
/// receive it in `aux` (slots 5 and 6).
pub struct KernelArgs<'a> {
    pub global_size: usize,
    /// `None` when input and output are the same buffer; read from `output`.
    pub input: Option<BufferView<'a>>,
    pub output: &'a mut [u8],
    pub output_header: &'a [u8],
    pub params: &'a [u8],
    pub aux: Option<BufferView<'a>>,
}

impl KernelArgs<'_> {
    pub fn input_header(&self) -> &[u8] {
        self.input.map_or(self.output_header, |v| v.header)
    }
}

pub trait Kernel: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// Runs work items `0..global_size`. Errors carry a backend diagnostic.
    fn execute(&self, args: KernelArgs<'_>) -> std::result::Result<(), String>;
}

/// A kernel produced by [`Backend::build`], tagged with the unit that defined it.
#[derive(Clone, Debug)]
pub struct CompiledKernel {
    pub unit_name: String,
    pub kernel: Arc<dyn Kernel>,
}

pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    fn devices(&self) -> Vec<DeviceDescriptor>;

    fn staging_path(&self) -> StagingPath;

    /// Builds every unit for `device`. Either all units build or nothing is returned.
    fn build(&self, device: &DeviceDescriptor, sources: &[ProgramSource]) -> Result<Vec<CompiledKernel>>;
}

pub const BLOCK_BYTES: usize = 256;

#[derive(Clone, Copy, Pod, Zeroable)]
#[repr(C, align(256))]
struct Block([u8; BLOCK_BYTES]);

/// Zero-initialized device allocation whose base address is 256-byte aligned,
/// so every packed array starts on an aligned address and can be viewed as
/// typed elements without copying.
pub struct DeviceBuffer {
    blocks: Vec<Block>,
    len: usize,
}

impl DeviceBuffer {
    pub fn zeroed(len: usize) -> Self {
        DeviceBuffer { blocks: vec![Block::zeroed(); len.div_ceil(BLOCK_BYTES)], len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &bytemuck::cast_slice(&self.blocks)[..self.len]
    }

    pub fn as_bytes_mut(&mut self) -> &mut [u8] {
        &mut bytemuck::cast_slice_mut(&mut self.blocks)[..self.len]
    }
}

impl fmt::Debug for DeviceBuffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DeviceBuffer").field("len", &self.len).finish()
    }
}
