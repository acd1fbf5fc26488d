//! A compute session owns the selected device, its in-order queue, the
//! registry of device-resident data sets and all host/device transfers.
//!
//! Each registered [`Data`] lives in exactly one contiguous device buffer
//! laid out by [`pack`], next to a small buffer holding its serialized
//! layout header. Kernels receive both, so chaining processes over the same
//! handles never moves bytes across the host boundary.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::backend::{Backend, BufferView, DeviceBuffer, Kernel, KernelArgs, StagingPath};
use crate::device::{default_platform, DeviceDescriptor, DeviceFilter, Platform};
use crate::error::{Error, Result};
use crate::kernels::{KernelRegistry, ProgramSource};
use crate::ndarray::{
    pack, pack_specs, serialize_layout_header, ArraySpec, Data, DataKind, LayoutDescriptor, NDArray, Storage,
};

static NEXT_SESSION: AtomicU64 = AtomicU64::new(1);

/// Opaque reference to a data set registered in one session.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DataHandle {
    session: u64,
    id: u64,
}

impl fmt::Display for DataHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}.{}", self.session, self.id)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TransferCounters {
    pub host_to_device: u64,
    pub device_to_host: u64,
}

struct Resident {
    kind: DataKind,
    layout: LayoutDescriptor,
    data: DeviceBuffer,
    header: DeviceBuffer,
}

impl Resident {
    fn bytes(&self) -> u64 {
        (self.data.len() + self.header.len()) as u64
    }
}

/// One queued kernel invocation.
#[derive(Clone, Debug)]
pub struct Launch {
    pub kernel: String,
    pub global_size: usize,
    pub input: DataHandle,
    pub output: DataHandle,
    pub aux: Option<DataHandle>,
    pub params: Vec<u8>,
}

struct Queued {
    kernel: Arc<dyn Kernel>,
    launch: Launch,
}

pub struct ComputeSession {
    id: u64,
    device: DeviceDescriptor,
    backend: Arc<dyn Backend>,
    kernels: KernelRegistry,
    resident: HashMap<u64, Resident>,
    queue: VecDeque<Queued>,
    counters: TransferCounters,
    next_handle: u64,
    allocated_bytes: u64,
    completed_launches: u64,
}

impl fmt::Debug for ComputeSession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComputeSession")
            .field("id", &self.id)
            .field("device", &self.device.label())
            .field("resident", &self.resident.len())
            .field("queued", &self.queue.len())
            .field("counters", &self.counters)
            .finish()
    }
}

/// Opens a session on the process-wide platform.
pub fn create_session(filter: &DeviceFilter) -> Result<ComputeSession> {
    ComputeSession::new(default_platform(), filter)
}

impl ComputeSession {
    pub fn new(platform: &Platform, filter: &DeviceFilter) -> Result<Self> {
        let device = platform.select(filter)?;
        let backend = platform
            .backend(&device.backend_id)
            .cloned()
            .expect("selected device belongs to a registered backend");
        Ok(ComputeSession {
            id: NEXT_SESSION.fetch_add(1, Ordering::Relaxed),
            device,
            backend,
            kernels: KernelRegistry::default(),
            resident: HashMap::new(),
            queue: VecDeque::new(),
            counters: TransferCounters::default(),
            next_handle: 0,
            allocated_bytes: 0,
            completed_launches: 0,
        })
    }

    pub fn device(&self) -> &DeviceDescriptor {
        &self.device
    }

    pub fn counters(&self) -> TransferCounters {
        self.counters
    }

    pub fn staging_path(&self) -> StagingPath {
        self.backend.staging_path()
    }

    pub fn alignment(&self) -> u64 {
        self.device.data_alignment()
    }

    pub fn allocated_bytes(&self) -> u64 {
        self.allocated_bytes
    }

    pub fn completed_launches(&self) -> u64 {
        self.completed_launches
    }

    /// Compiles and indexes every unit in one call. All-or-nothing: on any
    /// failure the registry is left as it was.
    pub fn load_kernels(&mut self, sources: &[ProgramSource]) -> Result<Vec<String>> {
        let compiled = self.backend.build(&self.device, sources)?;
        self.kernels.merge(compiled)
    }

    /// Loads the kernels backing the built-in processes.
    pub fn load_builtin_kernels(&mut self) -> Result<Vec<String>> {
        let sources = crate::ops::builtin_sources(self.device.supports_source_kernels);
        self.load_kernels(&sources)
    }

    pub fn get_kernel(&self, name: &str) -> Result<Arc<dyn Kernel>> {
        self.kernels.get(name)
    }

    pub fn kernels(&self) -> &KernelRegistry {
        &self.kernels
    }

    fn reserve(&mut self, bytes: u64) -> Result<()> {
        let available = self.device.global_memory_bytes.saturating_sub(self.allocated_bytes);
        if bytes > available {
            return Err(Error::AllocationFailure { requested: bytes, available });
        }
        self.allocated_bytes += bytes;
        Ok(())
    }

    fn insert(&mut self, kind: DataKind, layout: LayoutDescriptor) -> Result<(DataHandle, &mut Resident)> {
        let header_bytes = serialize_layout_header(&layout);
        self.reserve(layout.total_bytes + header_bytes.len() as u64)?;
        let mut header = DeviceBuffer::zeroed(header_bytes.len());
        header.as_bytes_mut().copy_from_slice(&header_bytes);
        let resident = Resident { kind, data: DeviceBuffer::zeroed(layout.total_bytes as usize), header, layout };
        let handle = DataHandle { session: self.id, id: self.next_handle };
        self.next_handle += 1;
        Ok((handle, self.resident.entry(handle.id).or_insert(resident)))
    }

    /// Packs `data`, allocates its device buffer and header, and uploads both
    /// as one transfer.
    pub fn register_data(&mut self, data: &Data) -> Result<DataHandle> {
        let layout = pack(data, self.alignment())?;
        let (handle, resident) = self.insert(data.kind, layout)?;
        let dst = resident.data.as_bytes_mut();
        for (array, rec) in data.arrays.iter().zip(&resident.layout.records) {
            dst[rec.byte_range()].copy_from_slice(array.as_bytes());
        }
        self.counters.host_to_device += 1;
        Ok(handle)
    }

    /// Zero-filled device-side allocation. No host data is transferred.
    pub fn allocate(&mut self, kind: DataKind, specs: &[ArraySpec]) -> Result<DataHandle> {
        let layout = pack_specs(specs, self.alignment())?;
        Ok(self.insert(kind, layout)?.0)
    }

    fn resident(&self, handle: DataHandle) -> Result<&Resident> {
        if handle.session != self.id {
            return Err(Error::UnknownHandle(format!("{handle} belongs to another session")));
        }
        self.resident
            .get(&handle.id)
            .ok_or_else(|| Error::UnknownHandle(format!("{handle} is not registered")))
    }

    pub fn contains(&self, handle: DataHandle) -> bool {
        self.resident(handle).is_ok()
    }

    pub fn layout(&self, handle: DataHandle) -> Result<&LayoutDescriptor> {
        Ok(&self.resident(handle)?.layout)
    }

    /// Shapes and element types of a registered data set.
    pub fn specs(&self, handle: DataHandle) -> Result<Vec<ArraySpec>> {
        Ok(self
            .resident(handle)?
            .layout
            .records
            .iter()
            .map(|r| ArraySpec { element_type: r.element_type, dims: r.dims_usize() })
            .collect())
    }

    /// Drains the queue, then downloads the device buffer as one transfer.
    pub fn fetch_data(&mut self, handle: DataHandle) -> Result<Data> {
        self.resident(handle)?;
        self.synchronize()?;
        let resident = self.resident(handle)?;
        let bytes = resident.data.as_bytes();
        let arrays = resident
            .layout
            .records
            .iter()
            .map(|rec| {
                let storage = Storage::from_le_bytes(rec.element_type, &bytes[rec.byte_range()])?;
                NDArray::new(rec.dims_usize(), storage)
            })
            .collect::<Result<Vec<_>>>()?;
        let kind = resident.kind;
        self.counters.device_to_host += 1;
        Ok(Data { kind, arrays })
    }

    pub fn unregister_data(&mut self, handle: DataHandle) -> Result<()> {
        self.resident(handle)?;
        if self.queue.iter().any(|q| {
            let l = &q.launch;
            l.input == handle || l.output == handle || l.aux == Some(handle)
        }) {
            self.synchronize()?;
        }
        let resident = self.resident.remove(&handle.id).expect("checked above");
        self.allocated_bytes -= resident.bytes();
        Ok(())
    }

    /// Appends a kernel invocation to the in-order queue.
    pub fn enqueue(&mut self, launch: Launch) -> Result<()> {
        let kernel = self.kernels.get(&launch.kernel)?;
        self.resident(launch.input)?;
        self.resident(launch.output)?;
        if let Some(aux) = launch.aux {
            self.resident(aux)?;
            if aux == launch.output {
                return Err(Error::InvalidParams(format!(
                    "kernel `{}`: auxiliary input {aux} aliases the output",
                    launch.kernel
                )));
            }
        }
        self.queue.push_back(Queued { kernel, launch });
        Ok(())
    }

    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    /// Runs every queued launch in order. On failure the remaining queue is
    /// discarded and the error names the failing kernel.
    pub fn synchronize(&mut self) -> Result<()> {
        while let Some(Queued { kernel, launch }) = self.queue.pop_front() {
            if let Err(message) = self.execute(kernel.as_ref(), &launch) {
                self.queue.clear();
                return Err(Error::DeviceError { kernel: launch.kernel, message });
            }
            self.completed_launches += 1;
        }
        Ok(())
    }

    fn execute(&mut self, kernel: &dyn Kernel, launch: &Launch) -> std::result::Result<(), String> {
        let mut output = self
            .resident
            .remove(&launch.output.id)
            .ok_or_else(|| format!("output {} was released", launch.output))?;
        let view = |h: DataHandle| {
            self.resident
                .get(&h.id)
                .map(|r| BufferView { data: r.data.as_bytes(), header: r.header.as_bytes() })
                .ok_or_else(|| format!("buffer {h} was released"))
        };
        let result = (|| {
            let input = if launch.input == launch.output { None } else { Some(view(launch.input)?) };
            let aux = launch.aux.map(view).transpose()?;
            kernel.execute(KernelArgs {
                global_size: launch.global_size,
                input,
                output: output.data.as_bytes_mut(),
                output_header: output.header.as_bytes(),
                params: &launch.params,
                aux,
            })
        })();
        self.resident.insert(launch.output.id, output);
        result
    }
}
