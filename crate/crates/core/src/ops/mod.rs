//! Built-in processes and the kernels behind them.
//!
//! | process              | kernel                 | parameter block            |
//! |----------------------|------------------------|----------------------------|
//! | [`Negate`]           | `negate`               | f64 `max_value`            |
//! | [`Fft2d`]            | `fft_radix2_pass`      | see [`fft::PassParams`]    |
//! | [`ComplexElementProd`] | `complex_element_prod` | u32 conjugate flag       |
//! | [`XImageSum`]        | `ximage_sum`           | empty                      |
//! | [`RssCombine`]       | `rss_combine`          | empty                      |
//! | [`MatrixAdd`]        | `matrix_add`           | empty                      |
//!
//! All blocks are little-endian. [`SensRecon`] and [`RssRecon`] are chains of
//! the above.

pub mod fft;
pub mod native;
pub mod phantom;

use crate::error::{Error, Result};
use crate::kernels::ProgramSource;
use crate::ndarray::{ArraySpec, Data, DataKind, ElementType};
use crate::process::{
    Algorithm, Bindings, Chain, ChainStage, LaunchStats, Process, ProcessInstance, ProcessParams, ProcessState,
};
use crate::session::{ComputeSession, DataHandle, Launch};

pub use fft::{Direction, FftPlan};
pub use phantom::{gen_phantom, Phantom, PhantomSpec};

pub mod kernel_names {
    pub const NEGATE: &str = "negate";
    pub const FFT_RADIX2_PASS: &str = "fft_radix2_pass";
    pub const COMPLEX_ELEMENT_PROD: &str = "complex_element_prod";
    pub const XIMAGE_SUM: &str = "ximage_sum";
    pub const RSS_COMBINE: &str = "rss_combine";
    pub const MATRIX_ADD: &str = "matrix_add";

    pub const ALL: [&str; 6] = [NEGATE, FFT_RADIX2_PASS, COMPLEX_ELEMENT_PROD, XIMAGE_SUM, RSS_COMBINE, MATRIX_ADD];
}

/// Source text of the built-in kernels, one unit per kernel.
pub const KERNEL_SOURCES: [(&str, &str); 6] = [
    (kernel_names::NEGATE, include_str!("../../kernels/negate.cl.src")),
    (kernel_names::FFT_RADIX2_PASS, include_str!("../../kernels/fft_radix2_pass.cl.src")),
    (kernel_names::COMPLEX_ELEMENT_PROD, include_str!("../../kernels/complex_element_prod.cl.src")),
    (kernel_names::XIMAGE_SUM, include_str!("../../kernels/ximage_sum.cl.src")),
    (kernel_names::RSS_COMBINE, include_str!("../../kernels/rss_combine.cl.src")),
    (kernel_names::MATRIX_ADD, include_str!("../../kernels/matrix_add.cl.src")),
];

/// The built-in bundle: source text for source-capable devices, intrinsic
/// references otherwise.
pub fn builtin_sources(source_capable: bool) -> Vec<ProgramSource> {
    KERNEL_SOURCES
        .iter()
        .map(|&(name, text)| {
            if source_capable {
                ProgramSource::text(name, text)
            } else {
                ProgramSource::intrinsic(name)
            }
        })
        .collect()
}

/// Parameter block of `complex_element_prod`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProdParams {
    pub conjugate: bool,
}

impl ProdParams {
    pub fn encode(self) -> Vec<u8> {
        u32::from(self.conjugate).to_le_bytes().to_vec()
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, String> {
        let word: [u8; 4] = bytes.try_into().map_err(|_| "complex_element_prod expects a 4-byte parameter block")?;
        Ok(ProdParams { conjugate: u32::from_le_bytes(word) != 0 })
    }
}

/// `[plane, coils, frames]` for a coil reduction from `[nx, ny, coils, frames?]`
/// to `[nx, ny, frames?]`.
pub fn reduction_shape(input: &[usize], output: &[usize]) -> Result<[usize; 3]> {
    if !(3..=4).contains(&input.len()) {
        return Err(Error::ShapeMismatch(format!("coil data must be [nx, ny, coils, frames], got {input:?}")));
    }
    let frames = input.get(3).copied().unwrap_or(1);
    let expected = [input[0], input[1], frames];
    let ok = output == expected || (frames == 1 && output == &expected[..2]);
    if !ok {
        return Err(Error::ShapeMismatch(format!("reduction of {input:?} needs output {expected:?}, got {output:?}")));
    }
    Ok([input[0] * input[1], input[2], frames])
}

fn single_spec(session: &ComputeSession, handle: DataHandle, what: &str) -> Result<ArraySpec> {
    let specs = session.specs(handle)?;
    match <[ArraySpec; 1]>::try_from(specs) {
        Ok([spec]) => Ok(spec),
        Err(specs) => Err(Error::ShapeMismatch(format!("{what} must hold one array, found {}", specs.len()))),
    }
}

fn require_type(spec: &ArraySpec, ty: ElementType, what: &str) -> Result<()> {
    if spec.element_type != ty {
        return Err(Error::UnsupportedElementType(format!("{what} is {:?}, expected {ty:?}", spec.element_type)));
    }
    Ok(())
}

fn require_same(session: &ComputeSession, handle: DataHandle, planned: &[ArraySpec], what: &str) -> Result<()> {
    let now = session.specs(handle)?;
    if now != planned {
        return Err(Error::ShapeMismatch(format!("{what} {handle} no longer matches the initialized shape")));
    }
    Ok(())
}

/// `out = max_value - in` over UINT8 or FLOAT32 arrays. May run in place.
#[derive(Debug, Default)]
pub struct Negate {
    max_value: f64,
    specs: Vec<ArraySpec>,
}

impl Negate {
    pub fn process() -> ProcessInstance<Negate> {
        ProcessInstance::new(Negate::default())
    }
}

impl Algorithm for Negate {
    fn name(&self) -> &str {
        kernel_names::NEGATE
    }

    fn allows_in_place(&self) -> bool {
        true
    }

    fn prepare(&mut self, session: &mut ComputeSession, io: &Bindings, params: &ProcessParams) -> Result<()> {
        let mut reader = params.reader();
        let max_value = reader.real("max_value")?;
        reader.finish()?;
        let specs = session.specs(io.input()?)?;
        if session.specs(io.output()?)? != specs {
            return Err(Error::ShapeMismatch("negate input and output shapes differ".into()));
        }
        let ty = specs[0].element_type;
        if !matches!(ty, ElementType::UInt8 | ElementType::Float32) || specs.iter().any(|s| s.element_type != ty) {
            return Err(Error::UnsupportedElementType(format!("negate handles UINT8 or FLOAT32 data, got {ty:?}")));
        }
        self.max_value = max_value.unwrap_or(if ty == ElementType::UInt8 { 255.0 } else { 1.0 });
        self.specs = specs;
        Ok(())
    }

    fn enqueue(&mut self, session: &mut ComputeSession, io: &Bindings) -> Result<()> {
        require_same(session, io.input()?, &self.specs, "input")?;
        require_same(session, io.output()?, &self.specs, "output")?;
        session.enqueue(Launch {
            kernel: kernel_names::NEGATE.into(),
            global_size: self.specs.iter().map(ArraySpec::element_count).sum(),
            input: io.input()?,
            output: io.output()?,
            aux: None,
            params: self.max_value.to_le_bytes().to_vec(),
        })
    }
}

/// Batched 2D FFT over `[nx, ny, batch..]` COMPLEX64 data. The plan is baked
/// in `init`; `launch` only enqueues the passes.
#[derive(Debug)]
pub struct Fft2d {
    direction: Direction,
    spec: Option<ArraySpec>,
    plan: Option<FftPlan>,
    passes: Vec<(Vec<u8>, usize)>,
}

impl Fft2d {
    pub fn process() -> ProcessInstance<Fft2d> {
        ProcessInstance::new(Fft2d { direction: Direction::Forward, spec: None, plan: None, passes: Vec::new() })
    }

    pub fn plan(&self) -> Option<&FftPlan> {
        self.plan.as_ref()
    }
}

impl Algorithm for Fft2d {
    fn name(&self) -> &str {
        "fft2d"
    }

    fn prepare(&mut self, session: &mut ComputeSession, io: &Bindings, params: &ProcessParams) -> Result<()> {
        let mut reader = params.reader();
        let direction = reader.text("direction")?.map(str::parse).transpose()?;
        reader.finish()?;
        let spec = single_spec(session, io.input()?, "FFT input")?;
        require_type(&spec, ElementType::Complex64, "FFT input")?;
        if spec.dims.len() < 2 {
            return Err(Error::ShapeMismatch(format!("FFT input must be at least 2D, got {:?}", spec.dims)));
        }
        if single_spec(session, io.output()?, "FFT output")? != spec {
            return Err(Error::ShapeMismatch("FFT input and output shapes differ".into()));
        }
        let plan = FftPlan::new(spec.dims[0], spec.dims[1])?;
        self.direction = direction.unwrap_or(Direction::Forward);
        let elements = spec.element_count();
        self.passes = plan.passes(self.direction).iter().map(|p| (p.encode(), p.global_size(elements))).collect();
        self.plan = Some(plan);
        self.spec = Some(spec);
        Ok(())
    }

    fn enqueue(&mut self, session: &mut ComputeSession, io: &Bindings) -> Result<()> {
        let spec = self.spec.clone().ok_or(Error::NotInitialized)?;
        let (input, output) = (io.input()?, io.output()?);
        require_same(session, input, std::slice::from_ref(&spec), "input")?;
        require_same(session, output, std::slice::from_ref(&spec), "output")?;
        for (i, (params, global_size)) in self.passes.iter().enumerate() {
            session.enqueue(Launch {
                kernel: kernel_names::FFT_RADIX2_PASS.into(),
                global_size: *global_size,
                input: if i == 0 { input } else { output },
                output,
                aux: None,
                params: params.clone(),
            })?;
        }
        Ok(())
    }
}

/// `out[x,y,i,f] = in[x,y,i,f] * s[x,y,i]`, or with `conj(s)` when the
/// `conjugate` parameter is set. `s` is the auxiliary input. May run in place.
#[derive(Debug, Default)]
pub struct ComplexElementProd {
    params: Option<ProdParams>,
    specs: Vec<ArraySpec>,
}

impl ComplexElementProd {
    pub fn process() -> ProcessInstance<ComplexElementProd> {
        ProcessInstance::new(ComplexElementProd::default())
    }
}

impl Algorithm for ComplexElementProd {
    fn name(&self) -> &str {
        kernel_names::COMPLEX_ELEMENT_PROD
    }

    fn accepts_aux(&self) -> bool {
        true
    }

    fn allows_in_place(&self) -> bool {
        true
    }

    fn prepare(&mut self, session: &mut ComputeSession, io: &Bindings, params: &ProcessParams) -> Result<()> {
        let mut reader = params.reader();
        let conjugate = reader.boolean("conjugate")?.unwrap_or(false);
        reader.finish()?;
        let x = single_spec(session, io.input()?, "image input")?;
        let s = single_spec(session, io.aux()?, "sensitivity maps")?;
        require_type(&x, ElementType::Complex64, "image input")?;
        require_type(&s, ElementType::Complex64, "sensitivity maps")?;
        if !(3..=4).contains(&x.dims.len()) || s.dims.len() != 3 || x.dims[..3] != s.dims[..] {
            return Err(Error::ShapeMismatch(format!(
                "images {:?} and maps {:?} must be [nx, ny, N, frames] and [nx, ny, N]",
                x.dims, s.dims
            )));
        }
        if single_spec(session, io.output()?, "output")? != x {
            return Err(Error::ShapeMismatch("product output must match the image input".into()));
        }
        self.params = Some(ProdParams { conjugate });
        self.specs = vec![x, s];
        Ok(())
    }

    fn enqueue(&mut self, session: &mut ComputeSession, io: &Bindings) -> Result<()> {
        let params = self.params.ok_or(Error::NotInitialized)?;
        require_same(session, io.input()?, &self.specs[..1], "input")?;
        require_same(session, io.output()?, &self.specs[..1], "output")?;
        require_same(session, io.aux()?, &self.specs[1..], "maps")?;
        session.enqueue(Launch {
            kernel: kernel_names::COMPLEX_ELEMENT_PROD.into(),
            global_size: self.specs[0].element_count(),
            input: io.input()?,
            output: io.output()?,
            aux: Some(io.aux()?),
            params: params.encode(),
        })
    }
}

/// Shared body of the two coil reductions.
#[derive(Debug)]
struct CoilReduction {
    kernel: &'static str,
    output_type: ElementType,
    specs: Vec<ArraySpec>,
    global_size: usize,
}

impl CoilReduction {
    fn prepare(&mut self, session: &ComputeSession, io: &Bindings, params: &ProcessParams) -> Result<()> {
        params.reader().finish()?;
        let input = single_spec(session, io.input()?, "coil images")?;
        require_type(&input, ElementType::Complex64, "coil images")?;
        let output = single_spec(session, io.output()?, "combined image")?;
        require_type(&output, self.output_type, "combined image")?;
        let [plane, _, frames] = reduction_shape(&input.dims, &output.dims)?;
        self.global_size = plane * frames;
        self.specs = vec![input, output];
        Ok(())
    }

    fn enqueue(&self, session: &mut ComputeSession, io: &Bindings) -> Result<()> {
        require_same(session, io.input()?, &self.specs[..1], "input")?;
        require_same(session, io.output()?, &self.specs[1..], "output")?;
        session.enqueue(Launch {
            kernel: self.kernel.into(),
            global_size: self.global_size,
            input: io.input()?,
            output: io.output()?,
            aux: None,
            params: Vec::new(),
        })
    }
}

/// `out[x,y,f] = sum_i in[x,y,i,f]`.
#[derive(Debug)]
pub struct XImageSum(CoilReduction);

impl XImageSum {
    pub fn process() -> ProcessInstance<XImageSum> {
        ProcessInstance::new(XImageSum(CoilReduction {
            kernel: kernel_names::XIMAGE_SUM,
            output_type: ElementType::Complex64,
            specs: Vec::new(),
            global_size: 0,
        }))
    }
}

impl Algorithm for XImageSum {
    fn name(&self) -> &str {
        kernel_names::XIMAGE_SUM
    }

    fn prepare(&mut self, session: &mut ComputeSession, io: &Bindings, params: &ProcessParams) -> Result<()> {
        self.0.prepare(session, io, params)
    }

    fn enqueue(&mut self, session: &mut ComputeSession, io: &Bindings) -> Result<()> {
        self.0.enqueue(session, io)
    }
}

/// `out[x,y,f] = sqrt(sum_i |in[x,y,i,f]|^2)`, FLOAT32 output.
#[derive(Debug)]
pub struct RssCombine(CoilReduction);

impl RssCombine {
    pub fn process() -> ProcessInstance<RssCombine> {
        ProcessInstance::new(RssCombine(CoilReduction {
            kernel: kernel_names::RSS_COMBINE,
            output_type: ElementType::Float32,
            specs: Vec::new(),
            global_size: 0,
        }))
    }
}

impl Algorithm for RssCombine {
    fn name(&self) -> &str {
        kernel_names::RSS_COMBINE
    }

    fn prepare(&mut self, session: &mut ComputeSession, io: &Bindings, params: &ProcessParams) -> Result<()> {
        self.0.prepare(session, io, params)
    }

    fn enqueue(&mut self, session: &mut ComputeSession, io: &Bindings) -> Result<()> {
        self.0.enqueue(session, io)
    }
}

/// Element-wise sum of the two FLOAT32 arrays of the input data set into the
/// single array of the output.
#[derive(Debug, Default)]
pub struct MatrixAdd {
    specs: Vec<ArraySpec>,
}

impl MatrixAdd {
    pub fn process() -> ProcessInstance<MatrixAdd> {
        ProcessInstance::new(MatrixAdd::default())
    }
}

impl Algorithm for MatrixAdd {
    fn name(&self) -> &str {
        kernel_names::MATRIX_ADD
    }

    fn prepare(&mut self, session: &mut ComputeSession, io: &Bindings, params: &ProcessParams) -> Result<()> {
        params.reader().finish()?;
        let input = session.specs(io.input()?)?;
        let output = single_spec(session, io.output()?, "sum")?;
        let [a, b] = &input[..] else {
            return Err(Error::ShapeMismatch(format!("matrix_add input must hold two arrays, found {}", input.len())));
        };
        for spec in [a, b, &output] {
            require_type(spec, ElementType::Float32, "matrix operand")?;
        }
        if a.dims != b.dims || a.dims != output.dims {
            return Err(Error::ShapeMismatch(format!("operands {:?}, {:?} and sum {:?} differ", a.dims, b.dims, output.dims)));
        }
        self.specs = vec![a.clone(), b.clone(), output];
        Ok(())
    }

    fn enqueue(&mut self, session: &mut ComputeSession, io: &Bindings) -> Result<()> {
        require_same(session, io.input()?, &self.specs[..2], "input")?;
        require_same(session, io.output()?, &self.specs[2..], "output")?;
        session.enqueue(Launch {
            kernel: kernel_names::MATRIX_ADD.into(),
            global_size: self.specs[2].element_count(),
            input: io.input()?,
            output: io.output()?,
            aux: None,
            params: Vec::new(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ReconMethod {
    Sensitivity,
    RootSumOfSquares,
}

/// Multi-coil reconstruction as a chain over one intermediate coil-image
/// buffer allocated on the device at `init`.
pub struct Recon {
    method: ReconMethod,
    io: Bindings,
    chain: Option<Chain>,
    intermediate: Option<DataHandle>,
    stats: LaunchStats,
}

/// `M = sum_i conj(S_i) * F^-1(Y_i)`: inverse FFT, conjugate product with the
/// maps (in place), coil sum. Input is k-space `[nx, ny, N, frames]`, the
/// auxiliary input the maps `[nx, ny, N]`, output COMPLEX64 `[nx, ny, frames]`.
pub struct SensRecon;

impl SensRecon {
    #[allow(clippy::new_ret_no_self)]
    pub fn new() -> Recon {
        Recon::new(ReconMethod::Sensitivity)
    }
}

/// Root sum of squares of the inverse-FFT coil images; FLOAT32 output.
pub struct RssRecon;

impl RssRecon {
    #[allow(clippy::new_ret_no_self)]
    pub fn new() -> Recon {
        Recon::new(ReconMethod::RootSumOfSquares)
    }
}

impl Recon {
    fn new(method: ReconMethod) -> Self {
        Recon { method, io: Bindings::default(), chain: None, intermediate: None, stats: LaunchStats::default() }
    }

    pub fn chain(&self) -> Option<&Chain> {
        self.chain.as_ref()
    }

    pub fn intermediate(&self) -> Option<DataHandle> {
        self.intermediate
    }

    /// Frees the intermediate buffer.
    pub fn release(&mut self, session: &mut ComputeSession) -> Result<()> {
        if let Some(h) = self.intermediate.take() {
            session.unregister_data(h)?;
        }
        Ok(())
    }

    fn build(&self, session: &mut ComputeSession, coil_images: DataHandle) -> Result<Chain> {
        let (input, output) = (self.io.input()?, self.io.output()?);
        let mut fft = Fft2d::process();
        fft.set_input(session, input)?;
        fft.set_output(session, coil_images)?;
        let mut stages = vec![ChainStage::new(fft, ProcessParams::new().with("direction", "inverse"))];
        match self.method {
            ReconMethod::Sensitivity => {
                let mut prod = ComplexElementProd::process();
                prod.set_input(session, coil_images)?;
                prod.set_aux_input(session, self.io.aux()?)?;
                prod.set_output(session, coil_images)?;
                let mut sum = XImageSum::process();
                sum.set_input(session, coil_images)?;
                sum.set_output(session, output)?;
                stages.push(ChainStage::new(prod, ProcessParams::new().with("conjugate", true)));
                stages.push(ChainStage::new(sum, ProcessParams::new()));
            }
            ReconMethod::RootSumOfSquares => {
                let mut rss = RssCombine::process();
                rss.set_input(session, coil_images)?;
                rss.set_output(session, output)?;
                stages.push(ChainStage::new(rss, ProcessParams::new()));
            }
        }
        Chain::new(stages)
    }
}

impl Process for Recon {
    fn name(&self) -> &str {
        match self.method {
            ReconMethod::Sensitivity => "sens_recon",
            ReconMethod::RootSumOfSquares => "rss_recon",
        }
    }

    fn bindings(&self) -> Bindings {
        self.io
    }

    fn set_input(&mut self, session: &ComputeSession, handle: DataHandle) -> Result<()> {
        self.rebind(session, handle, |io| &mut io.input)
    }

    fn set_output(&mut self, session: &ComputeSession, handle: DataHandle) -> Result<()> {
        self.rebind(session, handle, |io| &mut io.output)
    }

    fn set_aux_input(&mut self, session: &ComputeSession, handle: DataHandle) -> Result<()> {
        if self.method != ReconMethod::Sensitivity {
            return Err(Error::InvalidParams("rss_recon takes no auxiliary input".into()));
        }
        self.rebind(session, handle, |io| &mut io.aux)
    }

    fn init(&mut self, session: &mut ComputeSession, params: &ProcessParams) -> Result<()> {
        if self.chain.is_some() {
            return Err(Error::AlreadyInitialized);
        }
        params.reader().finish()?;
        let start = std::time::Instant::now();
        let kspace = single_spec(session, self.io.input()?, "k-space input")?;
        require_type(&kspace, ElementType::Complex64, "k-space input")?;
        if !(3..=4).contains(&kspace.dims.len()) {
            return Err(Error::ShapeMismatch(format!("k-space must be [nx, ny, coils, frames], got {:?}", kspace.dims)));
        }
        let coil_images = session.allocate(DataKind::XData, std::slice::from_ref(&kspace))?;
        let result = self.build(session, coil_images).and_then(|mut chain| {
            chain.init(session, &ProcessParams::new())?;
            Ok(chain)
        });
        match result {
            Ok(chain) => {
                self.chain = Some(chain);
                self.intermediate = Some(coil_images);
                self.stats.init_calls += 1;
                self.stats.init_seconds = start.elapsed().as_secs_f64();
                Ok(())
            }
            Err(e) => {
                session.unregister_data(coil_images)?;
                Err(e)
            }
        }
    }

    fn launch(&mut self, session: &mut ComputeSession) -> Result<()> {
        let chain = self.chain.as_mut().ok_or(Error::NotInitialized)?;
        chain.launch(session)?;
        let inner = chain.stats();
        self.stats.launches = inner.launches;
        self.stats.last_launch_seconds = inner.last_launch_seconds;
        self.stats.mean_launch_seconds = inner.mean_launch_seconds;
        self.stats.total_launch_seconds = inner.total_launch_seconds;
        Ok(())
    }

    fn state(&self) -> ProcessState {
        self.chain.as_ref().map_or(ProcessState::Created, |c| c.state())
    }

    fn stats(&self) -> &LaunchStats {
        &self.stats
    }
}

impl Recon {
    fn rebind(
        &mut self,
        session: &ComputeSession,
        handle: DataHandle,
        slot: impl Fn(&mut Bindings) -> &mut Option<DataHandle>,
    ) -> Result<()> {
        session.layout(handle)?;
        if self.chain.is_some() {
            return Err(Error::InvalidParams(format!("{} handles are fixed once initialized", self.name())));
        }
        *slot(&mut self.io) = Some(handle);
        Ok(())
    }
}

/// Registers `inputs`, allocates an output shaped `output`, runs `process`
/// once, fetches the output and releases everything.
pub fn run_once(
    session: &mut ComputeSession,
    process: &mut dyn Process,
    params: &ProcessParams,
    input: &Data,
    aux: Option<&Data>,
    output: (DataKind, &[ArraySpec]),
) -> Result<Data> {
    let h_in = session.register_data(input)?;
    let h_aux = aux.map(|a| session.register_data(a)).transpose()?;
    let h_out = session.allocate(output.0, output.1)?;
    let result = (|| {
        process.set_input(session, h_in)?;
        if let Some(h) = h_aux {
            process.set_aux_input(session, h)?;
        }
        process.set_output(session, h_out)?;
        process.init(session, params)?;
        process.launch(session)?;
        session.fetch_data(h_out)
    })();
    for h in [Some(h_in), h_aux, Some(h_out)].into_iter().flatten() {
        session.unregister_data(h)?;
    }
    result
}

fn one_array(data: &Data, what: &str) -> Result<ArraySpec> {
    match &data.arrays[..] {
        [a] => Ok(a.spec()),
        _ => Err(Error::ShapeMismatch(format!("{what} must hold exactly one array"))),
    }
}

fn coil_output_spec(kspace: &ArraySpec, ty: ElementType) -> Result<ArraySpec> {
    if !(3..=4).contains(&kspace.dims.len()) {
        return Err(Error::ShapeMismatch(format!("k-space must be [nx, ny, coils, frames], got {:?}", kspace.dims)));
    }
    let mut dims = vec![kspace.dims[0], kspace.dims[1]];
    dims.extend(kspace.dims.get(3));
    Ok(ArraySpec { element_type: ty, dims })
}

pub fn negate(session: &mut ComputeSession, data: &Data, max_value: Option<f64>) -> Result<Data> {
    let mut params = ProcessParams::new();
    if let Some(m) = max_value {
        params.set("max_value", m);
    }
    run_once(session, &mut Negate::process(), &params, data, None, (data.kind, &data.specs()))
}

pub fn fft2d(session: &mut ComputeSession, data: &Data, direction: Direction) -> Result<Data> {
    let dir = if direction == Direction::Forward { "forward" } else { "inverse" };
    let params = ProcessParams::new().with("direction", dir);
    run_once(session, &mut Fft2d::process(), &params, data, None, (data.kind, &data.specs()))
}

pub fn complex_element_prod(session: &mut ComputeSession, x: &Data, s: &Data, conjugate: bool) -> Result<Data> {
    let params = ProcessParams::new().with("conjugate", conjugate);
    run_once(session, &mut ComplexElementProd::process(), &params, x, Some(s), (x.kind, &x.specs()))
}

pub fn ximage_sum(session: &mut ComputeSession, x: &Data) -> Result<Data> {
    let out = coil_output_spec(&one_array(x, "coil images")?, ElementType::Complex64)?;
    run_once(session, &mut XImageSum::process(), &ProcessParams::new(), x, None, (DataKind::XData, &[out]))
}

pub fn rss_combine(session: &mut ComputeSession, x: &Data) -> Result<Data> {
    let out = coil_output_spec(&one_array(x, "coil images")?, ElementType::Float32)?;
    run_once(session, &mut RssCombine::process(), &ProcessParams::new(), x, None, (DataKind::XData, &[out]))
}

pub fn matrix_add(session: &mut ComputeSession, operands: &Data) -> Result<Data> {
    let first = operands.arrays.first().ok_or(Error::EmptyData)?.spec();
    run_once(session, &mut MatrixAdd::process(), &ProcessParams::new(), operands, None, (operands.kind, &[first]))
}

pub fn sens_recon(session: &mut ComputeSession, kspace: &Data, maps: &Data) -> Result<Data> {
    let out = coil_output_spec(&one_array(kspace, "k-space")?, ElementType::Complex64)?;
    let mut recon = SensRecon::new();
    let result = run_once(session, &mut recon, &ProcessParams::new(), kspace, Some(maps), (DataKind::XData, &[out]));
    recon.release(session)?;
    result
}

pub fn rss_recon(session: &mut ComputeSession, kspace: &Data) -> Result<Data> {
    let out = coil_output_spec(&one_array(kspace, "k-space")?, ElementType::Float32)?;
    let mut recon = RssRecon::new();
    let result = run_once(session, &mut recon, &ProcessParams::new(), kspace, None, (DataKind::XData, &[out]));
    recon.release(session)?;
    result
}
