//! Command implementations behind the `hetreco` binary.

pub mod bench;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use hetreco::backend::interp::InterpBackend;
use hetreco::device::{DeviceFilter, Platform, BACKENDS_ENV, DEVICE_ENV};
use hetreco::io::{read_image, read_mat, write_image, write_mat, MatVariable};
use hetreco::kernels::ProgramSource;
use hetreco::ndarray::{Data, ElementType, NDArray};
use hetreco::ops::phantom::{gen_phantom, PhantomSpec};
use hetreco::session::ComputeSession;

#[derive(Debug, Parser)]
#[command(name = "hetreco", version, about = "Device-agnostic image reconstruction toolkit")]
pub struct Cli {
    /// Optional backends to register next to the reference CPU backend
    /// (comma-separated; currently `interp`).
    #[arg(long, global = true, env = BACKENDS_ENV, default_value = "")]
    pub backends: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the devices of every registered backend.
    Devices {
        /// Emit JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Negate a PGM/PPM image on a device (255 - v).
    Negate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        device: DeviceArg,
    },
    /// Write a synthetic multi-coil cine data set as MAT files.
    GenPhantom {
        #[arg(long, default_value_t = 128)]
        nx: usize,
        #[arg(long, default_value_t = 128)]
        ny: usize,
        #[arg(long, default_value_t = 16)]
        frames: usize,
        #[arg(long, default_value_t = 8)]
        coils: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out_kdata: PathBuf,
        #[arg(long)]
        out_smaps: PathBuf,
        #[arg(long)]
        out_truth: PathBuf,
    },
    /// Reconstruct images from multi-coil k-space stored in a MAT file.
    Reconstruct {
        #[arg(long)]
        kdata: PathBuf,
        /// Sensitivity maps; required by the `sens` method.
        #[arg(long, required_if_eq("method", "sens"))]
        smaps: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Method,
        #[command(flatten)]
        device: DeviceArg,
        #[arg(long)]
        output: PathBuf,
    },
    /// Time an operation over several sizes and emit CSV.
    Bench {
        #[arg(long, value_enum)]
        op: bench::BenchOp,
        /// Comma-separated sizes: `NXxNY[xBATCH]` for fft, `NXxNYxFRAMESxCOILS`
        /// for rss, `N` or `ROWSxCOLS` for matadd.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<String>,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
        repeats: u32,
        #[command(flatten)]
        device: DeviceArg,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Zero every timing column so output depends only on inputs.
        #[arg(long)]
        deterministic_timing: bool,
        /// Seed of the random benchmark inputs.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Build kernel source units (`*.cl.src`) and list the kernels they define.
    ///
    /// Registers the interpreted backend if needed and, unless `--device` is
    /// given, selects a device that compiles source text.
    Kernels {
        #[arg(required = true)]
        sources: Vec<PathBuf>,
        #[arg(long, default_value = "source")]
        device: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Sensitivity-weighted coil combination.
    Sens,
    /// Root sum of squares.
    Rss,
}

#[derive(Debug, clap::Args)]
pub struct DeviceArg {
    /// Device filter, e.g. `gpu`, `cpu,vendor=amd`, `name=interp`, `source`.
    #[arg(long = "device", env = DEVICE_ENV, default_value = "")]
    pub filter: String,
}

impl DeviceArg {
    fn parse(&self) -> anyhow::Result<DeviceFilter> {
        Ok(self.filter.parse()?)
    }
}

fn open_session(platform: &Platform, filter: &DeviceFilter) -> anyhow::Result<ComputeSession> {
    let mut session = ComputeSession::new(platform, filter)?;
    session.load_builtin_kernels()?;
    Ok(session)
}

fn read_single_complex(path: &Path) -> anyhow::Result<NDArray> {
    let vars = read_mat(path).with_context(|| format!("reading {}", path.display()))?;
    let Some(var) = vars.into_iter().next() else {
        bail!("{} holds no variables", path.display());
    };
    if var.array.element_type() != ElementType::Complex64 {
        bail!("{}: variable `{}` is {:?}, expected complex single", path.display(), var.name, var.array.element_type());
    }
    Ok(var.array)
}

pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    let mut platform = Platform::from_spec(&cli.backends)?;
    match cli.command {
        Command::Devices { json } => {
            let devices = platform.enumerate();
            if json {
                serde_json::to_writer_pretty(&mut *out, &devices)?;
                writeln!(out)?;
            } else {
                writeln!(out, "{:<12} {:<6} {:<9} {:>10} {:>6} {:<6} NAME", "DEVICE", "TYPE", "VENDOR", "MEMORY_MB", "ALIGN", "SOURCE")?;
                for d in devices {
                    writeln!(
                        out,
                        "{:<12} {:<6} {:<9} {:>10} {:>6} {:<6} {}",
                        d.label(),
                        d.device_type.to_string(),
                        d.vendor,
                        d.global_memory_bytes >> 20,
                        d.data_alignment(),
                        if d.supports_source_kernels { "yes" } else { "no" },
                        d.name
                    )?;
                }
            }
        }
        Command::Negate { input, output, device } => {
            let image = read_image(&input).with_context(|| format!("reading {}", input.display()))?;
            let mut session = open_session(&platform, &device.parse()?)?;
            let negated = hetreco::ops::negate(&mut session, &Data::xdata(image), None)?;
            write_image(&output, &negated.arrays[0]).with_context(|| format!("writing {}", output.display()))?;
            writeln!(out, "negated {} -> {} on {}", input.display(), output.display(), session.device().label())?;
        }
        Command::GenPhantom { nx, ny, frames, coils, seed, out_kdata, out_smaps, out_truth } => {
            let p = gen_phantom(&PhantomSpec { nx, ny, frames, coils, seed })?;
            let [k] = <[NDArray; 1]>::try_from(p.kspace.arrays).expect("one array");
            let [s] = <[NDArray; 1]>::try_from(p.maps.arrays).expect("one array");
            let [t] = <[NDArray; 1]>::try_from(p.truth.arrays).expect("one array");
            for (path, name, array) in [(&out_kdata, "kdata", k), (&out_smaps, "smaps", s), (&out_truth, "truth", t)] {
                write_mat(path, &[MatVariable::new(name, array)]).with_context(|| format!("writing {}", path.display()))?;
            }
            writeln!(out, "phantom {nx}x{ny}, {frames} frames, {coils} coils, seed {seed}")?;
        }
        Command::Reconstruct { kdata, smaps, method, device, output } => {
            let k = Data::kdata(read_single_complex(&kdata)?);
            let mut session = open_session(&platform, &device.parse()?)?;
            let image = match method {
                Method::Sens => {
                    let smaps = smaps.context("--smaps is required by the sens method")?;
                    let s = Data::xdata(read_single_complex(&smaps)?);
                    hetreco::ops::sens_recon(&mut session, &k, &s)?
                }
                Method::Rss => hetreco::ops::rss_recon(&mut session, &k)?,
            };
            let [image] = <[NDArray; 1]>::try_from(image.arrays).expect("one array");
            write_mat(&output, &[MatVariable::new("recon", image)]).with_context(|| format!("writing {}", output.display()))?;
            writeln!(out, "reconstructed {} -> {} on {}", kdata.display(), output.display(), session.device().label())?;
        }
        Command::Bench { op, sizes, repeats, device, csv, deterministic_timing, seed } => {
            let mut session = open_session(&platform, &device.parse()?)?;
            let options = bench::BenchOptions { repeats, deterministic_timing, seed };
            let records = bench::run(&mut session, op, &sizes, &options)?;
            match csv {
                Some(path) => {
                    let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    bench::write_csv(file, &records)?;
                }
                None => bench::write_csv(&mut *out, &records)?,
            }
        }
        Command::Kernels { sources, device } => {
            if !platform.enumerate().iter().any(|d| d.supports_source_kernels) {
                platform.register(Arc::new(InterpBackend::default()));
            }
            let units = sources.iter().map(ProgramSource::from_path).collect::<Result<Vec<_>, _>>()?;
            let mut session = ComputeSession::new(&platform, &device.parse()?)?;
            session.load_kernels(&units)?;
            writeln!(out, "built {} unit(s) on {}", units.len(), session.device().label())?;
            for name in session.kernels().names() {
                writeln!(out, "  {name}")?;
            }
        }
    }
    Ok(())
}
