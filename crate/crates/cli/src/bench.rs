//! Repeated-launch timing. Each size runs `init` once and `launch` the
//! requested number of times; launch times exclude init by construction.

use std::io::Write;
use std::time::Instant;

use anyhow::{bail, ensure, Context};
use clap::ValueEnum;
use num_complex::Complex32;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use hetreco::ndarray::{ArraySpec, Data, DataKind, ElementType, NDArray};
use hetreco::ops::{Fft2d, MatrixAdd, RssRecon};
use hetreco::process::{Process, ProcessParams};
use hetreco::session::ComputeSession;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchOp {
    /// Forward 2D FFT of COMPLEX64 data.
    Fft,
    /// Root-sum-of-squares reconstruction (inverse FFT + coil combine).
    Rss,
    /// FLOAT32 matrix addition, compared against a single-thread host loop.
    Matadd,
}

impl BenchOp {
    fn name(self) -> &'static str {
        match self {
            BenchOp::Fft => "fft",
            BenchOp::Rss => "rss",
            BenchOp::Matadd => "matadd",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRecord {
    pub op: String,
    pub device: String,
    pub size: String,
    pub repeats: u32,
    pub init_s: f64,
    pub mean_s: f64,
    pub stddev_s: f64,
    /// Baseline mean over device mean; only for ops with a host baseline.
    pub speedup: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct BenchOptions {
    pub repeats: u32,
    pub deterministic_timing: bool,
    pub seed: u64,
}

pub fn parse_size(s: &str) -> anyhow::Result<Vec<usize>> {
    let dims = s
        .split(['x', 'X'])
        .map(|d| d.trim().parse::<usize>().ok().filter(|&d| d > 0))
        .collect::<Option<Vec<_>>>()
        .with_context(|| format!("bad size `{s}`"))?;
    ensure!(!dims.is_empty(), "bad size `{s}`");
    Ok(dims)
}

/// Mean and sample standard deviation.
pub fn mean_stddev(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Inits `process` and launches it `repeats` times; returns init seconds and
/// per-launch seconds.
fn time_process(
    session: &mut ComputeSession,
    process: &mut dyn Process,
    params: &ProcessParams,
    repeats: u32,
) -> anyhow::Result<(f64, Vec<f64>)> {
    process.init(session, params)?;
    let mut samples = Vec::with_capacity(repeats as usize);
    for _ in 0..repeats {
        process.launch(session)?;
        samples.push(process.stats().last_launch_seconds);
    }
    let stats = process.stats();
    ensure!(stats.init_calls == 1 && stats.launches == u64::from(repeats), "process statistics out of step");
    Ok((stats.init_seconds, samples))
}

fn random_complex(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex32> {
    (0..n).map(|_| Complex32::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

pub fn run(
    session: &mut ComputeSession,
    op: BenchOp,
    sizes: &[String],
    options: &BenchOptions,
) -> anyhow::Result<Vec<BenchRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut records = Vec::new();
    for size in sizes {
        let dims = parse_size(size)?;
        let (init_s, samples, baseline) = match op {
            BenchOp::Fft => bench_fft(session, &mut rng, &dims, options.repeats)?,
            BenchOp::Rss => bench_rss(session, &mut rng, &dims, options.repeats)?,
            BenchOp::Matadd => bench_matadd(session, &mut rng, &dims, options.repeats)?,
        };
        let (mean_s, stddev_s) = mean_stddev(&samples);
        let speedup = baseline.map(|b| b / mean_s);
        let mut record = BenchRecord {
            op: op.name().into(),
            device: session.device().label(),
            size: dims.iter().map(usize::to_string).collect::<Vec<_>>().join("x"),
            repeats: options.repeats,
            init_s,
            mean_s,
            stddev_s,
            speedup,
        };
        if options.deterministic_timing {
            record.init_s = 0.0;
            record.mean_s = 0.0;
            record.stddev_s = 0.0;
            record.speedup = record.speedup.map(|_| 0.0);
        }
        records.push(record);
    }
    Ok(records)
}

type Timing = (f64, Vec<f64>, Option<f64>);

fn bench_fft(session: &mut ComputeSession, rng: &mut ChaCha8Rng, dims: &[usize], repeats: u32) -> anyhow::Result<Timing> {
    ensure!((2..=8).contains(&dims.len()), "fft sizes are NXxNY[xBATCH..]");
    let n = dims.iter().product();
    let data = Data::xdata(NDArray::from_c32(dims, random_complex(rng, n))?);
    let input = session.register_data(&data)?;
    let output = session.allocate(DataKind::XData, &data.specs())?;
    let mut fft = Fft2d::process();
    fft.set_input(session, input)?;
    fft.set_output(session, output)?;
    let (init, samples) = time_process(session, &mut fft, &ProcessParams::new().with("direction", "forward"), repeats)?;
    session.unregister_data(input)?;
    session.unregister_data(output)?;
    Ok((init, samples, None))
}

fn bench_rss(session: &mut ComputeSession, rng: &mut ChaCha8Rng, dims: &[usize], repeats: u32) -> anyhow::Result<Timing> {
    let &[nx, ny, frames, coils] = dims else {
        bail!("rss sizes are NXxNYxFRAMESxCOILS");
    };
    let kspace = Data::kdata(NDArray::from_c32(&[nx, ny, coils, frames], random_complex(rng, nx * ny * coils * frames))?);
    let input = session.register_data(&kspace)?;
    let output = session.allocate(DataKind::XData, &[ArraySpec::new(ElementType::Float32, &[nx, ny, frames])])?;
    let mut recon = RssRecon::new();
    recon.set_input(session, input)?;
    recon.set_output(session, output)?;
    let timing = time_process(session, &mut recon, &ProcessParams::new(), repeats);
    recon.release(session)?;
    session.unregister_data(input)?;
    session.unregister_data(output)?;
    let (init, samples) = timing?;
    Ok((init, samples, None))
}

fn bench_matadd(session: &mut ComputeSession, rng: &mut ChaCha8Rng, dims: &[usize], repeats: u32) -> anyhow::Result<Timing> {
    let dims = match dims {
        &[n] => vec![n, n],
        other => other.to_vec(),
    };
    let n: usize = dims.iter().product();
    let a: Vec<f32> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b: Vec<f32> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let operands = Data::new(DataKind::Generic, vec![NDArray::from_f32(&dims, a.clone())?, NDArray::from_f32(&dims, b.clone())?]);
    let input = session.register_data(&operands)?;
    let output = session.allocate(DataKind::Generic, &[ArraySpec::new(ElementType::Float32, &dims)])?;
    let mut add = MatrixAdd::process();
    add.set_input(session, input)?;
    add.set_output(session, output)?;
    let (init, samples) = time_process(session, &mut add, &ProcessParams::new(), repeats)?;
    let device_sum = session.fetch_data(output)?;
    session.unregister_data(input)?;
    session.unregister_data(output)?;

    let (baseline_sum, baseline_samples) = host_matadd(&a, &b, repeats);
    let device_sum = device_sum.arrays[0].as_f32().context("matrix sum is not FLOAT32")?;
    let identical = device_sum.iter().zip(&baseline_sum).all(|(x, y)| x.to_bits() == y.to_bits());
    ensure!(identical, "device matrix sum differs from the single-thread baseline");
    Ok((init, samples, Some(mean_stddev(&baseline_samples).0)))
}

/// Single-thread host loop used as the speedup baseline.
pub fn host_matadd(a: &[f32], b: &[f32], repeats: u32) -> (Vec<f32>, Vec<f64>) {
    let mut c = vec![0.0f32; a.len()];
    let mut samples = Vec::with_capacity(repeats as usize);
    for _ in 0..repeats {
        let start = Instant::now();
        for ((c, &x), &y) in c.iter_mut().zip(a).zip(b) {
            *c = x + y;
        }
        std::hint::black_box(&mut c);
        samples.push(start.elapsed().as_secs_f64());
    }
    (c, samples)
}

pub fn write_csv(out: impl Write, records: &[BenchRecord]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(["op", "device", "size", "repeats", "init_s", "mean_s", "stddev_s", "speedup"])?;
    }
    w.flush()?;
    Ok(())
}
