//! The process front-end: bind input and output handles, initialize once
//! with parameters, then launch as many times as needed.
//!
//! Concrete algorithms implement [`Algorithm`]; [`ProcessInstance`] wraps one
//! with the state machine, handle bookkeeping and launch timing. [`Chain`]
//! runs several processes back to back over shared handles.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::session::{ComputeSession, DataHandle};

#[derive(Clone, Debug, PartialEq)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Bool(bool),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Bool(v) => write!(f, "{v}"),
            ParamValue::Text(v) => write!(f, "{v:?}"),
        }
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Real(v)
    }
}

impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Bool(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_string())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProcessParams(BTreeMap<String, ParamValue>);

impl ProcessParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<ParamValue>) -> Self {
        self.0.insert(key.into(), value.into());
        self
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<ParamValue>) {
        self.0.insert(key.into(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&ParamValue> {
        self.0.get(key)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Starts validation; every key must be consumed before [`ParamReader::finish`].
    pub fn reader(&self) -> ParamReader<'_> {
        ParamReader { params: self, seen: Vec::new() }
    }
}

pub struct ParamReader<'a> {
    params: &'a ProcessParams,
    seen: Vec<&'a str>,
}

impl<'a> ParamReader<'a> {
    fn take(&mut self, key: &'a str) -> Option<&'a ParamValue> {
        self.seen.push(key);
        self.params.get(key)
    }

    fn wrong(key: &str, want: &str, got: &ParamValue) -> Error {
        Error::InvalidParams(format!("`{key}` must be {want}, got {got}"))
    }

    pub fn real(&mut self, key: &'a str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(ParamValue::Real(v)) => Ok(Some(*v)),
            Some(ParamValue::Int(v)) => Ok(Some(*v as f64)),
            Some(other) => Err(Self::wrong(key, "a number", other)),
        }
    }

    pub fn int(&mut self, key: &'a str) -> Result<Option<i64>> {
        match self.take(key) {
            None => Ok(None),
            Some(ParamValue::Int(v)) => Ok(Some(*v)),
            Some(other) => Err(Self::wrong(key, "an integer", other)),
        }
    }

    pub fn boolean(&mut self, key: &'a str) -> Result<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some(ParamValue::Bool(v)) => Ok(Some(*v)),
            Some(other) => Err(Self::wrong(key, "a boolean", other)),
        }
    }

    pub fn text(&mut self, key: &'a str) -> Result<Option<&'a str>> {
        match self.take(key) {
            None => Ok(None),
            Some(ParamValue::Text(v)) => Ok(Some(v)),
            Some(other) => Err(Self::wrong(key, "text", other)),
        }
    }

    /// Fails on any key nobody asked for.
    pub fn finish(self) -> Result<()> {
        let unknown: Vec<_> = self.params.0.keys().filter(|k| !self.seen.contains(&k.as_str())).cloned().collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("unknown parameter(s): {}", unknown.join(", "))))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ProcessState {
    Created,
    Initialized,
    Launched,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LaunchStats {
    pub launches: u64,
    pub init_calls: u64,
    pub init_seconds: f64,
    pub last_launch_seconds: f64,
    pub mean_launch_seconds: f64,
    pub total_launch_seconds: f64,
}

impl LaunchStats {
    fn record_init(&mut self, seconds: f64) {
        self.init_calls += 1;
        self.init_seconds = seconds;
    }

    fn record_launch(&mut self, seconds: f64) {
        self.launches += 1;
        self.last_launch_seconds = seconds;
        self.total_launch_seconds += seconds;
        self.mean_launch_seconds = self.total_launch_seconds / self.launches as f64;
    }
}

/// Handles a process reads from and writes to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Bindings {
    pub input: Option<DataHandle>,
    pub output: Option<DataHandle>,
    pub aux: Option<DataHandle>,
}

impl Bindings {
    pub fn input(&self) -> Result<DataHandle> {
        self.input.ok_or_else(|| Error::InvalidParams("input handle not set".into()))
    }

    pub fn output(&self) -> Result<DataHandle> {
        self.output.ok_or_else(|| Error::InvalidParams("output handle not set".into()))
    }

    pub fn aux(&self) -> Result<DataHandle> {
        self.aux.ok_or_else(|| Error::InvalidParams("auxiliary input handle not set".into()))
    }
}

pub trait Process {
    fn name(&self) -> &str;

    fn bindings(&self) -> Bindings;

    fn set_input(&mut self, session: &ComputeSession, handle: DataHandle) -> Result<()>;

    fn set_output(&mut self, session: &ComputeSession, handle: DataHandle) -> Result<()>;

    /// Second operand, for processes that take one.
    fn set_aux_input(&mut self, session: &ComputeSession, handle: DataHandle) -> Result<()> {
        let _ = (session, handle);
        Err(Error::InvalidParams(format!("`{}` takes no auxiliary input", self.name())))
    }

    fn init(&mut self, session: &mut ComputeSession, params: &ProcessParams) -> Result<()>;

    /// Enqueues the work and waits for it; the timer covers exactly that span.
    fn launch(&mut self, session: &mut ComputeSession) -> Result<()>;

    fn state(&self) -> ProcessState;

    fn stats(&self) -> &LaunchStats;
}

/// Algorithm body behind a [`ProcessInstance`].
pub trait Algorithm {
    fn name(&self) -> &str;

    fn accepts_aux(&self) -> bool {
        false
    }

    fn allows_in_place(&self) -> bool {
        false
    }

    /// Validates parameters and shapes and does any one-time work.
    fn prepare(&mut self, session: &mut ComputeSession, io: &Bindings, params: &ProcessParams) -> Result<()>;

    /// Enqueues kernels for one launch.
    fn enqueue(&mut self, session: &mut ComputeSession, io: &Bindings) -> Result<()>;
}

pub struct ProcessInstance<A> {
    algorithm: A,
    io: Bindings,
    state: ProcessState,
    stats: LaunchStats,
}

impl<A: Algorithm> ProcessInstance<A> {
    pub fn new(algorithm: A) -> Self {
        ProcessInstance { algorithm, io: Bindings::default(), state: ProcessState::Created, stats: LaunchStats::default() }
    }

    pub fn algorithm(&self) -> &A {
        &self.algorithm
    }

    fn check_aliasing(&self) -> Result<()> {
        if !self.algorithm.allows_in_place() && self.io.input.is_some() && self.io.input == self.io.output {
            return Err(Error::InvalidParams(format!(
                "`{}` cannot run in place (input and output are the same handle)",
                self.algorithm.name()
            )));
        }
        Ok(())
    }
}

impl<A: Algorithm> Process for ProcessInstance<A> {
    fn name(&self) -> &str {
        self.algorithm.name()
    }

    fn bindings(&self) -> Bindings {
        self.io
    }

    fn set_input(&mut self, session: &ComputeSession, handle: DataHandle) -> Result<()> {
        session.layout(handle)?;
        self.io.input = Some(handle);
        Ok(())
    }

    fn set_output(&mut self, session: &ComputeSession, handle: DataHandle) -> Result<()> {
        session.layout(handle)?;
        self.io.output = Some(handle);
        Ok(())
    }

    fn set_aux_input(&mut self, session: &ComputeSession, handle: DataHandle) -> Result<()> {
        if !self.algorithm.accepts_aux() {
            return Err(Error::InvalidParams(format!("`{}` takes no auxiliary input", self.name())));
        }
        session.layout(handle)?;
        self.io.aux = Some(handle);
        Ok(())
    }

    fn init(&mut self, session: &mut ComputeSession, params: &ProcessParams) -> Result<()> {
        if self.state != ProcessState::Created {
            return Err(Error::AlreadyInitialized);
        }
        self.check_aliasing()?;
        let start = Instant::now();
        self.algorithm.prepare(session, &self.io, params)?;
        self.stats.record_init(start.elapsed().as_secs_f64());
        self.state = ProcessState::Initialized;
        Ok(())
    }

    fn launch(&mut self, session: &mut ComputeSession) -> Result<()> {
        if self.state == ProcessState::Created {
            return Err(Error::NotInitialized);
        }
        self.check_aliasing()?;
        let start = Instant::now();
        self.algorithm.enqueue(session, &self.io)?;
        session.synchronize()?;
        self.stats.record_launch(start.elapsed().as_secs_f64());
        self.state = ProcessState::Launched;
        Ok(())
    }

    fn state(&self) -> ProcessState {
        self.state
    }

    fn stats(&self) -> &LaunchStats {
        &self.stats
    }
}

/// A process together with the parameters its `init` receives inside a chain.
pub struct ChainStage {
    pub process: Box<dyn Process>,
    pub params: ProcessParams,
}

impl ChainStage {
    pub fn new(process: impl Process + 'static, params: ProcessParams) -> Self {
        ChainStage { process: Box::new(process), params }
    }
}

/// Stages run in order on one queue; each stage's output handle is the next
/// stage's input handle, so nothing is copied between them.
pub struct Chain {
    stages: Vec<ChainStage>,
    state: ProcessState,
    stats: LaunchStats,
}

/// Builds a composite process, checking that handles line up stage to stage.
pub fn chain(stages: Vec<ChainStage>) -> Result<Chain> {
    Chain::new(stages)
}

impl Chain {
    pub fn new(stages: Vec<ChainStage>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidParams("a chain needs at least one stage".into()));
        }
        for (i, pair) in stages.windows(2).enumerate() {
            let out = pair[0].process.bindings().output;
            let next_in = pair[1].process.bindings().input;
            if out.is_none() || out != next_in {
                return Err(Error::InvalidParams(format!(
                    "stage {i} output {} does not feed stage {} input {}",
                    fmt_handle(out),
                    i + 1,
                    fmt_handle(next_in)
                )));
            }
        }
        Ok(Chain { stages, state: ProcessState::Created, stats: LaunchStats::default() })
    }

    pub fn stages(&self) -> impl Iterator<Item = &dyn Process> {
        self.stages.iter().map(|s| s.process.as_ref())
    }

    fn wrap(index: usize) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage { index, source: Box::new(e) }
    }
}

fn fmt_handle(h: Option<DataHandle>) -> String {
    h.map_or_else(|| "<unset>".to_string(), |h| h.to_string())
}

impl Process for Chain {
    fn name(&self) -> &str {
        "chain"
    }

    fn bindings(&self) -> Bindings {
        let first = self.stages[0].process.bindings();
        let last = self.stages[self.stages.len() - 1].process.bindings();
        Bindings { input: first.input, output: last.output, aux: None }
    }

    fn set_input(&mut self, session: &ComputeSession, handle: DataHandle) -> Result<()> {
        self.stages[0].process.set_input(session, handle).map_err(Self::wrap(0))
    }

    fn set_output(&mut self, session: &ComputeSession, handle: DataHandle) -> Result<()> {
        let last = self.stages.len() - 1;
        self.stages[last].process.set_output(session, handle).map_err(Self::wrap(last))
    }

    fn init(&mut self, session: &mut ComputeSession, params: &ProcessParams) -> Result<()> {
        if self.state != ProcessState::Created {
            return Err(Error::AlreadyInitialized);
        }
        params.reader().finish()?;
        let start = Instant::now();
        for (i, stage) in self.stages.iter_mut().enumerate() {
            stage.process.init(session, &stage.params).map_err(Self::wrap(i))?;
        }
        self.stats.record_init(start.elapsed().as_secs_f64());
        self.state = ProcessState::Initialized;
        Ok(())
    }

    fn launch(&mut self, session: &mut ComputeSession) -> Result<()> {
        if self.state == ProcessState::Created {
            return Err(Error::NotInitialized);
        }
        let start = Instant::now();
        for (i, stage) in self.stages.iter_mut().enumerate() {
            stage.process.launch(session).map_err(Self::wrap(i))?;
        }
        self.stats.record_launch(start.elapsed().as_secs_f64());
        self.state = ProcessState::Launched;
        Ok(())
    }

    fn state(&self) -> ProcessState {
        self.state
    }

    fn stats(&self) -> &LaunchStats {
        &self.stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reader_rejects_unknown_and_mistyped() {
        let p = ProcessParams::new().with("max_value", 2.5).with("typo", true);
        let mut r = p.reader();
        assert_eq!(r.real("max_value").unwrap(), Some(2.5));
        assert!(matches!(r.finish(), Err(Error::InvalidParams(m)) if m.contains("typo")));

        let p = ProcessParams::new().with("direction", 3i64);
        let mut r = p.reader();
        assert!(r.text("direction").is_err());

        let p = ProcessParams::new().with("n", 3i64);
        let mut r = p.reader();
        assert_eq!(r.real("n").unwrap(), Some(3.0));
        r.finish().unwrap();
    }

    #[test]
    fn stats_mean() {
        let mut s = LaunchStats::default();
        s.record_launch(1.0);
        s.record_launch(3.0);
        assert_eq!(s.launches, 2);
        assert_eq!(s.mean_launch_seconds, 2.0);
        assert_eq!(s.last_launch_seconds, 3.0);
    }
}
