//! Program sources, build diagnostics and the name-indexed kernel registry.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use crate::backend::{CompiledKernel, Kernel};
use crate::error::{Error, Result};

/// File extension of source units passed on the command line.
pub const SOURCE_EXTENSION: &str = ".cl.src";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SourceBody {
    /// Kernel source text, compiled by source-capable backends.
    Text(String),
    /// Names a built-in native routine; the unit name is the kernel name.
    Intrinsic,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProgramSource {
    pub unit_name: String,
    pub body: SourceBody,
}

impl ProgramSource {
    pub fn text(unit_name: impl Into<String>, source: impl Into<String>) -> Self {
        ProgramSource { unit_name: unit_name.into(), body: SourceBody::Text(source.into()) }
    }

    pub fn intrinsic(kernel_name: impl Into<String>) -> Self {
        ProgramSource { unit_name: kernel_name.into(), body: SourceBody::Intrinsic }
    }

    /// Reads a `.cl.src` file; the unit name is the file name without the extension.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file_name = path
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::InvalidParams(format!("bad source path {}", path.display())))?;
        let unit = file_name.strip_suffix(SOURCE_EXTENSION).ok_or_else(|| {
            Error::InvalidParams(format!("source unit {file_name} lacks the {SOURCE_EXTENSION} extension"))
        })?;
        Ok(Self::text(unit, std::fs::read_to_string(path)?))
    }
}

/// Verbatim build output for one failed unit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BuildDiagnostic {
    pub unit_name: String,
    pub log: String,
}

#[derive(Clone, Debug)]
struct Entry {
    unit_name: String,
    kernel: Arc<dyn Kernel>,
}

#[derive(Clone, Debug, Default)]
pub struct KernelRegistry {
    entries: HashMap<String, Entry>,
}

impl KernelRegistry {
    /// Merges a build result. Nothing is inserted if any name collides, either
    /// within the batch or with an already-loaded kernel.
    pub fn merge(&mut self, compiled: Vec<CompiledKernel>) -> Result<Vec<String>> {
        let mut staged: HashMap<String, Entry> = HashMap::new();
        let mut order = Vec::with_capacity(compiled.len());
        for CompiledKernel { unit_name, kernel } in compiled {
            let name = kernel.name().to_string();
            let clash = staged.get(&name).or_else(|| self.entries.get(&name));
            if let Some(existing) = clash {
                return Err(Error::DuplicateKernel {
                    name,
                    first_unit: existing.unit_name.clone(),
                    second_unit: unit_name,
                });
            }
            order.push(name.clone());
            staged.insert(name, Entry { unit_name, kernel });
        }
        self.entries.extend(staged);
        Ok(order)
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Kernel>> {
        self.entries
            .get(name)
            .map(|e| Arc::clone(&e.kernel))
            .ok_or_else(|| Error::UnknownKernel(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<_> = self.entries.keys().cloned().collect();
        names.sort();
        names
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
