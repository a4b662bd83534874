use std::fs;
use std::path::Path;

use hlsflow_core::memory::{MemoryImage, MemorySet};
use hlsflow_core::parser::{parse_with_spans, Parsed};
use hlsflow_core::transforms::{unroll_by_factor, unroll_full, LoopPath};
use hlsflow_core::{AffineFunc, AffineModule, SourceSpan};

use crate::diag::{Diag, Failure, EXIT_INPUT, EXIT_LOWER};

pub fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(EXIT_INPUT, Diag::error(path.display().to_string(), format!("cannot read: {e}"))))
}

pub fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::new(EXIT_INPUT, Diag::error(dir.display().to_string(), format!("cannot create directory: {e}"))))?;
    }
    fs::write(path, text).map_err(|e| Failure::new(EXIT_INPUT, Diag::error(path.display().to_string(), format!("cannot write: {e}"))))
}

/// A parsed and transformed input module.
pub struct Loaded {
    pub path: String,
    pub module: AffineModule,
    /// Spans of the original text; only meaningful while `transformed` is false.
    pub parsed: Parsed,
    pub transformed: bool,
}

impl Loaded {
    /// Source position for a core location such as `@f[0.1]`.
    pub fn span(&self, location: &str) -> Option<SourceSpan> {
        if self.transformed {
            None
        } else {
            self.parsed.span_of(location)
        }
    }

    pub fn select(&self, func: Option<&str>) -> Result<&AffineFunc, Failure> {
        match func {
            Some(name) => self.module.func(name).ok_or_else(|| {
                let names: Vec<String> = self.module.funcs.iter().map(|f| format!("@{}", f.name)).collect();
                Failure::usage(format!("no function @{name} in {} (found {})", self.path, names.join(", ")))
            }),
            None if self.module.funcs.len() == 1 => Ok(&self.module.funcs[0]),
            None if self.module.funcs.is_empty() => Err(Failure::new(EXIT_INPUT, Diag::error(&self.path, "module defines no functions"))),
            None => Err(Failure::usage(format!(
                "{} defines {} functions; choose one with --func",
                self.path,
                self.module.funcs.len()
            ))),
        }
    }
}

/// `PATH:full` or `PATH:K`; the path itself may contain `@func:`.
pub fn parse_unroll(spec: &str) -> Result<(LoopPath, Option<u64>), Failure> {
    let bad = |why: String| Failure::usage(format!("invalid --unroll `{spec}`: {why}"));
    let (path, how) = spec.rsplit_once(':').ok_or_else(|| bad("expected PATH:full or PATH:K".into()))?;
    let path: LoopPath = path.parse().map_err(bad)?;
    let factor = match how {
        "full" => None,
        k => Some(k.parse::<u64>().ok().filter(|k| *k >= 1).ok_or_else(|| bad(format!("`{k}` is not `full` or a positive factor")))?),
    };
    Ok((path, factor))
}

pub fn load(path: &Path, unroll: &[String]) -> Result<Loaded, Failure> {
    let shown = path.display().to_string();
    let text = read(path)?;
    let parsed = parse_with_spans(&text).map_err(|e| Failure::new(EXIT_INPUT, Diag::error(&shown, e.to_string()).at(Some(e.span))))?;
    let mut module = parsed.module.clone();
    for spec in unroll {
        let (loop_path, factor) = parse_unroll(spec)?;
        let result = match factor {
            None => unroll_full(&module, &loop_path),
            Some(k) => unroll_by_factor(&module, &loop_path, k),
        };
        module = result.map_err(|e| Failure::new(EXIT_LOWER, Diag::error(&shown, format!("--unroll {spec}: {e}"))))?;
    }
    Ok(Loaded { path: shown, module, parsed, transformed: !unroll.is_empty() })
}

fn read_image(path: &Path, name: &str) -> Result<Vec<i32>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read: {e}"))?;
    if let Ok(values) = serde_json::from_str::<Vec<i32>>(&text) {
        return Ok(values);
    }
    let image = MemoryImage::from_json(&text).map_err(|e| format!("{e} (expected a memory image object or an array of i32)"))?;
    if image.name != name {
        return Err(format!("image is named `{}` but is bound to %{name}", image.name));
    }
    Ok(image.data)
}

/// Memory images keyed by argument name. Unbound arguments become zeros
/// and produce a warning.
pub fn bind_memories(f: &AffineFunc, specs: &[String], warnings: &mut Vec<Diag>) -> Result<MemorySet, Failure> {
    let mut set = MemorySet::new();
    for spec in specs {
        let (name, file) = spec.split_once('=').ok_or_else(|| Failure::usage(format!("invalid --mem `{spec}`: expected NAME=PATH")))?;
        let name = name.trim_start_matches('%');
        let Some(ty) = f.arg(name) else {
            let args: Vec<String> = f.args.iter().map(|(a, _)| format!("%{a}")).collect();
            return Err(Failure::usage(format!("--mem {spec}: @{} has no argument %{name} (arguments: {})", f.name, args.join(", "))));
        };
        if set.contains_key(name) {
            return Err(Failure::usage(format!("--mem binds %{name} more than once")));
        }
        let data = read_image(Path::new(file), name).map_err(|e| Failure::new(EXIT_INPUT, Diag::error(file, e)))?;
        if data.len() as u64 != ty.length {
            return Err(Failure::new(
                EXIT_INPUT,
                Diag::error(file, format!("%{name} holds {} elements but the image has {}", ty.length, data.len())),
            ));
        }
        set.insert(name.to_string(), MemoryImage::new(name, data));
    }
    for (name, ty) in &f.args {
        if !set.contains_key(name) {
            warnings.push(Diag::warning("hlsflow", format!("memory %{name} is not bound; using {} zeros", ty.length)));
            set.insert(name.clone(), MemoryImage::zeros(name, ty.length as usize));
        }
    }
    Ok(set)
}
