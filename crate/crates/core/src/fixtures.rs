//! Golden fixture index and checker.
//!
//! `fixtures/manifest.json` lists every fixture with the SHA-256 of its
//! body. The body is the file with its leading `//` header lines removed;
//! the header names the generator command, seed and oracle. Generated
//! fixtures are rebuilt from their pipeline and must hash to the same value.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::affine_ir::{alpha_equivalent, gen_gemm, verify_module};
use crate::diagnostic::Diagnostic;
use crate::hw_ir::dump;
use crate::lowering::lower;
use crate::parser::parse;
use crate::rtl::emit_verilog;
use crate::transforms::{unroll_full, LoopPath};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub fixtures: Vec<Fixture>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub id: String,
    /// Relative to the fixture directory.
    pub path: String,
    pub provenance: String,
    pub pipeline: Pipeline,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Verilog,
    Hwir,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Pipeline {
    /// Hand-written GEMM input; must parse, verify and match `gen_gemm(n)`.
    ReferenceKernel { n: u64 },
    /// `gen_gemm(n)`, optionally fully unrolled at `unroll`, lowered and emitted.
    Generated { n: u64, unroll: Option<String>, emit: Emit },
    /// Static data, checked by hash only.
    Data,
}

/// Content with the leading `//` header block removed.
pub fn strip_header(text: &str) -> &str {
    let mut rest = text;
    while rest.starts_with("//") {
        rest = match rest.find('\n') {
            Some(i) => &rest[i + 1..],
            None => "",
        };
    }
    rest
}

pub fn body_hash(text: &str) -> String {
    hex::encode(Sha256::digest(strip_header(text).as_bytes()))
}

/// Rebuilds the body of a generated fixture.
pub fn regenerate(p: &Pipeline) -> Result<Option<String>, String> {
    let Pipeline::Generated { n, unroll, emit } = p else {
        return Ok(None);
    };
    let mut m = gen_gemm(*n);
    if let Some(path) = unroll {
        let path: LoopPath = path.parse::<LoopPath>().map_err(|e| e.to_string())?;
        m = unroll_full(&m, &path).map_err(|e| e.to_string())?;
    }
    let c = lower(&m.funcs[0]).map_err(|e| e.to_string())?;
    Ok(Some(match emit {
        Emit::Hwir => dump(&c),
        Emit::Verilog => emit_verilog(&c).map_err(|e| e.to_string())?.text,
    }))
}

/// Header lines for a generated fixture.
pub fn generated_header(id: &str, p: &Pipeline) -> String {
    let Pipeline::Generated { n, unroll, emit } = p else {
        return String::new();
    };
    let unroll = unroll.as_deref().map(|u| format!(" --unroll {u}:full")).unwrap_or_default();
    let emit = match emit {
        Emit::Verilog => "verilog",
        Emit::Hwir => "hwir",
    };
    format!(
        "// fixture: {id}\n// generator: hlsflow gen gemm {n} -o . && hlsflow compile gemm{n}.mlir{unroll} --emit {emit}\n// seed: none (deterministic)\n// oracle: simulator output checked against the affine interpreter\n"
    )
}

fn read_manifest(dir: &Path) -> Result<Manifest, Diagnostic> {
    let path = dir.join(MANIFEST);
    let loc = path.display().to_string();
    let text = fs::read_to_string(&path).map_err(|e| Diagnostic::new(&loc, format!("cannot read manifest: {e}")))?;
    serde_json::from_str(&text).map_err(|e| Diagnostic::new(&loc, format!("malformed manifest: {e}")))
}

/// Re-checks every fixture under `dir`. Empty means all match.
pub fn check_fixtures(dir: &Path) -> Vec<Diagnostic> {
    let manifest = match read_manifest(dir) {
        Ok(m) => m,
        Err(d) => return vec![d],
    };
    let mut diags = Vec::new();
    for fx in &manifest.fixtures {
        let loc = dir.join(&fx.path).display().to_string();
        let mut err = |msg: String| diags.push(Diagnostic::new(&loc, format!("fixture `{}`: {msg}", fx.id)));
        let text = match fs::read_to_string(dir.join(&fx.path)) {
            Ok(t) => t,
            Err(e) => {
                err(format!("cannot read: {e}"));
                continue;
            }
        };
        let is_json = fx.path.ends_with(".json");
        if !is_json && strip_header(&text).len() == text.len() {
            err("missing provenance header".into());
        }
        let hash = body_hash(&text);
        if hash != fx.sha256 {
            err(format!("content hash {hash} does not match manifest {}", fx.sha256));
        }
        match &fx.pipeline {
            Pipeline::ReferenceKernel { n } => match parse(&text) {
                Err(e) => err(format!("does not parse: {e}")),
                Ok(m) => {
                    let vd = verify_module(&m);
                    if !vd.is_empty() {
                        err(format!("does not verify: {}", vd[0]));
                    } else if !alpha_equivalent(&m, &gen_gemm(*n)) {
                        err(format!("differs from the generated {n}x{n} GEMM"));
                    }
                }
            },
            Pipeline::Generated { .. } => match regenerate(&fx.pipeline) {
                Err(e) => err(format!("pipeline failed: {e}")),
                Ok(Some(body)) => {
                    let fresh = body_hash(&body);
                    if fresh != fx.sha256 {
                        err(format!("regenerated artifact hash {fresh} does not match manifest {}", fx.sha256));
                    }
                }
                Ok(None) => {}
            },
            Pipeline::Data => {}
        }
    }
    diags
}

/// Rewrites every generated fixture and refreshes all hashes in the manifest.
pub fn bless_fixtures(dir: &Path) -> Result<Vec<String>, Diagnostic> {
    let mut manifest = read_manifest(dir)?;
    let mut written = Vec::new();
    for fx in &mut manifest.fixtures {
        let path = dir.join(&fx.path);
        let loc = path.display().to_string();
        let text = match regenerate(&fx.pipeline).map_err(|e| Diagnostic::new(&loc, e))? {
            Some(body) => {
                let text = generated_header(&fx.id, &fx.pipeline) + &body;
                fs::write(&path, &text).map_err(|e| Diagnostic::new(&loc, e.to_string()))?;
                written.push(fx.path.clone());
                text
            }
            None => fs::read_to_string(&path).map_err(|e| Diagnostic::new(&loc, e.to_string()))?,
        };
        fx.sha256 = body_hash(&text);
    }
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    fs::write(dir.join(MANIFEST), json).map_err(|e| Diagnostic::new(MANIFEST, e.to_string()))?;
    Ok(written)
}
