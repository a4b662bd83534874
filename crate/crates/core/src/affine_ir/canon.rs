//! Alpha-renaming of SSA identifiers.

use std::collections::HashMap;

use super::{AffineExpr, AffineFunc, AffineModule, AffineOp, OpKind};

/// Renames every SSA value of every function to `v0, v1, ...` in definition
/// order, so modules that differ only in value names compare equal.
pub fn canonicalize(m: &AffineModule) -> AffineModule {
    AffineModule { funcs: m.funcs.iter().map(canonicalize_func).collect() }
}

pub fn alpha_equivalent(a: &AffineModule, b: &AffineModule) -> bool {
    canonicalize(a) == canonicalize(b)
}

fn canonicalize_func(f: &AffineFunc) -> AffineFunc {
    let mut r = Renamer::default();
    let args = f.args.iter().map(|(n, t)| (r.def(n), *t)).collect();
    let body = r.block(&f.body);
    AffineFunc { name: f.name.clone(), args, body }
}

#[derive(Default)]
struct Renamer {
    map: HashMap<String, String>,
}

impl Renamer {
    fn def(&mut self, name: &str) -> String {
        let fresh = format!("v{}", self.map.len());
        self.map.insert(name.to_string(), fresh.clone());
        fresh
    }

    fn get(&self, name: &str) -> String {
        // Undefined names keep their spelling; the verifier reports them.
        self.map.get(name).cloned().unwrap_or_else(|| name.to_string())
    }

    fn expr(&self, e: &AffineExpr) -> AffineExpr {
        AffineExpr { terms: e.terms.iter().map(|(v, c)| (self.get(v), *c)).collect(), constant: e.constant }
    }

    fn block(&mut self, ops: &[AffineOp]) -> Vec<AffineOp> {
        ops.iter().map(|op| self.op(op)).collect()
    }

    fn op(&mut self, op: &AffineOp) -> AffineOp {
        let kind = match &op.kind {
            OpKind::Constant { value } => OpKind::Constant { value: *value },
            OpKind::Load { memref, index } => OpKind::Load { memref: self.get(memref), index: self.expr(index) },
            OpKind::Store { value, memref, index } => {
                OpKind::Store { value: self.get(value), memref: self.get(memref), index: self.expr(index) }
            }
            OpKind::MulI { lhs, rhs } => OpKind::MulI { lhs: self.get(lhs), rhs: self.get(rhs) },
            OpKind::AddI { lhs, rhs } => OpKind::AddI { lhs: self.get(lhs), rhs: self.get(rhs) },
            OpKind::For(l) => {
                let mut l = l.clone();
                for a in &mut l.iter_args {
                    a.init = self.get(&a.init);
                }
                l.iv = self.def(&l.iv);
                for a in &mut l.iter_args {
                    a.name = self.def(&a.name);
                }
                l.body = self.block(&l.body);
                OpKind::For(l)
            }
            OpKind::Yield { values } => OpKind::Yield { values: values.iter().map(|v| self.get(v)).collect() },
            OpKind::Return => OpKind::Return,
        };
        let results = op.results.iter().map(|r| self.def(r)).collect();
        AffineOp { results, kind }
    }
}
