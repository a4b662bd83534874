use std::collections::HashSet;

use super::{op_location, AffineExpr, AffineFor, AffineFunc, AffineModule, AffineOp, OpKind};
use crate::diagnostic::Diagnostic;

/// Structural verifier. Returns every violation found; empty means well-formed.
pub fn verify_module(m: &AffineModule) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut names = HashSet::new();
    for f in &m.funcs {
        if !names.insert(f.name.as_str()) {
            diags.push(Diagnostic::new(format!("@{}", f.name), "duplicate function name"));
        }
        diags.extend(verify_func(f));
    }
    diags
}

pub fn verify_func(f: &AffineFunc) -> Vec<Diagnostic> {
    let mut v = Verifier { func: f, diags: Vec::new(), defined: HashSet::new() };
    v.run();
    v.diags
}

struct Verifier<'a> {
    func: &'a AffineFunc,
    diags: Vec<Diagnostic>,
    /// Every SSA name defined so far anywhere in the function.
    defined: HashSet<&'a str>,
}

#[derive(Default, Clone)]
struct Scope<'a> {
    scalars: HashSet<&'a str>,
    ivs: Vec<&'a str>,
}

impl<'a> Verifier<'a> {
    fn err(&mut self, path: &[usize], message: impl Into<String>) {
        self.diags.push(Diagnostic::new(op_location(&self.func.name, path), message));
    }

    fn define(&mut self, path: &[usize], name: &'a str) {
        if !self.defined.insert(name) {
            self.err(path, format!("%{name} is defined more than once"));
        }
    }

    fn run(&mut self) {
        let f = self.func;
        for (name, ty) in &f.args {
            self.define(&[], name);
            if ty.length < 1 {
                self.err(&[], format!("memref %{name} must have at least one element"));
            }
        }
        match f.body.last() {
            Some(AffineOp { kind: OpKind::Return, .. }) => {}
            _ => self.err(&[], format!("function @{} does not end with return", f.name)),
        }
        let mut scope = Scope::default();
        let mut path = Vec::new();
        self.block(&f.body, &mut scope, &mut path, None);
    }

    /// `loop_ctx` is the enclosing loop, if the block is a loop body.
    fn block(&mut self, ops: &'a [AffineOp], scope: &mut Scope<'a>, path: &mut Vec<usize>, loop_ctx: Option<&'a AffineFor>) {
        for (i, op) in ops.iter().enumerate() {
            path.push(i);
            let last = i + 1 == ops.len();
            self.op(op, scope, path, loop_ctx, last);
            path.pop();
        }
    }

    fn use_scalar(&mut self, path: &[usize], scope: &Scope<'a>, name: &str) {
        if scope.scalars.contains(name) {
            return;
        }
        if self.func.arg(name).is_some() {
            self.err(path, format!("memref %{name} used where an i32 value is required"));
        } else if scope.ivs.contains(&name) {
            self.err(path, format!("induction variable %{name} used outside an affine index"));
        } else {
            self.err(path, format!("%{name} is used before it is defined"));
        }
    }

    fn use_memref(&mut self, path: &[usize], name: &str) {
        if self.func.arg(name).is_none() {
            self.err(path, format!("%{name} is not a memref argument"));
        }
    }

    fn use_index(&mut self, path: &[usize], scope: &Scope<'a>, kind: &str, e: &AffineExpr) {
        for var in e.vars() {
            if !scope.ivs.contains(&var) {
                self.err(path, format!("{kind} indexes with %{var}, which is not an enclosing induction variable"));
            }
        }
    }

    fn op(&mut self, op: &'a AffineOp, scope: &mut Scope<'a>, path: &mut Vec<usize>, loop_ctx: Option<&'a AffineFor>, last: bool) {
        let expected_results = match &op.kind {
            OpKind::Constant { .. } | OpKind::Load { .. } | OpKind::MulI { .. } | OpKind::AddI { .. } => 1,
            OpKind::For(f) => f.iter_args.len(),
            OpKind::Store { .. } | OpKind::Yield { .. } | OpKind::Return => 0,
        };
        if op.results.len() != expected_results {
            self.err(
                path,
                format!("{} produces {} result(s), found {}", op.kind.mnemonic(), expected_results, op.results.len()),
            );
        }
        match &op.kind {
            OpKind::Constant { .. } => {}
            OpKind::Load { memref, index } => {
                self.use_memref(path, memref);
                self.use_index(path, scope, "affine.load", index);
            }
            OpKind::Store { value, memref, index } => {
                self.use_scalar(path, scope, value);
                self.use_memref(path, memref);
                self.use_index(path, scope, "affine.store", index);
            }
            OpKind::MulI { lhs, rhs } | OpKind::AddI { lhs, rhs } => {
                self.use_scalar(path, scope, lhs);
                self.use_scalar(path, scope, rhs);
            }
            OpKind::For(f) => self.for_op(f, scope, path),
            OpKind::Yield { values } => {
                match loop_ctx {
                    None => self.err(path, "affine.yield outside a loop body"),
                    Some(l) => {
                        if !last {
                            self.err(path, "affine.yield must be the last op of its loop body");
                        }
                        if l.iter_args.is_empty() {
                            self.err(path, "affine.yield in a loop without iter_args");
                        } else if values.len() != l.iter_args.len() {
                            self.err(
                                path,
                                format!("affine.yield returns {} value(s) for {} iter_args", values.len(), l.iter_args.len()),
                            );
                        }
                    }
                }
                for v in values {
                    self.use_scalar(path, scope, v);
                }
            }
            OpKind::Return => {
                if loop_ctx.is_some() || !last || path.len() != 1 {
                    self.err(path, "return must be the last op of the function body");
                }
            }
        }
        for r in &op.results {
            self.define(path, r);
            scope.scalars.insert(r);
        }
    }

    fn for_op(&mut self, f: &'a AffineFor, scope: &mut Scope<'a>, path: &mut Vec<usize>) {
        if f.step < 1 {
            self.err(path, format!("loop step {} must be at least 1", f.step));
        } else if f.lower > f.upper {
            self.err(path, format!("loop lower bound {} exceeds upper bound {}", f.lower, f.upper));
        } else if f.trip_count().is_none() {
            self.err(path, format!("step {} does not divide the range {}..{}", f.step, f.lower, f.upper));
        }
        for a in &f.iter_args {
            self.use_scalar(path, scope, &a.init);
        }
        if !f.iter_args.is_empty() && !matches!(f.body.last(), Some(AffineOp { kind: OpKind::Yield { .. }, .. })) {
            self.err(path, "loop with iter_args must end with affine.yield");
        }
        let mut inner = scope.clone();
        self.define(path, &f.iv);
        inner.ivs.push(&f.iv);
        for a in &f.iter_args {
            self.define(path, &a.name);
            inner.scalars.insert(&a.name);
        }
        self.block(&f.body, &mut inner, path, Some(f));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine_ir::{gen_gemm, MemRefType};

    fn func(body: Vec<AffineOp>) -> AffineFunc {
        AffineFunc { name: "f".into(), args: vec![("m".into(), MemRefType::new(4, 0))], body }
    }

    #[test]
    fn gemm_is_well_formed() {
        for n in [1, 2, 5, 32] {
            assert!(verify_module(&gen_gemm(n)).is_empty());
        }
    }

    #[test]
    fn missing_return() {
        let m = AffineModule { funcs: vec![func(vec![])] };
        let d = verify_module(&m);
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("@f"), "{d:?}");
    }

    #[test]
    fn unbound_load_index() {
        let body = vec![
            AffineOp::with_result("x", OpKind::Load { memref: "m".into(), index: AffineExpr::term("i", 1) }),
            AffineOp::new(OpKind::Return),
        ];
        let d = verify_func(&func(body));
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("affine.load"), "{d:?}");
        assert_eq!(d[0].location, "@f[0]");
    }

    #[test]
    fn use_before_def_and_redefinition() {
        let body = vec![
            AffineOp::with_result("a", OpKind::AddI { lhs: "b".into(), rhs: "b".into() }),
            AffineOp::with_result("a", OpKind::Constant { value: 1 }),
            AffineOp::new(OpKind::Return),
        ];
        let d = verify_func(&func(body));
        assert!(d.iter().any(|d| d.message.contains("before it is defined")));
        assert!(d.iter().any(|d| d.message.contains("more than once")));
    }

    #[test]
    fn inner_values_do_not_escape() {
        let inner = AffineFor {
            iv: "i".into(),
            lower: 0,
            upper: 2,
            step: 1,
            iter_args: vec![],
            body: vec![AffineOp::with_result("c", OpKind::Constant { value: 3 })],
        };
        let body = vec![
            AffineOp::new(OpKind::For(inner)),
            AffineOp::new(OpKind::Store { value: "c".into(), memref: "m".into(), index: AffineExpr::constant(0) }),
            AffineOp::new(OpKind::Return),
        ];
        let d = verify_func(&func(body));
        assert_eq!(d.len(), 1, "{d:?}");
    }

    #[test]
    fn bad_bounds_and_yield() {
        let l = AffineFor {
            iv: "i".into(),
            lower: 0,
            upper: 5,
            step: 2,
            iter_args: vec![],
            body: vec![AffineOp::new(OpKind::Yield { values: vec![] })],
        };
        let d = verify_func(&func(vec![AffineOp::new(OpKind::For(l)), AffineOp::new(OpKind::Return)]));
        assert!(d.iter().any(|d| d.message.contains("does not divide")));
        assert!(d.iter().any(|d| d.message.contains("without iter_args")));
    }

    #[test]
    fn induction_variable_is_not_a_scalar() {
        let l = AffineFor {
            iv: "i".into(),
            lower: 0,
            upper: 2,
            step: 1,
            iter_args: vec![],
            body: vec![AffineOp::with_result("x", OpKind::AddI { lhs: "i".into(), rhs: "i".into() })],
        };
        let d = verify_func(&func(vec![AffineOp::new(OpKind::For(l)), AffineOp::new(OpKind::Return)]));
        assert_eq!(d.len(), 2);
        assert!(d[0].message.contains("outside an affine index"));
    }
}
