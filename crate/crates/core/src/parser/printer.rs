use std::fmt::Write;

use crate::affine_ir::{AffineExpr, AffineFunc, AffineModule, AffineOp, MemRefType, OpKind};

/// Prints `m` in the concrete syntax accepted by [`super::parse`]. The output
/// is deterministic: two-space indentation, one op per line, functions
/// separated by a blank line.
pub fn print(m: &AffineModule) -> String {
    let mut out = String::new();
    for (i, f) in m.funcs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_func(&mut out, f);
    }
    out
}

fn print_func(out: &mut String, f: &AffineFunc) {
    let args: Vec<String> = f.args.iter().map(|(n, t)| format!("%{n}: {t}")).collect();
    let _ = writeln!(out, "func.func @{}({}) {{", f.name, args.join(", "));
    for op in &f.body {
        print_op(out, f, op, 1);
    }
    out.push_str("}\n");
}

fn memref_of(f: &AffineFunc, name: &str) -> MemRefType {
    // Ill-formed references never reach the printer through `parse`; fall back
    // to a one-element type so printing stays total.
    f.arg(name).copied().unwrap_or(MemRefType::new(1, 0))
}

fn print_op(out: &mut String, f: &AffineFunc, op: &AffineOp, depth: usize) {
    let indent = "  ".repeat(depth);
    out.push_str(&indent);
    if !op.results.is_empty() {
        let rs: Vec<String> = op.results.iter().map(|r| format!("%{r}")).collect();
        let _ = write!(out, "{} = ", rs.join(", "));
    }
    match &op.kind {
        OpKind::Constant { value } => {
            let _ = writeln!(out, "arith.constant {value} : i32");
        }
        OpKind::Load { memref, index } => {
            let _ = writeln!(out, "affine.load %{memref}[{}] : {}", expr_text(index), memref_of(f, memref));
        }
        OpKind::Store { value, memref, index } => {
            let _ = writeln!(out, "affine.store %{value}, %{memref}[{}] : {}", expr_text(index), memref_of(f, memref));
        }
        OpKind::MulI { lhs, rhs } => {
            let _ = writeln!(out, "arith.muli %{lhs}, %{rhs} : i32");
        }
        OpKind::AddI { lhs, rhs } => {
            let _ = writeln!(out, "arith.addi %{lhs}, %{rhs} : i32");
        }
        OpKind::For(l) => {
            let _ = write!(out, "affine.for %{} = {} to {}", l.iv, l.lower, l.upper);
            if l.step != 1 {
                let _ = write!(out, " step {}", l.step);
            }
            if !l.iter_args.is_empty() {
                let args: Vec<String> = l.iter_args.iter().map(|a| format!("%{} = %{}", a.name, a.init)).collect();
                let tys = vec!["i32"; l.iter_args.len()];
                let _ = write!(out, " iter_args({}) -> ({})", args.join(", "), tys.join(", "));
            }
            out.push_str(" {\n");
            for inner in &l.body {
                print_op(out, f, inner, depth + 1);
            }
            out.push_str(&indent);
            out.push_str("}\n");
        }
        OpKind::Yield { values } => {
            if values.is_empty() {
                out.push_str("affine.yield\n");
            } else {
                let vs: Vec<String> = values.iter().map(|v| format!("%{v}")).collect();
                let tys = vec!["i32"; values.len()];
                let _ = writeln!(out, "affine.yield {} : {}", vs.join(", "), tys.join(", "));
            }
        }
        OpKind::Return => out.push_str("return\n"),
    }
}

/// `%a * 32 + %b - 3`; terms in stored order, constant last.
pub(crate) fn expr_text(e: &AffineExpr) -> String {
    let mut s = String::new();
    let mut first = true;
    let mut emit = |s: &mut String, negative: bool, body: String| {
        if first {
            if negative {
                s.push('-');
            }
            first = false;
        } else {
            s.push_str(if negative { " - " } else { " + " });
        }
        s.push_str(&body);
    };
    for (var, coeff) in &e.terms {
        let magnitude = coeff.unsigned_abs();
        let body = if magnitude == 1 { format!("%{var}") } else { format!("%{var} * {magnitude}") };
        emit(&mut s, *coeff < 0, body);
    }
    if e.constant != 0 || e.terms.is_empty() {
        emit(&mut s, e.constant < 0, e.constant.unsigned_abs().to_string());
    }
    s
}
