//! Affine-dialect subset: loop nests over flat `i32` memrefs.
//!
//! Values are named by their SSA identifier (without the leading `%`).
//! Names are unique within a function; induction variables may only appear
//! inside affine index expressions.

mod canon;
mod gemm;
mod interp;
mod verify;

use std::collections::HashMap;
use std::fmt;

pub use canon::{alpha_equivalent, canonicalize};
pub use gemm::{gen_gemm, GEMM_FUNC_NAME};
pub use interp::{interpret, InterpError};
pub use verify::{verify_func, verify_module};

/// Element width of every memref and scalar in the subset.
pub const ELEMENT_WIDTH: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MemRefType {
    pub length: u64,
    /// Memory-space tag; carried through but never interpreted.
    pub space: i64,
}

impl MemRefType {
    pub fn new(length: u64, space: i64) -> Self {
        MemRefType { length, space }
    }
}

impl fmt::Display for MemRefType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "memref<{}xi32, {}>", self.length, self.space)
    }
}

/// `constant + sum(coeff * var)`. Term order is preserved for printing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct AffineExpr {
    pub terms: Vec<(String, i64)>,
    pub constant: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AffineError {
    #[error("unbound induction variable %{0}")]
    UnboundVariable(String),
    #[error("affine expression overflows 64-bit arithmetic")]
    Overflow,
}

impl AffineExpr {
    pub fn constant(value: i64) -> Self {
        AffineExpr { terms: Vec::new(), constant: value }
    }

    pub fn term(var: impl Into<String>, coeff: i64) -> Self {
        AffineExpr { terms: vec![(var.into(), coeff)], constant: 0 }
    }

    pub fn plus_term(mut self, var: impl Into<String>, coeff: i64) -> Self {
        self.terms.push((var.into(), coeff));
        self
    }

    pub fn plus_const(mut self, value: i64) -> Self {
        self.constant += value;
        self
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(|(v, _)| v.as_str())
    }

    /// Replaces `var` by `value`, folding its contribution into the constant.
    pub fn substitute(&self, var: &str, value: i64) -> Result<AffineExpr, AffineError> {
        let mut out = AffineExpr { terms: Vec::with_capacity(self.terms.len()), constant: self.constant };
        for (v, c) in &self.terms {
            if v == var {
                let delta = c.checked_mul(value).ok_or(AffineError::Overflow)?;
                out.constant = out.constant.checked_add(delta).ok_or(AffineError::Overflow)?;
            } else {
                out.terms.push((v.clone(), *c));
            }
        }
        Ok(out)
    }

    /// Adds `coeff(var) * shift` to the constant while keeping the term.
    pub fn shift(&self, var: &str, shift: i64) -> Result<AffineExpr, AffineError> {
        let mut out = self.clone();
        for (v, c) in &self.terms {
            if v == var {
                let delta = c.checked_mul(shift).ok_or(AffineError::Overflow)?;
                out.constant = out.constant.checked_add(delta).ok_or(AffineError::Overflow)?;
            }
        }
        Ok(out)
    }
}

/// Evaluates `e` under `env`, exactly, in 64-bit signed arithmetic.
pub fn eval_affine_expr(e: &AffineExpr, env: &HashMap<String, i64>) -> Result<i64, AffineError> {
    let mut acc = e.constant;
    for (var, coeff) in &e.terms {
        let value = env.get(var).ok_or_else(|| AffineError::UnboundVariable(var.clone()))?;
        let product = coeff.checked_mul(*value).ok_or(AffineError::Overflow)?;
        acc = acc.checked_add(product).ok_or(AffineError::Overflow)?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IterArg {
    pub name: String,
    pub init: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AffineFor {
    pub iv: String,
    pub lower: i64,
    pub upper: i64,
    pub step: i64,
    pub iter_args: Vec<IterArg>,
    /// Ends with `Yield` exactly when `iter_args` is non-empty.
    pub body: Vec<AffineOp>,
}

impl AffineFor {
    /// Number of iterations, or `None` when the bounds are malformed.
    pub fn trip_count(&self) -> Option<u64> {
        if self.step < 1 || self.lower > self.upper {
            return None;
        }
        let span = (self.upper as i128) - (self.lower as i128);
        let step = self.step as i128;
        if span % step != 0 {
            return None;
        }
        u64::try_from(span / step).ok()
    }

    pub fn yield_values(&self) -> &[String] {
        match self.body.last() {
            Some(AffineOp { kind: OpKind::Yield { values }, .. }) => values,
            _ => &[],
        }
    }

    pub fn contains_loop(&self) -> bool {
        self.body.iter().any(|op| matches!(op.kind, OpKind::For(_)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum OpKind {
    Constant { value: i32 },
    Load { memref: String, index: AffineExpr },
    Store { value: String, memref: String, index: AffineExpr },
    MulI { lhs: String, rhs: String },
    AddI { lhs: String, rhs: String },
    For(AffineFor),
    Yield { values: Vec<String> },
    Return,
}

impl OpKind {
    pub fn mnemonic(&self) -> &'static str {
        match self {
            OpKind::Constant { .. } => "arith.constant",
            OpKind::Load { .. } => "affine.load",
            OpKind::Store { .. } => "affine.store",
            OpKind::MulI { .. } => "arith.muli",
            OpKind::AddI { .. } => "arith.addi",
            OpKind::For(_) => "affine.for",
            OpKind::Yield { .. } => "affine.yield",
            OpKind::Return => "return",
        }
    }

    /// Scalar SSA operands, excluding memrefs and induction variables.
    pub fn scalar_operands(&self) -> Vec<&str> {
        match self {
            OpKind::Store { value, .. } => vec![value.as_str()],
            OpKind::MulI { lhs, rhs } | OpKind::AddI { lhs, rhs } => vec![lhs.as_str(), rhs.as_str()],
            OpKind::For(f) => f.iter_args.iter().map(|a| a.init.as_str()).collect(),
            OpKind::Yield { values } => values.iter().map(String::as_str).collect(),
            OpKind::Constant { .. } | OpKind::Load { .. } | OpKind::Return => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AffineOp {
    pub results: Vec<String>,
    pub kind: OpKind,
}

impl AffineOp {
    pub fn new(kind: OpKind) -> Self {
        AffineOp { results: Vec::new(), kind }
    }

    pub fn with_result(result: impl Into<String>, kind: OpKind) -> Self {
        AffineOp { results: vec![result.into()], kind }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AffineFunc {
    pub name: String,
    pub args: Vec<(String, MemRefType)>,
    pub body: Vec<AffineOp>,
}

impl AffineFunc {
    pub fn arg(&self, name: &str) -> Option<&MemRefType> {
        self.args.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct AffineModule {
    pub funcs: Vec<AffineFunc>,
}

impl AffineModule {
    pub fn func(&self, name: &str) -> Option<&AffineFunc> {
        self.funcs.iter().find(|f| f.name == name)
    }
}

/// Location string for an op: `@func` or `@func[0.2.1]` (body indices).
pub fn op_location(func: &str, path: &[usize]) -> String {
    if path.is_empty() {
        format!("@{func}")
    } else {
        let idx: Vec<String> = path.iter().map(|i| i.to_string()).collect();
        format!("@{func}[{}]", idx.join("."))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, i64)]) -> HashMap<String, i64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn eval_examples() {
        let e = AffineExpr::term("k", 32).plus_term("j", 1);
        assert_eq!(eval_affine_expr(&e, &env(&[("k", 3), ("j", 5)])), Ok(101));
        assert_eq!(eval_affine_expr(&AffineExpr::constant(0), &HashMap::new()), Ok(0));
        let e = AffineExpr::term("arg5", 1).plus_term("arg3", 32);
        assert_eq!(eval_affine_expr(&e, &env(&[("arg5", 31), ("arg3", 31)])), Ok(1023));
    }

    #[test]
    fn eval_unbound() {
        let e = AffineExpr::term("q", 2);
        assert_eq!(eval_affine_expr(&e, &HashMap::new()), Err(AffineError::UnboundVariable("q".into())));
    }

    #[test]
    fn eval_overflow() {
        let e = AffineExpr::term("x", i64::MAX).plus_const(1);
        assert_eq!(eval_affine_expr(&e, &env(&[("x", 1)])), Err(AffineError::Overflow));
    }

    #[test]
    fn substitute_folds_constant() {
        let e = AffineExpr::term("k", 4).plus_term("i", 1).plus_const(3);
        let s = e.substitute("k", 2).unwrap();
        assert_eq!(s.terms, vec![("i".to_string(), 1)]);
        assert_eq!(s.constant, 11);
    }

    #[test]
    fn trip_counts() {
        let mk = |lower, upper, step| AffineFor {
            iv: "i".into(),
            lower,
            upper,
            step,
            iter_args: vec![],
            body: vec![],
        };
        assert_eq!(mk(0, 32, 1).trip_count(), Some(32));
        assert_eq!(mk(2, 10, 4).trip_count(), Some(2));
        assert_eq!(mk(0, 0, 1).trip_count(), Some(0));
        assert_eq!(mk(0, 5, 2).trip_count(), None);
        assert_eq!(mk(3, 1, 1).trip_count(), None);
        assert_eq!(mk(0, 4, 0).trip_count(), None);
    }
}
