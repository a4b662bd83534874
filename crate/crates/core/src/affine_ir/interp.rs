//! Sequential reference interpreter: the golden functional model.

use std::collections::HashMap;

use super::{eval_affine_expr, AffineError, AffineExpr, AffineFunc, AffineOp, OpKind};
use crate::memory::{MemoryImage, MemorySet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InterpError {
    #[error("index {index} out of bounds for %{memref} of length {length}")]
    OutOfBounds { memref: String, index: i64, length: u64 },
    #[error("no memory image for argument %{0}")]
    MissingImage(String),
    #[error("memory image for %{name} has {actual} elements, expected {expected}")]
    LengthMismatch { name: String, expected: u64, actual: usize },
    #[error("%{0} has no value")]
    Undefined(String),
    #[error(transparent)]
    Affine(#[from] AffineError),
}

/// Runs `f` over copies of `mems` and returns the final image of every memref
/// argument. Arithmetic wraps at 32 bits.
pub fn interpret(f: &AffineFunc, mems: &MemorySet) -> Result<MemorySet, InterpError> {
    let mut memories = HashMap::new();
    for (name, ty) in &f.args {
        let image = mems.get(name).ok_or_else(|| InterpError::MissingImage(name.clone()))?;
        if image.data.len() as u64 != ty.length {
            return Err(InterpError::LengthMismatch { name: name.clone(), expected: ty.length, actual: image.data.len() });
        }
        memories.insert(name.as_str(), image.data.clone());
    }
    let mut machine = Machine { memories, scalars: HashMap::new(), ivs: HashMap::new() };
    machine.block(&f.body)?;
    Ok(f
        .args
        .iter()
        .map(|(name, _)| {
            let data = machine.memories.remove(name.as_str()).unwrap_or_default();
            (name.clone(), MemoryImage::new(name.clone(), data))
        })
        .collect())
}

struct Machine<'a> {
    memories: HashMap<&'a str, Vec<i32>>,
    scalars: HashMap<&'a str, i32>,
    ivs: HashMap<String, i64>,
}

impl<'a> Machine<'a> {
    fn scalar(&self, name: &str) -> Result<i32, InterpError> {
        self.scalars.get(name).copied().ok_or_else(|| InterpError::Undefined(name.to_string()))
    }

    fn address(&self, memref: &str, index: &AffineExpr) -> Result<usize, InterpError> {
        let len = self.memories.get(memref).map(|m| m.len()).ok_or_else(|| InterpError::MissingImage(memref.to_string()))?;
        let at = eval_affine_expr(index, &self.ivs)?;
        if at < 0 || at as u64 >= len as u64 {
            return Err(InterpError::OutOfBounds { memref: memref.to_string(), index: at, length: len as u64 });
        }
        Ok(at as usize)
    }

    /// Executes a block; returns the yielded values if it ends in a yield.
    fn block(&mut self, ops: &'a [AffineOp]) -> Result<Vec<i32>, InterpError> {
        for op in ops {
            let value = match &op.kind {
                OpKind::Constant { value } => *value,
                OpKind::Load { memref, index } => {
                    let at = self.address(memref, index)?;
                    self.memories[memref.as_str()][at]
                }
                OpKind::Store { value, memref, index } => {
                    let v = self.scalar(value)?;
                    let at = self.address(memref, index)?;
                    self.memories.get_mut(memref.as_str()).expect("checked by address")[at] = v;
                    continue;
                }
                OpKind::MulI { lhs, rhs } => self.scalar(lhs)?.wrapping_mul(self.scalar(rhs)?),
                OpKind::AddI { lhs, rhs } => self.scalar(lhs)?.wrapping_add(self.scalar(rhs)?),
                OpKind::For(l) => {
                    let mut carried = l.iter_args.iter().map(|a| self.scalar(&a.init)).collect::<Result<Vec<_>, _>>()?;
                    let mut iv = l.lower;
                    while iv < l.upper {
                        self.ivs.insert(l.iv.clone(), iv);
                        for (arg, v) in l.iter_args.iter().zip(&carried) {
                            self.scalars.insert(&arg.name, *v);
                        }
                        let yielded = self.block(&l.body)?;
                        if !l.iter_args.is_empty() {
                            carried = yielded;
                        }
                        iv = match iv.checked_add(l.step) {
                            Some(next) => next,
                            None => break,
                        };
                    }
                    self.ivs.remove(&l.iv);
                    for (r, v) in op.results.iter().zip(carried) {
                        self.scalars.insert(r, v);
                    }
                    continue;
                }
                OpKind::Yield { values } => {
                    return values.iter().map(|v| self.scalar(v)).collect();
                }
                OpKind::Return => return Ok(Vec::new()),
            };
            if let Some(r) = op.results.first() {
                self.scalars.insert(r, value);
            }
        }
        Ok(Vec::new())
    }
}
