//! Loop unrolling on the affine IR.
//!
//! Only innermost loops are unrolled. Copies of the body get fresh result
//! names `<name>_u<copy>` (with a numeric suffix appended on collision), the
//! induction variable is substituted into index expressions, and loop-carried
//! values are threaded through the copies as straight-line SSA.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::affine_ir::{AffineError, AffineExpr, AffineFor, AffineFunc, AffineModule, AffineOp, OpKind};

/// Locates an `affine.for`: each index selects the n-th loop (counting only
/// loops) among the ops of the enclosing body, starting at the function body.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LoopPath {
    /// `None` selects the first function of the module.
    pub func: Option<String>,
    pub indices: Vec<usize>,
}

impl LoopPath {
    pub fn new(func: Option<&str>, indices: &[usize]) -> Self {
        LoopPath { func: func.map(str::to_string), indices: indices.to_vec() }
    }
}

impl fmt::Display for LoopPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(func) = &self.func {
            write!(f, "@{func}:")?;
        }
        let idx: Vec<String> = self.indices.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", idx.join("."))
    }
}

impl FromStr for LoopPath {
    type Err = String;

    /// `0.0.0` or `@func:0.1`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (func, rest) = match s.strip_prefix('@') {
            Some(r) => {
                let (name, path) = r.split_once(':').ok_or_else(|| format!("expected `@func:PATH`, found `{s}`"))?;
                (Some(name.to_string()), path)
            }
            None => (None, s),
        };
        let indices = rest
            .split('.')
            .map(|p| p.parse::<usize>().map_err(|_| format!("invalid loop path component `{p}` in `{s}`")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LoopPath { func, indices })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransformError {
    #[error("no loop at {0}")]
    NoSuchLoop(LoopPath),
    #[error("loop at {0} is not innermost")]
    NotInnermost(LoopPath),
    #[error("unroll factor {factor} does not divide trip count {trips} of loop at {path}")]
    NonDividingFactor { path: LoopPath, factor: u64, trips: u64 },
    #[error("loop at {0} has malformed bounds")]
    BadBounds(LoopPath),
    #[error("unroll factor must be positive")]
    ZeroFactor,
    #[error(transparent)]
    Affine(#[from] AffineError),
}

/// Replaces the loop at `path` with one copy of its body per iteration.
pub fn unroll_full(m: &AffineModule, path: &LoopPath) -> Result<AffineModule, TransformError> {
    rewrite(m, path, |_, op, names| {
        let OpKind::For(l) = &op.kind else { unreachable!() };
        let trips = l.trip_count().ok_or_else(|| TransformError::BadBounds(path.clone()))?;
        let mut carried: Vec<String> = l.iter_args.iter().map(|a| a.init.clone()).collect();
        let mut out = Vec::new();
        for copy in 0..trips {
            let iv_value = l.lower + copy as i64 * l.step;
            let body = Copier::new(names, copy, l, &carried).copy_body(|e| e.substitute(&l.iv, iv_value))?;
            carried = body.yielded;
            out.extend(body.ops);
        }
        // Uses of the loop results now read the final carried values.
        let renames: HashMap<String, String> = op.results.iter().cloned().zip(carried).collect();
        Ok((out, renames))
    })
}

/// Unrolls the loop at `path` by `factor`, multiplying its step.
pub fn unroll_by_factor(m: &AffineModule, path: &LoopPath, factor: u64) -> Result<AffineModule, TransformError> {
    if factor == 0 {
        return Err(TransformError::ZeroFactor);
    }
    let target = find_loop(m, path)?;
    let trips = target.trip_count().ok_or_else(|| TransformError::BadBounds(path.clone()))?;
    if target.contains_loop() {
        return Err(TransformError::NotInnermost(path.clone()));
    }
    if trips % factor != 0 && trips != 0 {
        return Err(TransformError::NonDividingFactor { path: path.clone(), factor, trips });
    }
    if factor == 1 {
        return Ok(m.clone());
    }
    if factor == trips {
        return unroll_full(m, path);
    }
    rewrite(m, path, |_, op, names| {
        let OpKind::For(l) = &op.kind else { unreachable!() };
        let mut carried: Vec<String> = l.iter_args.iter().map(|a| a.name.clone()).collect();
        let mut body = Vec::new();
        for copy in 0..factor {
            let shift = copy as i64 * l.step;
            let c = Copier::new(names, copy, l, &carried).copy_body(|e| e.shift(&l.iv, shift))?;
            carried = c.yielded;
            body.extend(c.ops);
        }
        if !l.iter_args.is_empty() {
            body.push(AffineOp::new(OpKind::Yield { values: carried }));
        }
        let step = l.step.checked_mul(factor as i64).ok_or(AffineError::Overflow)?;
        let new_loop = AffineFor { iv: l.iv.clone(), lower: l.lower, upper: l.upper, step, iter_args: l.iter_args.clone(), body };
        Ok((vec![AffineOp { results: op.results.clone(), kind: OpKind::For(new_loop) }], HashMap::new()))
    })
}

fn find_loop<'a>(m: &'a AffineModule, path: &LoopPath) -> Result<&'a AffineFor, TransformError> {
    let missing = || TransformError::NoSuchLoop(path.clone());
    let f = select_func(m, path).ok_or_else(missing)?;
    let mut ops = &f.body;
    let mut found = None;
    for &idx in &path.indices {
        let l = ops
            .iter()
            .filter_map(|op| match &op.kind {
                OpKind::For(l) => Some(l),
                _ => None,
            })
            .nth(idx)
            .ok_or_else(missing)?;
        ops = &l.body;
        found = Some(l);
    }
    found.ok_or_else(missing)
}

fn select_func<'a>(m: &'a AffineModule, path: &LoopPath) -> Option<&'a AffineFunc> {
    match &path.func {
        Some(name) => m.func(name),
        None => m.funcs.first(),
    }
}

type Replacement = (Vec<AffineOp>, HashMap<String, String>);

/// Replaces the loop at `path` by the ops returned from `replace`, then
/// renames uses per the returned map throughout the function.
fn rewrite<F>(m: &AffineModule, path: &LoopPath, replace: F) -> Result<AffineModule, TransformError>
where
    F: FnOnce(&AffineFunc, &AffineOp, &mut NameGen) -> Result<Replacement, TransformError>,
{
    let target = find_loop(m, path)?;
    if target.contains_loop() {
        return Err(TransformError::NotInnermost(path.clone()));
    }
    let func = select_func(m, path).expect("found by find_loop");
    let mut names = NameGen::for_func(func);

    let mut out = m.clone();
    let fi = out.funcs.iter().position(|f| f.name == func.name).expect("function exists");
    let mut ops = &mut out.funcs[fi].body;
    let (last, prefix) = path.indices.split_last().expect("non-empty path");
    for &idx in prefix {
        let pos = nth_loop_position(ops, idx);
        let OpKind::For(l) = &mut ops[pos].kind else { unreachable!() };
        ops = &mut l.body;
    }
    let pos = nth_loop_position(ops, *last);
    let old = ops[pos].clone();
    let (replacement, renames) = replace(func, &old, &mut names)?;
    ops.splice(pos..=pos, replacement);
    if !renames.is_empty() {
        rename_uses(&mut out.funcs[fi].body, &renames);
    }
    Ok(out)
}

fn nth_loop_position(ops: &[AffineOp], n: usize) -> usize {
    ops.iter()
        .enumerate()
        .filter(|(_, op)| matches!(op.kind, OpKind::For(_)))
        .nth(n)
        .map(|(i, _)| i)
        .expect("path validated by find_loop")
}

fn rename_uses(ops: &mut [AffineOp], map: &HashMap<String, String>) {
    let r = |s: &mut String| {
        if let Some(n) = map.get(s.as_str()) {
            *s = n.clone();
        }
    };
    for op in ops {
        match &mut op.kind {
            OpKind::Store { value, .. } => r(value),
            OpKind::MulI { lhs, rhs } | OpKind::AddI { lhs, rhs } => {
                r(lhs);
                r(rhs);
            }
            OpKind::For(l) => {
                for a in &mut l.iter_args {
                    r(&mut a.init);
                }
                rename_uses(&mut l.body, map);
            }
            OpKind::Yield { values } => values.iter_mut().for_each(r),
            OpKind::Constant { .. } | OpKind::Load { .. } | OpKind::Return => {}
        }
    }
}

/// Deterministic fresh-name source seeded with every name in the function.
pub(crate) struct NameGen {
    used: HashSet<String>,
}

impl NameGen {
    fn for_func(f: &AffineFunc) -> Self {
        let mut used = HashSet::new();
        for (a, _) in &f.args {
            used.insert(a.clone());
        }
        collect_names(&f.body, &mut used);
        NameGen { used }
    }

    fn fresh(&mut self, base: &str, copy: u64) -> String {
        let mut name = format!("{base}_u{copy}");
        let mut bump = 0;
        while self.used.contains(&name) {
            bump += 1;
            name = format!("{base}_u{copy}_{bump}");
        }
        self.used.insert(name.clone());
        name
    }
}

fn collect_names(ops: &[AffineOp], used: &mut HashSet<String>) {
    for op in ops {
        used.extend(op.results.iter().cloned());
        if let OpKind::For(l) = &op.kind {
            used.insert(l.iv.clone());
            used.extend(l.iter_args.iter().map(|a| a.name.clone()));
            collect_names(&l.body, used);
        }
    }
}

struct CopiedBody {
    ops: Vec<AffineOp>,
    yielded: Vec<String>,
}

/// Produces one renamed copy of an innermost loop body.
struct Copier<'a> {
    names: &'a mut NameGen,
    copy: u64,
    body: &'a [AffineOp],
    map: HashMap<String, String>,
}

impl<'a> Copier<'a> {
    fn new(names: &'a mut NameGen, copy: u64, l: &'a AffineFor, carried: &[String]) -> Self {
        let map = l.iter_args.iter().map(|a| a.name.clone()).zip(carried.iter().cloned()).collect();
        Copier { names, copy, body: &l.body, map }
    }

    fn get(&self, name: &str) -> String {
        self.map.get(name).cloned().unwrap_or_else(|| name.to_string())
    }

    fn copy_body(mut self, index: impl Fn(&AffineExpr) -> Result<AffineExpr, AffineError>) -> Result<CopiedBody, TransformError> {
        let mut ops = Vec::new();
        let mut yielded = Vec::new();
        for op in self.body {
            let kind = match &op.kind {
                OpKind::Yield { values } => {
                    yielded = values.iter().map(|v| self.get(v)).collect();
                    continue;
                }
                OpKind::Constant { value } => OpKind::Constant { value: *value },
                OpKind::Load { memref, index: e } => OpKind::Load { memref: memref.clone(), index: index(e)? },
                OpKind::Store { value, memref, index: e } => {
                    OpKind::Store { value: self.get(value), memref: memref.clone(), index: index(e)? }
                }
                OpKind::MulI { lhs, rhs } => OpKind::MulI { lhs: self.get(lhs), rhs: self.get(rhs) },
                OpKind::AddI { lhs, rhs } => OpKind::AddI { lhs: self.get(lhs), rhs: self.get(rhs) },
                OpKind::For(_) | OpKind::Return => unreachable!("innermost loop bodies hold straight-line ops"),
            };
            let results = op
                .results
                .iter()
                .map(|r| {
                    let fresh = self.names.fresh(r, self.copy);
                    self.map.insert(r.clone(), fresh.clone());
                    fresh
                })
                .collect();
            ops.push(AffineOp { results, kind });
        }
        Ok(CopiedBody { ops, yielded })
    }
}
