//! Random program generators for property tests and the acceptance suite.
//!
//! Generated functions always verify and keep every memory access in
//! bounds, so they can be run through the interpreter and the simulator.
//! Generated components are While-free, so their latency is static.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::affine_ir::{AffineExpr, AffineFor, AffineFunc, AffineModule, AffineOp, IterArg, MemRefType, OpKind};
use crate::hw_ir::{Cell, CellKind, Control, Group, HwComponent, Literal, PortRef, Src};
use crate::memory::{MemoryImage, MemorySet};

/// Size knobs for [`random_function`].
#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    pub max_args: usize,
    pub max_length: u64,
    pub max_depth: usize,
    pub max_ops: usize,
    pub max_trip: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { max_args: 3, max_length: 16, max_depth: 3, max_ops: 6, max_trip: 3 }
    }
}

struct Loop {
    iv: String,
    lower: i64,
    last: i64,
}

struct FuncGen<'r, R: Rng> {
    rng: &'r mut R,
    cfg: GenConfig,
    args: Vec<(String, u64)>,
    next: usize,
}

impl<R: Rng> FuncGen<'_, R> {
    fn fresh(&mut self, prefix: &str) -> String {
        let name = format!("{prefix}{}", self.next);
        self.next += 1;
        name
    }

    /// An index expression that stays inside some memref for every iteration.
    fn access(&mut self, loops: &[Loop]) -> (String, AffineExpr) {
        let mut terms = Vec::new();
        let (mut lo, mut hi) = (0i64, 0i64);
        for l in loops {
            if self.rng.gen_bool(0.5) {
                continue;
            }
            let c = self.rng.gen_range(-2i64..=3);
            if c == 0 {
                continue;
            }
            let (a, b) = (c * l.lower, c * l.last);
            lo += a.min(b);
            hi += a.max(b);
            terms.push((l.iv.clone(), c));
        }
        let span = (hi - lo) as u64;
        let fits: Vec<&(String, u64)> = self.args.iter().filter(|(_, len)| *len > span).collect();
        let (memref, len) = match fits.choose(self.rng) {
            Some(&(name, len)) => (name.clone(), *len),
            None => {
                terms.clear();
                lo = 0;
                let (name, len) = self.args.choose(self.rng).expect("at least one argument").clone();
                (name, len)
            }
        };
        let span = if terms.is_empty() { 0 } else { span };
        let slack = len - 1 - span;
        let constant = -lo + self.rng.gen_range(0..=slack) as i64;
        (memref, AffineExpr { terms, constant })
    }

    fn block(&mut self, loops: &mut Vec<Loop>, pool: &mut Vec<String>, depth: usize) -> Vec<AffineOp> {
        let mut ops = Vec::new();
        let count = self.rng.gen_range(1..=self.cfg.max_ops);
        for _ in 0..count {
            let choice = self.rng.gen_range(0..10);
            match choice {
                0 => {
                    let name = self.fresh("v");
                    let value = match self.rng.gen_range(0..3) {
                        0 => self.rng.gen(),
                        _ => self.rng.gen_range(-4..=4),
                    };
                    ops.push(AffineOp::with_result(name.clone(), OpKind::Constant { value }));
                    pool.push(name);
                }
                1 | 2 => {
                    let (memref, index) = self.access(loops);
                    let name = self.fresh("v");
                    ops.push(AffineOp::with_result(name.clone(), OpKind::Load { memref, index }));
                    pool.push(name);
                }
                3 | 4 if pool.len() >= 2 => {
                    let lhs = pool.choose(self.rng).unwrap().clone();
                    let rhs = pool.choose(self.rng).unwrap().clone();
                    let name = self.fresh("v");
                    let kind = if choice == 3 { OpKind::MulI { lhs, rhs } } else { OpKind::AddI { lhs, rhs } };
                    ops.push(AffineOp::with_result(name.clone(), kind));
                    pool.push(name);
                }
                5 | 6 if !pool.is_empty() => {
                    let value = pool.choose(self.rng).unwrap().clone();
                    let (memref, index) = self.access(loops);
                    ops.push(AffineOp::new(OpKind::Store { value, memref, index }));
                }
                7..=9 if depth < self.cfg.max_depth => {
                    let op = self.for_op(loops, pool, depth);
                    pool.extend(op.results.iter().cloned());
                    ops.push(op);
                }
                _ => {}
            }
        }
        ops
    }

    fn for_op(&mut self, loops: &mut Vec<Loop>, pool: &[String], depth: usize) -> AffineOp {
        let lower = self.rng.gen_range(-3i64..=3);
        let step = self.rng.gen_range(1i64..=2);
        let trip = self.rng.gen_range(0..=self.cfg.max_trip) as i64;
        let upper = lower + trip * step;
        let iv = self.fresh("i");
        let n_iter = if pool.is_empty() { 0 } else { self.rng.gen_range(0..=2) };
        let mut iter_args = Vec::new();
        for _ in 0..n_iter {
            let init = pool.choose(self.rng).unwrap().clone();
            iter_args.push(IterArg { name: self.fresh("a"), init });
        }
        let mut inner: Vec<String> = pool.to_vec();
        inner.extend(iter_args.iter().map(|a| a.name.clone()));
        // An empty range still needs a bounding box for index generation.
        let last = if trip == 0 { lower } else { lower + (trip - 1) * step };
        loops.push(Loop { iv: iv.clone(), lower, last });
        let mut body = self.block(loops, &mut inner, depth + 1);
        loops.pop();
        if !iter_args.is_empty() {
            let values = iter_args.iter().map(|_| inner.choose(self.rng).unwrap().clone()).collect();
            body.push(AffineOp::new(OpKind::Yield { values }));
        }
        let results = iter_args.iter().map(|_| self.fresh("r")).collect();
        AffineOp { results, kind: OpKind::For(AffineFor { iv, lower, upper, step, iter_args, body }) }
    }
}

/// A verified function over 1-D i32 memrefs with in-bounds accesses.
pub fn random_function<R: Rng>(rng: &mut R, name: &str, cfg: GenConfig) -> AffineFunc {
    let n_args = rng.gen_range(1..=cfg.max_args.max(1));
    let args: Vec<(String, u64)> = (0..n_args).map(|k| (format!("m{k}"), rng.gen_range(1..=cfg.max_length.max(1)))).collect();
    let mut g = FuncGen { rng, cfg, args: args.clone(), next: 0 };
    let mut body = g.block(&mut Vec::new(), &mut Vec::new(), 0);
    body.push(AffineOp::new(OpKind::Return));
    AffineFunc { name: name.to_string(), args: args.into_iter().map(|(n, len)| (n, MemRefType::new(len, 0))).collect(), body }
}

/// A module of one to three random functions named `f0`, `f1`, ...
pub fn random_module<R: Rng>(rng: &mut R, cfg: GenConfig) -> AffineModule {
    let count = rng.gen_range(1..=3);
    AffineModule { funcs: (0..count).map(|k| random_function(rng, &format!("f{k}"), cfg)).collect() }
}

/// Random contents for every memref argument of `f`, keyed by argument name.
pub fn random_images<R: Rng>(rng: &mut R, f: &AffineFunc) -> MemorySet {
    f.args
        .iter()
        .map(|(name, ty)| {
            let data = (0..ty.length).map(|_| rng.gen()).collect();
            (name.clone(), MemoryImage::new(name.clone(), data))
        })
        .collect()
}

/// A While-free component whose control tree mixes Seq, Par and Repeat.
///
/// Every Enable names its own group, and each group increments its own
/// register, so Par children never share cells.
pub fn random_static_component<R: Rng>(rng: &mut R, max_depth: usize) -> HwComponent {
    let mut c = HwComponent::new("static_tree");
    let control = static_node(rng, &mut c, max_depth);
    c.control = control;
    c
}

fn static_node<R: Rng>(rng: &mut R, c: &mut HwComponent, depth: usize) -> Control {
    let leaf = depth == 0 || rng.gen_bool(0.3);
    if leaf {
        return Control::Enable(counting_group(rng, c));
    }
    match rng.gen_range(0..3) {
        0 | 1 => {
            let n = rng.gen_range(0..=3);
            let children = (0..n).map(|_| static_node(rng, c, depth - 1)).collect();
            if rng.gen_bool(0.5) {
                Control::Seq(children)
            } else {
                Control::Par(children)
            }
        }
        _ => Control::Repeat { count: rng.gen_range(0..=3), body: Box::new(static_node(rng, c, depth - 1)) },
    }
}

fn counting_group<R: Rng>(rng: &mut R, c: &mut HwComponent) -> String {
    let k = c.groups.len();
    let (reg, add, name) = (format!("r{k}"), format!("add{k}"), format!("g{k}"));
    c.cells.push(Cell::new(&reg, CellKind::Register { width: 32 }));
    c.cells.push(Cell::new(&add, CellKind::Adder { width: 32 }));
    let mut g = Group::new(&name);
    g.latency = rng.gen_range(1..=3);
    g.assign(PortRef::new(&add, "left"), Src::Port(PortRef::new(&reg, "out")));
    g.assign(PortRef::new(&add, "right"), Src::Lit(Literal::from_i32(1)));
    g.assign(PortRef::new(&reg, "in"), Src::Port(PortRef::new(&add, "out")));
    g.assign(PortRef::new(&reg, "write_en"), Src::Lit(Literal::bit(true)));
    c.groups.push(g);
    name
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine_ir::{interpret, verify_func, verify_module};
    use crate::hw_ir::validate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn functions_verify_and_run() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 0..300 {
            let f = random_function(&mut rng, "f", GenConfig::default());
            assert!(verify_func(&f).is_empty(), "case {k}: {:?}", verify_func(&f));
            let mems = random_images(&mut rng, &f);
            interpret(&f, &mems).unwrap_or_else(|e| panic!("case {k}: {e}"));
        }
    }

    #[test]
    fn modules_verify() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            assert!(verify_module(&random_module(&mut rng, GenConfig::default())).is_empty());
        }
    }

    #[test]
    fn static_components_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let c = random_static_component(&mut rng, 4);
            assert!(validate(&c).is_empty(), "{:?}", validate(&c));
            assert!(!c.control.has_while());
        }
    }
}
