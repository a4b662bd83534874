//! Cycle-accurate execution at the hardware-IR level.
//!
//! Each cycle, combinational values settle from the current register and
//! memory state, then all enabled writes commit together. `While` spends one
//! cycle in its condition group before every body run, sampling the
//! condition port in that cycle. `Par` children advance in lockstep.

mod bench;
mod datapath;

use std::fmt;

use serde::Serialize;

pub use bench::{bench, gemm_inputs, BenchError, BenchRow, BenchTable, Variant, DEFAULT_SEED};
pub use datapath::Datapath;

use crate::diagnostic::Diagnostic;
use crate::hw_ir::{validate, Control, HwComponent};
use crate::memory::MemorySet;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("done not reached within {max_cycles} cycles")]
    Timeout { max_cycles: u64 },
    #[error("address {address} out of bounds for memory `{memory}` of length {length}")]
    OutOfBounds { memory: String, address: u64, length: u64 },
    #[error("no image bound to memory `{name}`")]
    MissingImage { name: String },
    #[error("image for `{name}` has {actual} elements, memory holds {expected}")]
    LengthMismatch { name: String, expected: u64, actual: u64 },
    #[error("component is not valid: {}", .0.first().map(ToString::to_string).unwrap_or_default())]
    Invalid(Vec<Diagnostic>),
    #[error("{message}")]
    Structural { message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEntry {
    pub cycle: u64,
    pub groups: Vec<String>,
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.cycle, self.groups.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimResult {
    pub cycles: u64,
    /// Final contents of every memory cell, keyed by cell name.
    pub memories: MemorySet,
    pub trace: Option<Vec<TraceEntry>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    pub max_cycles: u64,
    pub trace: bool,
}

pub fn simulate(c: &HwComponent, mems: &MemorySet, max_cycles: u64) -> Result<SimResult, SimError> {
    simulate_with(c, mems, SimOptions { max_cycles, trace: false })
}

pub fn simulate_with(c: &HwComponent, mems: &MemorySet, opts: SimOptions) -> Result<SimResult, SimError> {
    let diags = validate(c);
    if !diags.is_empty() {
        return Err(SimError::Invalid(diags));
    }
    let mut dp = Datapath::new(c, mems)?;
    let mut trace = opts.trace.then(Vec::new);
    let mut cycles = 0u64;
    let mut frame = Frame::start(c, &c.control);
    let mut active = Vec::new();
    let mut conds = Vec::new();
    while let Some(f) = frame.as_mut() {
        if cycles >= opts.max_cycles {
            return Err(SimError::Timeout { max_cycles: opts.max_cycles });
        }
        active.clear();
        conds.clear();
        f.collect(&mut active, &mut conds);
        let ports: Vec<usize> = conds
            .iter()
            .map(|p: &&crate::hw_ir::PortRef| dp.port_index(p).expect("validated condition port"))
            .collect();
        let sampled = dp.cycle(&active, &ports)?;
        if let Some(t) = trace.as_mut() {
            t.push(TraceEntry { cycle: cycles, groups: active.iter().map(|g| g.to_string()).collect() });
        }
        cycles += 1;
        let mut samples = sampled.into_iter().map(|v| v & 1 == 1);
        if f.advance(c, &mut samples) {
            frame = None;
        }
    }
    Ok(SimResult { cycles, memories: dp.memories(), trace })
}

/// Runtime position inside a control node that still has cycles left.
enum Frame<'a> {
    Enable { group: &'a str, left: u64 },
    Seq { children: &'a [Control], index: usize, child: Box<Frame<'a>> },
    Par { children: Vec<Option<Frame<'a>>> },
    WhileCond { node: &'a Control },
    WhileBody { node: &'a Control, child: Box<Frame<'a>> },
    Repeat { body: &'a Control, left: u64, child: Box<Frame<'a>> },
}

impl<'a> Frame<'a> {
    /// `None` when `n` finishes in zero cycles.
    fn start(c: &'a HwComponent, n: &'a Control) -> Option<Frame<'a>> {
        match n {
            Control::Enable(g) => {
                let left = c.group(g).map_or(0, |g| g.latency);
                (left > 0).then_some(Frame::Enable { group: g, left })
            }
            Control::Seq(cs) => Self::seq_from(c, cs, 0),
            Control::Par(cs) => {
                let children: Vec<_> = cs.iter().map(|ch| Frame::start(c, ch)).collect();
                children.iter().any(Option::is_some).then_some(Frame::Par { children })
            }
            Control::While { .. } => Some(Frame::WhileCond { node: n }),
            Control::Repeat { count, body } => {
                if *count == 0 {
                    return None;
                }
                Frame::start(c, body).map(|child| Frame::Repeat { body, left: *count, child: Box::new(child) })
            }
        }
    }

    fn seq_from(c: &'a HwComponent, cs: &'a [Control], from: usize) -> Option<Frame<'a>> {
        (from..cs.len()).find_map(|i| Frame::start(c, &cs[i]).map(|child| Frame::Seq { children: cs, index: i, child: Box::new(child) }))
    }

    fn collect(&self, groups: &mut Vec<&'a str>, conds: &mut Vec<&'a crate::hw_ir::PortRef>) {
        match self {
            Frame::Enable { group, .. } => groups.push(group),
            Frame::Seq { child, .. } | Frame::WhileBody { child, .. } | Frame::Repeat { child, .. } => child.collect(groups, conds),
            Frame::Par { children } => children.iter().flatten().for_each(|ch| ch.collect(groups, conds)),
            Frame::WhileCond { node } => {
                if let Control::While { port, cond, .. } = node {
                    groups.push(cond);
                    conds.push(port);
                }
            }
        }
    }

    /// Moves past the cycle just executed. `samples` yields condition values
    /// in the order `collect` listed them. Returns true when finished.
    fn advance(&mut self, c: &'a HwComponent, samples: &mut impl Iterator<Item = bool>) -> bool {
        match self {
            Frame::Enable { left, .. } => {
                *left -= 1;
                *left == 0
            }
            Frame::Seq { children, index, child } => {
                if !child.advance(c, samples) {
                    return false;
                }
                match Self::seq_from(c, children, *index + 1) {
                    Some(next) => {
                        *self = next;
                        false
                    }
                    None => true,
                }
            }
            Frame::Par { children } => {
                for slot in children.iter_mut() {
                    if let Some(ch) = slot {
                        if ch.advance(c, samples) {
                            *slot = None;
                        }
                    }
                }
                children.iter().all(Option::is_none)
            }
            Frame::WhileCond { node } => {
                let node = *node;
                if !samples.next().unwrap_or(false) {
                    return true;
                }
                let Control::While { body, .. } = node else { unreachable!() };
                if let Some(child) = Frame::start(c, body) {
                    *self = Frame::WhileBody { node, child: Box::new(child) };
                }
                false
            }
            Frame::WhileBody { node, child } => {
                if child.advance(c, samples) {
                    *self = Frame::WhileCond { node };
                }
                false
            }
            Frame::Repeat { body, left, child } => {
                if !child.advance(c, samples) {
                    return false;
                }
                *left -= 1;
                if *left == 0 {
                    return true;
                }
                match Frame::start(c, body) {
                    Some(next) => {
                        **child = next;
                        false
                    }
                    None => true,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine_ir::{gen_gemm, interpret};
    use crate::hw_ir::{static_latency, Cell, CellKind, Group, Latency, Literal, PortRef, Predicate, Src};
    use crate::lowering::{lower, lower_detailed, repeat_form};
    use crate::memory::{memory_set, MemoryImage};
    use crate::transforms::{unroll_full, LoopPath};

    fn gemm_inputs(n: usize, a: &[i32], b: &[i32]) -> MemorySet {
        memory_set([
            MemoryImage::zeros("arg0", n * n),
            MemoryImage::new("arg1", a.to_vec()),
            MemoryImage::new("arg2", b.to_vec()),
        ])
    }

    fn nested(n: u64) -> u64 {
        3 * n * n * n + 6 * n * n + 4 * n + 2
    }

    fn flattened(n: u64) -> u64 {
        n * n * n + 3 * n * n + 4 * n + 2
    }

    #[test]
    fn gemm_2x2() {
        let f = &gen_gemm(2).funcs[0];
        let mems = gemm_inputs(2, &[1, 2, 3, 4], &[5, 6, 7, 8]);
        let r = simulate(&lower(f).unwrap(), &mems, 10_000).unwrap();
        assert_eq!(r.memories["arg0"].data, [19, 22, 43, 50]);
        assert_eq!(r.memories, interpret(f, &mems).unwrap());
        assert_eq!(r.cycles, nested(2));
    }

    #[test]
    fn cycle_closed_forms() {
        let path: LoopPath = "0.0.0".parse().unwrap();
        for n in 1..=6u64 {
            let m = gen_gemm(n);
            let k = (n * n) as usize;
            let a: Vec<i32> = (0..k as i32).map(|i| i * 7 - 3).collect();
            let b: Vec<i32> = (0..k as i32).map(|i| 11 - i * 5).collect();
            let mems = gemm_inputs(n as usize, &a, &b);
            let want = interpret(&m.funcs[0], &mems).unwrap();
            let rn = simulate(&lower(&m.funcs[0]).unwrap(), &mems, u64::MAX).unwrap();
            let flat = unroll_full(&m, &path).unwrap();
            let rf = simulate(&lower(&flat.funcs[0]).unwrap(), &mems, u64::MAX).unwrap();
            assert_eq!(rn.memories, want);
            assert_eq!(rf.memories, want);
            assert_eq!(rn.cycles, nested(n), "n={n}");
            assert_eq!(rf.cycles, flattened(n), "n={n}");
        }
    }

    #[test]
    fn timeout_and_missing_image() {
        let c = lower(&gen_gemm(2).funcs[0]).unwrap();
        let mems = gemm_inputs(2, &[0; 4], &[0; 4]);
        assert_eq!(simulate(&c, &mems, nested(2) - 1), Err(SimError::Timeout { max_cycles: nested(2) - 1 }));
        assert!(simulate(&c, &mems, nested(2)).is_ok());
        let mut partial = mems.clone();
        partial.remove("arg1");
        assert!(matches!(simulate(&c, &partial, 100), Err(SimError::MissingImage { .. })));
        partial.insert("arg1".into(), MemoryImage::zeros("arg1", 3));
        assert!(matches!(simulate(&c, &partial, 100), Err(SimError::LengthMismatch { .. })));
    }

    #[test]
    fn out_of_bounds_write() {
        let mut c = HwComponent::new("t");
        c.cells.push(Cell::new("m", CellKind::Memory { width: 32, length: 2 }));
        let mut g = Group::new("w");
        g.assign(PortRef::new("m", "write_addr"), Src::Lit(Literal::from_i32(2)));
        g.assign(PortRef::new("m", "write_data"), Src::Lit(Literal::from_i32(9)));
        g.assign(PortRef::new("m", "write_en"), Src::Lit(Literal::bit(true)));
        c.groups.push(g);
        c.control = Control::Enable("w".into());
        let mems = memory_set([MemoryImage::zeros("m", 2)]);
        assert_eq!(simulate(&c, &mems, 10), Err(SimError::OutOfBounds { memory: "m".into(), address: 2, length: 2 }));
    }

    #[test]
    fn empty_control_takes_no_cycles() {
        let c = HwComponent::new("e");
        assert_eq!(simulate(&c, &MemorySet::new(), 1).unwrap().cycles, 0);
    }

    #[test]
    fn par_lockstep_and_trace() {
        let mut c = HwComponent::new("p");
        for r in ["a", "b"] {
            c.cells.push(Cell::new(r, CellKind::Register { width: 32 }));
            c.cells.push(Cell::new(format!("{r}_add"), CellKind::Adder { width: 32 }));
            let mut g = Group::new(format!("inc_{r}"));
            g.assign(PortRef::new(format!("{r}_add"), "left"), Src::Port(PortRef::new(r, "out")));
            g.assign(PortRef::new(format!("{r}_add"), "right"), Src::Lit(Literal::from_i32(1)));
            g.assign(PortRef::new(r, "in"), Src::Port(PortRef::new(format!("{r}_add"), "out")));
            g.assign(PortRef::new(r, "write_en"), Src::Lit(Literal::bit(true)));
            c.groups.push(g);
        }
        c.control = Control::Par(vec![
            Control::Enable("inc_a".into()),
            Control::Repeat { count: 3, body: Box::new(Control::Enable("inc_b".into())) },
        ]);
        let r = simulate_with(&c, &MemorySet::new(), SimOptions { max_cycles: 10, trace: true }).unwrap();
        assert_eq!(r.cycles, 3);
        assert_eq!(static_latency(&c, &c.control), Latency::Cycles(3));
        let t = r.trace.unwrap();
        assert_eq!(t[0].groups, ["inc_a", "inc_b"]);
        assert_eq!(t[2].to_string(), "2 inc_b");
    }

    #[test]
    fn zero_trip_while() {
        let mut c = HwComponent::new("w");
        c.cells.push(Cell::new("lt", CellKind::Comparator { width: 32, predicate: Predicate::Lt }));
        c.cells.push(Cell::new("r", CellKind::Register { width: 1 }));
        let mut g = Group::new("cond");
        g.assign(PortRef::new("lt", "left"), Src::Lit(Literal::from_i32(5)));
        g.assign(PortRef::new("lt", "right"), Src::Lit(Literal::from_i32(-5)));
        g.assign(PortRef::new("r", "in"), Src::Port(PortRef::new("lt", "out")));
        g.assign(PortRef::new("r", "write_en"), Src::Lit(Literal::bit(true)));
        c.groups.push(g);
        c.control = Control::While { port: PortRef::new("lt", "out"), cond: "cond".into(), body: Box::new(Control::Enable("cond".into())) };
        assert_eq!(simulate(&c, &MemorySet::new(), 10).unwrap().cycles, 1);
    }

    #[test]
    fn repeat_form_matches_while_form() {
        for n in [1, 3] {
            let l = lower_detailed(&gen_gemm(n).funcs[0]).unwrap();
            let mems = gemm_inputs(n as usize, &vec![2; (n * n) as usize], &vec![3; (n * n) as usize]);
            let dynamic = simulate(&l.component, &mems, u64::MAX).unwrap();
            let mut static_c = l.component.clone();
            static_c.control = repeat_form(&l.component.control, &l.trips);
            let again = simulate(&static_c, &mems, u64::MAX).unwrap();
            assert_eq!(static_latency(&static_c, &static_c.control), Latency::Cycles(dynamic.cycles));
            assert_eq!(again.cycles, dynamic.cycles);
            assert_eq!(again.memories, dynamic.memories);
        }
    }
}
