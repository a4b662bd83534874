use std::fmt;

use serde::Serialize;

use super::{CellKind, Control, HwComponent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Latency {
    Cycles(u64),
    Unbounded,
}

impl Latency {
    pub fn cycles(self) -> Option<u64> {
        match self {
            Latency::Cycles(n) => Some(n),
            Latency::Unbounded => None,
        }
    }
}

impl fmt::Display for Latency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Latency::Cycles(n) => write!(f, "{n}"),
            Latency::Unbounded => f.write_str("unbounded"),
        }
    }
}

/// Cycles taken by `n` when groups have the latencies declared in `c`.
/// Missing groups count as zero; saturates instead of overflowing.
pub fn static_latency(c: &HwComponent, n: &Control) -> Latency {
    match n {
        Control::Enable(g) => Latency::Cycles(c.group(g).map_or(0, |g| g.latency)),
        Control::Seq(cs) => {
            let mut total = 0u64;
            for child in cs {
                match static_latency(c, child) {
                    Latency::Cycles(k) => total = total.saturating_add(k),
                    Latency::Unbounded => return Latency::Unbounded,
                }
            }
            Latency::Cycles(total)
        }
        Control::Par(cs) => {
            let mut longest = 0u64;
            for child in cs {
                match static_latency(c, child) {
                    Latency::Cycles(k) => longest = longest.max(k),
                    Latency::Unbounded => return Latency::Unbounded,
                }
            }
            Latency::Cycles(longest)
        }
        Control::Repeat { count, body } => match static_latency(c, body) {
            Latency::Cycles(k) => Latency::Cycles(k.saturating_mul(*count)),
            Latency::Unbounded if *count == 0 => Latency::Cycles(0),
            Latency::Unbounded => Latency::Unbounded,
        },
        Control::While { .. } => Latency::Unbounded,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
pub struct ResourceReport {
    pub multipliers: u64,
    pub adders: u64,
    pub comparators: u64,
    pub registers: u64,
    pub memories: u64,
    pub memory_bits: u64,
}

pub fn resource_counts(c: &HwComponent) -> ResourceReport {
    let mut r = ResourceReport::default();
    for cell in &c.cells {
        match cell.kind {
            CellKind::Multiplier { .. } => r.multipliers += 1,
            CellKind::Adder { .. } => r.adders += 1,
            CellKind::Comparator { .. } => r.comparators += 1,
            CellKind::Register { .. } => r.registers += 1,
            CellKind::Memory { width, length } => {
                r.memories += 1;
                r.memory_bits += u64::from(width) * length;
            }
            CellKind::Constant { .. } => {}
        }
    }
    r
}
