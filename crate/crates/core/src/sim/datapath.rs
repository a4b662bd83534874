use std::collections::HashMap;

use super::SimError;
use crate::hw_ir::{mask, CellKind, HwComponent, PortRef, Predicate, Src};
use crate::memory::{MemoryImage, MemorySet};

#[derive(Clone, Copy)]
enum CSrc {
    Lit(u64),
    Port(usize),
}

#[derive(Clone, Copy)]
struct CAssign {
    dest: usize,
    src: CSrc,
    guard: Option<usize>,
}

#[derive(Clone, Copy)]
enum PortRole {
    /// Driven by assignments; reads 0 when undriven.
    Input,
    RegOut { reg: usize },
    MemRead { mem: usize, addr: usize },
    Binary { op: BinOp, left: usize, right: usize, width: u32 },
    Const(u64),
}

#[derive(Clone, Copy)]
enum BinOp {
    Add,
    Mul,
    Lt,
    Eq,
}

struct RegSlot {
    width: u32,
    input: usize,
    enable: usize,
}

struct MemSlot {
    cell: String,
    data: Vec<u32>,
    write_addr: usize,
    write_data: usize,
    write_en: usize,
}

/// Cell state plus precompiled wiring. Each call to [`Datapath::cycle`]
/// settles the combinational network for a set of active groups, samples
/// requested ports, then commits every enabled synchronous write at once.
pub struct Datapath {
    ports: HashMap<(String, String), usize>,
    roles: Vec<PortRole>,
    regs: Vec<RegSlot>,
    reg_vals: Vec<u64>,
    mems: Vec<MemSlot>,
    groups: HashMap<String, Vec<CAssign>>,
    driver: Vec<(u64, CAssign)>,
    memo: Vec<(u64, u64)>,
    visiting: Vec<u64>,
    stamp: u64,
}

impl Datapath {
    /// Binds memory cells to images keyed by cell name. Registers start at 0.
    pub fn new(c: &HwComponent, mems: &MemorySet) -> Result<Self, SimError> {
        let mut dp = Datapath {
            ports: HashMap::new(),
            roles: Vec::new(),
            regs: Vec::new(),
            reg_vals: Vec::new(),
            mems: Vec::new(),
            groups: HashMap::new(),
            driver: Vec::new(),
            memo: Vec::new(),
            visiting: Vec::new(),
            stamp: 0,
        };
        for cell in &c.cells {
            let mut idx = HashMap::new();
            for (port, _, _) in cell.kind.ports() {
                let i = dp.roles.len();
                dp.roles.push(PortRole::Input);
                dp.ports.insert((cell.name.clone(), port.to_string()), i);
                idx.insert(port, i);
            }
            match cell.kind {
                CellKind::Register { width } => {
                    dp.roles[idx["out"]] = PortRole::RegOut { reg: dp.regs.len() };
                    dp.regs.push(RegSlot { width, input: idx["in"], enable: idx["write_en"] });
                    dp.reg_vals.push(0);
                }
                CellKind::Memory { length, .. } => {
                    let img = mems.get(&cell.name).ok_or_else(|| SimError::MissingImage { name: cell.name.clone() })?;
                    if img.data.len() as u64 != length {
                        return Err(SimError::LengthMismatch { name: cell.name.clone(), expected: length, actual: img.data.len() as u64 });
                    }
                    dp.roles[idx["read_data"]] = PortRole::MemRead { mem: dp.mems.len(), addr: idx["read_addr"] };
                    dp.mems.push(MemSlot {
                        cell: cell.name.clone(),
                        data: img.data.iter().map(|&v| v as u32).collect(),
                        write_addr: idx["write_addr"],
                        write_data: idx["write_data"],
                        write_en: idx["write_en"],
                    });
                }
                CellKind::Adder { width } | CellKind::Multiplier { width } | CellKind::Comparator { width, .. } => {
                    let op = match cell.kind {
                        CellKind::Adder { .. } => BinOp::Add,
                        CellKind::Multiplier { .. } => BinOp::Mul,
                        CellKind::Comparator { predicate: Predicate::Lt, .. } => BinOp::Lt,
                        _ => BinOp::Eq,
                    };
                    dp.roles[idx["out"]] = PortRole::Binary { op, left: idx["left"], right: idx["right"], width };
                }
                CellKind::Constant { width, value } => dp.roles[idx["out"]] = PortRole::Const(value & mask(width)),
            }
        }
        let n = dp.roles.len();
        dp.driver = vec![(0, CAssign { dest: 0, src: CSrc::Lit(0), guard: None }); n];
        dp.memo = vec![(0, 0); n];
        dp.visiting = vec![0; n];
        for g in &c.groups {
            let mut compiled = Vec::with_capacity(g.assignments.len());
            for a in &g.assignments {
                let dest = dp.index(&a.dest)?;
                let src = match &a.src {
                    Src::Lit(l) => CSrc::Lit(l.value),
                    Src::Port(p) => CSrc::Port(dp.index(p)?),
                };
                let guard = a.guard.as_ref().map(|p| dp.index(p)).transpose()?;
                compiled.push(CAssign { dest, src, guard });
            }
            dp.groups.insert(g.name.clone(), compiled);
        }
        Ok(dp)
    }

    fn index(&self, p: &PortRef) -> Result<usize, SimError> {
        self.ports
            .get(&(p.cell.clone(), p.port.clone()))
            .copied()
            .ok_or_else(|| SimError::Structural { message: format!("unknown port `{p}`") })
    }

    pub fn port_index(&self, p: &PortRef) -> Option<usize> {
        self.ports.get(&(p.cell.clone(), p.port.clone())).copied()
    }

    /// Runs one clock cycle with `active` groups driving the wires. Returns
    /// the value of each port in `sample`, read before the clock edge.
    pub fn cycle(&mut self, active: &[&str], sample: &[usize]) -> Result<Vec<u64>, SimError> {
        self.stamp += 1;
        let stamp = self.stamp;
        for g in active {
            let assigns = self.groups.get(*g).ok_or_else(|| SimError::Structural { message: format!("unknown group `{g}`") })?;
            for a in assigns {
                self.driver[a.dest] = (stamp, *a);
            }
        }
        let mut out = Vec::with_capacity(sample.len());
        for &p in sample {
            out.push(self.eval(p)?);
        }
        let mut reg_writes = Vec::new();
        for (i, r) in self.regs.iter().enumerate() {
            if self.driver[r.enable].0 == stamp {
                reg_writes.push((i, r.input, r.enable, r.width));
            }
        }
        let mut committed = Vec::with_capacity(reg_writes.len());
        for (i, input, enable, width) in reg_writes {
            if self.eval(enable)? & 1 == 1 {
                committed.push((i, self.eval(input)? & mask(width)));
            }
        }
        let mut mem_writes = Vec::new();
        for i in 0..self.mems.len() {
            let (en, addr, data) = (self.mems[i].write_en, self.mems[i].write_addr, self.mems[i].write_data);
            if self.driver[en].0 == stamp && self.eval(en)? & 1 == 1 {
                let a = self.eval(addr)?;
                let d = self.eval(data)? as u32;
                let m = &self.mems[i];
                if a >= m.data.len() as u64 {
                    return Err(SimError::OutOfBounds { memory: m.cell.clone(), address: a, length: m.data.len() as u64 });
                }
                mem_writes.push((i, a as usize, d));
            }
        }
        for (i, v) in committed {
            self.reg_vals[i] = v;
        }
        for (i, a, d) in mem_writes {
            self.mems[i].data[a] = d;
        }
        Ok(out)
    }

    fn eval(&mut self, p: usize) -> Result<u64, SimError> {
        let stamp = self.stamp;
        if self.memo[p].0 == stamp {
            return Ok(self.memo[p].1);
        }
        if self.visiting[p] == stamp {
            return Err(SimError::Structural { message: "combinational loop".into() });
        }
        self.visiting[p] = stamp;
        let v = match self.roles[p] {
            PortRole::Input => {
                let (s, a) = self.driver[p];
                if s != stamp {
                    0
                } else {
                    let on = match a.guard {
                        Some(g) => self.eval(g)? & 1 == 1,
                        None => true,
                    };
                    match (on, a.src) {
                        (false, _) => 0,
                        (true, CSrc::Lit(v)) => v,
                        (true, CSrc::Port(q)) => self.eval(q)?,
                    }
                }
            }
            PortRole::RegOut { reg } => self.reg_vals[reg],
            PortRole::Const(v) => v,
            PortRole::MemRead { mem, addr } => {
                let a = self.eval(addr)?;
                let m = &self.mems[mem];
                match m.data.get(a as usize).filter(|_| a < m.data.len() as u64) {
                    Some(&d) => d as u64,
                    None => return Err(SimError::OutOfBounds { memory: m.cell.clone(), address: a, length: m.data.len() as u64 }),
                }
            }
            PortRole::Binary { op, left, right, width } => {
                let l = self.eval(left)?;
                let r = self.eval(right)?;
                let m = mask(width);
                match op {
                    BinOp::Add => l.wrapping_add(r) & m,
                    BinOp::Mul => l.wrapping_mul(r) & m,
                    BinOp::Lt => (sign_extend(l, width) < sign_extend(r, width)) as u64,
                    BinOp::Eq => (l & m == r & m) as u64,
                }
            }
        };
        self.memo[p] = (stamp, v);
        Ok(v)
    }

    /// Final memory contents keyed by cell name.
    pub fn memories(&self) -> MemorySet {
        self.mems
            .iter()
            .map(|m| (m.cell.clone(), MemoryImage::new(&m.cell, m.data.iter().map(|&v| v as i32).collect())))
            .collect()
    }
}

fn sign_extend(v: u64, width: u32) -> i64 {
    let shift = 64 - width.min(64);
    ((v << shift) as i64) >> shift
}
