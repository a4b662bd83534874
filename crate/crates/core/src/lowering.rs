//! Affine function to hardware component.
//!
//! Schedule, per construct:
//!
//! * `affine.for`: a 32-bit counter register, an `init` group, a signed `lt`
//!   comparator, a `cond` group that latches the comparison into a 1-bit
//!   register, and `While(lt.out, cond) { body; incr }`. A loop with
//!   `iter_args` gets one accumulator register per argument, loaded by an
//!   `acc_init` group placed before `init`.
//! * Loads, multiplies and adds accumulate into one open `compute` group. The
//!   group closes when it would read the same memory twice, before a store,
//!   before a nested loop, and at the end of the block. Values consumed after
//!   their group closed are captured into a fresh register by that group.
//! * `affine.store` is its own group. `affine.yield` writes the accumulators
//!   from the open group, or from a `yield` group when none is open.
//!
//! Every group takes one cycle. Memory addresses never use multipliers: each
//! distinct linear combination of induction variables in an index owns a
//! base register, seeded in the `init` group of its innermost loop and
//! bumped by `coeff * step` in that loop's `incr` group. A non-zero constant
//! offset costs one adder in the accessing group.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::affine_ir::{op_location, verify_func, AffineExpr, AffineFor, AffineFunc, AffineModule, OpKind, ELEMENT_WIDTH};
use crate::diagnostic::Diagnostic;
use crate::hw_ir::{Cell, CellKind, Control, Group, HwComponent, Literal, PortRef, Predicate, Src};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LowerError {
    #[error("{location}: unsupported construct: {message}")]
    UnsupportedConstruct { location: String, message: String },
    #[error("{}", .diagnostics.first().map(ToString::to_string).unwrap_or_default())]
    Invalid { diagnostics: Vec<Diagnostic> },
}

/// A lowered function plus the trip count of every loop, keyed by the name
/// of the loop's condition group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lowered {
    pub component: HwComponent,
    pub trips: BTreeMap<String, u64>,
    /// Memory cell for each memref argument.
    pub memories: BTreeMap<String, String>,
}

pub fn lower(f: &AffineFunc) -> Result<HwComponent, LowerError> {
    lower_detailed(f).map(|l| l.component)
}

pub fn lower_module(m: &AffineModule) -> Result<Vec<HwComponent>, LowerError> {
    let mut taken = HashSet::new();
    let mut out = Vec::with_capacity(m.funcs.len());
    for f in &m.funcs {
        let mut c = lower(f)?;
        let base = c.name.clone();
        let mut k = 1;
        while !taken.insert(c.name.clone()) {
            c.name = format!("{base}_{k}");
            k += 1;
        }
        out.push(c);
    }
    Ok(out)
}

pub fn lower_detailed(f: &AffineFunc) -> Result<Lowered, LowerError> {
    let diagnostics = verify_func(f);
    if !diagnostics.is_empty() {
        return Err(LowerError::Invalid { diagnostics });
    }
    let mut lw = Lowerer::new(f)?;
    let mut seq = Vec::new();
    lw.block(&f.body, &mut seq, &mut Vec::new())?;
    lw.close();
    lw.comp.control = Control::Seq(seq);
    lw.drop_idle_groups();
    let memories = lw.mems.iter().map(|(arg, cell)| (arg.to_string(), cell.clone())).collect();
    Ok(Lowered { component: lw.comp, trips: lw.trips, memories })
}

/// Verilog and SystemVerilog reserved words, plus the interface port names.
pub(crate) const RESERVED: &[&str] = &[
    "alias", "always", "always_comb", "always_ff", "always_latch", "and", "assert", "assign", "assume", "automatic",
    "before", "begin", "bind", "bins", "binsof", "bit", "break", "buf", "bufif0", "bufif1", "byte", "case", "casex",
    "casez", "cell", "chandle", "class", "clocking", "cmos", "config", "const", "constraint", "context", "continue",
    "cover", "covergroup", "coverpoint", "cross", "deassign", "default", "defparam", "design", "disable", "dist", "do",
    "edge", "else", "end", "endcase", "endclass", "endclocking", "endconfig", "endfunction", "endgenerate", "endgroup",
    "endinterface", "endmodule", "endpackage", "endprimitive", "endprogram", "endproperty", "endsequence",
    "endspecify", "endtable", "endtask", "enum", "event", "expect", "export", "extends", "extern", "final",
    "first_match", "for", "force", "foreach", "forever", "fork", "forkjoin", "function", "generate", "genvar",
    "highz0", "highz1", "if", "iff", "ifnone", "ignore_bins", "illegal_bins", "import", "incdir", "include",
    "initial", "inout", "input", "inside", "instance", "int", "integer", "interface", "intersect", "join", "join_any",
    "join_none", "large", "liblist", "library", "local", "localparam", "logic", "longint", "macromodule", "matches",
    "medium", "modport", "module", "nand", "negedge", "new", "nmos", "nor", "noshowcancelled", "not", "notif0",
    "notif1", "null", "or", "output", "package", "packed", "parameter", "pmos", "posedge", "primitive", "priority",
    "program", "property", "protected", "pull0", "pull1", "pulldown", "pullup", "pulsestyle_ondetect",
    "pulsestyle_onevent", "pure", "rand", "randc", "randcase", "randsequence", "rcmos", "real", "realtime", "ref",
    "reg", "release", "repeat", "return", "rnmos", "rpmos", "rtran", "rtranif0", "rtranif1", "scalared", "sequence",
    "shortint", "shortreal", "showcancelled", "signed", "small", "solve", "specify", "specparam", "static", "string",
    "strong0", "strong1", "struct", "super", "supply0", "supply1", "table", "tagged", "task", "this", "throughout",
    "time", "timeprecision", "timeunit", "tran", "tranif0", "tranif1", "tri", "tri0", "tri1", "triand", "trior",
    "trireg", "type", "typedef", "union", "unique", "unsigned", "use", "uwire", "var", "vectored", "virtual", "void",
    "wait", "wait_order", "wand", "weak0", "weak1", "while", "wildcard", "wire", "with", "within", "wor", "xnor",
    "xor", "clk", "reset", "go", "done",
];

/// Maps `raw` onto a Verilog identifier that is not reserved and does not
/// start with the backend's private `fsm_` prefix.
pub fn hardware_name(raw: &str) -> String {
    let mut s: String = raw.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit()) || s.starts_with("fsm_") {
        s.insert_str(0, "m_");
    }
    if RESERVED.contains(&s.as_str()) {
        s.push_str("_0");
    }
    s
}

enum Bind {
    Fixed(Src),
    /// Combinational output only valid while `group` is active.
    Local { src: Src, group: usize },
}

struct Open {
    group: usize,
    reads: HashSet<String>,
}

/// Nonzero `(loop id, coefficient mod 2^32)` pairs, outermost loop first.
type BaseKey = Vec<(usize, u32)>;

struct Base {
    reg: String,
    adder: String,
}

struct Lowerer<'f> {
    f: &'f AffineFunc,
    comp: HwComponent,
    used: HashSet<String>,
    counter: u64,
    mems: HashMap<&'f str, String>,
    binds: HashMap<&'f str, Bind>,
    loop_ids: HashMap<&'f str, usize>,
    loops: Vec<(i64, i64)>,
    keys: BTreeSet<BaseKey>,
    bases: BTreeMap<BaseKey, Base>,
    open: Option<Open>,
    trips: BTreeMap<String, u64>,
}

impl<'f> Lowerer<'f> {
    fn new(f: &'f AffineFunc) -> Result<Self, LowerError> {
        let name = hardware_name(&f.name);
        let mut lw = Lowerer {
            f,
            comp: HwComponent::new(name),
            used: RESERVED.iter().map(|s| s.to_string()).collect(),
            counter: 0,
            mems: HashMap::new(),
            binds: HashMap::new(),
            loop_ids: HashMap::new(),
            loops: Vec::new(),
            keys: BTreeSet::new(),
            bases: BTreeMap::new(),
            open: None,
            trips: BTreeMap::new(),
        };
        for (arg, ty) in &f.args {
            let base = hardware_name(arg);
            let mut cell = base.clone();
            let mut k = 1;
            while lw.used.contains(&cell) {
                cell = format!("{base}_{k}");
                k += 1;
            }
            lw.used.insert(cell.clone());
            lw.comp.cells.push(Cell::new(&cell, CellKind::Memory { width: ELEMENT_WIDTH, length: ty.length }));
            lw.mems.insert(arg, cell);
        }
        lw.scan(&f.body, &mut Vec::new())?;
        Ok(lw)
    }

    /// Numbers loops in pre-order and collects every base key (with all
    /// of its prefixes) used by a memory access.
    fn scan(&mut self, ops: &'f [crate::affine_ir::AffineOp], path: &mut Vec<usize>) -> Result<(), LowerError> {
        for (i, op) in ops.iter().enumerate() {
            path.push(i);
            match &op.kind {
                OpKind::For(l) => {
                    let loc = || op_location(&self.f.name, path);
                    for (what, v) in [("lower bound", l.lower), ("upper bound", l.upper), ("step", l.step)] {
                        if i32::try_from(v).is_err() {
                            return Err(LowerError::UnsupportedConstruct {
                                location: loc(),
                                message: format!("loop {what} {v} does not fit in 32 bits"),
                            });
                        }
                    }
                    self.loop_ids.insert(&l.iv, self.loops.len());
                    self.loops.push((l.lower, l.step));
                    self.scan(&l.body, path)?;
                }
                OpKind::Load { index, .. } | OpKind::Store { index, .. } => {
                    let key = self.key(index);
                    for len in 1..=key.len() {
                        self.keys.insert(key[..len].to_vec());
                    }
                }
                _ => {}
            }
            path.pop();
        }
        Ok(())
    }

    fn key(&self, e: &AffineExpr) -> BaseKey {
        let mut acc: BTreeMap<usize, u32> = BTreeMap::new();
        for (var, coeff) in &e.terms {
            let id = self.loop_ids[var.as_str()];
            let slot = acc.entry(id).or_default();
            *slot = slot.wrapping_add(*coeff as u32);
        }
        acc.into_iter().filter(|(_, c)| *c != 0).collect()
    }

    fn fresh(&mut self, kind: &str) -> String {
        loop {
            let name = format!("{kind}_{}", self.counter);
            self.counter += 1;
            if self.used.insert(name.clone()) {
                return name;
            }
        }
    }

    fn cell(&mut self, kind: &str, ck: CellKind) -> String {
        let name = self.fresh(kind);
        self.comp.cells.push(Cell::new(&name, ck));
        name
    }

    fn reg(&mut self, width: u32) -> String {
        self.cell("reg", CellKind::Register { width })
    }

    fn group(&mut self, purpose: &str, seq: &mut Vec<Control>) -> usize {
        let name = self.fresh(purpose);
        self.comp.groups.push(Group::new(&name));
        seq.push(Control::Enable(name));
        self.comp.groups.len() - 1
    }

    fn assign(&mut self, g: usize, dest: PortRef, src: Src) {
        self.comp.groups[g].assign(dest, src);
    }

    fn write_reg(&mut self, g: usize, reg: &str, src: Src) {
        self.assign(g, PortRef::new(reg, "in"), src);
        self.assign(g, PortRef::new(reg, "write_en"), Src::Lit(Literal::bit(true)));
    }

    /// Returns `left + right` as seen inside group `g`, through `adder`.
    fn add_into(&mut self, g: usize, adder: &str, left: Src, right: Src) -> Src {
        self.assign(g, PortRef::new(adder, "left"), left);
        self.assign(g, PortRef::new(adder, "right"), right);
        Src::Port(PortRef::new(adder, "out"))
    }

    fn close(&mut self) {
        self.open = None;
    }

    fn open_group(&mut self, seq: &mut Vec<Control>) -> usize {
        if let Some(o) = &self.open {
            return o.group;
        }
        let g = self.group("compute", seq);
        self.open = Some(Open { group: g, reads: HashSet::new() });
        g
    }

    fn operand(&mut self, name: &str) -> Src {
        let current = self.open.as_ref().map(|o| o.group);
        let (key, bind) = self.binds.remove_entry(name).expect("verified operand is bound");
        let src = match bind {
            Bind::Fixed(src) => {
                self.binds.insert(key, Bind::Fixed(src.clone()));
                return src;
            }
            Bind::Local { src, group } if Some(group) == current => {
                self.binds.insert(key, Bind::Local { src: src.clone(), group });
                return src;
            }
            Bind::Local { src, group } => {
                let reg = self.reg(ELEMENT_WIDTH);
                self.write_reg(group, &reg, src);
                Src::Port(PortRef::new(reg, "out"))
            }
        };
        self.binds.insert(key, Bind::Fixed(src.clone()));
        src
    }

    fn address(&mut self, g: usize, index: &AffineExpr) -> Src {
        let key = self.key(index);
        let offset = index.constant as u32;
        if key.is_empty() {
            return Src::Lit(Literal::new(32, offset as u64));
        }
        let base = Src::Port(PortRef::new(self.bases[&key].reg.clone(), "out"));
        if offset == 0 {
            return base;
        }
        let adder = self.cell("add", CellKind::Adder { width: ELEMENT_WIDTH });
        self.add_into(g, &adder, base, Src::Lit(Literal::new(32, offset as u64)))
    }

    fn block(&mut self, ops: &'f [crate::affine_ir::AffineOp], seq: &mut Vec<Control>, path: &mut Vec<usize>) -> Result<(), LowerError> {
        for (i, op) in ops.iter().enumerate() {
            path.push(i);
            match &op.kind {
                OpKind::Constant { value } => {
                    self.binds.insert(&op.results[0], Bind::Fixed(Src::Lit(Literal::from_i32(*value))));
                }
                OpKind::Load { memref, index } => {
                    let mem = self.mems[memref.as_str()].clone();
                    if self.open.as_ref().is_some_and(|o| o.reads.contains(&mem)) {
                        self.close();
                    }
                    let g = self.open_group(seq);
                    let addr = self.address(g, index);
                    self.assign(g, PortRef::new(&mem, "read_addr"), addr);
                    if let Some(o) = self.open.as_mut() {
                        o.reads.insert(mem.clone());
                    }
                    let src = Src::Port(PortRef::new(mem, "read_data"));
                    self.binds.insert(&op.results[0], Bind::Local { src, group: g });
                }
                OpKind::MulI { lhs, rhs } | OpKind::AddI { lhs, rhs } => {
                    let g = self.open_group(seq);
                    let l = self.operand(lhs);
                    let r = self.operand(rhs);
                    let (kind, ck) = match op.kind {
                        OpKind::MulI { .. } => ("mul", CellKind::Multiplier { width: ELEMENT_WIDTH }),
                        _ => ("add", CellKind::Adder { width: ELEMENT_WIDTH }),
                    };
                    let cell = self.cell(kind, ck);
                    let src = self.add_into(g, &cell, l, r);
                    self.binds.insert(&op.results[0], Bind::Local { src, group: g });
                }
                OpKind::Store { value, memref, index } => {
                    self.close();
                    let src = self.operand(value);
                    let mem = self.mems[memref.as_str()].clone();
                    let g = self.group("store", seq);
                    let addr = self.address(g, index);
                    self.assign(g, PortRef::new(&mem, "write_addr"), addr);
                    self.assign(g, PortRef::new(&mem, "write_data"), src);
                    self.assign(g, PortRef::new(&mem, "write_en"), Src::Lit(Literal::bit(true)));
                }
                OpKind::For(l) => {
                    self.close();
                    self.lower_loop(op, l, seq, path)?;
                }
                OpKind::Yield { .. } => {
                    return Err(LowerError::UnsupportedConstruct {
                        location: op_location(&self.f.name, path),
                        message: "affine.yield outside a loop body".into(),
                    });
                }
                OpKind::Return => self.close(),
            }
            path.pop();
        }
        Ok(())
    }

    fn lower_loop(
        &mut self,
        op: &'f crate::affine_ir::AffineOp,
        l: &'f AffineFor,
        seq: &mut Vec<Control>,
        path: &mut Vec<usize>,
    ) -> Result<(), LowerError> {
        let id = self.loop_ids[l.iv.as_str()];
        let trip = l.trip_count().expect("verified loop bounds");
        let counter = self.reg(ELEMENT_WIDTH);
        let lt = self.cell("lt", CellKind::Comparator { width: ELEMENT_WIDTH, predicate: Predicate::Lt });
        let cond_reg = self.reg(1);
        let incr_adder = self.cell("add", CellKind::Adder { width: ELEMENT_WIDTH });
        let own: Vec<BaseKey> = self.keys.iter().filter(|k| k.last().map(|p| p.0) == Some(id)).cloned().collect();
        for key in &own {
            let reg = self.reg(ELEMENT_WIDTH);
            let adder = self.cell("add", CellKind::Adder { width: ELEMENT_WIDTH });
            self.bases.insert(key.clone(), Base { reg, adder });
        }

        let mut accs = Vec::new();
        if !l.iter_args.is_empty() {
            let inits: Vec<Src> = l.iter_args.iter().map(|a| self.operand(&a.init)).collect();
            let g = self.group("acc_init", seq);
            for (arg, init) in l.iter_args.iter().zip(inits) {
                let acc = self.reg(ELEMENT_WIDTH);
                self.write_reg(g, &acc, init);
                self.binds.insert(&arg.name, Bind::Fixed(Src::Port(PortRef::new(&acc, "out"))));
                accs.push(acc);
            }
        }

        let (lower, step) = self.loops[id];
        let init = self.group("init", seq);
        self.write_reg(init, &counter, Src::Lit(Literal::from_i32(lower as i32)));
        for key in &own {
            let (coeff, parent) = (key[key.len() - 1].1, &key[..key.len() - 1]);
            let seed = Literal::new(32, coeff.wrapping_mul(lower as u32) as u64);
            let Base { reg, adder } = &self.bases[key];
            let (reg, adder) = (reg.clone(), adder.clone());
            let value = if parent.is_empty() {
                Src::Lit(seed)
            } else {
                let p = Src::Port(PortRef::new(self.bases[parent].reg.clone(), "out"));
                if seed.value == 0 {
                    p
                } else {
                    self.add_into(init, &adder, p, Src::Lit(seed))
                }
            };
            self.write_reg(init, &reg, value);
        }

        let mut cond_seq = Vec::new();
        let cond = self.group("cond", &mut cond_seq);
        let cond_name = self.comp.groups[cond].name.clone();
        self.assign(cond, PortRef::new(&lt, "left"), Src::Port(PortRef::new(&counter, "out")));
        self.assign(cond, PortRef::new(&lt, "right"), Src::Lit(Literal::from_i32(l.upper as i32)));
        self.write_reg(cond, &cond_reg, Src::Port(PortRef::new(&lt, "out")));
        self.trips.insert(cond_name.clone(), trip);

        let mut body = Vec::new();
        let (ops, tail) = match l.body.last() {
            Some(crate::affine_ir::AffineOp { kind: OpKind::Yield { values }, .. }) => (&l.body[..l.body.len() - 1], Some(values)),
            _ => (&l.body[..], None),
        };
        self.block(ops, &mut body, path)?;
        if let Some(values) = tail {
            let srcs: Vec<Src> = values.iter().map(|v| self.operand(v)).collect();
            let g = match &self.open {
                Some(o) => o.group,
                None => self.group("yield", &mut body),
            };
            for (acc, src) in accs.iter().zip(srcs) {
                self.write_reg(g, acc, src);
            }
        }
        self.close();

        let incr = self.group("incr", &mut body);
        let next = self.add_into(incr, &incr_adder, Src::Port(PortRef::new(&counter, "out")), Src::Lit(Literal::from_i32(step as i32)));
        self.write_reg(incr, &counter, next);
        for key in &own {
            let bump = Literal::new(32, key[key.len() - 1].1.wrapping_mul(step as u32) as u64);
            let Base { reg, adder } = &self.bases[key];
            let (reg, adder) = (reg.clone(), adder.clone());
            let next = self.add_into(incr, &adder, Src::Port(PortRef::new(&reg, "out")), Src::Lit(bump));
            self.write_reg(incr, &reg, next);
        }

        seq.push(Control::While { port: PortRef::new(lt, "out"), cond: cond_name, body: Box::new(Control::Seq(body)) });
        for (result, acc) in op.results.iter().zip(&accs) {
            self.binds.insert(result, Bind::Fixed(Src::Port(PortRef::new(acc, "out"))));
        }
        Ok(())
    }

    /// Removes groups that never write state, along with their enables.
    fn drop_idle_groups(&mut self) {
        let idle: HashSet<String> = self
            .comp
            .groups
            .iter()
            .filter(|g| !g.assignments.iter().any(|a| a.dest.port == "write_en"))
            .map(|g| g.name.clone())
            .collect();
        if idle.is_empty() {
            return;
        }
        self.comp.groups.retain(|g| !idle.contains(&g.name));
        prune(&mut self.comp.control, &idle);
    }
}

fn prune(n: &mut Control, idle: &HashSet<String>) {
    match n {
        Control::Seq(cs) | Control::Par(cs) => {
            cs.retain(|c| !matches!(c, Control::Enable(g) if idle.contains(g)));
            cs.iter_mut().for_each(|c| prune(c, idle));
        }
        Control::While { body, .. } | Control::Repeat { body, .. } => {
            if matches!(&**body, Control::Enable(g) if idle.contains(g)) {
                **body = Control::empty();
            }
            prune(body, idle);
        }
        Control::Enable(_) => {}
    }
}

/// Replaces each `While` whose condition group has a known trip count with
/// `Seq[Repeat(trip, Seq[cond, body]), cond]`, which runs the same cycles.
pub fn repeat_form(n: &Control, trips: &BTreeMap<String, u64>) -> Control {
    match n {
        Control::Enable(_) => n.clone(),
        Control::Seq(cs) => Control::Seq(cs.iter().map(|c| repeat_form(c, trips)).collect()),
        Control::Par(cs) => Control::Par(cs.iter().map(|c| repeat_form(c, trips)).collect()),
        Control::Repeat { count, body } => Control::Repeat { count: *count, body: Box::new(repeat_form(body, trips)) },
        Control::While { port, cond, body } => match trips.get(cond) {
            Some(&count) => Control::Seq(vec![
                Control::Repeat {
                    count,
                    body: Box::new(Control::Seq(vec![Control::Enable(cond.clone()), repeat_form(body, trips)])),
                },
                Control::Enable(cond.clone()),
            ]),
            None => Control::While { port: port.clone(), cond: cond.clone(), body: Box::new(repeat_form(body, trips)) },
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine_ir::{gen_gemm, AffineOp, MemRefType};
    use crate::hw_ir::{resource_counts, validate};
    use crate::transforms::{unroll_full, LoopPath};

    fn gemm(n: u64) -> AffineFunc {
        gen_gemm(n).funcs.remove(0)
    }

    fn flat(n: u64) -> AffineFunc {
        unroll_full(&gen_gemm(n), &"0.0.0".parse::<LoopPath>().unwrap()).unwrap().funcs.remove(0)
    }

    #[test]
    fn nested_gemm_resources() {
        for n in [1, 2, 4, 8] {
            let c = lower(&gemm(n)).unwrap();
            assert!(validate(&c).is_empty(), "{:?}", validate(&c));
            let r = resource_counts(&c);
            assert_eq!((r.multipliers, r.adders, r.registers, r.comparators, r.memories), (1, 9, 12, 3, 3), "n={n}");
            assert_eq!(r.memory_bits, 3 * 32 * n * n);
        }
    }

    #[test]
    fn flattened_gemm_resources() {
        for n in [2, 3, 4, 8] {
            let c = lower(&flat(n)).unwrap();
            assert!(validate(&c).is_empty(), "{:?}", validate(&c));
            let r = resource_counts(&c);
            assert_eq!((r.multipliers, r.adders, r.registers), (n, 3 * n + 3, 7 + n), "n={n}");
        }
    }

    #[test]
    fn nested_control_shape() {
        let c = lower(&gemm(4)).unwrap();
        let Control::Seq(top) = &c.control else { panic!() };
        assert_eq!(top.len(), 2);
        let Control::While { body, .. } = &top[1] else { panic!("{:?}", top[1]) };
        let Control::Seq(i_body) = &**body else { panic!() };
        // init_j, While(j), incr_i
        assert_eq!(i_body.len(), 3);
        let Control::While { body, .. } = &i_body[1] else { panic!() };
        let Control::Seq(j_body) = &**body else { panic!() };
        // acc_init, init_k, While(k), store, incr_j
        let names: Vec<String> = j_body
            .iter()
            .map(|c| match c {
                Control::Enable(g) => g.split('_').next().unwrap().to_string(),
                Control::While { .. } => "while".into(),
                other => panic!("{other:?}"),
            })
            .collect();
        assert_eq!(names, ["acc", "init", "while", "store", "incr"]);
    }

    #[test]
    fn flattened_inner_region() {
        let c = lower(&flat(4)).unwrap();
        let groups = c.control.groups();
        assert_eq!(groups.iter().filter(|g| g.starts_with("compute")).count(), 4);
        assert_eq!(groups.iter().filter(|g| g.starts_with("cond")).count(), 2);
    }

    #[test]
    fn return_only() {
        let f = AffineFunc { name: "f".into(), args: vec![], body: vec![AffineOp::new(OpKind::Return)] };
        let c = lower(&f).unwrap();
        assert_eq!(c.control, Control::Seq(vec![]));
        assert!(c.cells.is_empty());
    }

    #[test]
    fn names_are_sanitized() {
        let f = AffineFunc {
            name: "module".into(),
            args: vec![("reg".into(), MemRefType::new(2, 0)), ("x.y".into(), MemRefType::new(2, 0)), ("7".into(), MemRefType::new(1, 0))],
            body: vec![AffineOp::new(OpKind::Return)],
        };
        let c = lower(&f).unwrap();
        assert_eq!(c.name, "module_0");
        let names: Vec<&str> = c.cells.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["reg_0", "x_y", "m_7"]);
    }

    #[test]
    fn rejects_unverified() {
        let f = AffineFunc { name: "f".into(), args: vec![], body: vec![] };
        assert!(matches!(lower(&f), Err(LowerError::Invalid { .. })));
    }

    #[test]
    fn wide_bounds_are_unsupported() {
        let mut m = gen_gemm(2);
        let OpKind::For(l) = &mut m.funcs[0].body[0].kind else { panic!() };
        l.upper = 1 << 40;
        l.step = 1 << 39;
        assert!(matches!(lower(&m.funcs[0]), Err(LowerError::UnsupportedConstruct { .. })));
    }

    #[test]
    fn deterministic() {
        assert_eq!(lower(&gemm(8)).unwrap(), lower(&gemm(8)).unwrap());
    }

    #[test]
    fn repeat_form_keeps_groups() {
        let l = lower_detailed(&gemm(2)).unwrap();
        assert_eq!(l.trips.len(), 3);
        let r = repeat_form(&l.component.control, &l.trips);
        assert!(!r.has_while());
    }
}
