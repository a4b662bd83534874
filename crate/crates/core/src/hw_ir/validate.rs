use std::collections::{BTreeSet, HashMap, HashSet};

use super::{CellKind, Control, Direction, Group, HwComponent, PortRef, Src};
use crate::diagnostic::Diagnostic;

/// Checks every structural invariant of `c`. An empty result means the
/// component can be simulated and emitted without structural faults.
pub fn validate(c: &HwComponent) -> Vec<Diagnostic> {
    let mut v = Validator { c, diags: Vec::new() };
    v.ports();
    v.cells();
    v.groups();
    v.control(&c.control);
    v.diags
}

struct Validator<'a> {
    c: &'a HwComponent,
    diags: Vec<Diagnostic>,
}

impl<'a> Validator<'a> {
    fn err(&mut self, what: impl AsRef<str>, message: impl Into<String>) {
        self.diags.push(Diagnostic::new(format!("{}/{}", self.c.name, what.as_ref()), message));
    }

    fn ports(&mut self) {
        let mut seen = HashSet::new();
        for p in &self.c.ports {
            if !seen.insert(p.name.as_str()) {
                self.err("ports", format!("duplicate port `{}`", p.name));
            }
        }
        for (name, dir) in [("clk", Direction::In), ("reset", Direction::In), ("go", Direction::In), ("done", Direction::Out)] {
            let matching = self.c.ports.iter().filter(|p| p.name == name).count();
            match self.c.ports.iter().find(|p| p.name == name) {
                None => self.err("ports", format!("missing `{name}` port")),
                Some(p) if p.width != 1 || p.direction != dir || matching != 1 => {
                    self.err("ports", format!("`{name}` must be a single 1-bit {dir:?} port"))
                }
                _ => {}
            }
        }
    }

    fn cells(&mut self) {
        let mut seen = HashSet::new();
        for cell in &self.c.cells {
            let at = format!("cell {}", cell.name);
            if !seen.insert(cell.name.as_str()) {
                self.err(&at, "duplicate cell name");
            }
            let w = cell.kind.width();
            if w != 1 && w != 32 {
                self.err(&at, format!("width {w} is not 1 or 32"));
            }
            match cell.kind {
                CellKind::Memory { length: 0, .. } => self.err(&at, "memory must hold at least one element"),
                CellKind::Constant { width, value } if value & !super::mask(width) != 0 => {
                    self.err(&at, format!("constant {value} does not fit in {width} bits"))
                }
                _ => {}
            }
        }
    }

    fn groups(&mut self) {
        let mut seen = HashSet::new();
        for g in &self.c.groups {
            if !seen.insert(g.name.as_str()) {
                self.err(format!("group {}", g.name), "duplicate group name");
            }
            self.group(g);
        }
    }

    fn group(&mut self, g: &'a Group) {
        let at = format!("group {}", g.name);
        if g.latency < 1 {
            self.err(&at, "latency must be at least 1");
        }
        let mut driven: HashMap<&PortRef, usize> = HashMap::new();
        for a in &g.assignments {
            *driven.entry(&a.dest).or_default() += 1;
            let dest = match self.c.port_width(&a.dest) {
                None => {
                    self.err(&at, format!("assignment to unknown port `{}`", a.dest));
                    continue;
                }
                Some((_, Direction::Out)) => {
                    self.err(&at, format!("`{}` is an output port and cannot be assigned", a.dest));
                    continue;
                }
                Some((w, Direction::In)) => w,
            };
            let src_width = match &a.src {
                Src::Lit(l) => Some(l.width),
                Src::Port(p) => match self.c.port_width(p) {
                    None => {
                        self.err(&at, format!("assignment reads unknown port `{p}`"));
                        None
                    }
                    Some((_, Direction::In)) => {
                        self.err(&at, format!("`{p}` is an input port and cannot be read"));
                        None
                    }
                    Some((w, Direction::Out)) => Some(w),
                },
            };
            if let Some(w) = src_width {
                if w != dest {
                    self.err(&at, format!("width mismatch: `{}` is {dest} bits, `{}` is {w} bits", a.dest, a.src));
                }
            }
            if let Some(guard) = &a.guard {
                match self.c.port_width(guard) {
                    Some((1, Direction::Out)) => {}
                    _ => self.err(&at, format!("guard `{guard}` must be a 1-bit output port")),
                }
            }
        }
        let mut multi: Vec<_> = driven.iter().filter(|(_, n)| **n > 1).map(|(p, _)| p.to_string()).collect();
        multi.sort();
        for p in multi {
            self.err(&at, format!("`{p}` has more than one driver"));
        }
        let is_driven = |cell: &str, port: &str| driven.keys().any(|p| p.cell == cell && p.port == port);

        // Stateful write ports come as a complete set.
        for cell in &self.c.cells {
            match cell.kind {
                CellKind::Register { .. } => {
                    let data = is_driven(&cell.name, "in");
                    let en = is_driven(&cell.name, "write_en");
                    if data != en {
                        self.err(&at, format!("register `{}` needs both `in` and `write_en` driven together", cell.name));
                    }
                }
                CellKind::Memory { .. } => {
                    let en = is_driven(&cell.name, "write_en");
                    let addr = is_driven(&cell.name, "write_addr");
                    let data = is_driven(&cell.name, "write_data");
                    if en != addr || en != data {
                        self.err(
                            &at,
                            format!("memory `{}` needs `write_en`, `write_addr` and `write_data` driven together", cell.name),
                        );
                    }
                }
                _ => {}
            }
        }

        // Combinational outputs read in the group need their inputs driven here.
        let mut reads: BTreeSet<&PortRef> = BTreeSet::new();
        for a in &g.assignments {
            if let Src::Port(p) = &a.src {
                reads.insert(p);
            }
            if let Some(p) = &a.guard {
                reads.insert(p);
            }
        }
        for p in reads {
            let Some(cell) = self.c.cell(&p.cell) else { continue };
            let inputs: &[&str] = match cell.kind {
                CellKind::Adder { .. } | CellKind::Multiplier { .. } | CellKind::Comparator { .. } => &["left", "right"],
                CellKind::Memory { .. } if p.port == "read_data" => &["read_addr"],
                _ => &[],
            };
            for input in inputs {
                if !is_driven(&cell.name, input) {
                    self.err(&at, format!("reads `{p}` but `{}.{input}` is not driven in this group", cell.name));
                }
            }
        }
        self.comb_cycles(g, &at);
    }

    fn comb_cycles(&mut self, g: &Group, at: &str) {
        let mut edges: HashMap<&str, Vec<&str>> = HashMap::new();
        for a in &g.assignments {
            let Some(dest) = self.c.cell(&a.dest.cell) else { continue };
            let through = match dest.kind {
                CellKind::Adder { .. } | CellKind::Multiplier { .. } | CellKind::Comparator { .. } => true,
                CellKind::Memory { .. } => a.dest.port == "read_addr",
                _ => false,
            };
            if !through {
                continue;
            }
            if let Src::Port(p) = &a.src {
                edges.entry(p.cell.as_str()).or_default().push(dest.name.as_str());
            }
            if let Some(p) = &a.guard {
                edges.entry(p.cell.as_str()).or_default().push(dest.name.as_str());
            }
        }
        // Iterative three-colour DFS.
        let mut state: HashMap<&str, u8> = HashMap::new();
        let mut nodes: Vec<&str> = edges.keys().copied().collect();
        nodes.sort();
        for start in nodes {
            if state.contains_key(start) {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            state.insert(start, 1);
            while let Some((node, idx)) = stack.pop() {
                let succ = edges.get(node).map(Vec::as_slice).unwrap_or(&[]);
                if idx < succ.len() {
                    stack.push((node, idx + 1));
                    let next = succ[idx];
                    match state.get(next) {
                        Some(1) => {
                            self.err(at, format!("combinational loop through `{next}`"));
                            return;
                        }
                        Some(_) => {}
                        None => {
                            state.insert(next, 1);
                            stack.push((next, 0));
                        }
                    }
                } else {
                    state.insert(node, 2);
                }
            }
        }
    }

    fn control(&mut self, node: &Control) {
        match node {
            Control::Enable(g) => {
                if self.c.group(g).is_none() {
                    self.err("control", format!("enables undefined group `{g}`"));
                }
            }
            Control::Seq(cs) => cs.iter().for_each(|c| self.control(c)),
            Control::Par(cs) => {
                cs.iter().for_each(|c| self.control(c));
                let sets: Vec<BTreeSet<&str>> = cs
                    .iter()
                    .map(|c| c.groups().into_iter().filter_map(|g| self.c.group(g)).flat_map(|g| g.driven_cells()).collect())
                    .collect();
                for i in 0..sets.len() {
                    for j in i + 1..sets.len() {
                        if let Some(shared) = sets[i].intersection(&sets[j]).next() {
                            self.err("control", format!("par children {i} and {j} both drive `{shared}`"));
                        }
                    }
                }
            }
            Control::While { port, cond, body } => {
                match self.c.cell(&port.cell) {
                    Some(cell) if matches!(cell.kind, CellKind::Comparator { .. }) && port.port == "out" => {}
                    _ => self.err("control", format!("while condition `{port}` is not a comparator output")),
                }
                match self.c.group(cond) {
                    None => self.err("control", format!("while uses undefined condition group `{cond}`")),
                    Some(g) => {
                        if g.latency != 1 {
                            self.err("control", format!("condition group `{cond}` must have latency 1"));
                        }
                        let drives = |p: &str| g.assignments.iter().any(|a| a.dest.cell == port.cell && a.dest.port == p);
                        if !(drives("left") && drives("right")) {
                            self.err("control", format!("condition group `{cond}` does not drive the inputs of `{}`", port.cell));
                        }
                    }
                }
                self.control(body);
            }
            Control::Repeat { body, .. } => self.control(body),
        }
    }
}
