//! Structural hardware IR: a component holds primitive cells, groups of
//! guarded assignments between cell ports, and a control tree that decides
//! which groups are active in each cycle.
//!
//! Groups are *static*: a group with latency `L` is active for exactly `L`
//! consecutive cycles and has no done handshake of its own. Everything the
//! lowering produces has latency 1.

mod analysis;
mod dump;
mod validate;

use std::fmt;

use serde::Serialize;

pub use analysis::{resource_counts, static_latency, Latency, ResourceReport};
pub use dump::dump;
pub use validate::validate;

/// Address width of every memory port.
pub const ADDR_WIDTH: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Port {
    pub name: String,
    pub width: u32,
    pub direction: Direction,
}

impl Port {
    pub fn new(name: &str, width: u32, direction: Direction) -> Self {
        Port { name: name.to_string(), width, direction }
    }
}

/// The four interface ports every component carries.
pub fn interface_ports() -> Vec<Port> {
    vec![
        Port::new("clk", 1, Direction::In),
        Port::new("reset", 1, Direction::In),
        Port::new("go", 1, Direction::In),
        Port::new("done", 1, Direction::Out),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Predicate {
    /// Signed less-than.
    Lt,
    Eq,
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Predicate::Lt => "lt",
            Predicate::Eq => "eq",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Register { width: u32 },
    /// Combinational read, one-cycle synchronous write.
    Memory { width: u32, length: u64 },
    Adder { width: u32 },
    Multiplier { width: u32 },
    Comparator { width: u32, predicate: Predicate },
    Constant { width: u32, value: u64 },
}

impl CellKind {
    pub fn width(&self) -> u32 {
        match *self {
            CellKind::Register { width }
            | CellKind::Memory { width, .. }
            | CellKind::Adder { width }
            | CellKind::Multiplier { width }
            | CellKind::Comparator { width, .. }
            | CellKind::Constant { width, .. } => width,
        }
    }

    /// Port signature: `(name, width, direction)`.
    pub fn ports(&self) -> Vec<(&'static str, u32, Direction)> {
        use Direction::*;
        match *self {
            CellKind::Register { width } => vec![("in", width, In), ("write_en", 1, In), ("out", width, Out)],
            CellKind::Memory { width, .. } => vec![
                ("read_addr", ADDR_WIDTH, In),
                ("read_data", width, Out),
                ("write_addr", ADDR_WIDTH, In),
                ("write_data", width, In),
                ("write_en", 1, In),
            ],
            CellKind::Adder { width } | CellKind::Multiplier { width } => {
                vec![("left", width, In), ("right", width, In), ("out", width, Out)]
            }
            CellKind::Comparator { width, .. } => vec![("left", width, In), ("right", width, In), ("out", 1, Out)],
            CellKind::Constant { width, .. } => vec![("out", width, Out)],
        }
    }

    pub fn port(&self, name: &str) -> Option<(u32, Direction)> {
        self.ports().into_iter().find(|(n, _, _)| *n == name).map(|(_, w, d)| (w, d))
    }

    /// True for cells that hold state across cycles.
    pub fn is_stateful(&self) -> bool {
        matches!(self, CellKind::Register { .. } | CellKind::Memory { .. })
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellKind::Register { width } => write!(f, "register({width})"),
            CellKind::Memory { width, length } => write!(f, "memory({width}, {length})"),
            CellKind::Adder { width } => write!(f, "adder({width})"),
            CellKind::Multiplier { width } => write!(f, "multiplier({width})"),
            CellKind::Comparator { width, predicate } => write!(f, "comparator({width}, {predicate})"),
            CellKind::Constant { width, value } => write!(f, "constant({width}, {value})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cell {
    pub name: String,
    pub kind: CellKind,
}

impl Cell {
    pub fn new(name: impl Into<String>, kind: CellKind) -> Self {
        Cell { name: name.into(), kind }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortRef {
    pub cell: String,
    pub port: String,
}

impl PortRef {
    pub fn new(cell: impl Into<String>, port: impl Into<String>) -> Self {
        PortRef { cell: cell.into(), port: port.into() }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.cell, self.port)
    }
}

/// Sized constant; `value` is already masked to `width` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Literal {
    pub width: u32,
    pub value: u64,
}

impl Literal {
    pub fn new(width: u32, value: u64) -> Self {
        Literal { width, value: value & mask(width) }
    }

    pub fn from_i32(v: i32) -> Self {
        Literal::new(32, v as u32 as u64)
    }

    pub fn bit(b: bool) -> Self {
        Literal::new(1, b as u64)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}'d{}", self.width, self.value)
    }
}

pub fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Src {
    Port(PortRef),
    Lit(Literal),
}

impl fmt::Display for Src {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Src::Port(p) => p.fmt(f),
            Src::Lit(l) => l.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    pub dest: PortRef,
    pub src: Src,
    pub guard: Option<PortRef>,
}

impl Assignment {
    pub fn new(dest: PortRef, src: Src) -> Self {
        Assignment { dest, src, guard: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Group {
    pub name: String,
    pub assignments: Vec<Assignment>,
    pub latency: u64,
}

impl Group {
    pub fn new(name: impl Into<String>) -> Self {
        Group { name: name.into(), assignments: Vec::new(), latency: 1 }
    }

    pub fn assign(&mut self, dest: PortRef, src: Src) {
        self.assignments.push(Assignment::new(dest, src));
    }

    /// Cells whose input ports this group drives.
    pub fn driven_cells(&self) -> impl Iterator<Item = &str> {
        self.assignments.iter().map(|a| a.dest.cell.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Control {
    Enable(String),
    Seq(Vec<Control>),
    Par(Vec<Control>),
    /// Runs `cond` for one cycle, samples `port` in that cycle, and runs
    /// `body` while the sample is 1.
    While { port: PortRef, cond: String, body: Box<Control> },
    Repeat { count: u64, body: Box<Control> },
}

impl Control {
    pub fn empty() -> Self {
        Control::Seq(Vec::new())
    }

    /// Every group name the tree can activate, in pre-order.
    pub fn groups(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_groups(&mut out);
        out
    }

    fn collect_groups<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Control::Enable(g) => out.push(g),
            Control::Seq(cs) | Control::Par(cs) => cs.iter().for_each(|c| c.collect_groups(out)),
            Control::While { cond, body, .. } => {
                out.push(cond);
                body.collect_groups(out);
            }
            Control::Repeat { body, .. } => body.collect_groups(out),
        }
    }

    pub fn has_while(&self) -> bool {
        match self {
            Control::Enable(_) => false,
            Control::Seq(cs) | Control::Par(cs) => cs.iter().any(Control::has_while),
            Control::While { .. } => true,
            Control::Repeat { body, .. } => body.has_while(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HwComponent {
    pub name: String,
    pub ports: Vec<Port>,
    pub cells: Vec<Cell>,
    pub groups: Vec<Group>,
    pub control: Control,
}

impl HwComponent {
    pub fn new(name: impl Into<String>) -> Self {
        HwComponent { name: name.into(), ports: interface_ports(), cells: Vec::new(), groups: Vec::new(), control: Control::empty() }
    }

    pub fn cell(&self, name: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.name == name)
    }

    pub fn group(&self, name: &str) -> Option<&Group> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn port_width(&self, p: &PortRef) -> Option<(u32, Direction)> {
        self.cell(&p.cell)?.kind.port(&p.port)
    }

    pub fn memories(&self) -> impl Iterator<Item = (&str, u64)> {
        self.cells.iter().filter_map(|c| match c.kind {
            CellKind::Memory { length, .. } => Some((c.name.as_str(), length)),
            _ => None,
        })
    }
}
