//! Reader for the Verilog subset this backend emits, a structural checker
//! over it, and a two-phase cycle evaluator used to execute the text.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{port_wire, VerilogText};
use crate::diagnostic::Diagnostic;
use crate::hw_ir::{mask, Direction, HwComponent};
use crate::memory::{MemoryImage, MemorySet};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num { width: Option<u32>, value: u64 },
    P(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct NetlistParseError {
    pub line: usize,
    pub message: String,
}

const PUNCT: [&str; 20] = ["<=", "==", "&&", "||", "(", ")", "[", "]", ":", ";", ",", "=", "<", "+", "-", "*", "?", "!", "@", "~"];

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, NetlistParseError> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let code = line.split("//").next().unwrap_or("");
        let b = code.as_bytes();
        let mut i = 0;
        while i < b.len() {
            let c = b[i] as char;
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_alphabetic() || c == '_' || c == '$' || c == '`' {
                let s = i;
                i += 1;
                while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'$') {
                    i += 1;
                }
                out.push((Tok::Ident(code[s..i].to_string()), line_no));
            } else if c.is_ascii_digit() {
                let s = i;
                while i < b.len() && (b[i] as char).is_ascii_digit() {
                    i += 1;
                }
                let first: u64 = code[s..i].parse().map_err(|_| NetlistParseError { line: line_no, message: "bad number".into() })?;
                if i + 1 < b.len() && b[i] == b'\'' && b[i + 1] == b'd' {
                    i += 2;
                    let s2 = i;
                    while i < b.len() && (b[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                    let value: u64 =
                        code[s2..i].parse().map_err(|_| NetlistParseError { line: line_no, message: "bad sized literal".into() })?;
                    out.push((Tok::Num { width: Some(first as u32), value }, line_no));
                } else {
                    out.push((Tok::Num { width: None, value: first }, line_no));
                }
            } else {
                let rest = &code[i..];
                let p = PUNCT
                    .iter()
                    .find(|p| rest.starts_with(**p))
                    .ok_or_else(|| NetlistParseError { line: line_no, message: format!("unexpected character `{c}`") })?;
                out.push((Tok::P(p), line_no));
                i += p.len();
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeclKind {
    Input,
    Output,
    Wire,
    Reg,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decl {
    pub name: String,
    pub kind: DeclKind,
    pub width: u32,
    /// Element count for memories.
    pub array: Option<u64>,
    pub line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Lt,
    Eq,
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Ident(String),
    Lit { width: Option<u32>, value: u64 },
    Index(String, Box<Expr>),
    Signed(Box<Expr>),
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Block(Vec<Stmt>),
    If(Expr, Box<Stmt>, Option<Box<Stmt>>),
    Case(Expr, Vec<(Option<Expr>, Stmt)>),
    Assign { target: String, index: Option<Expr>, value: Expr, line: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Module {
    pub name: String,
    pub decls: Vec<Decl>,
    /// Continuous assignments: target, value, line.
    pub assigns: Vec<(String, Expr, usize)>,
    pub always: Vec<Stmt>,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn line(&self) -> usize {
        self.toks.get(self.pos).or(self.toks.last()).map_or(0, |t| t.1)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, NetlistParseError> {
        Err(NetlistParseError { line: self.line(), message: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        self.pos += 1;
        t
    }

    fn is_p(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::P(q)) if *q == p)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == k)
    }

    fn p(&mut self, p: &str) -> Result<(), NetlistParseError> {
        if self.is_p(p) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{p}`, found {:?}", self.peek()))
        }
    }

    fn kw(&mut self, k: &str) -> Result<(), NetlistParseError> {
        if self.is_kw(k) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{k}`, found {:?}", self.peek()))
        }
    }

    fn ident(&mut self) -> Result<String, NetlistParseError> {
        match self.next() {
            Some(Tok::Ident(s)) => Ok(s),
            other => {
                self.pos -= 1;
                self.err(format!("expected identifier, found {other:?}"))
            }
        }
    }

    fn int(&mut self) -> Result<u64, NetlistParseError> {
        match self.next() {
            Some(Tok::Num { width: None, value }) => Ok(value),
            other => {
                self.pos -= 1;
                self.err(format!("expected integer, found {other:?}"))
            }
        }
    }

    /// `[hi:lo]` as a width, or 1 when absent.
    fn range(&mut self) -> Result<u32, NetlistParseError> {
        if !self.is_p("[") {
            return Ok(1);
        }
        self.p("[")?;
        let hi = self.int()?;
        self.p(":")?;
        let lo = self.int()?;
        self.p("]")?;
        if lo != 0 || hi > 63 {
            return self.err("only [N:0] ranges up to 64 bits are supported");
        }
        Ok(hi as u32 + 1)
    }

    fn module(&mut self) -> Result<Module, NetlistParseError> {
        self.kw("module")?;
        let name = self.ident()?;
        let mut m = Module { name, decls: Vec::new(), assigns: Vec::new(), always: Vec::new() };
        self.p("(")?;
        loop {
            let line = self.line();
            let kind = if self.is_kw("input") {
                DeclKind::Input
            } else if self.is_kw("output") {
                DeclKind::Output
            } else {
                return self.err("expected port declaration");
            };
            self.pos += 1;
            if self.is_kw("wire") {
                self.pos += 1;
            }
            let width = self.range()?;
            let name = self.ident()?;
            m.decls.push(Decl { name, kind, width, array: None, line });
            if self.is_p(",") {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.p(")")?;
        self.p(";")?;
        loop {
            let line = self.line();
            match self.peek() {
                Some(Tok::Ident(k)) if k == "endmodule" => {
                    self.pos += 1;
                    break;
                }
                Some(Tok::Ident(k)) if k == "wire" || k == "reg" => {
                    let kind = if k == "wire" { DeclKind::Wire } else { DeclKind::Reg };
                    self.pos += 1;
                    let width = self.range()?;
                    let name = self.ident()?;
                    let mut array = None;
                    if kind == DeclKind::Reg && self.is_p("[") {
                        self.p("[")?;
                        let lo = self.int()?;
                        self.p(":")?;
                        let hi = self.int()?;
                        self.p("]")?;
                        if lo != 0 {
                            return self.err("memory ranges must start at 0");
                        }
                        array = Some(hi + 1);
                    }
                    self.p(";")?;
                    m.decls.push(Decl { name, kind, width, array, line });
                }
                Some(Tok::Ident(k)) if k == "assign" => {
                    self.pos += 1;
                    let target = self.ident()?;
                    self.p("=")?;
                    let e = self.expr()?;
                    self.p(";")?;
                    m.assigns.push((target, e, line));
                }
                Some(Tok::Ident(k)) if k == "always" => {
                    self.pos += 1;
                    self.p("@")?;
                    self.p("(")?;
                    self.kw("posedge")?;
                    let clk = self.ident()?;
                    if clk != "clk" {
                        return self.err("only `posedge clk` processes are supported");
                    }
                    self.p(")")?;
                    let s = self.stmt()?;
                    m.always.push(s);
                }
                _ => return self.err(format!("unexpected {:?} at module level", self.peek())),
            }
        }
        Ok(m)
    }

    fn stmt(&mut self) -> Result<Stmt, NetlistParseError> {
        if self.is_kw("begin") {
            self.pos += 1;
            let mut body = Vec::new();
            while !self.is_kw("end") {
                if self.peek().is_none() {
                    return self.err("unterminated `begin`");
                }
                body.push(self.stmt()?);
            }
            self.pos += 1;
            return Ok(Stmt::Block(body));
        }
        if self.is_kw("if") {
            self.pos += 1;
            self.p("(")?;
            let c = self.expr()?;
            self.p(")")?;
            let then = Box::new(self.stmt()?);
            let els = if self.is_kw("else") {
                self.pos += 1;
                Some(Box::new(self.stmt()?))
            } else {
                None
            };
            return Ok(Stmt::If(c, then, els));
        }
        if self.is_kw("case") {
            self.pos += 1;
            self.p("(")?;
            let sel = self.expr()?;
            self.p(")")?;
            let mut items = Vec::new();
            while !self.is_kw("endcase") {
                if self.peek().is_none() {
                    return self.err("unterminated `case`");
                }
                let label = if self.is_kw("default") {
                    self.pos += 1;
                    None
                } else {
                    Some(self.expr()?)
                };
                self.p(":")?;
                items.push((label, self.stmt()?));
            }
            self.pos += 1;
            return Ok(Stmt::Case(sel, items));
        }
        let line = self.line();
        let target = self.ident()?;
        let index = if self.is_p("[") {
            self.p("[")?;
            let e = self.expr()?;
            self.p("]")?;
            Some(e)
        } else {
            None
        };
        self.p("<=")?;
        let value = self.expr()?;
        self.p(";")?;
        Ok(Stmt::Assign { target, index, value, line })
    }

    fn expr(&mut self) -> Result<Expr, NetlistParseError> {
        let c = self.binary(0)?;
        if self.is_p("?") {
            self.pos += 1;
            let t = self.expr()?;
            self.p(":")?;
            let e = self.expr()?;
            return Ok(Expr::Cond(Box::new(c), Box::new(t), Box::new(e)));
        }
        Ok(c)
    }

    fn binary(&mut self, level: usize) -> Result<Expr, NetlistParseError> {
        const LEVELS: [&[(&str, BinOp)]; 6] = [
            &[("||", BinOp::Or)],
            &[("&&", BinOp::And)],
            &[("==", BinOp::Eq)],
            &[("<", BinOp::Lt)],
            &[("+", BinOp::Add), ("-", BinOp::Sub)],
            &[("*", BinOp::Mul)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        'outer: loop {
            for (p, op) in LEVELS[level] {
                if self.is_p(p) {
                    self.pos += 1;
                    let rhs = self.binary(level + 1)?;
                    lhs = Expr::Bin(*op, Box::new(lhs), Box::new(rhs));
                    continue 'outer;
                }
            }
            return Ok(lhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, NetlistParseError> {
        if self.is_p("!") {
            self.pos += 1;
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        match self.next() {
            Some(Tok::Num { width, value }) => Ok(Expr::Lit { width, value }),
            Some(Tok::P("(")) => {
                let e = self.expr()?;
                self.p(")")?;
                Ok(e)
            }
            Some(Tok::Ident(s)) if s == "$signed" => {
                self.p("(")?;
                let e = self.expr()?;
                self.p(")")?;
                Ok(Expr::Signed(Box::new(e)))
            }
            Some(Tok::Ident(s)) => {
                if self.is_p("[") {
                    self.p("[")?;
                    let e = self.expr()?;
                    self.p("]")?;
                    Ok(Expr::Index(s, Box::new(e)))
                } else {
                    Ok(Expr::Ident(s))
                }
            }
            other => {
                self.pos -= 1;
                self.err(format!("expected expression, found {other:?}"))
            }
        }
    }
}

pub fn parse_verilog(text: &str) -> Result<Module, NetlistParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let m = p.module()?;
    if p.pos < p.toks.len() {
        return p.err("trailing text after `endmodule`");
    }
    Ok(m)
}

struct Checker<'a> {
    decls: HashMap<&'a str, &'a Decl>,
    diags: Vec<Diagnostic>,
    undeclared: BTreeSet<String>,
}

impl<'a> Checker<'a> {
    fn err(&mut self, line: usize, msg: String) {
        self.diags.push(Diagnostic::new(format!("line {line}"), msg));
    }

    /// Self-determined width of `e`; `None` once an error was reported.
    fn width(&mut self, e: &Expr, line: usize) -> Option<u32> {
        match e {
            Expr::Lit { width, .. } => Some(width.unwrap_or(32)),
            Expr::Ident(n) => match self.decls.get(n.as_str()) {
                Some(d) if d.array.is_some() => {
                    self.err(line, format!("memory `{n}` used without an index"));
                    None
                }
                Some(d) => Some(d.width),
                None => {
                    if self.undeclared.insert(n.clone()) {
                        self.err(line, format!("`{n}` is not declared"));
                    }
                    None
                }
            },
            Expr::Index(n, idx) => {
                self.width(idx, line)?;
                match self.decls.get(n.as_str()) {
                    Some(d) if d.array.is_some() => Some(d.width),
                    Some(_) => {
                        self.err(line, format!("`{n}` is not a memory"));
                        None
                    }
                    None => {
                        if self.undeclared.insert(n.clone()) {
                            self.err(line, format!("`{n}` is not declared"));
                        }
                        None
                    }
                }
            }
            Expr::Signed(inner) => self.width(inner, line),
            Expr::Not(inner) => {
                let w = self.width(inner, line)?;
                self.expect_bit(w, line, "operand of `!`")
            }
            Expr::Bin(op, l, r) => {
                let (lw, rw) = (self.width(l, line), self.width(r, line));
                let (lw, rw) = (lw?, rw?);
                match op {
                    BinOp::And | BinOp::Or => {
                        self.expect_bit(lw, line, "logical operand")?;
                        self.expect_bit(rw, line, "logical operand")
                    }
                    _ if lw != rw => {
                        self.err(line, format!("width mismatch: {lw}-bit and {rw}-bit operands"));
                        None
                    }
                    BinOp::Lt | BinOp::Eq => Some(1),
                    _ => Some(lw),
                }
            }
            Expr::Cond(c, t, f) => {
                let cw = self.width(c, line);
                let (tw, fw) = (self.width(t, line), self.width(f, line));
                self.expect_bit(cw?, line, "condition")?;
                let (tw, fw) = (tw?, fw?);
                if tw != fw {
                    self.err(line, format!("width mismatch: {tw}-bit and {fw}-bit branches"));
                    return None;
                }
                Some(tw)
            }
        }
    }

    fn expect_bit(&mut self, w: u32, line: usize, what: &str) -> Option<u32> {
        if w != 1 {
            self.err(line, format!("{what} must be 1 bit, found {w} bits"));
            return None;
        }
        Some(1)
    }

    fn stmt(&mut self, s: &Stmt, driven_regs: &mut BTreeSet<String>) {
        match s {
            Stmt::Block(body) => body.iter().for_each(|s| self.stmt(s, driven_regs)),
            Stmt::If(c, t, e) => {
                if let Some(w) = self.width(c, 0) {
                    self.expect_bit(w, 0, "`if` condition");
                }
                self.stmt(t, driven_regs);
                if let Some(e) = e {
                    self.stmt(e, driven_regs);
                }
            }
            Stmt::Case(sel, items) => {
                let sw = self.width(sel, 0);
                for (label, body) in items {
                    if let (Some(l), Some(sw)) = (label, sw) {
                        if let Some(lw) = self.width(l, 0) {
                            if lw != sw {
                                self.err(0, format!("case label is {lw} bits, selector is {sw} bits"));
                            }
                        }
                    }
                    self.stmt(body, driven_regs);
                }
            }
            Stmt::Assign { target, index, value, line } => {
                let vw = self.width(value, *line);
                let tw = match (self.decls.get(target.as_str()).copied(), index) {
                    (Some(d), _) if d.kind != DeclKind::Reg => {
                        self.err(*line, format!("procedural assignment to non-reg `{target}`"));
                        None
                    }
                    (Some(d), Some(i)) if d.array.is_some() => self.width(i, *line).map(|_| d.width),
                    (Some(d), None) if d.array.is_none() => Some(d.width),
                    (Some(_), _) => {
                        self.err(*line, format!("bad indexing of `{target}`"));
                        None
                    }
                    (None, _) => {
                        if self.undeclared.insert(target.clone()) {
                            self.err(*line, format!("`{target}` is not declared"));
                        }
                        None
                    }
                };
                driven_regs.insert(target.clone());
                if let (Some(t), Some(v)) = (tw, vw) {
                    if t != v {
                        self.err(*line, format!("width mismatch: `{target}` is {t} bits, value is {v} bits"));
                    }
                }
            }
        }
    }
}

/// Structural checks over emitted Verilog: every identifier declared, every
/// wire driven exactly once, operand and assignment widths equal, and a wire
/// present for every cell input the component's groups drive.
pub fn netlist_check(c: &HwComponent, v: &VerilogText) -> Vec<Diagnostic> {
    let m = match parse_verilog(&v.text) {
        Ok(m) => m,
        Err(e) => return vec![Diagnostic::new(format!("line {}", e.line), e.message)],
    };
    let mut ck = Checker { decls: HashMap::new(), diags: Vec::new(), undeclared: BTreeSet::new() };
    for d in &m.decls {
        if ck.decls.insert(&d.name, d).is_some() {
            ck.err(d.line, format!("`{}` is declared twice", d.name));
        }
    }
    if m.name != v.top || m.name != c.name {
        ck.err(1, format!("module `{}` does not match component `{}`", m.name, c.name));
    }
    let mut drivers: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (target, value, line) in &m.assigns {
        drivers.entry(target).or_default().push(*line);
        let vw = ck.width(value, *line);
        let tw = match ck.decls.get(target.as_str()).copied() {
            Some(d) if matches!(d.kind, DeclKind::Wire | DeclKind::Output) => Some(d.width),
            Some(_) => {
                ck.err(*line, format!("continuous assignment to `{target}`, which is not a wire"));
                None
            }
            None => {
                if ck.undeclared.insert(target.clone()) {
                    ck.err(*line, format!("`{target}` is not declared"));
                }
                None
            }
        };
        if let (Some(t), Some(v)) = (tw, vw) {
            if t != v {
                ck.err(*line, format!("width mismatch: `{target}` is {t} bits, value is {v} bits"));
            }
        }
    }
    let mut regs = BTreeSet::new();
    for s in &m.always {
        ck.stmt(s, &mut regs);
    }
    for d in &m.decls {
        if !matches!(d.kind, DeclKind::Wire | DeclKind::Output) {
            continue;
        }
        match drivers.get(d.name.as_str()).map_or(0, Vec::len) {
            1 => {}
            0 => ck.err(d.line, format!("wire `{}` has no driver", d.name)),
            n => ck.err(d.line, format!("wire `{}` has {n} drivers", d.name)),
        }
    }
    let mut wanted = BTreeSet::new();
    for g in &c.groups {
        for a in &g.assignments {
            wanted.insert(port_wire(&a.dest));
        }
    }
    for cell in &c.cells {
        for (port, _, dir) in cell.kind.ports() {
            if dir == Direction::In {
                wanted.insert(format!("{}_{port}", cell.name));
            }
        }
    }
    for w in wanted {
        if !ck.decls.contains_key(w.as_str()) && !ck.undeclared.contains(&w) {
            ck.err(0, format!("cell input `{w}` is not connected"));
        }
    }
    ck.diags
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RtlSimError {
    #[error(transparent)]
    Parse(#[from] NetlistParseError),
    #[error("`{0}` is not declared")]
    Undeclared(String),
    #[error("combinational loop through `{0}`")]
    Loop(String),
    #[error("read of `{name}[{index}]` is out of range")]
    OutOfRange { name: String, index: u64 },
    #[error("no image for memory `{0}`")]
    MissingImage(String),
    #[error("done not seen within {0} cycles")]
    Timeout(u64),
}

/// Two-phase evaluator for a parsed module: wires settle from register
/// state, then every nonblocking assignment commits at the clock edge.
pub struct RtlSim {
    m: Module,
    decls: HashMap<String, Decl>,
    assigns: HashMap<String, usize>,
    state: HashMap<String, u64>,
    arrays: HashMap<String, Vec<u64>>,
    inputs: HashMap<String, u64>,
    memo: HashMap<String, u64>,
    visiting: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RtlRun {
    /// Cycles from the one that samples `go` through the `done` pulse.
    pub cycles: u64,
    pub memories: MemorySet,
}

impl RtlSim {
    pub fn new(m: Module) -> Self {
        let decls: HashMap<String, Decl> = m.decls.iter().map(|d| (d.name.clone(), d.clone())).collect();
        let assigns = m.assigns.iter().enumerate().map(|(i, (t, _, _))| (t.clone(), i)).collect();
        let mut state = HashMap::new();
        let mut arrays = HashMap::new();
        for d in &m.decls {
            match (d.kind, d.array) {
                (DeclKind::Reg, Some(n)) => {
                    arrays.insert(d.name.clone(), vec![0; n as usize]);
                }
                (DeclKind::Reg, None) => {
                    state.insert(d.name.clone(), 0);
                }
                _ => {}
            }
        }
        RtlSim { m, decls, assigns, state, arrays, inputs: HashMap::new(), memo: HashMap::new(), visiting: BTreeSet::new() }
    }

    pub fn set_input(&mut self, name: &str, v: u64) {
        self.inputs.insert(name.to_string(), v);
    }

    pub fn array_mut(&mut self, name: &str) -> Option<&mut Vec<u64>> {
        self.arrays.get_mut(name)
    }

    pub fn array(&self, name: &str) -> Option<&Vec<u64>> {
        self.arrays.get(name)
    }

    /// Current value of a signal before the next edge.
    pub fn peek(&mut self, name: &str) -> Result<u64, RtlSimError> {
        self.signal(name)
    }

    fn width_of(&self, name: &str) -> u32 {
        self.decls.get(name).map_or(32, |d| d.width)
    }

    fn signal(&mut self, name: &str) -> Result<u64, RtlSimError> {
        if let Some(v) = self.memo.get(name) {
            return Ok(*v);
        }
        if let Some(v) = self.state.get(name) {
            return Ok(*v);
        }
        if let Some(v) = self.inputs.get(name) {
            return Ok(*v);
        }
        let Some(&i) = self.assigns.get(name) else {
            return if self.decls.contains_key(name) { Ok(0) } else { Err(RtlSimError::Undeclared(name.into())) };
        };
        if !self.visiting.insert(name.to_string()) {
            return Err(RtlSimError::Loop(name.into()));
        }
        let e = self.m.assigns[i].1.clone();
        let v = self.eval(&e)?.0 & mask(self.width_of(name));
        self.visiting.remove(name);
        self.memo.insert(name.to_string(), v);
        Ok(v)
    }

    /// Value and signedness.
    fn eval(&mut self, e: &Expr) -> Result<(u64, bool), RtlSimError> {
        Ok(match e {
            Expr::Lit { value, .. } => (*value, false),
            Expr::Ident(n) => (self.signal(n)?, false),
            Expr::Index(n, idx) => {
                let i = self.eval(idx)?.0;
                let arr = self.arrays.get(n).ok_or_else(|| RtlSimError::Undeclared(n.clone()))?;
                let v = *arr.get(i as usize).filter(|_| i < arr.len() as u64).ok_or_else(|| RtlSimError::OutOfRange { name: n.clone(), index: i })?;
                (v, false)
            }
            Expr::Signed(inner) => (self.eval(inner)?.0, true),
            Expr::Not(inner) => ((self.eval(inner)?.0 == 0) as u64, false),
            Expr::Bin(op, l, r) => {
                let (a, sa) = self.eval(l)?;
                let w = self.expr_width(l);
                let (b, sb) = self.eval(r)?;
                let v = match op {
                    BinOp::Add => a.wrapping_add(b) & mask(w),
                    BinOp::Sub => a.wrapping_sub(b) & mask(w),
                    BinOp::Mul => a.wrapping_mul(b) & mask(w),
                    BinOp::Eq => (a == b) as u64,
                    BinOp::Lt if sa && sb => (sext(a, w) < sext(b, self.expr_width(r))) as u64,
                    BinOp::Lt => (a < b) as u64,
                    BinOp::And => (a != 0 && b != 0) as u64,
                    BinOp::Or => (a != 0 || b != 0) as u64,
                };
                (v, false)
            }
            Expr::Cond(c, t, f) => {
                if self.eval(c)?.0 != 0 {
                    self.eval(t)?
                } else {
                    self.eval(f)?
                }
            }
        })
    }

    fn expr_width(&self, e: &Expr) -> u32 {
        match e {
            Expr::Lit { width, .. } => width.unwrap_or(32),
            Expr::Ident(n) | Expr::Index(n, _) => self.width_of(n),
            Expr::Signed(i) => self.expr_width(i),
            Expr::Not(_) | Expr::Bin(BinOp::Lt | BinOp::Eq | BinOp::And | BinOp::Or, _, _) => 1,
            Expr::Bin(_, l, _) => self.expr_width(l),
            Expr::Cond(_, t, _) => self.expr_width(t),
        }
    }

    fn exec(&mut self, s: &Stmt, regs: &mut Vec<(String, u64)>, mems: &mut Vec<(String, u64, u64)>) -> Result<(), RtlSimError> {
        match s {
            Stmt::Block(body) => {
                for s in body {
                    self.exec(s, regs, mems)?;
                }
            }
            Stmt::If(c, t, e) => {
                if self.eval(c)?.0 != 0 {
                    self.exec(t, regs, mems)?;
                } else if let Some(e) = e {
                    self.exec(e, regs, mems)?;
                }
            }
            Stmt::Case(sel, items) => {
                let v = self.eval(sel)?.0;
                for (label, body) in items {
                    let hit = match label {
                        Some(l) => self.eval(l)?.0 == v,
                        None => true,
                    };
                    if hit {
                        self.exec(body, regs, mems)?;
                        break;
                    }
                }
            }
            Stmt::Assign { target, index, value, .. } => {
                let v = self.eval(value)?.0 & mask(self.width_of(target));
                match index {
                    Some(i) => {
                        let i = self.eval(i)?.0;
                        mems.push((target.clone(), i, v));
                    }
                    None => regs.push((target.clone(), v)),
                }
            }
        }
        Ok(())
    }

    /// Settles, runs every process, then commits. Returns the value of
    /// `probe` sampled before the edge.
    pub fn cycle(&mut self, probe: &str) -> Result<u64, RtlSimError> {
        self.memo.clear();
        let sampled = self.signal(probe)?;
        let mut regs = Vec::new();
        let mut mems = Vec::new();
        let always = std::mem::take(&mut self.m.always);
        let result = always.iter().try_for_each(|s| self.exec(s, &mut regs, &mut mems));
        self.m.always = always;
        result?;
        for (name, v) in regs {
            self.state.insert(name, v);
        }
        for (name, i, v) in mems {
            let arr = self.arrays.get_mut(&name).ok_or_else(|| RtlSimError::Undeclared(name.clone()))?;
            if let Some(slot) = arr.get_mut(i as usize) {
                *slot = v;
            }
        }
        Ok(sampled)
    }
}

fn sext(v: u64, width: u32) -> i64 {
    let shift = 64 - width.min(64);
    ((v << shift) as i64) >> shift
}

/// Executes emitted Verilog for one go/done transaction. Memories are the
/// `<cell>_mem` arrays, loaded from `mems` by cell name.
pub fn run_verilog(v: &VerilogText, mems: &MemorySet, max_cycles: u64) -> Result<RtlRun, RtlSimError> {
    let m = parse_verilog(&v.text)?;
    let names: Vec<(String, String)> = m
        .decls
        .iter()
        .filter(|d| d.array.is_some())
        .map(|d| (d.name.clone(), d.name.trim_end_matches("_mem").to_string()))
        .collect();
    let mut sim = RtlSim::new(m);
    for (array, cell) in &names {
        let img = mems.get(cell).ok_or_else(|| RtlSimError::MissingImage(cell.clone()))?;
        let arr = sim.array_mut(array).expect("declared array");
        for (slot, v) in arr.iter_mut().zip(&img.data) {
            *slot = *v as u32 as u64;
        }
    }
    sim.set_input("reset", 1);
    sim.set_input("go", 0);
    sim.cycle("done")?;
    sim.set_input("reset", 0);
    sim.set_input("go", 1);
    let mut cycles = 0;
    loop {
        if cycles >= max_cycles {
            return Err(RtlSimError::Timeout(max_cycles));
        }
        let done = sim.cycle("done")?;
        cycles += 1;
        sim.set_input("go", 0);
        if done == 1 {
            break;
        }
    }
    let memories = names
        .iter()
        .map(|(array, cell)| {
            let data = sim.array(array).expect("declared array").iter().map(|&v| v as u32 as i32).collect();
            (cell.clone(), MemoryImage::new(cell, data))
        })
        .collect();
    Ok(RtlRun { cycles, memories })
}
