//! Text format for the affine subset.
//!
//! The accepted grammar is closed: `func.func`, `affine.for` (with optional
//! `step` and `iter_args`), `affine.load`, `affine.store`, `affine.yield`,
//! `arith.constant`, `arith.muli`, `arith.addi` and `return`, over
//! `memref<Nxi32, S>` arguments and `i32` scalars. Index expressions are sums
//! of `%v`, `%v * C`, `C * %v` and integer constants. `//` comments run to the
//! end of the line; LF and CRLF line endings are both accepted.
//!
//! Value names may contain `.` as well as `_`, so `%c0.i32` and `%c0_i32` are
//! both ordinary identifiers with no special meaning.

mod lexer;
mod printer;

use std::collections::HashMap;
use std::fmt;

use lexer::{lex, Tok, Token};
pub use printer::print;

use crate::affine_ir::{
    op_location, verify_module, AffineExpr, AffineFor, AffineFunc, AffineModule, AffineOp, IterArg, MemRefType, OpKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    /// The text does not follow the grammar.
    Syntax,
    /// The text is grammatical but the program is ill-formed (scoping, bounds, ...).
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub span: SourceSpan,
    pub expected: String,
    pub found: String,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ParseErrorKind::Syntax => write!(f, "expected {}, found {}", self.expected, self.found),
            ParseErrorKind::Invalid => write!(f, "{}", self.found),
        }
    }
}

const SUPPORTED_OPS: &str = "an op of the supported subset (arith.constant, arith.addi, arith.muli, affine.for, \
                             affine.load, affine.store, affine.yield, return)";
const SUPPORTED_MEMREF: &str = "`xi32` (only 1-D memref<Nxi32, S> is supported)";

/// Parses and verifies `text`.
pub fn parse(text: &str) -> Result<AffineModule, ParseError> {
    parse_with_spans(text).map(|p| p.module)
}

/// A parsed module plus the source span of every op, keyed by `op_location`.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub module: AffineModule,
    pub spans: HashMap<String, SourceSpan>,
}

impl Parsed {
    /// Span for a diagnostic location, falling back to the enclosing op or function.
    pub fn span_of(&self, location: &str) -> Option<SourceSpan> {
        let (func, path) = match location.split_once('[') {
            Some((f, rest)) => (f, rest.trim_end_matches(']')),
            None => (location, ""),
        };
        let mut parts: Vec<&str> = path.split('.').filter(|p| !p.is_empty()).collect();
        loop {
            let key = if parts.is_empty() { func.to_string() } else { format!("{func}[{}]", parts.join(".")) };
            if let Some(s) = self.spans.get(&key) {
                return Some(*s);
            }
            parts.pop()?;
        }
    }
}

pub fn parse_with_spans(text: &str) -> Result<Parsed, ParseError> {
    let tokens = lex(text).map_err(|e| ParseError {
        span: e.span,
        expected: e.expected.to_string(),
        found: format!("`{}`", e.found),
        kind: ParseErrorKind::Syntax,
    })?;
    let mut p = Parser { tokens, pos: 0, spans: HashMap::new(), func: String::new(), args: HashMap::new() };
    let module = p.module()?;
    if let Some(d) = verify_module(&module).into_iter().next() {
        let span = p.spans.get(&d.location).copied().unwrap_or(SourceSpan { line: 1, column: 1, length: 0 });
        return Err(ParseError { span, expected: "a well-formed program".into(), found: d.message, kind: ParseErrorKind::Invalid });
    }
    Ok(Parsed { module, spans: p.spans })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    /// Op location (see `op_location`) to the span of its first token.
    spans: HashMap<String, SourceSpan>,
    func: String,
    args: HashMap<String, MemRefType>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if !matches!(t.tok, Tok::Eof) {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, t: &Token, expected: impl Into<String>) -> ParseError {
        ParseError { span: t.span, expected: expected.into(), found: t.tok.describe(), kind: ParseErrorKind::Syntax }
    }

    fn fail<T>(&self, expected: impl Into<String>) -> PResult<T> {
        Err(self.error_at(self.peek(), expected))
    }

    fn at_punct(&self, p: &str) -> bool {
        matches!(self.peek().tok, Tok::Punct(q) if q == p)
    }

    fn at_word(&self, w: &str) -> bool {
        matches!(&self.peek().tok, Tok::Word(q) if q == w)
    }

    fn punct(&mut self, p: &str) -> PResult<()> {
        if self.at_punct(p) {
            self.bump();
            Ok(())
        } else {
            self.fail(format!("`{p}`"))
        }
    }

    fn word(&mut self, w: &str) -> PResult<()> {
        if self.at_word(w) {
            self.bump();
            Ok(())
        } else {
            self.fail(format!("`{w}`"))
        }
    }

    fn value(&mut self) -> PResult<String> {
        match &self.peek().tok {
            Tok::Value(v) => {
                let v = v.clone();
                self.bump();
                Ok(v)
            }
            _ => self.fail("a `%` value"),
        }
    }

    fn uint(&mut self) -> PResult<u64> {
        match self.peek().tok {
            Tok::Int(i) => {
                self.bump();
                Ok(i)
            }
            _ => self.fail("an integer"),
        }
    }

    fn signed(&mut self) -> PResult<i64> {
        let negative = self.at_punct("-");
        if negative {
            self.bump();
        }
        let t = self.peek().clone();
        let magnitude = self.uint()? as i128;
        let v = if negative { -magnitude } else { magnitude };
        i64::try_from(v).map_err(|_| self.error_at(&t, "an integer that fits in 64 bits"))
    }

    fn module(&mut self) -> PResult<AffineModule> {
        let mut funcs = Vec::new();
        loop {
            if matches!(self.peek().tok, Tok::Eof) && !funcs.is_empty() {
                break;
            }
            funcs.push(self.func()?);
        }
        Ok(AffineModule { funcs })
    }

    fn func(&mut self) -> PResult<AffineFunc> {
        let header = self.peek().clone();
        self.word("func.func")?;
        let name = match &self.peek().tok {
            Tok::Symbol(s) => s.clone(),
            _ => return self.fail("a function name `@name`"),
        };
        self.bump();
        self.func = name.clone();
        self.args.clear();
        self.spans.insert(op_location(&name, &[]), header.span);

        self.punct("(")?;
        let mut args = Vec::new();
        if !self.at_punct(")") {
            loop {
                let arg = self.value()?;
                self.punct(":")?;
                let ty = self.memref_type()?;
                self.args.insert(arg.clone(), ty);
                args.push((arg, ty));
                if self.at_punct(",") {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.punct(")")?;
        self.punct("{")?;
        let mut path = Vec::new();
        let body = self.block(&mut path)?;
        Ok(AffineFunc { name, args, body })
    }

    fn memref_type(&mut self) -> PResult<MemRefType> {
        self.word("memref")?;
        self.punct("<")?;
        let length = self.uint()?;
        if !self.at_word("xi32") {
            return self.fail(SUPPORTED_MEMREF);
        }
        self.bump();
        let space = if self.at_punct(",") {
            self.bump();
            self.signed()?
        } else {
            0
        };
        self.punct(">")?;
        Ok(MemRefType { length, space })
    }

    fn i32_type(&mut self) -> PResult<()> {
        if self.at_word("i32") {
            self.bump();
            Ok(())
        } else {
            self.fail("`i32` (the only scalar type supported)")
        }
    }

    /// Parses ops up to and including the closing `}`.
    fn block(&mut self, path: &mut Vec<usize>) -> PResult<Vec<AffineOp>> {
        let mut ops = Vec::new();
        while !self.at_punct("}") {
            path.push(ops.len());
            let op = self.op(path)?;
            path.pop();
            ops.push(op);
        }
        self.bump();
        Ok(ops)
    }

    fn access_type(&mut self, memref: &str) -> PResult<()> {
        let at = self.peek().clone();
        let ty = self.memref_type()?;
        match self.args.get(memref) {
            Some(declared) if *declared != ty => Err(ParseError {
                span: at.span,
                expected: format!("`{declared}` as declared for %{memref}"),
                found: format!("`{ty}`"),
                kind: ParseErrorKind::Syntax,
            }),
            _ => Ok(()),
        }
    }

    fn op(&mut self, path: &[usize]) -> PResult<AffineOp> {
        let start = self.peek().span;
        self.spans.insert(op_location(&self.func, path), start);
        let mut results = Vec::new();
        if matches!(self.peek().tok, Tok::Value(_)) {
            loop {
                results.push(self.value()?);
                if self.at_punct(",") {
                    self.bump();
                } else {
                    break;
                }
            }
            self.punct("=")?;
        }
        let mnemonic = match &self.peek().tok {
            Tok::Word(w) => w.clone(),
            _ => return self.fail(SUPPORTED_OPS),
        };
        let kind = match mnemonic.as_str() {
            "arith.constant" => {
                self.bump();
                let at = self.peek().clone();
                let v = self.signed()?;
                let value = i32::try_from(v).map_err(|_| self.error_at(&at, "an i32 constant"))?;
                self.punct(":")?;
                self.i32_type()?;
                OpKind::Constant { value }
            }
            "affine.load" => {
                self.bump();
                let memref = self.value()?;
                self.punct("[")?;
                let index = self.expr()?;
                self.punct("]")?;
                self.punct(":")?;
                self.access_type(&memref)?;
                OpKind::Load { memref, index }
            }
            "affine.store" => {
                self.bump();
                let value = self.value()?;
                self.punct(",")?;
                let memref = self.value()?;
                self.punct("[")?;
                let index = self.expr()?;
                self.punct("]")?;
                self.punct(":")?;
                self.access_type(&memref)?;
                OpKind::Store { value, memref, index }
            }
            "arith.muli" | "arith.addi" => {
                self.bump();
                let lhs = self.value()?;
                self.punct(",")?;
                let rhs = self.value()?;
                self.punct(":")?;
                self.i32_type()?;
                if mnemonic == "arith.muli" {
                    OpKind::MulI { lhs, rhs }
                } else {
                    OpKind::AddI { lhs, rhs }
                }
            }
            "affine.for" => {
                self.bump();
                OpKind::For(self.for_loop(path)?)
            }
            "affine.yield" => {
                self.bump();
                let mut values = Vec::new();
                if matches!(self.peek().tok, Tok::Value(_)) {
                    loop {
                        values.push(self.value()?);
                        if self.at_punct(",") {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    self.punct(":")?;
                    self.type_list(values.len())?;
                }
                OpKind::Yield { values }
            }
            "return" => {
                self.bump();
                OpKind::Return
            }
            _ => return self.fail(SUPPORTED_OPS),
        };
        Ok(AffineOp { results, kind })
    }

    fn type_list(&mut self, count: usize) -> PResult<()> {
        for i in 0..count {
            if i > 0 {
                self.punct(",")?;
            }
            self.i32_type()?;
        }
        Ok(())
    }

    fn for_loop(&mut self, path: &[usize]) -> PResult<AffineFor> {
        let iv = self.value()?;
        self.punct("=")?;
        let lower = self.signed()?;
        self.word("to")?;
        let upper = self.signed()?;
        let step = if self.at_word("step") {
            self.bump();
            self.signed()?
        } else {
            1
        };
        let mut iter_args = Vec::new();
        if self.at_word("iter_args") {
            self.bump();
            self.punct("(")?;
            loop {
                let name = self.value()?;
                self.punct("=")?;
                let init = self.value()?;
                iter_args.push(IterArg { name, init });
                if self.at_punct(",") {
                    self.bump();
                } else {
                    break;
                }
            }
            self.punct(")")?;
            self.punct("->")?;
            self.punct("(")?;
            self.type_list(iter_args.len())?;
            self.punct(")")?;
        }
        self.punct("{")?;
        let mut inner = path.to_vec();
        let body = self.block(&mut inner)?;
        Ok(AffineFor { iv, lower, upper, step, iter_args, body })
    }

    fn expr(&mut self) -> PResult<AffineExpr> {
        let mut e = AffineExpr::default();
        let mut negate = if self.at_punct("-") {
            self.bump();
            true
        } else {
            false
        };
        loop {
            self.term(&mut e, negate)?;
            if self.at_punct("+") {
                negate = false;
            } else if self.at_punct("-") {
                negate = true;
            } else {
                break;
            }
            self.bump();
        }
        Ok(e)
    }

    fn term(&mut self, e: &mut AffineExpr, negate: bool) -> PResult<()> {
        let start = self.peek().clone();
        let sign: i128 = if negate { -1 } else { 1 };
        let overflow = |p: &Parser| p.error_at(&start, "an index expression within 64-bit range");
        match self.peek().tok.clone() {
            Tok::Int(c) => {
                self.bump();
                if self.at_punct("*") {
                    self.bump();
                    let var = self.value()?;
                    let coeff = i64::try_from(sign * c as i128).map_err(|_| overflow(self))?;
                    e.terms.push((var, coeff));
                } else {
                    let v = i64::try_from(sign * c as i128).map_err(|_| overflow(self))?;
                    e.constant = e.constant.checked_add(v).ok_or_else(|| overflow(self))?;
                }
            }
            Tok::Value(var) => {
                self.bump();
                let mut coeff: i128 = 1;
                if self.at_punct("*") {
                    self.bump();
                    let negative = self.at_punct("-");
                    if negative {
                        self.bump();
                    }
                    coeff = self.uint()? as i128;
                    if negative {
                        coeff = -coeff;
                    }
                }
                let coeff = i64::try_from(sign * coeff).map_err(|_| overflow(self))?;
                e.terms.push((var, coeff));
            }
            _ => return self.fail("an index term (`%v`, `%v * C`, `C * %v` or `C`)"),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine_ir::{alpha_equivalent, gen_gemm};

    pub(crate) const REFERENCE_KERNEL: &str = include_str!("../../../../fixtures/gemm32.mlir");

    #[test]
    fn parses_reference_kernel() {
        let m = parse(REFERENCE_KERNEL).unwrap();
        assert_eq!(m.funcs.len(), 1);
        let f = &m.funcs[0];
        assert_eq!(f.name, "mlir_funcSYCL_class_mxm_kernel");
        assert_eq!(f.args.len(), 3);
        assert!(f.args.iter().all(|(_, t)| *t == MemRefType::new(1024, 1)));
        let OpKind::For(i) = &f.body[0].kind else { panic!() };
        let OpKind::For(j) = &i.body[0].kind else { panic!() };
        let OpKind::For(k) = &j.body[1].kind else { panic!() };
        for l in [i, j, k] {
            assert_eq!((l.lower, l.upper, l.step), (0, 32, 1));
        }
        assert_eq!(k.iter_args[0].init, "c0.i32");
        assert!(alpha_equivalent(&m, &gen_gemm(32)));
    }

    #[test]
    fn empty_input() {
        let e = parse("").unwrap_err();
        assert_eq!(e.expected, "`func.func`");
        assert_eq!(e.found, "end of input");
        assert_eq!((e.span.line, e.span.column), (1, 1));
    }

    #[test]
    fn rejects_two_dimensional_memref() {
        let e = parse("func.func @f(%a: memref<32x32xi32>) {\n  return\n}").unwrap_err();
        assert!(e.expected.contains("only 1-D"), "{e}");
        assert_eq!(e.span.line, 1);
    }

    #[test]
    fn rejects_unknown_op() {
        let e = parse("func.func @f() {\n  %x = arith.subi %a, %b : i32\n  return\n}").unwrap_err();
        assert_eq!((e.span.line, e.span.column), (2, 8));
        assert!(e.expected.contains("supported subset"));
    }

    #[test]
    fn spans_fall_back_to_enclosing_op() {
        let text = "func.func @f.g(%m: memref<4xi32>) {\n  affine.for %i = 0 to 4 {\n    %x = affine.load %m[%i] : memref<4xi32, 0>\n  }\n  return\n}";
        let p = parse_with_spans(text).unwrap();
        assert_eq!(p.span_of("@f.g[0.0]").map(|s| s.line), Some(3));
        assert_eq!(p.span_of("@f.g[0.7]").map(|s| s.line), Some(2));
        assert_eq!(p.span_of("@f.g").map(|s| s.line), Some(1));
        assert_eq!(p.span_of("@h"), None);
    }

    #[test]
    fn semantic_errors_point_at_the_op() {
        let text = "func.func @f(%m: memref<4xi32>) {\n  affine.for %i = 0 to 4 {\n    %x = affine.load %m[%j] : memref<4xi32, 0>\n  }\n  return\n}";
        let e = parse(text).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Invalid);
        assert_eq!((e.span.line, e.span.column), (3, 5));
        assert!(e.found.contains("%j"), "{e}");
    }

    #[test]
    fn access_type_must_match_declaration() {
        let text = "func.func @f(%m: memref<4xi32, 1>) {\n  %x = affine.load %m[0] : memref<8xi32, 1>\n  return\n}";
        let e = parse(text).unwrap_err();
        assert_eq!(e.span.line, 2);
    }

    #[test]
    fn index_grammar() {
        let text = "func.func @f(%m: memref<64xi32>) {\n  affine.for %i = 0 to 4 {\n    affine.for %j = 0 to 4 {\n      %x = affine.load %m[3 * %i + %j * 2 - 1 + 5 - %j] : memref<64xi32, 0>\n    }\n  }\n  return\n}";
        let m = parse(text).unwrap();
        let OpKind::For(i) = &m.funcs[0].body[0].kind else { panic!() };
        let OpKind::For(j) = &i.body[0].kind else { panic!() };
        let OpKind::Load { index, .. } = &j.body[0].kind else { panic!() };
        assert_eq!(index.terms, vec![("i".into(), 3), ("j".into(), 2), ("j".into(), -1)]);
        assert_eq!(index.constant, 4);
    }

    #[test]
    fn crlf_and_comments() {
        let text = "// leading\r\nfunc.func @f() { // trailing\r\n  return\r\n}\r\n";
        assert!(parse(text).is_ok());
    }

    #[test]
    fn never_panics_on_garbage() {
        for text in ["func.func", "func.func @f(", "func.func @f() {", "}", "%", "@", "->", "func.func @f(%a: memref<", "\u{0}\u{ffff}"] {
            assert!(parse(text).is_err(), "{text:?}");
        }
    }
}
