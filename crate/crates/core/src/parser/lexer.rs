use super::SourceSpan;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    /// Bare word: keywords, dialect op names (`affine.for`), `xi32`, `to`.
    Word(String),
    /// `%name`
    Value(String),
    /// `@name`
    Symbol(String),
    /// Unsigned integer literal; sign is handled by the parser.
    Int(u64),
    Punct(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Value(v) => format!("`%{v}`"),
            Tok::Symbol(s) => format!("`@{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

#[derive(Debug)]
pub struct LexError {
    pub span: SourceSpan,
    pub found: String,
    pub expected: &'static str,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

/// Identifier characters after `%` / `@`. `.` is accepted so that both
/// `%c0_i32` and `%c0.i32` spellings parse.
fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '$'
}

const PUNCTS: [&str; 13] = ["->", "(", ")", "{", "}", "[", "]", "<", ">", ",", ":", "=", "*"];

pub fn lex(text: &str) -> Result<Vec<Token>, LexError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    let span = |line, column, length| SourceSpan { line, column, length };

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start_col = col;
        if c == '%' || c == '@' {
            let mut j = i + 1;
            while j < chars.len() && is_ident_char(chars[j]) {
                j += 1;
            }
            if j == i + 1 {
                return Err(LexError { span: span(line, col, 1), found: c.to_string(), expected: "an identifier after the sigil" });
            }
            let name: String = chars[i + 1..j].iter().collect();
            let len = j - i;
            out.push(Token { tok: if c == '%' { Tok::Value(name) } else { Tok::Symbol(name) }, span: span(line, start_col, len) });
            col += len;
            i = j;
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let digits: String = chars[i..j].iter().collect();
            let len = j - i;
            let value = digits.parse::<u64>().map_err(|_| LexError {
                span: span(line, start_col, len),
                found: digits.clone(),
                expected: "an integer that fits in 64 bits",
            })?;
            out.push(Token { tok: Tok::Int(value), span: span(line, start_col, len) });
            col += len;
            i = j;
            continue;
        }
        if is_ident_start(c) {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_' || chars[j] == '.') {
                j += 1;
            }
            let word: String = chars[i..j].iter().collect();
            let len = j - i;
            out.push(Token { tok: Tok::Word(word), span: span(line, start_col, len) });
            col += len;
            i = j;
            continue;
        }
        if c == '-' && chars.get(i + 1) != Some(&'>') {
            out.push(Token { tok: Tok::Punct("-"), span: span(line, start_col, 1) });
            col += 1;
            i += 1;
            continue;
        }
        if c == '+' {
            out.push(Token { tok: Tok::Punct("+"), span: span(line, start_col, 1) });
            col += 1;
            i += 1;
            continue;
        }
        let rest = &chars[i..];
        let matched = PUNCTS.iter().find(|p| {
            let pc: Vec<char> = p.chars().collect();
            rest.len() >= pc.len() && rest[..pc.len()] == pc[..]
        });
        match matched {
            Some(p) => {
                out.push(Token { tok: Tok::Punct(p), span: span(line, start_col, p.len()) });
                col += p.len();
                i += p.len();
            }
            None => {
                return Err(LexError { span: span(line, start_col, 1), found: c.to_string(), expected: "a token of the affine subset" });
            }
        }
    }
    out.push(Token { tok: Tok::Eof, span: span(line, col, 0) });
    Ok(out)
}
