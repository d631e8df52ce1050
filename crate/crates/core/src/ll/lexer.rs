//! Tokenizer for LLVM textual IR.

use super::ast::Pos;
use super::{ParseError, ParseErrorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    /// Bare word: opcodes, attributes, linkage, `to`, `x`, ...
    Keyword,
    /// `%name`; the prefix is stripped from `text`.
    LocalIdent,
    /// `@name`; the prefix is stripped from `text`.
    GlobalIdent,
    /// `name:` block label; the colon is stripped.
    Label,
    IntLit,
    /// `i64`, `void`, `ptr`, `label`, `metadata`, ...
    Type,
    Punct,
    /// String literal contents, without the quotes.
    Str,
    /// `!name`, `!0`, or `!"string"`; the `!` is stripped.
    Metadata,
    /// `#0`; the `#` is stripped.
    AttrGroup,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub pos: Pos,
}

impl Token {
    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }

    pub fn is_punct(&self, p: &str) -> bool {
        self.is(TokenKind::Punct, p)
    }

    pub fn is_keyword(&self, k: &str) -> bool {
        self.is(TokenKind::Keyword, k)
    }

    /// How the token looked in the source, for diagnostics.
    pub fn display(&self) -> String {
        match self.kind {
            TokenKind::LocalIdent => format!("%{}", self.text),
            TokenKind::GlobalIdent => format!("@{}", self.text),
            TokenKind::Label => format!("{}:", self.text),
            TokenKind::Str => format!("\"{}\"", self.text),
            TokenKind::Metadata => format!("!{}", self.text),
            TokenKind::AttrGroup => format!("#{}", self.text),
            _ => self.text.clone(),
        }
    }
}

const TYPE_WORDS: &[&str] = &[
    "void",
    "ptr",
    "label",
    "metadata",
    "half",
    "bfloat",
    "float",
    "double",
    "fp128",
    "x86_fp80",
    "ppc_fp128",
    "x86_mmx",
    "token",
    "opaque",
];

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '-' | '$' | '.' | '_')
}

fn is_type_word(w: &str) -> bool {
    if TYPE_WORDS.contains(&w) {
        return true;
    }
    let mut chars = w.chars();
    chars.next() == Some('i') && {
        let rest = chars.as_str();
        !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit())
    }
}

struct Lexer {
    chars: Vec<char>,
    idx: usize,
    line: u32,
    col: u32,
    tokens: Vec<Token>,
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.idx).copied()
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.chars.get(self.idx + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.idx).copied()?;
        self.idx += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn pos(&self) -> Pos {
        Pos::new(self.line, self.col)
    }

    fn push(&mut self, kind: TokenKind, text: String, pos: Pos) {
        self.tokens.push(Token { kind, text, pos });
    }

    fn error(&self, pos: Pos, message: impl Into<String>) -> ParseError {
        ParseError::new(ParseErrorKind::Lex, message, pos)
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if !pred(c) {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    fn string_lit(&mut self, start: Pos) -> Result<String, ParseError> {
        // Opening quote already consumed.
        let mut s = String::new();
        loop {
            match self.bump() {
                Some('"') => return Ok(s),
                Some(c) => s.push(c),
                None => return Err(self.error(start, "unterminated string literal")),
            }
        }
    }

    /// Name after a `%`, `@` or `!` sigil: quoted or bare.
    fn sigil_name(&mut self, start: Pos, what: &str) -> Result<String, ParseError> {
        if self.peek() == Some('"') {
            self.bump();
            return self.string_lit(start);
        }
        let name = self.take_while(is_ident_char);
        if name.is_empty() {
            return Err(self.error(start, format!("empty {what} name")));
        }
        Ok(name)
    }

    fn run(mut self) -> Result<Vec<Token>, ParseError> {
        while let Some(c) = self.peek() {
            let start = self.pos();
            match c {
                c if c.is_whitespace() => {
                    self.bump();
                }
                ';' => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                '%' | '@' => {
                    self.bump();
                    let name = self.sigil_name(start, "identifier")?;
                    let kind = if c == '%' {
                        TokenKind::LocalIdent
                    } else {
                        TokenKind::GlobalIdent
                    };
                    self.push(kind, name, start);
                }
                '!' => {
                    self.bump();
                    let name = match self.peek() {
                        Some('"') => {
                            self.bump();
                            self.string_lit(start)?
                        }
                        _ => self.take_while(|c| is_ident_char(c) || c == '\\'),
                    };
                    self.push(TokenKind::Metadata, name, start);
                }
                '#' => {
                    self.bump();
                    let digits = self.take_while(|c| c.is_ascii_digit());
                    if digits.is_empty() {
                        return Err(self.error(start, "expected attribute group number after '#'"));
                    }
                    self.push(TokenKind::AttrGroup, digits, start);
                }
                '"' => {
                    self.bump();
                    let s = self.string_lit(start)?;
                    if self.peek() == Some(':') {
                        self.bump();
                        self.push(TokenKind::Label, s, start);
                    } else {
                        self.push(TokenKind::Str, s, start);
                    }
                }
                '.' if self.peek_at(1) == Some('.') && self.peek_at(2) == Some('.') => {
                    self.bump();
                    self.bump();
                    self.bump();
                    self.push(TokenKind::Punct, "...".into(), start);
                }
                '=' | ',' | '(' | ')' | '[' | ']' | '{' | '}' | '*' | '<' | '>' | '|' => {
                    self.bump();
                    self.push(TokenKind::Punct, c.to_string(), start);
                }
                '-' if self.peek_at(1).is_some_and(|d| d.is_ascii_digit()) => {
                    self.bump();
                    let digits = self.take_while(|c| c.is_ascii_digit());
                    self.push(TokenKind::IntLit, format!("-{digits}"), start);
                }
                c if is_ident_char(c) => {
                    let word = self.take_while(is_ident_char);
                    if self.peek() == Some(':') {
                        self.bump();
                        self.push(TokenKind::Label, word, start);
                    } else if word.chars().all(|c| c.is_ascii_digit()) {
                        self.push(TokenKind::IntLit, word, start);
                    } else if is_type_word(&word) {
                        self.push(TokenKind::Type, word, start);
                    } else if word.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') {
                        self.push(TokenKind::Keyword, word, start);
                    } else {
                        return Err(self.error(start, format!("illegal token `{word}`")));
                    }
                }
                other => {
                    return Err(self.error(start, format!("illegal character `{other}`")));
                }
            }
        }
        Ok(self.tokens)
    }
}

/// Split `.ll` source into tokens. Comments run from `;` to end of line and
/// are dropped.
pub fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    Lexer {
        chars: source.chars().collect(),
        idx: 0,
        line: 1,
        col: 1,
        tokens: Vec::new(),
    }
    .run()
}
