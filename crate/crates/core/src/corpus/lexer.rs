//! Lossless Java lexer.
//!
//! Every byte of the input ends up in exactly one token, whitespace and
//! comments included, so concatenating token texts reproduces the source.
//! The lexer follows the Java lexical grammar closely enough to keep string,
//! char and text-block literals and comments intact; it does not validate
//! numeric literal syntax beyond grouping the characters of one literal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Identifier,
    Keyword,
    Literal,
    Operator,
    Separator,
    Comment,
    Whitespace,
}

impl TokenKind {
    /// Whitespace and comments carry no syntax.
    pub fn is_trivia(self) -> bool {
        matches!(self, TokenKind::Whitespace | TokenKind::Comment)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JavaToken {
    pub kind: TokenKind,
    pub text: String,
    /// 1-based line of the first character.
    pub line: usize,
    /// 1-based column (in characters) of the first character.
    pub col: usize,
}

pub const KEYWORDS: &[&str] = &[
    "abstract",
    "assert",
    "boolean",
    "break",
    "byte",
    "case",
    "catch",
    "char",
    "class",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extends",
    "final",
    "finally",
    "float",
    "for",
    "goto",
    "if",
    "implements",
    "import",
    "instanceof",
    "int",
    "interface",
    "long",
    "native",
    "new",
    "package",
    "private",
    "protected",
    "public",
    "return",
    "short",
    "static",
    "strictfp",
    "super",
    "switch",
    "synchronized",
    "this",
    "throw",
    "throws",
    "transient",
    "try",
    "void",
    "volatile",
    "while",
    "_",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

const SEPARATORS: &[&str] = &["...", "::", "(", ")", "{", "}", "[", "]", ";", ",", ".", "@"];

// Longest first so that maximal munch is a simple prefix scan.
const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "->", "==", ">=", "<=", "!=", "&&", "||", "++", "--", "<<", ">>",
    "+=", "-=", "*=", "/=", "&=", "|=", "^=", "%=", "=", ">", "<", "!", "~", "?", ":", "+", "-",
    "*", "/", "&", "|", "^", "%",
];

/// Lexes `source` strictly: an unterminated string, char literal, text block
/// or block comment is an error carrying the position where it started.
pub fn lex_java(source: &str) -> Result<Vec<JavaToken>> {
    Lexer::new(source, true).run()
}

/// Like [`lex_java`] but closes unterminated literals and comments at the end
/// of the line (or input) instead of failing.
pub fn lex_java_lenient(source: &str) -> Vec<JavaToken> {
    Lexer::new(source, false)
        .run()
        .expect("lenient lexing never fails")
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
    strict: bool,
    tokens: Vec<JavaToken>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, strict: bool) -> Self {
        Self {
            src,
            pos: 0,
            line: 1,
            col: 1,
            strict,
            tokens: Vec::new(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.rest().chars().nth(n)
    }

    fn run(mut self) -> Result<Vec<JavaToken>> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            let (line, col) = (self.line, self.col);
            let kind = if c.is_whitespace() {
                self.take_while(char::is_whitespace);
                TokenKind::Whitespace
            } else if self.rest().starts_with("//") {
                self.take_while(|c| c != '\n' && c != '\r');
                TokenKind::Comment
            } else if self.rest().starts_with("/*") {
                self.block_comment(line, col)?;
                TokenKind::Comment
            } else if self.rest().starts_with("\"\"\"") {
                self.text_block(line, col)?;
                TokenKind::Literal
            } else if c == '"' || c == '\'' {
                self.quoted(c, line, col)?;
                TokenKind::Literal
            } else if c.is_ascii_digit() || (c == '.' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) {
                self.number();
                TokenKind::Literal
            } else if is_ident_start(c) {
                self.take_while(is_ident_part);
                let word = &self.src[start..self.pos];
                if is_keyword(word) {
                    TokenKind::Keyword
                } else if matches!(word, "true" | "false" | "null") {
                    TokenKind::Literal
                } else {
                    TokenKind::Identifier
                }
            } else if let Some(sep) = SEPARATORS.iter().find(|s| self.rest().starts_with(**s)) {
                self.advance_bytes(sep.len());
                TokenKind::Separator
            } else if let Some(op) = OPERATORS.iter().find(|s| self.rest().starts_with(**s)) {
                self.advance_bytes(op.len());
                TokenKind::Operator
            } else {
                // Not Java (e.g. `#` or a stray backtick); keep it as a lone operator so
                // lexing stays lossless.
                self.bump();
                TokenKind::Operator
            };
            self.tokens.push(JavaToken {
                kind,
                text: self.src[start..self.pos].to_string(),
                line,
                col,
            });
        }
        Ok(self.tokens)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else if c == '\r' {
            // A lone CR ends a line; CRLF is counted once, on the LF.
            if self.peek() != Some('\n') {
                self.line += 1;
                self.col = 1;
            }
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn advance_bytes(&mut self, n: usize) {
        let end = self.pos + n;
        while self.pos < end {
            self.bump();
        }
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) {
        while let Some(c) = self.peek() {
            if !f(c) {
                break;
            }
            self.bump();
        }
    }

    fn unterminated(&self, what: &str, line: usize, col: usize) -> Error {
        Error::Lex {
            line,
            col,
            message: format!("unterminated {what}"),
        }
    }

    fn block_comment(&mut self, line: usize, col: usize) -> Result<()> {
        self.advance_bytes(2);
        loop {
            if self.rest().starts_with("*/") {
                self.advance_bytes(2);
                return Ok(());
            }
            if self.bump().is_none() {
                return if self.strict {
                    Err(self.unterminated("comment", line, col))
                } else {
                    Ok(())
                };
            }
        }
    }

    fn text_block(&mut self, line: usize, col: usize) -> Result<()> {
        self.advance_bytes(3);
        loop {
            if self.rest().starts_with("\"\"\"") {
                self.advance_bytes(3);
                return Ok(());
            }
            match self.bump() {
                Some('\\') => {
                    self.bump();
                }
                Some(_) => {}
                None => {
                    return if self.strict {
                        Err(self.unterminated("text block", line, col))
                    } else {
                        Ok(())
                    };
                }
            }
        }
    }

    fn quoted(&mut self, quote: char, line: usize, col: usize) -> Result<()> {
        let what = if quote == '"' { "string literal" } else { "char literal" };
        self.bump();
        loop {
            match self.peek() {
                Some(c) if c == quote => {
                    self.bump();
                    return Ok(());
                }
                Some('\\') => {
                    self.bump();
                    if matches!(self.peek(), Some('\n') | Some('\r') | None) {
                        continue;
                    }
                    self.bump();
                }
                Some('\n') | Some('\r') | None => {
                    return if self.strict {
                        Err(self.unterminated(what, line, col))
                    } else {
                        Ok(())
                    };
                }
                Some(_) => {
                    self.bump();
                }
            }
        }
    }

    fn number(&mut self) {
        let rest = self.rest();
        if rest.starts_with("0x") || rest.starts_with("0X") || rest.starts_with("0b") || rest.starts_with("0B") {
            self.advance_bytes(2);
            self.take_while(|c| c.is_ascii_hexdigit() || c == '_' || c == '.' || c == 'p' || c == 'P');
            self.take_while(|c| matches!(c, 'l' | 'L'));
            return;
        }
        let mut prev = '\0';
        while let Some(c) = self.peek() {
            let accept = c.is_ascii_digit()
                || c == '_'
                || (c == '.' && self.peek_at(1).is_none_or(|d| d != '.'))
                || matches!(c, 'e' | 'E')
                || (matches!(c, '+' | '-') && matches!(prev, 'e' | 'E'));
            if !accept {
                break;
            }
            prev = c;
            self.bump();
        }
        if let Some(c) = self.peek() {
            if matches!(c, 'l' | 'L' | 'f' | 'F' | 'd' | 'D') {
                self.bump();
            }
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_part(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}
