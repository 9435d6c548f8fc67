//! Lexical method extraction.
//!
//! A method is an identifier, optionally followed by a balanced `<...>`,
//! then a balanced parameter list, an optional `throws` clause and a `{`,
//! seen at class-member depth. Member depth means directly inside a
//! class/interface/enum/record body, or at the top level of the input so
//! that a bare method snippet re-extracts to itself. Method bodies are
//! skipped wholesale, which keeps local and anonymous-class methods inside
//! their enclosing method.

use crate::corpus::dataset::{MethodSample, Split};
use crate::corpus::lexer::{JavaToken, TokenKind};
use crate::error::{Error, Result};

struct Cursor<'a> {
    tokens: &'a [JavaToken],
    /// Indices of the non-trivia tokens.
    sig: Vec<usize>,
    /// For each `{` in `sig`, the `sig` index of its matching `}`.
    closing: Vec<Option<usize>>,
}

impl<'a> Cursor<'a> {
    fn new(tokens: &'a [JavaToken]) -> Result<Self> {
        let sig: Vec<usize> = tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.kind.is_trivia())
            .map(|(i, _)| i)
            .collect();
        let mut closing = vec![None; sig.len()];
        let mut open = Vec::new();
        for (s, &ti) in sig.iter().enumerate() {
            let tok = &tokens[ti];
            if tok.kind != TokenKind::Separator {
                continue;
            }
            match tok.text.as_str() {
                "{" => open.push(s),
                "}" => match open.pop() {
                    Some(o) => closing[o] = Some(s),
                    None => {
                        return Err(Error::UnbalancedBraces {
                            line: tok.line,
                            col: tok.col,
                        })
                    }
                },
                _ => {}
            }
        }
        if let Some(&o) = open.last() {
            let tok = &tokens[sig[o]];
            return Err(Error::UnbalancedBraces {
                line: tok.line,
                col: tok.col,
            });
        }
        Ok(Self { tokens, sig, closing })
    }

    fn tok(&self, s: usize) -> &JavaToken {
        &self.tokens[self.sig[s]]
    }

    fn text(&self, s: usize) -> &str {
        self.sig
            .get(s)
            .map(|&i| self.tokens[i].text.as_str())
            .unwrap_or("")
    }

    fn is_sep(&self, s: usize, text: &str) -> bool {
        s < self.sig.len() && self.tok(s).kind == TokenKind::Separator && self.tok(s).text == text
    }

    /// Skips a balanced `<...>` starting at `s`; returns the index after it.
    fn skip_angles(&self, s: usize) -> Option<usize> {
        let mut depth: i32 = 0;
        let mut i = s;
        while i < self.sig.len() {
            let t = self.tok(i);
            match t.text.as_str() {
                "<" => depth += 1,
                ">" => depth -= 1,
                ">>" => depth -= 2,
                ">>>" => depth -= 3,
                "," | "." | "?" | "&" | "[" | "]" | "@" => {}
                "extends" | "super" => {}
                _ if matches!(t.kind, TokenKind::Identifier | TokenKind::Keyword) => {}
                _ => return None,
            }
            i += 1;
            if depth <= 0 {
                return (depth == 0).then_some(i);
            }
        }
        None
    }

    /// Given `s` at `(`, returns the index of the matching `)`.
    fn match_paren(&self, s: usize) -> Option<usize> {
        let mut depth = 0usize;
        for i in s..self.sig.len() {
            let t = self.tok(i);
            if t.kind != TokenKind::Separator {
                continue;
            }
            match t.text.as_str() {
                "(" => depth += 1,
                ")" => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(i);
                    }
                }
                "{" | "}" | ";" => return None,
                _ => {}
            }
        }
        None
    }

    /// If a method declaration's name is at `s`, returns the `sig` index of
    /// its body's opening brace.
    fn method_body_at(&self, s: usize) -> Option<usize> {
        let prev = if s == 0 { "" } else { self.text(s - 1) };
        if matches!(prev, "@" | "new" | ".") {
            return None;
        }
        let mut j = s + 1;
        if self.text(j) == "<" {
            j = self.skip_angles(j)?;
        }
        if !self.is_sep(j, "(") {
            return None;
        }
        let mut k = self.match_paren(j)? + 1;
        if self.text(k) == "throws" {
            while k < self.sig.len() && !self.is_sep(k, "{") && !self.is_sep(k, ";") {
                k += 1;
            }
        }
        self.is_sep(k, "{").then_some(k)
    }

    fn sample(&self, start: usize, end: usize, name_at: usize) -> MethodSample {
        let source: String = self.tokens[self.sig[start]..=self.sig[end]]
            .iter()
            .map(|t| t.text.as_str())
            .collect();
        MethodSample::new(source, self.text(name_at).to_string(), None, Split::Unlabeled)
    }

    fn scan_members(&self, start: usize, end: usize, in_enum: bool, out: &mut Vec<MethodSample>) {
        let mut i = start;
        let mut member_start = start;
        let mut pending_type: Option<bool> = None;
        // Enum constants precede the first `;` of an enum body and may carry
        // argument lists and class bodies that look like methods.
        let mut in_constants = in_enum;
        while i < end {
            let tok = self.tok(i);
            match (tok.kind, tok.text.as_str()) {
                (TokenKind::Separator, ";") => {
                    in_constants = false;
                    pending_type = None;
                    i += 1;
                    member_start = i;
                }
                (TokenKind::Separator, "{") => {
                    let close = self.closing[i].expect("braces were matched up front");
                    if let Some(is_enum) = pending_type.take() {
                        self.scan_members(i + 1, close, is_enum, out);
                    }
                    i = close + 1;
                    member_start = i;
                }
                (TokenKind::Separator, "}") => {
                    i += 1;
                    member_start = i;
                }
                (TokenKind::Keyword, kw @ ("class" | "interface" | "enum")) if self.text(i.wrapping_sub(1)) != "." => {
                    pending_type = Some(kw == "enum");
                    i += 1;
                }
                (TokenKind::Identifier, "record")
                    if self.sig.get(i + 1).is_some_and(|&t| self.tokens[t].kind == TokenKind::Identifier) =>
                {
                    pending_type = Some(false);
                    i += 1;
                }
                (TokenKind::Identifier, _) if pending_type.is_none() && !in_constants => {
                    if let Some(open) = self.method_body_at(i) {
                        let close = self.closing[open].expect("braces were matched up front");
                        out.push(self.sample(member_start, close, i));
                        i = close + 1;
                        member_start = i;
                    } else {
                        i += 1;
                    }
                }
                _ => i += 1,
            }
        }
    }
}

/// Extracts every method declaration at class-member depth from a token
/// stream produced by [`lex_java`](crate::corpus::lexer::lex_java).
pub fn extract_methods(tokens: &[JavaToken]) -> Result<Vec<MethodSample>> {
    let cursor = Cursor::new(tokens)?;
    let mut out = Vec::new();
    cursor.scan_members(0, cursor.sig.len(), false, &mut out);
    Ok(out)
}
