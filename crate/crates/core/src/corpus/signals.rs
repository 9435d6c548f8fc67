//! Quantitative defect signals of a single method, measured from its tokens.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::lexer::{lex_java_lenient, TokenKind};

pub const DEEP_NESTING: usize = 4;
pub const MANY_PARAMETERS: usize = 6;
pub const LONG_METHOD_LINES: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectProfile {
    /// Deepest `{` nesting inside the method body (the body itself is depth 0).
    pub max_nesting: usize,
    pub parameters: usize,
    pub single_letter_identifiers: usize,
    /// Two consecutive statement lines occur again later in the method.
    pub duplicated_block: bool,
    pub lines: usize,
}

impl DefectProfile {
    pub fn measure(source: &str) -> Self {
        let tokens = lex_java_lenient(source);
        let sig: Vec<_> = tokens.iter().filter(|t| !t.kind.is_trivia()).collect();

        let mut depth = 0usize;
        let mut max_depth = 0usize;
        for t in &sig {
            if t.kind == TokenKind::Separator {
                match t.text.as_str() {
                    "{" => {
                        depth += 1;
                        max_depth = max_depth.max(depth);
                    }
                    "}" => depth = depth.saturating_sub(1),
                    _ => {}
                }
            }
        }

        let mut parameters = 0;
        if let Some(open) = sig.iter().position(|t| t.text == "(") {
            let mut nesting = 0i32;
            let mut any = false;
            let mut commas = 0;
            for t in &sig[open..] {
                match t.text.as_str() {
                    "(" | "<" => nesting += 1,
                    ")" | ">" => nesting -= 1,
                    ">>" => nesting -= 2,
                    "," if nesting == 1 => commas += 1,
                    _ if nesting >= 1 => any = true,
                    _ => {}
                }
                if nesting == 0 {
                    break;
                }
            }
            if any {
                parameters = commas + 1;
            }
        }

        let single_letter_identifiers = sig
            .iter()
            .filter(|t| t.kind == TokenKind::Identifier && t.text.chars().count() == 1)
            .count();

        let statements: Vec<&str> = source
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && l.chars().any(|c| !matches!(c, '{' | '}' | ' ')))
            .collect();
        let mut pairs = HashSet::new();
        let mut duplicated_block = false;
        // Pairs are recorded with a one-line delay so overlapping windows do not count.
        let mut pending: Option<(&str, &str)> = None;
        for w in statements.windows(2) {
            let pair = (w[0], w[1]);
            if pairs.contains(&pair) {
                duplicated_block = true;
                break;
            }
            if let Some(p) = pending.replace(pair) {
                pairs.insert(p);
            }
        }

        DefectProfile {
            max_nesting: max_depth.saturating_sub(1),
            parameters,
            single_letter_identifiers,
            duplicated_block,
            lines: source.lines().count(),
        }
    }

    /// Number of the five defect signals present.
    pub fn count(&self) -> usize {
        [
            self.max_nesting >= DEEP_NESTING,
            self.parameters >= MANY_PARAMETERS,
            self.single_letter_identifiers > 0,
            self.duplicated_block,
            self.lines >= LONG_METHOD_LINES,
        ]
        .iter()
        .filter(|&&b| b)
        .count()
    }
}
