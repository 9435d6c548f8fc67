//! Word-level vocabulary over Java lexemes.
//!
//! Lexemes are the non-trivia tokens of a method, with literals folded into
//! placeholders: strings become `<STR>`, chars `<CHR>` and numbers `<NUM>`.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::lexer::{lex_java_lenient, JavaToken, TokenKind};
use crate::corpus::{Dataset, MethodSample};
use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const CLS: u32 = 2;
pub const SEP: u32 = 3;
pub const MASK: u32 = 4;
pub const N_SPECIALS: usize = 5;
pub const SPECIAL_TOKENS: [&str; N_SPECIALS] = ["<PAD>", "<UNK>", "<CLS>", "<SEP>", "<MASK>"];

pub const STR_PLACEHOLDER: &str = "<STR>";
pub const CHR_PLACEHOLDER: &str = "<CHR>";
pub const NUM_PLACEHOLDER: &str = "<NUM>";

pub const DEFAULT_MAX_LEN: usize = 256;

/// Maps a significant token to its lexeme.
pub fn lexeme_of(token: &JavaToken) -> &str {
    if token.kind == TokenKind::Literal {
        let first = token.text.chars().next().unwrap_or(' ');
        if first == '"' {
            return STR_PLACEHOLDER;
        }
        if first == '\'' {
            return CHR_PLACEHOLDER;
        }
        if first.is_ascii_digit() || first == '.' {
            return NUM_PLACEHOLDER;
        }
    }
    &token.text
}

/// The significant tokens of `source` (lexed leniently) paired with their lexemes.
pub fn significant_tokens(source: &str) -> Vec<JavaToken> {
    lex_java_lenient(source)
        .into_iter()
        .filter(|t| !t.kind.is_trivia())
        .collect()
}

pub fn lexemes(source: &str) -> Vec<String> {
    significant_tokens(source)
        .iter()
        .map(|t| lexeme_of(t).to_string())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "VocabularyRepr", try_from = "VocabularyRepr")]
pub struct Vocabulary {
    tokens: Vec<String>,
    id_of: HashMap<String, u32>,
    min_freq: usize,
    corpus_hash: String,
}

/// Serialized form; `tokens` excludes the specials.
#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    tokens: Vec<String>,
    min_freq: usize,
    corpus_hash: String,
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        Self {
            tokens: v.tokens[N_SPECIALS..].to_vec(),
            min_freq: v.min_freq,
            corpus_hash: v.corpus_hash,
        }
    }
}

impl TryFrom<VocabularyRepr> for Vocabulary {
    type Error = Error;

    fn try_from(r: VocabularyRepr) -> Result<Self> {
        Vocabulary::from_tokens(r.tokens, r.min_freq, r.corpus_hash)
    }
}

impl Vocabulary {
    /// Builds from explicit tokens (specials are prepended).
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>, min_freq: usize, corpus_hash: String) -> Result<Self> {
        let mut all: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        all.extend(tokens);
        let mut id_of = HashMap::with_capacity(all.len());
        for (i, t) in all.iter().enumerate() {
            if id_of.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary token `{t}`")));
            }
        }
        Ok(Self {
            tokens: all,
            id_of,
            min_freq,
            corpus_hash,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_freq(&self) -> usize {
        self.min_freq
    }

    pub fn corpus_hash(&self) -> &str {
        &self.corpus_hash
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.id_of.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn is_special(id: u32) -> bool {
        (id as usize) < N_SPECIALS
    }

    /// Writes the vocabulary file: a `#` header line, then one token per line in id order.
    pub fn write(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "# min_freq={} corpus={}", self.min_freq, self.corpus_hash)?;
        for t in &self.tokens {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty vocabulary file".into()))??;
        let header = header
            .strip_prefix("# ")
            .ok_or_else(|| Error::Format("vocabulary header must start with `# `".into()))?;
        let mut min_freq = None;
        let mut corpus_hash = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("min_freq", v)) => {
                    min_freq = Some(v.parse().map_err(|_| Error::Format(format!("bad min_freq `{v}`")))?)
                }
                Some(("corpus", v)) => corpus_hash = Some(v.to_string()),
                _ => {}
            }
        }
        let tokens: Vec<String> = lines.collect::<std::io::Result<_>>()?;
        if tokens.len() < N_SPECIALS || tokens[..N_SPECIALS] != SPECIAL_TOKENS {
            return Err(Error::Format("vocabulary must start with the five special tokens".into()));
        }
        Vocabulary::from_tokens(
            tokens.into_iter().skip(N_SPECIALS),
            min_freq.ok_or_else(|| Error::Format("missing min_freq".into()))?,
            corpus_hash.ok_or_else(|| Error::Format("missing corpus hash".into()))?,
        )
    }
}

/// Ranks lexemes of the corpus by frequency (ties lexicographic), keeps
/// those seen at least `min_freq` times, and truncates to `max_size`
/// entries including the five specials.
pub fn build_vocab(corpus: &Dataset, min_freq: usize, max_size: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("cannot build a vocabulary from an empty corpus".into()));
    }
    let mut freq: HashMap<String, usize> = HashMap::new();
    for s in &corpus.samples {
        for lx in lexemes(&s.source) {
            *freq.entry(lx).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = freq
        .into_iter()
        .filter(|(t, n)| *n >= min_freq && !SPECIAL_TOKENS.contains(&t.as_str()))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_size.saturating_sub(N_SPECIALS));
    Vocabulary::from_tokens(ranked.into_iter().map(|(t, _)| t), min_freq, corpus.content_hash())
}

/// A fixed-length id sequence: `CLS lexemes... SEP PAD...`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedSequence {
    pub ids: Vec<u32>,
    pub attention_mask: Vec<u8>,
    pub n_real: usize,
}

impl EncodedSequence {
    pub fn max_len(&self) -> usize {
        self.ids.len()
    }

    /// Builds a sequence from raw ids between CLS and SEP.
    pub fn from_body(body: &[u32], max_len: usize) -> Self {
        let keep = body.len().min(max_len.saturating_sub(2));
        let mut ids = Vec::with_capacity(max_len);
        ids.push(CLS);
        ids.extend_from_slice(&body[..keep]);
        ids.push(SEP);
        let n_real = ids.len();
        ids.resize(max_len, PAD);
        let attention_mask = (0..max_len).map(|i| u8::from(i < n_real)).collect();
        Self {
            ids,
            attention_mask,
            n_real,
        }
    }

    /// Positions holding lexemes (between CLS and SEP).
    pub fn body_range(&self) -> std::ops::Range<usize> {
        1..self.n_real.saturating_sub(1)
    }
}

/// Encodes a method: CLS, lexeme ids (UNK when out of vocabulary) truncated
/// from the tail to `max_len - 2`, SEP, then PAD.
pub fn encode(sample: &MethodSample, vocab: &Vocabulary, max_len: usize) -> Result<EncodedSequence> {
    encode_source(&sample.source, vocab, max_len)
}

pub fn encode_source(source: &str, vocab: &Vocabulary, max_len: usize) -> Result<EncodedSequence> {
    if max_len < 3 {
        return Err(Error::InvalidArgument(format!("max_len must be at least 3, got {max_len}")));
    }
    let body: Vec<u32> = lexemes(source)
        .iter()
        .map(|lx| vocab.id(lx).unwrap_or(UNK))
        .collect();
    Ok(EncodedSequence::from_body(&body, max_len))
}

/// Maps ids back to token strings, dropping PAD, CLS and SEP.
pub fn decode(ids: &[u32], vocab: &Vocabulary) -> Result<Vec<String>> {
    ids.iter()
        .filter(|&&id| !matches!(id, PAD | CLS | SEP))
        .map(|&id| {
            vocab
                .token(id)
                .map(str::to_string)
                .ok_or_else(|| Error::InvalidArgument(format!("token id {id} out of range for vocabulary of {}", vocab.len())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, Split};

    fn sample(src: &str) -> MethodSample {
        MethodSample::new(src.to_string(), "f".into(), Some(Label::Good), Split::Train)
    }

    fn corpus(sources: &[&str]) -> Dataset {
        Dataset::new(sources.iter().map(|s| sample(s)).collect()).unwrap()
    }

    #[test]
    fn literals_become_placeholders() {
        assert_eq!(
            lexemes(r#"s = "x" + 'c' + 1.5 + true; // note"#),
            vec!["s", "=", "<STR>", "+", "<CHR>", "+", "<NUM>", "+", "true", ";"]
        );
    }

    #[test]
    fn min_freq_cutoff_leaves_specials_only() {
        let v = build_vocab(&corpus(&["a b c"]), 2, 100).unwrap();
        assert_eq!(v.len(), N_SPECIALS);
        assert_eq!(v.tokens(), SPECIAL_TOKENS);
    }

    #[test]
    fn frequency_ranking_with_lexicographic_ties() {
        // ";" x10, "int" x5, "x" x5
        let src = "int x ; ; int x ; ; int x ; ; int x ; ; int x ; ;";
        let v = build_vocab(&corpus(&[src]), 1, 7).unwrap();
        assert_eq!(v.len(), 7);
        assert_eq!(v.id(";"), Some(5));
        assert_eq!(v.id("int"), Some(6));
        assert_eq!(v.id("x"), None);
    }

    #[test]
    fn build_is_deterministic() {
        let c = corpus(&["int a = b;", "void f() { g(a); }", "return a + b;"]);
        let a = build_vocab(&c, 1, 100).unwrap();
        let b = build_vocab(&c, 1, 100).unwrap();
        assert_eq!(a, b);
        let (mut fa, mut fb) = (Vec::new(), Vec::new());
        a.write(&mut fa).unwrap();
        b.write(&mut fb).unwrap();
        assert_eq!(fa, fb);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(build_vocab(&Dataset::default(), 1, 10).is_err());
    }

    #[test]
    fn vocab_file_round_trip() {
        let v = build_vocab(&corpus(&["int a = b;", "int c = a;"]), 1, 100).unwrap();
        let mut buf = Vec::new();
        v.write(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# min_freq=1 corpus="));
        assert_eq!(&lines[1..6], &SPECIAL_TOKENS);
        assert_eq!(Vocabulary::read(&buf[..]).unwrap(), v);
    }

    #[test]
    fn encode_empty_method() {
        let v = build_vocab(&corpus(&["x"]), 1, 10).unwrap();
        let e = encode(&sample(""), &v, 4).unwrap();
        assert_eq!(e.ids, vec![CLS, SEP, PAD, PAD]);
        assert_eq!(e.attention_mask, vec![1, 1, 0, 0]);
        assert_eq!(e.n_real, 2);
    }

    #[test]
    fn unknown_lexemes_map_to_unk() {
        let v = build_vocab(&corpus(&["x"]), 1, 10).unwrap();
        let e = encode(&sample("foo bar baz"), &v, 8).unwrap();
        assert_eq!(&e.ids[1..4], &[UNK, UNK, UNK]);
    }

    #[test]
    fn head_truncation_keeps_the_signature() {
        let v = build_vocab(&corpus(&["void f ( ) { a ; }"]), 1, 100).unwrap();
        let e = encode(&sample("void f ( ) { a ; }"), &v, 5).unwrap();
        assert_eq!(decode(&e.ids, &v).unwrap(), vec!["void", "f", "("]);
        assert_eq!(e.ids[4], SEP);
    }

    #[test]
    fn decode_cases() {
        let v = build_vocab(&corpus(&["a b"]), 1, 10).unwrap();
        assert!(decode(&[CLS, SEP], &v).unwrap().is_empty());
        assert_eq!(decode(&[CLS, 5, SEP, PAD], &v).unwrap(), vec![v.token(5).unwrap()]);
        assert!(decode(&[CLS, 99], &v).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        const WORDS: &[&str] = &["int", "x", "y", "=", ";", "(", ")", "{", "}", "return", "foo", "+"];

        proptest! {
            #[test]
            fn encode_decode_round_trip(idx in proptest::collection::vec(0usize..WORDS.len(), 0..30), extra in 2usize..10) {
                let src: Vec<&str> = idx.iter().map(|&i| WORDS[i]).collect();
                let src = src.join(" ");
                let v = build_vocab(&corpus(&[&WORDS.join(" ")]), 1, 100).unwrap();
                let max_len = (idx.len() + extra).max(3);
                let e = encode(&sample(&src), &v, max_len).unwrap();
                prop_assert_eq!(decode(&e.ids, &v).unwrap(), lexemes(&src));
                prop_assert_eq!(e.attention_mask.iter().map(|&m| m as usize).sum::<usize>(), e.n_real);
                prop_assert_eq!(e.ids[0], CLS);
                prop_assert_eq!(e.ids[e.n_real - 1], SEP);
                prop_assert!(e.ids[e.n_real..].iter().all(|&i| i == PAD));
            }
        }
    }
}
