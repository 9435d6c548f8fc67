use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, MethodSample};
use crate::error::{Error, Result};
use crate::tokenizer::{lexemes, Vocabulary};

/// Sparse feature vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|k| self.entries[k].1)
            .unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for &(i, v) in &self.entries {
            out[i as usize] = v;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub vocabulary: Vocabulary,
    /// Document frequency per vocabulary id.
    pub df: Vec<u32>,
    pub n_docs: usize,
}

impl TfidfModel {
    /// Smoothed inverse document frequency `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf(&self, id: u32) -> f64 {
        let df = self.df[id as usize] as f64;
        ((1.0 + self.n_docs as f64) / (1.0 + df)).ln() + 1.0
    }

    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    /// In-vocabulary, non-special token ids of a method, with repetition.
    fn term_ids(&self, source: &str) -> Vec<u32> {
        lexemes(source)
            .iter()
            .filter_map(|lx| self.vocabulary.id(lx))
            .filter(|&id| !Vocabulary::is_special(id))
            .collect()
    }
}

/// Document frequencies over the training documents, one document per method.
pub fn fit_tfidf(train: &Dataset, vocabulary: &Vocabulary) -> Result<TfidfModel> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("cannot fit tf-idf on an empty training set".into()));
    }
    let mut model = TfidfModel {
        vocabulary: vocabulary.clone(),
        df: vec![0; vocabulary.len()],
        n_docs: train.len(),
    };
    for s in &train.samples {
        let mut ids = model.term_ids(&s.source);
        ids.sort_unstable();
        ids.dedup();
        for id in ids {
            model.df[id as usize] += 1;
        }
    }
    Ok(model)
}

/// Raw-count tf times smoothed idf, L2-normalised; empty methods map to the zero vector.
pub fn tfidf_transform(model: &TfidfModel, sample: &MethodSample) -> SparseVector {
    transform_source(model, &sample.source)
}

pub fn transform_source(model: &TfidfModel, source: &str) -> SparseVector {
    let mut ids = model.term_ids(source);
    ids.sort_unstable();
    let mut entries: Vec<(u32, f64)> = Vec::new();
    for id in ids {
        match entries.last_mut() {
            Some((last, count)) if *last == id => *count += 1.0,
            _ => entries.push((id, 1.0)),
        }
    }
    for (id, v) in &mut entries {
        *v *= model.idf(*id);
    }
    let mut vector = SparseVector { entries };
    let norm = vector.norm();
    if norm > 0.0 {
        for (_, v) in &mut vector.entries {
            *v /= norm;
        }
    }
    vector
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, Split};
    use crate::tokenizer::build_vocab;

    fn docs(sources: &[&str]) -> Dataset {
        Dataset::new(
            sources
                .iter()
                .map(|s| MethodSample::new(s.to_string(), "f".into(), Some(Label::Good), Split::Train))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_document_df() {
        let d = docs(&["a b a c"]);
        let v = build_vocab(&d, 1, 100).unwrap();
        let m = fit_tfidf(&d, &v).unwrap();
        for t in ["a", "b", "c"] {
            assert_eq!(m.df[v.id(t).unwrap() as usize], 1);
        }
    }

    #[test]
    fn idf_smoothing_values() {
        let d = docs(&["a b", "a c", "a d"]);
        let v = build_vocab(&d, 1, 100).unwrap();
        let m = fit_tfidf(&d, &v).unwrap();
        assert_eq!(m.idf(v.id("a").unwrap()), 1.0);
        let expected = (4.0f64 / 2.0).ln() + 1.0;
        assert!((m.idf(v.id("b").unwrap()) - expected).abs() < 1e-12);
        assert!((expected - 1.6931).abs() < 1e-4);
    }

    #[test]
    fn transform_cases() {
        let d = docs(&["a b", "a c", "a d"]);
        let v = build_vocab(&d, 1, 100).unwrap();
        let m = fit_tfidf(&d, &v).unwrap();
        let empty = transform_source(&m, "");
        assert!(empty.entries.is_empty());

        let one = transform_source(&m, "b b b");
        assert_eq!(one.entries.len(), 1);
        assert!((one.norm() - 1.0).abs() < 1e-12);

        // tf(a)=1, idf(a)=1; tf(b)=2, idf(b)=ln 2 + 1
        let two = transform_source(&m, "a b b");
        let wa = 1.0;
        let wb = 2.0 * ((2.0f64).ln() + 1.0);
        let n = (wa * wa + wb * wb).sqrt();
        assert!((two.get(v.id("a").unwrap()) - wa / n).abs() < 1e-12);
        assert!((two.get(v.id("b").unwrap()) - wb / n).abs() < 1e-12);
    }

    #[test]
    fn out_of_vocabulary_tokens_are_dropped() {
        let d = docs(&["a b"]);
        let v = build_vocab(&d, 1, 100).unwrap();
        let m = fit_tfidf(&d, &v).unwrap();
        assert!(transform_source(&m, "zzz yyy").entries.is_empty());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn norm_is_zero_or_one(words in proptest::collection::vec("[a-e]", 0..20)) {
                let d = docs(&["a b c", "a d", "e e a"]);
                let v = build_vocab(&d, 1, 100).unwrap();
                let m = fit_tfidf(&d, &v).unwrap();
                let n = transform_source(&m, &words.join(" ")).norm();
                prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-9);
            }

            #[test]
            fn idf_decreases_with_df(n_docs in 1usize..100, df1 in 0u32..100, df2 in 0u32..100) {
                let (df1, df2) = (df1.min(n_docs as u32), df2.min(n_docs as u32));
                prop_assume!(df1 < df2);
                let v = Vocabulary::from_tokens(["x".to_string(), "y".to_string()], 1, String::new()).unwrap();
                let mut df = vec![0; v.len()];
                df[5] = df1;
                df[6] = df2;
                let m = TfidfModel { vocabulary: v, df, n_docs };
                prop_assert!(m.idf(5) > m.idf(6));
            }
        }
    }
}
