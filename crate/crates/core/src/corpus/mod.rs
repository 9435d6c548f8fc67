//! Java source ingestion: lexing, method extraction, labeled datasets and
//! synthetic corpora.

pub mod dataset;
pub mod extract;
pub mod lexer;
pub mod signals;
pub mod synth;

use std::fs;
use std::path::Path;

pub use dataset::{method_id, read_scores, split_dataset, Dataset, Label, MethodSample, ScoreRecord, Split, SplitRatios};
pub use extract::extract_methods;
pub use lexer::{lex_java, lex_java_lenient, JavaToken, TokenKind};
pub use signals::DefectProfile;
pub use synth::{synthesize_corpus, synthesize_unlabeled, CorpusKind};

use crate::error::{Error, Result};

/// Extracts the methods of every `.java` file under `dir`, visiting files in
/// sorted path order. Duplicate methods keep their first occurrence.
pub fn extract_dir(dir: &Path) -> Result<Dataset> {
    let mut files = Vec::new();
    collect_java_files(dir, &mut files)?;
    files.sort();
    let mut samples = Vec::new();
    for file in files {
        let source = fs::read_to_string(&file)?;
        let tokens = lex_java(&source).map_err(|e| Error::Data(format!("{}: {e}", file.display())))?;
        let methods = extract_methods(&tokens).map_err(|e| Error::Data(format!("{}: {e}", file.display())))?;
        samples.extend(methods);
    }
    Ok(Dataset::dedup(samples))
}

fn collect_java_files(dir: &Path, out: &mut Vec<std::path::PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_java_files(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "java") {
            out.push(path);
        }
    }
    Ok(())
}
