//! End-to-end orchestration: data preparation, pre-training for every
//! scheme, fine-tuning, the forest baseline and the comparison reports.

pub mod config;

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use config::PipelineConfig;

use crate::attribution::{partition_spans, shapley_exact, shapley_sample, Attribution, MAX_EXACT_SPANS};
use crate::baseline::{fit_baseline, ForestParams};
use crate::corpus::{
    read_scores, split_dataset, synthesize_corpus, synthesize_unlabeled, CorpusKind, Dataset, Label, MethodSample, Split,
};
use crate::encoder::{predict_proba, Checkpoint, ModelConfig};
use crate::error::{Error, Result};
use crate::evaluation::{comparison_csv, comparison_table, compute_report, export_curves, EvalReport, ScoredPrediction};
use crate::seed::SeedStream;
use crate::tokenizer::{build_vocab, encode, encode_source, lexemes, Vocabulary};
use crate::training::{
    continue_pretraining, encode_labelled, evaluate_accuracy, finetune, init_checkpoint, pretrain, CorpusRole,
    PretrainCorpus, Scheme, TrainConfig, TrainLog,
};

pub const BASELINE_NAME: &str = "tfidf-rf";

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(out: &Path) -> Result<Self> {
        fs::create_dir_all(out)?;
        let path = out.join(".codeqa.lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(OutputLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::InvalidArgument(format!(
                "output directory {} is locked by another run (remove {} if it is stale)",
                out.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// `<out>/data`, `<out>/ckpt` and `<out>/reports`, created on demand.
#[derive(Debug, Clone)]
pub struct OutputDirs {
    pub data: PathBuf,
    pub ckpt: PathBuf,
    pub reports: PathBuf,
}

impl OutputDirs {
    pub fn create(out: &Path) -> Result<Self> {
        let dirs = OutputDirs {
            data: out.join("data"),
            ckpt: out.join("ckpt"),
            reports: out.join("reports"),
        };
        for d in [&dirs.data, &dirs.ckpt, &dirs.reports] {
            fs::create_dir_all(d)?;
        }
        Ok(dirs)
    }
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let f = File::open(path).map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    Dataset::read_jsonl(BufReader::new(f)).map_err(|e| match e {
        Error::Io(e) => Error::Data(format!("{}: {e}", path.display())),
        e => e,
    })
}

pub fn write_dataset(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    data.write_jsonl(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_json(value: &impl Serialize, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_log(log: &TrainLog, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    log.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Probability of class good for every sample under a fine-tuned encoder.
pub fn score_encoder(ck: &Checkpoint, data: &Dataset) -> Result<Vec<f64>> {
    let max_len = ck.params.config.max_len;
    let seqs = data
        .samples
        .iter()
        .map(|s| encode(s, &ck.header.vocabulary, max_len))
        .collect::<Result<Vec<_>>>()?;
    predict_proba(&ck.params, &seqs)
}

/// Pairs scores with gold labels; every sample must be labelled.
pub fn scored_predictions(data: &Dataset, scores: &[f64]) -> Result<Vec<ScoredPrediction>> {
    data.samples
        .iter()
        .zip(scores)
        .map(|(s, &p)| {
            let label = s.label.ok_or_else(|| Error::Data(format!("sample {} has no label", s.id)))?;
            Ok(ScoredPrediction::new(s.id.clone(), p, label))
        })
        .collect()
}

/// Labelled task data: loaded (with optional score sidecar) or synthesized,
/// then split unless it already carries a train/val/test assignment.
pub fn prepare_task_data(cfg: &PipelineConfig) -> Result<Dataset> {
    let root = SeedStream::new(cfg.seed);
    let data = match &cfg.task_data {
        Some(p) => {
            let mut d = read_dataset(p)?;
            if let Some(l) = &cfg.labels {
                let f = File::open(l).map_err(|e| Error::Data(format!("cannot open {}: {e}", l.display())))?;
                d.apply_scores(&read_scores(BufReader::new(f))?, cfg.label_threshold);
            }
            d.samples.retain(|s| s.label.is_some());
            d
        }
        None => synthesize_corpus(cfg.synthetic, cfg.bad_fraction, root.derive("synth-task").root())?,
    };
    let presplit = data.samples.iter().all(|s| s.split != Split::Unlabeled);
    if presplit && !data.is_empty() {
        return Ok(data);
    }
    split_dataset(&data, cfg.ratios()?, root.derive("split").root())
}

fn unlabeled_corpus(cfg: &PipelineConfig, role: CorpusRole) -> Result<Dataset> {
    let (path, kind, n) = match role {
        CorpusRole::Generic => (&cfg.generic_data, CorpusKind::Generic, cfg.n_generic),
        CorpusRole::Domain => (&cfg.domain_data, CorpusKind::Domain, cfg.n_domain),
        CorpusRole::Task => (&cfg.task_unlabeled_data, CorpusKind::Task, cfg.n_task_unlabeled),
    };
    match path {
        Some(p) => read_dataset(p),
        None => Ok(synthesize_unlabeled(
            kind,
            n,
            SeedStream::new(cfg.seed).derive(&format!("synth-{}", role.name())).root(),
        )),
    }
}

fn pretrain_corpus(role: CorpusRole, data: &Dataset, vocab: &Vocabulary, max_len: usize) -> Result<PretrainCorpus> {
    Ok(PretrainCorpus {
        role,
        sequences: data.samples.iter().map(|s| encode(s, vocab, max_len)).collect::<Result<_>>()?,
        hash: data.content_hash(),
    })
}

/// Vocabulary over the training split plus every unlabeled corpus.
pub fn pipeline_vocabulary(task: &Dataset, unlabeled: &[&Dataset], min_freq: usize, max_size: usize) -> Result<Vocabulary> {
    let mut samples: Vec<MethodSample> = task.subset(Split::Train).samples;
    for d in unlabeled {
        samples.extend(d.samples.iter().cloned());
    }
    build_vocab(&Dataset::dedup(samples), min_freq, max_size)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    pub accuracy: f64,
    /// Test accuracy of the pre-trained model with an untrained head.
    pub zero_epoch_accuracy: Option<f64>,
    pub best_epoch: Option<usize>,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceSummary {
    pub provenance: Value,
    pub variants: Vec<VariantSummary>,
}

impl ReproduceSummary {
    pub fn variant(&self, name: &str) -> Option<&VariantSummary> {
        self.variants.iter().find(|v| v.variant == name)
    }
}

/// Runs every configured scheme plus the forest baseline and writes data,
/// checkpoints, per-variant reports and a comparison table under `out`.
pub fn reproduce(cfg: &PipelineConfig, out: &Path, progress: &mut dyn FnMut(&str)) -> Result<ReproduceSummary> {
    cfg.validate()?;
    let dirs = OutputDirs::create(out)?;

    progress("preparing corpora");
    let task = prepare_task_data(cfg)?;
    let generic = unlabeled_corpus(cfg, CorpusRole::Generic)?;
    let domain = unlabeled_corpus(cfg, CorpusRole::Domain)?;
    let task_unlabeled = unlabeled_corpus(cfg, CorpusRole::Task)?;
    let (train, val, test) = (task.subset(Split::Train), task.subset(Split::Val), task.subset(Split::Test));
    if train.is_empty() || test.is_empty() {
        return Err(Error::Data("task data needs non-empty train and test splits".into()));
    }
    write_dataset(&task, &dirs.data.join("task.jsonl"))?;
    write_dataset(&generic, &dirs.data.join("generic.jsonl"))?;
    write_dataset(&domain, &dirs.data.join("domain.jsonl"))?;
    write_dataset(&task_unlabeled, &dirs.data.join("task-unlabeled.jsonl"))?;

    let vocab = pipeline_vocabulary(&task, &[&generic, &domain, &task_unlabeled], cfg.min_freq, cfg.max_vocab)?;
    vocab.write(BufWriter::new(File::create(dirs.data.join("vocab.txt"))?))?;

    let provenance = json!({
        "config": cfg.entries(),
        "seed": cfg.seed,
        "corpora": {
            "task": task.content_hash(),
            "generic": generic.content_hash(),
            "domain": domain.content_hash(),
            "task_unlabeled": task_unlabeled.content_hash(),
        },
        "vocabulary": {"size": vocab.len(), "corpus_hash": vocab.corpus_hash()},
    });
    fs::write(dirs.reports.join("config.txt"), cfg.to_text())?;

    let base_config = cfg.model_config(vocab.len());
    let pre_cfg = cfg.pretrain_config();
    let ft_cfg = cfg.finetune_config();
    let max_len = base_config.max_len;
    let corpora = [
        pretrain_corpus(CorpusRole::Generic, &generic, &vocab, max_len)?,
        pretrain_corpus(CorpusRole::Domain, &domain, &vocab, max_len)?,
        pretrain_corpus(CorpusRole::Task, &task_unlabeled, &vocab, max_len)?,
    ];
    let (test_x, test_y) = encode_labelled(&test, &vocab, max_len)?;

    let mut variants = Vec::new();

    progress("training tfidf-rf baseline");
    let forest = fit_baseline(&train, &vocab, &ForestParams::new(cfg.n_trees, SeedStream::new(cfg.seed).derive("bootstrap").root()))?;
    forest.save(&dirs.ckpt.join(format!("{BASELINE_NAME}.json")))?;
    let scores: Vec<f64> = test.samples.iter().map(|s| forest.predict_proba(&s.source)).collect();
    variants.push(write_variant(&dirs, BASELINE_NAME, &test, &scores, cfg.positive, None, None, &provenance)?);

    // The generic stage is identical for base, dapt and tapt, so it runs once.
    let mut generic_stage: Option<Checkpoint> = None;
    for &scheme in &cfg.schemes {
        progress(&format!("pre-training {scheme}"));
        let pretrained = if scheme == Scheme::TaskOnly {
            let (ck, log) = pretrain(scheme, &base_config, &pre_cfg, &vocab, &corpora)?;
            write_log(&log, &dirs.reports.join(format!("{scheme}-pretrain-log.csv")))?;
            ck
        } else {
            if generic_stage.is_none() {
                let init = init_checkpoint(&base_config, &vocab, pre_cfg.seed, Scheme::Base)?;
                let (ck, log) = continue_pretraining(&init, &corpora[0], &pre_cfg, Scheme::Base)?;
                write_log(&log, &dirs.reports.join("generic-pretrain-log.csv"))?;
                generic_stage = Some(ck);
            }
            let start = generic_stage.as_ref().expect("generic stage was just run");
            match scheme {
                Scheme::Dapt | Scheme::Tapt => {
                    let corpus = if scheme == Scheme::Dapt { &corpora[1] } else { &corpora[2] };
                    let (ck, log) = continue_pretraining(start, corpus, &pre_cfg, scheme)?;
                    write_log(&log, &dirs.reports.join(format!("{scheme}-pretrain-log.csv")))?;
                    ck
                }
                _ => start.clone(),
            }
        };
        pretrained.save(&dirs.ckpt.join(format!("{scheme}-pretrained.ckpt")))?;

        progress(&format!("fine-tuning {scheme}"));
        let zero = finetune(&pretrained, &train, &val, &TrainConfig { epochs: 0, ..ft_cfg.clone() })?;
        let zero_acc = evaluate_accuracy(&zero.checkpoint.params, &test_x, &test_y)?;
        let tuned = finetune(&pretrained, &train, &val, &ft_cfg)?;
        tuned.checkpoint.save(&dirs.ckpt.join(format!("{scheme}-finetuned.ckpt")))?;
        write_log(&tuned.log, &dirs.reports.join(format!("{scheme}-finetune-log.csv")))?;
        let scores = predict_proba(&tuned.checkpoint.params, &test_x)?;
        let mut prov = provenance.clone();
        prov["checkpoint"] = tuned.checkpoint.header.provenance.clone();
        variants.push(write_variant(
            &dirs,
            scheme.name(),
            &test,
            &scores,
            cfg.positive,
            Some(zero_acc),
            Some(tuned.best_epoch),
            &prov,
        )?);
    }

    let rows: Vec<(String, EvalReport)> = variants.iter().map(|v| (v.variant.clone(), v.report.clone())).collect();
    fs::write(dirs.reports.join("comparison.md"), comparison_table(&rows))?;
    fs::write(dirs.reports.join("comparison.csv"), comparison_csv(&rows))?;
    let summary = ReproduceSummary { provenance, variants };
    write_json(&summary, &dirs.reports.join("summary.json"))?;
    Ok(summary)
}

#[allow(clippy::too_many_arguments)]
fn write_variant(
    dirs: &OutputDirs,
    name: &str,
    test: &Dataset,
    scores: &[f64],
    positive: Label,
    zero_epoch_accuracy: Option<f64>,
    best_epoch: Option<usize>,
    provenance: &Value,
) -> Result<VariantSummary> {
    let preds = scored_predictions(test, scores)?;
    let mut w = BufWriter::new(File::create(dirs.reports.join(format!("{name}-predictions.jsonl")))?);
    crate::evaluation::write_predictions(&preds, &mut w)?;
    w.flush()?;
    let report = compute_report(&preds, positive)?;
    export_curves(&report, &dirs.reports, name)?;
    write_json(
        &json!({"variant": name, "provenance": provenance, "report": report}),
        &dirs.reports.join(format!("{name}-report.json")),
    )?;
    Ok(VariantSummary {
        variant: name.to_string(),
        accuracy: report.accuracy,
        zero_epoch_accuracy,
        best_epoch,
        report,
    })
}

/// Attribution for one method under a fine-tuned encoder: exact when the
/// method has at most twelve spans, sampled otherwise.
pub fn explain(
    ck: &Checkpoint,
    sample_id: &str,
    source: &str,
    target: Label,
    max_span: usize,
    permutations: usize,
    seed: u64,
) -> Result<(Attribution, Vec<String>)> {
    let seq = encode_source(source, &ck.header.vocabulary, ck.params.config.max_len)?;
    let mut lex = lexemes(source);
    lex.truncate(seq.body_range().len());
    let partition = partition_spans(&lex, max_span)?;
    let a = if partition.len() <= MAX_EXACT_SPANS {
        shapley_exact(&ck.params, sample_id, &seq, &partition, target)?
    } else {
        let seed = SeedStream::new(seed).derive("shapley").root();
        shapley_sample(&ck.params, sample_id, &seq, &partition, target, permutations, seed)?
    };
    Ok((a, lex))
}

/// The distribution-shifted setup used to compare task-adaptive against
/// generic-only pre-training: the generic corpus shares little vocabulary
/// with the labelled task, the task corpus matches it, and labels are scarce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedSetup {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub n_generic: usize,
    pub n_task_unlabeled: usize,
    pub model: ModelConfig,
    pub pretrain: TrainConfig,
    pub finetune: TrainConfig,
}

impl Default for ShiftedSetup {
    fn default() -> Self {
        ShiftedSetup {
            n_train: 40,
            n_val: 40,
            n_test: 200,
            n_generic: 300,
            n_task_unlabeled: 300,
            model: ModelConfig {
                n_layers: 2,
                d_model: 64,
                n_heads: 4,
                d_ff: 256,
                max_len: 256,
                vocab_size: 0,
                dropout: 0.1,
            },
            pretrain: TrainConfig {
                learning_rate: 1e-3,
                epochs: 3,
                ..TrainConfig::default()
            },
            finetune: TrainConfig {
                learning_rate: 3e-4,
                epochs: 10,
                batch_size: 8,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderingTrial {
    pub seed: u64,
    pub base_accuracy: f64,
    pub tapt_accuracy: f64,
}

/// Fine-tunes BASE and TAPT on the same few labels and reports their test accuracies.
pub fn scheme_ordering_trial(setup: &ShiftedSetup, seed: u64) -> Result<OrderingTrial> {
    let root = SeedStream::new(seed);
    let total = setup.n_train + setup.n_val + setup.n_test;
    let labelled = synthesize_corpus(total, 0.3, root.derive("synth-task").root())?;
    let frac = |n: usize| n as f64 / total as f64;
    let ratios = crate::corpus::SplitRatios::new(frac(setup.n_train), frac(setup.n_val), frac(setup.n_test))?;
    let labelled = split_dataset(&labelled, ratios, root.derive("split").root())?;
    let generic = synthesize_unlabeled(CorpusKind::Generic, setup.n_generic, root.derive("synth-generic").root());
    let task_unlabeled = synthesize_unlabeled(CorpusKind::Task, setup.n_task_unlabeled, root.derive("synth-task-unlabeled").root());
    let vocab = pipeline_vocabulary(&labelled, &[&generic, &task_unlabeled], 2, 20_000)?;
    let config = ModelConfig {
        vocab_size: vocab.len(),
        ..setup.model.clone()
    };
    let pre = TrainConfig { seed, ..setup.pretrain.clone() };
    let ft = TrainConfig { seed, ..setup.finetune.clone() };
    let max_len = config.max_len;
    let g = pretrain_corpus(CorpusRole::Generic, &generic, &vocab, max_len)?;
    let t = pretrain_corpus(CorpusRole::Task, &task_unlabeled, &vocab, max_len)?;

    let init = init_checkpoint(&config, &vocab, seed, Scheme::Base)?;
    let (base, _) = continue_pretraining(&init, &g, &pre, Scheme::Base)?;
    let (tapt, _) = continue_pretraining(&base, &t, &pre, Scheme::Tapt)?;

    let (train, val, test) = (labelled.subset(Split::Train), labelled.subset(Split::Val), labelled.subset(Split::Test));
    let (tx, ty) = encode_labelled(&test, &vocab, max_len)?;
    let acc = |ck: &Checkpoint| -> Result<f64> {
        let out = finetune(ck, &train, &val, &ft)?;
        evaluate_accuracy(&out.checkpoint.params, &tx, &ty)
    };
    Ok(OrderingTrial {
        seed,
        base_accuracy: acc(&base)?,
        tapt_accuracy: acc(&tapt)?,
    })
}

/// Accuracy of every variant keyed by name, for quick inspection.
pub fn accuracies(summary: &ReproduceSummary) -> BTreeMap<String, f64> {
    summary.variants.iter().map(|v| (v.variant.clone(), v.accuracy)).collect()
}
