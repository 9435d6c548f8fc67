use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use codeqa_core::attribution::render_report;
use codeqa_core::baseline::{fit_baseline, ForestModel, ForestParams};
use codeqa_core::corpus::{
    extract_dir, extract_methods, lex_java, read_scores, split_dataset, synthesize_corpus, synthesize_unlabeled,
    CorpusKind,
};
use codeqa_core::encoder::Checkpoint;
use codeqa_core::evaluation::{comparison_table, compute_report, export_curves, read_predictions, write_predictions, EvalReport, ScoredPrediction};
use codeqa_core::pipeline::{
    explain, read_dataset, reproduce, score_encoder, scored_predictions, write_dataset, write_json, write_log,
    OutputDirs, OutputLock, PipelineConfig, BASELINE_NAME,
};
use codeqa_core::seed::SeedStream;
use codeqa_core::tokenizer::{build_vocab, Vocabulary};
use codeqa_core::training::{finetune, pretrain, CorpusRole, PretrainCorpus};
use codeqa_core::{Dataset, Error, Result, Split};

use crate::{BaselineAction, Cli, Command};

const DEFAULT_OUT: &str = "out";

fn config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if let Some(c) = &cli.common.config {
        cfg.apply_file(c)?;
    }
    for o in &cli.common.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("override `{o}` is not KEY=VALUE")))?;
        cfg.set(k, v)?;
    }
    if let Some(s) = cli.common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} {} does not exist", path.display())))
    }
}

/// A `.jsonl` output is a file; anything else is a directory whose `data/` gets `default_name`.
fn jsonl_target(out: &Path, default_name: &str) -> Result<(PathBuf, OutputLock)> {
    if out.extension().is_some_and(|e| e == "jsonl") {
        let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let lock = OutputLock::acquire(dir)?;
        Ok((out.to_path_buf(), lock))
    } else {
        let lock = OutputLock::acquire(out)?;
        let dirs = OutputDirs::create(out)?;
        Ok((dirs.data.join(default_name), lock))
    }
}

fn load_vocab(path: &Path) -> Result<Vocabulary> {
    require(path, "vocabulary")?;
    Vocabulary::read(BufReader::new(File::open(path)?))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    require(path, "checkpoint")?;
    Checkpoint::load(path)
}

fn load_data(path: &Path) -> Result<Dataset> {
    require(path, "dataset")?;
    read_dataset(path)
}

fn write_preds(preds: &[ScoredPrediction], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_predictions(preds, &mut w)?;
    w.flush()?;
    Ok(())
}

fn split_of(data: &Dataset, split: Split) -> Result<Dataset> {
    let d = data.subset(split);
    if d.is_empty() {
        return Err(Error::Data(format!("dataset has no `{split}` samples")));
    }
    Ok(d)
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = config(&cli)?;
    let out = cli.common.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    match cli.command {
        Command::Extract {
            input,
            labels,
            label_threshold,
        } => {
            require(&input, "input directory")?;
            let mut data = extract_dir(&input)?;
            if let Some(l) = labels {
                require(&l, "label file")?;
                let scores = read_scores(BufReader::new(File::open(&l)?))?;
                data.apply_scores(&scores, label_threshold.unwrap_or(cfg.label_threshold));
            }
            let (target, _lock) = jsonl_target(&out, "methods.jsonl")?;
            write_dataset(&data, &target)?;
            println!("extracted {} methods to {}", data.len(), target.display());
        }
        Command::Synth {
            n,
            kind,
            bad_fraction,
            no_split,
        } => {
            let root = SeedStream::new(cfg.seed);
            let data = match kind {
                CorpusKind::Task => {
                    let d = synthesize_corpus(n, bad_fraction.unwrap_or(cfg.bad_fraction), root.derive("synth-task").root())?;
                    if no_split {
                        d
                    } else {
                        split_dataset(&d, cfg.ratios()?, root.derive("split").root())?
                    }
                }
                CorpusKind::Domain => synthesize_unlabeled(kind, n, root.derive("synth-domain").root()),
                CorpusKind::Generic => synthesize_unlabeled(kind, n, root.derive("synth-generic").root()),
            };
            let name = match kind {
                CorpusKind::Task => "task.jsonl",
                CorpusKind::Domain => "domain.jsonl",
                CorpusKind::Generic => "generic.jsonl",
            };
            let (target, _lock) = jsonl_target(&out, name)?;
            write_dataset(&data, &target)?;
            println!("wrote {} samples to {}", data.len(), target.display());
        }
        Command::Vocab { data, min_freq, max_size } => {
            let mut samples = Vec::new();
            for p in &data {
                // held-out splits never contribute tokens
                samples.extend(
                    load_data(p)?
                        .samples
                        .into_iter()
                        .filter(|s| matches!(s.split, Split::Train | Split::Unlabeled)),
                );
            }
            let vocab = build_vocab(&Dataset::dedup(samples), min_freq.unwrap_or(cfg.min_freq), max_size.unwrap_or(cfg.max_vocab))?;
            let _lock = OutputLock::acquire(&out)?;
            let dirs = OutputDirs::create(&out)?;
            let path = dirs.data.join("vocab.txt");
            vocab.write(BufWriter::new(File::create(&path)?))?;
            println!("vocabulary of {} tokens written to {}", vocab.len(), path.display());
        }
        Command::Pretrain {
            scheme,
            vocab,
            generic,
            domain,
            task,
        } => {
            let vocab = load_vocab(&vocab)?;
            let max_len = cfg.max_len;
            let mut corpora = Vec::new();
            for role in scheme.stages() {
                let path = match role {
                    CorpusRole::Generic => &generic,
                    CorpusRole::Domain => &domain,
                    CorpusRole::Task => &task,
                };
                let path = path
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument(format!("scheme {scheme} needs --{}", role.name())))?;
                let data = load_data(path)?;
                corpora.push(PretrainCorpus {
                    role: *role,
                    sequences: data
                        .samples
                        .iter()
                        .map(|s| codeqa_core::tokenizer::encode(s, &vocab, max_len))
                        .collect::<Result<_>>()?,
                    hash: data.content_hash(),
                });
            }
            let _lock = OutputLock::acquire(&out)?;
            let dirs = OutputDirs::create(&out)?;
            let (ck, log) = pretrain(scheme, &cfg.model_config(vocab.len()), &cfg.pretrain_config(), &vocab, &corpora)?;
            let path = dirs.ckpt.join(format!("{scheme}-pretrained.ckpt"));
            ck.save(&path)?;
            write_log(&log, &dirs.reports.join(format!("{scheme}-pretrain-log.csv")))?;
            println!("{scheme}: {} steps, checkpoint {}", log.rows.len(), path.display());
        }
        Command::Finetune { checkpoint, data } => {
            let ck = load_checkpoint(&checkpoint)?;
            let data = load_data(&data)?;
            let train = split_of(&data, Split::Train)?;
            let val = data.subset(Split::Val);
            let _lock = OutputLock::acquire(&out)?;
            let dirs = OutputDirs::create(&out)?;
            let outcome = finetune(&ck, &train, &val, &cfg.finetune_config())?;
            let scheme = ck.header.provenance["scheme"].as_str().unwrap_or("encoder").to_string();
            let path = dirs.ckpt.join(format!("{scheme}-finetuned.ckpt"));
            outcome.checkpoint.save(&path)?;
            write_log(&outcome.log, &dirs.reports.join(format!("{scheme}-finetune-log.csv")))?;
            for r in &outcome.epochs {
                match r.val_accuracy {
                    Some(a) => println!("epoch {}: train loss {:.4}, val accuracy {:.3}", r.epoch, r.train_loss, a),
                    None => println!("epoch {}: train loss {:.4}", r.epoch, r.train_loss),
                }
            }
            println!("kept epoch {}, checkpoint {}", outcome.best_epoch, path.display());
        }
        Command::Baseline { action } => match action {
            BaselineAction::Train { data, vocab, trees } => {
                let data = load_data(&data)?;
                let train = split_of(&data, Split::Train)?;
                let vocab = match vocab {
                    Some(v) => load_vocab(&v)?,
                    None => build_vocab(&train, cfg.min_freq, cfg.max_vocab)?,
                };
                let params = ForestParams::new(trees.unwrap_or(cfg.n_trees), SeedStream::new(cfg.seed).derive("bootstrap").root());
                let _lock = OutputLock::acquire(&out)?;
                let dirs = OutputDirs::create(&out)?;
                let model = fit_baseline(&train, &vocab, &params)?;
                let path = dirs.ckpt.join(format!("{BASELINE_NAME}.json"));
                model.save(&path)?;
                match model.forest.oob_accuracy {
                    Some(a) => println!("{} trees, out-of-bag accuracy {a:.3}, model {}", model.forest.trees.len(), path.display()),
                    None => println!("{} trees, model {}", model.forest.trees.len(), path.display()),
                }
            }
            BaselineAction::Predict { model, data, split } => {
                require(&model, "forest model")?;
                let model = ForestModel::load(&model)?;
                let data = split_of(&load_data(&data)?, split)?;
                let scores: Vec<f64> = data.samples.iter().map(|s| model.predict_proba(&s.source)).collect();
                let preds = scored_predictions(&data, &scores)?;
                let _lock = OutputLock::acquire(&out)?;
                let dirs = OutputDirs::create(&out)?;
                let path = dirs.reports.join(format!("{BASELINE_NAME}-predictions.jsonl"));
                write_preds(&preds, &path)?;
                println!("{} predictions written to {}", preds.len(), path.display());
            }
        },
        Command::Predict {
            checkpoint,
            data,
            split,
            name,
        } => {
            let ck = load_checkpoint(&checkpoint)?;
            let data = split_of(&load_data(&data)?, split)?;
            let scores = score_encoder(&ck, &data)?;
            let preds = scored_predictions(&data, &scores)?;
            let _lock = OutputLock::acquire(&out)?;
            let dirs = OutputDirs::create(&out)?;
            let path = dirs.reports.join(format!("{name}-predictions.jsonl"));
            write_preds(&preds, &path)?;
            println!("{} predictions written to {}", preds.len(), path.display());
        }
        Command::Evaluate { predictions, positive } => {
            let positive = positive.unwrap_or(cfg.positive);
            let mut rows: Vec<(String, EvalReport)> = Vec::new();
            for p in &predictions {
                require(p, "predictions file")?;
                let preds = read_predictions(BufReader::new(File::open(p)?))?;
                let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let name = stem.strip_suffix("-predictions").unwrap_or(&stem).to_string();
                rows.push((name, compute_report(&preds, positive)?));
            }
            let _lock = OutputLock::acquire(&out)?;
            let dirs = OutputDirs::create(&out)?;
            for (name, report) in &rows {
                write_json(report, &dirs.reports.join(format!("{name}-report.json")))?;
                export_curves(report, &dirs.reports, name)?;
            }
            let table = comparison_table(&rows);
            fs::write(dirs.reports.join("comparison.md"), &table)?;
            print!("{table}");
        }
        Command::Explain {
            checkpoint,
            data,
            id,
            source,
            target,
            permutations,
            max_span,
        } => {
            let ck = load_checkpoint(&checkpoint)?;
            let (sample_id, text) = match (data, source) {
                (Some(d), None) => {
                    let d = load_data(&d)?;
                    let id = id.expect("clap requires --id with --data");
                    let s = d.get(&id).ok_or_else(|| Error::Data(format!("no sample with id {id}")))?;
                    (s.id.clone(), s.source.clone())
                }
                (None, Some(f)) => {
                    require(&f, "source file")?;
                    let text = fs::read_to_string(&f)?;
                    let methods = extract_methods(&lex_java(&text)?)?;
                    match methods.as_slice() {
                        [m] => (m.id.clone(), m.source.clone()),
                        _ => {
                            return Err(Error::Data(format!(
                                "{} holds {} methods; explain needs exactly one",
                                f.display(),
                                methods.len()
                            )))
                        }
                    }
                }
                _ => return Err(Error::InvalidArgument("pass either --data with --id, or --source".into())),
            };
            let (attribution, lexemes) = explain(
                &ck,
                &sample_id,
                &text,
                target,
                max_span.unwrap_or(cfg.max_span),
                permutations.unwrap_or(cfg.permutations),
                cfg.seed,
            )?;
            let _lock = OutputLock::acquire(&out)?;
            let dirs = OutputDirs::create(&out)?;
            let spans: Vec<String> = attribution.spans.iter().map(|&(a, b)| lexemes[a..b].join(" ")).collect();
            write_json(
                &serde_json::json!({"attribution": attribution, "span_text": spans, "seed": cfg.seed}),
                &dirs.reports.join(format!("explain-{sample_id}.json")),
            )?;
            print!("{}", render_report(&attribution, &lexemes));
        }
        Command::Reproduce {
            synthetic,
            task_data,
            labels,
            label_threshold,
            schemes,
        } => {
            let mut cfg = cfg;
            if let Some(n) = synthetic {
                cfg.synthetic = n;
            }
            if task_data.is_some() {
                cfg.task_data = task_data;
            }
            if labels.is_some() {
                cfg.labels = labels;
            }
            if let Some(t) = label_threshold {
                cfg.label_threshold = t;
            }
            if let Some(s) = schemes {
                cfg.set("schemes", &s)?;
            }
            cfg.validate()?;
            let _lock = OutputLock::acquire(&out)?;
            let summary = reproduce(&cfg, &out, &mut |m| eprintln!("{m}"))?;
            let rows: Vec<(String, EvalReport)> = summary.variants.iter().map(|v| (v.variant.clone(), v.report.clone())).collect();
            print!("{}", comparison_table(&rows));
        }
    }
    Ok(())
}
