//! File-level operations behind the command-line tool.
//!
//! A config file is a flat TOML table. Keys prefixed with `gen_` configure
//! the synthetic generator, `output_dir` and `data_dir` locate outputs, and
//! every other key belongs to [`ExperimentConfig`]. Relative paths are
//! resolved against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{read_conll, write_conll_file, Dataset, TagSet, Vocabulary};
use crate::distant_supervision::{
    generate_synthetic, noise_profile, DsSource, GeneratorSettings, NoiseProfile,
};
use crate::engine::{run_experiment, ExperimentConfig, ExperimentData, ModelId, RunResult};
use crate::evaluation::{predict_all, span_prf, SpanMetrics};
use crate::tagger::Checkpoint;
use crate::{Error, Result};

/// Overrides `output_dir` when set.
pub const OUTPUT_DIR_ENV: &str = "DSNER_OUTPUT_DIR";

const GEN_PREFIX: &str = "gen_";

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub experiment: ExperimentConfig,
    pub generator: GeneratorSettings,
    pub output_dir: PathBuf,
    pub data_dir: PathBuf,
}

impl ConfigFile {
    /// Reads `path`, applies `key=value` overrides, then the output-directory
    /// environment override.
    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base, overrides).map_err(|e| e.in_file(path))
    }

    pub fn parse(text: &str, base: &Path, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        for o in overrides {
            let (key, value) = parse_override(o)?;
            table.insert(key, value);
        }
        let mut generator = toml::Table::new();
        let mut experiment = toml::Table::new();
        let mut output_dir = PathBuf::from("runs/default");
        let mut data_dir = PathBuf::from("data");
        for (key, value) in table {
            if let Some(k) = key.strip_prefix(GEN_PREFIX) {
                generator.insert(k.to_string(), value);
            } else if key == "output_dir" || key == "data_dir" {
                let s = value
                    .as_str()
                    .ok_or_else(|| Error::config(format!("{key} must be a string")))?;
                *(if key == "output_dir" {
                    &mut output_dir
                } else {
                    &mut data_dir
                }) = PathBuf::from(s);
            } else {
                experiment.insert(key, value);
            }
        }
        let has_gen_seed = generator.contains_key("seed");
        let mut experiment: ExperimentConfig = toml::Value::Table(experiment)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.message().to_string()))?;
        let mut generator: GeneratorSettings =
            toml::Value::Table(generator)
                .try_into()
                .map_err(|e: toml::de::Error| {
                    Error::config(format!(
                        "{} (generator keys take the `{GEN_PREFIX}` prefix)",
                        e.message()
                    ))
                })?;
        if !has_gen_seed {
            generator.seed = experiment.seed;
        }
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                output_dir = PathBuf::from(dir);
            }
        }
        for p in [
            &mut experiment.train_path,
            &mut experiment.train_gold_path,
            &mut experiment.dev_path,
            &mut experiment.test_path,
        ]
        .into_iter()
        .flatten()
        {
            *p = base.join(&*p);
        }
        Ok(Self {
            experiment,
            generator,
            output_dir: base.join(output_dir),
            data_dir: base.join(data_dir),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment.validate()?;
        if self.experiment.train_path.is_none() {
            self.generator.validate(&self.experiment.tagset()?)?;
        }
        Ok(())
    }

    /// Effective settings as a flat TOML table.
    pub fn effective_toml(&self) -> Result<String> {
        let mut out = toml::Table::new();
        out.insert(
            "output_dir".into(),
            toml::Value::String(self.output_dir.display().to_string()),
        );
        out.insert(
            "data_dir".into(),
            toml::Value::String(self.data_dir.display().to_string()),
        );
        let exp =
            toml::Table::try_from(&self.experiment).map_err(|e| Error::config(e.to_string()))?;
        out.extend(exp);
        let generator =
            toml::Table::try_from(&self.generator).map_err(|e| Error::config(e.to_string()))?;
        out.extend(
            generator
                .into_iter()
                .map(|(k, v)| (format!("{GEN_PREFIX}{k}"), v)),
        );
        toml::to_string(&out).map_err(|e| Error::config(e.to_string()))
    }

    /// Datasets named by the config, or freshly generated synthetic ones.
    pub fn load_data(&self) -> Result<ExperimentData> {
        let tagset = self.experiment.tagset()?;
        let e = &self.experiment;
        let Some(train_path) = &e.train_path else {
            let corpus = generate_synthetic(&self.generator, &tagset)?;
            return Ok(ExperimentData {
                train: corpus.distant_train(&self.generator)?,
                dev: corpus.dev,
                test: corpus.test,
            });
        };
        let required = |p: &Option<PathBuf>, key: &str| {
            p.clone()
                .ok_or_else(|| Error::config(format!("{key} is required when train_path is set")))
        };
        let mut train = read_conll(train_path, &tagset)?;
        if let Some(gold) = &e.train_gold_path {
            let gold_data = read_conll(gold, &tagset)?;
            train
                .attach_gold(&gold_data)
                .map_err(|err| err.in_file(gold))?;
        }
        Ok(ExperimentData {
            train,
            dev: read_conll(required(&e.dev_path, "dev_path")?, &tagset)?,
            test: read_conll(required(&e.test_path, "test_path")?, &tagset)?,
        })
    }
}

fn parse_override(raw: &str) -> Result<(String, toml::Value)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override `{raw}` is not key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::config(format!("override `{raw}` has an empty key")));
    }
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key.to_string(), parsed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub generator: GeneratorSettings,
    pub entity_types: Vec<String>,
    pub train_sentences: usize,
    pub dev_sentences: usize,
    pub test_sentences: usize,
    pub gazetteer_entries: usize,
    pub noise: NoiseProfile,
}

/// Writes `train.conll` (noisy), `train.gold.conll`, `dev.conll`,
/// `test.conll`, `gazetteer.tsv` and `summary.json` into `data_dir`.
pub fn cmd_generate(cfg: &ConfigFile) -> Result<GenerateSummary> {
    let tagset = cfg.experiment.tagset()?;
    cfg.generator.validate(&tagset)?;
    let corpus = generate_synthetic(&cfg.generator, &tagset)?;
    let noisy = corpus.distant_train(&cfg.generator)?;
    let dir = &cfg.data_dir;
    fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
    write_conll_file(dir.join("train.conll"), &noisy)?;
    write_conll_file(dir.join("train.gold.conll"), &corpus.train)?;
    write_conll_file(dir.join("dev.conll"), &corpus.dev)?;
    write_conll_file(dir.join("test.conll"), &corpus.test)?;
    write_file(
        &dir.join("gazetteer.tsv"),
        corpus.gazetteer.to_text(&tagset),
    )?;
    let summary = GenerateSummary {
        generator: cfg.generator.clone(),
        entity_types: tagset.entity_types().to_vec(),
        train_sentences: corpus.train.len(),
        dev_sentences: corpus.dev.len(),
        test_sentences: corpus.test.len(),
        gazetteer_entries: corpus.gazetteer.len(),
        noise: noise_profile(&noisy)?,
    };
    write_file(&dir.join("summary.json"), pretty(&summary)?)?;
    Ok(summary)
}

pub const RUN_RESULT_FILE: &str = "run_result.json";
pub const CHECKPOINT_FILE: &str = "best.ckpt";

/// Trains, then writes `run_result.json` and `best.ckpt` into `output_dir`.
pub fn cmd_train(cfg: &ConfigFile) -> Result<RunResult> {
    cfg.validate()?;
    let data = cfg.load_data()?;
    let out = run_experiment(&cfg.experiment, &data)?;
    let mut result = out.result;
    if cfg.experiment.train_path.is_none() {
        result.generator = Some(cfg.generator.clone());
    }
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
    write_file(&dir.join(RUN_RESULT_FILE), result.to_json()?)?;
    checkpoint(out.best_params, &out.vocab, &cfg.experiment.entity_types)
        .save(dir.join(CHECKPOINT_FILE))?;
    Ok(result)
}

fn checkpoint(
    params: crate::tagger::TaggerParams,
    vocab: &Vocabulary,
    entity_types: &[String],
) -> Checkpoint {
    Checkpoint::new(params)
        .with_table("entity_types", entity_types.to_vec())
        .with_table("vocab", vocab.entries().to_vec())
        .with_table("case_folding", vec![vocab.case_folding().to_string()])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub sentences: usize,
    pub tokens: usize,
    pub metrics: SpanMetrics,
}

/// Scores a saved model on a CoNLL file.
pub fn cmd_evaluate(
    checkpoint: impl AsRef<Path>,
    data: impl AsRef<Path>,
) -> Result<EvaluationReport> {
    let path = checkpoint.as_ref();
    let ckpt = Checkpoint::load(path)?;
    let table = |name: &str| {
        ckpt.table(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing table `{name}`")).in_file(path))
    };
    let tagset = TagSet::new(table("entity_types")?)?;
    let case_folding = table("case_folding")?.first().is_some_and(|v| v == "true");
    let vocab = Vocabulary::from_tokens(table("vocab")?.iter().cloned(), case_folding);
    if vocab.len() != ckpt.params.vocab_size() || tagset.num_labels() != ckpt.params.arch.num_labels
    {
        return Err(
            Error::Checkpoint("tables do not match the parameter shapes".into()).in_file(path),
        );
    }
    let dataset: Dataset = read_conll(data.as_ref(), &tagset)?;
    let ids: Vec<Vec<usize>> = dataset
        .sentences
        .iter()
        .map(|s| vocab.encode(&s.tokens))
        .collect();
    let pred = predict_all(&ckpt.params, &ids)?;
    Ok(EvaluationReport {
        sentences: dataset.len(),
        tokens: dataset.num_tokens(),
        metrics: span_prf(&pred, &dataset.labels(), &tagset)?,
    })
}

/// One CSV row per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub run: String,
    /// Injected noise ratio, for runs on noise-corrupted synthetic data.
    pub noise_ratio: Option<f64>,
    pub variant: String,
    pub seed: u64,
    pub best_epoch: usize,
    pub best_model: ModelId,
    pub dev_f1: f64,
    pub test_precision: f64,
    pub test_recall: f64,
    pub test_f1: f64,
}

/// Which selection mechanisms a config leaves active.
pub fn variant_name(cfg: &ExperimentConfig) -> &'static str {
    let utl = !(cfg.sigma_ua == f64::INFINITY && cfg.sigma_co == 0.0);
    let scl = cfg.delta > 0.0;
    match (utl, scl) {
        (true, true) => "full",
        (true, false) => "without_scl",
        (false, true) => "without_utl",
        (false, false) => "vanilla",
    }
}

/// Collects `run_result.json` from each directory into one CSV, ordered by
/// noise ratio then directory name.
pub fn cmd_report(run_dirs: &[PathBuf], out: impl AsRef<Path>) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::with_capacity(run_dirs.len());
    for dir in run_dirs {
        let path = dir.join(RUN_RESULT_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::from(e).in_file(&path))?;
        let r: RunResult =
            serde_json::from_str(&text).map_err(|e| Error::from(e).in_file(&path))?;
        let noise_ratio = r
            .generator
            .as_ref()
            .filter(|g| g.ds_source == DsSource::Noise)
            .map(|g| g.noise_ratio);
        rows.push(ReportRow {
            run: dir.display().to_string(),
            noise_ratio,
            variant: variant_name(&r.config).to_string(),
            seed: r.config.seed,
            best_epoch: r.best.epoch,
            best_model: r.best.model,
            dev_f1: r.best.dev.f1,
            test_precision: r.test.precision,
            test_recall: r.test.recall,
            test_f1: r.test.f1,
        });
    }
    rows.sort_by(|a, b| {
        let k = |r: &ReportRow| r.noise_ratio.unwrap_or(f64::NEG_INFINITY);
        k(a).total_cmp(&k(b)).then_with(|| a.run.cmp(&b.run))
    });
    let out = out.as_ref();
    let mut w = csv::Writer::from_path(out).map_err(|e| Error::from(e).in_file(out))?;
    for row in &rows {
        w.serialize(row).map_err(|e| Error::from(e).in_file(out))?;
    }
    w.flush().map_err(|e| Error::from(e).in_file(out))?;
    Ok(rows)
}

fn pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn write_file(path: &Path, contents: String) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::from(e).in_file(path))
}
