use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gazetteer::{distant_label, Gazetteer};
use super::noise::{inject_noise, NoiseMode, NoiseSpec};
use crate::corpus::{decode_bio_to_spans, Dataset, Sentence, Span, TagSet, OUTSIDE};
use crate::evaluation::{span_prf, SpanMetrics};
use crate::rng::{mix, seeded, stream};
use crate::{Error, Result};

/// How the noisy training corpus is derived from the clean one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DsSource {
    #[default]
    Gazetteer,
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSettings {
    pub seed: u64,
    pub train_sentences: usize,
    pub dev_sentences: usize,
    pub test_sentences: usize,
    /// Filler slots per sentence, inclusive range.
    pub min_fillers: usize,
    pub max_fillers: usize,
    /// Probability of a mention before each filler slot.
    pub entity_density: f64,
    pub filler_vocab: usize,
    /// Distinct name tokens per entity type.
    pub name_pool: usize,
    /// Distinct entity surfaces per type.
    pub surfaces_per_type: usize,
    pub max_entity_len: usize,
    /// Context words per type that may precede its mentions.
    pub triggers_per_type: usize,
    pub trigger_prob: f64,
    /// Fraction c of surfaces present in the gazetteer.
    pub coverage: f64,
    /// Fraction a of gazetteer entries whose first type is wrong.
    pub ambiguity: f64,
    pub ds_source: DsSource,
    pub noise_ratio: f64,
    pub noise_mode: NoiseMode,
}

impl Default for GeneratorSettings {
    fn default() -> Self {
        Self {
            seed: 7,
            train_sentences: 2000,
            dev_sentences: 300,
            test_sentences: 300,
            min_fillers: 5,
            max_fillers: 12,
            entity_density: 0.2,
            filler_vocab: 300,
            name_pool: 40,
            surfaces_per_type: 120,
            max_entity_len: 3,
            triggers_per_type: 4,
            trigger_prob: 0.5,
            coverage: 0.7,
            ambiguity: 0.2,
            ds_source: DsSource::Gazetteer,
            noise_ratio: 0.0,
            noise_mode: NoiseMode::Mixed,
        }
    }
}

impl GeneratorSettings {
    pub fn validate(&self, tagset: &TagSet) -> Result<()> {
        let fraction = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(format!("gen_{name} = {v} outside [0, 1]")))
            }
        };
        fraction("entity_density", self.entity_density)?;
        fraction("trigger_prob", self.trigger_prob)?;
        fraction("coverage", self.coverage)?;
        fraction("ambiguity", self.ambiguity)?;
        let positive = |name: &str, v: usize| {
            if v > 0 {
                Ok(())
            } else {
                Err(Error::config(format!("gen_{name} must be positive")))
            }
        };
        positive("train_sentences", self.train_sentences)?;
        positive("dev_sentences", self.dev_sentences)?;
        positive("test_sentences", self.test_sentences)?;
        positive("max_fillers", self.max_fillers)?;
        positive("filler_vocab", self.filler_vocab)?;
        positive("name_pool", self.name_pool)?;
        positive("surfaces_per_type", self.surfaces_per_type)?;
        positive("max_entity_len", self.max_entity_len)?;
        if self.min_fillers > self.max_fillers {
            return Err(Error::config(format!(
                "gen_min_fillers = {} exceeds gen_max_fillers = {}",
                self.min_fillers, self.max_fillers
            )));
        }
        if self.trigger_prob > 0.0 && self.triggers_per_type == 0 {
            return Err(Error::config(
                "gen_trigger_prob > 0 needs gen_triggers_per_type > 0",
            ));
        }
        let possible: f64 = (1..=self.max_entity_len as i32)
            .map(|l| (self.name_pool as f64).powi(l))
            .sum();
        if (self.surfaces_per_type as f64) > possible {
            return Err(Error::config(format!(
                "gen_surfaces_per_type = {} exceeds the {possible} surfaces buildable from the name pool",
                self.surfaces_per_type
            )));
        }
        if self.ambiguity > 0.0 && tagset.num_types() < 2 {
            return Err(Error::config(
                "gen_ambiguity > 0 needs at least two entity types",
            ));
        }
        if !(0.0..=100.0).contains(&self.noise_ratio) {
            return Err(Error::config(format!(
                "gen_noise_ratio = {} outside [0, 100]",
                self.noise_ratio
            )));
        }
        Ok(())
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec {
            ratio_percent: self.noise_ratio,
            mode: self.noise_mode,
            seed: mix(self.seed, &[stream::NOISE]),
        }
    }
}

/// Clean splits (labels are gold) plus the gazetteer built for them.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub train: Dataset,
    pub dev: Dataset,
    pub test: Dataset,
    pub gazetteer: Gazetteer,
}

impl SyntheticCorpus {
    /// The noisy training set, with the clean labels attached as gold.
    pub fn distant_train(&self, settings: &GeneratorSettings) -> Result<Dataset> {
        match settings.ds_source {
            DsSource::Gazetteer => distant_label(&self.train, &self.gazetteer, "train"),
            DsSource::Noise => inject_noise(&self.train, &settings.noise_spec()),
        }
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

struct WordFactory {
    seen: HashSet<String>,
}

impl WordFactory {
    fn word(&mut self, rng: &mut ChaCha8Rng, syllables: (usize, usize), capital: bool) -> String {
        loop {
            let n = rng.gen_range(syllables.0..=syllables.1);
            let mut w = String::with_capacity(2 * n);
            for _ in 0..n {
                w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
                w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
            }
            if self.seen.insert(w.clone()) {
                if capital {
                    w[..1].make_ascii_uppercase();
                }
                return w;
            }
        }
    }

    fn words(
        &mut self,
        rng: &mut ChaCha8Rng,
        n: usize,
        syllables: (usize, usize),
        capital: bool,
    ) -> Vec<String> {
        (0..n).map(|_| self.word(rng, syllables, capital)).collect()
    }
}

/// Cycles through a pool in freshly shuffled rounds.
struct Deck {
    items: Vec<usize>,
    next: usize,
}

impl Deck {
    fn new(n: usize) -> Self {
        Self {
            items: (0..n).collect(),
            next: n,
        }
    }

    fn draw(&mut self, rng: &mut ChaCha8Rng) -> usize {
        if self.next == self.items.len() {
            self.items.shuffle(rng);
            self.next = 0;
        }
        self.next += 1;
        self.items[self.next - 1]
    }
}

struct Lexicon {
    fillers: Vec<String>,
    triggers: Vec<Vec<String>>,
    surfaces: Vec<Vec<Vec<String>>>,
}

fn build_lexicon(s: &GeneratorSettings, types: usize, rng: &mut ChaCha8Rng) -> Lexicon {
    let mut factory = WordFactory {
        seen: HashSet::new(),
    };
    let fillers = factory.words(rng, s.filler_vocab, (1, 3), false);
    let triggers = (0..types)
        .map(|_| factory.words(rng, s.triggers_per_type, (2, 3), false))
        .collect();
    let surfaces = (0..types)
        .map(|_| {
            let pool = factory.words(rng, s.name_pool, (2, 3), true);
            let mut seen = HashSet::new();
            let mut out = Vec::with_capacity(s.surfaces_per_type);
            while out.len() < s.surfaces_per_type {
                let len = rng.gen_range(1..=s.max_entity_len);
                let surface: Vec<String> = (0..len)
                    .map(|_| pool[rng.gen_range(0..pool.len())].clone())
                    .collect();
                if seen.insert(surface.clone()) {
                    out.push(surface);
                }
            }
            out
        })
        .collect();
    Lexicon {
        fillers,
        triggers,
        surfaces,
    }
}

fn sentence(
    s: &GeneratorSettings,
    lex: &Lexicon,
    tagset: &TagSet,
    decks: &mut [Deck],
    rng: &mut ChaCha8Rng,
) -> Result<Sentence> {
    let mut tokens = Vec::new();
    let mut labels = Vec::new();
    let slots = rng.gen_range(s.min_fillers..=s.max_fillers).max(1);
    for _ in 0..slots {
        if rng.gen_bool(s.entity_density) {
            let t = rng.gen_range(0..tagset.num_types());
            if rng.gen_bool(s.trigger_prob) {
                let triggers = &lex.triggers[t];
                tokens.push(triggers[rng.gen_range(0..triggers.len())].clone());
                labels.push(OUTSIDE);
            }
            let surface = &lex.surfaces[t][decks[t].draw(rng)];
            for (i, tok) in surface.iter().enumerate() {
                tokens.push(tok.clone());
                labels.push(if i == 0 {
                    tagset.begin(t)
                } else {
                    tagset.inside(t)
                });
            }
        }
        tokens.push(lex.fillers[rng.gen_range(0..lex.fillers.len())].clone());
        labels.push(OUTSIDE);
    }
    let gold = labels.clone();
    Sentence::new(tokens, labels)?.with_gold(gold)
}

/// Builds clean train/dev/test splits and a gazetteer with coverage `c` and
/// ambiguity `a`. Names of different types never share tokens, and every
/// mention is followed by a filler word, so gazetteer matches never cross
/// mention boundaries.
pub fn generate_synthetic(
    settings: &GeneratorSettings,
    tagset: &TagSet,
) -> Result<SyntheticCorpus> {
    settings.validate(tagset)?;
    let mut rng = seeded(mix(settings.seed, &[stream::GENERATOR]));
    let types = tagset.num_types();
    let lex = build_lexicon(settings, types, &mut rng);
    let mut decks: Vec<Deck> = (0..types)
        .map(|_| Deck::new(settings.surfaces_per_type))
        .collect();

    let mut split = |name: &str, n: usize| -> Result<Dataset> {
        let sentences = (0..n)
            .map(|_| sentence(settings, &lex, tagset, &mut decks, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(name, tagset.clone(), sentences)
    };
    let train = split("train", settings.train_sentences)?;
    let dev = split("dev", settings.dev_sentences)?;
    let test = split("test", settings.test_sentences)?;

    let mut all: Vec<(usize, usize)> = (0..types)
        .flat_map(|t| (0..settings.surfaces_per_type).map(move |i| (t, i)))
        .collect();
    all.shuffle(&mut rng);
    let covered = (settings.coverage * all.len() as f64).round() as usize;
    all.truncate(covered);
    let wrong = (settings.ambiguity * covered as f64).round() as usize;
    let mut gazetteer = Gazetteer::new();
    for (k, &(t, i)) in all.iter().enumerate() {
        let entry_types = if k < wrong {
            let mut other = rng.gen_range(0..types - 1);
            if other >= t {
                other += 1;
            }
            vec![other, t]
        } else {
            vec![t]
        };
        gazetteer.insert(lex.surfaces[t][i].clone(), entry_types)?;
    }
    Ok(SyntheticCorpus {
        train,
        dev,
        test,
        gazetteer,
    })
}

/// How a noisy corpus differs from its gold labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub gold_mentions: usize,
    pub noisy_spans: usize,
    /// Same boundaries and type as a gold mention.
    pub correct: usize,
    /// Same boundaries as a gold mention, wrong type.
    pub inaccurate: usize,
    /// Gold mentions with no noisy span on the same boundaries.
    pub incomplete: usize,
    /// Noisy spans whose boundaries match no gold mention.
    pub spurious: usize,
    pub incomplete_rate: f64,
    pub inaccurate_rate: f64,
    /// Noisy labels scored against gold.
    pub metrics: SpanMetrics,
}

pub fn noise_profile(noisy: &Dataset) -> Result<NoiseProfile> {
    let gold = noisy.gold_labels().ok_or(Error::MissingGold)?;
    let tagset = &noisy.tagset;
    let (mut gold_mentions, mut noisy_spans, mut correct, mut inaccurate, mut spurious) =
        (0, 0, 0, 0, 0);
    for (s, g) in noisy.sentences.iter().zip(&gold) {
        let gs = decode_bio_to_spans(g, tagset);
        let ns = decode_bio_to_spans(&s.labels, tagset);
        let bounds = |sp: &Span| (sp.start, sp.end);
        let gold_bounds: HashSet<(usize, usize)> = gs.iter().map(bounds).collect();
        let gold_set: HashSet<Span> = gs.iter().copied().collect();
        for sp in &ns {
            if gold_set.contains(sp) {
                correct += 1;
            } else if gold_bounds.contains(&bounds(sp)) {
                inaccurate += 1;
            } else {
                spurious += 1;
            }
        }
        gold_mentions += gs.len();
        noisy_spans += ns.len();
    }
    let incomplete = gold_mentions - correct - inaccurate;
    let rate = |n: usize| {
        if gold_mentions == 0 {
            0.0
        } else {
            n as f64 / gold_mentions as f64
        }
    };
    Ok(NoiseProfile {
        gold_mentions,
        noisy_spans,
        correct,
        inaccurate,
        incomplete,
        spurious,
        incomplete_rate: rate(incomplete),
        inaccurate_rate: rate(inaccurate),
        metrics: span_prf(&noisy.labels(), &gold, tagset)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::is_bio_legal;

    fn small(coverage: f64, ambiguity: f64) -> GeneratorSettings {
        GeneratorSettings {
            train_sentences: 500,
            dev_sentences: 20,
            test_sentences: 20,
            coverage,
            ambiguity,
            ..GeneratorSettings::default()
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let ts = TagSet::conll03();
        let a = generate_synthetic(&small(0.7, 0.2), &ts).unwrap();
        let b = generate_synthetic(&small(0.7, 0.2), &ts).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(
            &GeneratorSettings {
                seed: 8,
                ..small(0.7, 0.2)
            },
            &ts,
        )
        .unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn full_coverage_reproduces_gold() {
        let ts = TagSet::conll03();
        let s = small(1.0, 0.0);
        let corpus = generate_synthetic(&s, &ts).unwrap();
        let ds = corpus.distant_train(&s).unwrap();
        assert_eq!(ds.labels(), corpus.train.labels());
        assert_eq!(noise_profile(&ds).unwrap().metrics.f1, 1.0);
    }

    #[test]
    fn zero_coverage_labels_everything_outside() {
        let ts = TagSet::conll03();
        let s = small(0.0, 0.0);
        let corpus = generate_synthetic(&s, &ts).unwrap();
        assert!(corpus.gazetteer.is_empty());
        let ds = corpus.distant_train(&s).unwrap();
        assert!(ds
            .sentences
            .iter()
            .all(|s| s.labels.iter().all(|&l| l == OUTSIDE)));
    }

    #[test]
    fn default_profile_is_noisy_but_informative() {
        let ts = TagSet::conll03();
        let s = GeneratorSettings {
            train_sentences: 800,
            ..small(0.7, 0.2)
        };
        let corpus = generate_synthetic(&s, &ts).unwrap();
        let ds = corpus.distant_train(&s).unwrap();
        let p = noise_profile(&ds).unwrap();
        assert!(p.metrics.f1 > 0.0 && p.metrics.f1 < 1.0);
        assert!(p.gold_mentions >= 1000, "{}", p.gold_mentions);
        assert!(
            (p.incomplete_rate - 0.3).abs() < 0.05,
            "{}",
            p.incomplete_rate
        );
        assert!(
            p.inaccurate_rate > 0.05 && p.inaccurate_rate < 0.25,
            "{}",
            p.inaccurate_rate
        );
        assert!(ds.sentences.iter().all(|s| is_bio_legal(&s.labels, &ts)));
    }

    #[test]
    fn gazetteer_fractions() {
        let ts = TagSet::conll03();
        let s = small(0.5, 0.25);
        let corpus = generate_synthetic(&s, &ts).unwrap();
        let total = 4 * s.surfaces_per_type;
        assert_eq!(corpus.gazetteer.len(), total / 2);
        let text = corpus.gazetteer.to_text(&ts);
        let ambiguous = text.lines().filter(|l| l.contains(',')).count();
        assert_eq!(ambiguous, (0.25 * (total / 2) as f64).round() as usize);
    }

    #[test]
    fn noise_source_perturbs_requested_share() {
        let ts = TagSet::conll03();
        let s = GeneratorSettings {
            ds_source: DsSource::Noise,
            noise_ratio: 40.0,
            ..small(1.0, 0.0)
        };
        let corpus = generate_synthetic(&s, &ts).unwrap();
        let p = noise_profile(&corpus.distant_train(&s).unwrap()).unwrap();
        let perturbed = p.gold_mentions - p.correct;
        assert_eq!(
            perturbed,
            (0.4 * p.gold_mentions as f64 + 0.5).floor() as usize
        );
    }

    #[test]
    fn inconsistent_ranges_are_rejected() {
        let ts = TagSet::conll03();
        let bad = [
            GeneratorSettings {
                min_fillers: 9,
                max_fillers: 3,
                ..small(0.7, 0.2)
            },
            GeneratorSettings {
                coverage: 1.5,
                ..small(0.7, 0.2)
            },
            GeneratorSettings {
                name_pool: 2,
                max_entity_len: 1,
                surfaces_per_type: 3,
                ..small(0.7, 0.2)
            },
            GeneratorSettings {
                train_sentences: 0,
                ..small(0.7, 0.2)
            },
        ];
        for s in bad {
            assert!(
                matches!(generate_synthetic(&s, &ts), Err(Error::Config(_))),
                "{s:?}"
            );
        }
    }
}
