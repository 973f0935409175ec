//! Oracle suites. Each returns a short summary on success or the first
//! disagreement found.

use dsner::collaboration::select_small_loss;
use dsner::corpus::{decode_bio_to_spans, encode_spans_to_bio, is_bio_legal, TagSet, OUTSIDE};
use dsner::evaluation::{harmonic_mean, span_prf};
use dsner::rng::seeded;
use dsner::selection::{
    build_mask, estimate_uncertainty, predict_pseudo_labels, LabelSource, PseudoLabels, Thresholds,
    UncertaintyScores,
};
use dsner::tagger::{ema_update, ForwardMode, TaggerArch, TaggerParams};
use rand::Rng;

use super::{
    ema_closed_form, keep_token, random_legal_bio, small_loss_oracle, spans_of_legal, variance,
    GradCase,
};

pub type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Library uncertainty against brute-force MC passes and a Welford variance.
pub fn variance_suite() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut tokens = 0;
    for seed in 0..50u64 {
        let arch = TaggerArch {
            embedding_dim: 6,
            window_radius: 1,
            hidden_dim: 10,
            num_labels: 9,
            dropout_rate: 0.3,
            init_seed: seed,
        };
        let teacher = TaggerParams::init(arch, 30).unwrap();
        let mut rng = seeded(seed + 1000);
        let ids: Vec<usize> = (0..rng.gen_range(1..15))
            .map(|_| rng.gen_range(0..30))
            .collect();
        let pseudo = predict_pseudo_labels(&teacher, &ids).unwrap();
        let passes = rng.gen_range(2..12);
        let (base_seed, sentence) = (rng.gen(), rng.gen_range(0..500));
        let unc =
            estimate_uncertainty(&teacher, &ids, &pseudo, passes, base_seed, sentence).unwrap();
        let runs: Vec<_> = (0..passes)
            .map(|pass| {
                teacher
                    .forward(
                        &ids,
                        ForwardMode::Mc {
                            base_seed,
                            pass,
                            sentence,
                        },
                    )
                    .unwrap()
            })
            .collect();
        for (i, &label) in pseudo.labels.iter().enumerate() {
            let probs: Vec<f64> = runs.iter().map(|p| p[[i, label]]).collect();
            let expected = variance(&probs);
            worst = worst.max((unc.scores[i] - expected).abs());
            ensure((unc.scores[i] - expected).abs() <= 1e-12, || {
                format!("seed {seed} token {i}: {} vs {expected}", unc.scores[i])
            })?;
            tokens += 1;
        }
    }
    for (values, expected) in [
        (vec![0.5, 0.5, 0.5], 0.0),
        (vec![0.0, 1.0], 0.25),
        (vec![0.2, 0.4, 0.6, 0.8], 0.05),
    ] {
        ensure((variance(&values) - expected).abs() <= 1e-12, || {
            format!("oracle self-check on {values:?}")
        })?;
    }
    Ok(format!("{tokens} tokens, max |diff| {worst:.1e}"))
}

/// Every cell of a 5x5 threshold grid against 100 random (confidence,
/// uncertainty) pairs, for teacher and transferred sources.
pub fn mask_suite() -> Outcome {
    let co_grid = [0.0, 0.25, 0.5, 0.75, 0.9];
    let ua_grid = [0.0, 0.001, 0.01, 0.1, f64::INFINITY];
    let mut rng = seeded(77);
    let pairs: Vec<(f64, f64)> = (0..100)
        .map(|n| match n {
            0 => (0.5, 0.01),
            1 => (0.9, 0.1),
            _ => (rng.gen_range(0.0..1.0), rng.gen_range(0.0..0.2)),
        })
        .collect();
    let mut checked = 0;
    for &sigma_co in &co_grid {
        for &sigma_ua in &ua_grid {
            for source in [LabelSource::Teacher, LabelSource::Transferred] {
                let pseudo = PseudoLabels {
                    labels: vec![0; pairs.len()],
                    confidence: pairs.iter().map(|p| p.0).collect(),
                    source: vec![source; pairs.len()],
                };
                let unc = UncertaintyScores {
                    scores: pairs.iter().map(|p| p.1).collect(),
                    passes: 2,
                };
                let mask = build_mask(&pseudo, &unc, Thresholds { sigma_co, sigma_ua });
                for (i, &(c, u)) in pairs.iter().enumerate() {
                    let expected =
                        keep_token(c, u, source == LabelSource::Transferred, sigma_co, sigma_ua);
                    ensure(mask.mask[i] == expected, || {
                        format!(
                            "σ_co={sigma_co} σ_ua={sigma_ua} {source:?} pair ({c}, {u}): got {}",
                            mask.mask[i]
                        )
                    })?;
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{checked} cells"))
}

/// `t_n - s = α^n (t_0 - s)` against iterated updates.
pub fn ema_suite() -> Outcome {
    let arch = TaggerArch {
        embedding_dim: 3,
        window_radius: 1,
        hidden_dim: 4,
        num_labels: 5,
        dropout_rate: 0.0,
        init_seed: 9,
    };
    let mut worst: f64 = 0.0;
    for (k, alpha) in [0.0, 0.5, 0.9, 0.99, 0.995, 1.0].into_iter().enumerate() {
        let t0 = TaggerParams::init(arch, 6).unwrap();
        let student = TaggerParams::init(
            TaggerArch {
                init_seed: 100 + k as u64,
                ..arch
            },
            6,
        )
        .unwrap();
        let mut t = t0.clone();
        for n in 1..=10 {
            ema_update(&mut t, &student, alpha).unwrap();
            for ((_, a), ((_, b), (_, s))) in t
                .blocks()
                .into_iter()
                .zip(t0.blocks().into_iter().zip(student.blocks()))
            {
                for ((&tn, &t0v), &sv) in a.iter().zip(b).zip(s) {
                    let diff = (tn - ema_closed_form(t0v, sv, alpha, n)).abs();
                    worst = worst.max(diff);
                    ensure(diff <= 1e-12, || {
                        format!("α={alpha} n={n}: deviation {diff:e}")
                    })?;
                }
            }
        }
    }
    Ok(format!("6 values of α, 10 updates, max |diff| {worst:.1e}"))
}

/// Library small-loss selection against sort-and-take for δ = 0, 0.1, .., 1.
pub fn small_loss_suite() -> Outcome {
    let mut rng = seeded(5);
    let fixed = vec![0.1, 0.9, 0.2, 0.5, 0.3, 0.8, 0.4, 0.7, 0.6, 1.0];
    let got = select_small_loss(&fixed, 0.3).map_err(|e| e.to_string())?;
    ensure(got == vec![0, 2, 4], || {
        format!("fixed example selected {got:?}")
    })?;
    let mut cases = 0;
    for trial in 0..200 {
        let b = rng.gen_range(1..=33);
        // Coarse scores force ties.
        let scores: Vec<f64> = (0..b)
            .map(|_| {
                if trial % 2 == 0 {
                    rng.gen_range(0..4) as f64
                } else {
                    rng.gen_range(0.0..5.0)
                }
            })
            .collect();
        for tenths in 0..=10 {
            let delta = tenths as f64 / 10.0;
            let got = select_small_loss(&scores, delta).map_err(|e| e.to_string())?;
            let expected = small_loss_oracle(&scores, tenths);
            ensure(got == expected, || {
                format!("δ={delta} B={b}: {got:?} vs {expected:?} on {scores:?}")
            })?;
            cases += 1;
        }
    }
    Ok(format!("{cases} batches"))
}

/// Decode then re-encode 10^4 random legal sequences.
pub fn bio_suite() -> Outcome {
    let tagsets = [
        TagSet::conll03(),
        TagSet::new(&["A"]).unwrap(),
        TagSet::new(&["X", "Y", "Z", "W", "V", "U"]).unwrap(),
    ];
    let mut rng = seeded(31);
    for n in 0..10_000 {
        let ts = &tagsets[n % tagsets.len()];
        let len = rng.gen_range(0..40);
        let seq = random_legal_bio(&mut rng, ts, len);
        ensure(is_bio_legal(&seq, ts), || {
            format!("generator produced illegal {seq:?}")
        })?;
        let spans = decode_bio_to_spans(&seq, ts);
        ensure(spans == spans_of_legal(&seq, ts), || {
            format!("decode disagrees with scan on {seq:?}")
        })?;
        let back = encode_spans_to_bio(&spans, len, ts).map_err(|e| e.to_string())?;
        ensure(back == seq, || {
            format!("round trip changed {seq:?} into {back:?}")
        })?;
    }
    Ok("10000 sequences".into())
}

/// Finite-difference gradient checks on random small taggers.
pub fn gradient_suite(cases: u64) -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..cases {
        let case = GradCase::random(seed);
        let err = case.max_relative_error(1e-4, 1e-6);
        worst = worst.max(err);
        ensure(err < 1e-4, || {
            format!("case {seed}: relative error {err:e}")
        })?;
    }
    Ok(format!("{cases} taggers, max relative error {worst:.2e}"))
}

/// Harmonic mean of the reference precision/recall plus hand-counted spans.
pub fn metric_suite() -> Outcome {
    let f1 = harmonic_mean(81.13 / 100.0, 63.75 / 100.0) * 100.0;
    ensure(format!("{f1:.2}") == "71.40", || format!("F1 {f1}"))?;

    let ts = TagSet::conll03();
    let l = |names: &[&str]| -> Vec<usize> {
        names.iter().map(|n| ts.label_index(n).unwrap()).collect()
    };
    // gold: [PER 0-2] [LOC 3] [ORG 5-7]; pred: [PER 0-2] [LOC 3-4] [ORG 5-7] [MISC 8]
    let gold = vec![l(&[
        "B-PER", "I-PER", "O", "B-LOC", "O", "B-ORG", "I-ORG", "O", "O",
    ])];
    let pred = vec![l(&[
        "B-PER", "I-PER", "O", "B-LOC", "I-LOC", "B-ORG", "I-ORG", "O", "B-MISC",
    ])];
    let m = span_prf(&pred, &gold, &ts).map_err(|e| e.to_string())?;
    ensure((m.tp, m.fp, m.fn_) == (2, 2, 1), || {
        format!("case 1 counts {m:?}")
    })?;
    ensure(m.precision == 0.5 && m.recall == 2.0 / 3.0, || {
        format!("case 1 P/R {m:?}")
    })?;
    ensure((m.f1 - 4.0 / 7.0).abs() < 1e-15, || {
        format!("case 1 F1 {}", m.f1)
    })?;

    // wrong type on an exact boundary, stray I- repaired into a span, empty sentence
    let gold = vec![
        l(&["B-PER", "O", "B-LOC"]),
        l(&["O", "B-ORG", "I-ORG"]),
        vec![],
    ];
    let pred = vec![
        l(&["B-ORG", "O", "B-LOC"]),
        l(&["O", "I-ORG", "I-ORG"]),
        vec![],
    ];
    let m = span_prf(&pred, &gold, &ts).map_err(|e| e.to_string())?;
    ensure((m.tp, m.fp, m.fn_) == (2, 1, 1), || {
        format!("case 2 counts {m:?}")
    })?;

    let none = span_prf(&[l(&["O", "O"])], &[l(&["O", "O"])], &ts).map_err(|e| e.to_string())?;
    ensure(none.f1 == 0.0 && none.tp == 0, || {
        format!("empty case {none:?}")
    })?;

    // Random sentences against an independent span tally.
    let mut rng = seeded(4);
    for _ in 0..200 {
        let n = rng.gen_range(1..6);
        let (mut pred, mut gold) = (vec![], vec![]);
        for _ in 0..n {
            let len = rng.gen_range(0..20);
            pred.push(random_legal_bio(&mut rng, &ts, len));
            gold.push(random_legal_bio(&mut rng, &ts, len));
        }
        let (mut tp, mut np, mut ng) = (0, 0, 0);
        for (p, g) in pred.iter().zip(&gold) {
            let (ps, gs) = (spans_of_legal(p, &ts), spans_of_legal(g, &ts));
            tp += ps.iter().filter(|s| gs.contains(s)).count();
            np += ps.len();
            ng += gs.len();
        }
        let m = span_prf(&pred, &gold, &ts).map_err(|e| e.to_string())?;
        ensure((m.tp, m.tp + m.fp, m.tp + m.fn_) == (tp, np, ng), || {
            format!("tally {m:?} vs {tp}/{np}/{ng}")
        })?;
    }
    ensure(OUTSIDE == 0, || "O must be label 0".into())?;
    Ok(format!("F1 {f1:.2}, hand cases exact"))
}
