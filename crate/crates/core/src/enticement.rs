//! Enticement scoring and content screening for decoy files.
//!
//! The topic-semantic-matching score measures how well a decoy file's
//! vocabulary matches the topics of the repository it is planted in, in
//! word-vector space, so paraphrases still score high. For each topic it
//! takes the file's best (non-negative) cosine against each of the top
//! `m` topic words, averages those maxima, and combines topics by
//! prevalence:
//!
//! ```text
//! score = Σ_t prevalence[t] · mean_{u ∈ top_m(t)} max_w max(0, cos(u, w))
//! ```
//!
//! Topic words absent from the vector store are skipped and the mean runs
//! over the remaining ones; a topic with no embeddable top word
//! contributes 0. The clamp at zero plus the prevalence simplex keep the
//! score in [0, 1].
//!
//! [`word_overlap_score`] is the lexical baseline the vector route is
//! measured against, and the two screens flag memorised training spans
//! and sensitive terms in generated candidates before deployment.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::corpus::{content_words, default_stoplist, Corpus, TokenDoc};
use crate::embed::{cosine, VectorStore};
use crate::topics::TopicModel;

#[derive(Debug, Error)]
pub enum EnticementError {
    #[error("file has no content word")]
    NoContentWords,
    #[error("embeddable fraction {found:.3} below required coverage {required:.3}")]
    InsufficientCoverage { found: f64, required: f64 },
    #[error("memorization n-gram size must be >= 3, got {0}")]
    BadNgramSize(usize),
}

/// Configuration for the topic-matching score.
#[derive(Debug, Clone)]
pub struct TsmConfig {
    /// Top words per topic entering the match.
    pub m: usize,
    /// Negative cosines clamp to zero (fixed on; kept visible in the config).
    pub clamp_negative: bool,
    /// Minimum fraction of the file's content tokens that must be embeddable.
    pub require_coverage: f64,
}

impl Default for TsmConfig {
    fn default() -> Self {
        Self { m: 10, clamp_negative: true, require_coverage: 0.5 }
    }
}

/// Score a decoy file against the repository topic model.
pub fn tsm_score(
    file: &TokenDoc,
    model: &TopicModel,
    store: &VectorStore,
    cfg: &TsmConfig,
) -> Result<f64, EnticementError> {
    let stop = default_stoplist();
    let words = content_words(file, stop);
    if words.is_empty() {
        return Err(EnticementError::NoContentWords);
    }
    let embeddable = words.iter().filter(|w| store.contains(w)).count();
    let coverage = embeddable as f64 / words.len() as f64;
    if coverage < cfg.require_coverage {
        return Err(EnticementError::InsufficientCoverage {
            found: coverage,
            required: cfg.require_coverage,
        });
    }
    if embeddable == 0 {
        return Err(EnticementError::InsufficientCoverage {
            found: 0.0,
            required: cfg.require_coverage,
        });
    }
    let mut distinct: Vec<&str> = words.iter().copied().filter(|w| store.contains(w)).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let file_vecs: Vec<&[f64]> =
        distinct.iter().map(|w| store.get(w).expect("filtered to present")).collect();

    let prevalence = model.prevalence();
    let mut score = 0.0;
    for (t, &prev) in prevalence.iter().enumerate() {
        let tops = model.top_words(t, cfg.m);
        let mut sum = 0.0;
        let mut avail = 0usize;
        for (word, _) in &tops {
            let Some(u) = store.get(word) else { continue };
            avail += 1;
            let mut best = 0.0f64;
            for v in &file_vecs {
                let c = cosine(u, v);
                let c = if cfg.clamp_negative { c.max(0.0) } else { c };
                if c > best {
                    best = c;
                }
            }
            sum += best;
        }
        if avail > 0 {
            score += prev * (sum / avail as f64);
        }
    }
    Ok(score.clamp(0.0, 1.0))
}

/// Lexical-overlap baseline: fraction of the file's distinct content
/// words that occur in the context vocabulary. A file with no content
/// words scores 0.
pub fn word_overlap_score(file: &TokenDoc, context: &Corpus) -> f64 {
    let stop = default_stoplist();
    let mut distinct: Vec<&str> = content_words(file, stop);
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.is_empty() {
        return 0.0;
    }
    let hits = distinct.iter().filter(|w| context.vocab.contains_key(**w)).count();
    hits as f64 / distinct.len() as f64
}

/// Why a span of a candidate document was flagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlagReason {
    Memorized,
    SensitiveTerm,
    AssociationRule,
}

impl std::fmt::Display for FlagReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FlagReason::Memorized => "memorized",
            FlagReason::SensitiveTerm => "sensitive_term",
            FlagReason::AssociationRule => "association_rule",
        };
        f.write_str(s)
    }
}

/// Flagged token span, end exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlagSpan {
    pub start: usize,
    pub end: usize,
    pub reason: FlagReason,
}

/// Screening outcome. `pass` is true exactly when nothing was flagged;
/// spans are sorted by position and non-overlapping per reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScreenReport {
    pub flagged_spans: Vec<FlagSpan>,
    pub pass: bool,
}

impl ScreenReport {
    fn from_spans(mut spans: Vec<FlagSpan>) -> Self {
        spans.sort_by_key(|s| (s.start, s.end));
        let pass = spans.is_empty();
        Self { flagged_spans: spans, pass }
    }
}

/// Flag every maximal candidate span of at least `n` tokens that occurs
/// verbatim (token-exact, contiguous) in a single training document.
///
/// Implementation: an n-gram index over the training docs locates match
/// starts, each is extended to its longest common run, and the covered
/// positions are reported as maximal contiguous spans.
pub fn memorization_screen(
    candidate: &TokenDoc,
    training: &Corpus,
    n: usize,
) -> Result<ScreenReport, EnticementError> {
    if n < 3 {
        return Err(EnticementError::BadNgramSize(n));
    }
    let cand = &candidate.tokens;
    if cand.len() < n {
        return Ok(ScreenReport::from_spans(Vec::new()));
    }
    let mut index: HashMap<&[String], Vec<(usize, usize)>> = HashMap::new();
    for (d, doc) in training.docs.iter().enumerate() {
        if doc.tokens.len() < n {
            continue;
        }
        for pos in 0..=doc.tokens.len() - n {
            index.entry(&doc.tokens[pos..pos + n]).or_default().push((d, pos));
        }
    }
    let mut covered = vec![false; cand.len()];
    for i in 0..=cand.len() - n {
        let Some(hits) = index.get(&cand[i..i + n]) else { continue };
        let mut longest = n;
        for &(d, pos) in hits {
            let doc = &training.docs[d].tokens;
            let mut len = n;
            while i + len < cand.len() && pos + len < doc.len() && cand[i + len] == doc[pos + len]
            {
                len += 1;
            }
            longest = longest.max(len);
        }
        for c in covered.iter_mut().skip(i).take(longest) {
            *c = true;
        }
    }
    let mut spans = Vec::new();
    let mut start = None;
    for (i, &c) in covered.iter().enumerate() {
        match (c, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                spans.push(FlagSpan { start: s, end: i, reason: FlagReason::Memorized });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push(FlagSpan { start: s, end: cand.len(), reason: FlagReason::Memorized });
    }
    Ok(ScreenReport::from_spans(spans))
}

/// A co-occurrence rule: `a` and `b` within `window` token positions.
#[derive(Debug, Clone)]
pub struct AssociationRule {
    pub a: String,
    pub b: String,
    pub window: usize,
}

/// Flag sensitive terms and association-rule co-occurrences.
pub fn sensitivity_screen(
    candidate: &TokenDoc,
    terms: &HashSet<String>,
    rules: &[AssociationRule],
) -> ScreenReport {
    let mut spans = Vec::new();
    for (i, tok) in candidate.tokens.iter().enumerate() {
        if terms.contains(tok) {
            spans.push(FlagSpan { start: i, end: i + 1, reason: FlagReason::SensitiveTerm });
        }
    }
    let positions = |w: &str| -> Vec<usize> {
        candidate.tokens.iter().enumerate().filter(|(_, t)| *t == w).map(|(i, _)| i).collect()
    };
    let mut rule_spans = Vec::new();
    for rule in rules {
        let pa = positions(&rule.a);
        let pb = positions(&rule.b);
        for &i in &pa {
            for &j in &pb {
                if i != j && i.abs_diff(j) <= rule.window {
                    rule_spans.push((i.min(j), i.max(j) + 1));
                }
            }
        }
    }
    // Co-occurrence windows can overlap; merge them so the per-reason
    // spans stay disjoint.
    rule_spans.sort_unstable();
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (s, e) in rule_spans {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    spans.extend(
        merged
            .into_iter()
            .map(|(start, end)| FlagSpan { start, end, reason: FlagReason::AssociationRule }),
    );
    ScreenReport::from_spans(spans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DocCategory;
    use crate::topics::fit_lda;
    use approx::assert_abs_diff_eq;

    fn doc(tokens: &[&str]) -> TokenDoc {
        TokenDoc::new(
            "candidate",
            tokens.iter().map(|s| s.to_string()).collect(),
            DocCategory::Prose,
        )
    }

    fn corpus_of(texts: &[&str]) -> Corpus {
        let docs = texts
            .iter()
            .enumerate()
            .map(|(i, t)| {
                TokenDoc::new(
                    format!("doc{i:03}"),
                    t.split_whitespace().map(str::to_owned).collect(),
                    DocCategory::Prose,
                )
            })
            .collect();
        Corpus::from_docs(docs)
    }

    /// Model with two topics at prevalence 0.75 / 0.25 whose top words are
    /// `uone` and `utwo`.
    fn two_topic_model() -> TopicModel {
        let vocab: Vec<String> = vec!["uone".into(), "utwo".into()];
        let vocab_index = vocab.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
        TopicModel {
            k: 2,
            alpha: 0.1,
            beta: 0.01,
            vocab,
            vocab_index,
            word_topic: vec![vec![3, 0], vec![0, 1]],
            topic_totals: vec![3, 1],
        }
    }

    #[test]
    fn hand_computed_two_topic_score() {
        // Topic maxima 0.8 and 0.4 at prevalence 0.75/0.25 -> 0.7.
        let model = two_topic_model();
        let store = VectorStore::from_entries(vec![
            ("uone".into(), vec![1.0, 0.0, 0.0]),
            ("utwo".into(), vec![0.0, 1.0, 0.0]),
            ("wa".into(), vec![0.8, 0.0, 0.6]),
            ("wb".into(), vec![0.0, 0.4, (1.0f64 - 0.16).sqrt()]),
        ])
        .unwrap();
        let cfg = TsmConfig { m: 1, ..Default::default() };
        let file = doc(&["wa", "wb"]);
        let score = tsm_score(&file, &model, &store, &cfg).unwrap();
        assert_abs_diff_eq!(score, 0.7, epsilon = 1e-9);
    }

    #[test]
    fn verbatim_topic_words_score_one() {
        let model = two_topic_model();
        let store = VectorStore::from_entries(vec![
            ("uone".into(), vec![1.0, 0.0]),
            ("utwo".into(), vec![0.0, 1.0]),
        ])
        .unwrap();
        let cfg = TsmConfig { m: 1, ..Default::default() };
        let file = doc(&["uone", "utwo"]);
        let score = tsm_score(&file, &model, &store, &cfg).unwrap();
        assert_abs_diff_eq!(score, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn orthogonal_vocabulary_scores_zero() {
        let model = two_topic_model();
        let store = VectorStore::from_entries(vec![
            ("uone".into(), vec![1.0, 0.0, 0.0]),
            ("utwo".into(), vec![0.0, 1.0, 0.0]),
            ("faraway".into(), vec![0.0, 0.0, 1.0]),
        ])
        .unwrap();
        let cfg = TsmConfig { m: 1, ..Default::default() };
        let score = tsm_score(&doc(&["faraway"]), &model, &store, &cfg).unwrap();
        assert_abs_diff_eq!(score, 0.0);
    }

    #[test]
    fn coverage_gate_rejects_sparse_files() {
        let model = two_topic_model();
        let store =
            VectorStore::from_entries(vec![("uone".into(), vec![1.0, 0.0])]).unwrap();
        let cfg = TsmConfig { require_coverage: 0.9, ..Default::default() };
        let file = doc(&["uone", "missing", "alsomissing"]);
        assert!(matches!(
            tsm_score(&file, &model, &store, &cfg),
            Err(EnticementError::InsufficientCoverage { .. })
        ));
    }

    #[test]
    fn adding_an_uncovered_topic_word_never_decreases_score() {
        let model = two_topic_model();
        let store = VectorStore::from_entries(vec![
            ("uone".into(), vec![1.0, 0.0, 0.0]),
            ("utwo".into(), vec![0.0, 1.0, 0.0]),
            ("wa".into(), vec![0.8, 0.0, 0.6]),
        ])
        .unwrap();
        let cfg = TsmConfig { m: 1, require_coverage: 0.0, ..Default::default() };
        let before = tsm_score(&doc(&["wa"]), &model, &store, &cfg).unwrap();
        let after = tsm_score(&doc(&["wa", "utwo"]), &model, &store, &cfg).unwrap();
        assert!(after >= before, "{after} < {before}");
    }

    #[test]
    fn overlap_score_set_arithmetic() {
        let context = corpus_of(&["alpha gamma delta"]);
        assert_abs_diff_eq!(
            word_overlap_score(&doc(&["alpha", "gamma"]), &context),
            1.0
        );
        assert_abs_diff_eq!(
            word_overlap_score(&doc(&["zeta", "theta"]), &context),
            0.0
        );
        assert_abs_diff_eq!(
            word_overlap_score(&doc(&["alpha", "beta", "gamma"]), &context),
            2.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn planted_span_detected_exactly() {
        let planted: Vec<&str> = "one two three four five six seven eight nine ten eleven twelve"
            .split(' ')
            .collect();
        let mut training_tokens = vec!["t1", "t2", "t3"];
        training_tokens.extend(&planted);
        training_tokens.extend(["t4", "t5"]);
        let training = Corpus::from_docs(vec![TokenDoc::new(
            "train",
            training_tokens.iter().map(|s| s.to_string()).collect(),
            DocCategory::Prose,
        )]);
        let mut cand_tokens = vec!["c1", "c2"];
        cand_tokens.extend(&planted);
        cand_tokens.extend(["c3"]);
        let candidate = doc(&cand_tokens);
        let report = memorization_screen(&candidate, &training, 8).unwrap();
        assert!(!report.pass);
        assert_eq!(report.flagged_spans.len(), 1);
        let span = report.flagged_spans[0];
        assert_eq!((span.start, span.end), (2, 2 + planted.len()));
        assert_eq!(span.reason, FlagReason::Memorized);
    }

    #[test]
    fn runs_below_threshold_pass() {
        let training = corpus_of(&["a b c d e f g h i j"]);
        // Shares a 7-token run only; n = 8 must pass.
        let candidate = doc(&["a", "b", "c", "d", "e", "f", "g", "x", "y", "z"]);
        let report = memorization_screen(&candidate, &training, 8).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn n_larger_than_candidate_passes() {
        let training = corpus_of(&["a b c"]);
        let report = memorization_screen(&doc(&["a", "b", "c"]), &training, 8).unwrap();
        assert!(report.pass);
    }

    /// Brute-force oracle: mark every position covered by a >= n-token
    /// candidate substring occurring contiguously in a training doc.
    fn brute_force_screen(candidate: &TokenDoc, training: &Corpus, n: usize) -> Vec<bool> {
        let cand = &candidate.tokens;
        let mut covered = vec![false; cand.len()];
        for i in 0..cand.len() {
            for j in i + n..=cand.len() {
                let window = &cand[i..j];
                let occurs = training.docs.iter().any(|d| {
                    d.tokens.len() >= window.len()
                        && d.tokens.windows(window.len()).any(|w| w == window)
                });
                if occurs {
                    for c in covered.iter_mut().take(j).skip(i) {
                        *c = true;
                    }
                }
            }
        }
        covered
    }

    #[test]
    fn screen_agrees_with_brute_force_on_random_corpora() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(99);
        for _ in 0..20 {
            let vocab = ["v0", "v1", "v2", "v3"];
            let gen = |rng: &mut rand_chacha::ChaCha8Rng, len: usize| -> Vec<String> {
                (0..len).map(|_| vocab[rng.gen_range(0..vocab.len())].to_string()).collect()
            };
            let training = Corpus::from_docs(vec![
                TokenDoc::new("a", gen(&mut rng, 120), DocCategory::Prose),
                TokenDoc::new("b", gen(&mut rng, 120), DocCategory::Prose),
            ]);
            let candidate = TokenDoc::new("c", gen(&mut rng, 80), DocCategory::Prose);
            let report = memorization_screen(&candidate, &training, 4).unwrap();
            let mut covered = vec![false; candidate.tokens.len()];
            for span in &report.flagged_spans {
                for c in covered.iter_mut().take(span.end).skip(span.start) {
                    *c = true;
                }
            }
            assert_eq!(covered, brute_force_screen(&candidate, &training, 4));
        }
    }

    #[test]
    fn sensitive_terms_and_rules() {
        let terms: HashSet<String> = ["secret".to_string()].into_iter().collect();
        let candidate =
            doc(&["the", "secret", "account", "x", "y", "password", "tail"]);
        let rules = vec![AssociationRule {
            a: "account".into(),
            b: "password".into(),
            window: 5,
        }];
        let report = sensitivity_screen(&candidate, &terms, &rules);
        assert!(!report.pass);
        let reasons: Vec<FlagReason> = report.flagged_spans.iter().map(|s| s.reason).collect();
        assert!(reasons.contains(&FlagReason::SensitiveTerm));
        assert!(reasons.contains(&FlagReason::AssociationRule));

        // Same rule but too far apart.
        let spread = doc(&[
            "account", "a", "b", "c", "d", "e", "f", "g", "h", "password",
        ]);
        let report = sensitivity_screen(&spread, &HashSet::new(), &rules);
        assert!(report.pass);
    }

    #[test]
    fn screen_spans_are_ordered_and_disjoint_per_reason() {
        let terms: HashSet<String> =
            ["k1".to_string(), "k2".to_string()].into_iter().collect();
        let rules = vec![
            AssociationRule { a: "p".into(), b: "q".into(), window: 4 },
            AssociationRule { a: "q".into(), b: "r".into(), window: 4 },
        ];
        let candidate = doc(&["k1", "p", "q", "r", "k2", "p", "x", "q"]);
        let report = sensitivity_screen(&candidate, &terms, &rules);
        let mut last: Option<&FlagSpan> = None;
        for span in &report.flagged_spans {
            if let Some(prev) = last {
                assert!(prev.start <= span.start);
                if prev.reason == span.reason {
                    assert!(prev.end <= span.start, "overlap within reason");
                }
            }
            last = Some(span);
        }
    }

    #[test]
    fn tsm_score_stays_in_unit_interval_against_fitted_model() {
        let context = corpus_of(&[
            "network router firewall switch gateway",
            "database index query table join",
        ]);
        let model = fit_lda(&context, 2, 0.1, 0.01, 100, 21).unwrap();
        let store = VectorStore::from_entries(vec![
            ("network".into(), vec![0.9, 0.1]),
            ("router".into(), vec![0.8, 0.2]),
            ("database".into(), vec![0.1, 0.9]),
            ("query".into(), vec![0.2, 0.8]),
            ("firewall".into(), vec![0.7, 0.3]),
            ("table".into(), vec![0.3, 0.7]),
            ("switch".into(), vec![0.75, 0.2]),
            ("gateway".into(), vec![0.85, 0.15]),
            ("index".into(), vec![0.25, 0.75]),
            ("join".into(), vec![0.15, 0.85]),
        ])
        .unwrap();
        let cfg = TsmConfig { m: 3, require_coverage: 0.0, ..Default::default() };
        for tokens in [
            vec!["network", "router"],
            vec!["database", "query", "join"],
            vec!["network", "database", "table", "gateway"],
        ] {
            let s = tsm_score(&doc(&tokens), &model, &store, &cfg).unwrap();
            assert!((0.0..=1.0).contains(&s), "score {s} out of range");
        }
    }
}
