//! Word vectors and frequency-weighted document embeddings.
//!
//! A [`VectorStore`] maps words to d-dimensional vectors plus unigram
//! probability estimates. Document embeddings are the weighted mean of
//! word vectors with weight `a / (a + p(w))`, optionally followed by
//! removal of the corpus-wide dominant component ([`fit_common_component`]
//! computes it by power iteration).
//!
//! Vector file format: plain text, one line per word — the word followed
//! by `dim` whitespace-separated floats. The dimension is inferred from
//! the first line. An optional sidecar at `<path>.freq` holds `word prob`
//! lines; without it every known word gets the uniform probability.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

use crate::rng::seeded;
use rand::Rng;

/// Default SIF weighting constant.
pub const DEFAULT_SIF_A: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {0}: expected {1} floats, found {2}")]
    DimensionMismatch(usize, usize, usize),
    #[error("line {0}: unparseable float {1:?}")]
    BadFloat(usize, String),
    #[error("vector file is empty")]
    EmptyVectorFile,
    #[error("no document token found in the vector store")]
    UnembeddableDocument,
    #[error("remove_component set but component is missing or not unit norm")]
    BadComponent,
    #[error("embeddings have inconsistent dimensions")]
    MixedDimensions,
    #[error("need at least 2 embeddings to fit a component")]
    TooFewEmbeddings,
    #[error("zero-variance embeddings: component is degenerate")]
    DegenerateComponent,
    #[error("power iteration did not converge")]
    NoConvergence,
}

/// Immutable word-vector store with unigram probabilities.
#[derive(Debug, Clone)]
pub struct VectorStore {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    unit_freq: HashMap<String, f64>,
}

impl VectorStore {
    /// Construct from explicit entries; probabilities default to uniform.
    pub fn from_entries(entries: Vec<(String, Vec<f64>)>) -> Result<Self, EmbedError> {
        if entries.is_empty() {
            return Err(EmbedError::EmptyVectorFile);
        }
        let dim = entries[0].1.len();
        let mut vectors = HashMap::new();
        for (i, (word, vec)) in entries.into_iter().enumerate() {
            if vec.len() != dim {
                return Err(EmbedError::DimensionMismatch(i + 1, dim, vec.len()));
            }
            vectors.insert(word, vec);
        }
        let uniform = 1.0 / vectors.len() as f64;
        let unit_freq = vectors.keys().map(|w| (w.clone(), uniform)).collect();
        Ok(Self { dim, vectors, unit_freq })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vectors.contains_key(word)
    }

    /// Unigram probability estimate for a known word (uniform fallback).
    pub fn freq(&self, word: &str) -> f64 {
        match self.unit_freq.get(word) {
            Some(&p) => p,
            None => 1.0 / self.vectors.len().max(1) as f64,
        }
    }

    /// Replace probabilities for the given words; values are clamped into
    /// (0, 1]. Unknown words are ignored.
    pub fn set_freqs(&mut self, freqs: impl IntoIterator<Item = (String, f64)>) {
        for (word, p) in freqs {
            if self.vectors.contains_key(&word) {
                self.unit_freq.insert(word, p.clamp(f64::MIN_POSITIVE, 1.0));
            }
        }
    }
}

#[derive(Debug)]
pub struct LoadedVectors {
    pub store: VectorStore,
    pub warnings: Vec<String>,
}

/// Load a vector file (and its `.freq` sidecar when present).
///
/// Duplicate words keep the last occurrence and produce a warning. A line
/// whose float count disagrees with the first line is a hard error naming
/// the line number.
pub fn load_vectors(path: &Path) -> Result<LoadedVectors, EmbedError> {
    let file = std::fs::File::open(path)
        .map_err(|e| EmbedError::Io { path: path.display().to_string(), source: e })?;
    let reader = BufReader::new(file);
    let mut dim: Option<usize> = None;
    let mut vectors: HashMap<String, Vec<f64>> = HashMap::new();
    let mut warnings = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line =
            line.map_err(|e| EmbedError::Io { path: path.display().to_string(), source: e })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().expect("non-empty line has a first field").to_string();
        let mut vec = Vec::new();
        for p in parts {
            let v: f64 =
                p.parse().map_err(|_| EmbedError::BadFloat(i + 1, p.to_string()))?;
            vec.push(v);
        }
        match dim {
            None => {
                if vec.is_empty() {
                    return Err(EmbedError::DimensionMismatch(i + 1, 1, 0));
                }
                dim = Some(vec.len());
            }
            Some(d) if vec.len() != d => {
                return Err(EmbedError::DimensionMismatch(i + 1, d, vec.len()));
            }
            Some(_) => {}
        }
        if vectors.insert(word.clone(), vec).is_some() {
            warnings.push(format!("duplicate word {word:?} at line {}; last wins", i + 1));
        }
    }
    let dim = dim.ok_or(EmbedError::EmptyVectorFile)?;
    let uniform = 1.0 / vectors.len() as f64;
    let unit_freq: HashMap<String, f64> =
        vectors.keys().map(|w| (w.clone(), uniform)).collect();
    let mut store = VectorStore { dim, vectors, unit_freq };
    let sidecar = path.with_extension(match path.extension() {
        Some(e) => format!("{}.freq", e.to_string_lossy()),
        None => "freq".to_string(),
    });
    if sidecar.exists() {
        let text = std::fs::read_to_string(&sidecar)
            .map_err(|e| EmbedError::Io { path: sidecar.display().to_string(), source: e })?;
        let mut freqs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().unwrap_or_default().to_string();
            let p: f64 = parts
                .next()
                .ok_or_else(|| EmbedError::BadFloat(i + 1, line.to_string()))?
                .parse()
                .map_err(|_| EmbedError::BadFloat(i + 1, line.to_string()))?;
            freqs.push((word, p));
        }
        store.set_freqs(freqs);
    }
    Ok(LoadedVectors { store, warnings })
}

/// Parameters for the weighted-mean document embedding.
#[derive(Debug, Clone)]
pub struct SifParams {
    /// Weighting constant `a` in `a / (a + p(w))`.
    pub a: f64,
    pub remove_component: bool,
    /// Unit-norm component to remove when `remove_component` is set.
    pub component: Option<Vec<f64>>,
}

impl Default for SifParams {
    fn default() -> Self {
        Self { a: DEFAULT_SIF_A, remove_component: false, component: None }
    }
}

/// Embed a token sequence as the frequency-weighted mean of its word
/// vectors. Tokens missing from the store are skipped; if none are found
/// the document is unembeddable and an error is returned.
pub fn sif_embed<S: AsRef<str>>(
    tokens: &[S],
    store: &VectorStore,
    params: &SifParams,
) -> Result<Vec<f64>, EmbedError> {
    let mut sum = vec![0.0; store.dim()];
    let mut found = 0usize;
    for tok in tokens {
        let word = tok.as_ref();
        if let Some(vec) = store.get(word) {
            let w = params.a / (params.a + store.freq(word));
            for (s, v) in sum.iter_mut().zip(vec) {
                *s += w * v;
            }
            found += 1;
        }
    }
    if found == 0 {
        return Err(EmbedError::UnembeddableDocument);
    }
    for s in &mut sum {
        *s /= found as f64;
    }
    if params.remove_component {
        let c = params.component.as_ref().ok_or(EmbedError::BadComponent)?;
        if c.len() != store.dim() || (norm(c) - 1.0).abs() > 1e-6 {
            return Err(EmbedError::BadComponent);
        }
        let proj = dot(&sum, c);
        for (s, ci) in sum.iter_mut().zip(c) {
            *s -= proj * ci;
        }
    }
    Ok(sum)
}

/// Dominant principal direction of the centered embedding matrix,
/// computed by power iteration to relative tolerance 1e-8. The sign is
/// fixed so the first nonzero coordinate is positive; the result has unit
/// norm.
pub fn fit_common_component(embeddings: &[Vec<f64>]) -> Result<Vec<f64>, EmbedError> {
    if embeddings.len() < 2 {
        return Err(EmbedError::TooFewEmbeddings);
    }
    let dim = embeddings[0].len();
    if embeddings.iter().any(|e| e.len() != dim) {
        return Err(EmbedError::MixedDimensions);
    }
    let n = embeddings.len() as f64;
    let mut mean = vec![0.0; dim];
    for e in embeddings {
        for (m, v) in mean.iter_mut().zip(e) {
            *m += v / n;
        }
    }
    let centered: Vec<Vec<f64>> = embeddings
        .iter()
        .map(|e| e.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    if centered.iter().all(|row| row.iter().all(|v| v.abs() < 1e-12)) {
        return Err(EmbedError::DegenerateComponent);
    }

    // x_{k+1} = Xᵀ X x_k without forming the covariance explicitly. The
    // start vector comes from a fixed-seed stream so the whole routine is
    // deterministic while still avoiding pathological alignments.
    let mut rng = seeded(0x5157_u64);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut v);
    let max_iters = 100_000;
    for _ in 0..max_iters {
        let mut next = vec![0.0; dim];
        for row in &centered {
            let p = dot(row, &v);
            for (nx, r) in next.iter_mut().zip(row) {
                *nx += p * r;
            }
        }
        let len = norm(&next);
        if len < 1e-300 {
            return Err(EmbedError::DegenerateComponent);
        }
        for x in &mut next {
            *x /= len;
        }
        // Power iteration converges up to sign; align before comparing.
        let aligned: f64 = dot(&next, &v);
        let diff: f64 = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b * aligned.signum()).powi(2))
            .sum::<f64>()
            .sqrt();
        v = next;
        if diff < 1e-8 {
            fix_sign(&mut v);
            return Ok(v);
        }
    }
    Err(EmbedError::NoConvergence)
}

fn fix_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(v: &mut [f64]) {
    let len = norm(v);
    if len > 0.0 {
        for x in v.iter_mut() {
            *x /= len;
        }
    }
}

/// Cosine similarity; zero vectors compare as 0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::fs;

    fn toy_store() -> VectorStore {
        let mut store = VectorStore::from_entries(vec![
            ("left".into(), vec![1.0, 0.0]),
            ("up".into(), vec![0.0, 1.0]),
        ])
        .unwrap();
        store.set_freqs([("left".to_string(), 0.5), ("up".to_string(), 0.5)]);
        store
    }

    #[test]
    fn single_word_embedding_is_scaled_vector() {
        let store = toy_store();
        let params = SifParams { a: 0.25, ..Default::default() };
        let v = sif_embed(&["left"], &store, &params).unwrap();
        let w = 0.25 / (0.25 + 0.5);
        assert_abs_diff_eq!(v[0], w, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn two_word_weighted_mean_hand_computed() {
        // a = 0.5, p = 0.5 each: weight = 0.5, mean of (0.5,0) and (0,0.5).
        let store = toy_store();
        let params = SifParams { a: 0.5, ..Default::default() };
        let v = sif_embed(&["left", "up"], &store, &params).unwrap();
        assert_abs_diff_eq!(v[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn component_removal_orthogonalizes() {
        let store = toy_store();
        let c = vec![1.0, 0.0];
        let params = SifParams { a: 0.5, remove_component: true, component: Some(c.clone()) };
        let v = sif_embed(&["left", "up"], &store, &params).unwrap();
        assert!(dot(&v, &c).abs() <= 1e-6);
    }

    #[test]
    fn missing_tokens_are_skipped_and_all_missing_errors() {
        let store = toy_store();
        let params = SifParams::default();
        let v = sif_embed(&["left", "unknown"], &store, &params).unwrap();
        assert!(v[0] > 0.0);
        assert!(matches!(
            sif_embed(&["nope"], &store, &params),
            Err(EmbedError::UnembeddableDocument)
        ));
    }

    #[test]
    fn permutation_and_multiplicity_invariance() {
        let store = toy_store();
        let params = SifParams { a: 0.3, ..Default::default() };
        let a = sif_embed(&["left", "up", "left"], &store, &params).unwrap();
        let b = sif_embed(&["up", "left", "left"], &store, &params).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-15);
        }
    }

    #[test]
    fn load_vectors_infers_dim_and_flags_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        fs::write(&path, "alpha 1.0 2.0 3.0\nbeta 4.0 5.0 6.0\n").unwrap();
        let loaded = load_vectors(&path).unwrap();
        assert_eq!(loaded.store.dim(), 3);
        assert_eq!(loaded.store.len(), 2);
        assert!(loaded.warnings.is_empty());

        fs::write(&path, "alpha 1.0 2.0 3.0\nbeta 4.0 5.0\n").unwrap();
        match load_vectors(&path) {
            Err(EmbedError::DimensionMismatch(line, expected, found)) => {
                assert_eq!((line, expected, found), (2, 3, 2));
            }
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_words_warn_and_last_wins() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        fs::write(&path, "w 1.0\nw 2.0\n").unwrap();
        let loaded = load_vectors(&path).unwrap();
        assert_eq!(loaded.store.len(), 1);
        assert_eq!(loaded.store.get("w").unwrap()[0], 2.0);
        assert_eq!(loaded.warnings.len(), 1);
    }

    #[test]
    fn freq_sidecar_overrides_uniform() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        fs::write(&path, "a 1.0\nb 2.0\n").unwrap();
        fs::write(dir.path().join("vec.txt.freq"), "a 0.9\nb 0.1\n").unwrap();
        let loaded = load_vectors(&path).unwrap();
        assert_abs_diff_eq!(loaded.store.freq("a"), 0.9);
        assert_abs_diff_eq!(loaded.store.freq("b"), 0.1);
    }

    #[test]
    fn component_of_axis_aligned_points() {
        let pts: Vec<Vec<f64>> =
            vec![vec![-2.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![
                2.0, 0.0, 0.0,
            ]];
        let c = fit_common_component(&pts).unwrap();
        assert_abs_diff_eq!(c[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(c[1], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn antipodal_points_sign_fixed() {
        let pts = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let c = fit_common_component(&pts).unwrap();
        assert_abs_diff_eq!(c[0], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn identical_embeddings_are_degenerate() {
        let pts = vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]];
        assert!(matches!(fit_common_component(&pts), Err(EmbedError::DegenerateComponent)));
    }

    #[test]
    fn cosine_zero_vector_is_zero() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
    }
}
