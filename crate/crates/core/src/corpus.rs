//! Corpus ingestion and tokenization.
//!
//! Walks a directory of plain-text, Markdown and source files into an
//! immutable [`Corpus`] of tokenized documents with vocabulary counts.
//! Everything downstream (topic models, n-gram generators, enticement
//! scores) consumes this representation.
//!
//! Tokenization is category-dependent:
//!
//! * `prose` — lowercased Unicode word tokens, punctuation stripped;
//! * `markdown` — prose rules plus structural tokens (`H1_MARK`..`H6_MARK`
//!   for headings, `LINK_MARK` for link anchors; link targets are dropped);
//! * `code` — identifiers and numbers with case preserved, one token per
//!   symbol character, plus `NL_MARK` per newline and `INDENT_MARK` per
//!   four leading spaces (or one tab).
//!
//! The serialized form is a line-delimited record file, one document per
//! line: `id<TAB>category<TAB>token token token ...`. Tabs, newlines and
//! backslashes inside the id are escaped as `\t`, `\n`, `\\`; tokens never
//! contain whitespace by construction.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::OnceLock;

use thiserror::Error;
use walkdir::WalkDir;

/// Structural tokens emitted by the markdown/code tokenizers.
pub const H_MARKS: [&str; 6] =
    ["H1_MARK", "H2_MARK", "H3_MARK", "H4_MARK", "H5_MARK", "H6_MARK"];
pub const LINK_MARK: &str = "LINK_MARK";
pub const NL_MARK: &str = "NL_MARK";
pub const INDENT_MARK: &str = "INDENT_MARK";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no accepted files under {0}: empty corpus")]
    EmptyCorpus(String),
    #[error("corpus record line {0} is malformed: {1}")]
    BadRecord(usize, String),
}

/// Document category, inferred from the file extension at ingest time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DocCategory {
    Prose,
    Code,
    Markdown,
}

impl fmt::Display for DocCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DocCategory::Prose => "prose",
            DocCategory::Code => "code",
            DocCategory::Markdown => "markdown",
        };
        f.write_str(s)
    }
}

impl DocCategory {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "prose" => Some(DocCategory::Prose),
            "code" => Some(DocCategory::Code),
            "markdown" => Some(DocCategory::Markdown),
            _ => None,
        }
    }
}

/// One tokenized document. `id` is the path relative to the ingest root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenDoc {
    pub id: String,
    pub tokens: Vec<String>,
    pub category: DocCategory,
}

impl TokenDoc {
    pub fn new(id: impl Into<String>, tokens: Vec<String>, category: DocCategory) -> Self {
        Self { id: id.into(), tokens, category }
    }
}

/// Immutable tokenized corpus with vocabulary counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub docs: Vec<TokenDoc>,
    pub vocab: BTreeMap<String, u64>,
    pub total_tokens: u64,
}

impl Corpus {
    /// Build from documents, recomputing vocabulary and totals. Documents
    /// are sorted by id; empty documents are rejected by debug assertion.
    pub fn from_docs(mut docs: Vec<TokenDoc>) -> Self {
        docs.sort_by(|a, b| a.id.cmp(&b.id));
        let mut vocab: BTreeMap<String, u64> = BTreeMap::new();
        let mut total = 0u64;
        for doc in &docs {
            debug_assert!(!doc.tokens.is_empty(), "empty TokenDoc {}", doc.id);
            for t in &doc.tokens {
                *vocab.entry(t.clone()).or_insert(0) += 1;
                total += 1;
            }
        }
        Self { docs, vocab, total_tokens: total }
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Serialize as line-delimited records (see module docs for the format).
    pub fn write_records<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for doc in &self.docs {
            writeln!(w, "{}\t{}\t{}", escape_field(&doc.id), doc.category, doc.tokens.join(" "))?;
        }
        Ok(())
    }

    pub fn to_record_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_records(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("records are valid UTF-8")
    }

    /// Parse the record format back into a corpus.
    pub fn read_records<R: BufRead>(r: R) -> Result<Corpus, CorpusError> {
        let mut docs = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| CorpusError::Io { path: "<records>".into(), source: e })?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, '\t');
            let id = parts
                .next()
                .ok_or_else(|| CorpusError::BadRecord(lineno + 1, "missing id".into()))?;
            let cat = parts
                .next()
                .and_then(DocCategory::parse)
                .ok_or_else(|| CorpusError::BadRecord(lineno + 1, "bad category".into()))?;
            let tokens: Vec<String> = parts
                .next()
                .ok_or_else(|| CorpusError::BadRecord(lineno + 1, "missing tokens".into()))?
                .split(' ')
                .filter(|t| !t.is_empty())
                .map(str::to_owned)
                .collect();
            if tokens.is_empty() {
                return Err(CorpusError::BadRecord(lineno + 1, "empty token list".into()));
            }
            docs.push(TokenDoc::new(unescape_field(id), tokens, cat));
        }
        Ok(Corpus::from_docs(docs))
    }
}

fn escape_field(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n")
}

fn unescape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some('\\') => out.push('\\'),
                Some(other) => out.push(other),
                None => {}
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Ingest configuration. Extension-to-category mapping is data, not code,
/// so deployments can widen it without a rebuild.
#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub prose_exts: Vec<String>,
    pub markdown_exts: Vec<String>,
    pub code_exts: Vec<String>,
    /// Files larger than this are skipped (default 2 MB).
    pub max_bytes: u64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Self {
            prose_exts: v(&["txt", "text", "log", "rst"]),
            markdown_exts: v(&["md", "markdown"]),
            code_exts: v(&[
                "rs", "py", "jl", "c", "h", "cpp", "hpp", "js", "ts", "go", "java", "rb", "sh",
                "sql", "toml", "yaml", "yml", "json",
            ]),
            max_bytes: 2 * 1024 * 1024,
        }
    }
}

impl IngestOptions {
    /// Category for a bare extension (no dot), if accepted.
    pub fn category_of_ext(&self, ext: &str) -> Option<DocCategory> {
        let ext = ext.to_ascii_lowercase();
        if self.prose_exts.iter().any(|e| e == &ext) {
            Some(DocCategory::Prose)
        } else if self.markdown_exts.iter().any(|e| e == &ext) {
            Some(DocCategory::Markdown)
        } else if self.code_exts.iter().any(|e| e == &ext) {
            Some(DocCategory::Code)
        } else {
            None
        }
    }
}

/// Why a file was left out of the corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkipReason {
    UnacceptedExtension,
    TooLarge,
    Binary,
    Unreadable,
    EmptyAfterTokenize,
}

#[derive(Debug, Clone)]
pub struct SkipRecord {
    pub path: String,
    pub reason: SkipReason,
}

/// Result of [`ingest_dir`]: the corpus plus a report of skipped files.
#[derive(Debug)]
pub struct Ingested {
    pub corpus: Corpus,
    pub skipped: Vec<SkipRecord>,
}

/// Walk `root` and tokenize every accepted file into a [`Corpus`].
///
/// Document ids are root-relative paths with `/` separators; docs are
/// ordered lexicographically by id, so the result is deterministic for a
/// given directory state. Unreadable, binary, oversized and
/// unknown-extension files are skipped and reported.
pub fn ingest_dir(root: &Path, options: &IngestOptions) -> Result<Ingested, CorpusError> {
    let mut docs = Vec::new();
    let mut skipped = Vec::new();
    let walker = WalkDir::new(root).sort_by_file_name().into_iter();
    for entry in walker {
        let entry = entry.map_err(|e| CorpusError::Io {
            path: root.display().to_string(),
            source: e.into(),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .unwrap_or(entry.path())
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        let ext = entry.path().extension().map(|e| e.to_string_lossy().to_string());
        let category = match ext.as_deref().and_then(|e| options.category_of_ext(e)) {
            Some(c) => c,
            None => {
                skipped.push(SkipRecord { path: rel, reason: SkipReason::UnacceptedExtension });
                continue;
            }
        };
        match entry.metadata() {
            Ok(meta) if meta.len() > options.max_bytes => {
                skipped.push(SkipRecord { path: rel, reason: SkipReason::TooLarge });
                continue;
            }
            Ok(_) => {}
            Err(_) => {
                skipped.push(SkipRecord { path: rel, reason: SkipReason::Unreadable });
                continue;
            }
        }
        let bytes = match std::fs::read(entry.path()) {
            Ok(b) => b,
            Err(_) => {
                skipped.push(SkipRecord { path: rel, reason: SkipReason::Unreadable });
                continue;
            }
        };
        let text = match String::from_utf8(bytes) {
            Ok(t) if !t.contains('\0') => t,
            _ => {
                skipped.push(SkipRecord { path: rel, reason: SkipReason::Binary });
                continue;
            }
        };
        let tokens = tokenize(&text, category);
        if tokens.is_empty() {
            skipped.push(SkipRecord { path: rel, reason: SkipReason::EmptyAfterTokenize });
            continue;
        }
        docs.push(TokenDoc::new(rel, tokens, category));
    }
    if docs.is_empty() {
        return Err(CorpusError::EmptyCorpus(root.display().to_string()));
    }
    Ok(Ingested { corpus: Corpus::from_docs(docs), skipped })
}

/// Tokenize `text` under the rules for `category` (see module docs).
pub fn tokenize(text: &str, category: DocCategory) -> Vec<String> {
    match category {
        DocCategory::Prose => tokenize_prose(text),
        DocCategory::Markdown => tokenize_markdown(text),
        DocCategory::Code => tokenize_code(text),
    }
}

fn tokenize_prose(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '\'' {
            word.extend(c.to_lowercase());
        } else if !word.is_empty() {
            out.push(std::mem::take(&mut word).trim_matches('\'').to_string());
        }
    }
    if !word.is_empty() {
        out.push(word.trim_matches('\'').to_string());
    }
    out.retain(|t| !t.is_empty());
    out
}

fn tokenize_markdown(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim_start();
        let rest = if let Some((level, tail)) = heading_level(trimmed) {
            out.push(H_MARKS[level - 1].to_string());
            tail
        } else {
            trimmed
        };
        // Inline links: keep the anchor text behind a LINK_MARK, drop the target.
        let mut remaining = rest;
        while let Some(open) = remaining.find('[') {
            let before = &remaining[..open];
            out.extend(tokenize_prose(before));
            let after = &remaining[open + 1..];
            if let Some(close) = after.find(']') {
                let anchor = &after[..close];
                let mut past = &after[close + 1..];
                if let Some(stripped) = past.strip_prefix('(') {
                    if let Some(end) = stripped.find(')') {
                        past = &stripped[end + 1..];
                    }
                }
                out.push(LINK_MARK.to_string());
                out.extend(tokenize_prose(anchor));
                remaining = past;
            } else {
                remaining = after;
            }
        }
        out.extend(tokenize_prose(remaining));
    }
    out
}

fn heading_level(line: &str) -> Option<(usize, &str)> {
    let hashes = line.chars().take_while(|&c| c == '#').count();
    if (1..=6).contains(&hashes) {
        let tail = &line[hashes..];
        if tail.is_empty() || tail.starts_with(' ') {
            return Some((hashes, tail.trim_start()));
        }
    }
    None
}

fn tokenize_code(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for line in text.lines() {
        let mut chars = line.chars().peekable();
        let mut spaces = 0usize;
        while let Some(&c) = chars.peek() {
            match c {
                ' ' => {
                    spaces += 1;
                    chars.next();
                }
                '\t' => {
                    spaces += 4;
                    chars.next();
                }
                _ => break,
            }
        }
        for _ in 0..spaces / 4 {
            out.push(INDENT_MARK.to_string());
        }
        let mut word = String::new();
        for c in chars {
            if c.is_alphanumeric() || c == '_' {
                word.push(c);
            } else {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                if !c.is_whitespace() {
                    out.push(c.to_string());
                }
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
        out.push(NL_MARK.to_string());
    }
    out
}

/// The bundled default stoplist (overridable by callers that load their own).
pub fn default_stoplist() -> &'static HashSet<String> {
    static STOPLIST: OnceLock<HashSet<String>> = OnceLock::new();
    STOPLIST.get_or_init(|| {
        include_str!("stoplist.txt")
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect()
    })
}

fn is_structural(token: &str) -> bool {
    token == LINK_MARK
        || token == NL_MARK
        || token == INDENT_MARK
        || H_MARKS.contains(&token)
}

/// Content words of a document: stopwords, structural tokens and tokens
/// with no alphabetic character (numbers, bare punctuation) removed.
/// Order and multiplicity are preserved.
pub fn content_words<'a>(doc: &'a TokenDoc, stoplist: &HashSet<String>) -> Vec<&'a str> {
    doc.tokens
        .iter()
        .map(String::as_str)
        .filter(|t| {
            !is_structural(t)
                && t.chars().any(char::is_alphabetic)
                && !stoplist.contains(&t.to_lowercase())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn prose_tokenize_lowercases_and_strips_punctuation() {
        assert_eq!(tokenize("The cat, the hat.", DocCategory::Prose), ["the", "cat", "the", "hat"]);
    }

    #[test]
    fn empty_input_empty_tokens() {
        assert!(tokenize("", DocCategory::Prose).is_empty());
        assert!(tokenize("", DocCategory::Markdown).is_empty());
        assert!(tokenize("", DocCategory::Code).is_empty());
    }

    #[test]
    fn markdown_headings_become_structural_tokens() {
        assert_eq!(tokenize("## Intro", DocCategory::Markdown), ["H2_MARK", "intro"]);
        assert_eq!(
            tokenize("# Title\nbody text", DocCategory::Markdown),
            ["H1_MARK", "title", "body", "text"]
        );
    }

    #[test]
    fn markdown_links_keep_anchor_drop_target() {
        assert_eq!(
            tokenize("see [User Guide](guide.md) now", DocCategory::Markdown),
            ["see", "LINK_MARK", "user", "guide", "now"]
        );
    }

    #[test]
    fn code_preserves_case_and_indentation() {
        let toks = tokenize("fn main() {\n    let X = 1;\n}", DocCategory::Code);
        assert!(toks.contains(&"main".to_string()));
        assert!(toks.contains(&"X".to_string()));
        assert!(toks.contains(&INDENT_MARK.to_string()));
        assert!(toks.contains(&NL_MARK.to_string()));
        assert!(toks.contains(&"{".to_string()));
    }

    #[test]
    fn content_words_filter_contract() {
        let stop: HashSet<String> = ["the".to_string()].into_iter().collect();
        let doc = TokenDoc::new(
            "d",
            vec!["the".into(), "cat".into(), "sat".into()],
            DocCategory::Prose,
        );
        assert_eq!(content_words(&doc, &stop), ["cat", "sat"]);

        let all_stop = TokenDoc::new("d", vec!["the".into(), "the".into()], DocCategory::Prose);
        assert!(content_words(&all_stop, &stop).is_empty());

        let stop_a: HashSet<String> = ["a".to_string()].into_iter().collect();
        let doc2 = TokenDoc::new(
            "d",
            vec!["a".into(), "42".into(), "router".into()],
            DocCategory::Prose,
        );
        assert_eq!(content_words(&doc2, &stop_a), ["router"]);
    }

    #[test]
    fn ingest_counts_and_orders_docs() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.txt"), "a b a").unwrap();
        fs::write(dir.path().join("a.txt"), "x").unwrap();
        fs::write(dir.path().join("c.txt"), "y z").unwrap();
        let got = ingest_dir(dir.path(), &IngestOptions::default()).unwrap();
        let ids: Vec<&str> = got.corpus.docs.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["a.txt", "b.txt", "c.txt"]);
        assert_eq!(got.corpus.vocab.get("a"), Some(&2));
        assert_eq!(got.corpus.vocab.get("b"), Some(&1));
        assert_eq!(got.corpus.total_tokens, 6);
    }

    #[test]
    fn ingest_skips_binary_and_reports() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("ok.txt"), "hello world").unwrap();
        fs::write(dir.path().join("blob.txt"), [0u8, 159, 146, 150]).unwrap();
        let got = ingest_dir(dir.path(), &IngestOptions::default()).unwrap();
        assert_eq!(got.corpus.docs.len(), 1);
        assert_eq!(got.skipped.len(), 1);
        assert_eq!(got.skipped[0].reason, SkipReason::Binary);
    }

    #[test]
    fn ingest_empty_dir_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            ingest_dir(dir.path(), &IngestOptions::default()),
            Err(CorpusError::EmptyCorpus(_))
        ));
    }

    #[test]
    fn ingest_is_deterministic_across_runs() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("one.md"), "# Top\nalpha beta").unwrap();
        fs::write(dir.path().join("two.txt"), "gamma delta").unwrap();
        let a = ingest_dir(dir.path(), &IngestOptions::default()).unwrap();
        let b = ingest_dir(dir.path(), &IngestOptions::default()).unwrap();
        assert_eq!(a.corpus.to_record_string(), b.corpus.to_record_string());
    }

    #[test]
    fn vocab_matches_brute_force_recount() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("one.txt"), "a b c a b a").unwrap();
        fs::write(dir.path().join("two.txt"), "c d").unwrap();
        let corpus = ingest_dir(dir.path(), &IngestOptions::default()).unwrap().corpus;
        let mut brute: BTreeMap<String, u64> = BTreeMap::new();
        for doc in &corpus.docs {
            for t in &doc.tokens {
                *brute.entry(t.clone()).or_insert(0) += 1;
            }
        }
        assert_eq!(corpus.vocab, brute);
        assert_eq!(corpus.total_tokens, brute.values().sum::<u64>());
    }

    #[test]
    fn records_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("doc.md"), "## Head\nsome [link](x.md) words").unwrap();
        let corpus = ingest_dir(dir.path(), &IngestOptions::default()).unwrap().corpus;
        let text = corpus.to_record_string();
        let back = Corpus::read_records(text.as_bytes()).unwrap();
        assert_eq!(corpus, back);
    }
}
