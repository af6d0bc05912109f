//! Conditioned token-sequence generation.
//!
//! An [`NgramModel`] holds per-tag n-gram count tables with start/end
//! sentinels plus a fallback table that merges every tag (documents carry
//! exactly one tag, so the fallback equals the union of the per-tag
//! tables). Sampling walks down from the longest matching context to
//! shorter ones, then to the fallback tag, so generation works for any
//! tag and any seed context. A strict variant never leaves the requested
//! tag, which keeps role vocabularies separated when that matters.
//!
//! The tag is whatever the trainer says it is: a file-extension class for
//! repository content, a document category for wiki articles, an author
//! role for email bodies.
//!
//! On top of raw token sampling sit two structured generators:
//! [`gen_article`] emits a Markdown page (H1 title, intro, H2 body
//! sections with optional H3 subsections, terminal References list) and
//! [`gen_email_body`] emits a greeting/body/sign-off message conditioned
//! on a role tag and a topic seed.
//!
//! Serialized model format: `ngram v1` header, an `order` line, then one
//! tab-separated line per (tag, context, next, count), sorted, with the
//! context space-joined (empty for the unigram context).

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{Corpus, DocCategory, TokenDoc, H_MARKS, INDENT_MARK, LINK_MARK, NL_MARK};
use crate::rng::seeded;

/// Sequence sentinels. They never collide with corpus tokens because the
/// tokenizers strip `<`, `>` and `/` into separate symbols.
pub const START_TOKEN: &str = "<s>";
pub const END_TOKEN: &str = "</s>";

#[derive(Debug, Error)]
pub enum TextgenError {
    #[error("order must be >= 1")]
    BadOrder,
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("unknown tag {0:?} and the fallback table is empty")]
    UnknownTag(String),
    #[error("max_len must be >= 1")]
    BadMaxLen,
    #[error("model file is malformed: {0}")]
    BadModelFile(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Table {
    /// context (most recent last) -> successor counts.
    counts: HashMap<Vec<String>, BTreeMap<String, u64>>,
}

impl Table {
    fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    fn add(&mut self, ctx: &[String], next: &str, n: u64) {
        *self
            .counts
            .entry(ctx.to_vec())
            .or_default()
            .entry(next.to_string())
            .or_insert(0) += n;
    }

    fn sample<R: Rng>(&self, ctx: &[String], rng: &mut R) -> Option<String> {
        let succ = self.counts.get(ctx)?;
        let total: u64 = succ.values().sum();
        let mut x = rng.gen_range(0..total);
        for (tok, n) in succ {
            if x < *n {
                return Some(tok.clone());
            }
            x -= n;
        }
        unreachable!()
    }
}

/// Per-tag n-gram count tables with a merged fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    order: usize,
    tags: BTreeMap<String, Table>,
    fallback: Table,
}

impl NgramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.tags.keys().map(String::as_str)
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.contains_key(tag)
    }

    /// Successor counts for a context under a tag (tests and diagnostics).
    pub fn successors(&self, tag: &str, ctx: &[String]) -> Option<&BTreeMap<String, u64>> {
        self.tags.get(tag)?.counts.get(ctx)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "ngram v1")?;
        writeln!(w, "order {}", self.order)?;
        let mut lines = Vec::new();
        for (tag, table) in &self.tags {
            for (ctx, succ) in &table.counts {
                for (next, count) in succ {
                    lines.push(format!("{tag}\t{}\t{next}\t{count}", ctx.join(" ")));
                }
            }
        }
        lines.sort();
        for line in lines {
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("model text is UTF-8")
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<NgramModel, TextgenError> {
        let bad = |m: &str| TextgenError::BadModelFile(m.to_string());
        let mut lines = r.lines();
        match lines.next() {
            Some(Ok(h)) if h == "ngram v1" => {}
            _ => return Err(bad("bad header")),
        }
        let order: usize = match lines.next() {
            Some(Ok(l)) => l
                .strip_prefix("order ")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad order line"))?,
            _ => return Err(bad("missing order line")),
        };
        let mut tags: BTreeMap<String, Table> = BTreeMap::new();
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [tag, ctx, next, count] = fields[..] else {
                return Err(bad("expected 4 tab-separated fields"));
            };
            let ctx: Vec<String> = if ctx.is_empty() {
                Vec::new()
            } else {
                ctx.split(' ').map(str::to_owned).collect()
            };
            let count: u64 = count.parse().map_err(|_| bad("bad count"))?;
            tags.entry(tag.to_string()).or_default().add(&ctx, next, count);
        }
        let fallback = merge_tables(tags.values());
        Ok(NgramModel { order, tags, fallback })
    }
}

fn merge_tables<'a>(tables: impl Iterator<Item = &'a Table>) -> Table {
    let mut out = Table::default();
    for table in tables {
        for (ctx, succ) in &table.counts {
            for (next, count) in succ {
                out.add(ctx, next, *count);
            }
        }
    }
    out
}

/// Train per-tag count tables over a corpus. `tag_of` assigns each
/// document to exactly one tag; the fallback table merges all tags.
pub fn train_ngram(
    corpus: &Corpus,
    order: usize,
    tag_of: impl Fn(&TokenDoc) -> String,
) -> Result<NgramModel, TextgenError> {
    if order < 1 {
        return Err(TextgenError::BadOrder);
    }
    if corpus.is_empty() {
        return Err(TextgenError::EmptyCorpus);
    }
    let mut tags: BTreeMap<String, Table> = BTreeMap::new();
    for doc in &corpus.docs {
        let table = tags.entry(tag_of(doc)).or_default();
        let mut seq: Vec<String> = vec![START_TOKEN.to_string(); order - 1];
        seq.extend(doc.tokens.iter().cloned());
        seq.push(END_TOKEN.to_string());
        for i in (order - 1)..seq.len() {
            for ctx_len in 0..order {
                let next = &seq[i];
                table.add(&seq[i - ctx_len..i], next, 1);
            }
        }
    }
    let fallback = merge_tables(tags.values());
    Ok(NgramModel { order, tags, fallback })
}

fn sample_with_backoff(
    model: &NgramModel,
    tag: &str,
    history: &[String],
    allow_fallback: bool,
    rng: &mut ChaCha8Rng,
) -> Option<String> {
    let max_ctx = (model.order - 1).min(history.len());
    let tables: Vec<&Table> = {
        let mut v = Vec::new();
        if let Some(t) = model.tags.get(tag) {
            v.push(t);
        }
        if allow_fallback {
            v.push(&model.fallback);
        }
        v
    };
    for table in tables {
        for ctx_len in (0..=max_ctx).rev() {
            let ctx = &history[history.len() - ctx_len..];
            if let Some(tok) = table.sample(ctx, rng) {
                return Some(tok);
            }
        }
    }
    None
}

/// Sample a token sequence under `tag`, starting from `seed_tokens`
/// (included in the output), stopping at the end sentinel or `max_len`
/// total tokens. Contexts back off from the highest order to shorter
/// ones, then to the fallback table.
pub fn generate_tokens(
    model: &NgramModel,
    tag: &str,
    seed_tokens: &[String],
    max_len: usize,
    rng_seed: u64,
) -> Result<Vec<String>, TextgenError> {
    generate_tokens_opts(model, tag, seed_tokens, max_len, rng_seed, true)
}

/// [`generate_tokens`] with fallback-tag backoff disabled: every sampled
/// token comes from the requested tag's own tables.
pub fn generate_tokens_strict(
    model: &NgramModel,
    tag: &str,
    seed_tokens: &[String],
    max_len: usize,
    rng_seed: u64,
) -> Result<Vec<String>, TextgenError> {
    generate_tokens_opts(model, tag, seed_tokens, max_len, rng_seed, false)
}

fn generate_tokens_opts(
    model: &NgramModel,
    tag: &str,
    seed_tokens: &[String],
    max_len: usize,
    rng_seed: u64,
    allow_fallback: bool,
) -> Result<Vec<String>, TextgenError> {
    if max_len < 1 {
        return Err(TextgenError::BadMaxLen);
    }
    if !model.tags.contains_key(tag) && (!allow_fallback || model.fallback.is_empty()) {
        return Err(TextgenError::UnknownTag(tag.to_string()));
    }
    let mut rng = seeded(rng_seed);
    let mut history: Vec<String> = vec![START_TOKEN.to_string(); model.order.saturating_sub(1)];
    history.extend(seed_tokens.iter().cloned());
    let mut out: Vec<String> = seed_tokens.to_vec();
    out.truncate(max_len);
    while out.len() < max_len {
        let Some(tok) = sample_with_backoff(model, tag, &history, allow_fallback, &mut rng)
        else {
            break;
        };
        if tok == END_TOKEN {
            break;
        }
        out.push(tok.clone());
        history.push(tok);
    }
    Ok(out)
}

/// Plan for one generated Markdown article.
#[derive(Debug, Clone)]
pub struct ArticleSpec {
    pub title: String,
    pub n_body_sections: usize,
    /// Subsection count per body section; missing entries mean none.
    pub subsections: Vec<usize>,
    /// Approximate total body length in tokens.
    pub target_len: usize,
}

/// True for tokenizer-emitted structural tokens (heading/link/layout marks).
pub fn is_structural_token(tok: &str) -> bool {
    tok == LINK_MARK || tok == NL_MARK || tok == INDENT_MARK || H_MARKS.contains(&tok)
}

fn is_structural(tok: &str) -> bool {
    is_structural_token(tok)
}

fn title_case(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

fn gen_phrase(model: &NgramModel, tag: &str, len: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let sub_seed = rng.gen::<u64>();
    let tokens = generate_tokens(model, tag, &[], len + 4, sub_seed).unwrap_or_default();
    tokens.into_iter().filter(|t| !is_structural(t)).take(len).collect()
}

/// Generate a heading distinct from `prev` (retry up to 10 times, then
/// append a numeric suffix).
fn gen_heading(model: &NgramModel, tag: &str, prev: &str, rng: &mut ChaCha8Rng) -> String {
    let mut base = String::new();
    for _ in 0..10 {
        let len = rng.gen_range(2..=4);
        let words = gen_phrase(model, tag, len, rng);
        let heading: String =
            words.iter().map(|w| title_case(w)).collect::<Vec<_>>().join(" ");
        if heading.is_empty() {
            continue;
        }
        if heading != prev && heading != "References" {
            return heading;
        }
        base = heading;
    }
    if base.is_empty() {
        base = "Section".to_string();
    }
    let mut k = 2;
    loop {
        let cand = format!("{base} {k}");
        if cand != prev {
            return cand;
        }
        k += 1;
    }
}

fn render_sentences(tokens: &[String]) -> String {
    let words: Vec<&String> = tokens.iter().filter(|t| !is_structural(t)).collect();
    if words.is_empty() {
        return String::new();
    }
    let mut out = String::new();
    let mut sentence_len = 0usize;
    let mut cadence = 9usize;
    for (i, word) in words.iter().enumerate() {
        if sentence_len == 0 {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&title_case(word));
        } else {
            out.push(' ');
            out.push_str(word);
        }
        sentence_len += 1;
        // Cheap deterministic cadence so sentence lengths vary without an RNG.
        if sentence_len >= cadence || i == words.len() - 1 {
            out.push('.');
            cadence = 7 + (word.len() * 5 + i) % 11;
            sentence_len = 0;
        }
    }
    out
}

/// Generate a structured Markdown article: H1 title, intro paragraphs,
/// `n_body_sections` H2 sections with optional H3 subsections, and a
/// terminal References section with at least one list item. Adjacent
/// sections never share a heading.
pub fn gen_article(model: &NgramModel, spec: &ArticleSpec, rng_seed: u64) -> String {
    let tag = "markdown";
    let mut rng = seeded(rng_seed);
    let blocks = spec.n_body_sections + spec.subsections.iter().sum::<usize>() + 1;
    let para_len = (spec.target_len / blocks.max(1)).clamp(20, 400);

    let mut out = String::new();
    out.push_str(&format!("# {}\n", spec.title));
    let intro_paras = rng.gen_range(1..=2);
    for _ in 0..intro_paras {
        let sub_seed = rng.gen::<u64>();
        let tokens =
            generate_tokens(model, tag, &[], para_len, sub_seed).unwrap_or_default();
        let text = render_sentences(&tokens);
        if !text.is_empty() {
            out.push('\n');
            out.push_str(&text);
            out.push('\n');
        }
    }

    let mut prev_heading = String::new();
    for s in 0..spec.n_body_sections {
        let heading = gen_heading(model, tag, &prev_heading, &mut rng);
        out.push_str(&format!("\n## {heading}\n"));
        prev_heading = heading;
        let sub_seed = rng.gen::<u64>();
        let tokens =
            generate_tokens(model, tag, &[], para_len, sub_seed).unwrap_or_default();
        let text = render_sentences(&tokens);
        if !text.is_empty() {
            out.push('\n');
            out.push_str(&text);
            out.push('\n');
        }
        for _ in 0..spec.subsections.get(s).copied().unwrap_or(0) {
            let heading = gen_heading(model, tag, &prev_heading, &mut rng);
            out.push_str(&format!("\n### {heading}\n"));
            prev_heading = heading;
            let sub_seed = rng.gen::<u64>();
            let tokens =
                generate_tokens(model, tag, &[], para_len, sub_seed).unwrap_or_default();
            let text = render_sentences(&tokens);
            if !text.is_empty() {
                out.push('\n');
                out.push_str(&text);
                out.push('\n');
            }
        }
    }

    out.push_str("\n## References\n\n");
    let n_refs = rng.gen_range(1..=4);
    for _ in 0..n_refs {
        let words = gen_phrase(model, tag, rng.gen_range(3..=6).max(1), &mut rng);
        let phrase = if words.is_empty() {
            "Internal Memo".to_string()
        } else {
            words.iter().map(|w| title_case(w)).collect::<Vec<_>>().join(" ")
        };
        let year = rng.gen_range(1994..=2023);
        out.push_str(&format!("- {phrase} ({year}).\n"));
    }
    out
}

fn role_templates(role: &str) -> (&'static [&'static str], &'static [&'static str]) {
    match role {
        "manager" => (
            &["Hi team,", "Team,", "Morning all,"],
            &["Thanks,", "Best,", "Regards,"],
        ),
        "engineer" => (
            &["Hi,", "Hey,", "Hi all,"],
            &["Cheers,", "Thanks,", "- sent from my terminal"],
        ),
        "hr" => (
            &["Dear colleagues,", "Hello everyone,"],
            &["Kind regards,", "Warm regards,"],
        ),
        _ => (&["Hi,", "Hello,", "Hi all,"], &["Thanks,", "Regards,", "Cheers,"]),
    }
}

/// Template words that may appear in an email body regardless of the role
/// vocabulary (greetings and sign-offs).
pub fn email_template_words() -> Vec<String> {
    let mut words = Vec::new();
    for role in ["manager", "engineer", "hr", ""] {
        let (greet, sign) = role_templates(role);
        for line in greet.iter().chain(sign.iter()) {
            words.extend(
                line.split_whitespace()
                    .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()),
            );
        }
    }
    words.retain(|w| !w.is_empty());
    words.sort();
    words.dedup();
    words
}

/// Generate an email body: role greeting, a continuation of `topic_seed`
/// under the role tag (the seed conditions context but is not emitted),
/// and a role sign-off. With `strict_role_vocab` the continuation never
/// leaves the role's own tables.
pub fn gen_email_body(
    model: &NgramModel,
    role_tag: &str,
    topic_seed: &[String],
    length: usize,
    rng_seed: u64,
    strict_role_vocab: bool,
) -> Result<String, TextgenError> {
    if length < 1 {
        return Err(TextgenError::BadMaxLen);
    }
    let mut rng = seeded(rng_seed);
    let (greetings, signoffs) = role_templates(role_tag);
    let greeting = greetings[rng.gen_range(0..greetings.len())];
    let signoff = signoffs[rng.gen_range(0..signoffs.len())];
    let sub_seed = rng.gen::<u64>();
    let generated = generate_tokens_opts(
        model,
        role_tag,
        topic_seed,
        topic_seed.len() + length,
        sub_seed,
        !strict_role_vocab,
    )?;
    let continuation = &generated[topic_seed.len().min(generated.len())..];
    let text = render_sentences(continuation);
    let mut body = String::new();
    body.push_str(greeting);
    body.push('\n');
    if !text.is_empty() {
        body.push('\n');
        body.push_str(&text);
        body.push('\n');
    }
    body.push('\n');
    body.push_str(signoff);
    Ok(body)
}

/// Render a token stream back into displayable text under a category's
/// conventions. Inverse enough of the tokenizers for materialized decoy
/// files to look right when opened.
pub fn render_tokens(tokens: &[String], category: DocCategory) -> String {
    match category {
        DocCategory::Prose => render_sentences(tokens),
        DocCategory::Markdown => render_markdown(tokens),
        DocCategory::Code => render_code(tokens),
    }
}

fn render_markdown(tokens: &[String]) -> String {
    let mut out = String::new();
    let mut i = 0;
    let mut para: Vec<String> = Vec::new();
    let flush = |out: &mut String, para: &mut Vec<String>| {
        if !para.is_empty() {
            if !out.is_empty() {
                out.push_str("\n\n");
            }
            out.push_str(&render_sentences(para));
            para.clear();
        }
    };
    while i < tokens.len() {
        let tok = &tokens[i];
        if let Some(level) = H_MARKS.iter().position(|m| m == tok) {
            flush(&mut out, &mut para);
            let mut words = Vec::new();
            i += 1;
            while i < tokens.len() && words.len() < 5 && !is_structural(&tokens[i]) {
                words.push(title_case(&tokens[i]));
                i += 1;
            }
            if words.is_empty() {
                words.push("Notes".to_string());
            }
            if !out.is_empty() {
                out.push_str("\n\n");
            }
            out.push_str(&"#".repeat(level + 1));
            out.push(' ');
            out.push_str(&words.join(" "));
            continue;
        }
        if !is_structural(tok) {
            para.push(tok.clone());
            if para.len() >= 80 {
                flush(&mut out, &mut para);
            }
        }
        i += 1;
    }
    flush(&mut out, &mut para);
    out
}

fn render_code(tokens: &[String]) -> String {
    let mut out = String::new();
    let mut at_line_start = true;
    for tok in tokens {
        if tok == NL_MARK {
            out.push('\n');
            at_line_start = true;
        } else if tok == INDENT_MARK {
            out.push_str("    ");
        } else {
            if !at_line_start && !out.ends_with(' ') && !out.ends_with("    ") {
                out.push(' ');
            }
            out.push_str(tok);
            at_line_start = false;
        }
    }
    out
}
