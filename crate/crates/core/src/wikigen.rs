//! End-to-end wiki fabrication.
//!
//! [`build_wiki`] chains the pieces into a linked Markdown site:
//!
//! 1. sample an `n`-page link network from fitted graph statistics;
//! 2. generate `n` articles with distinct titles;
//! 3. embed each article's content words;
//! 4. assign articles to nodes greedily so linked pages read similar;
//! 5. insert one Markdown link per edge direction (anchor text = target
//!    title) at the end of a uniformly chosen body paragraph;
//! 6. write pages and a manifest.
//!
//! Every stage draws from a sub-seed derived from the run seed, so a
//! rebuilt site is byte-identical. The manifest is plain text: header
//! lines with the seed and parameters, one `page` line per page
//! (node id, filename, title), one `edge` line per link-network edge.

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::corpus::{content_words, default_stoplist, tokenize, DocCategory, TokenDoc};
use crate::embed::{fit_common_component, sif_embed, EmbedError, SifParams, VectorStore};
use crate::graphgen::{greedy_assign, sample_graph, GraphStats, GraphgenError, LinkGraph};
use crate::rng::{derive_seed, seeded};
use crate::textgen::{gen_article, generate_tokens, is_structural_token, ArticleSpec, NgramModel};

#[derive(Debug, Error)]
pub enum WikigenError {
    #[error("output directory {0} exists and is not empty")]
    NonEmptyOutDir(String),
    #[error("article for page {0} is unembeddable after 5 regenerations")]
    UnembeddableArticle(usize),
    #[error("graph error: {0}")]
    Graph(#[from] GraphgenError),
    #[error("embedding error: {0}")]
    Embed(#[from] EmbedError),
    #[error("text generation error: {0}")]
    Textgen(#[from] crate::textgen::TextgenError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One generated wiki page, placed on a link-network node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WikiPage {
    pub filename: String,
    pub title: String,
    pub markdown: String,
    pub node: usize,
}

/// A generated site: pages indexed by node id plus the link network.
#[derive(Debug, Clone)]
pub struct WikiSite {
    pub pages: Vec<WikiPage>,
    pub graph: LinkGraph,
    pub seed: u64,
    pub sif: SifParams,
}

impl WikiSite {
    pub fn manifest_text(&self) -> String {
        let mut out = String::new();
        out.push_str("wiki-manifest v1\n");
        out.push_str(&format!("seed {}\n", self.seed));
        out.push_str(&format!("n_pages {}\n", self.pages.len()));
        out.push_str(&format!("param sif_a {}\n", self.sif.a));
        out.push_str(&format!("param sif_remove_component {}\n", self.sif.remove_component));
        for page in &self.pages {
            out.push_str(&format!("page {}\t{}\t{}\n", page.node, page.filename, page.title));
        }
        for (u, v) in self.graph.edges() {
            out.push_str(&format!("edge {u} {v}\n"));
        }
        out
    }
}

fn slugify(title: &str) -> String {
    let mut out = String::new();
    let mut dash = true;
    for c in title.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
            dash = false;
        } else if !dash {
            out.push('-');
            dash = true;
        }
    }
    let trimmed = out.trim_matches('-').to_string();
    if trimmed.is_empty() {
        "page".to_string()
    } else {
        trimmed
    }
}

fn gen_title(
    model: &NgramModel,
    taken: &HashSet<String>,
    seed: u64,
) -> String {
    let mut rng = seeded(seed);
    let mut base = String::new();
    for _ in 0..10 {
        let len = rng.gen_range(2..=4);
        let sub_seed = rng.gen::<u64>();
        let tokens =
            generate_tokens(model, "markdown", &[], len + 4, sub_seed).unwrap_or_default();
        let words: Vec<String> = tokens
            .into_iter()
            .filter(|t| !is_structural_token(t))
            .take(len)
            .map(|w| {
                let mut cs = w.chars();
                match cs.next() {
                    Some(c) => c.to_uppercase().collect::<String>() + cs.as_str(),
                    None => String::new(),
                }
            })
            .collect();
        let title = words.join(" ");
        if title.is_empty() {
            continue;
        }
        if !taken.contains(&title) {
            return title;
        }
        base = title;
    }
    if base.is_empty() {
        base = "Untitled".to_string();
    }
    let mut k = 2;
    loop {
        let cand = format!("{base} {k}");
        if !taken.contains(&cand) {
            return cand;
        }
        k += 1;
    }
}

/// Append a link to the end of a uniformly chosen body paragraph. Blocks
/// are blank-line separated; heading and list blocks are not eligible. A
/// page with no body paragraph gets the link as its own block after the
/// title.
fn insert_link(markdown: &str, anchor: &str, target: &str, rng: &mut rand_chacha::ChaCha8Rng) -> String {
    let trailing_newline = markdown.ends_with('\n');
    let mut blocks: Vec<String> =
        markdown.trim_end_matches('\n').split("\n\n").map(str::to_owned).collect();
    let body_idx: Vec<usize> = blocks
        .iter()
        .enumerate()
        .filter(|(_, b)| {
            let t = b.trim_start();
            !t.is_empty() && !t.starts_with('#') && !t.starts_with('-')
        })
        .map(|(i, _)| i)
        .collect();
    let link = format!("[{anchor}]({target})");
    if body_idx.is_empty() {
        blocks.insert(1.min(blocks.len()), link);
    } else {
        let pick = body_idx[rng.gen_range(0..body_idx.len())];
        let block = &mut blocks[pick];
        block.push(' ');
        block.push_str(&link);
    }
    let mut out = blocks.join("\n\n");
    if trailing_newline {
        out.push('\n');
    }
    out
}

/// Build and write a linked wiki site. See the module docs for the
/// pipeline; the output directory must be absent or empty.
pub fn build_wiki(
    n_pages: usize,
    article_model: &NgramModel,
    store: &VectorStore,
    graph_stats: &GraphStats,
    sif: &SifParams,
    out_dir: &Path,
    rng_seed: u64,
) -> Result<WikiSite, WikigenError> {
    assert!(n_pages >= 1, "n_pages must be >= 1");
    if out_dir.exists() {
        let occupied = std::fs::read_dir(out_dir)
            .map_err(|e| WikigenError::Io { path: out_dir.display().to_string(), source: e })?
            .next()
            .is_some();
        if occupied {
            return Err(WikigenError::NonEmptyOutDir(out_dir.display().to_string()));
        }
    }

    let graph = sample_graph(graph_stats, n_pages, derive_seed(rng_seed, "wiki.graph"));

    // Articles with distinct titles; regenerate unembeddable ones.
    let mut titles: HashSet<String> = HashSet::new();
    let mut articles: Vec<(String, String)> = Vec::with_capacity(n_pages);
    let mut embeddings: Vec<Vec<f64>> = Vec::with_capacity(n_pages);
    for i in 0..n_pages {
        let mut attempt = 0;
        let (title, markdown, embedding) = loop {
            let label = format!("wiki.article.{i}.{attempt}");
            let article_seed = derive_seed(rng_seed, &label);
            let mut rng = seeded(article_seed);
            let title = gen_title(article_model, &titles, rng.gen());
            let spec = ArticleSpec {
                title: title.clone(),
                n_body_sections: rng.gen_range(1..=4),
                subsections: (0..4).map(|_| rng.gen_range(0..=2)).collect(),
                target_len: rng.gen_range(300..=1200),
            };
            let markdown = gen_article(article_model, &spec, rng.gen());
            let tokens = tokenize(&markdown, DocCategory::Markdown);
            let doc = TokenDoc::new("wiki", tokens, DocCategory::Markdown);
            let words = content_words(&doc, default_stoplist());
            match sif_embed(&words, store, &SifParams { a: sif.a, ..Default::default() }) {
                Ok(e) => break (title, markdown, e),
                Err(EmbedError::UnembeddableDocument) if attempt < 5 => attempt += 1,
                Err(EmbedError::UnembeddableDocument) => {
                    return Err(WikigenError::UnembeddableArticle(i));
                }
                Err(e) => return Err(e.into()),
            }
        };
        titles.insert(title.clone());
        articles.push((title, markdown));
        embeddings.push(embedding);
    }

    if sif.remove_component && n_pages >= 2 {
        let component = match &sif.component {
            Some(c) => c.clone(),
            None => fit_common_component(&embeddings)?,
        };
        for e in &mut embeddings {
            let proj: f64 = e.iter().zip(&component).map(|(a, b)| a * b).sum();
            for (x, c) in e.iter_mut().zip(&component) {
                *x -= proj * c;
            }
        }
    }

    let assignment = greedy_assign(&embeddings, &graph)?;

    // Filenames from titles, unique by construction of the slug set.
    let mut slugs: HashSet<String> = HashSet::new();
    let mut pages: Vec<WikiPage> = (0..n_pages)
        .map(|node| {
            let article = assignment[node];
            let (title, markdown) = articles[article].clone();
            let mut slug = slugify(&title);
            if !slugs.insert(slug.clone()) {
                let mut k = 2;
                loop {
                    let cand = format!("{slug}-{k}");
                    if slugs.insert(cand.clone()) {
                        slug = cand;
                        break;
                    }
                    k += 1;
                }
            }
            WikiPage { filename: format!("{slug}.md"), title, markdown, node }
        })
        .collect();

    let mut link_rng = seeded(derive_seed(rng_seed, "wiki.links"));
    for (u, v) in graph.edges().collect::<Vec<_>>() {
        let (anchor_v, file_v) = (pages[v].title.clone(), pages[v].filename.clone());
        pages[u].markdown = insert_link(&pages[u].markdown, &anchor_v, &file_v, &mut link_rng);
        let (anchor_u, file_u) = (pages[u].title.clone(), pages[u].filename.clone());
        pages[v].markdown = insert_link(&pages[v].markdown, &anchor_u, &file_u, &mut link_rng);
    }

    let site = WikiSite { pages, graph, seed: rng_seed, sif: sif.clone() };

    std::fs::create_dir_all(out_dir)
        .map_err(|e| WikigenError::Io { path: out_dir.display().to_string(), source: e })?;
    for page in &site.pages {
        let path = out_dir.join(&page.filename);
        std::fs::write(&path, &page.markdown)
            .map_err(|e| WikigenError::Io { path: path.display().to_string(), source: e })?;
    }
    let manifest_path = out_dir.join("manifest.txt");
    std::fs::write(&manifest_path, site.manifest_text())
        .map_err(|e| WikigenError::Io { path: manifest_path.display().to_string(), source: e })?;
    Ok(site)
}
