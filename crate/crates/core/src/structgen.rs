//! Fake repository structure: fit, sample, materialize.
//!
//! A decoy repository needs a believable folder layout, file names and a
//! mix of file content before anyone reads a single line. This module
//! fits [`TreeStats`] from real repository roots (per-depth branching
//! histograms, extension mix, per-extension size and filename models),
//! samples new [`TreeSpec`] trees from them, and materializes a tree to
//! disk with content generated per file through the extension-tagged
//! n-gram model, so a `.py` file gets python-ish tokens and a `.md` file
//! gets markdown.
//!
//! The materialization manifest is a line-delimited record file:
//! `path<TAB>bytes<TAB>seed`, sorted by path.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;
use walkdir::WalkDir;

use crate::chargen::CharModel;
use crate::corpus::{tokenize, DocCategory, IngestOptions};
use crate::dist::Empirical;
use crate::rng::{derive_seed, seeded};
use crate::textgen::{generate_tokens, render_tokens, NgramModel};

#[derive(Debug, Error)]
pub enum StructgenError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no walkable repository root")]
    NoRepositories,
    #[error("tree is invalid: {0}")]
    InvalidTree(String),
    #[error("output directory {0} exists and is not empty")]
    NonEmptyOutDir(String),
    #[error("manifest line {0} is malformed")]
    BadManifestLine(usize),
    #[error("content generation failed: {0}")]
    Textgen(#[from] crate::textgen::TextgenError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Dir,
    File,
}

/// One node of a repository tree. `id` equals the node's index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub kind: NodeKind,
    pub name: String,
    /// Extension class for files (lowercase, no dot; empty for none).
    pub ext: Option<String>,
}

/// A sampled or fitted repository tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeSpec {
    pub nodes: Vec<TreeNode>,
    pub root: usize,
}

impl TreeSpec {
    /// Check all structural invariants: ids are indices, exactly one
    /// root, parent links form a tree with every node reachable, sibling
    /// names unique, and only directories have children.
    pub fn validate(&self) -> Result<(), StructgenError> {
        let bad = |m: String| Err(StructgenError::InvalidTree(m));
        if self.nodes.is_empty() {
            return bad("empty tree".into());
        }
        let roots: Vec<usize> =
            self.nodes.iter().filter(|n| n.parent.is_none()).map(|n| n.id).collect();
        if roots != [self.root] {
            return bad(format!("expected single root {}, found {roots:?}", self.root));
        }
        if self.nodes[self.root].kind != NodeKind::Dir {
            return bad("root must be a directory".into());
        }
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                return bad(format!("node {i} carries id {}", node.id));
            }
            if let Some(p) = node.parent {
                let Some(parent) = self.nodes.get(p) else {
                    return bad(format!("node {i} has dangling parent {p}"));
                };
                if parent.kind != NodeKind::Dir {
                    return bad(format!("file node {p} has children"));
                }
                children[p].push(i);
            }
        }
        // Reachability from the root doubles as the cycle check.
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        seen[self.root] = true;
        while let Some(u) = stack.pop() {
            for &c in &children[u] {
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("unreachable nodes (cycle or orphan)".into());
        }
        for (p, kids) in children.iter().enumerate() {
            let mut names = HashSet::new();
            for &c in kids {
                if !names.insert(self.nodes[c].name.as_str()) {
                    return bad(format!(
                        "duplicate sibling name {:?} under node {p}",
                        self.nodes[c].name
                    ));
                }
            }
        }
        Ok(())
    }

    /// Root-relative path of a node (the root itself maps to "").
    pub fn path_of(&self, id: usize) -> PathBuf {
        let mut parts = Vec::new();
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            parts.push(self.nodes[cur].name.clone());
            cur = p;
        }
        parts.reverse();
        parts.iter().collect()
    }

    pub fn files(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::File)
    }

    pub fn depth_of(&self, id: usize) -> usize {
        let mut d = 0;
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            d += 1;
            cur = p;
        }
        d
    }
}

/// Extension class key used for tagging content generation and stats.
pub fn ext_class(ext: Option<&str>) -> String {
    match ext {
        Some(e) if !e.is_empty() => e.to_ascii_lowercase(),
        _ => "noext".to_string(),
    }
}

/// Category used to render generated tokens of an extension class.
pub fn render_category(ext: &str) -> DocCategory {
    IngestOptions::default().category_of_ext(ext).unwrap_or(DocCategory::Prose)
}

/// Empirical repository statistics.
#[derive(Debug, Clone)]
pub struct TreeStats {
    pub depth_hist: Empirical<usize>,
    subdirs_at_depth: BTreeMap<usize, Empirical<usize>>,
    files_at_depth: BTreeMap<usize, Empirical<usize>>,
    pub ext_dist: Empirical<String>,
    size_by_ext: BTreeMap<String, Empirical<usize>>,
    size_fallback: Empirical<usize>,
    dirname_model: CharModel,
    stem_models: BTreeMap<String, CharModel>,
    stem_fallback: CharModel,
    max_fitted_depth: usize,
}

impl TreeStats {
    /// Branching distribution (subdirectory count) observed at a depth;
    /// depths beyond the deepest fitted one reuse the deepest.
    pub fn subdirs_dist(&self, depth: usize) -> Option<&Empirical<usize>> {
        let d = depth.min(self.max_fitted_depth);
        self.subdirs_at_depth.get(&d).or_else(|| self.subdirs_at_depth.get(&self.max_fitted_depth))
    }

    pub fn files_dist(&self, depth: usize) -> Option<&Empirical<usize>> {
        let d = depth.min(self.max_fitted_depth);
        self.files_at_depth.get(&d).or_else(|| self.files_at_depth.get(&self.max_fitted_depth))
    }

    pub fn size_dist(&self, ext: &str) -> &Empirical<usize> {
        match self.size_by_ext.get(ext) {
            Some(d) if !d.is_empty() => d,
            _ => &self.size_fallback,
        }
    }
}

/// Walk repository roots and collect tree statistics.
pub fn fit_tree_stats(repo_roots: &[PathBuf]) -> Result<TreeStats, StructgenError> {
    let mut depth_hist = Empirical::new();
    let mut subdirs_at_depth: BTreeMap<usize, Empirical<usize>> = BTreeMap::new();
    let mut files_at_depth: BTreeMap<usize, Empirical<usize>> = BTreeMap::new();
    let mut ext_dist = Empirical::new();
    let mut size_by_ext: BTreeMap<String, Empirical<usize>> = BTreeMap::new();
    let mut size_fallback = Empirical::new();
    let mut dirname_model = CharModel::new(3);
    let mut stem_models: BTreeMap<String, CharModel> = BTreeMap::new();
    let mut stem_fallback = CharModel::new(3);
    let mut max_depth = 0usize;
    let mut walked_any = false;

    for root in repo_roots {
        if !root.is_dir() {
            continue;
        }
        walked_any = true;
        let mut dir_children: BTreeMap<PathBuf, (usize, usize, usize)> = BTreeMap::new();
        dir_children.insert(root.clone(), (0, 0, 0));
        for entry in WalkDir::new(root).sort_by_file_name().into_iter().flatten() {
            let depth = entry.depth();
            if depth == 0 {
                continue;
            }
            depth_hist.add(depth);
            max_depth = max_depth.max(depth);
            let parent = entry.path().parent().unwrap_or(root).to_path_buf();
            let slot = dir_children.entry(parent).or_insert((depth - 1, 0, 0));
            slot.0 = depth - 1;
            if entry.file_type().is_dir() {
                slot.1 += 1;
                dir_children.entry(entry.path().to_path_buf()).or_insert((depth, 0, 0));
                if let Some(name) = entry.file_name().to_str() {
                    dirname_model.train(name);
                }
            } else if entry.file_type().is_file() {
                slot.2 += 1;
                let ext = ext_class(
                    entry.path().extension().and_then(|e| e.to_str()),
                );
                ext_dist.add(ext.clone());
                let stem = entry
                    .path()
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or_default();
                if !stem.is_empty() {
                    stem_models.entry(ext.clone()).or_insert_with(|| CharModel::new(3)).train(stem);
                    stem_fallback.train(stem);
                }
                if let Some(tokens) = tokenize_file(entry.path(), &ext) {
                    let n = tokens.max(1);
                    size_by_ext.entry(ext).or_default().add(n);
                    size_fallback.add(n);
                }
            }
        }
        for (_, (depth, dirs, files)) in dir_children {
            subdirs_at_depth.entry(depth).or_default().add(dirs);
            files_at_depth.entry(depth).or_default().add(files);
        }
    }
    if !walked_any {
        return Err(StructgenError::NoRepositories);
    }
    Ok(TreeStats {
        depth_hist,
        subdirs_at_depth,
        files_at_depth,
        ext_dist,
        size_by_ext,
        size_fallback,
        dirname_model,
        stem_models,
        stem_fallback,
        max_fitted_depth: max_depth.saturating_sub(1),
    })
}

fn tokenize_file(path: &Path, ext: &str) -> Option<usize> {
    const SIZE_CAP: u64 = 2 * 1024 * 1024;
    let meta = std::fs::metadata(path).ok()?;
    if meta.len() > SIZE_CAP {
        return None;
    }
    let bytes = std::fs::read(path).ok()?;
    let text = String::from_utf8(bytes).ok()?;
    if text.contains('\0') {
        return None;
    }
    Some(tokenize(&text, render_category(ext)).len())
}

/// Sample a repository tree. Directory fanout and file counts come from
/// the per-depth histograms, clamped by `max_depth` and a global
/// `max_nodes` budget (the root counts toward it), so sampling always
/// terminates. Sibling name collisions retry up to 10 times and then get
/// a numeric suffix.
pub fn sample_tree(
    stats: &TreeStats,
    max_depth: usize,
    max_nodes: usize,
    rng_seed: u64,
) -> TreeSpec {
    assert!(max_nodes >= 1, "max_nodes must be >= 1");
    let mut rng = seeded(rng_seed);
    let mut nodes = Vec::new();
    let root_name = nonempty_or(stats.dirname_model.generate(&mut rng, 64), "repo");
    nodes.push(TreeNode { id: 0, parent: None, kind: NodeKind::Dir, name: root_name, ext: None });
    let mut budget = max_nodes - 1;
    expand_dir(stats, &mut nodes, 0, 0, max_depth, &mut budget, &mut rng);
    TreeSpec { nodes, root: 0 }
}

fn expand_dir(
    stats: &TreeStats,
    nodes: &mut Vec<TreeNode>,
    dir: usize,
    depth: usize,
    max_depth: usize,
    budget: &mut usize,
    rng: &mut ChaCha8Rng,
) {
    let mut sibling_names: HashSet<String> = HashSet::new();

    let n_files = match stats.files_dist(depth) {
        Some(d) if !d.is_empty() => d.sample(rng),
        _ => 0,
    }
    .min(*budget);
    for _ in 0..n_files {
        let ext = if stats.ext_dist.is_empty() {
            "txt".to_string()
        } else {
            stats.ext_dist.sample(rng)
        };
        let name = unique_name(sample_file_name(stats, &ext, rng), &mut sibling_names);
        let id = nodes.len();
        nodes.push(TreeNode {
            id,
            parent: Some(dir),
            kind: NodeKind::File,
            name,
            ext: Some(ext),
        });
        *budget -= 1;
        if *budget == 0 {
            return;
        }
    }

    if depth >= max_depth {
        return;
    }
    let n_dirs = match stats.subdirs_dist(depth) {
        Some(d) if !d.is_empty() => d.sample(rng),
        _ => 0,
    }
    .min(*budget);
    let mut created = Vec::new();
    for _ in 0..n_dirs {
        let base = nonempty_or(stats.dirname_model.generate(rng, 64), "dir");
        let name = unique_name(base, &mut sibling_names);
        let id = nodes.len();
        nodes.push(TreeNode { id, parent: Some(dir), kind: NodeKind::Dir, name, ext: None });
        created.push(id);
        *budget -= 1;
        if *budget == 0 {
            break;
        }
    }
    for id in created {
        if *budget == 0 {
            break;
        }
        expand_dir(stats, nodes, id, depth + 1, max_depth, budget, rng);
    }
}

fn nonempty_or(name: String, fallback: &str) -> String {
    let cleaned: String = name.trim_matches('.').to_string();
    if cleaned.is_empty() {
        fallback.to_string()
    } else {
        cleaned
    }
}

fn unique_name(base: String, taken: &mut HashSet<String>) -> String {
    if taken.insert(base.clone()) {
        return base;
    }
    // Retry by suffixing; the original base already failed so start at 2.
    let (stem, ext) = match base.rsplit_once('.') {
        Some((s, e)) if !s.is_empty() => (s.to_string(), Some(e.to_string())),
        _ => (base.clone(), None),
    };
    let mut k = 2;
    loop {
        let cand = match &ext {
            Some(e) => format!("{stem}{k}.{e}"),
            None => format!("{stem}{k}"),
        };
        if taken.insert(cand.clone()) {
            return cand;
        }
        k += 1;
    }
}

fn sample_file_name(stats: &TreeStats, ext: &str, rng: &mut ChaCha8Rng) -> String {
    let model = match stats.stem_models.get(ext) {
        Some(m) if m.trained_names() > 0 => m,
        _ => &stats.stem_fallback,
    };
    let suffix_len = if ext == "noext" { 0 } else { ext.len() + 1 };
    let stem_cap = 64usize.saturating_sub(suffix_len).max(1);
    let stem = nonempty_or(model.generate(rng, stem_cap), "file");
    if ext == "noext" {
        stem
    } else {
        format!("{stem}.{ext}")
    }
}

/// Sample one file or directory name. Files get a `.ext` suffix; output
/// stays within the portable character set and 64 characters.
pub fn gen_filename(stats: &TreeStats, kind: NodeKind, ext: &str, rng_seed: u64) -> String {
    let mut rng = seeded(rng_seed);
    match kind {
        NodeKind::Dir => nonempty_or(stats.dirname_model.generate(&mut rng, 64), "dir"),
        NodeKind::File => sample_file_name(stats, ext, &mut rng),
    }
}

/// One materialized file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub seed: u64,
    /// Generator tag used for the content (not serialized; equals the
    /// extension class of `path` by construction).
    pub tag: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RepoManifest {
    pub entries: Vec<ManifestEntry>,
}

impl RepoManifest {
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.entries {
            writeln!(w, "{}\t{}\t{}", e.path, e.bytes, e.seed)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<RepoManifest, StructgenError> {
        let mut entries = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| StructgenError::Io {
                path: "<manifest>".into(),
                source: e,
            })?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [path, bytes, seed] = fields[..] else {
                return Err(StructgenError::BadManifestLine(i + 1));
            };
            let tag = ext_class(path.rsplit_once('.').map(|(_, e)| e));
            entries.push(ManifestEntry {
                path: path.to_string(),
                bytes: bytes.parse().map_err(|_| StructgenError::BadManifestLine(i + 1))?,
                seed: seed.parse().map_err(|_| StructgenError::BadManifestLine(i + 1))?,
                tag,
            });
        }
        Ok(RepoManifest { entries })
    }
}

/// Write a sampled tree to disk with generated file content.
///
/// Refuses a non-empty output directory. Each file's content is sampled
/// from the n-gram model under the file's extension-class tag with a
/// length drawn from the fitted size distribution; the per-file seed is
/// derived from the master seed and the file's path, so regenerating with
/// the same seed reproduces the repository byte for byte.
pub fn materialize_repo(
    tree: &TreeSpec,
    content_model: &NgramModel,
    stats: &TreeStats,
    out_dir: &Path,
    rng_seed: u64,
) -> Result<RepoManifest, StructgenError> {
    tree.validate()?;
    if out_dir.exists() {
        let occupied = std::fs::read_dir(out_dir)
            .map_err(|e| StructgenError::Io { path: out_dir.display().to_string(), source: e })?
            .next()
            .is_some();
        if occupied {
            return Err(StructgenError::NonEmptyOutDir(out_dir.display().to_string()));
        }
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| StructgenError::Io { path: out_dir.display().to_string(), source: e })?;

    let mut entries = Vec::new();
    for node in &tree.nodes {
        let rel = tree.path_of(node.id);
        let abs = out_dir.join(&rel);
        match node.kind {
            NodeKind::Dir => {
                std::fs::create_dir_all(&abs).map_err(|e| StructgenError::Io {
                    path: abs.display().to_string(),
                    source: e,
                })?;
            }
            NodeKind::File => {
                let rel_str = rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/");
                let tag = ext_class(node.ext.as_deref());
                let file_seed = derive_seed(rng_seed, &rel_str);
                let mut rng = seeded(file_seed);
                let len = if stats.size_dist(&tag).is_empty() {
                    120
                } else {
                    stats.size_dist(&tag).sample(&mut rng)
                };
                let tokens = generate_tokens(content_model, &tag, &[], len.max(1), rng.gen())?;
                let mut text = render_tokens(&tokens, render_category(&tag));
                text.push('\n');
                std::fs::write(&abs, &text).map_err(|e| StructgenError::Io {
                    path: abs.display().to_string(),
                    source: e,
                })?;
                entries.push(ManifestEntry {
                    path: rel_str,
                    bytes: text.len() as u64,
                    seed: file_seed,
                    tag,
                });
            }
        }
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(RepoManifest { entries })
}
