//! Sectioned key-value run configuration.
//!
//! Format: `[section]` headers followed by `key = value` lines; `#`
//! starts a comment. The `[global]` section holds the seed and shared
//! paths; each subcommand reads its own section for overrides.
//! Unknown sections or keys are rejected so typos cannot silently fall
//! back to defaults. Command-line flags take precedence over the file.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};

/// Keys accepted in `[global]`.
const GLOBAL_KEYS: &[&str] = &["seed", "out_dir", "corpus_dir", "vectors"];

/// Keys accepted per command section.
const SECTION_KEYS: &[(&str, &[&str])] = &[
    ("ingest", &["corpus_dir", "out_dir", "max_bytes"]),
    ("train-text", &["corpus_dir", "out_dir", "order", "tag_by"]),
    ("gen-repo", &["repos", "model", "out_dir", "max_depth", "max_nodes", "seed"]),
    (
        "gen-wiki",
        &[
            "model",
            "vectors",
            "train_graph",
            "train_graph_n",
            "n_pages",
            "sif_a",
            "sif_remove_component",
            "out_dir",
            "seed",
        ],
    ),
    (
        "score-tsm",
        &[
            "corpus_dir",
            "vectors",
            "file",
            "k",
            "iters",
            "alpha",
            "beta",
            "m",
            "require_coverage",
            "seed",
        ],
    ),
    ("screen", &["corpus_dir", "file", "n", "terms", "rules"]),
    ("fit-comms", &["trace", "k", "lambda", "out_dir", "seed"]),
    (
        "sim-comms",
        &["model", "horizon", "max_events", "out_dir", "seed", "email_model", "p_window", "roles"],
    ),
    ("schema-parse", &["ddl", "strict"]),
    ("schema-emit", &["ddl", "out_dir"]),
    ("schema-sample", &["ddl_dir", "out_dir", "seed"]),
    ("schema-populate", &["ddl", "rows", "out_dir", "seed"]),
];

/// Parsed configuration: `sections["global"]["seed"]` etc.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = i + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim();
                if name != "global" && !SECTION_KEYS.iter().any(|(s, _)| *s == name) {
                    bail!("config line {lineno}: unknown section [{name}]");
                }
                sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("config line {lineno}: expected `key = value`");
            };
            let key = key.trim();
            let value = value.trim();
            let Some(section) = &current else {
                bail!("config line {lineno}: key outside any [section]");
            };
            let allowed: &[&str] = if section == "global" {
                GLOBAL_KEYS
            } else {
                SECTION_KEYS
                    .iter()
                    .find(|(s, _)| s == section)
                    .map(|(_, ks)| *ks)
                    .unwrap_or(&[])
            };
            if !allowed.contains(&key) {
                bail!("config line {lineno}: unknown key {key:?} in section [{section}]");
            }
            sections
                .get_mut(section)
                .expect("section inserted on header")
                .insert(key.to_string(), value.to_string());
        }
        Ok(RunConfig { sections })
    }

    pub fn load(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text)
    }

    /// Look up `key` in the command's section, then `[global]`.
    pub fn get(&self, command: &str, key: &str) -> Option<&str> {
        self.sections
            .get(command)
            .and_then(|s| s.get(key))
            .or_else(|| self.sections.get("global").and_then(|s| s.get(key)))
            .map(String::as_str)
    }
}

/// Resolve one string parameter: flag beats config beats default.
pub fn resolve(
    flag: Option<&str>,
    cfg: &RunConfig,
    command: &str,
    key: &str,
    default: Option<&str>,
) -> Result<String> {
    if let Some(v) = flag {
        return Ok(v.to_string());
    }
    if let Some(v) = cfg.get(command, key) {
        return Ok(v.to_string());
    }
    match default {
        Some(v) => Ok(v.to_string()),
        None => bail!("missing required parameter {key:?} (flag or config [{command}])"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_parse_and_resolve_in_order() {
        let cfg = RunConfig::parse(
            "[global]\nseed = 4\nout_dir = /tmp/x\n\n[gen-wiki]\nn_pages = 9\nseed = 7\n",
        )
        .unwrap();
        assert_eq!(cfg.get("gen-wiki", "seed"), Some("7"));
        assert_eq!(cfg.get("gen-wiki", "out_dir"), Some("/tmp/x"));
        assert_eq!(cfg.get("ingest", "seed"), Some("4"));
        assert_eq!(
            resolve(Some("12"), &cfg, "gen-wiki", "seed", None).unwrap(),
            "12",
            "flags beat config"
        );
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        assert!(RunConfig::parse("[global]\nspeed = 4\n").is_err());
        assert!(RunConfig::parse("[warp]\nseed = 4\n").is_err());
        assert!(RunConfig::parse("seed = 4\n").is_err());
    }
}
