//! Character-level Markov models for identifier-like names.
//!
//! Trained on observed file, directory, table or column names and sampled
//! to produce new names with the same look. Output is restricted to a
//! portable character set so generated names are safe to materialize on
//! any filesystem or quote in DDL.

use std::collections::BTreeMap;

use rand::Rng;

/// End-of-name sentinel; NUL can never appear in the portable set.
const END: char = '\0';
/// Start-of-name padding so name-initial characters get their own context.
const START: char = '\u{1}';

/// Characters a generated name may contain.
pub fn is_portable(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-'
}

/// Order-n character Markov model with backoff to shorter contexts.
#[derive(Debug, Clone, Default)]
pub struct CharModel {
    order: usize,
    /// context string (length 0..=order) -> successor counts.
    tables: BTreeMap<String, BTreeMap<char, u64>>,
    trained: u64,
}

impl CharModel {
    pub fn new(order: usize) -> Self {
        Self { order, tables: BTreeMap::new(), trained: 0 }
    }

    /// Number of names this model was trained on.
    pub fn trained_names(&self) -> u64 {
        self.trained
    }

    /// Add one training name. Non-portable characters are dropped; a name
    /// that becomes empty is ignored.
    pub fn train(&mut self, name: &str) {
        let mut chars: Vec<char> = vec![START; self.order];
        chars.extend(name.chars().filter(|&c| is_portable(c)));
        if chars.len() == self.order {
            return;
        }
        self.trained += 1;
        for i in self.order..=chars.len() {
            let next = if i == chars.len() { END } else { chars[i] };
            for ctx_len in 0..=self.order {
                let ctx: String = chars[i - ctx_len..i].iter().collect();
                *self.tables.entry(ctx).or_default().entry(next).or_insert(0) += 1;
            }
        }
    }

    /// Sample one name of at most `max_len` characters. Returns an empty
    /// string when the model is untrained or immediately emits end-of-name;
    /// callers substitute their own fallback stem in that case.
    pub fn generate<R: Rng>(&self, rng: &mut R, max_len: usize) -> String {
        let mut out: Vec<char> = vec![START; self.order];
        while out.len() - self.order < max_len {
            let next = match self.sample_next(&out, rng) {
                Some(c) => c,
                None => break,
            };
            if next == END {
                break;
            }
            out.push(next);
        }
        out.into_iter().filter(|&c| c != START).collect()
    }

    fn sample_next<R: Rng>(&self, produced: &[char], rng: &mut R) -> Option<char> {
        let max_ctx = self.order.min(produced.len());
        for ctx_len in (0..=max_ctx).rev() {
            let ctx: String = produced[produced.len() - ctx_len..].iter().collect();
            if let Some(succ) = self.tables.get(&ctx) {
                let total: u64 = succ.values().sum();
                if total == 0 {
                    continue;
                }
                let mut x = rng.gen_range(0..total);
                for (c, n) in succ {
                    if x < *n {
                        return Some(*c);
                    }
                    x -= n;
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn generated_names_stay_portable() {
        let mut m = CharModel::new(3);
        for name in ["config", "main", "utils", "read-me", "data_set.v2"] {
            m.train(name);
        }
        let mut rng = seeded(5);
        for _ in 0..200 {
            let name = m.generate(&mut rng, 64);
            assert!(name.chars().all(is_portable), "bad name {name:?}");
            assert!(name.len() <= 64);
        }
    }

    #[test]
    fn single_training_name_reproduces_exactly() {
        let mut m = CharModel::new(3);
        m.train("abc");
        let mut rng = seeded(1);
        for _ in 0..20 {
            assert_eq!(m.generate(&mut rng, 64), "abc");
        }
    }

    #[test]
    fn untrained_model_yields_empty() {
        let m = CharModel::new(3);
        let mut rng = seeded(1);
        assert_eq!(m.generate(&mut rng, 64), "");
    }

    #[test]
    fn non_portable_characters_are_dropped() {
        let mut m = CharModel::new(2);
        m.train("a/b:c");
        let mut rng = seeded(9);
        let name = m.generate(&mut rng, 64);
        assert!(name.chars().all(is_portable));
    }
}
