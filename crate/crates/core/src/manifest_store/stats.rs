//! Dataset statistics computed from published triplets.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::state::ManifestState;
use crate::backends::protocol::Category;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FormatRow {
    pub width: u32,
    pub height: u32,
    pub frames: u32,
    pub fps: u32,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionTable {
    pub count: usize,
    /// One row per distinct published format, sorted by geometry.
    pub formats: Vec<FormatRow>,
    pub categories: BTreeMap<Category, usize>,
    pub global: usize,
    pub local: usize,
}

impl CompositionTable {
    pub fn global_fraction(&self) -> Option<f64> {
        (self.count > 0).then(|| self.global as f64 / self.count as f64)
    }
}

pub fn stats_composition(state: &ManifestState) -> CompositionTable {
    let mut formats: BTreeMap<(u32, u32, u32, u32), usize> = BTreeMap::new();
    let mut categories: BTreeMap<Category, usize> = BTreeMap::new();
    let mut count = 0;
    let mut global = 0;
    for (_, t) in state.published() {
        count += 1;
        let f = t.edited_format;
        *formats
            .entry((f.width, f.height, f.frame_count, f.fps))
            .or_default() += 1;
        *categories.entry(t.category).or_default() += 1;
        global += usize::from(t.category.is_global());
    }
    CompositionTable {
        count,
        formats: formats
            .into_iter()
            .map(|((width, height, frames, fps), count)| FormatRow {
                width,
                height,
                frames,
                fps,
                count,
            })
            .collect(),
        categories,
        global,
        local: count - global,
    }
}

impl fmt::Display for CompositionTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>8} {:>11} {:>7} {:>4}", "count", "resolution", "frames", "fps")?;
        for r in &self.formats {
            writeln!(
                f,
                "{:>8} {:>11} {:>7} {:>4}",
                r.count,
                format!("{}x{}", r.width, r.height),
                r.frames,
                r.fps
            )?;
        }
        let frac = |n: usize| match self.count {
            0 => "-".to_string(),
            c => format!("{:.4}", n as f64 / c as f64),
        };
        writeln!(f, "global {} ({})", self.global, frac(self.global))?;
        writeln!(f, "local  {} ({})", self.local, frac(self.local))?;
        write!(f, "total  {}", self.count)
    }
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Top `top_k` tokens by count, ties broken by the lexicographically smaller token.
pub fn token_counts<'a>(texts: impl IntoIterator<Item = &'a str>, top_k: usize) -> Vec<(String, usize)> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for t in texts {
        for tok in tokenize(t) {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let mut rows: Vec<(String, usize)> = counts.into_iter().collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rows.truncate(top_k);
    rows
}

pub fn stats_tokens(state: &ManifestState, top_k: usize) -> Vec<(String, usize)> {
    token_counts(state.published().map(|(_, t)| t.instruction.as_str()), top_k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_examples() {
        let rows = token_counts(["make it snow", "make it rain"], 10);
        assert_eq!(
            rows,
            vec![
                ("it".to_string(), 2),
                ("make".to_string(), 2),
                ("rain".to_string(), 1),
                ("snow".to_string(), 1)
            ]
        );
        assert_eq!(token_counts(["b a"], 1), vec![("a".to_string(), 1)]);
        assert!(token_counts([], 5).is_empty());
    }

    #[test]
    fn tokenizer_lowercases_and_splits_punctuation() {
        let toks: Vec<String> = tokenize("Make it SNOW, now!it's").collect();
        assert_eq!(toks, ["make", "it", "snow", "now", "it", "s"]);
    }

    #[test]
    fn empty_state_gives_empty_table() {
        let t = stats_composition(&ManifestState::default());
        assert_eq!(t.count, 0);
        assert!(t.formats.is_empty());
        assert_eq!(t.global_fraction(), None);
        assert!(t.to_string().ends_with("total  0"));
    }
}
