//! Category lexicons and the word-embedding table behind feature extraction.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("{path}: lexicon defines no categories")]
    Empty { path: String },
    #[error("lexicon set invalid: {0}")]
    Invalid(String),
}

/// A word list mapping words to one or more named categories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryLexicon {
    pub name: String,
    /// Category names in first-seen order.
    pub categories: Vec<String>,
    /// word (lowercased) -> sorted category indices
    pub entries: HashMap<String, Vec<usize>>,
}

impl CategoryLexicon {
    pub fn new(name: &str) -> Self {
        CategoryLexicon {
            name: name.to_string(),
            categories: Vec::new(),
            entries: HashMap::new(),
        }
    }

    pub fn category_index(&self, category: &str) -> Option<usize> {
        self.categories
            .iter()
            .position(|c| c.eq_ignore_ascii_case(category))
    }

    pub fn insert(&mut self, word: &str, category: &str) {
        let idx = match self.category_index(category) {
            Some(i) => i,
            None => {
                self.categories.push(category.to_string());
                self.categories.len() - 1
            }
        };
        let cats = self.entries.entry(word.to_lowercase()).or_default();
        if !cats.contains(&idx) {
            cats.push(idx);
            cats.sort_unstable();
        }
    }

    /// Category indices for a word; empty slice when absent.
    pub fn lookup(&self, word: &str) -> &[usize] {
        self.entries.get(word).map_or(&[], |v| v.as_slice())
    }
}

/// Pretrained word vectors, all of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dimension: usize,
    pub entries: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn lookup(&self, word: &str) -> Option<&[f64]> {
        self.entries.get(word).map(|v| v.as_slice())
    }
}

/// All lexical resources needed by the featurizer.
#[derive(Debug, Clone)]
pub struct LexiconSet {
    /// 15 emotion categories (merged from two source lexicons).
    pub emotion: CategoryLexicon,
    /// 4 sentiment lexicons, each {positive, negative}.
    pub sentiment: Vec<CategoryLexicon>,
    /// 10 moral-foundation categories.
    pub morality: CategoryLexicon,
    pub embeddings: EmbeddingTable,
}

pub const EMOTION_CATEGORY_COUNT: usize = 15;
pub const SENTIMENT_LEXICON_COUNT: usize = 4;
pub const MORALITY_CATEGORY_COUNT: usize = 10;

pub const MORALITY_CATEGORIES: [&str; MORALITY_CATEGORY_COUNT] = [
    "care",
    "harm",
    "fairness",
    "cheating",
    "loyalty",
    "betrayal",
    "authority",
    "subversion",
    "sanctity",
    "degradation",
];

impl LexiconSet {
    /// Check the category-count invariants of the full resource set.
    pub fn validate(&self) -> Result<(), LexiconError> {
        if self.emotion.categories.len() != EMOTION_CATEGORY_COUNT {
            return Err(LexiconError::Invalid(format!(
                "emotion lexicon has {} categories, expected {EMOTION_CATEGORY_COUNT}",
                self.emotion.categories.len()
            )));
        }
        if self.sentiment.len() != SENTIMENT_LEXICON_COUNT {
            return Err(LexiconError::Invalid(format!(
                "expected {SENTIMENT_LEXICON_COUNT} sentiment lexicons, got {}",
                self.sentiment.len()
            )));
        }
        for lex in &self.sentiment {
            if lex.categories.len() != 2 {
                return Err(LexiconError::Invalid(format!(
                    "sentiment lexicon {} has {} categories, expected 2 (positive, negative)",
                    lex.name,
                    lex.categories.len()
                )));
            }
        }
        if self.morality.categories.len() != MORALITY_CATEGORY_COUNT {
            return Err(LexiconError::Invalid(format!(
                "morality lexicon has {} categories, expected {MORALITY_CATEGORY_COUNT}",
                self.morality.categories.len()
            )));
        }
        Ok(())
    }
}

/// Load a `word<TAB>category` lexicon file. Lines starting with `#` are
/// comments; categories keep first-seen order.
pub fn load_category_lexicon(path: &Path, name: &str) -> Result<CategoryLexicon, LexiconError> {
    let io_err = |source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut lex = CategoryLexicon::new(name);
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let trimmed = line.trim_end();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (word, category) =
            trimmed
                .split_once('\t')
                .ok_or_else(|| LexiconError::Malformed {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    reason: "expected word<TAB>category".into(),
                })?;
        lex.insert(word.trim(), category.trim());
    }
    if lex.categories.is_empty() {
        return Err(LexiconError::Empty {
            path: path.display().to_string(),
        });
    }
    Ok(lex)
}

/// Merge two emotion lexicons: keep all of `primary`'s categories, then append
/// the secondary categories whose names are new (case-insensitive).
pub fn merge_emotion_lexicons(
    primary: &CategoryLexicon,
    secondary: &CategoryLexicon,
) -> CategoryLexicon {
    let mut merged = primary.clone();
    merged.name = format!("{}+{}", primary.name, secondary.name);
    // append new category names first so ordering never depends on entry order
    for cat in &secondary.categories {
        if merged.category_index(cat).is_none() {
            merged.categories.push(cat.clone());
        }
    }
    for (word, cats) in &secondary.entries {
        for &c in cats {
            merged.insert(word, &secondary.categories[c]);
        }
    }
    merged
}

/// Load `word v1 .. vd` embeddings; d inferred from the first row, words
/// lowercased, first seen wins.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable, LexiconError> {
    let io_err = |source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut dimension = 0usize;
    let mut entries: HashMap<String, Vec<f64>> = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| LexiconError::Malformed {
            path: path.display().to_string(),
            line: lineno + 1,
            reason,
        };
        let mut parts = line.split_whitespace();
        let word = parts.next().ok_or_else(|| malformed("empty line".into()))?;
        let vec: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| malformed(format!("non-numeric component {p:?}")))
            })
            .collect::<Result<_, _>>()?;
        if vec.is_empty() {
            return Err(malformed("row has no vector components".into()));
        }
        if !vec.iter().all(|v| v.is_finite()) {
            return Err(malformed("non-finite component".into()));
        }
        if dimension == 0 {
            dimension = vec.len();
        } else if vec.len() != dimension {
            return Err(malformed(format!(
                "row has {} components, expected {dimension}",
                vec.len()
            )));
        }
        entries.entry(word.to_lowercase()).or_insert(vec);
    }
    Ok(EmbeddingTable { dimension, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &tempfile::TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn category_lexicon_dedup_and_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "lex.tsv", "joy\thappy\njoy\thappy\ngloom\tsad\n");
        let lex = load_category_lexicon(&path, "test").unwrap();
        assert_eq!(lex.categories, ["happy", "sad"]);
        assert_eq!(lex.lookup("joy"), &[0]);
        assert_eq!(lex.lookup("gloom"), &[1]);
        assert!(lex.lookup("absent").is_empty());
    }

    #[test]
    fn morality_fixture_keeps_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let content: String = MORALITY_CATEGORIES
            .iter()
            .enumerate()
            .map(|(i, c)| format!("w{i}\t{c}\n"))
            .collect();
        let path = write_file(&dir, "moral.tsv", &content);
        let lex = load_category_lexicon(&path, "morality").unwrap();
        assert_eq!(lex.categories, MORALITY_CATEGORIES);
    }

    #[test]
    fn category_lexicon_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "bad.tsv", "good\tcat\nword-without-tab\n");
        match load_category_lexicon(&path, "t") {
            Err(LexiconError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed, got {other:?}"),
        }
        let path = write_file(&dir, "empty.tsv", "# only comments\n");
        assert!(matches!(
            load_category_lexicon(&path, "t"),
            Err(LexiconError::Empty { .. })
        ));
    }

    fn lexicon_from(name: &str, pairs: &[(&str, &str)]) -> CategoryLexicon {
        let mut lex = CategoryLexicon::new(name);
        for (w, c) in pairs {
            lex.insert(w, c);
        }
        lex
    }

    #[test]
    fn merge_appends_only_new_categories() {
        // 8 primary categories plus 14 secondary of which 7 overlap -> 15
        let plutchik = [
            "joy",
            "trust",
            "fear",
            "surprise",
            "sadness",
            "disgust",
            "anger",
            "anticipation",
        ];
        let mut primary = CategoryLexicon::new("p");
        for (i, c) in plutchik.iter().enumerate() {
            primary.insert(&format!("pw{i}"), c);
        }
        let mut secondary = CategoryLexicon::new("s");
        for (i, c) in plutchik.iter().take(7).enumerate() {
            secondary.insert(&format!("sw{i}"), c);
        }
        for i in 0..7 {
            secondary.insert(&format!("sx{i}"), &format!("extra{i}"));
        }
        let merged = merge_emotion_lexicons(&primary, &secondary);
        assert_eq!(merged.categories.len(), 15);
        assert_eq!(&merged.categories[..8], &plutchik);
        // words from overlapping secondary categories count under primary's name
        assert_eq!(merged.lookup("sw0"), &[0]);
    }

    #[test]
    fn merge_with_contained_secondary_is_identity_on_categories() {
        let primary = lexicon_from("p", &[("a", "x"), ("b", "y")]);
        let secondary = lexicon_from("s", &[("c", "x")]);
        let merged = merge_emotion_lexicons(&primary, &secondary);
        assert_eq!(merged.categories, primary.categories);
        assert_eq!(merged.lookup("c"), &[0]);
    }

    #[test]
    fn merge_disjoint_and_idempotent() {
        let primary = lexicon_from("p", &[("a", "c1"), ("b", "c2"), ("c", "c3")]);
        let secondary = lexicon_from("s", &[("d", "c4"), ("e", "c5")]);
        let merged = merge_emotion_lexicons(&primary, &secondary);
        assert_eq!(merged.categories, ["c1", "c2", "c3", "c4", "c5"]);
        let again = merge_emotion_lexicons(&merged, &secondary);
        assert_eq!(again.categories, merged.categories);
        assert_eq!(again.entries, merged.entries);
    }

    #[test]
    fn embeddings_load_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "emb.txt", "a 1 0 0\nb 0 1 0\n");
        let table = load_embeddings(&path).unwrap();
        assert_eq!(table.dimension, 3);
        assert_eq!(table.entries.len(), 2);
        assert_eq!(table.lookup("a").unwrap(), &[1.0, 0.0, 0.0]);

        let path = write_file(&dir, "arity.txt", "a 1 0 0\nb 0 1 0 9\n");
        match load_embeddings(&path) {
            Err(LexiconError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected arity error, got {other:?}"),
        }

        let path = write_file(&dir, "nan.txt", "a 1 zero 0\n");
        assert!(load_embeddings(&path).is_err());
    }

    #[test]
    fn embeddings_first_seen_wins_after_lowercasing() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "emb.txt", "Word 1 0 0\nword 2 0 0\n");
        let table = load_embeddings(&path).unwrap();
        assert_eq!(table.entries.len(), 1);
        assert_eq!(table.lookup("word").unwrap(), &[1.0, 0.0, 0.0]);
    }
}
