//! Tweet featurization: lexicon category counts, style signals, and averaged
//! word embeddings, concatenated into one vector per tweet.

use serde::{Deserialize, Serialize};

use crate::corpus::{Chunk, Tweet};
use crate::lexicons::{CategoryLexicon, EmbeddingTable, LexiconSet};

pub const STYLE_FEATURE_COUNT: usize = 9;
/// Platform character limit used to normalize the length feature.
pub const TWEET_CHAR_LIMIT: f64 = 280.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureGroup {
    Emotion,
    Sentiment,
    Morality,
    Style,
    Embeddings,
}

/// Canonical concatenation order.
pub const FEATURE_GROUPS: [FeatureGroup; 5] = [
    FeatureGroup::Emotion,
    FeatureGroup::Sentiment,
    FeatureGroup::Morality,
    FeatureGroup::Style,
    FeatureGroup::Embeddings,
];

impl FeatureGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::Emotion => "emotion",
            FeatureGroup::Sentiment => "sentiment",
            FeatureGroup::Morality => "morality",
            FeatureGroup::Style => "style",
            FeatureGroup::Embeddings => "embeddings",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "emotion" => Some(FeatureGroup::Emotion),
            "sentiment" => Some(FeatureGroup::Sentiment),
            "morality" => Some(FeatureGroup::Morality),
            "style" => Some(FeatureGroup::Style),
            "embeddings" => Some(FeatureGroup::Embeddings),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub enabled_groups: Vec<FeatureGroup>,
    pub normalize_counts: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            enabled_groups: FEATURE_GROUPS.to_vec(),
            normalize_counts: true,
        }
    }
}

impl FeatureConfig {
    pub fn is_enabled(&self, g: FeatureGroup) -> bool {
        self.enabled_groups.contains(&g)
    }

    /// Copy of this config with one group removed.
    pub fn without(&self, g: FeatureGroup) -> FeatureConfig {
        FeatureConfig {
            enabled_groups: self
                .enabled_groups
                .iter()
                .copied()
                .filter(|&x| x != g)
                .collect(),
            normalize_counts: self.normalize_counts,
        }
    }

    pub fn group_len(&self, g: FeatureGroup, embedding_dim: usize) -> usize {
        match g {
            FeatureGroup::Emotion => crate::lexicons::EMOTION_CATEGORY_COUNT,
            FeatureGroup::Sentiment => 2 * crate::lexicons::SENTIMENT_LEXICON_COUNT,
            FeatureGroup::Morality => crate::lexicons::MORALITY_CATEGORY_COUNT,
            FeatureGroup::Style => STYLE_FEATURE_COUNT,
            FeatureGroup::Embeddings => embedding_dim,
        }
    }

    /// Total vector length for the enabled groups.
    pub fn total_len(&self, embedding_dim: usize) -> usize {
        FEATURE_GROUPS
            .iter()
            .filter(|&&g| self.is_enabled(g))
            .map(|&g| self.group_len(g, embedding_dim))
            .sum()
    }

    /// (offset, length) per enabled group, in canonical order.
    pub fn spans(&self, embedding_dim: usize) -> Vec<(FeatureGroup, usize, usize)> {
        let mut offset = 0;
        let mut out = Vec::new();
        for &g in &FEATURE_GROUPS {
            if self.is_enabled(g) {
                let len = self.group_len(g, embedding_dim);
                out.push((g, offset, len));
                offset += len;
            }
        }
        out
    }
}

/// Feature vector for one tweet with named group spans.
#[derive(Debug, Clone, PartialEq)]
pub struct TweetVector {
    pub values: Vec<f64>,
    pub spans: Vec<(FeatureGroup, usize, usize)>,
}

impl TweetVector {
    pub fn span(&self, g: FeatureGroup) -> Option<&[f64]> {
        self.spans
            .iter()
            .find(|(sg, _, _)| *sg == g)
            .map(|&(_, off, len)| &self.values[off..off + len])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Word,
    Url,
    Hashtag,
    Mention,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
}

/// Whitespace tokenization. URLs, hashtags, and mentions survive intact and
/// tagged; plain words are lowercased with edge punctuation stripped.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    for raw in text.split_whitespace() {
        let lower = raw.to_lowercase();
        if lower.starts_with("http://") || lower.starts_with("https://") {
            tokens.push(Token {
                text: raw.to_string(),
                kind: TokenKind::Url,
            });
        } else if raw.starts_with('#') && raw.len() > 1 {
            tokens.push(Token {
                text: raw.to_string(),
                kind: TokenKind::Hashtag,
            });
        } else if raw.starts_with('@') && raw.len() > 1 {
            tokens.push(Token {
                text: raw.to_string(),
                kind: TokenKind::Mention,
            });
        } else {
            let stripped = raw.trim_matches(|c: char| !c.is_alphanumeric());
            if !stripped.is_empty() {
                tokens.push(Token {
                    text: stripped.to_lowercase(),
                    kind: TokenKind::Word,
                });
            }
        }
    }
    tokens
}

/// Per-category token counts against one lexicon, optionally normalized by
/// token count.
pub fn category_features(tokens: &[Token], lex: &CategoryLexicon, normalize: bool) -> Vec<f64> {
    let mut counts = vec![0.0; lex.categories.len()];
    for tok in tokens {
        for &c in lex.lookup(&tok.text) {
            counts[c] += 1.0;
        }
    }
    if normalize && !tokens.is_empty() {
        let n = tokens.len() as f64;
        for c in &mut counts {
            *c /= n;
        }
    }
    counts
}

fn count_runs(chars: &[char], min_len: usize, letters_only: bool) -> f64 {
    let mut runs = 0usize;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let mut j = i + 1;
        while j < chars.len() && chars[j] == c {
            j += 1;
        }
        if j - i >= min_len && (!letters_only || c.is_alphabetic()) {
            runs += 1;
        }
        i = j;
    }
    runs as f64
}

/// Nine stylistic signals in fixed order: '?' count, '!' count, char runs of
/// length >= 2, letter runs of length >= 3, url/hashtag/mention token counts,
/// uppercase ratio, and character length over the platform limit.
pub fn style_features(text: &str, tokens: &[Token]) -> Vec<f64> {
    let chars: Vec<char> = text.chars().collect();
    let questions = chars.iter().filter(|&&c| c == '?').count() as f64;
    let exclaims = chars.iter().filter(|&&c| c == '!').count() as f64;
    let char_runs = count_runs(&chars, 2, false);
    let letter_runs = count_runs(&chars, 3, true);
    let urls = tokens.iter().filter(|t| t.kind == TokenKind::Url).count() as f64;
    let hashtags = tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Hashtag)
        .count() as f64;
    let mentions = tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Mention)
        .count() as f64;
    let letters = chars.iter().filter(|c| c.is_alphabetic()).count();
    let upper = chars.iter().filter(|c| c.is_uppercase()).count();
    let upper_ratio = if letters == 0 {
        0.0
    } else {
        upper as f64 / letters as f64
    };
    let length = chars.len() as f64 / TWEET_CHAR_LIMIT;
    vec![
        questions,
        exclaims,
        char_runs,
        letter_runs,
        urls,
        hashtags,
        mentions,
        upper_ratio,
        length,
    ]
}

/// Mean of embedding vectors over in-vocabulary word tokens; zero vector when
/// none are in vocabulary.
pub fn embedding_features(tokens: &[Token], table: &EmbeddingTable) -> Vec<f64> {
    let mut sum = vec![0.0; table.dimension];
    let mut n = 0usize;
    for tok in tokens {
        if tok.kind != TokenKind::Word {
            continue;
        }
        if let Some(vec) = table.lookup(&tok.text) {
            for (s, v) in sum.iter_mut().zip(vec) {
                *s += v;
            }
            n += 1;
        }
    }
    if n > 0 {
        let n = n as f64;
        for s in &mut sum {
            *s /= n;
        }
    }
    sum
}

/// Concatenate the enabled feature groups for one tweet.
pub fn featurize_tweet(tweet: &Tweet, lexset: &LexiconSet, cfg: &FeatureConfig) -> TweetVector {
    let tokens = tokenize(&tweet.text);
    let mut values = Vec::with_capacity(cfg.total_len(lexset.embeddings.dimension));
    for &g in &FEATURE_GROUPS {
        if !cfg.is_enabled(g) {
            continue;
        }
        match g {
            FeatureGroup::Emotion => {
                values.extend(category_features(&tokens, &lexset.emotion, cfg.normalize_counts));
            }
            FeatureGroup::Sentiment => {
                for lex in &lexset.sentiment {
                    values.extend(category_features(&tokens, lex, cfg.normalize_counts));
                }
            }
            FeatureGroup::Morality => {
                values.extend(category_features(&tokens, &lexset.morality, cfg.normalize_counts));
            }
            FeatureGroup::Style => values.extend(style_features(&tweet.text, &tokens)),
            FeatureGroup::Embeddings => {
                values.extend(embedding_features(&tokens, &lexset.embeddings));
            }
        }
    }
    TweetVector {
        values,
        spans: cfg.spans(lexset.embeddings.dimension),
    }
}

/// Featurize every tweet of a chunk, order preserved.
pub fn featurize_chunk(chunk: &Chunk, lexset: &LexiconSet, cfg: &FeatureConfig) -> Vec<TweetVector> {
    chunk
        .tweets
        .iter()
        .map(|tw| featurize_tweet(tw, lexset, cfg))
        .collect()
}

/// Write feature rows as TSV with one span-component name per column.
pub fn export_features_tsv(
    rows: &[TweetVector],
    out: &mut impl std::io::Write,
) -> std::io::Result<()> {
    if let Some(first) = rows.first() {
        let mut header = Vec::new();
        for &(g, _, len) in &first.spans {
            for i in 0..len {
                header.push(format!("{}_{i}", g.as_str()));
            }
        }
        writeln!(out, "{}", header.join("\t"))?;
    }
    for row in rows {
        let cells: Vec<String> = row.values.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", cells.join("\t"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AccountLabel;
    use crate::lexicons::MORALITY_CATEGORIES;
    use std::collections::HashMap;

    fn tok(text: &str) -> Vec<Token> {
        tokenize(text)
    }

    #[test]
    fn tokenize_strips_punctuation_and_tags_special() {
        let toks = tok("Hello, world!");
        assert_eq!(toks.len(), 2);
        assert_eq!(toks[0].text, "hello");
        assert_eq!(toks[1].text, "world");

        let toks = tok("see #News by @me http://a.b");
        let kinds: Vec<_> = toks.iter().map(|t| t.kind).collect();
        assert_eq!(
            kinds,
            [
                TokenKind::Word,
                TokenKind::Hashtag,
                TokenKind::Word,
                TokenKind::Mention,
                TokenKind::Url
            ]
        );
        assert_eq!(toks[1].text, "#News");
        assert_eq!(toks[4].text, "http://a.b");

        assert!(tok("").is_empty());
    }

    fn toy_lexicon(pairs: &[(&str, &str)], categories: &[&str]) -> CategoryLexicon {
        let mut lex = CategoryLexicon::new("toy");
        for c in categories {
            // seed category order even when no word maps there yet
            lex.insert(&format!("__seed_{c}"), c);
        }
        for (w, c) in pairs {
            lex.insert(w, c);
        }
        lex
    }

    #[test]
    fn category_counts_raw_and_normalized() {
        let lex = toy_lexicon(&[("joy", "happy")], &["happy", "sad"]);
        let toks = tok("joy joy");
        assert_eq!(category_features(&toks, &lex, false), vec![2.0, 0.0]);
        assert_eq!(category_features(&toks, &lex, true), vec![1.0, 0.0]);
    }

    #[test]
    fn morality_hit_normalized_by_token_count() {
        let pairs = [("hurt", "harm")];
        let lex = toy_lexicon(&pairs, &MORALITY_CATEGORIES);
        let toks = tok("they hurt many people");
        let v = category_features(&toks, &lex, true);
        assert_eq!(v.len(), 10);
        assert_eq!(v[1], 0.25);
        assert!(v.iter().enumerate().all(|(i, &x)| i == 1 || x == 0.0));
    }

    #[test]
    fn style_features_hand_counts() {
        let text = "WOW!!! so coool";
        let v = style_features(text, &tok(text));
        assert_eq!(v[0], 0.0); // ?
        assert_eq!(v[1], 3.0); // !
        assert_eq!(v[2], 2.0); // "!!!", "ooo"
        assert_eq!(v[3], 1.0); // "ooo"
        assert_eq!(v[4], 0.0);
        assert_eq!(v[5], 0.0);
        assert_eq!(v[6], 0.0);
        assert!((v[7] - 3.0 / 10.0).abs() < 1e-12); // 3 uppercase of 10 letters
        assert!((v[8] - 15.0 / 280.0).abs() < 1e-12);
    }

    #[test]
    fn style_features_empty_and_marks() {
        assert_eq!(style_features("", &[]), vec![0.0; 9]);
        let text = "a? b? @x #y";
        let v = style_features(text, &tok(text));
        assert_eq!(v[0], 2.0);
        assert_eq!(v[5], 1.0);
        assert_eq!(v[6], 1.0);
    }

    fn toy_table(entries: &[(&str, &[f64])]) -> EmbeddingTable {
        let map: HashMap<String, Vec<f64>> = entries
            .iter()
            .map(|(w, v)| (w.to_string(), v.to_vec()))
            .collect();
        EmbeddingTable {
            dimension: entries[0].1.len(),
            entries: map,
        }
    }

    #[test]
    fn embedding_mean_and_oov() {
        let table = toy_table(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        assert_eq!(embedding_features(&tok("a b"), &table), vec![0.5, 0.5]);
        assert_eq!(embedding_features(&tok("x y z"), &table), vec![0.0, 0.0]);
        let v = embedding_features(&tok("a a b"), &table);
        assert!((v[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((v[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    pub(crate) fn fixture_lexset(embedding_dim: usize) -> LexiconSet {
        let mut emotion = CategoryLexicon::new("emotion");
        for i in 0..15 {
            emotion.insert(&format!("emo{i}"), &format!("e{i}"));
        }
        let sentiment = (0..4)
            .map(|i| {
                let mut lex = CategoryLexicon::new(&format!("sent{i}"));
                lex.insert(&format!("good{i}"), "positive");
                lex.insert(&format!("bad{i}"), "negative");
                lex
            })
            .collect();
        let mut morality = CategoryLexicon::new("morality");
        for c in MORALITY_CATEGORIES {
            morality.insert(&format!("m_{c}"), c);
        }
        let entries: HashMap<String, Vec<f64>> = (0..8)
            .map(|i| {
                let mut v = vec![0.0; embedding_dim];
                v[i % embedding_dim] = 1.0;
                (format!("w{i}"), v)
            })
            .collect();
        LexiconSet {
            emotion,
            sentiment,
            morality,
            embeddings: EmbeddingTable {
                dimension: embedding_dim,
                entries,
            },
        }
    }

    fn mk_tweet(text: &str) -> Tweet {
        Tweet {
            id: "t".into(),
            text: text.into(),
            timestamp: 0,
            reply_count: 0,
            like_count: 0,
            retweet_count: 0,
        }
    }

    #[test]
    fn full_config_dims_and_spans() {
        let lexset = fixture_lexset(300);
        let cfg = FeatureConfig::default();
        let v = featurize_tweet(&mk_tweet("hello"), &lexset, &cfg);
        assert_eq!(v.values.len(), 342);
        let spans: Vec<_> = v.spans.iter().map(|&(_, o, l)| (o, l)).collect();
        assert_eq!(spans, [(0, 15), (15, 8), (23, 10), (33, 9), (42, 300)]);
    }

    #[test]
    fn ablation_removes_exactly_one_span() {
        let lexset = fixture_lexset(300);
        let full = FeatureConfig::default();
        let tweet = mk_tweet("emo3 good1 m_harm WOW!!! w2");
        let fv = featurize_tweet(&tweet, &lexset, &full);
        for &g in &FEATURE_GROUPS {
            let cfg = full.without(g);
            let av = featurize_tweet(&tweet, &lexset, &cfg);
            let (_, off, len) = *fv.spans.iter().find(|(sg, _, _)| *sg == g).unwrap();
            let mut expect = fv.values.clone();
            expect.drain(off..off + len);
            assert_eq!(av.values, expect, "ablating {:?}", g);
        }
        let no_emb = featurize_tweet(&tweet, &lexset, &full.without(FeatureGroup::Embeddings));
        assert_eq!(no_emb.values.len(), 42);
    }

    #[test]
    fn empty_tweet_gives_zero_vector() {
        let lexset = fixture_lexset(300);
        let cfg = FeatureConfig::default();
        let v = featurize_tweet(&mk_tweet(""), &lexset, &cfg);
        assert!(v.values.iter().all(|&x| x == 0.0));
        assert_eq!(v.values.len(), 342);
    }

    #[test]
    fn chunk_featurization_preserves_order() {
        let lexset = fixture_lexset(4);
        let cfg = FeatureConfig::default();
        let chunk = Chunk {
            account_handle: "a".into(),
            index: 0,
            tweets: vec![mk_tweet("w0"), mk_tweet("w1"), mk_tweet("w2")],
            label: AccountLabel::Real,
        };
        let vecs = featurize_chunk(&chunk, &lexset, &cfg);
        assert_eq!(vecs.len(), 3);
        for (i, v) in vecs.iter().enumerate() {
            assert_eq!(
                v.values,
                featurize_tweet(&chunk.tweets[i], &lexset, &cfg).values
            );
        }
    }

    #[test]
    fn normalized_lexicon_spans_stay_in_unit_interval() {
        let lexset = fixture_lexset(4);
        let cfg = FeatureConfig::default();
        let v = featurize_tweet(&mk_tweet("emo0 emo0 good2 m_care bad3 w1 WOW??"), &lexset, &cfg);
        for g in [
            FeatureGroup::Emotion,
            FeatureGroup::Sentiment,
            FeatureGroup::Morality,
        ] {
            for &x in v.span(g).unwrap() {
                assert!((0.0..=1.0).contains(&x));
            }
        }
        let style = v.span(FeatureGroup::Style).unwrap();
        assert!((0.0..=1.0).contains(&style[7]));
    }
}
