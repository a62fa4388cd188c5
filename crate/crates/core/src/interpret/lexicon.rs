use std::path::Path;

use crate::config::ConfigError;
use crate::types::SignClass;

const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.tsv");

pub const EXACT_CONFIDENCE: f64 = 1.0;
pub const NEAR_CONFIDENCE: f64 = 0.7;

/// Keywords shorter than this only match exactly; at edit distance one a
/// two-letter keyword would match almost any short token.
const MIN_FUZZY_KEYWORD_LEN: usize = 3;

/// Sign keyword table, one `keyword<TAB>CLASS` per line.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: Vec<(String, SignClass)>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::parse(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }
}

impl Lexicon {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (keyword, class) = line
                .split_once('\t')
                .ok_or_else(|| ConfigError::Invalid(format!("lexicon line {}: expected keyword<TAB>class", n + 1)))?;
            let class = SignClass::from_code(class.trim())
                .ok_or_else(|| ConfigError::Invalid(format!("lexicon line {}: unknown class {class:?}", n + 1)))?;
            let keyword = keyword.trim().to_lowercase();
            if keyword.is_empty() {
                return Err(ConfigError::Invalid(format!("lexicon line {}: empty keyword", n + 1)));
            }
            entries.push((keyword, class));
        }
        Ok(Lexicon { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn entries(&self) -> &[(String, SignClass)] {
        &self.entries
    }

    fn match_token(&self, token: &str) -> (SignClass, f64) {
        if let Some((_, class)) = self.entries.iter().find(|(k, _)| k == token) {
            return (*class, EXACT_CONFIDENCE);
        }
        self.entries
            .iter()
            .filter(|(k, _)| k.chars().count() >= MIN_FUZZY_KEYWORD_LEN)
            .find(|(k, _)| strsim::levenshtein(k, token) == 1)
            .map(|(_, class)| (*class, NEAR_CONFIDENCE))
            .unwrap_or((SignClass::UnknownSign, 0.0))
    }

    /// Case-insensitive match of the trimmed text, falling back to its
    /// whitespace-separated words. Exact keyword hits score 1.0, edit
    /// distance one scores 0.7, anything else is an unknown sign.
    pub fn classify(&self, text: &str) -> (SignClass, f64) {
        let norm = text.trim().to_lowercase();
        if norm.is_empty() {
            return (SignClass::UnknownSign, 0.0);
        }
        let whole = self.match_token(&norm);
        if whole.1 == EXACT_CONFIDENCE {
            return whole;
        }
        let mut best = whole;
        for token in norm.split_whitespace() {
            let hit = self.match_token(token);
            if hit.1 > best.1 {
                best = hit;
            }
        }
        best
    }
}

pub fn classify_signage(text: &str) -> (SignClass, f64) {
    thread_local! {
        static DEFAULT: Lexicon = Lexicon::default();
    }
    DEFAULT.with(|l| l.classify(text))
}
