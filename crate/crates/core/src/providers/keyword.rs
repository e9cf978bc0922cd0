//! Keyword matching against document text.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::text;
use crate::corpus::Document;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// NFKC, case-folded, whole-token match.
    #[default]
    Folded,
    /// Case-sensitive whole-token match on the raw text.
    Exact,
    /// NFKC, case-folded, raw substring match.
    Substring,
}

/// Extra surface forms for a keyword.
pub trait SynonymHook: Send + Sync {
    fn expand(&self, keyword: &str) -> Vec<String>;
}

/// Static synonym table keyed by the folded keyword.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymList(HashMap<String, Vec<String>>);

impl SynonymList {
    pub fn new(entries: HashMap<String, Vec<String>>) -> Self {
        Self(entries.into_iter().map(|(k, v)| (text::fold(&k), v)).collect())
    }
}

impl SynonymHook for SynonymList {
    fn expand(&self, keyword: &str) -> Vec<String> {
        self.0.get(&text::fold(keyword)).cloned().unwrap_or_default()
    }
}

fn matches(doc_text: &str, keyword: &str, mode: Normalization) -> bool {
    match mode {
        Normalization::Folded => text::contains_run(&text::tokens(doc_text), &text::tokens(keyword)),
        Normalization::Exact => text::contains_run(&text::split_tokens(doc_text), &text::split_tokens(keyword)),
        Normalization::Substring => {
            let needle = text::fold(keyword);
            !needle.is_empty() && text::fold(doc_text).contains(&needle)
        }
    }
}

/// 1 when any keyword (or one of its synonyms) occurs in the document, else 0.
pub fn score_keyword(
    doc: &Document,
    keywords: &[String],
    mode: Normalization,
    synonyms: Option<&dyn SynonymHook>,
) -> f64 {
    let hit = keywords.iter().any(|keyword| {
        matches(&doc.text, keyword, mode)
            || synonyms.is_some_and(|hook| hook.expand(keyword).iter().any(|alt| matches(&doc.text, alt, mode)))
    });
    if hit {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> Document {
        Document::new("d", text).unwrap()
    }

    fn kw(k: &str) -> Vec<String> {
        vec![k.to_owned()]
    }

    #[test]
    fn token_match_hits() {
        assert_eq!(score_keyword(&doc("Vehicles must yield priority"), &kw("yield"), Normalization::Folded, None), 1.0);
    }

    #[test]
    fn whole_token_default_rejects_infix() {
        assert_eq!(score_keyword(&doc("unyielding surface"), &kw("yield"), Normalization::Folded, None), 0.0);
        assert_eq!(score_keyword(&doc("unyielding surface"), &kw("yield"), Normalization::Substring, None), 1.0);
    }

    #[test]
    fn empty_text_never_matches() {
        assert_eq!(score_keyword(&doc(""), &kw("yield"), Normalization::Folded, None), 0.0);
    }

    #[test]
    fn exact_mode_is_case_sensitive() {
        assert_eq!(score_keyword(&doc("YIELD here"), &kw("yield"), Normalization::Exact, None), 0.0);
        assert_eq!(score_keyword(&doc("YIELD here"), &kw("yield"), Normalization::Folded, None), 1.0);
    }

    #[test]
    fn synonyms_extend_matching() {
        let hook = SynonymList::new(HashMap::from([("Yield".to_owned(), vec!["give way".to_owned()])]));
        let d = doc("Drivers shall give way at the crossing.");
        assert_eq!(score_keyword(&d, &kw("yield"), Normalization::Folded, None), 0.0);
        assert_eq!(score_keyword(&d, &kw("yield"), Normalization::Folded, Some(&hook)), 1.0);
    }
}
