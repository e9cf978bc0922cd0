use unicode_normalization::UnicodeNormalization;

/// NFKC-normalizes and lowercases `text`.
pub fn fold(text: &str) -> String {
    text.nfkc().flat_map(char::to_lowercase).collect()
}

/// Splits on anything that is not alphanumeric.
pub fn split_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Folded word tokens.
pub fn tokens(text: &str) -> Vec<String> {
    split_tokens(&fold(text))
}

/// True when `needle` occurs as a contiguous run inside `haystack`.
pub fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|window| window == needle)
}
