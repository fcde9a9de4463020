//! Sentence segmentation.
//!
//! A sentence is a maximal span ending at `.`, `!`, or `?` followed by
//! whitespace or end of text. Decimal points and digit separators never
//! terminate a sentence because a digit, not whitespace, follows them.

/// Byte ranges of the sentences in `text`, terminator included.
pub fn sentences(text: &str) -> Vec<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut ranges = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if matches!(b, b'.' | b'!' | b'?')
            && (i + 1 == bytes.len() || bytes[i + 1].is_ascii_whitespace())
        {
            ranges.push((start, i + 1));
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            start = i;
        } else {
            i += 1;
        }
    }
    if start < bytes.len() {
        ranges.push((start, bytes.len()));
    }
    ranges
}

/// The sentence range containing byte offset `pos`, if any.
pub fn sentence_at(ranges: &[(usize, usize)], pos: usize) -> Option<(usize, usize)> {
    ranges.iter().copied().find(|(s, e)| (*s..*e).contains(&pos))
}
