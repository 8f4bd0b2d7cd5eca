//! Words over the mode alphabet `{1, ..., D}` and their lexicographic
//! enumeration: shorter words first, words of equal length compared letter
//! by letter. The empty word has index 1.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A finite sequence of 1-based discrete modes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ModeWord(Vec<usize>);

impl ModeWord {
    /// The empty word.
    pub fn empty() -> Self {
        ModeWord(Vec::new())
    }

    /// Builds a word, checking every letter lies in `1..=d`.
    pub fn new(letters: Vec<usize>, d: usize) -> Result<Self> {
        let w = ModeWord(letters);
        w.validate(d)?;
        Ok(w)
    }

    /// Builds a word without range checks. Callers validate against a
    /// system later (every consumer in this crate does).
    pub fn from_letters(letters: Vec<usize>) -> Self {
        ModeWord(letters)
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match self.0.iter().find(|&&q| q == 0 || q > d) {
            Some(q) => Err(Error::InvalidWord(format!("letter {q} outside 1..={d} in {self}"))),
            None => Ok(()),
        }
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &ModeWord) -> ModeWord {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        ModeWord(v)
    }

    /// `self` followed by the single letter `q`.
    pub fn push(&self, q: usize) -> ModeWord {
        let mut v = self.0.clone();
        v.push(q);
        ModeWord(v)
    }

    /// Letters `j..=k` (0-based, inclusive). Returns the empty word when
    /// `j > k`.
    pub fn subword(&self, j: usize, k: usize) -> Result<ModeWord> {
        let len = self.len();
        if j >= len || k >= len {
            return Err(Error::IndexOutOfRange(format!(
                "subword({j}, {k}) of a word of length {len}"
            )));
        }
        if j > k {
            return Ok(ModeWord::empty());
        }
        Ok(ModeWord(self.0[j..=k].to_vec()))
    }
}

impl fmt::Display for ModeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "ε");
        }
        let sep = if self.0.iter().any(|&q| q > 9) { "." } else { "" };
        let parts: Vec<String> = self.0.iter().map(|q| q.to_string()).collect();
        // a lone multi-digit letter keeps a trailing separator: `10.`
        let tail = if self.0.len() == 1 { sep } else { "" };
        write!(f, "{}{tail}", parts.join(sep))
    }
}

impl FromStr for ModeWord {
    type Err = Error;

    /// Accepts `ε`, `e`, `eps` or the empty string for the empty word,
    /// digit strings like `121`, or `.`-separated letters like `10.2.3`
    /// (`10.` is the single letter 10).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "ε" || s == "e" || s == "eps" {
            return Ok(ModeWord::empty());
        }
        let parse = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad mode letter {t:?} in word {s:?}")))
        };
        let letters = if s.contains('.') {
            s.strip_suffix('.').unwrap_or(s).split('.').map(parse).collect::<Result<Vec<_>>>()?
        } else {
            s.chars()
                .map(|c| {
                    c.to_digit(10)
                        .map(|d| d as usize)
                        .ok_or_else(|| Error::Parse(format!("bad mode letter {c:?} in word {s:?}")))
                })
                .collect::<Result<Vec<_>>>()?
        };
        Ok(ModeWord(letters))
    }
}

/// Number of words of length at most `l` over `d` letters.
pub fn count_words_up_to(l: usize, d: usize) -> Result<usize> {
    if d == 0 {
        return Err(Error::InvalidWord("alphabet size must be positive".into()));
    }
    let overflow = || Error::Overflow(format!("counting words of length <= {l} over {d} letters"));
    let mut total: usize = 0;
    let mut power: usize = 1;
    for k in 0..=l {
        total = total.checked_add(power).ok_or_else(overflow)?;
        if k < l {
            power = power.checked_mul(d).ok_or_else(overflow)?;
        }
    }
    Ok(total)
}

/// The `i`-th word (1-based) in the lexicographic enumeration.
pub fn word_at_index(i: usize, d: usize) -> Result<ModeWord> {
    if i == 0 {
        return Err(Error::IndexOutOfRange("word indices start at 1".into()));
    }
    if d == 0 {
        return Err(Error::InvalidWord("alphabet size must be positive".into()));
    }
    let mut offset = i - 1;
    let mut len = 0usize;
    // offset into the block of words of length `len`
    let mut block: usize = 1;
    while offset >= block {
        offset -= block;
        len += 1;
        block = match block.checked_mul(d) {
            Some(b) => b,
            // Cannot be exceeded by any usize offset.
            None => usize::MAX,
        };
    }
    let mut letters = vec![1usize; len];
    for pos in (0..len).rev() {
        letters[pos] = offset % d + 1;
        offset /= d;
    }
    Ok(ModeWord(letters))
}

/// Inverse of [`word_at_index`].
pub fn index_of_word(v: &ModeWord, d: usize) -> Result<usize> {
    v.validate(d)?;
    let overflow = || Error::Overflow(format!("indexing word {v}"));
    let base = if v.is_empty() { 0 } else { count_words_up_to(v.len() - 1, d)? };
    let mut offset: usize = 0;
    for &q in v.letters() {
        offset = offset
            .checked_mul(d)
            .and_then(|o| o.checked_add(q - 1))
            .ok_or_else(overflow)?;
    }
    base.checked_add(offset)
        .and_then(|x| x.checked_add(1))
        .ok_or_else(overflow)
}

/// All words of length at most `l`, in enumeration order.
pub fn words_up_to(l: usize, d: usize) -> Result<Vec<ModeWord>> {
    let n = count_words_up_to(l, d)?;
    let mut out = Vec::with_capacity(n);
    out.push(ModeWord::empty());
    let mut start = 0;
    for _ in 0..l {
        let end = out.len();
        for i in start..end {
            for q in 1..=d {
                let w = out[i].push(q);
                out.push(w);
            }
        }
        start = end;
    }
    Ok(out)
}

/// True iff the modes starting at `t` spell `s` (the indicator χ(t, s)).
/// Positions running past the end give `false`.
pub fn occurs_at(modes: &[usize], t: usize, s: &[usize]) -> bool {
    t.checked_add(s.len())
        .is_some_and(|end| end <= modes.len() && &modes[t..end] == s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> ModeWord {
        s.parse().unwrap()
    }

    #[test]
    fn counts() {
        assert_eq!(count_words_up_to(0, 2).unwrap(), 1);
        assert_eq!(count_words_up_to(2, 2).unwrap(), 7);
        assert_eq!(count_words_up_to(3, 3).unwrap(), 40);
        assert_eq!(count_words_up_to(5, 1).unwrap(), 6);
    }

    #[test]
    fn count_overflow_is_an_error() {
        assert!(matches!(count_words_up_to(200, 2), Err(Error::Overflow(_))));
        assert!(count_words_up_to(63, 2).is_ok());
        assert!(matches!(count_words_up_to(64, 2), Err(Error::Overflow(_))));
    }

    #[test]
    fn enumeration_examples() {
        assert_eq!(word_at_index(1, 2).unwrap(), ModeWord::empty());
        assert_eq!(word_at_index(5, 2).unwrap(), w("12"));
        assert_eq!(index_of_word(&w("21"), 2).unwrap(), 6);
        assert!(word_at_index(0, 2).is_err());
        assert!(matches!(index_of_word(&w("13"), 2), Err(Error::InvalidWord(_))));
    }

    #[test]
    fn enumeration_matches_listing() {
        for d in 1..=3 {
            let all = words_up_to(4, d).unwrap();
            for (i, v) in all.iter().enumerate() {
                assert_eq!(&word_at_index(i + 1, d).unwrap(), v);
            }
            // strictly increasing: by length, then letters
            for pair in all.windows(2) {
                let (a, b) = (&pair[0], &pair[1]);
                assert!(a.len() < b.len() || (a.len() == b.len() && a.letters() < b.letters()));
            }
        }
    }

    #[test]
    fn bijection_exhaustive_small() {
        for d in 1..=3 {
            for v in words_up_to(6, d).unwrap() {
                let i = index_of_word(&v, d).unwrap();
                assert_eq!(word_at_index(i, d).unwrap(), v);
            }
        }
    }

    #[test]
    fn subwords() {
        assert_eq!(w("121").subword(1, 0).unwrap(), ModeWord::empty());
        assert_eq!(w("121").subword(1, 1).unwrap(), w("2"));
        assert_eq!(w("1221").subword(1, 3).unwrap(), w("221"));
        assert!(w("12").subword(0, 2).is_err());
    }

    #[test]
    fn display_and_parse() {
        assert_eq!(ModeWord::empty().to_string(), "ε");
        assert_eq!(w("eps"), ModeWord::empty());
        assert_eq!(w("10.2").letters(), &[10, 2]);
        assert_eq!(w("10.2").to_string(), "10.2");
        assert!("1x".parse::<ModeWord>().is_err());
    }

    #[test]
    fn indicator() {
        let modes = [1, 2, 1, 2, 2];
        assert!(occurs_at(&modes, 1, &[2, 1, 2]));
        assert!(!occurs_at(&modes, 3, &[2, 2, 1]));
        assert!(occurs_at(&modes, 5, &[]));
        assert!(!occurs_at(&modes, 6, &[]));
    }
}
