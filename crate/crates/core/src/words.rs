//! Words over a finite alphabet and their shuffle combinatorics.
//!
//! Letters are 1-based. Words are ordered shortlex: shorter words first,
//! then lexicographically by letter. Every enumeration in the crate
//! (signature levels, JSON maps, reports) follows this order.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Largest alphabet a [`Word`] can carry; letters are stored as bytes.
pub const MAX_ALPHABET: usize = u8::MAX as usize;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Word {
    letters: Vec<u8>,
    alphabet_size: usize,
}

impl Word {
    pub fn new(letters: &[usize], alphabet_size: usize) -> Result<Self> {
        check_alphabet(alphabet_size)?;
        let mut stored = Vec::with_capacity(letters.len());
        for &letter in letters {
            if letter == 0 || letter > alphabet_size {
                return Err(Error::InvalidLetter {
                    letter,
                    alphabet_size,
                });
            }
            stored.push(letter as u8);
        }
        Ok(Self {
            letters: stored,
            alphabet_size,
        })
    }

    pub fn empty(alphabet_size: usize) -> Self {
        Self {
            letters: Vec::new(),
            alphabet_size,
        }
    }

    pub fn letter(letter: usize, alphabet_size: usize) -> Result<Self> {
        Self::new(&[letter], alphabet_size)
    }

    /// Builds a word from raw bytes that are already known to be in range.
    pub(crate) fn from_raw(letters: Vec<u8>, alphabet_size: usize) -> Self {
        debug_assert!(letters
            .iter()
            .all(|&l| l >= 1 && (l as usize) <= alphabet_size));
        Self {
            letters,
            alphabet_size,
        }
    }

    pub fn raw(&self) -> &[u8] {
        &self.letters
    }

    pub fn letters(&self) -> Vec<usize> {
        self.letters.iter().map(|&l| l as usize).collect()
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn last(&self) -> Option<usize> {
        self.letters.last().map(|&l| l as usize)
    }

    /// `(σ−, σ_ℓ)`: the word without its last letter, and that letter.
    pub fn split_last(&self) -> Result<(Word, usize)> {
        match self.letters.split_last() {
            Some((&last, rest)) => Ok((Word::from_raw(rest.to_vec(), self.alphabet_size), last as usize)),
            None => Err(Error::EmptyWord),
        }
    }

    pub fn push(&self, letter: usize) -> Result<Word> {
        if letter == 0 || letter > self.alphabet_size {
            return Err(Error::InvalidLetter {
                letter,
                alphabet_size: self.alphabet_size,
            });
        }
        let mut letters = self.letters.clone();
        letters.push(letter as u8);
        Ok(Word::from_raw(letters, self.alphabet_size))
    }

    pub fn concat(&self, other: &Word) -> Result<Word> {
        same_alphabet(self, other)?;
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Ok(Word::from_raw(letters, self.alphabet_size))
    }

    /// Position of this word inside the dense array of its signature level,
    /// i.e. the letters read as a base-`n` number with digits `letter - 1`.
    pub fn level_index(&self, n: usize) -> usize {
        self.letters
            .iter()
            .fold(0, |acc, &l| acc * n + (l as usize - 1))
    }

    /// Inverse of [`Word::level_index`].
    pub fn from_level_index(mut index: usize, len: usize, n: usize) -> Word {
        let mut letters = vec![0u8; len];
        for slot in letters.iter_mut().rev() {
            *slot = (index % n + 1) as u8;
            index /= n;
        }
        Word::from_raw(letters, n)
    }

    /// The same letters viewed over a larger alphabet.
    pub fn widen(&self, alphabet_size: usize) -> Result<Word> {
        check_alphabet(alphabet_size)?;
        if alphabet_size < self.alphabet_size {
            if let Some(&bad) = self.letters.iter().find(|&&l| l as usize > alphabet_size) {
                return Err(Error::InvalidLetter {
                    letter: bad as usize,
                    alphabet_size,
                });
            }
        }
        Ok(Word::from_raw(self.letters.clone(), alphabet_size))
    }

    /// Parses `"(1,2,2)"`; `"()"` is the empty word. Whitespace is ignored.
    pub fn parse(text: &str, alphabet_size: usize) -> Result<Word> {
        let letters = parse_letters(text)?;
        Word::new(&letters, alphabet_size)
    }
}

/// Parses the letters of a serialized word without checking an alphabet.
pub fn parse_letters(text: &str) -> Result<Vec<usize>> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let inner = compact
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| Error::WordSyntax(text.to_string()))?;
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|_| Error::WordSyntax(text.to_string()))
        })
        .collect()
}

fn check_alphabet(alphabet_size: usize) -> Result<()> {
    if alphabet_size == 0 || alphabet_size > MAX_ALPHABET {
        return Err(Error::InvalidLetter {
            letter: alphabet_size,
            alphabet_size: MAX_ALPHABET,
        });
    }
    Ok(())
}

fn same_alphabet(a: &Word, b: &Word) -> Result<()> {
    if a.alphabet_size != b.alphabet_size {
        return Err(Error::AlphabetMismatch {
            left: a.alphabet_size,
            right: b.alphabet_size,
        });
    }
    Ok(())
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.letters
            .len()
            .cmp(&other.letters.len())
            .then_with(|| self.letters.cmp(&other.letters))
            .then_with(|| self.alphabet_size.cmp(&other.alphabet_size))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (k, l) in self.letters.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{l}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word{self}")
    }
}

/// A multiset of words, as produced by the shuffle product.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WordMultiset {
    entries: BTreeMap<Word, u64>,
}

impl WordMultiset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: Word, multiplicity: u64) {
        if multiplicity > 0 {
            *self.entries.entry(word).or_insert(0) += multiplicity;
        }
    }

    pub fn multiplicity(&self, word: &Word) -> u64 {
        self.entries.get(word).copied().unwrap_or(0)
    }

    /// Total number of words counted with multiplicity.
    pub fn total(&self) -> u64 {
        self.entries.values().sum()
    }

    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Word, u64)> {
        self.entries.iter().map(|(w, &m)| (w, m))
    }

    /// Shuffles every word of the multiset with every word of `other`,
    /// multiplying multiplicities.
    pub fn shuffle_with(&self, other: &WordMultiset) -> Result<WordMultiset> {
        let mut out = WordMultiset::new();
        for (a, ma) in self.iter() {
            for (b, mb) in other.iter() {
                for (w, m) in shuffle(a, b)?.iter() {
                    out.insert(w.clone(), m * ma * mb);
                }
            }
        }
        Ok(out)
    }
}

impl From<Word> for WordMultiset {
    fn from(word: Word) -> Self {
        let mut set = WordMultiset::new();
        set.insert(word, 1);
        set
    }
}

/// The shuffle product `w1 ⊔ w2`: every interleaving of the two words that
/// keeps the internal order of each, counted with multiplicity.
pub fn shuffle(w1: &Word, w2: &Word) -> Result<WordMultiset> {
    same_alphabet(w1, w2)?;
    let mut out = WordMultiset::new();
    for_each_shuffle(&w1.letters, &w2.letters, |letters| {
        *out.entries
            .entry(Word::from_raw(letters.to_vec(), w1.alphabet_size))
            .or_insert(0) += 1;
    });
    Ok(out)
}

/// Calls `visit` once per interleaving of `a` and `b` (so a word appears
/// as many times as its shuffle multiplicity).
pub(crate) fn for_each_shuffle(a: &[u8], b: &[u8], mut visit: impl FnMut(&[u8])) {
    let mut buf = Vec::with_capacity(a.len() + b.len());
    interleave(a, b, &mut buf, &mut visit);
}

fn interleave(a: &[u8], b: &[u8], buf: &mut Vec<u8>, visit: &mut impl FnMut(&[u8])) {
    if a.is_empty() || b.is_empty() {
        let mark = buf.len();
        buf.extend_from_slice(a);
        buf.extend_from_slice(b);
        visit(buf);
        buf.truncate(mark);
        return;
    }
    buf.push(a[0]);
    interleave(&a[1..], b, buf, visit);
    buf.pop();
    buf.push(b[0]);
    interleave(a, &b[1..], buf, visit);
    buf.pop();
}

/// All words with `min_len <= |w| <= max_len`, in shortlex order.
pub fn enumerate_words(alphabet_size: usize, min_len: usize, max_len: usize) -> Vec<Word> {
    let mut out = Vec::new();
    if alphabet_size == 0 || alphabet_size > MAX_ALPHABET {
        return out;
    }
    for len in min_len..=max_len {
        let count = alphabet_size.pow(len as u32);
        out.extend((0..count).map(|idx| Word::from_level_index(idx, len, alphabet_size)));
    }
    out
}

/// Closes a set of words under taking prefixes (the empty word included)
/// and returns it in shortlex order.
pub fn prefix_closure<'a>(words: impl IntoIterator<Item = &'a Word>) -> Vec<Word> {
    let mut set = std::collections::BTreeSet::new();
    for w in words {
        for k in 0..=w.len() {
            set.insert(Word::from_raw(w.letters[..k].to_vec(), w.alphabet_size));
        }
    }
    set.into_iter().collect()
}
