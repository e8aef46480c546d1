//! Truncated signatures of piecewise-linear paths.
//!
//! A [`TruncatedSignature`] stores every iterated integral up to a fixed
//! level densely, one `n^k` array per level `k`, indexed by
//! [`Word::level_index`]. A linear segment contributes the tensor
//! exponential of its increment, and segments are glued with Chen's
//! identity.
//!
//! [`WordSignature`] computes only the entries of a prefix-closed word set,
//! which is what the estimator needs when the truncation level is large
//! (level 14 over two letters is 32k entries per path).

use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::words::{prefix_closure, Word};

#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSignature {
    dimension: usize,
    level: usize,
    levels: Vec<Vec<f64>>,
}

impl TruncatedSignature {
    /// The signature of a constant path: `(1, 0, 0, ...)`.
    pub fn identity(dimension: usize, level: usize) -> Self {
        let levels = (0..=level)
            .map(|k| {
                let mut v = vec![0.0; dimension.pow(k as u32)];
                if k == 0 {
                    v[0] = 1.0;
                }
                v
            })
            .collect();
        Self {
            dimension,
            level,
            levels,
        }
    }

    /// Builds a signature from per-level arrays. Level 0 must hold `[1.0]`
    /// for a group-like element, but any value is accepted so that averages
    /// and differences can be represented too.
    pub fn from_levels(dimension: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Empty("signature levels"));
        }
        for (k, arr) in levels.iter().enumerate() {
            if arr.len() != dimension.pow(k as u32) {
                return Err(Error::DimensionMismatch(format!(
                    "level {k} has {} entries, expected {}",
                    arr.len(),
                    dimension.pow(k as u32)
                )));
            }
        }
        Ok(Self {
            dimension,
            level: levels.len() - 1,
            levels,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn level_values(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    pub fn entry(&self, word: &Word) -> Result<f64> {
        if word.len() > self.level || word.raw().iter().any(|&l| l as usize > self.dimension) {
            return Err(self.out_of_range(word));
        }
        Ok(self.levels[word.len()][word.level_index(self.dimension)])
    }

    fn out_of_range(&self, word: &Word) -> Error {
        Error::WordOutOfRange {
            word: word.to_string(),
            dimension: self.dimension,
            level: self.level,
        }
    }

    /// Entries as `(word, value)` pairs in shortlex order.
    pub fn entries(&self) -> impl Iterator<Item = (Word, f64)> + '_ {
        self.levels.iter().enumerate().flat_map(move |(k, arr)| {
            arr.iter()
                .enumerate()
                .map(move |(idx, &v)| (Word::from_level_index(idx, k, self.dimension), v))
        })
    }

    /// Signature with every level-`k` entry multiplied by `lambda^k`.
    pub fn dilate(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        for (k, arr) in out.levels.iter_mut().enumerate() {
            let f = lambda.powi(k as i32);
            arr.iter_mut().for_each(|v| *v *= f);
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.levels
            .iter()
            .flatten()
            .zip(other.levels.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Right-multiplies in place by the tensor exponential of `increment`.
    fn extend_by_segment(&mut self, increment: &[f64]) {
        let n = self.dimension;
        // Descending level order so each update reads untouched lower levels.
        for k in (1..=self.level).rev() {
            // new_k = Σ_j old_j ⊗ Δ^{⊗(k-j)}/(k-j)!, in Horner form:
            // ((old_0 ⊗ Δ/k + old_1) ⊗ Δ/(k-1) + ...) ⊗ Δ/1 + old_k
            let mut acc = self.levels[0].clone();
            for j in 1..=k {
                let mut next = vec![0.0; n.pow(j as u32)];
                let scale = 1.0 / (k - j + 1) as f64;
                for (a, &va) in acc.iter().enumerate() {
                    if va == 0.0 {
                        continue;
                    }
                    let base = a * n;
                    for (i, &d) in increment.iter().enumerate() {
                        next[base + i] = va * d * scale;
                    }
                }
                for (slot, &old) in next.iter_mut().zip(self.levels[j].iter()) {
                    *slot += old;
                }
                acc = next;
            }
            self.levels[k] = acc;
        }
    }
}

/// Truncated tensor exponential of a single increment: the signature of a
/// straight segment.
pub fn segment_signature(increment: &[f64], level: usize) -> TruncatedSignature {
    let n = increment.len();
    let mut levels = Vec::with_capacity(level + 1);
    levels.push(vec![1.0]);
    for k in 1..=level {
        let prev: &Vec<f64> = &levels[k - 1];
        let mut cur = vec![0.0; prev.len() * n];
        let inv_k = 1.0 / k as f64;
        for (a, &va) in prev.iter().enumerate() {
            for (i, &d) in increment.iter().enumerate() {
                cur[a * n + i] = va * d * inv_k;
            }
        }
        levels.push(cur);
    }
    TruncatedSignature {
        dimension: n,
        level,
        levels,
    }
}

/// Chen's identity: the signature of the concatenated path.
pub fn chen_concat(left: &TruncatedSignature, right: &TruncatedSignature) -> Result<TruncatedSignature> {
    if left.dimension != right.dimension || left.level != right.level {
        return Err(Error::ShapeMismatch(
            left.dimension,
            right.dimension,
            left.level,
            right.level,
        ));
    }
    let n = left.dimension;
    let mut levels = Vec::with_capacity(left.level + 1);
    for k in 0..=left.level {
        let mut out = vec![0.0; n.pow(k as u32)];
        for j in 0..=k {
            let l = &left.levels[j];
            let r = &right.levels[k - j];
            let stride = r.len();
            for (a, &va) in l.iter().enumerate() {
                if va == 0.0 {
                    continue;
                }
                let row = &mut out[a * stride..(a + 1) * stride];
                for (slot, &vb) in row.iter_mut().zip(r.iter()) {
                    *slot += va * vb;
                }
            }
        }
        levels.push(out);
    }
    Ok(TruncatedSignature {
        dimension: n,
        level: left.level,
        levels,
    })
}

/// A path observed at discrete times; interpreted as its piecewise-linear
/// interpolant.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPath {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl SampledPath {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidPath(format!(
                "need at least two samples, got {}",
                times.len()
            )));
        }
        if times.len() != values.len() {
            return Err(Error::InvalidPath(format!(
                "{} times but {} points",
                times.len(),
                values.len()
            )));
        }
        let dim = values[0].len();
        if dim == 0 {
            return Err(Error::InvalidPath("zero-dimensional points".into()));
        }
        if let Some(bad) = values.iter().position(|v| v.len() != dim) {
            return Err(Error::InvalidPath(format!(
                "point {bad} has dimension {} instead of {dim}",
                values[bad].len()
            )));
        }
        if let Some(k) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPath(format!(
                "times not strictly increasing at index {}",
                k + 1
            )));
        }
        Ok(Self { times, values })
    }

    pub fn dimension(&self) -> usize {
        self.values[0].len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn start(&self) -> &[f64] {
        &self.values[0]
    }

    pub fn end(&self) -> &[f64] {
        &self.values[self.values.len() - 1]
    }

    pub fn increments(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.values
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect())
    }

    /// Sub-path on sample indices `from..=to`.
    pub fn slice(&self, from: usize, to: usize) -> Result<Self> {
        if to >= self.len() || from >= to {
            return Err(Error::InvalidPath(format!("bad slice {from}..={to}")));
        }
        Self::new(
            self.times[from..=to].to_vec(),
            self.values[from..=to].to_vec(),
        )
    }

    /// The same trace run backwards over the mirrored time grid.
    pub fn reversed(&self) -> Self {
        let t_end = self.times[self.times.len() - 1];
        let t0 = self.times[0];
        let times = self.times.iter().rev().map(|&t| t0 + t_end - t).collect();
        let values = self.values.iter().rev().cloned().collect();
        Self { times, values }
    }

    /// Linear interpolation of the path at time `t` (clamped to the grid).
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        let k = match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(k) => return self.values[k].clone(),
            Err(k) => k,
        };
        if k == 0 {
            return self.values[0].clone();
        }
        if k >= self.times.len() {
            return self.end().to_vec();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        self.values[k - 1]
            .iter()
            .zip(&self.values[k])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }

    pub fn to_csv_string(&self, comment: Option<&str>) -> String {
        let mut out = Vec::new();
        if let Some(c) = comment {
            out.extend_from_slice(format!("# {c}\n").as_bytes());
        }
        let mut w = csv::Writer::from_writer(&mut out);
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=self.dimension()).map(|i| format!("x{i}")))
            .collect();
        // Writing to a Vec cannot fail.
        w.write_record(&header).expect("in-memory write");
        for (t, v) in self.times.iter().zip(&self.values) {
            let row: Vec<String> = std::iter::once(t).chain(v).map(|x| format!("{x:?}")).collect();
            w.write_record(&row).expect("in-memory write");
        }
        w.flush().expect("in-memory write");
        drop(w);
        String::from_utf8(out).expect("csv output is UTF-8")
    }

    /// Parses the `t,x1,...,xn` CSV format. Lines starting with `#` are
    /// comments.
    pub fn from_csv_str(text: &str, origin: &str) -> Result<Self> {
        let fail = |message: String| Error::Format {
            path: origin.to_string(),
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let cols: Vec<String> = reader
            .headers()
            .map_err(|e| fail(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if cols.len() < 2 || cols[0] != "t" {
            return Err(fail(format!("header must be t,x1,...,xn; got `{}`", cols.join(","))));
        }
        for (i, c) in cols.iter().enumerate().skip(1) {
            if *c != format!("x{i}") {
                return Err(fail(format!("unexpected column `{c}`")));
            }
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| fail(e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            let fields: Vec<f64> = record
                .iter()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| fail(format!("line {line}: {e}")))?;
            times.push(fields[0]);
            values.push(fields[1..].to_vec());
        }
        Self::new(times, values).map_err(|e| fail(e.to_string()))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string(comment)).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text, &path.display().to_string())
    }
}

/// Signature of the piecewise-linear interpolant of `path`.
pub fn path_signature(path: &SampledPath, level: usize) -> TruncatedSignature {
    let mut sig = TruncatedSignature::identity(path.dimension(), level);
    for inc in path.increments() {
        sig.extend_by_segment(&inc);
    }
    sig
}

impl TruncatedSignature {
    pub fn to_json(&self) -> Value {
        let mut entries = Map::new();
        for (w, v) in self.entries() {
            entries.insert(w.to_string(), Value::from(v));
        }
        let mut obj = Map::new();
        obj.insert("dimension".into(), Value::from(self.dimension));
        obj.insert("level".into(), Value::from(self.level));
        obj.insert("entries".into(), Value::Object(entries));
        Value::Object(obj)
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let bad = |m: &str| Error::Format {
            path: "signature json".into(),
            message: m.to_string(),
        };
        let dimension = value["dimension"].as_u64().ok_or_else(|| bad("missing dimension"))? as usize;
        let level = value["level"].as_u64().ok_or_else(|| bad("missing level"))? as usize;
        let entries = value["entries"].as_object().ok_or_else(|| bad("missing entries"))?;
        let mut sig = TruncatedSignature::identity(dimension, level);
        sig.levels[0][0] = 0.0;
        for (key, v) in entries {
            let word = Word::parse(key, dimension)?;
            if word.len() > level {
                return Err(bad("word longer than level"));
            }
            sig.levels[word.len()][word.level_index(dimension)] =
                v.as_f64().ok_or_else(|| bad("non-numeric entry"))?;
        }
        Ok(sig)
    }
}

/// Signature entries restricted to a prefix-closed set of words.
///
/// Updating across a segment with increment `Δ` uses
/// `S'(w) = Σ_j S(w[..j]) · Π_{l>j} Δ_{w_l} / (|w|-j)!`, which only reads
/// prefixes of `w`; the cost per segment is `Σ |w|` over the set.
#[derive(Clone, Debug)]
pub struct WordSignature {
    dimension: usize,
    words: Vec<Word>,
    values: Vec<f64>,
}

/// Precomputed prefix indices for a [`WordSignature`] word set.
#[derive(Clone, Debug)]
pub struct WordSet {
    dimension: usize,
    words: Vec<Word>,
    prefix_index: Vec<Vec<usize>>,
    lookup: std::collections::HashMap<Word, usize>,
}

impl WordSet {
    /// Closes `words` under prefixes and indexes the result.
    pub fn new<'a>(dimension: usize, words: impl IntoIterator<Item = &'a Word>) -> Result<Self> {
        let mut widened = Vec::new();
        for w in words {
            widened.push(w.widen(dimension)?);
        }
        let mut closed = prefix_closure(widened.iter());
        if closed.is_empty() {
            closed.push(Word::empty(dimension));
        }
        let lookup: std::collections::HashMap<Word, usize> = closed
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        let prefix_index = closed
            .iter()
            .map(|w| {
                (0..=w.len())
                    .map(|k| lookup[&Word::from_raw(w.raw()[..k].to_vec(), dimension)])
                    .collect()
            })
            .collect();
        Ok(Self {
            dimension,
            words: closed,
            prefix_index,
            lookup,
        })
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn index_of(&self, word: &Word) -> Option<usize> {
        self.lookup.get(word).copied()
    }

    pub fn max_len(&self) -> usize {
        self.words.last().map_or(0, Word::len)
    }

    /// Signature entries of the piecewise-linear interpolant of `path`.
    pub fn signature(&self, path: &SampledPath) -> Result<WordSignature> {
        if path.dimension() != self.dimension {
            return Err(Error::DimensionMismatch(format!(
                "path dimension {} vs word set dimension {}",
                path.dimension(),
                self.dimension
            )));
        }
        let mut values = vec![0.0; self.words.len()];
        values[0] = 1.0;
        let max_len = self.max_len();
        let inv_fact: Vec<f64> = (0..=max_len)
            .scan(1.0, |acc, k| {
                if k > 0 {
                    *acc /= k as f64;
                }
                Some(*acc)
            })
            .collect();
        let mut tail = vec![0.0; max_len + 1];
        for inc in path.increments() {
            // Words are in shortlex order, so walking backwards updates long
            // words before the prefixes they read.
            for idx in (1..self.words.len()).rev() {
                let letters = self.words[idx].raw();
                let len = letters.len();
                // tail[j] = Π_{l>=j} Δ_{w_l}
                tail[len] = 1.0;
                for j in (0..len).rev() {
                    tail[j] = tail[j + 1] * inc[letters[j] as usize - 1];
                }
                let prefixes = &self.prefix_index[idx];
                let mut acc = 0.0;
                for j in 0..len {
                    acc += values[prefixes[j]] * tail[j] * inv_fact[len - j];
                }
                values[idx] += acc;
            }
        }
        Ok(WordSignature {
            dimension: self.dimension,
            words: self.words.clone(),
            values,
        })
    }
}

impl WordSignature {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn entry(&self, word: &Word) -> Option<f64> {
        self.words
            .binary_search(word)
            .ok()
            .map(|i| self.values[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::enumerate_words;

    fn w(letters: &[usize], n: usize) -> Word {
        Word::new(letters, n).unwrap()
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn scalar_segment_is_exponential_series() {
        let t: f64 = 0.7;
        let sig = segment_signature(&[t], 6);
        let mut fact = 1.0;
        for k in 0..=6 {
            if k > 0 {
                fact *= k as f64;
            }
            let word = Word::new(&vec![1; k], 1).unwrap();
            assert!(rel_close(sig.entry(&word).unwrap(), t.powi(k as i32) / fact, 1e-15));
        }
    }

    #[test]
    fn zero_increment_gives_identity() {
        assert_eq!(segment_signature(&[0.0, 0.0], 4), TruncatedSignature::identity(2, 4));
    }

    #[test]
    fn segment_entries() {
        let sig = segment_signature(&[2.0, 3.0], 2);
        assert_eq!(sig.entry(&Word::empty(2)).unwrap(), 1.0);
        assert_eq!(sig.entry(&w(&[2], 2)).unwrap(), 3.0);
        assert_eq!(sig.entry(&w(&[1, 2], 2)).unwrap(), 3.0);
        assert!(matches!(
            sig.entry(&w(&[1, 1, 1], 2)),
            Err(Error::WordOutOfRange { .. })
        ));
    }

    #[test]
    fn chen_of_collinear_segments() {
        let a = segment_signature(&[0.3, -0.2], 5);
        let b = segment_signature(&[0.6, -0.4], 5);
        let joined = chen_concat(&a, &b).unwrap();
        let direct = segment_signature(&[0.9, -0.6], 5);
        assert!(joined.max_abs_diff(&direct) < 1e-15);
    }

    #[test]
    fn chen_identity_neutral_and_level_two_formula() {
        let a = segment_signature(&[0.3, -0.2], 3);
        let id = TruncatedSignature::identity(2, 3);
        assert_eq!(chen_concat(&a, &id).unwrap(), a);
        let b = segment_signature(&[-1.1, 0.5], 3);
        let ab = chen_concat(&a, &b).unwrap();
        for i1 in 1..=2 {
            for i2 in 1..=2 {
                let word = w(&[i1, i2], 2);
                let expected = a.entry(&word).unwrap()
                    + a.entry(&w(&[i1], 2)).unwrap() * b.entry(&w(&[i2], 2)).unwrap()
                    + b.entry(&word).unwrap();
                assert!(rel_close(ab.entry(&word).unwrap(), expected, 1e-15));
            }
        }
    }

    #[test]
    fn chen_rejects_shape_mismatch() {
        let a = segment_signature(&[1.0, 2.0], 2);
        let b = segment_signature(&[1.0, 2.0], 3);
        assert!(chen_concat(&a, &b).is_err());
    }

    #[test]
    fn straight_line_sampled_densely() {
        let times: Vec<f64> = (0..100).map(|k| k as f64 / 99.0).collect();
        let values = times.iter().map(|&t| vec![2.0 * t, -t, 0.5 * t]).collect();
        let path = SampledPath::new(times, values).unwrap();
        let sig = path_signature(&path, 4);
        let direct = segment_signature(&[2.0, -1.0, 0.5], 4);
        for (a, b) in sig.levels.iter().flatten().zip(direct.levels.iter().flatten()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-12));
        }
    }

    #[test]
    fn parabola_iterated_integrals() {
        // ∫ t d(t²) = 2/3 and ∫ t² dt = 1/3 on [0,1]; trapezoid-like
        // error of the polyline is O(h²).
        let n = 2000;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let values = times.iter().map(|&t| vec![t, t * t]).collect();
        let sig = path_signature(&SampledPath::new(times, values).unwrap(), 2);
        assert!((sig.entry(&w(&[1, 2], 2)).unwrap() - 2.0 / 3.0).abs() < 1e-6);
        assert!((sig.entry(&w(&[2, 1], 2)).unwrap() - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn path_then_reverse_is_identity() {
        let times: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let values = times
            .iter()
            .map(|&t| vec![(t * 0.3).sin(), (t * 0.7).cos()])
            .collect();
        let path = SampledPath::new(times, values).unwrap();
        let fwd = path_signature(&path, 4);
        let back = path_signature(&path.reversed(), 4);
        let id = chen_concat(&fwd, &back).unwrap();
        assert!(id.max_abs_diff(&TruncatedSignature::identity(2, 4)) < 1e-9);
    }

    #[test]
    fn word_signature_matches_dense() {
        let times: Vec<f64> = (0..30).map(|k| k as f64 * 0.1).collect();
        let values = times
            .iter()
            .map(|&t| vec![t, (3.0 * t).sin(), t * t - 1.0])
            .collect();
        let path = SampledPath::new(times, values).unwrap();
        let dense = path_signature(&path, 4);
        let words = enumerate_words(3, 0, 4);
        let set = WordSet::new(3, words.iter()).unwrap();
        let sparse = set.signature(&path).unwrap();
        for word in &words {
            let a = dense.entry(word).unwrap();
            let b = sparse.entry(word).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{word}: {a} vs {b}");
        }
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let path = SampledPath::new(vec![0.0, 0.5, 1.0], vec![vec![1.0, 2.0], vec![1.5, -0.25], vec![0.1, 3.0]])
            .unwrap();
        let text = path.to_csv_string(Some("config_hash=abc"));
        assert!(text.starts_with("# config_hash=abc\nt,x1,x2\n"));
        assert_eq!(SampledPath::from_csv_str(&text, "mem").unwrap(), path);
        assert!(SampledPath::from_csv_str("t,x1\n0,1\n0,2\n", "mem").is_err());
        assert!(SampledPath::from_csv_str("t,y\n0,1\n1,2\n", "mem").is_err());
        assert!(SampledPath::new(vec![0.0], vec![vec![1.0]]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let sig = segment_signature(&[0.5, -1.5], 3);
        let json = sig.to_json();
        let keys: Vec<&String> = json["entries"].as_object().unwrap().keys().take(4).collect();
        assert_eq!(keys, ["()", "(1)", "(2)", "(1,1)"]);
        assert_eq!(TruncatedSignature::from_json(&json).unwrap(), sig);
    }
}
