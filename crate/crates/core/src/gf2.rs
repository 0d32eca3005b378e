//! Bit-packed vectors and matrices over GF(2).
//!
//! Rows are stored as runs of `u64` words with bit `j` of the row living in
//! word `j / 64` at bit position `j % 64`. Bits past the logical length are
//! always kept at zero so word-wise comparisons and popcounts are exact.

use std::fmt;

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

#[inline]
fn words_for(len: usize) -> usize {
    len.div_ceil(WORD_BITS)
}

/// A fixed-length binary vector.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        BitVector {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for bit in bits {
            if len % WORD_BITS == 0 {
                words.push(0);
            }
            if bit {
                words[len / WORD_BITS] |= 1 << (len % WORD_BITS);
            }
            len += 1;
        }
        BitVector { len, words }
    }

    /// Parses a string of `0`/`1` characters, first character = index 0.
    pub fn parse(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for (i, ch) in s.chars().enumerate() {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => {
                    return Err(Error::Parse(format!(
                        "invalid bit character {other:?} at position {i}"
                    )))
                }
            }
        }
        Ok(BitVector::from_bits(bits))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.words[i / WORD_BITS] ^= 1u64 << (i % WORD_BITS);
    }

    /// In-place XOR. Panics on length mismatch.
    #[inline]
    pub fn xor_assign(&mut self, other: &BitVector) {
        assert_eq!(self.len, other.len, "xor of vectors with different lengths");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= *b;
        }
    }

    pub fn xor(&self, other: &BitVector) -> BitVector {
        let mut out = self.clone();
        out.xor_assign(other);
        out
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Indices of set bits in increasing order.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    None
                } else {
                    let tz = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    Some(wi * WORD_BITS + tz)
                }
            })
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Returns `out` with `out[j] = self[perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> BitVector {
        assert_eq!(perm.len(), self.len);
        BitVector::from_bits(perm.iter().map(|&src| self.get(src)))
    }

    /// Copies the first `len` bits.
    pub fn prefix(&self, len: usize) -> BitVector {
        assert!(len <= self.len);
        BitVector::from_bits((0..len).map(|i| self.get(i)))
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for bit in self.iter() {
            f.write_str(if bit { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

/// A dense binary matrix stored as bit-packed rows.
#[derive(Clone, PartialEq, Eq)]
pub struct BitMatrix {
    cols: usize,
    rows: Vec<BitVector>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BitMatrix {
            cols,
            rows: vec![BitVector::zeros(cols); rows],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = BitMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_rows(rows: Vec<BitVector>) -> Result<Self> {
        let cols = rows.first().map_or(0, BitVector::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::Dimension(format!(
                "row {bad} has length {} but row 0 has length {cols}",
                rows[bad].len()
            )));
        }
        Ok(BitMatrix { cols, rows })
    }

    /// Builds a matrix from `0`/`1` strings, one per row.
    pub fn parse_rows(rows: &[&str]) -> Result<Self> {
        let rows = rows
            .iter()
            .map(|r| BitVector::parse(r))
            .collect::<Result<Vec<_>>>()?;
        BitMatrix::from_rows(rows)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &BitVector {
        &self.rows[i]
    }

    pub fn row_vectors(&self) -> &[BitVector] {
        &self.rows
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.rows[r].get(c)
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        self.rows[r].set(c, value)
    }

    pub fn column(&self, c: usize) -> BitVector {
        BitVector::from_bits(self.rows.iter().map(|r| r.get(c)))
    }

    /// Row-vector times matrix: `out[j] = XOR_i (v[i] AND m[i][j])`.
    pub fn mat_vec_mul(&self, v: &BitVector) -> Result<BitVector> {
        if v.len() != self.rows() {
            return Err(Error::Dimension(format!(
                "vector of length {} times {}x{} matrix",
                v.len(),
                self.rows(),
                self.cols
            )));
        }
        let mut out = BitVector::zeros(self.cols);
        for i in v.iter_ones() {
            out.xor_assign(&self.rows[i]);
        }
        Ok(out)
    }

    /// Returns the matrix with `out[.][j] = self[.][perm[j]]`.
    pub fn permute_columns(&self, perm: &[usize]) -> BitMatrix {
        assert_eq!(perm.len(), self.cols);
        BitMatrix {
            cols: self.cols,
            rows: self.rows.iter().map(|r| r.permuted(perm)).collect(),
        }
    }

    pub fn swap_columns(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for row in &mut self.rows {
            let (x, y) = (row.get(a), row.get(b));
            row.set(a, y);
            row.set(b, x);
        }
    }

    fn xor_row_into(&mut self, src: usize, dst: usize) {
        debug_assert_ne!(src, dst);
        let (lo, hi) = self.rows.split_at_mut(src.max(dst));
        let (s, d) = if src < dst {
            (&lo[src], &mut hi[0])
        } else {
            (&hi[0], &mut lo[dst])
        };
        d.xor_assign(s);
    }

    /// Gaussian elimination rank.
    pub fn rank(&self) -> usize {
        let mut rows = self.rows.clone();
        let mut rank = 0;
        for c in 0..self.cols {
            let Some(p) = (rank..rows.len()).find(|&r| rows[r].get(c)) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot = rows[rank].clone();
            for r in rank + 1..rows.len() {
                if rows[r].get(c) {
                    rows[r].xor_assign(&pivot);
                }
            }
            rank += 1;
            if rank == rows.len() {
                break;
            }
        }
        rank
    }

    /// Gauss-Jordan reduction to `[I_K | P]`.
    ///
    /// Columns are scanned left to right. When column `j` has no pivot in the
    /// remaining rows it is swapped with the nearest later column that does.
    /// The returned permutation maps output column `j` to input column
    /// `perm[j]`, so `self.permute_columns(&perm)` spans the same row space as
    /// the returned matrix.
    pub fn systematize(&self) -> Result<(BitMatrix, Vec<usize>)> {
        let k = self.rows();
        if k > self.cols {
            return Err(Error::RankDeficient {
                rank: self.rank(),
                rows: k,
            });
        }
        let mut m = self.clone();
        let mut perm: Vec<usize> = (0..self.cols).collect();
        for j in 0..k {
            let mut pivot = (j..k).find(|&r| m.get(r, j));
            if pivot.is_none() {
                let found = (j + 1..m.cols)
                    .find_map(|c| (j..k).find(|&r| m.get(r, c)).map(|r| (c, r)));
                let Some((c, r)) = found else {
                    return Err(Error::RankDeficient { rank: j, rows: k });
                };
                m.swap_columns(j, c);
                perm.swap(j, c);
                pivot = Some(r);
            }
            let p = pivot.expect("pivot located above");
            m.rows.swap(j, p);
            for r in 0..k {
                if r != j && m.get(r, j) {
                    m.xor_row_into(j, r);
                }
            }
        }
        Ok((m, perm))
    }

    /// Serializes to the generator-matrix text format: `"N K"` followed by
    /// `K` lines of `N` bits.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.cols, self.rows());
        for row in &self.rows {
            s.push_str(&row.to_string());
            s.push('\n');
        }
        s
    }

    /// Parses the generator-matrix text format.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
        let dims: Vec<&str> = header.split(' ').collect();
        let [n, k] = dims.as_slice() else {
            return Err(Error::Parse(format!("bad header line {header:?}")));
        };
        let n: usize = n
            .parse()
            .map_err(|_| Error::Parse(format!("bad column count {n:?}")))?;
        let k: usize = k
            .parse()
            .map_err(|_| Error::Parse(format!("bad row count {k:?}")))?;
        let mut rows = Vec::with_capacity(k);
        for (i, line) in lines.enumerate() {
            if i >= k {
                return Err(Error::Parse(format!(
                    "expected {k} rows, found more (line {})",
                    i + 2
                )));
            }
            let row = BitVector::parse(line)
                .map_err(|e| Error::Parse(format!("row {i}: {e}")))?;
            if row.len() != n {
                return Err(Error::Parse(format!(
                    "row {i} has {} bits, expected {n}",
                    row.len()
                )));
            }
            rows.push(row);
        }
        if rows.len() != k {
            return Err(Error::Parse(format!(
                "expected {k} rows, found {}",
                rows.len()
            )));
        }
        Ok(BitMatrix { cols: n, rows })
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{} [", self.rows(), self.cols)?;
        for row in &self.rows {
            writeln!(f, "  {row}")?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> BitMatrix {
        let rows = (0..rows)
            .map(|_| BitVector::from_bits((0..cols).map(|_| rng.random::<bool>())))
            .collect();
        BitMatrix::from_rows(rows).unwrap()
    }

    fn span(m: &BitMatrix) -> HashSet<BitVector> {
        let k = m.rows();
        (0u32..1 << k)
            .map(|u| {
                let msg = BitVector::from_bits((0..k).map(|i| (u >> i) & 1 == 1));
                m.mat_vec_mul(&msg).unwrap()
            })
            .collect()
    }

    // Independent rank routine on plain bool rows.
    fn rank_oracle(m: &BitMatrix) -> usize {
        let mut rows: Vec<Vec<bool>> = m.row_vectors().iter().map(|r| r.iter().collect()).collect();
        let mut rank = 0;
        for c in 0..m.cols() {
            if let Some(p) = (rank..rows.len()).find(|&r| rows[r][c]) {
                rows.swap(rank, p);
                for r in 0..rows.len() {
                    if r != rank && rows[r][c] {
                        for cc in 0..m.cols() {
                            let v = rows[rank][cc];
                            rows[r][cc] ^= v;
                        }
                    }
                }
                rank += 1;
            }
        }
        rank
    }

    #[test]
    fn identity_times_vector() {
        let v = BitVector::parse("1011").unwrap();
        assert_eq!(BitMatrix::identity(4).mat_vec_mul(&v).unwrap(), v);
    }

    #[test]
    fn small_product() {
        let m = BitMatrix::parse_rows(&["11", "01"]).unwrap();
        let v = BitVector::parse("11").unwrap();
        assert_eq!(m.mat_vec_mul(&v).unwrap().to_string(), "10");
    }

    #[test]
    fn zero_vector_maps_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_matrix(&mut rng, 5, 70);
        assert!(m.mat_vec_mul(&BitVector::zeros(5)).unwrap().is_zero());
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let m = BitMatrix::identity(3);
        assert!(matches!(
            m.mat_vec_mul(&BitVector::zeros(4)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn systematic_input_is_unchanged() {
        let m = BitMatrix::parse_rows(&["1000110", "0100011", "0010111", "0001101"]).unwrap();
        let (s, perm) = m.systematize().unwrap();
        assert_eq!(s, m);
        assert_eq!(perm, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn row_shuffled_systematic_is_recovered() {
        let m = BitMatrix::parse_rows(&["1000110", "0100011", "0010111", "0001101"]).unwrap();
        let shuffled = BitMatrix::from_rows(vec![
            m.row(2).clone(),
            m.row(0).xor(m.row(3)),
            m.row(3).clone(),
            m.row(1).xor(m.row(2)),
        ])
        .unwrap();
        let (s, perm) = shuffled.systematize().unwrap();
        assert_eq!(s, m);
        assert_eq!(perm, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn zero_first_column_forces_swap_and_keeps_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let k = rng.random_range(2..=10);
            let n = k + rng.random_range(2..8);
            let mut m = random_matrix(&mut rng, k, n);
            for r in 0..k {
                m.set(r, 0, false);
            }
            if m.rank() < k {
                continue;
            }
            let (s, perm) = m.systematize().unwrap();
            assert_ne!(perm[0], 0);
            for i in 0..k {
                for j in 0..k {
                    assert_eq!(s.get(i, j), i == j);
                }
            }
            assert_eq!(span(&s), span(&m.permute_columns(&perm)));
        }
    }

    #[test]
    fn rank_deficient_is_error() {
        let m = BitMatrix::parse_rows(&["1010", "1010"]).unwrap();
        assert!(matches!(m.systematize(), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(BitMatrix::identity(6).rank(), 6);
        assert_eq!(BitMatrix::parse_rows(&["0110", "0110"]).unwrap().rank(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let m = random_matrix(&mut rng, 6, 10);
            assert_eq!(m.rank(), rank_oracle(&m));
        }
    }

    #[test]
    fn text_round_trip_and_errors() {
        let mut m = BitMatrix::zeros(4, 7);
        for i in 0..4 {
            m.set(i, i, true);
        }
        let back = BitMatrix::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert!(BitMatrix::from_text("7 4\n1000000\n0100000\n0010000\n").is_err());
        assert!(BitMatrix::from_text("3 1\n102\n").is_err());
        assert!(BitMatrix::from_text("3 1\n10\n").is_err());
    }

    proptest! {
        #[test]
        fn mat_vec_mul_is_linear(seed in any::<u64>(), k in 1usize..12, n in 1usize..150) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_matrix(&mut rng, k, n);
            let a = BitVector::from_bits((0..k).map(|_| rng.random::<bool>()));
            let b = BitVector::from_bits((0..k).map(|_| rng.random::<bool>()));
            let lhs = m.mat_vec_mul(&a.xor(&b)).unwrap();
            let rhs = m.mat_vec_mul(&a).unwrap().xor(&m.mat_vec_mul(&b).unwrap());
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn systematic_encoding_copies_message(seed in any::<u64>(), k in 1usize..=10, extra in 1usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_matrix(&mut rng, k, k + extra);
            prop_assume!(m.rank() == k);
            let (s, perm) = m.systematize().unwrap();
            let u = BitVector::from_bits((0..k).map(|_| rng.random::<bool>()));
            prop_assert_eq!(s.mat_vec_mul(&u).unwrap().prefix(k), u);
            prop_assert_eq!(span(&s), span(&m.permute_columns(&perm)));
        }

        #[test]
        fn padding_bits_stay_zero(bits in proptest::collection::vec(any::<bool>(), 0..200)) {
            let v = BitVector::from_bits(bits.iter().copied());
            prop_assert_eq!(v.weight(), bits.iter().filter(|&&b| b).count());
            prop_assert_eq!(v.iter_ones().count(), v.weight());
        }
    }
}
