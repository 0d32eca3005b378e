//! Exhaustive maximum-likelihood decoding for small codes.

use crate::channel::modulate;
use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVector};

pub const MAX_ML_DIMENSION: usize = 20;

/// Every codeword of a small code with its antipodal image. Entry `u` is the
/// encoding of the message whose bit `i` is bit `i` of `u`.
#[derive(Debug, Clone)]
pub struct CodebookTable {
    codewords: Vec<BitVector>,
    symbols: Vec<Vec<f64>>,
}

impl CodebookTable {
    pub fn new(g: &BitMatrix) -> Result<Self> {
        let k = g.rows();
        if k > MAX_ML_DIMENSION {
            return Err(Error::CodebookTooLarge(k));
        }
        let mut codewords = Vec::with_capacity(1 << k);
        for u in 0u64..1 << k {
            let msg = BitVector::from_bits((0..k).map(|i| (u >> i) & 1 == 1));
            codewords.push(g.mat_vec_mul(&msg)?);
        }
        let symbols = codewords.iter().map(modulate).collect();
        Ok(CodebookTable { codewords, symbols })
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn codewords(&self) -> &[BitVector] {
        &self.codewords
    }

    pub fn symbols(&self) -> &[Vec<f64>] {
        &self.symbols
    }
}

/// Codeword maximizing the correlation `<y, x>`; lowest index wins ties.
pub fn ml_decode(y: &[f64], codebook: &CodebookTable) -> BitVector {
    let mut best = 0;
    let mut best_corr = f64::NEG_INFINITY;
    for (i, x) in codebook.symbols.iter().enumerate() {
        let corr: f64 = y.iter().zip(x).map(|(a, b)| a * b).sum();
        if corr > best_corr {
            best_corr = corr;
            best = i;
        }
    }
    codebook.codewords[best].clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{random_bits, transmit, ChannelParams, RngStream};
    use crate::code::{build_ebch_128_64, build_hamming};

    fn euclid_sq(y: &[f64], x: &[f64]) -> f64 {
        y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    fn argmin_distance(y: &[f64], table: &CodebookTable) -> BitVector {
        let mut best = 0;
        for i in 1..table.len() {
            if euclid_sq(y, &table.symbols()[i]) < euclid_sq(y, &table.symbols()[best]) {
                best = i;
            }
        }
        table.codewords()[best].clone()
    }

    #[test]
    fn table_shape() {
        let table = CodebookTable::new(&build_hamming(false).generator).unwrap();
        assert_eq!(table.len(), 16);
        assert!(matches!(
            CodebookTable::new(&build_ebch_128_64().unwrap().generator),
            Err(Error::CodebookTooLarge(64))
        ));
    }

    #[test]
    fn clean_reception_decodes_to_itself() {
        let code = build_hamming(true);
        let table = CodebookTable::new(&code.generator).unwrap();
        for c in table.codewords() {
            assert_eq!(&ml_decode(&modulate(c), &table), c);
        }
    }

    #[test]
    fn correlation_and_distance_agree() {
        let code = build_hamming(false);
        let table = CodebookTable::new(&code.generator).unwrap();
        let params = ChannelParams::from_ebn0_db(1.0, code.spec.rate());
        for i in 0..1000 {
            let mut rng = RngStream::new(21, i).rng();
            let c = code.encode(&random_bits(4, &mut rng)).unwrap();
            let y = transmit(&modulate(&c), &params, &mut rng);
            assert_eq!(ml_decode(&y, &table), argmin_distance(&y, &table));
        }
    }

    #[test]
    fn worked_example_matches_scan() {
        let table = CodebookTable::new(&build_hamming(false).generator).unwrap();
        let y = [0.9, 0.8, 0.7, 0.6, -0.1, 0.1, -0.1];
        let out = ml_decode(&y, &table);
        assert_eq!(out, argmin_distance(&y, &table));
        let d = euclid_sq(&y, &modulate(&out));
        for x in table.symbols() {
            assert!(d <= euclid_sq(&y, x) + 1e-12);
        }
    }
}
