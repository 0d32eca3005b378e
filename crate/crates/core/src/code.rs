//! Generator matrices for the codes used in experiments and tests.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVector};

/// Parameters of a binary linear block code `C(n, k, d_min)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSpec {
    pub name: String,
    pub n: usize,
    pub k: usize,
    /// Declared minimum distance. Not recomputed for large codes.
    pub d_min: usize,
}

impl CodeSpec {
    pub fn new(name: impl Into<String>, n: usize, k: usize, d_min: usize) -> Result<Self> {
        if k == 0 || k >= n {
            return Err(Error::Construction(format!(
                "need 0 < k < n, got n = {n}, k = {k}"
            )));
        }
        if d_min == 0 {
            return Err(Error::Construction("d_min must be at least 1".into()));
        }
        Ok(CodeSpec {
            name: name.into(),
            n,
            k,
            d_min,
        })
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }
}

/// A code together with a full-rank `k x n` generator matrix.
#[derive(Debug, Clone)]
pub struct Code {
    pub spec: CodeSpec,
    pub generator: BitMatrix,
}

impl Code {
    pub fn new(spec: CodeSpec, generator: BitMatrix) -> Result<Self> {
        if generator.rows() != spec.k || generator.cols() != spec.n {
            return Err(Error::Dimension(format!(
                "generator is {}x{} but code is ({}, {})",
                generator.rows(),
                generator.cols(),
                spec.n,
                spec.k
            )));
        }
        let rank = generator.rank();
        if rank != spec.k {
            return Err(Error::RankDeficient {
                rank,
                rows: spec.k,
            });
        }
        Ok(Code { spec, generator })
    }

    /// Looks up one of the built-in codes.
    pub fn by_name(name: &str) -> Result<Code> {
        match name {
            "ebch128" | "ebch-128-64" | "ebch(128,64,22)" => build_ebch_128_64(),
            "hamming74" | "hamming-7-4" => Ok(build_hamming(false)),
            "hamming84" | "hamming-8-4" => Ok(build_hamming(true)),
            other => Err(Error::Config(format!(
                "unknown code {other:?} (expected ebch128, hamming74 or hamming84)"
            ))),
        }
    }

    pub fn encode(&self, message: &BitVector) -> Result<BitVector> {
        self.generator.mat_vec_mul(message)
    }
}

/// The binary extension field GF(2^m) with log/antilog tables.
#[derive(Debug, Clone)]
pub struct Gf2mField {
    m: u32,
    poly: u32,
    exp: Vec<u32>,
    log: Vec<u32>,
}

impl Gf2mField {
    /// `poly` includes the `x^m` term, e.g. `0x89` for `x^7 + x^3 + 1`.
    pub fn new(m: u32, poly: u32) -> Result<Self> {
        if !(2..=16).contains(&m) || poly >> m != 1 {
            return Err(Error::Construction(format!(
                "polynomial {poly:#x} does not have degree {m}"
            )));
        }
        let order = (1usize << m) - 1;
        let mut exp = vec![0u32; 2 * order];
        let mut log = vec![0u32; order + 1];
        let mut x = 1u32;
        for i in 0..order {
            if i > 0 && x == 1 {
                return Err(Error::Construction(format!(
                    "polynomial {poly:#x} is not primitive: alpha has order {i}"
                )));
            }
            exp[i] = x;
            log[x as usize] = i as u32;
            x <<= 1;
            if x >> m != 0 {
                x ^= poly;
            }
        }
        if x != 1 {
            return Err(Error::Construction(format!(
                "polynomial {poly:#x} is not primitive"
            )));
        }
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        Ok(Gf2mField { m, poly, exp, log })
    }

    pub fn degree(&self) -> u32 {
        self.m
    }

    pub fn polynomial(&self) -> u32 {
        self.poly
    }

    /// Multiplicative group order `2^m - 1`.
    pub fn order(&self) -> usize {
        (1usize << self.m) - 1
    }

    pub fn alpha_pow(&self, e: usize) -> u32 {
        self.exp[e % self.order()]
    }

    pub fn mul(&self, a: u32, b: u32) -> u32 {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[(self.log[a as usize] + self.log[b as usize]) as usize]
        }
    }

    /// The cyclotomic coset `{s, 2s, 4s, ...} mod 2^m - 1`.
    pub fn cyclotomic_coset(&self, s: usize) -> BTreeSet<usize> {
        let order = self.order();
        let mut coset = BTreeSet::new();
        let mut e = s % order;
        while coset.insert(e) {
            e = (2 * e) % order;
        }
        coset
    }

    /// Minimal polynomial of `alpha^s` over GF(2), coefficients low degree first.
    pub fn minimal_polynomial(&self, s: usize) -> Result<Vec<bool>> {
        // Product of (x + alpha^e) over the coset, computed in GF(2^m)[x].
        let mut coeffs: Vec<u32> = vec![1];
        for e in self.cyclotomic_coset(s) {
            let root = self.alpha_pow(e);
            let mut next = vec![0u32; coeffs.len() + 1];
            for (i, &c) in coeffs.iter().enumerate() {
                next[i + 1] ^= c;
                next[i] ^= self.mul(c, root);
            }
            coeffs = next;
        }
        coeffs
            .into_iter()
            .map(|c| match c {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(Error::Construction(format!(
                    "minimal polynomial of alpha^{s} has a coefficient outside GF(2)"
                ))),
            })
            .collect()
    }
}

/// Multiplies two GF(2) polynomials (low degree first).
pub fn poly_mul(a: &[bool], b: &[bool]) -> Vec<bool> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![false; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] ^= y;
            }
        }
    }
    out
}

/// Remainder of GF(2) polynomial long division `num mod den`.
pub fn poly_rem(num: &[bool], den: &[bool]) -> Vec<bool> {
    let deg_den = den
        .iter()
        .rposition(|&c| c)
        .expect("division by the zero polynomial");
    let mut rem = num.to_vec();
    while let Some(top) = rem.iter().rposition(|&c| c) {
        if top < deg_den {
            break;
        }
        let shift = top - deg_den;
        for (j, &c) in den.iter().enumerate().take(deg_den + 1) {
            rem[shift + j] ^= c;
        }
    }
    rem.truncate(deg_den);
    rem
}

fn poly_degree(p: &[bool]) -> Option<usize> {
    p.iter().rposition(|&c| c)
}

/// Generator polynomial of the narrow-sense binary BCH code of length
/// `2^m - 1` with roots `alpha^1 .. alpha^(designed_distance - 1)`.
pub fn bch_generator_polynomial(field: &Gf2mField, designed_distance: usize) -> Result<Vec<bool>> {
    let mut seen = BTreeSet::new();
    let mut g = vec![true];
    for s in 1..designed_distance {
        let coset = field.cyclotomic_coset(s);
        let leader = *coset.iter().next().expect("coset is never empty");
        if seen.insert(leader) {
            g = poly_mul(&g, &field.minimal_polynomial(s)?);
        }
    }
    Ok(g)
}

/// Extended BCH(128, 64, 22): BCH(127, 64) over GF(2^7) with primitive
/// polynomial `x^7 + x^3 + 1`, cyclic generator rows `x^i g(x)`, and an overall
/// even-parity bit in the last column.
pub fn build_ebch_128_64() -> Result<Code> {
    let field = Gf2mField::new(7, 0x89)?;
    let n = field.order();
    let k = 64;
    let g = bch_generator_polynomial(&field, 21)?;
    let degree = poly_degree(&g).unwrap_or(0);
    if degree != n - k {
        return Err(Error::Construction(format!(
            "BCH(127,64) generator polynomial has degree {degree}, expected {}",
            n - k
        )));
    }
    let mut rows = Vec::with_capacity(k);
    for shift in 0..k {
        let mut row = BitVector::zeros(n + 1);
        let mut parity = false;
        for (j, &c) in g.iter().enumerate().take(degree + 1) {
            if c {
                row.set(shift + j, true);
                parity = !parity;
            }
        }
        row.set(n, parity);
        rows.push(row);
    }
    let spec = CodeSpec::new("eBCH(128,64,22)", n + 1, k, 22)?;
    Code::new(spec, BitMatrix::from_rows(rows)?)
}

/// Systematic Hamming(7,4,3), or the extended Hamming(8,4,4) with an overall
/// parity column appended.
pub fn build_hamming(extended: bool) -> Code {
    let base = ["1000110", "0100011", "0010111", "0001101"];
    let rows: Vec<String> = base
        .iter()
        .map(|r| {
            let mut s = r.to_string();
            if extended {
                let ones = r.bytes().filter(|&b| b == b'1').count();
                s.push(if ones % 2 == 1 { '1' } else { '0' });
            }
            s
        })
        .collect();
    let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
    let g = BitMatrix::parse_rows(&refs).expect("static Hamming matrix");
    let spec = if extended {
        CodeSpec::new("Hamming(8,4,4)", 8, 4, 4)
    } else {
        CodeSpec::new("Hamming(7,4,3)", 7, 4, 3)
    }
    .expect("static Hamming parameters");
    Code::new(spec, g).expect("Hamming generator has full rank")
}

/// Loads a generator matrix file. The minimum distance is computed exactly
/// when `k <= 20`; otherwise it is recorded as the trivial bound 1.
pub fn load_generator(path: impl AsRef<Path>) -> Result<Code> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let g = BitMatrix::from_text(&text)?;
    let (n, k) = (g.cols(), g.rows());
    let d_min = if k <= 20 && g.rank() == k {
        min_weight_exhaustive(&g)
    } else {
        1
    };
    let spec = CodeSpec::new(format!("file:{}", path.display()), n, k, d_min.max(1))?;
    Code::new(spec, g)
}

pub fn save_generator(path: impl AsRef<Path>, matrix: &BitMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, matrix.to_text()).map_err(|e| Error::io(path, e))
}

/// Minimum nonzero codeword weight by enumerating all `2^k` messages.
pub fn min_weight_exhaustive(g: &BitMatrix) -> usize {
    let k = g.rows();
    assert!(k <= 24, "exhaustive enumeration capped at k = 24");
    // Gray-code walk: one row XOR per codeword.
    let mut word = BitVector::zeros(g.cols());
    let mut best = usize::MAX;
    for i in 1u64..1 << k {
        word.xor_assign(g.row(i.trailing_zeros() as usize));
        let w = word.weight();
        if w > 0 {
            best = best.min(w);
        }
    }
    best
}
