//! Ordered statistics decoding.
//!
//! A reception `y` is reordered by reliability `|y_i|` (permutation
//! `lambda1`), the most reliable independent columns of the permuted
//! generator are moved to the front (`lambda2`), and the result is reduced to
//! `[I_K | P]`. Order-`l` reprocessing then flips every set of at most `l`
//! basis hard decisions and keeps the re-encoded candidate closest to the
//! permuted reception.

use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVector};

/// `z >= 0` decides 1, so `sign(0)` counts as positive.
#[inline]
pub fn hard_decision(z: f64) -> bool {
    z >= 0.0
}

/// Per-reception decoder state.
#[derive(Debug, Clone)]
pub struct OsdContext {
    lambda1: Vec<usize>,
    lambda2: Vec<usize>,
    // composite[j] = lambda1[lambda2[j]]: original index of permuted position j.
    composite: Vec<usize>,
    z: Vec<f64>,
    abs_z: Vec<f64>,
    z_hard: BitVector,
    hard_all: BitVector,
    g_sys: BitMatrix,
    order0: BitVector,
    // Sum of (|z_i| - 1)^2: squared distance to the all-agreeing sign pattern.
    base_sq_distance: f64,
}

impl OsdContext {
    pub fn build(y: &[f64], g: &BitMatrix) -> Result<Self> {
        let (k, n) = (g.rows(), g.cols());
        if y.len() != n {
            return Err(Error::Dimension(format!(
                "reception of length {} for a code of length {n}",
                y.len()
            )));
        }
        let abs_y: Vec<f64> = y.iter().map(|v| v.abs()).collect();
        let mut lambda1: Vec<usize> = (0..n).collect();
        lambda1.sort_by(|&a, &b| abs_y[b].total_cmp(&abs_y[a]));

        let g1 = g.permute_columns(&lambda1);
        let kept = most_reliable_basis(&g1)?;
        let mut is_kept = vec![false; n];
        for &j in &kept {
            is_kept[j] = true;
        }
        let mut lambda2 = kept;
        lambda2.extend((0..n).filter(|&j| !is_kept[j]));

        let (g_sys, swaps) = g1.permute_columns(&lambda2).systematize()?;
        if swaps.iter().enumerate().any(|(i, &p)| i != p) {
            return Err(Error::RankDeficient {
                rank: k - 1,
                rows: k,
            });
        }

        let composite: Vec<usize> = lambda2.iter().map(|&j| lambda1[j]).collect();
        let z: Vec<f64> = composite.iter().map(|&i| y[i]).collect();
        let abs_z: Vec<f64> = z.iter().map(|v| v.abs()).collect();
        let hard_all = BitVector::from_bits(z.iter().map(|&v| hard_decision(v)));
        let z_hard = hard_all.prefix(k);
        let order0 = g_sys.mat_vec_mul(&z_hard)?;
        let base_sq_distance = abs_z.iter().map(|a| (a - 1.0) * (a - 1.0)).sum();

        Ok(OsdContext {
            lambda1,
            lambda2,
            composite,
            z,
            abs_z,
            z_hard,
            hard_all,
            g_sys,
            order0,
            base_sq_distance,
        })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn k(&self) -> usize {
        self.z_hard.len()
    }

    pub fn lambda1(&self) -> &[usize] {
        &self.lambda1
    }

    pub fn lambda2(&self) -> &[usize] {
        &self.lambda2
    }

    /// Reception in decoding order.
    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn z_hard(&self) -> &BitVector {
        &self.z_hard
    }

    pub fn g_sys(&self) -> &BitMatrix {
        &self.g_sys
    }

    /// The order-0 re-encoded codeword `a0`, in decoding order.
    pub fn order0_codeword(&self) -> &BitVector {
        &self.order0
    }

    /// Maps a decoding-order word back to the original coordinate order.
    pub fn to_original(&self, a: &BitVector) -> BitVector {
        let mut c = BitVector::zeros(a.len());
        for (j, &orig) in self.composite.iter().enumerate() {
            if a.get(j) {
                c.set(orig, true);
            }
        }
        c
    }

    /// Maps an original-order word into decoding order.
    pub fn to_decoding_order(&self, c: &BitVector) -> BitVector {
        c.permuted(&self.composite)
    }

    /// Euclidean distance between `z` and the antipodal image of `a`.
    pub fn distance(&self, a: &BitVector) -> f64 {
        let mut sq = 0.0;
        for (j, &zj) in self.z.iter().enumerate() {
            let x = if a.get(j) { 1.0 } else { -1.0 };
            sq += (zj - x) * (zj - x);
        }
        sq.sqrt()
    }

    // Sum of |z_i| over positions where the candidate disagrees with the hard
    // decisions. ||z - x||^2 = base_sq_distance + 4 * discrepancy.
    #[inline]
    fn discrepancy(&self, words: &[u64]) -> f64 {
        let mut sum = 0.0;
        for (wi, &w) in words.iter().enumerate() {
            let mut rest = w;
            while rest != 0 {
                let tz = rest.trailing_zeros() as usize;
                sum += self.abs_z[wi * 64 + tz];
                rest &= rest - 1;
            }
        }
        sum
    }

    fn distance_from_discrepancy(&self, d: f64) -> f64 {
        (self.base_sq_distance + 4.0 * d).max(0.0).sqrt()
    }
}

/// Greedy scan in column order keeping each column that raises the rank.
fn most_reliable_basis(g1: &BitMatrix) -> Result<Vec<usize>> {
    let k = g1.rows();
    let mut rows: Vec<BitVector> = g1.row_vectors().to_vec();
    let mut kept = Vec::with_capacity(k);
    for j in 0..g1.cols() {
        let rank = kept.len();
        if rank == k {
            break;
        }
        let Some(p) = (rank..k).find(|&r| rows[r].get(j)) else {
            continue;
        };
        rows.swap(rank, p);
        let (top, below) = rows.split_at_mut(rank + 1);
        let pivot = &top[rank];
        for row in below.iter_mut() {
            if row.get(j) {
                row.xor_assign(pivot);
            }
        }
        kept.push(j);
    }
    if kept.len() < k {
        return Err(Error::RankDeficient {
            rank: kept.len(),
            rows: k,
        });
    }
    Ok(kept)
}

/// Outcome of one decoding attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Decoded codeword in the original coordinate order.
    pub codeword: BitVector,
    pub order_used: usize,
    pub teps_evaluated: u64,
    /// `||z - x||_2` for the chosen candidate.
    pub best_distance: f64,
}

/// Number of test error patterns of weight at most `l` on `k` positions.
pub fn tep_count(k: usize, l: usize) -> u128 {
    let mut total = 0u128;
    let mut binom = 1u128;
    for i in 0..=l.min(k) {
        if i > 0 {
            binom = binom * (k - i + 1) as u128 / i as u128;
        }
        total += binom;
    }
    total
}

/// Smallest order guaranteeing asymptotic optimality:
/// `min(ceil(d_min / 4 - 1), k)`, floored at zero.
pub fn asymptotic_order(d_min: usize, k: usize) -> usize {
    let num = d_min as i64 - 4;
    let ceil = if num <= 0 { -((-num) / 4) } else { (num + 3) / 4 };
    (ceil.max(0) as usize).min(k)
}

/// Iterator over all length-`k` test error patterns of weight `<= l`.
///
/// Patterns come in nondecreasing weight. Within a weight, flip sets are in
/// lexicographic order over positions ranked least reliable first
/// (`k-1, k-2, ..., 0`).
#[derive(Debug, Clone)]
pub struct TestErrorPatterns {
    k: usize,
    max_weight: usize,
    // Combination of ranks t (position = k - 1 - t); None once exhausted.
    ranks: Option<Vec<usize>>,
}

pub fn enumerate_teps(k: usize, l: usize) -> TestErrorPatterns {
    assert!(l <= k, "order {l} exceeds dimension {k}");
    TestErrorPatterns {
        k,
        max_weight: l,
        ranks: Some(Vec::new()),
    }
}

impl TestErrorPatterns {
    fn advance(&mut self) {
        let Some(ranks) = self.ranks.as_mut() else {
            return;
        };
        let w = ranks.len();
        // Rightmost rank that can still move up.
        let mut i = w;
        while i > 0 {
            i -= 1;
            if ranks[i] < self.k - w + i {
                ranks[i] += 1;
                for t in i + 1..w {
                    ranks[t] = ranks[t - 1] + 1;
                }
                return;
            }
        }
        if w < self.max_weight {
            *ranks = (0..w + 1).collect();
        } else {
            self.ranks = None;
        }
    }

    /// Returns the next flip set as basis positions.
    pub fn next_positions(&mut self) -> Option<Vec<usize>> {
        let out = self
            .ranks
            .as_ref()?
            .iter()
            .map(|&t| self.k - 1 - t)
            .collect();
        self.advance();
        Some(out)
    }
}

impl Iterator for TestErrorPatterns {
    type Item = BitVector;

    fn next(&mut self) -> Option<BitVector> {
        let positions = self.next_positions()?;
        let mut v = BitVector::zeros(self.k);
        for p in positions {
            v.set(p, true);
        }
        Some(v)
    }
}

/// Order-0 decoding: re-encode the basis hard decisions.
pub fn decode_order0(ctx: &OsdContext) -> DecodeResult {
    let mut d = ctx.order0.clone();
    d.xor_assign(&ctx.hard_all);
    DecodeResult {
        codeword: ctx.to_original(&ctx.order0),
        order_used: 0,
        teps_evaluated: 1,
        best_distance: ctx.distance_from_discrepancy(ctx.discrepancy(d.words())),
    }
}

/// Order-`l` reprocessing over every TEP of weight at most `l`.
pub fn decode(ctx: &OsdContext, l: usize) -> DecodeResult {
    decode_up_to(ctx, l)
        .pop()
        .expect("decode_up_to returns one result per order")
}

/// Runs order-`l` reprocessing once and reports the result every order
/// `0..=l` would have produced. Enumeration is weight-ordered, so the best
/// candidate after finishing weight `i` is exactly the order-`i` decision.
pub fn decode_up_to(ctx: &OsdContext, l: usize) -> Vec<DecodeResult> {
    let k = ctx.k();
    assert!(l <= k, "order {l} exceeds dimension {k}");
    let nwords = ctx.hard_all.words().len();

    let mut d0 = ctx.order0.clone();
    d0.xor_assign(&ctx.hard_all);
    let mut search = Search {
        ctx,
        best_metric: ctx.discrepancy(d0.words()),
        best_flips: Vec::new(),
        flips: Vec::with_capacity(l),
        stack: vec![0u64; nwords * (l + 1)],
        nwords,
    };
    search.stack[..nwords].copy_from_slice(d0.words());

    let mut results = Vec::with_capacity(l + 1);
    results.push(search.snapshot(0));
    for w in 1..=l {
        search.visit(0, w);
        results.push(search.snapshot(w));
    }
    results
}

struct Search<'a> {
    ctx: &'a OsdContext,
    best_metric: f64,
    best_flips: Vec<usize>,
    flips: Vec<usize>,
    // stack[depth * nwords ..] holds the discrepancy after `depth` flips.
    stack: Vec<u64>,
    nwords: usize,
}

impl Search<'_> {
    fn visit(&mut self, first_rank: usize, remaining: usize) {
        let k = self.ctx.k();
        let depth = self.flips.len();
        let nw = self.nwords;
        for t in first_rank..=k - remaining {
            let pos = k - 1 - t;
            let row = self.ctx.g_sys.row(pos).words();
            let (parent, child) = self.stack.split_at_mut((depth + 1) * nw);
            let parent = &parent[depth * nw..];
            let child = &mut child[..nw];
            for i in 0..nw {
                child[i] = parent[i] ^ row[i];
            }
            self.flips.push(pos);
            if remaining == 1 {
                let metric = self.ctx.discrepancy(child);
                if metric < self.best_metric {
                    self.best_metric = metric;
                    self.best_flips.clone_from(&self.flips);
                }
            } else {
                self.visit(t + 1, remaining - 1);
            }
            self.flips.pop();
        }
    }

    fn snapshot(&self, order: usize) -> DecodeResult {
        let mut a = self.ctx.order0.clone();
        for &p in &self.best_flips {
            a.xor_assign(self.ctx.g_sys.row(p));
        }
        DecodeResult {
            codeword: self.ctx.to_original(&a),
            order_used: order,
            teps_evaluated: tep_count(self.ctx.k(), order) as u64,
            best_distance: self.ctx.distance_from_discrepancy(self.best_metric),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{modulate, random_bits, transmit, ChannelParams, RngStream};
    use crate::code::{build_ebch_128_64, build_hamming, Code};
    use std::collections::HashSet;

    fn noisy(code: &Code, ebn0: f64, stream: RngStream) -> (BitVector, Vec<f64>) {
        let mut rng = stream.rng();
        let msg = random_bits(code.spec.k, &mut rng);
        let c = code.encode(&msg).unwrap();
        let params = ChannelParams::from_ebn0_db(ebn0, code.spec.rate());
        let y = transmit(&modulate(&c), &params, &mut rng);
        (c, y)
    }

    fn in_code(code: &Code, c: &BitVector) -> bool {
        let (sys, perm) = code.generator.systematize().unwrap();
        let cp = c.permuted(&perm);
        sys.mat_vec_mul(&cp.prefix(code.spec.k)).unwrap() == cp
    }

    // Direct form: re-encode (z_hard xor v) for every pattern.
    fn naive_decode(ctx: &OsdContext, l: usize) -> (BitVector, f64, u64) {
        let mut best: Option<(BitVector, f64)> = None;
        let mut count = 0;
        for v in enumerate_teps(ctx.k(), l) {
            count += 1;
            let a = ctx.g_sys().mat_vec_mul(&ctx.z_hard().xor(&v)).unwrap();
            let d = ctx.distance(&a);
            if best.as_ref().is_none_or(|(_, bd)| d < *bd) {
                best = Some((a, d));
            }
        }
        let (a, d) = best.unwrap();
        (ctx.to_original(&a), d, count)
    }

    #[test]
    fn hard_decisions() {
        assert!(hard_decision(0.3));
        assert!(!hard_decision(-0.3));
        assert!(hard_decision(0.0));
    }

    #[test]
    fn sorted_systematic_input_gives_identity_permutations() {
        let code = build_hamming(false);
        let y = [0.9, -0.8, 0.7, -0.6, 0.5, 0.4, -0.3];
        let ctx = OsdContext::build(&y, &code.generator).unwrap();
        assert_eq!(ctx.lambda1(), (0..7).collect::<Vec<_>>());
        assert_eq!(ctx.lambda2(), (0..7).collect::<Vec<_>>());
        assert_eq!(ctx.g_sys(), &code.generator);
    }

    #[test]
    fn hamming_worked_example() {
        let code = build_hamming(false);
        let y = [0.1, -0.9, 0.5, -0.2, 0.8, 0.05, -0.6];
        let ctx = OsdContext::build(&y, &code.generator).unwrap();
        assert_eq!(ctx.lambda1(), &[1, 4, 6, 2, 3, 0, 5]);

        // Greedy oracle by rank of growing column sets.
        let g1 = code.generator.permute_columns(ctx.lambda1());
        let mut chosen: Vec<usize> = Vec::new();
        for j in 0..7 {
            let mut trial = chosen.clone();
            trial.push(j);
            let sub = BitMatrix::from_rows(
                (0..4)
                    .map(|r| BitVector::from_bits(trial.iter().map(|&c| g1.get(r, c))))
                    .collect(),
            )
            .unwrap();
            if sub.rank() == trial.len() {
                chosen = trial;
            }
            if chosen.len() == 4 {
                break;
            }
        }
        assert_eq!(&ctx.lambda2()[..4], chosen.as_slice());
        let mut rest: Vec<usize> = ctx.lambda2()[4..].to_vec();
        let sorted = {
            let mut s = rest.clone();
            s.sort();
            s
        };
        assert_eq!(rest, sorted);
        rest.extend_from_slice(&chosen);
        rest.sort();
        assert_eq!(rest, (0..7).collect::<Vec<_>>());

        let z = ctx.z();
        for w in z[..4].windows(2).chain(z[4..].windows(2)) {
            assert!(w[0].abs() >= w[1].abs());
        }
    }

    #[test]
    fn context_invariants_on_ebch() {
        let code = build_ebch_128_64().unwrap();
        for i in 0..20 {
            let (_, y) = noisy(&code, 1.0, RngStream::new(3, i));
            let ctx = OsdContext::build(&y, &code.generator).unwrap();
            let z = ctx.z();
            for w in z[..64].windows(2).chain(z[64..].windows(2)) {
                assert!(w[0].abs() >= w[1].abs());
            }
            for r in 0..64 {
                for c in 0..64 {
                    assert_eq!(ctx.g_sys().get(r, c), r == c);
                }
            }
            // A codeword of the original code maps onto a g_sys codeword.
            let msg = random_bits(64, &mut RngStream::new(4, i).rng());
            let c = code.encode(&msg).unwrap();
            let cp = ctx.to_decoding_order(&c);
            assert_eq!(ctx.g_sys().mat_vec_mul(&cp.prefix(64)).unwrap(), cp);
            assert_eq!(ctx.to_original(&cp), c);
        }
    }

    #[test]
    fn noiseless_order0_recovers_codeword() {
        let code = build_ebch_128_64().unwrap();
        let msg = random_bits(64, &mut RngStream::new(8, 0).rng());
        let c = code.encode(&msg).unwrap();
        let ctx = OsdContext::build(&modulate(&c), &code.generator).unwrap();
        let r = decode_order0(&ctx);
        assert_eq!(r.codeword, c);
        assert_eq!((r.order_used, r.teps_evaluated), (0, 1));
        assert!(r.best_distance.abs() < 1e-12);
    }

    #[test]
    fn low_reliability_error_corrected_by_order0() {
        let code = build_ebch_128_64().unwrap();
        let msg = random_bits(64, &mut RngStream::new(9, 0).rng());
        let c = code.encode(&msg).unwrap();
        let mut y = modulate(&c);
        for (i, v) in y.iter_mut().enumerate() {
            *v *= 1.0 + 0.001 * i as f64;
        }
        // Flip one coordinate with tiny amplitude; it lands outside the basis.
        y[17] = -0.05 * y[17].signum();
        let ctx = OsdContext::build(&y, &code.generator).unwrap();
        assert!(!ctx.lambda2()[..64]
            .iter()
            .any(|&j| ctx.lambda1()[j] == 17));
        assert_eq!(decode_order0(&ctx).codeword, c);
    }

    #[test]
    fn basis_error_still_yields_codeword() {
        let code = build_hamming(true);
        let c = code.encode(&BitVector::parse("1011").unwrap()).unwrap();
        let mut y = modulate(&c);
        y[0] *= -2.0;
        let ctx = OsdContext::build(&y, &code.generator).unwrap();
        let r = decode_order0(&ctx);
        assert!(in_code(&code, &r.codeword));
    }

    #[test]
    fn tep_counts() {
        assert_eq!(enumerate_teps(64, 2).count(), 2081);
        assert_eq!(tep_count(64, 2), 2081);
        let zero: Vec<BitVector> = enumerate_teps(9, 0).collect();
        assert_eq!(zero, vec![BitVector::zeros(9)]);
        for k in 1..=12 {
            assert_eq!(enumerate_teps(k, k).count(), 1 << k);
            assert_eq!(tep_count(k, k), 1 << k);
        }
    }

    #[test]
    fn tep_enumeration_is_complete_and_ordered() {
        for k in [1usize, 5, 13, 20] {
            for l in 0..=k.min(3) {
                let pats: Vec<BitVector> = enumerate_teps(k, l).collect();
                let set: HashSet<&BitVector> = pats.iter().collect();
                assert_eq!(set.len(), pats.len());
                assert_eq!(pats.len() as u128, tep_count(k, l));
                assert!(pats.windows(2).all(|w| w[0].weight() <= w[1].weight()));
                assert!(pats.iter().all(|p| p.weight() <= l));
            }
        }
        let mut it = enumerate_teps(4, 2);
        let order: Vec<Vec<usize>> = std::iter::from_fn(|| it.next_positions()).collect();
        assert_eq!(
            order,
            vec![
                vec![],
                vec![3],
                vec![2],
                vec![1],
                vec![0],
                vec![3, 2],
                vec![3, 1],
                vec![3, 0],
                vec![2, 1],
                vec![2, 0],
                vec![1, 0],
            ]
        );
    }

    #[test]
    fn asymptotic_orders() {
        assert_eq!(asymptotic_order(22, 64), 5);
        assert_eq!(asymptotic_order(3, 4), 0);
        assert_eq!(asymptotic_order(1, 4), 0);
        assert_eq!(asymptotic_order(8, 4), 1);
        assert_eq!(asymptotic_order(1000, 1), 1);
    }

    #[test]
    fn incremental_search_matches_direct_reencoding() {
        let code = build_ebch_128_64().unwrap();
        for i in 0..6 {
            let (_, y) = noisy(&code, 0.5, RngStream::new(12, i));
            let ctx = OsdContext::build(&y, &code.generator).unwrap();
            for l in 0..=2 {
                let fast = decode(&ctx, l);
                let (c, d, count) = naive_decode(&ctx, l);
                assert_eq!(fast.codeword, c);
                assert_eq!(fast.teps_evaluated, count);
                assert!((fast.best_distance - d).abs() < 1e-9);
            }
        }
        let code = build_hamming(false);
        for i in 0..200 {
            let (_, y) = noisy(&code, 1.0, RngStream::new(13, i));
            let ctx = OsdContext::build(&y, &code.generator).unwrap();
            for l in 0..=4 {
                let fast = decode(&ctx, l);
                let (c, _, _) = naive_decode(&ctx, l);
                assert_eq!(fast.codeword, c);
            }
        }
    }

    #[test]
    fn per_order_results_match_separate_runs() {
        let code = build_ebch_128_64().unwrap();
        for i in 0..5 {
            let (_, y) = noisy(&code, 2.0, RngStream::new(14, i));
            let ctx = OsdContext::build(&y, &code.generator).unwrap();
            let all = decode_up_to(&ctx, 2);
            assert_eq!(all[0], decode_order0(&ctx));
            for (l, r) in all.iter().enumerate() {
                assert_eq!(r, &decode(&ctx, l));
                assert_eq!(r.teps_evaluated as u128, tep_count(64, l));
                assert!(in_code(&code, &r.codeword));
            }
            assert!(all.windows(2).all(|w| w[1].best_distance <= w[0].best_distance));
        }
    }

    #[test]
    fn wrong_length_reception_is_rejected() {
        let code = build_hamming(false);
        assert!(OsdContext::build(&[1.0; 6], &code.generator).is_err());
    }
}
