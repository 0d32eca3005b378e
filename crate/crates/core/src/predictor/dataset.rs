//! Labelled receptions for training the order predictor.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::mlp::Targets;
use crate::channel::{draw_reception, ChannelParams, RngStream};
use crate::code::Code;
use crate::error::{Error, Result};
use crate::numfmt::sig6;
use crate::osd::{decode_up_to, OsdContext};

/// One labelled reception.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    /// `z` followed by the order-0 codeword mapped to `+-1`, both in
    /// decoding order.
    pub features: Vec<f64>,
    /// `success[i]`: order-`i` decoding returned the transmitted codeword.
    pub success: Vec<bool>,
    /// Minimal successful order, or the largest order when none succeeds.
    pub l_star: usize,
    pub ebn0_db: f64,
}

impl TrialRecord {
    pub fn max_order(&self) -> usize {
        self.success.len() - 1
    }

    pub fn any_success(&self) -> bool {
        self.success.iter().any(|&s| s)
    }
}

/// Predictor input for a reception: `(z, 2 a0 - 1)`.
pub fn features(ctx: &OsdContext) -> Vec<f64> {
    let mut f = Vec::with_capacity(2 * ctx.n());
    f.extend_from_slice(ctx.z());
    f.extend(
        ctx.order0_codeword()
            .iter()
            .map(|b| if b { 1.0 } else { -1.0 }),
    );
    f
}

/// Labels one reception drawn from `stream`.
pub fn label_trial(code: &Code, l_max: usize, ebn0_db: f64, stream: RngStream) -> Result<TrialRecord> {
    let params = ChannelParams::from_ebn0_db(ebn0_db, code.spec.rate());
    let rx = draw_reception(code, &params, stream);
    let ctx = OsdContext::build(&rx.y, &code.generator)?;
    let success: Vec<bool> = decode_up_to(&ctx, l_max)
        .iter()
        .map(|r| r.codeword == rx.codeword)
        .collect();
    let l_star = success.iter().position(|&s| s).unwrap_or(l_max);
    Ok(TrialRecord {
        features: features(&ctx),
        success,
        l_star,
        ebn0_db,
    })
}

/// Generates `n_records` records split evenly over `snr_list`, in SNR blocks.
/// Record `r` uses stream `(seed, r)`.
pub fn generate_dataset(
    code: &Code,
    l_max: usize,
    n_records: usize,
    snr_list: &[f64],
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    if snr_list.is_empty() || !n_records.is_multiple_of(snr_list.len()) {
        return Err(Error::Config(format!(
            "{n_records} records cannot be split evenly over {} SNR points",
            snr_list.len()
        )));
    }
    if l_max > code.spec.k {
        return Err(Error::Config(format!(
            "maximum order {l_max} exceeds k = {}",
            code.spec.k
        )));
    }
    let per_snr = n_records / snr_list.len();
    (0..n_records)
        .into_par_iter()
        .map(|r| label_trial(code, l_max, snr_list[r / per_snr], RngStream::new(seed, r as u64)))
        .collect()
}

/// Seeded 90/10 split into (training, validation).
pub fn split_dataset(records: &[TrialRecord], seed: u64) -> (Vec<TrialRecord>, Vec<TrialRecord>) {
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.shuffle(&mut RngStream::new(seed, u64::MAX).rng());
    let n_val = records.len() / 10;
    let (val, train) = idx.split_at(n_val);
    let pick = |ids: &[usize]| ids.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    (pick(train), pick(val))
}

/// Builds the input matrix and targets for the given records.
pub fn to_batch<'a>(records: impl IntoIterator<Item = &'a TrialRecord>) -> (Array2<f64>, Targets) {
    let records: Vec<&TrialRecord> = records.into_iter().collect();
    assert!(!records.is_empty(), "empty batch");
    let width = records[0].features.len();
    let outputs = records[0].success.len();
    let mut x = Array2::zeros((records.len(), width));
    let mut success = Array2::zeros((records.len(), outputs));
    let mut labels = Vec::with_capacity(records.len());
    for (r, rec) in records.iter().enumerate() {
        for (c, &v) in rec.features.iter().enumerate() {
            x[[r, c]] = v;
        }
        for (c, &s) in rec.success.iter().enumerate() {
            success[[r, c]] = if s { 1.0 } else { 0.0 };
        }
        labels.push(rec.l_star);
    }
    (x, Targets { labels, success })
}

/// CSV columns: `ebn0_db,l_star,success_0..success_L,f_0..f_{2N-1}`.
pub fn dataset_to_csv(records: &[TrialRecord]) -> String {
    let mut s = String::new();
    let Some(first) = records.first() else {
        return "ebn0_db,l_star\n".to_string();
    };
    s.push_str("ebn0_db,l_star");
    for i in 0..first.success.len() {
        let _ = write!(s, ",success_{i}");
    }
    for i in 0..first.features.len() {
        let _ = write!(s, ",f_{i}");
    }
    s.push('\n');
    for rec in records {
        s.push_str(&sig6(rec.ebn0_db));
        let _ = write!(s, ",{}", rec.l_star);
        for &b in &rec.success {
            s.push_str(if b { ",1" } else { ",0" });
        }
        for &v in &rec.features {
            s.push(',');
            s.push_str(&sig6(v));
        }
        s.push('\n');
    }
    s
}

pub fn dataset_from_csv(text: &str) -> Result<Vec<TrialRecord>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty dataset file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols[0] != "ebn0_db" || cols[1] != "l_star" {
        return Err(Error::Parse(format!("bad dataset header {header:?}")));
    }
    let n_success = cols.iter().filter(|c| c.starts_with("success_")).count();
    let n_features = cols.iter().filter(|c| c.starts_with("f_")).count();
    if n_success == 0 || 2 + n_success + n_features != cols.len() {
        return Err(Error::Parse("dataset header has unexpected columns".into()));
    }
    let num = |t: &str, line: usize| -> Result<f64> {
        t.parse()
            .map_err(|_| Error::Parse(format!("line {line}: bad number {t:?}")))
    };
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Parse(format!(
                "line {lineno}: expected {} fields, found {}",
                cols.len(),
                fields.len()
            )));
        }
        let l_star: usize = fields[1]
            .parse()
            .map_err(|_| Error::Parse(format!("line {lineno}: bad l_star {:?}", fields[1])))?;
        let success = fields[2..2 + n_success]
            .iter()
            .map(|&t| match t {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(Error::Parse(format!("line {lineno}: bad success flag {t:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let features = fields[2 + n_success..]
            .iter()
            .map(|t| num(t, lineno))
            .collect::<Result<Vec<_>>>()?;
        out.push(TrialRecord {
            features,
            success,
            l_star,
            ebn0_db: num(fields[0], lineno)?,
        });
    }
    Ok(out)
}

pub fn save_dataset(path: impl AsRef<Path>, records: &[TrialRecord]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, dataset_to_csv(records)).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<TrialRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    dataset_from_csv(&text)
}
