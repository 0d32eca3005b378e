//! Policies that choose the reprocessing order for each reception.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::channel::{draw_reception, estimate_sigma2, sigma2_to_ebn0_db, ChannelParams, RngStream};
use crate::code::Code;
use crate::error::{Error, Result};
use crate::numfmt::sig6;
use crate::osd::{decode_up_to, OsdContext};
use crate::predictor::{features, MlpModel, OutputMode, TrialRecord};

/// Thresholds tried by [`calibrate_threshold`], in increasing order.
pub const TAU_GRID: [f64; 7] = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99];

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959963984540054;

/// Half-width of the Wilson score interval at 95% confidence.
pub fn wilson_halfwidth(errors: u64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.5;
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z95 * Z95;
    Z95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()
}

/// Wilson 95% interval `(low, high)`.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z95 * Z95;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = wilson_halfwidth(errors, trials);
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Smallest order whose predicted success probability reaches `tau`, or the
/// largest order if none does.
pub fn select_order_threshold(f: &[f64], tau: f64) -> usize {
    f.iter()
        .position(|&p| p >= tau)
        .unwrap_or(f.len().saturating_sub(1))
}

/// Most probable order; ties go to the smaller order.
pub fn select_order_classifier(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub ebn0_db: f64,
    pub order: usize,
    pub cer: f64,
    pub ci_halfwidth: f64,
    pub selected: bool,
}

/// Monte Carlo estimate of CER per (Eb/N0, order), with the minimal order
/// meeting the target marked per SNR. Stands in for analytic error bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrOrderTable {
    rows: Vec<TableRow>,
}

impl SnrOrderTable {
    /// Marks, per SNR, the smallest order with `cer <= target_cer`, falling
    /// back to the largest order present.
    pub fn from_estimates(mut rows: Vec<TableRow>, target_cer: f64) -> Result<Self> {
        rows.sort_by(|a, b| a.ebn0_db.total_cmp(&b.ebn0_db).then(a.order.cmp(&b.order)));
        for row in &mut rows {
            row.selected = false;
        }
        let mut start = 0;
        while start < rows.len() {
            let snr = rows[start].ebn0_db;
            let end = start + rows[start..].iter().take_while(|r| r.ebn0_db == snr).count();
            let pick = (start..end)
                .find(|&i| rows[i].cer <= target_cer)
                .unwrap_or(end - 1);
            rows[pick].selected = true;
            start = end;
        }
        SnrOrderTable::from_rows(rows)
    }

    fn from_rows(rows: Vec<TableRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Config("empty SNR/order table".into()));
        }
        let table = SnrOrderTable { rows };
        for snr in table.snrs() {
            let n = table
                .rows
                .iter()
                .filter(|r| r.ebn0_db == snr && r.selected)
                .count();
            if n != 1 {
                return Err(Error::Parse(format!(
                    "table has {n} selected orders at {snr} dB"
                )));
            }
        }
        Ok(table)
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    /// Distinct SNR grid points, ascending.
    pub fn snrs(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.rows.iter().map(|r| r.ebn0_db).collect();
        s.sort_by(f64::total_cmp);
        s.dedup();
        s
    }

    pub fn selected_order_at(&self, ebn0_db: f64) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.ebn0_db == ebn0_db && r.selected)
            .map(|r| r.order)
    }

    /// Grid point nearest to `ebn0_db`; equidistant ties go to the lower SNR.
    pub fn nearest_snr(&self, ebn0_db: f64) -> f64 {
        let mut best = f64::NAN;
        let mut best_gap = f64::INFINITY;
        for snr in self.snrs() {
            let gap = (snr - ebn0_db).abs();
            if gap < best_gap {
                best = snr;
                best_gap = gap;
            }
        }
        best
    }

    pub fn order_for(&self, ebn0_db: f64) -> usize {
        self.selected_order_at(self.nearest_snr(ebn0_db))
            .expect("every grid SNR has a selected order")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("ebn0_db,order,cer,ci_halfwidth,selected\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                sig6(r.ebn0_db),
                r.order,
                sig6(r.cer),
                sig6(r.ci_halfwidth),
                u8::from(r.selected)
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("ebn0_db,order,cer,ci_halfwidth,selected") {
            return Err(Error::Parse("bad table header".into()));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Parse(format!("table line {}: {line:?}", i + 2));
            if f.len() != 5 {
                return Err(bad());
            }
            rows.push(TableRow {
                ebn0_db: f[0].parse().map_err(|_| bad())?,
                order: f[1].parse().map_err(|_| bad())?,
                cer: f[2].parse().map_err(|_| bad())?,
                ci_halfwidth: f[3].parse().map_err(|_| bad())?,
                selected: match f[4] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad()),
                },
            });
        }
        SnrOrderTable::from_rows(rows)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SnrOrderTable::from_csv(&text)
    }
}

/// Estimates CER for every order `0..=l_max` at each SNR from
/// `trials_per_point` receptions. SNR point `i`, trial `t` uses stream
/// `(seed, i * trials_per_point + t)`.
pub fn calibrate_table(
    code: &Code,
    snr_list: &[f64],
    l_max: usize,
    trials_per_point: usize,
    target_cer: f64,
    seed: u64,
) -> Result<SnrOrderTable> {
    if trials_per_point == 0 || snr_list.is_empty() {
        return Err(Error::Config("table calibration needs SNR points and trials".into()));
    }
    let mut rows = Vec::new();
    for (si, &snr) in snr_list.iter().enumerate() {
        let params = ChannelParams::from_ebn0_db(snr, code.spec.rate());
        let errors: Vec<u64> = (0..trials_per_point)
            .into_par_iter()
            .map(|t| -> Result<Vec<u64>> {
                let stream = RngStream::new(seed, (si * trials_per_point + t) as u64);
                let rx = draw_reception(code, &params, stream);
                let ctx = OsdContext::build(&rx.y, &code.generator)?;
                Ok(decode_up_to(&ctx, l_max)
                    .iter()
                    .map(|r| u64::from(r.codeword != rx.codeword))
                    .collect())
            })
            .try_reduce(
                || vec![0; l_max + 1],
                |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect()),
            )?;
        for (order, &e) in errors.iter().enumerate() {
            rows.push(TableRow {
                ebn0_db: snr,
                order,
                cer: e as f64 / trials_per_point as f64,
                ci_halfwidth: wilson_halfwidth(e, trials_per_point as u64),
                selected: false,
            });
        }
    }
    SnrOrderTable::from_estimates(rows, target_cer)
}

/// Error rate of the threshold rule at `tau` over records with known
/// per-order success, minus the error rate of always decoding at the largest
/// order on the same records.
pub fn threshold_excess_cer(outputs: &[Vec<f64>], records: &[TrialRecord], tau: f64) -> f64 {
    let mut excess = 0i64;
    for (f, rec) in outputs.iter().zip(records) {
        let l = select_order_threshold(f, tau);
        excess += i64::from(!rec.success[l]) - i64::from(!rec.success[rec.max_order()]);
    }
    excess as f64 / records.len() as f64
}

/// Smallest grid threshold whose excess CER over the largest-order decoder is
/// at most `target_cer`; the top of the grid when none qualifies.
pub fn calibrate_threshold_from_outputs(outputs: &[Vec<f64>], records: &[TrialRecord], target_cer: f64) -> f64 {
    TAU_GRID
        .iter()
        .copied()
        .find(|&tau| threshold_excess_cer(outputs, records, tau) <= target_cer)
        .unwrap_or(TAU_GRID[TAU_GRID.len() - 1])
}

pub fn calibrate_threshold(model: &MlpModel, validation: &[TrialRecord], target_cer: f64) -> Result<f64> {
    if model.mode() != OutputMode::Success {
        return Err(Error::Config("threshold calibration needs a success-mode model".into()));
    }
    if validation.is_empty() {
        return Err(Error::Config("empty validation set".into()));
    }
    let outputs = validation
        .iter()
        .map(|r| model.forward(&r.features))
        .collect::<Result<Vec<_>>>()?;
    Ok(calibrate_threshold_from_outputs(&outputs, validation, target_cer))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionPolicy {
    Fixed(usize),
    BaselineKnownSnr,
    BaselineEstimatedSnr,
    NnClassifier,
    NnThreshold(f64),
}

impl SelectionPolicy {
    pub fn needs_model(&self) -> bool {
        matches!(self, SelectionPolicy::NnClassifier | SelectionPolicy::NnThreshold(_))
    }

    pub fn needs_table(&self) -> bool {
        matches!(
            self,
            SelectionPolicy::BaselineKnownSnr | SelectionPolicy::BaselineEstimatedSnr
        )
    }

    /// Parses `fixed:L`, `fixed(L)`, `baseline-known-snr`,
    /// `baseline-estimated-snr`, `nn-classifier`, `nn-threshold:TAU`; a bare
    /// `nn-threshold` takes `default_tau`.
    pub fn parse(s: &str, default_tau: Option<f64>) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.find([':', '(']) {
            Some(i) => (&s[..i], Some(s[i + 1..].trim_end_matches(')'))),
            None => (s, None),
        };
        let bad = || Error::Config(format!("bad policy {s:?}"));
        match (name, arg) {
            ("fixed", Some(l)) => Ok(SelectionPolicy::Fixed(l.parse().map_err(|_| bad())?)),
            ("baseline-known-snr", None) => Ok(SelectionPolicy::BaselineKnownSnr),
            ("baseline-estimated-snr", None) => Ok(SelectionPolicy::BaselineEstimatedSnr),
            ("nn-classifier", None) => Ok(SelectionPolicy::NnClassifier),
            ("nn-threshold", Some(t)) => Ok(SelectionPolicy::NnThreshold(t.parse().map_err(|_| bad())?)),
            ("nn-threshold", None) => default_tau
                .map(SelectionPolicy::NnThreshold)
                .ok_or_else(|| Error::Config("nn-threshold policy needs a tau".into())),
            _ => Err(bad()),
        }
    }
}

impl FromStr for SelectionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SelectionPolicy::parse(s, None)
    }
}

impl fmt::Display for SelectionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionPolicy::Fixed(l) => write!(f, "fixed({l})"),
            SelectionPolicy::BaselineKnownSnr => f.write_str("baseline-known-snr"),
            SelectionPolicy::BaselineEstimatedSnr => f.write_str("baseline-estimated-snr"),
            SelectionPolicy::NnClassifier => f.write_str("nn-classifier"),
            SelectionPolicy::NnThreshold(t) => write!(f, "nn-threshold({t})"),
        }
    }
}

/// A policy bound to the resources it needs.
#[derive(Debug, Clone)]
pub struct OrderSelector {
    policy: SelectionPolicy,
    l_max: usize,
    rate: f64,
    model: Option<MlpModel>,
    table: Option<SnrOrderTable>,
}

impl OrderSelector {
    pub fn new(
        policy: SelectionPolicy,
        l_max: usize,
        rate: f64,
        model: Option<MlpModel>,
        table: Option<SnrOrderTable>,
    ) -> Result<Self> {
        match policy {
            SelectionPolicy::Fixed(l) if l > l_max => {
                return Err(Error::Config(format!(
                    "fixed order {l} exceeds the maximum order {l_max}"
                )))
            }
            SelectionPolicy::NnThreshold(t) if !(0.0..=1.0).contains(&t) => {
                return Err(Error::Config(format!("tau {t} outside [0, 1]")))
            }
            _ => {}
        }
        if policy.needs_model() {
            let m = model
                .as_ref()
                .ok_or_else(|| Error::Config(format!("policy {policy} needs a model (model_path)")))?;
            let want = if matches!(policy, SelectionPolicy::NnClassifier) {
                OutputMode::Classifier
            } else {
                OutputMode::Success
            };
            if m.mode() != want {
                return Err(Error::Config(format!(
                    "policy {policy} needs a {want} model, got {}",
                    m.mode()
                )));
            }
            if m.output_dim() != l_max + 1 {
                return Err(Error::Config(format!(
                    "model predicts {} orders but the maximum order is {l_max}",
                    m.output_dim()
                )));
            }
        }
        if policy.needs_table() && table.is_none() {
            return Err(Error::Config(format!(
                "policy {policy} needs an SNR/order table (table_path)"
            )));
        }
        Ok(OrderSelector {
            policy,
            l_max,
            rate,
            model,
            table,
        })
    }

    pub fn policy(&self) -> SelectionPolicy {
        self.policy
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// Order for one reception. `true_ebn0_db` is only read by the
    /// known-SNR baseline.
    pub fn select(&self, y: &[f64], ctx: &OsdContext, true_ebn0_db: f64) -> Result<usize> {
        let order = match self.policy {
            SelectionPolicy::Fixed(l) => l,
            SelectionPolicy::BaselineKnownSnr => self.table().order_for(true_ebn0_db),
            SelectionPolicy::BaselineEstimatedSnr => {
                let est = sigma2_to_ebn0_db(estimate_sigma2(y), self.rate);
                self.table().order_for(est)
            }
            SelectionPolicy::NnClassifier => select_order_classifier(&self.predict(ctx)?),
            SelectionPolicy::NnThreshold(tau) => select_order_threshold(&self.predict(ctx)?, tau),
        };
        Ok(order.min(self.l_max))
    }

    fn table(&self) -> &SnrOrderTable {
        self.table.as_ref().expect("checked at construction")
    }

    fn predict(&self, ctx: &OsdContext) -> Result<Vec<f64>> {
        self.model
            .as_ref()
            .expect("checked at construction")
            .forward(&features(ctx))
    }
}
