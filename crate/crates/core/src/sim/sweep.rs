//! Monte Carlo sweeps of order-selection policies over Eb/N0.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use crate::channel::{draw_reception, ChannelParams, RngStream};
use crate::code::Code;
use crate::error::{Error, Result};
use crate::numfmt::sig6;
use crate::osd::{decode, tep_count, OsdContext};
use crate::predictor::{MlpModel, OutputMode};
use crate::selection::{wilson_halfwidth, OrderSelector, SelectionPolicy, SnrOrderTable};

pub const SWEEP_CSV_HEADER: &str = "ebn0_db,policy,trials,errors,cer,ci_halfwidth,mean_teps,mean_order";

/// Aggregates for one (policy, SNR) point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub ebn0_db: f64,
    pub policy: String,
    pub trials: u64,
    pub errors: u64,
    pub total_teps: u64,
    pub total_order: u64,
}

impl SweepPoint {
    pub fn cer(&self) -> f64 {
        self.errors as f64 / self.trials as f64
    }

    pub fn ci_halfwidth(&self) -> f64 {
        wilson_halfwidth(self.errors, self.trials)
    }

    pub fn mean_teps(&self) -> f64 {
        self.total_teps as f64 / self.trials as f64
    }

    pub fn mean_order(&self) -> f64 {
        self.total_order as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn point(&self, policy: &str, ebn0_db: f64) -> Option<&SweepPoint> {
        self.points
            .iter()
            .find(|p| p.policy == policy && p.ebn0_db == ebn0_db)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(SWEEP_CSV_HEADER);
        s.push('\n');
        for p in &self.points {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                sig6(p.ebn0_db),
                p.policy,
                p.trials,
                p.errors,
                sig6(p.cer()),
                sig6(p.ci_halfwidth()),
                sig6(p.mean_teps()),
                sig6(p.mean_order())
            );
        }
        s
    }
}

#[derive(Default)]
struct Tally {
    errors: u64,
    teps: u64,
    order: u64,
}

/// Runs every selector at every SNR. Trial `t` at SNR index `i` uses stream
/// `(seed, i * trials + t)` for all selectors, so policies see identical
/// receptions.
pub fn sweep_selectors(
    code: &Code,
    selectors: &[OrderSelector],
    snrs: &[f64],
    trials: usize,
    seed: u64,
) -> Result<SweepResult> {
    let mut points = Vec::new();
    for (si, &snr) in snrs.iter().enumerate() {
        let params = ChannelParams::from_ebn0_db(snr, code.spec.rate());
        let tallies: Vec<Tally> = (0..trials)
            .into_par_iter()
            .map(|t| -> Result<Vec<Tally>> {
                let stream = RngStream::new(seed, (si * trials + t) as u64);
                let rx = draw_reception(code, &params, stream);
                let ctx = OsdContext::build(&rx.y, &code.generator)?;
                selectors
                    .iter()
                    .map(|sel| {
                        let order = sel.select(&rx.y, &ctx, snr)?;
                        let r = decode(&ctx, order);
                        Ok(Tally {
                            errors: u64::from(r.codeword != rx.codeword),
                            teps: r.teps_evaluated,
                            order: order as u64,
                        })
                    })
                    .collect()
            })
            .try_reduce(
                || selectors.iter().map(|_| Tally::default()).collect(),
                |a, b| {
                    Ok(a.into_iter()
                        .zip(b)
                        .map(|(x, y)| Tally {
                            errors: x.errors + y.errors,
                            teps: x.teps + y.teps,
                            order: x.order + y.order,
                        })
                        .collect())
                },
            )?;
        for (sel, tally) in selectors.iter().zip(tallies) {
            points.push(SweepPoint {
                ebn0_db: snr,
                policy: sel.policy().to_string(),
                trials: trials as u64,
                errors: tally.errors,
                total_teps: tally.teps,
                total_order: tally.order,
            });
        }
    }
    Ok(SweepResult { points })
}

/// Loads the model and table the configured policies need, then sweeps.
/// Missing resources fail before any trial runs.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    let needs_model = config.policies.iter().any(|p| p.needs_model());
    let needs_table = config.policies.iter().any(|p| p.needs_table());
    let mut models: Vec<MlpModel> = Vec::new();
    if needs_model {
        let paths = config.model_path.as_ref().ok_or_else(|| {
            Error::Config("nn policies need `model_path`".into())
        })?;
        // Comma-separated so a classifier and a success model can be given together.
        for p in paths.to_string_lossy().split(',') {
            models.push(MlpModel::load(p.trim())?);
        }
    }
    let table = if needs_table {
        let path = config.table_path.as_ref().ok_or_else(|| {
            Error::Config("baseline policies need `table_path`".into())
        })?;
        Some(SnrOrderTable::load(path)?)
    } else {
        None
    };
    let selectors = config
        .policies
        .iter()
        .map(|&policy| {
            let model = if policy.needs_model() {
                let want = match policy {
                    SelectionPolicy::NnClassifier => OutputMode::Classifier,
                    _ => OutputMode::Success,
                };
                models.iter().find(|m| m.mode() == want).cloned().or_else(|| models.first().cloned())
            } else {
                None
            };
            OrderSelector::new(policy, config.l_max, config.code.spec.rate(), model, table.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    sweep_selectors(&config.code, &selectors, &config.snrs, config.trials, config.seed)
}

/// `(l, |V|)` pairs for fixed-order reference lines.
pub fn reference_lines(k: usize, orders: &[usize]) -> Vec<(usize, u128)> {
    orders.iter().map(|&l| (l, tep_count(k, l))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::build_hamming;

    #[test]
    fn reference_line_values() {
        assert_eq!(reference_lines(64, &[0, 1, 2]), vec![(0, 1), (1, 65), (2, 2081)]);
        assert!(reference_lines(64, &[]).is_empty());
        assert_eq!(reference_lines(4, &[4]), vec![(4, 16)]);
    }

    #[test]
    fn fixed_policies_report_exact_tep_counts() {
        let code = build_hamming(true);
        let sels: Vec<OrderSelector> = (0..=2)
            .map(|l| OrderSelector::new(SelectionPolicy::Fixed(l), 2, code.spec.rate(), None, None).unwrap())
            .collect();
        let res = sweep_selectors(&code, &sels, &[0.0, 3.0], 50, 4).unwrap();
        assert_eq!(res.points.len(), 6);
        for p in &res.points {
            let l: usize = p.policy[6..7].parse().unwrap();
            assert_eq!(p.mean_teps(), tep_count(4, l) as f64);
            assert_eq!(p.mean_order(), l as f64);
            assert!((0.0..=1.0).contains(&p.cer()));
        }
        let again = sweep_selectors(&code, &sels, &[0.0, 3.0], 50, 4).unwrap();
        assert_eq!(res.to_csv(), again.to_csv());
        assert!(res.to_csv().starts_with(SWEEP_CSV_HEADER));
    }

    #[test]
    fn missing_resources_fail_early() {
        let cfg = super::super::config::Config::parse(
            "code = hamming74\nebn0_db = 1\ntrials = 10\npolicy = nn-classifier\n",
        )
        .unwrap();
        let exp = ExperimentConfig::from_config(&cfg).unwrap();
        assert!(run_sweep(&exp).is_err());
    }
}
