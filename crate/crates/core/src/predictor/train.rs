use ndarray::Axis;
use rand::seq::SliceRandom;

use super::adam::AdamState;
use super::dataset::{to_batch, TrialRecord};
use super::mlp::{MlpModel, OutputMode};
use crate::channel::RngStream;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 128,
            learning_rate: AdamState::DEFAULT_LEARNING_RATE,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Full-dataset loss before the first update.
    pub initial_loss: f64,
    /// Mean mini-batch loss during each epoch.
    pub epoch_losses: Vec<f64>,
    /// Full-dataset loss after the last update.
    pub final_loss: f64,
}

/// Order-predictor training with the default layout for the records' width.
pub fn train(
    records: &[TrialRecord],
    mode: OutputMode,
    n: usize,
    k: usize,
    config: &TrainConfig,
) -> Result<(MlpModel, TrainReport)> {
    let first = records
        .first()
        .ok_or_else(|| Error::Config("cannot train on an empty dataset".into()))?;
    let model = MlpModel::for_code(n, k, first.max_order(), mode, config.seed)?;
    train_model(model, records, config)
}

/// Trains `model` in place with Adam on shuffled mini-batches.
pub fn train_model(
    mut model: MlpModel,
    records: &[TrialRecord],
    config: &TrainConfig,
) -> Result<(MlpModel, TrainReport)> {
    if records.is_empty() {
        return Err(Error::Config("cannot train on an empty dataset".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    if records[0].features.len() != model.input_dim() || records[0].success.len() != model.output_dim() {
        return Err(Error::Dimension(format!(
            "records have {} features / {} outputs, model expects {} / {}",
            records[0].features.len(),
            records[0].success.len(),
            model.input_dim(),
            model.output_dim()
        )));
    }
    let (x_all, t_all) = to_batch(records);
    let initial_loss = model.loss(x_all.view(), &t_all);
    check_finite(initial_loss, "initial loss")?;

    let mut adam = AdamState::new(&model, config.learning_rate);
    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut shuffler = RngStream::new(config.seed, 1).rng();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffler);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let x = x_all.select(Axis(0), chunk);
            let t = super::mlp::Targets {
                labels: chunk.iter().map(|&i| t_all.labels[i]).collect(),
                success: t_all.success.select(Axis(0), chunk),
            };
            let (loss, grads) = model.loss_and_gradient(x.view(), &t);
            check_finite(loss, &format!("epoch {epoch}"))?;
            total += loss * chunk.len() as f64;
            adam.apply(&mut model, &grads);
        }
        epoch_losses.push(total / records.len() as f64);
    }
    let final_loss = model.loss(x_all.view(), &t_all);
    check_finite(final_loss, "final loss")?;
    Ok((
        model,
        TrainReport {
            initial_loss,
            epoch_losses,
            final_loss,
        },
    ))
}

fn check_finite(loss: f64, when: &str) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Training(format!("non-finite loss {loss} at {when}")))
    }
}

pub fn classifier_accuracy(model: &MlpModel, records: &[TrialRecord]) -> f64 {
    let (x, t) = to_batch(records);
    let out = model.forward_batch(x.view());
    let hits = out
        .rows()
        .into_iter()
        .zip(&t.labels)
        .filter(|(row, &label)| {
            let mut best = 0;
            for (i, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = i;
                }
            }
            best == label
        })
        .count();
    hits as f64 / records.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    // Two Gaussian blobs on either side of a hyperplane with a margin.
    fn toy_dataset(n: usize, seed: u64) -> Vec<TrialRecord> {
        let mut rng = RngStream::new(seed, 0).rng();
        let normal = [0.6, -0.8, 0.0, 0.3];
        (0..n)
            .map(|_| loop {
                let f: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
                let s: f64 = f.iter().zip(&normal).map(|(a, b)| a * b).sum();
                if s.abs() > 0.3 {
                    let class = usize::from(s > 0.0);
                    let mut success = vec![false; 2];
                    success[class] = true;
                    break TrialRecord {
                        features: f,
                        success,
                        l_star: class,
                        ebn0_db: 0.0,
                    };
                }
            })
            .collect()
    }

    #[test]
    fn learns_separable_toy_problem() {
        let data = toy_dataset(200, 3);
        let config = TrainConfig {
            epochs: 50,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let model = MlpModel::new(&[4, 8, 4, 2], OutputMode::Classifier, 2).unwrap();
        let (model, report) = train_model(model, &data, &config).unwrap();
        assert!(report.final_loss < report.initial_loss);
        assert_eq!(report.epoch_losses.len(), 50);
        let acc = classifier_accuracy(&model, &data);
        assert!(acc >= 0.95, "accuracy {acc}");
    }

    #[test]
    fn success_mode_loss_decreases() {
        let data = toy_dataset(200, 4);
        let model = MlpModel::new(&[4, 8, 4, 2], OutputMode::Success, 2).unwrap();
        let (_, report) = train_model(model, &data, &TrainConfig::default()).unwrap();
        assert!(report.final_loss < report.initial_loss);
    }

    #[test]
    fn training_is_seed_deterministic() {
        let data = toy_dataset(150, 5);
        let config = TrainConfig {
            epochs: 5,
            batch_size: 32,
            seed: 11,
            ..TrainConfig::default()
        };
        let run = || {
            let model = MlpModel::new(&[4, 8, 4, 2], OutputMode::Success, config.seed).unwrap();
            train_model(model, &data, &config).unwrap()
        };
        let (a, ra) = run();
        let (b, rb) = run();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn rejects_empty_and_mismatched_data() {
        assert!(train(&[], OutputMode::Classifier, 4, 2, &TrainConfig::default()).is_err());
        let data = toy_dataset(10, 1);
        let model = MlpModel::new(&[5, 3, 2], OutputMode::Classifier, 0).unwrap();
        assert!(train_model(model, &data, &TrainConfig::default()).is_err());
    }
}
