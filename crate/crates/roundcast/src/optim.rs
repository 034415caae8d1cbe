//! Loss, optimizer, and the training loops: single epoch, score prediction,
//! and the k-fold protocol with optional repeats and worker threads.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{make_folds, pad_batch, truncate_round, Round};
use crate::error::{Error, Result};
use crate::eval::{accuracy_at, roc_auc};
use crate::nn::{Model, Param};
use crate::tensor::{sigmoid, SeededRng};

/// Mean binary cross-entropy on raw logits, with its gradient.
///
/// Uses the overflow-free form max(z,0) - z*y + ln(1 + exp(-|z|)), so
/// logits of either sign and any magnitude stay finite. The gradient of
/// the mean is (sigmoid(z) - y) / N per element.
pub fn bce_with_logits(logits: &[f64], labels: &[f64]) -> Result<(f64, Vec<f64>)> {
    if logits.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} logits against {} labels",
            logits.len(),
            labels.len()
        )));
    }
    if logits.is_empty() {
        return Err(Error::Data("loss over an empty batch".to_string()));
    }
    let n = logits.len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &y) in logits.iter().zip(labels) {
        if !z.is_finite() {
            return Err(Error::Numeric(format!("non-finite logit {z}")));
        }
        if y != 0.0 && y != 1.0 {
            return Err(Error::Label(format!("labels must be 0 or 1, got {y}")));
        }
        total += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        grad.push((sigmoid(z) - y) / n);
    }
    Ok((total / n, grad))
}

/// Adam with coupled L2 regularization: the decay term wd*theta joins the
/// raw gradient before the moment updates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub weight_decay: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Result<Self> {
        if learning_rate < 0.0 || !learning_rate.is_finite() {
            return Err(Error::Parameter(format!(
                "learning rate must be finite and non-negative, got {learning_rate}"
            )));
        }
        if weight_decay < 0.0 || !weight_decay.is_finite() {
            return Err(Error::Parameter(format!(
                "weight decay must be finite and non-negative, got {weight_decay}"
            )));
        }
        Ok(Adam {
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update over every parameter tensor. Moment buffers are allocated
    /// on the first call and must see the same tensors in the same order on
    /// every later call. Gradients are consumed: they are zeroed on return.
    pub fn step(&mut self, params: &mut [&mut Param]) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.value.numel()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(Error::Contract(format!(
                "optimizer was built over {} tensors, got {}",
                self.m.len(),
                params.len()
            )));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, p) in params.iter_mut().enumerate() {
            if self.m[i].len() != p.value.numel() {
                return Err(Error::Contract(format!(
                    "parameter {} changed size under the optimizer",
                    p.name
                )));
            }
            if !p.grad.data().iter().all(|g| g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite gradient in {}",
                    p.name
                )));
            }
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let theta = p.value.data_mut();
            for (e, g_raw) in p.grad.data_mut().iter_mut().enumerate() {
                let g = *g_raw + self.weight_decay * theta[e];
                m[e] = self.beta1 * m[e] + (1.0 - self.beta1) * g;
                v[e] = self.beta2 * v[e] + (1.0 - self.beta2) * g * g;
                let m_hat = m[e] / bc1;
                let v_hat = v[e] / bc2;
                theta[e] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
                *g_raw = 0.0;
            }
        }
        Ok(())
    }
}

/// Hyperparameters for one training run. The per-architecture constructors
/// carry the published settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub architecture: String,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub folds: usize,
    /// Fraction of each round revealed to the model, in (0, 1].
    pub progression: f64,
    pub seed: u64,
    /// Independent repetitions of the whole k-fold protocol.
    pub repeats: usize,
    /// Fold tasks trained concurrently.
    pub jobs: usize,
    pub dropout: f64,
}

impl TrainConfig {
    pub fn lstm() -> Self {
        TrainConfig {
            architecture: "lstm".to_string(),
            learning_rate: 0.001,
            weight_decay: 1e-4,
            batch_size: 64,
            epochs: 500,
            folds: 5,
            progression: 0.75,
            seed: 0,
            repeats: 1,
            jobs: 1,
            dropout: 0.3,
        }
    }

    pub fn transformer() -> Self {
        TrainConfig {
            architecture: "transformer".to_string(),
            learning_rate: 0.0006,
            batch_size: 28,
            ..TrainConfig::lstm()
        }
    }

    pub fn for_architecture(architecture: &str) -> Result<Self> {
        match architecture {
            "lstm" => Ok(TrainConfig::lstm()),
            "transformer" => Ok(TrainConfig::transformer()),
            other => Err(Error::Config(format!(
                "unknown architecture {other:?}, expected \"lstm\" or \"transformer\""
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.architecture != "lstm" && self.architecture != "transformer" {
            return Err(Error::Config(format!(
                "unknown architecture {:?}, expected \"lstm\" or \"transformer\"",
                self.architecture
            )));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Parameter(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Parameter(format!(
                "weight decay must be finite and non-negative, got {}",
                self.weight_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch size must be positive".to_string()));
        }
        if self.epochs == 0 {
            return Err(Error::Parameter("epoch count must be positive".to_string()));
        }
        if self.folds == 0 {
            return Err(Error::Config("fold count must be positive".to_string()));
        }
        if !(self.progression > 0.0 && self.progression <= 1.0) {
            return Err(Error::Parameter(format!(
                "progression must lie in (0, 1], got {}",
                self.progression
            )));
        }
        if self.repeats == 0 {
            return Err(Error::Parameter("repeats must be positive".to_string()));
        }
        if self.jobs == 0 {
            return Err(Error::Parameter("jobs must be positive".to_string()));
        }
        if !(self.dropout >= 0.0 && self.dropout < 1.0) {
            return Err(Error::Parameter(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }

    pub fn build_model(&self, rng: &mut SeededRng) -> Result<Model> {
        match self.architecture.as_str() {
            "lstm" => Model::lstm(rng, self.dropout),
            "transformer" => Model::transformer(rng, self.dropout),
            other => Err(Error::Config(format!(
                "unknown architecture {other:?}, expected \"lstm\" or \"transformer\""
            ))),
        }
    }
}

/// One pass over the rounds in a fresh shuffled order: forward with dropout,
/// BCE, backprop, Adam step per mini-batch. Returns the mean training loss
/// weighted by batch size.
pub fn train_epoch(
    model: &mut Model,
    rounds: &[Round],
    cfg: &TrainConfig,
    adam: &mut Adam,
    rng: &mut SeededRng,
) -> Result<f64> {
    if rounds.is_empty() {
        return Err(Error::Data("cannot train on zero rounds".to_string()));
    }
    let mut order: Vec<usize> = (0..rounds.len()).collect();
    rng.shuffle(&mut order);

    let pad = model.pad_value();
    let mut loss_sum = 0.0;
    for chunk in order.chunks(cfg.batch_size) {
        let refs: Vec<&Round> = chunk.iter().map(|&i| &rounds[i]).collect();
        let batch = pad_batch(&refs, pad)?;
        let logits = model.forward(&batch.features, &batch.mask, Some(rng))?;
        let (loss, dlogits) = bce_with_logits(&logits, batch.labels.data())?;
        model.backward(&dlogits)?;
        adam.step(&mut model.params_mut())?;
        loss_sum += loss * chunk.len() as f64;
    }
    Ok(loss_sum / rounds.len() as f64)
}

/// Win probabilities (sigmoid of the logit) in the order the rounds were
/// given, computed in inference mode.
pub fn predict_scores(model: &mut Model, rounds: &[Round], batch_size: usize) -> Result<Vec<f64>> {
    if batch_size == 0 {
        return Err(Error::Parameter("batch size must be positive".to_string()));
    }
    let pad = model.pad_value();
    let mut scores = Vec::with_capacity(rounds.len());
    for chunk in rounds.chunks(batch_size) {
        let refs: Vec<&Round> = chunk.iter().collect();
        let batch = pad_batch(&refs, pad)?;
        let logits = model.forward(&batch.features, &batch.mask, None)?;
        scores.extend(logits.into_iter().map(sigmoid));
    }
    Ok(scores)
}

/// Loss and wall time of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub wall_ms: f64,
}

/// Everything produced by training one fold once.
#[derive(Debug, Clone)]
pub struct FoldRun {
    pub fold: usize,
    pub run: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub final_train_loss: f64,
    pub test_auc: f64,
    pub test_accuracy: f64,
    pub epoch_log: Vec<EpochLog>,
    pub test_scores: Vec<f64>,
    pub test_labels: Vec<f64>,
    pub model: Model,
}

/// Output of the whole k-fold protocol: every (fold, run) result plus the
/// mean and sample standard deviation of the test AUCs.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub runs: Vec<FoldRun>,
    pub mean_auc: f64,
    pub std_auc: f64,
}

fn run_fold_task(
    rounds: &[Round],
    cfg: &TrainConfig,
    train_ids: &[String],
    test_ids: &[String],
    fold: usize,
    run: usize,
) -> Result<FoldRun> {
    let select = |ids: &[String]| -> Result<Vec<Round>> {
        rounds
            .iter()
            .filter(|r| ids.contains(&r.sheet_id))
            .map(|r| truncate_round(r, cfg.progression))
            .collect()
    };
    let train = select(train_ids)?;
    let test = select(test_ids)?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::Data(format!(
            "fold {fold} has {} training and {} test rounds; both sides must be non-empty",
            train.len(),
            test.len()
        )));
    }

    // Derived from the base seed, not the shared rng state, so every
    // (fold, run) task is reproducible in isolation and under any jobs
    // setting.
    let mut fold_rng =
        SeededRng::new(cfg.seed).derive(((fold as u64) << 32) | run as u64);
    let mut model = cfg.build_model(&mut fold_rng)?;
    let mut adam = Adam::new(cfg.learning_rate, cfg.weight_decay)?;

    let mut epoch_log = Vec::with_capacity(cfg.epochs);
    let mut final_train_loss = f64::NAN;
    for epoch in 0..cfg.epochs {
        let mut epoch_rng = fold_rng.derive(epoch as u64);
        let start = Instant::now();
        let loss = train_epoch(&mut model, &train, cfg, &mut adam, &mut epoch_rng)?;
        epoch_log.push(EpochLog {
            epoch,
            train_loss: loss,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        final_train_loss = loss;
    }

    let test_scores = predict_scores(&mut model, &test, cfg.batch_size)?;
    let test_labels: Vec<f64> = test.iter().map(|r| r.winner as f64).collect();
    let test_auc = roc_auc(&test_scores, &test_labels)?;
    let test_accuracy = accuracy_at(&test_scores, &test_labels, 0.5)?;

    Ok(FoldRun {
        fold,
        run,
        n_train: train.len(),
        n_test: test.len(),
        final_train_loss,
        test_auc,
        test_accuracy,
        epoch_log,
        test_scores,
        test_labels,
        model,
    })
}

/// Sheet-level k-fold cross-validation. Every (fold, run) task starts from
/// a fresh model seeded only by (base seed, fold, run), so reports are
/// identical across re-runs and across `jobs` settings.
pub fn train_kfold(rounds: &[Round], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let mut sheet_ids: Vec<String> = Vec::new();
    for r in rounds {
        if !sheet_ids.contains(&r.sheet_id) {
            sheet_ids.push(r.sheet_id.clone());
        }
    }
    let folds = make_folds(&sheet_ids, cfg.folds, None)?;

    let tasks: Vec<(usize, usize)> = (0..cfg.repeats)
        .flat_map(|run| (0..folds.len()).map(move |fold| (fold, run)))
        .collect();

    let mut runs = Vec::with_capacity(tasks.len());
    if cfg.jobs == 1 {
        for &(fold, run) in &tasks {
            let split = &folds[fold];
            runs.push(run_fold_task(
                rounds,
                cfg,
                &split.train_sheet_ids,
                &split.test_sheet_ids,
                fold,
                run,
            )?);
        }
    } else {
        for wave in tasks.chunks(cfg.jobs) {
            let handles: Vec<Result<FoldRun>> = std::thread::scope(|scope| {
                let spawned: Vec<_> = wave
                    .iter()
                    .map(|&(fold, run)| {
                        let split = &folds[fold];
                        scope.spawn(move || {
                            run_fold_task(
                                rounds,
                                cfg,
                                &split.train_sheet_ids,
                                &split.test_sheet_ids,
                                fold,
                                run,
                            )
                        })
                    })
                    .collect();
                spawned
                    .into_iter()
                    .map(|h| {
                        h.join().unwrap_or_else(|_| {
                            Err(Error::Contract("training worker panicked".to_string()))
                        })
                    })
                    .collect()
            });
            for outcome in handles {
                runs.push(outcome?);
            }
        }
    }

    let n = runs.len() as f64;
    let mean_auc = runs.iter().map(|r| r.test_auc).sum::<f64>() / n;
    let std_auc = if runs.len() > 1 {
        (runs
            .iter()
            .map(|r| (r.test_auc - mean_auc) * (r.test_auc - mean_auc))
            .sum::<f64>()
            / (n - 1.0))
            .sqrt()
    } else {
        0.0
    };
    Ok(TrainReport {
        runs,
        mean_auc,
        std_auc,
    })
}
