use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::model::ModelInstance;
use super::tensor::Tensor;
use super::NnError;
use crate::grammar::TokenSequence;

/// Adam with decoupled weight decay. Decay applies to weight matrices and
/// kernels only, not to biases or normalization scales.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: i32,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let decay = if p.shape().len() >= 2 {
                self.weight_decay
            } else {
                0.0
            };
            let (md, vd) = (m.data_mut(), v.data_mut());
            for (i, (x, &gi)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                md[i] = self.beta1 * md[i] + (1.0 - self.beta1) * gi;
                vd[i] = self.beta2 * vd[i] + (1.0 - self.beta2) * gi * gi;
                let mhat = md[i] / c1;
                let vhat = vd[i] / c2;
                *x -= self.lr * (mhat / (vhat.sqrt() + self.eps) + decay * *x);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Seeds dropout masks.
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(steps: usize, lr: f64) -> Self {
        Self {
            steps,
            lr,
            weight_decay: 0.01,
            seed: 0,
        }
    }
}

/// Full-batch training. Returns the mean loss before each update.
pub fn train(
    m: &mut ModelInstance,
    samples: &[(Tensor, TokenSequence)],
    cfg: &TrainConfig,
) -> Result<Vec<f64>, NnError> {
    if samples.is_empty() {
        return Err(NnError::EmptySequence);
    }
    let mut opt = AdamW::new(cfg.lr, cfg.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut curve = Vec::with_capacity(cfg.steps);
    let n = samples.len() as f64;
    for step in 0..cfg.steps {
        let seeds: Vec<u64> = samples.iter().map(|_| rng.gen()).collect();
        let model = &*m;
        let results: Vec<(f64, Vec<Tensor>)> = samples
            .par_iter()
            .zip(seeds)
            .map(|((img, gt), s)| model.loss_and_grads(img, gt, Some(ChaCha8Rng::seed_from_u64(s))))
            .collect::<Result<_, _>>()?;
        let mut loss = 0.0;
        let mut total: Option<Vec<Tensor>> = None;
        for (l, g) in results {
            loss += l;
            match &mut total {
                None => total = Some(g),
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| a.add_assign(b)),
            }
        }
        loss /= n;
        if !loss.is_finite() {
            return Err(NnError::Divergence { step });
        }
        curve.push(loss);
        let grads: Vec<Tensor> = total.unwrap().into_iter().map(|g| g.map(|x| x / n)).collect();
        opt.step(m.params_mut().tensors_mut(), &grads);
    }
    Ok(curve)
}

/// [`train`] with default optimizer settings.
pub fn train_toy(
    m: &mut ModelInstance,
    samples: &[(Tensor, TokenSequence)],
    steps: usize,
    lr: f64,
) -> Result<Vec<f64>, NnError> {
    train(m, samples, &TrainConfig::new(steps, lr))
}

/// Writes `step,loss` rows with a header.
pub fn write_loss_csv<W: Write>(mut w: W, curve: &[f64]) -> std::io::Result<()> {
    writeln!(w, "step,loss")?;
    for (i, l) in curve.iter().enumerate() {
        writeln!(w, "{i},{l}")?;
    }
    Ok(())
}
