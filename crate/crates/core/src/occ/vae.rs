//! Variational autoencoder scored by reconstruction error.
//!
//! Encoder `d → 9 → 10 → 2·latent` (ReLU hidden, linear head split into mean
//! and log-variance); decoder `latent → 9 → 10 → d` with a linear output.
//! Training minimises per-row MSE plus the KL divergence to N(0, I).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{Activation, LayerSpec, Loss, Matrix, Network, NetworkSpec, Optimizer, OptimizerState};
use crate::rng;

pub const HIDDEN: [usize; 2] = [9, 10];
pub const LATENT: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vae {
    pub encoder: Network,
    pub decoder: Network,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct VaeParams {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

pub fn encoder_spec(d: usize) -> NetworkSpec {
    NetworkSpec::new(
        d,
        vec![
            LayerSpec::new(HIDDEN[0], Activation::Relu),
            LayerSpec::new(HIDDEN[1], Activation::Relu),
            LayerSpec::new(2 * LATENT, Activation::Linear),
        ],
        Loss::Mse,
    )
}

pub fn decoder_spec(d: usize) -> NetworkSpec {
    NetworkSpec::new(
        LATENT,
        vec![
            LayerSpec::new(HIDDEN[0], Activation::Relu),
            LayerSpec::new(HIDDEN[1], Activation::Relu),
            LayerSpec::new(d, Activation::Linear),
        ],
        Loss::Mse,
    )
}

impl Vae {
    pub fn fit(x: &[Vec<f64>], params: &VaeParams, seed: u64) -> Result<Vae> {
        let d = x[0].len();
        let mut encoder = Network::init(&encoder_spec(d), rng::derive(seed, 1))?;
        let mut decoder = Network::init(&decoder_spec(d), rng::derive(seed, 2))?;
        let mut enc_opt = OptimizerState::new(Optimizer::Adam, params.learning_rate, &encoder);
        let mut dec_opt = OptimizerState::new(Optimizer::Adam, params.learning_rate, &decoder);
        let mut r = rng::seeded(rng::derive(seed, 3));
        let n = x.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut losses = Vec::with_capacity(params.epochs);
        for epoch in 0..params.epochs {
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut r);
            let mut total = 0.0;
            for chunk in order.chunks(params.batch_size.max(1)) {
                let b = chunk.len();
                let batch: Vec<Vec<f64>> = chunk.iter().map(|&i| x[i].clone()).collect();
                let input = Matrix::from_rows(&batch, d)?;
                let enc = encoder.forward_trace(&input)?;
                let head = enc.output();
                let mut z = Matrix::zeros(b, LATENT);
                let mut eps = Matrix::zeros(b, LATENT);
                let mut kl = 0.0;
                for i in 0..b {
                    for k in 0..LATENT {
                        let mu = head.data[i * 2 * LATENT + k];
                        let lv = head.data[i * 2 * LATENT + LATENT + k];
                        let e: f64 = r.sample(StandardNormal);
                        eps.data[i * LATENT + k] = e;
                        z.data[i * LATENT + k] = mu + (0.5 * lv).exp() * e;
                        kl += -0.5 * (1.0 + lv - mu * mu - lv.exp());
                    }
                }
                let dec = decoder.forward_trace(&z)?;
                let out = dec.output();
                let mut d_out = Matrix::zeros(b, d);
                let mut recon = 0.0;
                for k in 0..b * d {
                    let diff = out.data[k] - input.data[k];
                    recon += diff * diff / d as f64;
                    d_out.data[k] = 2.0 * diff / (d as f64 * b as f64);
                }
                let loss = (recon + kl) / b as f64;
                if !loss.is_finite() {
                    return Err(Error::Diverged(format!("vae loss is not finite at epoch {epoch}")));
                }
                total += loss * b as f64;
                let (dec_grads, d_z) = decoder.backward(&dec, &d_out);
                let mut d_head = Matrix::zeros(b, 2 * LATENT);
                for i in 0..b {
                    for k in 0..LATENT {
                        let mu = head.data[i * 2 * LATENT + k];
                        let lv = head.data[i * 2 * LATENT + LATENT + k];
                        let gz = d_z.data[i * LATENT + k];
                        let e = eps.data[i * LATENT + k];
                        d_head.data[i * 2 * LATENT + k] = gz + mu / b as f64;
                        d_head.data[i * 2 * LATENT + LATENT + k] =
                            gz * e * 0.5 * (0.5 * lv).exp() + 0.5 * (lv.exp() - 1.0) / b as f64;
                    }
                }
                let (enc_grads, _) = encoder.backward(&enc, &d_head);
                dec_opt.apply(&mut decoder, &dec_grads);
                enc_opt.apply(&mut encoder, &enc_grads);
            }
            losses.push(total / n as f64);
        }
        Ok(Vae {
            encoder,
            decoder,
            losses,
        })
    }

    /// Reconstruction through the posterior mean.
    pub fn reconstruct(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let head = self.encoder.forward(rows)?;
        let mu: Vec<Vec<f64>> = head.into_iter().map(|h| h[..LATENT].to_vec()).collect();
        self.decoder.forward(&mu)
    }

    /// Mean squared reconstruction error per row.
    pub fn scores(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        if rows.is_empty() {
            return Ok(Vec::new());
        }
        let recon = self.reconstruct(rows)?;
        Ok(rows
            .iter()
            .zip(&recon)
            .map(|(x, y)| x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64)
            .collect())
    }
}
