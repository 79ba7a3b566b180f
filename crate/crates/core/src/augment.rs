//! GAN oversampling of the minority class: a vanilla GAN (binary
//! cross-entropy, non-saturating generator loss) and a Wasserstein GAN
//! (critic with weight clipping, several critic steps per generator step).
//!
//! One training epoch is one adversarial round on one minibatch. Samples are
//! drawn from standard-normal latent noise and clamped to the unit box.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{
    loss_and_output_gradient, Activation, LayerSpec, Loss, Matrix, Network, NetworkSpec, Optimizer, OptimizerState,
    TrainConfig,
};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GanVariant {
    Vgan,
    Wgan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanSpec {
    pub variant: GanVariant,
    pub latent_dim: usize,
    pub discriminator: NetworkSpec,
    pub generator: NetworkSpec,
    pub train: TrainConfig,
    /// Critic updates per generator update (Wasserstein only).
    pub critic_steps: usize,
}

const VGAN_HIDDEN: [usize; 4] = [128, 64, 32, 8];
const WGAN_HIDDEN: [usize; 4] = [256, 128, 64, 32];
pub const DEFAULT_LATENT_DIM: usize = 8;
pub const DEFAULT_EPOCHS: usize = 10_000;
pub const DEFAULT_WEIGHT_CLIP: f64 = 0.01;
pub const DEFAULT_CRITIC_STEPS: usize = 5;

/// Discriminator from the published architecture; the generator mirrors its
/// hidden widths in reverse and ends in a logistic layer.
pub fn default_gan_spec(variant: GanVariant, feature_count: usize) -> Result<GanSpec> {
    if feature_count == 0 {
        return Err(Error::Config("feature_count must be positive".into()));
    }
    let hidden = match variant {
        GanVariant::Vgan => VGAN_HIDDEN,
        GanVariant::Wgan => WGAN_HIDDEN,
    };
    let (head, loss) = match variant {
        GanVariant::Vgan => (Activation::Logistic, Loss::BinaryCrossEntropy),
        GanVariant::Wgan => (Activation::Linear, Loss::WassersteinCritic),
    };
    let mut d_layers: Vec<LayerSpec> = hidden.iter().map(|&w| LayerSpec::new(w, Activation::LeakyRelu)).collect();
    d_layers.push(LayerSpec::new(1, head));
    let mut g_layers: Vec<LayerSpec> = hidden.iter().rev().map(|&w| LayerSpec::new(w, Activation::LeakyRelu)).collect();
    g_layers.push(LayerSpec::new(feature_count, Activation::Logistic));
    let train = match variant {
        GanVariant::Vgan => TrainConfig {
            optimizer: Optimizer::Adam,
            learning_rate: 1e-3,
            epochs: DEFAULT_EPOCHS,
            batch_size: 64,
            seed: 0,
            weight_clip: None,
        },
        GanVariant::Wgan => TrainConfig {
            optimizer: Optimizer::Adam,
            learning_rate: 5e-4,
            epochs: DEFAULT_EPOCHS,
            batch_size: 64,
            seed: 0,
            weight_clip: Some(DEFAULT_WEIGHT_CLIP),
        },
    };
    Ok(GanSpec {
        variant,
        latent_dim: DEFAULT_LATENT_DIM,
        discriminator: NetworkSpec::new(feature_count, d_layers, loss),
        generator: NetworkSpec::new(DEFAULT_LATENT_DIM, g_layers, Loss::Mse),
        train,
        critic_steps: DEFAULT_CRITIC_STEPS,
    })
}

impl GanSpec {
    pub fn validate(&self) -> Result<()> {
        self.discriminator.validate()?;
        self.generator.validate()?;
        self.train.validate()?;
        let head = self.discriminator.layers.last().map(|l| l.activation);
        match self.variant {
            GanVariant::Vgan if head != Some(Activation::Logistic) => {
                return Err(Error::Config("vgan discriminator needs a logistic head".into()))
            }
            GanVariant::Wgan if head != Some(Activation::Linear) => {
                return Err(Error::Config("wgan critic needs a linear head".into()))
            }
            _ => {}
        }
        if self.discriminator.output_dim() != 1 {
            return Err(Error::Config("discriminator must output one value".into()));
        }
        if self.generator.input_dim != self.latent_dim {
            return Err(Error::Config("generator input width must equal latent_dim".into()));
        }
        if self.generator.output_dim() != self.discriminator.input_dim {
            return Err(Error::Config("generator output width must equal the feature count".into()));
        }
        if self.critic_steps == 0 {
            return Err(Error::Config("critic_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn feature_count(&self) -> usize {
        self.discriminator.input_dim
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gan {
    pub spec: GanSpec,
    pub generator: Network,
    pub discriminator: Network,
    pub discriminator_losses: Vec<f64>,
    pub generator_losses: Vec<f64>,
}

fn latent_batch(rng: &mut rng::Rng, rows: usize, dim: usize) -> Matrix {
    Matrix {
        rows,
        cols: dim,
        data: (0..rows * dim).map(|_| rng.sample(StandardNormal)).collect(),
    }
}

fn real_batch(rng: &mut rng::Rng, data: &Matrix, rows: usize) -> Matrix {
    let picks: Vec<usize> = (0..rows).map(|_| rng.random_range(0..data.rows)).collect();
    crate::neural::gather(data, &picks)
}

fn stack(a: &Matrix, b: &Matrix) -> Matrix {
    let mut data = a.data.clone();
    data.extend_from_slice(&b.data);
    Matrix {
        rows: a.rows + b.rows,
        cols: a.cols,
        data,
    }
}

fn column(values: impl IntoIterator<Item = f64>) -> Matrix {
    let data: Vec<f64> = values.into_iter().collect();
    Matrix {
        rows: data.len(),
        cols: 1,
        data,
    }
}

/// Generator step: gradients flow from the (frozen) discriminator output back
/// into the generator only.
fn generator_step(
    gen: &mut Network,
    disc: &Network,
    opt: &mut OptimizerState,
    z: &Matrix,
    loss: Loss,
) -> Result<f64> {
    let g_trace = gen.forward_trace(z)?;
    let d_trace = disc.forward_trace(g_trace.output())?;
    let targets = column(std::iter::repeat_n(1.0, z.rows));
    let (value, d_out) = loss_and_output_gradient(loss, d_trace.output(), &targets)?;
    let (_, d_fake) = disc.backward(&d_trace, &d_out);
    let (grads, _) = gen.backward(&g_trace, &d_fake);
    opt.apply(gen, &grads);
    Ok(value)
}

pub fn train_gan(minority: &[Vec<f64>], spec: &GanSpec) -> Result<Gan> {
    spec.validate()?;
    if minority.len() < 2 {
        return Err(Error::Precondition("GAN training needs at least 2 minority rows".into()));
    }
    let data = Matrix::from_rows(minority, spec.feature_count())?;
    if data.data.iter().any(|v| !(-1e-9..=1.0 + 1e-9).contains(v)) {
        return Err(Error::Precondition("GAN training expects features in [0, 1]".into()));
    }
    let cfg = &spec.train;
    let mut rng = rng::seeded(cfg.seed);
    let mut disc = Network::init(&spec.discriminator, rng::derive(cfg.seed, 1))?;
    let mut gen = Network::init(&spec.generator, rng::derive(cfg.seed, 2))?;
    if let Some(c) = cfg.weight_clip.filter(|_| spec.variant == GanVariant::Wgan) {
        disc.clip_weights(c);
    }
    let mut d_opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate, &disc);
    let mut g_opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate, &gen);
    let m = cfg.batch_size.min(data.rows).max(1);
    let mut d_hist = Vec::with_capacity(cfg.epochs);
    let mut g_hist = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let d_steps = match spec.variant {
            GanVariant::Vgan => 1,
            GanVariant::Wgan => spec.critic_steps,
        };
        let mut d_loss = 0.0;
        for _ in 0..d_steps {
            let real = real_batch(&mut rng, &data, m);
            let fake = gen.forward_matrix(&latent_batch(&mut rng, m, spec.latent_dim))?;
            let inputs = stack(&real, &fake);
            let targets = match spec.variant {
                GanVariant::Vgan => column((0..2 * m).map(|i| if i < m { 1.0 } else { 0.0 })),
                GanVariant::Wgan => column((0..2 * m).map(|i| if i < m { 1.0 } else { -1.0 })),
            };
            let (loss, grads) = disc.loss_and_gradients(&inputs, &targets)?;
            d_opt.apply(&mut disc, &grads);
            if spec.variant == GanVariant::Wgan {
                if let Some(c) = cfg.weight_clip {
                    disc.clip_weights(c);
                }
            }
            d_loss += loss / d_steps as f64;
        }
        let z = latent_batch(&mut rng, m, spec.latent_dim);
        let g_loss = generator_step(&mut gen, &disc, &mut g_opt, &z, spec.discriminator.loss)?;
        if !d_loss.is_finite() || !g_loss.is_finite() {
            return Err(Error::Diverged(format!("non-finite GAN loss at epoch {epoch}")));
        }
        d_hist.push(d_loss);
        g_hist.push(g_loss);
    }
    Ok(Gan {
        spec: spec.clone(),
        generator: gen,
        discriminator: disc,
        discriminator_losses: d_hist,
        generator_losses: g_hist,
    })
}

/// `n` generator samples from standard-normal noise, clamped to [0, 1].
pub fn sample_synthetic(gan: &Gan, n: usize, seed: u64) -> Vec<Vec<f64>> {
    if n == 0 {
        return Vec::new();
    }
    let mut rng = rng::seeded(seed);
    let z = latent_batch(&mut rng, n, gan.spec.latent_dim);
    let out = gan
        .generator
        .forward_matrix(&z)
        .expect("latent width fixed by the spec");
    out.to_rows()
        .into_iter()
        .map(|r| r.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
        .collect()
}

impl Gan {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Gan> {
        let path = path.as_ref();
        Ok(serde_json::from_str(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)?)
    }
}
