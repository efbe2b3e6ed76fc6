use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{Hypothesis, Learner, LearnerContext};
use crate::config::LearnerSpec;
use crate::encoding::BitVector;
use crate::error::{invalid, Error, Result};
use crate::network::{assemble_depth2_target, assemble_depth3_target, Layer, ReluNetwork};
use crate::oracle::{LabeledExample, OracleMode};
use crate::rng::SeedStream;

pub fn build_learner(
    spec: &LearnerSpec,
    m: usize,
    secret: Option<&BitVector>,
) -> Result<Box<dyn Learner>> {
    Ok(match spec {
        LearnerSpec::Oracle => Box::new(OracleLearner::new(
            secret.ok_or(Error::SecretUnavailable)?.clone(),
            m,
        )),
        LearnerSpec::Constant { value } => Box::new(ConstantLearner { value: *value, m }),
        LearnerSpec::RandomFeatures { width, ridge } => {
            Box::new(RandomFeaturesLearner::new(*width, *ridge, m)?)
        }
    })
}

/// Predicts with a network on full or prefix inputs.
pub struct NetworkHypothesis {
    pub net: ReluNetwork,
}

impl Hypothesis for NetworkHypothesis {
    fn predict(&self, input: &[f64]) -> f64 {
        self.net
            .forward_eval_prefix(input)
            .map_or(f64::NAN, |t| t.output())
    }

    fn predict_batch(&self, inputs: &[f64], batch: usize, width: usize) -> Result<Vec<f64>> {
        self.net.forward_batch(inputs, batch, width)
    }
}

/// Ignores its examples and returns the perturbed target built from the secret.
pub struct OracleLearner {
    secret: BitVector,
    m: usize,
}

impl OracleLearner {
    pub fn new(secret: BitVector, m: usize) -> Self {
        Self { secret, m }
    }
}

impl Learner for OracleLearner {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn sample_budget(&self) -> usize {
        self.m
    }

    fn requires_secret(&self) -> bool {
        true
    }

    fn padding_independent(&self) -> bool {
        true
    }

    fn train(
        &self,
        _: &[LabeledExample],
        ctx: &LearnerContext,
        _: &SeedStream,
    ) -> Result<Box<dyn Hypothesis>> {
        let target = match ctx.mode {
            OracleMode::Theorem1 => assemble_depth3_target(&ctx.predicate, &self.secret, ctx.n)?,
            OracleMode::Theorem2 => assemble_depth2_target(&ctx.predicate, &self.secret, ctx.n)?,
        };
        Ok(Box::new(NetworkHypothesis {
            net: ctx.perturb_like_template(&target),
        }))
    }
}

pub struct ConstantLearner {
    pub value: f64,
    pub m: usize,
}

struct ConstantHypothesis(f64);

impl Hypothesis for ConstantHypothesis {
    fn predict(&self, _: &[f64]) -> f64 {
        self.0
    }
}

impl Learner for ConstantLearner {
    fn name(&self) -> String {
        format!("constant:{}", self.value)
    }

    fn sample_budget(&self) -> usize {
        self.m
    }

    fn padding_independent(&self) -> bool {
        true
    }

    fn train(
        &self,
        _: &[LabeledExample],
        _: &LearnerContext,
        _: &SeedStream,
    ) -> Result<Box<dyn Hypothesis>> {
        Ok(Box::new(ConstantHypothesis(self.value)))
    }
}

/// Ridge regression on frozen random ReLU features.
///
/// Each of `width` Gaussian directions `(w, b)` contributes the pair
/// `[w·z + b]₊` and `[−w·z − b]₊`, whose difference is `w·z + b`; with an
/// intercept column and `width ≥ dim` every affine target is representable.
pub struct RandomFeaturesLearner {
    width: usize,
    ridge: f64,
    m: usize,
}

const RIDGE_RETRIES: usize = 12;

impl RandomFeaturesLearner {
    pub fn new(width: usize, ridge: f64, m: usize) -> Result<Self> {
        if width == 0 {
            return Err(invalid("random-features width must be at least 1"));
        }
        if ridge.is_nan() || ridge < 0.0 {
            return Err(invalid("ridge must be non-negative"));
        }
        Ok(Self { width, ridge, m })
    }

    fn feature_layer(&self, dim: usize, seeds: &SeedStream) -> Layer {
        let mut rng = seeds.rng("features", 0);
        let scale = 1.0 / (dim.max(1) as f64).sqrt();
        let mut layer = Layer::zeros(2 * self.width, dim, true);
        for j in 0..self.width {
            for c in 0..dim {
                let w = scale * rng.sample::<f64, _>(StandardNormal);
                layer.set_weight(j, c, w);
                layer.set_weight(self.width + j, c, -w);
            }
            let b: f64 = rng.sample(StandardNormal);
            layer.set_bias(j, b);
            layer.set_bias(self.width + j, -b);
        }
        layer
    }

    /// Fits on `(inputs, labels)` directly; returns the model as a two-layer network.
    pub fn fit(
        &self,
        inputs: &[f64],
        labels: &[f64],
        dim: usize,
        seeds: &SeedStream,
    ) -> Result<ReluNetwork> {
        let rows = labels.len();
        if inputs.len() != rows * dim {
            return Err(Error::DimensionMismatch {
                expected: rows * dim,
                actual: inputs.len(),
            });
        }
        let features = self.feature_layer(dim, seeds);
        let f = 2 * self.width;
        let feature_net = ReluNetwork::new(dim, vec![features.clone()])?;
        let pre = feature_net
            .forward_batch_trace(inputs, rows, dim)?
            .pop()
            .expect("one layer");
        let cols = f + 1;
        let phi = DMatrix::from_fn(rows, cols, |r, c| {
            if c == f {
                1.0
            } else {
                pre[r * f + c].max(0.0)
            }
        });
        let gram = phi.transpose() * &phi;
        let rhs = phi.transpose() * DVector::from_column_slice(labels);
        let mut lambda = self.ridge * rows.max(1) as f64;
        let mut solved = None;
        for _ in 0..RIDGE_RETRIES {
            let mut a = gram.clone();
            for i in 0..cols {
                a[(i, i)] += lambda;
            }
            if let Some(ch) = a.cholesky() {
                let beta = ch.solve(&rhs);
                if beta.iter().all(|v| v.is_finite()) {
                    solved = Some(beta);
                    break;
                }
            }
            lambda = if lambda == 0.0 { 1e-12 } else { lambda * 10.0 };
        }
        let beta = solved.ok_or(Error::SingularSystem(lambda))?;
        let readout = Layer::new(1, f, beta.as_slice()[..f].to_vec(), vec![beta[f]], false)?;
        ReluNetwork::new(dim, vec![features, readout])
    }
}

impl Learner for RandomFeaturesLearner {
    fn name(&self) -> String {
        format!("random-features:{}:{}", self.width, self.ridge)
    }

    fn sample_budget(&self) -> usize {
        self.m
    }

    fn train(
        &self,
        examples: &[LabeledExample],
        ctx: &LearnerContext,
        seeds: &SeedStream,
    ) -> Result<Box<dyn Hypothesis>> {
        let dim = ctx.width;
        let mut inputs = Vec::with_capacity(examples.len() * dim);
        for ex in examples {
            if ex.input.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: ex.input.len(),
                });
            }
            inputs.extend_from_slice(&ex.input);
        }
        let labels: Vec<f64> = examples.iter().map(|e| e.label).collect();
        Ok(Box::new(NetworkHypothesis {
            net: self.fit(&inputs, &labels, dim, seeds)?,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_features_fit_linear_targets() {
        let dim = 5;
        let rows = 200;
        let mut rng = SeedStream::new(1).rng("data", 0);
        let coef: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let inputs: Vec<f64> = (0..rows * dim)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let labels: Vec<f64> = inputs
            .chunks(dim)
            .map(|z| 0.3 + z.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let learner = RandomFeaturesLearner::new(8, 1e-12, rows).unwrap();
        let net = learner
            .fit(&inputs, &labels, dim, &SeedStream::new(2))
            .unwrap();
        let preds = net.forward_batch(&inputs, rows, dim).unwrap();
        let mse = preds
            .iter()
            .zip(&labels)
            .map(|(p, y)| (p - y).powi(2))
            .sum::<f64>()
            / rows as f64;
        assert!(mse <= 1e-8, "train mse {mse}");
    }

    #[test]
    fn random_features_constant_labels() {
        let dim = 3;
        let rows = 50;
        let mut rng = SeedStream::new(3).rng("data", 0);
        let inputs: Vec<f64> = (0..rows * dim)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let labels = vec![0.7; rows];
        let learner = RandomFeaturesLearner::new(4, 1e-12, rows).unwrap();
        let net = learner
            .fit(&inputs, &labels, dim, &SeedStream::new(4))
            .unwrap();
        for p in net.forward_batch(&inputs, rows, dim).unwrap() {
            assert!((p - 0.7).abs() < 1e-6);
        }
    }

    #[test]
    fn singular_systems_recover_with_larger_ridge() {
        let learner = RandomFeaturesLearner::new(3, 0.0, 2).unwrap();
        let inputs = vec![0.0; 4];
        let net = learner
            .fit(&inputs, &[1.0, 1.0], 2, &SeedStream::new(5))
            .unwrap();
        assert!(net.forward_eval(&[0.0, 0.0]).unwrap().output().is_finite());
        assert!(RandomFeaturesLearner::new(0, 1.0, 1).is_err());
    }
}
