//! Parameter vectors, noise magnitudes, Gaussian perturbation and the
//! smallest-singular-value experiment.
//!
//! # Lipschitz budget
//!
//! Fix a network with per-layer magnitude bound `B_l` (largest `|weight|` or
//! `|bias|` in layer `l`) and layer widths `d_0 = input_dim, d_1, …`. For any
//! `θ'` with `‖θ' − θ‖_∞ ≤ 1` every layer-`l` parameter is at most
//! `β_l = B_l + 1` in magnitude. With `‖z‖₂ ≤ R`:
//!
//! * `M_0 = R`, and a neuron input `a = w·O + b` obeys
//!   `|a| ≤ β_l (√d_{l−1} M_{l−1} + 1)`, so `M_l = √d_l · β_l (√d_{l−1} M_{l−1} + 1)`
//!   bounds `‖O_l‖₂` (ReLU never increases magnitude).
//! * `∂a/∂w = O_{l−1}`, `∂a/∂b = 1`, and the chain through `O_{l−1}` adds at most
//!   `Σ_j |w_j| L_{l−1} ≤ β_l d_{l−1} L_{l−1}`, so
//!   `L_l = M_{l−1} + 1 + β_l d_{l−1} L_{l−1}` with `L_0 = 0`.
//!
//! The budget is `max_l L_l`. A single neuron gives `R + 1`.
//!
//! The input budget uses the same recursion with respect to `z`:
//! `K_1 = β_1 √d_0`, `K_l = β_l d_{l−1} K_{l−1}`.

use nalgebra::DMatrix;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::network::{ReluNetwork, TargetKind};
use crate::stats::binomial_sigma;

/// Flat `θ`: every layer's weights (row-major, layer order), then every layer's biases.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: Vec<(usize, usize)>,
}

impl ParamVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn flatten_params(net: &ReluNetwork) -> ParamVector {
    let mut values = Vec::with_capacity(net.param_count());
    for l in net.layers() {
        values.extend_from_slice(l.weights());
    }
    for l in net.layers() {
        values.extend_from_slice(l.biases());
    }
    ParamVector {
        values,
        layout: net.layers().iter().map(|l| (l.rows(), l.cols())).collect(),
    }
}

/// Writes `theta` into a copy of `template`.
pub fn unflatten_params(template: &ReluNetwork, theta: &ParamVector) -> Result<ReluNetwork> {
    let layout: Vec<(usize, usize)> = template
        .layers()
        .iter()
        .map(|l| (l.rows(), l.cols()))
        .collect();
    if layout != theta.layout {
        return Err(invalid("parameter layout differs from the network's"));
    }
    if theta.values.len() != template.param_count() {
        return Err(Error::DimensionMismatch {
            expected: template.param_count(),
            actual: theta.values.len(),
        });
    }
    let mut net = template.clone();
    let mut pos = 0;
    for l in net.layers_mut() {
        let len = l.weights().len();
        l.weights_mut()
            .copy_from_slice(&theta.values[pos..pos + len]);
        pos += len;
    }
    for l in net.layers_mut() {
        let len = l.biases().len();
        l.biases_mut()
            .copy_from_slice(&theta.values[pos..pos + len]);
        pos += len;
    }
    Ok(net)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub tau: f64,
    pub omega: f64,
    pub q: f64,
    pub q_in: f64,
    pub r: usize,
    pub input_radius: f64,
}

pub fn lipschitz_budget(net: &ReluNetwork, input_radius: f64) -> f64 {
    let mut m_prev = input_radius;
    let mut l_prev = 0.0;
    let mut d_prev = net.input_dim() as f64;
    let mut best: f64 = 0.0;
    for layer in net.layers() {
        let beta = layer.max_abs() + 1.0;
        let l_cur = m_prev + 1.0 + beta * d_prev * l_prev;
        let d_cur = layer.rows() as f64;
        let m_cur = d_cur.sqrt() * beta * (d_prev.sqrt() * m_prev + 1.0);
        best = best.max(l_cur);
        m_prev = m_cur;
        l_prev = l_cur;
        d_prev = d_cur;
    }
    best
}

/// Lipschitz bound of every neuron input with respect to the network input,
/// valid for all parameters within `slack` of the current ones.
pub fn input_lipschitz_budget(net: &ReluNetwork, slack: f64) -> f64 {
    let mut k_prev = 0.0;
    let mut best: f64 = 0.0;
    let mut d_prev = net.input_dim() as f64;
    for (i, layer) in net.layers().iter().enumerate() {
        let beta = layer.max_abs() + slack;
        let k_cur = if i == 0 {
            beta * d_prev.sqrt()
        } else {
            beta * d_prev * k_prev
        };
        best = best.max(k_cur);
        k_prev = k_cur;
        d_prev = layer.rows() as f64;
    }
    best
}

/// `τ = 1 / (q √(2 r n))`.
pub fn select_tau(q: f64, r: usize, n: usize) -> f64 {
    1.0 / (q * (2.0 * r as f64 * n as f64).sqrt())
}

/// `ω = 1 / (q_in √(2 d n))` for input dimension `d`.
pub fn select_omega(q_in: f64, d: usize, n: usize) -> f64 {
    select_tau(q_in, d, n)
}

/// Noise magnitudes for a target network, with safety factor 4 on every budget.
///
/// Depth-3 targets use input radius `2n`. Depth-2 targets see binary inputs of
/// norm at most `n` plus input noise, so they use radius `n + 1`, and also get `ω`.
pub fn smoothing_for_target(net: &ReluNetwork) -> Result<SmoothingConfig> {
    let meta = net
        .meta()
        .ok_or_else(|| invalid("network has no target metadata"))?;
    let n = meta.n;
    let r = net.param_count();
    let radius = match meta.kind {
        TargetKind::Depth3 => 2.0 * n as f64,
        TargetKind::Depth2 => n as f64 + 1.0,
    };
    let q = (4.0 * lipschitz_budget(net, radius)).max(1.0);
    let tau = select_tau(q, r, n);
    let (q_in, omega) = match meta.kind {
        TargetKind::Depth3 => (0.0, 0.0),
        TargetKind::Depth2 => {
            let q_in = (4.0 * input_lipschitz_budget(net, 1.0)).max(1.0);
            (q_in, select_omega(q_in, net.input_dim(), n))
        }
    };
    Ok(SmoothingConfig {
        tau,
        omega,
        q,
        q_in,
        r,
        input_radius: radius,
    })
}

pub fn perturb_params<R: rand::Rng + ?Sized>(
    theta: &ParamVector,
    tau: f64,
    rng: &mut R,
) -> ParamVector {
    let values = theta
        .values
        .iter()
        .map(|&v| v + tau * rng.sample::<f64, _>(StandardNormal))
        .collect();
    ParamVector {
        values,
        layout: theta.layout.clone(),
    }
}

/// Same draw as `perturb_params(flatten_params(net))` without the copies.
/// Returns the perturbed network and `‖ξ‖₂`.
pub fn perturb_network<R: rand::Rng + ?Sized>(
    net: &ReluNetwork,
    tau: f64,
    rng: &mut R,
) -> (ReluNetwork, f64) {
    let mut out = net.clone();
    let mut sq = 0.0;
    for l in out.layers_mut() {
        for w in l.weights_mut() {
            let xi = tau * rng.sample::<f64, _>(StandardNormal);
            sq += xi * xi;
            *w += xi;
        }
    }
    for l in out.layers_mut() {
        for b in l.biases_mut() {
            let xi = tau * rng.sample::<f64, _>(StandardNormal);
            sq += xi * xi;
            *b += xi;
        }
    }
    (out, sq.sqrt())
}

pub fn perturb_input<R: rand::Rng + ?Sized>(z: &[f64], omega: f64, rng: &mut R) -> Vec<f64> {
    z.iter()
        .map(|&v| v + omega * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// JSON summary of a perturbation experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub tau: f64,
    pub omega: f64,
    pub q: f64,
    pub violations: usize,
    pub trials: usize,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinSingularReport {
    pub d: usize,
    pub tau: f64,
    pub t: f64,
    pub trials: usize,
    pub below: usize,
    pub empirical_freq: f64,
    pub bound: f64,
    pub sigma: f64,
}

impl MinSingularReport {
    pub fn within_bound(&self) -> bool {
        self.empirical_freq <= self.bound + 3.0 * self.sigma
    }
}

pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    m.singular_values()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Estimates `Pr[σ_min(W + G) ≤ t]` for `G` with iid `N(0, τ²)` entries and
/// reports it next to `min(1, 2.35·t·√d/τ)`.
pub fn min_singular_check<R: rand::Rng + ?Sized>(
    w: &DMatrix<f64>,
    tau: f64,
    t: f64,
    trials: usize,
    rng: &mut R,
) -> Result<MinSingularReport> {
    if w.nrows() != w.ncols() {
        return Err(invalid(format!(
            "matrix is {}x{}, not square",
            w.nrows(),
            w.ncols()
        )));
    }
    if tau <= 0.0 {
        return Err(invalid("tau must be positive"));
    }
    let d = w.nrows();
    let bound = (2.35 * t * (d as f64).sqrt() / tau).min(1.0);
    let mut below = 0;
    for _ in 0..trials {
        let m = DMatrix::from_fn(d, d, |i, j| {
            w[(i, j)] + tau * rng.sample::<f64, _>(StandardNormal)
        });
        if smallest_singular_value(&m) <= t {
            below += 1;
        }
    }
    let empirical_freq = if trials == 0 {
        0.0
    } else {
        below as f64 / trials as f64
    };
    Ok(MinSingularReport {
        d,
        tau,
        t,
        trials,
        below,
        empirical_freq,
        bound,
        sigma: binomial_sigma(bound.clamp(0.0, 1.0), trials),
    })
}
