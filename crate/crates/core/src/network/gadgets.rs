//! Exact-weight gadgets over the first `k·n` input coordinates.
//!
//! All gadgets read the input through a bank of hinges `[t − c − o]₊` per
//! coordinate. The threshold map uses offsets `{0, 1/n²}`, the interval detector
//! `{−1/n², 0, 1/n², 2/n²}`; the assembled target shares one four-offset bank.

use super::Layer;
use crate::dnf::DnfFormula;
use crate::error::{Error, Result};

/// Offsets of the shared hinge bank, in units of `1/n²`.
pub const INTERVAL_OFFSETS: [f64; 4] = [-1.0, 0.0, 1.0, 2.0];

/// Hidden ReLU layer followed by an affine readout.
#[derive(Clone, Debug, PartialEq)]
pub struct Fragment {
    pub hidden: Layer,
    pub readout: Layer,
}

impl Fragment {
    pub fn eval(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.hidden.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.hidden.cols(),
                actual: z.len(),
            });
        }
        let h = self.hidden.activate(&self.hidden.pre_activation(z));
        Ok(self.readout.pre_activation(&h))
    }
}

/// Hinges `[z_i − c − o_s/n²]₊`, neuron `i·|offsets| + s`, over `cols ≥ kn` inputs.
pub fn hinge_bank(n: usize, k: usize, c: f64, offsets: &[f64], cols: usize) -> Layer {
    let kn = k * n;
    let inv = 1.0 / (n * n) as f64;
    let per = offsets.len();
    let mut layer = Layer::zeros(kn * per, cols, true);
    for i in 0..kn {
        for (s, &o) in offsets.iter().enumerate() {
            layer.set_weight(i * per + s, i, 1.0);
            layer.set_bias(i * per + s, -(c + o * inv));
        }
    }
    layer
}

/// Rows mapping a hinge bank to `n²([t−c]₊ − [t−c−1/n²]₊)` per coordinate.
fn threshold_readout(n: usize, k: usize, per: usize, lo: usize, hi: usize) -> Layer {
    let kn = k * n;
    let s = (n * n) as f64;
    let mut r = Layer::zeros(kn, kn * per, false);
    for i in 0..kn {
        r.set_weight(i, i * per + lo, s);
        r.set_weight(i, i * per + hi, -s);
    }
    r
}

/// Rows mapping the four-offset bank to the trapezoid
/// `3n²([t−c+1/n²]₊ − [t−c]₊ − [t−c−1/n²]₊ + [t−c−2/n²]₊) − 1`.
pub(super) fn interval_readout(n: usize, k: usize) -> Layer {
    let kn = k * n;
    let s = 3.0 * (n * n) as f64;
    let mut r = Layer::zeros(kn, 4 * kn, false);
    for i in 0..kn {
        for (j, sign) in [1.0, -1.0, -1.0, 1.0].into_iter().enumerate() {
            r.set_weight(i, 4 * i + j, sign * s);
        }
        r.set_bias(i, -1.0);
    }
    r
}

pub(super) fn shared_threshold_readout(n: usize, k: usize) -> Layer {
    threshold_readout(n, k, 4, 1, 2)
}

/// `f(t) = n²([t−c]₊ − [t−(c+1/n²)]₊)` per coordinate: 0 below `c`, 1 above `c+1/n²`.
pub fn build_threshold_layer(n: usize, k: usize, c: f64) -> Fragment {
    Fragment {
        hidden: hinge_bank(n, k, c, &[0.0, 1.0], k * n),
        readout: threshold_readout(n, k, 2, 0, 1),
    }
}

/// Per-coordinate trapezoid: 2 on `(c, c+1/n²)`, −1 outside `(c−1/n², c+2/n²)`.
pub fn build_interval_detector(n: usize, k: usize, c: f64) -> Fragment {
    Fragment {
        hidden: hinge_bank(n, k, c, &INTERVAL_OFFSETS, k * n),
        readout: interval_readout(n, k),
    }
}

/// Neuron `j` computes `Σ_{l∈I_j} 3z_l − 3|I_j| + 2`.
pub fn build_dnf_affine_layer(psi: &DnfFormula, kn: usize) -> Layer {
    let mut layer = Layer::zeros(psi.len(), kn, false);
    for (j, term) in psi.terms().iter().enumerate() {
        for &l in term {
            layer.set_weight(j, l, 3.0);
        }
        layer.set_bias(j, -3.0 * term.len() as f64 + 2.0);
    }
    layer
}

/// Outputs, in order: `k` "at least two zeros in slice i" checks
/// `3n − 4 − Σ_j 3z_{i,j}`, `k` "no zero in slice i" checks `Σ_j 3z_{i,j} − 3n + 2`,
/// and `n` "index j zero in two slices" checks `3k − 4 − Σ_i 3z_{i,j}`.
pub fn build_validity_layer(n: usize, k: usize) -> Layer {
    let kn = k * n;
    let (nf, kf) = (n as f64, k as f64);
    let mut layer = Layer::zeros(2 * k + n, kn, false);
    for i in 0..k {
        for j in 0..n {
            layer.set_weight(i, i * n + j, -3.0);
            layer.set_weight(k + i, i * n + j, 3.0);
            layer.set_weight(2 * k + j, i * n + j, -3.0);
        }
        layer.set_bias(i, 3.0 * nf - 4.0);
        layer.set_bias(k + i, -3.0 * nf + 2.0);
    }
    for j in 0..n {
        layer.set_bias(2 * k + j, 3.0 * kf - 4.0);
    }
    layer
}

/// `outer ∘ inner` for two affine maps (activation flag taken from `outer`).
pub fn compose(outer: &Layer, inner: &Layer) -> Result<Layer> {
    if outer.cols() != inner.rows() {
        return Err(Error::DimensionMismatch {
            expected: outer.cols(),
            actual: inner.rows(),
        });
    }
    let mut out = Layer::zeros(outer.rows(), inner.cols(), outer.activated());
    for r in 0..outer.rows() {
        let mut bias = outer.biases()[r];
        for m in 0..outer.cols() {
            let a = outer.weight(r, m);
            if a == 0.0 {
                continue;
            }
            bias += a * inner.biases()[m];
            for c in 0..inner.cols() {
                let w = inner.weight(m, c);
                if w != 0.0 {
                    let cur = out.weight(r, c);
                    out.set_weight(r, c, cur + a * w);
                }
            }
        }
        out.set_bias(r, bias);
    }
    Ok(out)
}
