//! Target networks over `n²` inputs that only read the first `k·n` coordinates.
//!
//! Depth 3: layer 1 is the shared four-offset hinge bank. Layer 2 holds the
//! DNF group (DNF affine map composed with the threshold readout), the validity
//! group (validity checks composed with the threshold readout) and the interval
//! group (trapezoid readout), all activated. Layer 3 is one activated neuron
//! `[1 − Σ gates]₊`. Because every group reads the same hinges, no coordinate
//! has to be carried through a layer unchanged.
//!
//! Depth 2: the DNF and validity groups read the raw binary input directly.

use serde::{Deserialize, Serialize};

use super::gadgets::{
    build_dnf_affine_layer, build_validity_layer, compose, hinge_bank, interval_readout,
    shared_threshold_readout, INTERVAL_OFFSETS,
};
use super::{Layer, ReluNetwork, TargetKind, TargetMeta};
use crate::dnf::compile_predicate_dnf;
use crate::encoding::BitVector;
use crate::error::{invalid, Error, Result};
use crate::prg::Predicate;
use crate::stats::threshold_c;

pub const GROUP_DNF: &str = "E1";
pub const GROUP_VALIDITY: &str = "E2";
pub const GROUP_INTERVAL: &str = "E3";

fn check_dims(p: &Predicate, x: &BitVector, n: usize) -> Result<usize> {
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: x.len(),
        });
    }
    if n < 2 {
        return Err(invalid("targets need n >= 2"));
    }
    let k = p.k();
    if k > n {
        return Err(invalid(format!("k = {k} exceeds n = {n}")));
    }
    Ok(k)
}

fn check_bound(net: &ReluNetwork, n: usize) -> Result<()> {
    let bound = (n as f64).powi(3);
    let m = net.max_abs_param();
    if m > bound {
        return Err(Error::BoundViolation { value: m, bound, n });
    }
    Ok(())
}

fn widen(layer: &Layer, cols: usize) -> Layer {
    let mut out = Layer::zeros(layer.rows(), cols, layer.activated());
    for r in 0..layer.rows() {
        for c in 0..layer.cols() {
            out.set_weight(r, c, layer.weight(r, c));
        }
        out.set_bias(r, layer.biases()[r]);
    }
    out
}

fn stack(parts: &[&Layer], activated: bool) -> Layer {
    let cols = parts[0].cols();
    let rows: usize = parts.iter().map(|p| p.rows()).sum();
    let mut weights = Vec::with_capacity(rows * cols);
    let mut biases = Vec::with_capacity(rows);
    for p in parts {
        weights.extend_from_slice(p.weights());
        biases.extend_from_slice(p.biases());
    }
    Layer::new(rows, cols, weights, biases, activated).expect("consistent shapes")
}

fn output_layer(gates: usize) -> Layer {
    Layer::new(1, gates, vec![-1.0; gates], vec![1.0], true).expect("consistent shapes")
}

pub fn assemble_depth3_target(p: &Predicate, x: &BitVector, n: usize) -> Result<ReluNetwork> {
    let k = check_dims(p, x, n)?;
    let kn = k * n;
    let d = n * n;
    let c = threshold_c(n);
    let psi = compile_predicate_dnf(p, x, n)?;

    let bank = hinge_bank(n, k, c, &INTERVAL_OFFSETS, d);
    let thresh = shared_threshold_readout(n, k);
    let e1 = compose(&build_dnf_affine_layer(&psi, kn), &thresh)?;
    let e2 = compose(&build_validity_layer(n, k), &thresh)?;
    let e3 = interval_readout(n, k);
    let (n1, n2, n3) = (e1.rows(), e2.rows(), e3.rows());
    let gates = stack(&[&e1, &e2, &e3], true);
    debug_assert_eq!(gates.cols(), 4 * kn);

    let net = ReluNetwork::new(d, vec![bank, gates, output_layer(n1 + n2 + n3)])?
        .with_group(GROUP_DNF, 1, 0, n1)?
        .with_group(GROUP_VALIDITY, 1, n1, n1 + n2)?
        .with_group(GROUP_INTERVAL, 1, n1 + n2, n1 + n2 + n3)?
        .with_meta(TargetMeta {
            kind: TargetKind::Depth3,
            n,
            k,
            c,
        });
    check_bound(&net, n)?;
    Ok(net)
}

pub fn assemble_depth2_target(p: &Predicate, x: &BitVector, n: usize) -> Result<ReluNetwork> {
    let k = check_dims(p, x, n)?;
    let kn = k * n;
    let d = n * n;
    let psi = compile_predicate_dnf(p, x, n)?;
    let e1 = widen(&build_dnf_affine_layer(&psi, kn), d);
    let e2 = widen(&build_validity_layer(n, k), d);
    let (n1, n2) = (e1.rows(), e2.rows());
    let gates = stack(&[&e1, &e2], true);
    let net = ReluNetwork::new(d, vec![gates, output_layer(n1 + n2)])?
        .with_group(GROUP_DNF, 0, 0, n1)?
        .with_group(GROUP_VALIDITY, 0, n1, n1 + n2)?
        .with_meta(TargetMeta {
            kind: TargetKind::Depth2,
            n,
            k,
            c: threshold_c(n),
        });
    check_bound(&net, n)?;
    Ok(net)
}

/// The network with the DNF and validity groups removed; its output is
/// `[b̂ − Σ_{interval gates} w·o]₊` and it carries no information about `x`.
pub fn n3_branch_network(net: &ReluNetwork) -> Result<ReluNetwork> {
    net.group(GROUP_INTERVAL)?;
    net.without_groups(&[GROUP_DNF, GROUP_VALIDITY])
}

pub fn eval_n3_branch(net: &ReluNetwork, input: &[f64]) -> Result<f64> {
    Ok(n3_branch_network(net)?.forward_eval(input)?.output())
}

/// Sizes and magnitudes of a target against the bounds the construction targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetRegime {
    pub n: usize,
    pub k: usize,
    pub hidden_neurons: usize,
    pub hidden_bound: usize,
    pub dnf_neurons: usize,
    pub ln_n: f64,
    pub max_magnitude: f64,
    pub magnitude_bound: f64,
    pub flags: Vec<String>,
}

impl TargetRegime {
    pub fn regime_ok(&self) -> bool {
        self.flags.is_empty()
    }
}

pub fn target_regime(net: &ReluNetwork) -> Result<TargetRegime> {
    let meta = net
        .meta()
        .ok_or_else(|| invalid("network has no target metadata"))?;
    let (n, k) = (meta.n, meta.k);
    let dnf_neurons = net.group(GROUP_DNF)?.len();
    let hidden = net.hidden_neurons();
    let expected = match meta.kind {
        TargetKind::Depth3 => 4 * k * n + dnf_neurons + 2 * k + n + k * n,
        TargetKind::Depth2 => dnf_neurons + 2 * k + n,
    };
    if hidden != expected {
        return Err(invalid(format!(
            "hidden neuron count {hidden} differs from formula {expected}"
        )));
    }
    let ln_n = (n as f64).ln();
    let mut flags = Vec::new();
    if hidden > n * n {
        flags.push(format!("hidden neurons {hidden} exceed n^2 = {}", n * n));
    }
    if (1u64 << k) as f64 > ln_n {
        flags.push(format!("2^k = {} exceeds ln n = {ln_n:.3}", 1u64 << k));
    }
    Ok(TargetRegime {
        n,
        k,
        hidden_neurons: hidden,
        hidden_bound: n * n,
        dnf_neurons,
        ln_n,
        max_magnitude: net.max_abs_param(),
        magnitude_bound: (n as f64).powi(3),
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnf::eval_dnf;
    use crate::encoding::{decode_bits, encode_hyperedge, Hyperedge};
    use crate::prg::p_x_eval;

    fn binary_input(bits: &[u8], n: usize, c: f64) -> Vec<f64> {
        // 0 → well below c, 1 → well above c + 2/n².
        let mut z: Vec<f64> = bits
            .iter()
            .map(|&b| if b == 1 { c + 1.0 } else { c - 1.0 })
            .collect();
        z.resize(n * n, 0.0);
        z
    }

    #[test]
    fn depth3_outputs_on_encodings() {
        let n = 5;
        let p = Predicate::xor(2).unwrap();
        let x = BitVector::parse("01101").unwrap();
        let net = assemble_depth3_target(&p, &x, n).unwrap();
        let c = net.meta().unwrap().c;
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let z = encode_hyperedge(&Hyperedge::new(vec![a, b], n).unwrap(), n);
                let want = 1.0 - p_x_eval(&p, &x, &z).unwrap() as f64;
                let out = net
                    .forward_eval(&binary_input(&z.to_bits(), n, c))
                    .unwrap()
                    .output();
                assert!((out - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn depth3_silent_input_gives_unit_output() {
        let n = 4;
        let p = Predicate::constant(2, 0).unwrap();
        let net = assemble_depth3_target(&p, &BitVector::zeros(n), n).unwrap();
        let c = net.meta().unwrap().c;
        let z = encode_hyperedge(&Hyperedge::new(vec![0, 1], n).unwrap(), n);
        assert_eq!(
            net.forward_eval(&binary_input(&z.to_bits(), n, c))
                .unwrap()
                .output(),
            1.0
        );
    }

    #[test]
    fn depth3_non_encodings_give_zero_exhaustive_n3() {
        let n = 3;
        let p = Predicate::or(2).unwrap();
        let x = BitVector::parse("010").unwrap();
        let net = assemble_depth3_target(&p, &x, n).unwrap();
        let c = net.meta().unwrap().c;
        for mask in 0u32..64 {
            let bits: Vec<u8> = (0..6).map(|i| ((mask >> i) & 1) as u8).collect();
            let out = net
                .forward_eval(&binary_input(&bits, n, c))
                .unwrap()
                .output();
            match decode_bits(&bits, n, 2) {
                None => assert_eq!(out, 0.0),
                Some(s) => {
                    let z = encode_hyperedge(&s, n);
                    assert_eq!(
                        out,
                        1.0 - eval_dnf(&compile_predicate_dnf(&p, &x, n).unwrap(), &z).unwrap()
                            as f64
                    );
                }
            }
        }
    }

    #[test]
    fn depth2_outputs() {
        let n = 5;
        let p = Predicate::maj(3).unwrap();
        let x = BitVector::parse("11010").unwrap();
        let net = assemble_depth2_target(&p, &x, n).unwrap();
        let mut z = vec![1.0; n * n];
        let e = encode_hyperedge(&Hyperedge::new(vec![0, 2, 4], n).unwrap(), n);
        for (i, b) in e.iter().enumerate() {
            z[i] = b as f64;
        }
        let want = 1.0 - p_x_eval(&p, &x, &e).unwrap() as f64;
        assert_eq!(net.forward_eval(&z).unwrap().output(), want);
        z[0] = 0.0;
        z[1] = 0.0;
        assert_eq!(net.forward_eval(&z).unwrap().output(), 0.0);
    }

    #[test]
    fn magnitude_bound_and_regime() {
        let p = Predicate::xor(2).unwrap();
        assert!(matches!(
            assemble_depth3_target(&p, &BitVector::zeros(2), 2),
            Err(Error::BoundViolation { .. })
        ));
        let net = assemble_depth3_target(&p, &BitVector::zeros(3), 3).unwrap();
        assert!(net.max_abs_param() <= 27.0);
        let r = target_regime(&net).unwrap();
        assert!(!r.regime_ok());
        let big =
            assemble_depth3_target(&Predicate::xor(1).unwrap(), &BitVector::zeros(30), 30).unwrap();
        let r = target_regime(&big).unwrap();
        assert_eq!(r.hidden_neurons, 4 * 30 + 1 + 2 + 30 + 30);
        assert!(r.regime_ok(), "{:?}", r.flags);
    }

    #[test]
    fn n3_branch_examples() {
        let n = 4;
        let p = Predicate::xor(2).unwrap();
        let net = assemble_depth3_target(&p, &BitVector::parse("0101").unwrap(), n).unwrap();
        let c = net.meta().unwrap().c;
        let z = encode_hyperedge(&Hyperedge::new(vec![0, 1], n).unwrap(), n);
        let mut input = binary_input(&z.to_bits(), n, c);
        assert_eq!(eval_n3_branch(&net, &input).unwrap(), 1.0);
        // Coordinate 3 sits on a one; move it to the middle of (c, c + 1/n²).
        input[3] = c + 0.5 / (n * n) as f64;
        assert!(eval_n3_branch(&net, &input).unwrap().abs() < 1e-9);
        let red = n3_branch_network(&net).unwrap();
        assert!(red.group(GROUP_DNF).is_err());
        assert_eq!(red.group(GROUP_INTERVAL).unwrap().len(), 2 * n);
        let plain = ReluNetwork::new(1, vec![Layer::zeros(1, 1, true)]).unwrap();
        assert!(matches!(
            eval_n3_branch(&plain, &[0.0]),
            Err(Error::MissingGroup(_))
        ));
    }

    #[test]
    fn n3_branch_does_not_depend_on_secret() {
        let n = 6;
        let p = Predicate::xor_maj(1, 2).unwrap();
        let a = assemble_depth3_target(&p, &BitVector::parse("010011").unwrap(), n).unwrap();
        let b = assemble_depth3_target(&p, &BitVector::parse("111000").unwrap(), n).unwrap();
        assert_eq!(a.param_count(), b.param_count());
        assert_eq!(
            n3_branch_network(&a).unwrap(),
            n3_branch_network(&b).unwrap()
        );
    }
}
