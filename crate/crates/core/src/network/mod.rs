//! Layered ReLU networks with traced evaluation.
//!
//! Layer `l` maps `O_{l-1}` to `σ(W_l O_{l-1} + b_l)`, with `σ` the identity when
//! the layer is not activated. Weights are stored row-major, one row per neuron.

mod gadgets;
mod targets;

pub use gadgets::{
    build_dnf_affine_layer, build_interval_detector, build_threshold_layer, build_validity_layer,
    compose, hinge_bank, Fragment, INTERVAL_OFFSETS,
};
pub use targets::{
    assemble_depth2_target, assemble_depth3_target, eval_n3_branch, n3_branch_network,
    target_regime, TargetRegime, GROUP_DNF, GROUP_INTERVAL, GROUP_VALIDITY,
};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    activated: bool,
}

impl Layer {
    pub fn new(
        rows: usize,
        cols: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activated: bool,
    ) -> Result<Self> {
        if weights.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: weights.len(),
            });
        }
        if biases.len() != rows {
            return Err(Error::DimensionMismatch {
                expected: rows,
                actual: biases.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            weights,
            biases,
            activated,
        })
    }

    pub fn zeros(rows: usize, cols: usize, activated: bool) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            biases: vec![0.0; rows],
            activated,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn activated(&self) -> bool {
        self.activated
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn weight(&self, r: usize, c: usize) -> f64 {
        self.weights[r * self.cols + c]
    }

    pub fn set_weight(&mut self, r: usize, c: usize, v: f64) {
        self.weights[r * self.cols + c] = v;
    }

    pub fn set_bias(&mut self, r: usize, v: f64) {
        self.biases[r] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.cols..(r + 1) * self.cols]
    }

    /// `W·input + b`. `input` may be shorter than `cols`; the missing trailing
    /// coordinates contribute nothing.
    pub fn pre_activation(&self, input: &[f64]) -> Vec<f64> {
        debug_assert!(input.len() <= self.cols);
        let used = input.len();
        (0..self.rows)
            .map(|r| {
                let row = &self.weights[r * self.cols..r * self.cols + used];
                dot(row, input) + self.biases[r]
            })
            .collect()
    }

    pub fn activate(&self, pre: &[f64]) -> Vec<f64> {
        if self.activated {
            pre.iter().map(|&v| v.max(0.0)).collect()
        } else {
            pre.to_vec()
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.biases)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Keeps only the listed rows.
    pub fn select_rows(&self, keep: &[usize]) -> Layer {
        let mut weights = Vec::with_capacity(keep.len() * self.cols);
        for &r in keep {
            weights.extend_from_slice(self.row(r));
        }
        Layer {
            rows: keep.len(),
            cols: self.cols,
            weights,
            biases: keep.iter().map(|&r| self.biases[r]).collect(),
            activated: self.activated,
        }
    }

    /// Keeps only the listed columns.
    pub fn select_cols(&self, keep: &[usize]) -> Layer {
        let mut weights = Vec::with_capacity(self.rows * keep.len());
        for r in 0..self.rows {
            let row = self.row(r);
            weights.extend(keep.iter().map(|&c| row[c]));
        }
        Layer {
            rows: self.rows,
            cols: keep.len(),
            weights,
            biases: self.biases.clone(),
            activated: self.activated,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators let the compiler vectorize the loop.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for j in 0..4 {
            acc[j] += a[4 * i + j] * b[4 * i + j];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Named contiguous range of neurons in one layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeuronGroup {
    pub name: String,
    pub layer: usize,
    pub start: usize,
    pub end: usize,
}

impl NeuronGroup {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Depth3,
    Depth2,
}

/// Construction parameters recorded on target networks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetMeta {
    pub kind: TargetKind,
    pub n: usize,
    pub k: usize,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReluNetwork {
    input_dim: usize,
    layers: Vec<Layer>,
    groups: Vec<NeuronGroup>,
    meta: Option<TargetMeta>,
}

/// Per-layer neuron inputs (after bias, before activation) and the final outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalTrace {
    pub pre_activations: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
}

impl EvalTrace {
    pub fn output(&self) -> f64 {
        self.outputs[0]
    }
}

impl ReluNetwork {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("network needs at least one layer"));
        }
        let mut prev = input_dim;
        for (l, layer) in layers.iter().enumerate() {
            if layer.cols != prev {
                return Err(invalid(format!(
                    "layer {l} expects {} inputs but receives {prev}",
                    layer.cols
                )));
            }
            prev = layer.rows;
        }
        Ok(Self {
            input_dim,
            layers,
            groups: Vec::new(),
            meta: None,
        })
    }

    pub fn with_group(
        mut self,
        name: &str,
        layer: usize,
        start: usize,
        end: usize,
    ) -> Result<Self> {
        if layer >= self.layers.len() || start > end || end > self.layers[layer].rows {
            return Err(invalid(format!(
                "group {name} range {start}..{end} invalid for layer {layer}"
            )));
        }
        self.groups.push(NeuronGroup {
            name: name.to_string(),
            layer,
            start,
            end,
        });
        Ok(self)
    }

    pub fn with_meta(mut self, meta: TargetMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn groups(&self) -> &[NeuronGroup] {
        &self.groups
    }

    pub fn group(&self, name: &str) -> Result<&NeuronGroup> {
        self.groups
            .iter()
            .find(|g| g.name == name)
            .ok_or_else(|| Error::MissingGroup(name.to_string()))
    }

    pub fn meta(&self) -> Option<&TargetMeta> {
        self.meta.as_ref()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.rows)
    }

    pub fn hidden_neurons(&self) -> usize {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.rows)
            .sum()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn max_abs_param(&self) -> f64 {
        self.layers.iter().fold(0.0, |m, l| m.max(l.max_abs()))
    }

    /// Bias of the (first) output neuron, the label value `b̂` on perturbed targets.
    pub fn output_bias(&self) -> f64 {
        self.layers.last().expect("non-empty").biases[0]
    }

    pub fn output_weights(&self) -> &[f64] {
        self.layers.last().expect("non-empty").row(0)
    }

    pub fn forward_eval(&self, input: &[f64]) -> Result<EvalTrace> {
        if input.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: input.len(),
            });
        }
        Ok(self.forward_unchecked(input))
    }

    /// Evaluates on the leading `input.len()` coordinates with the remaining
    /// coordinates left out of the first layer's sums.
    pub fn forward_eval_prefix(&self, input: &[f64]) -> Result<EvalTrace> {
        if input.len() > self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: input.len(),
            });
        }
        Ok(self.forward_unchecked(input))
    }

    fn forward_unchecked(&self, input: &[f64]) -> EvalTrace {
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut cur = input.to_vec();
        for layer in &self.layers {
            let pre = layer.pre_activation(&cur);
            cur = layer.activate(&pre);
            pre_activations.push(pre);
        }
        EvalTrace {
            pre_activations,
            outputs: cur,
        }
    }

    /// Batched pre-activations. `inputs` holds `batch` rows of `width` values each
    /// (`width ≤ input_dim`; missing trailing coordinates contribute nothing).
    /// Returns one `batch × rows` row-major matrix per layer.
    pub fn forward_batch_trace(
        &self,
        inputs: &[f64],
        batch: usize,
        width: usize,
    ) -> Result<Vec<Vec<f64>>> {
        if width > self.input_dim || inputs.len() != batch * width {
            return Err(Error::DimensionMismatch {
                expected: batch * width.min(self.input_dim),
                actual: inputs.len(),
            });
        }
        let mut out = Vec::with_capacity(self.layers.len());
        let mut cur: Vec<f64> = inputs.to_vec();
        let mut cur_width = width;
        for layer in &self.layers {
            let mut pre = vec![0.0; batch * layer.rows];
            gemm_nt(
                &cur,
                batch,
                cur_width,
                cur_width,
                &layer.weights,
                layer.rows,
                layer.cols,
                &mut pre,
            );
            for b in 0..batch {
                for (v, bias) in pre[b * layer.rows..(b + 1) * layer.rows]
                    .iter_mut()
                    .zip(&layer.biases)
                {
                    *v += bias;
                }
            }
            cur = if layer.activated {
                pre.iter().map(|&v| v.max(0.0)).collect()
            } else {
                pre.clone()
            };
            cur_width = layer.rows;
            out.push(pre);
        }
        Ok(out)
    }

    /// Batched first-output values.
    pub fn forward_batch(&self, inputs: &[f64], batch: usize, width: usize) -> Result<Vec<f64>> {
        let trace = self.forward_batch_trace(inputs, batch, width)?;
        let last = self.layers.last().expect("non-empty");
        let pre = trace.last().expect("non-empty");
        Ok((0..batch)
            .map(|b| {
                let v = pre[b * last.rows];
                if last.activated {
                    v.max(0.0)
                } else {
                    v
                }
            })
            .collect())
    }

    /// Removes the named groups together with the next layer's weights that read them.
    pub fn without_groups(&self, names: &[&str]) -> Result<ReluNetwork> {
        let drop: Vec<NeuronGroup> = names
            .iter()
            .map(|n| self.group(n).cloned())
            .collect::<Result<_>>()?;
        let mut layers = self.layers.clone();
        for l in 0..layers.len() {
            let removed: Vec<&NeuronGroup> = drop.iter().filter(|g| g.layer == l).collect();
            if removed.is_empty() {
                continue;
            }
            let keep: Vec<usize> = (0..layers[l].rows)
                .filter(|&r| !removed.iter().any(|g| g.range().contains(&r)))
                .collect();
            layers[l] = layers[l].select_rows(&keep);
            if l + 1 < layers.len() {
                layers[l + 1] = layers[l + 1].select_cols(&keep);
            }
        }
        let mut groups = Vec::new();
        for g in &self.groups {
            if drop.iter().any(|d| d.name == g.name) {
                continue;
            }
            let shift: usize = drop
                .iter()
                .filter(|d| d.layer == g.layer && d.end <= g.start)
                .map(|d| d.len())
                .sum();
            groups.push(NeuronGroup {
                name: g.name.clone(),
                layer: g.layer,
                start: g.start - shift,
                end: g.end - shift,
            });
        }
        Ok(ReluNetwork {
            input_dim: self.input_dim,
            layers,
            groups,
            meta: self.meta,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `out[b][r] = Σ_{c < width} x[b·x_stride + c] · w[r·w_stride + c]`.
#[allow(clippy::too_many_arguments)]
fn gemm_nt(
    x: &[f64],
    batch: usize,
    width: usize,
    x_stride: usize,
    w: &[f64],
    rows: usize,
    w_stride: usize,
    out: &mut [f64],
) {
    out.fill(0.0);
    if batch == 0 || rows == 0 || width == 0 {
        return;
    }
    assert!(x.len() >= (batch - 1) * x_stride + width);
    assert!(w.len() >= (rows - 1) * w_stride + width);
    assert!(out.len() >= batch * rows);
    // SAFETY: the asserts above bound every index dgemm touches.
    unsafe {
        matrixmultiply::dgemm(
            batch,
            width,
            rows,
            1.0,
            x.as_ptr(),
            x_stride as isize,
            1,
            w.as_ptr(),
            1,
            w_stride as isize,
            0.0,
            out.as_mut_ptr(),
            rows as isize,
            1,
        );
    }
}

#[derive(Serialize, Deserialize)]
struct LayerJson {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    activated: bool,
}

#[derive(Serialize, Deserialize)]
struct NetworkJson {
    input_dim: usize,
    layers: Vec<LayerJson>,
    groups: Vec<NeuronGroup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<TargetMeta>,
}

impl Serialize for ReluNetwork {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        NetworkJson {
            input_dim: self.input_dim,
            layers: self
                .layers
                .iter()
                .map(|l| LayerJson {
                    w: (0..l.rows).map(|r| l.row(r).to_vec()).collect(),
                    b: l.biases.clone(),
                    activated: l.activated,
                })
                .collect(),
            groups: self.groups.clone(),
            meta: self.meta,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ReluNetwork {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = NetworkJson::deserialize(d)?;
        let mut layers = Vec::with_capacity(j.layers.len());
        let mut prev = j.input_dim;
        for lj in j.layers {
            let rows = lj.w.len();
            if lj.w.iter().any(|r| r.len() != prev) {
                return Err(D::Error::custom(format!(
                    "layer row width differs from {prev}"
                )));
            }
            let weights: Vec<f64> = lj.w.into_iter().flatten().collect();
            layers.push(
                Layer::new(rows, prev, weights, lj.b, lj.activated).map_err(D::Error::custom)?,
            );
            prev = rows;
        }
        let mut net = ReluNetwork::new(j.input_dim, layers).map_err(D::Error::custom)?;
        for g in j.groups {
            net = net
                .with_group(&g.name, g.layer, g.start, g.end)
                .map_err(D::Error::custom)?;
        }
        net.meta = j.meta;
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;
    use proptest::prelude::*;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    fn random_net(seed: u64, dims: &[usize]) -> ReluNetwork {
        let mut rng = SeedStream::new(seed).rng("net", 0);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let weights = (0..w[0] * w[1])
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let biases = (0..w[1])
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                Layer::new(w[1], w[0], weights, biases, i + 2 < dims.len()).unwrap()
            })
            .collect();
        ReluNetwork::new(dims[0], layers).unwrap()
    }

    #[test]
    fn single_neuron_examples() {
        let dead = ReluNetwork::new(
            1,
            vec![Layer::new(1, 1, vec![0.0], vec![-1.0], true).unwrap()],
        )
        .unwrap();
        let t = dead.forward_eval(&[3.0]).unwrap();
        assert_eq!(t.pre_activations[0], vec![-1.0]);
        assert_eq!(t.output(), 0.0);
        let id = ReluNetwork::new(
            1,
            vec![Layer::new(1, 1, vec![1.0], vec![0.0], false).unwrap()],
        )
        .unwrap();
        assert_eq!(id.forward_eval(&[2.5]).unwrap().output(), 2.5);
        assert!(id.forward_eval(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn layer_chaining_is_checked() {
        let a = Layer::zeros(3, 2, true);
        let b = Layer::zeros(1, 4, true);
        assert!(ReluNetwork::new(2, vec![a, b]).is_err());
    }

    #[test]
    fn batch_matches_single() {
        let net = random_net(3, &[7, 5, 4, 1]);
        let mut rng = SeedStream::new(4).rng("x", 0);
        let batch = 9;
        let xs: Vec<f64> = (0..batch * 7).map(|_| rng.sample(StandardNormal)).collect();
        let trace = net.forward_batch_trace(&xs, batch, 7).unwrap();
        let outs = net.forward_batch(&xs, batch, 7).unwrap();
        for b in 0..batch {
            let single = net.forward_eval(&xs[b * 7..(b + 1) * 7]).unwrap();
            for l in 0..3 {
                let rows = net.layers()[l].rows();
                for r in 0..rows {
                    assert!((trace[l][b * rows + r] - single.pre_activations[l][r]).abs() < 1e-12);
                }
            }
            assert!((outs[b] - single.output()).abs() < 1e-12);
        }
        // Prefix evaluation equals full evaluation with zeroed tail.
        let prefix = &xs[..4];
        let mut padded = prefix.to_vec();
        padded.extend([0.0; 3]);
        let a = net.forward_eval_prefix(prefix).unwrap();
        let b = net.forward_eval(&padded).unwrap();
        assert!((a.output() - b.output()).abs() < 1e-12);
        let pb = net.forward_batch(prefix, 1, 4).unwrap();
        assert!((pb[0] - b.output()).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let net = random_net(5, &[6, 4, 1]).with_group("g", 0, 1, 3).unwrap();
        let js = net.to_json().unwrap();
        let back = ReluNetwork::from_json(&js).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.to_json().unwrap(), js);
    }

    #[test]
    fn removing_a_group_drops_rows_and_columns() {
        let net = random_net(6, &[3, 5, 1])
            .with_group("a", 0, 0, 2)
            .unwrap()
            .with_group("b", 0, 2, 5)
            .unwrap();
        let red = net.without_groups(&["a"]).unwrap();
        assert_eq!(red.layers()[0].rows(), 3);
        assert_eq!(red.layers()[1].cols(), 3);
        assert_eq!(red.group("b").unwrap().range(), 0..3);
        assert!(red.group("a").is_err());
        assert!(net.without_groups(&["zzz"]).is_err());
    }

    proptest! {
        #[test]
        fn affine_along_segments_without_sign_change(seed in any::<u64>()) {
            let net = random_net(seed, &[4, 6, 3, 1]);
            let mut rng = SeedStream::new(seed).rng("seg", 0);
            let a: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
            let dir: Vec<f64> = (0..4).map(|_| rng.sample::<f64, _>(StandardNormal) * 1e-4).collect();
            let b: Vec<f64> = a.iter().zip(&dir).map(|(x, d)| x + d).collect();
            let mid: Vec<f64> = a.iter().zip(&dir).map(|(x, d)| x + 0.5 * d).collect();
            let ta = net.forward_eval(&a).unwrap();
            let tb = net.forward_eval(&b).unwrap();
            let tm = net.forward_eval(&mid).unwrap();
            let same_region = ta.pre_activations.iter().zip(&tb.pre_activations).zip(&tm.pre_activations)
                .all(|((x, y), z)| x.iter().zip(y).zip(z).all(|((p, q), r)| (p.signum() == q.signum()) && (q.signum() == r.signum())));
            prop_assume!(same_region);
            let interp = 0.5 * (ta.output() + tb.output());
            prop_assert!((tm.output() - interp).abs() <= 1e-9 * (1.0 + tm.output().abs()));
        }
    }
}
