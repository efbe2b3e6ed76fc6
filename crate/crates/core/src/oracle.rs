//! Example oracles built from a challenge sequence.
//!
//! Depth-3 mode draws Gaussian inputs whose threshold pattern occasionally
//! encodes a hyperedge; those draws are replaced by the next challenge edge and
//! labeled from the challenge bit through a case table. Depth-2 mode does the
//! same over smoothed Bernoulli inputs. Neither oracle sees the secret: the
//! depth-3 oracle holds only the perturbed network with the DNF and validity
//! groups removed.

use std::fmt;

use rand_distr::{Exp1, OpenClosed01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::encoding::{decode_bits, encode_into, BitVector};
use crate::error::{invalid, Error, Result};
use crate::network::{ReluNetwork, GROUP_INTERVAL};
use crate::prg::PublicChallenge;
use crate::stats::{normal_cdf, normal_quantile, normal_sf, threshold_c};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    Theorem1,
    Theorem2,
}

/// Whether examples carry the `n² − kn` padding coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaddingMode {
    Dense,
    Lazy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseTag {
    NonEncoding,
    CleanZero,
    CleanOne,
    IntervalHit,
    NearIntervalZero,
    NearIntervalOne,
}

impl CaseTag {
    pub const ALL: [CaseTag; 6] = [
        CaseTag::NonEncoding,
        CaseTag::CleanZero,
        CaseTag::CleanOne,
        CaseTag::IntervalHit,
        CaseTag::NearIntervalZero,
        CaseTag::NearIntervalOne,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CaseTag::NonEncoding => "non_encoding",
            CaseTag::CleanZero => "clean_zero",
            CaseTag::CleanOne => "clean_one",
            CaseTag::IntervalHit => "interval_hit",
            CaseTag::NearIntervalZero => "near_interval_zero",
            CaseTag::NearIntervalOne => "near_interval_one",
        }
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `input` has `padded_dim = n²` entries, or only the leading `kn` in lazy mode.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledExample {
    pub input: Vec<f64>,
    pub padded_dim: usize,
    pub label: f64,
    pub case_tag: CaseTag,
}

impl LabeledExample {
    pub fn padding_suppressed(&self) -> bool {
        self.input.len() < self.padded_dim
    }

    /// One JSON line; inputs without padding are written as a sparse `{index: value}` map.
    pub fn to_json_value(&self) -> serde_json::Value {
        let input = if self.padding_suppressed() {
            serde_json::Value::Object(
                self.input
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (i.to_string(), serde_json::json!(v)))
                    .collect(),
            )
        } else {
            serde_json::json!(self.input)
        };
        serde_json::json!({ "input": input, "label": self.label, "case_tag": self.case_tag })
    }
}

/// Draw from `N(0,1)` conditioned on `t < c` (bit 0) or `t ≥ c` (bit 1).
///
/// Uses the inverse CDF, with the upper side mirrored so both sides work on
/// small lower-tail probabilities. Beyond `|c| > 6` the tail side switches to an
/// exponential-proposal rejection sampler and the bulk side to plain rejection.
pub fn sample_conditional_gaussian<R: rand::Rng + ?Sized>(bit: u8, c: f64, rng: &mut R) -> f64 {
    let t = if c.abs() > 6.0 {
        match (bit, c < 0.0) {
            (0, true) => -tail_sample(-c, rng),
            (1, false) => tail_sample(c, rng),
            (0, false) => loop {
                let t: f64 = rng.sample(StandardNormal);
                if t < c {
                    break t;
                }
            },
            _ => loop {
                let t: f64 = rng.sample(StandardNormal);
                if t >= c {
                    break t;
                }
            },
        }
    } else {
        let u: f64 = rng.sample(OpenClosed01);
        if bit == 0 {
            normal_quantile(u * normal_cdf(c))
        } else {
            -normal_quantile(u * normal_sf(c))
        }
    };
    // Keep the support exact under rounding so Ψ always recovers the bit.
    if bit == 0 {
        t.min(c.next_down())
    } else {
        t.max(c)
    }
}

/// Exponential-proposal sampler for `N(0,1)` conditioned on `t ≥ a`, `a > 0`.
fn tail_sample<R: rand::Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = rng.sample(Exp1);
        let x = a + e / alpha;
        let u: f64 = rng.random();
        if u <= (-0.5 * (x - alpha) * (x - alpha)).exp() {
            return x;
        }
    }
}

/// Oracle state. Holds only public information: edges, labels, and for depth-3
/// mode the secret-free interval branch of the perturbed network.
#[derive(Clone, Debug)]
pub struct OracleState<'a> {
    challenge: PublicChallenge<'a>,
    mode: OracleMode,
    padding: PaddingMode,
    n: usize,
    k: usize,
    c: f64,
    cursor: usize,
    b_hat: f64,
    branch: Option<ReluNetwork>,
    omega: f64,
}

impl<'a> OracleState<'a> {
    /// Depth-3 oracle; `branch` is the perturbed target with the DNF and validity groups removed.
    pub fn theorem1(
        challenge: PublicChallenge<'a>,
        branch: ReluNetwork,
        padding: PaddingMode,
    ) -> Result<Self> {
        branch.group(GROUP_INTERVAL)?;
        let (n, k) = (challenge.graph.n(), challenge.graph.k());
        if branch.input_dim() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: branch.input_dim(),
            });
        }
        Ok(Self {
            challenge,
            mode: OracleMode::Theorem1,
            padding,
            n,
            k,
            c: threshold_c(n),
            cursor: 0,
            b_hat: branch.output_bias(),
            branch: Some(branch),
            omega: 0.0,
        })
    }

    /// Depth-2 oracle with label value `b_hat` and input noise `omega`.
    pub fn theorem2(
        challenge: PublicChallenge<'a>,
        b_hat: f64,
        omega: f64,
        padding: PaddingMode,
    ) -> Result<Self> {
        if omega < 0.0 {
            return Err(invalid("omega must be non-negative"));
        }
        let (n, k) = (challenge.graph.n(), challenge.graph.k());
        Ok(Self {
            challenge,
            mode: OracleMode::Theorem2,
            padding,
            n,
            k,
            c: threshold_c(n),
            cursor: 0,
            b_hat,
            branch: None,
            omega,
        })
    }

    pub fn mode(&self) -> OracleMode {
        self.mode
    }

    pub fn padding(&self) -> PaddingMode {
        self.padding
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn b_hat(&self) -> f64 {
        self.b_hat
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Bernoulli bits (zero with probability 1/n) over the first `kn` coordinates,
    /// with the next challenge edge substituted when they form an encoding.
    /// Returns the bits and the challenge label when a substitution happened.
    fn draw_bits<R: rand::Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(Vec<u8>, Option<u8>)> {
        let kn = self.k * self.n;
        let p0 = 1.0 / self.n as f64;
        let mut bits: Vec<u8> = (0..kn)
            .map(|_| u8::from(rng.random::<f64>() >= p0))
            .collect();
        if decode_bits(&bits, self.n, self.k).is_none() {
            return Ok((bits, None));
        }
        let m = self.challenge.graph.m();
        if self.cursor >= m {
            return Err(Error::OracleDepleted(m));
        }
        encode_into(self.challenge.graph.edge(self.cursor), self.n, &mut bits);
        let y = self.challenge.labels.get(self.cursor);
        self.cursor += 1;
        Ok((bits, Some(y)))
    }

    pub fn next_example<R: rand::Rng + ?Sized>(&mut self, rng: &mut R) -> Result<LabeledExample> {
        match self.mode {
            OracleMode::Theorem1 => gen_example_depth3(self, rng),
            OracleMode::Theorem2 => gen_example_depth2(self, rng),
        }
    }
}

pub fn gen_example_depth3<R: rand::Rng + ?Sized>(
    state: &mut OracleState<'_>,
    rng: &mut R,
) -> Result<LabeledExample> {
    if state.mode != OracleMode::Theorem1 {
        return Err(invalid("depth-3 examples need a theorem1 oracle"));
    }
    let (n, c) = (state.n, state.c);
    let d = n * n;
    let (bits, y) = state.draw_bits(rng)?;
    let mut input: Vec<f64> = bits
        .iter()
        .map(|&b| sample_conditional_gaussian(b, c, rng))
        .collect();
    if state.padding == PaddingMode::Dense {
        input.extend((input.len()..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
    }
    let (label, case_tag) = match y {
        None => (0.0, CaseTag::NonEncoding),
        Some(y) => {
            let u = 1.0 / d as f64;
            let kn = bits.len();
            let hit = input[..kn].iter().any(|&t| t > c && t < c + u);
            let near = input[..kn].iter().any(|&t| t > c - u && t < c + 2.0 * u);
            if hit {
                (0.0, CaseTag::IntervalHit)
            } else if !near {
                if y == 0 {
                    (state.b_hat, CaseTag::CleanZero)
                } else {
                    (0.0, CaseTag::CleanOne)
                }
            } else if y == 1 {
                (0.0, CaseTag::NearIntervalOne)
            } else {
                let branch = state
                    .branch
                    .as_ref()
                    .expect("theorem1 oracle has a branch network");
                (
                    branch.forward_eval_prefix(&input)?.output(),
                    CaseTag::NearIntervalZero,
                )
            }
        }
    };
    Ok(LabeledExample {
        input,
        padded_dim: d,
        label,
        case_tag,
    })
}

pub fn gen_example_depth2<R: rand::Rng + ?Sized>(
    state: &mut OracleState<'_>,
    rng: &mut R,
) -> Result<LabeledExample> {
    if state.mode != OracleMode::Theorem2 {
        return Err(invalid("depth-2 examples need a theorem2 oracle"));
    }
    let n = state.n;
    let d = n * n;
    let p0 = 1.0 / n as f64;
    let (bits, y) = state.draw_bits(rng)?;
    let mut input: Vec<f64> = bits.iter().map(|&b| b as f64).collect();
    if state.padding == PaddingMode::Dense {
        input.extend((input.len()..d).map(|_| if rng.random::<f64>() >= p0 { 1.0 } else { 0.0 }));
    }
    if state.omega > 0.0 {
        for v in input.iter_mut() {
            *v += state.omega * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let (label, case_tag) = match y {
        None => (0.0, CaseTag::NonEncoding),
        Some(0) => (state.b_hat, CaseTag::CleanZero),
        Some(_) => (0.0, CaseTag::CleanOne),
    };
    Ok(LabeledExample {
        input,
        padded_dim: d,
        label,
        case_tag,
    })
}

/// Probability that `kn` Bernoulli bits (zero with probability 1/n) encode a hyperedge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperedgeProb {
    pub closed_form: f64,
    /// `1 / ln n`.
    pub lower_bound: f64,
    pub regime_ok: bool,
}

/// `n(n−1)…(n−k+1) · n^{−k} · ((n−1)/n)^{nk−k}`.
pub fn estimate_hyperedge_prob(n: usize, k: usize) -> Result<HyperedgeProb> {
    if k == 0 || k > n {
        return Err(invalid(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    let nf = n as f64;
    let falling: f64 = (0..k).map(|i| (n - i) as f64 / nf).product();
    let closed_form = falling * ((nf - 1.0) / nf).powi((n * k - k) as i32);
    let lower_bound = 1.0 / nf.ln();
    Ok(HyperedgeProb {
        closed_form,
        lower_bound,
        regime_ok: closed_form >= lower_bound,
    })
}

/// Exact probability that a depth-3 oracle input lands in the good set: its
/// threshold pattern encodes a hyperedge and no coordinate lies within
/// `(c − 1/n², c + 2/n²)`.
pub fn prob_good_input(n: usize, k: usize) -> Result<f64> {
    let base = estimate_hyperedge_prob(n, k)?.closed_form;
    let c = threshold_c(n);
    let u = 1.0 / (n * n) as f64;
    let zero_clear = normal_cdf(c - u) / normal_cdf(c);
    let one_clear = normal_sf(c + 2.0 * u) / normal_sf(c);
    Ok(base * zero_clear.powi(k as i32) * one_clear.powi((k * n - k) as i32))
}

/// `1 / (2 ln n)`.
pub fn good_input_lower_bound(n: usize) -> f64 {
    1.0 / (2.0 * (n as f64).ln())
}

/// Depth-3 oracle inputs restricted to the first `kn` coordinates, without a
/// challenge: encodings are kept as drawn. Returns the inputs and whether each
/// threshold pattern was an encoding.
pub fn sample_structured_inputs<R: rand::Rng + ?Sized>(
    n: usize,
    k: usize,
    count: usize,
    rng: &mut R,
) -> Vec<(Vec<f64>, bool)> {
    let c = threshold_c(n);
    let p0 = 1.0 / n as f64;
    (0..count)
        .map(|_| {
            let bits: Vec<u8> = (0..k * n)
                .map(|_| u8::from(rng.random::<f64>() >= p0))
                .collect();
            let enc = decode_bits(&bits, n, k).is_some();
            (
                bits.iter()
                    .map(|&b| sample_conditional_gaussian(b, c, rng))
                    .collect(),
                enc,
            )
        })
        .collect()
}

/// Whether a `kn`-prefix lies in the good set.
pub fn is_good_input(prefix: &[f64], n: usize, k: usize) -> bool {
    let c = threshold_c(n);
    let u = 1.0 / (n * n) as f64;
    let bits = BitVector::from_bools(prefix.iter().map(|&t| t >= c)).to_bits();
    decode_bits(&bits, n, k).is_some() && prefix.iter().all(|&t| !(t > c - u && t < c + 2.0 * u))
}
