//! Hypergraphs, the slice encoding of a hyperedge, and the threshold map Ψ.
//!
//! Vertex indices are 0-based everywhere. A hyperedge `S = (i_0, …, i_{k-1})`
//! over `n` vertices is encoded as `k` slices of `n` bits; slice `j` is all ones
//! except a single zero at position `i_j`, so the flat index of that zero is
//! `j·n + i_j`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

/// Packed bit vector, serialized as an ASCII string of '0'/'1'.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVector {
    len: usize,
    bytes: Vec<u8>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            bytes: vec![0; len.div_ceil(8)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = Self::zeros(len);
        for i in 0..len {
            v.set(i, 1);
        }
        v
    }

    /// Builds from a slice of 0/1 values.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b > 1 {
                return Err(invalid(format!("bit {i} has value {b}")));
            }
            v.set(i, b);
        }
        Ok(v)
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        let bits: Vec<u8> = bits.into_iter().map(u8::from).collect();
        Self::from_bits(&bits).expect("bools are bits")
    }

    /// Parses '0'/'1' characters; '|' and whitespace are ignored.
    pub fn parse(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for ch in s.chars() {
            match ch {
                '0' => bits.push(0),
                '1' => bits.push(1),
                '|' | ' ' | '_' => {}
                other => {
                    return Err(invalid(format!(
                        "unexpected character {other:?} in bit string"
                    )))
                }
            }
        }
        Self::from_bits(&bits)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> u8 {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.bytes[i / 8] >> (i % 8)) & 1
    }

    pub fn set(&mut self, i: usize, bit: u8) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u8 << (i % 8);
        if bit & 1 == 1 {
            self.bytes[i / 8] |= mask;
        } else {
            self.bytes[i / 8] &= !mask;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn to_bits(&self) -> Vec<u8> {
        self.iter().collect()
    }

    pub fn count_ones(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Human-readable dump with a '|' between slices of `slice_len` bits.
    pub fn to_sliced_string(&self, slice_len: usize) -> String {
        let mut s = String::with_capacity(self.len + self.len / slice_len.max(1));
        for i in 0..self.len {
            if i > 0 && slice_len > 0 && i % slice_len == 0 {
                s.push('|');
            }
            s.push(if self.get(i) == 1 { '1' } else { '0' });
        }
        s
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

impl Serialize for BitVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        BitVector::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Ordered tuple of distinct vertices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Hyperedge {
    members: Vec<usize>,
}

impl Hyperedge {
    pub fn new(members: Vec<usize>, n: usize) -> Result<Self> {
        for (a, &v) in members.iter().enumerate() {
            if v >= n {
                return Err(invalid(format!("vertex {v} out of range for n = {n}")));
            }
            if members[..a].contains(&v) {
                return Err(invalid(format!("vertex {v} repeated in hyperedge")));
            }
        }
        if members.is_empty() {
            return Err(invalid("hyperedge must have at least one vertex"));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }
}

/// `m` hyperedges of arity `k` over `n` vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hypergraph {
    n: usize,
    k: usize,
    edges: Vec<Hyperedge>,
}

impl Hypergraph {
    pub fn new(n: usize, k: usize, edges: Vec<Hyperedge>) -> Result<Self> {
        for e in &edges {
            if e.k() != k {
                return Err(invalid(format!(
                    "edge arity {} differs from k = {k}",
                    e.k()
                )));
            }
            if let Some(&v) = e.members().iter().find(|&&v| v >= n) {
                return Err(invalid(format!("vertex {v} out of range for n = {n}")));
            }
        }
        Ok(Self { n, k, edges })
    }

    /// Rebuilds from the JSON array-of-arrays form.
    pub fn from_edge_lists(n: usize, k: usize, lists: Vec<Vec<usize>>) -> Result<Self> {
        let edges = lists
            .into_iter()
            .map(|m| Hyperedge::new(m, n))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, k, edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Hyperedge] {
        &self.edges
    }

    pub fn edge(&self, i: usize) -> &Hyperedge {
        &self.edges[i]
    }

    pub fn edge_lists(&self) -> Vec<Vec<usize>> {
        self.edges.iter().map(|e| e.members.clone()).collect()
    }
}

impl Serialize for Hypergraph {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.edges.serialize(s)
    }
}

/// Draws `m` independent, uniformly random ordered k-tuples of distinct vertices.
pub fn sample_hypergraph<R: rand::Rng + ?Sized>(
    n: usize,
    m: usize,
    k: usize,
    rng: &mut R,
) -> Result<Hypergraph> {
    if k == 0 || k > n {
        return Err(invalid(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    if m == 0 {
        return Err(invalid("need m >= 1"));
    }
    let mut scratch: Vec<usize> = Vec::new();
    let edges = (0..m)
        .map(|_| Hyperedge {
            members: sample_distinct(n, k, rng, &mut scratch),
        })
        .collect();
    Ok(Hypergraph { n, k, edges })
}

fn sample_distinct<R: rand::Rng + ?Sized>(
    n: usize,
    k: usize,
    rng: &mut R,
    scratch: &mut Vec<usize>,
) -> Vec<usize> {
    if 2 * k <= n {
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            let v = rng.random_range(0..n);
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    } else {
        scratch.clear();
        scratch.extend(0..n);
        for i in 0..k {
            let j = rng.random_range(i..n);
            scratch.swap(i, j);
        }
        scratch[..k].to_vec()
    }
}

pub fn encode_hyperedge(s: &Hyperedge, n: usize) -> BitVector {
    let k = s.k();
    let mut z = BitVector::ones(k * n);
    for (j, &i) in s.members().iter().enumerate() {
        z.set(j * n + i, 0);
    }
    z
}

/// Writes the encoding of `s` into a 0/1 byte buffer of length `k·n`.
pub fn encode_into(s: &Hyperedge, n: usize, out: &mut [u8]) {
    out.fill(1);
    for (j, &i) in s.members().iter().enumerate() {
        out[j * n + i] = 0;
    }
}

/// Decodes a slice encoding; `Ok(None)` when `z` is not an encoding.
pub fn decode_encoding(z: &BitVector, n: usize, k: usize) -> Result<Option<Hyperedge>> {
    if z.len() != k * n {
        return Err(Error::DimensionMismatch {
            expected: k * n,
            actual: z.len(),
        });
    }
    Ok(decode_bits(&z.to_bits(), n, k))
}

/// Byte-slice form of [`decode_encoding`] used on hot paths. `bits.len()` must be `k·n`.
pub fn decode_bits(bits: &[u8], n: usize, k: usize) -> Option<Hyperedge> {
    debug_assert_eq!(bits.len(), k * n);
    let mut members = Vec::with_capacity(k);
    for j in 0..k {
        let slice = &bits[j * n..(j + 1) * n];
        let mut zero = None;
        for (l, &b) in slice.iter().enumerate() {
            if b == 0 {
                if zero.is_some() {
                    return None;
                }
                zero = Some(l);
            }
        }
        let l = zero?;
        if members.contains(&l) {
            return None;
        }
        members.push(l);
    }
    Some(Hyperedge { members })
}

/// Ψ(z')_i = 1 iff z'_i ≥ c.
pub fn psi_threshold_map(z: &[f64], c: f64) -> BitVector {
    BitVector::from_bools(z.iter().map(|&t| t >= c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;
    use proptest::prelude::*;

    fn edge(m: &[usize], n: usize) -> Hyperedge {
        Hyperedge::new(m.to_vec(), n).unwrap()
    }

    #[test]
    fn encode_examples() {
        assert_eq!(encode_hyperedge(&edge(&[1, 2], 3), 3).to_string(), "101110");
        assert_eq!(encode_hyperedge(&edge(&[0], 2), 2).to_string(), "01");
        assert_eq!(
            encode_hyperedge(&edge(&[1, 2], 3), 3).to_sliced_string(3),
            "101|110"
        );
    }

    #[test]
    fn decode_examples() {
        let z = BitVector::parse("101|110").unwrap();
        assert_eq!(decode_encoding(&z, 3, 2).unwrap(), Some(edge(&[1, 2], 3)));
        let no_zero = BitVector::parse("111|110").unwrap();
        assert_eq!(decode_encoding(&no_zero, 3, 2).unwrap(), None);
        let dup = BitVector::parse("011|011").unwrap();
        assert_eq!(decode_encoding(&dup, 3, 2).unwrap(), None);
        let two_zeros = BitVector::parse("001|110").unwrap();
        assert_eq!(decode_encoding(&two_zeros, 3, 2).unwrap(), None);
        assert!(matches!(
            decode_encoding(&z, 3, 3),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn round_trip_exhaustive_small() {
        for n in 1..=8 {
            for k in 1..=3.min(n) {
                let mut count = 0;
                for_each_edge(n, k, &mut |m| {
                    let s = edge(m, n);
                    assert_eq!(
                        decode_encoding(&encode_hyperedge(&s, n), n, k).unwrap(),
                        Some(s)
                    );
                    count += 1;
                });
                let expect: usize = (0..k).map(|i| n - i).product();
                assert_eq!(count, expect);
            }
        }
    }

    fn for_each_edge(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
        fn rec(n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
            if cur.len() == k {
                f(cur);
                return;
            }
            for v in 0..n {
                if !cur.contains(&v) {
                    cur.push(v);
                    rec(n, k, cur, f);
                    cur.pop();
                }
            }
        }
        rec(n, k, &mut Vec::new(), f);
    }

    #[test]
    fn decode_accepts_exactly_the_encodings() {
        let (n, k) = (3, 2);
        let mut ok = 0;
        for mask in 0u32..64 {
            let bits: Vec<u8> = (0..6).map(|i| ((mask >> i) & 1) as u8).collect();
            if decode_bits(&bits, n, k).is_some() {
                ok += 1;
            }
        }
        assert_eq!(ok, 6);
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi_threshold_map(&[-3.0, 0.5], -2.326).to_string(), "01");
        let c = -2.326;
        assert_eq!(psi_threshold_map(&[c, c], c).to_string(), "11");
    }

    #[test]
    fn sampling_edge_cases() {
        let mut rng = SeedStream::new(1).rng("hg", 0);
        let g = sample_hypergraph(1, 2, 1, &mut rng).unwrap();
        assert!(g.edges().iter().all(|e| e.members() == [0]));
        let g = sample_hypergraph(3, 10_000, 3, &mut rng).unwrap();
        for e in g.edges() {
            let mut m = e.members().to_vec();
            m.sort();
            assert_eq!(m, vec![0, 1, 2]);
        }
        assert!(sample_hypergraph(3, 1, 4, &mut rng).is_err());
        assert!(sample_hypergraph(3, 0, 2, &mut rng).is_err());
    }

    #[test]
    fn ordered_pairs_are_uniform() {
        let mut rng = SeedStream::new(2).rng("hg", 0);
        let (n, m) = (5, 100_000);
        let g = sample_hypergraph(n, m, 2, &mut rng).unwrap();
        let mut counts = vec![0usize; n * n];
        for e in g.edges() {
            counts[e.members()[0] * n + e.members()[1]] += 1;
        }
        let p = 1.0 / 20.0;
        let sigma = crate::stats::binomial_sigma(p, m);
        for a in 0..n {
            for b in 0..n {
                let f = counts[a * n + b] as f64 / m as f64;
                if a == b {
                    assert_eq!(counts[a * n + b], 0);
                } else {
                    assert!((f - p).abs() <= 4.0 * sigma, "pair ({a},{b}) freq {f}");
                }
            }
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let s = SeedStream::new(99);
        let a = sample_hypergraph(20, 50, 4, &mut s.rng("hg", 0)).unwrap();
        let b = sample_hypergraph(20, 50, 4, &mut s.rng("hg", 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn serialization_forms() {
        let g = Hypergraph::from_edge_lists(4, 2, vec![vec![0, 3], vec![2, 1]]).unwrap();
        assert_eq!(serde_json::to_string(&g).unwrap(), "[[0,3],[2,1]]");
        let z = BitVector::parse("0110").unwrap();
        let js = serde_json::to_string(&z).unwrap();
        assert_eq!(js, "\"0110\"");
        assert_eq!(serde_json::from_str::<BitVector>(&js).unwrap(), z);
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(n in 2usize..40, seed in any::<u64>(), k in 1usize..6) {
            prop_assume!(k <= n);
            let mut rng = SeedStream::new(seed).rng("prop", 0);
            let g = sample_hypergraph(n, 1, k, &mut rng).unwrap();
            let s = g.edge(0).clone();
            let z = encode_hyperedge(&s, n);
            prop_assert_eq!(z.count_ones(), k * n - k);
            prop_assert_eq!(decode_encoding(&z, n, k).unwrap(), Some(s));
        }

        #[test]
        fn flipping_a_one_breaks_the_encoding(n in 2usize..20, seed in any::<u64>(), k in 1usize..4, pos in any::<usize>()) {
            prop_assume!(k <= n);
            let mut rng = SeedStream::new(seed).rng("prop", 1);
            let s = sample_hypergraph(n, 1, k, &mut rng).unwrap().edge(0).clone();
            let mut z = encode_hyperedge(&s, n);
            let ones: Vec<usize> = (0..k * n).filter(|&i| z.get(i) == 1).collect();
            let i = ones[pos % ones.len()];
            z.set(i, 0);
            prop_assert_eq!(decode_encoding(&z, n, k).unwrap(), None);
        }

        #[test]
        fn bitvector_string_round_trip(bits in proptest::collection::vec(0u8..2, 0..200)) {
            let v = BitVector::from_bits(&bits).unwrap();
            prop_assert_eq!(v.to_bits(), bits.clone());
            prop_assert_eq!(BitVector::parse(&v.to_string()).unwrap(), v);
        }
    }
}
