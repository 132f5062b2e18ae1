//! Injective index sequences, their prefixes and overlap profiles.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of an injective sequence `n -> a_n` of naturals, `n >= 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "SequenceKindRepr")]
pub enum SequenceKind {
    /// `a_n = n`.
    Identity,
    /// `a_n = stride * n + offset`.
    Arithmetic { stride: u64, offset: u64 },
    /// `a_n = n + L` for `n <= L`, `n - L` for `L < n <= 2L`, `n` beyond.
    BlockSwap,
    /// The listed values, then the unused naturals in increasing order.
    Explicit { values: Vec<u64> },
}

// Flat form used for parsing, so stray keys are rejected on every kind,
// unit kinds included.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceKindRepr {
    kind: String,
    stride: Option<u64>,
    offset: Option<u64>,
    values: Option<Vec<u64>>,
}

impl TryFrom<SequenceKindRepr> for SequenceKind {
    type Error = String;

    fn try_from(r: SequenceKindRepr) -> std::result::Result<Self, String> {
        let only = |allowed: &[&str]| -> std::result::Result<(), String> {
            let present = [("stride", r.stride.is_some()), ("offset", r.offset.is_some()), ("values", r.values.is_some())];
            match present.iter().find(|(name, set)| *set && !allowed.contains(name)) {
                Some((name, _)) => Err(format!("field `{name}` is not valid for sequence kind `{}`", r.kind)),
                None => Ok(()),
            }
        };
        match r.kind.as_str() {
            "identity" => only(&[]).map(|_| SequenceKind::Identity),
            "block_swap" => only(&[]).map(|_| SequenceKind::BlockSwap),
            "arithmetic" => {
                only(&["stride", "offset"])?;
                let stride = r.stride.ok_or("arithmetic sequence needs `stride`")?;
                Ok(SequenceKind::Arithmetic { stride, offset: r.offset.unwrap_or(0) })
            }
            "explicit" => {
                only(&["values"])?;
                Ok(SequenceKind::Explicit { values: r.values.ok_or("explicit sequence needs `values`")? })
            }
            other => Err(format!("unknown sequence kind `{other}`")),
        }
    }
}

impl SequenceKind {
    fn name(&self) -> &'static str {
        match self {
            SequenceKind::Identity => "identity",
            SequenceKind::Arithmetic { .. } => "arithmetic",
            SequenceKind::BlockSwap => "block_swap",
            SequenceKind::Explicit { .. } => "explicit",
        }
    }
}

/// A sequence bound to the ambient scale `L`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSequence {
    kind: SequenceKind,
    scale: u64,
    // sorted copy of explicit values, for locating the continuation
    sorted: Vec<u64>,
}

impl IndexSequence {
    pub fn new(kind: SequenceKind, scale: u64) -> Result<Self> {
        let mut sorted = Vec::new();
        match &kind {
            SequenceKind::Arithmetic { stride, .. } if *stride == 0 => {
                return Err(Error::ParameterDomain("arithmetic stride must be >= 1".into()));
            }
            SequenceKind::Explicit { values } => {
                let mut seen = std::collections::HashMap::with_capacity(values.len());
                for (pos, &v) in values.iter().enumerate() {
                    if v == 0 {
                        return Err(Error::ParameterDomain("explicit sequence values must be >= 1".into()));
                    }
                    if let Some(first) = seen.insert(v, pos) {
                        return Err(Error::NotInjective { value: v, first: first + 1, second: pos + 1 });
                    }
                }
                sorted = values.clone();
                sorted.sort_unstable();
            }
            _ => {}
        }
        Ok(Self { kind, scale, sorted })
    }

    pub fn identity() -> Self {
        Self { kind: SequenceKind::Identity, scale: 1, sorted: Vec::new() }
    }

    pub fn arithmetic(stride: u64, offset: u64) -> Result<Self> {
        Self::new(SequenceKind::Arithmetic { stride, offset }, 1)
    }

    pub fn block_swap(scale: u64) -> Self {
        Self { kind: SequenceKind::BlockSwap, scale, sorted: Vec::new() }
    }

    pub fn kind(&self) -> &SequenceKind {
        &self.kind
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    /// The same sequence shape at another ambient scale.
    pub fn at_scale(&self, scale: u64) -> Self {
        Self { scale, ..self.clone() }
    }

    /// `a_n` for `n >= 1`.
    pub fn term(&self, n: u64) -> u64 {
        debug_assert!(n >= 1);
        match &self.kind {
            SequenceKind::Identity => n,
            SequenceKind::Arithmetic { stride, offset } => stride * n + offset,
            SequenceKind::BlockSwap => {
                let l = self.scale;
                if n <= l {
                    n + l
                } else if n <= 2 * l {
                    n - l
                } else {
                    n
                }
            }
            SequenceKind::Explicit { values } => {
                let len = values.len() as u64;
                if n <= len {
                    values[(n - 1) as usize]
                } else {
                    self.nth_unlisted(n - len)
                }
            }
        }
    }

    // smallest v with v - #{listed <= v} == k and v unlisted
    fn nth_unlisted(&self, k: u64) -> u64 {
        let mut v = k;
        loop {
            let listed = self.sorted.partition_point(|&x| x <= v) as u64;
            if k + listed == v {
                return v;
            }
            v = k + listed;
        }
    }

    /// `{a_1, ..., a_m}` in sequence order.
    pub fn prefix(&self, m: u64) -> Vec<u64> {
        match &self.kind {
            SequenceKind::Explicit { values } => {
                let mut out: Vec<u64> = values.iter().copied().take(m as usize).collect();
                let mut listed = self.sorted.iter().peekable();
                let mut v = 0u64;
                while (out.len() as u64) < m {
                    v += 1;
                    while listed.peek().is_some_and(|&&x| x < v) {
                        listed.next();
                    }
                    if listed.peek() == Some(&&v) {
                        continue;
                    }
                    out.push(v);
                }
                out
            }
            _ => (1..=m).map(|n| self.term(n)).collect(),
        }
    }

    /// Limiting shape of the scaled prefix `A_{[xL]} / L`, when it has a
    /// closed form: a residue class mod `modulus` restricted to a union of
    /// intervals. Explicit sequences have none registered.
    pub fn limit_set(&self, x: f64) -> Option<LimitSet> {
        let (modulus, residue, intervals) = match &self.kind {
            SequenceKind::Identity => (1, 0, vec![(0.0, x)]),
            SequenceKind::Arithmetic { stride, offset } => (*stride, offset % stride, vec![(0.0, *stride as f64 * x)]),
            SequenceKind::BlockSwap => {
                let iv = if x <= 1.0 {
                    vec![(1.0, 1.0 + x)]
                } else if x <= 2.0 {
                    vec![(0.0, x - 1.0), (1.0, 2.0)]
                } else {
                    vec![(0.0, x)]
                };
                (1, 0, iv)
            }
            SequenceKind::Explicit { .. } => return None,
        };
        Some(LimitSet { modulus, residue, intervals })
    }
}

/// Residue class `residue mod modulus` restricted to a union of intervals
/// of the scaled half-line. Its measure is the interval length over the modulus.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitSet {
    pub modulus: u64,
    pub residue: u64,
    pub intervals: Vec<(f64, f64)>,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl LimitSet {
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum::<f64>() / self.modulus as f64
    }

    /// Measure of the intersection of two limit sets.
    pub fn overlap(&self, other: &LimitSet) -> f64 {
        let g = gcd(self.modulus, other.modulus);
        if self.residue % g != other.residue % g {
            return 0.0;
        }
        let lcm = self.modulus / g * other.modulus;
        let mut len = 0.0;
        for &(a1, b1) in &self.intervals {
            for &(a2, b2) in &other.intervals {
                len += (b1.min(b2) - a1.max(a2)).max(0.0);
            }
        }
        len / lcm as f64
    }
}

/// `|prefix(a, ma) ∩ prefix(b, mb)|`.
pub fn overlap_count(a: &IndexSequence, ma: u64, b: &IndexSequence, mb: u64) -> u64 {
    let (small, big) = if ma <= mb { ((a, ma), (b, mb)) } else { ((b, mb), (a, ma)) };
    let set: HashSet<u64> = small.0.prefix(small.1).into_iter().collect();
    big.0.prefix(big.1).into_iter().filter(|v| set.contains(v)).count() as u64
}

/// Exact finite-`L` overlap ratio `count / L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OverlapRatio {
    pub count: u64,
    pub scale: u64,
}

impl OverlapRatio {
    pub fn value(&self) -> f64 {
        self.count as f64 / self.scale as f64
    }
}

/// `[x L]`.
pub fn scaled_length(x: f64, scale: u64) -> u64 {
    (x * scale as f64).floor().max(0.0) as u64
}

/// Finite-`L` estimates `|A_{[xL]} ∩ B_{[yL]}| / L` over an increasing grid
/// of scales. Each sequence is rebound to the grid scale.
pub fn alpha_estimate(a: &IndexSequence, b: &IndexSequence, x: f64, y: f64, scales: &[u64]) -> Result<Vec<OverlapRatio>> {
    if scales.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::ParameterDomain("scale grid must be strictly increasing".into()));
    }
    if scales.first() == Some(&0) {
        return Err(Error::ParameterDomain("scales must be >= 1".into()));
    }
    Ok(scales
        .iter()
        .map(|&l| {
            let (al, bl) = (a.at_scale(l), b.at_scale(l));
            let count = overlap_count(&al, scaled_length(x, l), &bl, scaled_length(y, l));
            OverlapRatio { count, scale: l }
        })
        .collect())
}

/// A finite labelled family of sequences sharing one ambient scale.
#[derive(Clone, Debug, PartialEq)]
pub struct GoodFamily {
    scale: u64,
    labels: Vec<String>,
    sequences: Vec<IndexSequence>,
}

impl GoodFamily {
    pub fn new<S: Into<String>>(scale: u64, members: Vec<(S, SequenceKind)>) -> Result<Self> {
        if scale == 0 {
            return Err(Error::ParameterDomain("scale L must be >= 1".into()));
        }
        let mut labels = Vec::with_capacity(members.len());
        let mut sequences = Vec::with_capacity(members.len());
        for (label, kind) in members {
            let label = label.into();
            if labels.contains(&label) {
                return Err(Error::Config(format!("duplicate sequence label `{label}`")));
            }
            labels.push(label);
            sequences.push(IndexSequence::new(kind, scale)?);
        }
        Ok(Self { scale, labels, sequences })
    }

    /// Identity, even numbers, odd numbers from 3, and the block swap.
    pub fn four_sequence_example(scale: u64) -> Self {
        Self::new(
            scale,
            vec![
                ("a1", SequenceKind::Identity),
                ("a2", SequenceKind::Arithmetic { stride: 2, offset: 0 }),
                ("a3", SequenceKind::Arithmetic { stride: 2, offset: 1 }),
                ("a4", SequenceKind::BlockSwap),
            ],
        )
        .expect("built-in family is valid")
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn sequence(&self, i: usize) -> &IndexSequence {
        &self.sequences[i]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownSequence(label.to_string()))
    }

    pub fn by_label(&self, label: &str) -> Result<&IndexSequence> {
        Ok(&self.sequences[self.index_of(label)?])
    }

    /// Limiting overlap profile `alpha(i, x; j, y)`.
    pub fn alpha_limit(&self, i: usize, x: f64, j: usize, y: f64) -> Result<f64> {
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::ParameterDomain(format!("alpha needs x, y > 0, got ({x}, {y})")));
        }
        if i >= self.len() || j >= self.len() {
            return Err(Error::ParameterDomain(format!("sequence index out of range: ({i}, {j})")));
        }
        let (si, sj) = (&self.sequences[i], &self.sequences[j]);
        let no_form = || Error::NoClosedForm(si.kind.name().into(), sj.kind.name().into());
        let a = si.limit_set(x).ok_or_else(no_form)?;
        let b = sj.limit_set(y).ok_or_else(no_form)?;
        Ok(a.overlap(&b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ap(s: u64, o: u64) -> IndexSequence {
        IndexSequence::arithmetic(s, o).unwrap()
    }

    #[test]
    fn prefix_examples() {
        assert_eq!(IndexSequence::identity().prefix(4), vec![1, 2, 3, 4]);
        assert_eq!(ap(2, 0).prefix(3), vec![2, 4, 6]);
        assert_eq!(IndexSequence::block_swap(3).prefix(4), vec![4, 5, 6, 1]);
        assert_eq!(IndexSequence::block_swap(3).prefix(8), vec![4, 5, 6, 1, 2, 3, 7, 8]);
        assert!(IndexSequence::identity().prefix(0).is_empty());
    }

    #[test]
    fn explicit_continues_with_unused_naturals() {
        let s = IndexSequence::new(SequenceKind::Explicit { values: vec![5, 2, 9] }, 10).unwrap();
        let p = s.prefix(8);
        assert_eq!(p, vec![5, 2, 9, 1, 3, 4, 6, 7]);
        for (n, v) in p.iter().enumerate() {
            assert_eq!(s.term(n as u64 + 1), *v);
        }
        assert_eq!(s.term(9), 8);
        assert_eq!(s.term(10), 10);
    }

    #[test]
    fn explicit_injectivity_rejected() {
        let e = IndexSequence::new(SequenceKind::Explicit { values: vec![3, 1, 3] }, 1).unwrap_err();
        assert!(matches!(e, Error::NotInjective { value: 3, first: 1, second: 3 }));
        assert!(IndexSequence::new(SequenceKind::Explicit { values: vec![0] }, 1).is_err());
        assert!(IndexSequence::arithmetic(0, 1).is_err());
    }

    #[test]
    fn overlap_count_examples() {
        let id = IndexSequence::identity();
        assert_eq!(overlap_count(&id, 10, &id, 7), 7);
        assert_eq!(overlap_count(&id, 10, &ap(2, 0), 10), 5);
        assert_eq!(overlap_count(&ap(2, 0), 5, &ap(2, 1), 5), 0);
    }

    #[test]
    fn alpha_limit_examples() {
        let fam = GoodFamily::four_sequence_example(100);
        for (x, y) in [(0.3, 0.7), (1.5, 0.2), (2.0, 2.0)] {
            assert_eq!(fam.alpha_limit(0, x, 0, y).unwrap(), x.min(y));
            assert_eq!(fam.alpha_limit(0, x, 1, y).unwrap(), (x / 2.0).min(y));
            assert_eq!(fam.alpha_limit(1, x, 2, y).unwrap(), 0.0);
        }
        assert_eq!(fam.alpha_limit(0, 0.5, 3, 0.5).unwrap(), 0.0);
        assert!(fam.alpha_limit(0, 0.0, 1, 1.0).is_err());
        let with_explicit =
            GoodFamily::new(10, vec![("e", SequenceKind::Explicit { values: vec![1] }), ("i", SequenceKind::Identity)]).unwrap();
        assert!(matches!(with_explicit.alpha_limit(0, 1.0, 1, 1.0), Err(Error::NoClosedForm(..))));
    }

    #[test]
    fn alpha_estimate_examples() {
        let id = IndexSequence::identity();
        for r in alpha_estimate(&id, &id, 1.0, 0.5, &[10, 100, 1000]).unwrap() {
            assert_eq!(r.value(), 0.5);
        }
        let r = alpha_estimate(&id, &ap(2, 0), 1.0, 1.0, &[1000]).unwrap();
        assert_eq!((r[0].count, r[0].value()), (500, 0.5));
        let r = alpha_estimate(&id, &IndexSequence::block_swap(1), 0.5, 0.5, &[1000]).unwrap();
        assert_eq!(r[0].count, 0);
        assert!(alpha_estimate(&id, &id, 1.0, 1.0, &[10, 10]).is_err());
    }

    #[test]
    fn family_labels() {
        let fam = GoodFamily::four_sequence_example(5);
        assert_eq!(fam.index_of("a4").unwrap(), 3);
        assert!(matches!(fam.index_of("zz"), Err(Error::UnknownSequence(_))));
        assert!(GoodFamily::new(5, vec![("a", SequenceKind::Identity), ("a", SequenceKind::BlockSwap)]).is_err());
        assert_eq!(fam.by_label("a4").unwrap().prefix(2), vec![6, 7]);
    }

    #[test]
    fn limit_set_measure_is_x() {
        let fam = GoodFamily::four_sequence_example(1);
        for i in 0..4 {
            for x in [0.25, 0.5, 1.0, 1.5, 2.0, 3.0] {
                let m = fam.sequence(i).limit_set(x).unwrap().measure();
                assert!((m - x).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn sequence_kind_json() {
        let k: SequenceKind = serde_json::from_str(r#"{"kind":"arithmetic","stride":2,"offset":1}"#).unwrap();
        assert_eq!(k, SequenceKind::Arithmetic { stride: 2, offset: 1 });
        let k: SequenceKind = serde_json::from_str(r#"{"kind":"block_swap"}"#).unwrap();
        assert_eq!(k, SequenceKind::BlockSwap);
        assert!(serde_json::from_str::<SequenceKind>(r#"{"kind":"identity","stride":2}"#).is_err());
    }
}
