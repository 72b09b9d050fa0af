//! Quantum generative model from dyadic probability tables.
//!
//! A row whose probabilities are all multiples of `2^{-m}` is realized by a
//! deterministic map `C(s,a,·): {0,1}^m → S` that sends exactly
//! `2^m·p(s'|s,a)` bit strings to each successor. Running `C` on a uniform
//! superposition over `x` leaves amplitude `√(k_{s'}/2^m)` on `|s'⟩`,
//! entangled with a garbage register holding the matching `x` values. Only the
//! successor-register amplitudes are kept; the garbage register is abstract.

use std::path::Path;

use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::mdp::{Mdp, MdpFile};

/// Default bits of precision when quantizing a non-dyadic MDP.
pub const DEFAULT_QUANTIZATION_BITS: u32 = 20;

const MAX_BITS: u32 = 62;

pub type Dyadic = Ratio<u128>;

fn check_bits(m: u32) -> Result<()> {
    if m > MAX_BITS {
        Err(Error::param("m", format!("{m} exceeds the supported maximum {MAX_BITS}")))
    } else {
        Ok(())
    }
}

/// Probability row `k_{s'}/2^m` with `Σ k_{s'} = 2^m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicMdpRow {
    pub denominator_bits: u32,
    pub counts: Vec<u64>,
}

impl DyadicMdpRow {
    pub fn new(denominator_bits: u32, counts: Vec<u64>) -> Result<Self> {
        check_bits(denominator_bits)?;
        let total: u128 = counts.iter().map(|&k| k as u128).sum();
        if total != 1u128 << denominator_bits {
            return Err(Error::param(
                "counts",
                format!("sum to {total}, expected 2^{denominator_bits}"),
            ));
        }
        Ok(DyadicMdpRow {
            denominator_bits,
            counts,
        })
    }

    pub fn size(&self) -> u64 {
        1u64 << self.denominator_bits
    }

    pub fn probability(&self, next: usize) -> Dyadic {
        Ratio::new(self.counts[next] as u128, 1u128 << self.denominator_bits)
    }

    pub fn probabilities_f64(&self) -> Vec<f64> {
        let size = self.size() as f64;
        self.counts.iter().map(|&k| k as f64 / size).collect()
    }

    /// Exact dyadic form of `probabilities` at `m` bits, if there is one.
    pub fn exact(probabilities: &[f64], m: u32) -> Result<Self> {
        check_bits(m)?;
        let size = (1u64 << m) as f64;
        let counts = probabilities
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let scaled = p * size;
                if scaled.fract() != 0.0 || scaled < 0.0 {
                    Err(Error::param(
                        "probabilities",
                        format!("entry {i} = {p} is not a multiple of 2^-{m}; quantize the row first"),
                    ))
                } else {
                    Ok(scaled as u64)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        DyadicMdpRow::new(m, counts)
    }
}

/// Largest-remainder rounding of `probabilities` to multiples of `2^{-m}`.
///
/// Ties in the remainder go to the lower index.
pub fn quantize_row(probabilities: &[f64], m: u32) -> Result<DyadicMdpRow> {
    check_bits(m)?;
    if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::param("probabilities", "entries must lie in [0, 1]"));
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::param("probabilities", format!("sum to {total}, expected 1")));
    }
    let size = 1u64 << m;
    let nonzero = probabilities.iter().filter(|&&p| p > 0.0).count() as u64;
    if nonzero > size {
        return Err(Error::param(
            "m",
            format!("2^{m} slots cannot hold {nonzero} nonzero entries"),
        ));
    }
    let scaled: Vec<f64> = probabilities.iter().map(|&p| p * size as f64).collect();
    let mut counts: Vec<u64> = scaled.iter().map(|x| x.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&i, &j| {
        let (ri, rj) = (scaled[i] - scaled[i].floor(), scaled[j] - scaled[j].floor());
        rj.partial_cmp(&ri).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j))
    });
    if assigned <= size {
        for &i in order.iter().take((size - assigned) as usize) {
            counts[i] += 1;
        }
    } else {
        // floor overshoot is only possible through float error on the total
        let donors: Vec<usize> = order.iter().rev().copied().filter(|&i| counts[i] > 0).collect();
        for &i in donors.iter().take((assigned - size) as usize) {
            counts[i] -= 1;
        }
    }
    DyadicMdpRow::new(m, counts)
}

/// The deterministic successor map `x ↦ C(s,a,x)` on `{0,1}^m`.
///
/// Successors own consecutive blocks of `x` values in increasing `s'` order;
/// block `s'` has exactly `k_{s'}` members.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReversibleMap {
    bits: u32,
    block_ends: Vec<u64>,
}

pub fn build_reversible_map(row: &DyadicMdpRow) -> Result<ReversibleMap> {
    let total: u128 = row.counts.iter().map(|&k| k as u128).sum();
    if total != row.size() as u128 {
        return Err(Error::param("counts", format!("sum to {total}, expected {}", row.size())));
    }
    let block_ends = row
        .counts
        .iter()
        .scan(0u64, |end, &k| {
            *end += k;
            Some(*end)
        })
        .collect();
    Ok(ReversibleMap {
        bits: row.denominator_bits,
        block_ends,
    })
}

impl ReversibleMap {
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// `C(s,a,x)` for `x < 2^m`.
    pub fn apply(&self, x: u64) -> Result<usize> {
        if x >= 1u64 << self.bits {
            return Err(Error::IndexOutOfRange {
                what: "x",
                index: x as usize,
                bound: 1usize << self.bits,
            });
        }
        Ok(self.block_ends.partition_point(|&end| end <= x))
    }

    /// `|{x : C(s,a,x) = s'}|`.
    pub fn preimage_count(&self, next: usize) -> u64 {
        let start = if next == 0 { 0 } else { self.block_ends[next - 1] };
        self.block_ends[next] - start
    }

    pub fn num_successors(&self) -> usize {
        self.block_ends.len()
    }
}

/// Amplitude `√(count/2^bits)` of one successor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicAmplitude {
    pub count: u64,
    pub bits: u32,
}

impl DyadicAmplitude {
    pub fn squared(&self) -> Dyadic {
        Ratio::new(self.count as u128, 1u128 << self.bits)
    }

    pub fn value(&self) -> f64 {
        (self.count as f64 / (1u64 << self.bits) as f64).sqrt()
    }
}

/// A tabular MDP whose every transition row is dyadic.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicMdp {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    pub rewards: Vec<f64>,
    /// Rows in `(s, a)` row-major order.
    pub rows: Vec<DyadicMdpRow>,
    /// `max |quantized − original|` over all entries (0 for exact conversions).
    pub max_quantization_error: f64,
}

impl DyadicMdp {
    /// Quantizes every row of `mdp` to `m` bits.
    pub fn quantize(mdp: &Mdp<f64>, m: u32) -> Result<Self> {
        Self::from_rows(mdp, m, |row| quantize_row(row, m))
    }

    /// Converts an MDP that is already dyadic at `m` bits, failing otherwise.
    pub fn exact(mdp: &Mdp<f64>, m: u32) -> Result<Self> {
        Self::from_rows(mdp, m, |row| DyadicMdpRow::exact(row, m))
    }

    fn from_rows(
        mdp: &Mdp<f64>,
        _m: u32,
        convert: impl Fn(&[f64]) -> Result<DyadicMdpRow>,
    ) -> Result<Self> {
        let mut rows = Vec::with_capacity(mdp.num_pairs());
        let mut worst = 0.0f64;
        for s in 0..mdp.num_states() {
            for a in 0..mdp.num_actions() {
                let original = mdp.row(s, a);
                let row = convert(original).map_err(|e| e.context(format!("p[{s}][{a}]")))?;
                for (q, p) in row.probabilities_f64().iter().zip(original) {
                    worst = worst.max((q - p).abs());
                }
                rows.push(row);
            }
        }
        Ok(DyadicMdp {
            num_states: mdp.num_states(),
            num_actions: mdp.num_actions(),
            gamma: mdp.discount(),
            rewards: mdp.rewards().to_vec(),
            rows,
            max_quantization_error: worst,
        })
    }

    pub fn row(&self, s: usize, a: usize) -> &DyadicMdpRow {
        &self.rows[s * self.num_actions + a]
    }

    /// The floating-point MDP with the dyadic probabilities.
    pub fn to_mdp(&self) -> Result<Mdp<f64>> {
        let transitions = self.rows.iter().flat_map(|r| r.probabilities_f64()).collect();
        Mdp::new(
            self.num_states,
            self.num_actions,
            transitions,
            self.rewards.clone(),
            self.gamma,
        )
    }

    pub fn to_file(&self) -> Result<DyadicMdpFile> {
        let bits = self.rows.first().map_or(0, |r| r.denominator_bits);
        let counts = (0..self.num_states)
            .map(|s| (0..self.num_actions).map(|a| self.row(s, a).counts.clone()).collect())
            .collect();
        Ok(DyadicMdpFile {
            mdp: MdpFile::from_mdp(&self.to_mdp()?),
            m: bits,
            counts,
            max_quantization_error: self.max_quantization_error,
        })
    }
}

/// Dyadic export: the MDP JSON plus `"m"` and the integer `"counts"` tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicMdpFile {
    #[serde(flatten)]
    pub mdp: MdpFile,
    pub m: u32,
    pub counts: Vec<Vec<Vec<u64>>>,
    pub max_quantization_error: f64,
}

impl DyadicMdpFile {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn to_dyadic(&self) -> Result<DyadicMdp> {
        let mdp: Mdp<f64> = self.mdp.to_mdp()?;
        let mut rows = Vec::with_capacity(mdp.num_pairs());
        check_len("counts", mdp.num_states(), self.counts.len())?;
        for (s, per_action) in self.counts.iter().enumerate() {
            check_len("counts row", mdp.num_actions(), per_action.len())?;
            for (a, counts) in per_action.iter().enumerate() {
                let row = DyadicMdpRow::new(self.m, counts.clone())
                    .map_err(|e| e.context(format!("counts[{s}][{a}]")))?;
                rows.push(row);
            }
        }
        Ok(DyadicMdp {
            num_states: mdp.num_states(),
            num_actions: mdp.num_actions(),
            gamma: mdp.discount(),
            rewards: mdp.rewards().to_vec(),
            rows,
            max_quantization_error: self.max_quantization_error,
        })
    }
}

/// Successor-register amplitudes of the quantum generative model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumGenerativeState {
    pub num_states: usize,
    pub num_actions: usize,
    /// `(s, a)` row-major; one amplitude per successor.
    pub amplitudes: Vec<Vec<DyadicAmplitude>>,
    /// Stand-in for the garbage register `|ψ_{s',s,a}⟩`, which is never read.
    pub garbage_register: String,
}

impl QuantumGenerativeState {
    pub fn amplitudes(&self, s: usize, a: usize) -> &[DyadicAmplitude] {
        &self.amplitudes[s * self.num_actions + a]
    }

    /// `Σ_{s'} amplitude²` for `(s, a)`, in exact arithmetic.
    pub fn norm_squared(&self, s: usize, a: usize) -> Dyadic {
        self.amplitudes(s, a)
            .iter()
            .fold(Dyadic::zero(), |acc, amp| acc + amp.squared())
    }

    pub fn is_normalized(&self) -> bool {
        (0..self.num_states)
            .all(|s| (0..self.num_actions).all(|a| self.norm_squared(s, a).is_one()))
    }
}

/// Amplitude table of `Q|s,a,0⟩` for every `(s, a)`, derived from the
/// preimage counts of each row's reversible map.
pub fn build_quantum_oracle(mdp: &DyadicMdp) -> Result<QuantumGenerativeState> {
    let amplitudes = mdp
        .rows
        .iter()
        .map(|row| {
            let map = build_reversible_map(row)?;
            Ok((0..map.num_successors())
                .map(|next| DyadicAmplitude {
                    count: map.preimage_count(next),
                    bits: map.bits(),
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantumGenerativeState {
        num_states: mdp.num_states,
        num_actions: mdp.num_actions,
        amplitudes,
        garbage_register: "psi(s',s,a): uniform over preimage of s'".to_owned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reversible_map_examples() {
        let map = build_reversible_map(&DyadicMdpRow::new(1, vec![1, 1]).unwrap()).unwrap();
        assert_eq!((map.apply(0).unwrap(), map.apply(1).unwrap()), (0, 1));

        let map = build_reversible_map(&DyadicMdpRow::new(2, vec![3, 1]).unwrap()).unwrap();
        let images: Vec<_> = (0..4).map(|x| map.apply(x).unwrap()).collect();
        assert_eq!(images, vec![0, 0, 0, 1]);
        assert_eq!((map.preimage_count(0), map.preimage_count(1)), (3, 1));

        let map = build_reversible_map(&DyadicMdpRow::new(0, vec![1]).unwrap()).unwrap();
        assert_eq!(map.apply(0).unwrap(), 0);
        assert!(map.apply(1).is_err());
    }

    #[test]
    fn rejects_bad_counts() {
        assert!(DyadicMdpRow::new(2, vec![3, 2]).is_err());
        let forged = DyadicMdpRow {
            denominator_bits: 2,
            counts: vec![1, 1],
        };
        assert!(build_reversible_map(&forged).is_err());
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_row(&[0.5, 0.5], 1).unwrap().counts, vec![1, 1]);
        assert_eq!(quantize_row(&[1.0 / 3.0, 2.0 / 3.0], 4).unwrap().counts, vec![5, 11]);
        for m in [0, 3, 20] {
            assert_eq!(quantize_row(&[1.0, 0.0], m).unwrap().counts, vec![1 << m, 0]);
        }
        assert!(quantize_row(&[0.25; 4], 1).is_err());
        assert!(quantize_row(&[0.5, 0.4], 4).is_err());
    }

    #[test]
    fn oracle_amplitude_examples() {
        let mdp = Mdp::from_nested(
            &[vec![vec![0.75, 0.25]], vec![vec![0.0, 1.0]]],
            &[vec![0.0], vec![0.0]],
            0.9,
        )
        .unwrap();
        let dyadic = DyadicMdp::exact(&mdp, 2).unwrap();
        let state = build_quantum_oracle(&dyadic).unwrap();
        let amps: Vec<f64> = state.amplitudes(0, 0).iter().map(|a| a.value()).collect();
        assert!((amps[0] - 0.75f64.sqrt()).abs() < 1e-15 && (amps[1] - 0.5).abs() < 1e-15);
        let point: Vec<f64> = state.amplitudes(1, 0).iter().map(|a| a.value()).collect();
        assert_eq!(point, vec![0.0, 1.0]);
        assert!(state.is_normalized());
        assert_eq!(state.amplitudes(0, 0)[0].squared(), Ratio::new(3, 4));
    }

    #[test]
    fn non_dyadic_rows_are_rejected() {
        let mdp = Mdp::from_nested(
            &[vec![vec![1.0 / 3.0, 2.0 / 3.0]], vec![vec![0.0, 1.0]]],
            &[vec![0.0], vec![0.0]],
            0.9,
        )
        .unwrap();
        let err = DyadicMdp::exact(&mdp, 10).unwrap_err();
        assert!(err.to_string().contains("p[0][0]"), "{err}");
        let quantized = DyadicMdp::quantize(&mdp, 10).unwrap();
        assert!(quantized.max_quantization_error > 0.0);
        assert!(quantized.max_quantization_error <= 2.0 / 1024.0);
    }

    #[test]
    fn export_roundtrip() {
        let mdp = Mdp::from_nested(
            &[vec![vec![0.3, 0.7]], vec![vec![0.0, 1.0]]],
            &[vec![1.0], vec![0.0]],
            0.9,
        )
        .unwrap();
        let dyadic = DyadicMdp::quantize(&mdp, 8).unwrap();
        let file = dyadic.to_file().unwrap();
        let json = serde_json::to_value(&file).unwrap();
        assert_eq!(json["m"], 8);
        assert_eq!(json["S"], 2);
        assert!(json["counts"][0][0].is_array());
        let back: DyadicMdpFile = serde_json::from_value(json).unwrap();
        assert_eq!(back.to_dyadic().unwrap(), dyadic);
    }

    fn random_row() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, 1..8).prop_filter_map("nonzero", |w| {
            let total: f64 = w.iter().sum();
            (total > 1e-6).then(|| {
                let mut p: Vec<f64> = w.iter().map(|x| x / total).collect();
                let head: f64 = p[..p.len() - 1].iter().sum();
                *p.last_mut().unwrap() = (1.0 - head).max(0.0);
                p
            })
        })
    }

    proptest! {
        #[test]
        fn quantization_distortion(p in random_row(), m in 4u32..20) {
            let q = quantize_row(&p, m).unwrap();
            let size = (1u64 << m) as f64;
            let err = q.counts.iter().zip(&p).map(|(&k, &x)| (k as f64 / size - x).abs()).fold(0.0, f64::max);
            prop_assert!(err <= p.len() as f64 / size);
            let finer = quantize_row(&p, m + 8).unwrap();
            let fine_err = finer.counts.iter().zip(&p)
                .map(|(&k, &x)| (k as f64 / (size * 256.0) - x).abs()).fold(0.0, f64::max);
            prop_assert!(fine_err * 64.0 <= err.max(1.0 / size) + 1e-15);
        }

        #[test]
        fn preimage_identity(counts in prop::collection::vec(0u64..64, 1..6)) {
            let total: u64 = counts.iter().sum();
            prop_assume!(total > 0);
            let bits = 64 - (total - 1).leading_zeros();
            let mut padded = counts.clone();
            padded.push((1u64 << bits) - total);
            let row = DyadicMdpRow::new(bits, padded.clone()).unwrap();
            let map = build_reversible_map(&row).unwrap();
            let mut seen = vec![0u64; padded.len()];
            for x in 0..(1u64 << bits) {
                seen[map.apply(x).unwrap()] += 1;
            }
            prop_assert_eq!(seen, padded);
        }
    }
}
