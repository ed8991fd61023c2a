//! Interquartile-range subset division and inverse-probability permutation.
//!
//! One decoding step runs:
//!
//! 1. `K0 = top_k ∩ top_p` on the raw distribution, renormalized;
//! 2. IQR bands on the renormalized `K0` values;
//! 3. top1ctrl set `Vn` on the raw distribution;
//! 4. `K1 = dynamic_prune(bands, K0, Vn)`, renormalized;
//! 5. inverse-probability permutation of the VeryHigh members that survived in `K1`.
//!
//! The bands are computed once on `K0` and carried forward to `K1` unless
//! [`SamplerConfig::repartition`] asks for them to be recomputed.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::dist::{Distribution, TokenId};
use crate::error::{invalid, Error, Result};
use crate::filters::{dynamic_prune, joint_filter, top1ctrl_set, CandidateSet};

/// Supports smaller than this never produce a VeryHigh band.
pub const MIN_SUPPORT_FOR_VERY_HIGH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    VeryHigh,
    High,
    Medium,
    Low,
    VeryLow,
}

impl Band {
    pub const ALL: [Band; 5] = [Band::VeryHigh, Band::High, Band::Medium, Band::Low, Band::VeryLow];
}

#[derive(Debug, Clone, Serialize)]
pub struct IqrPartition {
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub rho: f64,
    bands: Vec<(TokenId, Band)>,
    #[serde(skip)]
    index: HashMap<TokenId, usize>,
}

impl PartialEq for IqrPartition {
    fn eq(&self, other: &Self) -> bool {
        self.q1 == other.q1
            && self.q3 == other.q3
            && self.iqr == other.iqr
            && self.rho == other.rho
            && self.bands == other.bands
    }
}

/// `base + rho * spread`. An infinite coefficient pushes the fence to
/// infinity even when the spread is zero, so VeryHigh and VeryLow are empty.
fn fence(base: f64, rho: f64, spread: f64) -> f64 {
    if rho.is_infinite() {
        rho
    } else {
        base + rho * spread
    }
}

impl IqrPartition {
    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    pub fn bands(&self) -> &[(TokenId, Band)] {
        &self.bands
    }

    pub fn band_of(&self, id: TokenId) -> Option<Band> {
        self.index.get(&id).map(|&i| self.bands[i].1)
    }

    /// Ids in `band`, in canonical order.
    pub fn members(&self, band: Band) -> Vec<TokenId> {
        self.bands.iter().filter(|(_, b)| *b == band).map(|(id, _)| *id).collect()
    }

    pub fn count(&self, band: Band) -> usize {
        self.bands.iter().filter(|(_, b)| *b == band).count()
    }

    /// Threshold at or above which a candidate is VeryHigh (ignores the small-set rule).
    pub fn upper_fence(&self) -> f64 {
        fence(self.q3, self.rho, self.iqr)
    }

    /// Threshold below which a candidate is VeryLow.
    pub fn lower_fence(&self) -> f64 {
        fence(self.q1, -self.rho, self.iqr)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0) {
        return Err(invalid("rho", format!("IQR coefficient must be > 0, got {rho}")));
    }
    Ok(())
}

/// Splits the support of `p_fil` into IQR bands over its probability values.
pub fn iqr_partition(p_fil: &Distribution, rho: f64) -> Result<IqrPartition> {
    check_rho(rho)?;
    if p_fil.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let q1 = p_fil.quantile(0.25)?;
    let q3 = p_fil.quantile(0.75)?;
    let iqr = q3 - q1;
    let upper = fence(q3, rho, iqr);
    let lower = fence(q1, -rho, iqr);
    let allow_very_high = p_fil.len() >= MIN_SUPPORT_FOR_VERY_HIGH;

    let bands: Vec<(TokenId, Band)> = p_fil
        .iter()
        .map(|(id, p)| {
            let band = if allow_very_high && p >= upper {
                Band::VeryHigh
            } else if p >= q3 {
                Band::High
            } else if p >= q1 {
                Band::Medium
            } else if p >= lower {
                Band::Low
            } else {
                Band::VeryLow
            };
            (id, band)
        })
        .collect();
    let index = bands.iter().enumerate().map(|(i, (id, _))| (*id, i)).collect();
    Ok(IqrPartition { q1, q3, iqr, rho, bands, index })
}

/// Reassigns the mass of `very_high` in proportion to each member's inverse
/// probability. Band mass is conserved and values outside the band are untouched.
pub fn inverse_permute(p_fil: &Distribution, very_high: &[TokenId]) -> Result<Distribution> {
    let position: HashMap<TokenId, usize> = p_fil.ids().iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut members = Vec::with_capacity(very_high.len());
    let mut seen = HashSet::with_capacity(very_high.len());
    for &id in very_high {
        let &i = position.get(&id).ok_or(Error::NotInSupport(id))?;
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id));
        }
        members.push(i);
    }
    let probs = p_fil.probs();
    if members.len() <= 1 || members.iter().all(|&i| probs[i] == probs[members[0]]) {
        return Ok(p_fil.clone());
    }

    let mass: f64 = members.iter().map(|&i| probs[i]).sum();
    let inverse_total: f64 = members.iter().map(|&i| probs[i].recip()).sum();
    let mut out: Vec<(TokenId, f64)> = p_fil.iter().collect();
    for &i in &members {
        out[i].1 = mass * probs[i].recip() / inverse_total;
    }
    Ok(Distribution::from_probs_unscaled(out))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SamplerConfig {
    pub p: f64,
    pub k: usize,
    pub n: f64,
    pub rho: f64,
    pub seed: u64,
    pub max_len: usize,
    /// Recompute the bands on the pruned set instead of carrying them forward.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub repartition: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { p: 0.8, k: 640, n: 100.0, rho: 1.5, seed: 0, max_len: 200, repartition: false }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(invalid("p", format!("{} is outside (0, 1]", self.p)));
        }
        if self.k == 0 {
            return Err(invalid("k", "must be >= 1"));
        }
        if !(self.n >= 1.0) {
            return Err(invalid("n", format!("must be >= 1, got {}", self.n)));
        }
        check_rho(self.rho)?;
        if self.max_len == 0 {
            return Err(invalid("max_len", "must be >= 1"));
        }
        Ok(())
    }
}

/// Every intermediate of one IQR-IP step.
#[derive(Debug, Clone)]
pub struct IqrTrace {
    pub k0: CandidateSet,
    pub partition: IqrPartition,
    pub vn: CandidateSet,
    pub k1: CandidateSet,
    /// Renormalized on `k1`, before permutation.
    pub filtered: Distribution,
    /// VeryHigh members that survived pruning.
    pub very_high: Vec<TokenId>,
    pub output: Distribution,
}

pub fn iqr_ip_trace(raw: &Distribution, cfg: &SamplerConfig) -> Result<IqrTrace> {
    let k0 = joint_filter(raw, cfg.k, cfg.p)?;
    let on_k0 = raw.restrict(&k0)?;
    let partition = iqr_partition(&on_k0, cfg.rho)?;
    let vn = top1ctrl_set(raw, cfg.n)?;
    let k1 = dynamic_prune(&partition, &k0, &vn)?;
    let filtered = raw.restrict(&k1)?;
    let very_high = if cfg.repartition {
        iqr_partition(&filtered, cfg.rho)?.members(Band::VeryHigh)
    } else {
        k1.intersect(&partition.members(Band::VeryHigh))
    };
    let output = inverse_permute(&filtered, &very_high)?;
    Ok(IqrTrace { k0, partition, vn, k1, filtered, very_high, output })
}

/// The final IQR-IP distribution, ready for [`crate::dist::sample_token`].
pub fn iqr_ip_step(raw: &Distribution, cfg: &SamplerConfig) -> Result<Distribution> {
    Ok(iqr_ip_trace(raw, cfg)?.output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::normalize;
    use proptest::prelude::*;

    fn dist(weights: &[f64]) -> Distribution {
        normalize(weights, &(0..weights.len() as TokenId).collect::<Vec<_>>()).unwrap()
    }

    const SKEWED: [f64; 8] = [0.04, 0.05, 0.06, 0.08, 0.10, 0.12, 0.15, 0.40];

    #[test]
    fn partition_of_uniform_is_all_very_high() {
        let d = dist(&[1.0; 8]);
        let part = iqr_partition(&d, 1.5).unwrap();
        assert_eq!(part.iqr, 0.0);
        assert_eq!(part.q1, 0.125);
        assert_eq!(part.count(Band::VeryHigh), 8);
    }

    #[test]
    fn partition_of_skewed_example() {
        let d = dist(&SKEWED);
        let part = iqr_partition(&d, 1.5).unwrap();
        assert!((part.q1 - 0.0575).abs() < 1e-15);
        assert!((part.q3 - 0.1275).abs() < 1e-15);
        assert!((part.upper_fence() - 0.2325).abs() < 1e-15);
        assert_eq!(part.members(Band::VeryHigh), vec![7]);
        assert_eq!(part.members(Band::High), vec![6]);
        assert_eq!(part.members(Band::Medium), vec![5, 4, 3, 2]);
        assert_eq!(part.members(Band::Low), vec![1, 0]);
        assert_eq!(part.count(Band::VeryLow), 0);
    }

    #[test]
    fn small_support_never_has_very_high() {
        let part = iqr_partition(&dist(&[0.7, 0.3]), 1.5).unwrap();
        assert!(part.members(Band::VeryHigh).is_empty());
        assert_eq!(part.band_of(0), Some(Band::High));
        let part = iqr_partition(&Distribution::point_mass(4), 1.5).unwrap();
        assert_eq!(part.band_of(4), Some(Band::High));
        let part = iqr_partition(&dist(&[0.9, 0.05, 0.05]), 0.1).unwrap();
        assert_eq!(part.count(Band::VeryHigh), 0);
    }

    #[test]
    fn partition_rejects_bad_rho() {
        let d = dist(&SKEWED);
        assert!(iqr_partition(&d, 0.0).is_err());
        assert!(iqr_partition(&d, f64::NAN).is_err());
        // an infinite coefficient is allowed and empties VeryHigh
        let part = iqr_partition(&d, f64::INFINITY).unwrap();
        assert_eq!(part.count(Band::VeryHigh), 0);
        // also with a zero spread, where any finite coefficient leaves the fence at Q3
        let flat_tail = dist(&[0.5, 0.1, 0.1, 0.1, 0.1, 0.1]);
        assert_eq!(iqr_partition(&flat_tail, 1e9).unwrap().count(Band::VeryHigh), 6);
        let part = iqr_partition(&flat_tail, f64::INFINITY).unwrap();
        assert_eq!(part.count(Band::VeryHigh), 0);
        assert_eq!(part.count(Band::VeryLow), 0);
    }

    #[test]
    fn two_element_permutation_swaps() {
        let d = normalize(&[0.4, 0.2, 0.4], &[0, 1, 2]).unwrap();
        // ids 0 and 2 tie at 0.4; permute {2: 0.4, 1: 0.2}
        let out = inverse_permute(&d, &[2, 1]).unwrap();
        assert!((out.prob_of(2).unwrap() - 0.2).abs() < 1e-15);
        assert!((out.prob_of(1).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(out.prob_of(0), d.prob_of(0));
    }

    #[test]
    fn identity_cases() {
        let d = dist(&[0.5, 0.3, 0.2]);
        assert_eq!(inverse_permute(&d, &[]).unwrap(), d);
        assert_eq!(inverse_permute(&d, &[1]).unwrap(), d);
        let flat = dist(&[1.0, 1.0, 1.0, 2.0]);
        assert_eq!(inverse_permute(&flat, &[0, 1, 2]).unwrap(), flat);
    }

    #[test]
    fn full_support_permutation() {
        let d = dist(&[0.5, 0.3, 0.2]);
        let out = inverse_permute(&d, &[0, 1, 2]).unwrap();
        // inverse weights 2, 10/3, 5 normalized by 31/3
        assert!((out.prob_of(0).unwrap() - 6.0 / 31.0).abs() < 1e-15);
        assert!((out.prob_of(1).unwrap() - 10.0 / 31.0).abs() < 1e-15);
        assert!((out.prob_of(2).unwrap() - 15.0 / 31.0).abs() < 1e-15);
        assert_eq!(out.argmax(), 2);
    }

    #[test]
    fn permute_rejects_foreign_ids() {
        let d = dist(&[0.5, 0.5]);
        assert_eq!(inverse_permute(&d, &[0, 7]), Err(Error::NotInSupport(7)));
        assert_eq!(inverse_permute(&d, &[0, 0]), Err(Error::DuplicateId(0)));
    }

    #[test]
    fn step_on_point_mass() {
        let d = Distribution::point_mass(11);
        assert_eq!(iqr_ip_step(&d, &SamplerConfig::default()).unwrap(), d);
    }

    #[test]
    fn step_with_huge_rho_is_plain_filtering() {
        let d = dist(&[9.0, 7.0, 5.0, 3.0, 2.0, 1.0, 1.0, 0.5, 0.25]);
        let cfg = SamplerConfig { rho: 1e9, p: 0.95, ..Default::default() };
        let trace = iqr_ip_trace(&d, &cfg).unwrap();
        assert!(trace.very_high.is_empty());
        assert_eq!(trace.output, trace.filtered);
        assert_eq!(trace.output, d.restrict(&trace.k1).unwrap());
    }

    #[test]
    fn step_on_skewed_example_is_unpermuted() {
        let d = dist(&SKEWED);
        let cfg = SamplerConfig { p: 1.0, k: 8, n: 1000.0, ..Default::default() };
        let trace = iqr_ip_trace(&d, &cfg).unwrap();
        assert_eq!(trace.k0.len(), 8);
        assert_eq!(trace.vn.len(), 8);
        assert_eq!(trace.k1, trace.k0);
        assert_eq!(trace.very_high, vec![7]);
        assert_eq!(trace.output, d);
    }

    #[test]
    fn step_permutes_flat_head() {
        // two big candidates above the fence, a long flat tail
        let mut w = vec![0.30, 0.20];
        // 20 tail values spread over [0.02, 0.03], mass 0.5
        w.extend((0..20).map(|i| 0.02 + 0.01 * i as f64 / 19.0));
        let d = dist(&w);
        let cfg = SamplerConfig { p: 1.0, ..Default::default() };
        let trace = iqr_ip_trace(&d, &cfg).unwrap();
        assert_eq!(trace.very_high, vec![0, 1]);
        assert!((trace.output.prob_of(0).unwrap() - 0.20).abs() < 1e-12);
        assert!((trace.output.prob_of(1).unwrap() - 0.30).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::default().validate().is_ok());
        for bad in [
            SamplerConfig { p: 0.0, ..Default::default() },
            SamplerConfig { k: 0, ..Default::default() },
            SamplerConfig { n: 0.5, ..Default::default() },
            SamplerConfig { rho: -1.0, ..Default::default() },
            SamplerConfig { max_len: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    fn weights() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-4f64..1.0, 1..120)
    }

    proptest! {
        #[test]
        fn step_conserves_mass_and_band(w in weights(), rho in 0.1f64..5.0, p in 0.3f64..=1.0) {
            let d = dist(&w);
            let cfg = SamplerConfig { rho, p, ..Default::default() };
            let trace = iqr_ip_trace(&d, &cfg).unwrap();
            let total: f64 = trace.output.probs().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            let before: f64 = trace.very_high.iter().map(|&id| trace.filtered.prob_of(id).unwrap()).sum();
            let after: f64 = trace.very_high.iter().map(|&id| trace.output.prob_of(id).unwrap()).sum();
            prop_assert!((before - after).abs() < 1e-12);
            prop_assert_eq!(trace.partition.len(), trace.k0.len());
            if trace.k0.len() < MIN_SUPPORT_FOR_VERY_HIGH {
                prop_assert!(trace.very_high.is_empty());
                prop_assert_eq!(&trace.output, &d.restrict(&trace.k1).unwrap());
            }
        }

        #[test]
        fn permutation_reverses_order(w in prop::collection::vec(1e-3f64..1.0, 2..40)) {
            let d = dist(&w);
            let vh: Vec<TokenId> = d.ids().to_vec();
            let out = inverse_permute(&d, &vh).unwrap();
            for a in d.ids() {
                for b in d.ids() {
                    let (pa, pb) = (d.prob_of(*a).unwrap(), d.prob_of(*b).unwrap());
                    if pa > pb * (1.0 + 1e-9) {
                        prop_assert!(out.prob_of(*a).unwrap() < out.prob_of(*b).unwrap());
                    }
                }
            }
        }
    }
}
