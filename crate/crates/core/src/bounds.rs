//! Numerical checks of the total-variation bound for the permuted distribution:
//!
//! `tv(p_inv, p_ref)^2 <= KL(p_ref || p_fil) / 2 + 2m + m^2`
//!
//! with `Z_p = sum_VH p_fil / sum_VH 1/p_fil` and `m = max_VH |p_fil - Z_p / p_fil|`.
//!
//! The bound holds for the pointwise (sup-norm) gap between distributions,
//! which is also reported. With `tv` as half the L1 distance it can fail when
//! `p_ref` is close to `p_fil` and VeryHigh has more than two members; see
//! `half_l1_counterexample` in the tests.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dist::{Distribution, TokenId};
use crate::error::{Error, Result};
use crate::iqr_ip::inverse_permute;

/// Slack added to the bound before comparing, to absorb rounding.
pub const BOUND_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// `None` when VeryHigh is empty.
    pub z_p: Option<f64>,
    pub m: f64,
    pub kl: f64,
    /// Half-L1 distance between the permuted distribution and `p_ref`.
    pub tv: f64,
    /// Largest pointwise gap between the permuted distribution and `p_ref`.
    pub sup_gap: f64,
    pub bound: f64,
    /// `bound - tv^2`.
    pub slack: f64,
    pub satisfied: bool,
    pub pointwise_satisfied: bool,
}

fn as_map(d: &Distribution) -> HashMap<TokenId, f64> {
    d.iter().collect()
}

/// Pairs `(p(x), q(x))` over the union of both supports; p's order first.
fn union_pairs(p: &Distribution, q: &Distribution) -> Vec<(f64, f64)> {
    let qm = as_map(q);
    let pm = as_map(p);
    let mut out: Vec<(f64, f64)> = p.iter().map(|(id, pv)| (pv, qm.get(&id).copied().unwrap_or(0.0))).collect();
    out.extend(q.iter().filter(|(id, _)| !pm.contains_key(id)).map(|(_, qv)| (0.0, qv)));
    out
}

/// Half the L1 distance over the union of supports.
pub fn tv_distance(p: &Distribution, q: &Distribution) -> f64 {
    let l1: f64 = union_pairs(p, q).into_iter().map(|(a, b)| (a - b).abs()).sum();
    (0.5 * l1).min(1.0)
}

/// Largest absolute pointwise difference over the union of supports.
pub fn sup_distance(p: &Distribution, q: &Distribution) -> f64 {
    union_pairs(p, q).into_iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// `KL(p_ref || p_fil)` in nats.
pub fn kl_divergence(p_ref: &Distribution, p_fil: &Distribution) -> Result<f64> {
    let fil = as_map(p_fil);
    let mut kl = 0.0;
    for (id, p) in p_ref.iter() {
        let q = *fil.get(&id).ok_or(Error::InfiniteDivergence(id))?;
        kl += p * (p / q).ln();
    }
    Ok(kl.max(0.0))
}

fn very_high_probs(p_fil: &Distribution, very_high: &[TokenId]) -> Result<Vec<f64>> {
    very_high.iter().map(|&id| p_fil.prob_of(id).ok_or(Error::NotInSupport(id))).collect()
}

fn normalizer(vh: &[f64]) -> f64 {
    vh.iter().sum::<f64>() / vh.iter().map(|p| p.recip()).sum::<f64>()
}

/// `Z_p`, or `None` for an empty band.
pub fn z_p(p_fil: &Distribution, very_high: &[TokenId]) -> Result<Option<f64>> {
    let vh = very_high_probs(p_fil, very_high)?;
    Ok((!vh.is_empty()).then(|| normalizer(&vh)))
}

/// `m`: largest gap between a band member and its permuted value, over the whole band.
pub fn max_gap(p_fil: &Distribution, very_high: &[TokenId]) -> Result<f64> {
    let vh = very_high_probs(p_fil, very_high)?;
    if vh.is_empty() {
        return Ok(0.0);
    }
    let z = normalizer(&vh);
    Ok(vh.iter().map(|&p| (p - z / p).abs()).fold(0.0, f64::max))
}

/// `m` evaluated only at the band's largest and smallest probabilities.
pub fn max_gap_at_extremes(p_fil: &Distribution, very_high: &[TokenId]) -> Result<f64> {
    let vh = very_high_probs(p_fil, very_high)?;
    if vh.is_empty() {
        return Ok(0.0);
    }
    let z = normalizer(&vh);
    let hi = vh.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = vh.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((hi - z / hi).abs().max((lo - z / lo).abs()))
}

pub fn corollary_bound(p_fil: &Distribution, very_high: &[TokenId], p_ref: &Distribution) -> Result<BoundReport> {
    let z_p = z_p(p_fil, very_high)?;
    let m = max_gap(p_fil, very_high)?;
    let kl = kl_divergence(p_ref, p_fil)?;
    let permuted = inverse_permute(p_fil, very_high)?;
    let tv = tv_distance(&permuted, p_ref);
    let sup_gap = sup_distance(&permuted, p_ref);
    let bound = 0.5 * kl + 2.0 * m + m * m;
    Ok(BoundReport {
        z_p,
        m,
        kl,
        tv,
        sup_gap,
        bound,
        slack: bound - tv * tv,
        satisfied: tv * tv <= bound + BOUND_TOLERANCE,
        pointwise_satisfied: sup_gap * sup_gap <= bound + BOUND_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::normalize;
    use proptest::prelude::*;

    fn d(ids: &[TokenId], w: &[f64]) -> Distribution {
        normalize(w, ids).unwrap()
    }

    #[test]
    fn tv_examples() {
        let p = d(&[0, 1, 2], &[0.2, 0.4, 0.4]);
        assert_eq!(tv_distance(&p, &p), 0.0);
        assert_eq!(tv_distance(&Distribution::point_mass(1), &Distribution::point_mass(2)), 1.0);
        let q = d(&[0, 1, 2], &[0.4, 0.2, 0.4]);
        assert!((tv_distance(&p, &q) - 0.2).abs() < 1e-15);
        assert!((sup_distance(&p, &q) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn kl_examples() {
        let p = d(&[0, 1], &[0.3, 0.7]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let half = d(&[0, 1], &[0.5, 0.5]);
        let kl = kl_divergence(&Distribution::point_mass(0), &half).unwrap();
        assert!((kl - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(kl_divergence(&half, &Distribution::point_mass(0)), Err(Error::InfiniteDivergence(1)));
    }

    #[test]
    fn two_element_swap_trace() {
        let p_fil = d(&[0, 1, 2], &[0.4, 0.2, 0.4]);
        let vh = [0, 1];
        let r = corollary_bound(&p_fil, &vh, &p_fil).unwrap();
        assert!((r.z_p.unwrap() - 0.08).abs() < 1e-15);
        assert!((r.m - 0.2).abs() < 1e-15);
        assert!((r.bound - 0.44).abs() < 1e-15);
        assert!((r.tv - 0.2).abs() < 1e-15);
        assert!(r.satisfied && r.pointwise_satisfied);
    }

    #[test]
    fn empty_band_trace() {
        let p_fil = d(&[0, 1, 2], &[0.5, 0.3, 0.2]);
        let r = corollary_bound(&p_fil, &[], &p_fil).unwrap();
        assert_eq!(r.z_p, None);
        assert_eq!((r.m, r.bound, r.tv), (0.0, 0.0, 0.0));
        assert!(r.satisfied);
    }

    #[test]
    fn out_of_support_reference_is_an_error() {
        let p_fil = d(&[0, 1], &[0.5, 0.5]);
        let p_ref = d(&[0, 5], &[0.5, 0.5]);
        assert_eq!(corollary_bound(&p_fil, &[0], &p_ref), Err(Error::InfiniteDivergence(5)));
        assert_eq!(corollary_bound(&p_fil, &[7], &p_fil), Err(Error::NotInSupport(7)));
    }

    /// Two large and two small band members swap pairwise: the half-L1 shift is
    /// twice the largest pointwise shift, which exceeds 2m + m^2 once p_ref = p_fil.
    #[test]
    fn half_l1_counterexample() {
        let p_fil = d(&[0, 1, 2, 3], &[0.3, 0.3, 0.01, 0.01]);
        let r = corollary_bound(&p_fil, &[0, 1, 2, 3], &p_fil).unwrap();
        assert!((r.tv - 2.0 * r.m).abs() < 1e-12);
        assert!(r.pointwise_satisfied);
        // tv = 0.58 here, comfortably inside the bound
        assert!(r.satisfied);

        // a wide band of near-equal values with p_ref = p_fil breaks the half-L1 form
        let w: Vec<f64> = (0..100).map(|i| 0.5 + i as f64 / 99.0).collect();
        let ids: Vec<TokenId> = (0..100).collect();
        let p_fil = d(&ids, &w);
        let r = corollary_bound(&p_fil, &ids, &p_fil).unwrap();
        assert!(!r.satisfied, "tv^2 = {} vs bound {}", r.tv * r.tv, r.bound);
        assert!(r.pointwise_satisfied);
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..40).prop_flat_map(|n| {
            (prop::collection::vec(1e-3f64..1.0, n), prop::collection::vec(1e-3f64..1.0, n))
        })
    }

    proptest! {
        #[test]
        fn pinsker_holds((a, b) in pair()) {
            let ids: Vec<TokenId> = (0..a.len() as TokenId).collect();
            let p = d(&ids, &a);
            let q = d(&ids, &b);
            let tv = tv_distance(&p, &q);
            prop_assert!(tv * tv <= 0.5 * kl_divergence(&p, &q).unwrap() + 1e-12);
        }

        #[test]
        fn m_is_attained_at_extremes((w, mask) in (2usize..60).prop_flat_map(|n| {
            (prop::collection::vec(1e-3f64..1.0, n), prop::collection::vec(any::<bool>(), n))
        })) {
            let ids: Vec<TokenId> = (0..w.len() as TokenId).collect();
            let p = d(&ids, &w);
            let vh: Vec<TokenId> = ids.iter().copied().zip(&mask).filter(|(_, &m)| m).map(|(i, _)| i).collect();
            let full = max_gap(&p, &vh).unwrap();
            let ends = max_gap_at_extremes(&p, &vh).unwrap();
            prop_assert!((full - ends).abs() <= 1e-15 * full.max(1.0));
        }

        #[test]
        fn pointwise_bound_always_holds((a, b) in pair(), cut in 0.0f64..1.0) {
            let ids: Vec<TokenId> = (0..a.len() as TokenId).collect();
            let p_fil = d(&ids, &a);
            let p_ref = d(&ids, &b);
            let take = ((ids.len() as f64 * cut) as usize).max(1);
            let vh = &p_fil.ids()[..take];
            let r = corollary_bound(&p_fil, vh, &p_ref).unwrap();
            prop_assert!(r.pointwise_satisfied);
            prop_assert!(r.kl >= 0.0 && (0.0..=1.0).contains(&r.tv));
        }
    }

    #[test]
    fn adding_a_smaller_member_never_decreases_m() {
        let p = d(&[0, 1, 2, 3, 4], &[0.3, 0.25, 0.2, 0.15, 0.1]);
        let mut prev = 0.0;
        for len in 1..=5 {
            let m = max_gap(&p, &p.ids()[..len]).unwrap();
            assert!(m >= prev - 1e-15, "len {len}: {m} < {prev}");
            prev = m;
        }
    }

    /// The growth of m is not universal: a new member close to the current
    /// smallest one pulls Z_p down enough to shrink the gap at the far end.
    #[test]
    fn m_can_shrink_when_band_grows() {
        let p = d(&[0, 1, 2, 3], &[0.36, 0.31, 0.17, 0.16]);
        let three = max_gap(&p, &[0, 1, 2]).unwrap();
        let four = max_gap(&p, &[0, 1, 2, 3]).unwrap();
        assert!(four < three);
    }
}
