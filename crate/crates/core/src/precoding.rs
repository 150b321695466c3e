//! MR and ZF precoders and downlink power control.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::numerics::{norm_sqr, CMat, Cholesky};
use crate::uplink::UplinkEstimate;
use crate::{Error, Result};

/// Gram matrices with a larger condition estimate are rejected.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Processing {
    Mr,
    Zf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Normalization {
    /// Unit-norm precoding vectors in every coherence interval.
    ShortTerm,
    /// Normalized by the average estimate power only.
    LongTerm,
}

/// Precoding matrix `A = [a_1 .. a_K]` (columns are per-user precoders).
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    pub a: CMat,
    pub processing: Processing,
    pub normalization: Normalization,
}

/// `a_k = ghat_k / ||ghat_k||`.
pub fn mr_precoder(est: &UplinkEstimate) -> Result<PrecoderSet> {
    let mut a = est.ghat.clone();
    for k in 0..a.cols() {
        let n = libm::sqrt(norm_sqr(a.col(k)));
        if !(n > 0.0) {
            return Err(Error::DegenerateEstimate(k));
        }
        for z in a.col_mut(k) {
            *z /= n;
        }
    }
    Ok(PrecoderSet {
        a,
        processing: Processing::Mr,
        normalization: Normalization::ShortTerm,
    })
}

/// Columns of `Ghat (Ghat^H Ghat)^-1`, each normalized to unit norm.
pub fn zf_precoder(est: &UplinkEstimate) -> Result<PrecoderSet> {
    let (m, k) = (est.ghat.rows(), est.ghat.cols());
    if m <= k {
        return Err(Error::config(format!("ZF needs M > K (M = {m}, K = {k})")));
    }
    let chol = Cholesky::new(&est.ghat.gram())?;
    let cond = chol.condition_estimate();
    if cond > MAX_GRAM_CONDITION {
        return Err(Error::IllConditioned(cond));
    }
    let mut a = est.ghat.mul(&chol.inverse()?)?;
    for u in 0..k {
        let n = libm::sqrt(norm_sqr(a.col(u)));
        for z in a.col_mut(u) {
            *z /= n;
        }
    }
    Ok(PrecoderSet {
        a,
        processing: Processing::Zf,
        normalization: Normalization::ShortTerm,
    })
}

/// `a_k = ghat_k / sqrt(M gamma_k)`, so that `E ||a_k||^2 = 1`.
pub fn mr_long_term(est: &UplinkEstimate) -> Result<PrecoderSet> {
    let m = est.ghat.rows() as f64;
    let mut a = est.ghat.clone();
    for (k, &g) in est.gamma.iter().enumerate() {
        if !(g > 0.0) {
            return Err(Error::DegenerateEstimate(k));
        }
        let s = 1.0 / libm::sqrt(m * g);
        for z in a.col_mut(k) {
            *z *= s;
        }
    }
    Ok(PrecoderSet {
        a,
        processing: Processing::Mr,
        normalization: Normalization::LongTerm,
    })
}

/// Dispatches on processing and normalization. Long-term ZF is rejected: its
/// normalizer `E ||[G (G^H G)^-1]_k||^2` is infinite for a single-keyhole
/// channel with one user.
pub fn build_precoder(est: &UplinkEstimate, processing: Processing, normalization: Normalization) -> Result<PrecoderSet> {
    match (processing, normalization) {
        (Processing::Mr, Normalization::ShortTerm) => mr_precoder(est),
        (Processing::Zf, Normalization::ShortTerm) => zf_precoder(est),
        (Processing::Mr, Normalization::LongTerm) => mr_long_term(est),
        (Processing::Zf, Normalization::LongTerm) => Err(Error::Unsupported(
            "long-term normalized ZF has no finite normalizer in general".into(),
        )),
    }
}

pub fn equal_power(users: usize) -> Result<Vec<f64>> {
    if users == 0 {
        return Err(Error::InvalidDimension("K >= 1".into()));
    }
    Ok(vec![1.0 / users as f64; users])
}

/// Max-min fair power coefficients for users relying on mean effective gains.
///
/// MR: `eta_k = (1 + rho beta_k) / (rho gamma_k S)` with
/// `S = sum_j (1 + rho beta_j) / (rho gamma_j)`; ZF replaces `beta` by
/// `beta - gamma` in the numerators. The coefficients always sum to one.
pub fn maxmin_power(beta: &[f64], gamma: &[f64], rho_d: f64, processing: Processing) -> Result<Vec<f64>> {
    if beta.is_empty() || beta.len() != gamma.len() {
        return Err(Error::InvalidDimension("beta and gamma must be non-empty and equal length".into()));
    }
    if !(rho_d > 0.0) {
        return Err(Error::input("rho_d must be positive"));
    }
    if let Some(k) = gamma.iter().position(|g| !(*g > 0.0)) {
        return Err(Error::input(format!("gamma[{k}] must be positive")));
    }
    let residual = |b: f64, g: f64| match processing {
        Processing::Mr => b,
        Processing::Zf => b - g,
    };
    if processing == Processing::Zf {
        if let Some(k) = beta.iter().zip(gamma).position(|(b, g)| b < g) {
            return Err(Error::input(format!("beta[{k}] < gamma[{k}]")));
        }
    }
    let weights: Vec<f64> = beta
        .iter()
        .zip(gamma)
        .map(|(&b, &g)| (1.0 + rho_d * residual(b, g)) / (rho_d * g))
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{gen_rayleigh, LargeScaleProfile};
    use crate::numerics::{dot_h, RandomStream, C64};
    use crate::stats::Moments;
    use crate::uplink::{lmmse_estimate, perfect_csi};

    fn est_from(ghat: CMat, gamma: Vec<f64>) -> UplinkEstimate {
        UplinkEstimate {
            ghat,
            gamma,
            tau_up: 1,
            rho_u: 1.0,
        }
    }

    fn rayleigh_est(m: usize, k: usize, seed: u64) -> UplinkEstimate {
        let beta = LargeScaleProfile::uniform(k, 1.0).unwrap();
        let mut s = RandomStream::new(seed, 0);
        let ch = gen_rayleigh(m, &beta, &mut s).unwrap();
        lmmse_estimate(&ch, &beta, k, 1.0, &mut s).unwrap()
    }

    #[test]
    fn mr_normalizes_single_entry() {
        let mut g = CMat::zeros(3, 1).unwrap();
        g[(0, 0)] = C64::new(3.0, 4.0);
        let p = mr_precoder(&est_from(g, vec![1.0])).unwrap();
        assert_eq!(p.a[(0, 0)], C64::new(0.6, 0.8));
        assert_eq!(p.a[(1, 0)], C64::new(0.0, 0.0));
    }

    #[test]
    fn mr_rejects_zero_column() {
        let g = CMat::zeros(4, 2).unwrap();
        assert_eq!(mr_precoder(&est_from(g, vec![0.0, 0.0])), Err(Error::DegenerateEstimate(0)));
    }

    #[test]
    fn unit_norm_columns() {
        let est = rayleigh_est(20, 5, 1);
        for p in [mr_precoder(&est).unwrap(), zf_precoder(&est).unwrap()] {
            for k in 0..5 {
                assert!((norm_sqr(p.a.col(k)) - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zf_nulls_other_users() {
        let est = rayleigh_est(16, 6, 2);
        let p = zf_precoder(&est).unwrap();
        let cross = est.ghat.h_mul(&p.a).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    assert!(cross[(i, j)].norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn zf_single_user_is_mr() {
        let est = rayleigh_est(8, 1, 3);
        let zf = zf_precoder(&est).unwrap();
        let mr = mr_precoder(&est).unwrap();
        assert!(zf.a.sub(&mr.a).unwrap().frobenius() < 1e-12);
    }

    #[test]
    fn zf_orthonormal_estimate_is_identity_map() {
        let g = CMat::from_fn(4, 2, |r, c| if r == c { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }).unwrap();
        let p = zf_precoder(&est_from(g.clone(), vec![1.0, 1.0])).unwrap();
        assert!(p.a.sub(&g).unwrap().frobenius() < 1e-15);
    }

    #[test]
    fn zf_rejects_rank_deficiency_and_square_arrays() {
        let col: Vec<C64> = (0..5).map(|i| C64::new(i as f64 + 1.0, 0.5)).collect();
        let g = CMat::from_columns(&[col.clone(), col]).unwrap();
        let r = zf_precoder(&est_from(g, vec![1.0, 1.0]));
        assert!(matches!(r, Err(Error::SingularMatrix) | Err(Error::IllConditioned(_))), "{r:?}");
        let est = rayleigh_est(4, 4, 4);
        assert!(matches!(zf_precoder(&est), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn long_term_zf_rejected() {
        let est = rayleigh_est(8, 2, 5);
        assert!(matches!(
            build_precoder(&est, Processing::Zf, Normalization::LongTerm),
            Err(Error::Unsupported(_))
        ));
        assert!(build_precoder(&est, Processing::Mr, Normalization::LongTerm).is_ok());
    }

    #[test]
    fn long_term_mr_average_power() {
        let beta = LargeScaleProfile::uniform(1, 1.0).unwrap();
        let mut s = RandomStream::new(6, 0);
        let (mut p, mut p2) = (Moments::new(), Moments::new());
        for _ in 0..20_000 {
            let ch = gen_rayleigh(100, &beta, &mut s).unwrap();
            let est = perfect_csi(&ch, &beta).unwrap();
            let a = mr_long_term(&est).unwrap();
            let n = norm_sqr(a.a.col(0));
            p.push(n);
            p2.push(n);
        }
        assert!((p.mean() - 1.0).abs() < 0.01);
        assert!((p2.variance() - 0.01).abs() < 0.001, "{}", p2.variance());
        // deterministic estimate with ||ghat||^2 = M gamma
        let g = CMat::from_fn(4, 1, |_, _| C64::new(0.5, 0.5)).unwrap();
        let a = mr_long_term(&est_from(g, vec![0.5])).unwrap();
        assert!((norm_sqr(a.a.col(0)) - 1.0).abs() < 1e-15);
        let g = CMat::zeros(4, 1).unwrap();
        assert!(mr_long_term(&est_from(g, vec![0.0])).is_err());
    }

    #[test]
    fn perfect_csi_mr_gain_is_channel_norm() {
        let beta = LargeScaleProfile::uniform(3, 1.0).unwrap();
        let mut s = RandomStream::new(7, 0);
        let ch = gen_rayleigh(12, &beta, &mut s).unwrap();
        let p = mr_precoder(&perfect_csi(&ch, &beta).unwrap()).unwrap();
        for k in 0..3 {
            let a = dot_h(ch.g.col(k), p.a.col(k));
            assert!(a.im.abs() < 1e-12);
            assert!((a.re - libm::sqrt(norm_sqr(ch.g.col(k)))).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_power_values() {
        assert_eq!(equal_power(10).unwrap(), vec![0.1; 10]);
        assert_eq!(equal_power(1).unwrap(), vec![1.0]);
        assert_eq!(equal_power(4).unwrap().iter().sum::<f64>(), 1.0);
        assert!(equal_power(0).is_err());
    }

    #[test]
    fn maxmin_symmetric_users_get_equal_share() {
        for p in [Processing::Mr, Processing::Zf] {
            let eta = maxmin_power(&[0.8; 5], &[0.6; 5], 3.0, p).unwrap();
            for e in eta {
                assert!((e - 0.2).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn maxmin_zf_perfect_csi_inverse_gain() {
        let beta = [1.0, 2.0, 0.5];
        let eta = maxmin_power(&beta, &beta, 2.0, Processing::Zf).unwrap();
        let inv: Vec<f64> = beta.iter().map(|b| 1.0 / (2.0 * b)).collect();
        let total: f64 = inv.iter().sum();
        for (e, w) in eta.iter().zip(&inv) {
            assert!((e - w / total).abs() < 1e-15);
        }
    }

    #[test]
    fn maxmin_rejects_bad_inputs() {
        assert!(maxmin_power(&[1.0], &[0.0], 1.0, Processing::Mr).is_err());
        assert!(maxmin_power(&[0.5], &[0.6], 1.0, Processing::Zf).is_err());
        assert!(maxmin_power(&[0.5], &[0.6], 1.0, Processing::Mr).is_ok());
    }
}
