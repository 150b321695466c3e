//! Uplink pilot training: linear MMSE channel estimates at the base station.
//!
//! Pilots are not simulated symbol by symbol. With orthogonal pilots of
//! length `tau_up >= K` the despread observation of user `k` is statistically
//! equivalent to `g_k + w_k / sqrt(tau_up rho_u)`, so the estimate is drawn
//! directly from that observation model.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::channel::{ChannelRealization, LargeScaleProfile};
use crate::numerics::{CMat, RandomStream, C64};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct UplinkEstimate {
    pub ghat: CMat,
    /// Per-entry variance of each estimated column.
    pub gamma: Vec<f64>,
    pub tau_up: usize,
    pub rho_u: f64,
}

/// `gamma_k = tau rho beta^2 / (tau rho beta + 1)`.
pub fn estimate_variance(beta: f64, tau_up: usize, rho_u: f64) -> f64 {
    let snr = tau_up as f64 * rho_u;
    snr * beta * beta / (snr * beta + 1.0)
}

pub fn lmmse_estimate(
    channel: &ChannelRealization,
    beta: &LargeScaleProfile,
    tau_up: usize,
    rho_u: f64,
    stream: &mut RandomStream,
) -> Result<UplinkEstimate> {
    let (m, k) = (channel.antennas(), channel.users());
    if beta.users() != k {
        return Err(Error::InvalidDimension(format!("{} gains for {k} users", beta.users())));
    }
    if tau_up < k {
        return Err(Error::config(format!("uplink pilots need tau_up >= K ({tau_up} < {k})")));
    }
    if !(rho_u >= 0.0) || !rho_u.is_finite() {
        return Err(Error::config("rho_u must be finite and nonnegative"));
    }
    let snr = tau_up as f64 * rho_u;
    let mut ghat = CMat::zeros(m, k)?;
    let mut noise = vec![C64::new(0.0, 0.0); m];
    for (u, &b) in beta.beta().iter().enumerate() {
        let denom = snr * b + 1.0;
        let on_channel = snr * b / denom;
        let on_noise = libm::sqrt(snr) * b / denom;
        stream.fill_cn(&mut noise);
        for ((out, g), w) in ghat.col_mut(u).iter_mut().zip(channel.g.col(u)).zip(&noise) {
            *out = g * on_channel + w * on_noise;
        }
    }
    Ok(UplinkEstimate {
        ghat,
        gamma: beta.beta().iter().map(|&b| estimate_variance(b, tau_up, rho_u)).collect(),
        tau_up,
        rho_u,
    })
}

/// Genie estimate `Ghat = G`, `gamma = beta`.
pub fn perfect_csi(channel: &ChannelRealization, beta: &LargeScaleProfile) -> Result<UplinkEstimate> {
    if beta.users() != channel.users() {
        return Err(Error::InvalidDimension("one gain per user".into()));
    }
    Ok(UplinkEstimate {
        ghat: channel.g.clone(),
        gamma: beta.beta().to_vec(),
        tau_up: channel.users(),
        rho_u: f64::INFINITY,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::gen_rayleigh;
    use crate::stats::Moments;

    fn setup(k: usize) -> (LargeScaleProfile, RandomStream) {
        (LargeScaleProfile::uniform(k, 1.0).unwrap(), RandomStream::new(21, 0))
    }

    #[test]
    fn gamma_reference_value() {
        assert!((estimate_variance(1.0, 10, 1.0) - 10.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_monotone_and_bounded() {
        let mut prev = -1.0;
        for snr in [0.0, 0.01, 0.1, 1.0, 10.0, 1e3, 1e6] {
            let g = estimate_variance(0.7, 1, snr);
            assert!(g > prev && g <= 0.7);
            prev = g;
        }
    }

    #[test]
    fn pilot_length_must_cover_users() {
        let (beta, mut s) = setup(4);
        let ch = gen_rayleigh(8, &beta, &mut s).unwrap();
        assert!(matches!(lmmse_estimate(&ch, &beta, 3, 1.0, &mut s), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn zero_snr_gives_zero_estimate() {
        let (beta, mut s) = setup(2);
        let ch = gen_rayleigh(8, &beta, &mut s).unwrap();
        let est = lmmse_estimate(&ch, &beta, 2, 0.0, &mut s).unwrap();
        assert!(est.ghat.as_slice().iter().all(|z| z.norm() == 0.0));
        assert_eq!(est.gamma, vec![0.0, 0.0]);
    }

    #[test]
    fn high_snr_recovers_channel() {
        let (beta, mut s) = setup(3);
        let ch = gen_rayleigh(32, &beta, &mut s).unwrap();
        let est = lmmse_estimate(&ch, &beta, 3, 1e9, &mut s).unwrap();
        let rel = est.ghat.sub(&ch.g).unwrap().frobenius() / ch.g.frobenius();
        assert!(rel < 1e-3, "{rel}");
    }

    #[test]
    fn perfect_csi_is_exact() {
        let (beta, mut s) = setup(2);
        let ch = gen_rayleigh(8, &beta, &mut s).unwrap();
        let est = perfect_csi(&ch, &beta).unwrap();
        assert_eq!(est.ghat, ch.g);
        assert_eq!(est.gamma, beta.beta());
    }

    #[test]
    fn variance_decomposition_and_orthogonality() {
        let beta = LargeScaleProfile::uniform(1, 2.0).unwrap();
        let mut s = RandomStream::new(22, 1);
        let (tau, rho) = (5, 0.3);
        let gamma = estimate_variance(2.0, tau, rho);
        let (mut est_p, mut err_p) = (Moments::new(), Moments::new());
        let (mut corr_re, mut corr_im) = (Moments::new(), Moments::new());
        let m = 10;
        for _ in 0..100_000 / m {
            let ch = gen_rayleigh(m, &beta, &mut s).unwrap();
            let e = lmmse_estimate(&ch, &beta, tau, rho, &mut s).unwrap();
            for r in 0..m {
                let gh = e.ghat[(r, 0)];
                let gt = ch.g[(r, 0)] - gh;
                est_p.push(gh.norm_sqr());
                err_p.push(gt.norm_sqr());
                let c = gt * gh.conj();
                corr_re.push(c.re);
                corr_im.push(c.im);
            }
        }
        assert!((est_p.mean() / gamma - 1.0).abs() < 0.01, "{} vs {gamma}", est_p.mean());
        assert!((err_p.mean() / (2.0 - gamma) - 1.0).abs() < 0.01);
        assert!(corr_re.mean().abs() < 3.0 * corr_re.std_err());
        assert!(corr_im.mean().abs() < 3.0 * corr_im.std_err());
    }
}
