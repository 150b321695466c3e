//! Effective-gain estimators at the users: the blind power-based estimator,
//! the statistical baseline and a beamformed downlink-pilot baseline, plus
//! the side statistics they rely on.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::Gamma;

use crate::channel::ModelTag;
use crate::downlink::{EffectiveGains, ReceivedBlock};
use crate::link::LinkConfig;
use crate::numerics::{CMat, RandomStream, C64};
use crate::precoding::Processing;
use crate::stats::{Estimate, Moments};
use crate::{Error, Result};

/// Minimum Monte Carlo budget for side statistics.
pub const MIN_SIDE_TRIALS: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GainMethod {
    Blind,
    Statistical,
    DlPilot,
    Genie,
}

impl GainMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            GainMethod::Blind => "blind",
            GainMethod::Statistical => "statistical",
            GainMethod::DlPilot => "dl-pilot",
            GainMethod::Genie => "genie",
        }
    }
}

/// Per-user estimates of `alpha_kk`. Blind and statistical estimates are real
/// and nonnegative; the pilot and genie estimates keep a phase.
#[derive(Debug, Clone, PartialEq)]
pub struct GainEstimate {
    pub alpha_hat: Vec<C64>,
    pub method: GainMethod,
}

/// Long-term statistics of the effective gains, known at the base station for
/// a given large-scale realization and power allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct SideStats {
    /// `E sum_{j != k} eta_j |alpha_kj|^2`.
    pub mean_interf: Vec<Estimate>,
    /// `E |alpha_kk|`.
    pub mean_abs_gain: Vec<Estimate>,
    /// `E alpha_kk`.
    pub mean_gain: Vec<C64>,
    /// `E |alpha_kk - E alpha_kk|^2`.
    pub var_gain: Vec<f64>,
    pub trials: usize,
    /// Ill-conditioned draws that were discarded.
    pub resamples: usize,
}

impl SideStats {
    pub fn users(&self) -> usize {
        self.mean_gain.len()
    }

    /// Statistics of a deterministic gain matrix.
    pub fn deterministic(gains: &EffectiveGains, eta: &[f64]) -> Self {
        let k = gains.users();
        let exact = |value| Estimate { value, std_err: 0.0 };
        SideStats {
            mean_interf: (0..k).map(|u| exact(gains.interference(eta, u))).collect(),
            mean_abs_gain: (0..k).map(|u| exact(gains.get(u, u).norm())).collect(),
            mean_gain: (0..k).map(|u| gains.get(u, u)).collect(),
            var_gain: vec![0.0; k],
            trials: 1,
            resamples: 0,
        }
    }

    /// Replaces the Monte Carlo interference means by exact values.
    pub fn with_mean_interf(mut self, values: &[f64]) -> Result<Self> {
        if values.len() != self.users() {
            return Err(Error::InvalidDimension("one interference mean per user".into()));
        }
        self.mean_interf = values.iter().map(|&value| Estimate { value, std_err: 0.0 }).collect();
        Ok(self)
    }
}

/// `(1 / tau_d) sum_n |y_k(n)|^2`.
pub fn xi(block: &ReceivedBlock, k: usize) -> Result<f64> {
    check_user(block, k)?;
    Ok(row_power(block, k) / block.tau_d as f64)
}

/// The large-block limit `rho_d sum_j eta_j |alpha_kj|^2 + 1`.
pub fn xi_limit(gains: &EffectiveGains, eta: &[f64], rho_d: f64, k: usize) -> f64 {
    rho_d * gains.total_power(eta, k) + 1.0
}

/// Sample power of row `k` with sample `n` left out.
pub fn loo_xi(block: &ReceivedBlock, k: usize, n: usize) -> Result<f64> {
    check_user(block, k)?;
    if block.tau_d < 2 {
        return Err(Error::config("leave-one-out needs tau_d >= 2"));
    }
    if n >= block.tau_d {
        return Err(Error::input(format!("sample {n} outside block of {}", block.tau_d)));
    }
    let total = row_power(block, k) - block.sample(k, n).norm_sqr();
    Ok(total.max(0.0) / (block.tau_d - 1) as f64)
}

fn row_power(block: &ReceivedBlock, k: usize) -> f64 {
    (0..block.tau_d).map(|n| block.sample(k, n).norm_sqr()).sum()
}

fn check_user(block: &ReceivedBlock, k: usize) -> Result<()> {
    if k >= block.users() {
        return Err(Error::input(format!("user {k} of {}", block.users())));
    }
    Ok(())
}

/// Draws leave-one-out sample powers without materializing the block.
///
/// With Gaussian symbols and noise the samples of user `k` are i.i.d.
/// `CN(0, s2)` given the gains, `s2 = 1 + rho_d sum_j eta_j |alpha_kj|^2`, so
/// the sum of `tau_d - 1` of them is `s2 Gamma(tau_d - 1, 1)`.
#[derive(Debug, Clone, Copy)]
pub struct LooXiSampler {
    dist: Gamma<f64>,
    dof: f64,
}

impl LooXiSampler {
    pub fn new(tau_d: usize) -> Result<Self> {
        if tau_d < 2 {
            return Err(Error::config("leave-one-out needs tau_d >= 2"));
        }
        let dof = (tau_d - 1) as f64;
        let dist = Gamma::new(dof, 1.0).map_err(|_| Error::config("bad gamma shape"))?;
        Ok(LooXiSampler { dist, dof })
    }

    pub fn sample(&self, gains: &EffectiveGains, eta: &[f64], rho_d: f64, k: usize, stream: &mut RandomStream) -> f64 {
        xi_limit(gains, eta, rho_d, k) * stream.gamma(&self.dist) / self.dof
    }
}

/// Inverts the sample-power approximation
/// `xi ~ rho_d eta_k |alpha_kk|^2 + rho_d E[interference] + 1`, falling back
/// to `E |alpha_kk|` when the radicand is not positive.
pub fn blind_estimate(xi: f64, eta_k: f64, rho_d: f64, mean_interf_k: f64, mean_abs_gain_k: f64) -> f64 {
    let floor = 1.0 + rho_d * mean_interf_k;
    if xi > floor && eta_k > 0.0 && rho_d > 0.0 {
        libm::sqrt((xi - floor) / (rho_d * eta_k))
    } else {
        mean_abs_gain_k
    }
}

/// Blind estimates for every user from one received block.
pub fn blind_estimates(block: &ReceivedBlock, eta: &[f64], stats: &SideStats) -> Result<GainEstimate> {
    if eta.len() != block.users() || stats.users() != block.users() {
        return Err(Error::InvalidDimension("eta, stats and block disagree on K".into()));
    }
    let mut alpha_hat = Vec::with_capacity(block.users());
    for k in 0..block.users() {
        let x = xi(block, k)?;
        let a = blind_estimate(
            x,
            eta[k],
            block.rho_d,
            stats.mean_interf[k].value,
            stats.mean_abs_gain[k].value,
        );
        alpha_hat.push(C64::new(a, 0.0));
    }
    Ok(GainEstimate {
        alpha_hat,
        method: GainMethod::Blind,
    })
}

/// Closed-form `E sum_{j != k} eta_j |alpha_kj|^2` with unit-norm precoders.
///
/// MR: `beta_k sum_{j != k} eta_j` for any fading model. ZF over Rayleigh
/// fading: `(beta_k - gamma_k) sum_{j != k} eta_j`. ZF over keyhole channels
/// has no closed form here.
pub fn mean_interference_closed(
    processing: Processing,
    model: ModelTag,
    beta: &[f64],
    gamma: &[f64],
    eta: &[f64],
    k: usize,
) -> Result<f64> {
    if beta.len() != gamma.len() || beta.len() != eta.len() || k >= beta.len() {
        return Err(Error::InvalidDimension("beta, gamma, eta must have one entry per user".into()));
    }
    let others: f64 = eta.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, e)| e).sum();
    match (processing, model) {
        (Processing::Mr, _) => Ok(beta[k] * others),
        (Processing::Zf, ModelTag::Rayleigh) => Ok((beta[k] - gamma[k]) * others),
        (Processing::Zf, ModelTag::Keyhole) => Err(Error::Unsupported(
            "no closed-form interference mean for ZF over keyhole channels".into(),
        )),
    }
}

/// Monte Carlo side statistics over fresh channel, estimate and precoder draws.
pub fn side_stats_mc(cfg: &LinkConfig, eta: &[f64], trials: usize, stream: &mut RandomStream) -> Result<SideStats> {
    if trials < MIN_SIDE_TRIALS {
        return Err(Error::InsufficientSamples {
            needed: MIN_SIDE_TRIALS,
            got: trials,
        });
    }
    cfg.validate()?;
    let k = cfg.users();
    if eta.len() != k {
        return Err(Error::InvalidDimension(format!("{} power coefficients for {k} users", eta.len())));
    }
    let mut interf = vec![Moments::new(); k];
    let mut abs_gain = vec![Moments::new(); k];
    let mut power = vec![0.0; k];
    let mut sum = vec![C64::new(0.0, 0.0); k];
    let mut resamples = 0;
    for _ in 0..trials {
        let r = cfg.realize(stream)?;
        resamples += r.resamples;
        for u in 0..k {
            let a = r.gains.get(u, u);
            interf[u].push(r.gains.interference(eta, u));
            abs_gain[u].push(a.norm());
            power[u] += a.norm_sqr();
            sum[u] += a;
        }
    }
    let n = trials as f64;
    let mean_gain: Vec<C64> = sum.iter().map(|s| s / n).collect();
    let var_gain = power
        .iter()
        .zip(&mean_gain)
        .map(|(p, m)| (p / n - m.norm_sqr()).max(0.0))
        .collect();
    Ok(SideStats {
        mean_interf: interf.into_iter().map(Estimate::from).collect(),
        mean_abs_gain: abs_gain.into_iter().map(Estimate::from).collect(),
        mean_gain,
        var_gain,
        trials,
        resamples,
    })
}

/// Monte Carlo `E sum_{j != k} eta_j |alpha_kj|^2` for every user.
pub fn mean_interference_mc(cfg: &LinkConfig, eta: &[f64], trials: usize, stream: &mut RandomStream) -> Result<Vec<Estimate>> {
    Ok(side_stats_mc(cfg, eta, trials, stream)?.mean_interf)
}

/// `|E alpha_kk|`, phase set to zero.
pub fn statistical_estimate(stats: &SideStats, k: usize) -> f64 {
    stats.mean_gain[k].norm()
}

pub fn statistical_estimates(stats: &SideStats) -> GainEstimate {
    GainEstimate {
        alpha_hat: (0..stats.users()).map(|k| C64::new(statistical_estimate(stats, k), 0.0)).collect(),
        method: GainMethod::Statistical,
    }
}

pub fn genie_estimates(gains: &EffectiveGains) -> GainEstimate {
    GainEstimate {
        alpha_hat: (0..gains.users()).map(|k| gains.get(k, k)).collect(),
        method: GainMethod::Genie,
    }
}

/// `tau_dp x K` DFT pilot book, unit-modulus entries, orthogonal columns when
/// `tau_dp >= K`.
pub fn dft_pilots(tau_dp: usize, users: usize) -> Result<CMat> {
    if tau_dp < users {
        return Err(Error::config(format!("downlink pilots need tau_dp >= K ({tau_dp} < {users})")));
    }
    CMat::from_fn(tau_dp, users, |t, j| {
        let phase = -2.0 * core::f64::consts::PI * ((t * j) % tau_dp) as f64 / tau_dp as f64;
        C64::new(libm::cos(phase), libm::sin(phase))
    })
}

/// Despread beamformed pilot observations, one per user, scaled so the noise
/// term is `CN(0, 1)`:
/// `z_k = sum_j sqrt(rho_d eta_j) alpha_kj <phi_k, phi_j> / sqrt(tau_dp) + w_k`.
pub fn dl_pilot_observation(
    gains: &EffectiveGains,
    eta: &[f64],
    rho_d: f64,
    pilots: &CMat,
    stream: &mut RandomStream,
) -> Result<Vec<C64>> {
    let (tau, k) = (pilots.rows(), gains.users());
    if pilots.cols() != k || eta.len() != k {
        return Err(Error::InvalidDimension("pilot book, eta and gains disagree on K".into()));
    }
    let amp: Vec<f64> = eta.iter().map(|e| libm::sqrt(rho_d * e)).collect();
    let norm = 1.0 / libm::sqrt(tau as f64);
    let mut z = vec![C64::new(0.0, 0.0); k];
    for t in 0..tau {
        for (u, zu) in z.iter_mut().enumerate() {
            let mut y = stream.cn();
            for j in 0..k {
                y += gains.get(u, j) * pilots[(t, j)] * amp[j];
            }
            *zu += pilots[(t, u)].conj() * y * norm;
        }
    }
    Ok(z)
}

/// Scalar linear MMSE estimate `m + (c / v)(z - mu_z)` from the pilot
/// observation, with prior mean `m` and variance taken from `stats`.
pub fn dl_pilot_lmmse(z: C64, eta_k: f64, rho_d: f64, tau_dp: usize, mean: C64, var: f64) -> C64 {
    let s = libm::sqrt(tau_dp as f64 * rho_d * eta_k);
    let c = s * var;
    let v = s * s * var + 1.0;
    mean + (z - mean * s) * (c / v)
}

pub fn dl_pilot_estimate(
    gains: &EffectiveGains,
    eta: &[f64],
    rho_d: f64,
    tau_dp: usize,
    stats: &SideStats,
    stream: &mut RandomStream,
) -> Result<GainEstimate> {
    let pilots = dft_pilots(tau_dp, gains.users())?;
    if stats.users() != gains.users() {
        return Err(Error::InvalidDimension("stats and gains disagree on K".into()));
    }
    let z = dl_pilot_observation(gains, eta, rho_d, &pilots, stream)?;
    let alpha_hat = z
        .iter()
        .enumerate()
        .map(|(k, &zk)| dl_pilot_lmmse(zk, eta[k], rho_d, tau_dp, stats.mean_gain[k], stats.var_gain[k]))
        .collect();
    Ok(GainEstimate {
        alpha_hat,
        method: GainMethod::DlPilot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelModel, KeyholeSpec, LargeScaleProfile};
    use crate::downlink::{transmit_block, SymbolAlphabet};
    use crate::link::CsiMode;
    use crate::precoding::Normalization;
    use crate::stats::median;

    fn block_from(samples: &[C64]) -> ReceivedBlock {
        let m = CMat::from_col_major(1, samples.len(), samples.to_vec()).unwrap();
        ReceivedBlock {
            y: m.clone(),
            s: m.clone(),
            noise: m,
            tau_d: samples.len(),
            rho_d: 1.0,
        }
    }

    fn link(model: ChannelModel, processing: Processing, m: usize, k: usize, csi: CsiMode) -> LinkConfig {
        LinkConfig {
            antennas: m,
            model,
            beta: LargeScaleProfile::uniform(k, 1.0).unwrap(),
            csi,
            processing,
            normalization: Normalization::ShortTerm,
        }
    }

    #[test]
    fn xi_trivial_blocks() {
        assert_eq!(xi(&block_from(&[C64::new(0.0, 0.0); 5]), 0).unwrap(), 0.0);
        assert_eq!(xi(&block_from(&[C64::new(3.0, 0.0)]), 0).unwrap(), 9.0);
    }

    #[test]
    fn loo_xi_examples() {
        let b = block_from(&[C64::new(2.0, 0.0), C64::new(0.0, 0.0)]);
        assert_eq!(loo_xi(&b, 0, 1).unwrap(), 4.0);
        assert!(matches!(loo_xi(&block_from(&[C64::new(1.0, 0.0)]), 0, 0), Err(Error::InvalidConfig(_))));

        let mut s = RandomStream::new(5, 0);
        let samples: Vec<C64> = (0..37).map(|_| s.cn() * 3.0).collect();
        let b = block_from(&samples);
        let full = xi(&b, 0).unwrap();
        let avg: f64 = (0..37).map(|n| loo_xi(&b, 0, n).unwrap()).sum::<f64>() / 37.0;
        assert!((avg - full).abs() < 1e-12 * full);
        let biggest = samples.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        for n in 0..37 {
            // |loo - xi| = |xi - |y_n|^2| / (tau - 1)
            assert!((loo_xi(&b, 0, n).unwrap() - full).abs() <= (full + biggest) / 36.0 + 1e-12);
        }
    }

    #[test]
    fn xi_converges_to_limit() {
        let mut s = RandomStream::new(6, 0);
        let g = EffectiveGains {
            alpha: CMat::from_fn(3, 3, |_, _| s.cn()).unwrap(),
        };
        let eta = [0.2, 0.3, 0.5];
        let b = transmit_block(&g, &eta, 5.0, 100_000, SymbolAlphabet::Gaussian, &mut s).unwrap();
        for k in 0..3 {
            let target = xi_limit(&g, &eta, 5.0, k);
            assert!((xi(&b, k).unwrap() / target - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn loo_sampler_matches_block_moments() {
        let mut s = RandomStream::new(7, 0);
        let g = EffectiveGains {
            alpha: CMat::from_fn(2, 2, |_, _| s.cn()).unwrap(),
        };
        let eta = [0.4, 0.6];
        let (rho, tau) = (3.0, 20);
        let sampler = LooXiSampler::new(tau).unwrap();
        let (mut direct, mut short) = (Moments::new(), Moments::new());
        for _ in 0..20_000 {
            let b = transmit_block(&g, &eta, rho, tau, SymbolAlphabet::Gaussian, &mut s).unwrap();
            direct.push(loo_xi(&b, 0, 0).unwrap());
            short.push(sampler.sample(&g, &eta, rho, 0, &mut s));
        }
        let d = (direct.mean() - short.mean()).abs();
        assert!(d < 4.0 * libm::hypot(direct.std_err(), short.std_err()));
        assert!((direct.variance() / short.variance() - 1.0).abs() < 0.05);
    }

    #[test]
    fn blind_inverts_single_user_limit() {
        let (rho, eta, a) = (10.0, 1.0, 1.7);
        let xi = rho * eta * a * a + 1.0;
        assert!((blind_estimate(xi, eta, rho, 0.0, 99.0) - a).abs() < 1e-12);
    }

    #[test]
    fn blind_boundary_falls_back() {
        let (rho, interf) = (4.0, 0.3);
        assert_eq!(blind_estimate(1.0 + rho * interf, 0.5, rho, interf, 2.5), 2.5);
        assert_eq!(blind_estimate(0.1, 0.5, rho, interf, 2.5), 2.5);
    }

    #[test]
    fn blind_keyhole_limit_surrogate() {
        let cfg = link(
            ChannelModel::Keyhole(KeyholeSpec::equal(1).unwrap()),
            Processing::Mr,
            100,
            10,
            CsiMode::Perfect,
        );
        let eta = vec![0.1; 10];
        let rho = 10.0;
        let gamma = cfg.gamma();
        let interf: Vec<f64> = (0..10)
            .map(|k| mean_interference_closed(Processing::Mr, ModelTag::Keyhole, cfg.beta.beta(), &gamma, &eta, k).unwrap())
            .collect();
        let mut s = RandomStream::new(8, 0);
        let mut err = Vec::new();
        for _ in 0..1_000 {
            let r = cfg.realize(&mut s).unwrap();
            for k in 0..10 {
                let x = xi_limit(&r.gains, &eta, rho, k);
                let a = blind_estimate(x, eta[k], rho, interf[k], 1.0);
                err.push((a / r.gains.get(k, k).norm() - 1.0).abs());
            }
        }
        let med = median(&err);
        assert!(med < 0.05, "{med}");
    }

    #[test]
    fn closed_form_interference_examples() {
        let beta = vec![1.0; 10];
        let eta = vec![0.1; 10];
        let g = vec![10.0 / 11.0; 10];
        let mr = mean_interference_closed(Processing::Mr, ModelTag::Rayleigh, &beta, &g, &eta, 3).unwrap();
        assert!((mr - 0.9).abs() < 1e-12);
        let zf = mean_interference_closed(Processing::Zf, ModelTag::Rayleigh, &beta, &g, &eta, 3).unwrap();
        assert!((zf - 0.9 / 11.0).abs() < 1e-12);
        assert_eq!(
            mean_interference_closed(Processing::Mr, ModelTag::Rayleigh, &[2.0], &[1.0], &[1.0], 0).unwrap(),
            0.0
        );
        assert!(matches!(
            mean_interference_closed(Processing::Zf, ModelTag::Keyhole, &beta, &g, &eta, 0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn mc_interference_matches_closed_form_small() {
        let csi = CsiMode::Lmmse { tau_up: 4, rho_u: 1.0 };
        for (model, proc) in [
            (ChannelModel::Rayleigh, Processing::Mr),
            (ChannelModel::Keyhole(KeyholeSpec::equal(2).unwrap()), Processing::Mr),
            (ChannelModel::Rayleigh, Processing::Zf),
        ] {
            let cfg = link(model, proc, 20, 4, csi);
            let eta = [0.1, 0.2, 0.3, 0.4];
            let mc = mean_interference_mc(&cfg, &eta, 4_000, &mut RandomStream::new(9, 0)).unwrap();
            for (k, e) in mc.iter().enumerate() {
                let want = mean_interference_closed(proc, cfg.model.tag(), cfg.beta.beta(), &cfg.gamma(), &eta, k).unwrap();
                assert!(e.sigma_distance(want) < 3.5, "{proc:?} {k}: {} vs {want}", e.value);
            }
        }
    }

    #[test]
    fn side_stats_mr_perfect_csi() {
        let cfg = link(ChannelModel::Rayleigh, Processing::Mr, 100, 1, CsiMode::Perfect);
        let st = side_stats_mc(&cfg, &[1.0], 4_000, &mut RandomStream::new(10, 0)).unwrap();
        let want = libm::exp(libm::lgamma(100.5) - libm::lgamma(100.0));
        assert!((want - 9.9875).abs() < 1e-3);
        assert!((st.mean_abs_gain[0].value / want - 1.0).abs() < 0.005);
        assert!(st.mean_gain[0].re > 0.0 && st.mean_gain[0].im.abs() < 1e-12);
        assert_eq!(st.mean_interf[0].value, 0.0);
    }

    #[test]
    fn side_stats_zf_perfect_csi_has_no_interference() {
        let cfg = link(ChannelModel::Rayleigh, Processing::Zf, 12, 4, CsiMode::Perfect);
        let st = side_stats_mc(&cfg, &[0.25; 4], 1_000, &mut RandomStream::new(11, 0)).unwrap();
        assert!(st.mean_interf.iter().all(|e| e.value < 1e-10));
    }

    #[test]
    fn side_stats_budget_enforced() {
        let cfg = link(ChannelModel::Rayleigh, Processing::Mr, 4, 1, CsiMode::Perfect);
        assert!(matches!(
            side_stats_mc(&cfg, &[1.0], 999, &mut RandomStream::new(0, 0)),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn statistical_on_deterministic_gains_is_exact() {
        let g = EffectiveGains {
            alpha: CMat::from_col_major(2, 2, vec![C64::new(2.0, 0.0), C64::new(0.1, 0.0), C64::new(0.2, 0.0), C64::new(3.0, 0.0)])
                .unwrap(),
        };
        let st = SideStats::deterministic(&g, &[0.5, 0.5]);
        let e = statistical_estimates(&st);
        assert_eq!(e.alpha_hat, vec![C64::new(2.0, 0.0), C64::new(3.0, 0.0)]);
    }

    #[test]
    fn pilots_are_orthogonal() {
        let p = dft_pilots(10, 10).unwrap();
        let gram = p.h_mul(&p).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let want = if i == j { 10.0 } else { 0.0 };
                assert!((gram[(i, j)] - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
        assert!(matches!(dft_pilots(3, 4), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn pilot_lmmse_limits() {
        let a = C64::new(1.3, -0.2);
        // no prior uncertainty: the prior mean is returned whatever is observed
        assert_eq!(dl_pilot_lmmse(C64::new(7.0, 7.0), 0.5, 10.0, 4, a, 0.0), a);
        // vanishing SNR: prior mean
        let e = dl_pilot_lmmse(C64::new(5.0, 0.0), 0.5, 1e-20, 4, a, 2.0);
        assert!((e - a).norm() < 1e-6);
        // vanishing noise: the observation is inverted exactly
        let (eta, rho, tau) = (0.5, 1e12, 4);
        let z = a * libm::sqrt(tau as f64 * rho * eta);
        assert!((dl_pilot_lmmse(z, eta, rho, tau, C64::new(0.0, 0.0), 1.0) - a).norm() < 1e-9);
    }

    #[test]
    fn pilot_observation_has_no_leakage() {
        let mut s = RandomStream::new(12, 0);
        let g = EffectiveGains {
            alpha: CMat::from_fn(4, 4, |_, _| s.cn()).unwrap(),
        };
        let eta = [0.25; 4];
        let rho = 1e10;
        let z = dl_pilot_observation(&g, &eta, rho, &dft_pilots(4, 4).unwrap(), &mut s).unwrap();
        for k in 0..4 {
            let want = g.get(k, k) * libm::sqrt(4.0 * rho * eta[k]);
            // residual is the unit-variance noise only
            assert!((z[k] - want).norm() < 6.0, "{k}");
        }
    }

    #[test]
    fn pilot_estimate_rejects_short_pilots() {
        let g = EffectiveGains {
            alpha: CMat::identity(3).unwrap(),
        };
        let st = SideStats::deterministic(&g, &[1.0 / 3.0; 3]);
        let r = dl_pilot_estimate(&g, &[1.0 / 3.0; 3], 1.0, 2, &st, &mut RandomStream::new(0, 0));
        assert!(matches!(r, Err(Error::InvalidConfig(_))));
        let ok = dl_pilot_estimate(&g, &[1.0 / 3.0; 3], 1.0, 3, &st, &mut RandomStream::new(0, 0)).unwrap();
        assert_eq!(ok.method, GainMethod::DlPilot);
        assert!(ok.alpha_hat.iter().all(|a| (a - C64::new(1.0, 0.0)).norm() < 1e-15));
    }
}
