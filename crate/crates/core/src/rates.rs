//! Achievable-rate bounds and the derived throughput and MSE metrics.
//!
//! The side-information bound needs `E{alpha_kk | x}` and
//! `E{sum_j eta_j |alpha_kj|^2 | x}` for a scalar side information `x`. Both
//! come from Gaussian kernel density estimates of the joint densities, binned
//! onto a regular grid and integrated by Riemann sums.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::downlink::EffectiveGains;
use crate::estimation::{
    blind_estimate, dft_pilots, dl_pilot_lmmse, dl_pilot_observation, GainMethod, LooXiSampler, SideStats,
};
use crate::link::LinkConfig;
use crate::numerics::{RandomStream, C64};
use crate::stats::quantile_sorted;
use crate::{Error, Result};

pub const DEFAULT_GRID: usize = 256;
pub const MIN_RATE_SAMPLES: usize = 1_000;
/// Floor for the SINR denominator of the side-information bound.
pub const DENOM_FLOOR: f64 = 1e-12;
/// Estimates below this magnitude are dropped from the use-and-forget bound.
pub const MIN_UATF_GAIN: f64 = 1e-9;
/// Fraction of clamped grid mass or rejected samples that raises a warning.
pub const WARN_FRACTION: f64 = 0.01;

/// Samples of one user's side information, true gain and interference.
#[derive(Debug, Clone, Copy)]
pub struct RateSampleSet<'a> {
    /// Side information (an estimate of `alpha_kk`).
    pub x: &'a [f64],
    /// True `alpha_kk`.
    pub alpha: &'a [C64],
    /// `sum_{j != k} eta_j |alpha_kj|^2`.
    pub interf: &'a [f64],
    pub eta_k: f64,
    pub rho_d: f64,
}

impl<'a> RateSampleSet<'a> {
    pub fn new(x: &'a [f64], alpha: &'a [C64], interf: &'a [f64], eta_k: f64, rho_d: f64) -> Result<Self> {
        if x.len() != alpha.len() || x.len() != interf.len() {
            return Err(Error::InvalidDimension("side information, gains and interference differ in length".into()));
        }
        if interf.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::input("interference powers must be nonnegative"));
        }
        if !(eta_k > 0.0) || !(rho_d >= 0.0) {
            return Err(Error::input("eta_k must be positive and rho_d nonnegative"));
        }
        Ok(RateSampleSet {
            x,
            alpha,
            interf,
            eta_k,
            rho_d,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Bandwidth {
    /// `0.9 min(sd, IQR / 1.34) N^(-1/5)`.
    #[default]
    Silverman,
    Fixed(f64),
}

/// Marginal density of `x` on a regular grid and conditional means of one or
/// more responses at each grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub x: Vec<f64>,
    pub dx: f64,
    pub density: Vec<f64>,
    /// `cond[r][i] = E{response_r | x = x[i]}`.
    pub cond: Vec<Vec<f64>>,
    pub bandwidth: f64,
    /// All samples of `x` coincide; the grid is the single point.
    pub point_mass: bool,
}

impl DensityGrid {
    /// `sum_i p(x_i) dx`.
    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.dx
    }
}

pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = libm::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * libm::pow(n as f64, -0.2)
}

fn is_degenerate(values: &[f64]) -> bool {
    let (lo, hi) = min_max(values);
    let scale = lo.abs().max(hi.abs()).max(1.0);
    hi - lo <= 1e-12 * scale
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Regular grid over `[min - 3h, max + 3h]`.
#[derive(Debug, Clone)]
struct Axis {
    lo: f64,
    dx: f64,
    n: usize,
    /// `kernel[d]` is proportional to `phi(d dx / h)`, scaled so that the
    /// kernel sums to `1 / dx` over the two-sided lattice. That is `phi / h`
    /// for `h >> dx` and keeps unit mass when `h` is below the grid spacing.
    kernel: Vec<f64>,
}

impl Axis {
    fn new(values: &[f64], n: usize, h: f64) -> Self {
        let (lo, hi) = min_max(values);
        let lo = lo - 3.0 * h;
        let dx = (hi + 3.0 * h - lo) / (n - 1) as f64;
        let mut kernel: Vec<f64> = (0..n)
            .map(|d| {
                let u = d as f64 * dx / h;
                libm::exp(-0.5 * u * u)
            })
            .collect();
        let total = 2.0 * kernel.iter().sum::<f64>() - kernel[0];
        let norm = 1.0 / (total * dx);
        kernel.iter_mut().for_each(|k| *k *= norm);
        Axis { lo, dx, n, kernel }
    }

    fn point(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.dx
    }

    /// Linear binning: left cell and the weight given to its right neighbor.
    fn bin(&self, v: f64) -> (usize, f64) {
        let pos = ((v - self.lo) / self.dx).clamp(0.0, (self.n - 1) as f64);
        let i = (pos as usize).min(self.n - 2);
        (i, pos - i as f64)
    }

    fn k(&self, i: usize, j: usize) -> f64 {
        self.kernel[i.abs_diff(j)]
    }

    /// `out[i] = sum_g kernel(i - g) w[g]`.
    fn smooth(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| w.iter().enumerate().map(|(g, wg)| self.k(i, g) * wg).sum())
            .collect()
    }
}

/// Riemann sums over the response grid of one response variable: for every
/// response bin `s`, `(sum_j y_j K(y_j - y_s) dy, sum_j K(y_j - y_s) dy)`.
fn response_sums(axis: &Axis) -> (Vec<f64>, Vec<f64>) {
    let mut first = vec![0.0; axis.n];
    let mut zeroth = vec![0.0; axis.n];
    for s in 0..axis.n {
        for j in 0..axis.n {
            let w = axis.k(j, s) * axis.dx;
            first[s] += axis.point(j) * w;
            zeroth[s] += w;
        }
    }
    (first, zeroth)
}

/// Kernel density estimate of `x` with conditional means of each response.
///
/// The joint density `p(y, x)` is a product-kernel estimate on a
/// `grid x grid` lattice, and `E{y | x_i} = sum_j y_j p(y_j, x_i) / sum_j
/// p(y_j, x_i)`. The sums over `y_j` are factored through the binned samples,
/// so the lattice is never materialized.
pub fn build_density(x: &[f64], responses: &[&[f64]], grid: usize, bandwidth: Bandwidth) -> Result<DensityGrid> {
    let n = x.len();
    if n < MIN_RATE_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_RATE_SAMPLES,
            got: n,
        });
    }
    if grid < 8 {
        return Err(Error::config("density grid needs at least 8 points"));
    }
    if responses.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidDimension("responses must pair with side information".into()));
    }
    if x.iter().chain(responses.iter().flat_map(|r| r.iter())).any(|v| !v.is_finite()) {
        return Err(Error::input("non-finite sample"));
    }
    let sample_mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let h = match bandwidth {
        Bandwidth::Silverman => silverman_bandwidth(x),
        Bandwidth::Fixed(h) => h,
    };
    if is_degenerate(x) || !(h > 0.0) {
        return Ok(DensityGrid {
            x: vec![sample_mean(x)],
            dx: 1.0,
            density: vec![1.0],
            cond: responses.iter().map(|r| vec![sample_mean(r)]).collect(),
            bandwidth: 0.0,
            point_mass: true,
        });
    }
    let ax = Axis::new(x, grid, h);
    let bins: Vec<(usize, f64)> = x.iter().map(|&v| ax.bin(v)).collect();
    let mut wx = vec![0.0; grid];
    for &(i, f) in &bins {
        wx[i] += 1.0 - f;
        wx[i + 1] += f;
    }
    let inv_n = 1.0 / n as f64;
    let density: Vec<f64> = ax.smooth(&wx).into_iter().map(|v| v * inv_n).collect();

    let mut cond = Vec::with_capacity(responses.len());
    for y in responses {
        let (mut a, mut b) = (vec![0.0; grid], vec![0.0; grid]);
        if is_degenerate(y) {
            let c = sample_mean(y);
            for (g, w) in wx.iter().enumerate() {
                a[g] = c * w;
                b[g] = *w;
            }
        } else {
            let hy = silverman_bandwidth(y);
            let ay = Axis::new(y, grid, hy);
            let (first, zeroth) = response_sums(&ay);
            for (&(i, f), &v) in bins.iter().zip(y.iter()) {
                let (s, fs) = ay.bin(v);
                let sy = (1.0 - fs) * first[s] + fs * first[s + 1];
                let s0 = (1.0 - fs) * zeroth[s] + fs * zeroth[s + 1];
                a[i] += (1.0 - f) * sy;
                a[i + 1] += f * sy;
                b[i] += (1.0 - f) * s0;
                b[i + 1] += f * s0;
            }
        }
        let num = ax.smooth(&a);
        let den = ax.smooth(&b);
        let fallback = sample_mean(y);
        cond.push(
            num.iter()
                .zip(&den)
                .map(|(nu, de)| if *de > 0.0 { nu / de } else { fallback })
                .collect(),
        );
    }
    Ok(DensityGrid {
        x: (0..grid).map(|i| ax.point(i)).collect(),
        dx: ax.dx,
        density,
        cond,
        bandwidth: h,
        point_mass: false,
    })
}

/// A rate together with its numerical-health counters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateOutcome {
    /// bits/s/Hz
    pub rate: f64,
    /// Grid mass whose SINR denominator was clamped.
    pub clamped_mass: f64,
    /// Samples dropped for a vanishing estimate.
    pub rejected: usize,
    pub samples: usize,
}

impl RateOutcome {
    pub fn warning(&self) -> bool {
        self.clamped_mass > WARN_FRACTION || self.rejected as f64 > WARN_FRACTION * self.samples as f64
    }
}

/// Side-information bound `sum_i p(x_i) dx log2(1 + SINR(x_i))` with
/// `SINR = rho eta_k m^2 / (1 + rho t - rho eta_k m^2)`, where
/// `m = E{Re alpha_kk | x}` and `t = E{sum_j eta_j |alpha_kj|^2 | x}`.
pub fn rate_side_info(set: &RateSampleSet, grid: usize, bandwidth: Bandwidth) -> Result<RateOutcome> {
    let re: Vec<f64> = set.alpha.iter().map(|a| a.re).collect();
    let total: Vec<f64> = set
        .alpha
        .iter()
        .zip(set.interf)
        .map(|(a, z)| set.eta_k * a.norm_sqr() + z)
        .collect();
    let d = build_density(set.x, &[&re, &total], grid, bandwidth)?;
    let rho = set.rho_d;
    let (mut rate, mut clamped) = (0.0, 0.0);
    for i in 0..d.x.len() {
        let w = d.density[i] * d.dx;
        let m = d.cond[0][i];
        let signal = rho * set.eta_k * m * m;
        let mut denom = 1.0 + rho * d.cond[1][i] - signal;
        if denom < DENOM_FLOOR {
            denom = DENOM_FLOOR;
            clamped += w;
        }
        rate += w * libm::log2(1.0 + signal / denom);
    }
    Ok(RateOutcome {
        rate,
        clamped_mass: clamped,
        rejected: 0,
        samples: set.len(),
    })
}

/// [`rate_side_info`] with the default grid and bandwidth, for side
/// information produced by the blind estimator.
pub fn rate_blind(set: &RateSampleSet) -> Result<RateOutcome> {
    rate_side_info(set, DEFAULT_GRID, Bandwidth::Silverman)
}

/// Use-and-forget bound with `x` as the gain estimate:
/// `log2(1 + |E q|^2 / (Var q + E{z / (eta_k |x|^2)} + E{1 / |x|^2} / (rho eta_k)))`
/// with `q = alpha / x` and `z` the interference power.
pub fn rate_uatf(set: &RateSampleSet) -> Result<RateOutcome> {
    let mut used = 0usize;
    let (mut q_sum, mut q_pow, mut interf, mut inv) = (C64::new(0.0, 0.0), 0.0, 0.0, 0.0);
    for ((&x, &a), &z) in set.x.iter().zip(set.alpha).zip(set.interf) {
        if !(x.abs() >= MIN_UATF_GAIN) {
            continue;
        }
        used += 1;
        let inv_x2 = 1.0 / (x * x);
        let q = a / x;
        q_sum += q;
        q_pow += q.norm_sqr();
        interf += z * inv_x2;
        inv += inv_x2;
    }
    if used == 0 {
        return Err(Error::UndefinedMetric("every gain estimate vanishes".into()));
    }
    let n = used as f64;
    let mean_q = q_sum / n;
    let var_q = (q_pow / n - mean_q.norm_sqr()).max(0.0);
    let noise = interf / n / set.eta_k + inv / n / (set.rho_d * set.eta_k);
    let rate = if noise + var_q > 0.0 {
        libm::log2(1.0 + mean_q.norm_sqr() / (var_q + noise))
    } else {
        f64::INFINITY
    };
    Ok(RateOutcome {
        rate,
        clamped_mass: 0.0,
        rejected: set.len() - used,
        samples: set.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Overhead {
    /// Payload occupies `tau_d` of `tau_c` symbols.
    None,
    /// `tau_dp` payload symbols are spent on downlink pilots.
    DownlinkPilots { tau_dp: usize },
}

/// Net throughput in bit/s for a rate `r` in bit/s/Hz.
pub fn net_throughput(r: f64, bandwidth_hz: f64, tau_c: usize, tau_d: usize, overhead: Overhead) -> Result<f64> {
    if tau_c == 0 || tau_d > tau_c {
        return Err(Error::config(format!("need 0 < tau_d <= tau_c (tau_d = {tau_d}, tau_c = {tau_c})")));
    }
    let payload = match overhead {
        Overhead::None => tau_d,
        Overhead::DownlinkPilots { tau_dp } => {
            if tau_dp >= tau_d {
                return Err(Error::config(format!("tau_dp = {tau_dp} leaves no payload in tau_d = {tau_d}")));
            }
            tau_d - tau_dp
        }
    };
    Ok(bandwidth_hz * payload as f64 / tau_c as f64 * r)
}

/// `E |alpha_hat - alpha|^2 / |E alpha|^2`.
pub fn normalized_mse(estimates: &[C64], truths: &[C64]) -> Result<f64> {
    if estimates.len() != truths.len() || truths.is_empty() {
        return Err(Error::InvalidDimension("estimates and truths must pair up and be non-empty".into()));
    }
    let n = truths.len() as f64;
    let mean = truths.iter().sum::<C64>() / n;
    if mean.norm() < 1e-12 {
        return Err(Error::UndefinedMetric("mean gain is zero".into()));
    }
    let err = estimates.iter().zip(truths).map(|(e, t)| (e - t).norm_sqr()).sum::<f64>() / n;
    Ok(err / mean.norm_sqr())
}

/// Everything needed to draw rate samples for one large-scale realization.
#[derive(Debug, Clone)]
pub struct RatePlan<'a> {
    pub link: &'a LinkConfig,
    pub eta: &'a [f64],
    pub rho_d: f64,
    pub stats: &'a SideStats,
    pub tau_d: usize,
    pub tau_dp: usize,
    pub samples: usize,
}

/// Shared realizations with the side information of every estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSamples {
    pub eta: Vec<f64>,
    pub rho_d: f64,
    /// `[k][n]`
    pub alpha: Vec<Vec<C64>>,
    pub interf: Vec<Vec<f64>>,
    pub blind: Vec<Vec<f64>>,
    pub statistical: Vec<Vec<f64>>,
    pub pilot: Vec<Vec<f64>>,
    pub genie: Vec<Vec<f64>>,
    pub resamples: usize,
}

impl RateSamples {
    pub fn users(&self) -> usize {
        self.eta.len()
    }

    pub fn set(&self, method: GainMethod, k: usize) -> RateSampleSet<'_> {
        let x = match method {
            GainMethod::Blind => &self.blind[k],
            GainMethod::Statistical => &self.statistical[k],
            GainMethod::DlPilot => &self.pilot[k],
            GainMethod::Genie => &self.genie[k],
        };
        RateSampleSet {
            x,
            alpha: &self.alpha[k],
            interf: &self.interf[k],
            eta_k: self.eta[k],
            rho_d: self.rho_d,
        }
    }
}

/// Draws `plan.samples` intervals and records, per user, the true gain, the
/// interference power and the side information of each estimator:
///
/// * blind: the estimate from the payload block with the current symbol left
///   out,
/// * statistical: `|E alpha_kk|`,
/// * dl-pilot: the real part of the pilot LMMSE estimate,
/// * genie: `Re alpha_kk`.
pub fn draw_rate_samples(plan: &RatePlan, stream: &mut RandomStream) -> Result<RateSamples> {
    let k = plan.link.users();
    if plan.eta.len() != k || plan.stats.users() != k {
        return Err(Error::InvalidDimension("eta and side statistics must have one entry per user".into()));
    }
    if plan.samples < MIN_RATE_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_RATE_SAMPLES,
            got: plan.samples,
        });
    }
    let loo = LooXiSampler::new(plan.tau_d)?;
    let pilots = dft_pilots(plan.tau_dp, k)?;
    let real = || vec![Vec::with_capacity(plan.samples); k];
    let mut out = RateSamples {
        eta: plan.eta.to_vec(),
        rho_d: plan.rho_d,
        alpha: vec![Vec::with_capacity(plan.samples); k],
        interf: real(),
        blind: real(),
        statistical: real(),
        pilot: real(),
        genie: real(),
        resamples: 0,
    };
    let st = plan.stats;
    for _ in 0..plan.samples {
        let r = plan.link.realize(stream)?;
        out.resamples += r.resamples;
        let g: &EffectiveGains = &r.gains;
        let z = dl_pilot_observation(g, plan.eta, plan.rho_d, &pilots, stream)?;
        for u in 0..k {
            let a = g.get(u, u);
            let xi = loo.sample(g, plan.eta, plan.rho_d, u, stream);
            out.alpha[u].push(a);
            out.interf[u].push(g.interference(plan.eta, u));
            out.blind[u].push(blind_estimate(
                xi,
                plan.eta[u],
                plan.rho_d,
                st.mean_interf[u].value,
                st.mean_abs_gain[u].value,
            ));
            out.statistical[u].push(st.mean_gain[u].norm());
            let ahat = dl_pilot_lmmse(z[u], plan.eta[u], plan.rho_d, plan.tau_dp, st.mean_gain[u], st.var_gain[u]);
            out.pilot[u].push(ahat.re);
            out.genie[u].push(a.re);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomStream;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut s = RandomStream::new(seed, 0);
        (0..n).map(|_| s.normal()).collect()
    }

    #[test]
    fn constant_side_info_is_point_mass() {
        let x = vec![2.5; 1000];
        let y: Vec<f64> = normals(1000, 1).into_iter().map(|v| 3.0 + v).collect();
        let d = build_density(&x, &[&y], 256, Bandwidth::Silverman).unwrap();
        assert!(d.point_mass);
        assert_eq!(d.x, vec![2.5]);
        let mean = y.iter().sum::<f64>() / 1000.0;
        assert!((d.cond[0][0] - mean).abs() < 1e-12);
        assert_eq!(d.mass(), 1.0);
    }

    #[test]
    fn constant_response_is_recovered_everywhere() {
        let x = normals(2000, 2);
        let y = vec![1.75; 2000];
        let d = build_density(&x, &[&y], 128, Bandwidth::Silverman).unwrap();
        assert!(d.cond[0].iter().all(|c| (c - 1.75).abs() < 1e-12));
    }

    #[test]
    fn density_normalizes() {
        for (seed, n) in [(3, 1000), (4, 10_000)] {
            let x: Vec<f64> = normals(n, seed).into_iter().map(libm::exp).collect();
            let d = build_density(&x, &[], 256, Bandwidth::Silverman).unwrap();
            assert!((d.mass() - 1.0).abs() < 0.01, "{}", d.mass());
            assert!(d.density.iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn independent_response_has_flat_conditional_mean() {
        let x = normals(10_000, 5);
        let y: Vec<f64> = normals(10_000, 6).into_iter().map(|v| 5.0 + v).collect();
        let d = build_density(&x, &[&y], 256, Bandwidth::Silverman).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let mut sorted = x.clone();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = (quantile_sorted(&sorted, 0.01), quantile_sorted(&sorted, 0.99));
        for (xi, c) in d.x.iter().zip(&d.cond[0]) {
            if (lo..=hi).contains(xi) {
                assert!((c / mean - 1.0).abs() < 0.05, "{xi}: {c}");
            }
        }
    }

    #[test]
    fn correlated_gaussian_conditional_slope() {
        let n = 10_000;
        let (sx, sy, r) = (2.0, 0.5, 0.8);
        let u = normals(n, 7);
        let v = normals(n, 8);
        let x: Vec<f64> = u.iter().map(|a| sx * a).collect();
        let y: Vec<f64> = u
            .iter()
            .zip(&v)
            .map(|(a, b)| 1.0 + sy * (r * a + libm::sqrt(1.0 - r * r) * b))
            .collect();
        let d = build_density(&x, &[&y], 256, Bandwidth::Silverman).unwrap();
        let pts: Vec<(f64, f64)> = d
            .x
            .iter()
            .zip(&d.cond[0])
            .filter(|(xi, _)| xi.abs() <= 1.5 * sx)
            .map(|(a, b)| (*a, *b))
            .collect();
        let np = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / np;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / np;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let slope = sxy / sxx;
        let want = r * sy / sx;
        assert!((slope / want - 1.0).abs() < 0.1, "{slope} vs {want}");
    }

    #[test]
    fn factored_sums_match_full_lattice() {
        let n = 1000;
        let grid = 48;
        let x: Vec<f64> = normals(n, 9);
        let y: Vec<f64> = x.iter().zip(normals(n, 10)).map(|(a, b)| a * a + 0.3 * b).collect();
        let d = build_density(&x, &[&y], grid, Bandwidth::Silverman).unwrap();

        // Materialize p(y_j, x_i) from bilinearly binned counts.
        let ax = Axis::new(&x, grid, silverman_bandwidth(&x));
        let ay = Axis::new(&y, grid, silverman_bandwidth(&y));
        let mut counts = vec![vec![0.0; grid]; grid];
        for (&a, &b) in x.iter().zip(&y) {
            let (i, f) = ax.bin(a);
            let (j, g) = ay.bin(b);
            counts[i][j] += (1.0 - f) * (1.0 - g);
            counts[i + 1][j] += f * (1.0 - g);
            counts[i][j + 1] += (1.0 - f) * g;
            counts[i + 1][j + 1] += f * g;
        }
        for i in 0..grid {
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..grid {
                let mut p = 0.0;
                for gi in 0..grid {
                    for gj in 0..grid {
                        p += ax.k(i, gi) * ay.k(j, gj) * counts[gi][gj];
                    }
                }
                num += ay.point(j) * p * ay.dx;
                den += p * ay.dx;
            }
            let full = num / den;
            assert!((full - d.cond[0][i]).abs() < 1e-9 * full.abs().max(1.0), "{i}: {full} vs {}", d.cond[0][i]);
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(matches!(
            build_density(&[1.0; 999], &[], 256, Bandwidth::Silverman),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    fn deterministic_set<'a>(x: &'a [f64], a: &'a [C64], z: &'a [f64]) -> RateSampleSet<'a> {
        RateSampleSet::new(x, a, z, 0.5, 10.0).unwrap()
    }

    #[test]
    fn deterministic_gain_rates() {
        let c = 1.3;
        let x = vec![c; 1000];
        let a = vec![C64::new(c, 0.0); 1000];
        let z = vec![0.0; 1000];
        let want = libm::log2(1.0 + 10.0 * 0.5 * c * c);
        let s = deterministic_set(&x, &a, &z);
        assert!((rate_blind(&s).unwrap().rate - want).abs() < 1e-12);
        let u = rate_uatf(&s).unwrap();
        assert!((u.rate - want).abs() < 1e-12);
        assert_eq!(u.rejected, 0);
    }

    #[test]
    fn uatf_rejects_vanishing_estimates() {
        let mut x = vec![1.0; 1000];
        x[0] = 0.0;
        x[1] = 1e-12;
        let a = vec![C64::new(1.0, 0.0); 1000];
        let z = vec![0.1; 1000];
        let r = rate_uatf(&deterministic_set(&x, &a, &z)).unwrap();
        assert_eq!(r.rejected, 2);
        assert!(!r.warning());
        x.iter_mut().take(20).for_each(|v| *v = 0.0);
        assert!(rate_uatf(&deterministic_set(&x, &a, &z)).unwrap().warning());
    }

    #[test]
    fn net_throughput_examples() {
        assert!((net_throughput(4.0, 20e6, 200, 100, Overhead::None).unwrap() - 40e6).abs() < 1e-6);
        let p = net_throughput(4.0, 20e6, 200, 100, Overhead::DownlinkPilots { tau_dp: 10 }).unwrap();
        assert!((p - 36e6).abs() < 1e-6);
        assert_eq!(net_throughput(0.0, 20e6, 200, 100, Overhead::None).unwrap(), 0.0);
        assert!(matches!(
            net_throughput(1.0, 1.0, 200, 100, Overhead::DownlinkPilots { tau_dp: 100 }),
            Err(Error::InvalidConfig(_))
        ));
        assert!(net_throughput(1.0, 1.0, 100, 200, Overhead::None).is_err());
    }

    #[test]
    fn normalized_mse_examples() {
        let t = vec![C64::new(1.0, 0.5), C64::new(2.0, -0.1)];
        assert_eq!(normalized_mse(&t, &t).unwrap(), 0.0);
        let c = vec![C64::new(3.0, 0.0); 4];
        assert!((normalized_mse(&[C64::new(0.0, 0.0); 4], &c).unwrap() - 1.0).abs() < 1e-15);
        let zero = [C64::new(1.0, 0.0), C64::new(-1.0, 0.0)];
        assert!(matches!(normalized_mse(&zero, &zero), Err(Error::UndefinedMetric(_))));
    }
}
