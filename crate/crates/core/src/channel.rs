//! Small-scale fading (i.i.d. Rayleigh and keyhole), large-scale fading on an
//! annulus cell, and channel-hardening measures.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::numerics::{norm_sqr, CMat, RandomStream, C64};
use crate::stats::{quantile, Moments};
use crate::{Error, Result};

/// Per-user large-scale fading gains (linear power).
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleProfile {
    beta: Vec<f64>,
    distances: Option<Vec<f64>>,
}

impl LargeScaleProfile {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::InvalidDimension("need at least one user".into()));
        }
        if let Some((k, b)) = beta.iter().enumerate().find(|(_, b)| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::input(format!("beta[{k}] = {b} must be positive")));
        }
        Ok(LargeScaleProfile { beta, distances: None })
    }

    pub fn uniform(users: usize, beta: f64) -> Result<Self> {
        Self::new(vec![beta; users])
    }

    pub fn with_distances(mut self, distances: Vec<f64>) -> Result<Self> {
        if distances.len() != self.beta.len() {
            return Err(Error::InvalidDimension("one distance per user".into()));
        }
        self.distances = Some(distances);
        Ok(self)
    }

    pub fn users(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn distances(&self) -> Option<&[f64]> {
        self.distances.as_deref()
    }

    /// Same profile with every gain multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut p = Self::new(self.beta.iter().map(|b| b * factor).collect())?;
        p.distances = self.distances.clone();
        Ok(p)
    }
}

/// Deterministic keyhole gains `c_1..c_n`, shared by every user; each user
/// still draws its own independent keyholes.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyholeSpec {
    gains: Vec<C64>,
}

impl KeyholeSpec {
    /// Validates `sum |c_i|^2 = 1` to within `1e-9`.
    pub fn new(gains: Vec<C64>) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::InvalidSpec("at least one keyhole".into()));
        }
        let total = norm_sqr(&gains);
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSpec(format!("sum |c_i|^2 = {total}, expected 1")));
        }
        Ok(KeyholeSpec { gains })
    }

    /// `n` keyholes with equal gains `1/sqrt(n)`.
    pub fn equal(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSpec("at least one keyhole".into()));
        }
        let c = 1.0 / libm::sqrt(n as f64);
        Self::new(vec![C64::new(c, 0.0); n])
    }

    pub fn keyholes(&self) -> usize {
        self.gains.len()
    }

    pub fn gains(&self) -> &[C64] {
        &self.gains
    }

    /// `sum |c_i|^4`, the limit of the hardening ratio as `M` grows.
    pub fn fourth_power_sum(&self) -> f64 {
        self.gains.iter().map(|c| c.norm_sqr() * c.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelTag {
    Rayleigh,
    Keyhole,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    Rayleigh,
    Keyhole(KeyholeSpec),
}

impl ChannelModel {
    pub fn tag(&self) -> ModelTag {
        match self {
            ChannelModel::Rayleigh => ModelTag::Rayleigh,
            ChannelModel::Keyhole(_) => ModelTag::Keyhole,
        }
    }
}

/// Source of `M x K` channel matrices. Lets the Monte Carlo hardening
/// estimator run on fixtures as well as on the fading models.
pub trait ChannelGenerator {
    fn generate(&self, antennas: usize, beta: &LargeScaleProfile, stream: &mut RandomStream) -> Result<ChannelRealization>;
}

impl ChannelGenerator for ChannelModel {
    fn generate(&self, antennas: usize, beta: &LargeScaleProfile, stream: &mut RandomStream) -> Result<ChannelRealization> {
        match self {
            ChannelModel::Rayleigh => gen_rayleigh(antennas, beta, stream),
            ChannelModel::Keyhole(spec) => gen_keyhole(antennas, beta, spec, stream),
        }
    }
}

/// One coherence interval of user channels; column `k` is `g_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub g: CMat,
    pub model: ModelTag,
}

impl ChannelRealization {
    pub fn antennas(&self) -> usize {
        self.g.rows()
    }

    pub fn users(&self) -> usize {
        self.g.cols()
    }
}

/// `g_k = sqrt(beta_k) h_k` with `h_k ~ CN(0, I_M)`.
pub fn gen_rayleigh(antennas: usize, beta: &LargeScaleProfile, stream: &mut RandomStream) -> Result<ChannelRealization> {
    let k = beta.users();
    let mut g = CMat::zeros(antennas, k)?;
    for (u, b) in beta.beta().iter().enumerate() {
        let scale = libm::sqrt(*b);
        let col = g.col_mut(u);
        stream.fill_cn(col);
        for z in col.iter_mut() {
            *z *= scale;
        }
    }
    Ok(ChannelRealization {
        g,
        model: ModelTag::Rayleigh,
    })
}

/// `g_k = sqrt(beta_k) sum_j c_j a_j b_j` with scalar `a_j ~ CN(0, 1)` and
/// `b_j ~ CN(0, I_M)`, independent across keyholes and users.
pub fn gen_keyhole(
    antennas: usize,
    beta: &LargeScaleProfile,
    spec: &KeyholeSpec,
    stream: &mut RandomStream,
) -> Result<ChannelRealization> {
    let k = beta.users();
    let mut g = CMat::zeros(antennas, k)?;
    let mut b = vec![C64::new(0.0, 0.0); antennas];
    for (u, bk) in beta.beta().iter().enumerate() {
        let scale = libm::sqrt(*bk);
        let col = g.col_mut(u);
        for c in spec.gains() {
            let w = stream.cn() * c * scale;
            stream.fill_cn(&mut b);
            for (z, bm) in col.iter_mut().zip(&b) {
                *z += bm * w;
            }
        }
    }
    Ok(ChannelRealization {
        g,
        model: ModelTag::Keyhole,
    })
}

/// `Var ||g||^2 / (E ||g||^2)^2` in closed form.
pub fn hardening_ratio_closed(model: &ChannelModel, antennas: usize) -> Result<f64> {
    if antennas == 0 {
        return Err(Error::InvalidDimension("M >= 1".into()));
    }
    let inv_m = 1.0 / antennas as f64;
    Ok(match model {
        ChannelModel::Rayleigh => inv_m,
        ChannelModel::Keyhole(spec) => (1.0 + inv_m) * spec.fourth_power_sum() + inv_m,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardeningEstimate {
    pub ratio: f64,
    pub std_err: f64,
    pub trials: usize,
}

impl HardeningEstimate {
    pub fn sigma_distance(&self, target: f64) -> f64 {
        let d = (self.ratio - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_err
        }
    }
}

/// Monte Carlo hardening ratio for one user with large-scale gain `beta_k`.
///
/// The standard error comes from the delta method on the first two sample
/// moments of `X = ||g||^2`.
pub fn hardening_ratio_mc<G: ChannelGenerator + ?Sized>(
    generator: &G,
    antennas: usize,
    beta_k: f64,
    trials: usize,
    stream: &mut RandomStream,
) -> Result<HardeningEstimate> {
    if trials < 100 {
        return Err(Error::InsufficientSamples { needed: 100, got: trials });
    }
    let profile = LargeScaleProfile::new(vec![beta_k])?;
    let mut x = Vec::with_capacity(trials);
    for _ in 0..trials {
        let ch = generator.generate(antennas, &profile, stream)?;
        x.push(norm_sqr(ch.g.col(0)));
    }
    Ok(ratio_with_delta_std_err(&x))
}

fn ratio_with_delta_std_err(x: &[f64]) -> HardeningEstimate {
    let n = x.len() as f64;
    let m1 = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| v * v).sum::<f64>() / n;
    let ratio = m2 / (m1 * m1) - 1.0;
    // gradient of m2/m1^2 w.r.t. (m1, m2)
    let d1 = -2.0 * m2 / (m1 * m1 * m1);
    let d2 = 1.0 / (m1 * m1);
    let mut infl = Moments::new();
    for v in x {
        infl.push(d1 * (v - m1) + d2 * (v * v - m2));
    }
    let std_err = libm::sqrt(infl.variance() / n);
    HardeningEstimate {
        ratio: ratio.max(0.0),
        std_err,
        trials: x.len(),
    }
}

/// Monte Carlo `E |g_k^H g_j / M|^2` for two distinct users.
pub fn favorable_propagation_mc<G: ChannelGenerator + ?Sized>(
    generator: &G,
    antennas: usize,
    trials: usize,
    stream: &mut RandomStream,
) -> Result<f64> {
    let profile = LargeScaleProfile::uniform(2, 1.0)?;
    let mut acc = Moments::new();
    for _ in 0..trials {
        let ch = generator.generate(antennas, &profile, stream)?;
        let ip = crate::numerics::dot_h(ch.g.col(0), ch.g.col(1)) / antennas as f64;
        acc.push(ip.norm_sqr());
    }
    Ok(acc.mean())
}

/// Annulus cell with log-distance path loss and log-normal shadowing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub r_min: f64,
    pub r_max: f64,
    pub pathloss_exponent: f64,
    pub shadow_sigma_db: f64,
    pub pl0: f64,
}

impl CellGeometry {
    pub fn new(r_min: f64, r_max: f64, pathloss_exponent: f64, shadow_sigma_db: f64, pl0: f64) -> Result<Self> {
        let g = CellGeometry {
            r_min,
            r_max,
            pathloss_exponent,
            shadow_sigma_db,
            pl0,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_min < self.r_max) {
            return Err(Error::config(format!("need 0 < r_min < r_max, got {} / {}", self.r_min, self.r_max)));
        }
        if !(self.pathloss_exponent > 2.0) {
            return Err(Error::config("path-loss exponent must exceed 2"));
        }
        if !(self.shadow_sigma_db >= 0.0) {
            return Err(Error::config("shadowing deviation must be nonnegative"));
        }
        if !(self.pl0 > 0.0) {
            return Err(Error::config("PL0 must be positive"));
        }
        Ok(())
    }

    pub fn with_pl0(mut self, pl0: f64) -> Self {
        self.pl0 = pl0;
        self
    }

    /// Large-scale gain at distance `d` for a standard-normal shadowing draw.
    /// Distance attenuates: `PL0 (d / r_min)^(-exponent) 10^(sigma z / 10)`.
    pub fn beta_at(&self, distance: f64, shadow_normal: f64) -> f64 {
        let path = libm::pow(distance / self.r_min, -self.pathloss_exponent);
        let shadow = libm::exp10(self.shadow_sigma_db * shadow_normal / 10.0);
        self.pl0 * path * shadow
    }

    /// Area-uniform radius on `[r_min, r_max]`.
    pub fn sample_radius(&self, stream: &mut RandomStream) -> f64 {
        let (a, b) = (self.r_min * self.r_min, self.r_max * self.r_max);
        libm::sqrt(a + (b - a) * stream.uniform())
    }
}

/// Applies the drop-weakest rule to `K + 1` placed users.
///
/// `placements` holds `(distance, shadow_normal)` per candidate user.
pub fn large_scale_from_placements(geom: &CellGeometry, placements: &[(f64, f64)]) -> Result<LargeScaleProfile> {
    if placements.len() < 2 {
        return Err(Error::input("need K + 1 >= 2 candidate users"));
    }
    let mut users: Vec<(f64, f64)> = placements.iter().map(|&(d, z)| (geom.beta_at(d, z), d)).collect();
    let weakest = users
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .map(|(i, _)| i)
        .unwrap_or(0);
    users.remove(weakest);
    let (beta, dist): (Vec<f64>, Vec<f64>) = users.into_iter().unzip();
    LargeScaleProfile::new(beta)?.with_distances(dist)
}

/// Drops `K + 1` users uniformly on the annulus and keeps the `K` strongest.
pub fn gen_large_scale(users: usize, geom: &CellGeometry, stream: &mut RandomStream) -> Result<LargeScaleProfile> {
    if users == 0 {
        return Err(Error::InvalidDimension("K >= 1".into()));
    }
    geom.validate()?;
    let placements: Vec<(f64, f64)> = (0..=users)
        .map(|_| {
            let d = geom.sample_radius(stream);
            (d, stream.normal())
        })
        .collect();
    large_scale_from_placements(geom, &placements)
}

/// Median large-scale gain of a user at the cell edge (`d = r_max`), by
/// Monte Carlo over `draws` shadowing realizations.
pub fn median_edge_beta(geom: &CellGeometry, draws: usize, stream: &mut RandomStream) -> f64 {
    let samples: Vec<f64> = (0..draws.max(1)).map(|_| geom.beta_at(geom.r_max, stream.normal())).collect();
    quantile(&samples, 0.5)
}

/// `PL0` such that `rho_d * median(edge beta)` equals the target SNR.
pub fn calibrate_pl0(geom: &CellGeometry, rho_d: f64, target_snr_db: f64, stream: &mut RandomStream) -> Result<f64> {
    if !target_snr_db.is_finite() || !(rho_d > 0.0) {
        return Err(Error::input("target SNR must be finite and rho_d positive"));
    }
    let unit = geom.with_pl0(1.0);
    let edge = median_edge_beta(&unit, 100_000, stream);
    Ok(libm::exp10(target_snr_db / 10.0) / (rho_d * edge))
}
