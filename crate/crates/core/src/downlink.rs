//! Downlink payload transmission: effective gains and received sample blocks.

use alloc::format;
use alloc::vec::Vec;

use crate::channel::ChannelRealization;
use crate::numerics::{CMat, RandomStream, C64};
use crate::precoding::PrecoderSet;
use crate::{Error, Result};

/// `alpha[(k, j)] = g_k^H a_j`, the gain user `k` sees on the stream for `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGains {
    pub alpha: CMat,
}

impl EffectiveGains {
    pub fn users(&self) -> usize {
        self.alpha.rows()
    }

    #[inline]
    pub fn get(&self, k: usize, j: usize) -> C64 {
        self.alpha[(k, j)]
    }

    /// `sum_{j != k} eta_j |alpha_kj|^2`.
    pub fn interference(&self, eta: &[f64], k: usize) -> f64 {
        (0..self.users())
            .filter(|&j| j != k)
            .map(|j| eta[j] * self.alpha[(k, j)].norm_sqr())
            .sum()
    }

    /// `sum_j eta_j |alpha_kj|^2`, including the desired stream.
    pub fn total_power(&self, eta: &[f64], k: usize) -> f64 {
        (0..self.users()).map(|j| eta[j] * self.alpha[(k, j)].norm_sqr()).sum()
    }
}

pub fn effective_gains(channel: &ChannelRealization, precoder: &PrecoderSet) -> Result<EffectiveGains> {
    if precoder.a.cols() != channel.users() {
        return Err(Error::InvalidDimension("one precoder per user".into()));
    }
    Ok(EffectiveGains {
        alpha: channel.g.h_mul(&precoder.a)?,
    })
}

/// Payload symbol alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SymbolAlphabet {
    /// i.i.d. CN(0, 1).
    #[default]
    Gaussian,
    /// Unit-energy QPSK.
    Qpsk,
}

impl SymbolAlphabet {
    #[inline]
    fn draw(self, stream: &mut RandomStream) -> C64 {
        match self {
            SymbolAlphabet::Gaussian => stream.cn(),
            SymbolAlphabet::Qpsk => {
                let bits = stream.next_u64();
                let h = core::f64::consts::FRAC_1_SQRT_2;
                C64::new(if bits & 1 == 0 { h } else { -h }, if bits & 2 == 0 { h } else { -h })
            }
        }
    }
}

/// Received samples of every user over one payload block.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBlock {
    /// `K x tau_d`; row `k` is user `k`.
    pub y: CMat,
    /// Transmitted symbols, `K x tau_d`.
    pub s: CMat,
    /// Receiver noise, `K x tau_d`.
    pub noise: CMat,
    pub tau_d: usize,
    pub rho_d: f64,
}

impl ReceivedBlock {
    pub fn users(&self) -> usize {
        self.y.rows()
    }

    pub fn sample(&self, k: usize, n: usize) -> C64 {
        self.y[(k, n)]
    }
}

/// `y_k(n) = sum_j sqrt(rho_d eta_j) alpha_kj s_j(n) + w_k(n)` with unit-power
/// symbols and CN(0, 1) noise.
pub fn transmit_block(
    gains: &EffectiveGains,
    eta: &[f64],
    rho_d: f64,
    tau_d: usize,
    alphabet: SymbolAlphabet,
    stream: &mut RandomStream,
) -> Result<ReceivedBlock> {
    let k = gains.users();
    if tau_d == 0 {
        return Err(Error::config("tau_d >= 1"));
    }
    if eta.len() != k {
        return Err(Error::InvalidDimension(format!("{} power coefficients for {k} users", eta.len())));
    }
    if !(rho_d >= 0.0) {
        return Err(Error::input("rho_d must be nonnegative"));
    }
    let amp: Vec<f64> = eta.iter().map(|e| libm::sqrt(rho_d * e)).collect();
    let mut s = CMat::zeros(k, tau_d)?;
    let mut noise = CMat::zeros(k, tau_d)?;
    let mut y = CMat::zeros(k, tau_d)?;
    for n in 0..tau_d {
        for z in s.col_mut(n) {
            *z = alphabet.draw(stream);
        }
        stream.fill_cn(noise.col_mut(n));
        for u in 0..k {
            let mut acc = noise[(u, n)];
            for j in 0..k {
                acc += gains.alpha[(u, j)] * (s[(j, n)] * amp[j]);
            }
            y[(u, n)] = acc;
        }
    }
    Ok(ReceivedBlock {
        y,
        s,
        noise,
        tau_d,
        rho_d,
    })
}
