//! One coherence interval end to end: channel, uplink estimate, precoder and
//! effective gains.

use alloc::format;
use alloc::vec::Vec;

use crate::channel::{ChannelGenerator, ChannelModel, ChannelRealization, LargeScaleProfile};
use crate::downlink::{effective_gains, EffectiveGains};
use crate::numerics::RandomStream;
use crate::precoding::{build_precoder, Normalization, PrecoderSet, Processing};
use crate::uplink::{estimate_variance, lmmse_estimate, perfect_csi, UplinkEstimate};
use crate::{Error, Result};

/// Ill-conditioned ZF draws are redrawn at most this many times in a row.
pub const MAX_RESAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CsiMode {
    Perfect,
    Lmmse { tau_up: usize, rho_u: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub antennas: usize,
    pub model: ChannelModel,
    pub beta: LargeScaleProfile,
    pub csi: CsiMode,
    pub processing: Processing,
    pub normalization: Normalization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkRealization {
    pub channel: ChannelRealization,
    pub estimate: UplinkEstimate,
    pub precoder: PrecoderSet,
    pub gains: EffectiveGains,
    /// Ill-conditioned draws discarded before this one.
    pub resamples: usize,
}

impl LinkConfig {
    pub fn users(&self) -> usize {
        self.beta.users()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.users();
        if self.antennas == 0 {
            return Err(Error::config("M >= 1"));
        }
        if self.processing == Processing::Zf && self.antennas <= k {
            return Err(Error::config(format!("ZF needs M > K (M = {}, K = {k})", self.antennas)));
        }
        if let CsiMode::Lmmse { tau_up, rho_u } = self.csi {
            if tau_up < k {
                return Err(Error::config(format!("uplink pilots need tau_up >= K ({tau_up} < {k})")));
            }
            if !(rho_u >= 0.0) || !rho_u.is_finite() {
                return Err(Error::config("rho_u must be finite and nonnegative"));
            }
        }
        if self.processing == Processing::Zf && self.normalization == Normalization::LongTerm {
            return Err(Error::Unsupported(
                "long-term normalized ZF has no finite normalizer in general".into(),
            ));
        }
        Ok(())
    }

    /// Per-entry variance of the uplink estimate of every user.
    pub fn gamma(&self) -> Vec<f64> {
        match self.csi {
            CsiMode::Perfect => self.beta.beta().to_vec(),
            CsiMode::Lmmse { tau_up, rho_u } => self
                .beta
                .beta()
                .iter()
                .map(|&b| estimate_variance(b, tau_up, rho_u))
                .collect(),
        }
    }

    /// Draws one interval. ZF draws whose Gram matrix is ill-conditioned are
    /// redrawn and counted.
    pub fn realize(&self, stream: &mut RandomStream) -> Result<LinkRealization> {
        let mut resamples = 0;
        loop {
            let channel = self.model.generate(self.antennas, &self.beta, stream)?;
            let estimate = match self.csi {
                CsiMode::Perfect => perfect_csi(&channel, &self.beta)?,
                CsiMode::Lmmse { tau_up, rho_u } => lmmse_estimate(&channel, &self.beta, tau_up, rho_u, stream)?,
            };
            match build_precoder(&estimate, self.processing, self.normalization) {
                Ok(precoder) => {
                    let gains = effective_gains(&channel, &precoder)?;
                    return Ok(LinkRealization {
                        channel,
                        estimate,
                        precoder,
                        gains,
                        resamples,
                    });
                }
                Err(Error::IllConditioned(_) | Error::SingularMatrix | Error::DegenerateEstimate(_))
                    if resamples < MAX_RESAMPLES =>
                {
                    resamples += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}
