//! Experiment configuration, read from TOML.

use std::path::Path;

use blindmimo_core::channel::{CellGeometry, ChannelModel, KeyholeSpec};
use blindmimo_core::downlink::SymbolAlphabet;
use blindmimo_core::estimation::GainMethod;
use blindmimo_core::link::CsiMode;
use blindmimo_core::precoding::{Normalization, Processing};
use blindmimo_core::C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcessingName {
    Mr,
    Zf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationName {
    ShortTerm,
    LongTerm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerControl {
    Equal,
    Maxmin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsiName {
    Lmmse,
    Perfect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphabetName {
    Gaussian,
    Qpsk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorName {
    Blind,
    Statistical,
    DlPilot,
    Genie,
}

impl EstimatorName {
    pub fn method(self) -> GainMethod {
        match self {
            EstimatorName::Blind => GainMethod::Blind,
            EstimatorName::Statistical => GainMethod::Statistical,
            EstimatorName::DlPilot => GainMethod::DlPilot,
            EstimatorName::Genie => GainMethod::Genie,
        }
    }
}

/// Monte Carlo budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Trials {
    /// Large-scale (user drop) realizations for throughput experiments.
    pub large_scale: usize,
    /// Small-scale realizations per sweep point in MSE and hardening runs.
    pub small_scale: usize,
    /// Rate samples `N` per large-scale draw.
    pub rate_samples: usize,
    /// Realizations behind the side statistics of each large-scale draw.
    pub side_stats: usize,
    /// Channel draws per hardening-ratio estimate.
    pub hardening: usize,
}

impl Default for Trials {
    fn default() -> Self {
        Trials {
            large_scale: 200,
            small_scale: 2_000,
            rate_samples: 10_000,
            side_stats: 10_000,
            hardening: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    pub r_min: f64,
    pub r_max: f64,
    pub pathloss_exponent: f64,
    pub shadow_sigma_db: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            r_min: 100.0,
            r_max: 1000.0,
            pathloss_exponent: 3.8,
            shadow_sigma_db: 8.0,
        }
    }
}

/// Sweep axes used by the hardening and MSE experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub antennas: Vec<usize>,
    pub keyholes: Vec<usize>,
    pub snr_d_db: Vec<f64>,
    pub tau_d: Vec<usize>,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep {
            antennas: vec![50, 100, 200, 300],
            keyholes: vec![1, 2, 4],
            snr_d_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
            tau_d: vec![100, 500],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// `M`
    pub antennas: usize,
    /// `K`
    pub users: usize,
    pub tau_c: usize,
    /// Defaults to `K`.
    pub tau_up: Option<usize>,
    /// Defaults to `tau_c / 2`.
    pub tau_d: Option<usize>,
    /// Defaults to `K`.
    pub tau_dp: Option<usize>,
    pub snr_d_db: f64,
    /// Defaults to `snr_d_db - 10` (0 dB in the MSE experiment).
    pub snr_u_db: Option<f64>,
    /// `"rayleigh"`, `"keyhole"` or `"keyhole:<n>"`.
    pub model: String,
    /// Real keyhole gains; overrides the equal-gain default of a keyhole model.
    pub keyhole_gains: Option<Vec<f64>>,
    pub processing: ProcessingName,
    pub normalization: NormalizationName,
    pub power_control: PowerControl,
    pub csi: CsiName,
    pub alphabet: AlphabetName,
    pub estimators: Vec<EstimatorName>,
    pub bandwidth_hz: f64,
    pub trials: Trials,
    pub geometry: Geometry,
    pub sweep: Sweep,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            antennas: 100,
            users: 10,
            tau_c: 200,
            tau_up: None,
            tau_d: None,
            tau_dp: None,
            snr_d_db: 5.0,
            snr_u_db: None,
            model: "rayleigh".into(),
            keyhole_gains: None,
            processing: ProcessingName::Mr,
            normalization: NormalizationName::ShortTerm,
            power_control: PowerControl::Maxmin,
            csi: CsiName::Lmmse,
            alphabet: AlphabetName::Gaussian,
            estimators: vec![
                EstimatorName::Blind,
                EstimatorName::Statistical,
                EstimatorName::DlPilot,
                EstimatorName::Genie,
            ],
            bandwidth_hz: 20e6,
            trials: Trials::default(),
            geometry: Geometry::default(),
            sweep: Sweep::default(),
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn tau_up(&self) -> usize {
        self.tau_up.unwrap_or(self.users)
    }

    pub fn tau_d(&self) -> usize {
        self.tau_d.unwrap_or(self.tau_c / 2)
    }

    pub fn tau_dp(&self) -> usize {
        self.tau_dp.unwrap_or(self.users)
    }

    pub fn snr_u_db(&self) -> f64 {
        self.snr_u_db.unwrap_or(self.snr_d_db - 10.0)
    }

    pub fn processing(&self) -> Processing {
        match self.processing {
            ProcessingName::Mr => Processing::Mr,
            ProcessingName::Zf => Processing::Zf,
        }
    }

    pub fn normalization(&self) -> Normalization {
        match self.normalization {
            NormalizationName::ShortTerm => Normalization::ShortTerm,
            NormalizationName::LongTerm => Normalization::LongTerm,
        }
    }

    pub fn alphabet(&self) -> SymbolAlphabet {
        match self.alphabet {
            AlphabetName::Gaussian => SymbolAlphabet::Gaussian,
            AlphabetName::Qpsk => SymbolAlphabet::Qpsk,
        }
    }

    /// CSI mode for an uplink SNR given in linear scale.
    pub fn csi(&self, rho_u: f64) -> CsiMode {
        match self.csi {
            CsiName::Perfect => CsiMode::Perfect,
            CsiName::Lmmse => CsiMode::Lmmse {
                tau_up: self.tau_up(),
                rho_u,
            },
        }
    }

    pub fn channel_model(&self) -> Result<ChannelModel, SimError> {
        let model = self.model.trim().to_ascii_lowercase();
        let keyholes = match model.as_str() {
            "rayleigh" => {
                if self.keyhole_gains.is_some() {
                    return Err(SimError::Config("keyhole_gains given for a Rayleigh model".into()));
                }
                return Ok(ChannelModel::Rayleigh);
            }
            "keyhole" => None,
            other => match other.strip_prefix("keyhole:") {
                Some(n) => Some(
                    n.trim()
                        .parse::<usize>()
                        .map_err(|_| SimError::Config(format!("bad keyhole count in {other:?}")))?,
                ),
                None => return Err(SimError::Config(format!("unknown channel model {other:?}"))),
            },
        };
        let spec = match (&self.keyhole_gains, keyholes) {
            (Some(g), n) => {
                if n.is_some_and(|n| n != g.len()) {
                    return Err(SimError::Config("keyhole count disagrees with keyhole_gains".into()));
                }
                KeyholeSpec::new(g.iter().map(|&c| C64::new(c, 0.0)).collect())?
            }
            (None, n) => KeyholeSpec::equal(n.unwrap_or(1))?,
        };
        Ok(ChannelModel::Keyhole(spec))
    }

    pub fn geometry(&self) -> Result<CellGeometry, SimError> {
        let g = &self.geometry;
        Ok(CellGeometry::new(g.r_min, g.r_max, g.pathloss_exponent, g.shadow_sigma_db, 1.0)?)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        let k = self.users;
        if k == 0 || self.antennas == 0 {
            return bad("antennas and users must be positive".into());
        }
        if self.tau_up() < k {
            return bad(format!("tau_up = {} < K = {k}", self.tau_up()));
        }
        if self.tau_d() < 2 || self.tau_d() > self.tau_c {
            return bad(format!("need 2 <= tau_d <= tau_c (tau_d = {}, tau_c = {})", self.tau_d(), self.tau_c));
        }
        if self.estimators.contains(&EstimatorName::DlPilot) {
            if self.tau_dp() < k {
                return bad(format!("tau_dp = {} < K = {k}", self.tau_dp()));
            }
            if self.tau_dp() >= self.tau_d() {
                return bad(format!("tau_dp = {} leaves no payload in tau_d = {}", self.tau_dp(), self.tau_d()));
            }
        }
        if self.processing == ProcessingName::Zf && self.antennas <= k {
            return bad(format!("ZF needs M > K (M = {}, K = {k})", self.antennas));
        }
        if self.processing == ProcessingName::Zf && self.normalization == NormalizationName::LongTerm {
            return Err(SimError::Core(blindmimo_core::Error::Unsupported(
                "long-term normalized ZF has no finite normalizer in general".into(),
            )));
        }
        if !self.snr_d_db.is_finite() || !self.snr_u_db().is_finite() {
            return bad("SNRs must be finite".into());
        }
        if self.bandwidth_hz.is_nan() || self.bandwidth_hz <= 0.0 {
            return bad("bandwidth_hz must be positive".into());
        }
        let t = &self.trials;
        if t.large_scale == 0 || t.small_scale == 0 {
            return bad("trial counts must be positive".into());
        }
        if t.rate_samples < blindmimo_core::rates::MIN_RATE_SAMPLES {
            return bad(format!("rate_samples must be >= {}", blindmimo_core::rates::MIN_RATE_SAMPLES));
        }
        if t.side_stats < blindmimo_core::estimation::MIN_SIDE_TRIALS {
            return bad(format!("side_stats must be >= {}", blindmimo_core::estimation::MIN_SIDE_TRIALS));
        }
        if t.hardening < 100 {
            return bad("hardening trials must be >= 100".into());
        }
        if self.sweep.tau_d.iter().any(|&t| t < 1) {
            return bad("sweep tau_d values must be positive".into());
        }
        self.channel_model()?;
        self.geometry()?;
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let c = ExperimentConfig::default();
        assert_eq!((c.tau_up(), c.tau_d(), c.tau_dp()), (10, 100, 10));
        assert_eq!(c.snr_u_db(), -5.0);
        c.validate().unwrap();
    }

    #[test]
    fn empty_toml_is_default() {
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml_str("antenas = 4").is_err());
        assert!(ExperimentConfig::from_toml_str("[trials]\nlarge = 4").is_err());
    }

    #[test]
    fn model_strings() {
        let mut c = ExperimentConfig {
            model: "keyhole:4".into(),
            ..ExperimentConfig::default()
        };
        match c.channel_model().unwrap() {
            ChannelModel::Keyhole(s) => assert_eq!(s.keyholes(), 4),
            _ => panic!(),
        }
        c.model = "rician".into();
        assert!(c.channel_model().is_err());
        c.model = "keyhole".into();
        c.keyhole_gains = Some(vec![0.8, 0.8]);
        assert!(matches!(
            c.channel_model(),
            Err(SimError::Core(blindmimo_core::Error::InvalidSpec(_)))
        ));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn invariant_violations() {
        let c = ExperimentConfig {
            tau_up: Some(9),
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
        let c = ExperimentConfig {
            tau_d: Some(201),
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
        let c = ExperimentConfig {
            tau_dp: Some(100),
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
        let c = ExperimentConfig {
            processing: ProcessingName::Zf,
            normalization: NormalizationName::LongTerm,
            ..ExperimentConfig::default()
        };
        assert!(matches!(
            c.validate(),
            Err(SimError::Core(blindmimo_core::Error::Unsupported(_)))
        ));
    }
}
