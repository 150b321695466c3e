//! The experiment drivers: hardening, MSE versus SNR, throughput CDFs, bound
//! comparison and the validation suite.

use blindmimo_core::channel::{
    calibrate_pl0, gen_large_scale, hardening_ratio_closed, hardening_ratio_mc, median_edge_beta, ChannelModel,
    KeyholeSpec, LargeScaleProfile,
};
use blindmimo_core::downlink::transmit_block;
use blindmimo_core::estimation::{
    blind_estimates, dl_pilot_estimate, mean_interference_closed, side_stats_mc, statistical_estimate, xi_limit,
    blind_estimate, GainMethod, SideStats,
};
use blindmimo_core::link::{CsiMode, LinkConfig};
use blindmimo_core::numerics::{norm_sqr, sample_cn, stream_id};
use blindmimo_core::precoding::{equal_power, maxmin_power, Normalization, Processing};
use blindmimo_core::rates::{
    draw_rate_samples, net_throughput, rate_side_info, rate_uatf, Bandwidth, Overhead, RatePlan, DEFAULT_GRID,
};
use blindmimo_core::stats::{median, quantile, Estimate, Moments};
use blindmimo_core::{RandomStream, C64};
use rayon::prelude::*;

use crate::config::{db_to_linear, EstimatorName, ExperimentConfig, PowerControl};
use crate::output::RecordSink;
use crate::SimError;

/// Stream purposes; the third component of every stream id.
pub mod purpose {
    pub const LARGE_SCALE: u8 = 0;
    pub const SIDE_STATS: u8 = 1;
    pub const RATE_SAMPLES: u8 = 2;
    pub const MSE_LINK: u8 = 3;
    pub const MSE_BLOCK: u8 = 4;
    pub const HARDENING: u8 = 5;
    pub const CALIBRATION: u8 = 6;
    pub const VALIDATE: u8 = 7;
}

/// Estimators in the order used by [`DrawOutcome::rates`].
pub const METHODS: [GainMethod; 4] = [
    GainMethod::Statistical,
    GainMethod::DlPilot,
    GainMethod::Blind,
    GainMethod::Genie,
];

fn method_index(m: GainMethod) -> usize {
    METHODS.iter().position(|x| *x == m).expect("all methods listed")
}

/// Quantiles reported for throughput CDFs.
pub const CDF_POINTS: [f64; 9] = [0.05, 0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9, 0.95];

/// Worker pool. Tasks are indexed and collected in index order.
pub struct Runner {
    pool: rayon::ThreadPool,
    workers: usize,
}

impl Runner {
    pub fn new(workers: usize) -> Result<Self, SimError> {
        let workers = workers.max(1);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
        Ok(Runner { pool, workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn map<T, F>(&self, tasks: usize, f: F) -> Result<Vec<T>, SimError>
    where
        T: Send,
        F: Fn(u32) -> Result<T, SimError> + Sync + Send,
    {
        let tasks = u32::try_from(tasks).map_err(|_| SimError::StreamSpace(tasks))?;
        self.pool.install(|| (0..tasks).into_par_iter().map(&f).collect())
    }
}

fn stream(seed: u64, point: u32, trial: u32, purpose: u8) -> RandomStream {
    RandomStream::new(seed, stream_id(point, trial, purpose))
}

/// Per-user closed-form interference means, when the combination has one.
fn closed_interference(
    processing: Processing,
    model: &ChannelModel,
    beta: &[f64],
    gamma: &[f64],
    eta: &[f64],
) -> Option<Vec<f64>> {
    (0..beta.len())
        .map(|k| mean_interference_closed(processing, model.tag(), beta, gamma, eta, k).ok())
        .collect()
}

/// Side statistics by Monte Carlo, with the interference means replaced by
/// their closed forms where available.
fn side_stats(link: &LinkConfig, eta: &[f64], trials: usize, s: &mut RandomStream) -> Result<SideStats, SimError> {
    let stats = side_stats_mc(link, eta, trials, s)?;
    let gamma = link.gamma();
    Ok(match closed_interference(link.processing, &link.model, link.beta.beta(), &gamma, eta) {
        Some(c) => stats.with_mean_interf(&c)?,
        None => stats,
    })
}

fn sci(x: f64) -> String {
    format!("{x}")
}

// ---------------------------------------------------------------------------
// Throughput study

/// Per-user results of one large-scale draw.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawOutcome {
    pub beta: Vec<f64>,
    pub eta: Vec<f64>,
    /// `rates[method_index][k]` in bit/s/Hz, ordered as [`METHODS`].
    pub rates: [Vec<f64>; 4],
    pub uatf: Vec<f64>,
    /// User rates whose clamped SINR mass exceeded the warning level.
    pub clamp_warnings: usize,
    pub uatf_warnings: usize,
    pub resamples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputStudy {
    pub draws: Vec<DrawOutcome>,
    pub pl0: f64,
    pub bandwidth_hz: f64,
    pub tau_c: usize,
    pub tau_d: usize,
    pub tau_dp: usize,
}

impl ThroughputStudy {
    pub fn rates(&self, m: GainMethod) -> Vec<f64> {
        let i = method_index(m);
        self.draws.iter().flat_map(|d| d.rates[i].iter().copied()).collect()
    }

    pub fn uatf_rates(&self) -> Vec<f64> {
        self.draws.iter().flat_map(|d| d.uatf.iter().copied()).collect()
    }

    fn overhead(&self, m: GainMethod) -> Overhead {
        match m {
            GainMethod::DlPilot => Overhead::DownlinkPilots { tau_dp: self.tau_dp },
            _ => Overhead::None,
        }
    }

    fn to_net(&self, rates: Vec<f64>, overhead: Overhead) -> Result<Vec<f64>, SimError> {
        rates
            .into_iter()
            .map(|r| Ok(net_throughput(r, self.bandwidth_hz, self.tau_c, self.tau_d, overhead)?))
            .collect()
    }

    /// Per-user net throughput in bit/s, all draws.
    pub fn net(&self, m: GainMethod) -> Result<Vec<f64>, SimError> {
        self.to_net(self.rates(m), self.overhead(m))
    }

    /// Net throughput of the use-and-forget bound on the blind estimate.
    pub fn uatf_net(&self) -> Result<Vec<f64>, SimError> {
        self.to_net(self.uatf_rates(), Overhead::None)
    }

    /// 5th percentile of the per-user net throughput.
    pub fn likely95(&self, m: GainMethod) -> Result<f64, SimError> {
        Ok(quantile(&self.net(m)?, 0.05))
    }
}

/// Large-scale draws with max-min (or equal) power control, side statistics,
/// shared rate samples and the per-user rates of every estimator.
///
/// The downlink SNR is carried by the large-scale gains: `rho_d = 1` and
/// `PL0` is calibrated so that the median cell-edge gain equals `SNR_d`.
pub fn throughput_study(cfg: &ExperimentConfig, runner: &Runner) -> Result<ThroughputStudy, SimError> {
    cfg.validate()?;
    let model = cfg.channel_model()?;
    let rho_d = 1.0;
    let rho_u = db_to_linear(cfg.snr_u_db() - cfg.snr_d_db);
    let geom = cfg.geometry()?;
    let pl0 = calibrate_pl0(&geom, rho_d, cfg.snr_d_db, &mut stream(cfg.seed, 0, 0, purpose::CALIBRATION))?;
    let geom = geom.with_pl0(pl0);
    let k = cfg.users;
    let draws = runner.map(cfg.trials.large_scale, |d| {
        let beta = gen_large_scale(k, &geom, &mut stream(cfg.seed, d, 0, purpose::LARGE_SCALE))?;
        let link = LinkConfig {
            antennas: cfg.antennas,
            model: model.clone(),
            beta,
            csi: cfg.csi(rho_u),
            processing: cfg.processing(),
            normalization: cfg.normalization(),
        };
        let gamma = link.gamma();
        let eta = match cfg.power_control {
            PowerControl::Equal => equal_power(k)?,
            PowerControl::Maxmin => maxmin_power(link.beta.beta(), &gamma, rho_d, link.processing)?,
        };
        let stats = side_stats(
            &link,
            &eta,
            cfg.trials.side_stats,
            &mut stream(cfg.seed, d, 0, purpose::SIDE_STATS),
        )?;
        let plan = RatePlan {
            link: &link,
            eta: &eta,
            rho_d,
            stats: &stats,
            tau_d: cfg.tau_d(),
            tau_dp: cfg.tau_dp(),
            samples: cfg.trials.rate_samples,
        };
        let samples = draw_rate_samples(&plan, &mut stream(cfg.seed, d, 0, purpose::RATE_SAMPLES))?;
        let mut rates: [Vec<f64>; 4] = Default::default();
        let mut uatf = Vec::with_capacity(k);
        let (mut clamp_warnings, mut uatf_warnings) = (0, 0);
        for u in 0..k {
            for (i, m) in METHODS.iter().enumerate() {
                let r = rate_side_info(&samples.set(*m, u), DEFAULT_GRID, Bandwidth::Silverman)?;
                clamp_warnings += usize::from(r.warning());
                rates[i].push(r.rate);
            }
            let r = rate_uatf(&samples.set(GainMethod::Blind, u))?;
            uatf_warnings += usize::from(r.warning());
            uatf.push(r.rate);
        }
        Ok(DrawOutcome {
            beta: link.beta.beta().to_vec(),
            eta,
            rates,
            uatf,
            clamp_warnings,
            uatf_warnings,
            resamples: stats.resamples + samples.resamples,
        })
    })?;
    Ok(ThroughputStudy {
        draws,
        pl0,
        bandwidth_hz: cfg.bandwidth_hz,
        tau_c: cfg.tau_c,
        tau_d: cfg.tau_d(),
        tau_dp: cfg.tau_dp(),
    })
}

fn study_warnings(study: &ThroughputStudy, sink: &mut RecordSink) {
    let users: usize = study.draws.iter().map(|d| d.beta.len()).sum();
    let clamp: usize = study.draws.iter().map(|d| d.clamp_warnings).sum();
    let uatf: usize = study.draws.iter().map(|d| d.uatf_warnings).sum();
    let resamples: usize = study.draws.iter().map(|d| d.resamples).sum();
    if clamp > 0 {
        sink.warn(format!("{clamp} of {} user rates clamped more than 1% of the SINR grid mass", users * METHODS.len()));
    }
    if uatf > 0 {
        sink.warn(format!("{uatf} of {users} use-and-forget rates rejected more than 1% of samples"));
    }
    if resamples > 0 {
        sink.warn(format!("{resamples} ill-conditioned ZF draws were redrawn"));
    }
}

fn emitted(cfg: &ExperimentConfig, m: GainMethod) -> bool {
    cfg.estimators.iter().any(|e| e.method() == m)
}

fn push_cdf(sink: &mut RecordSink, exp: &str, estimator: &str, values: &[f64]) {
    for p in CDF_POINTS {
        sink.push(format!("{exp}:cdf:p={p:.2}"), estimator, None, "net_throughput_bps", quantile(values, p), None);
    }
}

pub fn throughput_records(cfg: &ExperimentConfig, study: &ThroughputStudy) -> Result<RecordSink, SimError> {
    let mut sink = RecordSink::new(cfg);
    study_warnings(study, &mut sink);
    sink.push("throughput", "", None, "pl0", study.pl0, None);
    for m in METHODS.into_iter().filter(|m| emitted(cfg, *m)) {
        let i = method_index(m);
        let net = study.net(m)?;
        let k = cfg.users;
        for (d, draw) in study.draws.iter().enumerate() {
            for u in 0..k {
                let exp = format!("throughput:draw={d}");
                sink.push(exp.clone(), m.as_str(), Some(u), "rate_bps_hz", draw.rates[i][u], None);
                sink.push(exp, m.as_str(), Some(u), "net_throughput_bps", net[d * k + u], None);
            }
        }
        push_cdf(&mut sink, "throughput", m.as_str(), &net);
        let mean: Moments = net.iter().copied().collect();
        sink.push("throughput", m.as_str(), None, "mean_net_throughput_bps", mean.mean(), Some(mean.std_err()));
        sink.push("throughput", m.as_str(), None, "p05_net_throughput_bps", quantile(&net, 0.05), None);
    }
    if emitted(cfg, GainMethod::Blind) {
        let blind = study.likely95(GainMethod::Blind)?;
        for m in [GainMethod::Statistical, GainMethod::DlPilot] {
            if emitted(cfg, m) {
                let other = study.likely95(m)?;
                sink.push("throughput", "blind", None, &format!("p05_gain_over_{}", m.as_str()), blind / other - 1.0, None);
            }
        }
    }
    Ok(sink)
}

/// Per-user net-throughput CDFs of statistical, dl-pilot, blind and genie
/// side information at the configured SNR.
pub fn run_throughput_cdf(cfg: &ExperimentConfig, runner: &Runner) -> Result<RecordSink, SimError> {
    let study = throughput_study(cfg, runner)?;
    throughput_records(cfg, &study)
}

pub fn bound_records(cfg: &ExperimentConfig, study: &ThroughputStudy) -> Result<RecordSink, SimError> {
    let mut sink = RecordSink::new(cfg);
    study_warnings(study, &mut sink);
    let curves = [
        ("statistical", study.net(GainMethod::Statistical)?),
        ("uatf", study.uatf_net()?),
        ("blind", study.net(GainMethod::Blind)?),
    ];
    let k = cfg.users;
    for (name, net) in &curves {
        for (d, _) in study.draws.iter().enumerate() {
            for u in 0..k {
                sink.push(format!("bounds:draw={d}"), name, Some(u), "net_throughput_bps", net[d * k + u], None);
            }
        }
        push_cdf(&mut sink, "bounds", name, net);
        sink.push("bounds", name, None, "median_net_throughput_bps", median(net), None);
    }
    Ok(sink)
}

/// The side-information bound against the use-and-forget bound and the
/// statistical baseline.
pub fn run_bound_compare(cfg: &ExperimentConfig, runner: &Runner) -> Result<RecordSink, SimError> {
    let study = throughput_study(cfg, runner)?;
    bound_records(cfg, &study)
}

// ---------------------------------------------------------------------------
// MSE versus SNR

/// Normalized MSE estimates; `blind[s][t]` is SNR point `s`, block length `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MseTable {
    pub snr_d_db: Vec<f64>,
    pub tau_d: Vec<usize>,
    pub blind: Vec<Vec<Estimate>>,
    pub statistical: Vec<Estimate>,
    pub pilot: Vec<Estimate>,
}

struct MseTrial {
    alpha: Vec<C64>,
    /// `[snr][tau][k]`
    blind: Vec<Vec<Vec<C64>>>,
    /// `[snr][k]`
    pilot: Vec<Vec<C64>>,
}

/// Common setup for the symmetric MSE experiments: `beta_k = 1`,
/// `eta_k = 1 / K`.
fn symmetric_link(cfg: &ExperimentConfig, antennas: usize, model: ChannelModel, rho_u: f64) -> Result<LinkConfig, SimError> {
    let link = LinkConfig {
        antennas,
        model,
        beta: LargeScaleProfile::uniform(cfg.users, 1.0)?,
        csi: cfg.csi(rho_u),
        processing: cfg.processing(),
        normalization: cfg.normalization(),
    };
    link.validate()?;
    Ok(link)
}

/// Mean over users of the per-user normalized MSE, with its standard error.
fn aggregate_nmse(estimates: &[Vec<C64>], truths: &[Vec<C64>]) -> Result<Estimate, SimError> {
    let k = truths.len();
    let (mut value, mut var) = (0.0, 0.0);
    for u in 0..k {
        let mean = truths[u].iter().sum::<C64>() / truths[u].len() as f64;
        let nmse = blindmimo_core::rates::normalized_mse(&estimates[u], &truths[u])?;
        let errs: Moments = estimates[u]
            .iter()
            .zip(&truths[u])
            .map(|(e, t)| (e - t).norm_sqr() / mean.norm_sqr())
            .collect();
        value += nmse;
        var += errs.std_err() * errs.std_err();
    }
    Ok(Estimate {
        value: value / k as f64,
        std_err: var.sqrt() / k as f64,
    })
}

/// Transposes per-trial `[k]` vectors into per-user `[k][trial]` vectors.
fn by_user<'a>(rows: impl Iterator<Item = &'a Vec<C64>>, k: usize) -> Vec<Vec<C64>> {
    let mut out = vec![Vec::new(); k];
    for row in rows {
        for (u, v) in row.iter().enumerate() {
            out[u].push(*v);
        }
    }
    out
}

/// Normalized MSE of the blind, statistical and dl-pilot estimators over
/// the SNR sweep. Channel realizations are shared across SNR points.
pub fn mse_study(cfg: &ExperimentConfig, runner: &Runner) -> Result<MseTable, SimError> {
    cfg.validate()?;
    let k = cfg.users;
    let rho_u = db_to_linear(cfg.snr_u_db.unwrap_or(0.0));
    let link = symmetric_link(cfg, cfg.antennas, cfg.channel_model()?, rho_u)?;
    let eta = equal_power(k)?;
    let stats = side_stats(&link, &eta, cfg.trials.side_stats, &mut stream(cfg.seed, 0, 0, purpose::SIDE_STATS))?;
    let snrs = cfg.sweep.snr_d_db.clone();
    let taus = cfg.sweep.tau_d.clone();
    let tau_dp = cfg.tau_dp();
    let trials = runner.map(cfg.trials.small_scale, |t| {
        let r = link.realize(&mut stream(cfg.seed, 0, t, purpose::MSE_LINK))?;
        let mut blind = Vec::with_capacity(snrs.len());
        let mut pilot = Vec::with_capacity(snrs.len());
        for (p, snr) in snrs.iter().enumerate() {
            let rho_d = db_to_linear(*snr);
            let mut s = stream(cfg.seed, p as u32 + 1, t, purpose::MSE_BLOCK);
            let mut per_tau = Vec::with_capacity(taus.len());
            for &tau in &taus {
                let block = transmit_block(&r.gains, &eta, rho_d, tau, cfg.alphabet(), &mut s)?;
                per_tau.push(blind_estimates(&block, &eta, &stats)?.alpha_hat);
            }
            blind.push(per_tau);
            pilot.push(dl_pilot_estimate(&r.gains, &eta, rho_d, tau_dp, &stats, &mut s)?.alpha_hat);
        }
        Ok(MseTrial {
            alpha: (0..k).map(|u| r.gains.get(u, u)).collect(),
            blind,
            pilot,
        })
    })?;
    let truths = by_user(trials.iter().map(|t| &t.alpha), k);
    let stat_row: Vec<C64> = (0..k).map(|u| C64::new(statistical_estimate(&stats, u), 0.0)).collect();
    let stat_est = by_user(trials.iter().map(|_| &stat_row), k);
    let statistical = aggregate_nmse(&stat_est, &truths)?;
    let mut table = MseTable {
        snr_d_db: snrs.clone(),
        tau_d: taus.clone(),
        blind: Vec::new(),
        statistical: vec![statistical; snrs.len()],
        pilot: Vec::new(),
    };
    for p in 0..snrs.len() {
        let mut row = Vec::with_capacity(taus.len());
        for ti in 0..taus.len() {
            let est = by_user(trials.iter().map(|t| &t.blind[p][ti]), k);
            row.push(aggregate_nmse(&est, &truths)?);
        }
        table.blind.push(row);
        let est = by_user(trials.iter().map(|t| &t.pilot[p]), k);
        table.pilot.push(aggregate_nmse(&est, &truths)?);
    }
    Ok(table)
}

pub fn mse_records(cfg: &ExperimentConfig, table: &MseTable) -> RecordSink {
    let mut sink = RecordSink::new(cfg);
    for (p, snr) in table.snr_d_db.iter().enumerate() {
        if cfg.estimators.contains(&EstimatorName::Blind) {
            for (ti, tau) in table.tau_d.iter().enumerate() {
                let e = table.blind[p][ti];
                sink.push(format!("mse:snr_d_db={}:tau_d={tau}", sci(*snr)), "blind", None, "nmse", e.value, Some(e.std_err));
            }
        }
        let exp = format!("mse:snr_d_db={}", sci(*snr));
        if cfg.estimators.contains(&EstimatorName::Statistical) {
            let e = table.statistical[p];
            sink.push(exp.clone(), "statistical", None, "nmse", e.value, Some(e.std_err));
        }
        if cfg.estimators.contains(&EstimatorName::DlPilot) {
            let e = table.pilot[p];
            sink.push(exp, "dl-pilot", None, "nmse", e.value, Some(e.std_err));
        }
    }
    sink
}

pub fn run_mse_vs_snr(cfg: &ExperimentConfig, runner: &Runner) -> Result<RecordSink, SimError> {
    let table = mse_study(cfg, runner)?;
    Ok(mse_records(cfg, &table))
}

// ---------------------------------------------------------------------------
// Hardening

#[derive(Debug, Clone, PartialEq)]
pub struct HardeningPoint {
    pub antennas: usize,
    /// 0 for Rayleigh fading.
    pub keyholes: usize,
    pub closed: f64,
    pub mc: Estimate,
    pub blind_nmse: Estimate,
}

fn hardening_models(keyholes: &[usize]) -> Result<Vec<(usize, ChannelModel)>, SimError> {
    let mut out = vec![(0, ChannelModel::Rayleigh)];
    for &n in keyholes {
        out.push((n, ChannelModel::Keyhole(KeyholeSpec::equal(n)?)));
    }
    Ok(out)
}

/// Hardening ratios (closed form and Monte Carlo) and blind-estimator MSE
/// over the antenna and keyhole sweeps.
pub fn hardening_study(cfg: &ExperimentConfig, runner: &Runner) -> Result<Vec<HardeningPoint>, SimError> {
    cfg.validate()?;
    let models = hardening_models(&cfg.sweep.keyholes)?;
    let points: Vec<(usize, usize, ChannelModel)> = cfg
        .sweep
        .antennas
        .iter()
        .flat_map(|&m| models.iter().map(move |(n, model)| (m, *n, model.clone())))
        .collect();
    let k = cfg.users;
    let rho_d = db_to_linear(cfg.snr_d_db);
    let rho_u = db_to_linear(cfg.snr_u_db());
    let tau = cfg.tau_d();
    runner.map(points.len(), |p| {
        let (m, n, model) = &points[p as usize];
        let closed = hardening_ratio_closed(model, *m)?;
        let h = hardening_ratio_mc(model, *m, 1.0, cfg.trials.hardening, &mut stream(cfg.seed, p, 0, purpose::HARDENING))?;
        let link = symmetric_link(cfg, *m, model.clone(), rho_u)?;
        let eta = equal_power(k)?;
        let stats = side_stats(&link, &eta, cfg.trials.side_stats, &mut stream(cfg.seed, p, 0, purpose::SIDE_STATS))?;
        let mut s = stream(cfg.seed, p, 0, purpose::MSE_LINK);
        let mut truths = vec![Vec::new(); k];
        let mut est = vec![Vec::new(); k];
        for _ in 0..cfg.trials.small_scale {
            let r = link.realize(&mut s)?;
            let block = transmit_block(&r.gains, &eta, rho_d, tau, cfg.alphabet(), &mut s)?;
            let b = blind_estimates(&block, &eta, &stats)?;
            for u in 0..k {
                truths[u].push(r.gains.get(u, u));
                est[u].push(b.alpha_hat[u]);
            }
        }
        Ok(HardeningPoint {
            antennas: *m,
            keyholes: *n,
            closed,
            mc: Estimate {
                value: h.ratio,
                std_err: h.std_err,
            },
            blind_nmse: aggregate_nmse(&est, &truths)?,
        })
    })
}

pub fn run_hardening(cfg: &ExperimentConfig, runner: &Runner) -> Result<RecordSink, SimError> {
    let points = hardening_study(cfg, runner)?;
    let mut sink = RecordSink::new(cfg);
    for p in &points {
        let model = if p.keyholes == 0 {
            "rayleigh".to_string()
        } else {
            format!("keyhole:{}", p.keyholes)
        };
        let exp = format!("hardening:model={model}:M={}", p.antennas);
        sink.push(exp.clone(), "", None, "ratio_closed", p.closed, None);
        sink.push(exp.clone(), "", None, "ratio_mc", p.mc.value, Some(p.mc.std_err));
        sink.push(exp, "blind", None, "nmse", p.blind_nmse.value, Some(p.blind_nmse.std_err));
    }
    Ok(sink)
}

// ---------------------------------------------------------------------------
// Blind-estimator consistency

/// Median of `|alpha_hat_kk / alpha_kk - 1|` for the blind estimator with
/// perfect uplink CSI, `beta_k = 1`, `eta_k = 1/K`, over `trials` coherence
/// blocks of `tau_d` samples each.
#[allow(clippy::too_many_arguments)]
pub fn blind_consistency(
    seed: u64,
    model: &ChannelModel,
    processing: Processing,
    antennas: usize,
    users: usize,
    tau_d: usize,
    rho_d: f64,
    trials: usize,
    runner: &Runner,
) -> Result<f64, SimError> {
    let link = LinkConfig {
        antennas,
        model: model.clone(),
        beta: LargeScaleProfile::uniform(users, 1.0)?,
        csi: CsiMode::Perfect,
        processing,
        normalization: Normalization::ShortTerm,
    };
    link.validate()?;
    let eta = equal_power(users)?;
    let stats = side_stats(&link, &eta, 2_000, &mut stream(seed, 0, 0, purpose::SIDE_STATS))?;
    let errs = runner.map(trials, |t| {
        let mut s = stream(seed, 0, t, purpose::MSE_BLOCK);
        let r = link.realize(&mut s)?;
        let block = transmit_block(&r.gains, &eta, rho_d, tau_d, blindmimo_core::downlink::SymbolAlphabet::Gaussian, &mut s)?;
        let est = blind_estimates(&block, &eta, &stats)?;
        Ok((0..users).map(|u| (est.alpha_hat[u] / r.gains.get(u, u) - 1.0).norm()).collect::<Vec<f64>>())
    })?;
    let all: Vec<f64> = errs.into_iter().flatten().collect();
    Ok(median(&all))
}

// ---------------------------------------------------------------------------
// Validation suite

/// One oracle comparison. `value` is compared against `limit` (`value <= limit`
/// passes); `metric` names what `value` measures.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub metric: &'static str,
    pub value: f64,
    pub limit: f64,
}

impl Check {
    pub fn pass(&self) -> bool {
        self.value <= self.limit
    }
}

/// Monte Carlo hardening ratios against their closed forms.
pub fn check_hardening(
    seed: u64,
    antennas: &[usize],
    keyholes: &[usize],
    trials: usize,
    runner: &Runner,
) -> Result<Vec<Check>, SimError> {
    let models = hardening_models(keyholes)?;
    let points: Vec<(usize, usize, &ChannelModel)> = antennas
        .iter()
        .flat_map(|&m| models.iter().map(move |(n, model)| (m, *n, model)))
        .collect();
    runner.map(points.len(), |p| {
        let (m, n, model) = points[p as usize];
        let closed = hardening_ratio_closed(model, m)?;
        let h = hardening_ratio_mc(model, m, 1.0, trials, &mut stream(seed, p, 0, purpose::VALIDATE))?;
        Ok(Check {
            name: format!("hardening:keyholes={n}:M={m}"),
            metric: "sigma_distance",
            value: h.sigma_distance(closed),
            limit: 3.0,
        })
    })
}

/// `E ||z||^4 = n (n + 1)` for `z ~ CN(0, I_n)`.
pub fn check_fourth_moment(seed: u64, dims: &[usize], samples: usize, runner: &Runner) -> Result<Vec<Check>, SimError> {
    runner.map(dims.len(), |p| {
        let n = dims[p as usize];
        let mut s = stream(seed, p, 1, purpose::VALIDATE);
        let mut acc = 0.0;
        for _ in 0..samples {
            let z = sample_cn(n, &mut s)?;
            let q = z.norm_sqr();
            acc += q * q;
        }
        let want = (n * (n + 1)) as f64;
        Ok(Check {
            name: format!("fourth_moment:n={n}"),
            metric: "rel_error",
            value: (acc / samples as f64 / want - 1.0).abs(),
            limit: 0.01,
        })
    })
}

/// Closed-form interference means against Monte Carlo for MR-Rayleigh,
/// MR-keyhole and ZF-Rayleigh with LMMSE uplink estimates, plus exact ZF
/// nulling under perfect CSI.
///
/// Users are symmetric (`beta = 1`, `eta = 1/K`), so the compared quantity is
/// the user-averaged interference of each draw.
pub fn check_interference(
    seed: u64,
    antennas: usize,
    users: usize,
    trials: usize,
    runner: &Runner,
) -> Result<Vec<Check>, SimError> {
    const CHUNK: usize = 500;
    let beta = LargeScaleProfile::uniform(users, 1.0)?;
    let eta = equal_power(users)?;
    let lmmse = CsiMode::Lmmse {
        tau_up: users,
        rho_u: 1.0,
    };
    let cases = [
        ("mr-rayleigh", ChannelModel::Rayleigh, Processing::Mr),
        ("mr-keyhole", ChannelModel::Keyhole(KeyholeSpec::equal(1)?), Processing::Mr),
        ("zf-rayleigh", ChannelModel::Rayleigh, Processing::Zf),
    ];
    let mut checks = Vec::new();
    for (c, (name, model, processing)) in cases.iter().enumerate() {
        let link = LinkConfig {
            antennas,
            model: model.clone(),
            beta: beta.clone(),
            csi: lmmse,
            processing: *processing,
            normalization: Normalization::ShortTerm,
        };
        let gamma = link.gamma();
        let closed = closed_interference(*processing, model, beta.beta(), &gamma, &eta)
            .expect("closed form exists for these cases");
        let want = closed.iter().sum::<f64>() / users as f64;
        let chunks = trials.div_ceil(CHUNK);
        let values = runner.map(chunks, |i| {
            let mut s = stream(seed, c as u32, i, purpose::VALIDATE);
            let n = CHUNK.min(trials - i as usize * CHUNK);
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let r = link.realize(&mut s)?;
                out.push((0..users).map(|u| r.gains.interference(&eta, u)).sum::<f64>() / users as f64);
            }
            Ok(out)
        })?;
        let m: Moments = values.into_iter().flatten().collect();
        let est = Estimate::from(m);
        checks.push(Check {
            name: format!("interference:{name}:M={antennas}:K={users}"),
            metric: "sigma_distance",
            value: est.sigma_distance(want),
            limit: 3.0,
        });
    }
    let zf = LinkConfig {
        antennas,
        model: ChannelModel::Rayleigh,
        beta,
        csi: CsiMode::Perfect,
        processing: Processing::Zf,
        normalization: Normalization::ShortTerm,
    };
    let mut s = stream(seed, cases.len() as u32, 0, purpose::VALIDATE);
    let (mut worst_interf, mut worst_gain) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let r = zf.realize(&mut s)?;
        for u in 0..users {
            worst_interf = worst_interf.max(r.gains.interference(&eta, u));
            for j in (0..users).filter(|&j| j != u) {
                worst_gain = worst_gain.max(r.gains.get(u, j).norm());
            }
        }
    }
    checks.push(Check {
        name: format!("zf-nulling:interference:M={antennas}:K={users}"),
        metric: "max_value",
        value: worst_interf,
        limit: 1e-10,
    });
    checks.push(Check {
        name: format!("zf-nulling:cross-gain:M={antennas}:K={users}"),
        metric: "max_value",
        value: worst_gain,
        limit: 1e-8,
    });
    Ok(checks)
}

/// Smaller oracles: SNR calibration, the mean MR gain under perfect CSI, and
/// the exact single-user inversion of the blind estimator.
pub fn check_misc(cfg: &ExperimentConfig) -> Result<Vec<Check>, SimError> {
    let mut out = Vec::new();
    let geom = cfg.geometry()?;
    let mut s = stream(cfg.seed, 0, 2, purpose::VALIDATE);
    let pl0 = calibrate_pl0(&geom, 1.0, cfg.snr_d_db, &mut s)?;
    let edge = median_edge_beta(&geom.with_pl0(pl0), 100_000, &mut s);
    out.push(Check {
        name: "calibration:edge-snr".into(),
        metric: "rel_error",
        value: (edge / db_to_linear(cfg.snr_d_db) - 1.0).abs(),
        limit: 0.01,
    });

    let m = cfg.antennas;
    let link = LinkConfig {
        antennas: m,
        model: ChannelModel::Rayleigh,
        beta: LargeScaleProfile::uniform(1, 1.0)?,
        csi: CsiMode::Perfect,
        processing: Processing::Mr,
        normalization: Normalization::ShortTerm,
    };
    let stats = side_stats_mc(&link, &[1.0], cfg.trials.side_stats, &mut stream(cfg.seed, 1, 2, purpose::VALIDATE))?;
    let want = (lgamma(m as f64 + 0.5) - lgamma(m as f64)).exp();
    out.push(Check {
        name: format!("mr-mean-gain:M={m}"),
        metric: "rel_error",
        value: (stats.mean_abs_gain[0].value / want - 1.0).abs(),
        limit: 0.005,
    });

    let r = link.realize(&mut stream(cfg.seed, 2, 2, purpose::VALIDATE))?;
    let rho = db_to_linear(cfg.snr_d_db);
    let x = xi_limit(&r.gains, &[1.0], rho, 0);
    let a = blind_estimate(x, 1.0, rho, 0.0, stats.mean_abs_gain[0].value);
    let truth = norm_sqr(r.channel.g.col(0)).sqrt();
    out.push(Check {
        name: "blind:single-user-inversion".into(),
        metric: "rel_error",
        value: (a / truth - 1.0).abs(),
        limit: 1e-12,
    });
    Ok(out)
}

fn lgamma(x: f64) -> f64 {
    // Stirling series; accurate to ~1e-12 for x >= 8, shifted below that.
    let mut x = x;
    let mut shift = 0.0;
    while x < 8.0 {
        shift -= x.ln();
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    shift + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
}

/// Runs the oracle suite at the configured budgets.
pub fn validation_checks(cfg: &ExperimentConfig, runner: &Runner) -> Result<Vec<Check>, SimError> {
    cfg.validate()?;
    let mut checks = check_hardening(cfg.seed, &[10, 50, 100, 200], &[1, 2, 4], cfg.trials.hardening, runner)?;
    checks.extend(check_fourth_moment(cfg.seed, &[1, 10, 100], 10 * cfg.trials.hardening, runner)?);
    if cfg.antennas > cfg.users {
        checks.extend(check_interference(cfg.seed, cfg.antennas, cfg.users, cfg.trials.side_stats, runner)?);
    }
    checks.extend(check_misc(cfg)?);
    Ok(checks)
}

pub fn run_validate(cfg: &ExperimentConfig, runner: &Runner) -> Result<RecordSink, SimError> {
    let checks = validation_checks(cfg, runner)?;
    let mut sink = RecordSink::new(cfg);
    for c in &checks {
        let exp = format!("validate:{}", c.name);
        sink.push(exp.clone(), "", None, c.metric, c.value, None);
        sink.push(exp.clone(), "", None, "limit", c.limit, None);
        sink.push(exp, "", None, "pass", if c.pass() { 1.0 } else { 0.0 }, None);
        if !c.pass() {
            sink.warn(format!("check {} failed: {} = {} > {}", c.name, c.metric, c.value, c.limit));
        }
    }
    Ok(sink)
}
