//! The measurement chain: tone -> converter scheme -> reconstruction filter
//! -> scope capture -> spectral metrics.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use sdmlab_core::analysis::{
    compute_metrics, floor_db, measure_inband_noise, osr_sweep, periodogram, scope_capture,
    AnalysisError, ScopeModel, Spectrum, SweepPoint,
};
use sdmlab_core::dem::{dac_convert, draw_mismatch, ElementArray, Strategy};
use sdmlab_core::interleave::ti_sdm_run;
use sdmlab_core::modulator::{quantize, sdm_run, ModulatorSpec, Order, Quantizer};
use sdmlab_core::signal::{design_lowpass, resonator_sine, sum_paths, Window};
use sdmlab_core::{Rate, SampledSignal};

use crate::config::{ConfigError, ExperimentConfig};
use crate::record::{aggregate, MetricsRow, RunRecord};
use crate::scheme::SchemeId;

/// Salt xored into the run seed for the element-mismatch draw, so the array
/// realization is decoupled from the modulator's starting state.
pub const MISMATCH_STREAM_SALT: u64 = 0x4d49_534d_4154_4348;
/// Salt xored into the run seed for the randomized-selection stream.
pub const SELECTION_STREAM_SALT: u64 = 0x5345_4c45_4354_494f;

/// Reconstruction filter length; long enough that the stopband sits well
/// below the quantization noise being measured.
pub const RECON_TAPS: usize = 255;

/// Ratio metrics reported for idle captures with no identifiable tone.
pub const IDLE_RATIO_DB: f64 = -400.0;

/// Resolution of the reference converter in the `single_fast_dac` scheme.
pub const FAST_DAC_BITS: u32 = 15;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 3 for runtime and
    /// I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 3,
        }
    }
}

fn at_stage<E>(stage: &'static str) -> impl FnOnce(E) -> HarnessError
where
    E: std::error::Error + Send + Sync + 'static,
{
    move |e| HarnessError::Stage {
        stage,
        source: Box::new(e),
    }
}

fn stage_msg(stage: &'static str, msg: String) -> HarnessError {
    HarnessError::Stage {
        stage,
        source: msg.into(),
    }
}

/// Everything derived from a configuration before any sample is computed:
/// the rate chain, the scope decimation, window geometry and the snapped
/// coherent tone.
#[derive(Clone, Debug)]
pub struct RunPlan {
    /// Modulator clock (board clock / n_div).
    pub f_h: Rate,
    /// Paths share the chain rate f_h / chain_div.
    pub chain_div: u64,
    pub f_chain: Rate,
    /// Rate after the scope's power-of-two decimation.
    pub f_capture: Rate,
    pub r_scope: u64,
    /// Captured samples in the analysis window (power of two).
    pub window_len: usize,
    /// Captured samples discarded while the filters settle.
    pub warmup_capture: usize,
    /// Modulator-rate samples generated per run (window + warmup).
    pub n_gen: usize,
    /// Analysis band edge f_h / (2 osr).
    pub f_b_hz: f64,
    /// Analysis bins inside the band, in capture-window units.
    pub band_bins: usize,
    /// Tone bin in the capture window: odd, coherent, inside the band.
    pub k0: usize,
    pub f0_hz: f64,
    pub f0_requested_hz: f64,
    /// Post-sum normalization (1/M for interleaved banks).
    pub scale: f64,
    /// Reconstruction lowpass cutoff, normalized to f_chain.
    pub recon_cutoff: f64,
    pub scope: ScopeModel,
}

impl RunPlan {
    pub fn new(cfg: &ExperimentConfig) -> Result<RunPlan, ConfigError> {
        cfg.validate()?;
        let plan = |reason: String| ConfigError::Plan { reason };

        let f_h = Rate::from_hz(cfg.f_ck_hz)
            .div(cfg.n_div)
            .map_err(|e| plan(e.to_string()))?;
        let chain_div = if cfg.scheme.uses_paths() {
            cfg.m_paths as u64
        } else {
            1
        };
        let f_chain = f_h.div(chain_div).map_err(|e| plan(e.to_string()))?;

        let scope = ScopeModel::default();
        // Mirror the scope's internal decimation so the capture rate is known
        // up front and the window geometry can be validated.
        let mut r_scope = 1u64;
        while !f_chain
            .div(r_scope)
            .map_err(|e| plan(e.to_string()))?
            .at_most_hz(scope.max_rate_hz)
        {
            r_scope *= 2;
            if r_scope > 1 << 20 {
                return Err(plan(format!(
                    "chain rate {f_chain} would need more than 2^20 x decimation"
                )));
            }
        }
        let f_capture = f_chain.div(r_scope).map_err(|e| plan(e.to_string()))?;

        let stride = r_scope as usize * chain_div as usize;
        if !cfg.n_samples.is_multiple_of(stride) {
            return Err(plan(format!(
                "n_samples {} is not a multiple of the decimation stride {stride}",
                cfg.n_samples
            )));
        }
        let window_len = cfg.n_samples / stride;
        if window_len < 64 {
            return Err(plan(format!(
                "analysis window is only {window_len} captured samples; need at least 64 \
                 (raise n_samples or lower the clock)"
            )));
        }
        let band_bins = cfg.n_samples / (2 * cfg.osr as usize);
        if band_bins > window_len / 2 {
            return Err(plan(format!(
                "analysis band of {band_bins} bins exceeds the captured Nyquist range of {} \
                 bins; raise osr or lower the chain rate",
                window_len / 2
            )));
        }

        let f_b_hz = f_h.hz() / (2.0 * cfg.osr as f64);
        let bin_hz = f_capture.hz() / window_len as f64;
        let f0_requested_hz = if cfg.f0_hz > 0.0 {
            cfg.f0_hz
        } else {
            0.23 * f_b_hz
        };
        if f0_requested_hz > f_b_hz * (1.0 + 1e-9) {
            return Err(plan(format!(
                "tone at {f0_requested_hz} Hz falls outside the {f_b_hz} Hz analysis band"
            )));
        }
        // Snap to the nearest odd coherent bin: odd indices keep the tone and
        // its even harmonics on disjoint bins and avoid common subharmonic
        // alignments. Nearest odd integer to x is 2*round((x-1)/2)+1.
        let nearest_odd = 2.0 * ((f0_requested_hz / bin_hz - 1.0) / 2.0).round() + 1.0;
        let k0 = (nearest_odd.max(1.0) as usize).clamp(1, band_bins - 1);
        let f0_hz = k0 as f64 * bin_hz;

        let warmup_capture = 1024;
        let n_gen = cfg.n_samples + warmup_capture * stride;
        let scale = if cfg.scheme.uses_paths() {
            1.0 / cfg.m_paths as f64
        } else {
            1.0
        };
        let recon_cutoff = (2.5 * f_b_hz / f_chain.hz()).clamp(0.1, 0.42);

        Ok(RunPlan {
            f_h,
            chain_div,
            f_chain,
            f_capture,
            r_scope,
            window_len,
            warmup_capture,
            n_gen,
            f_b_hz,
            band_bins,
            k0,
            f0_hz,
            f0_requested_hz,
            scale,
            recon_cutoff,
            scope,
        })
    }

    /// Spacing of capture-window bins in Hz.
    pub fn bin_hz(&self) -> f64 {
        self.f_capture.hz() / self.window_len as f64
    }
}

/// Each run consumes independent substreams: the loop's starting state from
/// the raw seed, element mismatch and randomized selection from salted
/// copies. Schemes that skip a consumer leave its stream untouched, so e.g.
/// a thermometer and a dwa run over the same seed see the same array.
fn initial_state(seed: u64) -> [f64; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = rng.gen_range(-1.0..1.0);
    let b = 0.5 * rng.gen_range(-1.0..1.0);
    [a, b]
}

/// DEM quantizer: 2N+1 uniform levels over the converter's full scale, so
/// every level maps to an exact signed element code.
fn dem_quantizer(n_elements: usize) -> Result<Quantizer, HarnessError> {
    Quantizer::uniform(2 * n_elements + 1, 1.0).map_err(at_stage("quantizer setup"))
}

fn dem_strategy(scheme: SchemeId) -> Option<Strategy> {
    match scheme {
        SchemeId::SdmDemThermo => Some(Strategy::Thermometer),
        SchemeId::SdmDemRandom => Some(Strategy::Random),
        SchemeId::SdmDemDwa => Some(Strategy::Dwa),
        _ => None,
    }
}

/// Renders the configured scheme into one or more chain-rate streams ready
/// for summation. All outputs share `plan.f_chain`.
fn render_scheme(
    cfg: &ExperimentConfig,
    seed: u64,
    x: &SampledSignal,
) -> Result<Vec<SampledSignal>, HarnessError> {
    let init = initial_state(seed);
    match cfg.scheme {
        SchemeId::SingleFastDac => {
            let q = Quantizer::bits(FAST_DAC_BITS, 1.0).map_err(at_stage("quantizer setup"))?;
            let v = x.samples.iter().map(|&u| quantize(u, &q)).collect();
            Ok(vec![SampledSignal::new(v, x.fs)])
        }
        SchemeId::Sdm1 | SchemeId::Sdm2 => {
            let order = if cfg.scheme == SchemeId::Sdm2 {
                Order::Second
            } else {
                Order::First
            };
            let q = Quantizer::two_level(1.0).map_err(at_stage("quantizer setup"))?;
            let spec = ModulatorSpec::new(order, q).with_initial_state(init);
            let trace = sdm_run(&spec, x).map_err(at_stage("modulator"))?;
            Ok(vec![trace.output(x.fs)])
        }
        SchemeId::TiSdm => {
            let q = Quantizer::two_level(1.0).map_err(at_stage("quantizer setup"))?;
            let spec = ModulatorSpec::new(Order::First, q).with_initial_state(init);
            let set = ti_sdm_run(&spec, cfg.m_paths, x).map_err(at_stage("interleave"))?;
            Ok(set.paths().to_vec())
        }
        SchemeId::SdmDemThermo | SchemeId::SdmDemRandom | SchemeId::SdmDemDwa => {
            let q = dem_quantizer(cfg.n_elements)?;
            let full_scale = q.full_scale();
            let spec = ModulatorSpec::new(Order::First, q).with_initial_state(init);
            let trace = sdm_run(&spec, x).map_err(at_stage("modulator"))?;
            let eps = draw_mismatch(cfg.n_elements, cfg.sigma_mm, seed ^ MISMATCH_STREAM_SALT)
                .map_err(at_stage("element array"))?;
            let array = ElementArray::new(full_scale / cfg.n_elements as f64, 1.0, 0.0, eps)
                .map_err(at_stage("element array"))?;
            let strategy = dem_strategy(cfg.scheme).expect("dem scheme");
            let out = dac_convert(
                &trace.output(x.fs),
                full_scale,
                &array,
                strategy,
                seed ^ SELECTION_STREAM_SALT,
            )
            .map_err(at_stage("element conversion"))?;
            Ok(vec![out.v])
        }
    }
}

/// One seed's measurement: the metrics row plus the captured spectrum.
pub struct SeedOutcome {
    pub row: MetricsRow,
    pub spectrum: Spectrum,
}

pub fn run_seed(
    cfg: &ExperimentConfig,
    plan: &RunPlan,
    seed: u64,
) -> Result<SeedOutcome, HarnessError> {
    let x = resonator_sine(plan.f0_hz, plan.f_h, cfg.amplitude, plan.n_gen)
        .map_err(at_stage("tone generation"))?;
    let paths = render_scheme(cfg, seed, &x)?;

    let lpf = design_lowpass(plan.recon_cutoff, RECON_TAPS, Window::Blackman)
        .map_err(at_stage("reconstruction"))?;
    let mut analog = sum_paths(&paths, &lpf).map_err(at_stage("reconstruction"))?;
    if plan.scale != 1.0 {
        for v in &mut analog.samples {
            *v *= plan.scale;
        }
    }

    let captured = scope_capture(&analog, &plan.scope).map_err(at_stage("capture"))?;
    if captured.fs != plan.f_capture {
        return Err(stage_msg(
            "capture",
            format!(
                "scope produced {} but the plan expected {}",
                captured.fs, plan.f_capture
            ),
        ));
    }
    let need = plan.warmup_capture + plan.window_len;
    if captured.samples.len() < need {
        return Err(stage_msg(
            "capture",
            format!("captured {} samples, need {need}", captured.samples.len()),
        ));
    }
    let trimmed = SampledSignal::new(
        captured.samples[plan.warmup_capture..need].to_vec(),
        captured.fs,
    );

    let spectrum = periodogram(&trimmed, Window::Rectangular).map_err(at_stage("analysis"))?;
    let row = match compute_metrics(&spectrum, plan.f_b_hz) {
        Ok(m) => MetricsRow {
            seed,
            f0_hz: plan.f0_hz,
            signal_bin: m.signal_bin,
            snr_db: m.snr_db,
            sndr_db: m.sndr_db,
            sfdr_db: m.sfdr_db,
            thd_db: m.thd_db,
            inband_noise_db: floor_db(m.inband_noise_power),
            inband_noise_power: m.inband_noise_power,
        },
        // Idle channel: nothing rises above DC in the band. Report floor
        // ratios and the raw in-band power so quiet runs still yield a row.
        Err(AnalysisError::DegenerateSignal) => {
            let total =
                measure_inband_noise(&spectrum, plan.f_b_hz, 0).map_err(at_stage("analysis"))?;
            let inband = (total - spectrum.power[0]).max(0.0);
            MetricsRow {
                seed,
                f0_hz: plan.f0_hz,
                signal_bin: 0,
                snr_db: IDLE_RATIO_DB,
                sndr_db: IDLE_RATIO_DB,
                sfdr_db: IDLE_RATIO_DB,
                thd_db: IDLE_RATIO_DB,
                inband_noise_db: floor_db(inband),
                inband_noise_power: inband,
            }
        }
        Err(e) => return Err(at_stage("analysis")(e)),
    };

    Ok(SeedOutcome { row, spectrum })
}

/// Runs every configured seed (in parallel) and assembles the record.
/// Results are collected in seed order, so the record is independent of the
/// rayon thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunRecord, HarnessError> {
    let plan = RunPlan::new(cfg)?;
    let outcomes: Vec<SeedOutcome> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, &plan, seed))
        .collect::<Result<_, _>>()?;

    let mut mean_spectrum = vec![
        0.0f64;
        if outcomes.is_empty() {
            0
        } else {
            outcomes[0].spectrum.power.len()
        }
    ];
    for o in &outcomes {
        for (acc, &p) in mean_spectrum.iter_mut().zip(&o.spectrum.power) {
            *acc += p;
        }
    }
    let inv = if outcomes.is_empty() {
        0.0
    } else {
        1.0 / outcomes.len() as f64
    };
    for v in &mut mean_spectrum {
        *v *= inv;
    }

    let rows: Vec<MetricsRow> = outcomes.into_iter().map(|o| o.row).collect();
    let (mean, std) = match aggregate(&rows) {
        Some((m, s)) => (Some(m), Some(s)),
        None => (None, None),
    };

    Ok(RunRecord {
        config: cfg.clone(),
        f_h: plan.f_h,
        f_chain: plan.f_chain,
        f_capture: plan.f_capture,
        scope_ratio: plan.r_scope,
        window_len: plan.window_len,
        warmup_capture: plan.warmup_capture,
        n_generated: plan.n_gen,
        f_b_hz: plan.f_b_hz,
        band_bins: plan.band_bins,
        f0_requested_hz: plan.f0_requested_hz,
        f0_hz: plan.f0_hz,
        signal_bin: plan.k0,
        normalization: plan.scale,
        rows,
        mean,
        std,
        mean_spectrum,
        bin_hz: plan.bin_hz(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        prng: "chacha8".to_string(),
    })
}

/// One point of an oversampling sweep.
pub use sdmlab_core::analysis::SweepPoint as OsrPoint;

/// Result of `run_osr_sweep`: the fixed band edge and one point per ratio.
#[derive(Clone, Debug)]
pub struct SweepTable {
    pub f_b_hz: f64,
    pub points: Vec<SweepPoint>,
}

/// Sweeps the oversampling ratio at a fixed analysis band: the base
/// configuration's band edge f_b is held, and the clock is rescaled so that
/// each point runs at f_h = 2 * f_b * osr. The measured quantity is the
/// seed-averaged in-band noise power (signal and DC excluded) of the full
/// chain. Runs sequentially in ascending-osr, config-seed order.
pub fn run_osr_sweep(base: &ExperimentConfig, osrs: &[u32]) -> Result<SweepTable, HarnessError> {
    if osrs.is_empty() {
        return Err(ConfigError::Plan {
            reason: "sweep needs at least one osr".to_string(),
        }
        .into());
    }
    if base.seeds.is_empty() {
        return Err(ConfigError::Plan {
            reason: "sweep needs at least one seed".to_string(),
        }
        .into());
    }
    let mut setups = Vec::with_capacity(osrs.len());
    for &osr in osrs {
        let scaled = (base.f_ck_hz as u128) * (osr as u128);
        if !scaled.is_multiple_of(base.osr as u128)
            || scaled / (base.osr as u128) > u64::MAX as u128
        {
            return Err(ConfigError::Plan {
                reason: format!(
                    "cannot hold the band edge: f_ck {} does not scale integrally from osr {} \
                     to osr {osr}",
                    base.f_ck_hz, base.osr
                ),
            }
            .into());
        }
        let mut cfg = base.clone();
        cfg.osr = osr;
        cfg.f_ck_hz = (scaled / base.osr as u128) as u64;
        let plan = RunPlan::new(&cfg)?;
        setups.push((osr, cfg, plan));
    }
    let f_b_hz = setups[0].2.f_b_hz;

    let points = osr_sweep(osrs, &base.seeds, |osr, seed| {
        let (_, cfg, plan) = setups
            .iter()
            .find(|(o, _, _)| *o == osr)
            .expect("setup exists for every swept osr");
        let outcome = run_seed(cfg, plan, seed)?;
        measure_inband_noise(&outcome.spectrum, plan.f_b_hz, 1).map_err(at_stage("analysis"))
    })?;

    Ok(SweepTable { f_b_hz, points })
}
