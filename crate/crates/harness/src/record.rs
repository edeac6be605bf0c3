//! Run records: everything needed to reproduce and audit one experiment.

use sdmlab_core::Rate;

use crate::config::ExperimentConfig;

/// Per-seed measurement results.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub seed: u64,
    /// Snapped tone frequency actually generated.
    pub f0_hz: f64,
    /// Bin index of the tone in the captured window (0 on idle runs).
    pub signal_bin: usize,
    pub snr_db: f64,
    pub sndr_db: f64,
    pub sfdr_db: f64,
    pub thd_db: f64,
    pub inband_noise_db: f64,
    /// Linear in-band noise power (not exported to CSV; kept for sweeps).
    pub inband_noise_power: f64,
}

/// Mean or spread of the dB columns across seeds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aggregate {
    pub snr_db: f64,
    pub sndr_db: f64,
    pub sfdr_db: f64,
    pub thd_db: f64,
    pub inband_noise_db: f64,
}

fn mean(values: impl Iterator<Item = f64> + Clone, n: f64) -> f64 {
    values.sum::<f64>() / n
}

/// (mean, population standard deviation) of the dB columns.
pub fn aggregate(rows: &[MetricsRow]) -> Option<(Aggregate, Aggregate)> {
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    let stat = |get: fn(&MetricsRow) -> f64| {
        let m = mean(rows.iter().map(get), n);
        let var = rows.iter().map(|r| (get(r) - m).powi(2)).sum::<f64>() / n;
        (m, var.sqrt())
    };
    let (snr_m, snr_s) = stat(|r| r.snr_db);
    let (sndr_m, sndr_s) = stat(|r| r.sndr_db);
    let (sfdr_m, sfdr_s) = stat(|r| r.sfdr_db);
    let (thd_m, thd_s) = stat(|r| r.thd_db);
    let (noise_m, noise_s) = stat(|r| r.inband_noise_db);
    Some((
        Aggregate {
            snr_db: snr_m,
            sndr_db: sndr_m,
            sfdr_db: sfdr_m,
            thd_db: thd_m,
            inband_noise_db: noise_m,
        },
        Aggregate {
            snr_db: snr_s,
            sndr_db: sndr_s,
            sfdr_db: sfdr_s,
            thd_db: thd_s,
            inband_noise_db: noise_s,
        },
    ))
}

/// Complete record of one experiment: configuration echo, derived rate
/// chain, per-seed metrics, aggregates and the seed-averaged spectrum.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub f_h: Rate,
    pub f_chain: Rate,
    pub f_capture: Rate,
    pub scope_ratio: u64,
    pub window_len: usize,
    pub warmup_capture: usize,
    pub n_generated: usize,
    pub f_b_hz: f64,
    pub band_bins: usize,
    pub f0_requested_hz: f64,
    pub f0_hz: f64,
    pub signal_bin: usize,
    pub normalization: f64,
    pub rows: Vec<MetricsRow>,
    pub mean: Option<Aggregate>,
    pub std: Option<Aggregate>,
    /// Linear mean over seeds of the captured power spectra.
    pub mean_spectrum: Vec<f64>,
    pub bin_hz: f64,
    pub version: String,
    pub prng: String,
}

impl RunRecord {
    /// Stable plain-text rendering for `run_record.txt`. Byte-identical for
    /// identical runs, regardless of thread count.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(2048);
        let cfg = &self.config;
        s.push_str("sdmlab run record\n");
        s.push_str(&format!("version = {}\n", self.version));
        s.push_str(&format!("prng = {}\n", self.prng));
        s.push_str(&format!("scheme = {}\n", cfg.scheme));
        s.push_str(&format!("f_ck_hz = {}\n", cfg.f_ck_hz));
        s.push_str(&format!("n_div = {}\n", cfg.n_div));
        s.push_str(&format!("m_paths = {}\n", cfg.m_paths));
        s.push_str(&format!("osr = {}\n", cfg.osr));
        s.push_str(&format!("amplitude = {:.6}\n", cfg.amplitude));
        s.push_str(&format!("f0_cfg_hz = {:.6}\n", cfg.f0_hz));
        s.push_str(&format!("n_samples = {}\n", cfg.n_samples));
        s.push_str(&format!("n_elements = {}\n", cfg.n_elements));
        s.push_str(&format!("sigma_mm = {:.6}\n", cfg.sigma_mm));
        let seeds: Vec<String> = cfg.seeds.iter().map(u64::to_string).collect();
        s.push_str(&format!("seeds = {}\n", seeds.join(",")));
        s.push_str(&format!("out_dir = {}\n", cfg.out_dir.display()));
        s.push_str(&format!("f_h = {}\n", self.f_h));
        s.push_str(&format!("f_chain = {}\n", self.f_chain));
        s.push_str(&format!("f_capture = {}\n", self.f_capture));
        s.push_str(&format!("scope_ratio = {}\n", self.scope_ratio));
        s.push_str(&format!("window_len = {}\n", self.window_len));
        s.push_str(&format!("warmup_capture = {}\n", self.warmup_capture));
        s.push_str(&format!("n_generated = {}\n", self.n_generated));
        s.push_str(&format!("f_b_hz = {:.6}\n", self.f_b_hz));
        s.push_str(&format!("band_bins = {}\n", self.band_bins));
        s.push_str(&format!("f0_requested_hz = {:.6}\n", self.f0_requested_hz));
        s.push_str(&format!("f0_hz = {:.6}\n", self.f0_hz));
        s.push_str(&format!("signal_bin = {}\n", self.signal_bin));
        s.push_str(&format!("normalization = {:.6}\n", self.normalization));
        for r in &self.rows {
            s.push_str(&format!(
                "row seed={} signal_bin={} snr_db={:.6} sndr_db={:.6} sfdr_db={:.6} \
                 thd_db={:.6} inband_noise_db={:.6}\n",
                r.seed, r.signal_bin, r.snr_db, r.sndr_db, r.sfdr_db, r.thd_db, r.inband_noise_db
            ));
        }
        for (tag, agg) in [("mean", &self.mean), ("std", &self.std)] {
            if let Some(a) = agg {
                s.push_str(&format!(
                    "agg {tag} snr_db={:.6} sndr_db={:.6} sfdr_db={:.6} thd_db={:.6} \
                     inband_noise_db={:.6}\n",
                    a.snr_db, a.sndr_db, a.sfdr_db, a.thd_db, a.inband_noise_db
                ));
            }
        }
        s
    }
}
