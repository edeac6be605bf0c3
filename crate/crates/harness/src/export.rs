//! File outputs: metrics/spectrum CSVs, the plain-text run record, and
//! integer stimulus vectors for hardware replay.

use std::fs;
use std::path::{Path, PathBuf};

use sdmlab_core::analysis::floor_db;
use sdmlab_core::dem::code_of;
use sdmlab_core::interleave::{polyphase_decompose, ti_sdm_run};
use sdmlab_core::modulator::{quantize, sdm_run, ModulatorSpec, Order, Quantizer};
use sdmlab_core::signal::resonator_sine;
use sdmlab_core::{Rate, SampledSignal};

use crate::config::ExperimentConfig;
use crate::pipeline::{HarnessError, RunPlan, SweepTable, FAST_DAC_BITS};
use crate::record::RunRecord;
use crate::scheme::SchemeId;

pub const METRICS_HEADER: &str =
    "seed,f0_hz,signal_bin,snr_db,sndr_db,sfdr_db,thd_db,inband_noise_db";
pub const SPECTRUM_HEADER: &str = "frequency_hz,power_db";
pub const SWEEP_HEADER: &str = "osr,mean_power,mean_db,std_db,n_seeds";

/// Renders `metrics.csv`: one row per seed, then `mean` and `std` rows.
/// A record with no seeds renders as the header alone.
pub fn metrics_csv(record: &RunRecord) -> String {
    let mut s = String::with_capacity(256);
    s.push_str(METRICS_HEADER);
    s.push('\n');
    for r in &record.rows {
        s.push_str(&format!(
            "{},{:.6},{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.seed,
            r.f0_hz,
            r.signal_bin,
            r.snr_db,
            r.sndr_db,
            r.sfdr_db,
            r.thd_db,
            r.inband_noise_db
        ));
    }
    if let Some(m) = &record.mean {
        s.push_str(&format!(
            "mean,{:.6},{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            record.f0_hz,
            record.signal_bin,
            m.snr_db,
            m.sndr_db,
            m.sfdr_db,
            m.thd_db,
            m.inband_noise_db
        ));
    }
    if let Some(d) = &record.std {
        s.push_str(&format!(
            "std,0.000000,0,{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            d.snr_db, d.sndr_db, d.sfdr_db, d.thd_db, d.inband_noise_db
        ));
    }
    s
}

/// Renders `spectrum.csv` from the seed-averaged spectrum; the first data
/// row is the DC bin at 0 Hz.
pub fn spectrum_csv(record: &RunRecord) -> String {
    let mut s = String::with_capacity(32 * record.mean_spectrum.len() + 32);
    s.push_str(SPECTRUM_HEADER);
    s.push('\n');
    for (k, &p) in record.mean_spectrum.iter().enumerate() {
        s.push_str(&format!(
            "{:.6},{:.6}\n",
            k as f64 * record.bin_hz,
            floor_db(p)
        ));
    }
    s
}

/// Renders `sweep.csv` from an oversampling sweep.
pub fn sweep_csv(table: &SweepTable) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for p in &table.points {
        s.push_str(&format!(
            "{},{:.6e},{:.6},{:.6},{}\n",
            p.osr, p.mean_power, p.mean_db, p.std_db, p.n_seeds
        ));
    }
    s
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf, HarnessError> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|source| HarnessError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes `run_record.txt`, `metrics.csv` and `spectrum.csv` into `out_dir`,
/// creating it if needed. Returns the paths written.
pub fn write_outputs(record: &RunRecord, out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    ensure_dir(out_dir)?;
    Ok(vec![
        write_file(out_dir, "run_record.txt", &record.to_text())?,
        write_file(out_dir, "metrics.csv", &metrics_csv(record))?,
        write_file(out_dir, "spectrum.csv", &spectrum_csv(record))?,
    ])
}

/// Rate formatted for vector headers: integer Hz, or `num/den` when the
/// exact rate is fractional.
fn rate_token(r: Rate) -> String {
    if r.denom() == 1 {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn vector_file(header: &str, codes: &[i32]) -> String {
    let mut s = String::with_capacity(header.len() + 1 + codes.len() * 3);
    s.push_str(header);
    s.push('\n');
    for c in codes {
        s.push_str(&format!("{c}\n"));
    }
    s
}

fn codes_from_levels(
    levels: &[f64],
    full_scale: f64,
    n_units: usize,
) -> Result<Vec<i32>, HarnessError> {
    levels
        .iter()
        .map(|&v| code_of(v, full_scale, n_units))
        .collect::<Result<Vec<i32>, _>>()
        .map_err(|e| HarnessError::Stage {
            stage: "vector encoding",
            source: Box::new(e),
        })
}

/// Builds hardware replay vectors for the configured scheme: `(file name,
/// file content)` pairs, one muxed full-rate stream plus one file per path
/// for interleaved banks.
///
/// Vectors replay from reset: the loop starts from the zero state, and no
/// random substream is consumed (codes are independent of element mismatch
/// and selection order). The streams cover exactly the analysis window —
/// the same warmup prefix the scope discards is dropped here, so a hardware
/// capture of these vectors lines up with the recorded metrics.
pub fn build_golden_vectors(cfg: &ExperimentConfig) -> Result<Vec<(String, String)>, HarnessError> {
    let plan = RunPlan::new(cfg)?;
    let x = resonator_sine(plan.f0_hz, plan.f_h, cfg.amplitude, plan.n_gen).map_err(|e| {
        HarnessError::Stage {
            stage: "tone generation",
            source: Box::new(e),
        }
    })?;
    let skip = plan.warmup_capture * plan.r_scope as usize * plan.chain_div as usize;
    let take = cfg.n_samples;
    let header = format!(
        "# f_h={} m={} scheme={}",
        rate_token(plan.f_h),
        if cfg.scheme.uses_paths() {
            cfg.m_paths
        } else {
            1
        },
        cfg.scheme
    );

    let (muxed_levels, full_scale, n_units) = match cfg.scheme {
        SchemeId::SingleFastDac => {
            let q = Quantizer::bits(FAST_DAC_BITS, 1.0).map_err(|e| HarnessError::Stage {
                stage: "quantizer setup",
                source: Box::new(e),
            })?;
            let v: Vec<f64> = x.samples.iter().map(|&u| quantize(u, &q)).collect();
            (v, 1.0, 1usize << FAST_DAC_BITS)
        }
        SchemeId::Sdm1 | SchemeId::Sdm2 => {
            let order = if cfg.scheme == SchemeId::Sdm2 {
                Order::Second
            } else {
                Order::First
            };
            let q = Quantizer::two_level(1.0).map_err(|e| HarnessError::Stage {
                stage: "quantizer setup",
                source: Box::new(e),
            })?;
            let spec = ModulatorSpec::new(order, q);
            let trace = sdm_run(&spec, &x).map_err(|e| HarnessError::Stage {
                stage: "modulator",
                source: Box::new(e),
            })?;
            (trace.y, 1.0, 1)
        }
        SchemeId::TiSdm => {
            let q = Quantizer::two_level(1.0).map_err(|e| HarnessError::Stage {
                stage: "quantizer setup",
                source: Box::new(e),
            })?;
            let spec = ModulatorSpec::new(Order::First, q);
            let set = ti_sdm_run(&spec, cfg.m_paths, &x).map_err(|e| HarnessError::Stage {
                stage: "interleave",
                source: Box::new(e),
            })?;
            let muxed =
                sdmlab_core::interleave::multiplex(&set).map_err(|e| HarnessError::Stage {
                    stage: "interleave",
                    source: Box::new(e),
                })?;
            (muxed.samples, 1.0, 1)
        }
        SchemeId::SdmDemThermo | SchemeId::SdmDemRandom | SchemeId::SdmDemDwa => {
            let q = Quantizer::uniform(2 * cfg.n_elements + 1, 1.0).map_err(|e| {
                HarnessError::Stage {
                    stage: "quantizer setup",
                    source: Box::new(e),
                }
            })?;
            let fs = q.full_scale();
            let spec = ModulatorSpec::new(Order::First, q);
            let trace = sdm_run(&spec, &x).map_err(|e| HarnessError::Stage {
                stage: "modulator",
                source: Box::new(e),
            })?;
            (trace.y, fs, cfg.n_elements)
        }
    };

    let trimmed: Vec<f64> = muxed_levels.into_iter().skip(skip).take(take).collect();
    if trimmed.len() != take {
        return Err(HarnessError::Stage {
            stage: "vector encoding",
            source: format!("stream too short: {} of {take} samples", trimmed.len()).into(),
        });
    }
    let muxed_codes = codes_from_levels(&trimmed, full_scale, n_units)?;

    let mut files = vec![(
        "vectors_muxed.txt".to_string(),
        vector_file(&header, &muxed_codes),
    )];
    if cfg.scheme.uses_paths() && cfg.m_paths > 1 {
        let muxed_signal = SampledSignal::new(trimmed, plan.f_h);
        let set =
            polyphase_decompose(&muxed_signal, cfg.m_paths).map_err(|e| HarnessError::Stage {
                stage: "interleave",
                source: Box::new(e),
            })?;
        for (k, path) in set.paths().iter().enumerate() {
            let codes = codes_from_levels(&path.samples, full_scale, n_units)?;
            files.push((format!("vectors_path{k}.txt"), vector_file(&header, &codes)));
        }
    }
    Ok(files)
}

/// Writes the replay vectors into `out_dir` and returns the paths.
pub fn export_golden_vectors(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    ensure_dir(out_dir)?;
    let mut paths = Vec::new();
    for (name, content) in build_golden_vectors(cfg)? {
        paths.push(write_file(out_dir, &name, &content)?);
    }
    Ok(paths)
}

/// Writes `sweep.csv` into `out_dir`.
pub fn write_sweep(table: &SweepTable, out_dir: &Path) -> Result<PathBuf, HarnessError> {
    ensure_dir(out_dir)?;
    write_file(out_dir, "sweep.csv", &sweep_csv(table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{aggregate, MetricsRow};

    fn record_with(rows: Vec<MetricsRow>) -> RunRecord {
        let cfg = ExperimentConfig::default();
        let plan = RunPlan::new(&cfg).unwrap();
        let (mean, std) = match aggregate(&rows) {
            Some((m, s)) => (Some(m), Some(s)),
            None => (None, None),
        };
        RunRecord {
            config: cfg,
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
            mean_spectrum: vec![],
            bin_hz: plan.bin_hz(),
            version: "test".into(),
            prng: "chacha8".into(),
        }
    }

    #[test]
    fn empty_record_renders_header_only() {
        let rec = record_with(vec![]);
        assert_eq!(metrics_csv(&rec), format!("{METRICS_HEADER}\n"));
        assert_eq!(spectrum_csv(&rec), format!("{SPECTRUM_HEADER}\n"));
    }

    #[test]
    fn metrics_csv_has_one_row_per_seed_plus_aggregates() {
        let row = MetricsRow {
            seed: 9,
            f0_hz: 89263.916015625,
            signal_bin: 117,
            snr_db: 60.0,
            sndr_db: 59.0,
            sfdr_db: 70.0,
            thd_db: -65.0,
            inband_noise_db: -60.0,
            inband_noise_power: 1e-6,
        };
        let text = metrics_csv(&record_with(vec![row]));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4); // header, seed row, mean, std
        assert!(lines[1].starts_with("9,89263.916016,117,60.000000,"));
        assert!(lines[2].starts_with("mean,"));
        assert!(lines[3].starts_with("std,"));
    }
}
