//! Experiment configuration: flat `key = value` files with strict diagnostics.

use std::path::PathBuf;

use thiserror::Error;

use crate::scheme::SchemeId;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: key `{key}` wants {want}, got `{got}`")]
    BadValue {
        line: usize,
        key: String,
        want: &'static str,
        got: String,
    },
    #[error("line {line}: unknown scheme `{got}` (valid: {valid})")]
    UnknownScheme {
        line: usize,
        got: String,
        valid: String,
    },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("unrunnable configuration: {reason}")]
    Plan { reason: String },
}

/// Full description of one experiment. Defaults model the reference bench
/// setup: 100 MHz board clock divided by two into a 50 MHz modulator.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub scheme: SchemeId,
    /// Board clock in Hz.
    pub f_ck_hz: u64,
    /// Integer divider from board clock to modulator clock.
    pub n_div: u64,
    /// Parallel paths for the interleaved scheme.
    pub m_paths: usize,
    /// Oversampling ratio; the analysis band is f_h / (2 * osr).
    pub osr: u32,
    /// Test tone amplitude relative to converter full scale.
    pub amplitude: f64,
    /// Requested tone frequency in Hz; 0 picks ~23% of the analysis band.
    pub f0_hz: f64,
    /// Modulator-rate samples in the analysis window (power of two).
    pub n_samples: usize,
    /// Unit elements in the DEM array.
    pub n_elements: usize,
    /// Relative sigma of the static element mismatch.
    pub sigma_mm: f64,
    /// One full run per seed; may be empty (produces an empty record).
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scheme: SchemeId::Sdm1,
            f_ck_hz: 100_000_000,
            n_div: 2,
            m_paths: 4,
            osr: 64,
            amplitude: 0.5,
            f0_hz: 0.0,
            n_samples: 65_536,
            n_elements: 8,
            sigma_mm: 0.01,
            seeds: vec![1],
            out_dir: PathBuf::from("out"),
        }
    }
}

const KEYS: &[&str] = &[
    "scheme",
    "f_ck_hz",
    "n_div",
    "m_paths",
    "osr",
    "amplitude",
    "f0_hz",
    "n_samples",
    "n_elements",
    "sigma_mm",
    "seeds",
    "out_dir",
];

fn parse_num<T: std::str::FromStr>(
    line: usize,
    key: &str,
    want: &'static str,
    val: &str,
) -> Result<T, ConfigError> {
    val.parse().map_err(|_| ConfigError::BadValue {
        line,
        key: key.to_owned(),
        want,
        got: val.to_owned(),
    })
}

impl ExperimentConfig {
    /// Parses a flat `key = value` document. `#` lines and blank lines are
    /// skipped; every other line must assign exactly one known key. An empty
    /// document yields the defaults.
    pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut seen: Vec<&'static str> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((lhs, rhs)) = trimmed.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: trimmed.to_owned(),
                });
            };
            let key = lhs.trim();
            let val = rhs.trim();
            let Some(&canon) = KEYS.iter().find(|k| **k == key) else {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_owned(),
                });
            };
            if seen.contains(&canon) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_owned(),
                });
            }
            seen.push(canon);
            match canon {
                "scheme" => {
                    cfg.scheme =
                        SchemeId::parse(val).ok_or_else(|| ConfigError::UnknownScheme {
                            line,
                            got: val.to_owned(),
                            valid: crate::scheme::list_schemes()
                                .iter()
                                .map(|(id, _)| *id)
                                .collect::<Vec<_>>()
                                .join(", "),
                        })?;
                }
                "f_ck_hz" => cfg.f_ck_hz = parse_num(line, key, "a positive integer (Hz)", val)?,
                "n_div" => cfg.n_div = parse_num(line, key, "a positive integer", val)?,
                "m_paths" => cfg.m_paths = parse_num(line, key, "an integer in 1..=8", val)?,
                "osr" => cfg.osr = parse_num(line, key, "an integer >= 4", val)?,
                "amplitude" => cfg.amplitude = parse_num(line, key, "a number in [0, 2]", val)?,
                "f0_hz" => cfg.f0_hz = parse_num(line, key, "a frequency in Hz", val)?,
                "n_samples" => cfg.n_samples = parse_num(line, key, "a power of two", val)?,
                "n_elements" => {
                    cfg.n_elements = parse_num(line, key, "an integer in 1..=256", val)?
                }
                "sigma_mm" => cfg.sigma_mm = parse_num(line, key, "a number in [0, 0.5]", val)?,
                "seeds" => {
                    let mut seeds = Vec::new();
                    for part in val.split(',') {
                        let part = part.trim();
                        if part.is_empty() {
                            continue;
                        }
                        seeds.push(parse_num(line, key, "comma-separated integers", part)?);
                    }
                    cfg.seeds = seeds;
                }
                "out_dir" => cfg.out_dir = PathBuf::from(val),
                _ => unreachable!(),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks field ranges and cross-field consistency. Rate-chain checks
    /// (scope ratio, window length) live in `RunPlan::new`.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn fail(field: &'static str, reason: String) -> Result<(), ConfigError> {
            Err(ConfigError::Invalid { field, reason })
        }
        if self.f_ck_hz == 0 {
            return fail("f_ck_hz", "clock must be positive".into());
        }
        if self.n_div == 0 {
            return fail("n_div", "divider must be at least 1".into());
        }
        if self.m_paths == 0 || self.m_paths > 8 {
            return fail("m_paths", format!("{} is outside 1..=8", self.m_paths));
        }
        if self.scheme.uses_paths() && !self.m_paths.is_power_of_two() {
            return fail(
                "m_paths",
                format!(
                    "{} paths: the interleaved scheme needs a power of two so the \
                     per-path rate divides the scope decimation chain",
                    self.m_paths
                ),
            );
        }
        if self.osr < 4 {
            return fail("osr", format!("{} is below the minimum of 4", self.osr));
        }
        if !self.n_samples.is_power_of_two() {
            return fail(
                "n_samples",
                format!("{} is not a power of two", self.n_samples),
            );
        }
        if !(128..=1 << 24).contains(&self.n_samples) {
            return fail(
                "n_samples",
                format!("{} is outside 128..=16777216", self.n_samples),
            );
        }
        let band = 2 * self.osr as usize;
        if !self.n_samples.is_multiple_of(band) || self.n_samples / band < 4 {
            return fail(
                "n_samples",
                format!(
                    "{} leaves fewer than 4 analysis bins at osr {} \
                     (need a multiple of {band} that is at least {})",
                    self.n_samples,
                    self.osr,
                    4 * band
                ),
            );
        }
        if !self.amplitude.is_finite() || !(0.0..=2.0).contains(&self.amplitude) {
            return fail("amplitude", format!("{} is outside [0, 2]", self.amplitude));
        }
        if !self.f0_hz.is_finite() || self.f0_hz < 0.0 {
            return fail("f0_hz", format!("{} is not a valid frequency", self.f0_hz));
        }
        if self.n_elements == 0 || self.n_elements > 256 {
            return fail(
                "n_elements",
                format!("{} is outside 1..=256", self.n_elements),
            );
        }
        if !self.sigma_mm.is_finite() || !(0.0..=0.5).contains(&self.sigma_mm) {
            return fail("sigma_mm", format!("{} is outside [0, 0.5]", self.sigma_mm));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn comments_and_blanks_are_skipped() {
        let cfg = ExperimentConfig::parse("# lab setup\n\n  osr = 32\n").unwrap();
        assert_eq!(cfg.osr, 32);
    }

    #[test]
    fn full_document_parses() {
        let text = "\
scheme = ti_sdm
f_ck_hz = 100000000
n_div = 2
m_paths = 4
osr = 64
amplitude = 0.9
f0_hz = 100000
n_samples = 65536
n_elements = 16
sigma_mm = 0.02
seeds = 1, 2, 3
out_dir = results/ti
";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.scheme, SchemeId::TiSdm);
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
        assert_eq!(cfg.out_dir, PathBuf::from("results/ti"));
        assert_eq!(cfg.amplitude, 0.9);
    }

    #[test]
    fn syntax_error_names_the_line() {
        let err = ExperimentConfig::parse("osr = 32\nnot an assignment\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Syntax {
                line: 2,
                text: "not an assignment".into()
            }
        );
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        let err = ExperimentConfig::parse("bogus = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: 1, .. }));
        let err = ExperimentConfig::parse("osr = 32\nosr = 64\n").unwrap_err();
        assert!(matches!(err, ConfigError::DuplicateKey { line: 2, .. }));
    }

    #[test]
    fn bad_scheme_lists_valid_ids() {
        let err = ExperimentConfig::parse("scheme = sdm_9\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sdm_9"));
        assert!(msg.contains("ti_sdm"));
        assert!(msg.contains("single_fast_dac"));
    }

    #[test]
    fn non_power_of_two_window_is_called_out() {
        let err = ExperimentConfig::parse("n_samples = 1000\n").unwrap_err();
        assert!(err.to_string().contains("not a power of two"));
    }

    #[test]
    fn band_divisibility_is_enforced() {
        // 512 samples / (2*128) = 2 bins: too few.
        let err = ExperimentConfig::parse("n_samples = 512\nosr = 128\n").unwrap_err();
        assert!(matches!(
            err,
            ConfigError::Invalid {
                field: "n_samples",
                ..
            }
        ));
    }

    #[test]
    fn interleave_requires_power_of_two_paths() {
        let err = ExperimentConfig::parse("scheme = ti_sdm\nm_paths = 3\n").unwrap_err();
        assert!(matches!(
            err,
            ConfigError::Invalid {
                field: "m_paths",
                ..
            }
        ));
        // Non-interleaved schemes don't care.
        ExperimentConfig::parse("m_paths = 3\n").unwrap();
    }

    #[test]
    fn empty_seed_list_is_allowed() {
        let cfg = ExperimentConfig::parse("seeds =\n").unwrap();
        assert!(cfg.seeds.is_empty());
    }

    #[test]
    fn numeric_garbage_is_reported_with_expectation() {
        let err = ExperimentConfig::parse("osr = sixty\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("osr") && msg.contains("sixty"));
    }
}
