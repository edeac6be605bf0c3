use crate::modulator::{sdm_run, ModulatorError, ModulatorSpec};
use crate::rate::Rate;
use crate::signal::SampledSignal;

pub const MAX_PATHS: usize = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InterleaveError {
    #[error("path count {0} outside [1, {MAX_PATHS}]")]
    BadPathCount(usize),
    #[error("path {path} has length {got}, expected {want} for an interleaved set")]
    RaggedPaths {
        path: usize,
        got: usize,
        want: usize,
    },
    #[error("paths disagree in sample rate")]
    MixedRates,
    #[error(transparent)]
    Modulator(#[from] ModulatorError),
}

/// One high-rate stream split into `m` phase-skewed low-rate streams:
/// path k holds samples k, k+m, k+2m, ... of the original, at rate fs/m.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyphaseSet {
    paths: Vec<SampledSignal>,
    f_high: Rate,
}

impl PolyphaseSet {
    pub fn paths(&self) -> &[SampledSignal] {
        &self.paths
    }

    pub fn m(&self) -> usize {
        self.paths.len()
    }

    pub fn f_high(&self) -> Rate {
        self.f_high
    }

    pub fn f_low(&self) -> Rate {
        self.paths[0].fs
    }

    /// Total sample count across paths (the original stream length).
    pub fn total_len(&self) -> usize {
        self.paths.iter().map(|p| p.samples.len()).sum()
    }
}

/// Split a stream into `m` polyphase components. When `m` does not divide
/// the length, earlier paths run one sample longer — exactly the samples a
/// rotating demultiplexer would hand them.
pub fn polyphase_decompose(y: &SampledSignal, m: usize) -> Result<PolyphaseSet, InterleaveError> {
    if m == 0 || m > MAX_PATHS {
        return Err(InterleaveError::BadPathCount(m));
    }
    let f_low = y.fs.div(m as u64).expect("m >= 1");
    let mut paths = Vec::with_capacity(m);
    for k in 0..m {
        let samples: Vec<f64> = y.samples.iter().skip(k).step_by(m).copied().collect();
        paths.push(SampledSignal::new(samples, f_low));
    }
    Ok(PolyphaseSet {
        paths,
        f_high: y.fs,
    })
}

/// Reassemble the high-rate stream from its polyphase components.
/// Exact inverse of `polyphase_decompose` for any length and path count.
pub fn multiplex(set: &PolyphaseSet) -> Result<SampledSignal, InterleaveError> {
    let m = set.m();
    if m == 0 || m > MAX_PATHS {
        return Err(InterleaveError::BadPathCount(m));
    }
    let f_low = set.paths[0].fs;
    for p in &set.paths {
        if p.fs != f_low {
            return Err(InterleaveError::MixedRates);
        }
    }
    let total = set.total_len();
    for (k, p) in set.paths.iter().enumerate() {
        let want = total / m + usize::from(k < total % m);
        if p.samples.len() != want {
            return Err(InterleaveError::RaggedPaths {
                path: k,
                got: p.samples.len(),
                want,
            });
        }
    }
    let mut out = Vec::with_capacity(total);
    for i in 0..total {
        out.push(set.paths[i % m].samples[i / m]);
    }
    Ok(SampledSignal::new(out, set.f_high))
}

/// Run the modulator at the high rate and demultiplex its output across
/// `m` paths — the time-interleaved architecture: one shared loop, m slow
/// converters each seeing every m-th decision.
pub fn ti_sdm_run(
    spec: &ModulatorSpec,
    m: usize,
    x: &SampledSignal,
) -> Result<PolyphaseSet, InterleaveError> {
    if m == 0 || m > MAX_PATHS {
        return Err(InterleaveError::BadPathCount(m));
    }
    let trace = sdm_run(spec, x)?;
    polyphase_decompose(&SampledSignal::new(trace.y, x.fs), m)
}

/// How the per-path converters are driven.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathMode {
    /// Every path drives its own converter at the low rate.
    Interleaved,
    /// One converter takes the full-rate stream; the other path slots idle
    /// at zero (a held reference level contributes only a DC shift, so the
    /// idle paths are modeled as silent).
    Muxed,
}

/// Map a polyphase set onto DAC inputs according to `mode`. Both modes
/// return `m` equal-length, equal-rate streams ready for per-path
/// conversion and summing.
pub fn select_path_source(
    set: &PolyphaseSet,
    mode: PathMode,
) -> Result<Vec<SampledSignal>, InterleaveError> {
    match mode {
        PathMode::Interleaved => {
            // Summing requires equal lengths; an interleaved set is only
            // ragged when the source length isn't a multiple of m.
            let want = set.paths[0].samples.len();
            for (k, p) in set.paths.iter().enumerate() {
                if p.samples.len() != want {
                    return Err(InterleaveError::RaggedPaths {
                        path: k,
                        got: p.samples.len(),
                        want,
                    });
                }
            }
            Ok(set.paths().to_vec())
        }
        PathMode::Muxed => {
            let full = multiplex(set)?;
            let zeros = SampledSignal::new(vec![0.0; full.samples.len()], full.fs);
            let mut out = vec![full];
            out.extend(std::iter::repeat_n(zeros, set.m() - 1));
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulator::{Order, Quantizer};
    use crate::signal::resonator_sine;

    fn stream(n: usize, fs_hz: u64) -> SampledSignal {
        SampledSignal::new((0..n).map(|i| i as f64).collect(), Rate::from_hz(fs_hz))
    }

    #[test]
    fn decompose_splits_phases_and_rates() {
        let y = stream(10, 1000);
        let set = polyphase_decompose(&y, 4).unwrap();
        assert_eq!(set.m(), 4);
        assert_eq!(set.f_low(), Rate::from_hz(250));
        assert_eq!(set.paths()[0].samples, vec![0.0, 4.0, 8.0]);
        assert_eq!(set.paths()[1].samples, vec![1.0, 5.0, 9.0]);
        assert_eq!(set.paths()[2].samples, vec![2.0, 6.0]);
        assert_eq!(set.paths()[3].samples, vec![3.0, 7.0]);
    }

    #[test]
    fn multiplex_inverts_decompose_for_all_shapes() {
        for n in [0usize, 1, 5, 16, 17, 23] {
            for m in 1..=8 {
                let y = stream(n, 4000);
                let round = multiplex(&polyphase_decompose(&y, m).unwrap()).unwrap();
                assert_eq!(round, y, "n={n} m={m}");
            }
        }
    }

    #[test]
    fn multiplex_rejects_inconsistent_sets() {
        // Shortening path 0 leaves path 1 longer — a shape no rotating
        // demultiplexer produces (earlier paths carry the longer tails).
        let y = stream(8, 1000);
        let mut set = polyphase_decompose(&y, 2).unwrap();
        set.paths[0].samples.pop();
        assert!(matches!(
            multiplex(&set),
            Err(InterleaveError::RaggedPaths { .. })
        ));
    }

    #[test]
    fn path_count_bounds_enforced() {
        let y = stream(8, 1000);
        assert!(matches!(
            polyphase_decompose(&y, 0),
            Err(InterleaveError::BadPathCount(0))
        ));
        assert!(matches!(
            polyphase_decompose(&y, 9),
            Err(InterleaveError::BadPathCount(9))
        ));
    }

    #[test]
    fn ti_run_equals_decomposed_full_rate_run() {
        let fs = Rate::from_hz(1_000_000);
        let x = resonator_sine(31_250.0, fs, 0.6, 4096).unwrap();
        let spec = ModulatorSpec::new(Order::First, Quantizer::two_level(1.0).unwrap())
            .with_initial_state([0.25, 0.0]);
        for m in 1..=8 {
            let ti = ti_sdm_run(&spec, m, &x).unwrap();
            let full = sdm_run(&spec, &x).unwrap();
            let direct = polyphase_decompose(&SampledSignal::new(full.y, fs), m).unwrap();
            assert_eq!(ti, direct, "m={m}");
        }
    }

    #[test]
    fn muxed_mode_routes_everything_to_path_zero() {
        let y = stream(12, 1000);
        let set = polyphase_decompose(&y, 3).unwrap();
        let paths = select_path_source(&set, PathMode::Muxed).unwrap();
        assert_eq!(paths.len(), 3);
        assert_eq!(paths[0], y);
        assert!(paths[1].samples.iter().all(|&v| v == 0.0));
        assert_eq!(paths[1].fs, y.fs);
        assert_eq!(paths[2].samples.len(), 12);
    }

    #[test]
    fn interleaved_mode_needs_even_split() {
        let even = polyphase_decompose(&stream(12, 1000), 4).unwrap();
        assert_eq!(
            select_path_source(&even, PathMode::Interleaved)
                .unwrap()
                .len(),
            4
        );
        let ragged = polyphase_decompose(&stream(10, 1000), 4).unwrap();
        assert!(matches!(
            select_path_source(&ragged, PathMode::Interleaved),
            Err(InterleaveError::RaggedPaths { .. })
        ));
    }
}
