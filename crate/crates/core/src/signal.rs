use crate::rate::{Rate, RateError};

/// A real-valued stream tagged with its exact sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledSignal {
    pub samples: Vec<f64>,
    pub fs: Rate,
}

impl SampledSignal {
    pub fn new(samples: Vec<f64>, fs: Rate) -> Self {
        SampledSignal { samples, fs }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Taper applied before spectral estimation or used to shape FIR design.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    Rectangular,
    Hann,
    Blackman,
}

impl Window {
    /// Window weight at tap `i` of `n`.
    pub fn weight(self, i: usize, n: usize) -> f64 {
        if n <= 1 {
            return 1.0;
        }
        let t = i as f64 / (n - 1) as f64;
        match self {
            Window::Rectangular => 1.0,
            Window::Hann => 0.5 - 0.5 * (std::f64::consts::TAU * t).cos(),
            Window::Blackman => {
                0.42 - 0.5 * (std::f64::consts::TAU * t).cos()
                    + 0.08 * (2.0 * std::f64::consts::TAU * t).cos()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SignalError {
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("tone frequency {f0} Hz outside [0, {nyquist}] Hz")]
    TonePlacement { f0: f64, nyquist: f64 },
    #[error("amplitude must be finite, got {0}")]
    NonFiniteAmplitude(f64),
    #[error("normalized cutoff {0} must lie strictly inside (0, 0.5)")]
    CutoffOutOfRange(f64),
    #[error("filter needs an odd tap count of at least 3, got {0}")]
    BadTapCount(usize),
    #[error("sum_paths needs at least one path")]
    NoPaths,
    #[error("paths disagree in sample rate")]
    MixedRates,
    #[error("paths disagree in length: {0} vs {1}")]
    MixedLengths(usize, usize),
    #[error("decimation ratio must be at least 1")]
    ZeroRatio,
}

/// Integer clock divider: `f_ck / n_div`, exact.
pub fn divide_clock(f_ck: Rate, n_div: u64) -> Result<Rate, SignalError> {
    Ok(f_ck.div(n_div)?)
}

/// Coherent sine generator using the two-pole resonator recurrence
/// `s[k] = 2 cos(w) s[k-1] - s[k-2]`, `w = 2*pi*f0/fs`, seeded so that
/// `s[k] = A sin(w k)`. One multiply per sample; amplitude drift over 1e5
/// samples stays below 1e-6 relative.
pub fn resonator_sine(
    f0_hz: f64,
    fs: Rate,
    amplitude: f64,
    n: usize,
) -> Result<SampledSignal, SignalError> {
    let nyquist = fs.hz() / 2.0;
    if !f0_hz.is_finite() || f0_hz < 0.0 || f0_hz > nyquist {
        return Err(SignalError::TonePlacement { f0: f0_hz, nyquist });
    }
    if !amplitude.is_finite() {
        return Err(SignalError::NonFiniteAmplitude(amplitude));
    }
    let w = std::f64::consts::TAU * f0_hz / fs.hz();
    let k = 2.0 * w.cos();
    let mut samples = Vec::with_capacity(n);
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for i in 0..n {
        let s = if i == 0 {
            0.0
        } else if i == 1 {
            amplitude * w.sin()
        } else {
            k * s1 - s2
        };
        samples.push(s);
        s2 = s1;
        s1 = s;
    }
    Ok(SampledSignal::new(samples, fs))
}

/// Linear-phase FIR filter, stored as its tap vector.
#[derive(Clone, Debug, PartialEq)]
pub struct FirFilter {
    taps: Vec<f64>,
}

impl FirFilter {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Magnitude response at normalized frequency `f` (cycles/sample).
    pub fn magnitude_at(&self, f: f64) -> f64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for (i, &h) in self.taps.iter().enumerate() {
            let ph = -std::f64::consts::TAU * f * i as f64;
            re += h * ph.cos();
            im += h * ph.sin();
        }
        (re * re + im * im).sqrt()
    }
}

/// Windowed-sinc low-pass design, normalized to unit DC gain.
///
/// `cutoff` is the -6 dB point in cycles/sample, strictly inside (0, 0.5);
/// `num_taps` must be odd so the filter has an integer group delay.
pub fn design_lowpass(
    cutoff: f64,
    num_taps: usize,
    window: Window,
) -> Result<FirFilter, SignalError> {
    if !cutoff.is_finite() || cutoff <= 0.0 || cutoff >= 0.5 {
        return Err(SignalError::CutoffOutOfRange(cutoff));
    }
    if num_taps < 3 || num_taps.is_multiple_of(2) {
        return Err(SignalError::BadTapCount(num_taps));
    }
    let mid = (num_taps / 2) as f64;
    let mut taps = Vec::with_capacity(num_taps);
    for i in 0..num_taps {
        let t = i as f64 - mid;
        let x = std::f64::consts::TAU * cutoff * t;
        let sinc = if t == 0.0 { 1.0 } else { x.sin() / x };
        taps.push(2.0 * cutoff * sinc * window.weight(i, num_taps));
    }
    let sum: f64 = taps.iter().sum();
    for h in &mut taps {
        *h /= sum;
    }
    Ok(FirFilter { taps })
}

/// Causal convolution with zero initial history, truncated to the input
/// length: `y[k] = sum_j h[j] x[k-j]` over `j <= k`. No circular wrap; the
/// filter's startup transient stays in the output and the tail is dropped.
pub fn apply_filter(x: &SampledSignal, h: &FirFilter) -> SampledSignal {
    let n = x.samples.len();
    let taps = &h.taps;
    let mut y = vec![0.0; n];
    for (k, out) in y.iter_mut().enumerate() {
        let jmax = taps.len().min(k + 1);
        // same fold order as the textbook sum: j ascending, x descending
        *out = taps[..jmax]
            .iter()
            .zip(x.samples[k + 1 - jmax..=k].iter().rev())
            .map(|(h, v)| h * v)
            .sum();
    }
    SampledSignal::new(y, x.fs)
}

/// Sample-wise sum of equal-rate, equal-length paths, then a smoothing
/// low-pass — the combining node where per-path DAC outputs merge into one
/// analog waveform.
pub fn sum_paths(paths: &[SampledSignal], lpf: &FirFilter) -> Result<SampledSignal, SignalError> {
    let first = paths.first().ok_or(SignalError::NoPaths)?;
    for p in &paths[1..] {
        if p.fs != first.fs {
            return Err(SignalError::MixedRates);
        }
        if p.samples.len() != first.samples.len() {
            return Err(SignalError::MixedLengths(
                first.samples.len(),
                p.samples.len(),
            ));
        }
    }
    let mut acc = vec![0.0; first.samples.len()];
    for p in paths {
        for (a, &s) in acc.iter_mut().zip(&p.samples) {
            *a += s;
        }
    }
    Ok(apply_filter(&SampledSignal::new(acc, first.fs), lpf))
}

/// Anti-alias filter followed by keep-every-`ratio`-th starting at index 0.
/// The output rate is exactly `fs / ratio`.
pub fn decimate(
    x: &SampledSignal,
    ratio: u64,
    anti_alias: &FirFilter,
) -> Result<SampledSignal, SignalError> {
    if ratio == 0 {
        return Err(SignalError::ZeroRatio);
    }
    if ratio == 1 {
        return Ok(apply_filter(x, anti_alias));
    }
    let filtered = apply_filter(x, anti_alias);
    let samples: Vec<f64> = filtered
        .samples
        .iter()
        .step_by(ratio as usize)
        .copied()
        .collect();
    Ok(SampledSignal::new(samples, x.fs.div(ratio)?))
}
