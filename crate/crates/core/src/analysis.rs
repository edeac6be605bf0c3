use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::modulator::{quantize, ModulatorError, Quantizer};
use crate::signal::{apply_filter, decimate, design_lowpass, SampledSignal, SignalError, Window};

/// Smallest power carried through dB conversions; anything at or below it
/// reads as the -400 dB floor so silent bands stay finite in reports.
pub const POWER_FLOOR: f64 = 1e-40;

pub fn floor_db(power: f64) -> f64 {
    10.0 * power.max(POWER_FLOOR).log10()
}

fn ratio_db(num: f64, den: f64) -> f64 {
    floor_db(num) - floor_db(den)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("need at least {want} samples, got {got}")]
    ShortInput { got: usize, want: usize },
    #[error("band edge {f_b} Hz outside (0, {nyquist}] Hz")]
    BadBand { f_b: f64, nyquist: f64 },
    #[error("no identifiable signal: spectral maximum sits at DC")]
    DegenerateSignal,
    #[error("inputs disagree in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero-variance input has no correlation")]
    ConstantInput,
    #[error("scope model rejected: {0}")]
    BadModel(&'static str),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Modulator(#[from] ModulatorError),
}

/// One-sided power spectrum. Powers are normalized so their sum equals the
/// mean-square of the windowed input over the window's mean-square gain —
/// with a rectangular window, exactly the signal's mean-square power. A
/// full-scale-coherent tone of amplitude A contributes A^2/2 to its bin.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub power: Vec<f64>,
    pub bin_hz: f64,
    pub fs_hz: f64,
    pub n_fft: usize,
    pub window: Window,
}

impl Spectrum {
    pub fn nbins(&self) -> usize {
        self.power.len()
    }

    pub fn freq(&self, k: usize) -> f64 {
        k as f64 * self.bin_hz
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Highest bin index with center frequency at most `f_b_hz`.
    fn band_top(&self, f_b_hz: f64) -> Result<usize, AnalysisError> {
        let nyquist = self.fs_hz / 2.0;
        if !f_b_hz.is_finite() || f_b_hz <= 0.0 || f_b_hz > nyquist * (1.0 + 1e-9) {
            return Err(AnalysisError::BadBand {
                f_b: f_b_hz,
                nyquist,
            });
        }
        let nb = (f_b_hz / self.bin_hz * (1.0 + 1e-12)).floor() as usize;
        Ok(nb.min(self.power.len() - 1))
    }
}

/// Windowed periodogram of a sampled stream.
pub fn periodogram(x: &SampledSignal, window: Window) -> Result<Spectrum, AnalysisError> {
    let n = x.samples.len();
    if n < 2 {
        return Err(AnalysisError::ShortInput { got: n, want: 2 });
    }
    let mut wsum2 = 0.0;
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|i| {
            let w = window.weight(i, n);
            wsum2 += w * w;
            Complex::new(x.samples[i] * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    // DFT Parseval: sum_k |X_k|^2 = n * sum_i |w_i x_i|^2, so this scale
    // makes the bins sum to sum(wx)^2 / sum(w^2).
    let scale = 1.0 / (n as f64 * wsum2);
    let half = n / 2;
    let mut power = Vec::with_capacity(half + 1);
    power.push(buf[0].norm_sqr() * scale);
    for b in &buf[1..half] {
        power.push(2.0 * b.norm_sqr() * scale);
    }
    if n.is_multiple_of(2) {
        power.push(buf[half].norm_sqr() * scale);
    } else {
        power.push(2.0 * buf[half].norm_sqr() * scale);
    }
    Ok(Spectrum {
        power,
        bin_hz: x.fs.hz() / n as f64,
        fs_hz: x.fs.hz(),
        n_fft: n,
        window,
    })
}

/// Total power in [0, f_b]. With `exclude > 0` the strongest in-band bin is
/// treated as a signal and its +/-`exclude`-bin neighborhood is left out of
/// the sum; with `exclude = 0` the band total (DC included) is returned.
pub fn measure_inband_noise(
    s: &Spectrum,
    f_b_hz: f64,
    exclude: usize,
) -> Result<f64, AnalysisError> {
    let nb = s.band_top(f_b_hz)?;
    if exclude == 0 {
        return Ok(s.power[..=nb].iter().sum());
    }
    let k0 = argmax(&s.power[..=nb]);
    let lo = k0.saturating_sub(exclude);
    let hi = (k0 + exclude).min(nb);
    let total: f64 = s.power[..=nb].iter().sum();
    let excluded: f64 = s.power[lo..=hi].iter().sum();
    Ok(total - excluded)
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Tone-referenced converter metrics over an analysis band.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumMetrics {
    pub signal_bin: usize,
    pub signal_power: f64,
    /// In-band power outside the signal and harmonic neighborhoods, DC excluded.
    pub inband_noise_power: f64,
    /// Power in harmonics 2..=10 of the signal, folded across [0, fs/2].
    pub distortion_power: f64,
    pub snr_db: f64,
    pub sndr_db: f64,
    pub sfdr_db: f64,
    pub thd_db: f64,
}

/// Locate the strongest in-band tone and split the spectrum into signal,
/// harmonic-distortion, noise, and spur partitions.
///
/// The signal is the maximum bin in (0, f_b] plus its leakage neighborhood
/// (+/-1 bin rectangular, +/-3 tapered). Harmonics 2..=10 fold across the
/// full Nyquist range. SFDR compares the signal against the largest single
/// in-band bin outside the signal neighborhood. DC never counts as noise,
/// distortion, or spur; a spectrum whose in-band maximum IS the DC bin has
/// no identifiable signal and errors out.
pub fn compute_metrics(s: &Spectrum, f_b_hz: f64) -> Result<SpectrumMetrics, AnalysisError> {
    let nb = s.band_top(f_b_hz)?;
    if nb < 1 {
        return Err(AnalysisError::BadBand {
            f_b: f_b_hz,
            nyquist: s.fs_hz / 2.0,
        });
    }
    let k0 = argmax(&s.power[..=nb]);
    if k0 == 0 {
        return Err(AnalysisError::DegenerateSignal);
    }
    let w = match s.window {
        Window::Rectangular => 1usize,
        Window::Hann | Window::Blackman => 3,
    };
    let top = s.power.len() - 1;

    #[derive(Clone, Copy, PartialEq)]
    enum Part {
        Plain,
        Signal,
        Harmonic,
    }
    let mut part = vec![Part::Plain; s.power.len()];
    for p in &mut part[k0.saturating_sub(w)..=(k0 + w).min(top)] {
        *p = Part::Signal;
    }
    for h in 2..=10usize {
        let m = (h * k0) % s.n_fft;
        let m = if m > s.n_fft / 2 { s.n_fft - m } else { m };
        for p in &mut part[m.saturating_sub(w)..=(m + w).min(top)] {
            if *p == Part::Plain {
                *p = Part::Harmonic;
            }
        }
    }

    let mut signal = 0.0;
    let mut distortion = 0.0;
    let mut noise = 0.0;
    let mut spur: f64 = 0.0;
    for (k, (&kind, &p)) in part.iter().zip(&s.power).enumerate().skip(1) {
        match kind {
            Part::Signal => signal += p,
            Part::Harmonic => {
                distortion += p;
                if k <= nb {
                    spur = spur.max(p);
                }
            }
            Part::Plain => {
                if k <= nb {
                    noise += p;
                    spur = spur.max(p);
                }
            }
        }
    }

    Ok(SpectrumMetrics {
        signal_bin: k0,
        signal_power: signal,
        inband_noise_power: noise,
        distortion_power: distortion,
        snr_db: ratio_db(signal, noise),
        sndr_db: ratio_db(signal, noise + distortion),
        sfdr_db: ratio_db(signal, spur),
        thd_db: ratio_db(distortion, signal),
    })
}

/// Zero-lag Pearson correlation of two equal-length sequences.
pub fn xcorr_zero_lag(a: &[f64], b: &[f64]) -> Result<f64, AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(AnalysisError::ShortInput {
            got: a.len(),
            want: 2,
        });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return Err(AnalysisError::ConstantInput);
    }
    Ok(cov / (va * vb).sqrt())
}

/// One point of an oversampling-ratio sweep: seed-averaged in-band power.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub osr: u32,
    /// Mean over seeds of the measured linear power.
    pub mean_power: f64,
    /// `floor_db(mean_power)`.
    pub mean_db: f64,
    /// Spread of the per-seed dB readings (population standard deviation).
    pub std_db: f64,
    pub n_seeds: usize,
}

/// Repeat a scalar power measurement across OSR values and seeds.
/// The closure's failures abort the sweep unchanged.
pub fn osr_sweep<E, F>(osrs: &[u32], seeds: &[u64], mut run: F) -> Result<Vec<SweepPoint>, E>
where
    F: FnMut(u32, u64) -> Result<f64, E>,
{
    let mut out = Vec::with_capacity(osrs.len());
    for &osr in osrs {
        let mut powers = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            powers.push(run(osr, seed)?);
        }
        let mean_power = powers.iter().sum::<f64>() / powers.len().max(1) as f64;
        let dbs: Vec<f64> = powers.iter().map(|&p| floor_db(p)).collect();
        let mean_db_of = dbs.iter().sum::<f64>() / dbs.len().max(1) as f64;
        let var =
            dbs.iter().map(|d| (d - mean_db_of).powi(2)).sum::<f64>() / dbs.len().max(1) as f64;
        out.push(SweepPoint {
            osr,
            mean_power,
            mean_db: floor_db(mean_power),
            std_db: var.sqrt(),
            n_seeds: seeds.len(),
        });
    }
    Ok(out)
}

/// A bench oscilloscope's acquisition model: analog front-end bandwidth,
/// maximum sample rate, vertical resolution over a +/-full_scale range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScopeModel {
    pub resolution_bits: u32,
    pub max_rate_hz: u64,
    pub bandwidth_hz: f64,
    pub full_scale: f64,
}

impl Default for ScopeModel {
    fn default() -> Self {
        ScopeModel {
            resolution_bits: 16,
            max_rate_hz: 10_000_000,
            bandwidth_hz: 5e6,
            full_scale: 1.0,
        }
    }
}

/// Acquire a waveform the way the bench instrument would: band-limit with
/// the front-end filter (skipped when the input rate is too low for the
/// stated bandwidth to fit below Nyquist), decimate by the smallest power
/// of two that respects the instrument's maximum rate, and quantize to the
/// vertical resolution. Values beyond full scale clip to the end codes.
pub fn scope_capture(
    v: &SampledSignal,
    model: &ScopeModel,
) -> Result<SampledSignal, AnalysisError> {
    if model.resolution_bits < 2 || model.resolution_bits > 24 {
        return Err(AnalysisError::BadModel("resolution_bits outside [2, 24]"));
    }
    if model.max_rate_hz == 0 {
        return Err(AnalysisError::BadModel("max_rate_hz must be positive"));
    }
    if !model.bandwidth_hz.is_finite() || model.bandwidth_hz <= 0.0 {
        return Err(AnalysisError::BadModel("bandwidth_hz must be positive"));
    }
    if !model.full_scale.is_finite() || model.full_scale <= 0.0 {
        return Err(AnalysisError::BadModel("full_scale must be positive"));
    }

    let fs_in = v.fs.hz();
    let mut work = v.clone();
    if model.bandwidth_hz < 0.45 * fs_in {
        let bw = design_lowpass(model.bandwidth_hz / fs_in, 255, Window::Blackman)?;
        work = apply_filter(&work, &bw);
    }

    let mut ratio = 1u64;
    while !work
        .fs
        .div(ratio)
        .map_err(SignalError::from)?
        .at_most_hz(model.max_rate_hz)
    {
        ratio *= 2;
        if ratio > 1 << 32 {
            return Err(AnalysisError::BadModel("input rate too high to decimate"));
        }
    }
    if ratio > 1 {
        let aa = design_lowpass(0.45 / ratio as f64, 255, Window::Blackman)?;
        work = decimate(&work, ratio, &aa)?;
    }

    let q = Quantizer::bits(model.resolution_bits, model.full_scale)?;
    let samples = work.samples.iter().map(|&u| quantize(u, &q)).collect();
    Ok(SampledSignal::new(samples, work.fs))
}
