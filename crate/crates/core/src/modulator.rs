use crate::rate::Rate;
use crate::signal::SampledSignal;

/// Integrator excursion beyond this multiple of full scale aborts a run:
/// no bounded orbit of either loop order gets anywhere near it, so hitting
/// the bound means the feedback loop has genuinely diverged.
pub const OVERFLOW_FACTOR: f64 = 1e6;

/// Divergence bound used by the stability probe. Stable orbits of the
/// first- and second-order loops stay under 9x full scale while runaway
/// states grow without bound, so 16x separates the two regimes decisively
/// within a short horizon (the run-abort bound above is only reachable on
/// horizons far longer than a probe).
const PROBE_ESCAPE_FACTOR: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModulatorError {
    #[error("quantizer needs at least two levels")]
    NotEnoughLevels,
    #[error("quantizer levels must be finite and strictly increasing")]
    BadLevelOrder,
    #[error("quantizer levels must be symmetric about zero")]
    AsymmetricLevels,
    #[error("full scale must be positive and finite, got {0}")]
    BadFullScale(f64),
    #[error("integrator overflow at sample {sample}: |{value:.3e}| exceeds {bound:.3e}")]
    IntegratorOverflow {
        sample: usize,
        value: f64,
        bound: f64,
    },
    #[error("probe frequency {f0} Hz outside [0, {nyquist}] Hz")]
    ProbePlacement { f0: f64, nyquist: f64 },
    #[error("probe horizon must be at least 1 sample")]
    EmptyHorizon,
    #[error("probe resolution must be positive and finite, got {0}")]
    BadResolution(f64),
}

/// Symmetric static quantizer defined by its output level set.
#[derive(Clone, Debug, PartialEq)]
pub struct Quantizer {
    levels: Vec<f64>,
    midpoints: Vec<f64>,
}

impl Quantizer {
    /// Arbitrary level set; must be >= 2 finite, strictly increasing levels,
    /// symmetric about zero.
    pub fn from_levels(levels: Vec<f64>) -> Result<Self, ModulatorError> {
        if levels.len() < 2 {
            return Err(ModulatorError::NotEnoughLevels);
        }
        for w in levels.windows(2) {
            if !w[0].is_finite() || !w[1].is_finite() || w[0] >= w[1] {
                return Err(ModulatorError::BadLevelOrder);
            }
        }
        let n = levels.len();
        let tol = 1e-12 * levels[n - 1].abs().max(1.0);
        for i in 0..n / 2 + 1 {
            if (levels[i] + levels[n - 1 - i]).abs() > tol {
                return Err(ModulatorError::AsymmetricLevels);
            }
        }
        let midpoints = levels.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(Quantizer { levels, midpoints })
    }

    /// Binary quantizer with outputs -delta and +delta.
    pub fn two_level(delta: f64) -> Result<Self, ModulatorError> {
        Self::uniform(2, delta)
    }

    /// Ternary quantizer with outputs -delta, 0, +delta.
    pub fn three_level(delta: f64) -> Result<Self, ModulatorError> {
        Self::uniform(3, delta)
    }

    /// `n_levels` equally spaced outputs spanning [-delta, +delta].
    pub fn uniform(n_levels: usize, delta: f64) -> Result<Self, ModulatorError> {
        if !delta.is_finite() || delta <= 0.0 {
            return Err(ModulatorError::BadFullScale(delta));
        }
        if n_levels < 2 {
            return Err(ModulatorError::NotEnoughLevels);
        }
        let den = (n_levels - 1) as f64;
        let levels = (0..n_levels)
            .map(|i| (2 * i as i64 - (n_levels as i64 - 1)) as f64 / den * delta)
            .collect();
        Self::from_levels(levels)
    }

    /// Mid-tread `b`-bit converter: 2^b + 1 levels over [-delta, +delta],
    /// so zero is an exact output and the extremes are symmetric.
    pub fn bits(b: u32, delta: f64) -> Result<Self, ModulatorError> {
        Self::uniform((1usize << b) + 1, delta)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Largest output magnitude (the converter's full scale).
    pub fn full_scale(&self) -> f64 {
        *self.levels.last().expect("validated nonempty")
    }

    /// Spacing between adjacent levels (uniform quantizers).
    pub fn step(&self) -> f64 {
        2.0 * self.full_scale() / (self.levels.len() - 1) as f64
    }
}

/// Nearest-level quantization, ties rounding toward the upper level
/// (so an input of exactly 0 through a two-level converter reads +delta).
pub fn quantize(u: f64, q: &Quantizer) -> f64 {
    let idx = q.midpoints.partition_point(|&m| m <= u);
    q.levels[idx]
}

/// Loop order of the noise-shaping feedback structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

impl Order {
    pub fn index(self) -> u32 {
        match self {
            Order::First => 1,
            Order::Second => 2,
        }
    }
}

/// A noise-shaping modulator: loop order, in-loop quantizer, starting
/// integrator state (second element ignored for first-order loops).
#[derive(Clone, Debug)]
pub struct ModulatorSpec {
    pub order: Order,
    pub quantizer: Quantizer,
    pub initial_state: [f64; 2],
}

impl ModulatorSpec {
    pub fn new(order: Order, quantizer: Quantizer) -> Self {
        ModulatorSpec {
            order,
            quantizer,
            initial_state: [0.0, 0.0],
        }
    }

    pub fn with_initial_state(mut self, state: [f64; 2]) -> Self {
        self.initial_state = state;
        self
    }

    /// Converter full scale.
    pub fn delta(&self) -> f64 {
        self.quantizer.full_scale()
    }
}

/// Everything a modulator run produces: the quantized output, the
/// per-sample quantization error `e[n] = y[n] - u[n]`, and the integrator
/// state after the last sample.
#[derive(Clone, Debug)]
pub struct ModulatorTrace {
    pub y: Vec<f64>,
    pub e: Vec<f64>,
    pub final_state: [f64; 2],
}

impl ModulatorTrace {
    pub fn output(&self, fs: Rate) -> SampledSignal {
        SampledSignal::new(self.y.clone(), fs)
    }
}

/// Run the modulator over an input stream.
///
/// First order:   `u[n] = u[n-1] + x[n-1] - y[n-1]`,      `y[n] = Q(u[n])`.
/// Second order:  `u1[n] = u1[n-1] + x[n-1] - y[n-1]`,
///                `u2[n] = u2[n-1] + u1[n-1] - 2 y[n-1]`, `y[n] = Q(u2[n])`,
/// with `x[-1] = y[-1] = 0` so the first output quantizes the initial state.
/// The second-order feedback weights (1, 2) place both zeros of the noise
/// transfer at DC: `y[n] = x[n-2] + e[n] - 2 e[n-1] + e[n-2]`.
pub fn sdm_run(spec: &ModulatorSpec, x: &SampledSignal) -> Result<ModulatorTrace, ModulatorError> {
    let n = x.samples.len();
    let bound = OVERFLOW_FACTOR * spec.delta();
    let mut y = Vec::with_capacity(n);
    let mut e = Vec::with_capacity(n);

    match spec.order {
        Order::First => {
            let mut u = spec.initial_state[0];
            for k in 0..n {
                if k > 0 {
                    u += x.samples[k - 1] - y[k - 1];
                }
                if u.abs() > bound || !u.is_finite() {
                    return Err(ModulatorError::IntegratorOverflow {
                        sample: k,
                        value: u,
                        bound,
                    });
                }
                let yk = quantize(u, &spec.quantizer);
                y.push(yk);
                e.push(yk - u);
            }
            Ok(ModulatorTrace {
                y,
                e,
                final_state: [u, 0.0],
            })
        }
        Order::Second => {
            let mut u1 = spec.initial_state[0];
            let mut u2 = spec.initial_state[1];
            for k in 0..n {
                if k > 0 {
                    let u1_prev = u1;
                    u1 += x.samples[k - 1] - y[k - 1];
                    u2 += u1_prev - 2.0 * y[k - 1];
                }
                let worst = u1.abs().max(u2.abs());
                if worst > bound || !worst.is_finite() {
                    let value = if u1.abs() >= u2.abs() { u1 } else { u2 };
                    return Err(ModulatorError::IntegratorOverflow {
                        sample: k,
                        value,
                        bound,
                    });
                }
                let yk = quantize(u2, &spec.quantizer);
                y.push(yk);
                e.push(yk - u2);
            }
            Ok(ModulatorTrace {
                y,
                e,
                final_state: [u1, u2],
            })
        }
    }
}

/// Magnitude of the noise transfer (1 - z^-1)^order on the unit circle:
/// (2 sin(pi f / fs))^order.
pub fn ntf_magnitude(order: Order, f_hz: f64, fs_hz: f64) -> f64 {
    (2.0 * (std::f64::consts::PI * f_hz / fs_hz).sin())
        .abs()
        .powi(order.index() as i32)
}

/// White-noise model of shaped in-band quantization noise power for a loop
/// of order p and quantizer step d:
///   sigma_e^2 * pi^(2p)/(2p+1) * (2 f_b / f_s)^(2p+1),  sigma_e^2 = d^2/12.
pub fn inband_noise_power(order: Order, quantizer_step: f64, f_b_hz: f64, fs_hz: f64) -> f64 {
    let p = order.index() as f64;
    let sigma_e2 = quantizer_step * quantizer_step / 12.0;
    let pi = std::f64::consts::PI;
    sigma_e2 * pi.powf(2.0 * p) / (2.0 * p + 1.0) * (2.0 * f_b_hz / fs_hz).powf(2.0 * p + 1.0)
}

/// Largest input amplitude the loop tolerates without divergence, found by
/// binary search over [0, 2*delta] to within `resolution * delta`.
///
/// The probe wave is `a * cos(2 pi f0 k / fs)`, so a zero frequency
/// degenerates to a DC stress of exactly the stated amplitude. Divergence is
/// declared when any integrator leaves +/-16x full scale within the horizon.
pub fn stable_amplitude_range(
    spec: &ModulatorSpec,
    f0_hz: f64,
    fs: Rate,
    horizon: usize,
    resolution: f64,
) -> Result<f64, ModulatorError> {
    let nyquist = fs.hz() / 2.0;
    if !f0_hz.is_finite() || f0_hz < 0.0 || f0_hz > nyquist {
        return Err(ModulatorError::ProbePlacement { f0: f0_hz, nyquist });
    }
    if horizon == 0 {
        return Err(ModulatorError::EmptyHorizon);
    }
    if !resolution.is_finite() || resolution <= 0.0 {
        return Err(ModulatorError::BadResolution(resolution));
    }

    let delta = spec.delta();
    let w = std::f64::consts::TAU * f0_hz / fs.hz();
    let escape = PROBE_ESCAPE_FACTOR * delta;
    let survives = |a: f64| -> bool {
        let mut u1 = spec.initial_state[0];
        let mut u2 = spec.initial_state[1];
        let mut x_prev = 0.0;
        let mut y_prev = 0.0;
        for k in 0..horizon {
            if k > 0 {
                match spec.order {
                    Order::First => u1 += x_prev - y_prev,
                    Order::Second => {
                        let u1_prev = u1;
                        u1 += x_prev - y_prev;
                        u2 += u1_prev - 2.0 * y_prev;
                    }
                }
            }
            let (probe_state, worst) = match spec.order {
                Order::First => (u1, u1.abs()),
                Order::Second => (u2, u1.abs().max(u2.abs())),
            };
            if worst > escape || !worst.is_finite() {
                return false;
            }
            y_prev = quantize(probe_state, &spec.quantizer);
            x_prev = a * (w * k as f64).cos();
        }
        true
    };

    let mut lo = 0.0;
    let mut hi = 2.0 * delta;
    if survives(hi) {
        return Ok(hi);
    }
    while hi - lo > resolution * delta {
        let mid = 0.5 * (lo + hi);
        if survives(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
