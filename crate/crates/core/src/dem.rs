use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::signal::SampledSignal;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DemError {
    #[error("element count {0} outside [1, 65535]")]
    BadElementCount(usize),
    #[error("mismatch sigma must be finite and non-negative, got {0}")]
    BadSigma(f64),
    #[error("array parameter must be finite: {0}")]
    NonFiniteParameter(&'static str),
    #[error("selection count {code} exceeds element count {n}")]
    SelectionOverflow { code: usize, n: usize },
    #[error("code {code} outside [-{n}, {n}]")]
    CodeOutOfRange { code: i64, n: usize },
    #[error("level {level} does not sit on the {n}-step code grid")]
    LevelOffGrid { level: f64, n: usize },
    #[error("stream and code vectors disagree in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// A bank of nominally equal unit elements with static relative weight
/// errors: element i realizes `delta * (1 + epsilons[i])`, the whole bank
/// sits behind a gain and offset error.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementArray {
    delta: f64,
    gain: f64,
    offset: f64,
    epsilons: Vec<f64>,
}

impl ElementArray {
    pub fn new(delta: f64, gain: f64, offset: f64, epsilons: Vec<f64>) -> Result<Self, DemError> {
        if epsilons.is_empty() || epsilons.len() > u16::MAX as usize {
            return Err(DemError::BadElementCount(epsilons.len()));
        }
        if !delta.is_finite() || delta <= 0.0 {
            return Err(DemError::NonFiniteParameter("delta"));
        }
        if !gain.is_finite() {
            return Err(DemError::NonFiniteParameter("gain"));
        }
        if !offset.is_finite() {
            return Err(DemError::NonFiniteParameter("offset"));
        }
        if epsilons.iter().any(|e| !e.is_finite()) {
            return Err(DemError::NonFiniteParameter("epsilons"));
        }
        Ok(ElementArray {
            delta,
            gain,
            offset,
            epsilons,
        })
    }

    /// Perfectly matched bank: unit gain, zero offset, zero weight errors.
    pub fn ideal(n: usize, delta: f64) -> Result<Self, DemError> {
        Self::new(delta, 1.0, 0.0, vec![0.0; n])
    }

    pub fn n(&self) -> usize {
        self.epsilons.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }
}

/// Draw per-element relative weight errors: i.i.d. Gaussian with standard
/// deviation `sigma`, then mean-subtracted so the bank's total weight is
/// nominal (a common-mode weight error is indistinguishable from gain error
/// and is modeled by the gain term instead).
pub fn draw_mismatch(n: usize, sigma: f64, seed: u64) -> Result<Vec<f64>, DemError> {
    if n == 0 || n > u16::MAX as usize {
        return Err(DemError::BadElementCount(n));
    }
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(DemError::BadSigma(sigma));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eps: Vec<f64> = (0..n)
        .map(|_| sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();
    let mean = eps.iter().sum::<f64>() / n as f64;
    for e in &mut eps {
        *e -= mean;
    }
    Ok(eps)
}

/// Map a quantizer output level to its signed element count: with `n`
/// elements covering full scale, `level = c * full_scale / n` yields code c.
pub fn code_of(level: f64, full_scale: f64, n: usize) -> Result<i32, DemError> {
    if n == 0 {
        return Err(DemError::BadElementCount(0));
    }
    let c = (level * n as f64 / full_scale).round();
    if c.abs() > n as f64 {
        return Err(DemError::CodeOutOfRange { code: c as i64, n });
    }
    if (c * full_scale / n as f64 - level).abs() > 1e-9 * full_scale {
        return Err(DemError::LevelOffGrid { level, n });
    }
    Ok(c as i32)
}

/// Element selection policy for a given per-sample element count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Always the lowest-indexed elements — the plain thermometer decoder.
    Thermometer,
    /// A fresh uniformly random subset each sample.
    Random,
    /// Data-weighted averaging: consecutive elements from a rotation pointer.
    Dwa,
}

/// Rotation pointer for data-weighted averaging.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DwaState {
    pub pointer: usize,
}

/// Thermometer selection: elements {0, ..., code-1}.
pub fn select_thermometer(code: usize, n: usize) -> Result<Vec<u16>, DemError> {
    if code > n {
        return Err(DemError::SelectionOverflow { code, n });
    }
    Ok((0..code as u16).collect())
}

/// Uniformly random `code`-element subset of {0, ..., n-1}.
pub fn select_random(code: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<u16>, DemError> {
    if code > n {
        return Err(DemError::SelectionOverflow { code, n });
    }
    let mut idx: Vec<u16> = rand::seq::index::sample(rng, n, code)
        .iter()
        .map(|i| i as u16)
        .collect();
    idx.sort_unstable();
    Ok(idx)
}

/// Data-weighted averaging: the `code` elements starting at the rotation
/// pointer, wrapping modulo `n`; the pointer advances by `code`. Every
/// element is used once per full rotation, so usage counts stay within one
/// of each other whenever the accumulated code is a multiple of `n`.
pub fn select_dwa(
    code: usize,
    n: usize,
    state: DwaState,
) -> Result<(Vec<u16>, DwaState), DemError> {
    if code > n {
        return Err(DemError::SelectionOverflow { code, n });
    }
    let p = state.pointer % n.max(1);
    let set: Vec<u16> = (0..code).map(|i| ((p + i) % n) as u16).collect();
    Ok((
        set,
        DwaState {
            pointer: (p + code) % n,
        },
    ))
}

/// Which elements fired on each sample, plus cumulative per-element usage.
/// Index sets are stored flat; `set(k)` views sample k's selection.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionRecord {
    indices: Vec<u16>,
    offsets: Vec<u32>,
    usage: Vec<u64>,
}

impl SelectionRecord {
    fn with_capacity(samples: usize, n_elements: usize) -> Self {
        let mut offsets = Vec::with_capacity(samples + 1);
        offsets.push(0);
        SelectionRecord {
            indices: Vec::new(),
            offsets,
            usage: vec![0; n_elements],
        }
    }

    fn push(&mut self, set: &[u16]) {
        self.indices.extend_from_slice(set);
        self.offsets.push(self.indices.len() as u32);
        for &i in set {
            self.usage[i as usize] += 1;
        }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn set(&self, k: usize) -> &[u16] {
        &self.indices[self.offsets[k] as usize..self.offsets[k + 1] as usize]
    }

    pub fn usage(&self) -> &[u64] {
        &self.usage
    }
}

/// A converted stream: the analog output, the signed codes that drove it,
/// and the element selections behind every sample.
#[derive(Clone, Debug)]
pub struct DacOutput {
    pub v: SampledSignal,
    pub codes: Vec<i32>,
    pub selections: SelectionRecord,
}

/// Drive the element bank with a quantized stream.
///
/// Each level maps to a signed code c; |c| elements are chosen by the
/// strategy and the output is
///   v = offset + gain * sign(c) * sum_{i in S} delta * (1 + eps_i).
///
/// The DWA strategy keeps one rotation pointer per code polarity. A signed
/// bank negates the whole selected sum, so a shared pointer lets sign
/// modulation cancel the rotation's usage averaging (the element-error
/// history stops telescoping and the residual turns white); per-polarity
/// pointers preserve first-order shaping of the weight errors for
/// arbitrary bipolar streams.
pub fn dac_convert(
    stream: &SampledSignal,
    level_full_scale: f64,
    array: &ElementArray,
    strategy: Strategy,
    seed: u64,
) -> Result<DacOutput, DemError> {
    let n = array.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = DwaState::default();
    let mut neg = DwaState::default();
    let mut codes = Vec::with_capacity(stream.samples.len());
    let mut v = Vec::with_capacity(stream.samples.len());
    let mut selections = SelectionRecord::with_capacity(stream.samples.len(), n);

    for &level in &stream.samples {
        let c = code_of(level, level_full_scale, n)?;
        let mag = c.unsigned_abs() as usize;
        let set = match strategy {
            Strategy::Thermometer => select_thermometer(mag, n)?,
            Strategy::Random => select_random(mag, n, &mut rng)?,
            Strategy::Dwa => {
                let state = if c >= 0 { &mut pos } else { &mut neg };
                let (set, next) = select_dwa(mag, n, *state)?;
                *state = next;
                set
            }
        };
        let weight: f64 = set.iter().map(|&i| 1.0 + array.epsilons[i as usize]).sum();
        let sign = match c.cmp(&0) {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Less => -1.0,
            std::cmp::Ordering::Equal => 0.0,
        };
        v.push(array.offset + array.gain * sign * array.delta * weight);
        selections.push(&set);
        codes.push(c);
    }

    Ok(DacOutput {
        v: SampledSignal::new(v, stream.fs),
        codes,
        selections,
    })
}

/// Conversion-error sequence of a converted stream: what the bank produced
/// minus what ideal elements would have produced,
/// `e_dac[k] = v[k] - offset - gain * delta * c[k]`.
pub fn edac_extract(
    v: &SampledSignal,
    offset: f64,
    gain: f64,
    delta: f64,
    codes: &[i32],
) -> Result<SampledSignal, DemError> {
    if v.samples.len() != codes.len() {
        return Err(DemError::LengthMismatch(v.samples.len(), codes.len()));
    }
    let e = v
        .samples
        .iter()
        .zip(codes)
        .map(|(&vk, &c)| vk - offset - gain * delta * c as f64)
        .collect();
    Ok(SampledSignal::new(e, v.fs))
}
