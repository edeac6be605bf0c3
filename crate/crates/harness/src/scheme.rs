//! Registry of the DAC architectures the lab can simulate.

use std::fmt;

/// Identifier for one simulated converter architecture.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeId {
    /// Direct high-resolution quantization at the full clock rate.
    SingleFastDac,
    /// First-order two-level sigma-delta modulator.
    Sdm1,
    /// Second-order two-level sigma-delta modulator.
    Sdm2,
    /// Time-interleaved bank of first-order modulators.
    TiSdm,
    /// Multibit modulator into a mismatched element array, thermometer-coded.
    SdmDemThermo,
    /// Multibit modulator into a mismatched element array, random selection.
    SdmDemRandom,
    /// Multibit modulator into a mismatched element array, DWA rotation.
    SdmDemDwa,
}

impl SchemeId {
    /// Every scheme, in stable presentation order.
    pub const ALL: [SchemeId; 7] = [
        SchemeId::SingleFastDac,
        SchemeId::Sdm1,
        SchemeId::Sdm2,
        SchemeId::TiSdm,
        SchemeId::SdmDemThermo,
        SchemeId::SdmDemRandom,
        SchemeId::SdmDemDwa,
    ];

    /// Stable string id used in config files, CLI output and vector headers.
    pub fn id(self) -> &'static str {
        match self {
            SchemeId::SingleFastDac => "single_fast_dac",
            SchemeId::Sdm1 => "sdm_1",
            SchemeId::Sdm2 => "sdm_2",
            SchemeId::TiSdm => "ti_sdm",
            SchemeId::SdmDemThermo => "sdm_dem_thermo",
            SchemeId::SdmDemRandom => "sdm_dem_random",
            SchemeId::SdmDemDwa => "sdm_dem_dwa",
        }
    }

    /// One-line description for `sdmlab schemes`.
    pub fn summary(self) -> &'static str {
        match self {
            SchemeId::SingleFastDac => "ideal 15-bit DAC clocked at the full chain rate",
            SchemeId::Sdm1 => "first-order two-level sigma-delta modulator",
            SchemeId::Sdm2 => "second-order two-level sigma-delta modulator",
            SchemeId::TiSdm => "time-interleaved bank of first-order modulators",
            SchemeId::SdmDemThermo => "multibit modulator, thermometer-coded mismatched array",
            SchemeId::SdmDemRandom => "multibit modulator, randomized element selection",
            SchemeId::SdmDemDwa => "multibit modulator, data-weighted averaging rotation",
        }
    }

    pub fn parse(s: &str) -> Option<SchemeId> {
        SchemeId::ALL.iter().copied().find(|c| c.id() == s)
    }

    /// True for schemes that drive a mismatched element array.
    pub fn is_dem(self) -> bool {
        matches!(
            self,
            SchemeId::SdmDemThermo | SchemeId::SdmDemRandom | SchemeId::SdmDemDwa
        )
    }

    /// True for schemes that split the stream across parallel paths.
    pub fn uses_paths(self) -> bool {
        matches!(self, SchemeId::TiSdm)
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// (id, summary) pairs in stable order.
pub fn list_schemes() -> Vec<(&'static str, &'static str)> {
    SchemeId::ALL
        .iter()
        .map(|c| (c.id(), c.summary()))
        .collect()
}
