//! A constrained IEEE 802.15.4 radio used as an energy detector.
//!
//! The device polls a heavily filtered RSSI register at 10-30 kS/s, with
//! 1 dB / 8 bit quantization, a [-100, 0] dBm dynamic range and an
//! uncalibrated per-device offset of up to +-6 dB.

mod filter;
mod sampler;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Position;
use crate::Micros;

pub use filter::{filter_attenuation, filter_attenuation_unchecked, FILTER_FLOOR_DB, FILTER_ROLLOFF_MHZ};
pub use sampler::{
    quantize, sample_trace, sweep_during_burst, RadioEnvironment, RssiTrace, SweepSample, TRACE_CSV_HEADER,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RadiometerError {
    #[error("observation time {0} us outside [30000, 50000] us")]
    ObservationOutOfRange(Micros),
    #[error("scan period {period_us} us shorter than the {dwell_us} us dwell")]
    PeriodTooShort { period_us: Micros, dwell_us: Micros },
    #[error("negative frequency distance {0} MHz")]
    NegativeDistance(f64),
    #[error("frequency {0} MHz outside the device range")]
    FrequencyOutOfRange(f64),
    #[error("offset {0} MHz is not a multiple of the frequency granularity")]
    OffGrid(f64),
    #[error("sweep needs at least one offset")]
    EmptySweep,
    #[error("invalid device model: {0}")]
    InvalidDevice(String),
    #[error("empty sampling window")]
    EmptyWindow,
}

/// Radiometric characteristics of one sensing node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    pub node_id: u16,
    pub position: Position,
    pub calibration_offset_db: f64,
    pub dynamic_range_dbm: (f64, f64),
    pub freq_range_mhz: (f64, f64),
    pub freq_granularity_mhz: f64,
    pub sampling_rate_hz: f64,
    pub rbw_mhz: f64,
    pub sample_width_bits: u8,
    pub noise_floor_dbm: f64,
    /// Retune + settle + one RSSI read, per sweep offset.
    pub retune_dwell_us: f64,
    /// Per-poll Gaussian measurement jitter; zero for noiseless runs.
    #[serde(default)]
    pub rssi_jitter_db: f64,
}

pub const MAX_CALIBRATION_OFFSET_DB: f64 = 6.0;

impl DeviceModel {
    /// A perfectly calibrated device with default radiometric parameters.
    pub fn ideal(node_id: u16, position: Position) -> Self {
        DeviceModel {
            node_id,
            position,
            calibration_offset_db: 0.0,
            dynamic_range_dbm: (-100.0, 0.0),
            freq_range_mhz: (2400.0, 2485.0),
            freq_granularity_mhz: 1.0,
            sampling_rate_hz: 20_000.0,
            rbw_mhz: 2.0,
            sample_width_bits: 8,
            noise_floor_dbm: -98.0,
            retune_dwell_us: 64.0,
            rssi_jitter_db: 0.0,
        }
    }

    /// A device whose calibration offset is drawn once, uniformly on
    /// [-6, +6] dB, from `seed` and the node id.
    pub fn new(node_id: u16, position: Position, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xCA1B_0000);
        rng.set_stream(node_id as u64);
        let offset = rng.gen_range(-MAX_CALIBRATION_OFFSET_DB..=MAX_CALIBRATION_OFFSET_DB);
        DeviceModel {
            calibration_offset_db: offset,
            ..Self::ideal(node_id, position)
        }
    }

    pub fn sample_period_us(&self) -> f64 {
        1e6 / self.sampling_rate_hz
    }

    pub fn validate(&self) -> Result<(), RadiometerError> {
        let bad = |s: &str| Err(RadiometerError::InvalidDevice(s.to_string()));
        if self.calibration_offset_db.abs() > MAX_CALIBRATION_OFFSET_DB {
            return bad("calibration offset beyond +-6 dB");
        }
        if !(10_000.0..=30_000.0).contains(&self.sampling_rate_hz) {
            return bad("sampling rate outside 10-30 kS/s");
        }
        if !(1.5..=4.0).contains(&self.rbw_mhz) {
            return bad("RBW outside 1.5-4 MHz");
        }
        if self.freq_granularity_mhz != 1.0 || self.sample_width_bits != 8 {
            return bad("granularity must be 1 MHz and sample width 8 bit");
        }
        let (lo, hi) = self.dynamic_range_dbm;
        if !(lo < hi && lo >= -128.0 && hi <= 127.0) {
            return bad("dynamic range must fit an 8-bit signed sample");
        }
        if !(self.noise_floor_dbm >= lo && self.noise_floor_dbm <= hi) {
            return bad("noise floor outside the dynamic range");
        }
        if self.retune_dwell_us.is_nan()
            || self.retune_dwell_us <= 0.0
            || self.rssi_jitter_db.is_nan()
            || self.rssi_jitter_db < 0.0
        {
            return bad("retune dwell must be positive and jitter non-negative");
        }
        Ok(())
    }

    pub fn in_freq_range(&self, mhz: f64) -> bool {
        mhz >= self.freq_range_mhz.0 && mhz <= self.freq_range_mhz.1
    }
}

pub const OBSERVATION_RANGE_US: (Micros, Micros) = (30_000, 50_000);
/// Dwell range of the reference implementation; shorter dwells are legal
/// but flagged.
pub const DWELL_RANGE_US: (Micros, Micros) = (600_000, 800_000);

/// IEEE 802.15.4 channels 11-26.
pub fn ieee802154_channels() -> Vec<f64> {
    (0..16).map(|k| 2405.0 + 5.0 * k as f64).collect()
}

/// Periodic sequential scan over the 16 IEEE 802.15.4 channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSchedule {
    pub channels_mhz: Vec<f64>,
    pub observation_us: Micros,
    pub period_us: Micros,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleWarning {
    DwellBelowReference { dwell_us: Micros },
}

pub fn build_schedule(observation_us: Micros, period_us: Micros) -> Result<ScanSchedule, RadiometerError> {
    let (lo, hi) = OBSERVATION_RANGE_US;
    if !(lo..=hi).contains(&observation_us) {
        return Err(RadiometerError::ObservationOutOfRange(observation_us));
    }
    let channels_mhz = ieee802154_channels();
    let dwell_us = observation_us * channels_mhz.len() as Micros;
    if period_us < dwell_us {
        return Err(RadiometerError::PeriodTooShort { period_us, dwell_us });
    }
    Ok(ScanSchedule {
        channels_mhz,
        observation_us,
        period_us,
    })
}

impl ScanSchedule {
    pub fn dwell_us(&self) -> Micros {
        self.observation_us * self.channels_mhz.len() as Micros
    }

    pub fn duty_cycle(&self) -> f64 {
        self.dwell_us() as f64 / self.period_us as f64
    }

    pub fn warnings(&self) -> Vec<ScheduleWarning> {
        let dwell_us = self.dwell_us();
        if dwell_us < DWELL_RANGE_US.0 {
            vec![ScheduleWarning::DwellBelowReference { dwell_us }]
        } else {
            vec![]
        }
    }

    pub fn scan_start_us(&self, scan: u64) -> Micros {
        scan * self.period_us
    }

    /// Observation window of channel `index` during scan `scan`.
    pub fn window(&self, scan: u64, index: usize) -> (Micros, Micros) {
        let start = self.scan_start_us(scan) + index as Micros * self.observation_us;
        (start, start + self.observation_us)
    }

    /// Number of complete scans that fit in `horizon_us`.
    pub fn scans_within(&self, horizon_us: Micros) -> u64 {
        if horizon_us < self.dwell_us() {
            return 0;
        }
        (horizon_us - self.dwell_us()) / self.period_us + 1
    }

    pub fn channel_index(&self, mhz: f64) -> Option<usize> {
        self.channels_mhz.iter().position(|c| *c == mhz)
    }
}
