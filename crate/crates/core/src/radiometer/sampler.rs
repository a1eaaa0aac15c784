use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{filter_attenuation_unchecked, DeviceModel, RadiometerError};
use crate::geometry::Position;
use crate::scene::{received_power, BurstEvent, PathLoss};
use crate::{dbm_to_mw, mw_to_dbm, Micros};

/// The on-air state a device samples: a start-sorted slice of bursts plus
/// what is needed to propagate them to a receiver.
#[derive(Debug, Clone, Copy)]
pub struct RadioEnvironment<'a> {
    pub events: &'a [BurstEvent],
    pub emitter_positions: &'a BTreeMap<u32, Position>,
    pub pathloss: PathLoss,
    pub shadowing_seed: u64,
    /// Longest duration in `events`; bounds the backward search.
    pub max_duration_us: Micros,
}

impl<'a> RadioEnvironment<'a> {
    pub fn new(
        events: &'a [BurstEvent],
        emitter_positions: &'a BTreeMap<u32, Position>,
        pathloss: PathLoss,
        shadowing_seed: u64,
    ) -> Self {
        let max_duration_us = events.iter().map(|e| e.duration_us).max().unwrap_or(0);
        RadioEnvironment {
            events,
            emitter_positions,
            pathloss,
            shadowing_seed,
            max_duration_us,
        }
    }

    /// Bursts with any overlap with `[t0, t1)`.
    pub fn overlapping(&self, t0: Micros, t1: Micros) -> impl Iterator<Item = &'a BurstEvent> + 'a {
        let lo = self
            .events
            .partition_point(|e| e.t_start_us + self.max_duration_us <= t0);
        let hi = self.events.partition_point(|e| e.t_start_us < t1);
        self.events[lo..hi.max(lo)].iter().filter(move |e| e.t_end_us() > t0)
    }

    /// Received power of `burst` at `rx`, shadowing included.
    pub fn rx_power_dbm(&self, burst: &BurstEvent, rx: &Position) -> f64 {
        let tx_pos = self
            .emitter_positions
            .get(&burst.emitter_id)
            .unwrap_or_else(|| panic!("emitter {} has no position", burst.emitter_id));
        received_power(burst, rx, tx_pos, &self.pathloss)
            + self.pathloss.shadowing_db(burst.emitter_id, rx, self.shadowing_seed)
    }

    /// In-band power (mW) that `burst` contributes to a receiver at `rx`
    /// tuned to `freq_mhz`.
    fn contribution_mw(&self, burst: &BurstEvent, device: &DeviceModel, freq_mhz: f64) -> f64 {
        let att = filter_attenuation_unchecked(burst.distance_to_band(freq_mhz), device.rbw_mhz);
        dbm_to_mw(self.rx_power_dbm(burst, &device.position) - att)
    }
}

/// Rounds to the nearest dB and clamps to the dynamic range.
pub fn quantize(dbm: f64, dynamic_range: (f64, f64)) -> i8 {
    dbm.round().clamp(dynamic_range.0, dynamic_range.1) as i8
}

/// Quantized RSSI samples of one device on one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssiTrace {
    pub node_id: u16,
    pub channel_mhz: f64,
    pub t0_us: Micros,
    pub sample_period_us: f64,
    pub samples: Vec<i8>,
}

pub const TRACE_CSV_HEADER: &str = "node_id,channel_mhz,t_us,rssi_dbm";

impl RssiTrace {
    pub fn sample_time_us(&self, index: usize) -> f64 {
        self.t0_us as f64 + index as f64 * self.sample_period_us
    }

    pub fn write_csv_rows<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            writeln!(
                out,
                "{},{},{:.1},{}",
                self.node_id,
                self.channel_mhz,
                self.sample_time_us(i),
                s
            )?;
        }
        Ok(())
    }
}

fn jitter_rng(seed: u64, node: u16, freq_mhz: f64, t0: f64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (freq_mhz.to_bits().rotate_left(17)) ^ t0.to_bits());
    rng.set_stream(node as u64);
    rng
}

fn reading(total_mw: f64, device: &DeviceModel, jitter: Option<(&Normal<f64>, &mut ChaCha8Rng)>) -> i8 {
    let noise = dbm_to_mw(device.noise_floor_dbm);
    let mut dbm = device.calibration_offset_db + mw_to_dbm(total_mw + noise);
    if let Some((dist, rng)) = jitter {
        dbm += dist.sample(rng);
    }
    quantize(dbm, device.dynamic_range_dbm)
}

/// Polls the RSSI register at `device.sampling_rate_hz` over `window`
/// while tuned to `channel_mhz`.
///
/// Every sample is
/// `quantize(offset + 10 log10(sum_active 10^((P_rx - A(df))/10) + 10^(N/10)))`
/// where `A` is the channel-filter attenuation of the distance between the
/// tuned frequency and each active burst's band.
pub fn sample_trace(
    env: &RadioEnvironment<'_>,
    device: &DeviceModel,
    channel_mhz: f64,
    window: (Micros, Micros),
    seed: u64,
) -> Result<RssiTrace, RadiometerError> {
    if !device.in_freq_range(channel_mhz) {
        return Err(RadiometerError::FrequencyOutOfRange(channel_mhz));
    }
    let (t0, t1) = window;
    if t1 <= t0 {
        return Err(RadiometerError::EmptyWindow);
    }
    let period = device.sample_period_us();
    let n = ((t1 - t0) as f64 / period).ceil() as usize;

    let active: Vec<(f64, f64, f64)> = env
        .overlapping(t0, t1)
        .map(|b| {
            (
                b.t_start_us as f64,
                b.t_end_us() as f64,
                env.contribution_mw(b, device, channel_mhz),
            )
        })
        .collect();

    let jitter = (device.rssi_jitter_db > 0.0).then(|| Normal::new(0.0, device.rssi_jitter_db).unwrap());
    let mut rng = jitter_rng(seed, device.node_id, channel_mhz, t0 as f64);

    let quiet = reading(0.0, device, None);
    let loudest: f64 = active.iter().map(|(_, _, p)| p).sum();
    let samples = if jitter.is_none() && reading(loudest, device, None) == quiet {
        // Nothing in the window can move a reading off the noise level.
        vec![quiet; n]
    } else {
        (0..n)
            .map(|i| {
                let t = t0 as f64 + i as f64 * period;
                let total: f64 = active
                    .iter()
                    .filter(|(s, e, _)| *s <= t && t < *e)
                    .map(|(_, _, p)| p)
                    .sum();
                reading(total, device, jitter.as_ref().map(|d| (d, &mut rng)))
            })
            .collect()
    };

    Ok(RssiTrace {
        node_id: device.node_id,
        channel_mhz,
        t0_us: t0,
        sample_period_us: period,
        samples,
    })
}

/// One RSSI read taken while sweeping around an anchor channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub offset_mhz: f64,
    pub rssi_dbm: i8,
    pub t_us: f64,
    /// False when the burst had already ended at read time.
    pub complete: bool,
}

/// Retunes through `offsets` (relative to `anchor_mhz`) starting at
/// `burst_window.0`, spending `device.retune_dwell_us` per offset and
/// reading RSSI at the end of each dwell. Reads at or after
/// `burst_window.1` are flagged incomplete.
pub fn sweep_during_burst(
    env: &RadioEnvironment<'_>,
    device: &DeviceModel,
    burst_window: (f64, f64),
    anchor_mhz: f64,
    offsets: &[f64],
    seed: u64,
) -> Result<Vec<SweepSample>, RadiometerError> {
    if offsets.is_empty() {
        return Err(RadiometerError::EmptySweep);
    }
    for &off in offsets {
        let steps = off / device.freq_granularity_mhz;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(RadiometerError::OffGrid(off));
        }
        if !device.in_freq_range(anchor_mhz + off) {
            return Err(RadiometerError::FrequencyOutOfRange(anchor_mhz + off));
        }
    }
    let (start, end) = burst_window;
    let horizon = start + offsets.len() as f64 * device.retune_dwell_us;
    let candidates: Vec<&BurstEvent> = env
        .overlapping(start.floor() as Micros, horizon.ceil() as Micros + 1)
        .collect();
    let jitter = (device.rssi_jitter_db > 0.0).then(|| Normal::new(0.0, device.rssi_jitter_db).unwrap());
    let mut rng = jitter_rng(seed ^ 0x5EE9, device.node_id, anchor_mhz, start);

    Ok(offsets
        .iter()
        .enumerate()
        .map(|(i, &offset_mhz)| {
            let t = start + (i + 1) as f64 * device.retune_dwell_us;
            let freq = anchor_mhz + offset_mhz;
            let total: f64 = candidates
                .iter()
                .filter(|b| b.is_active_at(t))
                .map(|b| env.contribution_mw(b, device, freq))
                .sum();
            SweepSample {
                offset_mhz,
                rssi_dbm: reading(total, device, jitter.as_ref().map(|d| (d, &mut rng))),
                t_us: t,
                complete: t < end,
            }
        })
        .collect())
}
