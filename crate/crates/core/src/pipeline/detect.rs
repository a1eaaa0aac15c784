use serde::{Deserialize, Serialize};

use crate::radiometer::{
    sample_trace, sweep_during_burst, DeviceModel, RadioEnvironment, RadiometerError, RssiTrace, SweepSample,
};
use crate::Micros;

/// Shortest burst the classifier accepts.
pub const MIN_CLASSIFIABLE_US: f64 = 350.0;
/// Longest classifiable burst; longer ones are split into head and tail.
pub const MAX_CLASSIFIABLE_US: f64 = 5000.0;
/// A sweep starts once a burst has been open this long.
pub const SWEEP_TRIGGER_US: f64 = 128.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub threshold_dbm: f64,
    pub hysteresis_db: f64,
    /// One-sided sweep span in MHz (offsets 0..=span).
    #[serde(default = "default_span")]
    pub sweep_span_mhz: u32,
}

fn default_span() -> u32 {
    8
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            threshold_dbm: -85.0,
            hysteresis_db: 3.0,
            sweep_span_mhz: 8,
        }
    }
}

/// A contiguous above-threshold run of RSSI samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedBurst {
    pub node_id: u16,
    pub channel_mhz: f64,
    /// Instant of the first above-threshold sample.
    pub t_start_us: f64,
    pub duration_us: f64,
    pub samples: Vec<i8>,
    pub sweep: Vec<SweepSample>,
    /// False for the remainder of a burst longer than the classifiable
    /// maximum; such a tail directly follows its classifiable head.
    pub classifiable: bool,
}

impl ObservedBurst {
    pub fn t_end_us(&self) -> f64 {
        self.t_start_us + self.duration_us
    }
}

/// Hysteresis energy detector.
///
/// A burst opens on the first sample at or above `threshold` and closes on
/// the first sample below `threshold - hysteresis`. Runs shorter than
/// 350 us are discarded; runs longer than 5000 us become a classifiable
/// 5000 us head plus an unclassifiable tail.
pub fn detect_bursts(trace: &RssiTrace, threshold: f64, hysteresis: f64) -> Vec<ObservedBurst> {
    let period = trace.sample_period_us;
    let close_below = threshold - hysteresis;
    let mut runs = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &s) in trace.samples.iter().enumerate() {
        let s = s as f64;
        match open {
            None if s >= threshold => open = Some(i),
            Some(start) if s < close_below => {
                runs.push((start, i));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        runs.push((start, trace.samples.len()));
    }

    let max_head = (MAX_CLASSIFIABLE_US / period + 1e-9).floor() as usize;
    let mut out = Vec::new();
    for (start, end) in runs {
        let len = end - start;
        if (len as f64) * period < MIN_CLASSIFIABLE_US - 1e-9 {
            continue;
        }
        let make = |a: usize, b: usize, classifiable: bool| ObservedBurst {
            node_id: trace.node_id,
            channel_mhz: trace.channel_mhz,
            t_start_us: trace.sample_time_us(a),
            duration_us: (b - a) as f64 * period,
            samples: trace.samples[a..b].to_vec(),
            sweep: Vec::new(),
            classifiable,
        };
        if len > max_head {
            out.push(make(start, start + max_head, true));
            out.push(make(start + max_head, end, false));
        } else {
            out.push(make(start, end, true));
        }
    }
    out
}

/// Sweep offsets for `anchor_mhz`, in visiting order: the offsets the
/// spectral features read (0, 3 and `span` MHz) first, then the remaining
/// `1..span` ascending. Mirrored to negative offsets when the upward sweep
/// would leave the tunable range.
pub fn sweep_offsets(anchor_mhz: f64, device: &DeviceModel, span_mhz: u32) -> Vec<f64> {
    let sign = if device.in_freq_range(anchor_mhz + span_mhz as f64) {
        1.0
    } else {
        -1.0
    };
    let mut order: Vec<u32> = [0, 3, span_mhz].into_iter().filter(|&k| k <= span_mhz).collect();
    order.dedup();
    let rest: Vec<u32> = (0..=span_mhz).filter(|k| !order.contains(k)).collect();
    order.extend(rest);
    order.into_iter().map(|k| sign * k as f64).collect()
}

/// Samples one observation window, detects bursts and attaches the
/// mid-burst sweep each classifiable burst triggers.
///
/// The sweep runs on a second logical tuner: it does not interrupt the
/// anchor-channel trace.
pub fn observe_window(
    env: &RadioEnvironment<'_>,
    device: &DeviceModel,
    channel_mhz: f64,
    window: (Micros, Micros),
    params: &DetectorParams,
    seed: u64,
) -> Result<(RssiTrace, Vec<ObservedBurst>), RadiometerError> {
    let trace = sample_trace(env, device, channel_mhz, window, seed)?;
    let mut bursts = detect_bursts(&trace, params.threshold_dbm, params.hysteresis_db);
    let period = trace.sample_period_us;
    let trigger_samples = (SWEEP_TRIGGER_US / period).ceil();
    let offsets = sweep_offsets(channel_mhz, device, params.sweep_span_mhz);
    for i in 0..bursts.len() {
        if !bursts[i].classifiable {
            continue;
        }
        // A truncated head keeps sweeping into its tail.
        let end = match bursts.get(i + 1) {
            Some(tail) if !tail.classifiable => tail.t_end_us(),
            _ => bursts[i].t_end_us(),
        };
        let start = bursts[i].t_start_us + trigger_samples * period;
        if start < end {
            bursts[i].sweep = sweep_during_burst(env, device, (start, end), channel_mhz, &offsets, seed)?;
        }
    }
    Ok((trace, bursts))
}
