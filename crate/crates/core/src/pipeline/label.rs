use serde::{Deserialize, Serialize};

use super::{extract_features, FeatureVector, ObservedBurst};
use crate::radiometer::{filter_attenuation_unchecked, DeviceModel, RadioEnvironment, FILTER_ROLLOFF_MHZ};
use crate::scene::BurstEvent;
use crate::tech::Technology;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledBurst {
    pub features: FeatureVector,
    pub label: Technology,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelOutcome {
    pub labeled: Vec<LabeledBurst>,
    /// Observed bursts with no overlapping ground truth.
    pub dropped: usize,
}

/// Time-frequency overlap between an observed burst and a ground-truth one.
/// The observed extent in frequency is the reach of the channel filter
/// around the tuned frequency.
fn overlap(obs: &ObservedBurst, ev: &BurstEvent, rbw_mhz: f64) -> f64 {
    let dt = obs.t_end_us().min(ev.t_end_us() as f64) - obs.t_start_us.max(ev.t_start_us as f64);
    let reach = rbw_mhz / 2.0 + FILTER_ROLLOFF_MHZ;
    let df = (obs.channel_mhz + reach).min(ev.high_mhz()) - (obs.channel_mhz - reach).max(ev.low_mhz());
    if dt <= 0.0 || df <= 0.0 {
        0.0
    } else {
        dt * df
    }
}

/// Ground-truth technology of an observed burst: the ledger burst with
/// the largest time-frequency overlap.
///
/// Ground-truth bursts reaching the device below `min_visible_dbm` on the
/// observed channel are not candidates; pass `f64::NEG_INFINITY` for pure
/// overlap attribution. Ties go to the earlier ledger entry.
pub fn label_burst(
    obs: &ObservedBurst,
    env: &RadioEnvironment<'_>,
    device: &DeviceModel,
    min_visible_dbm: f64,
) -> Option<Technology> {
    let t0 = obs.t_start_us.floor().max(0.0) as u64;
    let t1 = obs.t_end_us().ceil() as u64 + 1;
    let mut best: Option<(f64, Technology)> = None;
    for ev in env.overlapping(t0, t1) {
        let score = overlap(obs, ev, device.rbw_mhz);
        if score <= 0.0 {
            continue;
        }
        if min_visible_dbm > f64::NEG_INFINITY {
            let att = filter_attenuation_unchecked(ev.distance_to_band(obs.channel_mhz), device.rbw_mhz);
            let seen = env.rx_power_dbm(ev, &device.position) - att + device.calibration_offset_db;
            if seen < min_visible_dbm {
                continue;
            }
        }
        if best.is_none_or(|(b, _)| score > b) {
            best = Some((score, ev.tech));
        }
    }
    best.map(|(_, t)| t)
}

/// Labels every classifiable observed burst; see [`label_burst`].
pub fn label_bursts(
    observed: &[ObservedBurst],
    env: &RadioEnvironment<'_>,
    device: &DeviceModel,
    min_visible_dbm: f64,
) -> LabelOutcome {
    let mut out = LabelOutcome::default();
    for obs in observed.iter().filter(|o| o.classifiable) {
        match label_burst(obs, env, device, min_visible_dbm) {
            Some(label) => out.labeled.push(LabeledBurst {
                features: extract_features(obs),
                label,
            }),
            None => out.dropped += 1,
        }
    }
    out
}
