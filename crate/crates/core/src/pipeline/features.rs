use serde::{Deserialize, Serialize};

use super::ObservedBurst;
use crate::{dbm_to_mw, mw_to_dbm};

pub const N_FEATURES: usize = 8;
/// f1..f5 depend on the anchor-channel envelope only.
pub const N_ENVELOPE_FEATURES: usize = 5;
/// Spectral ratios take this value when the matching sweep read is missing.
pub const SF_SENTINEL_DB: f64 = 40.0;
/// A sweep read counts towards the bandwidth feature when it is within this
/// many dB of the anchor read.
const BW_COUNT_WINDOW_DB: f64 = 6.0;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "duration_us",
    "mean_power_dbm",
    "peak_power_dbm",
    "power_std_db",
    "crest_db",
    "sf_ratio_3_db",
    "sf_ratio_8_db",
    "sf_bw_count",
];

/// Burst descriptor: five envelope features followed by three spectral
/// features from the mid-burst sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub [f64; N_FEATURES]);

impl FeatureVector {
    pub fn duration_us(&self) -> f64 {
        self.0[0]
    }
    pub fn mean_power_dbm(&self) -> f64 {
        self.0[1]
    }
    pub fn peak_power_dbm(&self) -> f64 {
        self.0[2]
    }
    pub fn power_std_db(&self) -> f64 {
        self.0[3]
    }
    pub fn crest_db(&self) -> f64 {
        self.0[4]
    }
    pub fn sf_ratio_3_db(&self) -> f64 {
        self.0[5]
    }
    pub fn sf_ratio_8_db(&self) -> f64 {
        self.0[6]
    }
    pub fn sf_bw_count(&self) -> f64 {
        self.0[7]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Computes the feature vector of a detected burst.
///
/// `mean_power` is the linear-domain mean of the samples; `crest` is peak
/// minus mean and so never negative. Spectral features only use sweep reads
/// taken while the burst was still on air.
pub fn extract_features(burst: &ObservedBurst) -> FeatureVector {
    assert!(!burst.samples.is_empty(), "burst without samples");
    let n = burst.samples.len() as f64;
    let mean_mw = burst.samples.iter().map(|&s| dbm_to_mw(s as f64)).sum::<f64>() / n;
    let peak = burst.samples.iter().copied().max().unwrap() as f64;
    // Rounding of the log can put the mean a hair above an all-equal peak.
    let mean = mw_to_dbm(mean_mw).min(peak);
    let db_mean = burst.samples.iter().map(|&s| s as f64).sum::<f64>() / n;
    let std = (burst.samples.iter().map(|&s| (s as f64 - db_mean).powi(2)).sum::<f64>() / n).sqrt();

    let read = |mag: f64| {
        burst
            .sweep
            .iter()
            .find(|s| s.complete && s.offset_mhz.abs() == mag)
            .map(|s| s.rssi_dbm as f64)
    };
    let (sf3, sf8, bw_count) = match read(0.0) {
        None => (SF_SENTINEL_DB, SF_SENTINEL_DB, 0.0),
        Some(p0) => {
            let ratio = |mag| read(mag).map_or(SF_SENTINEL_DB, |p| p0 - p);
            let count = burst
                .sweep
                .iter()
                .filter(|s| s.complete && (s.rssi_dbm as f64 - p0).abs() <= BW_COUNT_WINDOW_DB)
                .count();
            (ratio(3.0), ratio(8.0), count as f64)
        }
    };

    FeatureVector([burst.duration_us, mean, peak, std, peak - mean, sf3, sf8, bw_count])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radiometer::SweepSample;

    fn burst(samples: Vec<i8>, sweep: Vec<SweepSample>) -> ObservedBurst {
        ObservedBurst {
            node_id: 1,
            channel_mhz: 2410.0,
            t_start_us: 0.0,
            duration_us: samples.len() as f64 * 50.0,
            samples,
            sweep,
            classifiable: true,
        }
    }

    fn sweep(levels: &[i8], complete_upto: usize) -> Vec<SweepSample> {
        levels
            .iter()
            .enumerate()
            .map(|(i, &r)| SweepSample {
                offset_mhz: i as f64,
                rssi_dbm: r,
                t_us: 64.0 * (i + 1) as f64,
                complete: i < complete_upto,
            })
            .collect()
    }

    #[test]
    fn constant_envelope() {
        let fv = extract_features(&burst(vec![-60; 20], vec![]));
        assert_eq!(fv.duration_us(), 1000.0);
        assert_eq!(fv.mean_power_dbm(), -60.0);
        assert_eq!(fv.peak_power_dbm(), -60.0);
        assert_eq!(fv.power_std_db(), 0.0);
        assert_eq!(fv.crest_db(), 0.0);
    }

    #[test]
    fn missing_sweep_uses_sentinels() {
        let fv = extract_features(&burst(vec![-60; 20], vec![]));
        assert_eq!(fv.sf_ratio_3_db(), 40.0);
        assert_eq!(fv.sf_ratio_8_db(), 40.0);
        assert_eq!(fv.sf_bw_count(), 0.0);
    }

    #[test]
    fn flat_wide_sweep_counts_every_offset() {
        let fv = extract_features(&burst(vec![-60; 20], sweep(&[-60; 9], 9)));
        assert_eq!(fv.sf_bw_count(), 9.0);
        assert_eq!(fv.sf_ratio_3_db(), 0.0);
        assert_eq!(fv.sf_ratio_8_db(), 0.0);
    }

    #[test]
    fn narrow_sweep_and_incomplete_reads() {
        let levels = [-60, -60, -62, -73, -98, -98, -98, -98, -98];
        let fv = extract_features(&burst(vec![-60; 20], sweep(&levels, 9)));
        assert_eq!(fv.sf_bw_count(), 3.0);
        assert_eq!(fv.sf_ratio_3_db(), 13.0);
        assert_eq!(fv.sf_ratio_8_db(), 38.0);
        let fv = extract_features(&burst(vec![-60; 20], sweep(&levels, 4)));
        assert_eq!(fv.sf_ratio_3_db(), 13.0);
        assert_eq!(fv.sf_ratio_8_db(), SF_SENTINEL_DB);
    }

    #[test]
    fn crest_and_spread_of_a_varying_envelope() {
        let fv = extract_features(&burst(vec![-60, -50, -60, -50], vec![]));
        assert_eq!(fv.peak_power_dbm(), -50.0);
        assert!((fv.power_std_db() - 5.0).abs() < 1e-12);
        let mean = 10.0 * ((1e-6 + 1e-5) / 2.0f64).log10();
        assert!((fv.mean_power_dbm() - mean).abs() < 1e-9);
        assert!((fv.crest_db() - (-50.0 - mean)).abs() < 1e-9);
        assert!(fv.crest_db() >= 0.0);
    }
}
