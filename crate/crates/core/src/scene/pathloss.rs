use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::BurstEvent;
use crate::geometry::Position;

/// Log-distance path loss, `PL(d) = PL0 + 10 n log10(d / d0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLoss {
    pub pl0_db: f64,
    pub d0_m: f64,
    pub exponent: f64,
    /// Standard deviation of a static per-link log-normal shadowing term.
    /// Zero disables shadowing.
    #[serde(default)]
    pub shadowing_sigma_db: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        PathLoss {
            pl0_db: 40.0,
            d0_m: 1.0,
            exponent: 3.0,
            shadowing_sigma_db: 0.0,
        }
    }
}

impl PathLoss {
    pub fn loss_db(&self, distance_m: f64) -> f64 {
        let d = distance_m.max(self.d0_m);
        self.pl0_db + 10.0 * self.exponent * (d / self.d0_m).log10()
    }

    /// Shadowing for the link between `emitter_id` and a receiver at `rx`.
    /// Fixed for the lifetime of the link: every burst of the emitter sees
    /// the same value at the same receiver.
    pub fn shadowing_db(&self, emitter_id: u32, rx: &Position, seed: u64) -> f64 {
        if self.shadowing_sigma_db == 0.0 {
            return 0.0;
        }
        let key = mix(mix(mix(seed ^ 0x5EED_5AD0) ^ emitter_id as u64) ^ rx.x.to_bits()) ^ rx.y.to_bits();
        let mut rng = ChaCha8Rng::seed_from_u64(mix(key));
        let z: f64 = StandardNormal.sample(&mut rng);
        z * self.shadowing_sigma_db
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Power of `burst` at `rx`, before any receiver filtering.
/// Distances below the reference distance are clamped to it.
pub fn received_power(burst: &BurstEvent, rx: &Position, emitter_pos: &Position, pathloss: &PathLoss) -> f64 {
    burst.tx_power_dbm - pathloss.loss_db(rx.distance(emitter_pos))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tech::Technology;

    fn burst(tx: f64) -> BurstEvent {
        BurstEvent {
            emitter_id: 1,
            tech: Technology::Wlan11g,
            t_start_us: 0,
            duration_us: 100,
            center_mhz: 2437.0,
            bandwidth_mhz: 20.0,
            tx_power_dbm: tx,
        }
    }

    #[test]
    fn reference_distance_identity() {
        let pl = PathLoss::default();
        let p = received_power(&burst(20.0), &Position::new(1.0, 0.0), &Position::new(0.0, 0.0), &pl);
        assert_eq!(p, 20.0 - 40.0);
    }

    #[test]
    fn ten_meters_with_exponent_three() {
        let pl = PathLoss::default();
        let p = received_power(&burst(20.0), &Position::new(6.0, 8.0), &Position::new(0.0, 0.0), &pl);
        assert!((p - -50.0).abs() < 1e-12);
    }

    #[test]
    fn zero_distance_clamps_to_reference() {
        let pl = PathLoss::default();
        let at = Position::new(3.0, 3.0);
        let p0 = received_power(&burst(10.0), &at, &at, &pl);
        assert_eq!(p0, 10.0 - 40.0);
    }

    #[test]
    fn strictly_decreasing_beyond_reference() {
        let pl = PathLoss::default();
        let mut prev = f64::INFINITY;
        for i in 1..200 {
            let d = 1.0 + i as f64 * 0.25;
            let p = received_power(&burst(0.0), &Position::new(d, 0.0), &Position::new(0.0, 0.0), &pl);
            assert!(p < prev);
            prev = p;
        }
    }

    #[test]
    fn shadowing_is_static_per_link() {
        let pl = PathLoss {
            shadowing_sigma_db: 4.0,
            ..PathLoss::default()
        };
        let rx = Position::new(2.0, 5.0);
        assert_eq!(pl.shadowing_db(3, &rx, 1), pl.shadowing_db(3, &rx, 1));
        assert_ne!(pl.shadowing_db(3, &rx, 1), pl.shadowing_db(4, &rx, 1));
        assert_eq!(PathLoss::default().shadowing_db(3, &rx, 1), 0.0);
        let n = 4000;
        let samples: Vec<f64> = (0..n).map(|i| pl.shadowing_db(i, &rx, 9)).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let sd = (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!(mean.abs() < 0.3 && (sd - 4.0).abs() < 0.3, "{mean} {sd}");
    }
}
