//! Cross-technology interference mapping for constrained 2.4 GHz sensing nodes.
//!
//! The crate models the full chain a low-cost IEEE 802.15.4 network uses to
//! build interference maps without dedicated spectrum hardware:
//!
//! 1. [`scene`] generates ground-truth bursts from coexisting emitters
//!    (WLAN, Bluetooth, BLE, ZigBee) and computes received power.
//! 2. [`radiometer`] turns those bursts into quantized, offset-corrupted
//!    RSSI traces under a 16-channel scan schedule, plus mid-burst sweeps.
//! 3. [`pipeline`] detects bursts and extracts 8-dimensional feature vectors.
//! 4. [`classifier`] trains split-capped classification trees, random forests
//!    and k-NN for burst-level technology identification.
//! 5. [`maps`] packs per-scan interference reports into a compact wire
//!    format, aggregates them into power / busy-time tensors and renders
//!    natural-neighbor maps and spectrograms.
//!
//! [`sim`] wires the stages together for whole-network runs.

pub mod classifier;
pub mod geometry;
pub mod maps;
pub mod pipeline;
pub mod radiometer;
pub mod scene;
pub mod sim;
pub mod tech;

pub use geometry::Position;
pub use tech::Technology;

/// Microseconds on the simulation clock.
pub type Micros = u64;

pub(crate) fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub(crate) fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}
