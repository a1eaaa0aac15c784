//! Ground-truth RF scene: emitters, their traffic, and propagation.

mod pathloss;
pub mod presets;
mod traffic;

use std::collections::{BTreeMap, HashSet};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::geometry::{Area, Position};
use crate::tech::Technology;
use crate::Micros;

pub use pathloss::{received_power, PathLoss};
pub use traffic::{BandModel, DurationModel, LedgerStream, TrafficModel};

/// Lower edge of the observable 2.4 GHz ISM band.
pub const BAND_MIN_MHZ: f64 = 2400.0;
/// Upper edge of the observable 2.4 GHz ISM band.
pub const BAND_MAX_MHZ: f64 = 2485.0;

pub const TX_POWER_RANGE_DBM: (f64, f64) = (-30.0, 30.0);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("emitter {emitter}: occupied band {low_mhz}..{high_mhz} MHz leaves 2400-2485 MHz")]
    BandOutOfRange { emitter: u32, low_mhz: f64, high_mhz: f64 },
    #[error("emitter {emitter}: {what}")]
    InvalidParameter { emitter: u32, what: String },
    #[error("emitter {emitter}: tx power {dbm} dBm outside [-30, 30] dBm")]
    TxPowerOutOfRange { emitter: u32, dbm: f64 },
    #[error("emitter {0} declared twice")]
    DuplicateEmitter(u32),
    #[error("emitter {0} lies outside the deployment area")]
    OutsideArea(u32),
    #[error("horizon must be positive")]
    NonPositiveHorizon,
    #[error("node {0} declared twice or at an occupied position")]
    DuplicateNode(u16),
    #[error("node {0} lies outside the deployment area")]
    NodeOutsideArea(u16),
}

/// One coexisting transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterSpec {
    pub id: u32,
    pub tech: Technology,
    pub position: Position,
    pub tx_power_dbm: f64,
    pub band: BandModel,
    pub traffic: TrafficModel,
    /// The emitter is silent before this instant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_from_us: Option<Micros>,
    /// The emitter starts no burst at or after this instant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_until_us: Option<Micros>,
}

impl EmitterSpec {
    /// Builds an emitter with the default band and traffic profile of its
    /// technology. `center_mhz` selects the channel of fixed-channel
    /// technologies and is ignored by hoppers.
    pub fn with_profile(id: u32, tech: Technology, position: Position, tx_power_dbm: f64, center_mhz: f64) -> Self {
        let (band, traffic) = presets::profile(tech, center_mhz);
        EmitterSpec {
            id,
            tech,
            position,
            tx_power_dbm,
            band,
            traffic,
            active_from_us: None,
            active_until_us: None,
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let (lo, hi) = TX_POWER_RANGE_DBM;
        if !(lo..=hi).contains(&self.tx_power_dbm) {
            return Err(SceneError::TxPowerOutOfRange {
                emitter: self.id,
                dbm: self.tx_power_dbm,
            });
        }
        if !self.position.is_finite() {
            return Err(SceneError::InvalidParameter {
                emitter: self.id,
                what: "position is not finite".into(),
            });
        }
        self.band.validate(self.id)?;
        self.traffic.validate(self.id)?;
        if let (Some(from), Some(until)) = (self.active_from_us, self.active_until_us) {
            if until <= from {
                return Err(SceneError::InvalidParameter {
                    emitter: self.id,
                    what: "active_until_us must exceed active_from_us".into(),
                });
            }
        }
        Ok(())
    }
}

/// A single transmission on air.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstEvent {
    pub emitter_id: u32,
    pub tech: Technology,
    pub t_start_us: Micros,
    pub duration_us: Micros,
    pub center_mhz: f64,
    pub bandwidth_mhz: f64,
    pub tx_power_dbm: f64,
}

impl BurstEvent {
    pub fn t_end_us(&self) -> Micros {
        self.t_start_us + self.duration_us
    }

    pub fn low_mhz(&self) -> f64 {
        self.center_mhz - self.bandwidth_mhz / 2.0
    }

    pub fn high_mhz(&self) -> f64 {
        self.center_mhz + self.bandwidth_mhz / 2.0
    }

    /// Distance from `freq_mhz` to the nearest edge of the occupied band,
    /// zero when the frequency falls inside it.
    pub fn distance_to_band(&self, freq_mhz: f64) -> f64 {
        if freq_mhz < self.low_mhz() {
            self.low_mhz() - freq_mhz
        } else if freq_mhz > self.high_mhz() {
            freq_mhz - self.high_mhz()
        } else {
            0.0
        }
    }

    pub fn is_active_at(&self, t_us: f64) -> bool {
        (self.t_start_us as f64) <= t_us && t_us < self.t_end_us() as f64
    }
}

/// Time-sorted ground truth of everything transmitted during a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BurstLedger {
    pub horizon_us: Micros,
    pub events: Vec<BurstEvent>,
}

pub const LEDGER_CSV_HEADER: &str = "emitter_id,tech,t_start_us,duration_us,center_mhz,bw_mhz,tx_dbm";

impl BurstLedger {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{LEDGER_CSV_HEADER}")?;
        for e in &self.events {
            write_ledger_row(&mut out, e)?;
        }
        Ok(())
    }
}

pub fn write_ledger_row<W: Write>(out: &mut W, e: &BurstEvent) -> io::Result<()> {
    writeln!(
        out,
        "{},{},{},{},{},{},{}",
        e.emitter_id, e.tech, e.t_start_us, e.duration_us, e.center_mhz, e.bandwidth_mhz, e.tx_power_dbm
    )
}

/// Checks every emitter and the id uniqueness constraint.
pub fn validate_emitters(scenario: &[EmitterSpec]) -> Result<(), SceneError> {
    let mut seen = HashSet::new();
    for e in scenario {
        e.validate()?;
        if !seen.insert(e.id) {
            return Err(SceneError::DuplicateEmitter(e.id));
        }
    }
    Ok(())
}

/// Draws the ground-truth ledger of `scenario` over `[0, horizon_us)`.
///
/// Each emitter owns an independent random stream derived from `seed` and its
/// id, so adding or removing an emitter never perturbs the others.
pub fn generate_ledger(scenario: &[EmitterSpec], horizon_us: Micros, seed: u64) -> Result<BurstLedger, SceneError> {
    let events = LedgerStream::new(scenario, horizon_us, seed)?.collect();
    Ok(BurstLedger { horizon_us, events })
}

/// A sensing node of the deployment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: u16,
    #[serde(flatten)]
    pub position: Position,
    /// Overrides the per-device random calibration offset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_offset_db: Option<f64>,
}

/// A complete deployment: area, emitters, sensing nodes and propagation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub area: Area,
    pub emitters: Vec<EmitterSpec>,
    #[serde(default)]
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub pathloss: PathLoss,
    pub seed: u64,
    pub horizon_us: Micros,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.horizon_us == 0 {
            return Err(SceneError::NonPositiveHorizon);
        }
        validate_emitters(&self.emitters)?;
        for e in &self.emitters {
            if !self.area.contains(&e.position) {
                return Err(SceneError::OutsideArea(e.id));
            }
        }
        let mut ids = HashSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if !self.area.contains(&n.position) {
                return Err(SceneError::NodeOutsideArea(n.id));
            }
            let clash = self.nodes[..i].iter().any(|m| m.position == n.position);
            if !ids.insert(n.id) || clash {
                return Err(SceneError::DuplicateNode(n.id));
            }
        }
        Ok(())
    }

    pub fn emitter_positions(&self) -> BTreeMap<u32, Position> {
        self.emitters.iter().map(|e| (e.id, e.position)).collect()
    }

    pub fn generate_ledger(&self) -> Result<BurstLedger, SceneError> {
        generate_ledger(&self.emitters, self.horizon_us, self.seed)
    }

    pub fn stream(&self) -> Result<LedgerStream, SceneError> {
        LedgerStream::new(&self.emitters, self.horizon_us, self.seed)
    }
}
