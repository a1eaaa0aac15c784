//! Default technology profiles and reference deployments.

use super::{BandModel, DurationModel, EmitterSpec, NodeSpec, PathLoss, Scenario, TrafficModel};
use crate::geometry::{Area, Position};
use crate::tech::Technology;
use crate::Micros;

/// WLAN channels 1, 6 and 11.
pub const WLAN_CENTERS_MHZ: [f64; 3] = [2412.0, 2437.0, 2462.0];

pub const BT_SLOT_US: Micros = 625;
/// Air time of a single-slot basic-rate packet.
pub const BT_SINGLE_SLOT_AIR_US: Micros = 366;

pub fn bt_hop_set() -> Vec<f64> {
    (0..79).map(|k| 2402.0 + k as f64).collect()
}

pub fn ble_hop_set() -> Vec<f64> {
    (0..40).map(|k| 2402.0 + 2.0 * k as f64).collect()
}

/// Band and traffic defaults for `tech`. `center_mhz` is used by the
/// fixed-channel technologies only.
pub fn profile(tech: Technology, center_mhz: f64) -> (BandModel, TrafficModel) {
    let wlan = |skew: f64| {
        (
            BandModel::Fixed {
                center_mhz,
                bandwidth_mhz: 20.0,
            },
            TrafficModel::Poisson {
                duration: DurationModel::LogUniform {
                    min_us: 200.0,
                    max_us: 5000.0,
                    skew,
                },
                mean_gap_us: 8000.0,
            },
        )
    };
    match tech {
        Technology::Wlan11b => wlan(0.5),
        Technology::Wlan11g => wlan(1.0),
        Technology::Wlan11n => wlan(2.0),
        Technology::Bt802151 => (
            BandModel::Hopping {
                centers_mhz: bt_hop_set(),
                bandwidth_mhz: 1.0,
            },
            TrafficModel::Slotted {
                slot_us: BT_SLOT_US,
                air_time_us: BT_SINGLE_SLOT_AIR_US,
                stride: 1,
                phase: 0,
                occupancy: 0.5,
            },
        ),
        Technology::Ble => (
            BandModel::Hopping {
                centers_mhz: ble_hop_set(),
                bandwidth_mhz: 2.0,
            },
            TrafficModel::Poisson {
                // LE 1M: 10 bytes of preamble, access address, header and CRC.
                duration: DurationModel::Frame {
                    min_bytes: 37,
                    max_bytes: 251,
                    overhead_bytes: 10,
                    kbps: 1000.0,
                },
                mean_gap_us: 5000.0,
            },
        ),
        Technology::Zigbee802154 => (
            BandModel::Fixed {
                center_mhz,
                bandwidth_mhz: 2.0,
            },
            TrafficModel::Poisson {
                // 6 bytes of SHR + PHR, at most 127 bytes of PSDU.
                duration: DurationModel::Frame {
                    min_bytes: 18,
                    max_bytes: 127,
                    overhead_bytes: 6,
                    kbps: 250.0,
                },
                mean_gap_us: 15000.0,
            },
        ),
    }
}

/// One side of a Bluetooth piconet link: master on even slots (`phase` 0),
/// slave on odd slots (`phase` 1).
pub fn bt_device(id: u32, position: Position, phase: u32) -> EmitterSpec {
    let mut e = EmitterSpec::with_profile(id, Technology::Bt802151, position, 4.0, 0.0);
    e.traffic = TrafficModel::Slotted {
        slot_us: BT_SLOT_US,
        air_time_us: BT_SINGLE_SLOT_AIR_US,
        stride: 2,
        phase,
        occupancy: 0.6,
    };
    e
}

/// Office floor of 25 x 12 m: 15 sensing nodes (14 sensors and the gateway),
/// three WLAN access points on channels 1/6/11 and one Bluetooth link.
pub fn office(seed: u64, horizon_us: Micros) -> Scenario {
    let node_xy = [
        (2.0, 2.0),
        (7.0, 2.5),
        (12.0, 1.5),
        (17.0, 2.0),
        (22.5, 2.5),
        (2.5, 10.0),
        (7.5, 9.5),
        (12.5, 10.5),
        (17.5, 10.0),
        (22.0, 9.5),
        (4.5, 6.0),
        (9.5, 6.5),
        (15.0, 5.5),
        (20.0, 6.0),
        (12.5, 6.0),
    ];
    let nodes = node_xy
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| NodeSpec {
            id: i as u16 + 1,
            position: Position::new(x, y),
            calibration_offset_db: None,
        })
        .collect();
    let emitters = vec![
        EmitterSpec::with_profile(1, Technology::Wlan11g, Position::new(3.5, 3.0), 20.0, 2412.0),
        EmitterSpec::with_profile(2, Technology::Wlan11n, Position::new(13.0, 9.5), 20.0, 2437.0),
        EmitterSpec::with_profile(3, Technology::Wlan11g, Position::new(21.0, 3.5), 20.0, 2462.0),
        bt_device(10, Position::new(8.5, 8.5), 0),
        bt_device(11, Position::new(10.0, 8.0), 1),
    ];
    Scenario {
        area: Area {
            width_m: 25.0,
            height_m: 12.0,
        },
        emitters,
        nodes,
        pathloss: PathLoss::default(),
        seed,
        horizon_us,
    }
}

/// Controlled collection campaign used to synthesize the labeled training
/// set. Each technology transmits alone during its own sixth of the
/// horizon, from the same three (position, power, channel) placements, and
/// shadowing is off: received power then carries no emitter identity and
/// classes differ only in burst shape and bandwidth.
pub fn training(seed: u64, horizon_us: Micros) -> Scenario {
    let node_xy = [
        (1.5, 1.5),
        (6.0, 4.0),
        (11.0, 1.0),
        (16.0, 3.5),
        (23.0, 1.5),
        (2.0, 10.5),
        (8.0, 8.0),
        (13.0, 11.0),
        (18.5, 8.5),
        (24.0, 11.0),
    ];
    let nodes = node_xy
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| NodeSpec {
            id: i as u16 + 1,
            position: Position::new(x, y),
            calibration_offset_db: None,
        })
        .collect();
    let placements = [
        (Position::new(5.0, 3.0), 20.0, 0),
        (Position::new(12.5, 9.0), 10.0, 1),
        (Position::new(20.0, 4.0), 0.0, 2),
    ];
    const ZIGBEE_CENTERS_MHZ: [f64; 3] = [2425.0, 2450.0, 2475.0];
    let session = horizon_us / Technology::COUNT as Micros;
    let mut emitters = Vec::new();
    for (t, tech) in Technology::ALL.into_iter().enumerate() {
        for &(position, power, k) in &placements {
            let id = (t * placements.len() + k + 1) as u32;
            let mut e = match tech {
                Technology::Bt802151 => bt_device(id, position, (k % 2) as u32),
                Technology::Zigbee802154 => EmitterSpec::with_profile(id, tech, position, power, ZIGBEE_CENTERS_MHZ[k]),
                _ => EmitterSpec::with_profile(id, tech, position, power, WLAN_CENTERS_MHZ[k]),
            };
            e.tx_power_dbm = power;
            e.active_from_us = Some(t as Micros * session);
            e.active_until_us = Some((t as Micros + 1) * session);
            emitters.push(e);
        }
    }
    Scenario {
        area: Area {
            width_m: 25.0,
            height_m: 12.0,
        },
        emitters,
        nodes,
        pathloss: PathLoss::default(),
        seed,
        horizon_us,
    }
}
