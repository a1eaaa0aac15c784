use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::{BurstEvent, EmitterSpec, SceneError, BAND_MAX_MHZ, BAND_MIN_MHZ};
use crate::Micros;

/// Spectral footprint of an emitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandModel {
    Fixed {
        center_mhz: f64,
        bandwidth_mhz: f64,
    },
    /// A new center is drawn uniformly from `centers_mhz` for every burst.
    Hopping {
        centers_mhz: Vec<f64>,
        bandwidth_mhz: f64,
    },
}

impl BandModel {
    pub fn bandwidth_mhz(&self) -> f64 {
        match self {
            BandModel::Fixed { bandwidth_mhz, .. } | BandModel::Hopping { bandwidth_mhz, .. } => *bandwidth_mhz,
        }
    }

    fn centers(&self) -> &[f64] {
        match self {
            BandModel::Fixed { center_mhz, .. } => std::slice::from_ref(center_mhz),
            BandModel::Hopping { centers_mhz, .. } => centers_mhz,
        }
    }

    pub(super) fn validate(&self, emitter: u32) -> Result<(), SceneError> {
        let bw = self.bandwidth_mhz();
        if !(bw.is_finite() && bw > 0.0) {
            return Err(SceneError::InvalidParameter {
                emitter,
                what: format!("bandwidth must be positive, got {bw}"),
            });
        }
        if self.centers().is_empty() {
            return Err(SceneError::InvalidParameter {
                emitter,
                what: "hop set is empty".into(),
            });
        }
        for &c in self.centers() {
            let (low_mhz, high_mhz) = (c - bw / 2.0, c + bw / 2.0);
            if !(low_mhz >= BAND_MIN_MHZ && high_mhz <= BAND_MAX_MHZ) {
                return Err(SceneError::BandOutOfRange {
                    emitter,
                    low_mhz,
                    high_mhz,
                });
            }
        }
        Ok(())
    }

    fn draw_center(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            BandModel::Fixed { center_mhz, .. } => *center_mhz,
            BandModel::Hopping { centers_mhz, .. } => centers_mhz[rng.gen_range(0..centers_mhz.len())],
        }
    }
}

/// Burst (frame) duration distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationModel {
    Fixed {
        us: Micros,
    },
    Uniform {
        min_us: f64,
        max_us: f64,
    },
    /// `min * (max/min)^(u^skew)` for uniform `u`: `skew = 1` is plain
    /// log-uniform, `skew < 1` favors long bursts, `skew > 1` short ones.
    LogUniform {
        min_us: f64,
        max_us: f64,
        #[serde(default = "one")]
        skew: f64,
    },
    /// Frame length drawn uniformly in whole bytes, plus fixed PHY overhead,
    /// sent at `kbps`.
    Frame {
        min_bytes: u32,
        max_bytes: u32,
        overhead_bytes: u32,
        kbps: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl DurationModel {
    fn validate(&self, emitter: u32) -> Result<(), SceneError> {
        let bad = |what: &str| SceneError::InvalidParameter {
            emitter,
            what: what.to_string(),
        };
        match *self {
            DurationModel::Fixed { us: 0 } => Err(bad("fixed duration must be positive")),
            DurationModel::Uniform { min_us, max_us } | DurationModel::LogUniform { min_us, max_us, .. }
                if !(min_us > 0.0 && max_us >= min_us && max_us.is_finite()) =>
            {
                Err(bad("duration range must satisfy 0 < min <= max"))
            }
            DurationModel::LogUniform { skew, .. } if !(skew > 0.0 && skew.is_finite()) => {
                Err(bad("log-uniform skew must be positive"))
            }
            DurationModel::Frame {
                min_bytes,
                max_bytes,
                overhead_bytes,
                kbps,
            } if min_bytes + overhead_bytes == 0 || max_bytes < min_bytes || !(kbps > 0.0 && kbps.is_finite()) => {
                Err(bad("frame model needs 0 < bytes, min <= max and positive rate"))
            }
            _ => Ok(()),
        }
    }

    /// Upper bound on any drawn duration.
    pub fn max_us(&self) -> Micros {
        match *self {
            DurationModel::Fixed { us } => us,
            DurationModel::Uniform { max_us, .. } | DurationModel::LogUniform { max_us, .. } => {
                max_us.round() as Micros
            }
            DurationModel::Frame {
                max_bytes,
                overhead_bytes,
                kbps,
                ..
            } => frame_us(max_bytes + overhead_bytes, kbps),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Micros {
        let us = match *self {
            DurationModel::Fixed { us } => return us,
            DurationModel::Uniform { min_us, max_us } => min_us + (max_us - min_us) * rng.gen::<f64>(),
            DurationModel::LogUniform { min_us, max_us, skew } => {
                min_us * (max_us / min_us).powf(rng.gen::<f64>().powf(skew))
            }
            DurationModel::Frame {
                min_bytes,
                max_bytes,
                overhead_bytes,
                kbps,
            } => return frame_us(rng.gen_range(min_bytes..=max_bytes) + overhead_bytes, kbps),
        };
        (us.round() as Micros).max(1)
    }
}

fn frame_us(bytes: u32, kbps: f64) -> Micros {
    ((bytes as f64 * 8.0 * 1000.0 / kbps).round() as Micros).max(1)
}

/// When an emitter transmits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficModel {
    /// Exponential idle gaps between the end of one burst and the start of
    /// the next.
    Poisson { duration: DurationModel, mean_gap_us: f64 },
    /// One burst every `period_us`, starting at a random phase. A burst longer
    /// than the period pushes the next one back.
    Periodic { duration: DurationModel, period_us: Micros },
    /// Slot-synchronous transmitter (Bluetooth BR/EDR): bursts may start on
    /// slots `phase + k * stride`, each used with probability `occupancy`.
    Slotted {
        slot_us: Micros,
        air_time_us: Micros,
        stride: u32,
        phase: u32,
        occupancy: f64,
    },
}

impl TrafficModel {
    pub(super) fn validate(&self, emitter: u32) -> Result<(), SceneError> {
        let bad = |what: &str| SceneError::InvalidParameter {
            emitter,
            what: what.to_string(),
        };
        match self {
            TrafficModel::Poisson { duration, mean_gap_us } => {
                duration.validate(emitter)?;
                if !(*mean_gap_us > 0.0 && mean_gap_us.is_finite()) {
                    return Err(bad("mean gap must be positive"));
                }
            }
            TrafficModel::Periodic { duration, period_us } => {
                duration.validate(emitter)?;
                if *period_us == 0 {
                    return Err(bad("period must be positive"));
                }
            }
            TrafficModel::Slotted {
                slot_us,
                air_time_us,
                stride,
                phase,
                occupancy,
            } => {
                if *slot_us == 0 || *air_time_us == 0 || *stride == 0 {
                    return Err(bad("slot, air time and stride must be positive"));
                }
                if *air_time_us > *slot_us * *stride as Micros {
                    return Err(bad("air time exceeds the slot spacing"));
                }
                if phase >= stride {
                    return Err(bad("phase must be below stride"));
                }
                if !(*occupancy > 0.0 && *occupancy <= 1.0) {
                    return Err(bad("occupancy must lie in (0, 1]"));
                }
            }
        }
        Ok(())
    }

    pub fn max_duration_us(&self) -> Micros {
        match self {
            TrafficModel::Poisson { duration, .. } | TrafficModel::Periodic { duration, .. } => duration.max_us(),
            TrafficModel::Slotted { air_time_us, .. } => *air_time_us,
        }
    }
}

/// Lazily generated bursts of one emitter, in start order.
struct EmitterStream {
    spec: EmitterSpec,
    rng: ChaCha8Rng,
    /// Earliest instant the next burst may start.
    cursor: f64,
    next_slot: u64,
    until: Micros,
}

impl EmitterStream {
    fn new(spec: &EmitterSpec, horizon_us: Micros, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(spec.id as u64);
        let from = spec.active_from_us.unwrap_or(0);
        let until = spec.active_until_us.map_or(horizon_us, |u| u.min(horizon_us));
        let mut stream = EmitterStream {
            spec: spec.clone(),
            rng,
            cursor: from as f64,
            next_slot: 0,
            until,
        };
        match &stream.spec.traffic {
            TrafficModel::Poisson { mean_gap_us, .. } => {
                stream.cursor += Exp::new(1.0 / mean_gap_us).unwrap().sample(&mut stream.rng);
            }
            TrafficModel::Periodic { period_us, .. } => {
                stream.cursor += stream.rng.gen_range(0..*period_us) as f64;
            }
            TrafficModel::Slotted {
                slot_us, stride, phase, ..
            } => {
                let first = from.div_ceil(*slot_us);
                let stride = *stride as u64;
                let offset = (*phase as u64 + stride - first % stride) % stride;
                stream.next_slot = first + offset;
            }
        }
        stream
    }

    fn emit(&mut self, t_start_us: Micros, duration_us: Micros) -> BurstEvent {
        let center_mhz = self.spec.band.draw_center(&mut self.rng);
        BurstEvent {
            emitter_id: self.spec.id,
            tech: self.spec.tech,
            t_start_us,
            duration_us,
            center_mhz,
            bandwidth_mhz: self.spec.band.bandwidth_mhz(),
            tx_power_dbm: self.spec.tx_power_dbm,
        }
    }
}

impl Iterator for EmitterStream {
    type Item = BurstEvent;

    fn next(&mut self) -> Option<BurstEvent> {
        match self.spec.traffic.clone() {
            TrafficModel::Poisson { duration, mean_gap_us } => {
                let start = self.cursor.round() as Micros;
                if start >= self.until {
                    return None;
                }
                let d = duration.draw(&mut self.rng);
                let gap = Exp::new(1.0 / mean_gap_us).unwrap().sample(&mut self.rng);
                self.cursor = (start + d) as f64 + gap;
                Some(self.emit(start, d))
            }
            TrafficModel::Periodic { duration, period_us } => {
                let start = self.cursor as Micros;
                if start >= self.until {
                    return None;
                }
                let d = duration.draw(&mut self.rng);
                self.cursor = (start + period_us).max(start + d) as f64;
                Some(self.emit(start, d))
            }
            TrafficModel::Slotted {
                slot_us,
                air_time_us,
                stride,
                occupancy,
                ..
            } => loop {
                let start = self.next_slot * slot_us;
                if start >= self.until {
                    return None;
                }
                self.next_slot += stride as u64;
                if occupancy >= 1.0 || self.rng.gen::<f64>() < occupancy {
                    return Some(self.emit(start, air_time_us));
                }
            },
        }
    }
}

/// Time-ordered merge of every emitter's burst stream.
///
/// Events come out sorted by `(t_start_us, emitter_id)`. Memory use is one
/// pending event per emitter, so arbitrarily long horizons can be consumed
/// incrementally.
pub struct LedgerStream {
    streams: Vec<EmitterStream>,
    heap: BinaryHeap<Reverse<(Micros, u32, usize)>>,
    pending: Vec<Option<BurstEvent>>,
    max_duration_us: Micros,
}

impl LedgerStream {
    pub fn new(scenario: &[EmitterSpec], horizon_us: Micros, seed: u64) -> Result<Self, SceneError> {
        super::validate_emitters(scenario)?;
        if horizon_us == 0 {
            return Err(SceneError::NonPositiveHorizon);
        }
        let mut streams: Vec<EmitterStream> = scenario
            .iter()
            .map(|e| EmitterStream::new(e, horizon_us, seed))
            .collect();
        let mut heap = BinaryHeap::new();
        let mut pending = Vec::with_capacity(streams.len());
        for (i, s) in streams.iter_mut().enumerate() {
            let ev = s.next();
            if let Some(e) = &ev {
                heap.push(Reverse((e.t_start_us, e.emitter_id, i)));
            }
            pending.push(ev);
        }
        let max_duration_us = scenario.iter().map(|e| e.traffic.max_duration_us()).max().unwrap_or(0);
        Ok(LedgerStream {
            streams,
            heap,
            pending,
            max_duration_us,
        })
    }

    /// Longest burst any emitter of the scenario can produce.
    pub fn max_duration_us(&self) -> Micros {
        self.max_duration_us
    }

    /// Start time of the next event, if any.
    pub fn peek_start(&self) -> Option<Micros> {
        self.heap.peek().map(|Reverse((t, _, _))| *t)
    }
}

impl Iterator for LedgerStream {
    type Item = BurstEvent;

    fn next(&mut self) -> Option<BurstEvent> {
        let Reverse((_, _, i)) = self.heap.pop()?;
        let ev = self.pending[i].take();
        let next = self.streams[i].next();
        if let Some(e) = &next {
            self.heap.push(Reverse((e.t_start_us, e.emitter_id, i)));
        }
        self.pending[i] = next;
        ev
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Position;
    use crate::scene::presets;
    use crate::tech::Technology;

    fn wlan(id: u32) -> EmitterSpec {
        EmitterSpec::with_profile(id, Technology::Wlan11g, Position::new(2.0, 3.0), 20.0, 2437.0)
    }

    #[test]
    fn stream_is_sorted_and_deterministic() {
        let sc = vec![
            wlan(1),
            EmitterSpec::with_profile(2, Technology::Ble, Position::new(1.0, 1.0), 0.0, 0.0),
            EmitterSpec::with_profile(3, Technology::Bt802151, Position::new(5.0, 1.0), 0.0, 0.0),
        ];
        let a: Vec<_> = LedgerStream::new(&sc, 2_000_000, 11).unwrap().collect();
        let b: Vec<_> = LedgerStream::new(&sc, 2_000_000, 11).unwrap().collect();
        assert_eq!(a, b);
        assert!(a
            .windows(2)
            .all(|w| (w[0].t_start_us, w[0].emitter_id) <= (w[1].t_start_us, w[1].emitter_id)));
        let c: Vec<_> = LedgerStream::new(&sc, 2_000_000, 12).unwrap().collect();
        assert_ne!(a, c);
    }

    #[test]
    fn emitter_streams_are_independent_of_neighbours() {
        let alone: Vec<_> = LedgerStream::new(&[wlan(1)], 1_000_000, 5).unwrap().collect();
        let with_other: Vec<_> = LedgerStream::new(&[wlan(1), wlan(2)], 1_000_000, 5)
            .unwrap()
            .filter(|e| e.emitter_id == 1)
            .collect();
        assert_eq!(alone, with_other);
    }

    #[test]
    fn activity_window_is_respected() {
        let mut e = wlan(4);
        e.active_from_us = Some(300_000);
        e.active_until_us = Some(600_000);
        let evs: Vec<_> = LedgerStream::new(&[e], 1_000_000, 1).unwrap().collect();
        assert!(!evs.is_empty());
        assert!(evs.iter().all(|e| (300_000..600_000).contains(&e.t_start_us)));
    }

    #[test]
    fn periodic_traffic_keeps_its_period() {
        let mut e = wlan(5);
        e.traffic = TrafficModel::Periodic {
            duration: DurationModel::Fixed { us: 1000 },
            period_us: 10_000,
        };
        let evs: Vec<_> = LedgerStream::new(&[e], 1_000_000, 2).unwrap().collect();
        assert!(evs.len() >= 99);
        assert!(evs.windows(2).all(|w| w[1].t_start_us - w[0].t_start_us == 10_000));
    }

    #[test]
    fn slotted_pair_alternates_slots() {
        let mut master = presets::bt_device(1, Position::new(1.0, 1.0), 0);
        let mut slave = presets::bt_device(2, Position::new(2.0, 1.0), 1);
        for e in [&mut master, &mut slave] {
            if let TrafficModel::Slotted { occupancy, .. } = &mut e.traffic {
                *occupancy = 1.0;
            }
        }
        let evs: Vec<_> = LedgerStream::new(&[master, slave], 100_000, 2).unwrap().collect();
        assert_eq!(evs.len(), 160);
        for e in &evs {
            let slot = e.t_start_us / 625;
            assert_eq!(slot % 2, (e.emitter_id - 1) as u64);
        }
    }

    #[test]
    fn log_uniform_skew_orders_means() {
        let mean = |skew: f64| {
            let m = DurationModel::LogUniform {
                min_us: 200.0,
                max_us: 5000.0,
                skew,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            (0..20_000).map(|_| m.draw(&mut rng) as f64).sum::<f64>() / 20_000.0
        };
        let (long, mid, short) = (mean(0.5), mean(1.0), mean(2.0));
        assert!(long > mid && mid > short, "{long} {mid} {short}");
    }
}
