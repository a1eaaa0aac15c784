use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::radiometer::ScanSchedule;
use crate::tech::Technology;
use crate::{dbm_to_mw, mw_to_dbm, Micros};

pub const REPORT_MAGIC: u8 = 0xA5;
pub const REPORT_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 12;
pub const ENTRY_LEN: usize = 6;
/// Largest encoded report; fits one IEEE 802.15.4 MAC payload.
pub const MAX_REPORT_LEN: usize = 102;
pub const REPORT_CAPACITY: usize = (MAX_REPORT_LEN - HEADER_LEN) / ENTRY_LEN;
pub const N_CHANNELS: u8 = 16;
/// Busy time is carried in units of this many microseconds.
pub const BUSY_UNIT_US: u64 = 256;
/// Representable mean power, matching the radiometer's dynamic range.
pub const POWER_RANGE_DBM: (i8, i8) = (-100, 0);

const FLAG_OVERFLOW: u8 = 0x01;

/// One (channel, technology) cell of a scan report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReportEntry {
    /// Index into the 16-channel scan list.
    pub channel: u8,
    pub tech: Technology,
    pub burst_count: u16,
    /// Linear-domain mean burst power, rounded to 1 dB.
    pub mean_power_dbm: i8,
    pub busy_units: u8,
}

impl ReportEntry {
    pub fn busy_time_us(&self) -> Micros {
        self.busy_units as Micros * BUSY_UNIT_US
    }
}

/// A per-scan interference summary as sent over the air.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterferenceReport {
    pub node_id: u16,
    pub scan_seq: u16,
    pub scan_start_ms: u32,
    pub entries: Vec<ReportEntry>,
    pub overflow: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("bad magic byte {0:#04x}")]
    BadMagic(u8),
    #[error("unsupported report version {0}")]
    UnsupportedVersion(u8),
    #[error("report length {got} bytes, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("entry {entry}: channel index {value} out of range")]
    ChannelOutOfRange { entry: usize, value: u8 },
    #[error("entry {entry}: technology code {value} out of range")]
    TechOutOfRange { entry: usize, value: u8 },
    #[error("entry {entry}: mean power {value} dBm out of range")]
    PowerOutOfRange { entry: usize, value: i8 },
    #[error("entry {entry}: zero burst count")]
    ZeroCount { entry: usize },
    #[error("entry {entry}: duplicate (channel, technology) cell")]
    Duplicate { entry: usize },
    #[error("{0} entries exceed the report capacity")]
    TooManyEntries(usize),
    #[error("unknown flag bits {0:#04x}")]
    UnknownFlags(u8),
}

/// A classified burst as seen by the report builder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportBurst {
    pub channel: u8,
    pub tech: Technology,
    pub power_dbm: f64,
    pub busy_us: f64,
}

impl InterferenceReport {
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + ENTRY_LEN * self.entries.len()
    }

    /// Checks every constraint `decode` enforces.
    pub fn validate(&self) -> Result<(), ReportError> {
        if self.entries.len() > REPORT_CAPACITY {
            return Err(ReportError::TooManyEntries(self.entries.len()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, e) in self.entries.iter().enumerate() {
            if e.channel >= N_CHANNELS {
                return Err(ReportError::ChannelOutOfRange {
                    entry: i,
                    value: e.channel,
                });
            }
            if !(POWER_RANGE_DBM.0..=POWER_RANGE_DBM.1).contains(&e.mean_power_dbm) {
                return Err(ReportError::PowerOutOfRange {
                    entry: i,
                    value: e.mean_power_dbm,
                });
            }
            if e.burst_count == 0 {
                return Err(ReportError::ZeroCount { entry: i });
            }
            if !seen.insert((e.channel, e.tech)) {
                return Err(ReportError::Duplicate { entry: i });
            }
        }
        Ok(())
    }

    /// Little-endian wire encoding. Panics on an invalid report.
    pub fn encode(&self) -> Vec<u8> {
        self.validate().expect("encoding an invalid report");
        let mut out = Vec::with_capacity(self.encoded_len());
        out.push(REPORT_MAGIC);
        out.push(REPORT_VERSION);
        out.extend_from_slice(&self.node_id.to_le_bytes());
        out.extend_from_slice(&self.scan_seq.to_le_bytes());
        out.extend_from_slice(&self.scan_start_ms.to_le_bytes());
        out.push(self.entries.len() as u8);
        out.push(if self.overflow { FLAG_OVERFLOW } else { 0 });
        for e in &self.entries {
            out.push(e.channel);
            out.push(e.tech.index() as u8);
            out.extend_from_slice(&e.burst_count.to_le_bytes());
            out.push(e.mean_power_dbm as u8);
            out.push(e.busy_units);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<InterferenceReport, ReportError> {
        if bytes.len() < HEADER_LEN {
            return Err(ReportError::Length {
                expected: HEADER_LEN,
                got: bytes.len(),
            });
        }
        if bytes[0] != REPORT_MAGIC {
            return Err(ReportError::BadMagic(bytes[0]));
        }
        if bytes[1] != REPORT_VERSION {
            return Err(ReportError::UnsupportedVersion(bytes[1]));
        }
        let count = bytes[10] as usize;
        if count > REPORT_CAPACITY {
            return Err(ReportError::TooManyEntries(count));
        }
        let expected = HEADER_LEN + ENTRY_LEN * count;
        if bytes.len() != expected {
            return Err(ReportError::Length {
                expected,
                got: bytes.len(),
            });
        }
        let flags = bytes[11];
        if flags & !FLAG_OVERFLOW != 0 {
            return Err(ReportError::UnknownFlags(flags));
        }
        let mut entries = Vec::with_capacity(count);
        for (i, e) in bytes[HEADER_LEN..].chunks_exact(ENTRY_LEN).enumerate() {
            let tech =
                Technology::from_index(e[1] as usize).ok_or(ReportError::TechOutOfRange { entry: i, value: e[1] })?;
            entries.push(ReportEntry {
                channel: e[0],
                tech,
                burst_count: u16::from_le_bytes([e[2], e[3]]),
                mean_power_dbm: e[4] as i8,
                busy_units: e[5],
            });
        }
        let report = InterferenceReport {
            node_id: u16::from_le_bytes([bytes[2], bytes[3]]),
            scan_seq: u16::from_le_bytes([bytes[4], bytes[5]]),
            scan_start_ms: u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]),
            entries,
            overflow: flags & FLAG_OVERFLOW != 0,
        };
        report.validate()?;
        Ok(report)
    }
}

/// Decodes a concatenation of encoded reports, as stored in `reports.bin`.
pub fn decode_reports(mut bytes: &[u8]) -> Result<Vec<InterferenceReport>, ReportError> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        if bytes.len() < HEADER_LEN {
            return Err(ReportError::Length {
                expected: HEADER_LEN,
                got: bytes.len(),
            });
        }
        let len = (HEADER_LEN + ENTRY_LEN * bytes[10] as usize).min(bytes.len());
        out.push(InterferenceReport::decode(&bytes[..len])?);
        bytes = &bytes[len..];
    }
    Ok(out)
}

/// Quantized busy time: 256 us units, rounded, never above the observation
/// window.
pub fn busy_units(busy_us: f64, observation_us: Micros) -> u8 {
    let cap = (observation_us / BUSY_UNIT_US).min(u8::MAX as u64);
    ((busy_us.max(0.0) / BUSY_UNIT_US as f64).round() as u64).min(cap) as u8
}

fn quantize_power(dbm: f64) -> i8 {
    dbm.round().clamp(POWER_RANGE_DBM.0 as f64, POWER_RANGE_DBM.1 as f64) as i8
}

/// Summarizes one scan of one node. Cells are ordered by (channel, tech);
/// beyond capacity the highest-busy-time cells are kept and the overflow
/// flag is set.
pub fn build_report(bursts: &[ReportBurst], schedule: &ScanSchedule, node_id: u16, scan: u64) -> InterferenceReport {
    #[derive(Default)]
    struct Acc {
        count: u64,
        mw: f64,
        busy_us: f64,
    }
    let mut cells: BTreeMap<(u8, Technology), Acc> = BTreeMap::new();
    for b in bursts {
        let a = cells.entry((b.channel, b.tech)).or_default();
        a.count += 1;
        a.mw += dbm_to_mw(b.power_dbm);
        a.busy_us += b.busy_us;
    }
    let mut ranked: Vec<(f64, ReportEntry)> = cells
        .into_iter()
        .map(|((channel, tech), a)| {
            let entry = ReportEntry {
                channel,
                tech,
                burst_count: a.count.min(u16::MAX as u64) as u16,
                mean_power_dbm: quantize_power(mw_to_dbm(a.mw / a.count as f64)),
                busy_units: busy_units(a.busy_us, schedule.observation_us),
            };
            (a.busy_us, entry)
        })
        .collect();
    let overflow = ranked.len() > REPORT_CAPACITY;
    if overflow {
        // Stable sort keeps (channel, tech) order among equal busy times.
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
        ranked.truncate(REPORT_CAPACITY);
        ranked.sort_by_key(|(_, e)| (e.channel, e.tech));
    }
    InterferenceReport {
        node_id,
        scan_seq: scan as u16,
        scan_start_ms: (schedule.scan_start_us(scan) / 1000) as u32,
        entries: ranked.into_iter().map(|(_, e)| e).collect(),
        overflow,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radiometer::build_schedule;

    fn schedule() -> ScanSchedule {
        build_schedule(50_000, 5_000_000).unwrap()
    }

    #[test]
    fn capacity_is_fifteen() {
        assert_eq!(REPORT_CAPACITY, 15);
    }

    #[test]
    fn empty_scan_is_header_only() {
        let r = build_report(&[], &schedule(), 7, 3);
        assert!(r.entries.is_empty() && !r.overflow);
        assert_eq!(r.scan_start_ms, 15_000);
        let bytes = r.encode();
        assert_eq!(bytes.len(), 12);
        assert_eq!(bytes, [0xA5, 1, 7, 0, 3, 0, 0x98, 0x3A, 0, 0, 0, 0]);
    }

    #[test]
    fn concatenated_reports_split_on_entry_count() {
        let b = ReportBurst {
            channel: 3,
            tech: Technology::Wlan11g,
            power_dbm: -60.0,
            busy_us: 1000.0,
        };
        let a = build_report(&[b], &schedule(), 1, 0);
        let e = build_report(&[], &schedule(), 2, 0);
        let mut bytes = a.encode();
        bytes.extend(e.encode());
        assert_eq!(decode_reports(&bytes).unwrap(), vec![a, e]);
        bytes.pop();
        assert!(matches!(decode_reports(&bytes), Err(ReportError::Length { .. })));
        assert!(decode_reports(&[]).unwrap().is_empty());
    }

    #[test]
    fn single_burst_entry() {
        let b = ReportBurst {
            channel: 3,
            tech: Technology::Wlan11g,
            power_dbm: -60.0,
            busy_us: 1000.0,
        };
        let r = build_report(&[b], &schedule(), 1, 0);
        assert_eq!(
            r.entries,
            vec![ReportEntry {
                channel: 3,
                tech: Technology::Wlan11g,
                burst_count: 1,
                mean_power_dbm: -60,
                busy_units: 4
            }]
        );
        assert_eq!(r.entries[0].busy_time_us(), 1024);
        assert_eq!(&r.encode()[12..], &[3, 1, 1, 0, (-60i8) as u8, 4]);
    }

    #[test]
    fn mean_power_is_linear() {
        let mk = |p| ReportBurst {
            channel: 0,
            tech: Technology::Ble,
            power_dbm: p,
            busy_us: 400.0,
        };
        let r = build_report(&[mk(-60.0), mk(-70.0)], &schedule(), 1, 0);
        // 10 log10((1e-6 + 1e-7) / 2) = -62.6
        assert_eq!(r.entries[0].mean_power_dbm, -63);
        assert_eq!(r.entries[0].burst_count, 2);
        assert_eq!(r.entries[0].busy_units, 3);
    }

    #[test]
    fn overflow_keeps_busiest_cells() {
        let mut bursts = vec![];
        for ch in 0..16u8 {
            for (k, tech) in [Technology::Wlan11b, Technology::Ble, Technology::Zigbee802154]
                .into_iter()
                .enumerate()
            {
                if bursts.len() == 40 {
                    break;
                }
                let busy = 1000.0 + 300.0 * (ch as f64) + k as f64;
                bursts.push(ReportBurst {
                    channel: ch,
                    tech,
                    power_dbm: -70.0,
                    busy_us: busy,
                });
            }
        }
        let r = build_report(&bursts, &schedule(), 1, 0);
        assert!(r.overflow);
        assert_eq!(r.entries.len(), 15);
        assert_eq!(r.encode().len(), 102);
        // 40 cells fill channels 0..=12 plus one on 13; the busiest 15 reach down to two cells of channel 8.
        assert_eq!((r.entries[0].channel, r.entries[0].tech), (8, Technology::Ble));
        assert_eq!((r.entries[1].channel, r.entries[1].tech), (8, Technology::Zigbee802154));
        assert_eq!(r.entries[14].channel, 13);
    }

    #[test]
    fn busy_time_never_exceeds_observation() {
        assert_eq!(busy_units(60_000.0, 50_000), 195);
        assert_eq!(busy_units(49_999.0, 50_000), 195);
        assert!(busy_units(1e9, 50_000) as u64 * BUSY_UNIT_US <= 50_000);
        assert_eq!(busy_units(127.0, 50_000), 0);
    }

    #[test]
    fn decode_errors_are_distinct() {
        let mut r = build_report(&[], &schedule(), 1, 0);
        r.entries.push(ReportEntry {
            channel: 2,
            tech: Technology::Ble,
            burst_count: 1,
            mean_power_dbm: -50,
            busy_units: 9,
        });
        let good = r.encode();
        assert_eq!(InterferenceReport::decode(&good).unwrap(), r);

        let with = |i: usize, v: u8| {
            let mut b = good.clone();
            b[i] = v;
            InterferenceReport::decode(&b).unwrap_err()
        };
        assert_eq!(with(0, 0x5A), ReportError::BadMagic(0x5A));
        assert_eq!(with(1, 2), ReportError::UnsupportedVersion(2));
        assert_eq!(with(10, 2), ReportError::Length { expected: 24, got: 18 });
        assert_eq!(with(10, 16), ReportError::TooManyEntries(16));
        assert_eq!(with(11, 0x80), ReportError::UnknownFlags(0x80));
        assert_eq!(with(12, 16), ReportError::ChannelOutOfRange { entry: 0, value: 16 });
        assert_eq!(with(13, 6), ReportError::TechOutOfRange { entry: 0, value: 6 });
        assert_eq!(with(16, 5), ReportError::PowerOutOfRange { entry: 0, value: 5 });
        let mut zero = good.clone();
        zero[14] = 0;
        assert_eq!(
            InterferenceReport::decode(&zero).unwrap_err(),
            ReportError::ZeroCount { entry: 0 }
        );
        for n in 0..good.len() {
            assert!(InterferenceReport::decode(&good[..n]).is_err());
        }
    }
}
