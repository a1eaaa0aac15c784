use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{InterferenceReport, MapError, NodeRegistry, N_CHANNELS};
use crate::tech::{TechSet, Technology};
use crate::Micros;

/// Fixed-point scale of the linear power accumulator: a report power of
/// `p` dBm adds `round(10^((p + 100) / 10) * LINEAR_SCALE)` per burst.
const LINEAR_SCALE: f64 = 1e6;
const LINEAR_OFFSET_DB: f64 = 100.0;

fn to_linear(dbm: i8) -> u128 {
    (10f64.powf((dbm as f64 + LINEAR_OFFSET_DB) / 10.0) * LINEAR_SCALE).round() as u128
}

fn from_linear(sum: u128, count: u64) -> f64 {
    10.0 * (sum as f64 / (count as f64 * LINEAR_SCALE)).log10() - LINEAR_OFFSET_DB
}

/// Integer accumulators for one (bin, channel, technology, node) cell.
/// Integer sums make aggregation exactly order-independent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub linear_power: u128,
    pub count: u64,
    pub busy_us: u64,
}

impl Cell {
    fn merge(&mut self, other: &Cell) {
        self.linear_power += other.linear_power;
        self.count += other.count;
        self.busy_us += other.busy_us;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub bin: u64,
    pub channel: u8,
    pub tech: Technology,
    pub node: u16,
}

/// Sparse time x channel x technology x node power and busy-time tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterferenceTensor {
    bin_width_us: Micros,
    scan_period_us: Micros,
    observation_us: Micros,
    n_bins: u64,
    cells: BTreeMap<CellKey, Cell>,
}

/// Power and busy fraction rendered from aggregated [`Cell`]s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellValue {
    pub power_dbm: f64,
    pub busy_fraction: f64,
    pub count: u64,
}

impl InterferenceTensor {
    /// `bin_width_us` must be a positive multiple of the scan period.
    pub fn new(bin_width_us: Micros, scan_period_us: Micros, observation_us: Micros) -> Result<Self, MapError> {
        if scan_period_us == 0 || bin_width_us == 0 || !bin_width_us.is_multiple_of(scan_period_us) {
            return Err(MapError::BinWidth {
                bin_width_us,
                scan_period_us,
            });
        }
        if observation_us == 0 || observation_us > scan_period_us {
            return Err(MapError::InvalidParameter(format!("observation {observation_us} us")));
        }
        Ok(InterferenceTensor {
            bin_width_us,
            scan_period_us,
            observation_us,
            n_bins: 0,
            cells: BTreeMap::new(),
        })
    }

    /// Pads the time axis so that it covers `horizon_us`.
    pub fn cover(&mut self, horizon_us: Micros) {
        self.n_bins = self.n_bins.max(horizon_us.div_ceil(self.bin_width_us));
    }

    pub fn bin_width_us(&self) -> Micros {
        self.bin_width_us
    }

    pub fn observation_us(&self) -> Micros {
        self.observation_us
    }

    pub fn n_bins(&self) -> u64 {
        self.n_bins
    }

    pub fn scans_per_bin(&self) -> u64 {
        self.bin_width_us / self.scan_period_us
    }

    pub fn cells(&self) -> impl Iterator<Item = (&CellKey, &Cell)> {
        self.cells.iter()
    }

    pub fn bin_of(&self, t_us: Micros) -> u64 {
        t_us / self.bin_width_us
    }

    /// Folds one report into the tensor.
    pub fn accumulate(&mut self, report: &InterferenceReport, registry: &NodeRegistry) -> Result<(), MapError> {
        if !registry.contains(report.node_id) {
            return Err(MapError::UnknownNode(report.node_id));
        }
        let bin = self.bin_of(report.scan_start_ms as Micros * 1000);
        for e in &report.entries {
            if e.busy_time_us() > self.observation_us {
                return Err(MapError::BusyExceedsObservation {
                    node: report.node_id,
                    busy_us: e.busy_time_us(),
                });
            }
        }
        for e in &report.entries {
            let key = CellKey {
                bin,
                channel: e.channel,
                tech: e.tech,
                node: report.node_id,
            };
            self.cells.entry(key).or_default().merge(&Cell {
                linear_power: to_linear(e.mean_power_dbm) * e.burst_count as u128,
                count: e.burst_count as u64,
                busy_us: e.busy_time_us(),
            });
        }
        self.n_bins = self.n_bins.max(bin + 1);
        Ok(())
    }

    /// Coarser copy with `factor` adjacent bins merged.
    pub fn rebin(&self, factor: u64) -> Result<InterferenceTensor, MapError> {
        if factor == 0 {
            return Err(MapError::InvalidParameter("rebin factor 0".into()));
        }
        let mut out = InterferenceTensor::new(self.bin_width_us * factor, self.scan_period_us, self.observation_us)?;
        out.n_bins = self.n_bins.div_ceil(factor);
        for (k, c) in &self.cells {
            let key = CellKey {
                bin: k.bin / factor,
                ..*k
            };
            out.cells.entry(key).or_default().merge(c);
        }
        Ok(out)
    }

    /// Rebins to a target width in microseconds.
    pub fn rebin_to(&self, bin_width_us: Micros) -> Result<InterferenceTensor, MapError> {
        if bin_width_us == 0 || !bin_width_us.is_multiple_of(self.bin_width_us) {
            return Err(MapError::BinWidth {
                bin_width_us,
                scan_period_us: self.bin_width_us,
            });
        }
        self.rebin(bin_width_us / self.bin_width_us)
    }

    fn render(&self, c: &Cell) -> CellValue {
        let capacity = (self.scans_per_bin() * self.observation_us) as f64;
        CellValue {
            power_dbm: from_linear(c.linear_power, c.count),
            busy_fraction: (c.busy_us as f64 / capacity).min(1.0),
            count: c.count,
        }
    }

    pub fn get(&self, key: &CellKey) -> Option<CellValue> {
        self.cells.get(key).filter(|c| c.count > 0).map(|c| self.render(c))
    }

    /// Sum of accumulators over the bins in `bins`, the channels in
    /// `channels` and the technologies in `techs`, for one node.
    pub fn aggregate(
        &self,
        node: u16,
        techs: TechSet,
        bins: std::ops::Range<u64>,
        channels: &[u8],
    ) -> Option<CellValue> {
        let mut acc = Cell::default();
        for (k, c) in self.cells.range(
            CellKey {
                bin: bins.start,
                channel: 0,
                tech: Technology::ALL[0],
                node: 0,
            }..CellKey {
                bin: bins.end,
                channel: 0,
                tech: Technology::ALL[0],
                node: 0,
            },
        ) {
            if k.node == node && techs.contains(k.tech) && channels.contains(&k.channel) {
                acc.merge(c);
            }
        }
        (acc.count > 0).then(|| {
            let bins_n = (bins.end - bins.start).max(1);
            let mut v = self.render(&acc);
            v.busy_fraction =
                (acc.busy_us as f64 / (bins_n * self.scans_per_bin() * self.observation_us) as f64).min(1.0);
            v
        })
    }

    /// CSV rows `bin,channel,tech,node,power_dbm,busy_frac` for populated cells.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin,channel,tech,node,power_dbm,busy_frac")?;
        for (k, c) in &self.cells {
            if c.count == 0 {
                continue;
            }
            let v = self.render(c);
            writeln!(
                out,
                "{},{},{},{},{:.3},{:.6}",
                k.bin, k.channel, k.tech, k.node, v.power_dbm, v.busy_fraction
            )?;
        }
        Ok(())
    }
}

pub fn all_channels() -> Vec<u8> {
    (0..N_CHANNELS).collect()
}
