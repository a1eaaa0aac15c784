use std::collections::BTreeMap;
use std::io::Write;
use std::ops::Range;

use super::{natural_neighbor, GridSpec, InterferenceTensor, MapError, NodeRegistry, SpatialMap, N_CHANNELS};
use crate::tech::TechSet;
use crate::{dbm_to_mw, mw_to_dbm, Micros};

/// Bins whose start lies in `[t0, t1)`.
pub fn bins_in_window(tensor: &InterferenceTensor, window_us: (Micros, Micros)) -> Range<u64> {
    let w = tensor.bin_width_us();
    window_us.0.div_ceil(w)..window_us.1.div_ceil(w)
}

/// Per-node mean power over a window, channel set and technology set.
pub fn node_powers(
    tensor: &InterferenceTensor,
    techs: TechSet,
    window_us: (Micros, Micros),
    channels: &[u8],
    registry: &NodeRegistry,
) -> BTreeMap<u16, f64> {
    let bins = bins_in_window(tensor, window_us);
    registry
        .iter()
        .filter_map(|(id, _)| {
            tensor
                .aggregate(id, techs, bins.clone(), channels)
                .map(|v| (id, v.power_dbm))
        })
        .collect()
}

/// Natural-neighbour power map in dBm, interpolated in linear power.
/// Nodes without bursts in the selection do not take part.
pub fn power_map(
    tensor: &InterferenceTensor,
    techs: TechSet,
    window_us: (Micros, Micros),
    channels: &[u8],
    registry: &NodeRegistry,
    grid: &GridSpec,
) -> Result<SpatialMap, MapError> {
    if bins_in_window(tensor, window_us).is_empty() {
        return Err(MapError::EmptyWindow);
    }
    let powers = node_powers(tensor, techs, window_us, channels, registry);
    if powers.is_empty() {
        return Err(MapError::NoData);
    }
    let linear: BTreeMap<u16, f64> = powers.iter().map(|(&k, &v)| (k, dbm_to_mw(v))).collect();
    let mut map = natural_neighbor(&linear, registry, grid)?;
    for v in &mut map.values {
        *v = mw_to_dbm(*v);
    }
    // Restore exact node values lost to the dBm / mW round trip.
    for (id, p) in registry.iter() {
        if let Some(&v) = powers.get(&id) {
            let (i, j) = (
                (p.x - grid.origin.x) / grid.cell_m - 0.5,
                (p.y - grid.origin.y) / grid.cell_m - 0.5,
            );
            if i.fract() == 0.0
                && j.fract() == 0.0
                && i >= 0.0
                && j >= 0.0
                && (i as usize) < grid.nx
                && (j as usize) < grid.ny
            {
                map.values[j as usize * grid.nx + i as usize] = v;
            }
        }
    }
    Ok(map)
}

/// Time x channel power and busy-fraction matrices for one node.
/// `None` marks cells without bursts.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub node_id: u16,
    pub bin_width_us: Micros,
    pub power_dbm: Vec<[Option<f64>; N_CHANNELS as usize]>,
    pub busy_fraction: Vec<[Option<f64>; N_CHANNELS as usize]>,
}

pub const NO_DATA: &str = "NA";

impl Spectrogram {
    fn write_matrix<W: Write>(
        &self,
        mut out: W,
        rows: &[[Option<f64>; N_CHANNELS as usize]],
        digits: usize,
    ) -> std::io::Result<()> {
        let header: Vec<String> = (0..N_CHANNELS).map(|c| format!("ch{c}")).collect();
        writeln!(out, "bin,t_start_s,{}", header.join(","))?;
        for (b, row) in rows.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .map(|c| c.map_or(NO_DATA.to_string(), |v| format!("{v:.digits$}")))
                .collect();
            let t = b as f64 * self.bin_width_us as f64 / 1e6;
            writeln!(out, "{b},{t},{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn write_power_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        self.write_matrix(out, &self.power_dbm, 3)
    }

    pub fn write_busy_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        self.write_matrix(out, &self.busy_fraction, 6)
    }
}

/// Dense per-bin slices of the tensor for one node.
pub fn spectrogram(
    tensor: &InterferenceTensor,
    node_id: u16,
    techs: TechSet,
    registry: &NodeRegistry,
) -> Result<Spectrogram, MapError> {
    if !registry.contains(node_id) {
        return Err(MapError::UnknownNode(node_id));
    }
    let n = tensor.n_bins() as usize;
    let mut power = vec![[None; N_CHANNELS as usize]; n];
    let mut busy = vec![[None; N_CHANNELS as usize]; n];
    for b in 0..n {
        for ch in 0..N_CHANNELS {
            if let Some(v) = tensor.aggregate(node_id, techs, b as u64..b as u64 + 1, &[ch]) {
                power[b][ch as usize] = Some(v.power_dbm);
                busy[b][ch as usize] = Some(v.busy_fraction);
            }
        }
    }
    Ok(Spectrogram {
        node_id,
        bin_width_us: tensor.bin_width_us(),
        power_dbm: power,
        busy_fraction: busy,
    })
}
