//! Interference reports, the network-side power / busy-time tensor and the
//! spatial maps and spectrograms rendered from it.

mod interp;
mod render;
mod report;
mod tensor;

pub use interp::{convex_hull, natural_neighbor, GridSpec, NaturalNeighbor, NodeRegistry, SpatialMap};
pub use render::{bins_in_window, node_powers, power_map, spectrogram, Spectrogram, NO_DATA};
pub use report::{
    build_report, busy_units, decode_reports, InterferenceReport, ReportBurst, ReportEntry, ReportError, BUSY_UNIT_US,
    ENTRY_LEN, HEADER_LEN, MAX_REPORT_LEN, N_CHANNELS, POWER_RANGE_DBM, REPORT_CAPACITY, REPORT_MAGIC, REPORT_VERSION,
};
pub use tensor::{all_channels, Cell, CellKey, CellValue, InterferenceTensor};

use crate::Micros;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MapError {
    #[error("unknown node {0}")]
    UnknownNode(u16),
    #[error("node {0} registered twice")]
    DuplicateNode(u16),
    #[error("node {0} shares its position with another node")]
    CoincidentNodes(u16),
    #[error("node {0} lies outside the scenario area")]
    NodeOutsideArea(u16),
    #[error("natural-neighbour interpolation needs >= 3 non-collinear nodes with data (have {0}); use nearest-neighbour mode")]
    InsufficientNodes(usize),
    #[error("no data in window")]
    NoData,
    #[error("time window covers no bin")]
    EmptyWindow,
    #[error("bin width {bin_width_us} us is not a positive multiple of {scan_period_us} us")]
    BinWidth {
        bin_width_us: Micros,
        scan_period_us: Micros,
    },
    #[error("node {node}: busy time {busy_us} us exceeds the observation window")]
    BusyExceedsObservation { node: u16, busy_us: Micros },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
