//! Whole-network runs: ledger streaming, per-node sensing, classification
//! and report generation, one scan period at a time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{classify, ClassifierError, Dataset, Model};
use crate::maps::{build_report, InterferenceReport, InterferenceTensor, MapError, NodeRegistry, ReportBurst};
use crate::pipeline::{extract_features, label_burst, observe_window, DetectorParams, LabeledBurst, ObservedBurst};
use crate::radiometer::{build_schedule, DeviceModel, RadioEnvironment, RadiometerError, RssiTrace, ScanSchedule};
use crate::scene::{presets, BurstEvent, NodeSpec, Scenario, SceneError};
use crate::{dbm_to_mw, mw_to_dbm, Micros};

/// Margin past a scan's end for which bursts are buffered, covering sweeps
/// that outlast the observation window.
const SWEEP_MARGIN_US: Micros = 2_000;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Radiometer(#[from] RadiometerError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Radiometric parameters shared by all nodes of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceDefaults {
    pub sampling_rate_hz: f64,
    pub rbw_mhz: f64,
    pub noise_floor_dbm: f64,
    pub dynamic_range_dbm: (f64, f64),
    pub retune_dwell_us: f64,
    pub rssi_jitter_db: f64,
    /// Draw a per-node calibration offset unless the node pins one.
    pub random_calibration: bool,
}

impl Default for DeviceDefaults {
    fn default() -> Self {
        let d = DeviceModel::ideal(0, crate::Position::new(0.0, 0.0));
        DeviceDefaults {
            sampling_rate_hz: d.sampling_rate_hz,
            rbw_mhz: d.rbw_mhz,
            noise_floor_dbm: d.noise_floor_dbm,
            dynamic_range_dbm: d.dynamic_range_dbm,
            retune_dwell_us: d.retune_dwell_us,
            rssi_jitter_db: 0.0,
            random_calibration: true,
        }
    }
}

impl DeviceDefaults {
    pub fn device(&self, node: &NodeSpec, seed: u64) -> Result<DeviceModel, RadiometerError> {
        let base = if self.random_calibration {
            DeviceModel::new(node.id, node.position, seed)
        } else {
            DeviceModel::ideal(node.id, node.position)
        };
        let d = DeviceModel {
            calibration_offset_db: node.calibration_offset_db.unwrap_or(base.calibration_offset_db),
            sampling_rate_hz: self.sampling_rate_hz,
            rbw_mhz: self.rbw_mhz,
            noise_floor_dbm: self.noise_floor_dbm,
            dynamic_range_dbm: self.dynamic_range_dbm,
            retune_dwell_us: self.retune_dwell_us,
            rssi_jitter_db: self.rssi_jitter_db,
            ..base
        };
        d.validate()?;
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub observation_us: Micros,
    pub period_us: Micros,
    pub detector: DetectorParams,
    pub device: DeviceDefaults,
    /// Ground-truth candidates must reach the node at least this strong.
    pub label_min_visible_dbm: Option<f64>,
    /// Keep RSSI traces of windows with detections during the first
    /// this-many scans.
    pub trace_scans: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            observation_us: 50_000,
            period_us: 5_000_000,
            detector: DetectorParams::default(),
            device: DeviceDefaults::default(),
            label_min_visible_dbm: None,
            trace_scans: 1,
        }
    }
}

impl SimParams {
    pub fn schedule(&self) -> Result<ScanSchedule, RadiometerError> {
        build_schedule(self.observation_us, self.period_us)
    }

    pub fn devices(&self, scenario: &Scenario) -> Result<Vec<DeviceModel>, RadiometerError> {
        let mut nodes = scenario.nodes.clone();
        nodes.sort_by_key(|n| n.id);
        nodes.iter().map(|n| self.device.device(n, scenario.seed)).collect()
    }
}

/// Where report technologies come from.
#[derive(Debug, Clone, Copy)]
pub enum Labeler<'a> {
    /// Ground truth from the ledger.
    Oracle,
    Model(&'a Model),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub scans: u64,
    pub bursts_generated: u64,
    /// Above-threshold runs long enough to classify.
    pub bursts_detected: u64,
    pub bursts_labeled: u64,
    /// Detected bursts without a ground-truth counterpart.
    pub bursts_unlabeled: u64,
    pub duty_cycle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub schedule: ScanSchedule,
    /// Ordered by scan, then node id.
    pub reports: Vec<InterferenceReport>,
    pub dataset: Dataset,
    pub traces: Vec<RssiTrace>,
    pub stats: SimStats,
}

#[derive(Default)]
struct NodeScan {
    report: Option<InterferenceReport>,
    labeled: Vec<LabeledBurst>,
    detected: u64,
    unlabeled: u64,
    traces: Vec<RssiTrace>,
}

/// Linear-mean power of a burst, including its unclassifiable tail.
fn burst_power_dbm(head: &ObservedBurst, tail: Option<&ObservedBurst>) -> f64 {
    let samples = head.samples.iter().chain(tail.map_or(&[][..], |t| &t.samples[..]));
    let (sum, n) = samples.fold((0.0, 0usize), |(s, n), &v| (s + dbm_to_mw(v as f64), n + 1));
    mw_to_dbm(sum / n as f64)
}

#[allow(clippy::too_many_arguments)]
fn scan_node(
    env: &RadioEnvironment<'_>,
    device: &DeviceModel,
    schedule: &ScanSchedule,
    scan: u64,
    params: &SimParams,
    labeler: Labeler<'_>,
    seed: u64,
    keep_traces: bool,
) -> Result<NodeScan, SimError> {
    let mut out = NodeScan::default();
    let min_visible = params.label_min_visible_dbm.unwrap_or(f64::NEG_INFINITY);
    let mut report_bursts = Vec::new();
    for (idx, &ch) in schedule.channels_mhz.iter().enumerate() {
        let window = schedule.window(scan, idx);
        let (trace, bursts) = observe_window(env, device, ch, window, &params.detector, seed)?;
        for (i, head) in bursts.iter().enumerate() {
            if !head.classifiable {
                continue;
            }
            out.detected += 1;
            let tail = bursts.get(i + 1).filter(|t| !t.classifiable);
            let features = extract_features(head);
            let truth = label_burst(head, env, device, min_visible);
            match truth {
                Some(label) => out.labeled.push(LabeledBurst { features, label }),
                None => out.unlabeled += 1,
            }
            let tech = match labeler {
                Labeler::Oracle => truth,
                Labeler::Model(m) => Some(classify(m, &features)?.0),
            };
            if let Some(tech) = tech {
                report_bursts.push(ReportBurst {
                    channel: idx as u8,
                    tech,
                    power_dbm: burst_power_dbm(head, tail),
                    busy_us: head.duration_us + tail.map_or(0.0, |t| t.duration_us),
                });
            }
        }
        if keep_traces && !bursts.is_empty() {
            out.traces.push(trace);
        }
    }
    out.report = Some(build_report(&report_bursts, schedule, device.node_id, scan));
    Ok(out)
}

/// Runs every node of `scenario` over its horizon. Each generated ledger
/// event is passed to `on_event` in start order; bursts are buffered only
/// while some scan can still observe them.
pub fn simulate(
    scenario: &Scenario,
    params: &SimParams,
    labeler: Labeler<'_>,
    mut on_event: impl FnMut(&BurstEvent),
) -> Result<SimOutput, SimError> {
    scenario.validate()?;
    let schedule = params.schedule()?;
    let devices = params.devices(scenario)?;
    let positions = scenario.emitter_positions();
    let mut stream = scenario.stream()?;
    let max_duration = stream.max_duration_us();
    let mut buffer: Vec<BurstEvent> = Vec::new();
    let mut stats = SimStats {
        duty_cycle: schedule.duty_cycle(),
        ..SimStats::default()
    };
    let mut reports = Vec::new();
    let mut labeled = Vec::new();
    let mut traces = Vec::new();

    let scans = schedule.scans_within(scenario.horizon_us);
    for scan in 0..scans {
        let start = schedule.scan_start_us(scan);
        let end = start + schedule.dwell_us() + SWEEP_MARGIN_US;
        let stale = buffer.partition_point(|e| e.t_start_us + max_duration <= start);
        buffer.drain(..stale);
        while stream.peek_start().is_some_and(|t| t < end) {
            let ev = stream.next().expect("peeked");
            on_event(&ev);
            stats.bursts_generated += 1;
            if ev.t_end_us() > start {
                buffer.push(ev);
            }
        }
        let env = RadioEnvironment::new(&buffer, &positions, scenario.pathloss, scenario.seed);
        let keep_traces = scan < params.trace_scans;
        let per_node: Vec<NodeScan> = devices
            .par_iter()
            .map(|d| scan_node(&env, d, &schedule, scan, params, labeler, scenario.seed, keep_traces))
            .collect::<Result<_, _>>()?;
        for n in per_node {
            stats.bursts_detected += n.detected;
            stats.bursts_unlabeled += n.unlabeled;
            reports.extend(n.report);
            labeled.extend(n.labeled);
            traces.extend(n.traces);
        }
    }
    for ev in stream {
        on_event(&ev);
        stats.bursts_generated += 1;
    }
    stats.scans = scans;
    stats.bursts_labeled = labeled.len() as u64;
    Ok(SimOutput {
        schedule,
        reports,
        dataset: Dataset::new(labeled),
        traces,
        stats,
    })
}

pub fn registry(scenario: &Scenario) -> Result<NodeRegistry, MapError> {
    NodeRegistry::within(scenario.nodes.iter().map(|n| (n.id, n.position)), &scenario.area)
}

/// Aggregates reports into a tensor with `bin_width_us` bins covering
/// `horizon_us`.
pub fn aggregate(
    reports: &[InterferenceReport],
    registry: &NodeRegistry,
    schedule: &ScanSchedule,
    bin_width_us: Micros,
    horizon_us: Micros,
) -> Result<InterferenceTensor, MapError> {
    let mut t = InterferenceTensor::new(bin_width_us, schedule.period_us, schedule.observation_us)?;
    t.cover(horizon_us);
    for r in reports {
        t.accumulate(r, registry)?;
    }
    Ok(t)
}

/// Horizon of the default training campaign.
pub const TRAINING_HORIZON_US: Micros = 360_000_000;
/// Class cap of the default training set.
pub const TRAINING_PER_CLASS: usize = 3000;

/// Labeled feature vectors from the six-technology training campaign,
/// subsampled to at most `per_class` bursts per technology.
pub fn synthesize_dataset(
    seed: u64,
    horizon_us: Micros,
    per_class: usize,
    params: &SimParams,
) -> Result<(Dataset, SimStats), SimError> {
    let scenario = presets::training(seed, horizon_us);
    let out = simulate(&scenario, params, Labeler::Oracle, |_| {})?;
    Ok((out.dataset.capped_per_class(per_class, seed), out.stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Area;
    use crate::scene::{EmitterSpec, PathLoss};
    use crate::tech::Technology;
    use crate::Position;

    fn scenario(emitters: Vec<EmitterSpec>, horizon_us: Micros) -> Scenario {
        Scenario {
            area: Area {
                width_m: 10.0,
                height_m: 10.0,
            },
            emitters,
            nodes: vec![
                NodeSpec {
                    id: 2,
                    position: Position::new(5.0, 5.0),
                    calibration_offset_db: None,
                },
                NodeSpec {
                    id: 1,
                    position: Position::new(1.0, 1.0),
                    calibration_offset_db: Some(0.0),
                },
            ],
            pathloss: PathLoss::default(),
            seed: 5,
            horizon_us,
        }
    }

    #[test]
    fn empty_scenario_yields_header_only_reports() {
        let out = simulate(
            &scenario(vec![], 10_000_000),
            &SimParams::default(),
            Labeler::Oracle,
            |_| {},
        )
        .unwrap();
        assert_eq!(out.stats.scans, 2);
        assert_eq!(out.reports.len(), 4);
        assert!(out.reports.iter().all(|r| r.entries.is_empty()));
        assert_eq!(
            out.reports.iter().map(|r| r.node_id).collect::<Vec<_>>(),
            vec![1, 2, 1, 2]
        );
        assert!(out.dataset.is_empty());
    }

    #[test]
    fn wlan_shows_up_on_its_channels() {
        let ap = EmitterSpec::with_profile(1, Technology::Wlan11g, Position::new(6.0, 6.0), 20.0, 2437.0);
        let mut seen = 0;
        let out = simulate(
            &scenario(vec![ap], 10_000_000),
            &SimParams::default(),
            Labeler::Oracle,
            |_| seen += 1,
        )
        .unwrap();
        assert_eq!(seen, out.stats.bursts_generated);
        assert!(out.stats.bursts_detected > 0);
        assert!(out.dataset.rows.iter().all(|r| r.label == Technology::Wlan11g));
        for r in &out.reports {
            for e in &r.entries {
                // 2437 MHz +- 10 MHz plus filter reach covers channels 5..=11 of 2405..2480.
                assert!((4..=11).contains(&e.channel), "channel {}", e.channel);
                assert_eq!(e.tech, Technology::Wlan11g);
            }
        }
        assert!(!out.traces.is_empty() && out.traces.iter().all(|t| t.t0_us < 5_000_000));
    }

    #[test]
    fn runs_are_deterministic() {
        let ap = EmitterSpec::with_profile(1, Technology::Wlan11n, Position::new(6.0, 6.0), 20.0, 2412.0);
        let sc = scenario(vec![ap], 10_000_000);
        let a = simulate(&sc, &SimParams::default(), Labeler::Oracle, |_| {}).unwrap();
        let b = simulate(&sc, &SimParams::default(), Labeler::Oracle, |_| {}).unwrap();
        assert_eq!(a, b);
    }
}
