use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use coexmap::classifier::{
    ablate_spectral_features, evaluate_with, sweep_complexity, train_knn, train_tree, Dataset, Metrics, Model,
    TreeParams,
};
use coexmap::maps::{
    decode_reports as decode_stream, node_powers, power_map, spectrogram as node_spectrogram, GridSpec,
    InterferenceReport, InterferenceTensor, NodeRegistry,
};
use coexmap::radiometer::TRACE_CSV_HEADER;
use coexmap::scene::{write_ledger_row, Scenario, LEDGER_CSV_HEADER};
use coexmap::sim::{self, synthesize_dataset, Labeler, SimOutput};
use coexmap::tech::Technology;
use serde_json::json;

use crate::config::{LabelSource, RunConfig};

/// A command failure and the exit status it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, config or unreadable inputs: exit 1.
    Usage(anyhow::Error),
    /// Inputs that parse but cannot be processed: exit 2.
    Data(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Data(e) => e,
        }
    }
}

trait Classify<T> {
    fn usage(self) -> Result<T, Failure>;
    fn data(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
    fn data(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Data(e.into()))
    }
}

type CmdResult = Result<(), Failure>;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .usage()
}

fn out_dir(cfg: &RunConfig) -> Result<std::path::PathBuf, Failure> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
        .usage()?;
    Ok(dir)
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> CmdResult {
    let mut w = create(dir, name)?;
    let text = serde_json::to_string_pretty(value).expect("json");
    writeln!(w, "{text}").and_then(|_| w.flush()).usage()
}

/// Classifier used for report labels, if any.
fn report_model(cfg: &RunConfig, scenario: &Scenario) -> Result<Option<Model>, Failure> {
    match &cfg.map.labels {
        LabelSource::Oracle => Ok(None),
        LabelSource::Model { path } => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading model {}", path.display()))
                .usage()?;
            let model = Model::from_json(&text)
                .with_context(|| format!("parsing model {}", path.display()))
                .data()?;
            Ok(Some(model))
        }
        LabelSource::Calibrated { splits, seed } => {
            let mut calibration = scenario.clone();
            calibration.seed = seed.unwrap_or(scenario.seed.wrapping_add(1));
            let out = sim::simulate(&calibration, &cfg.sim, Labeler::Oracle, |_| {}).data()?;
            out.dataset
                .require_trainable()
                .context("calibration run produced no usable training set")
                .data()?;
            let tree = train_tree(&out.dataset, &TreeParams::with_splits(*splits)).data()?;
            Ok(Some(Model::Tree(tree)))
        }
    }
}

fn run_scenario(
    cfg: &RunConfig,
    scenario: &Scenario,
    on_event: impl FnMut(&coexmap::scene::BurstEvent),
) -> Result<SimOutput, Failure> {
    let model = report_model(cfg, scenario)?;
    let labeler = model.as_ref().map_or(Labeler::Oracle, Labeler::Model);
    sim::simulate(scenario, &cfg.sim, labeler, on_event).data()
}

pub fn simulate(cfg: &RunConfig) -> CmdResult {
    let scenario = cfg.scenario().usage()?;
    let dir = out_dir(cfg)?;

    let mut ledger = create(&dir, "ledger.csv")?;
    let mut io_err = writeln!(ledger, "{LEDGER_CSV_HEADER}").err();
    let out = run_scenario(cfg, &scenario, |e| {
        if io_err.is_none() {
            io_err = write_ledger_row(&mut ledger, e).err();
        }
    })?;
    if let Some(e) = io_err {
        return Err(Failure::Usage(anyhow!(e).context("writing ledger.csv")));
    }
    ledger.flush().usage()?;

    let mut traces = create(&dir, "traces.csv")?;
    writeln!(traces, "{TRACE_CSV_HEADER}").usage()?;
    for t in &out.traces {
        t.write_csv_rows(&mut traces).usage()?;
    }
    traces.flush().usage()?;

    let mut dataset = create(&dir, "dataset.csv")?;
    out.dataset
        .write_csv(&mut dataset)
        .and_then(|_| dataset.flush())
        .usage()?;

    let mut reports = create(&dir, "reports.bin")?;
    for r in &out.reports {
        reports.write_all(&r.encode()).usage()?;
    }
    reports.flush().usage()?;

    let counts = out.dataset.class_counts();
    let classes: BTreeMap<&str, usize> = Technology::ALL
        .iter()
        .filter(|t| counts[t.index()] > 0)
        .map(|t| (t.name(), counts[t.index()]))
        .collect();
    let s = &out.stats;
    write_json(
        &dir,
        "summary.json",
        &json!({
            "seed": scenario.seed,
            "horizon_us": scenario.horizon_us,
            "nodes": scenario.nodes.len(),
            "emitters": scenario.emitters.len(),
            "dwell_us": out.schedule.dwell_us(),
            "stats": s,
            "reports": out.reports.len(),
            "overflowing_reports": out.reports.iter().filter(|r| r.overflow).count(),
            "labeled_per_class": classes,
        }),
    )?;
    println!("scans              {}", s.scans);
    println!("bursts generated   {}", s.bursts_generated);
    println!("bursts detected    {}", s.bursts_detected);
    println!("bursts labeled     {}", s.bursts_labeled);
    println!("bursts unlabeled   {}", s.bursts_unlabeled);
    println!("duty cycle         {:.4}", s.duty_cycle);
    Ok(())
}

fn metrics_json(model: &str, complexity: usize, m: &Metrics) -> serde_json::Value {
    let recall: BTreeMap<&str, f64> = m.recall.iter().map(|(t, r)| (t.name(), *r)).collect();
    json!({
        "model": model,
        "complexity": complexity,
        "accuracy": m.accuracy,
        "mean_operations": m.mean_operations,
        "recall": recall,
        "confusion": m.confusion,
    })
}

pub fn train_eval(cfg: &RunConfig, dataset_override: Option<&Path>) -> CmdResult {
    let seed = cfg.seed().usage()?;
    let c = &cfg.classifier;
    if !(c.train_fraction > 0.0 && c.train_fraction < 1.0) {
        return Err(Failure::Usage(anyhow!("train_fraction must lie in (0, 1)")));
    }
    let data = match dataset_override.or(c.dataset.as_deref()) {
        Some(path) => {
            let f = File::open(path)
                .with_context(|| format!("opening dataset {}", path.display()))
                .usage()?;
            Dataset::read_csv(f)
                .with_context(|| format!("reading dataset {}", path.display()))
                .data()?
        }
        None => {
            synthesize_dataset(seed, c.training_horizon_us, c.per_class, &cfg.sim)
                .data()?
                .0
        }
    };
    data.require_trainable().data()?;
    let (train, test) = data.stratified_split(c.train_fraction, seed);
    if test.is_empty() {
        return Err(Failure::Data(anyhow!("held-out split is empty")));
    }
    let dir = out_dir(cfg)?;

    let min_cls = c.speed_min_classifications;
    let sweep = sweep_complexity(&train, &test, &c.split_caps, &c.forest_sizes, seed, min_cls).data()?;
    let knn = train_knn(&train, c.knn_k, None).data()?;
    let knn_metrics = evaluate_with(&knn, &test, 1).data()?;
    let (with_sf, without_sf) = ablate_spectral_features(&train, &test, c.ablation_splits, min_cls).data()?;

    let mut rows: Vec<(String, usize, &Metrics)> = sweep
        .iter()
        .map(|r| (r.model.clone(), r.complexity, &r.metrics))
        .collect();
    rows.push(("knn".into(), c.knn_k, &knn_metrics));

    let mut frontier = create(&dir, "frontier.csv")?;
    let mut recall = create(&dir, "recall.csv")?;
    let mut timing = create(&dir, "timing.csv")?;
    let names: Vec<&str> = Technology::ALL.iter().map(|t| t.name()).collect();
    let mut body = || -> std::io::Result<()> {
        writeln!(frontier, "model,complexity,accuracy,mean_operations")?;
        writeln!(recall, "model,complexity,{}", names.join(","))?;
        writeln!(timing, "model,complexity,bursts_per_second")?;
        for (model, k, m) in &rows {
            writeln!(frontier, "{model},{k},{:.6},{:.3}", m.accuracy, m.mean_operations)?;
            let r: Vec<String> = Technology::ALL
                .iter()
                .map(|t| m.recall.get(t).map_or("NA".into(), |v| format!("{v:.6}")))
                .collect();
            writeln!(recall, "{model},{k},{}", r.join(","))?;
            writeln!(timing, "{model},{k},{:.1}", m.bursts_per_second)?;
        }
        frontier.flush()?;
        recall.flush()?;
        timing.flush()
    };
    body().usage()?;

    let mut ablation = create(&dir, "ablation.csv")?;
    writeln!(ablation, "splits,accuracy_with_sf,accuracy_without_sf,gain")
        .and_then(|_| {
            writeln!(
                ablation,
                "{},{:.6},{:.6},{:.6}",
                c.ablation_splits,
                with_sf.accuracy,
                without_sf.accuracy,
                with_sf.accuracy - without_sf.accuracy
            )
        })
        .and_then(|_| ablation.flush())
        .usage()?;

    let counts = data.class_counts();
    let classes: BTreeMap<&str, usize> = Technology::ALL
        .iter()
        .filter(|t| counts[t.index()] > 0)
        .map(|t| (t.name(), counts[t.index()]))
        .collect();
    write_json(
        &dir,
        "metrics.json",
        &json!({
            "seed": seed,
            "train_rows": train.len(),
            "test_rows": test.len(),
            "classes": classes,
            "models": rows.iter().map(|(m, k, x)| metrics_json(m, *k, x)).collect::<Vec<_>>(),
            "ablation": {
                "splits": c.ablation_splits,
                "accuracy_with_sf": with_sf.accuracy,
                "accuracy_without_sf": without_sf.accuracy,
                "gain": with_sf.accuracy - without_sf.accuracy,
            },
        }),
    )?;

    let model = Model::Tree(train_tree(&train, &TreeParams::with_splits(c.model_splits)).data()?);
    let mut w = create(&dir, "model.json")?;
    writeln!(w, "{}", model.to_json()).and_then(|_| w.flush()).usage()?;

    println!(
        "{:<8} {:>10} {:>9} {:>12} {:>14}",
        "model", "complexity", "accuracy", "comparisons", "bursts/s"
    );
    for (model, k, m) in &rows {
        println!(
            "{model:<8} {k:>10} {:>9.4} {:>12.2} {:>14.0}",
            m.accuracy, m.mean_operations, m.bursts_per_second
        );
    }
    println!(
        "spectral features ({} splits): {:.4} with, {:.4} without",
        c.ablation_splits, with_sf.accuracy, without_sf.accuracy
    );
    Ok(())
}

struct Aggregated {
    scenario: Scenario,
    registry: NodeRegistry,
    tensor: InterferenceTensor,
}

fn load_tensor(cfg: &RunConfig, reports: Option<&Path>) -> Result<Aggregated, Failure> {
    let scenario = cfg.scenario().usage()?;
    let registry = sim::registry(&scenario).usage()?;
    let schedule = cfg.sim.schedule().usage()?;
    let bin = cfg.bin_width_us().usage()?;
    InterferenceTensor::new(bin, schedule.period_us, schedule.observation_us).usage()?;
    let reports: Vec<InterferenceReport> = match reports {
        Some(path) => {
            let bytes = fs::read(path)
                .with_context(|| format!("reading reports {}", path.display()))
                .usage()?;
            decode_stream(&bytes)
                .with_context(|| format!("decoding {}", path.display()))
                .data()?
        }
        None => run_scenario(cfg, &scenario, |_| {})?.reports,
    };
    let tensor = sim::aggregate(&reports, &registry, &schedule, bin, scenario.horizon_us).data()?;
    Ok(Aggregated {
        scenario,
        registry,
        tensor,
    })
}

fn write_spectrograms(cfg: &RunConfig, agg: &Aggregated, nodes: &[u16], dir: &Path) -> CmdResult {
    for (name, techs) in cfg.techs().usage()? {
        for &node in nodes {
            let s = node_spectrogram(&agg.tensor, node, techs, &agg.registry).data()?;
            let mut w = create(dir, &format!("spectrogram_node{node}_{name}_power.csv"))?;
            s.write_power_csv(&mut w).and_then(|_| w.flush()).usage()?;
            let mut w = create(dir, &format!("spectrogram_node{node}_{name}_busy.csv"))?;
            s.write_busy_csv(&mut w).and_then(|_| w.flush()).usage()?;
        }
    }
    Ok(())
}

pub fn map(cfg: &RunConfig, reports: Option<&Path>) -> CmdResult {
    let techs = cfg.techs().usage()?;
    let channels = cfg.channels().usage()?;
    if !(cfg.map.cell_m.is_finite() && cfg.map.cell_m > 0.0) {
        return Err(Failure::Usage(anyhow!("cell size must be positive")));
    }
    let agg = load_tensor(cfg, reports)?;
    let window = cfg.window_us(agg.scenario.horizon_us).usage()?;
    let grid = GridSpec::covering(&agg.scenario.area, cfg.map.cell_m);
    let dir = out_dir(cfg)?;

    let mut summary = serde_json::Map::new();
    for (name, set) in &techs {
        let m = power_map(&agg.tensor, *set, window, &channels, &agg.registry, &grid)
            .with_context(|| format!("technology {name}"))
            .data()?;
        let mut w = create(&dir, &format!("map_{name}.csv"))?;
        m.write_csv(&mut w).and_then(|_| w.flush()).usage()?;
        let mut w = create(&dir, &format!("map_{name}.pgm"))?;
        m.write_pgm(&mut w).and_then(|_| w.flush()).usage()?;
        let mut w = create(&dir, &format!("map_{name}.json"))?;
        w.write_all(m.sidecar_json("dBm").as_bytes())
            .and_then(|_| w.flush())
            .usage()?;

        let argmax = m.argmax();
        let nodes: BTreeMap<String, f64> = node_powers(&agg.tensor, *set, window, &channels, &agg.registry)
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        if let Some(p) = argmax {
            println!("{name}: peak at ({:.2}, {:.2}) m from {} nodes", p.x, p.y, nodes.len());
        }
        summary.insert(
            name.clone(),
            json!({ "argmax_m": argmax.map(|p| [p.x, p.y]), "node_power_dbm": nodes }),
        );
    }
    write_json(&dir, "map_summary.json", &serde_json::Value::Object(summary))?;

    let mut w = create(&dir, "tensor.csv")?;
    agg.tensor.write_csv(&mut w).and_then(|_| w.flush()).usage()?;

    let nodes = match &cfg.map.spectrogram_nodes {
        Some(list) => list.clone(),
        None => agg.registry.iter().map(|(id, _)| id).collect(),
    };
    write_spectrograms(cfg, &agg, &nodes, &dir)
}

pub fn spectrogram(cfg: &RunConfig, reports: Option<&Path>, node: Option<u16>) -> CmdResult {
    cfg.techs().usage()?;
    let agg = load_tensor(cfg, reports)?;
    let dir = out_dir(cfg)?;
    let nodes = match node {
        Some(n) => vec![n],
        None => match &cfg.map.spectrogram_nodes {
            Some(list) => list.clone(),
            None => agg.registry.iter().map(|(id, _)| id).collect(),
        },
    };
    write_spectrograms(cfg, &agg, &nodes, &dir)?;
    println!(
        "{} bins of {} s for {} node(s)",
        agg.tensor.n_bins(),
        agg.tensor.bin_width_us() as f64 / 1e6,
        nodes.len()
    );
    Ok(())
}

pub fn decode_reports(input: &Path) -> CmdResult {
    let bytes = fs::read(input)
        .with_context(|| format!("reading {}", input.display()))
        .usage()?;
    let reports = decode_stream(&bytes)
        .with_context(|| format!("decoding {}", input.display()))
        .data()?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for r in &reports {
        writeln!(out, "{}", serde_json::to_string(r).expect("json")).usage()?;
    }
    Ok(())
}

pub fn encode_reports(input: &Path, output: &Path) -> CmdResult {
    let text = fs::read_to_string(input)
        .with_context(|| format!("reading {}", input.display()))
        .usage()?;
    let reports: Vec<InterferenceReport> = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", input.display()))
        .data()?;
    let mut bytes = Vec::new();
    for (i, r) in reports.iter().enumerate() {
        r.validate().with_context(|| format!("report {i}")).data()?;
        bytes.extend(r.encode());
    }
    fs::write(output, bytes)
        .with_context(|| format!("writing {}", output.display()))
        .usage()
}
