use coexmap::maps::{
    all_channels, InterferenceReport, InterferenceTensor, NodeRegistry, ReportEntry, N_CHANNELS, REPORT_CAPACITY,
};
use coexmap::tech::TechSet;
use coexmap::{Position, Technology};
use proptest::prelude::*;

const PERIOD_US: u64 = 5_000_000;
const OBS_US: u64 = 50_000;

fn registry() -> NodeRegistry {
    NodeRegistry::new((1..=4u16).map(|i| (i, Position::new(i as f64, (i * i) as f64)))).unwrap()
}

fn arb_report() -> impl Strategy<Value = InterferenceReport> {
    let cell = (0..N_CHANNELS, 0..Technology::COUNT);
    // Busy time stays within the 50 ms window: at most 195 units of 256 us.
    let entries = prop::collection::btree_map(cell, (1u16..500, -100i8..=0, 0u8..=195), 0..=REPORT_CAPACITY);
    (1u16..=4, 0u32..24, entries).prop_map(|(node, scan, cells)| InterferenceReport {
        node_id: node,
        scan_seq: scan as u16,
        scan_start_ms: scan * (PERIOD_US / 1000) as u32,
        entries: cells
            .into_iter()
            .map(
                |((channel, t), (burst_count, mean_power_dbm, busy_units))| ReportEntry {
                    channel,
                    tech: Technology::ALL[t],
                    burst_count,
                    mean_power_dbm,
                    busy_units,
                },
            )
            .collect(),
        overflow: false,
    })
}

fn build(reports: &[InterferenceReport]) -> InterferenceTensor {
    let reg = registry();
    let mut t = InterferenceTensor::new(4 * PERIOD_US, PERIOD_US, OBS_US).unwrap();
    for r in reports {
        t.accumulate(r, &reg).unwrap();
    }
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn accumulation_ignores_report_order(
        reports in prop::collection::vec(arb_report(), 0..40),
        perm in any::<u64>(),
    ) {
        let mut shuffled = reports.clone();
        // Fisher-Yates over a xorshift stream.
        let mut s = perm | 1;
        for i in (1..shuffled.len()).rev() {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            shuffled.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let (a, b) = (build(&reports), build(&shuffled));
        prop_assert_eq!(&a, &b);
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        prop_assert_eq!(ca, cb);
    }

    #[test]
    fn busy_fractions_stay_in_the_unit_interval(reports in prop::collection::vec(arb_report(), 0..60)) {
        let t = build(&reports);
        let reg = registry();
        for bin in 0..t.n_bins() {
            for (node, _) in reg.iter() {
                for ch in all_channels() {
                    if let Some(v) = t.aggregate(node, TechSet::all(), bin..bin + 1, &[ch]) {
                        prop_assert!((0.0..=1.0).contains(&v.busy_fraction));
                        prop_assert!((-100.0..=0.0).contains(&v.power_dbm));
                    }
                }
            }
        }
    }
}
