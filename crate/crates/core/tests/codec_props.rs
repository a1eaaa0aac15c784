use coexmap::maps::{
    decode_reports, InterferenceReport, ReportEntry, ReportError, ENTRY_LEN, HEADER_LEN, MAX_REPORT_LEN, N_CHANNELS,
    REPORT_CAPACITY,
};
use coexmap::Technology;
use proptest::prelude::*;

fn arb_report() -> impl Strategy<Value = InterferenceReport> {
    let cell = (0..N_CHANNELS, 0..Technology::COUNT);
    let entries = prop::collection::btree_map(cell, (1u16.., -100i8..=0, any::<u8>()), 0..=REPORT_CAPACITY);
    (any::<u16>(), any::<u16>(), any::<u32>(), entries, any::<bool>()).prop_map(|(node, seq, ms, cells, overflow)| {
        InterferenceReport {
            node_id: node,
            scan_seq: seq,
            scan_start_ms: ms,
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
            overflow,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn decode_inverts_encode(r in arb_report()) {
        let bytes = r.encode();
        prop_assert!(bytes.len() <= MAX_REPORT_LEN);
        prop_assert_eq!(bytes.len(), HEADER_LEN + ENTRY_LEN * r.entries.len());
        prop_assert_eq!(InterferenceReport::decode(&bytes).unwrap(), r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(5_000))]

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..140)) {
        let _ = InterferenceReport::decode(&bytes);
        let _ = decode_reports(&bytes);
    }

    #[test]
    fn truncation_is_a_length_error(r in arb_report(), cut in any::<prop::sample::Index>()) {
        let bytes = r.encode();
        let n = cut.index(bytes.len());
        let is_length = matches!(InterferenceReport::decode(&bytes[..n]), Err(ReportError::Length { .. }));
        prop_assert!(is_length);
    }

    #[test]
    fn single_byte_corruption_is_caught_or_harmless(r in arb_report(), at in any::<prop::sample::Index>(), v in any::<u8>()) {
        let mut bytes = r.encode();
        let i = at.index(bytes.len());
        bytes[i] = v;
        if let Ok(d) = InterferenceReport::decode(&bytes) {
            prop_assert_eq!(d.encode(), bytes);
        }
    }
}
