use super::RadiometerError;

/// Attenuation reached at `rbw/2 + FILTER_ROLLOFF_MHZ` and held beyond.
pub const FILTER_FLOOR_DB: f64 = 40.0;
pub const FILTER_ROLLOFF_MHZ: f64 = 3.0;

/// Channel-filter rejection of energy `delta_f` MHz away from the tuned
/// frequency (distance to the nearest edge of the occupied band).
///
/// Flat inside `rbw/2`, then linear in dB up to the 40 dB floor.
pub fn filter_attenuation(delta_f: f64, rbw: f64) -> Result<f64, RadiometerError> {
    if delta_f < 0.0 || delta_f.is_nan() {
        return Err(RadiometerError::NegativeDistance(delta_f));
    }
    Ok(filter_attenuation_unchecked(delta_f, rbw))
}

pub fn filter_attenuation_unchecked(delta_f: f64, rbw: f64) -> f64 {
    let excess = delta_f - rbw / 2.0;
    if excess <= 0.0 {
        0.0
    } else {
        (FILTER_FLOOR_DB * excess / FILTER_ROLLOFF_MHZ).min(FILTER_FLOOR_DB)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn in_band_is_unattenuated() {
        assert_eq!(filter_attenuation(0.0, 2.0).unwrap(), 0.0);
        assert_eq!(filter_attenuation(1.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn skirt_matches_piecewise_linear_formula() {
        let expected: f64 = 40.0 * (2.5 - 1.0) / 3.0;
        assert!((expected - 20.0).abs() < 1e-12);
        assert!((filter_attenuation(2.5, 2.0).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn far_offsets_hit_the_floor() {
        assert_eq!(filter_attenuation(10.0, 2.0).unwrap(), 40.0);
        assert_eq!(filter_attenuation(4.0, 2.0).unwrap(), 40.0);
    }

    #[test]
    fn negative_distance_is_rejected() {
        assert!(matches!(
            filter_attenuation(-0.5, 2.0),
            Err(RadiometerError::NegativeDistance(_))
        ));
    }

    proptest! {
        #[test]
        fn bounded_monotone_and_continuous(a in 0.0f64..20.0, b in 0.0f64..20.0, rbw in 1.5f64..4.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let fa = filter_attenuation(lo, rbw).unwrap();
            let fb = filter_attenuation(hi, rbw).unwrap();
            prop_assert!((0.0..=40.0).contains(&fa));
            prop_assert!(fa <= fb);
            // Lipschitz with slope 40/3 dB per MHz.
            prop_assert!(fb - fa <= 40.0 / 3.0 * (hi - lo) + 1e-9);
        }
    }
}
