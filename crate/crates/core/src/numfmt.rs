//! Fixed-width float rendering shared by every text artifact.

/// Renders `v` with 17 significant digits in scientific notation, which is
/// enough to round-trip any IEEE-754 double. Non-finite values are written as
/// `NaN`, `inf` and `-inf`.
pub fn fmt17(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        }
    } else {
        format!("{v:.16e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_exactly() {
        for v in [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, 0.0, -0.0, f64::MAX] {
            let s = fmt17(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt17(f64::NAN), "NaN");
    }
}
