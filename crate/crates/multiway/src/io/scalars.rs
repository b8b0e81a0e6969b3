//! Seventeen-significant-digit scalar rendering.
//!
//! Seventeen digits round-trip every binary64 value exactly, and the
//! `%g`-style trimming keeps short values short, so text files stay both
//! lossless and readable.

/// Formats `v` in the style of C's `%.17g`: fixed notation while the
/// decimal exponent is in `[-4, 17)`, scientific otherwise, trailing zeros
/// trimmed. The output parses back to the same bit pattern.
pub fn format_g17(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v < 0.0 { "-inf" } else { "inf" }.to_string();
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    // 16 fractional digits in scientific form is 17 significant digits,
    // correctly rounded; the style choice keys off that rounded exponent.
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent in scientific output");
    let exp: i32 = exp.parse().expect("numeric exponent");
    if (-4..17).contains(&exp) {
        let prec = (16 - exp) as usize;
        trim_fraction(format!("{v:.prec$}"))
    } else {
        let mantissa = trim_fraction(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    }
}

fn trim_fraction(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_reference_renderings() {
        let cases: &[(f64, &str)] = &[
            (0.0, "0"),
            (-0.0, "-0"),
            (1.0, "1"),
            (-1.5, "-1.5"),
            (0.5, "0.5"),
            (1.0 / 3.0, "0.33333333333333331"),
            (11.832159566199232, "11.832159566199232"),
            (140.0, "140"),
            (0.1, "0.10000000000000001"),
            (1234.5678, "1234.5678"),
            (999.9999999999999, "999.99999999999989"),
            (1e16, "10000000000000000"),
            (99999999999999984.0, "99999999999999984"),
            (1e17, "1e+17"),
            (1e20, "1e+20"),
            (123456789012345678901.0, "1.2345678901234568e+20"),
            (1e-4, "0.0001"),
            (9.9999999999999999e-5, "0.0001"),
            (1e-5, "1.0000000000000001e-05"),
            (2.5e-10, "2.5000000000000002e-10"),
            (5e-324, "4.9406564584124654e-324"),
            (-2.2250738585072014e-308, "-2.2250738585072014e-308"),
            (f64::INFINITY, "inf"),
            (f64::NEG_INFINITY, "-inf"),
            (f64::NAN, "nan"),
        ];
        for (v, want) in cases {
            assert_eq!(format_g17(*v), *want, "value {v:?}");
        }
    }

    #[test]
    fn random_bit_patterns_round_trip_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut checked = 0;
        while checked < 20_000 {
            let v = f64::from_bits(rng.random::<u64>());
            if v.is_nan() {
                continue;
            }
            let back: f64 = format_g17(v).parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "value {v:e}");
            checked += 1;
        }
    }

    #[test]
    fn ordinary_magnitudes_round_trip_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for _ in 0..20_000 {
            let v: f64 = (rng.random::<f64>() - 0.5) * 10f64.powi(rng.random_range(-30..30));
            let back: f64 = format_g17(v).parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "value {v:e}");
        }
    }
}
