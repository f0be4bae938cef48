//! Number formatting for tabular output.

/// `x` with `digits` significant digits, trailing zeros removed. Very large
/// or very small magnitudes switch to exponent notation.
pub fn sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let exp = x.abs().log10().floor() as i32;
    if exp < -5 || exp >= digits as i32 {
        return format!("{:.*e}", digits - 1, x);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// Six significant digits, the CSV convention.
pub fn sig6(x: f64) -> String {
    sig(x, 6)
}

/// Fixed two decimals, the presentation-table convention.
pub fn dec2(x: f64) -> String {
    format!("{x:.2}")
}
