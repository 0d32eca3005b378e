/// Formats `x` in plain decimal notation with six significant digits.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (5 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}
