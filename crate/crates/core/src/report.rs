//! Fixed-format output helpers shared by the library reports and the CLI.

/// 17 significant digits, so that identical runs give identical bytes.
pub fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Joins already formatted cells.
pub fn csv_line<I, S>(cells: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let v: Vec<String> = cells.into_iter().map(|s| s.as_ref().to_string()).collect();
    v.join(",")
}
