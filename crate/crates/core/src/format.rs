//! Text emission: every float is written with 17 significant digits so that
//! outputs round-trip and compare byte-for-byte.

use std::fmt::Write;

use crate::walker::SampleMatrix;

/// `x` in scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn fmt_vec(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|&x| fmt_f64(x)).collect();
    format!("[{}]", parts.join(" "))
}

/// Walk CSV: `# key=value` header lines, then
/// `replicate,n,M_n,M_n_scaled` rows in replicate-major order.
pub fn walk_csv(header: &[(String, String)], m: &SampleMatrix) -> String {
    let mut out = String::new();
    for (k, v) in header {
        writeln!(out, "# {k}={v}").unwrap();
    }
    out.push_str("replicate,n,M_n,M_n_scaled\n");
    for s in &m.samples {
        for (c, &n) in m.checkpoints.iter().enumerate() {
            let mx = s.running_max[c];
            writeln!(
                out,
                "{},{},{},{}",
                s.stream,
                n,
                fmt_f64(mx),
                fmt_f64(mx / (n as f64).powf(m.scaling_exponent))
            )
            .unwrap();
        }
    }
    out
}

/// A parsed walk CSV.
#[derive(Clone, Debug, Default)]
pub struct WalkTable {
    pub header: Vec<(String, String)>,
    /// `(replicate, n, M_n, M_n_scaled)`.
    pub rows: Vec<(u64, u64, f64, f64)>,
}

impl WalkTable {
    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Scaled maxima grouped by checkpoint.
    pub fn scaled_by_n(&self) -> std::collections::BTreeMap<u64, Vec<f64>> {
        let mut m = std::collections::BTreeMap::<u64, Vec<f64>>::new();
        for &(_, n, _, s) in &self.rows {
            m.entry(n).or_default().push(s);
        }
        m
    }
}

pub fn parse_walk_csv(text: &str) -> Result<WalkTable, String> {
    let mut t = WalkTable::default();
    let mut seen_columns = false;
    for (i, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix("# ") {
            let (k, v) = rest.split_once('=').ok_or_else(|| format!("line {}: bad header", i + 1))?;
            t.header.push((k.to_string(), v.to_string()));
            continue;
        }
        if !seen_columns {
            if line != "replicate,n,M_n,M_n_scaled" {
                return Err(format!("line {}: expected column header", i + 1));
            }
            seen_columns = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(format!("line {}: expected 4 fields", i + 1));
        }
        let bad = |e: &dyn std::fmt::Display| format!("line {}: {e}", i + 1);
        t.rows.push((
            f[0].parse().map_err(|e| bad(&e))?,
            f[1].parse().map_err(|e| bad(&e))?,
            f[2].parse().map_err(|e| bad(&e))?,
            f[3].parse().map_err(|e| bad(&e))?,
        ));
    }
    if !seen_columns {
        return Err("missing column header".into());
    }
    Ok(t)
}
