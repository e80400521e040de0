//! CSV time series and SVG line charts.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use qdyn::Trajectory;

/// A density-matrix time series in its tabular form: one row per time,
/// `re, im` pairs for every element in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub dim: usize,
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

pub fn header(dim: usize) -> Vec<String> {
    let mut h = vec!["time".to_string()];
    for i in 0..dim {
        for j in 0..dim {
            h.push(format!("re_rho_{i}_{j}"));
            h.push(format!("im_rho_{i}_{j}"));
        }
    }
    h
}

impl Series {
    /// Times are divided by `time_unit` (atomic units per output unit).
    pub fn from_trajectory(t: &Trajectory, time_unit: f64) -> Self {
        let dim = t.dim();
        let times = t.times().iter().map(|x| x / time_unit).collect();
        let rows = t
            .states()
            .iter()
            .map(|rho| {
                let m = rho.matrix();
                (0..dim * dim).flat_map(|k| {
                    let z = m[(k / dim, k % dim)];
                    [z.re, z.im]
                })
                .collect()
            })
            .collect();
        Self { dim, times, rows }
    }

    pub fn element(&self, row: usize, i: usize, j: usize) -> (f64, f64) {
        let k = 2 * (i * self.dim + j);
        (self.rows[row][k], self.rows[row][k + 1])
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header(self.dim))?;
        let mut record = Vec::with_capacity(1 + self.rows.first().map_or(0, Vec::len));
        for (t, row) in self.times.iter().zip(&self.rows) {
            record.clear();
            // 17 significant digits round-trip every f64 exactly
            record.push(format!("{t:.16e}"));
            record.extend(row.iter().map(|v| format!("{v:.16e}")));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
        let cols = r.headers()?.len();
        let dim = ((cols.saturating_sub(1) / 2) as f64).sqrt().round() as usize;
        if dim == 0 || r.headers()?.iter().collect::<Vec<_>>() != header(dim) {
            bail!("{}: not a density-matrix series (unexpected header)", path.display());
        }
        let mut times = Vec::new();
        let mut rows = Vec::new();
        for (n, rec) in r.records().enumerate() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .with_context(|| format!("{}: bad number in data row {}", path.display(), n + 1))?;
            times.push(vals[0]);
            rows.push(vals[1..].to_vec());
        }
        Ok(Self { dim, times, rows })
    }
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// A line chart of the selected populations against time.
pub fn plot_svg(series: &Series, observables: &[usize], time_label: &str) -> String {
    let (w, h) = (720.0, 440.0);
    let (left, right, top, bottom) = (70.0, 150.0, 20.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let t0 = series.times.first().copied().unwrap_or(0.0);
    let t1 = series.times.last().copied().unwrap_or(1.0).max(t0 + f64::MIN_POSITIVE);
    let pops: Vec<Vec<f64>> = observables
        .iter()
        .map(|&i| (0..series.times.len()).map(|r| series.element(r, i, i).0).collect())
        .collect();
    let lo = pops.iter().flatten().copied().fold(0.0f64, f64::min);
    let hi = pops.iter().flatten().copied().fold(1.0f64, f64::max);
    let x = |t: f64| left + (t - t0) / (t1 - t0) * pw;
    let y = |v: f64| top + (hi - v) / (hi - lo) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=5 {
        let f = k as f64 / 5.0;
        let tv = t0 + f * (t1 - t0);
        let vv = lo + f * (hi - lo);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x(tv),
            top + ph + 18.0,
            tick(tv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y(vv) + 4.0,
            tick(vv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">time ({time_label})</text>"#,
        left + pw / 2.0,
        h - 10.0
    );
    for (n, (&i, p)) in observables.iter().zip(&pops).enumerate() {
        let color = PALETTE[n % PALETTE.len()];
        let pts: Vec<String> = series
            .times
            .iter()
            .zip(p)
            .map(|(&t, &v)| format!("{:.2},{:.2}", x(t), y(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = top + 16.0 * (n as f64 + 1.0);
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">rho_{i}{i}</text>"#,
            w - right + 12.0,
            w - right + 36.0,
            w - right + 42.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{}", (v * 1000.0).round() / 1000.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qdyn::{create_tls_hamiltonian, pathint::calculate_bare_propagators, apply_propagator, DensityMatrix};

    fn rabi() -> Trajectory {
        let h = create_tls_hamiltonian(0.3, 1.0);
        let fbu = calculate_bare_propagators(&h, 0.1, 20, &[]).unwrap();
        apply_propagator(&fbu.cumulative(), &DensityMatrix::pure_state(2, 0), 0.1, 20).unwrap()
    }

    #[test]
    fn header_is_row_major() {
        assert_eq!(
            header(2).join(","),
            "time,re_rho_0_0,im_rho_0_0,re_rho_0_1,im_rho_0_1,re_rho_1_0,im_rho_1_0,re_rho_1_1,im_rho_1_1"
        );
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let s = Series::from_trajectory(&rabi(), 1.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(&path, s.to_csv_string()).unwrap();
        let back = Series::read_csv(&path).unwrap();
        assert_eq!(back.rows.len(), 21);
        for (a, b) in s.rows.iter().flatten().zip(back.rows.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in s.times.iter().zip(&back.times) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn plot_has_one_line_per_observable() {
        let s = Series::from_trajectory(&rabi(), 1.0);
        let svg = plot_svg(&s, &[0, 1], "au");
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
    }
}
