//! Gnuplot-ready data files and a script for a run directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("missing input {0}")]
    Missing(PathBuf),
    #[error("{0} has no data rows")]
    Empty(PathBuf),
    #[error("malformed {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("bad number `{value}` in {path}")]
    Number { path: PathBuf, value: String },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table(path: &Path) -> Result<Table, PlotError> {
    if !path.is_file() {
        return Err(PlotError::Missing(path.to_path_buf()));
    }
    let csv_err = |source| PlotError::Csv { path: path.to_path_buf(), source };
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(csv_err)?;
    let header = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| PlotError::Number { path: path.to_path_buf(), value: v.to_string() }))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(PlotError::Empty(path.to_path_buf()));
    }
    Ok(Table { header, rows })
}

/// Whitespace-separated columns `cols` of `t`, with a `#` header line.
fn columns(t: &Table, cols: &[usize]) -> String {
    let mut out = String::from("#");
    for &c in cols {
        let _ = write!(out, " {}", t.header[c]);
    }
    out.push('\n');
    for row in &t.rows {
        let line: Vec<String> = cols.iter().map(|&c| format!("{:?}", row[c])).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

fn script(tail_names: &[&str], field_cols: usize) -> String {
    let mut s = String::from("set terminal pngcairo size 900,600\nset key outside\nset grid\n\n");
    s.push_str("set output 'mass.png'\nset xlabel 't'\nset ylabel 'M(t), moment0'\n");
    s.push_str("plot 'mass.dat' using 1:2 with lines title 'M', '' using 1:3 with lines title 'moment0'\n\n");
    s.push_str("set output 'tails.png'\nset ylabel 'tail mass'\nset logscale y\n");
    if tail_names.is_empty() {
        s.push_str("plot 'tails.dat' using 1:(0) with lines notitle\n");
    } else {
        let parts: Vec<String> = tail_names
            .iter()
            .enumerate()
            .map(|(k, name)| format!("'tails.dat' using 1:{} with lines title '{name}'", k + 2))
            .collect();
        s.push_str(&format!("plot {}\n", parts.join(", ")));
    }
    s.push_str("unset logscale y\n\nset output 'field.png'\nset ylabel 'mass density'\n");
    if field_cols == 2 {
        s.push_str("set xlabel 'x'\nplot 'field.dat' using 1:2 with lines notitle\n");
    } else {
        s.push_str("set xlabel 'x'\nset ylabel 'y'\nset view map\nsplot 'field.dat' using 1:2:3 with points palette notitle\n");
    }
    s
}

/// Writes `mass.dat`, `tails.dat`, `field.dat` and `plots.gp` into `out`.
pub fn write_plot_files(run_dir: &Path, out: &Path) -> Result<Vec<PathBuf>, PlotError> {
    let monitors = read_table(&run_dir.join("monitors.csv"))?;
    let field = read_table(&run_dir.join("snapshots").join("mass_density.csv"))?;
    let col = |name: &str| monitors.header.iter().position(|h| h == name);
    let (t, m, m0) = match (col("t"), col("M"), col("moment0")) {
        (Some(t), Some(m), Some(m0)) => (t, m, m0),
        _ => return Err(PlotError::Empty(run_dir.join("monitors.csv"))),
    };
    let tails: Vec<usize> = (0..monitors.header.len()).filter(|&c| monitors.header[c].starts_with("tail@")).collect();
    let mut tail_cols = vec![t];
    tail_cols.extend(&tails);
    let field_cols: Vec<usize> = (0..field.header.len()).collect();

    let files = [
        ("mass.dat", columns(&monitors, &[t, m, m0])),
        ("tails.dat", columns(&monitors, &tail_cols)),
        ("field.dat", columns(&field, &field_cols)),
        ("plots.gp", script(&tails.iter().map(|&c| monitors.header[c].as_str()).collect::<Vec<_>>(), field_cols.len())),
    ];
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PlotError::Io { path, source }
    };
    std::fs::create_dir_all(out).map_err(io(out))?;
    let mut written = Vec::new();
    for (name, text) in files {
        let path = out.join(name);
        std::fs::write(&path, text).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}
