use std::path::Path;

use super::{KernelError, KernelSet};

/// Dense kernel tables for sizes `1..=size`.
///
/// Entries that are not listed are zero. Breakage is stored for fragment
/// sizes `k ≤ 2·size`, which covers every `k < i + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    size: usize,
    collision: Vec<f64>,
    breakage: Vec<f64>,
    diffusion: Vec<f64>,
}

impl KernelTable {
    /// All-zero tables of the given size; diffusion defaults to 1.
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            collision: vec![0.0; size * size],
            breakage: vec![0.0; size * size * 2 * size],
            diffusion: vec![1.0; size],
        }
    }

    /// Tabulates an analytic kernel set on `1..=size`.
    pub fn tabulate(ks: &KernelSet, size: usize) -> Self {
        let mut t = Self::zeros(size);
        for i in 1..=size {
            t.set_diffusion(i, ks.diffusion_unchecked(i));
            for j in 1..=size {
                t.set_collision(i, j, ks.collision_unchecked(i, j));
                for k in 1..i + j {
                    t.set_breakage(i, j, k, ks.breakage_unchecked(i, j, k));
                }
            }
        }
        t
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    fn b_index(&self, i: usize, j: usize, k: usize) -> usize {
        ((i - 1) * self.size + (j - 1)) * 2 * self.size + (k - 1)
    }

    #[inline]
    pub fn collision(&self, i: usize, j: usize) -> f64 {
        self.collision[(i - 1) * self.size + (j - 1)]
    }

    #[inline]
    pub fn breakage(&self, i: usize, j: usize, k: usize) -> f64 {
        if k > 2 * self.size {
            0.0
        } else {
            self.breakage[self.b_index(i, j, k)]
        }
    }

    #[inline]
    pub fn diffusion(&self, i: usize) -> f64 {
        self.diffusion[i - 1]
    }

    pub fn set_collision(&mut self, i: usize, j: usize, a: f64) {
        self.collision[(i - 1) * self.size + (j - 1)] = a;
    }

    pub fn set_breakage(&mut self, i: usize, j: usize, k: usize, b: f64) {
        let idx = self.b_index(i, j, k);
        self.breakage[idx] = b;
    }

    pub fn set_diffusion(&mut self, i: usize, d: f64) {
        self.diffusion[i - 1] = d;
    }

    /// Reads `i,j,a`, `i,j,k,b` and `i,d` CSV files (with headers). The
    /// table size is the largest index in the collision file.
    pub fn load(collision: &Path, breakage: &Path, diffusion: &Path) -> Result<Self, KernelError> {
        let a_rows = read_rows(collision, 3)?;
        let b_rows = read_rows(breakage, 4)?;
        let d_rows = read_rows(diffusion, 2)?;
        let size = a_rows
            .iter()
            .map(|r| r[0].max(r[1]) as usize)
            .max()
            .unwrap_or(0);
        if size == 0 {
            return Err(table_err(collision, "collision table is empty"));
        }
        let mut t = Self::zeros(size);
        for r in &a_rows {
            let (i, j) = (index(collision, r[0])?, index(collision, r[1])?);
            t.set_collision(i, j, r[2]);
        }
        for r in &b_rows {
            let (i, j, k) = (index(breakage, r[0])?, index(breakage, r[1])?, index(breakage, r[2])?);
            if i > size || j > size {
                return Err(table_err(breakage, &format!("pair ({i},{j}) exceeds table size {size}")));
            }
            if k > 2 * size {
                if r[3] != 0.0 {
                    return Err(table_err(
                        breakage,
                        &format!("fragment size {k} ≥ i + j for pair ({i},{j})"),
                    ));
                }
                continue;
            }
            t.set_breakage(i, j, k, r[3]);
        }
        let mut seen = vec![false; size];
        for r in &d_rows {
            let i = index(diffusion, r[0])?;
            if i > size {
                continue;
            }
            t.set_diffusion(i, r[1]);
            seen[i - 1] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(table_err(diffusion, &format!("missing d_{}", missing + 1)));
        }
        Ok(t)
    }
}

fn table_err(path: &Path, message: &str) -> KernelError {
    KernelError::Table {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

fn index(path: &Path, v: f64) -> Result<usize, KernelError> {
    if v < 1.0 || v.fract() != 0.0 {
        return Err(table_err(path, &format!("invalid size index {v}")));
    }
    Ok(v as usize)
}

fn read_rows(path: &Path, columns: usize) -> Result<Vec<Vec<f64>>, KernelError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| table_err(path, &e.to_string()))?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| table_err(path, &e.to_string()))?;
        if record.len() != columns {
            return Err(table_err(
                path,
                &format!("row {}: expected {columns} columns, found {}", line + 1, record.len()),
            ));
        }
        let row = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| table_err(path, &format!("row {}: {e}", line + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn tabulated_power_law_validates() {
        let ks = KernelSet::power_law_uniform(4.0, 0.5).unwrap();
        let t = KernelTable::tabulate(&ks, 6);
        let tk = KernelSet::from_table(t).unwrap();
        assert_eq!(tk.collision_rate(2, 3).unwrap(), ks.collision_rate(2, 3).unwrap());
        assert!(tk.collision_rate(7, 1).is_err());
    }

    #[test]
    fn load_round_trip_and_symmetry_failure() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a.csv", "i,j,a\n1,1,1.0\n1,2,0.5\n2,1,0.5\n2,2,0.25\n");
        let b = write(
            dir.path(),
            "b.csv",
            "i,j,k,b\n1,1,1,2\n1,2,1,1\n1,2,2,1\n2,1,1,1\n2,1,2,1\n2,2,1,1\n2,2,3,1\n",
        );
        let d = write(dir.path(), "d.csv", "i,d\n1,1.0\n2,0.5\n");
        let table = KernelTable::load(&a, &b, &d).unwrap();
        assert_eq!(table.size(), 2);
        assert_eq!(table.breakage(2, 2, 3), 1.0);
        assert_eq!(table.breakage(2, 2, 2), 0.0);
        KernelSet::from_table(table).unwrap();

        let a_bad = write(dir.path(), "a_bad.csv", "i,j,a\n1,1,1.0\n1,2,0.5\n2,1,0.4\n2,2,0.25\n");
        let table = KernelTable::load(&a_bad, &b, &d).unwrap();
        match KernelSet::from_table(table) {
            Err(KernelError::Invalid(report)) => {
                let v = &report.violations[0];
                assert_eq!((v.i, v.j), (1, 2));
            }
            other => panic!("expected symmetry failure, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_missing_diffusion() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a.csv", "i,j,a\n1,1,1.0\n2,2,1.0\n");
        let b = write(dir.path(), "b.csv", "i,j,k,b\n");
        let d = write(dir.path(), "d.csv", "i,d\n1,1.0\n");
        assert!(matches!(KernelTable::load(&a, &b, &d), Err(KernelError::Table { .. })));
    }
}
