//! Checkpoint persistence and report emission.
//!
//! Checkpoints are a single little-endian binary container: magic, version,
//! grid descriptor, time, raw complex arrays for the profiles, the zero-mode
//! registers, and the phase-correction tables. Round trips are bit-exact.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;

use crate::error::MdError;
use crate::evolve::ProfileState;
use crate::field::{ScalarField, Side, SpinorField};
use crate::grid::FourierGrid;
use crate::scattering::{PaperConstants, PhaseCorrectionTable, Snapshot};
use crate::Result;

const MAGIC: &[u8; 4] = b"MDCK";
const VERSION: u32 = 1;

struct Bin<W: Write>(W);

impl<W: Write> Bin<W> {
    fn u32(&mut self, v: u32) -> Result<()> {
        self.0.write_all(&v.to_le_bytes())?;
        Ok(())
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        self.0.write_all(&v.to_le_bytes())?;
        Ok(())
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        self.0.write_all(&v.to_le_bytes())?;
        Ok(())
    }
    fn f64_slice(&mut self, vs: &[f64]) -> Result<()> {
        for v in vs {
            self.f64(*v)?;
        }
        Ok(())
    }
    fn c64_slice(&mut self, vs: &[C64]) -> Result<()> {
        for v in vs {
            self.f64(v.re)?;
            self.f64(v.im)?;
        }
        Ok(())
    }
    fn bool_slice(&mut self, vs: &[bool]) -> Result<()> {
        let bytes: Vec<u8> = vs.iter().map(|&b| b as u8).collect();
        self.0.write_all(&bytes)?;
        Ok(())
    }
}

struct Un<R: Read>(R);

impl<R: Read> Un<R> {
    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.0.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
    fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }
    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; n];
        let mut bytes = vec![0u8; n * 8];
        self.0.read_exact(&mut bytes)?;
        for (i, chunk) in bytes.chunks_exact(8).enumerate() {
            out[i] = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(out)
    }
    fn c64_vec(&mut self, n: usize) -> Result<Vec<C64>> {
        let raw = self.f64_vec(2 * n)?;
        Ok(raw.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect())
    }
    fn bool_vec(&mut self, n: usize) -> Result<Vec<bool>> {
        let mut bytes = vec![0u8; n];
        self.0.read_exact(&mut bytes)?;
        Ok(bytes.into_iter().map(|b| b != 0).collect())
    }
}

/// Write a snapshot (profile state + phase tables) as a checkpoint file.
pub fn write_checkpoint(path: &Path, snap: &Snapshot) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let grid = snap.state.grid();
    let mut w = Bin(BufWriter::new(std::fs::File::create(path)?));
    w.0.write_all(MAGIC)?;
    w.u32(VERSION)?;
    w.u32(grid.n() as u32)?;
    w.f64(grid.box_length())?;
    w.f64(grid.mass())?;
    w.f64(snap.state.t)?;
    for phi in &snap.state.phi {
        for c in 0..4 {
            w.c64_slice(phi.component(c))?;
        }
    }
    for mu in 0..4 {
        for s in 0..2 {
            w.c64_slice(snap.state.v[mu][s].data())?;
        }
    }
    for mu in 0..4 {
        w.f64(snap.state.reg[mu][0])?;
        w.f64(snap.state.reg[mu][1])?;
    }
    // phase tables
    let t = &snap.tables;
    w.f64(t.t)?;
    w.u64(t.stamps.len() as u64)?;
    w.f64_slice(&t.stamps)?;
    for s in 0..2 {
        w.f64_slice(&t.b[s])?;
    }
    for s in 0..2 {
        w.bool_slice(&t.wrapped[s])?;
    }
    for s in 0..2 {
        w.f64_slice(t.last_integrand_ref(s))?;
    }
    let c = t.constants();
    w.f64(c.delta)?;
    w.f64(c.zeta)?;
    w.f64(c.delta_bar)?;
    w.f64_slice(&c.n_table)?;
    w.f64_slice(&c.h_table)?;
    w.u64(t.mode_budget as u64)?;
    w.u64(t.dense_modes as u64)?;
    w.f64(t.coarse_ds)?;
    w.0.flush()?;
    Ok(())
}

/// Read a checkpoint; reconstructs the grid from the stored descriptor.
pub fn read_checkpoint(path: &Path) -> Result<Snapshot> {
    let mut r = Un(BufReader::new(std::fs::File::open(path)?));
    let mut magic = [0u8; 4];
    r.0.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(MdError::Checkpoint(format!(
            "bad magic {magic:?} in {}",
            path.display()
        )));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(MdError::Checkpoint(format!("unsupported version {version}")));
    }
    let n = r.u32()? as usize;
    let l = r.f64()?;
    let mass = r.f64()?;
    let grid = FourierGrid::new(n, l, mass)?;
    let t = r.f64()?;
    let n3 = grid.len();
    let mut phi: [SpinorField; 2] =
        std::array::from_fn(|_| SpinorField::zeros(&grid, Side::Fourier));
    for p in phi.iter_mut() {
        for c in 0..4 {
            *p.component_mut(c) = r.c64_vec(n3)?;
        }
    }
    let mut v: [[ScalarField; 2]; 4] = std::array::from_fn(|_| {
        std::array::from_fn(|_| ScalarField::zeros(&grid, Side::Fourier))
    });
    for v_mu in v.iter_mut() {
        for vs in v_mu.iter_mut() {
            *vs = ScalarField::from_data(&grid, Side::Fourier, r.c64_vec(n3)?)?;
        }
    }
    let mut reg = [[0.0; 2]; 4];
    for r_mu in reg.iter_mut() {
        r_mu[0] = r.f64()?;
        r_mu[1] = r.f64()?;
    }
    let table_t = r.f64()?;
    let n_stamps = r.u64()? as usize;
    if n_stamps > (1 << 32) {
        return Err(MdError::Checkpoint("implausible stamp count".into()));
    }
    let stamps = r.f64_vec(n_stamps)?;
    let b = [r.f64_vec(n3)?, r.f64_vec(n3)?];
    let wrapped = [r.bool_vec(n3)?, r.bool_vec(n3)?];
    let last = [r.f64_vec(n3)?, r.f64_vec(n3)?];
    let delta = r.f64()?;
    let zeta = r.f64()?;
    let delta_bar = r.f64()?;
    let nt = r.f64_vec(4)?;
    let ht = r.f64_vec(4)?;
    let constants = PaperConstants {
        delta,
        zeta,
        delta_bar,
        n_table: [nt[0], nt[1], nt[2], nt[3]],
        h_table: [ht[0], ht[1], ht[2], ht[3]],
    };
    let mode_budget = r.u64()? as usize;
    let dense_modes = r.u64()? as usize;
    let coarse_ds = r.f64()?;
    let tables = PhaseCorrectionTable::from_parts(
        table_t,
        b,
        wrapped,
        stamps,
        last,
        constants,
        mode_budget,
        dense_modes,
        coarse_ds,
    );
    Ok(Snapshot {
        state: ProfileState { t, phi, v, reg },
        tables,
    })
}

/// Write a JSON report with a schema-version field injected at the top level.
pub fn write_json_report(path: &Path, schema: &str, body: serde_json::Value) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut obj = serde_json::Map::new();
    obj.insert("schema_version".into(), serde_json::json!(format!("{schema}/1")));
    match body {
        serde_json::Value::Object(m) => {
            for (k, v) in m {
                obj.insert(k, v);
            }
        }
        other => {
            obj.insert("body".into(), other);
        }
    }
    let text = serde_json::to_string_pretty(&serde_json::Value::Object(obj))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Incremental CSV writer with a declared header row.
pub struct CsvWriter {
    w: BufWriter<std::fs::File>,
    columns: usize,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "{}", header.join(","))?;
        Ok(CsvWriter { w, columns: header.len() })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        debug_assert_eq!(values.len(), self.columns);
        let mut first = true;
        for v in values {
            if !first {
                write!(self.w, ",")?;
            }
            write!(self.w, "{v:.17e}")?;
            first = false;
        }
        writeln!(self.w)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}
