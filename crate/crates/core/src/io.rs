//! Binary persistence of trajectories, reduced bases and projected operators.
//!
//! All files are little-endian: an 8-byte magic, a `u32` version, a header of
//! `u64`/`f64` scalars, then contiguous `f64` payloads.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hf::{SolverReport, State, Trajectory};
use crate::mesh::Field;
use crate::pod::{FieldBasis, ReducedBasis};
use crate::rom::{RomOp, RomOperators};

pub const TRAJECTORY_MAGIC: &[u8; 8] = b"TPTRAJ01";
pub const BASIS_MAGIC: &[u8; 8] = b"TPBASIS1";
pub const ROM_OPS_MAGIC: &[u8; 8] = b"TPROMOP1";
pub const VERSION: u32 = 1;

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.0.write_all(b)?;
        Ok(())
    }
    fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn u64(&mut self, v: usize) -> Result<()> {
        self.bytes(&(v as u64).to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn slice(&mut self, v: &[f64]) -> Result<()> {
        let mut buf = Vec::with_capacity(8 * v.len());
        for x in v {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        self.bytes(&buf)
    }
    fn header(&mut self, magic: &[u8; 8]) -> Result<()> {
        self.bytes(magic)?;
        self.u32(VERSION)
    }
}

struct Reader<'p, R: Read> {
    inner: R,
    path: &'p Path,
}

impl<R: Read> Reader<'_, R> {
    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::Format { path: self.path.display().to_string(), reason: reason.into() }
    }
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(|e| self.fail(format!("truncated file ({e})")))?;
        Ok(b)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.bytes()?);
        usize::try_from(v).map_err(|_| self.fail("size does not fit in memory"))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn vec(&mut self, n: usize) -> Result<Vec<f64>> {
        // guards against absurd sizes in corrupt headers
        if n > (1 << 34) {
            return Err(self.fail(format!("implausible payload length {n}")));
        }
        let mut raw = vec![0u8; 8 * n];
        self.inner.read_exact(&mut raw).map_err(|e| self.fail(format!("truncated payload ({e})")))?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn header(&mut self, magic: &[u8; 8]) -> Result<()> {
        let got: [u8; 8] = self.bytes()?;
        if &got != magic {
            return Err(self.fail(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&got),
                String::from_utf8_lossy(magic)
            )));
        }
        let v = self.u32()?;
        if v != VERSION {
            return Err(self.fail(format!("unsupported version {v}")));
        }
        Ok(())
    }
    fn finish(mut self) -> Result<()> {
        let mut extra = [0u8; 1];
        match self.inner.read(&mut extra)? {
            0 => Ok(()),
            _ => Err(self.fail("trailing bytes after payload")),
        }
    }
}

fn create(path: &Path) -> Result<Writer<BufWriter<File>>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(Writer(BufWriter::new(File::create(path)?)))
}

fn open(path: &Path) -> Result<Reader<'_, BufReader<File>>> {
    Ok(Reader { inner: BufReader::new(File::open(path)?), path })
}

/// Header: field sizes, number of levels, `dt`; then per level `t, u, p, theta`.
pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = create(path)?;
    w.header(TRAJECTORY_MAGIC)?;
    let (nu, np, nt) = traj.states.first().map(State::sizes).unwrap_or((0, 0, 0));
    for n in [nu, np, nt, traj.states.len()] {
        w.u64(n)?;
    }
    w.f64(traj.dt)?;
    for s in &traj.states {
        if s.sizes() != (nu, np, nt) {
            return Err(Error::Format { path: path.display().to_string(), reason: "states of different sizes".into() });
        }
        w.f64(s.t)?;
        w.slice(&s.u)?;
        w.slice(&s.p)?;
        w.slice(&s.theta)?;
    }
    w.0.flush()?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let mut r = open(path)?;
    r.header(TRAJECTORY_MAGIC)?;
    let (nu, np, nt, levels) = (r.u64()?, r.u64()?, r.u64()?, r.u64()?);
    let dt = r.f64()?;
    let mut states = Vec::with_capacity(levels.min(1 << 20));
    for _ in 0..levels {
        let t = r.f64()?;
        states.push(State { u: r.vec(nu)?, p: r.vec(np)?, theta: r.vec(nt)?, t });
    }
    r.finish()?;
    Ok(Trajectory { states, dt })
}

/// Per field (u, p, theta): `n_dofs, r, n_eig`, modes column-major, eigenvalues.
pub fn write_basis(path: &Path, basis: &ReducedBasis) -> Result<()> {
    let mut w = create(path)?;
    w.header(BASIS_MAGIC)?;
    for f in Field::ALL {
        let b = basis.field(f);
        w.u64(b.n_dofs())?;
        w.u64(b.r())?;
        w.u64(b.eigenvalues.len())?;
        w.slice(b.modes.as_slice())?;
        w.slice(&b.eigenvalues)?;
    }
    w.0.flush()?;
    Ok(())
}

pub fn read_basis(path: &Path) -> Result<ReducedBasis> {
    let mut r = open(path)?;
    r.header(BASIS_MAGIC)?;
    let mut fields = Vec::with_capacity(3);
    for f in Field::ALL {
        let (n, k, ne) = (r.u64()?, r.u64()?, r.u64()?);
        let modes = DMatrix::from_vec(n, k, r.vec(n * k)?);
        fields.push(FieldBasis { field: f, modes, eigenvalues: r.vec(ne)? });
    }
    r.finish()?;
    let theta = fields.pop().unwrap();
    let p = fields.pop().unwrap();
    let u = fields.pop().unwrap();
    Ok(ReducedBasis { u, p, theta })
}

/// `dt`, ranks, count; then per operator: name length, name, rows, cols, values.
pub fn write_rom_operators(path: &Path, ops: &RomOperators) -> Result<()> {
    let mut w = create(path)?;
    w.header(ROM_OPS_MAGIC)?;
    w.f64(ops.dt)?;
    w.u64(ops.ranks.0)?;
    w.u64(ops.ranks.1)?;
    w.u64(ops.ranks.2)?;
    w.u64(ops.matrices.len())?;
    for (op, m) in &ops.matrices {
        let name = op.name().as_bytes();
        w.u64(name.len())?;
        w.bytes(name)?;
        w.u64(m.nrows())?;
        w.u64(m.ncols())?;
        w.slice(m.as_slice())?;
    }
    w.0.flush()?;
    Ok(())
}

pub fn read_rom_operators(path: &Path) -> Result<RomOperators> {
    let mut r = open(path)?;
    r.header(ROM_OPS_MAGIC)?;
    let dt = r.f64()?;
    let ranks = (r.u64()?, r.u64()?, r.u64()?);
    let count = r.u64()?;
    let mut matrices = BTreeMap::new();
    for _ in 0..count {
        let len = r.u64()?;
        if len > 64 {
            return Err(r.fail(format!("operator name of length {len}")));
        }
        let mut name = vec![0u8; len];
        r.inner.read_exact(&mut name).map_err(|e| r.fail(format!("truncated name ({e})")))?;
        let name = String::from_utf8_lossy(&name).into_owned();
        let op = RomOp::from_name(&name).ok_or_else(|| r.fail(format!("unknown operator `{name}`")))?;
        let (rows, cols) = (r.u64()?, r.u64()?);
        matrices.insert(op, DMatrix::from_vec(rows, cols, r.vec(rows * cols)?));
    }
    r.finish()?;
    Ok(RomOperators { dt, ranks, matrices })
}

#[derive(Serialize)]
struct StepRow {
    time_index: usize,
    iterations: usize,
    increment: f64,
    converged: bool,
    seconds: f64,
}

/// One row per time step.
pub fn write_report_csv(path: &Path, report: &SolverReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (k, s) in report.steps.iter().enumerate() {
        w.serialize(StepRow {
            time_index: k + 1,
            iterations: s.iterations,
            increment: s.increment,
            converged: s.converged,
            seconds: s.seconds,
        })?;
    }
    w.flush()?;
    Ok(())
}
