//! Artifact persistence: binary state snapshots, CSV time series, and run
//! manifests.
//!
//! Snapshot format ("VMBS"): a fixed little-endian header
//!   magic "VMBS" | version u32 | spatial dim u32 | spatial points u32 |
//!   velocity points u32 | v_max f64 | eps f64 | t f64 | checksum u64
//! followed by the payload as little-endian f64: the two species densities
//! (species-major, spatial row-major outer, velocity row-major inner), then
//! the six field components E1 E2 E3 B1 B2 B3 (spatial row-major each).
//! The checksum is FNV-1a over the payload bytes; snapshots round-trip
//! bit-exactly.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::EMState;
use crate::grid::{SpatialGrid, VelocityGrid};
use crate::macromicro::SpeciesPair;
use crate::vmb::VMBState;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"VMBS";
pub const SNAPSHOT_VERSION: u32 = 1;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[derive(Debug, Clone)]
pub struct SnapshotMeta {
    pub spatial_dim: u32,
    pub spatial_points: u32,
    pub velocity_points: u32,
    pub v_max: f64,
    pub eps: f64,
    pub t: f64,
}

fn push_f64s(buf: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

/// Serialize a kinetic state. The in-memory layout is velocity-major; the
/// on-disk payload is spatial-major, so the species blocks are transposed
/// on the way out and back.
pub fn write_snapshot(
    path: &Path,
    state: &VMBState,
    vgrid: &VelocityGrid,
    spatial: &SpatialGrid,
    eps: f64,
) -> Result<()> {
    let nx = spatial.n_nodes();
    let nv = vgrid.n_nodes();
    if state.f.nx != nx || state.f.n_velocity() != nv {
        return Err(Error::Shape("snapshot state does not match the grids".into()));
    }
    let mut payload: Vec<u8> = Vec::with_capacity(8 * (2 * nv * nx + 6 * nx));
    for species in [&state.f.f_plus, &state.f.f_minus] {
        for x in 0..nx {
            for v in 0..nv {
                payload.extend_from_slice(&species[v * nx + x].to_le_bytes());
            }
        }
    }
    for c in state.em.e.iter().chain(state.em.b.iter()) {
        push_f64s(&mut payload, c);
    }
    let mut buf: Vec<u8> = Vec::with_capacity(48 + payload.len());
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(spatial.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(spatial.points_per_axis as u32).to_le_bytes());
    buf.extend_from_slice(&(vgrid.points_per_axis as u32).to_le_bytes());
    buf.extend_from_slice(&vgrid.v_max.to_le_bytes());
    buf.extend_from_slice(&eps.to_le_bytes());
    buf.extend_from_slice(&state.t.to_le_bytes());
    buf.extend_from_slice(&fnv1a64(&payload).to_le_bytes());
    buf.extend_from_slice(&payload);
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

fn take<'d>(data: &'d [u8], off: &mut usize, len: usize) -> Result<&'d [u8]> {
    if *off + len > data.len() {
        return Err(Error::Format("snapshot truncated".into()));
    }
    let s = &data[*off..*off + len];
    *off += len;
    Ok(s)
}

fn read_u32(data: &[u8], off: &mut usize) -> Result<u32> {
    Ok(u32::from_le_bytes(take(data, off, 4)?.try_into().unwrap()))
}

fn read_f64(data: &[u8], off: &mut usize) -> Result<f64> {
    Ok(f64::from_le_bytes(take(data, off, 8)?.try_into().unwrap()))
}

/// Deserialize a snapshot, verifying magic, version, and checksum.
pub fn read_snapshot(path: &Path) -> Result<(VMBState, SnapshotMeta)> {
    let mut data = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut data)?;
    let mut off = 0usize;
    if take(&data, &mut off, 4)? != SNAPSHOT_MAGIC {
        return Err(Error::Format("bad magic, expected VMBS".into()));
    }
    let ver = read_u32(&data, &mut off)?;
    if ver != SNAPSHOT_VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {ver}")));
    }
    let dim = read_u32(&data, &mut off)?;
    let sp = read_u32(&data, &mut off)?;
    let vp = read_u32(&data, &mut off)?;
    let v_max = read_f64(&data, &mut off)?;
    let eps = read_f64(&data, &mut off)?;
    let t = read_f64(&data, &mut off)?;
    let checksum = u64::from_le_bytes(take(&data, &mut off, 8)?.try_into().unwrap());
    let payload = &data[off..];
    if fnv1a64(payload) != checksum {
        return Err(Error::Format("snapshot payload checksum mismatch".into()));
    }
    let nx = (sp as usize).pow(dim);
    let nv = (vp as usize).pow(3);
    let expect = 8 * (2 * nv * nx + 6 * nx);
    if payload.len() != expect {
        return Err(Error::Format(format!(
            "snapshot payload has {} bytes, expected {expect}",
            payload.len()
        )));
    }
    let mut f = SpeciesPair::zeros(nv, nx);
    let mut p = off;
    for species in [&mut f.f_plus, &mut f.f_minus] {
        for x in 0..nx {
            for v in 0..nv {
                species[v * nx + x] = read_f64(&data, &mut p)?;
            }
        }
    }
    let mut em = EMState::zeros(nx);
    em.t = t;
    for c in em.e.iter_mut().chain(em.b.iter_mut()) {
        for x in c.iter_mut() {
            *x = read_f64(&data, &mut p)?;
        }
    }
    f.time_stamp = t;
    Ok((
        VMBState { f, em, t },
        SnapshotMeta {
            spatial_dim: dim,
            spatial_points: sp,
            velocity_points: vp,
            v_max,
            eps,
            t,
        },
    ))
}

/// One row of the time-series CSV. The fixed columns come first; the
/// trailing functional columns are named by the header.
#[derive(Debug, Clone)]
pub struct CsvRow {
    pub t: f64,
    pub e_n: f64,
    pub d_n: f64,
    pub mass_plus: f64,
    pub mass_minus: f64,
    pub gauss_e: f64,
    pub gauss_b: f64,
    pub extra: Vec<f64>,
}

/// Write the time-series CSV: a header naming every column, '.' decimals,
/// comma separation, one row per sample.
pub fn write_csv(path: &Path, extra_names: &[String], rows: &[CsvRow]) -> Result<()> {
    let mut out = String::new();
    out.push_str("t,e_N,d_N,mass_plus,mass_minus,gauss_E,gauss_B");
    for name in extra_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for r in rows {
        if r.extra.len() != extra_names.len() {
            return Err(Error::Shape("CSV row width does not match the header".into()));
        }
        out.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.t, r.e_n, r.d_n, r.mass_plus, r.mass_minus, r.gauss_e, r.gauss_b
        ));
        for x in &r.extra {
            out.push_str(&format!(",{x:.17e}"));
        }
        out.push('\n');
    }
    std::fs::File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

/// The run manifest: the full configuration echoed back plus FNV-1a hashes
/// of every emitted artifact, written as JSON.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Manifest {
    pub config: serde_json::Value,
    pub outputs: std::collections::BTreeMap<String, u64>,
}

impl Manifest {
    pub fn new(config: serde_json::Value) -> Manifest {
        Manifest {
            config,
            outputs: Default::default(),
        }
    }

    pub fn record(&mut self, dir: &Path, name: &str) -> Result<()> {
        let mut data = Vec::new();
        std::fs::File::open(dir.join(name))?.read_to_end(&mut data)?;
        self.outputs.insert(name.to_string(), fnv1a64(&data));
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("manifest serialization: {e}")))?;
        std::fs::File::create(path)?.write_all(text.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let mut data = String::new();
        std::fs::File::open(path)?.read_to_string(&mut data)?;
        serde_json::from_str(&data).map_err(|e| Error::Format(format!("manifest parse: {e}")))
    }

    /// Check every recorded artifact hash against the files on disk.
    pub fn verify_outputs(&self, dir: &Path) -> Vec<(String, bool)> {
        self.outputs
            .iter()
            .map(|(name, &hash)| {
                let ok = std::fs::read(dir.join(name))
                    .map(|data| fnv1a64(&data) == hash)
                    .unwrap_or(false);
                (name.clone(), ok)
            })
            .collect()
    }
}
