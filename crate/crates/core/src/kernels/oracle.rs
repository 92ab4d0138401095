//! Heat kernel of the sublaplacian on the first Heisenberg group, tabulated at `t = 1`.
//!
//! A partial Fourier transform in `x3` turns `dt u = X1^2 u + X2^2 u` into the family
//! `dt v = v'' + v'/rho - (lam rho / 2)^2 v` for the radial profile `v(rho)` at
//! frequency `lam`. Each profile is solved by Strang splitting (exact potential
//! half-steps around a Crank–Nicolson finite-volume diffusion step) on two grids;
//! the two results are Richardson-extrapolated and summed back into
//! `Gamma(rho, x3)` by the trapezoidal rule in `lam`.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const ORACLE_DIR_ENV: &str = "CARNOT_ORACLE_DIR";
const MAGIC: &[u8; 8] = b"CRNTAB01";

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("oracle table i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed oracle table: {0}")]
    Format(String),
    #[error("oracle checksum mismatch")]
    Checksum,
    #[error("grid exceeds the bake budget ({reason}); try {suggestion}")]
    Budget { reason: String, suggestion: String },
}

/// Largest table plus profile storage a bake may allocate.
pub const BAKE_MEMORY_BUDGET: f64 = 1024.0 * 1024.0 * 1024.0;
/// Largest number of cell updates over all frequencies and both grids.
pub const BAKE_WORK_BUDGET: f64 = 2e10;

/// Discretization of the oracle solver and of the stored table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleGridConfig {
    /// Radial cell size of the coarse grid; the fine grid halves it.
    pub h_coarse: f64,
    /// Ratio `dt / t` of the coarse geometric time stepping; halved on the fine grid.
    pub dt_ratio_coarse: f64,
    /// Outer radius of the radial solver (Dirichlet).
    pub radius: f64,
    /// Start time; the datum is the short-time expansion of the profile.
    pub t0: f64,
    /// Fourier step in `x3`, and the cutoff frequency.
    pub dlam: f64,
    pub lam_max: f64,
    /// Table extent `rho in [0, rho_max]`, `x3 in [-z_max, z_max]` and spacings.
    pub rho_max: f64,
    pub z_max: f64,
    pub d_rho: f64,
    pub d_z: f64,
}

impl Default for OracleGridConfig {
    fn default() -> Self {
        OracleGridConfig {
            h_coarse: 0.01,
            dt_ratio_coarse: 0.04,
            radius: 12.0,
            t0: 2e-3,
            dlam: PI / 16.0,
            lam_max: 30.0,
            rho_max: 10.0,
            z_max: 8.0,
            d_rho: 0.025,
            d_z: 1.0 / 32.0,
        }
    }
}

impl OracleGridConfig {
    /// Quick low-resolution grid for smoke tests.
    pub fn coarse() -> Self {
        OracleGridConfig { h_coarse: 0.025, dt_ratio_coarse: 0.05, d_rho: 0.05, d_z: 1.0 / 16.0, ..Default::default() }
    }

    fn key(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let h = Sha256::digest(json.as_bytes());
        h.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }
}

/// Memory in bytes and cell updates of a bake.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BakeCost {
    pub bytes: f64,
    pub work: f64,
}

impl OracleGridConfig {
    pub fn cost(&self) -> BakeCost {
        let nr = (self.rho_max / self.d_rho).round() + 1.0;
        let nz = (2.0 * self.z_max / self.d_z).round() + 1.0;
        let nlam = (self.lam_max / self.dlam).floor() + 1.0;
        let steps = |ratio: f64| ((1.0 / self.t0).ln() / (1.0 + ratio).ln()).ceil();
        let cells = self.radius / self.h_coarse;
        let work = nlam * (cells * steps(self.dt_ratio_coarse) + 2.0 * cells * steps(0.5 * self.dt_ratio_coarse));
        let bytes = 8.0 * (2.0 * nlam * nr + 3.0 * nr * nz + 2.0 * cells);
        BakeCost { bytes, work }
    }

    /// Refuses grids beyond the budgets, suggesting one with coarser cells and spacings.
    pub fn check_budget(&self) -> Result<BakeCost, OracleError> {
        let fits = |c: &BakeCost| c.bytes <= BAKE_MEMORY_BUDGET && c.work <= BAKE_WORK_BUDGET;
        let cost = self.cost();
        if !(self.h_coarse > 0.0 && self.d_rho > 0.0 && self.d_z > 0.0 && self.dlam > 0.0 && self.t0 > 0.0 && self.t0 < 1.0) {
            return Err(OracleError::Format("grid spacings must be positive and 0 < t0 < 1".into()));
        }
        if fits(&cost) {
            return Ok(cost);
        }
        let mut s = self.clone();
        while !fits(&s.cost()) {
            s.h_coarse *= 2.0;
            s.d_rho *= 2.0;
            s.d_z *= 2.0;
            s.dt_ratio_coarse = (2.0 * s.dt_ratio_coarse).min(0.5);
        }
        Err(OracleError::Budget {
            reason: format!("{:.2e} bytes, {:.2e} cell updates", cost.bytes, cost.work),
            suggestion: serde_json::to_string(&s).expect("config serializes"),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableHeader {
    pub group: String,
    pub dims: [usize; 2],
    pub spacing: [f64; 2],
    pub origin: [f64; 2],
    #[serde(rename = "T")]
    pub t: f64,
    pub coords: String,
    /// Max |fine - coarse| over the table, the Richardson error indicator.
    pub richardson_diff: f64,
    /// Max |extrapolated - fine|.
    pub extrapolation_shift: f64,
    /// `int Gamma dx` of the stored table.
    pub mass: f64,
    pub sha256: String,
    pub grid: OracleGridConfig,
}

/// `Gamma0((rho, z), 1)` on a uniform `(rho, z)` grid, row-major in `rho`.
#[derive(Debug, Clone)]
pub struct HeisenbergTable {
    pub header: TableHeader,
    pub data: Vec<f64>,
}

/// Interpolated value; `outside` marks queries beyond the table (value 0).
#[derive(Debug, Clone, Copy)]
pub struct TableValue {
    pub value: f64,
    pub outside: bool,
}

struct Tridiag {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

/// Radial finite-volume Laplacian on cells centred at `(i + 1/2) h`.
fn radial_laplacian(n: usize, h: f64) -> Tridiag {
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        let rc = (i as f64 + 0.5) * h;
        let rl = i as f64 * h;
        let rr = (i as f64 + 1.0) * h;
        let s = 1.0 / (rc * h * h);
        lower[i] = rl * s;
        upper[i] = rr * s;
        diag[i] = -(rl + rr) * s;
        if i + 1 == n {
            // Dirichlet at the outer face via a reflected ghost cell
            diag[i] -= rr * s;
            upper[i] = 0.0;
        }
    }
    Tridiag { lower, diag, upper }
}

fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64], scratch: &mut [f64]) {
    let n = d.len();
    scratch[0] = c[0] / b[0];
    d[0] /= b[0];
    for i in 1..n {
        let m = b[i] - a[i] * scratch[i - 1];
        scratch[i] = c[i] / m;
        d[i] = (d[i] - a[i] * d[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        d[i] -= scratch[i] * d[i + 1];
    }
}

/// Radial profile at `t = 1` for frequency `lam` on cell centres of size `h`.
fn solve_profile(lam: f64, h: f64, dt_ratio: f64, cfg: &OracleGridConfig) -> Vec<f64> {
    let n = (cfg.radius / h).round() as usize;
    let lap = radial_laplacian(n, h);
    let rho: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
    let pot: Vec<f64> = rho.iter().map(|r| 0.25 * lam * lam * r * r).collect();
    let t0 = cfg.t0;
    // short-time expansion of the profile, averaged over each cell against rho d rho
    let l2 = lam * lam;
    let pre = (1.0 - l2 * t0 * t0 / 6.0) / (4.0 * PI * t0);
    let a = 1.0 / (4.0 * t0) + l2 * t0 / 12.0;
    let mut v: Vec<f64> = rho
        .iter()
        .map(|&r| {
            let (rl, rr) = (r - 0.5 * h, r + 0.5 * h);
            pre * ((-a * rl * rl).exp() - (-a * rr * rr).exp()) / (2.0 * a * r * h)
        })
        .collect();
    let steps = ((1.0 / t0).ln() / (1.0 + dt_ratio).ln()).ceil() as usize;
    let q = (1.0 / t0).powf(1.0 / steps as f64);
    let mut t = t0;
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    for _ in 0..steps {
        let t_next = t * q;
        let dt = t_next - t;
        for i in 0..n {
            v[i] *= (-0.5 * dt * pot[i]).exp();
        }
        for i in 0..n {
            let mut lv = lap.diag[i] * v[i];
            if i > 0 {
                lv += lap.lower[i] * v[i - 1];
            }
            if i + 1 < n {
                lv += lap.upper[i] * v[i + 1];
            }
            rhs[i] = v[i] + 0.5 * dt * lv;
            a[i] = -0.5 * dt * lap.lower[i];
            b[i] = 1.0 - 0.5 * dt * lap.diag[i];
            c[i] = -0.5 * dt * lap.upper[i];
        }
        thomas(&a, &b, &c, &mut rhs, &mut scratch);
        v.copy_from_slice(&rhs);
        for i in 0..n {
            v[i] *= (-0.5 * dt * pot[i]).exp();
        }
        t = t_next;
    }
    v
}

/// Samples a cell-centred profile at `rho = j * d_rho`.
fn sample_profile(v: &[f64], h: f64, d_rho: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|j| {
            let r = j as f64 * d_rho;
            if r < 0.5 * h {
                // even quadratic through the first two cells
                return (9.0 * v[0] - v[1]) / 8.0;
            }
            // cubic Lagrange through four surrounding centres
            let s = r / h - 0.5;
            let i = (s.floor() as isize).clamp(1, v.len() as isize - 3) as usize;
            let f = s - i as f64;
            let p = [v[i - 1], v[i], v[i + 1], v[i + 2]];
            lagrange4(p, f)
        })
        .collect()
}

/// Cubic through values at offsets -1, 0, 1, 2 evaluated at `f`.
#[inline]
fn lagrange4(p: [f64; 4], f: f64) -> f64 {
    let w0 = -f * (f - 1.0) * (f - 2.0) / 6.0;
    let w1 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
    let w2 = -(f + 1.0) * f * (f - 2.0) / 2.0;
    let w3 = (f + 1.0) * f * (f - 1.0) / 6.0;
    w0 * p[0] + w1 * p[1] + w2 * p[2] + w3 * p[3]
}

impl HeisenbergTable {
    /// Runs the solver on both grids and assembles the extrapolated table.
    pub fn bake(cfg: &OracleGridConfig) -> HeisenbergTable {
        let nr = (cfg.rho_max / cfg.d_rho).round() as usize + 1;
        let nz = (2.0 * cfg.z_max / cfg.d_z).round() as usize + 1;
        let nlam = (cfg.lam_max / cfg.dlam).floor() as usize + 1;
        let mut fine_prof = Vec::with_capacity(nlam);
        let mut coarse_prof = Vec::with_capacity(nlam);
        for k in 0..nlam {
            let lam = k as f64 * cfg.dlam;
            let hc = cfg.h_coarse;
            let c = solve_profile(lam, hc, cfg.dt_ratio_coarse, cfg);
            let f = solve_profile(lam, 0.5 * hc, 0.5 * cfg.dt_ratio_coarse, cfg);
            coarse_prof.push(sample_profile(&c, hc, cfg.d_rho, nr));
            fine_prof.push(sample_profile(&f, 0.5 * hc, cfg.d_rho, nr));
        }
        // cos(lam_k z_j) with trapezoid weights
        let mut weights = vec![vec![0.0; nz]; nlam];
        for (k, row) in weights.iter_mut().enumerate() {
            let lam = k as f64 * cfg.dlam;
            let w = if k == 0 { 1.0 } else { 2.0 };
            for (j, v) in row.iter_mut().enumerate() {
                let z = -cfg.z_max + j as f64 * cfg.d_z;
                *v = cfg.dlam / (2.0 * PI) * w * (lam * z).cos();
            }
        }
        let mut data = vec![0.0; nr * nz];
        let mut diff: f64 = 0.0;
        let mut shift: f64 = 0.0;
        let mut fine_row = vec![0.0; nz];
        let mut coarse_row = vec![0.0; nz];
        for i in 0..nr {
            fine_row.iter_mut().for_each(|v| *v = 0.0);
            coarse_row.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..nlam {
                let (pf, pc) = (fine_prof[k][i], coarse_prof[k][i]);
                for j in 0..nz {
                    fine_row[j] += weights[k][j] * pf;
                    coarse_row[j] += weights[k][j] * pc;
                }
            }
            for j in 0..nz {
                let r = (4.0 * fine_row[j] - coarse_row[j]) / 3.0;
                diff = diff.max((fine_row[j] - coarse_row[j]).abs());
                shift = shift.max((r - fine_row[j]).abs());
                data[i * nz + j] = r;
            }
        }
        let mut table = HeisenbergTable {
            header: TableHeader {
                group: "heisenberg1".into(),
                dims: [nr, nz],
                spacing: [cfg.d_rho, cfg.d_z],
                origin: [0.0, -cfg.z_max],
                t: 1.0,
                coords: "rho,x3".into(),
                richardson_diff: diff,
                extrapolation_shift: shift,
                mass: 0.0,
                sha256: String::new(),
                grid: cfg.clone(),
            },
            data,
        };
        table.header.mass = table.mass();
        table.header.sha256 = checksum(&table.data);
        table
    }

    /// `int Gamma(x, 1) dx = 2 pi int int rho Gamma d rho dz` by the trapezoidal rule.
    pub fn mass(&self) -> f64 {
        let [nr, nz] = self.header.dims;
        let [dr, dz] = self.header.spacing;
        let mut s = 0.0;
        for i in 0..nr {
            let wr = if i == 0 || i + 1 == nr { 0.5 } else { 1.0 };
            let rho = i as f64 * dr;
            for j in 0..nz {
                let wz = if j == 0 || j + 1 == nz { 0.5 } else { 1.0 };
                s += wr * wz * rho * self.data[i * nz + j];
            }
        }
        2.0 * PI * s * dr * dz
    }

    pub fn rho_max(&self) -> f64 {
        self.header.origin[0] + (self.header.dims[0] - 1) as f64 * self.header.spacing[0]
    }

    pub fn z_max(&self) -> f64 {
        self.header.origin[1] + (self.header.dims[1] - 1) as f64 * self.header.spacing[1]
    }

    /// Largest table value on the outer boundary, a bound for what is cut off.
    pub fn edge_bound(&self) -> f64 {
        let [nr, nz] = self.header.dims;
        let mut m: f64 = 0.0;
        for i in 0..nr {
            m = m.max(self.data[i * nz].abs()).max(self.data[i * nz + nz - 1].abs());
        }
        for j in 0..nz {
            m = m.max(self.data[(nr - 1) * nz + j].abs());
        }
        m
    }

    /// Constants `(C, c)` with `Gamma0(x, 1) <= C exp(-c g(x)^2)` at every table node,
    /// where `g = (rho^4 + 16 x3^2)^{1/4}` is the Korányi gauge. `c` is picked on a grid
    /// to minimize the gauge radius at which the bound drops to `e^{-10}` of its peak.
    pub fn gauge_bound(&self) -> (f64, f64) {
        let [nr, nz] = self.header.dims;
        let [dr, dz] = self.header.spacing;
        let mut pts = Vec::new();
        for i in 0..nr {
            let rho = self.header.origin[0] + i as f64 * dr;
            for j in 0..nz {
                let v = self.data[i * nz + j];
                if v > 0.0 {
                    let z = self.header.origin[1] + j as f64 * dz;
                    pts.push(((rho.powi(4) + 16.0 * z * z).sqrt(), v.ln()));
                }
            }
        }
        let peak = self.lookup(0.0, 0.0).value.ln();
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for k in 1..=200 {
            let c = 0.5 * k as f64 / 200.0;
            let ln_c = pts.iter().map(|(g2, lv)| lv + c * g2).fold(f64::NEG_INFINITY, f64::max);
            let radius2 = (ln_c - peak + 10.0) / c;
            if radius2 < best.0 {
                best = (radius2, ln_c, c);
            }
        }
        // margin for the interpolant between nodes
        (1.02 * best.1.exp(), best.2)
    }

    /// Bicubic Lagrange interpolation with even reflection across `rho = 0`.
    pub fn lookup(&self, rho: f64, z: f64) -> TableValue {
        let [nr, nz] = self.header.dims;
        let [dr, dz] = self.header.spacing;
        let rho = rho.abs();
        if rho > self.rho_max() || z < self.header.origin[1] || z > self.z_max() {
            return TableValue { value: 0.0, outside: true };
        }
        let sr = rho / dr;
        let ir = (sr.floor() as isize).min(nr as isize - 3);
        let fr = sr - ir as f64;
        let sz = (z - self.header.origin[1]) / dz;
        let iz = (sz.floor() as isize).clamp(1, nz as isize - 3);
        let fz = sz - iz as f64;
        let mut col = [0.0; 4];
        for (a, c) in col.iter_mut().enumerate() {
            let i = (ir - 1 + a as isize).unsigned_abs();
            let base = i * nz;
            let p = [
                self.data[base + (iz - 1) as usize],
                self.data[base + iz as usize],
                self.data[base + (iz + 1) as usize],
                self.data[base + (iz + 2) as usize],
            ];
            *c = lagrange4(p, fz);
        }
        TableValue { value: lagrange4(col, fr), outside: false }
    }

    pub fn write(&self, path: &Path) -> Result<(), OracleError> {
        let header = serde_json::to_vec(&self.header).map_err(|e| OracleError::Format(e.to_string()))?;
        let mut buf = Vec::with_capacity(16 + header.len() + 8 * self.data.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
        buf.extend_from_slice(&header);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let dir = path.parent().unwrap_or(Path::new("."));
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(
            ".{}.{}.tmp",
            path.file_name().and_then(|s| s.to_str()).unwrap_or("table"),
            std::process::id()
        ));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&buf)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<HeisenbergTable, OracleError> {
        let buf = fs::read(path)?;
        if buf.len() < 16 || &buf[..8] != MAGIC {
            return Err(OracleError::Format("bad magic".into()));
        }
        let hlen = u64::from_le_bytes(buf[8..16].try_into().unwrap()) as usize;
        let hend = 16usize.checked_add(hlen).filter(|&e| e <= buf.len()).ok_or_else(|| OracleError::Format("truncated header".into()))?;
        let header: TableHeader =
            serde_json::from_slice(&buf[16..hend]).map_err(|e| OracleError::Format(e.to_string()))?;
        let count = header.dims[0] * header.dims[1];
        let body = &buf[hend..];
        if body.len() != 8 * count {
            return Err(OracleError::Format(format!("expected {} values, found {} bytes", count, body.len())));
        }
        let data: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        if checksum(&data) != header.sha256 {
            return Err(OracleError::Checksum);
        }
        Ok(HeisenbergTable { header, data })
    }
}

fn checksum(data: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in data {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Directory for cached tables: `$CARNOT_ORACLE_DIR`, else a folder in the system temp dir.
pub fn oracle_dir() -> PathBuf {
    std::env::var_os(ORACLE_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("carnot-oracle"))
}

pub fn table_path(dir: &Path, cfg: &OracleGridConfig) -> PathBuf {
    dir.join(format!("heisenberg1_T1_{}.ctab", cfg.key()))
}

/// Loads the table for `cfg` from `dir`, baking and storing it if absent or invalid.
pub fn load_or_bake(dir: &Path, cfg: &OracleGridConfig) -> Result<HeisenbergTable, OracleError> {
    let path = table_path(dir, cfg);
    if let Ok(t) = HeisenbergTable::read(&path) {
        if &t.header.grid == cfg {
            return Ok(t);
        }
    }
    let t = HeisenbergTable::bake(cfg);
    t.write(&path)?;
    Ok(t)
}

static DEFAULT_TABLE: OnceLock<Arc<HeisenbergTable>> = OnceLock::new();
static BAKE_LOCK: Mutex<()> = Mutex::new(());

/// Process-wide default table, loaded from the cache directory or baked once.
pub fn default_table() -> Result<Arc<HeisenbergTable>, OracleError> {
    if let Some(t) = DEFAULT_TABLE.get() {
        return Ok(t.clone());
    }
    let _guard = BAKE_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(t) = DEFAULT_TABLE.get() {
        return Ok(t.clone());
    }
    let t = Arc::new(load_or_bake(&oracle_dir(), &OracleGridConfig::default())?);
    let _ = DEFAULT_TABLE.set(t.clone());
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_solves_tridiagonal() {
        let a = [0.0, 1.0, 1.0];
        let b = [4.0, 4.0, 4.0];
        let c = [1.0, 1.0, 0.0];
        let mut d = [5.0, 6.0, 5.0];
        let mut s = [0.0; 3];
        thomas(&a, &b, &c, &mut d, &mut s);
        for v in d {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn free_profile_keeps_mass() {
        let cfg = OracleGridConfig::coarse();
        let h = 0.01;
        let v = solve_profile(0.0, h, 0.02, &cfg);
        let mass: f64 = v.iter().enumerate().map(|(i, x)| 2.0 * PI * (i as f64 + 0.5) * h * h * x).sum();
        assert!((mass - 1.0).abs() < 1e-6, "{mass}");
        // 2-D heat kernel at t = 1, rho = 0
        let c = sample_profile(&v, h, 0.1, 1)[0];
        assert!((c - 1.0 / (4.0 * PI)).abs() < 1e-5, "{c}");
    }

    #[test]
    fn file_roundtrip_and_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = OracleGridConfig { lam_max: 4.0, rho_max: 2.0, z_max: 1.0, ..OracleGridConfig::coarse() };
        let t = load_or_bake(dir.path(), &cfg).unwrap();
        let path = table_path(dir.path(), &cfg);
        let back = HeisenbergTable::read(&path).unwrap();
        assert_eq!(back.data, t.data);
        let mut bytes = fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0x55;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(HeisenbergTable::read(&path), Err(OracleError::Checksum)));
    }
}
