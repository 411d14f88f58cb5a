//! Pseudo-spectral solver for the limiting two-fluid incompressible
//! Navier-Stokes-Fourier-Maxwell system with Ohm's law on the periodic box:
//!
//!   d_t u + u.grad u - mu lap u + grad p = (1/2)(n E + j x B),  div u = 0,
//!   d_t theta + u.grad theta - kappa lap theta = 0,             rho = -theta,
//!   d_t E - curl B = -j,   div E = n,
//!   d_t B + curl E = 0,    div B = 0,
//!   j - n u = sigma (-(1/2) grad n + E + u x B),
//!   d_t n + div j = 0.
//!
//! Time stepping: explicit midpoint (RK2) with an integrating factor for the
//! stiff diffusion, 2/3-rule dealiasing of all quadratic products, a Leray
//! projection after every stage, and the exact Maxwell mode rotation for the
//! field lines. The same midpoint current drives both the n-equation and the
//! Maxwell source, which keeps the Gauss residual div E - n constant per
//! step to round-off.
//!
//! A monotone energy audit exists in closed form:
//!   H = (1/2)||u||^2 + (3/2)||theta||^2 + (1/4)(||E||^2 + ||B||^2)
//!       + (1/8)||n||^2
//!   dH/dt = -mu ||grad u||^2 - 3 kappa ||grad theta||^2
//!           - (1/(2 sigma)) ||j - n u||^2 <= 0,
//! where all cross terms cancel through the Ohm relation and div u = 0.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{divergence, gradient, maxwell_step, EMState};
use crate::fourier::SpectralOps;
use crate::grid::SpatialGrid;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct NSFMConfig {
    pub mu: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub dt: f64,
    pub t_end: f64,
    pub frame_stride: usize,
}

impl NSFMConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.kappa > 0.0 && self.sigma > 0.0) {
            return Err(Error::Config(format!(
                "transport coefficients must be positive: mu={}, kappa={}, sigma={}",
                self.mu, self.kappa, self.sigma
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.frame_stride == 0 {
            return Err(Error::Config("frame_stride must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NSFMState {
    pub u: [Vec<f64>; 3],
    pub theta: Vec<f64>,
    pub n: Vec<f64>,
    pub e: [Vec<f64>; 3],
    pub b: [Vec<f64>; 3],
    /// Pressure recovered from the last projection stage (diagnostic).
    pub p: Vec<f64>,
    /// Current recomputed from the Ohm relation on this state (diagnostic).
    pub j: [Vec<f64>; 3],
    pub t: f64,
}

impl NSFMState {
    pub fn zeros(nx: usize) -> NSFMState {
        let z = || vec![0.0; nx];
        NSFMState {
            u: [z(), z(), z()],
            theta: z(),
            n: z(),
            e: [z(), z(), z()],
            b: [z(), z(), z()],
            p: z(),
            j: [z(), z(), z()],
            t: 0.0,
        }
    }

    /// rho is not stored: the Boussinesq relation fixes it as -theta.
    pub fn rho(&self) -> Vec<f64> {
        self.theta.iter().map(|t| -t).collect()
    }

    /// w = (3/2) n theta (derived diagnostic).
    pub fn w_diagnostic(&self) -> Vec<f64> {
        self.n.iter().zip(&self.theta).map(|(n, t)| 1.5 * n * t).collect()
    }

    pub fn is_finite(&self) -> bool {
        let vecs = self
            .u
            .iter()
            .chain(self.e.iter())
            .chain(self.b.iter())
            .chain([&self.theta, &self.n]);
        vecs.into_iter().all(|c| c.iter().all(|x| x.is_finite()))
    }
}

/// Per-mode Leray projection u_hat -> u_hat - k (k . u_hat)/|k|^2 (k = 0
/// untouched), returning a divergence-free field.
pub fn leray_project(ops: &SpectralOps, u: &[Vec<f64>; 3]) -> Result<[Vec<f64>; 3]> {
    let mut spec = [ops.forward(&u[0]), ops.forward(&u[1]), ops.forward(&u[2])];
    leray_project_spec(ops, &mut spec);
    Ok([
        ops.inverse_real(spec[0].clone()),
        ops.inverse_real(spec[1].clone()),
        ops.inverse_real(spec[2].clone()),
    ])
}

fn leray_project_spec(ops: &SpectralOps, spec: &mut [Vec<Complex64>; 3]) {
    let nx = ops.grid.n_nodes();
    for idx in 0..nx {
        let kap = ops.kappa(idx);
        let k2 = kap[0] * kap[0] + kap[1] * kap[1] + kap[2] * kap[2];
        if k2 == 0.0 {
            continue;
        }
        let dot = spec[0][idx] * kap[0] + spec[1][idx] * kap[1] + spec[2][idx] * kap[2];
        for c in 0..3 {
            spec[c][idx] -= dot * (kap[c] / k2);
        }
    }
}

/// Ohm's law: j = n u + sigma (-(1/2) grad n + E + u x B).
pub fn ohm_current(
    ops: &SpectralOps,
    u: &[Vec<f64>; 3],
    n: &[f64],
    e: &[Vec<f64>; 3],
    b: &[Vec<f64>; 3],
    sigma: f64,
) -> Result<[Vec<f64>; 3]> {
    let nx = ops.grid.n_nodes();
    let gn = gradient(ops, n)?;
    let mut j = [vec![0.0; nx], vec![0.0; nx], vec![0.0; nx]];
    for x in 0..nx {
        let uxb = [
            u[1][x] * b[2][x] - u[2][x] * b[1][x],
            u[2][x] * b[0][x] - u[0][x] * b[2][x],
            u[0][x] * b[1][x] - u[1][x] * b[0][x],
        ];
        for c in 0..3 {
            j[c][x] = n[x] * u[c][x] + sigma * (-0.5 * gn[c][x] + e[c][x] + uxb[c]);
        }
    }
    Ok(j)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum NSFMStatus {
    Completed,
    AbortedNonFinite { t: f64 },
}

#[derive(Debug)]
pub struct NSFMRun {
    pub frames: Vec<NSFMState>,
    /// (t, energy, dissipation) audit series.
    pub energy_series: Vec<(f64, f64, f64)>,
    pub status: NSFMStatus,
}

pub struct NSFMSolver {
    pub ops: SpectralOps,
    /// 2/3-rule mask in spectral space (1 keep, 0 drop).
    mask: Vec<f64>,
}

struct Rhs {
    /// Leray-projected, dealiased spectral tendency of u.
    nu: [Vec<Complex64>; 3],
    /// Dealiased spectral tendency of theta (advection only).
    ntheta: Vec<Complex64>,
    /// Physical tendency of n: -div j.
    nn: Vec<f64>,
    /// The current used for this evaluation.
    j: [Vec<f64>; 3],
    /// Pressure recovered from the unprojected force.
    p: Vec<f64>,
}

impl NSFMSolver {
    pub fn new(spatial: &SpatialGrid) -> NSFMSolver {
        let ops = SpectralOps::new(spatial);
        let nk = spatial.points_per_axis as i64;
        let cutoff = nk / 3;
        let nx = spatial.n_nodes();
        let mut mask = vec![1.0; nx];
        for idx in 0..nx {
            let k = ops.kvec(idx);
            for a in 0..spatial.dim {
                if k[a].abs() > cutoff {
                    mask[idx] = 0.0;
                }
            }
        }
        NSFMSolver { ops, mask }
    }

    fn dealias(&self, spec: &mut [Complex64]) {
        for (z, m) in spec.iter_mut().zip(&self.mask) {
            *z *= m;
        }
    }

    fn rhs(&self, st: &NSFMState, cfg: &NSFMConfig) -> Result<Rhs> {
        let ops = &self.ops;
        let nx = ops.grid.n_nodes();
        let j = ohm_current(ops, &st.u, &st.n, &st.e, &st.b, cfg.sigma)?;
        // force on u: -(u.grad)u + (1/2)(n E + j x B)
        let mut force = [vec![0.0; nx], vec![0.0; nx], vec![0.0; nx]];
        let mut du = Vec::with_capacity(3);
        for c in 0..3 {
            du.push(gradient(ops, &st.u[c])?);
        }
        for x in 0..nx {
            let jxb = [
                j[1][x] * st.b[2][x] - j[2][x] * st.b[1][x],
                j[2][x] * st.b[0][x] - j[0][x] * st.b[2][x],
                j[0][x] * st.b[1][x] - j[1][x] * st.b[0][x],
            ];
            for c in 0..3 {
                let adv =
                    st.u[0][x] * du[c][0][x] + st.u[1][x] * du[c][1][x] + st.u[2][x] * du[c][2][x];
                force[c][x] = -adv + 0.5 * (st.n[x] * st.e[c][x] + jxb[c]);
            }
        }
        let mut fspec = [
            ops.forward(&force[0]),
            ops.forward(&force[1]),
            ops.forward(&force[2]),
        ];
        for c in 0..3 {
            self.dealias(&mut fspec[c]);
        }
        // pressure from the longitudinal part: p_hat = -i k.F / |k|^2
        let mut pspec = vec![Complex64::ZERO; nx];
        for idx in 0..nx {
            let kap = ops.kappa(idx);
            let k2 = kap[0] * kap[0] + kap[1] * kap[1] + kap[2] * kap[2];
            if k2 == 0.0 {
                continue;
            }
            let dot = fspec[0][idx] * kap[0] + fspec[1][idx] * kap[1] + fspec[2][idx] * kap[2];
            pspec[idx] = dot * Complex64::new(0.0, -1.0 / k2);
        }
        let p = ops.inverse_real(pspec);
        leray_project_spec(ops, &mut fspec);
        // theta tendency: -(u.grad) theta
        let gth = gradient(ops, &st.theta)?;
        let mut th = vec![0.0; nx];
        for x in 0..nx {
            th[x] = -(st.u[0][x] * gth[0][x] + st.u[1][x] * gth[1][x] + st.u[2][x] * gth[2][x]);
        }
        let mut ntheta = ops.forward(&th);
        self.dealias(&mut ntheta);
        // n tendency: -div j
        let divj = divergence(ops, &j)?;
        let nn = divj.iter().map(|d| -d).collect();
        Ok(Rhs {
            nu: fspec,
            ntheta,
            nn,
            j,
            p,
        })
    }

    /// exp(-c |kappa|^2 s) integrating factor applied in place.
    fn integrating_factor(&self, spec: &mut [Complex64], c: f64, s: f64) {
        for (idx, z) in spec.iter_mut().enumerate() {
            let kap = self.ops.kappa(idx);
            let k2 = kap[0] * kap[0] + kap[1] * kap[1] + kap[2] * kap[2];
            *z *= (-c * k2 * s).exp();
        }
    }

    pub fn step(&self, st: &NSFMState, cfg: &NSFMConfig) -> Result<NSFMState> {
        let ops = &self.ops;
        let nx = ops.grid.n_nodes();
        let dt = cfg.dt;
        let uspec: [Vec<Complex64>; 3] = [
            ops.forward(&st.u[0]),
            ops.forward(&st.u[1]),
            ops.forward(&st.u[2]),
        ];
        let thspec = ops.forward(&st.theta);
        // stage 1: half step to the midpoint
        let k1 = self.rhs(st, cfg)?;
        let mut mid = NSFMState::zeros(nx);
        mid.t = st.t + 0.5 * dt;
        for c in 0..3 {
            let mut s: Vec<Complex64> = uspec[c]
                .iter()
                .zip(&k1.nu[c])
                .map(|(a, b)| a + b * (0.5 * dt))
                .collect();
            self.integrating_factor(&mut s, cfg.mu, 0.5 * dt);
            mid.u[c] = ops.inverse_real(s);
        }
        {
            let mut s: Vec<Complex64> = thspec
                .iter()
                .zip(&k1.ntheta)
                .map(|(a, b)| a + b * (0.5 * dt))
                .collect();
            self.integrating_factor(&mut s, cfg.kappa, 0.5 * dt);
            mid.theta = ops.inverse_real(s);
        }
        for x in 0..nx {
            mid.n[x] = st.n[x] + 0.5 * dt * k1.nn[x];
        }
        let em_mid = maxwell_step(
            ops,
            &EMState {
                e: st.e.clone(),
                b: st.b.clone(),
                t: st.t,
            },
            &k1.j,
            0.5 * dt,
        )?;
        mid.e = em_mid.e;
        mid.b = em_mid.b;
        // stage 2: full step with the midpoint tendency
        let k2 = self.rhs(&mid, cfg)?;
        let mut out = NSFMState::zeros(nx);
        out.t = st.t + dt;
        for c in 0..3 {
            // IF-RK2: e^{-mu k^2 dt} u + dt e^{-mu k^2 dt/2} N(mid)
            let mut s = uspec[c].clone();
            let mut nmid = k2.nu[c].clone();
            self.integrating_factor(&mut s, cfg.mu, dt);
            self.integrating_factor(&mut nmid, cfg.mu, 0.5 * dt);
            for (z, nb) in s.iter_mut().zip(&nmid) {
                *z += nb * dt;
            }
            out.u[c] = ops.inverse_real(s);
        }
        {
            let mut s = thspec.clone();
            let mut nmid = k2.ntheta.clone();
            self.integrating_factor(&mut s, cfg.kappa, dt);
            self.integrating_factor(&mut nmid, cfg.kappa, 0.5 * dt);
            for (z, nb) in s.iter_mut().zip(&nmid) {
                *z += nb * dt;
            }
            out.theta = ops.inverse_real(s);
        }
        for x in 0..nx {
            out.n[x] = st.n[x] + dt * k2.nn[x];
        }
        // Maxwell full step from t with the midpoint current: the same j
        // feeds the n-equation, so div E - n is preserved per mode
        let em = maxwell_step(
            ops,
            &EMState {
                e: st.e.clone(),
                b: st.b.clone(),
                t: st.t,
            },
            &k2.j,
            dt,
        )?;
        out.e = em.e;
        out.b = em.b;
        out.u = leray_project(ops, &out.u)?;
        out.p = k2.p;
        out.j = ohm_current(ops, &out.u, &out.n, &out.e, &out.b, cfg.sigma)?;
        Ok(out)
    }

    /// Monotone energy and its dissipation rate (closed-form audit):
    /// H = (1/2)||u||^2 + (3/2)||theta||^2 + (1/4)(||E||^2 + ||B||^2)
    ///     + (1/8)||n||^2.
    pub fn energy(&self, st: &NSFMState, cfg: &NSFMConfig) -> Result<(f64, f64)> {
        let ops = &self.ops;
        let mut h = 0.0;
        for c in 0..3 {
            h += 0.5 * ops.l2_norm_sq(&st.u[c]);
            h += 0.25 * (ops.l2_norm_sq(&st.e[c]) + ops.l2_norm_sq(&st.b[c]));
        }
        h += 1.5 * ops.l2_norm_sq(&st.theta) + 0.125 * ops.l2_norm_sq(&st.n);
        let mut d = 0.0;
        for c in 0..3 {
            let g = gradient(ops, &st.u[c])?;
            for a in 0..3 {
                d += cfg.mu * ops.l2_norm_sq(&g[a]);
            }
        }
        let gth = gradient(ops, &st.theta)?;
        for a in 0..3 {
            d += 3.0 * cfg.kappa * ops.l2_norm_sq(&gth[a]);
        }
        let j = ohm_current(ops, &st.u, &st.n, &st.e, &st.b, cfg.sigma)?;
        let nx = ops.grid.n_nodes();
        let mut gsq = vec![0.0; nx];
        for c in 0..3 {
            for x in 0..nx {
                let g = j[c][x] - st.n[x] * st.u[c][x];
                gsq[x] += g * g;
            }
        }
        d += 0.5 / cfg.sigma * gsq.iter().sum::<f64>() * ops.grid.cell_volume();
        Ok((h, d))
    }

    pub fn run(&self, cfg: &NSFMConfig, mut init: NSFMState) -> Result<NSFMRun> {
        cfg.validate()?;
        if cfg.t_end < init.t {
            return Err(Error::Config(format!(
                "t_end = {} precedes initial time {}",
                cfg.t_end, init.t
            )));
        }
        init.j = ohm_current(&self.ops, &init.u, &init.n, &init.e, &init.b, cfg.sigma)?;
        let mut frames = vec![init.clone()];
        let (h0, d0) = self.energy(&init, cfg)?;
        let mut energy_series = vec![(init.t, h0, d0)];
        let mut state = init;
        let mut steps = 0usize;
        while state.t < cfg.t_end - 1e-12 * cfg.t_end.abs().max(1.0) {
            let next = self.step(&state, cfg)?;
            if !next.is_finite() {
                return Ok(NSFMRun {
                    frames,
                    energy_series,
                    status: NSFMStatus::AbortedNonFinite { t: next.t },
                });
            }
            let (h, d) = self.energy(&next, cfg)?;
            energy_series.push((next.t, h, d));
            state = next;
            steps += 1;
            if steps % cfg.frame_stride == 0 {
                frames.push(state.clone());
            }
        }
        if frames.last().map(|s| s.t) != Some(state.t) {
            frames.push(state.clone());
        }
        Ok(NSFMRun {
            frames,
            energy_series,
            status: NSFMStatus::Completed,
        })
    }
}
