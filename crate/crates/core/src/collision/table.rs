//! Precomputed quadrature geometry for the bilinear operator: the stencils of
//! v', u' and the kernel weight for every (v, u, omega) triple, plus the
//! kernel-integrated loss matrix. Built once per (kernel, grid) and reused
//! across spatial nodes and time steps, with all spatial columns processed in
//! one pass (x-contiguous layout: value(v, x) = data[v*nx + x]).

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::grid::VelocityGrid;

use crate::grid::maxwellian;

use super::{
    invariant_weights, post_collision_velocities, CollisionKernel,
    SphereQuadrature,
};

/// Gain entry: output row v, weight, and the two stencils in compressed form
/// (extended-grid base index + fractional offsets; corners clipped on decode).
/// The weight carries the analytic factor M(v')M(u') of the Maxwellian-ratio
/// interpolation (see [`super::interp_stencil`]); decode divides each corner
/// by its node Maxwellian. Fractions are stored as f32: the ~1e-8 geometry
/// jitter is far below the quadrature error and halves the table footprint.
#[derive(Clone, Copy)]
struct GainEntry {
    v: u32,
    base_v: u32,
    base_u: u32,
    w: f64,
    frac_v: [f32; 3],
    frac_u: [f32; 3],
}

/// Decoded stencil: up to 8 (row index, weight) pairs.
struct Decoded {
    nnz: usize,
    idx: [usize; 8],
    w: [f64; 8],
}

fn encode_base(p: &[f64; 3], grid: &VelocityGrid) -> Option<(u32, [f32; 3])> {
    let n = grid.points_per_axis as i64;
    let h = grid.spacing;
    let mut base = 0i64;
    let mut frac = [0.0f32; 3];
    for a in 0..3 {
        let t = (p[a] + grid.v_max) / h - 0.5;
        let i0 = t.floor();
        let i = i0 as i64;
        // representable range on the extended grid: [-1, n-1]
        if i < -1 || i > n - 1 {
            return None;
        }
        frac[a] = (t - i0) as f32;
        base = base * (n + 2) + (i + 1);
    }
    Some((base as u32, frac))
}

fn decode(base: u32, frac: &[f32; 3], n: usize, inv_m: &[f64]) -> Decoded {
    let ext = (n + 2) as u32;
    let k0 = base % ext;
    let j0 = (base / ext) % ext;
    let i0 = base / (ext * ext);
    let comp = [i0 as i64 - 1, j0 as i64 - 1, k0 as i64 - 1];
    let f = [frac[0] as f64, frac[1] as f64, frac[2] as f64];
    let mut d = Decoded {
        nnz: 0,
        idx: [0; 8],
        w: [0.0; 8],
    };
    let nn = n as i64;
    for c in 0..8usize {
        let mut idx = 0i64;
        let mut w = 1.0;
        let mut ok = true;
        for a in 0..3 {
            let bit = ((c >> a) & 1) as i64;
            let i = comp[a] + bit;
            if i < 0 || i >= nn {
                ok = false;
                break;
            }
            w *= if bit == 1 { f[a] } else { 1.0 - f[a] };
            idx = idx * nn + i;
        }
        if ok && w != 0.0 {
            d.idx[d.nnz] = idx as usize;
            d.w[d.nnz] = w * inv_m[idx as usize];
            d.nnz += 1;
        }
    }
    d
}

pub struct CollisionTable {
    pub nv: usize,
    entries: Vec<GainEntry>,
    /// Kernel-integrated loss weights, row-major nv x nv:
    /// loss[v,u] = w_u * |v-u|^gamma * int b domega.
    loss: Vec<f64>,
    /// Conservative-correction plumbing: invariant weights c_k, directions
    /// c_k * M, and the factorized 5x5 Gram matrix.
    inv_weights: Vec<Vec<f64>>,
    inv_dirs: Vec<Vec<f64>>,
    gram_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    quad_w: f64,
    /// 1/M at the grid nodes (Maxwellian-ratio interpolation on decode).
    inv_m: Vec<f64>,
}

impl CollisionTable {
    pub fn build(kernel: &CollisionKernel, grid: &VelocityGrid) -> Result<Self> {
        kernel.require_cutoff()?;
        let nv = grid.n_nodes();
        let sphere = SphereQuadrature::new(kernel.angular_nodes);
        let wu = grid.quad_weights[0];
        let mut entries = Vec::new();
        let mut loss = vec![0.0; nv * nv];
        for vi in 0..nv {
            let v = grid.nodes[vi];
            for ui in 0..nv {
                if ui == vi {
                    continue;
                }
                let u = grid.nodes[ui];
                let rel = [v[0] - u[0], v[1] - u[1], v[2] - u[2]];
                let rn = (rel[0] * rel[0] + rel[1] * rel[1] + rel[2] * rel[2]).sqrt();
                let speed = rn.powf(kernel.gamma);
                let mut bsum = 0.0;
                for (om, &wo) in sphere.omegas.iter().zip(&sphere.weights) {
                    let b = kernel
                        .angular_profile
                        .eval((rel[0] * om[0] + rel[1] * om[1] + rel[2] * om[2]) / rn);
                    bsum += wo * b;
                    if b == 0.0 {
                        continue;
                    }
                    let (vp, up) = post_collision_velocities(&v, &u, om);
                    if let (Some((bv, fv)), Some((bu, fu))) =
                        (encode_base(&vp, grid), encode_base(&up, grid))
                    {
                        // only keep triples whose stencils can touch the cube;
                        // the weight absorbs the analytic M(v')M(u') factor
                        entries.push(GainEntry {
                            v: vi as u32,
                            base_v: bv,
                            base_u: bu,
                            w: wu * wo * speed * b * maxwellian(&vp) * maxwellian(&up),
                            frac_v: fv,
                            frac_u: fu,
                        });
                    }
                }
                loss[vi * nv + ui] = wu * speed * bsum;
            }
        }
        let inv_weights: Vec<Vec<f64>> = invariant_weights(grid).into_iter().collect();
        let inv_dirs: Vec<Vec<f64>> = inv_weights
            .iter()
            .map(|c| {
                c.iter()
                    .zip(&grid.maxwellian)
                    .map(|(a, b)| a * b)
                    .collect()
            })
            .collect();
        let mut gram = DMatrix::<f64>::zeros(5, 5);
        for j in 0..5 {
            for k in 0..5 {
                gram[(j, k)] = grid.inner(&inv_weights[j], &inv_dirs[k]);
            }
        }
        Ok(CollisionTable {
            nv,
            entries,
            loss,
            inv_weights,
            inv_dirs,
            gram_lu: gram.lu(),
            quad_w: wu,
            inv_m: grid.maxwellian.iter().map(|m| 1.0 / m).collect(),
        })
    }

    pub fn n_entries(&self) -> usize {
        self.entries.len()
    }

    /// Q(F, G) for `nx` spatial columns at once; layouts are v-major
    /// (value(v, x) = data[v*nx + x]).
    pub fn q_bilinear_multi(&self, f: &[f64], g: &[f64], nx: usize, n: usize) -> Vec<f64> {
        let nv = self.nv;
        debug_assert_eq!(f.len(), nv * nx);
        debug_assert_eq!(g.len(), nv * nx);
        let mut out = vec![0.0; nv * nx];
        let mut tf = vec![0.0; nx];
        let mut tg = vec![0.0; nx];
        for e in &self.entries {
            let sv = decode(e.base_v, &e.frac_v, n, &self.inv_m);
            if sv.nnz == 0 {
                continue;
            }
            let su = decode(e.base_u, &e.frac_u, n, &self.inv_m);
            if su.nnz == 0 {
                continue;
            }
            // tf = interpolated F(v'), tg = interpolated G(u'), per column
            {
                let row = &f[sv.idx[0] * nx..sv.idx[0] * nx + nx];
                let w0 = sv.w[0];
                for x in 0..nx {
                    tf[x] = w0 * row[x];
                }
                for t in 1..sv.nnz {
                    let row = &f[sv.idx[t] * nx..sv.idx[t] * nx + nx];
                    let wt = sv.w[t];
                    for x in 0..nx {
                        tf[x] += wt * row[x];
                    }
                }
            }
            {
                let row = &g[su.idx[0] * nx..su.idx[0] * nx + nx];
                let w0 = su.w[0];
                for x in 0..nx {
                    tg[x] = w0 * row[x];
                }
                for t in 1..su.nnz {
                    let row = &g[su.idx[t] * nx..su.idx[t] * nx + nx];
                    let wt = su.w[t];
                    for x in 0..nx {
                        tg[x] += wt * row[x];
                    }
                }
            }
            let w = e.w;
            let orow = &mut out[e.v as usize * nx..e.v as usize * nx + nx];
            for x in 0..nx {
                orow[x] += w * tf[x] * tg[x];
            }
        }
        // loss: out[v] -= F[v] * (loss_row(v) . G)
        let mut conv = vec![0.0; nx];
        for vi in 0..nv {
            for c in conv.iter_mut() {
                *c = 0.0;
            }
            let lrow = &self.loss[vi * nv..vi * nv + nv];
            for ui in 0..nv {
                let l = lrow[ui];
                if l == 0.0 {
                    continue;
                }
                let grow = &g[ui * nx..ui * nx + nx];
                for x in 0..nx {
                    conv[x] += l * grow[x];
                }
            }
            let frow = &f[vi * nx..vi * nx + nx];
            let orow = &mut out[vi * nx..vi * nx + nx];
            for x in 0..nx {
                orow[x] -= frow[x] * conv[x];
            }
        }
        out
    }

    /// Conservative correction applied independently to every spatial column.
    /// Two sweeps, matching [`super::conservative_correction`]: the second
    /// removes the solve residue so the moments sit at rounding level.
    pub fn conservative_correction_multi(&self, q: &mut [f64], nx: usize) {
        let nv = self.nv;
        let mut m = vec![0.0; 5 * nx];
        let mut comp = vec![0.0; nx];
        let mut lam = vec![0.0; 5 * nx];
        let mut rhs = DVector::<f64>::zeros(5);
        for _ in 0..2 {
            // moments m[j][x], Neumaier-compensated like VelocityGrid::inner
            m.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..5 {
                let cj = &self.inv_weights[j];
                let mrow = &mut m[j * nx..j * nx + nx];
                comp.iter_mut().for_each(|v| *v = 0.0);
                for vi in 0..nv {
                    let c = cj[vi] * self.quad_w;
                    let qrow = &q[vi * nx..vi * nx + nx];
                    for x in 0..nx {
                        let t = c * qrow[x];
                        let s = mrow[x] + t;
                        comp[x] += if mrow[x].abs() >= t.abs() {
                            (mrow[x] - s) + t
                        } else {
                            (t - s) + mrow[x]
                        };
                        mrow[x] = s;
                    }
                }
                for x in 0..nx {
                    mrow[x] += comp[x];
                }
            }
            // solve the 5x5 Gram system per column
            for x in 0..nx {
                for j in 0..5 {
                    rhs[j] = m[j * nx + x];
                }
                let sol = self.gram_lu.solve(&rhs).expect("Gram matrix nonsingular");
                for j in 0..5 {
                    lam[j * nx + x] = sol[j];
                }
            }
            for k in 0..5 {
                let dk = &self.inv_dirs[k];
                let lrow = &lam[k * nx..k * nx + nx];
                for vi in 0..nv {
                    let d = dk[vi];
                    if d == 0.0 {
                        continue;
                    }
                    let qrow = &mut q[vi * nx..vi * nx + nx];
                    for x in 0..nx {
                        qrow[x] -= lrow[x] * d;
                    }
                }
            }
        }
    }

    /// Two-species nonlinear term for all spatial columns:
    /// T± = M^{-1/2} corrected( Q(sqrtM f±, sqrtM (f+ + f-)) ).
    pub fn nonlinear_t_multi(
        &self,
        f_plus: &[f64],
        f_minus: &[f64],
        grid: &VelocityGrid,
        nx: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let nv = self.nv;
        let n = grid.points_per_axis;
        let sm = &grid.sqrt_maxwellian;
        let mut cap_p = vec![0.0; nv * nx];
        let mut cap_m = vec![0.0; nv * nx];
        let mut g_tot = vec![0.0; nv * nx];
        for vi in 0..nv {
            let s = sm[vi];
            let fp = &f_plus[vi * nx..vi * nx + nx];
            let fm = &f_minus[vi * nx..vi * nx + nx];
            let cp = &mut cap_p[vi * nx..vi * nx + nx];
            let cm = &mut cap_m[vi * nx..vi * nx + nx];
            let gt = &mut g_tot[vi * nx..vi * nx + nx];
            for x in 0..nx {
                cp[x] = s * fp[x];
                cm[x] = s * fm[x];
                gt[x] = cp[x] + cm[x];
            }
        }
        let mut qp = self.q_bilinear_multi(&cap_p, &g_tot, nx, n);
        let mut qm = self.q_bilinear_multi(&cap_m, &g_tot, nx, n);
        self.conservative_correction_multi(&mut qp, nx);
        self.conservative_correction_multi(&mut qm, nx);
        for vi in 0..nv {
            let inv_s = 1.0 / sm[vi];
            for x in 0..nx {
                qp[vi * nx + x] *= inv_s;
                qm[vi * nx + x] *= inv_s;
            }
        }
        (qp, qm)
    }
}
