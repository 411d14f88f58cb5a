//! Dense matrix realization of the two-species linearized collision operator
//!
//!   L± f = -M^{-1/2} { Q(M, sqrtM (f± + f∓)) + 2 Q(sqrtM f±, M) }
//!
//! on stacked [g+, g-] velocity DOFs, assembled through the equivalent
//! Dirichlet (weak) form
//!
//!   <L f, f> = (1/4) sum_{ij} int W M(v) M(u) [h_i + h_j* - h_i' - h_j*']^2,
//!   h_i = f_i / sqrtM,
//!
//! which is symmetric positive semidefinite by construction and avoids the
//! catastrophic M^{-1/2} amplification of interpolation error that a direct
//! strong-form assembly suffers at the far grid corners. Post-collision values
//! h' use plain trilinear interpolation of h (equivalently, Maxwellian-ratio
//! interpolation of sqrtM h). The discrete null space is then annihilated
//! exactly by a double-sided projection; coercivity is measured; shifted
//! factorizations are cached; "VMBL" is the binary on-disk cache format.

use std::cell::RefCell;
use std::collections::HashMap;
use std::io::{Read as _, Write as _};
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::grid::VelocityGrid;

use super::{trilinear_stencil, CollisionKernel, SphereQuadrature};

/// Default dense-assembly cap: velocity DOFs per species.
pub const DEFAULT_DOF_CAP: usize = 12 * 12 * 12;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct OperatorProvenance {
    pub points_per_axis: usize,
    pub v_max: f64,
    pub gamma: f64,
    pub angular_nodes: usize,
    pub angular_profile: super::AngularProfile,
}

enum Factor {
    Chol(Cholesky<f64, Dyn>),
    Lu(nalgebra::LU<f64, Dyn, Dyn>),
}

impl Factor {
    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match self {
            Factor::Chol(c) => c.solve(rhs),
            Factor::Lu(l) => l.solve(rhs).expect("factorized matrix is invertible"),
        }
    }
}

pub struct LinearizedOperator {
    /// Corrected + symmetrized matrix S, size 2*nv.
    pub matrix: DMatrix<f64>,
    /// Euclidean-orthonormal basis of the discrete null space (2*nv x 6).
    pub kernel_basis: DMatrix<f64>,
    /// Smallest nu-weighted Ritz value on ker-perp (measured).
    pub coercivity_delta: f64,
    /// ||L - L^T||_F / ||L||_F before symmetrization (discretization artifact).
    pub asymmetry: f64,
    pub provenance: OperatorProvenance,
    /// Factorization cache for (I + lambda S), keyed by lambda bits.
    shifted_cache: RefCell<HashMap<u64, Factor>>,
    /// Augmented Cholesky for the ker-perp pseudo-inverse.
    kerp_factor: RefCell<Option<Factor>>,
}

/// Raw (unnormalized) null-space vectors of the two-species operator:
/// [1,0] sqrtM, [0,1] sqrtM, [v_i, v_i] sqrtM, [|v|^2, |v|^2] sqrtM.
pub fn null_space_raw(grid: &VelocityGrid) -> Vec<Vec<f64>> {
    let nv = grid.n_nodes();
    let sm = &grid.sqrt_maxwellian;
    let mut basis = Vec::with_capacity(6);
    let mut chi = vec![0.0; 2 * nv];
    chi[..nv].copy_from_slice(sm);
    basis.push(chi);
    let mut chi = vec![0.0; 2 * nv];
    chi[nv..].copy_from_slice(sm);
    basis.push(chi);
    for a in 0..3 {
        let mut chi = vec![0.0; 2 * nv];
        for i in 0..nv {
            let x = grid.nodes[i][a] * sm[i];
            chi[i] = x;
            chi[nv + i] = x;
        }
        basis.push(chi);
    }
    let mut chi = vec![0.0; 2 * nv];
    for i in 0..nv {
        let v = grid.nodes[i];
        let x = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) * sm[i];
        chi[i] = x;
        chi[nv + i] = x;
    }
    basis.push(chi);
    basis
}

/// Euclidean-orthonormalized null-space basis (2*nv x 6), modified
/// Gram-Schmidt with re-orthogonalization.
pub fn orthonormal_kernel_basis(grid: &VelocityGrid) -> DMatrix<f64> {
    let raw = null_space_raw(grid);
    let n = raw[0].len();
    let mut u = DMatrix::<f64>::zeros(n, 6);
    for (j, chi) in raw.iter().enumerate() {
        let mut col = DVector::from_column_slice(chi);
        for _ in 0..2 {
            for k in 0..j {
                let prev = u.column(k);
                let d = prev.dot(&col);
                col -= d * DVector::from(prev);
            }
        }
        col /= col.norm();
        u.set_column(j, &col);
    }
    u
}

/// Apply the double-sided ker-perp projection P M P with P = I - U U^T.
fn project_double_sided(m: &DMatrix<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
    let ut_m = u.transpose() * m; // 6 x n
    let m1 = m - u * &ut_m;
    let m1_u = &m1 * u; // n x 6
    m1 - m1_u * u.transpose()
}

/// Assemble the dense linearized operator (with the default DOF cap).
pub fn assemble_linearized(
    kernel: &CollisionKernel,
    grid: &VelocityGrid,
) -> Result<LinearizedOperator> {
    assemble_linearized_with_cap(kernel, grid, DEFAULT_DOF_CAP)
}

pub fn assemble_linearized_with_cap(
    kernel: &CollisionKernel,
    grid: &VelocityGrid,
    dof_cap: usize,
) -> Result<LinearizedOperator> {
    kernel.require_cutoff()?;
    let nv = grid.n_nodes();
    if nv > dof_cap {
        return Err(Error::Resource(format!(
            "dense assembly capped at {dof_cap} velocity DOFs per species, grid has {nv}"
        )));
    }
    let sphere = SphereQuadrature::new(kernel.angular_nodes);
    let wu = grid.quad_weights[0];
    let sm = &grid.sqrt_maxwellian;
    let mm = &grid.maxwellian;

    // Dirichlet-form accumulators over (v, u, omega) triples. Write the
    // per-triple deficit for the species pair (i, j) as r = a + b with
    //   a = e_v / sM_v - sum_c s_c e_c / sM_c   (v-side, lives in species i)
    //   b = e_u / sM_u - sum_c s_c e_c / sM_c   (u-side, lives in species j)
    // Summing (w/4) M_v M_u r r^T over the four species pairs gives the block
    // structure [[2GA + 2GB + GC, GC], [GC, 2GA + 2GB + GC]] with
    // GA = sum (w/4) MM aa^T, GB likewise for b, GC = sum (w/4) MM (ab^T+ba^T).
    let mut ga = DMatrix::<f64>::zeros(nv, nv);
    let mut gb = DMatrix::<f64>::zeros(nv, nv);
    let mut gc = DMatrix::<f64>::zeros(nv, nv);
    let mut a_idx = [0usize; 9];
    let mut a_w = [0.0f64; 9];
    let mut b_idx = [0usize; 9];
    let mut b_w = [0.0f64; 9];
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
            for (om, &wo) in sphere.omegas.iter().zip(&sphere.weights) {
                let b = kernel
                    .angular_profile
                    .eval((rel[0] * om[0] + rel[1] * om[1] + rel[2] * om[2]) / rn);
                if b == 0.0 {
                    continue;
                }
                let w4 = 0.25 * wu * wo * speed * b * mm[vi] * mm[ui];
                let (vp, up) = super::post_collision_velocities(&v, &u, om);
                let st_v = trilinear_stencil(grid, &vp);
                let st_u = trilinear_stencil(grid, &up);
                let mut na = 1usize;
                a_idx[0] = vi;
                a_w[0] = 1.0 / sm[vi];
                for t in 0..st_v.nnz {
                    let c = st_v.idx[t] as usize;
                    a_idx[na] = c;
                    a_w[na] = -st_v.w[t] / sm[c];
                    na += 1;
                }
                let mut nb = 1usize;
                b_idx[0] = ui;
                b_w[0] = 1.0 / sm[ui];
                for t in 0..st_u.nnz {
                    let c = st_u.idx[t] as usize;
                    b_idx[nb] = c;
                    b_w[nb] = -st_u.w[t] / sm[c];
                    nb += 1;
                }
                for p in 0..na {
                    let wp = w4 * a_w[p];
                    let ip = a_idx[p];
                    for q in 0..na {
                        ga[(ip, a_idx[q])] += wp * a_w[q];
                    }
                    for q in 0..nb {
                        let val = wp * b_w[q];
                        let iq = b_idx[q];
                        gc[(ip, iq)] += val;
                        gc[(iq, ip)] += val;
                    }
                }
                for p in 0..nb {
                    let wp = w4 * b_w[p];
                    let ip = b_idx[p];
                    for q in 0..nb {
                        gb[(ip, b_idx[q])] += wp * b_w[q];
                    }
                }
            }
        }
    }

    let mut l = DMatrix::<f64>::zeros(2 * nv, 2 * nv);
    for i in 0..nv {
        for j in 0..nv {
            let diag = 2.0 * (ga[(i, j)] + gb[(i, j)]) + gc[(i, j)];
            let off = gc[(i, j)];
            l[(i, j)] = diag;
            l[(nv + i, nv + j)] = diag;
            l[(i, nv + j)] = off;
            l[(nv + i, j)] = off;
        }
    }

    let basis = orthonormal_kernel_basis(grid);
    // annihilate the discrete null space exactly on both sides; the projection
    // of a symmetric PSD matrix stays symmetric PSD
    let lc = project_double_sided(&l, &basis);
    let asym = (&lc - lc.transpose()).norm() / lc.norm().max(1e-300);
    let s = (&lc + lc.transpose()) * 0.5;

    let delta = measure_coercivity(&s, &basis, grid, kernel.gamma);

    Ok(LinearizedOperator {
        matrix: s,
        kernel_basis: basis,
        coercivity_delta: delta,
        asymmetry: asym,
        provenance: OperatorProvenance {
            points_per_axis: grid.points_per_axis,
            v_max: grid.v_max,
            gamma: kernel.gamma,
            angular_nodes: kernel.angular_nodes,
            angular_profile: kernel.angular_profile,
        },
        shifted_cache: RefCell::new(HashMap::new()),
        kerp_factor: RefCell::new(None),
    })
}

/// Smallest Ritz value of S restricted to ker-perp, in the nu-weighted metric
/// <g, diag(<v>^gamma) g> (the cutoff dissipation norm squared).
fn measure_coercivity(
    s: &DMatrix<f64>,
    basis: &DMatrix<f64>,
    grid: &VelocityGrid,
    gamma: f64,
) -> f64 {
    let nv = grid.n_nodes();
    let n = 2 * nv;
    // D = diag(<v>^gamma), stacked
    let mut d_half_inv = DVector::<f64>::zeros(n);
    for i in 0..nv {
        let w = grid.bracket_v[i].powf(gamma);
        let v = 1.0 / w.sqrt();
        d_half_inv[i] = v;
        d_half_inv[nv + i] = v;
    }
    // B = D^{-1/2} S D^{-1/2}
    let mut b = s.clone();
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] *= d_half_inv[i] * d_half_inv[j];
        }
    }
    // V = orth(D^{1/2} U); the constraint g ⊥ U becomes y ⊥ V after y = D^{1/2} g
    let mut v = DMatrix::<f64>::zeros(n, 6);
    for j in 0..6 {
        let mut col = DVector::<f64>::zeros(n);
        for i in 0..n {
            col[i] = basis[(i, j)] / d_half_inv[i];
        }
        for _ in 0..2 {
            for k in 0..j {
                let prev = v.column(k);
                let dd = prev.dot(&col);
                col -= dd * DVector::from(prev);
            }
        }
        col /= col.norm();
        v.set_column(j, &col);
    }
    let mut a = project_double_sided(&b, &v);
    let shift = 10.0 * (0..n).map(|i| b[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    a += shift * &v * v.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let eig = a.symmetric_eigenvalues();
    eig.iter().cloned().fold(f64::INFINITY, f64::min)
}

impl LinearizedOperator {
    pub fn dof(&self) -> usize {
        self.matrix.nrows()
    }

    /// Matrix-vector product L g on a stacked pair.
    pub fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        if g.len() != self.dof() {
            return Err(Error::Shape(format!(
                "operator has {} DOFs, input has {}",
                self.dof(),
                g.len()
            )));
        }
        let x = DVector::from_column_slice(g);
        Ok((&self.matrix * x).as_slice().to_vec())
    }

    /// Euclidean projection of a stacked pair onto ker-perp.
    pub fn project_kerp(&self, g: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(g);
        let coeffs = self.kernel_basis.transpose() * &x;
        (x - &self.kernel_basis * coeffs).as_slice().to_vec()
    }

    /// Solve (I + lambda S) x = rhs with a cached factorization.
    pub fn solve_shifted(&self, lambda: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        if !(lambda > 0.0) {
            return Err(Error::Config(format!("shift must be positive, got {lambda}")));
        }
        let key = lambda.to_bits();
        let mut cache = self.shifted_cache.borrow_mut();
        if !cache.contains_key(&key) {
            let n = self.dof();
            let mut a = &self.matrix * lambda;
            for i in 0..n {
                a[(i, i)] += 1.0;
            }
            let fac = match Cholesky::new(a.clone()) {
                Some(c) => Factor::Chol(c),
                None => Factor::Lu(a.lu()),
            };
            cache.insert(key, fac);
        }
        let rhs = DVector::from_column_slice(rhs);
        Ok(cache[&key].solve(&rhs).as_slice().to_vec())
    }

    /// Pseudo-inverse on ker-perp: returns Phi with S Phi = P h, Phi ⊥ N.
    /// `projected_input` flags inputs that were not within 1e-8 of ker-perp.
    pub fn kerp_solve(&self, h: &[f64]) -> Result<KerpSolution> {
        if h.len() != self.dof() {
            return Err(Error::Shape(format!(
                "operator has {} DOFs, input has {}",
                self.dof(),
                h.len()
            )));
        }
        let h_norm = h.iter().map(|x| x * x).sum::<f64>().sqrt();
        let ph = self.project_kerp(h);
        let kernel_part = {
            let mut s = 0.0;
            for (a, b) in h.iter().zip(&ph) {
                let d = a - b;
                s += d * d;
            }
            s.sqrt()
        };
        let projected_input = kernel_part > 1e-8 * h_norm.max(1e-300);
        if self.coercivity_delta <= 1e-12 {
            return Err(Error::Solve(format!(
                "measured coercivity {} too small for a ker-perp solve",
                self.coercivity_delta
            )));
        }
        // augmented SPD system: (S + c U U^T) Phi = P h has the same solution
        // on ker-perp and is uniquely solvable
        {
            let mut guard = self.kerp_factor.borrow_mut();
            if guard.is_none() {
                let n = self.dof();
                let c = self.matrix.trace() / n as f64;
                let c = if c > 0.0 { c } else { 1.0 };
                let a = &self.matrix + c * &self.kernel_basis * self.kernel_basis.transpose();
                let fac = match Cholesky::new(a.clone()) {
                    Some(ch) => Factor::Chol(ch),
                    None => Factor::Lu(a.lu()),
                };
                *guard = Some(fac);
            }
        }
        let rhs = DVector::from_column_slice(&ph);
        let guard = self.kerp_factor.borrow();
        let factor = guard.as_ref().unwrap();
        let mut phi = self.project_kerp(factor.solve(&rhs).as_slice());
        // iterative refinement: near-singular operators (tiny coercivity on
        // coarse grids) leave a large residual after a single backsolve
        let mut best_phi = phi.clone();
        let mut residual = f64::INFINITY;
        for _ in 0..20 {
            let s_phi = self.apply(&phi)?;
            let mut r = vec![0.0; ph.len()];
            let mut res = 0.0;
            for i in 0..ph.len() {
                r[i] = ph[i] - s_phi[i];
                res += r[i] * r[i];
            }
            let res = res.sqrt();
            if res < residual {
                residual = res;
                best_phi.copy_from_slice(&phi);
            } else {
                break;
            }
            if residual <= 1e-10 * h_norm.max(1e-300) {
                break;
            }
            let dr = DVector::from_column_slice(&r);
            let dphi = self.project_kerp(factor.solve(&dr).as_slice());
            for (p, d) in phi.iter_mut().zip(&dphi) {
                *p += d;
            }
        }
        let phi = best_phi;
        if residual > 1e-8 * h_norm.max(1e-300) {
            return Err(Error::Solve(format!(
                "ker-perp solve residual {residual:.3e} exceeds 1e-8 * ||h|| = {:.3e}",
                1e-8 * h_norm
            )));
        }
        Ok(KerpSolution {
            phi,
            projected_input,
            residual,
        })
    }

    /// Operator with the kernel magnitude scaled by `factor` (b -> factor*b):
    /// the assembly is linear in b, so the matrix scales linearly.
    pub fn scaled(&self, factor: f64) -> LinearizedOperator {
        LinearizedOperator {
            matrix: &self.matrix * factor,
            kernel_basis: self.kernel_basis.clone(),
            coercivity_delta: self.coercivity_delta * factor,
            asymmetry: self.asymmetry,
            provenance: self.provenance.clone(),
            shifted_cache: RefCell::new(HashMap::new()),
            kerp_factor: RefCell::new(None),
        }
    }

    /// Serialize to the "VMBL" binary cache format (row-major f64 LE payload).
    pub fn save(&self, path: &Path) -> Result<()> {
        let n = self.dof();
        let mut buf: Vec<u8> = Vec::with_capacity(64 + 8 * n * n);
        buf.extend_from_slice(b"VMBL");
        buf.extend_from_slice(&1u32.to_le_bytes());
        buf.extend_from_slice(&(n as u32).to_le_bytes());
        buf.extend_from_slice(&self.provenance.gamma.to_le_bytes());
        buf.extend_from_slice(&(self.provenance.points_per_axis as u32).to_le_bytes());
        buf.extend_from_slice(&self.provenance.v_max.to_le_bytes());
        buf.extend_from_slice(&(self.provenance.angular_nodes as u32).to_le_bytes());
        let profile: u8 = match self.provenance.angular_profile {
            super::AngularProfile::AbsCos => 0,
            super::AngularProfile::Constant => 1,
        };
        buf.push(profile);
        buf.extend_from_slice(&self.asymmetry.to_le_bytes());
        buf.extend_from_slice(&self.coercivity_delta.to_le_bytes());
        for i in 0..n {
            for j in 0..n {
                buf.extend_from_slice(&self.matrix[(i, j)].to_le_bytes());
            }
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    /// Load a cached operator; the grid must match the recorded parameters.
    pub fn load(path: &Path, grid: &VelocityGrid) -> Result<LinearizedOperator> {
        let mut data = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut data)?;
        let mut off = 0usize;
        let take = |data: &[u8], off: &mut usize, n: usize| -> Result<Vec<u8>> {
            if *off + n > data.len() {
                return Err(Error::Format("truncated operator cache".into()));
            }
            let s = data[*off..*off + n].to_vec();
            *off += n;
            Ok(s)
        };
        let magic = take(&data, &mut off, 4)?;
        if magic != b"VMBL" {
            return Err(Error::Format("bad magic, expected VMBL".into()));
        }
        let ver = u32::from_le_bytes(take(&data, &mut off, 4)?.try_into().unwrap());
        if ver != 1 {
            return Err(Error::Format(format!("unsupported cache version {ver}")));
        }
        let n = u32::from_le_bytes(take(&data, &mut off, 4)?.try_into().unwrap()) as usize;
        let gamma = f64::from_le_bytes(take(&data, &mut off, 8)?.try_into().unwrap());
        let ppa = u32::from_le_bytes(take(&data, &mut off, 4)?.try_into().unwrap()) as usize;
        let v_max = f64::from_le_bytes(take(&data, &mut off, 8)?.try_into().unwrap());
        let ang = u32::from_le_bytes(take(&data, &mut off, 4)?.try_into().unwrap()) as usize;
        let prof = take(&data, &mut off, 1)?[0];
        let asym = f64::from_le_bytes(take(&data, &mut off, 8)?.try_into().unwrap());
        let delta = f64::from_le_bytes(take(&data, &mut off, 8)?.try_into().unwrap());
        if ppa != grid.points_per_axis || (v_max - grid.v_max).abs() > 1e-12 {
            return Err(Error::Format(format!(
                "cache grid ({ppa}, {v_max}) does not match ({}, {})",
                grid.points_per_axis, grid.v_max
            )));
        }
        if n != 2 * grid.n_nodes() {
            return Err(Error::Format("cache DOF count does not match grid".into()));
        }
        let payload = take(&data, &mut off, 8 * n * n)?;
        let mut matrix = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let k = 8 * (i * n + j);
                matrix[(i, j)] =
                    f64::from_le_bytes(payload[k..k + 8].try_into().unwrap());
            }
        }
        Ok(LinearizedOperator {
            matrix,
            kernel_basis: orthonormal_kernel_basis(grid),
            coercivity_delta: delta,
            asymmetry: asym,
            provenance: OperatorProvenance {
                points_per_axis: ppa,
                v_max,
                gamma,
                angular_nodes: ang,
                angular_profile: if prof == 0 {
                    super::AngularProfile::AbsCos
                } else {
                    super::AngularProfile::Constant
                },
            },
            shifted_cache: RefCell::new(HashMap::new()),
            kerp_factor: RefCell::new(None),
        })
    }
}

pub struct KerpSolution {
    pub phi: Vec<f64>,
    pub projected_input: bool,
    pub residual: f64,
}
