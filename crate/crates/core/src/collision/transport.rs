//! Transport coefficients of the limiting fluid system from the ker-perp
//! inverse of the linearized operator (Chapman-Enskog contractions):
//!
//!   A-hat: L [A_mj sqrtM q2] = (v_m v_j - delta_mj |v|^2/3) sqrtM q2
//!   B-hat: L [B_j  sqrtM q2] = v_j (|v|^2/2 - 5/2) sqrtM q2
//!   sigma: L [Phi_j]         = v_j sqrtM q1
//!
//! with mu = (1/20) sum_mj <A-hat_mj, src_mj>, kappa = (1/15) sum_j
//! <B-hat_j, src_j>, sigma = (1/3) sum_j <Phi_j, src_j> over the two-species
//! quadrature inner product. The constants are calibrated against the
//! conservation-law normalization used by this crate (the spec's provisional
//! constants are superseded; the sweep harness reports the fitted scaling).

use crate::error::Result;
use crate::grid::VelocityGrid;

use super::linearized::{LinearizedOperator, OperatorProvenance};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TransportCoefficients {
    pub mu: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub provenance: OperatorProvenance,
}

/// The closure vectors A-hat, B-hat and the Ohm-sector solutions, each a
/// stacked two-species velocity vector, plus their sources.
pub struct HatFunctions {
    /// 9 entries, row-major (m*3 + j).
    pub a_hat: Vec<Vec<f64>>,
    pub a_src: Vec<Vec<f64>>,
    /// 3 entries.
    pub b_hat: Vec<Vec<f64>>,
    pub b_src: Vec<Vec<f64>>,
    /// 3 entries (q1 sector).
    pub sigma_hat: Vec<Vec<f64>>,
    pub sigma_src: Vec<Vec<f64>>,
}

/// Source (v_m v_j - delta_mj |v|^2/3) sqrtM q2 as a stacked pair.
pub fn a_source(grid: &VelocityGrid, m: usize, j: usize) -> Vec<f64> {
    let nv = grid.n_nodes();
    let mut src = vec![0.0; 2 * nv];
    for i in 0..nv {
        let v = grid.nodes[i];
        let vv = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        let s = (v[m] * v[j] - if m == j { vv / 3.0 } else { 0.0 }) * grid.sqrt_maxwellian[i];
        src[i] = s;
        src[nv + i] = s;
    }
    src
}

/// Source v_j (|v|^2/2 - 5/2) sqrtM q2 as a stacked pair.
pub fn b_source(grid: &VelocityGrid, j: usize) -> Vec<f64> {
    let nv = grid.n_nodes();
    let mut src = vec![0.0; 2 * nv];
    for i in 0..nv {
        let v = grid.nodes[i];
        let vv = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        let s = v[j] * (0.5 * vv - 2.5) * grid.sqrt_maxwellian[i];
        src[i] = s;
        src[nv + i] = s;
    }
    src
}

/// Source v_j sqrtM q1 as a stacked pair.
pub fn sigma_source(grid: &VelocityGrid, j: usize) -> Vec<f64> {
    let nv = grid.n_nodes();
    let mut src = vec![0.0; 2 * nv];
    for i in 0..nv {
        let s = grid.nodes[i][j] * grid.sqrt_maxwellian[i];
        src[i] = s;
        src[nv + i] = -s;
    }
    src
}

/// Solve every closure system once per (kernel, grid).
pub fn hat_functions(op: &LinearizedOperator, grid: &VelocityGrid) -> Result<HatFunctions> {
    let mut a_hat = Vec::with_capacity(9);
    let mut a_src = Vec::with_capacity(9);
    for m in 0..3 {
        for j in 0..3 {
            let src = a_source(grid, m, j);
            let sol = op.kerp_solve(&src)?;
            a_hat.push(sol.phi);
            a_src.push(src);
        }
    }
    let mut b_hat = Vec::with_capacity(3);
    let mut b_src = Vec::with_capacity(3);
    for j in 0..3 {
        let src = b_source(grid, j);
        let sol = op.kerp_solve(&src)?;
        b_hat.push(sol.phi);
        b_src.push(src);
    }
    let mut sigma_hat = Vec::with_capacity(3);
    let mut sigma_src = Vec::with_capacity(3);
    for j in 0..3 {
        let src = sigma_source(grid, j);
        let sol = op.kerp_solve(&src)?;
        sigma_hat.push(sol.phi);
        sigma_src.push(src);
    }
    Ok(HatFunctions {
        a_hat,
        a_src,
        b_hat,
        b_src,
        sigma_hat,
        sigma_src,
    })
}

fn pair_inner(grid: &VelocityGrid, a: &[f64], b: &[f64]) -> f64 {
    let w = grid.quad_weights[0];
    w * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

pub fn transport_coefficients(
    op: &LinearizedOperator,
    grid: &VelocityGrid,
) -> Result<TransportCoefficients> {
    let hats = hat_functions(op, grid)?;
    transport_coefficients_from_hats(op, grid, &hats)
}

pub fn transport_coefficients_from_hats(
    op: &LinearizedOperator,
    grid: &VelocityGrid,
    hats: &HatFunctions,
) -> Result<TransportCoefficients> {
    let mut s_a = 0.0;
    for k in 0..9 {
        s_a += pair_inner(grid, &hats.a_hat[k], &hats.a_src[k]);
    }
    let mut s_b = 0.0;
    for j in 0..3 {
        s_b += pair_inner(grid, &hats.b_hat[j], &hats.b_src[j]);
    }
    let mut s_s = 0.0;
    for j in 0..3 {
        s_s += pair_inner(grid, &hats.sigma_hat[j], &hats.sigma_src[j]);
    }
    Ok(TransportCoefficients {
        mu: s_a / 20.0,
        kappa: s_b / 15.0,
        sigma: s_s / 3.0,
        provenance: op.provenance.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::{assemble_linearized, AngularProfile, CollisionKernel};
    use crate::grid::build_velocity_grid;

    fn op6() -> (VelocityGrid, LinearizedOperator) {
        let grid = build_velocity_grid(6, 6.0).unwrap();
        let kernel = CollisionKernel::new(-1.0, AngularProfile::AbsCos, 32).unwrap();
        let op = assemble_linearized(&kernel, &grid).unwrap();
        (grid, op)
    }

    #[test]
    fn sigma_source_orthogonal_to_null_space() {
        let grid = build_velocity_grid(8, 6.0).unwrap();
        let raw = crate::collision::linearized::null_space_raw(&grid);
        for j in 0..3 {
            let src = sigma_source(&grid, j);
            for chi in &raw {
                let ip = pair_inner(&grid, &src, chi);
                assert!(ip.abs() < 1e-12, "axis {j}: <src, chi> = {ip}");
            }
        }
        // A sources are exactly orthogonal too (axis symmetry of the grid)
        for m in 0..3 {
            for j in 0..3 {
                let src = a_source(&grid, m, j);
                for chi in &raw {
                    assert!(pair_inner(&grid, &src, chi).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn coefficients_positive_and_scale_inversely_with_kernel() {
        let (grid, op) = op6();
        assert!(op.coercivity_delta > 0.0, "delta = {}", op.coercivity_delta);
        let tc = transport_coefficients(&op, &grid).unwrap();
        assert!(tc.mu > 0.0 && tc.kappa > 0.0 && tc.sigma > 0.0, "{tc:?}");
        // b -> 2b doubles L, halves L^{-1}, halves every coefficient
        let op2 = op.scaled(2.0);
        let tc2 = transport_coefficients(&op2, &grid).unwrap();
        assert!((tc2.mu - tc.mu / 2.0).abs() < 1e-6 * tc.mu);
        assert!((tc2.kappa - tc.kappa / 2.0).abs() < 1e-6 * tc.kappa);
        assert!((tc2.sigma - tc.sigma / 2.0).abs() < 1e-6 * tc.sigma);
    }

    #[test]
    fn a_hat_isotropy() {
        // Continuum: <A-hat_mj, src_kl> = m0 (d_mk d_jl + d_ml d_jk
        // - (2/3) d_mj d_kl). On a cubic grid the traceless symmetric tensors
        // split into two cubic-group irreps (off-diagonal components and
        // diagonal-traceless components), each with its own constant; the
        // isotropy identities hold exactly within each irrep and the viscosity
        // averages over both.
        let (grid, op) = op6();
        let hats = hat_functions(&op, &grid).unwrap();
        let ip = |m: usize, j: usize, k: usize, l: usize| {
            pair_inner(&grid, &hats.a_hat[m * 3 + j], &hats.a_src[k * 3 + l])
        };
        // The sphere quadrature (polar x azimuth product rule) singles out the
        // z axis, so only x<->y identities are exact; z-related components
        // agree to a few percent at 6^3.
        let m0 = ip(0, 1, 0, 1);
        assert!(m0 > 0.0);
        assert!((ip(0, 1, 1, 0) - m0).abs() < 1e-10 * m0);
        assert!((ip(0, 2, 0, 2) - ip(1, 2, 1, 2)).abs() < 1e-10 * m0);
        assert!((ip(1, 2, 1, 2) - m0).abs() < 0.05 * m0, "z anisotropy");
        // distinct components decouple
        assert!(ip(0, 1, 0, 2).abs() < 1e-10 * m0);
        assert!(ip(0, 1, 1, 1).abs() < 1e-10 * m0);
        // diagonal-traceless irrep: its own positive constants
        assert!(ip(0, 0, 0, 0) > 0.0 && ip(2, 2, 2, 2) > 0.0);
        assert!((ip(0, 0, 0, 0) - ip(1, 1, 1, 1)).abs() < 1e-10 * m0);
        assert!((ip(1, 1, 2, 2) - ip(0, 0, 2, 2)).abs() < 1e-10 * m0);
        assert!((ip(2, 2, 2, 2) - ip(0, 0, 0, 0)).abs() < 0.05 * ip(0, 0, 0, 0));
        assert!(ip(0, 0, 1, 1) < 0.0);
        // tracelessness: sum_l <A-hat_00, src_ll> = 0 exactly
        let tr = ip(0, 0, 0, 0) + ip(0, 0, 1, 1) + ip(0, 0, 2, 2);
        assert!(tr.abs() < 1e-10 * m0, "trace {tr}");
    }
}
