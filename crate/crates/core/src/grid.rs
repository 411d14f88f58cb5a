//! Phase-space discretization: truncated uniform velocity grid with midpoint
//! quadrature and Maxwellian caches, periodic spatial grid metadata, and the
//! finite-difference velocity derivatives.

use crate::error::{Error, Result};

/// Multi-index over (up to) three axes; entry = derivative order on that axis.
pub type MultiIndex = [usize; 3];

pub fn multi_index_order(m: &MultiIndex) -> usize {
    m[0] + m[1] + m[2]
}

/// Enumerate all multi-indices over `dim` axes with |alpha| <= max_order.
pub fn multi_indices_up_to(dim: usize, max_order: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let cap = |a: usize| if a < dim { max_order } else { 0 };
    for i in 0..=cap(0) {
        for j in 0..=cap(1) {
            for k in 0..=cap(2) {
                if i + j + k <= max_order {
                    out.push([i, j, k]);
                }
            }
        }
    }
    out
}

/// Cell-centered uniform velocity grid on [-v_max, v_max]^3.
///
/// Node layout is row-major over (i0, i1, i2) with i0 slowest. The node set is
/// closed under v -> -v, so odd moments cancel exactly.
#[derive(Debug, Clone)]
pub struct VelocityGrid {
    pub points_per_axis: usize,
    pub v_max: f64,
    pub spacing: f64,
    pub nodes: Vec<[f64; 3]>,
    /// Midpoint-rule quadrature weights (uniform = spacing^3).
    pub quad_weights: Vec<f64>,
    /// M(v) = (2 pi)^{-3/2} exp(-|v|^2/2) at each node.
    pub maxwellian: Vec<f64>,
    pub sqrt_maxwellian: Vec<f64>,
    /// <v> = sqrt(1 + |v|^2) at each node.
    pub bracket_v: Vec<f64>,
}

pub fn maxwellian(v: &[f64; 3]) -> f64 {
    let s = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    (2.0 * std::f64::consts::PI).powf(-1.5) * (-0.5 * s).exp()
}

pub fn build_velocity_grid(points_per_axis: usize, v_max: f64) -> Result<VelocityGrid> {
    if points_per_axis < 4 || points_per_axis % 2 != 0 {
        return Err(Error::Config(format!(
            "points_per_axis must be even and >= 4 (cell-centered grid must be closed under v -> -v), got {points_per_axis}"
        )));
    }
    if !(v_max > 0.0) {
        return Err(Error::Config(format!("v_max must be positive, got {v_max}")));
    }
    let n = points_per_axis;
    let spacing = 2.0 * v_max / n as f64;
    let axis: Vec<f64> = (0..n).map(|i| -v_max + (i as f64 + 0.5) * spacing).collect();
    let n_nodes = n * n * n;
    let mut nodes = Vec::with_capacity(n_nodes);
    let mut mw = Vec::with_capacity(n_nodes);
    let mut smw = Vec::with_capacity(n_nodes);
    let mut bv = Vec::with_capacity(n_nodes);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = [axis[i], axis[j], axis[k]];
                let m = maxwellian(&v);
                nodes.push(v);
                mw.push(m);
                smw.push(m.sqrt());
                bv.push((1.0 + v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt());
            }
        }
    }
    Ok(VelocityGrid {
        points_per_axis,
        v_max,
        spacing,
        nodes,
        quad_weights: vec![spacing * spacing * spacing; n_nodes],
        maxwellian: mw,
        sqrt_maxwellian: smw,
        bracket_v: bv,
    })
}

impl VelocityGrid {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        let n = self.points_per_axis;
        (i * n + j) * n + k
    }

    /// Index of the mirrored node -v.
    pub fn negate_index(&self, idx: usize) -> usize {
        let n = self.points_per_axis;
        let k = idx % n;
        let j = (idx / n) % n;
        let i = idx / (n * n);
        self.node_index(n - 1 - i, n - 1 - j, n - 1 - k)
    }

    /// Midpoint quadrature of a grid function. Nodes are summed in (v, -v)
    /// pairs so odd integrands cancel exactly in floating point.
    pub fn velocity_integral(&self, g: &[f64]) -> f64 {
        debug_assert_eq!(g.len(), self.n_nodes());
        let w = self.quad_weights[0];
        let mut acc = 0.0;
        for idx in 0..g.len() {
            let m = self.negate_index(idx);
            if idx < m {
                acc += g[idx] + g[m];
            } else if idx == m {
                acc += g[idx];
            }
        }
        w * acc
    }

    /// Quadrature inner product of two grid functions. Neumaier-compensated:
    /// moment residuals of corrected collision outputs must resolve absolute
    /// levels near 1e-13, below the naive-summation floor for |v|^2 weights.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        let w = self.quad_weights[0];
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for (x, y) in a.iter().zip(b) {
            let t = x * y;
            let s = sum + t;
            comp += if sum.abs() >= t.abs() {
                (sum - s) + t
            } else {
                (t - s) + sum
            };
            sum = s;
        }
        w * (sum + comp)
    }

    /// Second-order finite-difference velocity derivative d^beta g,
    /// one-sided at the cube boundary. Orders up to 2 per axis.
    pub fn velocity_derivative(&self, g: &[f64], beta: &MultiIndex) -> Result<Vec<f64>> {
        for &b in beta.iter() {
            if b > 2 {
                return Err(Error::Config(format!(
                    "velocity derivative order per axis limited to 2, got {beta:?}"
                )));
            }
        }
        let mut cur = g.to_vec();
        for axis in 0..3 {
            match beta[axis] {
                0 => {}
                1 => cur = self.axis_derivative(&cur, axis, 1),
                2 => cur = self.axis_derivative(&cur, axis, 2),
                _ => unreachable!(),
            }
        }
        Ok(cur)
    }

    fn axis_derivative(&self, g: &[f64], axis: usize, order: usize) -> Vec<f64> {
        let n = self.points_per_axis;
        let h = self.spacing;
        let mut out = vec![0.0; g.len()];
        // stride of the axis in the row-major layout
        let stride = match axis {
            0 => n * n,
            1 => n,
            _ => 1,
        };
        let lines = g.len() / n;
        for line in 0..lines {
            // base index of this 1D line
            let base = match axis {
                0 => line,
                1 => (line / n) * n * n + (line % n),
                _ => line * n,
            };
            let at = |i: usize| g[base + i * stride];
            for i in 0..n {
                let d = match order {
                    1 => {
                        if i == 0 {
                            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
                        } else if i == n - 1 {
                            (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
                        } else {
                            (at(i + 1) - at(i - 1)) / (2.0 * h)
                        }
                    }
                    _ => {
                        if i == 0 {
                            (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / (h * h)
                        } else if i == n - 1 {
                            (2.0 * at(n - 1) - 5.0 * at(n - 2) + 4.0 * at(n - 3) - at(n - 4))
                                / (h * h)
                        } else {
                            (at(i + 1) - 2.0 * at(i) + at(i - 1)) / (h * h)
                        }
                    }
                };
                out[base + i * stride] = d;
            }
        }
        out
    }
}

/// Periodic spatial grid (power-of-two points per axis, dim in {1,2,3}).
///
/// Node layout is row-major over (i0, .., i_{dim-1}) with i0 slowest.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    pub dim: usize,
    pub points_per_axis: usize,
    pub box_length: [f64; 3],
}

pub fn build_spatial_grid(dim: usize, points_per_axis: usize, box_length: f64) -> Result<SpatialGrid> {
    if !(1..=3).contains(&dim) {
        return Err(Error::Config(format!("spatial dim must be 1, 2 or 3, got {dim}")));
    }
    if points_per_axis < 2 || !points_per_axis.is_power_of_two() {
        return Err(Error::Config(format!(
            "spatial points_per_axis must be a power of two >= 2, got {points_per_axis}"
        )));
    }
    if !(box_length > 0.0) {
        return Err(Error::Config(format!("box_length must be positive, got {box_length}")));
    }
    Ok(SpatialGrid {
        dim,
        points_per_axis,
        box_length: [box_length; 3],
    })
}

impl SpatialGrid {
    pub fn n_nodes(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        let dx = self.box_length[0] / self.points_per_axis as f64;
        dx.powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.box_length[..self.dim].iter().product()
    }

    /// Signed integer wavenumber for a DFT index along one axis.
    pub fn wavenumber(&self, idx: usize) -> i64 {
        let n = self.points_per_axis as i64;
        let i = idx as i64;
        if i <= n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Cartesian coordinates of spatial node `idx` (length = dim).
    pub fn node_coords(&self, idx: usize) -> [f64; 3] {
        let n = self.points_per_axis;
        let mut rem = idx;
        let mut multi = [0usize; 3];
        for a in (0..self.dim).rev() {
            multi[a] = rem % n;
            rem /= n;
        }
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.box_length[a] * multi[a] as f64 / n as f64;
        }
        x
    }

    /// Decompose a flat node index into per-axis indices.
    pub fn node_multi(&self, idx: usize) -> [usize; 3] {
        let n = self.points_per_axis;
        let mut rem = idx;
        let mut multi = [0usize; 3];
        for a in (0..self.dim).rev() {
            multi[a] = rem % n;
            rem /= n;
        }
        multi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn velocity_grid_rejects_odd_and_tiny() {
        assert!(build_velocity_grid(7, 6.0).is_err());
        assert!(build_velocity_grid(2, 6.0).is_err());
        assert!(build_velocity_grid(8, -1.0).is_err());
        assert!(build_velocity_grid(4, 6.0).is_ok());
    }

    #[test]
    fn grid_symmetric_under_negation() {
        let g = build_velocity_grid(8, 6.0).unwrap();
        for idx in 0..g.n_nodes() {
            let m = g.negate_index(idx);
            for a in 0..3 {
                assert!((g.nodes[idx][a] + g.nodes[m][a]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn maxwellian_mass_matches_fine_quadrature_oracle() {
        // oracle: same midpoint rule at 64 points/axis (truncation error shared).
        // Documented mass defects tol_M (Poisson-summation aliasing of the
        // Gaussian, ~2*exp(-2 pi^2 / h^2) per axis):
        //   (8,  6.0): tol_M = 2e-3   (h = 1.5)
        //   (16, 6.0): tol_M = 1e-8   (h = 0.75; dominated by tail truncation)
        let fine = build_velocity_grid(64, 6.0).unwrap();
        let oracle = fine.velocity_integral(&fine.maxwellian);
        assert!((oracle - 1.0).abs() < 1e-7, "fine-grid oracle {oracle}");
        let g = build_velocity_grid(8, 6.0).unwrap();
        let mass = g.velocity_integral(&g.maxwellian);
        assert!((mass - oracle).abs() < 2e-3, "mass {mass} vs oracle {oracle}");
        assert!(mass > 1.0 - 2e-3 && mass <= 1.0 + 1e-9);
        let g = build_velocity_grid(16, 6.0).unwrap();
        let mass = g.velocity_integral(&g.maxwellian);
        assert!((mass - oracle).abs() < 1e-8, "mass {mass} vs oracle {oracle}");
    }

    #[test]
    fn odd_moments_vanish_exactly() {
        let g = build_velocity_grid(8, 6.0).unwrap();
        let f: Vec<f64> = g
            .nodes
            .iter()
            .zip(&g.maxwellian)
            .map(|(v, m)| v[0] * m)
            .collect();
        assert_eq!(g.velocity_integral(&f), 0.0);
        // general odd function: v1^3 v2 exp(-|v|)
        let f: Vec<f64> = g
            .nodes
            .iter()
            .map(|v| v[0].powi(3) * v[1] * (-(v[0].abs() + v[1].abs() + v[2].abs())).exp())
            .collect();
        assert!(g.velocity_integral(&f).abs() < 1e-15);
    }

    #[test]
    fn energy_moment_matches_gaussian_oracle() {
        // 1D cross-check with the same 1D midpoint rule: the 3D quadrature
        // factorizes, so int |v|^2 M over the cube equals 3*m2*m0^2 exactly.
        let n = 8;
        let vmax = 6.0;
        let h = 2.0 * vmax / n as f64;
        let norm = (2.0 * std::f64::consts::PI).sqrt();
        let mut m0 = 0.0;
        let mut m2 = 0.0;
        for i in 0..n {
            let v: f64 = -vmax + (i as f64 + 0.5) * h;
            let g = (-0.5 * v * v).exp() / norm;
            m0 += h * g;
            m2 += h * v * v * g;
        }
        let oracle = 3.0 * m2 * m0 * m0;
        let g = build_velocity_grid(8, 6.0).unwrap();
        let f: Vec<f64> = g
            .nodes
            .iter()
            .zip(&g.maxwellian)
            .map(|(v, m)| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) * m)
            .collect();
        let val = g.velocity_integral(&f);
        assert!((val - oracle).abs() < 1e-12, "val {val} oracle {oracle}");
        // coarse-grid quadrature accuracy against the analytic value 3
        assert!((val - 3.0).abs() < 2e-2);
    }

    #[test]
    fn velocity_derivative_linear_exact_interior() {
        let g = build_velocity_grid(8, 6.0).unwrap();
        let f: Vec<f64> = g.nodes.iter().map(|v| v[0]).collect();
        let d = g.velocity_derivative(&f, &[1, 0, 0]).unwrap();
        for (idx, v) in d.iter().enumerate() {
            let _ = idx;
            assert!((v - 1.0).abs() < 1e-12);
        }
        let c = vec![4.2; g.n_nodes()];
        let d = g.velocity_derivative(&c, &[0, 1, 0]).unwrap();
        assert!(d.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn velocity_derivative_maxwellian_oracle() {
        // analytic: d/dv1 M = -v1 M; interior nodes, O(h^2) accuracy
        let g = build_velocity_grid(16, 6.0).unwrap();
        let d = g.velocity_derivative(&g.maxwellian, &[1, 0, 0]).unwrap();
        let h2 = g.spacing * g.spacing;
        for idx in 0..g.n_nodes() {
            let v = g.nodes[idx];
            if v.iter().any(|x| x.abs() > g.v_max - g.spacing) {
                continue;
            }
            let exact = -v[0] * g.maxwellian[idx];
            assert!(
                (d[idx] - exact).abs() < 0.5 * h2,
                "node {v:?}: {} vs {exact}",
                d[idx]
            );
        }
    }

    #[test]
    fn spatial_grid_wavenumbers() {
        let g = build_spatial_grid(2, 8, 1.0).unwrap();
        assert_eq!(g.n_nodes(), 64);
        let ks: Vec<i64> = (0..8).map(|i| g.wavenumber(i)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, 4, -3, -2, -1]);
        assert!(build_spatial_grid(2, 12, 1.0).is_err());
        assert!(build_spatial_grid(4, 8, 1.0).is_err());
    }
}
