//! FFT plumbing for the periodic spatial grid: forward/inverse transforms,
//! exact spectral derivatives, Fourier multipliers, and Parseval-consistent
//! norms.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{MultiIndex, SpatialGrid};

pub const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Spectral operators bound to one spatial grid. Immutable after construction.
pub struct SpectralOps {
    pub grid: SpatialGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl SpectralOps {
    pub fn new(grid: &SpatialGrid) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.points_per_axis);
        let inv = planner.plan_fft_inverse(grid.points_per_axis);
        SpectralOps {
            grid: grid.clone(),
            fwd,
            inv,
        }
    }

    fn axis_transform(&self, data: &mut [Complex64], axis: usize, forward: bool) {
        let n = self.grid.points_per_axis;
        let dim = self.grid.dim;
        let stride = n.pow((dim - 1 - axis) as u32);
        let outer_count = n.pow(axis as u32);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let plan = if forward { &self.fwd } else { &self.inv };
        for outer in 0..outer_count {
            for inner in 0..stride {
                let base = outer * n * stride + inner;
                for i in 0..n {
                    line[i] = data[base + i * stride];
                }
                plan.process(&mut line);
                for i in 0..n {
                    data[base + i * stride] = line[i];
                }
            }
        }
    }

    /// Unnormalized forward DFT of a real field.
    pub fn forward(&self, field: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = field.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward_complex(&mut data);
        data
    }

    pub fn forward_complex(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.grid.n_nodes());
        for a in 0..self.grid.dim {
            self.axis_transform(data, a, true);
        }
    }

    /// Inverse DFT including the 1/N normalization (in place).
    pub fn inverse_complex(&self, data: &mut [Complex64]) {
        for a in 0..self.grid.dim {
            self.axis_transform(data, a, false);
        }
        let scale = 1.0 / self.grid.n_nodes() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    /// Inverse DFT, real part.
    pub fn inverse_real(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.inverse_complex(&mut spec);
        spec.into_iter().map(|z| z.re).collect()
    }

    /// Signed wavenumber vector of a flat spectral index.
    pub fn kvec(&self, idx: usize) -> [i64; 3] {
        let n = self.grid.points_per_axis;
        let mut rem = idx;
        let mut k = [0i64; 3];
        for a in (0..self.grid.dim).rev() {
            k[a] = self.grid.wavenumber(rem % n);
            rem /= n;
        }
        k
    }

    /// 2*pi*k/L per axis for a flat spectral index.
    pub fn kappa(&self, idx: usize) -> [f64; 3] {
        let k = self.kvec(idx);
        let mut out = [0.0; 3];
        for a in 0..self.grid.dim {
            out[a] = TAU * k[a] as f64 / self.grid.box_length[a];
        }
        out
    }

    pub fn apply_multiplier(
        &self,
        spec: &mut [Complex64],
        mult: impl Fn(&[f64; 3]) -> Complex64,
    ) {
        for (idx, z) in spec.iter_mut().enumerate() {
            *z *= mult(&self.kappa(idx));
        }
    }

    /// Exact spectral derivative: multiplier prod_a (i*2*pi*k_a/L_a)^{alpha_a}.
    pub fn spatial_derivative(&self, field: &[f64], alpha: &MultiIndex) -> Result<Vec<f64>> {
        for a in self.grid.dim..3 {
            if alpha[a] != 0 {
                return Err(Error::Config(format!(
                    "derivative multi-index {alpha:?} references axis beyond dim {}",
                    self.grid.dim
                )));
            }
        }
        let mut spec = self.forward(field);
        // Nyquist mode of odd derivatives is zeroed (real output convention).
        let n = self.grid.points_per_axis as i64;
        for idx in 0..spec.len() {
            let k = self.kvec(idx);
            let kap = self.kappa(idx);
            let mut m = Complex64::new(1.0, 0.0);
            let mut kill = false;
            for a in 0..self.grid.dim {
                if alpha[a] == 0 {
                    continue;
                }
                if alpha[a] % 2 == 1 && k[a] == n / 2 {
                    kill = true;
                }
                m *= Complex64::new(0.0, kap[a]).powu(alpha[a] as u32);
            }
            spec[idx] *= if kill { Complex64::new(0.0, 0.0) } else { m };
        }
        Ok(self.inverse_real(spec))
    }

    /// L^2 norm squared with the physical cell measure.
    pub fn l2_norm_sq(&self, field: &[f64]) -> f64 {
        self.grid.cell_volume() * field.iter().map(|x| x * x).sum::<f64>()
    }

    /// Parseval realization of the same norm from a spectrum.
    pub fn l2_norm_sq_spec(&self, spec: &[Complex64]) -> f64 {
        let nn = self.grid.n_nodes() as f64;
        self.grid.volume() / (nn * nn) * spec.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_spatial_grid;

    fn grid2d(n: usize) -> (SpatialGrid, SpectralOps) {
        let g = build_spatial_grid(2, n, 1.0).unwrap();
        let ops = SpectralOps::new(&g);
        (g, ops)
    }

    #[test]
    fn single_mode_derivative_is_exact() {
        let (g, ops) = grid2d(16);
        let l = g.box_length[0];
        let field: Vec<f64> = (0..g.n_nodes())
            .map(|i| {
                let x = g.node_coords(i);
                (TAU * x[0] / l).sin()
            })
            .collect();
        let d = ops.spatial_derivative(&field, &[1, 0, 0]).unwrap();
        for i in 0..g.n_nodes() {
            let x = g.node_coords(i);
            let exact = (TAU / l) * (TAU * x[0] / l).cos();
            assert!((d[i] - exact).abs() < 1e-11, "{} vs {exact}", d[i]);
        }
        let c = vec![3.0; g.n_nodes()];
        let d = ops.spatial_derivative(&c, &[2, 1, 0]).unwrap();
        assert!(d.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn mixed_mode_matches_finite_difference_oracle() {
        // field e^{2 pi i (2 x1 + x2)/L} realized as its real part; oracle:
        // 4th-order centered finite differences in each direction.
        let (g, ops) = grid2d(256);
        let l = g.box_length[0];
        let f = |x: &[f64; 3]| (TAU * (2.0 * x[0] + x[1]) / l).cos();
        let field: Vec<f64> = (0..g.n_nodes()).map(|i| f(&g.node_coords(i))).collect();
        let d = ops.spatial_derivative(&field, &[1, 1, 0]).unwrap();
        let n = g.points_per_axis;
        let h = l / n as f64;
        let idx = |i: usize, j: usize| (i % n) * n + (j % n);
        let fd = |i: usize, j: usize| {
            // 4th-order first derivative in x1 of (4th-order derivative in x2)
            let d2 = |ii: usize| {
                (-field[idx(ii, j + 2)] + 8.0 * field[idx(ii, j + 1)]
                    - 8.0 * field[idx(ii, j + n - 1)]
                    + field[idx(ii, j + n - 2)])
                    / (12.0 * h)
            };
            (-d2(i + 2) + 8.0 * d2(i + 1) - 8.0 * d2(i + n - 1) + d2(i + n - 2)) / (12.0 * h)
        };
        let scale = 2.0 * (TAU / l).powi(2); // max |d^(1,1) f|
        for i in (0..n).step_by(7) {
            for j in (0..n).step_by(7) {
                let spectral = d[idx(i, j)];
                let oracle = fd(i, j);
                assert!(
                    (spectral - oracle).abs() < 1e-6 * scale,
                    "({i},{j}): {spectral} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn parseval_identity() {
        let (g, ops) = grid2d(16);
        let field: Vec<f64> = (0..g.n_nodes())
            .map(|i| {
                let x = g.node_coords(i);
                (TAU * x[0]).sin() + 0.3 * (2.0 * TAU * (x[0] + x[1])).cos() + 0.1
            })
            .collect();
        let direct = ops.l2_norm_sq(&field);
        let spec = ops.forward(&field);
        let parseval = ops.l2_norm_sq_spec(&spec);
        assert!((direct - parseval).abs() < 1e-12 * direct.max(1.0));
    }

    #[test]
    fn derivative_commutes() {
        let (g, ops) = grid2d(16);
        let field: Vec<f64> = (0..g.n_nodes())
            .map(|i| {
                let x = g.node_coords(i);
                (TAU * x[0]).sin() * (2.0 * TAU * x[1]).cos()
            })
            .collect();
        let a = ops
            .spatial_derivative(&ops.spatial_derivative(&field, &[1, 0, 0]).unwrap(), &[0, 1, 0])
            .unwrap();
        let b = ops.spatial_derivative(&field, &[1, 1, 0]).unwrap();
        let scale = a.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
        for i in 0..g.n_nodes() {
            assert!((a[i] - b[i]).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn round_trip_identity() {
        let (g, ops) = grid2d(8);
        let field: Vec<f64> = (0..g.n_nodes()).map(|i| (i as f64 * 0.7).sin()).collect();
        let spec = ops.forward(&field);
        let back = ops.inverse_real(spec);
        for i in 0..g.n_nodes() {
            assert!((field[i] - back[i]).abs() < 1e-13);
        }
    }
}
