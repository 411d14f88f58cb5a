//! The incompressible fluid solver against a closed-form solution. For the
//! Taylor-Green vortex the advection term is a pure gradient, which the
//! Leray projection removes, so the exact solution is viscous decay of the
//! initial mode: u(t) = u(0) exp(-2 mu t) on the 2-pi box.
//!
//! The viscosity is not a free parameter here - it is computed from the
//! linearized collision operator, so this checks the kinetic-to-fluid
//! pipeline end to end (see the transport_coefficients example).
//!
//! Usage: cargo run --release --example nsfm_taylor_green

use vmb_lab::collision::transport::transport_coefficients_from_hats;
use vmb_lab::collision::{assemble_linearized, hat_functions, AngularProfile, CollisionKernel};
use vmb_lab::fourier::TAU;
use vmb_lab::grid::{build_spatial_grid, build_velocity_grid};
use vmb_lab::nsfm::{NSFMConfig, NSFMSolver, NSFMState};

fn main() {
    let vgrid = build_velocity_grid(6, 6.0).unwrap();
    let kernel = CollisionKernel::new(-1.0, AngularProfile::AbsCos, 8).unwrap();
    let op = assemble_linearized(&kernel, &vgrid).unwrap();
    let hats = hat_functions(&op, &vgrid).unwrap();
    let tc = transport_coefficients_from_hats(&op, &vgrid, &hats).unwrap();
    println!(
        "coefficients from the 6^3 collision operator: mu = {:.6}, kappa = {:.6}, sigma = {:.6}",
        tc.mu, tc.kappa, tc.sigma
    );

    let grid = build_spatial_grid(2, 64, TAU).unwrap();
    let nx = grid.n_nodes();
    let mut st = NSFMState::zeros(nx);
    for x in 0..nx {
        let c = grid.node_coords(x);
        st.u[0][x] = c[0].sin() * c[1].cos();
        st.u[1][x] = -c[0].cos() * c[1].sin();
    }
    let init_u = [st.u[0].clone(), st.u[1].clone()];

    let cfg = NSFMConfig {
        mu: tc.mu,
        kappa: tc.kappa,
        sigma: tc.sigma,
        dt: 0.01,
        t_end: 1.0,
        frame_stride: 25,
    };
    let solver = NSFMSolver::new(&grid);
    let run = solver.run(&cfg, st).unwrap();

    println!("Taylor-Green vortex on a 64^2 grid, dt = {}:", cfg.dt);
    println!("{:>6} {:>14} {:>14}", "t", "kinetic energy", "L2 error");
    let mut final_err = f64::NAN;
    for fr in &run.frames {
        let decay = (-2.0 * tc.mu * fr.t).exp();
        let mut err_sq = 0.0;
        let mut ke = 0.0;
        for c in 0..2 {
            let diff: Vec<f64> = fr.u[c]
                .iter()
                .zip(&init_u[c])
                .map(|(a, b)| a - b * decay)
                .collect();
            err_sq += solver.ops.l2_norm_sq(&diff);
            ke += 0.5 * solver.ops.l2_norm_sq(&fr.u[c]);
        }
        final_err = err_sq.sqrt();
        println!("{:6.2} {ke:14.6e} {final_err:14.3e}", fr.t);
    }
    println!("final L2 error vs exact viscous decay: {final_err:.3e}");
    assert!(final_err < 1e-6);
}
