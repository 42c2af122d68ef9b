use madelung_core::analytic::{self, DiffusionBranch, GaussianParams, WidthLaw};
use madelung_core::diffusion::{diffuse_step, evolve_diffusion, DiffusionState};
use madelung_core::entropy::{boltzmann_entropy, fisher_information, production_diffusive};
use madelung_core::madelung::{density, position_variance};
use madelung_core::schrodinger::{evolve, gaussian_packet, EvolutionConfig, Potential};
use madelung_core::Grid;
use std::f64::consts::PI;

#[test]
fn trapped_gaussian_breathes_like_the_madelung_law() {
    let g = Grid::new(8.0, 128).unwrap();
    let s0 = 0.5f64.sqrt();
    let start = gaussian_packet(&g, 1.01 * s0, 0.0, 1.0, 1.0).unwrap();
    let cfg = EvolutionConfig::new(PI / 3000.0, 2.0 * PI, 50).unwrap();
    let snaps = evolve(&start, &Potential::harmonic(1.0).unwrap(), &cfg).unwrap();
    let times: Vec<f64> = snaps.iter().map(|s| s.time()).collect();
    let p = GaussianParams::new(s0, 1.0, 1.0)
        .unwrap()
        .with_omega0(1.0)
        .unwrap()
        .with_epsilon0(0.01 * s0)
        .unwrap();
    let trace = analytic::harmonic_sigma(&p, &times, WidthLaw::Madelung).unwrap();
    for (snap, &sigma) in snaps.iter().zip(trace.sigma()) {
        let measured = position_variance(&density(snap)).sqrt();
        assert!((measured - sigma).abs() < 1e-6 * s0, "t = {}", snap.time());
    }
    // The width returns after half a trap period.
    let half = snaps.iter().position(|s| (s.time() - PI).abs() < 1e-9).unwrap();
    let w0 = position_variance(&density(&snaps[0]));
    assert!((position_variance(&density(&snaps[half])) - w0).abs() < 1e-8);
}

#[test]
fn diffusion_tracks_the_offset_branch() {
    let g = Grid::new(40.0, 1024).unwrap();
    let p = GaussianParams::new(1.0, 1.0, 1.0)
        .unwrap()
        .with_diffusivity(0.5)
        .unwrap();
    let start = DiffusionState::gaussian(&g, 1.0, 0.5, 0.0).unwrap();
    let snaps = evolve_diffusion(&start, 0.05, 4.0, 4).unwrap();
    for s in &snaps {
        let reference = analytic::diffusion_reference(&p, s.time(), DiffusionBranch::Offset).unwrap();
        assert!((position_variance(s.rho()) - reference.sigma.powi(2)).abs() < 1e-12);
        let fisher = fisher_information(s.rho());
        assert!((production_diffusive(s.rho(), 0.5, 1.0) - 0.5 * fisher).abs() < 1e-12);
        assert!((fisher * 0.5 - reference.production).abs() < 1e-10);
        let entropy = analytic::gaussian_entropy(reference.sigma, 1.0);
        assert!((boltzmann_entropy(s.rho(), 1.0) - entropy).abs() < 1e-10);
    }
}

#[test]
fn diffusion_kernel_is_a_semigroup() {
    let g = Grid::new(20.0, 256).unwrap();
    let s = DiffusionState::gaussian(&g, 0.8, 0.3, 0.0).unwrap();
    let once = diffuse_step(&s, 1.0).unwrap();
    let twice = diffuse_step(&diffuse_step(&s, 0.4).unwrap(), 0.6).unwrap();
    for (a, b) in once.rho().values().iter().zip(twice.rho().values()) {
        assert!((a - b).abs() < 1e-15);
    }
    assert!((twice.rho().integrate() - 1.0).abs() < 1e-14);
}
