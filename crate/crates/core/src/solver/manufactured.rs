//! Manufactured solution of the coupled swirl / vorticity / streamfunction system on
//! `ρ ∈ [0, 1]`, `z ∈ [0, 2π)` periodic:
//!
//! ```text
//! f*  = e^{-t} ρ²(1 − ρ²) cos z
//! ψ*  = ½ e^{-t} ρ²(1 − ρ²)³ sin z
//! ω*  = −(1/ρ)(∂²_ρ − (1/ρ)∂_ρ + ∂²_z) ψ* = ½ e^{-t} ρ(25 − 75ρ² + 51ρ⁴ − ρ⁶) sin z
//! ```
//!
//! All three vanish on the axis and at `ρ = 1`, so the homogeneous wall
//! conditions of the solver hold exactly. The forcing terms are the residuals
//! of the swirl and vorticity equations evaluated on these fields.

pub fn swirl(rho: f64, z: f64, t: f64) -> f64 {
    (-t).exp() * rho * rho * (1.0 - rho * rho) * z.cos()
}

pub fn streamfunction(rho: f64, z: f64, t: f64) -> f64 {
    0.5 * (-t).exp() * rho * rho * (1.0 - rho * rho).powi(3) * z.sin()
}

pub fn vorticity(rho: f64, z: f64, t: f64) -> f64 {
    let r2 = rho * rho;
    0.5 * (-t).exp() * rho * (25.0 - 75.0 * r2 + 51.0 * r2 * r2 - r2 * r2 * r2) * z.sin()
}

pub fn swirl_forcing(rho: f64, z: f64, t: f64) -> f64 {
    let r2 = rho * rho;
    let r4 = r2 * r2;
    let r6 = r4 * r2;
    let r8 = r4 * r4;
    let r10 = r8 * r2;
    let s2 = z.sin().powi(2);
    (-2.0 * t).exp()
        * (-2.0 * r10 + 7.0 * r8 - 9.0 * r6 + 5.0 * r4 - r2
            + (-2.0 * r10 + 6.0 * r8 - 6.0 * r6 + 2.0 * r4) * s2)
        + 8.0 * r2 * (-t).exp() * z.cos()
}

pub fn vorticity_forcing(rho: f64, z: f64, t: f64) -> f64 {
    let r2 = rho * rho;
    let p = |c: &[f64]| c.iter().rev().fold(0.0, |acc, &k| acc * r2 + k);
    let slow = rho * p(&[300.0, -612.0, 24.0]);
    let fast = 0.5 * rho * p(&[29.0, -158.0, 403.0, -548.0, 375.0, -102.0, 1.0]);
    z.sin() * ((-t).exp() * slow + (-2.0 * t).exp() * fast * z.cos())
}
