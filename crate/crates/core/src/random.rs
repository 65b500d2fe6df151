//! Random physical states and unitaries for Monte Carlo checks.

use nalgebra::{Matrix2, Matrix4};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};

use crate::qstate::{DensityMatrix, Ket4, PolarizationUnitary, C64};

fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

/// Hilbert–Schmidt distributed mixed state `G·G†/Tr(G·G†)` with Ginibre `G`.
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R) -> DensityMatrix {
    let g = Matrix4::from_fn(|_, _| gaussian_c64(rng));
    let m = g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(m.unscale(tr)).expect("Ginibre product is positive")
}

/// Haar-random pure two-photon state.
pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R) -> Ket4 {
    Ket4::new(std::array::from_fn(|_| gaussian_c64(rng))).expect("Gaussian vector is nonzero")
}

/// Haar-random SU(2) element from a uniform unit quaternion.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R) -> PolarizationUnitary {
    let [a, b, c, d]: [f64; 4] = {
        let g: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        g.map(|x| x / n)
    };
    let m = Matrix2::new(C64::new(a, b), C64::new(c, d), C64::new(-c, d), C64::new(a, -b));
    PolarizationUnitary::new(m).expect("unit quaternion gives SU(2)")
}

/// Random rotation axis on the Poincaré sphere.
pub fn random_axis<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    UnitSphere.sample(rng)
}
