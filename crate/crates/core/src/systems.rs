//! Bundled fields and systems: the rotation, the van der Pol perturbation
//! terms, a cubic oscillator used as a nonlinear test field, and scaled
//! linear centers.

use crate::flow::{FnForcing, PerturbedSystem};
use crate::linalg::Matrix;
use crate::ode::FnField;
use crate::scalar::{lit, Scalar};

/// `x' = λ(x₂, −x₁)`, the linear center with eigenvalues `±iλ`.
pub fn linear_center<S: Scalar>(lambda: S) -> FnField<S> {
    FnField::new(2, move |_, x: &[S], dx: &mut [S]| {
        dx[0] = lambda * x[1];
        dx[1] = -lambda * x[0];
    })
    .with_jacobian(move |_, _, j: &mut Matrix<S>| {
        j[(0, 0)] = S::zero();
        j[(0, 1)] = lambda;
        j[(1, 0)] = -lambda;
        j[(1, 1)] = S::zero();
    })
}

pub fn rotation<S: Scalar>() -> FnField<S> {
    linear_center(S::one())
}

/// `x' = A x` for a general matrix.
pub fn linear_field<S: Scalar>(a: Matrix<S>) -> FnField<S> {
    let n = a.rows();
    let aj = a.clone();
    FnField::new(n, move |_, x: &[S], dx: &mut [S]| a.mul_vec_into(x, dx)).with_jacobian(move |_, _, j: &mut Matrix<S>| {
        j.as_mut_slice().copy_from_slice(aj.as_slice());
    })
}

/// `c · (0, (1 − x₁²) x₂)`.
pub fn vdp_damping<S: Scalar>(scale: S) -> FnField<S> {
    FnField::new(2, move |_, x: &[S], dx: &mut [S]| {
        dx[0] = S::zero();
        dx[1] = scale * (S::one() - x[0] * x[0]) * x[1];
    })
    .with_jacobian(move |_, x: &[S], j: &mut Matrix<S>| {
        j[(0, 0)] = S::zero();
        j[(0, 1)] = S::zero();
        j[(1, 0)] = -scale * lit::<S>(2.0) * x[0] * x[1];
        j[(1, 1)] = scale * (S::one() - x[0] * x[0]);
    })
}

/// `c · (0, −sin(ω t))`, independent of `x`, `ε` and `μ`.
pub fn sine_forcing<S: Scalar>(scale: S, omega: S) -> FnForcing<S> {
    FnForcing::new(2, move |t, _, _, _, dx: &mut [S]| {
        dx[0] = S::zero();
        dx[1] = -scale * (omega * t).sin();
    })
    .with_jacobian(|_, _, _, _, j: &mut Matrix<S>| j.as_mut_slice().fill(S::zero()))
}

/// `x₁' = x₂, x₂' = −x₁ + x₁³`.
pub fn cubic<S: Scalar>() -> FnField<S> {
    FnField::new(2, |_, x: &[S], dx: &mut [S]| {
        dx[0] = x[1];
        dx[1] = -x[0] + x[0] * x[0] * x[0];
    })
    .with_jacobian(|_, x: &[S], j: &mut Matrix<S>| {
        j[(0, 0)] = S::zero();
        j[(0, 1)] = S::one();
        j[(1, 0)] = -S::one() + lit::<S>(3.0) * x[0] * x[0];
        j[(1, 1)] = S::zero();
    })
}

/// Unforced van der Pol at a fixed parameter, `x₁' = x₂, x₂' = −x₁ + c(1 − x₁²)x₂`.
pub fn vdp_full<S: Scalar>(c: S) -> FnField<S> {
    FnField::new(2, move |_, x: &[S], dx: &mut [S]| {
        dx[0] = x[1];
        dx[1] = -x[0] + c * (S::one() - x[0] * x[0]) * x[1];
    })
    .with_jacobian(move |_, x: &[S], j: &mut Matrix<S>| {
        j[(0, 0)] = S::zero();
        j[(0, 1)] = S::one();
        j[(1, 0)] = -S::one() - c * lit::<S>(2.0) * x[0] * x[1];
        j[(1, 1)] = c * (S::one() - x[0] * x[0]);
    })
}

fn two_pi<S: Scalar>() -> S {
    S::PI() + S::PI()
}

/// Rotation with no perturbation, period `2π`.
pub fn rotation_system<S: Scalar>() -> PerturbedSystem<S> {
    PerturbedSystem::two_term(rotation(), vdp_damping(S::zero()), FnForcing::zero(2), two_pi())
        .expect("rotation system is well formed")
}

/// Cubic oscillator as the unperturbed field, no perturbation, period `2π`.
pub fn cubic_system<S: Scalar>() -> PerturbedSystem<S> {
    PerturbedSystem::two_term(cubic(), vdp_damping(S::zero()), FnForcing::zero(2), two_pi())
        .expect("cubic system is well formed")
}

/// Forced van der Pol in two-term normal form: `ψ` rotation,
/// `φ₁ = (0, (1 − x₁²)x₂)`, `φ₂ = (0, −sin t)`, period `2π`.
pub fn vdp_two_term<S: Scalar>() -> PerturbedSystem<S> {
    vdp_two_term_scaled(S::one())
}

/// Time-rescaled van der Pol normal form with linear part `λ(x₂, −x₁)`,
/// `φ₁` scaled by `λ`, forcing `(0, −λ sin(λt))` and period `2π/λ`.
pub fn vdp_two_term_scaled<S: Scalar>(lambda: S) -> PerturbedSystem<S> {
    PerturbedSystem::two_term(linear_center(lambda), vdp_damping(lambda), sine_forcing(lambda, lambda), two_pi::<S>() / lambda)
        .expect("van der Pol system is well formed")
}

/// Unforced van der Pol in one-term form: `ψ` rotation, `φ = (0, (1 − x₁²)x₂)`.
pub fn vdp_one_term<S: Scalar>() -> PerturbedSystem<S> {
    PerturbedSystem::one_term(rotation(), FnForcing::from_field(vdp_damping(S::one())), two_pi())
        .expect("van der Pol system is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::jacobian_check;

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        let probes = [[0.3, -1.2], [2.0, 0.5], [-1.7, 1.9]];
        for x in probes {
            for t in [0.0, 0.7, 4.0] {
                assert!(jacobian_check(&rotation::<f64>(), t, &x) < 1e-4);
                assert!(jacobian_check(&vdp_damping::<f64>(1.0), t, &x) < 1e-4);
                assert!(jacobian_check(&cubic::<f64>(), t, &x) < 1e-4);
                assert!(jacobian_check(&vdp_full::<f64>(0.2), t, &x) < 1e-4);
            }
        }
    }

    #[test]
    fn bundled_systems_are_periodic() {
        for sys in [rotation_system::<f64>(), cubic_system(), vdp_two_term(), vdp_one_term(), vdp_two_term_scaled(2.0)] {
            sys.validate_periodicity().unwrap();
        }
    }
}
