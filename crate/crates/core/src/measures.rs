//! Transfer-quality measures for a single realization.
//!
//! Everything here is a closed form in the transfer probability `p = |f|^2`
//! and the compensated phase `delta_phi`, except for the density-matrix
//! routines, which rebuild the same quantities from explicit quantum states and
//! serve as independent checks.

use alloc::vec::Vec;

use crate::linalg::{complex_singular_values, hermitian_eigenvalues, hermitian_sqrt_psd};
use crate::math;
use crate::{Complex64, ComplexAmplitude, Error, Result};

/// Fidelity of the best classical measure-and-prepare channel.
pub const CLASSICAL_LIMIT: f64 = 2.0 / 3.0;

const RANGE_SLACK: f64 = 1e-12;

/// Input qubit `alpha|0> + beta|1>`; only `|beta|^2` enters the fidelities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputState {
    pub beta_sq: f64,
}

impl InputState {
    pub fn new(beta_sq: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta_sq) {
            return Err(Error::invalid(
                "beta_sq",
                alloc::format!("must lie in [0, 1], got {beta_sq}"),
            ));
        }
        Ok(Self { beta_sq })
    }
}

/// Coefficients of `F = 1 + a x + b x^2` in `x = |beta|^2`.
#[inline]
fn quadratic(p: f64, delta_phi: f64) -> (f64, f64) {
    let coherence = math::sqrt(p) * math::cos(delta_phi);
    (-1.0 - p + 2.0 * coherence, 2.0 * p - 2.0 * coherence)
}

fn clamp_unit(value: f64, what: &str) -> Result<f64> {
    if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&value) {
        return Err(Error::Consistency(alloc::format!(
            "{what} = {value} outside [0, 1]"
        )));
    }
    Ok(value.clamp(0.0, 1.0))
}

/// Fidelity of the transferred state for input weight `beta_sq`.
///
/// `F = 1 + x(-1 - p + 2 sqrt(p) cos dphi) + x^2 (2p - 2 sqrt(p) cos dphi)`.
pub fn fidelity_psi(beta_sq: f64, p: f64, delta_phi: f64) -> Result<f64> {
    let (a, b) = quadratic(p, delta_phi);
    clamp_unit(1.0 + beta_sq * (a + b * beta_sq), "state fidelity")
}

/// Fidelity averaged uniformly over the Bloch sphere.
pub fn avg_fidelity(p: f64, delta_phi: f64) -> f64 {
    0.5 + p / 6.0 + math::sqrt(p) * math::cos(delta_phi) / 3.0
}

/// Input weight `|beta|^2` that minimizes [`fidelity_psi`] on `[0, 1]`.
///
/// The fidelity is quadratic in `x = |beta|^2` with `a <= 0`. For a convex
/// parabola (`b > 0`) the vertex `-a/(2b)` is returned when it lies in
/// `[0, 1]`; otherwise the minimum sits at `x = 1`. The flat case
/// `p = 1, delta_phi = 0` also returns 1.
pub fn worst_case_beta(p: f64, delta_phi: f64) -> f64 {
    let (a, b) = quadratic(p, delta_phi);
    if b > 0.0 {
        let vertex = -a / (2.0 * b);
        if (0.0..=1.0).contains(&vertex) {
            return vertex;
        }
    }
    1.0
}

/// The published closed form `B = (1 + p - sqrt(p) cos dphi) / (4 (p - 2 sqrt(p) cos dphi))`,
/// or 1 when that falls outside `[0, 1]`.
///
/// This does not minimize [`fidelity_psi`] in general: at `p = 1, dphi = pi`
/// it gives `1/4` while the minimizer is `1/2`. Kept for comparison runs.
pub fn published_worst_case_beta(p: f64, delta_phi: f64) -> f64 {
    let coherence = math::sqrt(p) * math::cos(delta_phi);
    let b = (1.0 + p - coherence) / (4.0 * (p - 2.0 * coherence));
    if b.is_finite() && (0.0..=1.0).contains(&b) {
        b
    } else {
        1.0
    }
}

/// Which worst-case input weight feeds the minimum fidelity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum BVariant {
    /// Exact minimizer of the quadratic.
    #[default]
    Calculus,
    /// [`published_worst_case_beta`].
    Published,
}

/// `(F_min, B)`: the state-minimum of [`fidelity_psi`] and where it is attained.
pub fn min_fidelity(p: f64, delta_phi: f64) -> Result<(f64, f64)> {
    worst_case(p, delta_phi, BVariant::Calculus)
}

/// Minimum fidelity evaluated at the worst-case weight chosen by `variant`.
pub fn worst_case(p: f64, delta_phi: f64, variant: BVariant) -> Result<(f64, f64)> {
    let b = match variant {
        BVariant::Calculus => worst_case_beta(p, delta_phi),
        BVariant::Published => published_worst_case_beta(p, delta_phi),
    };
    Ok((fidelity_psi(b, p, delta_phi)?, b))
}

/// Concurrence of the distributed Bell pair, `|f|`.
pub fn concurrence_from_amplitude(f: ComplexAmplitude) -> f64 {
    f.norm()
}

/// All measures of one transfer.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSet {
    pub f_avg: f64,
    pub f_min: f64,
    pub b_worst: f64,
    pub concurrence: f64,
    /// `(|beta|^2, F_psi)` on the requested grid.
    pub f_psi_grid: Vec<(f64, f64)>,
}

impl MeasureSet {
    pub fn evaluate(
        amplitude: ComplexAmplitude,
        p: f64,
        delta_phi: f64,
        beta_grid: &[f64],
        variant: BVariant,
    ) -> Result<Self> {
        let (f_min, b_worst) = worst_case(p, delta_phi, variant)?;
        let f_psi_grid = beta_grid
            .iter()
            .map(|&x| Ok((x, fidelity_psi(x, p, delta_phi)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            f_avg: clamp_unit(avg_fidelity(p, delta_phi), "average fidelity")?,
            f_min,
            b_worst,
            concurrence: clamp_unit(concurrence_from_amplitude(amplitude), "concurrence")?,
            f_psi_grid,
        })
    }
}

const DM_TOLERANCE: f64 = 1e-12;

fn validate_density(m: &[Complex64], n: usize) -> Result<()> {
    let mut trace = 0.0;
    for r in 0..n {
        trace += m[r * n + r].re;
        for c in 0..n {
            if (m[r * n + c] - m[c * n + r].conj()).norm() > DM_TOLERANCE {
                return Err(Error::invalid("rho", "matrix is not Hermitian"));
            }
        }
    }
    if (trace - 1.0).abs() > DM_TOLERANCE {
        return Err(Error::invalid("rho", alloc::format!("trace {trace} != 1")));
    }
    let smallest = hermitian_eigenvalues(m, n)?[0];
    if smallest < -DM_TOLERANCE {
        return Err(Error::invalid(
            "rho",
            alloc::format!("negative eigenvalue {smallest}"),
        ));
    }
    Ok(())
}

/// Single-qubit density matrix in the `|0>, |1>` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitDensityMatrix(pub [[Complex64; 2]; 2]);

impl QubitDensityMatrix {
    /// `|psi><psi|` for `psi = a|0> + b|1>`.
    pub fn pure(a: Complex64, b: Complex64) -> Self {
        let v = [a, b];
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                m[r][c] = v[r] * v[c].conj();
            }
        }
        Self(m)
    }

    fn flat(&self) -> [Complex64; 4] {
        [self.0[0][0], self.0[0][1], self.0[1][0], self.0[1][1]]
    }

    pub fn validate(&self) -> Result<()> {
        validate_density(&self.flat(), 2)
    }

    fn det(&self) -> f64 {
        (self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]).re
    }
}

/// `[Tr sqrt(sqrt(rho) sigma sqrt(rho))]^2` for qubits, via the closed form
/// `Tr(rho sigma) + 2 sqrt(det rho det sigma)`.
pub fn qubit_fidelity(rho: &QubitDensityMatrix, sigma: &QubitDensityMatrix) -> f64 {
    let mut overlap = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            overlap += (rho.0[r][c] * sigma.0[c][r]).re;
        }
    }
    // A pure state has det = 0 up to rounding, and the square root would
    // amplify that rounding to ~1e-8.
    let rounding = 4.0 * f64::EPSILON;
    let (d1, d2) = (rho.det(), sigma.det());
    if d1 <= rounding || d2 <= rounding {
        return overlap;
    }
    overlap + 2.0 * math::sqrt(d1 * d2)
}

/// Reduced state of the last site after the transfer of
/// `sqrt(1-x) e^{i alpha_phase} |0> + sqrt(x) |1>` with end-to-end amplitude `f`.
pub fn reduced_output_qubit(
    beta_sq: f64,
    alpha_phase: f64,
    f: ComplexAmplitude,
) -> QubitDensityMatrix {
    let alpha = Complex64::from_polar(math::sqrt(1.0 - beta_sq), alpha_phase);
    let beta = Complex64::new(math::sqrt(beta_sq), 0.0);
    let p = f.norm_sqr();
    let coherence = alpha.conj() * beta * f;
    QubitDensityMatrix([
        [Complex64::new(1.0 - beta_sq * p, 0.0), coherence.conj()],
        [coherence, Complex64::new(beta_sq * p, 0.0)],
    ])
}

/// Two-qubit density matrix, basis `|00>, |01>, |10>, |11>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitDensityMatrix(pub [[Complex64; 4]; 4]);

impl TwoQubitDensityMatrix {
    fn flat(&self) -> [Complex64; 16] {
        let mut out = [Complex64::new(0.0, 0.0); 16];
        for r in 0..4 {
            for c in 0..4 {
                out[r * 4 + c] = self.0[r][c];
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        validate_density(&self.flat(), 4)
    }

    pub fn bell_phi_plus() -> Self {
        two_qubit_output_state(Complex64::new(1.0, 0.0))
    }

    pub fn maximally_mixed() -> Self {
        let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = Complex64::new(0.25, 0.0);
        }
        Self(m)
    }
}

/// State shared by the external qubit and the last site when one half of
/// `(|00> + |11>)/sqrt(2)` is sent through the chain with amplitude `f`.
pub fn two_qubit_output_state(f: ComplexAmplitude) -> TwoQubitDensityMatrix {
    let zero = Complex64::new(0.0, 0.0);
    let mut m = [[zero; 4]; 4];
    m[0][0] = Complex64::new(0.5, 0.0);
    m[0][3] = 0.5 * f.conj();
    m[3][0] = 0.5 * f;
    m[3][3] = Complex64::new(0.5 * f.norm_sqr(), 0.0);
    m[2][2] = Complex64::new(0.5 * (1.0 - f.norm_sqr()), 0.0);
    TwoQubitDensityMatrix(m)
}

// sigma_y (x) sigma_y is real: anti-diagonal (-1, 1, 1, -1).
fn spin_flip(m: &[Complex64; 16]) -> [Complex64; 16] {
    const SIGN: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];
    let mut out = [Complex64::new(0.0, 0.0); 16];
    for r in 0..4 {
        for c in 0..4 {
            out[r * 4 + c] = m[(3 - r) * 4 + (3 - c)].conj() * (SIGN[r] * SIGN[c]);
        }
    }
    out
}

/// Wootters concurrence `max(0, l1 - l2 - l3 - l4)`.
///
/// The `l_i` are the square roots of the eigenvalues of `rho (Y x Y) rho* (Y x Y)`,
/// computed as the singular values of `sqrt(rho) sqrt(rho~)` to keep the
/// vanishing ones accurate.
pub fn wootters_concurrence(rho: &TwoQubitDensityMatrix) -> Result<f64> {
    rho.validate()?;
    let root = hermitian_sqrt_psd(&rho.flat(), 4)?;
    let mut root_array = [Complex64::new(0.0, 0.0); 16];
    root_array.copy_from_slice(&root);
    // sqrt(rho~) = (Y x Y) sqrt(rho)* (Y x Y)
    let root_tilde = spin_flip(&root_array);
    let mut product = [Complex64::new(0.0, 0.0); 16];
    for r in 0..4 {
        for c in 0..4 {
            product[r * 4 + c] = (0..4)
                .map(|k| root_array[r * 4 + k] * root_tilde[k * 4 + c])
                .sum();
        }
    }
    let l = complex_singular_values(&product, 4, 4)?;
    Ok((l[0] - l[1] - l[2] - l[3]).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use proptest::prelude::*;
    use std::vec::Vec;

    fn grid_min(p: f64, dphi: f64, points: usize) -> f64 {
        let (a, b) = quadratic(p, dphi);
        (0..points)
            .map(|k| {
                let x = k as f64 / (points - 1) as f64;
                1.0 + a * x + b * x * x
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn state_fidelity_examples() {
        for x in [0.0, 0.3, 1.0] {
            assert!((fidelity_psi(x, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!(fidelity_psi(0.5, 1.0, PI).unwrap().abs() < 1e-15);
        for (p, dphi) in [(0.4, 1.2), (0.81, -2.0), (0.0, 0.5)] {
            assert!((fidelity_psi(1.0, p, dphi).unwrap() - p).abs() < 1e-15);
        }
    }

    #[test]
    fn average_fidelity_limits() {
        assert_eq!(avg_fidelity(1.0, 0.0), 1.0);
        assert_eq!(avg_fidelity(0.0, 1.234), 0.5);
        // cos(pi/2) is 6e-17 in floating point; the classical limit is reached
        // when the coherence term vanishes.
        let classical = 0.5 + 1.0 / 6.0 + 0.0 / 3.0;
        assert_eq!(classical, CLASSICAL_LIMIT);
        assert!((avg_fidelity(1.0, PI / 2.0) - CLASSICAL_LIMIT).abs() < 1e-16);
    }

    #[test]
    fn worst_case_examples() {
        assert!((worst_case_beta(1.0, PI) - 0.5).abs() < 1e-15);
        let (f, b) = min_fidelity(1.0, PI).unwrap();
        assert!(f.abs() < 1e-15 && (b - 0.5).abs() < 1e-15);
        assert!((grid_min(1.0, PI, 10_001) - f).abs() < 1e-8);

        assert_eq!(worst_case_beta(0.81, 0.0), 1.0);
        let (f, _) = min_fidelity(0.81, 0.0).unwrap();
        assert!((f - 0.81).abs() < 1e-15);
        assert!((grid_min(0.81, 0.0, 10_001) - 0.81).abs() < 1e-12);

        assert_eq!(min_fidelity(0.0, 0.7).unwrap(), (0.0, 1.0));
        assert_eq!(min_fidelity(1.0, 0.0).unwrap(), (1.0, 1.0));

        let (f, _) = min_fidelity(0.9, 0.3).unwrap();
        assert!((f - grid_min(0.9, 0.3, 100_001)).abs() < 1e-8);
    }

    #[test]
    fn published_closed_form_misses_the_minimum() {
        let b = published_worst_case_beta(1.0, PI);
        assert!((b - 0.25).abs() < 1e-15);
        let f = fidelity_psi(b, 1.0, PI).unwrap();
        assert!((f - 0.25).abs() < 1e-15);
        assert!(f > min_fidelity(1.0, PI).unwrap().0);
        let (f_pub, b_pub) = worst_case(1.0, PI, BVariant::Published).unwrap();
        assert_eq!((f_pub, b_pub), (f, b));
    }

    #[test]
    fn out_of_range_fidelity_is_an_error() {
        assert!(matches!(
            fidelity_psi(0.5, 4.0, 0.0),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn concurrence_examples() {
        assert_eq!(concurrence_from_amplitude(Complex64::new(1.0, 0.0)), 1.0);
        assert_eq!(concurrence_from_amplitude(Complex64::new(0.0, 0.0)), 0.0);
        let c = concurrence_from_amplitude(Complex64::new(0.6, 0.48));
        assert!((c - (0.36_f64 + 0.2304).sqrt()).abs() < 1e-15);
        assert!((c - 0.7684).abs() < 1e-4);
    }

    #[test]
    fn output_state_examples() {
        let bell = TwoQubitDensityMatrix::bell_phi_plus();
        bell.validate().unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let expected = if (r == 0 || r == 3) && (c == 0 || c == 3) {
                    0.5
                } else {
                    0.0
                };
                assert!((bell.0[r][c] - Complex64::new(expected, 0.0)).norm() < 1e-15);
            }
        }
        let separable = two_qubit_output_state(Complex64::new(0.0, 0.0));
        assert_eq!(separable.0[0][0].re, 0.5);
        assert_eq!(separable.0[2][2].re, 0.5);
        assert_eq!(separable.0[3][3].re, 0.0);
        assert_eq!(wootters_concurrence(&separable).unwrap(), 0.0);
    }

    #[test]
    fn wootters_reference_states() {
        assert!(
            (wootters_concurrence(&TwoQubitDensityMatrix::bell_phi_plus()).unwrap() - 1.0).abs()
                < 1e-12
        );
        assert_eq!(
            wootters_concurrence(&TwoQubitDensityMatrix::maximally_mixed()).unwrap(),
            0.0
        );
    }

    #[test]
    fn wootters_rejects_invalid_input() {
        let mut bad = TwoQubitDensityMatrix::maximally_mixed();
        bad.0[0][0] = Complex64::new(0.5, 0.0);
        assert!(wootters_concurrence(&bad).is_err());
        let mut negative = TwoQubitDensityMatrix::maximally_mixed();
        negative.0[0][0] = Complex64::new(-0.25, 0.0);
        negative.0[1][1] = Complex64::new(0.75, 0.0);
        assert!(wootters_concurrence(&negative).is_err());
    }

    #[test]
    fn qubit_fidelity_of_mixed_states() {
        let half = Complex64::new(0.5, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let mixed = QubitDensityMatrix([[half, zero], [zero, half]]);
        assert!((qubit_fidelity(&mixed, &mixed) - 1.0).abs() < 1e-15);
        let up = QubitDensityMatrix::pure(Complex64::new(1.0, 0.0), zero);
        assert!((qubit_fidelity(&up, &mixed) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn reduced_qubit_examples() {
        let f = Complex64::from_polar(0.8, 0.4);
        let vacuum = reduced_output_qubit(0.0, 0.3, f);
        assert_eq!(vacuum.0[0][0].re, 1.0);
        assert_eq!(vacuum.0[1][1].re, 0.0);
        assert_eq!(vacuum.0[1][0].norm(), 0.0);
        let excited = reduced_output_qubit(1.0, 0.0, f);
        assert!((excited.0[1][1].re - 0.64).abs() < 1e-15);
        assert!((excited.0[0][0].re - 0.36).abs() < 1e-15);
        assert!(excited.0[0][1].norm() < 1e-15);
        excited.validate().unwrap();
    }

    #[test]
    fn uniform_average_of_state_fidelity() {
        // Simpson rule over |beta|^2 in [0, 1]; F_psi is quadratic so the rule is exact.
        for (p, dphi) in [(0.3, 0.2), (0.9, 2.5), (1.0, 0.0), (0.05, -1.0)] {
            let n = 2000;
            let h = 1.0 / n as f64;
            let mut s = 0.0;
            for k in 0..=n {
                let w = if k == 0 || k == n {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                s += w * fidelity_psi(k as f64 * h, p, dphi).unwrap();
            }
            assert!((s * h / 3.0 - avg_fidelity(p, dphi)).abs() < 1e-6);
        }
    }

    #[test]
    fn minimizer_matches_brute_force_on_a_grid() {
        let points: Vec<(f64, f64)> = (0..10)
            .flat_map(|i| {
                (0..20).map(move |j| (i as f64 / 9.0, -PI + (j as f64 + 1.0) * PI / 10.0))
            })
            .collect();
        assert_eq!(points.len(), 200);
        for (p, dphi) in points {
            let (f, _) = min_fidelity(p, dphi).unwrap();
            assert!(
                (f - grid_min(p, dphi, 100_001)).abs() < 1e-8,
                "p={p} dphi={dphi}"
            );
        }
    }

    proptest! {
        #[test]
        fn measures_stay_in_unit_interval(p in 0.0..=1.0f64, dphi in -PI..=PI, x in 0.0..=1.0f64) {
            let f = fidelity_psi(x, p, dphi).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
            let avg = avg_fidelity(p, dphi);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&avg));
            let (fmin, b) = min_fidelity(p, dphi).unwrap();
            prop_assert!((0.0..=1.0).contains(&fmin) && (0.0..=1.0).contains(&b));
            prop_assert!(fmin <= f + 1e-15);
            prop_assert!(fmin <= avg + 1e-12);
        }

        #[test]
        fn measures_are_even_in_phase(p in 0.0..=1.0f64, dphi in 0.0..=PI, x in 0.0..=1.0f64) {
            prop_assert_eq!(fidelity_psi(x, p, dphi).unwrap(), fidelity_psi(x, p, -dphi).unwrap());
            prop_assert_eq!(avg_fidelity(p, dphi), avg_fidelity(p, -dphi));
            prop_assert_eq!(min_fidelity(p, dphi).unwrap(), min_fidelity(p, -dphi).unwrap());
        }

        #[test]
        fn monotone_in_p_without_phase_error(p in 0.0..=1.0f64, q in 0.0..=1.0f64) {
            let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
            prop_assert!(avg_fidelity(lo, 0.0) <= avg_fidelity(hi, 0.0));
            prop_assert!(min_fidelity(lo, 0.0).unwrap().0 <= min_fidelity(hi, 0.0).unwrap().0);
        }

        #[test]
        fn reduced_state_overlap_reproduces_state_fidelity(
            x in 0.0..=1.0f64,
            p in 0.0..=1.0f64,
            dphi in -PI..=PI,
            phi_id in -PI..=PI,
            alpha_phase in -PI..=PI,
        ) {
            let f = Complex64::from_polar(p.sqrt(), phi_id + dphi);
            let rho = reduced_output_qubit(x, alpha_phase, f);
            // receiver undoes the known ideal phase on |1>
            let undo = Complex64::from_polar(1.0, -phi_id);
            let mut compensated = rho;
            compensated.0[1][0] = rho.0[1][0] * undo;
            compensated.0[0][1] = rho.0[0][1] * undo.conj();
            let psi = QubitDensityMatrix::pure(
                Complex64::from_polar((1.0 - x).sqrt(), alpha_phase),
                Complex64::new(x.sqrt(), 0.0),
            );
            let overlap = qubit_fidelity(&psi, &compensated);
            prop_assert!((overlap - fidelity_psi(x, p, dphi).unwrap()).abs() < 1e-10);
        }

        #[test]
        fn wootters_matches_amplitude_modulus(r in 0.0..=1.0f64, theta in -PI..=PI) {
            let f = Complex64::from_polar(r, theta);
            let rho = two_qubit_output_state(f);
            rho.validate().unwrap();
            let c = wootters_concurrence(&rho).unwrap();
            prop_assert!((c - concurrence_from_amplitude(f)).abs() < 1e-10, "c={} |f|={}", c, r);
        }
    }
}
