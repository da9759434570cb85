//! Gaussian decay law for ensemble-averaged fidelities,
//!
//! `G(n, sigma_eps, sigma_J) = A s exp(-c n sigma_J^2 - d n sigma_eps^2) + C t`,
//!
//! fitted by damped Gauss-Newton (Levenberg-Marquardt). The per-point scales
//! `s` and `t` are 1 unless the amplitude is held at a protocol-specific
//! closed form that depends on `N` (see [`prepare_fit`]).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::chain::Protocol;
use crate::ensemble::SweepResult;
use crate::linalg::symmetric_eigen_dense;
use crate::math::{exp, sqrt};
use crate::{Error, Result};

pub const MAX_ITERATIONS: usize = 500;
pub const STEP_TOLERANCE: f64 = 1e-9;
pub const GRADIENT_TOLERANCE: f64 = 1e-10;
/// Data points required per free parameter.
pub const POINTS_PER_PARAMETER: usize = 4;
/// Normal matrices with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e14;

const PARAMS: usize = 4;

/// Parameters `(A, C, c, d)` and which of them are held fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingModel {
    pub a: f64,
    pub c_offset: f64,
    pub c: f64,
    pub d: f64,
    /// `[A, C, c, d]`; `true` means held.
    pub fixed: [bool; 4],
}

impl ScalingModel {
    pub fn new(a: f64, c_offset: f64, c: f64, d: f64) -> Self {
        Self {
            a,
            c_offset,
            c,
            d,
            fixed: [false; 4],
        }
    }

    pub fn with_fixed(mut self, fixed: [bool; 4]) -> Self {
        self.fixed = fixed;
        self
    }

    fn params(&self) -> [f64; 4] {
        [self.a, self.c_offset, self.c, self.d]
    }

    fn set_params(&mut self, p: [f64; 4]) {
        [self.a, self.c_offset, self.c, self.d] = p;
    }

    pub fn free_count(&self) -> usize {
        self.fixed.iter().filter(|f| !**f).count()
    }

    /// `G` at zero disorder stays a valid fidelity.
    pub fn is_physical(&self) -> bool {
        self.a + self.c_offset <= 1.0 + 1e-9 && self.c >= 0.0 && self.d >= 0.0
    }
}

/// One observation together with its amplitude and offset scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitPoint {
    pub n: usize,
    pub sigma_eps: f64,
    pub sigma_j: f64,
    pub value: f64,
    pub amplitude_scale: f64,
    pub offset_scale: f64,
}

impl FitPoint {
    pub fn new(n: usize, sigma_eps: f64, sigma_j: f64, value: f64) -> Self {
        Self {
            n,
            sigma_eps,
            sigma_j,
            value,
            amplitude_scale: 1.0,
            offset_scale: 1.0,
        }
    }

    fn decay(&self, m: &ScalingModel) -> f64 {
        let n = self.n as f64;
        exp(-m.c * n * self.sigma_j * self.sigma_j - m.d * n * self.sigma_eps * self.sigma_eps)
    }

    fn predict(&self, m: &ScalingModel) -> f64 {
        m.a * self.amplitude_scale * self.decay(m) + m.c_offset * self.offset_scale
    }

    fn gradient(&self, m: &ScalingModel) -> [f64; 4] {
        let n = self.n as f64;
        let e = self.amplitude_scale * self.decay(m);
        [
            e,
            self.offset_scale,
            -m.a * e * n * self.sigma_j * self.sigma_j,
            -m.a * e * n * self.sigma_eps * self.sigma_eps,
        ]
    }
}

/// `A exp(-c n sigma_J^2 - d n sigma_eps^2) + C`.
pub fn evaluate_model(m: &ScalingModel, n: usize, sigma_eps: f64, sigma_j: f64) -> f64 {
    FitPoint::new(n, sigma_eps, sigma_j, 0.0).predict(m)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FitResult {
    pub model: ScalingModel,
    pub rms_residual: f64,
    pub initial_rms_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    /// Parameter variances from the residual variance and `(J^T J)^-1`;
    /// zero for held parameters.
    pub covariance_diag: [f64; 4],
}

fn sum_sq(points: &[FitPoint], m: &ScalingModel) -> f64 {
    points
        .iter()
        .map(|p| {
            let r = p.predict(m) - p.value;
            r * r
        })
        .sum()
}

/// `J^T J` and `J^T r` restricted to the free parameters.
fn normal_equations(points: &[FitPoint], m: &ScalingModel, free: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let k = free.len();
    let mut jtj = vec![0.0; k * k];
    let mut jtr = vec![0.0; k];
    for p in points {
        let g = p.gradient(m);
        let r = p.predict(m) - p.value;
        for (a, &ia) in free.iter().enumerate() {
            jtr[a] += g[ia] * r;
            for (b, &ib) in free.iter().enumerate() {
                jtj[a * k + b] += g[ia] * g[ib];
            }
        }
    }
    (jtj, jtr)
}

/// Solves `A x = b` for a small symmetric positive definite `A`.
fn cholesky_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let k = b.len();
    let mut l = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[i * k + j];
            for q in 0..j {
                s -= l[i * k + q] * l[j * k + q];
            }
            if i == j {
                if s.is_nan() || s <= 0.0 {
                    return None;
                }
                l[i * k + i] = sqrt(s);
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    let mut y = vec![0.0; k];
    for i in 0..k {
        let s: f64 = (0..i).map(|q| l[i * k + q] * y[q]).sum();
        y[i] = (b[i] - s) / l[i * k + i];
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|q| l[q * k + i] * x[q]).sum();
        x[i] = (y[i] - s) / l[i * k + i];
    }
    Some(x)
}

fn norm(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum())
}

/// Condition number of `jtj` and the diagonal of its inverse.
fn conditioned_inverse_diag(jtj: &[f64], k: usize) -> Result<(f64, Vec<f64>)> {
    let (values, vectors) = symmetric_eigen_dense(jtj, k)?;
    let largest = values[k - 1];
    let smallest = values[0];
    let condition = if smallest > 0.0 {
        largest / smallest
    } else {
        f64::INFINITY
    };
    if condition.is_nan() || condition > MAX_CONDITION {
        return Err(Error::SingularFit { condition });
    }
    let diag = (0..k)
        .map(|i| {
            (0..k)
                .map(|e| vectors[e * k + i] * vectors[e * k + i] / values[e])
                .sum()
        })
        .collect();
    Ok((condition, diag))
}

/// Least-squares fit of the free parameters of `init` to `points`.
///
/// `c` and `d` are kept non-negative. Non-convergence is not an error: the
/// best model found is returned with `converged = false`.
pub fn fit_scaling_law(points: &[FitPoint], init: &ScalingModel) -> Result<FitResult> {
    let free: Vec<usize> = (0..PARAMS).filter(|&i| !init.fixed[i]).collect();
    let k = free.len();
    let required = POINTS_PER_PARAMETER * k.max(1);
    if points.len() < required {
        return Err(Error::InsufficientData {
            points: points.len(),
            free: k,
            required,
        });
    }
    if points
        .iter()
        .any(|p| !(p.value.is_finite() && p.sigma_eps.is_finite() && p.sigma_j.is_finite()))
    {
        return Err(Error::invalid("points", "non-finite data"));
    }
    let m_count = points.len() as f64;

    let mut model = *init;
    model.c = model.c.max(0.0);
    model.d = model.d.max(0.0);
    let mut cost = sum_sq(points, &model);
    let initial_rms_residual = sqrt(cost / m_count);

    if k == 0 {
        return Ok(FitResult {
            model,
            rms_residual: initial_rms_residual,
            initial_rms_residual,
            iterations: 0,
            converged: true,
            gradient_norm: 0.0,
            covariance_diag: [0.0; 4],
        });
    }

    let (jtj0, _) = normal_equations(points, &model, &free);
    conditioned_inverse_diag(&jtj0, k)?;

    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut gradient_norm;
    loop {
        let (jtj, jtr) = normal_equations(points, &model, &free);
        gradient_norm = norm(&jtr);
        if gradient_norm < GRADIENT_TOLERANCE {
            converged = true;
            break;
        }
        if iterations >= MAX_ITERATIONS {
            break;
        }
        iterations += 1;

        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = jtj.clone();
            for i in 0..k {
                damped[i * k + i] += lambda * jtj[i * k + i].max(1e-300);
            }
            let rhs: Vec<f64> = jtr.iter().map(|g| -g).collect();
            let Some(step) = cholesky_solve(&damped, &rhs) else {
                lambda *= 10.0;
                continue;
            };
            let old = model.params();
            let mut trial_params = old;
            for (s, &i) in step.iter().zip(&free) {
                trial_params[i] += s;
            }
            trial_params[2] = trial_params[2].max(0.0);
            trial_params[3] = trial_params[3].max(0.0);
            let mut trial = model;
            trial.set_params(trial_params);
            let trial_cost = sum_sq(points, &trial);
            if trial_cost <= cost {
                let moved: Vec<f64> = free.iter().map(|&i| trial_params[i] - old[i]).collect();
                let scale: Vec<f64> = free.iter().map(|&i| old[i]).collect();
                let small = norm(&moved) <= STEP_TOLERANCE * (norm(&scale) + STEP_TOLERANCE);
                model = trial;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if small {
                    converged = true;
                }
                break;
            }
            lambda *= 2.0;
        }
        if converged || !accepted {
            let (_, jtr) = normal_equations(points, &model, &free);
            gradient_norm = norm(&jtr);
            break;
        }
    }

    let (jtj, _) = normal_equations(points, &model, &free);
    let dof = points.len().saturating_sub(k).max(1) as f64;
    let residual_variance = cost / dof;
    let mut covariance_diag = [0.0; 4];
    if let Ok((_, inv)) = conditioned_inverse_diag(&jtj, k) {
        for (v, &i) in inv.iter().zip(&free) {
            covariance_diag[i] = residual_variance * v;
        }
    } else {
        for &i in &free {
            covariance_diag[i] = f64::INFINITY;
        }
    }

    Ok(FitResult {
        model,
        rms_residual: sqrt(cost / m_count),
        initial_rms_residual,
        iterations,
        converged,
        gradient_norm,
        covariance_diag,
    })
}

/// Ensemble statistic a fit targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum FitTarget {
    AverageFidelity,
    MinimumFidelity,
}

/// How `A` and `C` are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum AmplitudeRule {
    /// Held at the protocol's closed form; only `c` and `d` are fitted.
    #[default]
    ClosedForm,
    /// All four parameters fitted, with `s = t = 1`.
    Free,
}

/// Which `<B>` enters the closed-form amplitudes of minimum-fidelity fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum BReference {
    /// Mean of `<B>` over all cells of the same `N`.
    #[default]
    GridMean,
    /// `<B>` of the cell with the strongest total disorder for that `N`.
    LargestDisorder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitOptions {
    pub target: FitTarget,
    pub amplitude: AmplitudeRule,
    pub b_reference: BReference,
}

impl FitOptions {
    pub fn new(target: FitTarget) -> Self {
        Self {
            target,
            amplitude: AmplitudeRule::default(),
            b_reference: BReference::default(),
        }
    }
}

/// Per-cell ensemble means, as read from a sweep or a result table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSample {
    pub n: usize,
    pub sigma_j: f64,
    pub sigma_eps: f64,
    pub mean_favg: f64,
    pub mean_fmin: f64,
    pub mean_b: f64,
    /// Transfer probability of the clean chain of length `n`.
    pub p_id: f64,
}

pub fn samples_from_sweep(sweep: &SweepResult) -> Vec<FitSample> {
    sweep
        .cells
        .iter()
        .map(|c| FitSample {
            n: c.n,
            sigma_j: c.sigma_j,
            sigma_eps: c.sigma_eps,
            mean_favg: c.stats.f_avg.mean,
            mean_fmin: c.stats.f_min.mean,
            mean_b: c.stats.b_worst.mean,
            p_id: c.p_id,
        })
        .collect()
}

/// Fit points, initial model and the `<B>` used per chain length.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedFit {
    pub points: Vec<FitPoint>,
    pub init: ScalingModel,
    /// `(N, <B>)`; empty for average-fidelity fits.
    pub b_used: Vec<(usize, f64)>,
}

fn b_for(samples: &[FitSample], n: usize, rule: BReference) -> f64 {
    let cells = samples.iter().filter(|s| s.n == n);
    match rule {
        BReference::GridMean => {
            let (sum, count) = cells.fold((0.0, 0usize), |(s, c), x| (s + x.mean_b, c + 1));
            sum / count as f64
        }
        BReference::LargestDisorder => cells
            .fold(None::<&FitSample>, |best, x| match best {
                Some(b)
                    if b.sigma_j * b.sigma_j + b.sigma_eps * b.sigma_eps
                        >= x.sigma_j * x.sigma_j + x.sigma_eps * x.sigma_eps =>
                {
                    Some(b)
                }
                _ => Some(x),
            })
            .map_or(f64::NAN, |s| s.mean_b),
    }
}

/// Builds the fit problem for one protocol.
///
/// Closed forms, with `p` the clean-chain transfer probability:
///
/// | protocol         | target  | `A s`                   | `C t`     |
/// |------------------|---------|-------------------------|-----------|
/// | spin-analogue    | average | `1/2`                   | `1/2`     |
/// | optimal-coupling | average | `p^2/3 + p/6`           | `1/2`     |
/// | spin-analogue    | minimum | `<B>`                   | `1 - <B>` |
/// | optimal-coupling | minimum | `<B> (2p^2/3 + p/3)`    | `1 - <B>` |
pub fn prepare_fit(
    protocol: Protocol,
    samples: &[FitSample],
    options: &FitOptions,
) -> Result<PreparedFit> {
    if samples.is_empty() {
        return Err(Error::invalid("samples", "no data to fit"));
    }
    let mut ns: Vec<usize> = samples.iter().map(|s| s.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let b_used: Vec<(usize, f64)> = match options.target {
        FitTarget::AverageFidelity => Vec::new(),
        FitTarget::MinimumFidelity => ns
            .iter()
            .map(|&n| (n, b_for(samples, n, options.b_reference)))
            .collect(),
    };
    let b_of = |n: usize| {
        b_used
            .iter()
            .find(|(m, _)| *m == n)
            .map_or(f64::NAN, |(_, b)| *b)
    };

    let closed = |s: &FitSample| -> (f64, f64) {
        let p = s.p_id;
        match (protocol, options.target) {
            (Protocol::SpinAnalogue, FitTarget::AverageFidelity) => (0.5, 0.5),
            (Protocol::OptimalCoupling, FitTarget::AverageFidelity) => (p * p / 3.0 + p / 6.0, 0.5),
            (Protocol::SpinAnalogue, FitTarget::MinimumFidelity) => {
                let b = b_of(s.n);
                (b, 1.0 - b)
            }
            (Protocol::OptimalCoupling, FitTarget::MinimumFidelity) => {
                let b = b_of(s.n);
                (b * (2.0 * p * p / 3.0 + p / 3.0), 1.0 - b)
            }
        }
    };

    let value = |s: &FitSample| match options.target {
        FitTarget::AverageFidelity => s.mean_favg,
        FitTarget::MinimumFidelity => s.mean_fmin,
    };

    let mut points = Vec::with_capacity(samples.len());
    let (mut a_sum, mut c_sum) = (0.0, 0.0);
    for s in samples {
        let (a, c) = closed(s);
        if !(a.is_finite() && c.is_finite()) {
            return Err(Error::invalid(
                "samples",
                format!("closed-form amplitude is not finite for N={}", s.n),
            ));
        }
        a_sum += a;
        c_sum += c;
        let mut point = FitPoint::new(s.n, s.sigma_eps, s.sigma_j, value(s));
        if options.amplitude == AmplitudeRule::ClosedForm {
            point.amplitude_scale = a;
            point.offset_scale = c;
        }
        points.push(point);
    }

    let init = match options.amplitude {
        AmplitudeRule::ClosedForm => {
            ScalingModel::new(1.0, 1.0, 1.0, 1.0).with_fixed([true, true, false, false])
        }
        AmplitudeRule::Free => {
            let len = samples.len() as f64;
            ScalingModel::new(a_sum / len, c_sum / len, 1.0, 1.0)
        }
    };
    Ok(PreparedFit {
        points,
        init,
        b_used,
    })
}

/// [`prepare_fit`] followed by [`fit_scaling_law`].
pub fn fit_protocol(
    protocol: Protocol,
    samples: &[FitSample],
    options: &FitOptions,
) -> Result<(FitResult, PreparedFit)> {
    let prepared = prepare_fit(protocol, samples, options)?;
    let result = fit_scaling_law(&prepared.points, &prepared.init)?;
    Ok((result, prepared))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    const NS: [usize; 3] = [15, 25, 50];

    fn sigmas() -> Vec<f64> {
        (0..=6).map(|k| 0.05 * k as f64).collect()
    }

    /// One-dimensional sweeps along each axis plus the diagonal.
    fn design() -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        for &n in &NS {
            for &s in &sigmas() {
                out.push((n, s, 0.0));
                out.push((n, 0.0, s));
                out.push((n, s, s));
            }
        }
        out
    }

    fn synthetic(truth: &ScalingModel, noise: Option<(u64, f64)>) -> Vec<FitPoint> {
        let mut rng = noise.map(|(seed, _)| ChaCha8Rng::seed_from_u64(seed));
        design()
            .into_iter()
            .map(|(n, se, sj)| {
                let mut v = evaluate_model(truth, n, se, sj);
                if let (Some(rng), Some((_, std))) = (rng.as_mut(), noise) {
                    let z: f64 = StandardNormal.sample(rng);
                    v += std * z;
                }
                FitPoint::new(n, se, sj, v)
            })
            .collect()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn model_examples() {
        let m = ScalingModel::new(0.5, 0.5, 1.07, 0.7);
        assert_eq!(evaluate_model(&m, 25, 0.0, 0.0), 1.0);
        assert!((evaluate_model(&m, 25, 0.2, 0.0) - (0.5 * exp(-0.7) + 0.5)).abs() < 1e-15);
        assert!((evaluate_model(&m, 25, 0.2, 0.0) - 0.748).abs() < 5e-4);
        let flat = ScalingModel::new(0.3, 0.4, 0.0, 0.0);
        assert!((evaluate_model(&flat, 50, 0.4, 0.1) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn noiseless_recovery() {
        let truth = ScalingModel::new(0.45, 0.52, 1.2, 0.46);
        let points = synthetic(&truth, None);
        let fit = fit_scaling_law(&points, &ScalingModel::new(0.5, 0.5, 1.0, 1.0)).unwrap();
        assert!(fit.converged);
        assert!(rel(fit.model.a, truth.a) < 1e-6);
        assert!(rel(fit.model.c_offset, truth.c_offset) < 1e-6);
        assert!(rel(fit.model.c, truth.c) < 1e-6);
        assert!(rel(fit.model.d, truth.d) < 1e-6);
    }

    #[test]
    fn noiseless_recovery_with_held_amplitude() {
        let truth = ScalingModel::new(0.5, 0.5, 1.07, 0.7);
        let points = synthetic(&truth, None);
        let init = ScalingModel::new(0.5, 0.5, 1.0, 1.0).with_fixed([true, true, false, false]);
        let fit = fit_scaling_law(&points, &init).unwrap();
        assert!(fit.converged);
        assert_eq!((fit.model.a, fit.model.c_offset), (0.5, 0.5));
        assert!(rel(fit.model.c, 1.07) < 1e-6);
        assert!(rel(fit.model.d, 0.7) < 1e-6);
        assert_eq!(fit.covariance_diag[0], 0.0);
    }

    #[test]
    fn noisy_recovery_within_five_percent() {
        let truth = ScalingModel::new(0.5, 0.5, 1.07, 0.7);
        for seed in 0..20 {
            let points = synthetic(&truth, Some((seed, 0.005)));
            let fit = fit_scaling_law(&points, &ScalingModel::new(0.5, 0.5, 1.0, 1.0)).unwrap();
            assert!(fit.converged, "seed {seed}");
            for (got, want) in [
                (fit.model.a, truth.a),
                (fit.model.c_offset, truth.c_offset),
                (fit.model.c, truth.c),
                (fit.model.d, truth.d),
            ] {
                assert!(rel(got, want) < 0.05, "seed {seed}: {got} vs {want}");
            }
            assert!(fit.rms_residual <= fit.initial_rms_residual);
        }
    }

    #[test]
    fn subset_and_full_grid_agree() {
        let truth = ScalingModel::new(0.5, 0.5, 0.9, 0.6);
        let full = synthetic(&truth, None);
        let subset: Vec<FitPoint> = full
            .iter()
            .copied()
            .step_by(3)
            .chain(full.iter().copied().skip(1).step_by(3))
            .collect();
        let init = ScalingModel::new(0.6, 0.4, 1.0, 1.0);
        let a = fit_scaling_law(&full, &init).unwrap();
        let b = fit_scaling_law(&subset, &init).unwrap();
        for (x, y) in a.model.params().iter().zip(b.model.params()) {
            assert!(rel(*x, y) < 1e-6);
        }
    }

    #[test]
    fn decay_constants_stay_non_negative() {
        // data increasing with disorder pulls c and d below zero
        let points: Vec<FitPoint> = design()
            .into_iter()
            .map(|(n, se, sj)| FitPoint::new(n, se, sj, 0.5 + 0.1 * (se + sj)))
            .collect();
        let init = ScalingModel::new(0.5, 0.5, 1.0, 1.0).with_fixed([true, true, false, false]);
        let fit = fit_scaling_law(&points, &init).unwrap();
        assert!(fit.model.c >= 0.0 && fit.model.d >= 0.0);
        assert!(fit.rms_residual <= fit.initial_rms_residual);
    }

    #[test]
    fn rejects_underdetermined_and_degenerate_data() {
        let truth = ScalingModel::new(0.5, 0.5, 1.0, 1.0);
        let few = &synthetic(&truth, None)[..7];
        assert!(matches!(
            fit_scaling_law(few, &ScalingModel::new(0.5, 0.5, 1.0, 1.0)),
            Err(Error::InsufficientData {
                points: 7,
                free: 4,
                required: 16
            })
        ));
        // no sigma_J variation: c is unidentifiable
        let flat: Vec<FitPoint> = (0..20)
            .map(|k| FitPoint::new(25, 0.01 * k as f64, 0.0, 0.9))
            .collect();
        assert!(matches!(
            fit_scaling_law(&flat, &ScalingModel::new(0.5, 0.5, 1.0, 1.0)),
            Err(Error::SingularFit { .. })
        ));
    }

    #[test]
    fn deterministic() {
        let truth = ScalingModel::new(0.5, 0.5, 1.07, 0.7);
        let points = synthetic(&truth, Some((3, 0.005)));
        let init = ScalingModel::new(0.5, 0.5, 1.0, 1.0);
        assert_eq!(
            fit_scaling_law(&points, &init).unwrap(),
            fit_scaling_law(&points, &init).unwrap()
        );
    }

    fn samples(p_id: f64, b: f64) -> Vec<FitSample> {
        design()
            .into_iter()
            .map(|(n, se, sj)| FitSample {
                n,
                sigma_j: sj,
                sigma_eps: se,
                mean_favg: 0.0,
                mean_fmin: 0.0,
                mean_b: b + se,
                p_id,
            })
            .collect()
    }

    #[test]
    fn closed_form_amplitudes() {
        let p = 0.9;
        let s = samples(p, 0.5);
        let avg = prepare_fit(
            Protocol::OptimalCoupling,
            &s,
            &FitOptions::new(FitTarget::AverageFidelity),
        )
        .unwrap();
        assert!((avg.points[0].amplitude_scale - (p * p / 3.0 + p / 6.0)).abs() < 1e-15);
        assert_eq!(avg.points[0].offset_scale, 0.5);
        assert_eq!(avg.init.fixed, [true, true, false, false]);
        assert!(avg.b_used.is_empty());

        let min = prepare_fit(
            Protocol::SpinAnalogue,
            &s,
            &FitOptions::new(FitTarget::MinimumFidelity),
        )
        .unwrap();
        // sigma_eps is nonzero on two of the three lines per sigma
        let mean_b = 0.5 + 2.0 * sigmas().iter().sum::<f64>() / 21.0;
        assert!((min.b_used[0].1 - mean_b).abs() < 1e-12);
        assert!((min.points[0].amplitude_scale - mean_b).abs() < 1e-12);
        assert!((min.points[0].offset_scale - (1.0 - mean_b)).abs() < 1e-12);

        let largest = FitOptions {
            b_reference: BReference::LargestDisorder,
            ..FitOptions::new(FitTarget::MinimumFidelity)
        };
        let top = prepare_fit(Protocol::OptimalCoupling, &s, &largest).unwrap();
        assert!((top.b_used[0].1 - 0.8).abs() < 1e-12);
        assert!(
            (top.points[0].amplitude_scale - 0.8 * (2.0 * p * p / 3.0 + p / 3.0)).abs() < 1e-12
        );

        let free = FitOptions {
            amplitude: AmplitudeRule::Free,
            ..FitOptions::new(FitTarget::AverageFidelity)
        };
        let f = prepare_fit(Protocol::SpinAnalogue, &s, &free).unwrap();
        assert_eq!(f.init.free_count(), 4);
        assert_eq!(f.points[0].amplitude_scale, 1.0);
    }

    #[test]
    fn closed_form_fit_recovers_synthetic_sweep() {
        let p = 0.94;
        let a = p * p / 3.0 + p / 6.0;
        let truth = ScalingModel::new(a, 0.5, 1.2, 0.46);
        let mut s = samples(p, 0.0);
        for x in &mut s {
            x.mean_favg = evaluate_model(&truth, x.n, x.sigma_eps, x.sigma_j);
        }
        let (fit, _) = fit_protocol(
            Protocol::OptimalCoupling,
            &s,
            &FitOptions::new(FitTarget::AverageFidelity),
        )
        .unwrap();
        assert!(rel(fit.model.c, 1.2) < 1e-6);
        assert!(rel(fit.model.d, 0.46) < 1e-6);
    }
}
