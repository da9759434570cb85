//! Ideal and disordered chains for the two transfer protocols.
//!
//! Energies and couplings are dimensionless, in units of the reference
//! coupling `J0`. The single-excitation matrix has `-eps_i` on the diagonal and
//! `J_i` on the off-diagonal, so transfer phases follow that convention.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{eigh_tridiag_endpoints, TridiagonalSymmetric};
use crate::math;
use crate::optimize::{golden_section_maximize, grid_maximize};
use crate::{ComplexAmplitude, Error, Result};

/// Default common on-site energy.
pub const DEFAULT_EPSILON: f64 = 1.0;

/// Which coupling pattern a chain was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Protocol {
    /// Fully engineered couplings `J_i ~ sqrt(i(N-i))`.
    SpinAnalogue,
    /// Uniform couplings with the two outermost ones scaled by `alpha`.
    OptimalCoupling,
}

impl Protocol {
    pub const ALL: [Protocol; 2] = [Protocol::SpinAnalogue, Protocol::OptimalCoupling];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::SpinAnalogue => "spin-analogue",
            Protocol::OptimalCoupling => "optimal-coupling",
        }
    }
}

impl core::fmt::Display for Protocol {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spin-analogue" | "spin" => Ok(Protocol::SpinAnalogue),
            "optimal-coupling" | "optimal" => Ok(Protocol::OptimalCoupling),
            other => Err(Error::invalid(
                "protocol",
                alloc::format!("unknown protocol `{other}`"),
            )),
        }
    }
}

/// Protocol together with its free parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProtocolKind {
    SpinAnalogue,
    OptimalCoupling { alpha: f64 },
}

impl ProtocolKind {
    pub fn protocol(self) -> Protocol {
        match self {
            ProtocolKind::SpinAnalogue => Protocol::SpinAnalogue,
            ProtocolKind::OptimalCoupling { .. } => Protocol::OptimalCoupling,
        }
    }

    pub fn alpha(self) -> Option<f64> {
        match self {
            ProtocolKind::SpinAnalogue => None,
            ProtocolKind::OptimalCoupling { alpha } => Some(alpha),
        }
    }
}

/// How the boundary ratio of an optimal-coupling chain is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaMode {
    /// Maximize the ideal transfer probability numerically.
    Optimized,
    /// `N^(-1/6)`.
    Heuristic,
    Explicit(f64),
}

/// A concrete chain: on-site energies, couplings and how they were made.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub onsite: Vec<f64>,
    pub couplings: Vec<f64>,
    pub protocol: ProtocolKind,
    pub epsilon_base: f64,
}

impl ChainSpec {
    #[inline]
    pub fn n_sites(&self) -> usize {
        self.onsite.len()
    }

    /// Single-excitation matrix: `H[i][i] = -eps_i`, `H[i][i+1] = J_i`.
    pub fn hamiltonian(&self) -> Result<TridiagonalSymmetric> {
        TridiagonalSymmetric::new(
            self.onsite.iter().map(|e| -e).collect(),
            self.couplings.clone(),
        )
    }

    /// Copy of the chain read from the other end.
    pub fn mirrored(&self) -> ChainSpec {
        let mut out = self.clone();
        out.onsite.reverse();
        out.couplings.reverse();
        out
    }
}

fn check_sites(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::invalid(
            "n",
            alloc::format!("need at least 3 sites, got {n}"),
        ));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !epsilon.is_finite() {
        return Err(Error::invalid("epsilon", "must be finite"));
    }
    Ok(())
}

/// `J0' = [Nc (Nc - 1)]^(-1/2)` with `Nc = ceil(N / 2)`.
pub fn spin_analogue_unit(n: usize) -> f64 {
    let nc = n.div_ceil(2) as f64;
    1.0 / math::sqrt(nc * (nc - 1.0))
}

/// Spin-analogue chain: `J_i = J0' sqrt(i (N - i))`, uniform on-site energy.
///
/// For even `N` the central coupling exceeds 1 (`1/sqrt(1 - 2/N)`); the
/// normalization is kept as is.
pub fn build_spin_analogue(n: usize, epsilon: f64) -> Result<ChainSpec> {
    check_sites(n)?;
    check_epsilon(epsilon)?;
    let unit = spin_analogue_unit(n);
    let couplings = (1..n)
        .map(|i| unit * math::sqrt((i * (n - i)) as f64))
        .collect();
    Ok(ChainSpec {
        onsite: alloc::vec![epsilon; n],
        couplings,
        protocol: ProtocolKind::SpinAnalogue,
        epsilon_base: epsilon,
    })
}

/// Uniform chain whose first and last coupling are scaled by `alpha`.
pub fn build_optimal_coupling(n: usize, epsilon: f64, alpha: f64) -> Result<ChainSpec> {
    check_sites(n)?;
    check_epsilon(epsilon)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(
            "alpha",
            alloc::format!("must lie in (0, 1], got {alpha}"),
        ));
    }
    let mut couplings = alloc::vec![1.0; n - 1];
    couplings[0] = alpha;
    couplings[n - 2] = alpha;
    Ok(ChainSpec {
        onsite: alloc::vec![epsilon; n],
        couplings,
        protocol: ProtocolKind::OptimalCoupling { alpha },
        epsilon_base: epsilon,
    })
}

/// Builds the ideal chain for `protocol`, resolving `alpha` if needed.
pub fn build_ideal(
    protocol: Protocol,
    n: usize,
    epsilon: f64,
    alpha: AlphaMode,
) -> Result<ChainSpec> {
    match protocol {
        Protocol::SpinAnalogue => build_spin_analogue(n, epsilon),
        Protocol::OptimalCoupling => {
            let alpha = match alpha {
                AlphaMode::Optimized => optimize_alpha(n, epsilon)?.alpha,
                AlphaMode::Heuristic => heuristic_alpha(n),
                AlphaMode::Explicit(value) => value,
            };
            build_optimal_coupling(n, epsilon, alpha)
        }
    }
}

/// `N^(-1/6)`, the scaling of the optimal boundary ratio.
pub fn heuristic_alpha(n: usize) -> f64 {
    math::powf(n as f64, -1.0 / 6.0)
}

/// Time of first arrival at the far end, in units of `1/J0`.
///
/// Spin-analogue: the exact mirror time `pi / (2 J0')` of the equidistant
/// spectrum (`pi N / 4` for large `N`).
///
/// Optimal-coupling: `2 (0.25 N + 0.52 N^(1/3))`. The bracketed arrival-time
/// estimate is quoted for a hopping of `2 J0` per bond; this matrix hops with
/// `J0`, which doubles the time.
pub fn transfer_time(spec: &ChainSpec) -> f64 {
    let n = spec.n_sites();
    match spec.protocol {
        ProtocolKind::SpinAnalogue => PI / (2.0 * spin_analogue_unit(n)),
        ProtocolKind::OptimalCoupling { .. } => optimal_coupling_time(n),
    }
}

pub(crate) fn optimal_coupling_time(n: usize) -> f64 {
    let n = n as f64;
    2.0 * (0.25 * n + 0.52 * math::cbrt(n))
}

/// Strength of the static relative disorder and the seed of its random stream.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DisorderConfig {
    /// Standard deviation of the relative coupling noise `delta_i`.
    pub sigma_j: f64,
    /// Standard deviation of the relative on-site noise `eta_i`.
    pub sigma_eps: f64,
    pub master_seed: u64,
}

impl DisorderConfig {
    pub fn new(sigma_j: f64, sigma_eps: f64, master_seed: u64) -> Result<Self> {
        for (name, sigma) in [("sigma_j", sigma_j), ("sigma_eps", sigma_eps)] {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(Error::invalid(
                    name,
                    alloc::format!("must be finite and >= 0, got {sigma}"),
                ));
            }
        }
        Ok(Self {
            sigma_j,
            sigma_eps,
            master_seed,
        })
    }

    pub fn is_clean(&self) -> bool {
        self.sigma_j == 0.0 && self.sigma_eps == 0.0
    }
}

/// Random stream of realization `index`: ChaCha8 keyed by the master seed,
/// one stream per realization.
pub fn realization_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Applies `J_i -> J_i (1 + delta_i)` and `eps_i -> eps_i (1 + eta_i)`.
///
/// Coupling noise is drawn first, then on-site noise, from the stream of
/// `realization_index`, so the result depends on nothing else. Couplings may
/// turn negative for large `sigma_j`.
pub fn sample_disordered(
    spec: &ChainSpec,
    cfg: &DisorderConfig,
    realization_index: u64,
) -> ChainSpec {
    let mut rng = realization_rng(cfg.master_seed, realization_index);
    let mut out = spec.clone();
    for coupling in out.couplings.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *coupling *= 1.0 + cfg.sigma_j * z;
    }
    for energy in out.onsite.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *energy *= 1.0 + cfg.sigma_eps * z;
    }
    out
}

/// End-of-transfer amplitude `f_1N(tau)` and its polar decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferOutcome {
    pub amplitude: ComplexAmplitude,
    /// `|f|^2`
    pub p: f64,
    /// `arg f` in `(-pi, pi]`
    pub phi: f64,
    /// `phi - phi_id`, wrapped into `(-pi, pi]`
    pub delta_phi: f64,
    pub tau: f64,
}

impl TransferOutcome {
    fn from_amplitude(amplitude: ComplexAmplitude, tau: f64, reference_phase: Option<f64>) -> Self {
        let mut p = amplitude.norm_sqr();
        // unitarity bounds |f| by 1 up to rounding
        if p > 1.0 && p <= 1.0 + 1e-12 {
            p = 1.0;
        }
        let phi = math::wrap_phase(math::atan2(amplitude.im, amplitude.re));
        let delta_phi = match reference_phase {
            Some(reference) => math::wrap_phase(phi - reference),
            None => 0.0,
        };
        Self {
            amplitude,
            p,
            phi,
            delta_phi,
            tau,
        }
    }
}

/// `f_1N(tau)` for `spec` at time `tau`.
pub fn end_to_end_amplitude(spec: &ChainSpec, tau: f64) -> Result<ComplexAmplitude> {
    let spectrum = eigh_tridiag_endpoints(&spec.hamiltonian()?)?;
    Ok(spectrum.end_to_end_amplitude(tau))
}

/// Transfer outcome of the clean chain at its protocol transfer time.
pub fn ideal_reference(spec_ideal: &ChainSpec) -> Result<TransferOutcome> {
    let tau = transfer_time(spec_ideal);
    let amplitude = end_to_end_amplitude(spec_ideal, tau)?;
    Ok(TransferOutcome::from_amplitude(amplitude, tau, None))
}

/// Transfer through a disordered chain at the reference time, with the ideal
/// phase compensated.
pub fn run_transfer(
    spec_disordered: &ChainSpec,
    reference: &TransferOutcome,
) -> Result<TransferOutcome> {
    let amplitude = end_to_end_amplitude(spec_disordered, reference.tau)?;
    Ok(TransferOutcome::from_amplitude(
        amplitude,
        reference.tau,
        Some(reference.phi),
    ))
}

/// How the boundary ratio was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaSearch {
    GoldenSection,
    /// The bracketed search was rejected and a `1e-3` grid over `(0, 1]` was used.
    GridFallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaOptimum {
    pub alpha: f64,
    pub p_id: f64,
    pub method: AlphaSearch,
}

/// Bracket width at which the golden-section search stops.
pub const ALPHA_TOLERANCE: f64 = 1e-7;

/// Ideal transfer probability of the optimal-coupling chain as a function of `alpha`.
pub fn ideal_probability(n: usize, epsilon: f64, alpha: f64) -> Result<f64> {
    let spec = build_optimal_coupling(n, epsilon, alpha)?;
    Ok(ideal_reference(&spec)?.p)
}

/// Boundary ratio maximizing the ideal transfer probability.
///
/// Golden-section search on a bracket around `N^(-1/6)`. If the maximum lands
/// on an interior bracket edge or loses to the heuristic point, a grid scan of
/// `(0, 1]` with step `1e-3` replaces it.
pub fn optimize_alpha(n: usize, epsilon: f64) -> Result<AlphaOptimum> {
    check_sites(n)?;
    check_epsilon(epsilon)?;
    let seed = heuristic_alpha(n);
    let seed_p = ideal_probability(n, epsilon, seed)?;
    let lo = 0.5 * seed;
    let hi = (2.0 * seed).min(1.0);

    let found = golden_section_maximize(
        |a| ideal_probability(n, epsilon, a),
        lo,
        hi,
        ALPHA_TOLERANCE,
    )?;
    let margin = 10.0 * ALPHA_TOLERANCE;
    let on_edge = found.x - lo < margin || (hi < 1.0 && hi - found.x < margin);
    if !on_edge && found.value >= seed_p {
        return Ok(AlphaOptimum {
            alpha: found.x,
            p_id: found.value,
            method: AlphaSearch::GoldenSection,
        });
    }

    let grid = grid_maximize(|a| ideal_probability(n, epsilon, a), 1e-3, 1.0, 1e-3)?;
    let (alpha, p_id) = if grid.value >= seed_p {
        (grid.x, grid.value)
    } else {
        (seed, seed_p)
    };
    Ok(AlphaOptimum {
        alpha,
        p_id,
        method: AlphaSearch::GridFallback,
    })
}
