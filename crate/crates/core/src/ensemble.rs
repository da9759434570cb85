//! Seeded Monte Carlo over static disorder.
//!
//! Realization `k` of an ensemble draws its disorder from the random stream
//! `(master_seed, k)`, so every record is a pure function of its inputs.
//! Records are always aggregated in index order through a fixed pairwise
//! summation tree; the statistics are therefore bit-identical whichever
//! [`Executor`] produced the records.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::chain::{
    build_ideal, ideal_reference, run_transfer, sample_disordered, AlphaMode, ChainSpec,
    DisorderConfig, Protocol, TransferOutcome,
};
use crate::measures::{BVariant, MeasureSet, CLASSICAL_LIMIT};
use crate::{Error, Result};

pub const DEFAULT_REALIZATIONS: usize = 1000;

/// Contour levels of the two-dimensional fidelity maps.
pub const CONTOUR_LEVELS: [f64; 5] = [0.95, 0.9, 0.8, 0.7, 0.67];

/// `|beta|^2 = 0, 0.1, ..., 1`.
pub fn default_beta_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

/// Everything measured in one realization.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RealizationRecord {
    pub index: usize,
    pub p: f64,
    pub delta_phi: f64,
    pub f_avg: f64,
    pub f_min: f64,
    pub b_worst: f64,
    pub concurrence: f64,
    pub f_psi_at: Vec<(f64, f64)>,
}

/// What to record per realization.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasurePlan {
    pub beta_grid: Vec<f64>,
    pub b_variant: BVariant,
}

impl Default for MeasurePlan {
    fn default() -> Self {
        Self {
            beta_grid: default_beta_grid(),
            b_variant: BVariant::Calculus,
        }
    }
}

/// Samples one disordered chain and evaluates every measure on it.
pub fn run_realization(
    ideal: &ChainSpec,
    reference: &TransferOutcome,
    cfg: &DisorderConfig,
    index: usize,
    plan: &MeasurePlan,
) -> Result<RealizationRecord> {
    let attach = |source: Error| Error::Realization {
        index,
        source: Box::new(source),
    };
    let noisy = sample_disordered(ideal, cfg, index as u64);
    let outcome = run_transfer(&noisy, reference).map_err(attach)?;
    let m = MeasureSet::evaluate(
        outcome.amplitude,
        outcome.p,
        outcome.delta_phi,
        &plan.beta_grid,
        plan.b_variant,
    )
    .map_err(attach)?;
    Ok(RealizationRecord {
        index,
        p: outcome.p,
        delta_phi: outcome.delta_phi,
        f_avg: m.f_avg,
        f_min: m.f_min,
        b_worst: m.b_worst,
        concurrence: m.concurrence,
        f_psi_at: m.f_psi_grid,
    })
}

/// Runs independent realization tasks and returns their records in index order.
pub trait Executor {
    fn run(
        &self,
        count: usize,
        task: &(dyn Fn(usize) -> Result<RealizationRecord> + Sync),
    ) -> Result<Vec<RealizationRecord>>;
}

/// Runs tasks one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn run(
        &self,
        count: usize,
        task: &(dyn Fn(usize) -> Result<RealizationRecord> + Sync),
    ) -> Result<Vec<RealizationRecord>> {
        let mut out = Vec::with_capacity(count);
        for index in 0..count {
            match task(index) {
                Ok(record) => out.push(record),
                Err(source) => {
                    return Err(Error::EnsembleAborted {
                        completed: out.len(),
                        source: Box::new(source),
                    })
                }
            }
        }
        Ok(out)
    }
}

/// Sum with a fixed binary reduction tree.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        return values.iter().fold(0.0, |s, x| s + x);
    }
    let (left, right) = values.split_at(values.len() / 2);
    pairwise_sum(left) + pairwise_sum(right)
}

/// Sample mean and unbiased variance.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Moments {
    pub mean: f64,
    /// `n - 1` denominator; zero for a single sample.
    pub variance: f64,
}

impl Moments {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                variance: f64::NAN,
            };
        }
        let mean = pairwise_sum(values) / n as f64;
        if n == 1 {
            return Self {
                mean,
                variance: 0.0,
            };
        }
        let squares: Vec<f64> = values.iter().map(|x| (x - mean) * (x - mean)).collect();
        Self {
            mean,
            variance: pairwise_sum(&squares) / (n - 1) as f64,
        }
    }

    /// Variance of the sample mean, `variance / n`.
    pub fn variance_of_mean(&self, n: usize) -> f64 {
        self.variance / n as f64
    }

    pub fn standard_error(&self, n: usize) -> f64 {
        crate::math::sqrt(self.variance_of_mean(n))
    }
}

/// Ensemble averages over `n_realizations` records.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EnsembleStats {
    pub n_realizations: usize,
    pub p: Moments,
    pub f_avg: Moments,
    pub f_min: Moments,
    pub concurrence: Moments,
    pub b_worst: Moments,
    /// `(|beta|^2, <F_psi>)` for each point of the measurement grid.
    pub f_psi: Vec<(f64, Moments)>,
    /// Fraction of realizations with `F_avg > 2/3`.
    pub pr_favg_above_cl: f64,
    /// Fraction of realizations with `F_min > 2/3`.
    pub pr_fmin_above_cl: f64,
}

impl EnsembleStats {
    /// Aggregates records; they must come in realization order for the
    /// result to be reproducible bit for bit.
    pub fn from_records(records: &[RealizationRecord]) -> Self {
        let n = records.len();
        let column =
            |get: fn(&RealizationRecord) -> f64| -> Vec<f64> { records.iter().map(get).collect() };
        let fraction = |hits: usize| {
            if n == 0 {
                f64::NAN
            } else {
                hits as f64 / n as f64
            }
        };

        let grid_len = records.first().map_or(0, |r| r.f_psi_at.len());
        let f_psi = (0..grid_len)
            .map(|g| {
                let values: Vec<f64> = records.iter().map(|r| r.f_psi_at[g].1).collect();
                (records[0].f_psi_at[g].0, Moments::of(&values))
            })
            .collect();

        Self {
            n_realizations: n,
            p: Moments::of(&column(|r| r.p)),
            f_avg: Moments::of(&column(|r| r.f_avg)),
            f_min: Moments::of(&column(|r| r.f_min)),
            concurrence: Moments::of(&column(|r| r.concurrence)),
            b_worst: Moments::of(&column(|r| r.b_worst)),
            f_psi,
            pr_favg_above_cl: fraction(
                records.iter().filter(|r| r.f_avg > CLASSICAL_LIMIT).count(),
            ),
            pr_fmin_above_cl: fraction(
                records.iter().filter(|r| r.f_min > CLASSICAL_LIMIT).count(),
            ),
        }
    }
}

/// `Pr(F_min > 2/3) - Pr(F_avg > 2/3)`; never positive.
pub fn success_probability_gap(stats: &EnsembleStats) -> f64 {
    stats.pr_fmin_above_cl - stats.pr_favg_above_cl
}

/// Runs realizations `0..realizations` with `executor` and aggregates them.
pub fn run_ensemble_with(
    executor: &dyn Executor,
    ideal: &ChainSpec,
    reference: &TransferOutcome,
    cfg: &DisorderConfig,
    realizations: usize,
    plan: &MeasurePlan,
) -> Result<EnsembleStats> {
    if realizations == 0 {
        return Err(Error::invalid(
            "realizations",
            "need at least one realization",
        ));
    }
    let task = |index: usize| run_realization(ideal, reference, cfg, index, plan);
    let records = executor.run(realizations, &task)?;
    Ok(EnsembleStats::from_records(&records))
}

/// [`run_ensemble_with`] on the calling thread.
pub fn run_ensemble(
    ideal: &ChainSpec,
    reference: &TransferOutcome,
    cfg: &DisorderConfig,
    realizations: usize,
    plan: &MeasurePlan,
) -> Result<EnsembleStats> {
    run_ensemble_with(&Sequential, ideal, reference, cfg, realizations, plan)
}

/// Settings shared by every cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub protocol: Protocol,
    pub alpha: AlphaMode,
    pub epsilon: f64,
    pub realizations: usize,
    pub master_seed: u64,
    pub plan: MeasurePlan,
}

impl SweepConfig {
    pub fn new(protocol: Protocol, realizations: usize, master_seed: u64) -> Self {
        Self {
            protocol,
            alpha: AlphaMode::Optimized,
            epsilon: crate::chain::DEFAULT_EPSILON,
            realizations,
            master_seed,
            plan: MeasurePlan::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisorderAxis {
    /// On-site energies (`sigma_eps`).
    Diagonal,
    /// Couplings (`sigma_J`).
    OffDiagonal,
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SweepCell {
    pub n: usize,
    /// Boundary ratio, optimal-coupling chains only.
    pub alpha: Option<f64>,
    /// Transfer probability of the clean chain.
    pub p_id: f64,
    pub sigma_j: f64,
    pub sigma_eps: f64,
    pub stats: EnsembleStats,
}

/// Full Cartesian table over `(N, sigma_J, sigma_eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub n_list: Vec<usize>,
    pub sigma_j_grid: Vec<f64>,
    pub sigma_eps_grid: Vec<f64>,
    /// Ordered by `N`, then `sigma_J`, then `sigma_eps`.
    pub cells: Vec<SweepCell>,
}

/// A scalar ensemble statistic of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    AverageFidelity,
    MinimumFidelity,
    Concurrence,
    WorstCaseBeta,
    TransferProbability,
}

impl Statistic {
    pub fn of(self, stats: &EnsembleStats) -> Moments {
        match self {
            Statistic::AverageFidelity => stats.f_avg,
            Statistic::MinimumFidelity => stats.f_min,
            Statistic::Concurrence => stats.concurrence,
            Statistic::WorstCaseBeta => stats.b_worst,
            Statistic::TransferProbability => stats.p,
        }
    }
}

impl SweepResult {
    pub fn cell(&self, n: usize, sigma_j: f64, sigma_eps: f64) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.n == n && c.sigma_j == sigma_j && c.sigma_eps == sigma_eps)
    }

    /// Mean of `stat` for chain length `n` as a `sigma_J x sigma_eps` matrix,
    /// ready for contouring at [`CONTOUR_LEVELS`].
    pub fn mean_grid(&self, n: usize, stat: Statistic) -> Vec<Vec<f64>> {
        let cols = self.sigma_eps_grid.len();
        let values: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.n == n)
            .map(|c| stat.of(&c.stats).mean)
            .collect();
        values.chunks(cols.max(1)).map(|row| row.to_vec()).collect()
    }
}

fn check_grid(name: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(name, "grid is empty"));
    }
    if grid.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::invalid(
            name,
            "disorder strengths must be finite and >= 0",
        ));
    }
    Ok(())
}

/// Ensemble statistics on every `(N, sigma_J, sigma_eps)` combination.
pub fn sweep_grid(
    cfg: &SweepConfig,
    n_list: &[usize],
    sigma_j_grid: &[f64],
    sigma_eps_grid: &[f64],
    executor: &dyn Executor,
) -> Result<SweepResult> {
    if n_list.is_empty() {
        return Err(Error::invalid("n", "list of chain lengths is empty"));
    }
    check_grid("sigma_j", sigma_j_grid)?;
    check_grid("sigma_eps", sigma_eps_grid)?;
    if cfg.realizations == 0 {
        return Err(Error::invalid(
            "realizations",
            "need at least one realization",
        ));
    }

    let mut cells = Vec::with_capacity(n_list.len() * sigma_j_grid.len() * sigma_eps_grid.len());
    for &n in n_list {
        let ideal = build_ideal(cfg.protocol, n, cfg.epsilon, cfg.alpha)?;
        let reference = ideal_reference(&ideal)?;
        for &sigma_j in sigma_j_grid {
            for &sigma_eps in sigma_eps_grid {
                let disorder = DisorderConfig::new(sigma_j, sigma_eps, cfg.master_seed)?;
                let stats = run_ensemble_with(
                    executor,
                    &ideal,
                    &reference,
                    &disorder,
                    cfg.realizations,
                    &cfg.plan,
                )?;
                cells.push(SweepCell {
                    n,
                    alpha: ideal.protocol.alpha(),
                    p_id: reference.p,
                    sigma_j,
                    sigma_eps,
                    stats,
                });
            }
        }
    }

    Ok(SweepResult {
        config: cfg.clone(),
        n_list: n_list.to_vec(),
        sigma_j_grid: sigma_j_grid.to_vec(),
        sigma_eps_grid: sigma_eps_grid.to_vec(),
        cells,
    })
}

/// One kind of disorder swept, the other held at zero.
pub fn sweep_1d(
    cfg: &SweepConfig,
    n_list: &[usize],
    axis: DisorderAxis,
    sigma_grid: &[f64],
    executor: &dyn Executor,
) -> Result<SweepResult> {
    match axis {
        DisorderAxis::Diagonal => sweep_grid(cfg, n_list, &[0.0], sigma_grid, executor),
        DisorderAxis::OffDiagonal => sweep_grid(cfg, n_list, sigma_grid, &[0.0], executor),
    }
}

/// Both kinds of disorder on a two-dimensional grid for one chain length.
pub fn sweep_2d(
    cfg: &SweepConfig,
    n: usize,
    sigma_j_grid: &[f64],
    sigma_eps_grid: &[f64],
    executor: &dyn Executor,
) -> Result<SweepResult> {
    sweep_grid(cfg, &[n], sigma_j_grid, sigma_eps_grid, executor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_optimal_coupling, build_spin_analogue};
    use crate::measures::avg_fidelity;
    use std::vec;

    fn small_plan() -> MeasurePlan {
        MeasurePlan {
            beta_grid: vec![0.0, 0.4, 0.6, 1.0],
            b_variant: BVariant::Calculus,
        }
    }

    #[test]
    fn pairwise_sum_matches_exact_integers() {
        let v: Vec<f64> = (1..=1000).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn moments_conventions() {
        let single = Moments::of(&[0.3]);
        assert_eq!(
            single,
            Moments {
                mean: 0.3,
                variance: 0.0
            }
        );
        let m = Moments::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.variance - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn clean_realization_reproduces_the_ideal_chain() {
        let ideal = build_optimal_coupling(15, 1.0, 0.63).unwrap();
        let reference = ideal_reference(&ideal).unwrap();
        let cfg = DisorderConfig::new(0.0, 0.0, 1).unwrap();
        let r = run_realization(&ideal, &reference, &cfg, 0, &small_plan()).unwrap();
        assert_eq!(r.p, reference.p);
        assert_eq!(r.f_avg, avg_fidelity(reference.p, 0.0));

        let spin = build_spin_analogue(25, 1.0).unwrap();
        let spin_ref = ideal_reference(&spin).unwrap();
        let r = run_realization(&spin, &spin_ref, &cfg, 3, &small_plan()).unwrap();
        for value in [r.f_avg, r.f_min, r.concurrence] {
            assert!((value - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn realizations_are_deterministic() {
        let ideal = build_spin_analogue(12, 1.0).unwrap();
        let reference = ideal_reference(&ideal).unwrap();
        let cfg = DisorderConfig::new(0.2, 0.1, 77).unwrap();
        let a = run_realization(&ideal, &reference, &cfg, 9, &small_plan()).unwrap();
        let b = run_realization(&ideal, &reference, &cfg, 9, &small_plan()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_realization_has_zero_variance() {
        let ideal = build_spin_analogue(10, 1.0).unwrap();
        let reference = ideal_reference(&ideal).unwrap();
        let cfg = DisorderConfig::new(0.3, 0.3, 5).unwrap();
        let stats = run_ensemble(&ideal, &reference, &cfg, 1, &small_plan()).unwrap();
        assert_eq!(stats.n_realizations, 1);
        assert_eq!(stats.f_avg.variance, 0.0);
        assert_eq!(stats.f_min.variance, 0.0);
        assert!(run_ensemble(&ideal, &reference, &cfg, 0, &small_plan()).is_err());
    }

    #[test]
    fn clean_ensemble_has_ideal_means() {
        let ideal = build_spin_analogue(15, 1.0).unwrap();
        let reference = ideal_reference(&ideal).unwrap();
        let cfg = DisorderConfig::new(0.0, 0.0, 5).unwrap();
        let stats = run_ensemble(&ideal, &reference, &cfg, 50, &small_plan()).unwrap();
        assert!((stats.f_avg.mean - 1.0).abs() < 1e-9);
        assert!(stats.f_avg.variance < 1e-20);
        assert_eq!(stats.pr_favg_above_cl, 1.0);
        assert_eq!(stats.pr_fmin_above_cl, 1.0);
        assert_eq!(success_probability_gap(&stats), 0.0);
    }

    #[test]
    fn gap_is_never_positive() {
        let ideal = build_optimal_coupling(15, 1.0, 0.63).unwrap();
        let reference = ideal_reference(&ideal).unwrap();
        for sigma in [0.05, 0.15, 0.3] {
            let cfg = DisorderConfig::new(sigma, sigma, 8).unwrap();
            let stats = run_ensemble(&ideal, &reference, &cfg, 200, &small_plan()).unwrap();
            let gap = success_probability_gap(&stats);
            assert!((-1.0..=0.0).contains(&gap));
        }
    }

    struct Failing;
    impl Executor for Failing {
        fn run(
            &self,
            count: usize,
            task: &(dyn Fn(usize) -> Result<RealizationRecord> + Sync),
        ) -> Result<Vec<RealizationRecord>> {
            let mut done = Vec::new();
            for i in 0..count {
                if i == 3 {
                    return Err(Error::EnsembleAborted {
                        completed: done.len(),
                        source: Box::new(Error::NoConvergence {
                            size: 1,
                            index: 0,
                            iterations: 50,
                        }),
                    });
                }
                done.push(task(i)?);
            }
            Ok(done)
        }
    }

    #[test]
    fn failures_report_progress() {
        let ideal = build_spin_analogue(5, 1.0).unwrap();
        let reference = ideal_reference(&ideal).unwrap();
        let cfg = DisorderConfig::new(0.1, 0.1, 1).unwrap();
        let err =
            run_ensemble_with(&Failing, &ideal, &reference, &cfg, 10, &small_plan()).unwrap_err();
        assert!(matches!(err, Error::EnsembleAborted { completed: 3, .. }));
    }

    #[test]
    fn sweep_layout() {
        let cfg = SweepConfig {
            plan: small_plan(),
            ..SweepConfig::new(Protocol::SpinAnalogue, 20, 4)
        };
        let one = sweep_1d(
            &cfg,
            &[5, 7],
            DisorderAxis::Diagonal,
            &[0.0, 0.1, 0.2],
            &Sequential,
        )
        .unwrap();
        assert_eq!(one.cells.len(), 6);
        assert!(one.cells.iter().all(|c| c.sigma_j == 0.0));

        let grid = sweep_2d(&cfg, 7, &[0.0, 0.1], &[0.0, 0.1, 0.2], &Sequential).unwrap();
        assert_eq!(grid.cells.len(), 6);
        let m = grid.mean_grid(7, Statistic::AverageFidelity);
        assert_eq!((m.len(), m[0].len()), (2, 3));
        assert!((m[0][0] - 1.0).abs() < 1e-9);

        // single cell reduces to a plain ensemble run
        let cell = sweep_2d(&cfg, 7, &[0.1], &[0.2], &Sequential).unwrap();
        let ideal = build_spin_analogue(7, 1.0).unwrap();
        let reference = ideal_reference(&ideal).unwrap();
        let direct = run_ensemble(
            &ideal,
            &reference,
            &DisorderConfig::new(0.1, 0.2, 4).unwrap(),
            20,
            &small_plan(),
        )
        .unwrap();
        assert_eq!(cell.cells[0].stats, direct);

        assert!(sweep_2d(&cfg, 7, &[], &[0.1], &Sequential).is_err());
        assert!(sweep_1d(&cfg, &[], DisorderAxis::Diagonal, &[0.1], &Sequential).is_err());
    }
}
