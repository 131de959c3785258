use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rankrefine_core::baselines::{projection_refine, rbr_refine, FeasibleInterval, NeighborWeighting};
use rankrefine_core::metrics::{beta, mae, pra};
use rankrefine_core::rankers::{generate_comparisons, OracleRanker, OracleRankerConfig, RankItem};
use rankrefine_core::{
    refine, resplit, ComparisonSet, Dataset, ReferenceSet, RegressorEstimate, SolverConfig, SplitSpec, Substream,
};
use rankrefine_forest::{fit, ForestConfig, TrainedForest};

use crate::error::{invalid, Result};

/// Accuracy × k × seed grid for the oracle sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub accuracies: Vec<f64>,
    pub ks: Vec<usize>,
    /// Number of random re-splits.
    pub seeds: usize,
    /// Rank variance floor as a multiple of the regressor variance; 0 disables it.
    pub clamp_c: f64,
    pub train_size: usize,
    pub master_seed: u64,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            accuracies: default_accuracies(),
            ks: vec![10, 20, 30],
            seeds: 5,
            clamp_c: 0.0,
            train_size: 50,
            master_seed: 0,
        }
    }
}

/// 0.50, 0.55, ..., 1.00, rounded to two decimals so the values print cleanly.
pub fn default_accuracies() -> Vec<f64> {
    (0..=10).map(|i| (50.0 + 5.0 * i as f64) / 100.0).collect()
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.accuracies.is_empty() || self.ks.is_empty() {
            return invalid("sweep grid needs at least one accuracy and one k");
        }
        if let Some(a) = self.accuracies.iter().find(|a| !(0.5..=1.0).contains(*a)) {
            return invalid(format!("accuracy {a} outside [0.5, 1]"));
        }
        if self.ks.contains(&0) {
            return invalid("k must be positive");
        }
        if self.seeds == 0 || self.train_size == 0 {
            return invalid("seeds and train_size must be positive");
        }
        if !(self.clamp_c >= 0.0 && self.clamp_c.is_finite()) {
            return invalid(format!("clamp_c must be >= 0, got {}", self.clamp_c));
        }
        Ok(())
    }

    fn clamp(&self) -> Option<f64> {
        (self.clamp_c > 0.0).then_some(self.clamp_c)
    }
}

/// One cell of an oracle sweep. `clamp_rate` is the fraction of queries whose
/// rank estimate sat on the search-domain boundary; `mean_rank_variance` is
/// averaged over the variances actually used in fusion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub dataset: String,
    pub seed: usize,
    pub accuracy: f64,
    pub k: usize,
    pub mae_reg: f64,
    pub mae_post: f64,
    pub beta: f64,
    pub mean_rank_variance: f64,
    pub clamp_rate: f64,
}

/// Everything about one re-split that does not depend on accuracy or k.
#[derive(Debug, Clone)]
pub struct SeedContext {
    pub seed: usize,
    pub train: Dataset,
    pub test: Dataset,
    pub references: ReferenceSet,
    pub forest: TrainedForest,
    pub predictions: Vec<RegressorEstimate>,
    pub mae_reg: f64,
}

/// Splits, trains the forest and predicts the test rows for seed index `seed`.
/// Split and forest seeds are substreams of the grid's master seed.
pub fn prepare_seed(dataset: &Dataset, grid: &SweepGrid, forest: &ForestConfig, seed: usize) -> Result<SeedContext> {
    let master = grid.master_seed;
    let spec = SplitSpec {
        train_size: grid.train_size,
        seed: Substream::new(master, "split").with_index(seed as u64).seed_u64(),
        seed_count: 1,
    };
    let (train, test) = resplit(dataset, &spec)?;
    let config = ForestConfig {
        seed: Substream::new(master, "forest").with_index(seed as u64).seed_u64(),
        ..*forest
    };
    let model = fit(&train, &config)?;
    let predictions = test
        .rows()
        .iter()
        .map(|r| model.predict_with_variance(&r.features))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let values: Vec<f64> = predictions.iter().map(|p| p.value).collect();
    let mae_reg = mae(&values, &test.targets())?;
    Ok(SeedContext {
        seed,
        references: train.to_references()?,
        train,
        test,
        forest: model,
        predictions,
        mae_reg,
    })
}

/// Oracle comparison sets for every test row of a cell.
///
/// The reference order for a query is drawn from a stream keyed by
/// `(master seed, seed index, query id)` and the oracle's flips by
/// `(master seed, seed index)`, neither depending on accuracy or k. Cells of a
/// sweep therefore share references (smaller k uses a prefix) and flip
/// draws, and every method evaluated on a cell sees the same sets.
pub fn comparison_sets(ctx: &SeedContext, master_seed: u64, accuracy: f64, k: usize) -> Result<Vec<ComparisonSet>> {
    let oracle_seed = Substream::new(master_seed, "oracle")
        .with_index(ctx.seed as u64)
        .seed_u64();
    let oracle = OracleRanker::new(OracleRankerConfig::new(accuracy, oracle_seed)?);
    ctx.test
        .rows()
        .iter()
        .map(|row| {
            let mut rng = Substream::new(master_seed, "refs")
                .with_index(ctx.seed as u64)
                .with_str(&row.id)
                .rng();
            let query = RankItem {
                id: &row.id,
                label: Some(row.target),
            };
            Ok(generate_comparisons(&query, &ctx.references, k, &oracle, &mut rng)?)
        })
        .collect()
}

/// Per-query outputs of the fusion pipeline on one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub fused: Vec<f64>,
    pub rank_variances: Vec<f64>,
    pub clamped: Vec<bool>,
}

/// How rank variances are perturbed before fusion in the noise study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceNoise {
    /// Half-width of the uniform perturbation.
    pub b: f64,
    /// Lower bound on the perturbed variance.
    pub floor: f64,
    pub master_seed: u64,
}

/// Runs rank estimation and fusion for every query of a cell.
pub fn fuse_cell(
    ctx: &SeedContext,
    sets: &[ComparisonSet],
    solver: &SolverConfig,
    clamp_c: Option<f64>,
    noise: Option<VarianceNoise>,
) -> Result<CellOutcome> {
    let mut out = CellOutcome {
        fused: Vec::with_capacity(sets.len()),
        rank_variances: Vec::with_capacity(sets.len()),
        clamped: Vec::with_capacity(sets.len()),
    };
    for ((reg, set), row) in ctx.predictions.iter().zip(sets).zip(ctx.test.rows()) {
        let (rank, mut fused) = refine(reg, set, solver, clamp_c)?;
        let Some(mut rank) = rank else {
            out.fused.push(fused.value);
            continue;
        };
        if let Some(noise) = noise.filter(|n| n.b > 0.0) {
            let v: f64 = Substream::new(noise.master_seed, "noise")
                .with_index(ctx.seed as u64)
                .with_str(&row.id)
                .rng()
                .random_range(-1.0..=1.0);
            rank.variance = (rank.variance + noise.b * v).max(noise.floor);
            fused = rankrefine_core::fuse(reg, &rank)?;
        }
        out.fused.push(fused.value);
        out.rank_variances.push(rank.variance);
        out.clamped.push(rank.clamped);
    }
    Ok(out)
}

fn record(ctx: &SeedContext, dataset: &str, accuracy: f64, k: usize, cell: &CellOutcome) -> Result<SweepRecord> {
    let mae_post = mae(&cell.fused, &ctx.test.targets())?;
    let n_rank = cell.rank_variances.len().max(1) as f64;
    Ok(SweepRecord {
        dataset: dataset.to_string(),
        seed: ctx.seed,
        accuracy,
        k,
        mae_reg: ctx.mae_reg,
        mae_post,
        beta: beta(mae_post, ctx.mae_reg)?,
        mean_rank_variance: cell.rank_variances.iter().sum::<f64>() / n_rank,
        clamp_rate: cell.clamped.iter().filter(|&&c| c).count() as f64 / n_rank,
    })
}

fn evaluate_cell(
    ctx: &SeedContext,
    dataset: &str,
    grid: &SweepGrid,
    solver: &SolverConfig,
    accuracy: f64,
    k: usize,
) -> Result<SweepRecord> {
    let sets = comparison_sets(ctx, grid.master_seed, accuracy, k)?;
    let cell = fuse_cell(ctx, &sets, solver, grid.clamp(), None)?;
    record(ctx, dataset, accuracy, k, &cell)
}

fn prepare_all(dataset: &Dataset, grid: &SweepGrid, forest: &ForestConfig) -> Result<Vec<SeedContext>> {
    grid.validate()?;
    (0..grid.seeds)
        .into_par_iter()
        .map(|s| prepare_seed(dataset, grid, forest, s))
        .collect()
}

/// Full accuracy × k sweep. Records come back ordered by seed, then accuracy,
/// then k, regardless of how cells were scheduled.
pub fn run_oracle_sweep(
    dataset: &Dataset,
    grid: &SweepGrid,
    forest: &ForestConfig,
    solver: &SolverConfig,
) -> Result<Vec<SweepRecord>> {
    let contexts = prepare_all(dataset, grid, forest)?;
    let cells: Vec<(usize, f64, usize)> = (0..grid.seeds)
        .flat_map(|s| {
            grid.accuracies
                .iter()
                .flat_map(move |&a| grid.ks.iter().map(move |&k| (s, a, k)))
        })
        .collect();
    cells
        .par_iter()
        .map(|&(s, a, k)| evaluate_cell(&contexts[s], dataset.name(), grid, solver, a, k))
        .collect()
}

/// Recomputes a single sweep cell from scratch.
pub fn run_sweep_cell(
    dataset: &Dataset,
    grid: &SweepGrid,
    forest: &ForestConfig,
    solver: &SolverConfig,
    seed: usize,
    accuracy: f64,
    k: usize,
) -> Result<SweepRecord> {
    grid.validate()?;
    let ctx = prepare_seed(dataset, grid, forest, seed)?;
    evaluate_cell(&ctx, dataset.name(), grid, solver, accuracy, k)
}

/// Mean β over records matching `accuracy` and `k`, summed in record order.
pub fn mean_beta(records: &[SweepRecord], accuracy: f64, k: usize) -> Option<f64> {
    let betas: Vec<f64> = records
        .iter()
        .filter(|r| r.accuracy == accuracy && r.k == k)
        .map(|r| r.beta)
        .collect();
    (!betas.is_empty()).then(|| betas.iter().sum::<f64>() / betas.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMethod {
    Projection,
    Rbr,
}

impl std::str::FromStr for BaselineMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "projection" => Ok(BaselineMethod::Projection),
            "rbr" => Ok(BaselineMethod::Rbr),
            other => Err(format!(
                "unknown baseline method `{other}` (expected projection or rbr)"
            )),
        }
    }
}

impl std::fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BaselineMethod::Projection => "projection",
            BaselineMethod::Rbr => "rbr",
        })
    }
}

/// Paired comparison of the fusion pipeline against a baseline on one
/// (seed, accuracy) cell. `inconsistent_rate` is the fraction of comparison
/// sets whose feasible interval is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub dataset: String,
    pub method: BaselineMethod,
    pub seed: usize,
    pub accuracy: f64,
    pub k: usize,
    pub mae_reg: f64,
    pub beta_ours: f64,
    pub beta_baseline: f64,
    pub delta: f64,
    pub inconsistent_rate: f64,
}

/// Runs the fusion pipeline and a baseline on identical splits and
/// comparison sets for every seed and accuracy in `grid`, at a fixed `k`.
/// For RbR, `k` is also the neighbour count and neighbours' predictions come
/// from the same forest.
pub fn run_baseline_delta(
    dataset: &Dataset,
    grid: &SweepGrid,
    forest: &ForestConfig,
    solver: &SolverConfig,
    method: BaselineMethod,
    k: usize,
) -> Result<Vec<BaselineRecord>> {
    if k == 0 {
        return invalid("k must be positive");
    }
    let contexts = prepare_all(dataset, grid, forest)?;
    let cells: Vec<(usize, f64)> = (0..grid.seeds)
        .flat_map(|s| grid.accuracies.iter().map(move |&a| (s, a)))
        .collect();
    cells
        .par_iter()
        .map(|&(s, accuracy)| {
            let ctx = &contexts[s];
            let sets = comparison_sets(ctx, grid.master_seed, accuracy, k)?;
            let ours = fuse_cell(ctx, &sets, solver, grid.clamp(), None)?;
            let baseline = match method {
                BaselineMethod::Projection => ctx
                    .predictions
                    .iter()
                    .zip(&sets)
                    .map(|(p, set)| projection_refine(p.value, set))
                    .collect::<Vec<_>>(),
                BaselineMethod::Rbr => {
                    let train_preds = ctx
                        .train
                        .rows()
                        .iter()
                        .map(|r| ctx.forest.predict(&r.features))
                        .collect::<std::result::Result<Vec<_>, _>>()?;
                    ctx.test
                        .rows()
                        .iter()
                        .zip(&ctx.predictions)
                        .map(|(row, p)| {
                            rbr_refine(
                                &row.features,
                                p.value,
                                &ctx.train,
                                &train_preds,
                                k,
                                NeighborWeighting::default(),
                            )
                        })
                        .collect::<std::result::Result<Vec<_>, _>>()?
                }
            };
            let targets = ctx.test.targets();
            let beta_ours = beta(mae(&ours.fused, &targets)?, ctx.mae_reg)?;
            let beta_baseline = beta(mae(&baseline, &targets)?, ctx.mae_reg)?;
            let inconsistent = sets
                .iter()
                .filter(|s| !FeasibleInterval::from_comparisons(s).is_consistent())
                .count();
            Ok(BaselineRecord {
                dataset: dataset.name().to_string(),
                method,
                seed: s,
                accuracy,
                k,
                mae_reg: ctx.mae_reg,
                beta_ours,
                beta_baseline,
                delta: beta_ours - beta_baseline,
                inconsistent_rate: inconsistent as f64 / sets.len() as f64,
            })
        })
        .collect()
}

/// Mean `beta_ours - beta_baseline` per accuracy, in grid order.
pub fn delta_curve(records: &[BaselineRecord], accuracies: &[f64]) -> Vec<(f64, f64)> {
    accuracies
        .iter()
        .filter_map(|&a| {
            let ds: Vec<f64> = records.iter().filter(|r| r.accuracy == a).map(|r| r.delta).collect();
            (!ds.is_empty()).then(|| (a, ds.iter().sum::<f64>() / ds.len() as f64))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub b: f64,
    pub beta: f64,
}

/// Settings for [`run_noise_sweep`] besides the perturbation widths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSettings {
    pub accuracy: f64,
    pub k: usize,
    pub variance_floor: f64,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        NoiseSettings {
            accuracy: 0.8,
            k: 20,
            variance_floor: 1e-6,
        }
    }
}

/// For each `b`, adds `U[-b, b]` noise to every rank variance before fusion
/// and reports β averaged over the grid's seeds. The uniform draw for a query
/// does not depend on `b`, so the curve varies smoothly in `b`, and `b = 0`
/// reproduces the unperturbed pipeline exactly.
pub fn run_noise_sweep(
    dataset: &Dataset,
    bs: &[f64],
    grid: &SweepGrid,
    settings: &NoiseSettings,
    forest: &ForestConfig,
    solver: &SolverConfig,
) -> Result<Vec<NoiseRecord>> {
    if let Some(b) = bs.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
        return invalid(format!("noise width b must be >= 0, got {b}"));
    }
    if settings.variance_floor.is_nan() || settings.variance_floor <= 0.0 {
        return invalid("variance floor must be positive");
    }
    let contexts = prepare_all(dataset, grid, forest)?;
    let sets = contexts
        .par_iter()
        .map(|ctx| comparison_sets(ctx, grid.master_seed, settings.accuracy, settings.k))
        .collect::<Result<Vec<_>>>()?;
    bs.par_iter()
        .map(|&b| {
            let noise = VarianceNoise {
                b,
                floor: settings.variance_floor,
                master_seed: grid.master_seed,
            };
            let mut records = Vec::with_capacity(contexts.len());
            for (ctx, sets) in contexts.iter().zip(&sets) {
                let cell = fuse_cell(ctx, sets, solver, grid.clamp(), Some(noise))?;
                records.push(record(ctx, dataset.name(), settings.accuracy, settings.k, &cell)?);
            }
            let beta = mean_beta(&records, settings.accuracy, settings.k).expect("at least one seed");
            Ok(NoiseRecord { b, beta })
        })
        .collect()
}

/// One seed of an end-to-end refinement run with a simulated ranker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRecord {
    pub dataset: String,
    pub seed: usize,
    pub pra: f64,
    pub mae_reg: f64,
    pub mae_post: f64,
    pub beta: f64,
}

/// Refines every test row with `k` oracle comparisons at `accuracy` and
/// reports the realised pairwise accuracy alongside the errors.
pub fn run_refinement(
    dataset: &Dataset,
    grid: &SweepGrid,
    forest: &ForestConfig,
    solver: &SolverConfig,
    accuracy: f64,
    k: usize,
) -> Result<Vec<RefinementRecord>> {
    let contexts = prepare_all(dataset, grid, forest)?;
    contexts
        .par_iter()
        .map(|ctx| {
            let sets = comparison_sets(ctx, grid.master_seed, accuracy, k)?;
            let cell = fuse_cell(ctx, &sets, solver, grid.clamp(), None)?;
            let rec = record(ctx, dataset.name(), accuracy, k, &cell)?;
            let outcomes: Vec<_> = sets.iter().flat_map(|s| s.outcomes().iter().cloned()).collect();
            let truth = ctx
                .train
                .rows()
                .iter()
                .chain(ctx.test.rows())
                .map(|r| (r.id.clone(), r.target))
                .collect();
            Ok(RefinementRecord {
                dataset: rec.dataset,
                seed: rec.seed,
                pra: pra(&outcomes, &truth)?.accuracy,
                mae_reg: rec.mae_reg,
                mae_post: rec.mae_post,
                beta: rec.beta,
            })
        })
        .collect()
}
