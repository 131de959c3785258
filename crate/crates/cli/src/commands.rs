use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{self, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use rankrefine_core::metrics::pra;
use rankrefine_core::rankers::{
    generate_comparisons, interactive_rank, load_comparisons, write_outcomes, ChatTransport, Descriptor, FileRanker,
    LlmPair, LlmRanker, LlmRankerConfig, OracleRanker, OracleRankerConfig, RankItem, Ranker, RecordingTransport,
    ReplayTransport,
};
use rankrefine_core::{
    refine, ComparisonOutcome, ComparisonSet, Dataset, Error, LabeledReference, ReferenceSet, SolverConfig, Substream,
};
use rankrefine_experiments::output::{write_baseline_csv, write_bound_csv, write_noise_csv, write_sweep_csv};
use rankrefine_experiments::{
    delta_curve, make_synthetic_dataset, run_baseline_delta, run_noise_sweep, run_oracle_sweep, validate_bound,
    BaselineMethod, NoiseSettings, SweepGrid,
};
use rankrefine_forest::{fit, ForestConfig};

use crate::csvio::{self, Item};
use crate::error::{usage, CliError, Result};
use crate::http::HttpTransport;
use crate::{
    BaselineArgs, BoundArgs, ExperimentArgs, ForestArgs, NoiseArgs, PredictArgs, RankArgs, RefineArgs, Source,
    SweepArgs, SynthArgs,
};

/// Parses `start:step:end` (inclusive, values rounded to 1e-10) or a comma list.
pub fn parse_f64_list(raw: &str, what: &str) -> Result<Vec<f64>> {
    let bad = || CliError::Usage(format!("cannot parse {what} `{raw}`"));
    let parts: Vec<&str> = raw.split(':').map(str::trim).collect();
    let values = match parts.as_slice() {
        [start, step, end] => {
            let (start, step, end): (f64, f64, f64) = (
                start.parse().map_err(|_| bad())?,
                step.parse().map_err(|_| bad())?,
                end.parse().map_err(|_| bad())?,
            );
            if !(step > 0.0 && start <= end && start.is_finite() && end.is_finite()) {
                return Err(bad());
            }
            let n = ((end - start) / step + 1e-9).floor() as usize;
            (0..=n)
                .map(|i| ((start + step * i as f64) * 1e10).round() / 1e10)
                .collect()
        }
        [_] => raw
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?,
        _ => return Err(bad()),
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(values)
}

pub fn parse_usize_list(raw: &str, what: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("cannot parse {what} `{raw}`")))
        })
        .collect()
}

fn forest_config(args: &ForestArgs, seed: u64) -> Result<ForestConfig> {
    let config = ForestConfig {
        n_trees: args.trees,
        max_depth: args.max_depth,
        min_samples_leaf: args.min_samples_leaf,
        features_per_split: args.features_per_split,
        seed,
        ..ForestConfig::default()
    };
    config.validate()?;
    Ok(config)
}

fn load_dataset(args: &ExperimentArgs) -> Result<Dataset> {
    Ok(match &args.data {
        Some(path) => Dataset::from_csv_path(path)?,
        None => make_synthetic_dataset(args.rows, args.dim, args.noise_sd, args.data_seed)?,
    })
}

fn grid(args: &ExperimentArgs, accuracies: Vec<f64>, ks: Vec<usize>) -> Result<SweepGrid> {
    let grid = SweepGrid {
        accuracies,
        ks,
        seeds: args.seeds,
        clamp_c: args.clamp_c,
        train_size: args.train_size,
        master_seed: args.seed,
    };
    grid.validate()?;
    Ok(grid)
}

fn write_err(e: io::Error) -> Error {
    Error::Io {
        path: "<output>".into(),
        source: e,
    }
}

fn finish(mut out: Box<dyn Write>) -> Result<()> {
    Ok(out.flush().map_err(write_err)?)
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let data = make_synthetic_dataset(args.rows, args.dim, args.noise_sd, args.seed)?;
    let mut out = csvio::output(args.out.as_ref())?;
    data.write_csv(&mut out)?;
    finish(out)
}

pub fn predict(args: PredictArgs) -> Result<()> {
    let train = Dataset::from_csv_path(&args.train)?;
    let model = fit(&train, &forest_config(&args.forest, args.seed)?)?;
    if let Some(path) = &args.save_model {
        model.save(path)?;
    }
    let rows = csvio::read_features(&args.test, train.feature_names())?;
    let mut out = csvio::output(args.out.as_ref())?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["id", "y_reg", "var_reg"])?;
        for (id, features) in rows {
            let est = model.predict_with_variance(&features)?;
            w.write_record([id, est.value.to_string(), est.variance.to_string()])?;
        }
        w.flush().map_err(write_err)?;
    }
    finish(out)
}

pub fn refine_cmd(args: RefineArgs) -> Result<()> {
    if !(args.clamp_c >= 0.0 && args.clamp_c.is_finite()) {
        return usage(format!("--clamp-c must be >= 0, got {}", args.clamp_c));
    }
    let clamp = (args.clamp_c > 0.0).then_some(args.clamp_c);
    let predictions =
        csvio::read_predictions(csvio::open(&args.predictions)?, &args.predictions.display().to_string())?;
    let references = ReferenceSet::from_csv_path(&args.references)?;
    let mut sets: BTreeMap<String, ComparisonSet> = load_comparisons(&args.comparisons, &references)?;
    let known: HashSet<&str> = predictions.iter().map(|p| p.id.as_str()).collect();
    if let Some(unknown) = sets.keys().find(|q| !known.contains(q.as_str())) {
        return Err(Error::UnknownId(unknown.clone()).into());
    }

    let solver = SolverConfig::default();
    let mut out = csvio::output(args.out.as_ref())?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record([
            "id",
            "y_reg",
            "var_reg",
            "y_rank",
            "var_rank",
            "y_fused",
            "var_fused",
            "clamped",
        ])?;
        for p in &predictions {
            let set = sets.remove(&p.id).unwrap_or_default();
            let (rank, fused) = refine(&p.estimate, &set, &solver, clamp)?;
            let (y_rank, var_rank, clamped) = match rank {
                Some(r) => (r.value.to_string(), r.variance.to_string(), u8::from(r.clamped)),
                None => (String::new(), String::new(), 0),
            };
            w.write_record([
                p.id.clone(),
                p.estimate.value.to_string(),
                p.estimate.variance.to_string(),
                y_rank,
                var_rank,
                fused.value.to_string(),
                fused.variance.to_string(),
                clamped.to_string(),
            ])?;
        }
        w.flush().map_err(write_err)?;
    }
    finish(out)
}

fn reference_set(items: &[Item], source: &Path) -> Result<ReferenceSet> {
    let refs = items
        .iter()
        .map(|it| {
            let y = it.y.ok_or_else(|| Error::MissingColumn {
                column: format!("y (reference `{}`)", it.id),
                path: source.display().to_string(),
            })?;
            Ok(LabeledReference::new(it.id.clone(), y)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReferenceSet::new(refs)?)
}

/// The same selection `generate_comparisons` makes: tie-filtered pool,
/// shuffled by the query's stream, first `k` kept.
fn select_references<'a>(
    query: &Item,
    references: &'a ReferenceSet,
    k: usize,
    seed: u64,
) -> Result<Vec<&'a LabeledReference>> {
    let mut pool: Vec<&LabeledReference> = references.iter().filter(|r| query.y != Some(r.label)).collect();
    if k > pool.len() {
        return Err(Error::Size(format!(
            "k = {k} exceeds the {} usable references for query `{}`",
            pool.len(),
            query.id
        ))
        .into());
    }
    pool.shuffle(&mut reference_rng(seed, &query.id));
    pool.truncate(k);
    Ok(pool)
}

fn reference_rng(seed: u64, query_id: &str) -> rand_chacha::ChaCha8Rng {
    Substream::new(seed, "rank.refs").with_str(query_id).rng()
}

fn rank_with<R: Ranker>(
    queries: &[Item],
    references: &ReferenceSet,
    k: usize,
    seed: u64,
    ranker: &R,
) -> Result<Vec<ComparisonOutcome>> {
    let mut outcomes = Vec::new();
    for q in queries {
        let item = RankItem { id: &q.id, label: q.y };
        let set = generate_comparisons(&item, references, k, ranker, &mut reference_rng(seed, &q.id))?;
        outcomes.extend_from_slice(set.outcomes());
    }
    Ok(outcomes)
}

fn rank_interactive(
    queries: &[Item],
    ref_items: &HashMap<&str, &Item>,
    references: &ReferenceSet,
    args: &RankArgs,
) -> Result<Vec<ComparisonOutcome>> {
    let property = args.property.as_deref().unwrap_or("the target property");
    let stdin = io::stdin();
    let mut input = stdin.lock();
    let mut outcomes = Vec::new();
    for q in queries {
        let chosen = select_references(q, references, args.k, args.seed)?;
        let descriptors: Vec<Descriptor> = chosen
            .iter()
            .map(|r| Descriptor {
                id: r.id.clone(),
                text: ref_items[r.id.as_str()].display_text().to_string(),
            })
            .collect();
        let query = Descriptor {
            id: q.id.clone(),
            text: q.display_text().to_string(),
        };
        let session = interactive_rank(&query, &descriptors, property, &mut input, io::stderr())?;
        outcomes.extend(session.outcomes);
        if session.skipped > 0 {
            log::info!("{} pairs skipped for `{}`", session.skipped, q.id);
        }
        if session.closed_early {
            log::warn!("input closed; keeping the answers given so far");
            break;
        }
    }
    Ok(outcomes)
}

fn rank_llm(
    queries: &[Item],
    ref_items: &HashMap<&str, &Item>,
    references: &ReferenceSet,
    args: &RankArgs,
) -> Result<Vec<ComparisonOutcome>> {
    let Some(config_path) = &args.llm_config else {
        return usage("--source llm needs --llm-config");
    };
    let mut config: LlmRankerConfig = serde_json::from_reader(BufReader::new(csvio::open(config_path)?))
        .map_err(|e| CliError::Usage(format!("{}: {e}", config_path.display())))?;
    if let Some(p) = &args.property {
        config.property_description = p.clone();
    }
    let ranker = LlmRanker::new(config)?;

    let mut pairs = Vec::new();
    for q in queries {
        for r in select_references(q, references, args.k, args.seed)? {
            pairs.push(LlmPair {
                query_id: q.id.clone(),
                ref_id: r.id.clone(),
                query_text: q.display_text().to_string(),
                ref_text: ref_items[r.id.as_str()].display_text().to_string(),
            });
        }
    }

    let base: Box<dyn ChatTransport> = match &args.replay {
        Some(path) => Box::new(ReplayTransport::from_jsonl(BufReader::new(csvio::open(path)?))?),
        None => {
            let cfg = ranker.config();
            Box::new(HttpTransport::from_env(&cfg.endpoint_url, &cfg.api_key_env_var)?)
        }
    };
    let recorder = RecordingTransport::new(&*base);
    let output = ranker.rank_pairs(&pairs, &recorder)?;
    if let Some(path) = &args.record {
        let mut out = csvio::output(Some(path))?;
        recorder.write_jsonl(&mut out)?;
        finish(out)?;
    }
    if !output.failures.is_empty() {
        log::warn!(
            "{} of {} pairs got no usable answer and were left out",
            output.failures.len(),
            pairs.len()
        );
    }
    log::info!("{} requests sent", output.requests);
    Ok(output.outcomes)
}

fn report_pra(outcomes: &[ComparisonOutcome], queries: &[Item], references: &ReferenceSet) {
    if outcomes.is_empty() || queries.iter().any(|q| q.y.is_none()) {
        return;
    }
    let mut truth: HashMap<String, f64> = references.iter().map(|r| (r.id.clone(), r.label)).collect();
    for q in queries {
        if let Some(&existing) = truth.get(&q.id) {
            if Some(existing) != q.y {
                log::warn!(
                    "id `{}` names both a query and a reference; skipping accuracy report",
                    q.id
                );
                return;
            }
        }
        truth.insert(q.id.clone(), q.y.expect("checked above"));
    }
    match pra(outcomes, &truth) {
        Ok(r) => eprintln!(
            "pairwise accuracy {:.4} over {} comparisons ({} ties excluded)",
            r.accuracy, r.evaluated, r.ties_excluded
        ),
        Err(e) => log::warn!("accuracy report unavailable: {e}"),
    }
}

pub fn rank(args: RankArgs) -> Result<()> {
    let queries = csvio::read_items(&args.queries)?;
    let ref_list = csvio::read_items(&args.references)?;
    let references = reference_set(&ref_list, &args.references)?;
    let ref_items: HashMap<&str, &Item> = ref_list.iter().map(|it| (it.id.as_str(), it)).collect();

    let outcomes = match args.source {
        Source::Oracle => {
            if let Some(q) = queries.iter().find(|q| q.y.is_none()) {
                return usage(format!("oracle ranking needs ground truth `y` for query `{}`", q.id));
            }
            let ranker = OracleRanker::new(OracleRankerConfig::new(args.accuracy, args.seed)?);
            rank_with(&queries, &references, args.k, args.seed, &ranker)?
        }
        Source::File => {
            let Some(path) = &args.comparisons else {
                return usage("--source file needs --comparisons");
            };
            rank_with(&queries, &references, args.k, args.seed, &FileRanker::from_path(path)?)?
        }
        Source::Interactive => rank_interactive(&queries, &ref_items, &references, &args)?,
        Source::Llm => rank_llm(&queries, &ref_items, &references, &args)?,
    };

    let mut out = csvio::output(args.out.as_ref())?;
    write_outcomes(&mut out, &outcomes)?;
    finish(out)?;
    report_pra(&outcomes, &queries, &references);
    Ok(())
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let accuracies = parse_f64_list(&args.accuracies, "accuracies")?;
    let ks = parse_usize_list(&args.ks, "ks")?;
    let common = &args.common;
    let grid = grid(common, accuracies, ks)?;
    let data = load_dataset(common)?;
    let forest = forest_config(&common.forest, 0)?;
    let records = run_oracle_sweep(&data, &grid, &forest, &SolverConfig::default())?;
    let mut out = csvio::output(common.out.as_ref())?;
    write_sweep_csv(&mut out, &records)?;
    finish(out)
}

pub fn validate_bound_cmd(args: BoundArgs) -> Result<()> {
    let alphas = parse_f64_list(&args.alphas, "alphas")?;
    let records = validate_bound(&alphas, args.samples, args.seed)?;
    let mut out = csvio::output(args.out.as_ref())?;
    write_bound_csv(&mut out, &records)?;
    finish(out)
}

pub fn noise(args: NoiseArgs) -> Result<()> {
    let bs = parse_f64_list(&args.bs, "bs")?;
    let common = &args.common;
    let grid = grid(common, vec![args.accuracy], vec![args.k])?;
    let settings = NoiseSettings {
        accuracy: args.accuracy,
        k: args.k,
        variance_floor: args.variance_floor,
    };
    let data = load_dataset(common)?;
    let forest = forest_config(&common.forest, 0)?;
    let records = run_noise_sweep(&data, &bs, &grid, &settings, &forest, &SolverConfig::default())?;
    let mut out = csvio::output(common.out.as_ref())?;
    write_noise_csv(&mut out, &records)?;
    finish(out)
}

pub fn baseline(args: BaselineArgs) -> Result<()> {
    let method: BaselineMethod = args.method.parse().map_err(CliError::Usage)?;
    let accuracies = parse_f64_list(&args.accuracies, "accuracies")?;
    let common = &args.common;
    let grid = grid(common, accuracies.clone(), vec![args.k])?;
    let data = load_dataset(common)?;
    let forest = forest_config(&common.forest, 0)?;
    let records = run_baseline_delta(&data, &grid, &forest, &SolverConfig::default(), method, args.k)?;
    for (accuracy, delta) in delta_curve(&records, &accuracies) {
        log::info!("accuracy {accuracy:.2}: mean delta {delta:.4}");
    }
    let mut out = csvio::output(common.out.as_ref())?;
    write_baseline_csv(&mut out, &records)?;
    finish(out)
}
