//! Sources of pairwise outcomes.
//!
//! Per-pair rankers implement [`Ranker`]; the interactive and LLM rankers work
//! on whole sessions or batches and expose their own entry points. All of them
//! emit [`ComparisonOutcome`]s in the `query_above` convention.

mod file;
mod interactive;
mod llm;
mod oracle;

use rand::seq::SliceRandom;
use rand::Rng;

pub use file::{load_comparisons, read_outcomes, write_outcomes, FileRanker};
pub use interactive::{interactive_rank, Descriptor, InteractiveSession};
pub use llm::{
    llm_rank_batch, parse_response_rows, render_prompt, ChatTransport, FewShotExample, LlmPair, LlmRankOutput,
    LlmRanker, LlmRankerConfig, RecordingTransport, ReplayTransport, DEFAULT_PROMPT_TEMPLATE,
};
pub use oracle::{ErrorMode, OracleRanker, OracleRankerConfig};

use crate::error::{Error, Result};
use crate::model::{ComparisonOutcome, ComparisonSet, LabeledReference, ReferenceSet};

/// The query side of a comparison. `label` is ground truth, known only to
/// simulated rankers and evaluation code.
#[derive(Debug, Clone, Copy)]
pub struct RankItem<'a> {
    pub id: &'a str,
    pub label: Option<f64>,
}

pub trait Ranker {
    /// `Some(true)` if the query ranks above the reference, `Some(false)` if
    /// below, `None` if the ranker abstains on this pair.
    fn compare(&self, query: &RankItem<'_>, reference: &LabeledReference, pair_index: usize) -> Result<Option<bool>>;
}

impl<R: Ranker + ?Sized> Ranker for &R {
    fn compare(&self, query: &RankItem<'_>, reference: &LabeledReference, pair_index: usize) -> Result<Option<bool>> {
        (**self).compare(query, reference, pair_index)
    }
}

/// Samples `k` distinct references uniformly and asks `ranker` about each.
///
/// References whose label ties the query's known label are removed from the
/// pool before sampling. The pool is fully shuffled and the first `k` taken,
/// so for a given rng state smaller `k` yields a prefix of larger `k`. The
/// `pair_index` handed to the ranker is the position in the shuffled order.
pub fn generate_comparisons<R: Ranker + ?Sized, G: Rng + ?Sized>(
    query: &RankItem<'_>,
    references: &ReferenceSet,
    k: usize,
    ranker: &R,
    rng: &mut G,
) -> Result<ComparisonSet> {
    let pool: Vec<&LabeledReference> = references.iter().filter(|r| query.label != Some(r.label)).collect();
    if k > pool.len() {
        return Err(Error::Size(format!(
            "k = {k} exceeds the {} usable references for query `{}`",
            pool.len(),
            query.id
        )));
    }
    let mut outcomes = Vec::with_capacity(k);
    let mut pool = pool;
    pool.shuffle(rng);
    for (pair_index, &reference) in pool.iter().take(k).enumerate() {
        if let Some(query_above) = ranker.compare(query, reference, pair_index)? {
            outcomes.push(ComparisonOutcome::new(query.id, &*reference.id, query_above));
        }
    }
    ComparisonSet::from_outcomes(outcomes, references)
}
