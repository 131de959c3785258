use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::ComparisonOutcome;

/// An item shown to a human ranker.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InteractiveSession {
    pub outcomes: Vec<ComparisonOutcome>,
    pub skipped: usize,
    /// Input ended before every pair was answered.
    pub closed_early: bool,
}

enum Answer {
    Yes,
    No,
    Skip,
}

fn parse_answer(line: &str) -> Option<Answer> {
    match line.trim().to_ascii_lowercase().as_str() {
        "y" | "yes" => Some(Answer::Yes),
        "n" | "no" => Some(Answer::No),
        "s" | "skip" => Some(Answer::Skip),
        _ => None,
    }
}

/// Asks, for each reference, whether the query exceeds it in `property`.
/// Answers are `y`, `n` or `skip`; anything else re-prompts. Skipped pairs
/// produce no outcome. If the input closes early the partial session is
/// returned with `closed_early` set.
pub fn interactive_rank<R: BufRead, W: Write>(
    query: &Descriptor,
    references: &[Descriptor],
    property: &str,
    mut input: R,
    mut output: W,
) -> Result<InteractiveSession> {
    let io_err = |e| Error::io("<terminal>", e);
    let mut session = InteractiveSession::default();
    let mut line = String::new();
    'pairs: for reference in references {
        loop {
            write!(
                output,
                "Does {} exceed {} in {property}? [y/n/skip] ",
                query.text, reference.text
            )
            .map_err(io_err)?;
            output.flush().map_err(io_err)?;
            line.clear();
            if input.read_line(&mut line).map_err(io_err)? == 0 {
                session.closed_early = true;
                writeln!(output).map_err(io_err)?;
                log::warn!(
                    "input closed after {} of {} pairs; keeping the partial session",
                    session.outcomes.len() + session.skipped,
                    references.len()
                );
                break 'pairs;
            }
            match parse_answer(&line) {
                Some(Answer::Yes) => {
                    session
                        .outcomes
                        .push(ComparisonOutcome::new(&*query.id, &*reference.id, true));
                }
                Some(Answer::No) => {
                    session
                        .outcomes
                        .push(ComparisonOutcome::new(&*query.id, &*reference.id, false));
                }
                Some(Answer::Skip) => session.skipped += 1,
                None => {
                    writeln!(output, "Please answer y, n, or skip.").map_err(io_err)?;
                    continue;
                }
            }
            break;
        }
    }
    Ok(session)
}
