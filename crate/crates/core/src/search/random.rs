use rand::Rng;

use super::{SearchOutcome, SearchParams, SearchProblem};
use crate::error::Result;

/// Uniform random sampling baseline: `population × iterations` samples.
/// The trace holds the best valid fitness seen so far.
pub fn search_rs<R: Rng + ?Sized>(problem: &SearchProblem<'_>, params: &SearchParams, rng: &mut R) -> Result<SearchOutcome> {
    params.validate()?;
    let mut out = SearchOutcome::default();
    let mut best = f64::NEG_INFINITY;
    for k in 0..params.iterations {
        let batch: Vec<Vec<f64>> = (0..params.population).map(|_| problem.space.sample_genes(rng)).collect();
        let fit = out.evaluate(problem, &batch, k)?;
        best = fit.iter().copied().fold(best, f64::max);
        out.trace.push(best);
    }
    Ok(out)
}
