use rand::Rng;

use super::{argmax, SearchOutcome, SearchParams, SearchProblem};
use crate::error::Result;

/// Particle swarm search.
///
/// Velocities start at zero and positions uniformly in the space. Per
/// iteration: `v ← w·v + φp·r1⊙(pbest − x) + φg·r2⊙(gbest − x)`, velocity
/// clamped to the gene range, position clamped to the bounds. A missing
/// pbest/gbest (no valid visit yet) contributes nothing. The trace holds the
/// global best fitness after each iteration.
pub fn search_pso<R: Rng + ?Sized>(problem: &SearchProblem<'_>, params: &SearchParams, rng: &mut R) -> Result<SearchOutcome> {
    params.validate()?;
    let bounds = problem.space.gene_bounds();
    let dim = bounds.len();
    let n = params.population;
    let (w, phi_p, phi_g) = (params.pso.w, params.pso.phi_p, params.pso.phi_g);

    let mut pos: Vec<Vec<f64>> = (0..n).map(|_| problem.space.sample_genes(rng)).collect();
    let mut vel = vec![vec![0.0; dim]; n];
    let mut pbest = pos.clone();
    let mut pbest_fit = vec![f64::NEG_INFINITY; n];
    let mut gbest: Option<(Vec<f64>, f64)> = None;
    let mut out = SearchOutcome::default();

    for k in 0..params.iterations {
        let fit = out.evaluate(problem, &pos, k)?;
        for i in 0..n {
            if fit[i] > pbest_fit[i] {
                pbest_fit[i] = fit[i];
                pbest[i].clone_from(&pos[i]);
            }
        }
        if let Some(i) = argmax(&pbest_fit) {
            if gbest.as_ref().is_none_or(|(_, g)| pbest_fit[i] > *g) {
                gbest = Some((pbest[i].clone(), pbest_fit[i]));
            }
        }
        out.trace.push(gbest.as_ref().map_or(f64::NEG_INFINITY, |(_, g)| *g));
        if k + 1 == params.iterations {
            break;
        }
        for i in 0..n {
            for j in 0..dim {
                let (lo, hi) = bounds[j];
                let x = pos[i][j];
                let cognitive = if pbest_fit[i] > f64::NEG_INFINITY {
                    phi_p * rng.gen::<f64>() * (pbest[i][j] - x)
                } else {
                    0.0
                };
                let social = match &gbest {
                    Some((g, _)) => phi_g * rng.gen::<f64>() * (g[j] - x),
                    None => 0.0,
                };
                let vmax = hi - lo;
                let v = (w * vel[i][j] + cognitive + social).clamp(-vmax, vmax);
                vel[i][j] = v;
                pos[i][j] = (x + v).clamp(lo, hi);
            }
        }
    }
    Ok(out)
}
