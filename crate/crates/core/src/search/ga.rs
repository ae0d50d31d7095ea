use rand::seq::SliceRandom;
use rand::Rng;

use super::{argmax, Crossover, SearchOutcome, SearchParams, SearchProblem};
use crate::error::Result;

/// Real-coded genetic algorithm with tournament selection and elitism of one.
///
/// The trace holds the best valid fitness of each generation; with the elite
/// carried over unchanged it never decreases once a valid individual exists.
pub fn search_ga<R: Rng + ?Sized>(problem: &SearchProblem<'_>, params: &SearchParams, rng: &mut R) -> Result<SearchOutcome> {
    params.validate()?;
    let init: Vec<Vec<f64>> = (0..params.population).map(|_| problem.space.sample_genes(rng)).collect();
    evolve(problem, params, rng, init).map(|(out, _)| out)
}

/// Runs the GA from a given initial population; also returns the final population.
pub(crate) fn evolve<R: Rng + ?Sized>(
    problem: &SearchProblem<'_>,
    params: &SearchParams,
    rng: &mut R,
    mut pop: Vec<Vec<f64>>,
) -> Result<(SearchOutcome, Vec<Vec<f64>>)> {
    let bounds = problem.space.gene_bounds();
    let n = params.population;
    let n_parents = ((params.ga.r_parents * n as f64).ceil() as usize).clamp(2, n);
    let mut out = SearchOutcome::default();

    for k in 0..params.iterations {
        let fit = out.evaluate(problem, &pop, k)?;
        let elite = argmax(&fit);
        out.trace.push(elite.map_or(f64::NEG_INFINITY, |i| fit[i]));
        if k + 1 == params.iterations {
            break;
        }

        let parents: Vec<usize> = (0..n_parents).map(|_| tournament(&fit, params.ga.tournament, rng)).collect();
        let mut next: Vec<Vec<f64>> = Vec::with_capacity(n);
        if let Some(e) = elite {
            next.push(pop[e].clone());
        }
        while next.len() < n {
            let pair: Vec<&usize> = parents.choose_multiple(rng, 2).collect();
            let (mut a, mut b) = (*pair[0], *pair[1]);
            // the fitter parent supplies the head of the first child
            if fit[b] > fit[a] {
                std::mem::swap(&mut a, &mut b);
            }
            let (c1, c2) = crossover(&pop[a], &pop[b], params.ga.crossover, rng);
            for mut child in [c1, c2] {
                if next.len() == n {
                    break;
                }
                mutate(&mut child, &bounds, params.ga.p_mutation, rng);
                next.push(child);
            }
        }
        pop = next;
    }
    Ok((out, pop))
}

/// Index of the fittest of `size` uniformly drawn contestants (first wins ties).
fn tournament<R: Rng + ?Sized>(fit: &[f64], size: usize, rng: &mut R) -> usize {
    let mut best = rng.gen_range(0..fit.len());
    for _ in 1..size {
        let c = rng.gen_range(0..fit.len());
        if fit[c] > fit[best] {
            best = c;
        }
    }
    best
}

fn crossover<R: Rng + ?Sized>(a: &[f64], b: &[f64], kind: Crossover, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let d = a.len();
    let (mut c1, mut c2) = (a.to_vec(), b.to_vec());
    let swap_range = |c1: &mut Vec<f64>, c2: &mut Vec<f64>, lo: usize, hi: usize| {
        for j in lo..hi {
            std::mem::swap(&mut c1[j], &mut c2[j]);
        }
    };
    match kind {
        Crossover::OnePoint if d >= 2 => {
            let cut = rng.gen_range(1..d);
            swap_range(&mut c1, &mut c2, cut, d);
        }
        Crossover::TwoPoint if d >= 3 => {
            let mut p = rng.gen_range(1..d);
            let mut q = rng.gen_range(1..d);
            if p > q {
                std::mem::swap(&mut p, &mut q);
            }
            swap_range(&mut c1, &mut c2, p, q);
        }
        Crossover::TwoPoint if d == 2 => {
            swap_range(&mut c1, &mut c2, 1, 2);
        }
        Crossover::Uniform => {
            for j in 0..d {
                if rng.gen_bool(0.5) {
                    std::mem::swap(&mut c1[j], &mut c2[j]);
                }
            }
        }
        _ => {}
    }
    (c1, c2)
}

fn mutate<R: Rng + ?Sized>(genes: &mut [f64], bounds: &[(f64, f64)], p: f64, rng: &mut R) {
    if p <= 0.0 {
        return;
    }
    for (g, &(lo, hi)) in genes.iter_mut().zip(bounds) {
        if rng.gen_bool(p) {
            *g = lo + rng.gen::<f64>() * (hi - lo);
        }
    }
}
