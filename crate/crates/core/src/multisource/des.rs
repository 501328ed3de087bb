use rand::Rng;
use rand_distr::Exp1;

use super::{validate, Scheme, SourceConfig};
use crate::error::{AoiError, Result};
use crate::estimate::{mean_and_half_width, AaoiEstimate};
use crate::rng::stream;

const BATCHES: usize = 32;

/// Adds the sawtooth area on `[a, b]` (age `g` at `a`) to equal-width time bins.
fn add_area(bins: &mut [f64], width: f64, g: f64, a: f64, b: f64) {
    let n = bins.len();
    let mut lo = a;
    while lo < b {
        let mut idx = ((lo / width) as usize).min(n - 1);
        let mut edge = if idx + 1 >= n { b } else { (idx + 1) as f64 * width };
        if edge <= lo && idx + 1 < n {
            idx += 1;
            edge = if idx + 1 >= n { b } else { (idx + 1) as f64 * width };
        }
        let edge = edge.min(b);
        let w = edge - lo;
        bins[idx] += w * (g + (lo - a) + 0.5 * w);
        lo = edge;
    }
}

/// Event-driven run of the shared channel up to `horizon`, with every
/// source's Poisson clock kept explicitly. Returns per-source time-average
/// age with a batch-means interval.
pub fn simulate_multisource(
    sources: &[SourceConfig],
    scheme: Scheme,
    horizon: f64,
    seed: u64,
) -> Result<Vec<AaoiEstimate>> {
    validate(sources)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(AoiError::InvalidParameter(format!("horizon must be finite and > 0, got {horizon}")));
    }
    let n = sources.len();
    let mut rng = stream(seed, 0);
    let gap = |s: usize, rng: &mut crate::rng::SimRng| rng.sample::<f64, _>(Exp1) / sources[s].lambda;
    let mut next: Vec<f64> = (0..n).map(|s| gap(s, &mut rng)).collect();
    let mut reset_at = vec![0.0; n];
    let mut age_at_reset = vec![0.0; n];
    let width = horizon / BATCHES as f64;
    let mut bins = vec![vec![0.0; BATCHES]; n];

    loop {
        let (w, start) = next
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, &t)| if t < best.1 { (i, t) } else { best });
        if start >= horizon {
            break;
        }
        next[w] = start + gap(w, &mut rng);
        let mut begin = start;
        let done = loop {
            let done = begin + sources[w].dist.sample(&mut rng);
            if scheme == Scheme::Dop && next[w] < done {
                begin = next[w];
                next[w] = begin + gap(w, &mut rng);
                continue;
            }
            break done;
        };
        for s in 0..n {
            while next[s] < done {
                next[s] += gap(s, &mut rng);
            }
        }
        if done >= horizon {
            break;
        }
        add_area(&mut bins[w], width, age_at_reset[w], reset_at[w], done);
        reset_at[w] = done;
        age_at_reset[w] = done - begin;
    }
    for s in 0..n {
        add_area(&mut bins[s], width, age_at_reset[s], reset_at[s], horizon);
    }
    Ok(bins
        .iter()
        .map(|b| {
            let ratios: Vec<f64> = b.iter().map(|a| a / width).collect();
            let (_, half_width) = mean_and_half_width(&ratios);
            AaoiEstimate { value: b.iter().sum::<f64>() / horizon, half_width, replications: 1, seed: Some(seed) }
        })
        .collect())
}
