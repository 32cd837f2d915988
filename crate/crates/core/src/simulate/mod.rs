//! Monte Carlo realizations of the process.
//!
//! Three constructions produce the generation sizes `Z_n` of a process started
//! from a γ-distributed ancestor: direct branching ([`simulate_bgw`]), the
//! embedded Crump–Mode–Jagers population of marked lineages ([`simulate_cmj`]),
//! and the contour walk around the height-truncated tree ([`simulate_contour`]).

use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::spectral::{LifeLengthLaw, N_MAX};
use crate::typespace::{offspring_into, LfTriplet, TypePoint};
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default cap on the number of particles alive in one generation.
pub const POPULATION_CAP: usize = 10_000_000;
/// Default cap on contour walk steps.
pub const STEP_CAP: usize = 100_000_000;

/// Particles of one generation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenerationSnapshot {
    pub generation: usize,
    pub points: Vec<TypePoint>,
    /// Position of the marked particle in `points`, when one is singled out.
    pub marked: Option<usize>,
}

impl GenerationSnapshot {
    pub fn new(generation: usize) -> Self {
        Self {
            generation,
            points: Vec::new(),
            marked: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Type of the generation-0 ancestor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Start {
    Point(TypePoint),
    /// Drawn from γ.
    Gamma,
}

/// Generations `0..=n` by repeated offspring sampling.
pub fn simulate_bgw(
    t: &(impl LfTriplet + ?Sized),
    start: Start,
    n: usize,
    cap: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<GenerationSnapshot>> {
    let x = match start {
        Start::Point(x) => {
            if !t.contains(x) {
                return Err(Error::InvalidType(x.to_string()));
            }
            x
        }
        Start::Gamma => t.gamma().sample(rng),
    };
    let mut out = Vec::with_capacity(n + 1);
    out.push(GenerationSnapshot {
        generation: 0,
        points: vec![x],
        marked: None,
    });
    for g in 1..=n {
        let mut next = GenerationSnapshot::new(g);
        for &p in &out[g - 1].points {
            offspring_into(t, p, rng, &mut next.points);
            if next.points.len() > cap {
                return Err(Error::PopulationCap { cap, generation: g });
            }
        }
        out.push(next);
    }
    Ok(out)
}

/// Particles of generation `n` alone, without keeping earlier generations.
pub fn bgw_last_generation(
    t: &(impl LfTriplet + ?Sized),
    start: Start,
    n: usize,
    cap: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<TypePoint>> {
    let mut cur = vec![match start {
        Start::Point(x) => x,
        Start::Gamma => t.gamma().sample(rng),
    }];
    let mut next = Vec::new();
    for g in 1..=n {
        next.clear();
        for &p in &cur {
            offspring_into(t, p, rng, &mut next);
            if next.len() > cap {
                return Err(Error::PopulationCap { cap, generation: g });
            }
        }
        std::mem::swap(&mut cur, &mut next);
        if cur.is_empty() {
            break;
        }
    }
    Ok(cur)
}

/// `Z_n` by direct branching.
pub fn bgw_size(t: &(impl LfTriplet + ?Sized), start: Start, n: usize, cap: usize, rng: &mut dyn RngCore) -> Result<u64> {
    Ok(bgw_last_generation(t, start, n, cap, rng)?.len() as u64)
}

pub fn sample_life_length(law: &LifeLengthLaw, rng: &mut dyn RngCore) -> u64 {
    law.sample(rng)
}

/// One individual of the embedded CMJ population: a maximal marked lineage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmjIndividual {
    pub birth_time: u64,
    pub life_length: u64,
    /// Litter sizes at ages `1, 2, …`, up to `L − 1` or the horizon.
    pub litters: Vec<u64>,
}

impl CmjIndividual {
    /// Life length from `law`, geometric litters with mean `m` at every age
    /// below `L` whose birth time does not pass `horizon`.
    pub fn sample(law: &LifeLengthLaw, m: f64, birth_time: u64, horizon: u64, rng: &mut dyn RngCore) -> Self {
        let life_length = law.sample(rng);
        let last_age = (life_length - 1).min(horizon.saturating_sub(birth_time));
        let litters = (1..=last_age).map(|_| rng::geometric0(rng, m)).collect();
        Self {
            birth_time,
            life_length,
            litters,
        }
    }

    pub fn alive_at(&self, time: u64) -> bool {
        time >= self.birth_time && time - self.birth_time < self.life_length
    }
}

/// Alive counts at times `0..=n` of the CMJ population started by one newborn.
///
/// An individual born at `b` is alive at `b, …, b+L−1`; a newborn counts at
/// its own birth time, which makes the count at time `k` equal to `Z_k`.
pub fn simulate_cmj(law: &LifeLengthLaw, m: f64, n: usize, cap: usize, rng: &mut dyn RngCore) -> Result<Vec<u64>> {
    let horizon = n as u64;
    let mut alive = vec![0u64; n + 1];
    let mut pending = vec![0u64];
    let mut processed = 0usize;
    while let Some(b) = pending.pop() {
        processed += 1;
        if processed > cap {
            return Err(Error::PopulationCap {
                cap,
                generation: b as usize,
            });
        }
        let ind = CmjIndividual::sample(law, m, b, horizon, rng);
        let last = (b + ind.life_length - 1).min(horizon);
        for count in &mut alive[b as usize..=last as usize] {
            *count += 1;
        }
        for (age, &litter) in ind.litters.iter().enumerate() {
            let t = b + age as u64 + 1;
            pending.extend(std::iter::repeat_n(t, litter as usize));
        }
    }
    Ok(alive)
}

/// One move of the contour walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContourStep {
    Up(u64),
    /// A run of unit down-steps.
    Down(u64),
}

/// Contour walk of the tree truncated at height `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourWalk {
    pub path: Vec<ContourStep>,
    /// Number of excursions reaching level `n`, which is `Z_n`.
    pub excursions: u64,
}

impl ContourWalk {
    /// Heights visited after each step, starting from 0.
    pub fn heights(&self) -> Vec<i64> {
        let mut h = 0i64;
        let mut out = vec![0];
        for s in &self.path {
            match s {
                ContourStep::Up(k) => h += *k as i64,
                ContourStep::Down(k) => h -= *k as i64,
            }
            out.push(h);
        }
        out
    }
}

fn push_down(path: &mut Option<&mut Vec<ContourStep>>) {
    if let Some(p) = path {
        match p.last_mut() {
            Some(ContourStep::Down(k)) => *k += 1,
            _ => p.push(ContourStep::Down(1)),
        }
    }
}

/// Walk around the family tree of individuals, truncated at level `n`.
///
/// Height is level + 1. An individual born at level `b` with life `L` enters
/// by an up-jump to level `min(b+L−1, n)`. On the way down, at each level `j`
/// of its lineage below the top, Bernoulli(m/(1+m)) trials decide whether a
/// child born at `j+1` starts its own excursion before the walk continues;
/// the number of successes is the geometric litter.
fn contour(
    law: &LifeLengthLaw,
    m: f64,
    n: usize,
    cap: usize,
    rng: &mut dyn RngCore,
    mut path: Option<&mut Vec<ContourStep>>,
) -> Result<u64> {
    let n = n as u64;
    let q = m / (1.0 + m);
    let mut steps = 0usize;
    let mut count = 0u64;
    // (birth level, current level, trials open at current level)
    let mut stack: Vec<(u64, u64, bool)> = Vec::new();

    let top = (law.sample(rng) - 1).min(n);
    if let Some(p) = path.as_mut() {
        p.push(ContourStep::Up(top + 1));
    }
    count += (top == n) as u64;
    stack.push((0, top, false));

    while let Some(frame) = stack.last_mut() {
        steps += 1;
        if steps > cap {
            return Err(Error::StepCap { cap });
        }
        let (b, j, open) = *frame;
        if open {
            if rng.random::<f64>() < q {
                let child_top = (j + law.sample(rng)).min(n);
                if let Some(p) = path.as_mut() {
                    p.push(ContourStep::Up(child_top - j));
                }
                count += (child_top == n) as u64;
                stack.push((j + 1, child_top, false));
            } else {
                frame.2 = false;
            }
        } else if j > b {
            push_down(&mut path);
            *frame = (b, j - 1, true);
        } else {
            push_down(&mut path);
            stack.pop();
        }
    }
    Ok(count)
}

/// `Z_n` as the number of level-`n` excursions of the contour walk.
pub fn simulate_contour(law: &LifeLengthLaw, m: f64, n: usize, cap: usize, rng: &mut dyn RngCore) -> Result<u64> {
    contour(law, m, n, cap, rng, None)
}

/// [`simulate_contour`] keeping the whole path.
pub fn trace_contour(law: &LifeLengthLaw, m: f64, n: usize, cap: usize, rng: &mut dyn RngCore) -> Result<ContourWalk> {
    let mut path = Vec::new();
    let excursions = contour(law, m, n, cap, rng, Some(&mut path))?;
    Ok(ContourWalk { path, excursions })
}

/// Types along the marked lineage of `x` until absorption. The path length is
/// the life length of the individual started at `x`.
pub fn simulate_typed_lineage(t: &(impl LfTriplet + ?Sized), x: TypePoint, rng: &mut dyn RngCore) -> Result<Vec<TypePoint>> {
    if !t.contains(x) {
        return Err(Error::InvalidType(x.to_string()));
    }
    let k = t.kernel();
    let mut path = vec![x];
    let mut y = x;
    loop {
        let mass = k.mass(y);
        if !(mass > 0.0 && rng.random::<f64>() < mass) {
            return Ok(path);
        }
        y = k.sample_marked(y, rng);
        path.push(y);
        if path.len() > N_MAX {
            return Err(Error::StepCap { cap: N_MAX });
        }
    }
}

/// Run `f` for replicates `0..reps` in parallel, replicate `i` on
/// `rng::stream(seed, i)`. Results come back in replicate order, so output
/// does not depend on the thread count.
pub fn run_replicates<R, F>(seed: u64, reps: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, &mut Stream) -> R + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64);
            f(i, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests;
