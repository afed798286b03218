use rand::Rng;

/// Returns the pick with the fewest jobs. Ties are broken uniformly over the
/// tied pick positions (so a server drawn twice counts twice).
pub fn shortest_of<I, F, R>(picks: I, len_of: F, rng: &mut R) -> usize
where
    I: IntoIterator<Item = usize>,
    F: Fn(usize) -> usize,
    R: Rng + ?Sized,
{
    let mut best = usize::MAX;
    let mut best_len = usize::MAX;
    let mut ties = 0u32;
    for p in picks {
        let l = len_of(p);
        if l < best_len {
            best = p;
            best_len = l;
            ties = 1;
        } else if l == best_len {
            ties += 1;
            // reservoir step keeps each tied position with probability 1/ties
            if rng.random_range(0..ties) == 0 {
                best = p;
            }
        }
    }
    assert!(best != usize::MAX, "routing needs at least one pick");
    best
}

/// SQ(d): sample `choices` servers uniformly with replacement and join the shortest.
pub fn route<F, R>(servers: usize, choices: u32, len_of: F, rng: &mut R) -> usize
where
    F: Fn(usize) -> usize,
    R: Rng + ?Sized,
{
    let mut best = 0;
    let mut best_len = usize::MAX;
    let mut ties = 0u32;
    for _ in 0..choices.max(1) {
        let p = rng.random_range(0..servers);
        let l = len_of(p);
        if l < best_len {
            best = p;
            best_len = l;
            ties = 1;
        } else if l == best_len {
            ties += 1;
            if rng.random_range(0..ties) == 0 {
                best = p;
            }
        }
    }
    best
}

/// Probability that SQ(d) sends a job to a queue holding exactly `level`
/// jobs, given the fractions `frac_at_least(level)` and `frac_at_least(level + 1)`.
#[inline]
pub fn routing_probability(at_least: f64, at_least_next: f64, choices: u32) -> f64 {
    let d = choices as i32;
    libm::pow(at_least, d as f64) - libm::pow(at_least_next, d as f64)
}
