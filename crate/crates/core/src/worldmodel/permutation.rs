use rand::seq::SliceRandom;

use crate::rng::Rng;

/// Uniformly random bijection on `{0, 1, ..., last}` as a lookup table.
pub fn sample_permutation(last: usize, rng: &mut Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..=last).collect();
    p.shuffle(rng);
    p
}
