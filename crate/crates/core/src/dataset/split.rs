use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Episode ids sorted, then shuffled by a ChaCha8 stream seeded with `seed`.
pub fn shuffled_order(mut episode_ids: Vec<String>, seed: u64) -> Vec<String> {
    episode_ids.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    episode_ids.shuffle(&mut rng);
    episode_ids
}

/// Picks the subset of `counts` with the largest sum not exceeding `target`.
/// Among subsets with that sum, returns the one that is lexicographically
/// earliest as an include/exclude sequence in the given order (earlier
/// items are preferred). Returns one flag per item.
pub fn select_train(counts: &[usize], target: usize) -> Vec<bool> {
    let n = counts.len();
    // reachable[i][s]: some subset of items i.. sums to exactly s
    let mut reachable = vec![vec![false; target + 1]; n + 1];
    reachable[n][0] = true;
    for i in (0..n).rev() {
        let (head, tail) = reachable.split_at_mut(i + 1);
        let (row, next) = (&mut head[i], &tail[0]);
        for s in 0..=target {
            row[s] = next[s] || (counts[i] <= s && next[s - counts[i]]);
        }
    }
    let best = (0..=target).rev().find(|&s| reachable[0][s]).unwrap_or(0);
    let mut remaining = best;
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let take = c <= remaining && reachable[i + 1][remaining - c];
            if take {
                remaining -= c;
            }
            take
        })
        .collect()
}
