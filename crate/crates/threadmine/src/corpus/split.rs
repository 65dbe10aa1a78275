//! Seeded train/test splitting at thread granularity.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, Thread};

/// Chooses which of `n` items land in train and test.
///
/// The test set holds `round(test_fraction * n)` items, clamped to
/// `1..=n-1` so neither side is ever empty. Both returned index lists are
/// sorted ascending, so downstream order matches corpus order. The same
/// `(n, test_fraction, seed)` always produces the same partition.
pub fn split_indices(
    n: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), CorpusError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CorpusError::BadFraction(test_fraction));
    }
    if n < 2 {
        return Err(CorpusError::TooSmallToSplit(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Partitions a corpus into (train, test) without splitting any thread.
pub fn split_corpus(
    corpus: Vec<Thread>,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<Thread>, Vec<Thread>), CorpusError> {
    let (_, test_idx) = split_indices(corpus.len(), test_fraction, seed)?;
    let mut in_test = vec![false; corpus.len()];
    for i in &test_idx {
        in_test[*i] = true;
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, thread) in corpus.into_iter().enumerate() {
        if in_test[i] {
            test.push(thread);
        } else {
            train.push(thread);
        }
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn blank_thread(id: &str) -> Thread {
        Thread { id: id.into(), posts: Vec::new(), relations: Vec::new() }
    }

    #[test]
    fn ten_threads_at_tenth_gives_nine_one() {
        let corpus: Vec<Thread> = (0..10).map(|i| blank_thread(&format!("t{i}"))).collect();
        let (train, test) = split_corpus(corpus, 0.1, 7).unwrap();
        assert_eq!(train.len(), 9);
        assert_eq!(test.len(), 1);
    }

    #[test]
    fn repeated_split_is_identical() {
        let a = split_indices(37, 0.25, 99).unwrap();
        let b = split_indices(37, 0.25, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hundred_twelve_threads_give_eleven_test() {
        let (train, test) = split_indices(112, 0.1, 0).unwrap();
        assert_eq!(test.len(), 11);
        assert_eq!(train.len(), 101);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(matches!(split_indices(1, 0.5, 0), Err(CorpusError::TooSmallToSplit(1))));
        assert!(matches!(split_indices(10, 0.0, 0), Err(CorpusError::BadFraction(_))));
        assert!(matches!(split_indices(10, 1.0, 0), Err(CorpusError::BadFraction(_))));
    }

    #[test]
    fn test_set_never_empty_or_full() {
        // round(0.9 * 2) = 2 would swallow the whole corpus without clamping.
        let (train, test) = split_indices(2, 0.9, 3).unwrap();
        assert_eq!(train.len(), 1);
        assert_eq!(test.len(), 1);
    }

    proptest! {
        #[test]
        fn split_partitions_exactly(
            n in 2usize..200,
            frac in 0.01f64..0.99,
            seed in proptest::num::u64::ANY,
        ) {
            let (train, test) = split_indices(n, frac, seed).unwrap();
            prop_assert_eq!(train.len() + test.len(), n);
            prop_assert!(!train.is_empty() && !test.is_empty());
            let mut all: Vec<usize> = train.iter().chain(test.iter()).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let again = split_indices(n, frac, seed).unwrap();
            prop_assert_eq!((train, test), again);
        }
    }
}
