use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};

/// Seeded stratified subsample of `ceil(fraction * N)` items.
///
/// Class quotas use largest-remainder rounding of `fraction * n_c`, so every
/// class gets within one sample of its proportional share. The result is
/// shuffled; with `fraction = 1` it is a permutation of the input.
pub fn manifest_split(d: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::FractionOutOfRange(fraction));
    }
    let counts = d.class_counts();
    let total = ((fraction * d.len() as f64).ceil() as usize).min(d.len());

    let exact: Vec<f64> = counts.iter().map(|&n| fraction * n as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
    let mut short = total.saturating_sub(quota.iter().sum());
    let mut by_remainder: Vec<usize> = (0..counts.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &c in by_remainder.iter().cycle().take(counts.len() * 2) {
        if short == 0 {
            break;
        }
        if quota[c] < counts[c] {
            quota[c] += 1;
            short -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(total);
    for (class, &q) in quota.iter().enumerate() {
        let mut members: Vec<usize> = (0..d.len()).filter(|&i| d.label(i) == class).collect();
        members.shuffle(&mut rng);
        chosen.extend_from_slice(&members[..q]);
    }
    chosen.shuffle(&mut rng);
    Ok(d.select(&chosen, format!("{}:manifest({fraction})", d.name())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced(classes: usize, per: usize) -> Dataset {
        let labels: Vec<usize> = (0..classes * per).map(|i| i % classes).collect();
        let images: Vec<f32> = (0..labels.len())
            .map(|i| i as f32 / labels.len() as f32)
            .collect();
        Dataset::new("b", (1, 1, 1), classes, images, labels).unwrap()
    }

    #[test]
    fn ten_percent_of_balanced() {
        let d = balanced(10, 100);
        let m = manifest_split(&d, 0.10, 1).unwrap();
        assert_eq!(m.len(), 100);
        assert_eq!(m.class_counts(), vec![10; 10]);
    }

    #[test]
    fn full_fraction_is_a_permutation() {
        let d = balanced(4, 5);
        let m = manifest_split(&d, 1.0, 3).unwrap();
        let mut a: Vec<u32> = (0..d.len()).map(|i| d.image(i)[0].to_bits()).collect();
        let mut b: Vec<u32> = (0..m.len()).map(|i| m.image(i)[0].to_bits()).collect();
        assert_ne!(a, b);
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn deterministic() {
        let d = balanced(10, 30);
        assert_eq!(
            manifest_split(&d, 0.1, 9).unwrap(),
            manifest_split(&d, 0.1, 9).unwrap()
        );
    }

    #[test]
    fn fraction_range() {
        let d = balanced(2, 2);
        for f in [0.0, -0.1, 1.01, f64::NAN] {
            assert!(matches!(
                manifest_split(&d, f, 0),
                Err(Error::FractionOutOfRange(_))
            ));
        }
    }

    #[test]
    fn ceil_total_with_uneven_classes() {
        let labels = vec![0, 0, 0, 0, 0, 0, 0, 1, 1, 2];
        let images = vec![0.5; 10];
        let d = Dataset::new("u", (1, 1, 1), 3, images, labels).unwrap();
        let m = manifest_split(&d, 0.25, 0).unwrap();
        assert_eq!(m.len(), 3);
        let counts = m.class_counts();
        for (c, &n) in counts.iter().enumerate() {
            let share = 0.25 * d.class_counts()[c] as f64;
            assert!((n as f64 - share).abs() < 1.0, "class {c}: {n} vs {share}");
        }
    }
}
