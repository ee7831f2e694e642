//! One-dimensional 1-Wasserstein distance between empirical distributions.

/// `∫ |F(x) − G(x)| dx` for the empirical CDFs of `a` and `b`.
///
/// Equal sizes use the sorted-difference form; unequal sizes sweep the merged
/// support.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "Wasserstein distance of an empty sample");
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a.len() == b.len() {
        wasserstein1_sorted_equal(&a, &b)
    } else {
        wasserstein1_sorted(&a, &b)
    }
}

/// Mean absolute difference of order statistics; both inputs sorted, same length.
pub fn wasserstein1_sorted_equal(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// CDF-difference integral for sorted samples of any sizes.
pub fn wasserstein1_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    let mut prev = a[0].min(b[0]);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        let gap = (i as f64 / na - j as f64 / nb).abs();
        total += gap * (next - prev);
        while i < a.len() && a[i] == next {
            i += 1;
        }
        while j < b.len() && b[j] == next {
            j += 1;
        }
        prev = next;
    }
    total
}
