//! Small numerical helpers: weighted least squares, correlation and
//! pool-adjacent-violators isotonic regression.

/// Weighted least squares `y = slope * x + intercept` over `(x, y, w)`.
/// `None` when fewer than two points or `x` has no spread.
pub fn weighted_ols(points: &[(f64, f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let sw: f64 = points.iter().map(|p| p.2).sum();
    if sw <= 0.0 {
        return None;
    }
    let mx = points.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = points.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = points.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Pearson correlation; `None` for fewer than two points or zero variance.
pub fn correlation(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let mx = mean(x)?;
    let my = mean(y)?;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Weighted isotonic (non-decreasing) regression by pool-adjacent-violators.
pub fn isotonic_increasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    // blocks of (weighted mean, total weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let n = blocks.len();
            let (m2, w2, l2) = blocks[n - 1];
            let (m1, w1, l1) = blocks[n - 2];
            if m1 <= m2 {
                break;
            }
            let w = w1 + w2;
            blocks.truncate(n - 2);
            blocks.push(((m1 * w1 + m2 * w2) / w, w, l1 + l2));
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, _, len)| std::iter::repeat_n(m, len))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_exact_line() {
        let pts: Vec<_> = (0..5).map(|i| (i as f64, 3.0 * i as f64 - 1.0, 1.0)).collect();
        let (s, c) = weighted_ols(&pts).unwrap();
        assert!((s - 3.0).abs() < 1e-12 && (c + 1.0).abs() < 1e-12);
        assert!(weighted_ols(&[(1.0, 1.0, 1.0), (1.0, 2.0, 1.0)]).is_none());
    }

    #[test]
    fn pava() {
        let out = isotonic_increasing(&[1.0, 3.0, 2.0, 4.0], &[1.0; 4]);
        assert_eq!(out, vec![1.0, 2.5, 2.5, 4.0]);
        let out = isotonic_increasing(&[3.0, 1.0], &[3.0, 1.0]);
        assert_eq!(out, vec![2.5, 2.5]);
        let sorted = [0.1, 0.2, 0.3];
        assert_eq!(isotonic_increasing(&sorted, &[1.0; 3]), sorted.to_vec());
    }

    #[test]
    fn correlation_basics() {
        let x = [1.0, 2.0, 3.0];
        assert!((correlation(&x, &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((correlation(&x, &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(correlation(&x, &[1.0, 1.0, 1.0]).is_none());
    }
}
