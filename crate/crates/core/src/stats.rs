//! Small statistics helpers for Monte Carlo checks.

use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Pearson goodness-of-fit of `observed` counts against category
/// probabilities `expected` (same order). Adjacent categories are pooled
/// until each pooled cell expects at least `min_expected` counts.
///
/// Returns a p-value of 0 when a count lands in a zero-probability cell,
/// and of 1 when fewer than two cells remain after pooling.
pub fn chi_square_gof(observed: &[u64], expected: &[f64], min_expected: f64) -> ChiSquareTest {
    assert_eq!(observed.len(), expected.len());
    let total: u64 = observed.iter().sum();
    let n = total as f64;
    if observed
        .iter()
        .zip(expected)
        .any(|(&o, &p)| o > 0 && p <= 0.0)
    {
        return ChiSquareTest {
            statistic: f64::INFINITY,
            df: 0,
            p_value: 0.0,
        };
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(expected) {
        o_acc += o as f64;
        e_acc += n * p;
        if e_acc >= min_expected {
            cells.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => cells.push((o_acc, e_acc)),
        }
    }
    let statistic: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    if cells.len() < 2 {
        return ChiSquareTest {
            statistic,
            df: 0,
            p_value: 1.0,
        };
    }
    let df = cells.len() - 1;
    let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    ChiSquareTest {
        statistic,
        df,
        p_value: dist.sf(statistic),
    }
}

/// Neumaier's compensated sum, for long sums of terms of mixed size.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::iter::Sum<f64> for CompensatedSum {
    fn sum<I: Iterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::default();
        iter.for_each(|x| s.add(x));
        s
    }
}

/// Median of a sample (mean of the two middle values for even length).
/// `None` for an empty sample.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    })
}

/// Sample mean and its standard error.
pub fn mean_and_standard_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_fit_has_p_one() {
        let t = chi_square_gof(&[250, 750], &[0.25, 0.75], 5.0);
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.df, 1);
        assert!((t.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gross_misfit_is_rejected() {
        let t = chi_square_gof(&[500, 500], &[0.25, 0.75], 5.0);
        assert!(t.p_value < 1e-10);
    }

    #[test]
    fn impossible_category_is_rejected() {
        let t = chi_square_gof(&[10, 1], &[1.0, 0.0], 5.0);
        assert_eq!(t.p_value, 0.0);
    }

    #[test]
    fn small_cells_are_pooled() {
        let t = chi_square_gof(&[98, 1, 1], &[0.98, 0.01, 0.01], 5.0);
        assert_eq!(t.df, 0);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn compensated_sum_keeps_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1.0);
        for _ in 0..1000 {
            s.add(1e-17);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-14).abs() < 1e-26);
        let t: CompensatedSum = [0.1, 0.2, 0.3].into_iter().sum();
        assert_eq!(t.value(), 0.6);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn standard_error() {
        let (m, se) = mean_and_standard_error(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}
