//! Odd-part partitions entering the tree terms, their multinomial weights,
//! the partition-count estimate and the leading small-coupling constants.

use crate::error::{Error, Result};
use crate::ext::{ln_factorial, ExtScalar};
use serde::{Deserialize, Serialize};

/// Split `n = j1 + j2` with `j1` odd.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairPartition {
    /// Odd first part.
    pub j1: usize,
    /// Remainder `n - j1`.
    pub j2: usize,
}

/// Weakly decreasing triple of odd parts with its symmetry factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriplePartition {
    /// Largest part.
    pub i1: usize,
    /// Middle part.
    pub i2: usize,
    /// Smallest part.
    pub i3: usize,
    /// 6 when all parts are equal, 1 when all differ, 2 otherwise.
    pub sigma: u8,
}

impl TriplePartition {
    /// Builds a triple and classifies its symmetry factor.
    pub fn new(i1: usize, i2: usize, i3: usize) -> Self {
        let sigma = symmetry_factor(i1, i2, i3);
        TriplePartition { i1, i2, i3, sigma }
    }

    /// Sum of the three parts.
    pub fn total(&self) -> usize {
        self.i1 + self.i2 + self.i3
    }

    /// Parts as an array.
    pub fn parts(&self) -> [usize; 3] {
        [self.i1, self.i2, self.i3]
    }
}

/// Symmetry factor of a sorted triple.
pub fn symmetry_factor(i1: usize, i2: usize, i3: usize) -> u8 {
    if i1 == i2 && i2 == i3 {
        6
    } else if i1 != i2 && i2 != i3 && i1 != i3 {
        1
    } else {
        2
    }
}

/// Rejects even or too small orders.
pub fn check_odd_index(n: usize, min: usize) -> Result<()> {
    if n.is_multiple_of(2) || n < min {
        Err(Error::Domain(format!(
            "order n={n} must be odd and at least {min}"
        )))
    } else {
        Ok(())
    }
}

/// All pairs `(j1, n - j1)` with odd `j1` from 1 to `n - 2`.
pub fn enumerate_pairs(n: usize) -> Result<Vec<PairPartition>> {
    check_odd_index(n, 3)?;
    Ok((1..n - 1)
        .step_by(2)
        .map(|j1| PairPartition { j1, j2: n - j1 })
        .collect())
}

/// All weakly decreasing odd triples summing to `n`, in decreasing
/// lexicographic order of `(i1, i2)`.
pub fn enumerate_triples(n: usize) -> Result<Vec<TriplePartition>> {
    check_odd_index(n, 3)?;
    let mut out = Vec::new();
    let mut i1 = n - 2;
    loop {
        let mut i2 = i1;
        loop {
            if i1 + i2 < n {
                let i3 = n - i1 - i2;
                if i3 <= i2 && i3 % 2 == 1 {
                    out.push(TriplePartition::new(i1, i2, i3));
                }
            }
            if i2 <= 1 {
                break;
            }
            i2 -= 2;
        }
        if i1 <= 1 {
            break;
        }
        i1 -= 2;
    }
    Ok(out)
}

/// Exact number of weakly decreasing odd triples summing to `n`.
pub fn exact_triple_count(n: usize) -> Result<usize> {
    Ok(enumerate_triples(n)?.len())
}

/// The closed-form count estimate `(n-3)^2/48 + (n-3)/3 + 1`, with the
/// stated values 2 and 3 at `n = 7` and `n = 9`.
pub fn partition_count_formula(n: usize) -> Result<f64> {
    check_odd_index(n, 7)?;
    Ok(match n {
        7 => 2.0,
        9 => 3.0,
        _ => {
            let m = (n - 3) as f64;
            m * m / 48.0 + m / 3.0 + 1.0
        }
    })
}

/// One row of the comparison between the count formula and the exact count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountComparison {
    /// Odd order.
    pub n: usize,
    /// Value of the closed-form estimate.
    pub formula: f64,
    /// Exact number of triples.
    pub exact: usize,
}

impl CountComparison {
    /// True when the estimate differs from the exact count.
    pub fn diverges(&self) -> bool {
        (self.formula - self.exact as f64).abs() > 1e-12
    }
}

/// Tabulates formula and exact counts for odd `n` in `[7, n_max]`.
pub fn count_comparison(n_max: usize) -> Result<Vec<CountComparison>> {
    (7..=n_max)
        .step_by(2)
        .map(|n| {
            Ok(CountComparison {
                n,
                formula: partition_count_formula(n)?,
                exact: exact_triple_count(n)?,
            })
        })
        .collect()
}

/// `ln(n! / (j1! j2!))`.
pub fn ln_weight_pair(n: usize, p: &PairPartition) -> f64 {
    ln_factorial(n) - ln_factorial(p.j1) - ln_factorial(p.j2)
}

/// `ln(n! / (i1! i2! i3! sigma))`.
pub fn ln_weight_triple(n: usize, t: &TriplePartition) -> f64 {
    ln_factorial(n)
        - ln_factorial(t.i1)
        - ln_factorial(t.i2)
        - ln_factorial(t.i3)
        - f64::from(t.sigma).ln()
}

/// Multinomial weight `n! / (j1! j2!)` of a pair.
pub fn multinomial_weight_pair(n: usize, p: &PairPartition) -> ExtScalar {
    ExtScalar::from_ln(ln_weight_pair(n, p))
}

/// Multinomial weight `n! / (i1! i2! i3! sigma)` of a triple.
pub fn multinomial_weight_triple(n: usize, t: &TriplePartition) -> ExtScalar {
    ExtScalar::from_ln(ln_weight_triple(n, t))
}

/// Constants `c_n` for odd `n <= n_max`, indexed by `(n - 1) / 2`, from
/// `c_1 = c_3 = 1` and `c_n = 6 * sum(c_i1 c_i2 c_i3 / sigma)`.
pub fn limit_constants(n_max: usize) -> Result<Vec<f64>> {
    check_odd_index(n_max, 3)?;
    let mut c = vec![1.0, 1.0];
    for n in (5..=n_max).step_by(2) {
        let s: f64 = enumerate_triples(n)?
            .iter()
            .map(|t| {
                t.parts().iter().map(|&i| c[(i - 1) / 2]).product::<f64>() / f64::from(t.sigma)
            })
            .sum();
        c.push(6.0 * s);
    }
    Ok(c)
}

/// Precomputed partitions and log-weights for every odd order up to a bound.
#[derive(Clone, Debug)]
pub struct PartitionTable {
    n_max: usize,
    pairs: Vec<Vec<(PairPartition, f64)>>,
    triples: Vec<Vec<(TriplePartition, f64)>>,
}

impl PartitionTable {
    /// Builds the table for odd orders `3..=n_max`.
    pub fn new(n_max: usize) -> Result<Self> {
        check_odd_index(n_max, 3)?;
        let mut pairs = vec![Vec::new()];
        let mut triples = vec![Vec::new()];
        for n in (3..=n_max).step_by(2) {
            pairs.push(
                enumerate_pairs(n)?
                    .into_iter()
                    .map(|p| (p, ln_weight_pair(n, &p)))
                    .collect(),
            );
            triples.push(
                enumerate_triples(n)?
                    .into_iter()
                    .map(|t| (t, ln_weight_triple(n, &t)))
                    .collect(),
            );
        }
        Ok(PartitionTable {
            n_max,
            pairs,
            triples,
        })
    }

    /// Largest order covered.
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Pairs of order `n` with their log-weights.
    pub fn pairs(&self, n: usize) -> &[(PairPartition, f64)] {
        &self.pairs[(n - 1) / 2]
    }

    /// Triples of order `n` with their log-weights.
    pub fn triples(&self, n: usize) -> &[(TriplePartition, f64)] {
        &self.triples[(n - 1) / 2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ordered_odd_triples(n: usize) -> usize {
        let mut count = 0;
        for a in (1..n).step_by(2) {
            for b in (1..n).step_by(2) {
                if a + b < n && (n - a - b) % 2 == 1 {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn pairs_small_orders() {
        let p7: Vec<_> = enumerate_pairs(7).unwrap().iter().map(|p| (p.j1, p.j2)).collect();
        assert_eq!(p7, vec![(1, 6), (3, 4), (5, 2)]);
        assert_eq!(enumerate_pairs(3).unwrap().len(), 1);
        assert_eq!(enumerate_pairs(11).unwrap().len(), 5);
        assert!(enumerate_pairs(4).is_err());
        assert!(enumerate_pairs(1).is_err());
    }

    #[test]
    fn triples_small_orders() {
        let t9: Vec<_> = enumerate_triples(9)
            .unwrap()
            .iter()
            .map(|t| (t.i1, t.i2, t.i3, t.sigma))
            .collect();
        assert_eq!(t9, vec![(7, 1, 1, 2), (5, 3, 1, 1), (3, 3, 3, 6)]);
        let t13: Vec<_> = enumerate_triples(13)
            .unwrap()
            .iter()
            .map(|t| (t.i1, t.i2, t.i3))
            .collect();
        assert_eq!(t13, vec![(11, 1, 1), (9, 3, 1), (7, 5, 1), (7, 3, 3), (5, 5, 3)]);
        assert_eq!(enumerate_triples(3).unwrap(), vec![TriplePartition::new(1, 1, 1)]);
        assert_eq!(enumerate_triples(3).unwrap()[0].sigma, 6);
        assert!(enumerate_triples(8).is_err());
    }

    #[test]
    fn orbit_sizes_reproduce_ordered_counts() {
        for n in (3..=101).step_by(2) {
            let orbit: usize = enumerate_triples(n)
                .unwrap()
                .iter()
                .map(|t| 6 / usize::from(t.sigma))
                .sum();
            assert_eq!(orbit, ordered_odd_triples(n), "n={n}");
        }
    }

    #[test]
    fn count_formula_values() {
        assert_eq!(partition_count_formula(7).unwrap(), 2.0);
        assert_eq!(partition_count_formula(9).unwrap(), 3.0);
        assert_eq!(partition_count_formula(15).unwrap(), 8.0);
        assert_eq!(exact_triple_count(15).unwrap(), 7);
        assert!(partition_count_formula(5).is_err());
        let rows = count_comparison(21).unwrap();
        assert!(!rows[0].diverges());
        assert!(rows.iter().any(|r| r.diverges()));
    }

    #[test]
    fn multinomial_weights() {
        let t = TriplePartition::new(3, 1, 1);
        assert_relative_eq!(multinomial_weight_triple(5, &t).to_f64(), 10.0, max_relative = 1e-13);
        let t = TriplePartition::new(1, 1, 1);
        assert_relative_eq!(multinomial_weight_triple(3, &t).to_f64(), 1.0, max_relative = 1e-13);
        let p = PairPartition { j1: 1, j2: 4 };
        assert_relative_eq!(multinomial_weight_pair(5, &p).to_f64(), 5.0, max_relative = 1e-13);
    }

    #[test]
    fn limit_constant_values() {
        let c = limit_constants(11).unwrap();
        assert_eq!(c[..6], [1.0, 1.0, 3.0, 12.0, 55.0, 273.0]);
    }
}
