//! Tree terms, the `D_n` functional, the equations-of-motion map `M`, the
//! contractive map `M*`, the residual of the equations of motion and
//! splitting-factor extraction.

use crate::combinatorics::{check_odd_index, PartitionTable};
use crate::envelopes::{
    delta_max_at, delta_min_at, parity_sign, slot, splitting_scale, Coupling, EnvelopeSet,
    GreenSequence, SplittingSequence, D0,
};
use crate::error::{Error, Result};
use crate::ext::{ExtScalar, SignedAccumulator};
use crate::solver::ClosurePolicy;
use serde::{Deserialize, Serialize};
use std::sync::{Arc, OnceLock, RwLock};

fn partition_table(n: usize) -> Result<Arc<PartitionTable>> {
    static CACHE: OnceLock<RwLock<Option<Arc<PartitionTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| RwLock::new(None));
    if let Some(t) = cache.read().expect("partition cache poisoned").as_ref() {
        if t.n_max() >= n {
            return Ok(Arc::clone(t));
        }
    }
    let mut guard = cache.write().expect("partition cache poisoned");
    if let Some(t) = guard.as_ref() {
        if t.n_max() >= n {
            return Ok(Arc::clone(t));
        }
    }
    let target = (n.max(101) | 1).max(guard.as_ref().map_or(0, |t| 2 * t.n_max() + 1));
    let table = Arc::new(PartitionTable::new(target)?);
    *guard = Some(Arc::clone(&table));
    Ok(table)
}

/// `C^{n+1} = -6 Lambda sum n!/(i1! i2! i3! sigma) H^{i1+1} H^{i2+1} H^{i3+1}` on
/// values indexed by `(n - 1) / 2`, which must reach order `n - 2`.
pub fn c_term(lambda: Coupling, values: &[ExtScalar], n: usize) -> Result<ExtScalar> {
    check_odd_index(n, 3)?;
    if slot(n - 2) >= values.len() {
        return Err(Error::Truncation { n });
    }
    let table = partition_table(n)?;
    let acc: SignedAccumulator = table
        .triples(n)
        .iter()
        .map(|(t, lw)| {
            values[slot(t.i1)] * values[slot(t.i2)] * values[slot(t.i3)] * ExtScalar::from_ln(*lw)
        })
        .collect();
    Ok(acc.total() * ExtScalar::from_f64(-6.0 * lambda.value()))
}

/// `B^{n+1} = -3 Lambda sum n!/(j1! j2!) H^{j2+2} H^{j1+1}` on values indexed by
/// `(n - 1) / 2`, which must reach order `n`.
pub fn b_term(lambda: Coupling, values: &[ExtScalar], n: usize) -> Result<ExtScalar> {
    check_odd_index(n, 3)?;
    if slot(n) >= values.len() {
        return Err(Error::Truncation { n });
    }
    let table = partition_table(n)?;
    let acc: SignedAccumulator = table
        .pairs(n)
        .iter()
        .map(|(p, lw)| values[slot(p.j2 + 1)] * values[slot(p.j1)] * ExtScalar::from_ln(*lw))
        .collect();
    Ok(acc.total() * ExtScalar::from_f64(-3.0 * lambda.value()))
}

/// `H^{N+3}` supplied by the closure policy of `h`.
pub fn closure_value(h: &GreenSequence) -> Result<ExtScalar> {
    let top = h.n_max() + 2;
    let l = h.lambda().value();
    let delta = match h.closure() {
        ClosurePolicy::Strict => return Err(Error::Truncation { n: h.n_max() }),
        ClosurePolicy::ZeroTail => return Ok(ExtScalar::ZERO),
        ClosurePolicy::EnvelopeMax => delta_max_at(l, top, D0),
        ClosurePolicy::EnvelopeMin | ClosurePolicy::Bracket => delta_min_at(l, top),
    };
    let c = c_term(h.lambda(), h.values(), top)?;
    Ok(c * ExtScalar::from_f64(delta / splitting_scale(l, top)))
}

/// `A^{n+1} = -Lambda H^{n+3}`, using the closure policy when `n + 2 > N`.
pub fn a_term(h: &GreenSequence, n: usize) -> Result<ExtScalar> {
    check_odd_index(n, 1)?;
    if n > h.n_max() {
        return Err(Error::Domain(format!(
            "order n={n} exceeds truncation N={}",
            h.n_max()
        )));
    }
    let above = if n + 2 <= h.n_max() {
        h.get(n + 2)
    } else {
        closure_value(h)?
    };
    Ok(above * ExtScalar::from_f64(-h.lambda().value()))
}

/// The three tree terms of one order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeTerms {
    /// Odd order.
    pub n: usize,
    /// Upward coupling `A^{n+1}`.
    pub a: ExtScalar,
    /// Two-part sum `B^{n+1}`.
    pub b: ExtScalar,
    /// Three-part sum `C^{n+1}`.
    pub c: ExtScalar,
}

impl TreeTerms {
    /// `A + B + C`.
    pub fn total(&self) -> ExtScalar {
        self.a + self.b + self.c
    }
}

/// Tree terms of order `3 <= n <= N`.
pub fn tree_terms(h: &GreenSequence, n: usize) -> Result<TreeTerms> {
    check_odd_index(n, 3)?;
    if n > h.n_max() {
        return Err(Error::Domain(format!(
            "order n={n} exceeds truncation N={}",
            h.n_max()
        )));
    }
    Ok(TreeTerms {
        n,
        a: a_term(h, n)?,
        b: b_term(h.lambda(), h.values(), n)?,
        c: c_term(h.lambda(), h.values(), n)?,
    })
}

/// Value of the `D_n` functional at one order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DnValue {
    /// Odd order.
    pub n: usize,
    /// `D_n(H)`.
    pub value: f64,
}

impl DnValue {
    /// `D_n / (3 Lambda n (n-1))`.
    pub fn normalized(&self, lambda: Coupling) -> f64 {
        self.value / splitting_scale(lambda.value(), self.n)
    }
}

fn d_value(h: &GreenSequence, n: usize) -> Result<f64> {
    let l = h.lambda().value();
    if n == 3 {
        let h4 = h.get(3);
        if h4.is_zero() {
            return Err(Error::Degenerate { n });
        }
        let h6 = if h.n_max() >= 5 { h.get(5) } else { closure_value(h)? };
        return Ok(9.0 * l * h.get(1).to_f64() - l * h6.abs_ratio(h4));
    }
    let hn = h.get(n);
    if hn.is_zero() {
        return Err(Error::Degenerate { n });
    }
    let b = b_term(h.lambda(), h.values(), n)?;
    let a = a_term(h, n)?;
    Ok(b.abs_ratio(hn) - a.abs_ratio(hn))
}

/// `D_3 = 9 Lambda H^2 - Lambda |H^6| / |H^4|` and
/// `D_n = (|B^{n+1}| - |A^{n+1}|) / |H^{n+1}|` for `n >= 5`.
pub fn d_functional(h: &GreenSequence, n: usize) -> Result<DnValue> {
    check_odd_index(n, 3)?;
    if n > h.n_max() {
        return Err(Error::Domain(format!(
            "order n={n} exceeds truncation N={}",
            h.n_max()
        )));
    }
    let needed: &[usize] = if n == 3 { &[1, 3] } else { &[n] };
    for &m in needed {
        if h.get(m).sign() != parity_sign(m) {
            return Err(Error::Membership {
                n: m,
                predicate: "sign_ok".into(),
            });
        }
    }
    Ok(DnValue {
        n,
        value: d_value(h, n)?,
    })
}

/// Image of the equations-of-motion map: `H^2' = 1 - Lambda H^4` and
/// `H^{n+1}' = A + B + C` evaluated on `h`.
pub fn apply_map_original(h: &GreenSequence) -> Result<GreenSequence> {
    let l = h.lambda().value();
    let mut out = Vec::with_capacity(h.values().len());
    out.push(ExtScalar::ONE - ExtScalar::from_f64(l) * h.get(3));
    for n in (3..=h.n_max()).step_by(2) {
        out.push(tree_terms(h, n)?.total());
    }
    GreenSequence::new(h.lambda(), out, h.closure())
}

/// Image of the contractive map without the admissibility check.
///
/// The `D_n` values come from `h`; the tree term `C'` of each order is built
/// from the entries of the image that are already updated.
pub fn apply_map_star_raw(h: &GreenSequence) -> Result<GreenSequence> {
    let l = h.lambda().value();
    let ds = (3..=h.n_max())
        .step_by(2)
        .map(|n| d_value(h, n))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(h.values().len());
    let h2 = ExtScalar::ONE - ExtScalar::from_f64(l) * h.get(3);
    out.push(h2);
    let one_plus = |n: usize| -> Result<ExtScalar> {
        let v = 1.0 + ds[slot(n) - 1];
        if v == 0.0 || !v.is_finite() {
            Err(Error::Degenerate { n })
        } else {
            Ok(ExtScalar::from_f64(v))
        }
    };
    out.push(-(ExtScalar::from_f64(6.0 * l) * h2.powi(3)) / one_plus(3)?);
    for n in (5..=h.n_max()).step_by(2) {
        let c = c_term(h.lambda(), &out, n)?;
        out.push(c / one_plus(n)?);
    }
    GreenSequence::new(h.lambda(), out, h.closure())
}

/// Image of the contractive map, checked for admissibility against envelopes
/// built at the same coupling and truncation.
pub fn apply_map_star(h: &GreenSequence) -> Result<GreenSequence> {
    let image = apply_map_star_raw(h)?;
    let env = EnvelopeSet::build(h.lambda(), h.n_max())?;
    let report = crate::verify::check_membership(&image, &env)?;
    match report.first_violation {
        None => Ok(image),
        Some((n, predicate)) => Err(Error::Stability {
            iteration: 0,
            n,
            predicate: predicate.to_string(),
        }),
    }
}

/// Residual of the equations of motion at one order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    /// Odd order.
    pub n: usize,
    /// Normalized defect.
    pub value: f64,
    /// True when the closure value enters the defect at this order.
    pub contaminated: bool,
}

/// Per-order defect of the equations of motion.
///
/// Order 1 is normalized by `max(1, |H^2|)`, higher orders by `|H^{n+1}|`
/// (by 1 when `H^{n+1}` vanishes). Orders within two of `N` are flagged.
pub fn residual(h: &GreenSequence) -> Result<Vec<ResidualEntry>> {
    let l = h.lambda().value();
    let n_max = h.n_max();
    let h2 = h.get(1);
    let r1 = (h2 - ExtScalar::ONE + ExtScalar::from_f64(l) * h.get(3)).abs().to_f64()
        / h2.abs().to_f64().max(1.0);
    let mut out = vec![ResidualEntry {
        n: 1,
        value: r1,
        contaminated: n_max <= 3,
    }];
    for n in (3..=n_max).step_by(2) {
        let hn = h.get(n);
        let defect = (hn - tree_terms(h, n)?.total()).abs();
        let value = if hn.is_zero() {
            defect.to_f64()
        } else {
            defect.abs_ratio(hn)
        };
        out.push(ResidualEntry {
            n,
            value,
            contaminated: n + 2 >= n_max,
        });
    }
    Ok(out)
}

/// Largest residual over orders `n <= n_upto`.
pub fn residual_max(h: &GreenSequence, n_upto: usize) -> Result<f64> {
    Ok(residual(h)?
        .iter()
        .filter(|r| r.n <= n_upto)
        .map(|r| r.value)
        .fold(0.0, f64::max))
}

/// Splitting factor of one order without a positivity check.
pub fn extract_delta_at(h: &GreenSequence, n: usize) -> Result<f64> {
    let l = h.lambda().value();
    let h2 = h.get(1);
    match n {
        1 => Ok((h2.to_f64() - 1.0) / l),
        3 => {
            if h2.is_zero() {
                return Err(Error::Degenerate { n: 1 });
            }
            Ok((-(h.get(3) / h2.powi(3))).to_f64())
        }
        _ => {
            let c = c_term(h.lambda(), h.values(), n)?;
            if c.is_zero() {
                return Err(Error::Degenerate { n });
            }
            Ok((h.get(n) / c).to_f64() * splitting_scale(l, n))
        }
    }
}

/// Splitting factors of `h`: `delta_1 = (H^2 - 1)/Lambda`, `delta_3 = -H^4/(H^2)^3`,
/// `delta_n = 3 Lambda n (n-1) H^{n+1} / C^{n+1}`.
pub fn extract_delta(h: &GreenSequence) -> Result<SplittingSequence> {
    let values = (1..=h.n_max())
        .step_by(2)
        .map(|n| extract_delta_at(h, n))
        .collect::<Result<Vec<_>>>()?;
    SplittingSequence::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelopes::EnvelopeSet;
    use crate::solver::{solve, SolveOptions};
    use approx::assert_relative_eq;

    fn lam(l: f64) -> Coupling {
        Coupling::new(l).unwrap()
    }

    #[test]
    fn tree_terms_of_the_free_sequence() {
        let h = GreenSequence::free(lam(0.05), 11, ClosurePolicy::ZeroTail).unwrap();
        let t3 = tree_terms(&h, 3).unwrap();
        assert!(t3.a.is_zero());
        assert!(t3.b.is_zero());
        assert_relative_eq!(t3.c.to_f64(), -0.3, max_relative = 1e-14);
        let t5 = tree_terms(&h, 5).unwrap();
        assert!(t5.total().is_zero());
    }

    #[test]
    fn residual_of_the_free_sequence() {
        let h = GreenSequence::free(lam(0.05), 11, ClosurePolicy::ZeroTail).unwrap();
        let r = residual(&h).unwrap();
        assert_eq!(r[0].value, 0.0);
        assert_eq!(r[1].n, 3);
        assert_relative_eq!(r[1].value, 0.3, max_relative = 1e-14);
        assert!(r.iter().skip(2).all(|e| e.value == 0.0));
        assert!(r.last().unwrap().contaminated);
    }

    #[test]
    fn original_map_of_the_free_sequence() {
        let h = GreenSequence::free(lam(0.01), 11, ClosurePolicy::ZeroTail).unwrap();
        let m = apply_map_original(&h).unwrap();
        assert_relative_eq!(m.get(1).to_f64(), 1.0);
        assert_relative_eq!(m.get(3).to_f64(), -0.06, max_relative = 1e-14);
        assert!(m.get(5).is_zero());
    }

    #[test]
    fn splitting_round_trip() {
        let env = EnvelopeSet::build(lam(0.02), 21).unwrap();
        let back = extract_delta(&env.h0).unwrap();
        for (n, d) in env.delta0.iter().skip(1) {
            assert_relative_eq!(back.get(n), d, max_relative = 1e-12);
        }
        assert_relative_eq!(back.get(1), (env.h0.get(1).to_f64() - 1.0) / 0.02, max_relative = 1e-12);
    }

    #[test]
    fn d_functional_rejects_wrong_signs() {
        let env = EnvelopeSet::build(lam(0.02), 21).unwrap();
        assert!(d_functional(&env.h0, 7).is_ok());
        let mut bad = env.h0.clone();
        bad.set(7, -bad.get(7));
        assert!(matches!(d_functional(&bad, 7), Err(Error::Membership { n: 7, .. })));
    }

    #[test]
    fn maps_share_the_fixed_point() {
        let opts = SolveOptions {
            closure: ClosurePolicy::EnvelopeMin,
            ..SolveOptions::default()
        };
        let (h, report) = solve(lam(0.01), &opts).unwrap();
        assert!(report.converged);
        let star = apply_map_star_raw(&h).unwrap();
        let orig = apply_map_original(&h).unwrap();
        for n in (1..=report.window).step_by(2) {
            assert!((star.get(n) - h.get(n)).abs_ratio(h.get(n)) < 1e-9, "M* at n={n}");
            assert!((orig.get(n) - h.get(n)).abs_ratio(h.get(n)) < 1e-9, "M at n={n}");
        }
        assert!(residual_max(&h, report.window).unwrap() < 1e-9);
    }
}
