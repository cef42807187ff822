//! Coupling, splitting and Green sequences, the splitting envelopes, the
//! extremal sequences, the fundamental sequence and the sweeping factors.

use crate::combinatorics::check_odd_index;
use crate::dynamics::{a_term, b_term, c_term};
use crate::error::{Error, Result};
use crate::ext::{ln_factorial, ExtScalar};
use crate::solver::ClosurePolicy;
use serde::{Deserialize, Serialize};

/// Default envelope constant `d0`.
pub const D0: f64 = 0.01;
/// Default ceiling `K0` of the growth bound `|H^{n+1}| <= n! K0^n`.
pub const K0: f64 = 200.0;
/// Largest coupling for which the image of the contractive map stays admissible.
pub const STABILITY_LAMBDA_MAX: f64 = 0.05;
/// Largest coupling for which contractivity is certified.
pub const CERTIFIED_LAMBDA_MAX: f64 = 0.045;

/// Positive dimensionless coupling constant.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Coupling(f64);

impl Coupling {
    /// Validates `lambda > 0` and finite.
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda.is_finite() && lambda > 0.0 {
            Ok(Coupling(lambda))
        } else {
            Err(Error::Domain(format!("lambda must be positive, got {lambda}")))
        }
    }

    /// Raw value.
    pub fn value(self) -> f64 {
        self.0
    }

    /// True inside the range where the contractive map preserves admissibility.
    pub fn is_stable_range(self) -> bool {
        self.0 <= STABILITY_LAMBDA_MAX
    }

    /// True inside the range where contractivity is certified.
    pub fn is_certified(self) -> bool {
        self.0 <= CERTIFIED_LAMBDA_MAX
    }
}

/// Position of odd order `n` in index-compressed storage.
pub fn slot(n: usize) -> usize {
    (n - 1) / 2
}

/// Sign `(-1)^((n-1)/2)` of an admissible Green's function of order `n`.
pub fn parity_sign(n: usize) -> i8 {
    if slot(n).is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// `3 Lambda n (n-1)`.
pub fn splitting_scale(lambda: f64, n: usize) -> f64 {
    3.0 * lambda * (n * (n - 1)) as f64
}

/// Splitting factors `delta_n` for odd `n <= N`, with `delta_1 = (H^2 - 1) / Lambda`
/// stored at order 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplittingSequence {
    values: Vec<f64>,
}

impl SplittingSequence {
    /// Builds from values indexed by `(n - 1) / 2`; every entry from order 3 up must be positive.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Domain("a splitting sequence needs orders 1 and 3".into()));
        }
        if let Some(k) = values.iter().skip(1).position(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::Domain(format!(
                "splitting factor at n={} must be positive",
                2 * (k + 1) + 1
            )));
        }
        Ok(SplittingSequence { values })
    }

    /// Truncation order.
    pub fn n_max(&self) -> usize {
        2 * self.values.len() - 1
    }

    /// Factor of order `n`.
    pub fn get(&self, n: usize) -> f64 {
        self.values[slot(n)]
    }

    /// Values indexed by `(n - 1) / 2`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterator over `(n, delta_n)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().map(|(k, &d)| (2 * k + 1, d))
    }

    /// True when every factor from order 3 up is at most `k0`.
    pub fn is_bounded(&self, k0: f64) -> bool {
        self.values.iter().skip(1).all(|&d| d <= k0)
    }
}

/// Truncated sequence of Green's functions `H^{n+1}` for odd `n <= N`.
#[derive(Clone, Debug, PartialEq)]
pub struct GreenSequence {
    lambda: Coupling,
    values: Vec<ExtScalar>,
    closure: ClosurePolicy,
}

impl GreenSequence {
    /// Builds from values indexed by `(n - 1) / 2`; `values.len()` fixes `N = 2 len - 1`.
    pub fn new(lambda: Coupling, values: Vec<ExtScalar>, closure: ClosurePolicy) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Domain("a Green sequence needs orders 1 and 3".into()));
        }
        Ok(GreenSequence {
            lambda,
            values,
            closure,
        })
    }

    /// Free sequence `H^2 = 1`, all higher orders zero.
    pub fn free(lambda: Coupling, n_max: usize, closure: ClosurePolicy) -> Result<Self> {
        check_odd_index(n_max, 3)?;
        let mut values = vec![ExtScalar::ZERO; slot(n_max) + 1];
        values[0] = ExtScalar::ONE;
        Self::new(lambda, values, closure)
    }

    /// Builds the sequence defined by a splitting sequence: `H^2 = 1 + Lambda delta_1`,
    /// `H^4 = -delta_3 (H^2)^3` and `H^{n+1} = delta_n C^{n+1} / (3 Lambda n (n-1))`.
    pub fn from_splitting(
        lambda: Coupling,
        deltas: &SplittingSequence,
        closure: ClosurePolicy,
    ) -> Result<Self> {
        let l = lambda.value();
        let n_max = deltas.n_max();
        let mut values = Vec::with_capacity(slot(n_max) + 1);
        let h2 = ExtScalar::from_f64(1.0 + l * deltas.get(1));
        values.push(h2);
        values.push(-(ExtScalar::from_f64(deltas.get(3)) * h2.powi(3)));
        for n in (5..=n_max).step_by(2) {
            let c = c_term(lambda, &values, n)?;
            values.push(c * ExtScalar::from_f64(deltas.get(n) / splitting_scale(l, n)));
        }
        Self::new(lambda, values, closure)
    }

    /// Coupling.
    pub fn lambda(&self) -> Coupling {
        self.lambda
    }

    /// Truncation order `N`.
    pub fn n_max(&self) -> usize {
        2 * self.values.len() - 1
    }

    /// Closure policy tag.
    pub fn closure(&self) -> ClosurePolicy {
        self.closure
    }

    /// Copy with a different closure policy.
    pub fn with_closure(&self, closure: ClosurePolicy) -> Self {
        GreenSequence {
            closure,
            ..self.clone()
        }
    }

    /// `H^{n+1}`.
    pub fn get(&self, n: usize) -> ExtScalar {
        self.values[slot(n)]
    }

    /// Replaces `H^{n+1}`.
    pub fn set(&mut self, n: usize, v: ExtScalar) {
        self.values[slot(n)] = v;
    }

    /// Values indexed by `(n - 1) / 2`.
    pub fn values(&self) -> &[ExtScalar] {
        &self.values
    }

    /// Iterator over `(n, H^{n+1})`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, ExtScalar)> + '_ {
        self.values.iter().enumerate().map(|(k, &v)| (2 * k + 1, v))
    }

    /// Sequence cut at order `n_max`.
    pub fn truncated(&self, n_max: usize) -> Result<Self> {
        check_odd_index(n_max, 3)?;
        if n_max > self.n_max() {
            return Err(Error::Domain(format!(
                "cannot truncate N={} to larger order {n_max}",
                self.n_max()
            )));
        }
        Self::new(self.lambda, self.values[..=slot(n_max)].to_vec(), self.closure)
    }

    /// Checks equal coupling and truncation.
    pub fn ensure_compatible(&self, other: &GreenSequence) -> Result<()> {
        if self.lambda != other.lambda {
            return Err(Error::Consistency(format!(
                "coupling mismatch: {} vs {}",
                self.lambda.value(),
                other.lambda.value()
            )));
        }
        if self.n_max() != other.n_max() {
            return Err(Error::Consistency(format!(
                "truncation mismatch: N={} vs N={}",
                self.n_max(),
                other.n_max()
            )));
        }
        Ok(())
    }

    /// True when `|H^{n+1}| <= n! k0^n` at every stored order.
    pub fn within_growth_bound(&self, k0: f64) -> bool {
        self.iter()
            .all(|(n, v)| v.logmag() <= growth_bound_ln(n, k0) + 1e-12)
    }
}

/// `ln(n! k0^n)`.
pub fn growth_bound_ln(n: usize, k0: f64) -> f64 {
    ln_factorial(n) + n as f64 * k0.ln()
}

/// `delta_{n,max}`: `6 Lambda` at `n = 3`, `x / (1 + x d0)` with `x = 3 Lambda n (n-1)` above.
pub fn delta_max_at(lambda: f64, n: usize, d0: f64) -> f64 {
    if n == 3 {
        6.0 * lambda
    } else {
        let x = splitting_scale(lambda, n);
        x / (1.0 + x * d0)
    }
}

/// `delta_{n,min}`: `6 Lambda / (1 + 9 Lambda)` at `n = 3`, `x / (1 + x)` above.
pub fn delta_min_at(lambda: f64, n: usize) -> f64 {
    if n == 3 {
        6.0 * lambda / (1.0 + 9.0 * lambda)
    } else {
        let x = splitting_scale(lambda, n);
        x / (1.0 + x)
    }
}

/// `H^2_max = (1 + 6 Lambda^2)^2`.
pub fn h2_max(lambda: f64) -> f64 {
    (1.0 + 6.0 * lambda * lambda).powi(2)
}

/// Upper and lower splitting envelopes for odd `n <= N`.
///
/// Order 1 carries `delta_1` of the extremal seeds `H^2_max` and `H^2_min = 1`.
pub fn delta_envelopes(
    lambda: Coupling,
    n_max: usize,
    d0: f64,
) -> Result<(SplittingSequence, SplittingSequence)> {
    check_odd_index(n_max, 3)?;
    let l = lambda.value();
    let mut dmax = vec![(h2_max(l) - 1.0) / l];
    let mut dmin = vec![0.0];
    for n in (3..=n_max).step_by(2) {
        dmax.push(delta_max_at(l, n, d0));
        dmin.push(delta_min_at(l, n));
    }
    Ok((SplittingSequence::new(dmax)?, SplittingSequence::new(dmin)?))
}

/// Extremal sequences `(H_max, H_min)` built upward from the envelope factors.
pub fn build_extremal(lambda: Coupling, n_max: usize, d0: f64) -> Result<(GreenSequence, GreenSequence)> {
    check_odd_index(n_max, 5)?;
    let (dmax, dmin) = delta_envelopes(lambda, n_max, d0)?;
    Ok((
        GreenSequence::from_splitting(lambda, &dmax, ClosurePolicy::EnvelopeMax)?,
        GreenSequence::from_splitting(lambda, &dmin, ClosurePolicy::EnvelopeMin)?,
    ))
}

/// Envelope factors, extremal sequences and fundamental sequence at one coupling.
#[derive(Clone, Debug)]
pub struct EnvelopeSet {
    /// Coupling.
    pub lambda: Coupling,
    /// Upper splitting envelope.
    pub delta_max: SplittingSequence,
    /// Lower splitting envelope.
    pub delta_min: SplittingSequence,
    /// Splitting factors of the fundamental sequence.
    pub delta0: SplittingSequence,
    /// Upper extremal sequence.
    pub h_max: GreenSequence,
    /// Lower extremal sequence.
    pub h_min: GreenSequence,
    /// Fundamental sequence.
    pub h0: GreenSequence,
    /// Envelope constant.
    pub d0: f64,
}

impl EnvelopeSet {
    /// Builds every envelope object at truncation `N` with the default `d0`.
    pub fn build(lambda: Coupling, n_max: usize) -> Result<Self> {
        Self::build_with_d0(lambda, n_max, D0)
    }

    /// Builds every envelope object at truncation `N`.
    pub fn build_with_d0(lambda: Coupling, n_max: usize, d0: f64) -> Result<Self> {
        check_odd_index(n_max, 5)?;
        let (delta_max, delta_min) = delta_envelopes(lambda, n_max, d0)?;
        let (h_max_ext, h_min_ext) = build_extremal(lambda, n_max + 2, d0)?;
        let (h0, delta0) = fundamental_from_extremal(lambda, &h_max_ext, &h_min_ext, n_max, d0)?;
        Ok(EnvelopeSet {
            lambda,
            delta_max,
            delta_min,
            delta0,
            h_max: h_max_ext.truncated(n_max)?,
            h_min: h_min_ext.truncated(n_max)?,
            h0,
            d0,
        })
    }

    /// Truncation order `N`.
    pub fn n_max(&self) -> usize {
        self.h_max.n_max()
    }
}

/// Fundamental sequence `H_0` for the coupling and truncation of `env`.
pub fn build_fundamental(lambda: Coupling, env: &EnvelopeSet) -> Result<GreenSequence> {
    if lambda != env.lambda {
        return Err(Error::Consistency(format!(
            "envelopes built at lambda={} used at lambda={}",
            env.lambda.value(),
            lambda.value()
        )));
    }
    let (h_max, h_min) = build_extremal(lambda, env.n_max() + 2, env.d0)?;
    Ok(fundamental_from_extremal(lambda, &h_max, &h_min, env.n_max(), env.d0)?.0)
}

/// `D_{n,min} = |B_min| / |H_min| - |A_max| / |H_max|` on extremal sequences
/// holding at least order `n + 2`.
pub fn d_min_functional(h_max: &GreenSequence, h_min: &GreenSequence, n: usize) -> Result<f64> {
    let hmin = h_min.get(n);
    let hmax = h_max.get(n);
    if hmin.is_zero() || hmax.is_zero() {
        return Err(Error::Degenerate { n });
    }
    let b = b_term(h_min.lambda(), h_min.values(), n)?;
    let a = a_term(h_max, n)?;
    Ok(b.abs_ratio(hmin) - a.abs_ratio(hmax))
}

fn fundamental_from_extremal(
    lambda: Coupling,
    h_max: &GreenSequence,
    h_min: &GreenSequence,
    n_max: usize,
    d0: f64,
) -> Result<(GreenSequence, SplittingSequence)> {
    let l = lambda.value();
    let h2 = 1.0 - l * h_min.get(3).to_f64();
    let d3 = 6.0 * l
        / (1.0 + 9.0 * l * h_min.get(1).to_f64() - l * h_min.get(5).abs_ratio(h_max.get(3)));
    check_band(3, d3, delta_min_at(l, 3), delta_max_at(l, 3, d0))?;
    let h2e = ExtScalar::from_f64(h2);
    let mut values = vec![h2e, -(ExtScalar::from_f64(d3) * h2e.powi(3))];
    let mut deltas = vec![(h2 - 1.0) / l, d3];
    for n in (5..=n_max).step_by(2) {
        let dn = splitting_scale(l, n) / (1.0 + d_min_functional(h_max, h_min, n)?);
        check_band(n, dn, delta_min_at(l, n), delta_max_at(l, n, d0))?;
        let c = c_term(lambda, &values, n)?;
        values.push(c * ExtScalar::from_f64(dn / splitting_scale(l, n)));
        deltas.push(dn);
    }
    Ok((
        GreenSequence::new(lambda, values, ClosurePolicy::EnvelopeMin)?,
        SplittingSequence::new(deltas)?,
    ))
}

fn check_band(n: usize, d: f64, lo: f64, hi: f64) -> Result<()> {
    if d.is_finite() && lo <= d && d <= hi {
        Ok(())
    } else {
        Err(Error::Membership {
            n,
            predicate: format!("delta_n0={d} outside [{lo}, {hi}]"),
        })
    }
}

/// Sweeping factors `Y_n` for odd `3 <= n <= N`, indexed by `(n - 3) / 2`.
pub fn sweeping_factors(h: &GreenSequence) -> Result<Vec<f64>> {
    let l = h.lambda().value();
    let h2sq = h.get(1).powi(2);
    let mut ys = vec![1.0 / 6.0];
    if h.n_max() >= 5 {
        ys.push(1.0 / 20.0);
    }
    for n in (7..=h.n_max()).step_by(2) {
        let below = h.get(n - 2);
        if below.is_zero() || h2sq.is_zero() {
            return Err(Error::Degenerate { n });
        }
        let c = c_term(h.lambda(), h.values(), n)?;
        let denom = below * h2sq * ExtScalar::from_f64(splitting_scale(l, n) * (n * (n - 1)) as f64);
        ys.push((-(c / denom)).to_f64());
    }
    Ok(ys)
}

/// `n! (-1)^((n-1)/2) (H^2)^n prod_{m=3..n} Y_m delta_m`, the complete-splitting
/// form of `H^{n+1}` from its factors.
pub fn complete_splitting_value(h2: ExtScalar, deltas: &SplittingSequence, ys: &[f64], n: usize) -> ExtScalar {
    let mut v = ExtScalar::from_parts(parity_sign(n), ln_factorial(n)) * h2.powi(n as i32);
    for m in (3..=n).step_by(2) {
        v = v * ExtScalar::from_f64(ys[(m - 3) / 2] * deltas.get(m));
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lam(l: f64) -> Coupling {
        Coupling::new(l).unwrap()
    }

    #[test]
    fn coupling_validation() {
        assert!(Coupling::new(0.0).is_err());
        assert!(Coupling::new(-1.0).is_err());
        assert!(Coupling::new(f64::NAN).is_err());
        assert!(lam(0.045).is_certified());
        assert!(!lam(0.05).is_certified());
        assert!(lam(0.05).is_stable_range());
    }

    #[test]
    fn envelope_values_at_lambda_005() {
        let (dmax, dmin) = delta_envelopes(lam(0.05), 41, D0).unwrap();
        assert_relative_eq!(dmax.get(3), 0.3, max_relative = 1e-14);
        assert_relative_eq!(dmin.get(3), 0.3 / 1.45, max_relative = 1e-14);
        assert_relative_eq!(dmax.get(5), 3.0 / 1.03, max_relative = 1e-14);
        assert_relative_eq!(dmin.get(5), 0.75, max_relative = 1e-14);
        for n in (3..=41).step_by(2) {
            assert!(dmin.get(n) < dmax.get(n));
            assert!(dmax.get(n) < 1.0 / D0);
        }
        assert!(delta_max_at(0.05, 100_001, D0) > 99.99);
        assert!((delta_min_at(0.05, 100_001) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn extremal_seeds_and_first_recursion() {
        let (hmax, hmin) = build_extremal(lam(0.05), 11, D0).unwrap();
        assert_relative_eq!(hmax.get(1).to_f64(), 1.030225, max_relative = 1e-14);
        assert_relative_eq!(hmax.get(3).to_f64(), -0.3 * 1.015f64.powi(6), max_relative = 1e-14);
        assert_relative_eq!(hmin.get(1).to_f64(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(hmin.get(3).to_f64(), -0.3 / 1.45, max_relative = 1e-14);
        let c6 = -0.3 * 10.0 * (-0.3 / 1.45);
        assert_relative_eq!(c6, 0.6206896551724138, max_relative = 1e-14);
        assert_relative_eq!(hmin.get(5).to_f64(), 0.75 * c6 / 3.0, max_relative = 1e-13);
        for (n, v) in hmax.iter().chain(hmin.iter()) {
            assert_eq!(v.sign(), parity_sign(n), "n={n}");
        }
    }

    #[test]
    fn fundamental_sequence_seed_and_bands() {
        let env = EnvelopeSet::build(lam(0.05), 41).unwrap();
        assert_relative_eq!(env.h0.get(1).to_f64(), 1.0 + 0.05 * 0.3 / 1.45, max_relative = 1e-14);
        for n in (3..=41).step_by(2) {
            assert!(env.delta_min.get(n) <= env.delta0.get(n));
            assert!(env.delta0.get(n) <= env.delta_max.get(n));
            let (lo, mid, hi) = (env.h_min.get(n), env.h0.get(n), env.h_max.get(n));
            assert!(lo.logmag() <= mid.logmag() && mid.logmag() <= hi.logmag(), "n={n}");
        }
        let again = build_fundamental(lam(0.05), &env).unwrap();
        assert_eq!(again, env.h0);
        assert!(build_fundamental(lam(0.04), &env).is_err());
    }

    #[test]
    fn sweeping_factor_identity() {
        let env = EnvelopeSet::build(lam(0.05), 21).unwrap();
        let h = &env.h_min;
        let ys = sweeping_factors(h).unwrap();
        assert_eq!(ys[0], 1.0 / 6.0);
        assert_eq!(ys[1], 1.0 / 20.0);
        for (k, &y) in ys.iter().enumerate() {
            assert!(y > 0.0, "n={}", 2 * k + 3);
        }
        let d7 = env.delta_min.get(7);
        let rebuilt = ExtScalar::from_f64(-42.0 * d7 * ys[2]) * h.get(5) * h.get(1).powi(2);
        assert_relative_eq!(rebuilt.logmag(), h.get(7).logmag(), max_relative = 1e-10);
        assert_eq!(rebuilt.sign(), h.get(7).sign());
    }
}
