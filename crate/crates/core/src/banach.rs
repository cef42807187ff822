//! Weighted sup-norm on Green sequences, distances, the radius `rho` and
//! membership in the ball around the fundamental sequence.

use crate::combinatorics::check_odd_index;
use crate::envelopes::{delta_max_at, delta_min_at, h2_max, slot, Coupling, EnvelopeSet, GreenSequence, D0};
use crate::error::{Error, Result};
use crate::ext::ExtScalar;

/// Weights `M_n` of the norm for odd `n <= N`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormWeights {
    lambda: Coupling,
    m: Vec<ExtScalar>,
}

impl NormWeights {
    /// Coupling.
    pub fn lambda(&self) -> Coupling {
        self.lambda
    }

    /// Truncation order.
    pub fn n_max(&self) -> usize {
        2 * self.m.len() - 1
    }

    /// `M_n`.
    pub fn get(&self, n: usize) -> ExtScalar {
        self.m[slot(n)]
    }
}

/// `M_1 = (1 + 6 Lambda^2)^2`, `M_3 = delta_{3,max} M_1^3` and
/// `M_n = n (n-1) delta_{n,max} M_{n-2} M_1^2`.
pub fn norm_weights(lambda: Coupling, n_max: usize) -> Result<NormWeights> {
    norm_weights_with_d0(lambda, n_max, D0)
}

/// Norm weights for a custom envelope constant.
pub fn norm_weights_with_d0(lambda: Coupling, n_max: usize, d0: f64) -> Result<NormWeights> {
    check_odd_index(n_max, 3)?;
    let l = lambda.value();
    let m1 = ExtScalar::from_f64(h2_max(l));
    let mut m = vec![m1, ExtScalar::from_f64(delta_max_at(l, 3, d0)) * m1.powi(3)];
    for n in (5..=n_max).step_by(2) {
        let prev = m[slot(n - 2)];
        m.push(prev * m1.powi(2) * ExtScalar::from_f64((n * (n - 1)) as f64 * delta_max_at(l, n, d0)));
    }
    Ok(NormWeights { lambda, m })
}

fn ensure_weights(h: &GreenSequence, w: &NormWeights) -> Result<()> {
    if h.lambda() != w.lambda {
        return Err(Error::Consistency(format!(
            "weights at lambda={} applied to lambda={}",
            w.lambda.value(),
            h.lambda().value()
        )));
    }
    if h.n_max() > w.n_max() {
        return Err(Error::Consistency(format!(
            "weights up to N={} applied to N={}",
            w.n_max(),
            h.n_max()
        )));
    }
    Ok(())
}

/// `sup_n |H^{n+1}| / M_n` over orders `n <= n_upto`.
pub fn norm_upto(h: &GreenSequence, w: &NormWeights, n_upto: usize) -> Result<f64> {
    ensure_weights(h, w)?;
    Ok(h.iter()
        .filter(|(n, _)| *n <= n_upto)
        .map(|(n, v)| v.abs_ratio(w.get(n)))
        .fold(0.0, f64::max))
}

/// `sup_n |H^{n+1}| / M_n` over every stored order.
pub fn norm(h: &GreenSequence, w: &NormWeights) -> Result<f64> {
    norm_upto(h, w, h.n_max())
}

/// Weighted distance restricted to orders `n <= n_upto`.
pub fn distance_upto(h1: &GreenSequence, h2: &GreenSequence, w: &NormWeights, n_upto: usize) -> Result<f64> {
    h1.ensure_compatible(h2)?;
    ensure_weights(h1, w)?;
    Ok(h1
        .iter()
        .zip(h2.values())
        .filter(|((n, _), _)| *n <= n_upto)
        .map(|((n, a), &b)| (a - b).abs_ratio(w.get(n)))
        .fold(0.0, f64::max))
}

/// Weighted distance `N(h1 - h2)`.
pub fn distance(h1: &GreenSequence, h2: &GreenSequence, w: &NormWeights) -> Result<f64> {
    distance_upto(h1, h2, w, h1.n_max())
}

/// `rho = 1 - d0`.
pub fn rho(d0: f64) -> f64 {
    1.0 - d0
}

/// `sup_{n <= n_max} (delta_{n,max} - delta_{n,min}) / delta_{n,max}`.
pub fn rho_estimate(lambda: Coupling, n_max: usize, d0: f64) -> Result<f64> {
    check_odd_index(n_max, 3)?;
    let l = lambda.value();
    Ok((3..=n_max)
        .step_by(2)
        .map(|n| 1.0 - delta_min_at(l, n) / delta_max_at(l, n, d0))
        .fold(0.0, f64::max))
}

/// Closed ball of radius `rho` around a center sequence.
#[derive(Clone, Debug)]
pub struct BallSpec {
    /// Center of the ball.
    pub center: GreenSequence,
    /// Radius.
    pub rho: f64,
}

impl BallSpec {
    /// Ball of radius `1 - d0` around `center`.
    pub fn new(center: GreenSequence) -> Self {
        BallSpec {
            center,
            rho: rho(D0),
        }
    }
}

/// True when `h` is admissible and within `rho` of the center.
pub fn in_ball(h: &GreenSequence, ball: &BallSpec, w: &NormWeights) -> Result<bool> {
    let env = EnvelopeSet::build(h.lambda(), h.n_max())?;
    in_ball_with(h, ball, w, &env)
}

/// [`in_ball`] with prebuilt envelopes.
pub fn in_ball_with(h: &GreenSequence, ball: &BallSpec, w: &NormWeights, env: &EnvelopeSet) -> Result<bool> {
    let member = crate::verify::check_membership(h, env)?.verdict;
    Ok(member && distance(h, &ball.center, w)? <= ball.rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::ClosurePolicy;
    use approx::assert_relative_eq;

    fn lam(l: f64) -> Coupling {
        Coupling::new(l).unwrap()
    }

    #[test]
    fn weights_at_lambda_005() {
        let w = norm_weights(lam(0.05), 41).unwrap();
        assert_relative_eq!(w.get(1).to_f64(), 1.030225, max_relative = 1e-14);
        assert_relative_eq!(w.get(3).to_f64(), 0.3 * 1.030225f64.powi(3), max_relative = 1e-13);
        for n in (5..=41).step_by(2) {
            let ratio = (w.get(n) / w.get(n - 2)).to_f64();
            let expected = (n * (n - 1)) as f64 * delta_max_at(0.05, n, D0) * 1.030225f64.powi(2);
            assert_relative_eq!(ratio, expected, max_relative = 1e-12);
        }
        let small = norm_weights(lam(1e-7), 5).unwrap();
        assert_relative_eq!(small.get(1).to_f64(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(small.get(3).to_f64() / 1e-7, 6.0, max_relative = 1e-10);
    }

    #[test]
    fn envelope_norms_and_ball() {
        let l = lam(0.05);
        let env = EnvelopeSet::build(l, 41).unwrap();
        let w = norm_weights(l, 41).unwrap();
        assert!(norm(&env.h_max, &w).unwrap() <= 1.0 + 1e-12);
        let d = distance(&env.h_max, &env.h_min, &w).unwrap();
        assert!(d > 0.0 && d <= rho(D0));
        assert_eq!(distance(&env.h0, &env.h0, &w).unwrap(), 0.0);
        let ball = BallSpec::new(env.h0.clone());
        assert!(in_ball_with(&env.h0, &ball, &w, &env).unwrap());
        let zero = GreenSequence::new(l, vec![ExtScalar::ZERO; 21], ClosurePolicy::ZeroTail).unwrap();
        assert_eq!(norm(&zero, &w).unwrap(), 0.0);
    }

    #[test]
    fn rho_gap_closed_form() {
        let l = 0.05;
        for n_max in [11usize, 101, 2001] {
            let r = rho_estimate(lam(l), n_max, D0).unwrap();
            let x = 3.0 * l * (n_max * (n_max - 1)) as f64;
            assert_relative_eq!(rho(D0) - r, rho(D0) / (1.0 + x), max_relative = 1e-6);
        }
        assert!(rho_estimate(lam(l), 2001, D0).unwrap() < rho(D0));
    }
}
