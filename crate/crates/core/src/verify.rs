//! Certification checks: admissibility of sequences, small-coupling limits,
//! monotonicity of envelope ratios, the proof functions `f_L` and `f_B`, the
//! contraction constants and the tree-term bounds.

use crate::combinatorics::{exact_triple_count, limit_constants, TriplePartition};
use crate::dynamics::{a_term, b_term, c_term, extract_delta_at};
use crate::envelopes::{
    d_min_functional, delta_min_at, growth_bound_ln, h2_max, parity_sign,
    splitting_scale, Coupling, EnvelopeSet, GreenSequence, K0, STABILITY_LAMBDA_MAX,
    CERTIFIED_LAMBDA_MAX,
};
use crate::error::{Error, Result};
use crate::ext::{ln_factorial, ExtScalar};
use crate::solver::{solve, ClosurePolicy, SolveOptions};
use serde::{Deserialize, Serialize};
use std::fmt;

const LOG_SLACK: f64 = 1e-12;

/// Admissibility predicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    /// `sign(H^{n+1}) = (-1)^((n-1)/2)`.
    SignOk,
    /// `|H_min| <= |H| <= |H_max|`.
    EnvelopeOk,
    /// `delta_{n,min} <= delta_n <= delta_{n,max}`.
    DeltaInBand,
    /// `|H^{n+1}| <= n! K0^n`.
    BoundOk,
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Predicate::SignOk => "sign_ok",
            Predicate::EnvelopeOk => "envelope_ok",
            Predicate::DeltaInBand => "delta_in_band",
            Predicate::BoundOk => "bound_ok",
        })
    }
}

/// Admissibility of one order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipRecord {
    /// Odd order.
    pub n: usize,
    /// Sign parity holds.
    pub sign_ok: bool,
    /// Envelope sandwich holds.
    pub envelope_ok: bool,
    /// Splitting factor lies in its band.
    pub delta_in_band: bool,
    /// Growth bound holds.
    pub bound_ok: bool,
}

impl MembershipRecord {
    /// First failed predicate in check order.
    pub fn first_failure(&self) -> Option<Predicate> {
        [
            (self.sign_ok, Predicate::SignOk),
            (self.envelope_ok, Predicate::EnvelopeOk),
            (self.delta_in_band, Predicate::DeltaInBand),
            (self.bound_ok, Predicate::BoundOk),
        ]
        .into_iter()
        .find(|(ok, _)| !ok)
        .map(|(_, p)| p)
    }
}

/// Per-order admissibility with an overall verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    /// One record per checked order.
    pub records: Vec<MembershipRecord>,
    /// True when every record passes.
    pub verdict: bool,
    /// Lowest failing order and its first failed predicate.
    pub first_violation: Option<(usize, Predicate)>,
}

/// Admissibility of every stored order of `h`.
pub fn check_membership(h: &GreenSequence, env: &EnvelopeSet) -> Result<MembershipReport> {
    check_membership_upto(h, env, h.n_max())
}

/// Admissibility of orders `n <= n_upto`.
pub fn check_membership_upto(h: &GreenSequence, env: &EnvelopeSet, n_upto: usize) -> Result<MembershipReport> {
    if h.lambda() != env.lambda || h.n_max() != env.n_max() {
        return Err(Error::Consistency(format!(
            "sequence (lambda={}, N={}) checked against envelopes (lambda={}, N={})",
            h.lambda().value(),
            h.n_max(),
            env.lambda.value(),
            env.n_max()
        )));
    }
    let mut records = Vec::new();
    for (n, v) in h.iter().filter(|(n, _)| *n <= n_upto) {
        let lo = env.h_min.get(n).logmag();
        let hi = env.h_max.get(n).logmag();
        let delta_in_band = n == 1
            || extract_delta_at(h, n).is_ok_and(|d| {
                d >= env.delta_min.get(n) * (1.0 - LOG_SLACK) && d <= env.delta_max.get(n) * (1.0 + LOG_SLACK)
            });
        records.push(MembershipRecord {
            n,
            sign_ok: v.sign() == parity_sign(n),
            envelope_ok: v.logmag() >= lo - LOG_SLACK && v.logmag() <= hi + LOG_SLACK,
            delta_in_band,
            bound_ok: v.logmag() <= growth_bound_ln(n, K0) + LOG_SLACK,
        });
    }
    let first_violation = records
        .iter()
        .find_map(|r| r.first_failure().map(|p| (r.n, p)));
    Ok(MembershipReport {
        verdict: first_violation.is_none(),
        records,
        first_violation,
    })
}

/// Observed against expected value of one small-coupling limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    /// Odd order.
    pub n: usize,
    /// Name of the compared quantity.
    pub quantity: String,
    /// Value at the fixed point.
    pub observed: f64,
    /// Limit value.
    pub expected: f64,
    /// `|observed - expected| / |expected|`.
    pub rel_error: f64,
    /// Accepted relative error.
    pub tolerance: f64,
    /// `rel_error < tolerance`.
    pub pass: bool,
}

/// Small-coupling comparison of the fixed point with its leading-order limits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    /// Coupling of the solve.
    pub lambda: f64,
    /// Rows of the comparison.
    pub rows: Vec<LimitRow>,
    /// True when every row passes.
    pub pass: bool,
}

fn limit_row(n: usize, quantity: &str, observed: f64, expected: f64, tolerance: f64) -> LimitRow {
    let rel_error = ((observed - expected) / expected).abs();
    LimitRow {
        n,
        quantity: quantity.into(),
        observed,
        expected,
        rel_error,
        tolerance,
        pass: rel_error < tolerance,
    }
}

/// Solves at `lambda_small <= 1e-3` and compares `H^{n+1} / (-Lambda)^((n-1)/2)`
/// with `n! c_n`, `delta_3 / Lambda` with 6 and `delta_n / Lambda` with `3 n (n-1)`.
pub fn check_small_lambda_limits(n_max: usize, lambda_small: Coupling) -> Result<LimitReport> {
    let l = lambda_small.value();
    if l > 1e-3 {
        return Err(Error::Domain(format!("lambda_small={l} must not exceed 1e-3")));
    }
    let opts = SolveOptions {
        n_max,
        closure: ClosurePolicy::EnvelopeMin,
        ..SolveOptions::default()
    };
    let (h, _) = solve(lambda_small, &opts)?;
    let c = limit_constants(9)?;
    let mut rows = vec![limit_row(1, "H2", h.get(1).to_f64(), 1.0 + 6.0 * l * l, 1e-3)];
    for n in [3usize, 5, 7, 9] {
        let k = ((n - 1) / 2) as i32;
        let scaled = (h.get(n) / ExtScalar::from_f64(-l).powi(k)).to_f64();
        let expected = ln_factorial(n).exp() * c[(n - 1) / 2];
        rows.push(limit_row(n, "H/(-lambda)^k", scaled, expected, 0.02));
    }
    rows.push(limit_row(3, "delta/lambda", extract_delta_at(&h, 3)? / l, 6.0, 0.01));
    for n in [5usize, 7, 9] {
        let expected = (3 * n * (n - 1)) as f64;
        rows.push(limit_row(n, "delta/lambda", extract_delta_at(&h, n)? / l, expected, 0.02));
    }
    Ok(LimitReport {
        lambda: l,
        pass: rows.iter().all(|r| r.pass),
        rows,
    })
}

/// Envelope ratios at one order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityRow {
    /// Odd order.
    pub n: usize,
    /// `|A_max| / (n (n-1) |H_max|)`.
    pub a_ratio: f64,
    /// `|B_min| / (n (n-1) |H_min|)`.
    pub b_ratio: f64,
    /// `D_{n,min} / (3 Lambda n (n-1))`.
    pub d_normalized: f64,
}

/// Monotonicity and bracket properties of the envelope ratios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// Coupling.
    pub lambda: f64,
    /// Coupling threshold of the claims.
    pub threshold: f64,
    /// Envelope constant.
    pub d0: f64,
    /// Tabulated orders `7 <= n <= N - 4`.
    pub rows: Vec<MonotonicityRow>,
    /// `a_ratio` strictly decreases.
    pub a_decreasing: bool,
    /// `b_ratio` strictly increases.
    pub b_increasing: bool,
    /// `d_normalized` strictly increases.
    pub d_increasing: bool,
    /// `d0 < d_normalized <= 1/2` at every row.
    pub d_bracket: bool,
}

fn strictly(values: &[f64], increasing: bool) -> bool {
    values
        .windows(2)
        .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

/// Tabulates the envelope ratios over odd `n` in `[7, N - 4]`.
pub fn check_appendix_monotonicity(env: &EnvelopeSet) -> Result<MonotonicityReport> {
    let lambda = env.lambda;
    let l = lambda.value();
    let top = env.n_max().saturating_sub(4);
    let mut rows = Vec::new();
    for n in (7..=top).step_by(2) {
        let nn = (n * (n - 1)) as f64;
        let a = a_term(&env.h_max, n)?;
        let b = b_term(lambda, env.h_min.values(), n)?;
        rows.push(MonotonicityRow {
            n,
            a_ratio: a.abs_ratio(env.h_max.get(n)) / nn,
            b_ratio: b.abs_ratio(env.h_min.get(n)) / nn,
            d_normalized: d_min_functional(&env.h_max, &env.h_min, n)? / splitting_scale(l, n),
        });
    }
    let a: Vec<f64> = rows.iter().map(|r| r.a_ratio).collect();
    let b: Vec<f64> = rows.iter().map(|r| r.b_ratio).collect();
    let d: Vec<f64> = rows.iter().map(|r| r.d_normalized).collect();
    Ok(MonotonicityReport {
        lambda: l,
        threshold: STABILITY_LAMBDA_MAX,
        d0: env.d0,
        a_decreasing: strictly(&a, false),
        b_increasing: strictly(&b, true),
        d_increasing: strictly(&d, true),
        d_bracket: d.iter().all(|&x| x > env.d0 && x <= 0.5),
        rows,
    })
}

/// Envelope constant inside `f_L`.
pub const F_L_D: f64 = 0.05;

/// `f_L(n) = (n+1)(n+2) / (1 + 3 Lambda (n+1)(n+2) d) * (1 + 15/n + 48/(n(n-1)))`.
pub fn f_l(n: f64, lambda: f64, d: f64) -> f64 {
    let q = (n + 1.0) * (n + 2.0);
    q / (1.0 + 3.0 * lambda * q * d) * (1.0 + 15.0 / n + 48.0 / (n * (n - 1.0)))
}

/// Limit `1 / (3 Lambda d)` of `f_L`.
pub fn f_l_limit(lambda: f64, d: f64) -> f64 {
    1.0 / (3.0 * lambda * d)
}

/// `f_B(n)`, the ratio bounding the two-part tree term from below.
pub fn f_b(n: f64, lambda: f64) -> f64 {
    let num = (n - 2.0)
        * (n + 5.0)
        * (n + 3.0)
        * (1.0 + 3.0 * lambda * n * (n - 1.0))
        * ((n - 1.0).powi(2) + 64.0 * (n - 1.0) + 192.0);
    let den = (n + 1.0)
        * (4.0 + 3.0 * lambda * (n + 5.0) * (n + 3.0))
        * n
        * (n - 1.0)
        * ((n - 3.0).powi(2) + 16.0 * (n - 3.0) + 48.0);
    num / den
}

/// Tabulated `f_L` and `f_B` with their claimed shape properties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureTable {
    /// Coupling of the evaluation.
    pub lambda: f64,
    /// Rows `(n, f_L(n), f_B(n))`.
    pub rows: Vec<(usize, f64, f64)>,
    /// Limit of `f_L`.
    pub f_l_limit: f64,
    /// `f_L` strictly decreases over the rows after the first.
    pub f_l_decreasing: bool,
    /// Orders `n` with `f_L(n + 2) >= f_L(n)`.
    pub f_l_increases_at: Vec<usize>,
    /// Relative distance of the last `f_L` value from its limit.
    pub f_l_terminal_rel: f64,
    /// `f_B > 1` on every row.
    pub f_b_above_one: bool,
    /// `f_B` strictly decreases.
    pub f_b_decreasing: bool,
    /// Relative distance of the last `f_B` value from 1.
    pub f_b_terminal_rel: f64,
}

/// Evaluates `f_L` and `f_B` on odd `n` in `[n_lo, n_hi]`, `n_lo >= 7`.
///
/// The decrease of `f_L` is judged on the half-open range `(n_lo, n_hi]`.
pub fn appendix_inequality_functions(lambda: Coupling, n_lo: usize, n_hi: usize) -> Result<FigureTable> {
    if n_lo < 7 || n_lo.is_multiple_of(2) || n_hi < n_lo + 2 || n_hi.is_multiple_of(2) {
        return Err(Error::Domain(format!("invalid odd range [{n_lo}, {n_hi}]")));
    }
    let l = lambda.value();
    let rows: Vec<(usize, f64, f64)> = (n_lo..=n_hi)
        .step_by(2)
        .map(|n| (n, f_l(n as f64, l, F_L_D), f_b(n as f64, l)))
        .collect();
    let fl: Vec<f64> = rows.iter().skip(1).map(|r| r.1).collect();
    let fb: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let limit = f_l_limit(l, F_L_D);
    let last = rows.last().expect("nonempty range");
    Ok(FigureTable {
        lambda: l,
        f_l_limit: limit,
        f_l_decreasing: strictly(&fl, false),
        f_l_increases_at: rows.windows(2).skip(1).filter(|w| w[1].1 >= w[0].1).map(|w| w[0].0).collect(),
        f_l_terminal_rel: (last.1 - limit).abs() / limit,
        f_b_above_one: fb.iter().all(|&x| x > 1.0),
        f_b_decreasing: strictly(&fb, false),
        f_b_terminal_rel: (last.2 - 1.0).abs(),
        rows,
    })
}

/// Contraction constants at one coupling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionConstants {
    /// Coupling.
    pub lambda: f64,
    /// `M_1 = (1 + 6 Lambda^2)^2`.
    pub m1: f64,
    /// `H_0^2`.
    pub h0_2: f64,
    /// `12 Lambda^2 M_1^2`.
    pub k1: f64,
    /// `6 Lambda^2 M_1^2`.
    pub k1_0: f64,
    /// `9 Lambda M_1 (1 + 4 Lambda)`.
    pub k3: f64,
    /// `9 Lambda (H_0^2)^2 (1 + 2 Lambda) / M_1^2`.
    pub k3_0: f64,
    /// `(1 + k3 + 2 k1) / 20`.
    pub k5: f64,
    /// `(1 + k3_0 + 2 k1_0) / 20`.
    pub k5_0: f64,
    /// `k_n = 1/12 + k_{n-2}/12 + k1/6` for odd `7 <= n <= N`.
    pub kn: Vec<(usize, f64)>,
    /// Same recursion with `k1_0`.
    pub kn_0: Vec<(usize, f64)>,
    /// `max(k5, sup kn)`.
    pub k_sup: f64,
    /// `max(k5_0, sup kn_0)`.
    pub k0_sup: f64,
    /// Closed form `1/11 + k1/6`.
    pub k_limit: f64,
    /// Closed form `1/11 + k1_0/6`.
    pub k0_limit: f64,
    /// Fixed point `12 a / 11` of the recursion, `a = 1/12 + k1/6`.
    pub k_recursion_limit: f64,
    /// Fixed point of the recursion with `k1_0`.
    pub k0_recursion_limit: f64,
}

impl ContractionConstants {
    /// `k3 + k3_0 < 1`.
    pub fn k3_sum_ok(&self) -> bool {
        self.k3 + self.k3_0 < 1.0
    }

    /// `k5 + k5_0 < 1`.
    pub fn k5_sum_ok(&self) -> bool {
        self.k5 + self.k5_0 < 1.0
    }

    /// `k_sup + k0_sup < 1`.
    pub fn sup_sum_ok(&self) -> bool {
        self.k_sup + self.k0_sup < 1.0
    }
}

/// `a sum_{j=0}^{(m-5)/2} 12^{-j} + 12^{-(m-5)/2} k5`.
pub fn geometric_closed_form(a: f64, k5: f64, m: usize) -> f64 {
    let top = (m - 5) / 2;
    let sum: f64 = (0..=top).map(|j| 12f64.powi(-(j as i32))).sum();
    a * sum + 12f64.powi(-(top as i32)) * k5
}

/// Contraction constants at `lambda` with the recursion carried to order `N`.
pub fn contraction_constants(lambda: Coupling, n_max: usize) -> Result<ContractionConstants> {
    if n_max < 7 || n_max.is_multiple_of(2) {
        return Err(Error::Domain(format!("N={n_max} must be odd and at least 7")));
    }
    let l = lambda.value();
    let m1 = h2_max(l);
    let h0_2 = 1.0 + l * delta_min_at(l, 3);
    let k1 = 12.0 * l * l * m1 * m1;
    let k1_0 = 6.0 * l * l * m1 * m1;
    let k3 = 9.0 * l * m1 * (1.0 + 4.0 * l);
    let k3_0 = 9.0 * l * h0_2 * h0_2 * (1.0 + 2.0 * l) / (m1 * m1);
    let k5 = (1.0 + k3 + 2.0 * k1) / 20.0;
    let k5_0 = (1.0 + k3_0 + 2.0 * k1_0) / 20.0;
    let recurse = |k5: f64, k1: f64| {
        let mut out = Vec::new();
        let mut k = k5;
        for n in (7..=n_max).step_by(2) {
            k = 1.0 / 12.0 + k / 12.0 + k1 / 6.0;
            out.push((n, k));
        }
        out
    };
    let kn = recurse(k5, k1);
    let kn_0 = recurse(k5_0, k1_0);
    let sup = |k5: f64, ks: &[(usize, f64)]| ks.iter().map(|p| p.1).fold(k5, f64::max);
    Ok(ContractionConstants {
        lambda: l,
        m1,
        h0_2,
        k1,
        k1_0,
        k3,
        k3_0,
        k5,
        k5_0,
        k_sup: sup(k5, &kn),
        k0_sup: sup(k5_0, &kn_0),
        kn,
        kn_0,
        k_limit: 1.0 / 11.0 + k1 / 6.0,
        k0_limit: 1.0 / 11.0 + k1_0 / 6.0,
        k_recursion_limit: 1.0 / 11.0 + 2.0 * k1 / 11.0,
        k0_recursion_limit: 1.0 / 11.0 + 2.0 * k1_0 / 11.0,
    })
}

/// Suprema of the limit constants over a coupling grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminalConstants {
    /// Largest coupling of the grid.
    pub lambda_max: f64,
    /// Sup of `1/11 + k1/6`.
    pub k: f64,
    /// Sup of `1/11 + k1_0/6`.
    pub k0: f64,
    /// Sup of the recursion fixed point with `k1`.
    pub k_recursion: f64,
    /// Sup of the recursion fixed point with `k1_0`.
    pub k0_recursion: f64,
    /// `k + k0 < 1`.
    pub sum_ok: bool,
}

/// Sup over `grid` of the limit constants.
pub fn terminal_constants(grid: &[f64]) -> Result<TerminalConstants> {
    if grid.is_empty() {
        return Err(Error::Domain("empty coupling grid".into()));
    }
    let mut t = TerminalConstants {
        lambda_max: 0.0,
        k: 0.0,
        k0: 0.0,
        k_recursion: 0.0,
        k0_recursion: 0.0,
        sum_ok: false,
    };
    for &l in grid {
        let c = contraction_constants(Coupling::new(l)?, 7)?;
        t.lambda_max = t.lambda_max.max(l);
        t.k = t.k.max(c.k_limit);
        t.k0 = t.k0.max(c.k0_limit);
        t.k_recursion = t.k_recursion.max(c.k_recursion_limit);
        t.k0_recursion = t.k0_recursion.max(c.k0_recursion_limit);
    }
    t.sum_ok = t.k + t.k0 < 1.0;
    Ok(t)
}

/// Uniform grid of `steps` couplings ending at `lambda_max`.
pub fn coupling_grid(lambda_max: f64, steps: usize) -> Vec<f64> {
    (1..=steps).map(|i| lambda_max * i as f64 / steps as f64).collect()
}

/// Single-term bounds on the three-part tree term at one order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeBoundRow {
    /// Odd order.
    pub n: usize,
    /// Exact number of triples.
    pub count: usize,
    /// Most balanced triple.
    pub balanced: (usize, usize, usize),
    /// `ln |C_min|`.
    pub ln_c_min: f64,
    /// `ln (count * |balanced term on H_min|)`.
    pub ln_lower: f64,
    /// `ln |C_max|`.
    pub ln_c_max: f64,
    /// `ln (count * |(n-2,1,1) term on H_max|)`.
    pub ln_upper: f64,
    /// `|C_min| >= lower`.
    pub lower_ok: bool,
    /// `|C_max| <= upper`.
    pub upper_ok: bool,
}

fn single_term(h: &GreenSequence, n: usize, t: &TriplePartition) -> f64 {
    let lw = crate::combinatorics::ln_weight_triple(n, t);
    (6.0 * h.lambda().value()).ln()
        + lw
        + t.parts().iter().map(|&i| h.get(i).logmag()).sum::<f64>()
}

/// Most balanced odd triple of `n`, smallest spread `i1 - i3`.
pub fn most_balanced_triple(n: usize) -> Result<TriplePartition> {
    crate::combinatorics::enumerate_triples(n)?
        .into_iter()
        .min_by_key(|t| t.i1 - t.i3)
        .ok_or(Error::Domain(format!("no triple for n={n}")))
}

/// Compares `|C|` on the extremal sequences with `T_n` times a single term.
pub fn tree_term_bounds(env: &EnvelopeSet) -> Result<Vec<TreeBoundRow>> {
    let mut rows = Vec::new();
    for n in (7..=env.n_max()).step_by(2) {
        let count = exact_triple_count(n)?;
        let bal = most_balanced_triple(n)?;
        let top = TriplePartition::new(n - 2, 1, 1);
        let ln_c_min = c_term(env.lambda, env.h_min.values(), n)?.logmag();
        let ln_c_max = c_term(env.lambda, env.h_max.values(), n)?.logmag();
        let ln_lower = (count as f64).ln() + single_term(&env.h_min, n, &bal);
        let ln_upper = (count as f64).ln() + single_term(&env.h_max, n, &top);
        rows.push(TreeBoundRow {
            n,
            count,
            balanced: (bal.i1, bal.i2, bal.i3),
            ln_c_min,
            ln_lower,
            ln_c_max,
            ln_upper,
            lower_ok: ln_c_min >= ln_lower - LOG_SLACK,
            upper_ok: ln_c_max <= ln_upper + LOG_SLACK,
        });
    }
    Ok(rows)
}

/// Outcome of one check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    /// The check holds.
    Pass,
    /// The check fails.
    Fail,
    /// The coupling lies outside the precondition of the check.
    Skipped,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIPPED",
        })
    }
}

/// Role of a check in the overall verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// Property of the objects computed at the requested coupling.
    Certification,
    /// Reproduction of a stated shape property of the bounding apparatus.
    Claim,
}

/// One line of the verification summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    /// Check name.
    pub name: String,
    /// Role in the verdict.
    pub kind: CheckKind,
    /// Largest coupling for which the check applies.
    pub threshold: Option<f64>,
    /// Outcome.
    pub status: CheckStatus,
    /// Short human-readable detail.
    pub detail: String,
}

/// Every check at one coupling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    /// Coupling.
    pub lambda: f64,
    /// Truncation order.
    pub n_max: usize,
    /// Check lines in run order.
    pub checks: Vec<CheckOutcome>,
    /// Contraction constants when computed.
    pub constants: Option<ContractionConstants>,
    /// Terminal constants over the grid up to the stability range.
    pub terminal: Option<TerminalConstants>,
}

impl VerifySummary {
    /// True when no applicable check of a gating kind fails. Claims gate only when `strict`.
    pub fn passed(&self, strict: bool) -> bool {
        self.checks.iter().all(|c| {
            c.status != CheckStatus::Fail || (!strict && c.kind == CheckKind::Claim)
        })
    }
}

struct Recorder {
    lambda: f64,
    checks: Vec<CheckOutcome>,
}

impl Recorder {
    fn applies(&self, threshold: Option<f64>) -> bool {
        threshold.is_none_or(|t| self.lambda <= t)
    }

    fn push(&mut self, name: &str, kind: CheckKind, threshold: Option<f64>, outcome: Option<(bool, String)>) {
        let (status, detail) = match outcome {
            None => (
                CheckStatus::Skipped,
                format!("lambda={} above threshold {}", self.lambda, threshold.unwrap_or(f64::NAN)),
            ),
            Some((ok, d)) => (if ok { CheckStatus::Pass } else { CheckStatus::Fail }, d),
        };
        self.checks.push(CheckOutcome {
            name: name.into(),
            kind,
            threshold,
            status,
            detail,
        });
    }
}

/// Runs every check at `lambda`, each gated by its own coupling threshold.
pub fn run_all(lambda: Coupling, opts: &SolveOptions) -> Result<VerifySummary> {
    let l = lambda.value();
    let n_max = opts.n_max;
    let stab = Some(STABILITY_LAMBDA_MAX);
    let cert = Some(CERTIFIED_LAMBDA_MAX);
    let mut r = Recorder {
        lambda: l,
        checks: Vec::new(),
    };
    use CheckKind::{Certification as Cert, Claim};

    let env = EnvelopeSet::build(lambda, n_max);
    let fixed = if r.applies(stab) { Some(solve(lambda, opts)) } else { None };

    let out = fixed.as_ref().map(|res| match res {
        Ok((_, rep)) => (rep.converged, format!("iterations={} final_distance={:.3e} residual_max={:.3e}", rep.iterations, rep.final_distance, rep.residual_max)),
        Err(e) => (false, e.to_string()),
    });
    r.push("fixed_point_converges", Cert, stab, out);

    let out = match (&fixed, &env) {
        (None, _) => None,
        (Some(Ok((h, _))), Ok(env)) => Some(match check_membership_upto(h, env, opts.window()) {
            Ok(m) => (m.verdict, m.first_violation.map_or(format!("orders n<={} admissible", opts.window()), |(n, p)| format!("first violation n={n} {p}"))),
            Err(e) => (false, e.to_string()),
        }),
        (Some(Err(e)), _) => Some((false, e.to_string())),
        (Some(_), Err(e)) => Some((false, e.to_string())),
    };
    r.push("fixed_point_membership", Cert, stab, out);

    let out = r.applies(stab).then(|| match &env {
        Ok(env) => match check_membership(&env.h0, env) {
            Ok(m) => (m.verdict, format!("{} orders checked", m.records.len())),
            Err(e) => (false, e.to_string()),
        },
        Err(e) => (false, e.to_string()),
    });
    r.push("fundamental_membership", Cert, stab, out);

    let out = match check_small_lambda_limits(n_max, Coupling::new(1e-4)?) {
        Ok(rep) => {
            let worst = rep.rows.iter().map(|x| x.rel_error).fold(0.0, f64::max);
            (rep.pass, format!("lambda=1e-4 worst relative error {worst:.3e}"))
        }
        Err(e) => (false, e.to_string()),
    };
    r.push("small_lambda_limits", Cert, None, Some(out));

    let mono = if r.applies(stab) { Some(env.as_ref().map_err(Clone::clone).and_then(check_appendix_monotonicity)) } else { None };
    let pick = |f: &dyn Fn(&MonotonicityReport) -> (bool, String)| {
        mono.as_ref().map(|m| match m {
            Ok(m) => f(m),
            Err(e) => (false, e.to_string()),
        })
    };
    let span = |m: &MonotonicityReport, g: fn(&MonotonicityRow) -> f64| {
        let first = m.rows.first().map_or(f64::NAN, g);
        let last = m.rows.last().map_or(f64::NAN, g);
        format!("{first:.4e} -> {last:.4e}")
    };
    r.push("d_bracket", Cert, stab, pick(&|m| (m.d_bracket, format!("D/(3 lambda n(n-1)) {}", span(m, |x| x.d_normalized)))));
    r.push("a_ratio_decreasing", Claim, stab, pick(&|m| (m.a_decreasing, span(m, |x| x.a_ratio))));
    r.push("b_ratio_increasing", Claim, stab, pick(&|m| (m.b_increasing, span(m, |x| x.b_ratio))));
    r.push("d_ratio_increasing", Claim, stab, pick(&|m| (m.d_increasing, span(m, |x| x.d_normalized))));

    let fig = appendix_inequality_functions(Coupling::new(STABILITY_LAMBDA_MAX)?, 7, 4001)?;
    r.push("f_l_decreasing", Claim, None, Some((fig.f_l_decreasing, format!("increases at n={:?}", fig.f_l_increases_at))));
    r.push("f_l_terminal", Claim, None, Some((fig.f_l_terminal_rel <= 5e-3, format!("relative distance {:.4e} from {:.4}", fig.f_l_terminal_rel, fig.f_l_limit))));
    r.push("f_b_above_one", Cert, None, Some((fig.f_b_above_one, format!("min over range {:.6}", fig.rows.iter().map(|x| x.2).fold(f64::INFINITY, f64::min)))));
    r.push("f_b_decreasing", Claim, None, Some((fig.f_b_decreasing, String::new())));
    r.push("f_b_terminal", Claim, None, Some((fig.f_b_terminal_rel <= 5e-3, format!("f_B(4001) - 1 = {:.4e}", fig.f_b_terminal_rel))));

    let constants = contraction_constants(lambda, n_max.max(7))?;
    let applies = r.applies(cert);
    r.push("k3_sum", Cert, cert, applies.then(|| (constants.k3_sum_ok(), format!("k3 + k3_0 = {:.6}", constants.k3 + constants.k3_0))));
    r.push("k5_sum", Cert, cert, applies.then(|| (constants.k5_sum_ok(), format!("k5 + k5_0 = {:.6}", constants.k5 + constants.k5_0))));
    r.push("k_sup_sum", Cert, cert, applies.then(|| (constants.sup_sum_ok(), format!("k_sup + k0_sup = {:.6}", constants.k_sup + constants.k0_sup))));
    let terminal = terminal_constants(&coupling_grid(STABILITY_LAMBDA_MAX, 50))?;

    Ok(VerifySummary {
        lambda: l,
        n_max,
        checks: r.checks,
        constants: Some(constants),
        terminal: Some(terminal),
    })
}
