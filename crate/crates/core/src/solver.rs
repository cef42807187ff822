//! Picard iteration of the contractive map, truncation closure, coupling
//! sweeps and empirical contraction estimates.

use crate::banach::{distance, distance_upto, in_ball_with, norm_weights, BallSpec, NormWeights};
use crate::combinatorics::check_odd_index;
use crate::dynamics::{apply_map_star_raw, extract_delta_at, residual_max};
use crate::envelopes::{Coupling, EnvelopeSet, GreenSequence, SplittingSequence, CERTIFIED_LAMBDA_MAX, STABILITY_LAMBDA_MAX};
use crate::error::{Error, Result};
use crate::verify::check_membership_upto;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Rule supplying `H^{N+3}` beyond the truncation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosurePolicy {
    /// No value; any evaluation that needs it fails.
    Strict,
    /// `H^{N+3} = 0`.
    ZeroTail,
    /// Splitting form with the upper envelope factor `delta_{N+2,max}`.
    EnvelopeMax,
    /// Splitting form with the lower envelope factor `delta_{N+2,min}`.
    EnvelopeMin,
    /// Two runs with the envelope closures; the lower one is reported.
    Bracket,
}

impl ClosurePolicy {
    /// Tag used on the command line and in serialized output.
    pub fn tag(self) -> &'static str {
        match self {
            ClosurePolicy::Strict => "strict",
            ClosurePolicy::ZeroTail => "zero_tail",
            ClosurePolicy::EnvelopeMax => "envelope_max",
            ClosurePolicy::EnvelopeMin => "envelope_min",
            ClosurePolicy::Bracket => "bracket",
        }
    }
}

impl fmt::Display for ClosurePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ClosurePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(ClosurePolicy::Strict),
            "zero_tail" => Ok(ClosurePolicy::ZeroTail),
            "envelope_max" => Ok(ClosurePolicy::EnvelopeMax),
            "envelope_min" => Ok(ClosurePolicy::EnvelopeMin),
            "bracket" => Ok(ClosurePolicy::Bracket),
            other => Err(Error::Domain(format!("unknown closure policy '{other}'"))),
        }
    }
}

/// Starting sequence of the iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPolicy {
    /// The fundamental sequence `H_0`.
    Fundamental,
    /// The sequence generated by the upper splitting envelope.
    DeltaMax,
    /// The sequence generated by the lower splitting envelope.
    DeltaMin,
}

impl StartPolicy {
    /// Tag used on the command line and in serialized output.
    pub fn tag(self) -> &'static str {
        match self {
            StartPolicy::Fundamental => "fundamental",
            StartPolicy::DeltaMax => "delta_max",
            StartPolicy::DeltaMin => "delta_min",
        }
    }
}

impl fmt::Display for StartPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for StartPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fundamental" => Ok(StartPolicy::Fundamental),
            "delta_max" => Ok(StartPolicy::DeltaMax),
            "delta_min" => Ok(StartPolicy::DeltaMin),
            other => Err(Error::Domain(format!("unknown start policy '{other}'"))),
        }
    }
}

/// Parameters of one solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Odd truncation order `N`.
    pub n_max: usize,
    /// Tolerance on the weighted distance between successive iterates.
    pub tol: f64,
    /// Tolerance on the residual of the equations of motion.
    pub residual_tol: f64,
    /// Iteration budget.
    pub max_iter: usize,
    /// Number of top orders excluded from convergence decisions.
    pub buffer: usize,
    /// Truncation closure.
    pub closure: ClosurePolicy,
    /// Starting sequence.
    pub start: StartPolicy,
    /// Bracket runs must agree within this multiple of `tol`.
    pub bracket_factor: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            n_max: 41,
            tol: 1e-12,
            residual_tol: 1e-10,
            max_iter: 1000,
            buffer: 4,
            closure: ClosurePolicy::Bracket,
            start: StartPolicy::Fundamental,
            bracket_factor: 100.0,
        }
    }
}

impl SolveOptions {
    /// Highest order entering convergence decisions, `N - buffer`.
    pub fn window(&self) -> usize {
        self.n_max - self.buffer
    }

    fn validate(&self) -> Result<()> {
        check_odd_index(self.n_max, 11)?;
        if self.buffer % 2 == 1 || self.buffer + 3 > self.n_max {
            return Err(Error::Domain(format!(
                "buffer={} must be even and leave orders up to 3",
                self.buffer
            )));
        }
        if !(self.tol > 0.0) || !(self.residual_tol > 0.0) || !(self.bracket_factor > 0.0) {
            return Err(Error::Domain("tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Domain("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Agreement of the two bracket runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketReport {
    /// Weighted distance between the two fixed points over the convergence window.
    pub width: f64,
    /// Agreement tolerance.
    pub tolerance: f64,
    /// True when `width <= tolerance`.
    pub agrees: bool,
    /// Iterations of the upper-closure run.
    pub upper_iterations: usize,
    /// Convergence verdict of the upper-closure run.
    pub upper_converged: bool,
    /// Failure of the upper-closure run, if any.
    pub upper_error: Option<String>,
}

/// Diagnostics of one solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    /// Coupling.
    pub lambda: f64,
    /// Truncation order.
    pub n_max: usize,
    /// Highest order entering convergence decisions.
    pub window: usize,
    /// Closure of the run.
    pub closure: ClosurePolicy,
    /// Starting sequence.
    pub start: StartPolicy,
    /// Number of map applications.
    pub iterations: usize,
    /// Weighted distance between successive iterates.
    pub distances: Vec<f64>,
    /// Ratios of successive distances, recorded while the distance exceeds `1e-14`.
    pub contraction_ratios: Vec<f64>,
    /// Last entry of `distances`.
    pub final_distance: f64,
    /// Largest residual of the equations of motion over the window.
    pub residual_max: f64,
    /// Convergence verdict of the reported run.
    pub converged: bool,
    /// Notes about the coupling range.
    pub warnings: Vec<String>,
    /// Agreement of the two bracket runs.
    pub bracket: Option<BracketReport>,
}

impl IterationReport {
    /// Largest recorded contraction ratio.
    pub fn max_ratio(&self) -> Option<f64> {
        self.contraction_ratios.iter().copied().reduce(f64::max)
    }
}

const RATIO_FLOOR: f64 = 1e-14;

/// Range notes for a coupling.
pub fn range_warnings(lambda: Coupling) -> Vec<String> {
    let l = lambda.value();
    let mut w = Vec::new();
    if l > STABILITY_LAMBDA_MAX {
        w.push(format!("lambda={l} exceeds the stability range {STABILITY_LAMBDA_MAX}"));
    }
    if l > CERTIFIED_LAMBDA_MAX {
        w.push(format!("lambda={l} exceeds the certified contraction range {CERTIFIED_LAMBDA_MAX}"));
    }
    w
}

/// Starting sequence for a policy.
pub fn start_sequence(env: &EnvelopeSet, start: StartPolicy, closure: ClosurePolicy) -> GreenSequence {
    match start {
        StartPolicy::Fundamental => env.h0.with_closure(closure),
        StartPolicy::DeltaMax => env.h_max.with_closure(closure),
        StartPolicy::DeltaMin => env.h_min.with_closure(closure),
    }
}

struct Run {
    h: GreenSequence,
    report: IterationReport,
}

fn run_single(
    lambda: Coupling,
    opts: &SolveOptions,
    closure: ClosurePolicy,
    env: &EnvelopeSet,
    w: &NormWeights,
) -> Result<Run> {
    let window = opts.window();
    let mut h = start_sequence(env, opts.start, closure);
    let mut distances = Vec::new();
    let mut ratios = Vec::new();
    let mut converged = false;
    let mut res = f64::INFINITY;
    for iteration in 0..opts.max_iter {
        let next = apply_map_star_raw(&h).map_err(|e| match e {
            Error::Degenerate { n } => Error::Stability {
                iteration,
                n,
                predicate: "zero denominator".into(),
            },
            other => other,
        })?;
        let membership = check_membership_upto(&next, env, window)?;
        if let Some((n, predicate)) = membership.first_violation {
            return Err(Error::Stability {
                iteration,
                n,
                predicate: predicate.to_string(),
            });
        }
        let d = distance_upto(&next, &h, w, window)?;
        if let Some(&prev) = distances.last() {
            if prev > RATIO_FLOOR {
                ratios.push(d / prev);
            }
        }
        distances.push(d);
        h = next;
        if d < opts.tol {
            res = residual_max(&h, window)?;
            if res < opts.residual_tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        res = residual_max(&h, window)?;
    }
    let report = IterationReport {
        lambda: lambda.value(),
        n_max: opts.n_max,
        window,
        closure,
        start: opts.start,
        iterations: distances.len(),
        final_distance: distances.last().copied().unwrap_or(f64::NAN),
        distances,
        contraction_ratios: ratios,
        residual_max: res,
        converged,
        warnings: range_warnings(lambda),
        bracket: None,
    };
    Ok(Run { h, report })
}

/// Iterates the contractive map from the configured start until successive
/// iterates are within `tol` and the residual is below `residual_tol`, both
/// over orders `n <= N - buffer`.
///
/// Under [`ClosurePolicy::Bracket`] the lower-closure run is returned and the
/// upper-closure run only feeds the bracket report, so a failure of the upper
/// run is recorded there instead of aborting the solve.
pub fn solve(lambda: Coupling, opts: &SolveOptions) -> Result<(GreenSequence, IterationReport)> {
    opts.validate()?;
    let env = EnvelopeSet::build(lambda, opts.n_max)?;
    let w = norm_weights(lambda, opts.n_max)?;
    if opts.closure != ClosurePolicy::Bracket {
        let run = run_single(lambda, opts, opts.closure, &env, &w)?;
        return Ok((run.h, run.report));
    }
    let (lower, upper) = rayon::join(
        || run_single(lambda, opts, ClosurePolicy::EnvelopeMin, &env, &w),
        || run_single(lambda, opts, ClosurePolicy::EnvelopeMax, &env, &w),
    );
    let lower = lower?;
    let tolerance = opts.bracket_factor * opts.tol;
    let bracket = match upper {
        Ok(upper) => {
            let upper_h = upper.h.with_closure(ClosurePolicy::EnvelopeMin);
            let width = distance_upto(&lower.h, &upper_h, &w, opts.window())?;
            BracketReport {
                width,
                tolerance,
                agrees: width <= tolerance && upper.report.converged,
                upper_iterations: upper.report.iterations,
                upper_converged: upper.report.converged,
                upper_error: None,
            }
        }
        Err(e) => BracketReport {
            width: f64::INFINITY,
            tolerance,
            agrees: false,
            upper_iterations: 0,
            upper_converged: false,
            upper_error: Some(e.to_string()),
        },
    };
    let mut report = lower.report;
    report.closure = ClosurePolicy::Bracket;
    report.bracket = Some(bracket);
    Ok((lower.h.with_closure(ClosurePolicy::Bracket), report))
}

/// Condensed outcome of one coupling in a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    /// `H^2`.
    pub h2: f64,
    /// `H^4`.
    pub h4: f64,
    /// `delta_3`.
    pub delta3: f64,
    /// `delta_5`.
    pub delta5: f64,
    /// `delta_7`.
    pub delta7: f64,
    /// Iteration diagnostics.
    pub report: IterationReport,
}

/// Status of one row of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepStatus {
    /// Converged inside the certified range with agreeing brackets.
    Ok,
    /// Outside the certified range, or bracket runs disagree.
    Warned,
    /// Iteration budget exhausted inside the certified range.
    Unconverged,
    /// The solve failed.
    Error,
}

impl SweepStatus {
    /// Tag written to CSV.
    pub fn tag(self) -> &'static str {
        match self {
            SweepStatus::Ok => "ok",
            SweepStatus::Warned => "warned",
            SweepStatus::Unconverged => "unconverged",
            SweepStatus::Error => "error",
        }
    }
}

/// One row of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    /// Coupling.
    pub lambda: f64,
    /// Row status.
    pub status: SweepStatus,
    /// Summary of a completed solve.
    pub summary: Option<SweepSummary>,
    /// Error message of a failed solve.
    pub error: Option<String>,
}

fn summarize(h: &GreenSequence, report: IterationReport) -> Result<SweepSummary> {
    Ok(SweepSummary {
        h2: h.get(1).to_f64(),
        h4: h.get(3).to_f64(),
        delta3: extract_delta_at(h, 3)?,
        delta5: extract_delta_at(h, 5)?,
        delta7: extract_delta_at(h, 7)?,
        report,
    })
}

fn sweep_row(lambda: f64, opts: &SolveOptions) -> SweepEntry {
    let outcome = Coupling::new(lambda).and_then(|l| {
        let (h, report) = solve(l, opts)?;
        summarize(&h, report).map(|s| (l, s))
    });
    match outcome {
        Ok((l, summary)) => {
            let bracket_ok = summary.report.bracket.as_ref().is_none_or(|b| b.agrees);
            let status = if !l.is_certified() {
                SweepStatus::Warned
            } else if !summary.report.converged {
                SweepStatus::Unconverged
            } else if !bracket_ok {
                SweepStatus::Warned
            } else {
                SweepStatus::Ok
            };
            SweepEntry {
                lambda,
                status,
                summary: Some(summary),
                error: None,
            }
        }
        Err(e) => SweepEntry {
            lambda,
            status: if lambda > CERTIFIED_LAMBDA_MAX {
                SweepStatus::Warned
            } else {
                SweepStatus::Error
            },
            summary: None,
            error: Some(e.to_string()),
        },
    }
}

/// Independent solves over a grid of couplings, in grid order.
pub fn sweep(lambdas: &[f64], opts: &SolveOptions) -> Vec<SweepEntry> {
    lambdas.par_iter().map(|&l| sweep_row(l, opts)).collect()
}

/// Statistics of the empirical contraction ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionStats {
    /// Coupling.
    pub lambda: f64,
    /// Number of sampled pairs.
    pub trials: usize,
    /// Seed of the generator.
    pub seed: u64,
    /// Largest ratio.
    pub max_ratio: f64,
    /// Mean ratio.
    pub mean_ratio: f64,
    /// Every ratio in sampling order.
    pub ratios: Vec<f64>,
    /// Samples redrawn after leaving the ball or coinciding.
    pub resamples: usize,
}

const MAX_DRAWS: usize = 10_000;

fn sample_in_ball(
    rng: &mut ChaCha8Rng,
    env: &EnvelopeSet,
    ball: &BallSpec,
    w: &NormWeights,
    resamples: &mut usize,
) -> Result<GreenSequence> {
    let l = env.lambda.value();
    let h2_hi = env.h_max.get(1).to_f64();
    for _ in 0..MAX_DRAWS {
        let h2: f64 = rng.gen_range(1.0..=h2_hi);
        let mut deltas = vec![(h2 - 1.0) / l];
        for n in (3..=env.n_max()).step_by(2) {
            deltas.push(rng.gen_range(env.delta_min.get(n)..=env.delta_max.get(n)));
        }
        let h = GreenSequence::from_splitting(env.lambda, &SplittingSequence::new(deltas)?, ClosurePolicy::EnvelopeMin)?;
        if in_ball_with(&h, ball, w, env)? {
            return Ok(h);
        }
        *resamples += 1;
    }
    Err(Error::Domain("no admissible sample found inside the ball".into()))
}

/// Samples pairs in the ball around the fundamental sequence and measures
/// `N(M* H - M* H') / N(H - H')` over orders `n <= N - buffer`.
pub fn empirical_contraction(lambda: Coupling, n_max: usize, buffer: usize, trials: usize, seed: u64) -> Result<ContractionStats> {
    check_odd_index(n_max, 11)?;
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    let window = n_max.checked_sub(buffer).filter(|w| *w >= 3).ok_or_else(|| Error::Domain("buffer too large".into()))?;
    let env = EnvelopeSet::build(lambda, n_max)?;
    let w = norm_weights(lambda, n_max)?;
    let ball = BallSpec::new(env.h0.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(trials);
    let mut resamples = 0;
    while ratios.len() < trials {
        let a = sample_in_ball(&mut rng, &env, &ball, &w, &mut resamples)?;
        let b = sample_in_ball(&mut rng, &env, &ball, &w, &mut resamples)?;
        let d = distance_upto(&a, &b, &w, window)?;
        if d == 0.0 || distance(&a, &b, &w)? == 0.0 {
            resamples += 1;
            continue;
        }
        let ma = apply_map_star_raw(&a)?;
        let mb = apply_map_star_raw(&b)?;
        ratios.push(distance_upto(&ma, &mb, &w, window)? / d);
    }
    Ok(ContractionStats {
        lambda: lambda.value(),
        trials,
        seed,
        max_ratio: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_ratio: ratios.iter().sum::<f64>() / ratios.len() as f64,
        ratios,
        resamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lam(l: f64) -> Coupling {
        Coupling::new(l).unwrap()
    }

    #[test]
    fn policy_tags_round_trip() {
        for p in [
            ClosurePolicy::Strict,
            ClosurePolicy::ZeroTail,
            ClosurePolicy::EnvelopeMax,
            ClosurePolicy::EnvelopeMin,
            ClosurePolicy::Bracket,
        ] {
            assert_eq!(p.tag().parse::<ClosurePolicy>().unwrap(), p);
            assert_eq!(serde_json::to_string(&p).unwrap(), format!("\"{}\"", p.tag()));
        }
        for s in [StartPolicy::Fundamental, StartPolicy::DeltaMax, StartPolicy::DeltaMin] {
            assert_eq!(s.tag().parse::<StartPolicy>().unwrap(), s);
        }
        assert!("nearest".parse::<ClosurePolicy>().is_err());
    }

    #[test]
    fn invalid_options_are_rejected() {
        let even = SolveOptions { n_max: 40, ..SolveOptions::default() };
        assert!(matches!(solve(lam(0.01), &even), Err(Error::Domain(_))));
        let odd_buffer = SolveOptions { buffer: 3, ..SolveOptions::default() };
        assert!(solve(lam(0.01), &odd_buffer).is_err());
        let no_tol = SolveOptions { tol: 0.0, ..SolveOptions::default() };
        assert!(solve(lam(0.01), &no_tol).is_err());
    }

    #[test]
    fn strict_closure_reports_truncation() {
        let opts = SolveOptions { closure: ClosurePolicy::Strict, ..SolveOptions::default() };
        assert!(matches!(solve(lam(0.01), &opts), Err(Error::Truncation { n: 41 })));
    }

    #[test]
    fn bracket_solve_converges_and_agrees() {
        let (h, report) = solve(lam(0.01), &SolveOptions::default()).unwrap();
        assert!(report.converged);
        assert_eq!(report.window, 37);
        assert_eq!(report.distances.len(), report.iterations);
        assert!(report.max_ratio().unwrap() < 1.0);
        let bracket = report.bracket.unwrap();
        assert!(bracket.agrees && bracket.upper_error.is_none());
        assert_eq!(h.closure(), ClosurePolicy::Bracket);
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn starts_reach_the_same_fixed_point() {
        let w = norm_weights(lam(0.01), 41).unwrap();
        let base = SolveOptions { closure: ClosurePolicy::ZeroTail, ..SolveOptions::default() };
        let (h0, _) = solve(lam(0.01), &base).unwrap();
        for start in [StartPolicy::DeltaMax, StartPolicy::DeltaMin] {
            let (h, r) = solve(lam(0.01), &SolveOptions { start, ..base.clone() }).unwrap();
            assert!(r.converged);
            assert!(distance_upto(&h, &h0, &w, 37).unwrap() < 1e-10);
        }
    }

    #[test]
    fn out_of_range_coupling_warns() {
        assert!(range_warnings(lam(0.01)).is_empty());
        assert_eq!(range_warnings(lam(0.048)).len(), 1);
        assert!(!range_warnings(lam(0.2)).is_empty());
    }

    #[test]
    fn sweep_keeps_grid_order() {
        let rows = sweep(&[0.01, 0.005, 0.2], &SolveOptions::default());
        let lambdas: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
        assert_eq!(lambdas, vec![0.01, 0.005, 0.2]);
        assert_eq!(rows[0].status, SweepStatus::Ok);
        assert_eq!(rows[2].status, SweepStatus::Warned);
        assert!(rows[0].summary.as_ref().unwrap().delta3 > rows[1].summary.as_ref().unwrap().delta3);
    }

    #[test]
    fn contraction_sampling_is_seeded() {
        let a = empirical_contraction(lam(0.01), 21, 4, 8, 3).unwrap();
        let b = empirical_contraction(lam(0.01), 21, 4, 8, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ratios.len(), 8);
        assert!(a.max_ratio < 1.0);
    }
}
