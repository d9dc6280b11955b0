//! Stability analysis of the interaction model's eigen-aligned channel.
//!
//! In the eigen-aligned case one diagonal channel evolves by the random
//! factor `lambda_h + gamma x^2` per step, so the state stays bounded when
//! the running product of those factors vanishes. This module samples the
//! log-product `sum_i log(lambda_h + gamma x_i^2)` by Monte Carlo, estimates
//! sub-exponential parameters `(nu, b)` for the centered log-factor by a
//! quadrature moment-generating-function search, and checks the resulting
//! Bernstein-style tail bound against empirical exceedance frequencies.

use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::exec;
use crate::numerics::quadrature::{gauss_hermite_expectation, QuadratureRule, DEFAULT_ORDER};
use crate::numerics::rng::RandomStream;

/// The interacting channel: last eigenvalue of the discretized transition
/// plus the interaction gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub lambda_h: f64,
    pub gamma: f64,
}

impl ChannelParams {
    pub fn new(lambda_h: f64, gamma: f64) -> Result<Self> {
        if !(lambda_h.is_finite() && lambda_h > 0.0 && lambda_h <= 1.0) {
            return Err(Error::invalid(format!(
                "ChannelParams: lambda_h must lie in (0, 1], got {lambda_h}"
            )));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::invalid(format!(
                "ChannelParams: gamma must be non-negative, got {gamma}"
            )));
        }
        Ok(ChannelParams { lambda_h, gamma })
    }

    /// Whether the mean per-step factor is below 1; violations are worth
    /// flagging in experiment output, not rejecting.
    pub fn is_contractive(&self) -> bool {
        self.lambda_h + self.gamma < 1.0
    }

    /// `E[log(lambda_h + gamma X^2)]` by Gauss-Hermite quadrature.
    pub fn log_factor_mean(&self, rule: &QuadratureRule) -> Result<f64> {
        let (l, g) = (self.lambda_h, self.gamma);
        gauss_hermite_expectation(|x| (l + g * x * x).ln(), rule)
    }
}

/// `sum_i log(lambda_h + gamma x_i^2)` over the given inputs. The arguments
/// stay positive because `lambda_h > 0`.
pub fn log_product_sum(params: &ChannelParams, xs: &[f64]) -> f64 {
    xs.iter()
        .map(|&x| (params.lambda_h + params.gamma * x * x).ln())
        .sum()
}

/// One Monte Carlo draw of the log-product over a horizon of `t` steps.
pub fn log_product_sample(params: &ChannelParams, t: usize, stream: RandomStream) -> f64 {
    let mut sampler = stream.sampler();
    let mut acc = 0.0;
    for _ in 0..t {
        let x = sampler.normal();
        acc += (params.lambda_h + params.gamma * x * x).ln();
    }
    acc
}

/// Summary statistics of a sample.
#[derive(Debug, Clone, Copy)]
pub struct SummaryStats {
    pub mean: f64,
    pub stdev: f64,
    pub min: f64,
    pub max: f64,
}

impl SummaryStats {
    fn of(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        SummaryStats {
            mean,
            stdev: var.sqrt(),
            min: samples.iter().copied().fold(f64::INFINITY, f64::min),
            max: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Fixed-bin histogram with recorded edges (`counts.len() + 1` of them).
#[derive(Debug, Clone)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

const HISTOGRAM_BINS: usize = 50;

impl Histogram {
    /// Uniform bins spanning `[min, max]` of the sample; a degenerate span
    /// collapses to a single bin.
    fn of(samples: &[f64], summary: &SummaryStats) -> Self {
        let (lo, hi) = (summary.min, summary.max);
        if !(hi > lo) {
            return Histogram {
                edges: vec![lo, hi],
                counts: vec![samples.len() as u64],
            };
        }
        let width = (hi - lo) / HISTOGRAM_BINS as f64;
        let edges = (0..=HISTOGRAM_BINS)
            .map(|i| lo + width * i as f64)
            .collect();
        let mut counts = vec![0u64; HISTOGRAM_BINS];
        for &s in samples {
            let bin = (((s - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
            counts[bin] += 1;
        }
        Histogram { edges, counts }
    }
}

/// One row of an exceedance comparison: empirical tail frequency at `z`
/// against the analytic bound.
#[derive(Debug, Clone, Copy)]
pub struct TailCheckRow {
    pub z: f64,
    pub empirical: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Monte Carlo record of log-product draws for one channel.
#[derive(Debug, Clone)]
pub struct McReport {
    pub channel: ChannelParams,
    /// Steps per draw.
    pub horizon: usize,
    pub n_samples: usize,
    /// The raw log-product draws, in substream order.
    pub samples: Vec<f64>,
    pub summary: SummaryStats,
    pub histogram: Histogram,
    /// `E[log(lambda_h + gamma X^2)]` by quadrature, the per-step reference
    /// for the sample mean.
    pub mu_quadrature: f64,
    /// Filled in by [`empirical_tail_check`] when a tail comparison is run.
    pub exceedance: Vec<TailCheckRow>,
}

/// Draws `n_samples` independent log-products of horizon `t`. Sample `j`
/// uses the substream at offset `j` from `stream`, so the result does not
/// depend on how the draws are scheduled across threads.
pub fn mc_histogram(
    params: &ChannelParams,
    t: usize,
    n_samples: usize,
    stream: RandomStream,
) -> Result<McReport> {
    if n_samples == 0 || t == 0 {
        return Err(Error::invalid(
            "mc_histogram: horizon and sample count must be >= 1",
        ));
    }
    let samples = exec::indexed_map(n_samples, |j| {
        log_product_sample(params, t, stream.offset(j as u64))
    });
    build_report(params, t, samples)
}

/// Sequential reference path for [`mc_histogram`]; identical output.
pub fn mc_histogram_seq(
    params: &ChannelParams,
    t: usize,
    n_samples: usize,
    stream: RandomStream,
) -> Result<McReport> {
    if n_samples == 0 || t == 0 {
        return Err(Error::invalid(
            "mc_histogram: horizon and sample count must be >= 1",
        ));
    }
    let samples = exec::indexed_map_seq(n_samples, |j| {
        log_product_sample(params, t, stream.offset(j as u64))
    });
    build_report(params, t, samples)
}

fn build_report(params: &ChannelParams, t: usize, samples: Vec<f64>) -> Result<McReport> {
    let rule = QuadratureRule::gauss_hermite(DEFAULT_ORDER)?;
    let mu_quadrature = params.log_factor_mean(&rule)?;
    let summary = SummaryStats::of(&samples);
    let histogram = Histogram::of(&samples, &summary);
    Ok(McReport {
        channel: *params,
        horizon: t,
        n_samples: samples.len(),
        samples,
        summary,
        histogram,
        mu_quadrature,
        exceedance: Vec::new(),
    })
}

/// Sub-exponential parameters of the centered log-factor: the moment
/// generating function of `Y = log(c + gamma X^2) - E[...]` is dominated by
/// `exp(nu^2 lambda^2 / 2)` for `|lambda| < 1/b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBoundParams {
    pub nu: f64,
    pub b: f64,
}

impl TailBoundParams {
    pub fn new(nu: f64, b: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0 && b.is_finite() && b > 0.0) {
            return Err(Error::invalid(format!(
                "TailBoundParams: nu and b must be positive, got ({nu}, {b})"
            )));
        }
        Ok(TailBoundParams { nu, b })
    }
}

const B_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
const NU_RESOLUTION: f64 = 1e-3;
const NU_MAX: f64 = 8.0;
const LAMBDA_GRID_POINTS: usize = 101;
/// MGF grid stays strictly inside the open interval `|lambda| < 1/b`.
const LAMBDA_RANGE_FRACTION: f64 = 0.99;

/// Estimates `(nu, b)` for `Y = log(c + gamma X^2) - mu` by grid search:
/// for each candidate `b` (smallest first) the centered MGF is evaluated by
/// quadrature on a 101-point grid over `|lambda| < 1/b`, and the smallest
/// `nu` (resolution 1e-3) dominating it is accepted if it stays within the
/// search range. Smaller `b` widens the grid and so never shrinks `nu`.
pub fn estimate_subexponential_params(c: f64, gamma: f64) -> Result<TailBoundParams> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::invalid(format!(
            "estimate_subexponential_params: c must be positive, got {c}"
        )));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::invalid(format!(
            "estimate_subexponential_params: gamma must be non-negative, got {gamma}"
        )));
    }
    let rule = QuadratureRule::gauss_hermite(DEFAULT_ORDER)?;
    let mu = gauss_hermite_expectation(|x| (c + gamma * x * x).ln(), &rule)?;

    let mut diagnostics = Vec::new();
    'candidates: for &b in &B_GRID {
        let mut nu_sq_required = 0.0f64;
        for i in 0..LAMBDA_GRID_POINTS {
            let frac = (i as f64 / (LAMBDA_GRID_POINTS - 1) as f64) * 2.0 - 1.0;
            let lambda = frac * LAMBDA_RANGE_FRACTION / b;
            if lambda == 0.0 {
                continue;
            }
            let mgf = centered_mgf(c, gamma, mu, lambda, &rule);
            let m = match mgf {
                Ok(m) if m.is_finite() && m > 0.0 => m,
                _ => {
                    diagnostics.push(format!("b={b}: MGF not computable at lambda={lambda:.4}"));
                    continue 'candidates;
                }
            };
            nu_sq_required = nu_sq_required.max(2.0 * m.ln() / (lambda * lambda));
        }
        let nu = (nu_sq_required.max(0.0).sqrt() / NU_RESOLUTION).ceil() * NU_RESOLUTION;
        let nu = nu.max(NU_RESOLUTION);
        if nu <= NU_MAX {
            return TailBoundParams::new(nu, b);
        }
        diagnostics.push(format!("b={b}: required nu {nu:.3} exceeds {NU_MAX}"));
    }
    Err(Error::EstimationFailure(format!(
        "no (nu, b) on the search grid dominates the MGF: {}",
        diagnostics.join("; ")
    )))
}

/// `E[exp(lambda (log(c + gamma X^2) - mu))]` by quadrature.
pub fn centered_mgf(
    c: f64,
    gamma: f64,
    mu: f64,
    lambda: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    gauss_hermite_expectation(|x| (lambda * ((c + gamma * x * x).ln() - mu)).exp(), rule)
}

/// Sub-exponential tail bound for the centered log-product at horizon `t`:
/// Gaussian-like up to the knee `z = t nu^2 / b`, exponential past it. The
/// two branches agree at the knee.
pub fn tail_bound(z: f64, t: usize, params: &TailBoundParams) -> f64 {
    assert!(z >= 0.0, "tail_bound: z must be non-negative");
    assert!(t >= 1, "tail_bound: horizon must be >= 1");
    let t = t as f64;
    let knee = t * params.nu * params.nu / params.b;
    if z <= knee {
        (-(z * z) / (2.0 * t * params.nu * params.nu)).exp()
    } else {
        (-z / (2.0 * params.b)).exp()
    }
}

/// Compares empirical exceedance frequencies of the log-product against
/// [`tail_bound`]: for each `z`, the fraction of draws with
/// `sum >= z + t log(lambda_h + gamma)` must not exceed the bound by more
/// than three binomial standard errors.
pub fn empirical_tail_check(
    report: &McReport,
    params: &TailBoundParams,
    channel: &ChannelParams,
    z_grid: &[f64],
) -> Result<Vec<TailCheckRow>> {
    if report.channel != *channel {
        return Err(Error::invalid(format!(
            "empirical_tail_check: report was generated for channel {:?}, not {:?}",
            report.channel, channel
        )));
    }
    let t = report.horizon;
    let n = report.n_samples as f64;
    let log_mean_factor = (channel.lambda_h + channel.gamma).ln();
    z_grid
        .iter()
        .map(|&z| {
            if !(z.is_finite() && z >= 0.0) {
                return Err(Error::invalid(format!(
                    "empirical_tail_check: z must be non-negative, got {z}"
                )));
            }
            let threshold = z + t as f64 * log_mean_factor;
            let exceed = report.samples.iter().filter(|&&s| s >= threshold).count();
            let empirical = exceed as f64 / n;
            let bound = tail_bound(z, t, params);
            let allowance = 3.0 * (bound * (1.0 - bound) / n).sqrt();
            Ok(TailCheckRow {
                z,
                empirical,
                bound,
                holds: empirical <= bound + allowance,
            })
        })
        .collect()
}

/// One row of the chi-square CDF comparison.
#[derive(Debug, Clone, Copy)]
pub struct ChiSquareRow {
    pub v: f64,
    pub cdf: f64,
    pub sqrt_v: f64,
    pub holds: bool,
}

/// Verifies `CDF_{chi^2, 1 dof}(v) < sqrt(v)` strictly at each grid point.
/// The CDF is `P(X^2 <= v) = erf(sqrt(v / 2))` for standard normal `X`.
pub fn chi_square_cdf_check(v_grid: &[f64]) -> Result<Vec<ChiSquareRow>> {
    v_grid
        .iter()
        .map(|&v| {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!(
                    "chi_square_cdf_check: v must be positive, got {v}"
                )));
            }
            let cdf = erf((v / 2.0).sqrt());
            let sqrt_v = v.sqrt();
            Ok(ChiSquareRow {
                v,
                cdf,
                sqrt_v,
                holds: cdf < sqrt_v,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn channel(lambda_h: f64, gamma: f64) -> ChannelParams {
        ChannelParams::new(lambda_h, gamma).unwrap()
    }

    #[test]
    fn zero_gamma_log_product_is_deterministic() {
        let params = channel(0.9, 0.0);
        let s = log_product_sample(&params, 1000, RandomStream::new(1, 0));
        assert_relative_eq!(s, 1000.0 * 0.9f64.ln(), max_relative = 1e-13);
    }

    #[test]
    fn forced_zero_input_gives_single_log_factor() {
        let params = channel(0.8, 0.3);
        assert_eq!(log_product_sum(&params, &[0.0]), 0.8f64.ln());
    }

    #[test]
    fn sample_mean_tracks_quadrature_mean() {
        let params = channel(0.9, 0.099);
        let (t, n) = (2000, 2000);
        let report = mc_histogram(&params, t, n, RandomStream::new(3, 0)).unwrap();
        let expected = t as f64 * report.mu_quadrature;
        let se = report.summary.stdev / (n as f64).sqrt();
        assert!(
            (report.summary.mean - expected).abs() < 4.0 * se,
            "mean {} vs {expected} (se {se})",
            report.summary.mean
        );
    }

    #[test]
    fn histogram_counts_cover_all_samples() {
        let params = channel(0.5, 0.499);
        let report = mc_histogram(&params, 500, 777, RandomStream::new(4, 0)).unwrap();
        assert_eq!(report.histogram.counts.iter().sum::<u64>(), 777);
        assert_eq!(report.histogram.edges.len(), report.histogram.counts.len() + 1);
    }

    #[test]
    fn single_sample_report_is_degenerate() {
        let params = channel(0.9, 0.099);
        let report = mc_histogram(&params, 100, 1, RandomStream::new(5, 0)).unwrap();
        assert_eq!(report.summary.mean, report.samples[0]);
        assert_eq!(report.histogram.counts, vec![1]);
    }

    #[test]
    fn parallel_and_sequential_reports_are_identical() {
        let params = channel(0.9, 0.099);
        let a = mc_histogram(&params, 200, 64, RandomStream::new(6, 0)).unwrap();
        let b = mc_histogram_seq(&params, 200, 64, RandomStream::new(6, 0)).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.histogram.counts, b.histogram.counts);
    }

    #[test]
    fn degenerate_variable_needs_minimal_nu() {
        let params = estimate_subexponential_params(0.9, 0.0).unwrap();
        assert_eq!(params.nu, NU_RESOLUTION);
        assert_eq!(params.b, B_GRID[0]);
    }

    fn assert_mgf_dominated(c: f64, gamma: f64) {
        let rule = QuadratureRule::gauss_hermite(DEFAULT_ORDER).unwrap();
        let mu = gauss_hermite_expectation(|x| (c + gamma * x * x).ln(), &rule).unwrap();
        let params = estimate_subexponential_params(c, gamma).unwrap();
        for i in 0..LAMBDA_GRID_POINTS {
            let frac = (i as f64 / (LAMBDA_GRID_POINTS - 1) as f64) * 2.0 - 1.0;
            let lambda = frac * LAMBDA_RANGE_FRACTION / params.b;
            let m = centered_mgf(c, gamma, mu, lambda, &rule).unwrap();
            let dominating = (params.nu * params.nu * lambda * lambda / 2.0).exp();
            assert!(
                m <= dominating + 1e-9,
                "(c={c}, gamma={gamma}): MGF {m} exceeds {dominating} at lambda {lambda}"
            );
        }
    }

    #[test]
    fn estimated_params_dominate_the_mgf() {
        assert_mgf_dominated(0.9, 0.099);
        assert_mgf_dominated(0.5, 0.499);
    }

    #[test]
    fn jensen_relation_between_log_mean_and_mean_factor() {
        let rule = QuadratureRule::gauss_hermite(DEFAULT_ORDER).unwrap();
        for (l, g) in [(0.9, 0.099), (0.5, 0.499), (0.3, 0.1), (1.0, 2.0)] {
            let mu = channel(l, g).log_factor_mean(&rule).unwrap();
            assert!(
                mu.exp() <= l + g + 1e-12,
                "channel ({l}, {g}): e^mu = {} > {}",
                mu.exp(),
                l + g
            );
        }
    }

    #[test]
    fn tail_bound_at_zero_is_one() {
        let params = TailBoundParams::new(0.2, 0.5).unwrap();
        assert_eq!(tail_bound(0.0, 100, &params), 1.0);
    }

    #[test]
    fn tail_bound_branches_agree_at_the_knee() {
        let params = TailBoundParams::new(0.37, 0.5).unwrap();
        let t = 1234;
        let knee = t as f64 * params.nu * params.nu / params.b;
        let below = tail_bound(knee, t, &params);
        let above = tail_bound(knee * (1.0 + 1e-12), t, &params);
        assert_relative_eq!(below, above, max_relative = 1e-11);
        assert_relative_eq!(
            below,
            (-(t as f64) * params.nu * params.nu / (2.0 * params.b * params.b)).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn tail_bound_is_non_increasing() {
        let params = TailBoundParams::new(0.15, 0.5).unwrap();
        let t = 10_000;
        let mut prev = tail_bound(0.0, t, &params);
        for i in 1..200 {
            let z = i as f64 * 2.5;
            let bound = tail_bound(z, t, &params);
            assert!(bound <= prev + 1e-15, "bound increased at z={z}");
            prev = bound;
        }
    }

    #[test]
    fn tail_check_trivial_rows_hold() {
        let params = channel(0.9, 0.099);
        let report = mc_histogram(&params, 300, 500, RandomStream::new(8, 0)).unwrap();
        let bound_params = estimate_subexponential_params(0.9, 0.099).unwrap();
        let rows = empirical_tail_check(
            &report,
            &bound_params,
            &params,
            &[0.0, 1e6],
        )
        .unwrap();
        // z = 0: bound is 1, nothing can exceed it.
        assert_eq!(rows[0].bound, 1.0);
        assert!(rows[0].holds);
        // z far beyond the sample maximum: empirical mass is zero.
        assert_eq!(rows[1].empirical, 0.0);
        assert!(rows[1].holds);
    }

    #[test]
    fn tail_check_rejects_mismatched_channel() {
        let params = channel(0.9, 0.099);
        let report = mc_histogram(&params, 100, 50, RandomStream::new(9, 0)).unwrap();
        let bound_params = TailBoundParams::new(0.2, 0.5).unwrap();
        let other = channel(0.5, 0.499);
        assert!(empirical_tail_check(&report, &bound_params, &other, &[1.0]).is_err());
    }

    /// Independent oracle: chi-square(1) CDF by Simpson integration of the
    /// substituted density, CDF(v) = int_0^sqrt(v) 2 exp(-u^2/2)/sqrt(2 pi) du.
    fn chi_square_cdf_simpson(v: f64, intervals: usize) -> f64 {
        let upper = v.sqrt();
        let h = upper / intervals as f64;
        let f = |u: f64| 2.0 * (-u * u / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut acc = f(0.0) + f(upper);
        for i in 1..intervals {
            let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += weight * f(i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn chi_square_cdf_matches_simpson_oracle() {
        for v in [1e-6, 0.01, 0.5, 1.0, 3.0, 10.0] {
            let row = &chi_square_cdf_check(&[v]).unwrap()[0];
            let oracle = chi_square_cdf_simpson(v, 2000);
            assert_relative_eq!(row.cdf, oracle, max_relative = 1e-10);
        }
    }

    // The erf backend is accurate to about 1e-10 here, which is orders of
    // magnitude below the margins the inequality check cares about.
    #[test]
    fn chi_square_cdf_known_values() {
        let rows = chi_square_cdf_check(&[1.0, 10.0]).unwrap();
        assert_relative_eq!(rows[0].cdf, 0.682_689_492_137_086, max_relative = 1e-9);
        assert!(rows[0].holds);
        assert_relative_eq!(rows[1].cdf, 0.998_434_597_741_997_5, max_relative = 1e-9);
        assert!(rows[1].holds);
    }

    #[test]
    fn chi_square_cdf_small_v_asymptotic() {
        // CDF(v) ~ sqrt(2 v / pi) as v -> 0, i.e. about 0.7979 sqrt(v).
        let v = 1e-6;
        let row = &chi_square_cdf_check(&[v]).unwrap()[0];
        let ratio = row.cdf / row.sqrt_v;
        assert_relative_eq!(ratio, (2.0 / std::f64::consts::PI).sqrt(), max_relative = 1e-6);
        assert!(row.holds);
    }

    #[test]
    fn channel_validation() {
        assert!(ChannelParams::new(0.0, 0.1).is_err());
        assert!(ChannelParams::new(1.1, 0.1).is_err());
        assert!(ChannelParams::new(0.5, -0.1).is_err());
        assert!(channel(0.9, 0.099).is_contractive());
        assert!(!channel(0.9, 0.2).is_contractive());
    }
}
