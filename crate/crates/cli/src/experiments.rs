//! The experiments behind each CLI subcommand. Every experiment is a pure
//! function of its configuration: all randomness flows through substreams
//! derived from the config seed, so reruns produce identical bundles.

use lrdlab_core::nalgebra::DVector;
use serde_json::{json, Value};

use lrdlab_core::attention::{attention_lrd, AttentionParams, Masking};
use lrdlab_core::error::Error as CoreError;
use lrdlab_core::exec;
use lrdlab_core::interaction::{interaction_scan, interaction_unroll, InteractionParams};
use lrdlab_core::lrd::{
    check_decay_bound, interior_local_max, lrd_finite_difference, lrd_interaction_closed_form,
    lrd_profile, lrd_ssm_closed_form, LrdModel, LrdQuery, LrdValue, DEFAULT_FD_STEP,
};
use lrdlab_core::numerics::matrix::SquareMatrix;
use lrdlab_core::numerics::quadrature::{QuadratureRule, DEFAULT_ORDER};
use lrdlab_core::numerics::{random_stable_matrix, RandomStream};
use lrdlab_core::ssm::{ContinuousSsm, StepPolicy};
use lrdlab_core::stability::{
    centered_mgf, chi_square_cdf_check, empirical_tail_check, estimate_subexponential_params,
    mc_histogram, ChannelParams,
};

use crate::bundle::{fmt_f64, ResultBundle, Table};
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::CliError;
use crate::svg;

/// Eigenvalue interval for every randomly drawn stable transition
/// generator.
const EIG_RANGE: (f64, f64) = (-1.0, -0.05);
/// Instances per verification sweep.
const SWEEP_INSTANCES: usize = 100;
/// Instances for the scan/unroll equivalence sweep.
const EQUIVALENCE_INSTANCES: usize = 200;
/// Gaps covered by the decay-bound check.
const DECAY_GAPS: usize = 64;
/// Exceedance grid for the tail-bound comparison.
const Z_GRID: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];
/// Profiles count as non-monotone when an interior peak occurs past this gap.
const PEAK_MIN_GAP: usize = 11;

// Substream purposes within one seed.
const STREAM_MATRIX: u64 = 0;
const STREAM_PARAMS: u64 = 1;
const STREAM_INPUTS: u64 = 2;

pub fn run_experiment(
    config: &ExperimentConfig,
    fault: Option<&str>,
    filter: Option<&str>,
) -> Result<ResultBundle, CliError> {
    if fault.is_some() && config.experiment != ExperimentKind::OracleSuite {
        return Err(CliError::Config(
            "--inject-fault only applies to the oracle-suite experiment".into(),
        ));
    }
    if filter.is_some() && config.experiment != ExperimentKind::OracleSuite {
        return Err(CliError::Config(
            "--filter only applies to the oracle-suite experiment".into(),
        ));
    }
    match config.experiment {
        ExperimentKind::LrdProfile => lrd_profile_experiment(config),
        ExperimentKind::DecayCheck => decay_check_experiment(config),
        ExperimentKind::AttentionLrd => attention_lrd_experiment(config),
        ExperimentKind::Theorem1Equivalence => theorem1_experiment(config),
        ExperimentKind::StabilityHistogram => stability_histogram_experiment(config),
        ExperimentKind::TailCheck => tail_check_experiment(config),
        ExperimentKind::OracleSuite => oracle_suite_experiment(config, fault, filter),
    }
}

struct ProfileInstance {
    params: InteractionParams,
    inputs: Vec<f64>,
    h0: DVector<f64>,
    lambda1: f64,
}

/// Profile-experiment instance: stable generator with eigenvalues in
/// [-1, -0.05], unit step, forcing and interaction vectors with entries
/// N(0, 1/H), standard normal inputs.
fn profile_instance(
    seed: u64,
    h: usize,
    seq_len: usize,
    g_scale: f64,
) -> Result<ProfileInstance, CoreError> {
    let stable = random_stable_matrix(h, EIG_RANGE, RandomStream::new(seed, STREAM_MATRIX))?;
    let lambda1 = stable
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut sampler = RandomStream::new(seed, STREAM_PARAMS).sampler();
    let scale = 1.0 / (h as f64).sqrt();
    let b = DVector::from_fn(h, |_, _| sampler.normal() * scale);
    let c = DVector::zeros(h);
    let g = DVector::from_fn(h, |_, _| sampler.normal() * scale * g_scale);
    let w = DVector::from_fn(h, |_, _| sampler.normal() * scale);
    let base = ContinuousSsm::new(stable.matrix, b, c, StepPolicy::Fixed(1.0))?;
    let params = InteractionParams::new(base, g, w)?;
    let inputs = RandomStream::new(seed, STREAM_INPUTS)
        .sampler()
        .normals(seq_len);
    let h0 = DVector::zeros(h);
    Ok(ProfileInstance {
        params,
        inputs,
        h0,
        lambda1,
    })
}

fn lrd_profile_experiment(config: &ExperimentConfig) -> Result<ResultBundle, CliError> {
    let mut bundle = ResultBundle::default();
    let t_idx = config.t_index();
    let inst = profile_instance(config.seed, config.h, config.seq_len, config.g_scale)?;

    let ssm_norms = lrd_profile(
        &LrdModel::Ssm {
            model: &inst.params.base,
            inputs: &inst.inputs,
            h0: &inst.h0,
        },
        t_idx,
        config.k_max,
        false,
    )?
    .norms;
    let interaction_norms = lrd_profile(
        &LrdModel::Interaction {
            params: &inst.params,
            inputs: &inst.inputs,
            h0: &inst.h0,
        },
        t_idx,
        config.k_max,
        false,
    )?
    .norms;

    let mut table = Table::new("profile", &["k", "norm_ssm", "norm_interaction"], config.k_max);
    for k in 1..=config.k_max {
        table.push(vec![
            k.to_string(),
            fmt_f64(ssm_norms[k]),
            fmt_f64(interaction_norms[k]),
        ]);
    }
    bundle.tables.push(table);

    // Seed sweep for a profile with an interior peak past gap 10.
    let sweep: Vec<Result<Option<(u64, usize)>, CoreError>> =
        exec::indexed_map(config.sweep_seeds, |s| {
            let seed = config.seed.wrapping_add(s as u64);
            let inst = profile_instance(seed, config.h, config.seq_len, config.g_scale)?;
            let profile = lrd_profile(
                &LrdModel::Interaction {
                    params: &inst.params,
                    inputs: &inst.inputs,
                    h0: &inst.h0,
                },
                t_idx,
                config.k_max,
                false,
            )?;
            Ok(interior_local_max(&profile.norms, PEAK_MIN_GAP).map(|k| (seed, k)))
        });
    let mut witness = None;
    for outcome in sweep {
        if let Some(found) = outcome? {
            witness = Some(found);
            break;
        }
    }
    if witness.is_none() {
        bundle.warn(format!(
            "no interaction profile with an interior peak past gap 10 within {} seeds",
            config.sweep_seeds
        ));
    }

    bundle.meta.insert("lambda1".into(), json!(inst.lambda1));
    bundle.meta.insert(
        "sweep".into(),
        json!({
            "seeds_tried": config.sweep_seeds,
            "first_nonmonotone_seed": witness.map(|(s, _)| s),
            "peak_gap": witness.map(|(_, k)| k),
        }),
    );

    let log10 = |values: &[f64]| -> Vec<f64> {
        values[1..]
            .iter()
            .map(|v| v.max(1e-300).log10())
            .collect()
    };
    let ssm_log = log10(&ssm_norms);
    let int_log = log10(&interaction_norms);
    bundle.svgs.push((
        "profile".into(),
        svg::line_plot(
            "derivative norm by gap",
            "gap k",
            "log10 norm",
            1,
            &[
                svg::Series {
                    label: "state-space",
                    values: &ssm_log,
                },
                svg::Series {
                    label: "interaction",
                    values: &int_log,
                },
            ],
        ),
    ));
    Ok(bundle)
}

fn stability_histogram_experiment(config: &ExperimentConfig) -> Result<ResultBundle, CliError> {
    let mut bundle = ResultBundle::default();
    let channels = config.channels();
    let multi = channels.len() > 1;
    let mut channel_meta = Vec::new();

    for (c, spec) in channels.iter().enumerate() {
        let channel = ChannelParams::new(spec.lambda_h, spec.gamma)?;
        if !channel.is_contractive() {
            bundle.warn(format!(
                "channel {c} ({}, {}) has lambda_h + gamma >= 1; products grow in expectation",
                spec.lambda_h, spec.gamma
            ));
        }
        let stream = RandomStream::new(config.seed, (c as u64) << 32);
        let report = mc_histogram(&channel, config.horizon, config.n_samples, stream)?;

        let prefix = if multi {
            format!("channel_{c}/")
        } else {
            String::new()
        };
        let bins = report.histogram.counts.len();
        let mut table = Table::new(
            format!("{prefix}histogram"),
            &["bin_left", "bin_right", "count"],
            bins,
        );
        for (i, &count) in report.histogram.counts.iter().enumerate() {
            table.push(vec![
                fmt_f64(report.histogram.edges[i]),
                fmt_f64(report.histogram.edges[i + 1]),
                count.to_string(),
            ]);
        }
        bundle.tables.push(table);

        let negative = report.samples.iter().filter(|&&s| s < 0.0).count();
        channel_meta.push(json!({
            "lambda_h": spec.lambda_h,
            "gamma": spec.gamma,
            "horizon": report.horizon,
            "n_samples": report.n_samples,
            "mu_quadrature": report.mu_quadrature,
            "expected_sum": report.horizon as f64 * report.mu_quadrature,
            "mean": report.summary.mean,
            "stdev": report.summary.stdev,
            "min": report.summary.min,
            "max": report.summary.max,
            "negative_count": negative,
        }));

        bundle.svgs.push((
            format!("{prefix}histogram"),
            svg::histogram(
                &format!(
                    "log-product over {} steps (lambda_h={}, gamma={})",
                    report.horizon, spec.lambda_h, spec.gamma
                ),
                "sum of log factors",
                &report.histogram.edges,
                &report.histogram.counts,
            ),
        ));
    }
    bundle.meta.insert("channels".into(), Value::Array(channel_meta));
    Ok(bundle)
}

fn tail_check_experiment(config: &ExperimentConfig) -> Result<ResultBundle, CliError> {
    let mut bundle = ResultBundle::default();
    let channels = config.channels();
    let multi = channels.len() > 1;
    let mut channel_meta = Vec::new();

    for (c, spec) in channels.iter().enumerate() {
        let channel = ChannelParams::new(spec.lambda_h, spec.gamma)?;
        let stream = RandomStream::new(config.seed, (c as u64) << 32);
        let report = mc_histogram(&channel, config.horizon, config.n_samples, stream)?;
        let params = estimate_subexponential_params(spec.lambda_h, spec.gamma)?;
        let rows = empirical_tail_check(&report, &params, &channel, &Z_GRID)?;

        let prefix = if multi {
            format!("channel_{c}/")
        } else {
            String::new()
        };
        let mut table = Table::new(
            format!("{prefix}tailcheck"),
            &["z", "empirical", "bound", "holds"],
            rows.len(),
        );
        for row in &rows {
            if !row.holds {
                bundle.failed_checks += 1;
            }
            table.push(vec![
                fmt_f64(row.z),
                fmt_f64(row.empirical),
                fmt_f64(row.bound),
                row.holds.to_string(),
            ]);
        }
        bundle.tables.push(table);

        channel_meta.push(json!({
            "lambda_h": spec.lambda_h,
            "gamma": spec.gamma,
            "nu": params.nu,
            "b": params.b,
            "knee": config.horizon as f64 * params.nu * params.nu / params.b,
            "mu_quadrature": report.mu_quadrature,
        }));
    }
    bundle.meta.insert("channels".into(), Value::Array(channel_meta));
    Ok(bundle)
}

/// Random fixed-step instance for the oracle sweeps: dimensions start at 2
/// so derivative norms stay clear of the finite-difference rounding floor.
fn sweep_ssm(seed: u64) -> Result<(ContinuousSsm, Vec<f64>, DVector<f64>, usize, usize), CoreError>
{
    let mut dims = RandomStream::new(seed, 100).sampler();
    let h = 2 + (dims.uniform() * 7.0) as usize;
    let k = (dims.uniform() * 17.0) as usize;
    let t_len = (k + 2 + (dims.uniform() * (32 - k - 1) as f64) as usize).min(32);
    let t = (dims.uniform() * (t_len - k) as f64) as usize;
    let delta = dims.uniform_in(0.1, 0.5);

    let stable = random_stable_matrix(h, EIG_RANGE, RandomStream::new(seed, 101))?;
    let mut sampler = RandomStream::new(seed, 102).sampler();
    let b = DVector::from_fn(h, |_, _| sampler.normal());
    let c = DVector::from_fn(h, |_, _| sampler.normal());
    let model = ContinuousSsm::new(stable.matrix, b, c, StepPolicy::Fixed(delta))?;
    let inputs = RandomStream::new(seed, 103).sampler().normals(t_len);
    let h0 = DVector::from_fn(h, |_, _| sampler.normal() * 0.5);
    Ok((model, inputs, h0, t, k))
}

fn sweep_interaction(
    seed: u64,
    damping: f64,
) -> Result<(InteractionParams, Vec<f64>, DVector<f64>, usize, usize), CoreError> {
    let (base, inputs, h0, t, k) = sweep_ssm(seed)?;
    let h = base.dim();
    let mut sampler = RandomStream::new(seed, 104).sampler();
    let scale = damping / (h as f64).sqrt();
    let g = DVector::from_fn(h, |_, _| sampler.normal() * scale);
    let w = DVector::from_fn(h, |_, _| sampler.normal() * scale);
    Ok((InteractionParams::new(base, g, w)?, inputs, h0, t, k))
}

struct CheckOutcome {
    name: &'static str,
    instances: usize,
    max_err: f64,
    threshold: f64,
    passed: bool,
}

fn check_eq9(config: &ExperimentConfig, fault: bool) -> Result<CheckOutcome, CoreError> {
    let rels = exec::indexed_map(SWEEP_INSTANCES, |i| -> Result<f64, CoreError> {
        let seed = config.seed.wrapping_add(i as u64);
        let (model, inputs, h0, t, k) = sweep_ssm(seed)?;
        let steps = model.discretize_sequence(&inputs)?;
        let mut closed = lrd_ssm_closed_form(&steps, t, k)?;
        if fault {
            closed = -closed;
        }
        let query = LrdQuery {
            model: LrdModel::Ssm {
                model: &model,
                inputs: &inputs,
                h0: &h0,
            },
            t,
            k,
        };
        let fd = lrd_finite_difference(&query, DEFAULT_FD_STEP)?;
        Ok(LrdValue::Vector(closed).relative_deviation(&fd))
    });
    let mut max_err = 0.0f64;
    for rel in rels {
        max_err = max_err.max(rel?);
    }
    Ok(CheckOutcome {
        name: "eq9-vs-fd",
        instances: SWEEP_INSTANCES,
        max_err,
        threshold: 1e-5,
        passed: max_err < 1e-5,
    })
}

fn check_theorem2(config: &ExperimentConfig) -> Result<CheckOutcome, CoreError> {
    let rels = exec::indexed_map(SWEEP_INSTANCES, |i| -> Result<f64, CoreError> {
        let seed = config.seed.wrapping_add(i as u64);
        let (params, inputs, h0, t, k) = sweep_interaction(seed, 1.0)?;
        let closed =
            LrdValue::Vector(lrd_interaction_closed_form(&params, &inputs, &h0, t, k)?);
        let query = LrdQuery {
            model: LrdModel::Interaction {
                params: &params,
                inputs: &inputs,
                h0: &h0,
            },
            t,
            k,
        };
        let fd = lrd_finite_difference(&query, DEFAULT_FD_STEP)?;
        Ok(closed.relative_deviation(&fd))
    });
    let mut max_err = 0.0f64;
    for rel in rels {
        max_err = max_err.max(rel?);
    }
    Ok(CheckOutcome {
        name: "theorem2-vs-fd",
        instances: SWEEP_INSTANCES,
        max_err,
        threshold: 1e-5,
        passed: max_err < 1e-5,
    })
}

fn check_theorem1(config: &ExperimentConfig) -> Result<CheckOutcome, CoreError> {
    let devs = exec::indexed_map(EQUIVALENCE_INSTANCES, |i| -> Result<f64, CoreError> {
        let seed = config.seed.wrapping_add(i as u64);
        let mut dims = RandomStream::new(seed, 130).sampler();
        let h = 1 + (dims.uniform() * 8.0) as usize;
        let t_len = 1 + (dims.uniform() * 64.0) as usize;
        let delta = dims.uniform_in(0.1, 0.8);
        let stable = random_stable_matrix(h, EIG_RANGE, RandomStream::new(seed, 131))?;
        let mut sampler = RandomStream::new(seed, 132).sampler();
        // Damped interaction keeps trajectories O(10) over 64 steps, where
        // an absolute comparison is meaningful.
        let scale = 0.25 / (h as f64).sqrt();
        let b = DVector::from_fn(h, |_, _| sampler.normal());
        let c = DVector::from_fn(h, |_, _| sampler.normal());
        let base = ContinuousSsm::new(stable.matrix, b, c, StepPolicy::Fixed(delta))?;
        let g = DVector::from_fn(h, |_, _| sampler.normal() * scale);
        let w = DVector::from_fn(h, |_, _| sampler.normal() * scale);
        let params = InteractionParams::new(base, g, w)?;
        let inputs = RandomStream::new(seed, 133).sampler().normals(t_len);
        let h0 = DVector::from_fn(h, |_, _| sampler.normal());
        let scan = interaction_scan(&params, &inputs, &h0)?;
        let unroll = interaction_unroll(&params, &inputs, &h0)?;
        Ok(scan
            .states
            .iter()
            .zip(&unroll.states)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max))
    });
    let mut max_err = 0.0f64;
    for dev in devs {
        max_err = max_err.max(dev?);
    }
    Ok(CheckOutcome {
        name: "theorem1-equivalence",
        instances: EQUIVALENCE_INSTANCES,
        max_err,
        threshold: 1e-10,
        passed: max_err < 1e-10,
    })
}

fn check_decay(config: &ExperimentConfig) -> Result<CheckOutcome, CoreError> {
    let outcomes = exec::indexed_map(SWEEP_INSTANCES, |i| -> Result<usize, CoreError> {
        let seed = config.seed.wrapping_add(i as u64);
        let mut dims = RandomStream::new(seed, 120).sampler();
        let h = 2 + (dims.uniform() * 7.0) as usize;
        let delta = dims.uniform_in(0.1, 1.0);
        let stable = random_stable_matrix(h, EIG_RANGE, RandomStream::new(seed, 121))?;
        let lambda1 = stable
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sampler = RandomStream::new(seed, 122).sampler();
        let b = DVector::from_fn(h, |_, _| sampler.normal());
        let c = DVector::zeros(h);
        let model = ContinuousSsm::new(stable.matrix, b, c, StepPolicy::Fixed(delta))?;
        let t = 2usize;
        let inputs = RandomStream::new(seed, 123)
            .sampler()
            .normals(t + DECAY_GAPS + 2);
        let steps = model.discretize_sequence(&inputs)?;
        Ok(check_decay_bound(&steps, t, DECAY_GAPS, lambda1)?
            .iter()
            .filter(|row| !row.holds)
            .count())
    });
    let mut violations = 0usize;
    for outcome in outcomes {
        violations += outcome?;
    }
    Ok(CheckOutcome {
        name: "decay-check",
        instances: SWEEP_INSTANCES,
        max_err: violations as f64,
        threshold: 0.0,
        passed: violations == 0,
    })
}

fn check_tail(config: &ExperimentConfig) -> Result<CheckOutcome, CoreError> {
    let rule = QuadratureRule::gauss_hermite(DEFAULT_ORDER)?;
    let mut worst_violation = 0.0f64;
    let mut passed = true;
    for (c, spec) in config.channels().iter().enumerate() {
        let channel = ChannelParams::new(spec.lambda_h, spec.gamma)?;
        let stream = RandomStream::new(config.seed, (c as u64) << 32);
        let report = mc_histogram(&channel, config.horizon, config.n_samples, stream)?;
        let params = estimate_subexponential_params(spec.lambda_h, spec.gamma)?;

        let mu = channel.log_factor_mean(&rule)?;
        for i in 0..101 {
            let lambda = ((i as f64 / 100.0) * 2.0 - 1.0) * 0.99 / params.b;
            if lambda == 0.0 {
                continue;
            }
            let m = centered_mgf(spec.lambda_h, spec.gamma, mu, lambda, &rule)?;
            let excess = m - (params.nu * params.nu * lambda * lambda / 2.0).exp();
            worst_violation = worst_violation.max(excess);
            passed &= excess <= 1e-9;
        }
        for row in empirical_tail_check(&report, &params, &channel, &Z_GRID)? {
            passed &= row.holds;
            worst_violation = worst_violation.max(row.empirical - row.bound);
        }
    }
    Ok(CheckOutcome {
        name: "tail-check",
        instances: config.channels().len(),
        max_err: worst_violation,
        threshold: 1e-9,
        passed,
    })
}

fn check_cdf(_config: &ExperimentConfig) -> Result<CheckOutcome, CoreError> {
    let points = 120;
    let grid: Vec<f64> = (0..points)
        .map(|i| 10f64.powf(-8.0 + 11.0 * i as f64 / (points - 1) as f64))
        .collect();
    let rows = chi_square_cdf_check(&grid)?;
    let min_margin = rows
        .iter()
        .map(|r| r.sqrt_v - r.cdf)
        .fold(f64::INFINITY, f64::min);
    Ok(CheckOutcome {
        name: "cdf-check",
        instances: points,
        max_err: -min_margin,
        threshold: 0.0,
        passed: rows.iter().all(|r| r.holds) && min_margin > 0.0,
    })
}

const SUITE_CHECKS: [&str; 6] = [
    "eq9-vs-fd",
    "theorem2-vs-fd",
    "theorem1-equivalence",
    "decay-check",
    "tail-check",
    "cdf-check",
];

fn oracle_suite_experiment(
    config: &ExperimentConfig,
    fault: Option<&str>,
    filter: Option<&str>,
) -> Result<ResultBundle, CliError> {
    let fault_eq9 = match fault {
        None => false,
        Some("eq9-sign") => true,
        Some(other) => {
            return Err(CliError::Config(format!(
                "unknown fault {other:?}; known faults: eq9-sign"
            )))
        }
    };
    if let Some(name) = filter {
        if !SUITE_CHECKS.contains(&name) {
            return Err(CliError::Config(format!(
                "unknown check {name:?}; known checks: {}",
                SUITE_CHECKS.join(", ")
            )));
        }
    }
    let selected = |name: &str| filter.is_none_or(|f| f == name);

    let mut outcomes = Vec::new();
    if selected("eq9-vs-fd") {
        outcomes.push(check_eq9(config, fault_eq9)?);
    }
    if selected("theorem2-vs-fd") {
        outcomes.push(check_theorem2(config)?);
    }
    if selected("theorem1-equivalence") {
        outcomes.push(check_theorem1(config)?);
    }
    if selected("decay-check") {
        outcomes.push(check_decay(config)?);
    }
    if selected("tail-check") {
        outcomes.push(check_tail(config)?);
    }
    if selected("cdf-check") {
        outcomes.push(check_cdf(config)?);
    }

    let mut bundle = ResultBundle::default();
    let mut table = Table::new(
        "verification",
        &["check", "instances", "max_err", "threshold", "passed"],
        outcomes.len(),
    );
    for outcome in &outcomes {
        if !outcome.passed {
            bundle.failed_checks += 1;
        }
        table.push(vec![
            outcome.name.to_string(),
            outcome.instances.to_string(),
            fmt_f64(outcome.max_err),
            fmt_f64(outcome.threshold),
            outcome.passed.to_string(),
        ]);
        println!(
            "check {:<22} {}",
            outcome.name,
            if outcome.passed { "pass" } else { "FAIL" }
        );
    }
    bundle.tables.push(table);
    bundle
        .meta
        .insert("checks_run".into(), json!(outcomes.len()));
    Ok(bundle)
}

fn decay_check_experiment(config: &ExperimentConfig) -> Result<ResultBundle, CliError> {
    let mut bundle = ResultBundle::default();
    let mut table = Table::new(
        "decaycheck",
        &["instance", "k", "lhs", "rhs", "holds"],
        SWEEP_INSTANCES * (DECAY_GAPS + 1),
    );
    let per_instance = exec::indexed_map(SWEEP_INSTANCES, |i| -> Result<_, CoreError> {
        let seed = config.seed.wrapping_add(i as u64);
        let mut dims = RandomStream::new(seed, 120).sampler();
        let h = 2 + (dims.uniform() * 7.0) as usize;
        let delta = dims.uniform_in(0.1, 1.0);
        let stable = random_stable_matrix(h, EIG_RANGE, RandomStream::new(seed, 121))?;
        let lambda1 = stable
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sampler = RandomStream::new(seed, 122).sampler();
        let b = DVector::from_fn(h, |_, _| sampler.normal());
        let c = DVector::zeros(h);
        let model = ContinuousSsm::new(stable.matrix, b, c, StepPolicy::Fixed(delta))?;
        let t = 2usize;
        let inputs = RandomStream::new(seed, 123)
            .sampler()
            .normals(t + DECAY_GAPS + 2);
        let steps = model.discretize_sequence(&inputs)?;
        check_decay_bound(&steps, t, DECAY_GAPS, lambda1)
    });
    for (i, rows) in per_instance.into_iter().enumerate() {
        for row in rows? {
            if !row.holds {
                bundle.failed_checks += 1;
            }
            table.push(vec![
                i.to_string(),
                row.k.to_string(),
                fmt_f64(row.lhs),
                fmt_f64(row.rhs),
                row.holds.to_string(),
            ]);
        }
    }
    bundle.tables.push(table);
    Ok(bundle)
}

fn attention_lrd_experiment(config: &ExperimentConfig) -> Result<ResultBundle, CliError> {
    let mut bundle = ResultBundle::default();
    let mut table = Table::new(
        "attention",
        &["instance", "t", "k", "rel_err", "holds"],
        SWEEP_INSTANCES,
    );
    let rows = exec::indexed_map(SWEEP_INSTANCES, |i| -> Result<_, CoreError> {
        let seed = config.seed.wrapping_add(i as u64);
        let mut dims = RandomStream::new(seed, 110).sampler();
        let d = 1 + (dims.uniform() * config.d.min(4) as f64) as usize;
        let t_len = 1 + (dims.uniform() * 8.0) as usize;
        let k = (dims.uniform() * t_len as f64) as usize;
        let t = (dims.uniform() * (t_len - k) as f64) as usize;

        let mut sampler = RandomStream::new(seed, 111).sampler();
        let scale = 1.0 / (d as f64).sqrt();
        let mut mat = || SquareMatrix::from_fn(d, d, |_, _| sampler.normal() * scale);
        let params =
            AttentionParams::new(mat(), mat(), mat(), AttentionParams::default_beta(d))?;
        let inputs: Vec<DVector<f64>> = (0..t_len)
            .map(|_| DVector::from_fn(d, |_, _| sampler.normal()))
            .collect();
        let masking = if i % 2 == 0 { Masking::Full } else { Masking::Causal };
        let closed = LrdValue::Jacobian(attention_lrd(&inputs, &params, masking, t, k)?);
        let query = LrdQuery {
            model: LrdModel::Attention {
                params: &params,
                masking,
                inputs: &inputs,
            },
            t,
            k,
        };
        let fd = lrd_finite_difference(&query, DEFAULT_FD_STEP)?;
        Ok((t, k, closed.relative_deviation(&fd)))
    });
    let mut max_rel = 0.0f64;
    for (i, row) in rows.into_iter().enumerate() {
        let (t, k, rel) = row?;
        let holds = rel < 1e-6;
        if !holds {
            bundle.failed_checks += 1;
        }
        max_rel = max_rel.max(rel);
        table.push(vec![
            i.to_string(),
            t.to_string(),
            k.to_string(),
            fmt_f64(rel),
            holds.to_string(),
        ]);
    }
    bundle.tables.push(table);
    bundle.meta.insert("max_rel_err".into(), json!(max_rel));
    Ok(bundle)
}

fn theorem1_experiment(config: &ExperimentConfig) -> Result<ResultBundle, CliError> {
    let mut bundle = ResultBundle::default();
    let outcome = check_theorem1(config)?;
    let mut table = Table::new(
        "theorem1",
        &["instances", "max_abs_dev", "threshold", "passed"],
        1,
    );
    if !outcome.passed {
        bundle.failed_checks += 1;
    }
    table.push(vec![
        outcome.instances.to_string(),
        fmt_f64(outcome.max_err),
        fmt_f64(outcome.threshold),
        outcome.passed.to_string(),
    ]);
    bundle.tables.push(table);
    bundle.meta.insert("max_abs_dev".into(), json!(outcome.max_err));
    Ok(bundle)
}
