//! One line per acceptance criterion; exits non-zero if any fails.

use std::time::{Duration, Instant};

use blindbounds::audit::{
    approximation_audit, birkhoff_audit, facts_audit, hull_bound_audit, overlap_audit, rigidity_audit, AuditOutcome,
    APPROXIMATION_CONSTANT,
};
use blindbounds::bounds::{pinskerlb_chain, separation_epsilon, separation_pipeline};
use blindbounds::defect::{channel_joint, grid_oracle, minimize_defect};
use blindbounds::info::{conditional_entropy_c_given_x, holevo_information, trace_distance_exact};
use blindbounds::protocol::{build_protocol, ki_sensitivity, ki_sensitivity_parameter, monte_carlo_check, report_for};
use blindbounds::{ClassicalEnsemble, DefectBackend, DefectProblem, Distribution, ExactDistribution, StochasticMatrix};
use num_bigint::BigInt;
use num_rational::BigRational;

const SEED: u64 = 20240601;

type Outcome = Result<String, String>;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn audits_clean(outcomes: &[AuditOutcome]) -> Outcome {
    let mut parts = Vec::new();
    for o in outcomes {
        ensure(
            o.passed(),
            format!(
                "{}: {} of {} violated, worst margin {:e}",
                o.suite, o.violations, o.instances, o.worst_margin
            ),
        )?;
        parts.push(format!("{}={}", o.suite, o.instances));
    }
    Ok(parts.join(" "))
}

fn two_state_example() -> Outcome {
    let p = ExactDistribution::uniform(2).map_err(|e| e.to_string())?;
    let r = ExactDistribution::from_ratios(&[(1, 3), (2, 3)]).map_err(|e| e.to_string())?;
    let single = trace_distance_exact(&p, &r).map_err(|e| e.to_string())?;
    let double = trace_distance_exact(&p.product(&p), &r.product(&r)).map_err(|e| e.to_string())?;
    ensure(single == q(1, 6), format!("single-copy distance {single}"))?;
    ensure(double == q(7, 36), format!("two-copy distance {double}"))?;
    let gap = &double - &single;
    ensure(gap == q(1, 36), format!("gap {gap}"))?;
    let exact_bound = &gap * &gap / BigInt::from(2);
    ensure(exact_bound == q(1, 2592), format!("exact defect bound {exact_bound}"))?;

    let e = ClassicalEnsemble::equiprobable(vec![p.to_f64(), r.to_f64()]).map_err(|e| e.to_string())?;
    let t = channel_joint(&e, &StochasticMatrix::identity(2)).map_err(|e| e.to_string())?;
    let chain = pinskerlb_chain(&e, &t, 0.0).map_err(|e| e.to_string())?;
    let lb = chain.defect_lower_bound();
    ensure((lb - 1.0 / 2592.0).abs() <= 1e-15, format!("chain bound {lb}"))?;
    Ok(format!("distances 1/6, 7/36, gap 1/36, bound {exact_bound}"))
}

fn staircase_entropy() -> Outcome {
    let mut worst = f64::INFINITY;
    for d in 2..=64 {
        let e = ClassicalEnsemble::uniform_staircase(d).map_err(|e| e.to_string())?;
        let s = conditional_entropy_c_given_x(&e).0;
        let h = holevo_information(&e).0;
        let floor = (d as f64).log2() - 1.0;
        ensure(s >= floor - 1e-10, format!("d={d}: S(C|X) = {s} < {floor}"))?;
        ensure(h <= 1.0 + 1e-10, format!("d={d}: Holevo = {h}"))?;
        worst = worst.min(s - floor).min(1.0 - h);
    }
    Ok(format!("d=2..64, smallest margin {worst:.3e}"))
}

fn pipeline() -> Outcome {
    let mut parts = Vec::new();
    for d in [256usize, 4096] {
        let r = separation_pipeline(d).map_err(|e| e.to_string())?;
        let target = (d as f64).log2() - 7.0;
        ensure((r.value - target).abs() <= 1e-12, format!("d={d}: value {}", r.value))?;
        ensure(
            (r.recombined() - target).abs() <= 1e-12,
            format!("d={d}: components sum to {}", r.recombined()),
        )?;
        let eps = 1.0 / (24.0 * (d as f64).powi(4) * (d as f64).log2());
        ensure(
            r.epsilon == eps && separation_epsilon(d) == eps,
            format!("d={d}: epsilon {}", r.epsilon),
        )?;
        parts.push(format!("d={d}: {}", r.value));
    }
    Ok(parts.join(", "))
}

fn approximation() -> Outcome {
    let outcomes = (2..=6)
        .map(|d| approximation_audit(SEED, 1000, d..=d, APPROXIMATION_CONSTANT))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    audits_clean(&outcomes)?;
    let ratio = outcomes.iter().map(|o| o.extra["max_entry_ratio"]).fold(0.0, f64::max);
    Ok(format!("5000 matrices, largest |N-M| / dε = {ratio:.3}"))
}

fn rigidity() -> Outcome {
    let outcomes = (2..=6)
        .map(|d| rigidity_audit(SEED, 1000, d..=d))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    audits_clean(&outcomes)?;
    let worst = outcomes.iter().map(|o| o.worst_margin).fold(f64::INFINITY, f64::min);
    Ok(format!("5000 channels, smallest diagonal margin {worst:.3e}"))
}

fn overlap() -> Outcome {
    let o = overlap_audit(2..=7).map_err(|e| e.to_string())?;
    audits_clean(std::slice::from_ref(&o))?;
    Ok(format!("d=2..7, {} sizes", o.instances))
}

fn hull_bound() -> Outcome {
    let o = hull_bound_audit(SEED, 100, 2..=6, 8).map_err(|e| e.to_string())?;
    audits_clean(std::slice::from_ref(&o))?;
    Ok(format!(
        "{} instances, smallest LP gap {:.3e}",
        o.instances, o.worst_margin
    ))
}

fn birkhoff() -> Outcome {
    let outcomes = (3..=8)
        .map(|d| birkhoff_audit(SEED, 1000, d..=d))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    audits_clean(&outcomes)?;
    Ok("6000 matrices".into())
}

fn defect_optimizer() -> Outcome {
    let e = ClassicalEnsemble::equiprobable(vec![
        Distribution::uniform(2).map_err(|e| e.to_string())?,
        Distribution::new(vec![1.0 / 3.0, 2.0 / 3.0]).map_err(|e| e.to_string())?,
    ])
    .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for eps in [0.0, 0.001, 0.01] {
        let oracle = grid_oracle(&e, eps).map_err(|e| e.to_string())?;
        let p = DefectProblem::new(e.clone(), eps, DefectBackend::PenaltyGradient)
            .map_err(|e| e.to_string())?
            .with_seed(SEED);
        let s = minimize_defect(&p).map_err(|e| e.to_string())?;
        let gap = (s.value.0 - oracle.value.0).abs();
        ensure(
            gap <= 1e-3,
            format!("ε={eps}: optimizer {} vs oracle {}", s.value.0, oracle.value.0),
        )?;
        worst = worst.max(gap);
    }
    for d in [2, 3] {
        let e = ClassicalEnsemble::uniform_staircase(d).map_err(|e| e.to_string())?;
        let p = DefectProblem::new(e, 0.0, DefectBackend::PenaltyGradient)
            .map_err(|e| e.to_string())?
            .with_seed(SEED);
        let s = minimize_defect(&p).map_err(|e| e.to_string())?;
        let off = s.matrix.max_abs_diff(&StochasticMatrix::identity(d));
        ensure(off <= 1e-6, format!("d={d}: |M - I| = {off:e}"))?;
    }
    Ok(format!("largest oracle gap {worst:.3e}"))
}

fn protocol() -> Outcome {
    let d = 1024;
    let rho = Distribution::uniform(d).map_err(|e| e.to_string())?;
    let sigma = Distribution::staircase(d).map_err(|e| e.to_string())?;
    let protocol = build_protocol(&rho, &sigma, 0.1, 0.1).map_err(|e| e.to_string())?;
    let r = report_for(&protocol, &rho, &sigma).map_err(|e| e.to_string())?;
    ensure(
        r.local_error_rho <= 0.2 && r.local_error_sigma <= 0.2,
        format!("local errors {} {}", r.local_error_rho, r.local_error_sigma),
    )?;
    let bits = 2.0 * ((r.u + 1) as f64).log2();
    ensure(
        r.bits_sent == bits,
        format!("bits_sent {} for u = {}", r.bits_sent, r.u),
    )?;
    ensure(
        r.bits_sent <= r.rate_bound,
        format!("bits {} > rate {}", r.bits_sent, r.rate_bound),
    )?;
    let mut z = Vec::new();
    for (k, input) in [&rho, &sigma].into_iter().enumerate() {
        let mc = monte_carlo_check(&protocol, input, 100_000, SEED + k as u64).map_err(|e| e.to_string())?;
        ensure(
            mc.within_sigmas(3.0),
            format!("estimate {} vs exact {} (σ = {})", mc.estimate, mc.exact, mc.std_error),
        )?;
        z.push(if mc.std_error > 0.0 {
            format!("{:.2}σ", (mc.estimate - mc.exact) / mc.std_error)
        } else {
            format!("exact {}", mc.estimate)
        });
    }
    Ok(format!(
        "u={}, bits {:.4} ≤ {:.4}, errors ({:.4}, {:.4}), Monte Carlo ({}, {})",
        r.u, r.bits_sent, r.rate_bound, r.local_error_rho, r.local_error_sigma, z[0], z[1]
    ))
}

fn sensitivity() -> Outcome {
    let d = 4096usize;
    let t = ki_sensitivity_parameter(d);
    let k = ki_sensitivity(d).map_err(|e| format!("δ = γ = {t}: {e}"))?;
    let log_d = (d as f64).log2();
    ensure(k.f <= 4.0 * t, format!("f = {} > {}", k.f, 4.0 * t))?;
    let floor = ((d - 1) as f64).log2() - 20.0 / log_d;
    ensure(k.g >= floor, format!("g = {} < {floor}", k.g))?;
    Ok(format!("f = {:.4e}, g = {:.4}", k.f, k.g))
}

fn facts() -> Outcome {
    let outcomes = facts_audit(SEED, 10_000);
    ensure(outcomes.len() == 9, format!("{} suites", outcomes.len()))?;
    audits_clean(&outcomes)
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 12] = [
        ("two-state example", Duration::from_secs(1), two_state_example),
        ("staircase entropy", Duration::from_secs(1), staircase_entropy),
        ("separation pipeline", Duration::from_secs(1), pipeline),
        (
            "doubly stochastic approximation audit",
            Duration::from_secs(30),
            approximation,
        ),
        ("diagonal rigidity audit", Duration::from_secs(30), rigidity),
        ("permutation overlap brute force", Duration::from_secs(60), overlap),
        ("hull distance bound vs LP", Duration::from_secs(30), hull_bound),
        ("Birkhoff decomposition", Duration::from_secs(60), birkhoff),
        (
            "defect optimizer vs grid oracle",
            Duration::from_secs(300),
            defect_optimizer,
        ),
        ("bucketing protocol", Duration::from_secs(10), protocol),
        ("Koashi-Imoto sensitivity", Duration::from_secs(30), sensitivity),
        ("information inequality suites", Duration::from_secs(60), facts),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > limit => Err(format!("took {took:.2?}, limit {limit:?} ({detail})")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {name} [{took:.2?}] {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} [{took:.2?}] {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
