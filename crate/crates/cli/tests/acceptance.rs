//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line.
//!
//! Run with `cargo test -p uot-cli --test acceptance -- --nocapture` to see
//! the report.

use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uot_core::aibpuot::solve_theta;
use uot_core::experiments::{compute_reference, loglog_slope, raw_gaps, sparsity_ratio};
use uot_core::model::{bregman_entropy, objective_gradient};
use uot_core::oracle::{closed_form_1x1, finite_diff_gradient, projected_descent_reference};
use uot_core::scaling::{assemble_plan, build_kernel};
use uot_core::{
    build_gaussian_preset, solve_aibpuot, solve_entropic_uot, solve_ibpuot, AccelConfig,
    InnerStopRule, Matrix, ProxParams, ReferenceSolution, ScalingState, TransportPlan, UotError,
    UotProblem,
};

fn report(id: u32, name: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("[{verdict}] criterion {id:>2} {name}: {detail}");
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_problem(rng: &mut ChaCha8Rng, n: usize, m: usize) -> UotProblem {
    let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let b: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..1.5)).collect();
    let c = Matrix::from_fn(n, m, |_, _| rng.gen_range(0.0..1.0));
    UotProblem::from_parts(&a, &b, c, 1.0, 1.0).unwrap()
}

fn preset() -> &'static UotProblem {
    static PRESET: OnceLock<UotProblem> = OnceLock::new();
    PRESET.get_or_init(build_gaussian_preset)
}

fn reference() -> &'static ReferenceSolution {
    static REFERENCE: OnceLock<ReferenceSolution> = OnceLock::new();
    REFERENCE.get_or_init(|| compute_reference(preset()).unwrap())
}

fn single_sweep(beta: f64, iters: usize) -> ProxParams {
    ProxParams::new(beta, iters, InnerStopRule::FixedSweeps(1)).unwrap()
}

fn gap_at(trace: &uot_core::SolveTrace, k: usize) -> f64 {
    trace.objective_at(k).unwrap() - reference().objective
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE)
}

#[test]
fn criterion_01_closed_form_agreement() {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (a, b, c) = (r.gen_range(0.1..5.0), r.gen_range(0.1..5.0), r.gen_range(0.0..2.0));
        let (l1, l2) = (r.gen_range(0.2..3.0), r.gen_range(0.2..3.0));
        let problem = UotProblem::from_parts(&[a], &[b], Matrix::filled(1, 1, c), l1, l2).unwrap();
        let exact = closed_form_1x1(a, b, c, l1, l2);
        let params = ProxParams::new(0.5, 500, InnerStopRule::residual(1e-12).unwrap()).unwrap();
        let plain = solve_ibpuot(&problem, &params, None).unwrap();
        let accel = solve_aibpuot(&problem, &params, &AccelConfig::default()).unwrap();
        worst = worst
            .max((plain.plan.get(0, 0) - exact).abs())
            .max((accel.plan.get(0, 0) - exact).abs());
    }
    let elapsed = start.elapsed();
    report(
        1,
        "closed-form agreement",
        worst <= 1e-6 && elapsed < Duration::from_secs(1),
        format!("max |p - p*| = {worst:.3e} (<= 1e-6) in {elapsed:.2?} (< 1 s)"),
    );
}

#[test]
fn criterion_02_oracle_equivalence() {
    let start = Instant::now();
    let mut r = rng(102);
    let mut worst = 0.0f64;
    let mut oracle_ok = true;
    for _ in 0..10 {
        let problem = random_problem(&mut r, 5, 5);
        let oracle = projected_descent_reference(&problem, 200_000, 1e-7).unwrap();
        oracle_ok &= oracle.converged;
        let params = ProxParams::new(0.01, 5000, InnerStopRule::residual(1e-10).unwrap()).unwrap();
        let sol = solve_ibpuot(&problem, &params, None).unwrap();
        worst = worst.max((sol.trace.final_objective().unwrap() - oracle.objective).abs());
    }
    let elapsed = start.elapsed();
    report(
        2,
        "oracle equivalence",
        oracle_ok && worst <= 1e-6 && elapsed < Duration::from_secs(30),
        format!("max |f - f_oracle| = {worst:.3e} (<= 1e-6), oracle converged: {oracle_ok}, {elapsed:.2?} (< 30 s)"),
    );
}

#[test]
fn criterion_03_scaling_fixed_point_identities() {
    let mut r = rng(103);
    let mut worst_identity = 0.0f64;
    for _ in 0..30 {
        let (n, m) = (r.gen_range(1..9), r.gen_range(1..9));
        let problem = random_problem(&mut r, n, m);
        let eps = r.gen_range(0.05..2.0);
        let (l1, l2) = (r.gen_range(0.2..4.0), r.gen_range(0.2..4.0));
        let kernel = build_kernel(problem.cost(), eps).unwrap();
        let v0: Vec<f64> = (0..m).map(|_| r.gen_range(0.2..3.0)).collect();
        let mut state = ScalingState::new(kernel, eps, v0).unwrap();
        for _ in 0..5 {
            state.update_u(problem.a(), l1).unwrap();
            let rows = assemble_plan(&state).unwrap().row_marginal();
            for ((&s, &a), &u) in rows.iter().zip(problem.a()).zip(&state.u) {
                worst_identity = worst_identity.max(rel(s, a * u.powf(-eps / l1)));
            }
            state.update_v(problem.b(), l2).unwrap();
            let cols = assemble_plan(&state).unwrap().col_marginal();
            for ((&s, &b), &v) in cols.iter().zip(problem.b()).zip(&state.v) {
                worst_identity = worst_identity.max(rel(s, b * v.powf(-eps / l2)));
            }
        }
    }

    let mut worst_stationarity = 0.0f64;
    let mut all_converged = true;
    for _ in 0..10 {
        let problem = random_problem(&mut r, 4, 6);
        let eps = r.gen_range(0.05..1.0);
        let sol = solve_entropic_uot(&problem, eps, 100_000, 1e-12, false).unwrap();
        all_converged &= sol.trace.converged == Some(true);
        let rows = sol.plan.row_marginal();
        let cols = sol.plan.col_marginal();
        for (i, &row) in rows.iter().enumerate() {
            for (j, &col) in cols.iter().enumerate() {
                let p = sol.plan.get(i, j);
                if p > 1e-300 {
                    let g = problem.cost().get(i, j)
                        + eps * p.ln()
                        + (row / problem.a()[i]).ln()
                        + (col / problem.b()[j]).ln();
                    worst_stationarity = worst_stationarity.max(g.abs());
                }
            }
        }
    }
    report(
        3,
        "scaling fixed-point identities",
        worst_identity <= 1e-12 && all_converged && worst_stationarity <= 1e-8,
        format!(
            "marginal identities rel err {worst_identity:.3e} (<= 1e-12); stationarity {worst_stationarity:.3e} (<= 1e-8) at r <= 1e-12"
        ),
    );
}

#[test]
fn criterion_04_rate() {
    let f_star = reference().objective;
    let start = Instant::now();
    let params = ProxParams::new(1.0, 1000, InnerStopRule::residual(1e-10).unwrap()).unwrap();
    let sol = solve_ibpuot(preset(), &params, None).unwrap();
    let elapsed = start.elapsed();
    let gaps = raw_gaps(&sol.trace, reference()).unwrap();
    let slope = loglog_slope(&gaps, 100, 1000).unwrap_or(f64::NAN);
    report(
        4,
        "IBPUOT O(1/N) rate",
        slope <= -0.85 && elapsed < Duration::from_secs(60),
        format!("log-log slope over N in [100, 1000] = {slope:.4} (<= -0.85), f* = {f_star:.10}, {elapsed:.2?}"),
    );
}

#[test]
fn criterion_05_convergence_ordering() {
    reference();
    let start = Instant::now();
    let ib = solve_ibpuot(preset(), &single_sweep(1.0, 1000), None).unwrap();
    let fine = solve_entropic_uot(preset(), 1e-3, 1000, f64::MIN_POSITIVE, false).unwrap();
    let coarse = solve_entropic_uot(preset(), 1e-2, 1000, f64::MIN_POSITIVE, false).unwrap();
    let elapsed = start.elapsed();
    let (g_ib, g_fine, g_coarse) = (gap_at(&ib.trace, 1000), gap_at(&fine.trace, 1000), gap_at(&coarse.trace, 1000));
    let pass = 2.0 * g_ib <= g_fine && 2.0 * g_fine <= g_coarse && elapsed < Duration::from_secs(60);
    report(
        5,
        "gap ordering at k = 1000",
        pass,
        format!(
            "IBPUOT(beta=1) {g_ib:.4e} < Scaling(eps=1e-3) {g_fine:.4e} < Scaling(eps=1e-2) {g_coarse:.4e}; ratios {:.2} and {:.2} (each >= 2), {elapsed:.2?}",
            g_fine / g_ib,
            g_coarse / g_fine
        ),
    );
}

#[test]
fn criterion_06_acceleration() {
    reference();
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    for beta in [1.0, 0.1] {
        let params = single_sweep(beta, 1000);
        let plain = solve_ibpuot(preset(), &params, None).unwrap();
        let accel = solve_aibpuot(preset(), &params, &AccelConfig::default()).unwrap();
        let (gp, ga) = (gap_at(&plain.trace, 1000), gap_at(&accel.trace, 1000));
        pass &= ga < gp;
        lines.push(format!("beta={beta}: AIBPUOT {ga:.4e} < IBPUOT {gp:.4e}"));
    }
    let elapsed = start.elapsed();
    report(
        6,
        "acceleration at k = 1000",
        pass && elapsed < Duration::from_secs(60),
        format!("{}; {elapsed:.2?}", lines.join("; ")),
    );
}

#[test]
fn criterion_07_underflow() {
    let plain_small = solve_entropic_uot(preset(), 1e-4, 1000, 1e-10, false);
    let underflow = matches!(
        plain_small.as_ref().map_err(|e| &e.error),
        Err(UotError::NumericalUnderflow { .. })
    );
    let stabilized = solve_entropic_uot(preset(), 1e-4, 1000, 1e-10, true)
        .ok()
        .and_then(|s| s.trace.final_objective())
        .filter(|f| f.is_finite());
    let plain_fine = solve_entropic_uot(preset(), 1e-3, 1000, 1e-10, false)
        .ok()
        .and_then(|s| s.trace.final_objective())
        .filter(|f| f.is_finite());
    report(
        7,
        "underflow reproduction",
        underflow && stabilized.is_some() && plain_fine.is_some(),
        format!(
            "plain eps=1e-4 -> {}; stabilized eps=1e-4 -> {stabilized:?}; plain eps=1e-3 -> {plain_fine:?}",
            match &plain_small {
                Err(e) => e.error.to_string(),
                Ok(_) => "completed".into(),
            }
        ),
    );
}

#[test]
fn criterion_08_sparsity_ordering() {
    let ib = solve_ibpuot(preset(), &single_sweep(0.1, 5000), None).unwrap();
    let fine = solve_entropic_uot(preset(), 1e-3, 1000, f64::MIN_POSITIVE, false).unwrap();
    let coarse = solve_entropic_uot(preset(), 1e-2, 1000, f64::MIN_POSITIVE, false).unwrap();
    let s_ib = sparsity_ratio(&ib.plan, 1e-6).unwrap();
    let s_fine = sparsity_ratio(&fine.plan, 1e-6).unwrap();
    let s_coarse = sparsity_ratio(&coarse.plan, 1e-6).unwrap();
    report(
        8,
        "sparsity ordering",
        s_ib > s_fine && s_fine > s_coarse,
        format!("IBPUOT(beta=0.1) {s_ib:.4} > Scaling(eps=1e-3) {s_fine:.4} > Scaling(eps=1e-2) {s_coarse:.4}"),
    );
}

#[test]
fn criterion_09_divergence_identities() {
    let mut r = rng(109);
    let mut worst_three_points = 0.0f64;
    let mut worst_tsp = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let len = r.gen_range(1..10);
        let draw = |r: &mut ChaCha8Rng| -> Vec<f64> { (0..len).map(|_| r.gen_range(0.01..3.0)).collect() };
        let (x, y, z) = (draw(&mut r), draw(&mut r), draw(&mut r));
        let d = |p: &[f64], q: &[f64]| bregman_entropy(p, q).unwrap();
        let inner: f64 = x
            .iter()
            .zip(&y)
            .zip(&z)
            .map(|((&xi, &yi), &zi)| (yi.ln() - zi.ln()) * (xi - yi))
            .sum();
        worst_three_points = worst_three_points.max((d(&x, &z) - d(&x, &y) - d(&y, &z) - inner).abs());

        let theta: f64 = r.gen_range(0.0..1.0);
        let mix = |p: &[f64]| -> Vec<f64> { x.iter().zip(p).map(|(&xi, &pi)| (1.0 - theta) * xi + theta * pi).collect() };
        worst_tsp = worst_tsp.max(d(&mix(&y), &mix(&z)) - theta * d(&y, &z));
    }
    let mut zero_at_equality = true;
    let mut positive_off_equality = true;
    for _ in 0..200 {
        let x: Vec<f64> = (0..6).map(|_| r.gen_range(0.05..3.0)).collect();
        zero_at_equality &= bregman_entropy(&x, &x).unwrap() == 0.0;
        for i in 0..x.len() {
            for delta in [1e-9, -1e-9] {
                let mut y = x.clone();
                y[i] += delta;
                positive_off_equality &= bregman_entropy(&x, &y).unwrap() > 0.0;
                positive_off_equality &= bregman_entropy(&y, &x).unwrap() > 0.0;
            }
        }
    }
    report(
        9,
        "divergence identities",
        worst_three_points <= 1e-10 && worst_tsp <= 1e-12 && zero_at_equality && positive_off_equality,
        format!(
            "three-points residual {worst_three_points:.3e} (<= 1e-10); max TSP excess {worst_tsp:.3e} (<= 1e-12); D=0 at x=y: {zero_at_equality}; D>0 at 1e-9 perturbations: {positive_off_equality}"
        ),
    );
}

#[test]
fn criterion_10_theta_machinery() {
    let mut r = rng(110);
    let mut worst_residual = 0.0f64;
    for _ in 0..1000 {
        let tsc = r.gen_range(0.5..8.0);
        let beta = 10f64.powf(r.gen_range(-3.0..1.0));
        let gamma = r.gen_range(1.0..2.0);
        let sigma = 10f64.powf(r.gen_range(-3.0..1.0));
        let rho = 10f64.powf(r.gen_range(-6.0..0.0));
        let theta = solve_theta(tsc, beta, gamma, sigma, rho).unwrap();
        let g = tsc * beta * theta.powf(gamma) - sigma * rho * (1.0 - theta);
        worst_residual = worst_residual.max(g.abs());
    }

    let problem = random_problem(&mut r, 4, 4);
    let mut worst_violation = f64::NEG_INFINITY;
    for &(beta, sigma, t_exp) in &[(1.0, 1.0, 0.5), (0.1, 0.1, 0.5), (0.5, 2.0, 0.2), (2.0, 0.3, 0.9)] {
        let config = AccelConfig {
            sigma: Some(sigma),
            t_exp,
            tsc0: 1.0,
            tau_doubling: false,
        };
        let gamma = 1.0 + t_exp;
        let sol = solve_aibpuot(&problem, &single_sweep(beta, 200), &config).unwrap();
        for rec in &sol.trace.records[1..] {
            let sum = rec.k as f64 * beta.powf(-1.0 / gamma);
            let scale = sigma.powf(1.0 / gamma);
            let lower = (1.0 + scale * sum).powf(-gamma);
            let upper = (1.0 + scale * sum / gamma).powf(-gamma);
            let rho = rec.rho.unwrap();
            worst_violation = worst_violation.max(lower - rho).max(rho - upper);
        }
    }
    report(
        10,
        "theta machinery",
        worst_residual <= 1e-12 && worst_violation <= 1e-10,
        format!("theta residual {worst_residual:.3e} (<= 1e-12); worst rho bound violation {worst_violation:.3e} (<= 1e-10)"),
    );
}

#[test]
fn criterion_11_gradient_validation() {
    let mut r = rng(111);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let problem = random_problem(&mut r, 4, 5);
        let entries: Vec<f64> = (0..20).map(|_| r.gen_range(0.1..1.5)).collect();
        let plan = TransportPlan::new(Matrix::from_vec(4, 5, entries).unwrap()).unwrap();
        let exact = objective_gradient(&problem, &plan).unwrap();
        let fd = finite_diff_gradient(&problem, &plan, 1e-6).unwrap();
        let err = exact
            .as_slice()
            .iter()
            .zip(fd.as_slice())
            .map(|(g, d)| (g - d).abs())
            .fold(0.0, f64::max);
        let scale = exact.as_slice().iter().map(|g| g.abs()).fold(0.0, f64::max);
        worst = worst.max(err / scale);
    }
    report(
        11,
        "gradient validation",
        worst <= 1e-5,
        format!("max relative error {worst:.3e} (<= 1e-5)"),
    );
}

fn run_cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_uot")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn criterion_12_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();

    let mut codes = Vec::new();
    for name in ["t1.json", "t2.json"] {
        codes.push(run_cli(&["truth", "--preset", "gaussian1d", "--out", &path(name)]).0);
    }
    let truth_same = std::fs::read(path("t1.json")).unwrap() == std::fs::read(path("t2.json")).unwrap();

    let mut solves_same = true;
    for (tag, solver_args) in [
        ("s", vec!["--solver", "scaling", "--eps", "0.01", "--iters", "300"]),
        ("i", vec!["--solver", "ibpuot", "--beta", "1", "--iters", "300"]),
        ("a", vec!["--solver", "aibpuot", "--beta", "0.1", "--iters", "300"]),
    ] {
        for run in 0..2 {
            let (trace, plan) = (path(&format!("{tag}{run}.csv")), path(&format!("{tag}{run}.txt")));
            let mut args = vec!["solve", "--preset", "gaussian1d", "--truth"];
            let truth = path("t1.json");
            args.push(&truth);
            args.extend(&solver_args);
            args.extend(["--trace", &trace, "--plan-out", &plan]);
            codes.push(run_cli(&args).0);
        }
        solves_same &= std::fs::read(path(&format!("{tag}0.csv"))).unwrap()
            == std::fs::read(path(&format!("{tag}1.csv"))).unwrap();
        solves_same &= std::fs::read(path(&format!("{tag}0.txt"))).unwrap()
            == std::fs::read(path(&format!("{tag}1.txt"))).unwrap();
    }
    report(
        12,
        "determinism",
        codes.iter().all(|&c| c == 0) && truth_same && solves_same,
        format!("exit codes {codes:?}; truth JSON identical: {truth_same}; solve CSV and plans identical: {solves_same}"),
    );
}
