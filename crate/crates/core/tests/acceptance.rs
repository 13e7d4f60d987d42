//! Acceptance criteria 1–9. One line per criterion; exits nonzero if any fails.

use std::time::Instant;

use lrblock::bounds::{bound_commutator_aware, bound_strict_local, BoundQuery, Variant};
use lrblock::cheb::{degree_for_accuracy, expand, truncation_bound};
use lrblock::estimate::{estimate, sweep, EstimateRequest, SweepConfig};
use lrblock::fit::{fit, ErrorModel, ErrorSample, FitModel};
use lrblock::lattice::{extract_bound_inputs, heisenberg_benchmark, heisenberg_random};
use lrblock::operator::{
    matrix_exponential_hermitian, spectral_norm, svd_norm, CMat, HermitianEigen, OperatorSum, Pauli, PauliString,
};
use lrblock::oracle::{pauli_commutator_block, PauliDynamics};
use lrblock::planner::{apply_plan, plan_recursive_1d, plan_stacks, ExactBench};
use lrblock::qsp::{build_qubiterate, encode_lcu, jacobi_anger};
use lrblock::c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIELD_SEED: u64 = 1;

type Outcome = Result<String, String>;

struct Shared {
    model: Option<FitModel>,
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1(shared: &mut Shared) -> Outcome {
    let start = Instant::now();
    let cfg = SweepConfig {
        n: 11,
        seed: FIELD_SEED,
        ells: (2..=7).collect(),
        t_grid: vec![0.5, 1.0, 2.0],
        positions: None,
        unit_norm: true,
    };
    let samples = sweep(&cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();

    let mut problems = Vec::new();
    if let Some(s) = samples.iter().find(|s| !(s.error > 0.0)) {
        problems.push(format!("nonpositive error at t={} ℓ={} a={}", s.t, s.ell, s.a));
    }
    let lookup = |t: f64, ell: usize, a: usize| -> Option<&ErrorSample> {
        samples.iter().find(|s| s.t == t && s.ell == ell && s.a == a)
    };
    for s in &samples {
        if let Some(next) = lookup(s.t, s.ell + 1, s.a) {
            if next.error > 1.1 * s.error {
                problems.push(format!("increase at t={} a={} ℓ={}→{}", s.t, s.a, s.ell, s.ell + 1));
            }
        }
    }
    let mut worst_spread = 0.0f64;
    for &t in &cfg.t_grid {
        for &ell in &cfg.ells {
            let errs: Vec<f64> = samples.iter().filter(|s| s.t == t && s.ell == ell).map(|s| s.error).collect();
            let max = errs.iter().cloned().fold(0.0, f64::max);
            let min = errs.iter().cloned().fold(f64::INFINITY, f64::min);
            worst_spread = worst_spread.max(max / min);
        }
    }
    if worst_spread > 3.0 {
        problems.push(format!("position spread {worst_spread:.2}"));
    }
    let report = fit(&samples).map_err(|e| e.to_string())?;
    let r2 = report.model.r2_log;
    if r2 < 0.98 {
        problems.push(format!("R² {r2:.4}"));
    }
    if elapsed > 300.0 {
        problems.push(format!("runtime {elapsed:.0}s"));
    }
    shared.model = Some(report.model);
    // Diagnostic only: the same fit without the t = 2 curve.
    let short: Vec<ErrorSample> = samples.iter().filter(|s| s.t <= 1.0).copied().collect();
    let r2_short = fit(&short).map(|r| r.model.r2_log).unwrap_or(f64::NAN);
    let detail = format!(
        "{} samples in {elapsed:.1}s, R²={r2:.4} (t≤1 only: {r2_short:.4}), spread≤{worst_spread:.2}, fit ampl={:.4} vel={:.4} offset={:.4}",
        samples.len(),
        report.model.ampl,
        report.model.vel,
        report.model.offset
    );
    check(problems.is_empty(), if problems.is_empty() { detail } else { format!("{detail}; {}", problems.join("; ")) })
}

fn criterion_2() -> Outcome {
    let mut pairs = 0usize;
    let mut worst_strict = f64::INFINITY;
    let mut worst_aware = f64::INFINITY;
    let mut exact = 0usize;
    let (mut nontrivial, mut worst_ratio) = (0usize, 0.0f64);
    for n in 8..=10 {
        let h = heisenberg_benchmark(n, FIELD_SEED).map_err(|e| e.to_string())?;
        let inputs = extract_bound_inputs(&h, 1.0).map_err(|e| e.to_string())?;
        let op = h.operator_at(0, 0.0, None).map_err(|e| e.to_string())?;
        let dynamics = PauliDynamics::new(&op).map_err(|e| e.to_string())?;
        for x in 0..n {
            for a in Pauli::ALL {
                let a_eig = dynamics.to_eigenbasis(a, x).map_err(|e| e.to_string())?;
                for t in [0.25, 0.5, 1.0] {
                    let at = dynamics.evolve_in_eigenbasis(a_eig.as_ref(), t);
                    for y in 0..n {
                        let d = x.abs_diff(y) as f64;
                        let q = BoundQuery::from_distance(inputs, t, d, 1);
                        let strict = bound_strict_local(&q, Variant::Commutator);
                        let aware = bound_commutator_aware(&q, Variant::Commutator);
                        let threshold = strict.min(aware) + 1e-9;
                        for b in Pauli::ALL {
                            let block = pauli_commutator_block(at.as_ref(), b, y, n);
                            // ‖C‖ ≤ ‖C‖_F and ‖[A(t), B]‖ ≤ 2 decide most pairs;
                            // the rest get an exact SVD.
                            let upper = (2.0 * block.norm_l2()).min(2.0);
                            let measured = if upper <= threshold {
                                upper
                            } else {
                                exact += 1;
                                2.0 * svd_norm(block.as_ref())
                            };
                            pairs += 1;
                            if strict < 2.0 {
                                nontrivial += 1;
                                worst_ratio = worst_ratio.max(measured / strict);
                            }
                            worst_strict = worst_strict.min(strict + 1e-9 - measured);
                            worst_aware = worst_aware.min(aware + 1e-9 - measured);
                        }
                    }
                }
            }
        }
    }
    check(
        worst_strict >= 0.0 && worst_aware >= 0.0,
        format!(
            "{pairs} pairs ({exact} by SVD), min slack strict≥{worst_strict:.3e} commutator-aware≥{worst_aware:.3e}; \
             {nontrivial} pairs with strict bound < 2, largest measured/bound {worst_ratio:.3e}"
        ),
    )
}

fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> CMat {
    let g = CMat::from_fn(dim, dim, |_, _| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    CMat::from_fn(dim, dim, |i, j| (g[(i, j)] + g[(j, i)].conj()) * 0.5)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = f64::INFINITY;
    for _ in 0..200 {
        let dim = rng.gen_range(2..=64);
        let a = random_hermitian(&mut rng, dim);
        let e = random_hermitian(&mut rng, dim);
        let delta = 10f64.powf(rng.gen_range(-4.0..0.0));
        let scale = delta / spectral_norm(e.as_ref());
        let b = CMat::from_fn(dim, dim, |i, j| a[(i, j)] + e[(i, j)] * scale);
        let gap = spectral_norm((&a - &b).as_ref());
        let t = rng.gen_range(0.0..3.0);
        let distance = if dim.is_power_of_two() {
            let ua = matrix_exponential_hermitian(a.as_ref(), t).map_err(|e| e.to_string())?;
            let ub = matrix_exponential_hermitian(b.as_ref(), t).map_err(|e| e.to_string())?;
            ua.distance(&ub)
        } else {
            // Register unitaries are qubit sized; other dimensions use the
            // same eigendecomposition directly.
            let ua = HermitianEigen::new(a.as_ref()).map_err(|e| e.to_string())?.exp_matrix(t);
            let ub = HermitianEigen::new(b.as_ref()).map_err(|e| e.to_string())?.exp_matrix(t);
            svd_norm((&ua - &ub).as_ref())
        };
        worst = worst.min(t * gap + 1e-9 - distance);
    }
    check(worst >= 0.0, format!("200 trials, min slack {worst:.3e}"))
}

fn criterion_4() -> Outcome {
    let h = heisenberg_random(9, FIELD_SEED).map_err(|e| e.to_string())?;
    let model = FitModel::new(1.0, 1.0, 0.0);
    let mut worst = 0.0f64;
    for (a, b) in [(1, 3), (3, 6), (2, 7)] {
        let merged = plan_stacks(&h, 0.4, a, b, 2, true, &model).map_err(|e| e.to_string())?;
        let plain = plan_stacks(&h, 0.4, a, b, 2, false, &model).map_err(|e| e.to_string())?;
        let um = apply_plan(&merged, &h).map_err(|e| e.to_string())?;
        let up = apply_plan(&plain, &h).map_err(|e| e.to_string())?;
        worst = worst.max(um.distance(&up));
    }
    check(worst <= 1e-9, format!("max distance {worst:.3e}"))
}

fn random_lcu(rng: &mut ChaCha8Rng) -> OperatorSum {
    let paulis = [None, Some(Pauli::X), Some(Pauli::Y), Some(Pauli::Z)];
    let mut h = OperatorSum::zero(2);
    for p in paulis {
        for q in paulis {
            if p.is_none() && q.is_none() {
                continue;
            }
            if rng.gen_bool(0.5) {
                let f: Vec<(usize, Pauli)> = [(0, p), (1, q)].into_iter().filter_map(|(s, x)| x.map(|x| (s, x))).collect();
                h.push(rng.gen_range(-1.0..1.0), PauliString::new(2, f).unwrap()).unwrap();
            }
        }
    }
    if h.is_empty() {
        h.push(0.5, PauliString::single(2, 0, Pauli::X).unwrap()).unwrap();
    }
    h
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut sectors = 0;
    for _ in 0..50 {
        let h = random_lcu(&mut rng);
        let enc = encode_lcu(&h).map_err(|e| e.to_string())?;
        let w = build_qubiterate(&enc).map_err(|e| e.to_string())?;
        for s in w.eigenphase_law(&h).map_err(|e| e.to_string())? {
            worst = worst.max(s.phase_error).max(s.leakage);
            sectors += 1;
        }
    }
    check(worst <= 1e-9, format!("50 Hamiltonians, {sectors} sectors, max phase error {worst:.3e}"))
}

fn criterion_6() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for at in [0.5, 1.0, 2.0] {
        for eps in [1e-3, 1e-8] {
            let ja = jacobi_anger(at, eps).map_err(|e| e.to_string())?;
            let sup = ja.sup_error(1001);
            ok &= sup <= ja.error_bound;
            lines.push(format!("αt={at} ε={eps:e}: q={} sup={sup:.2e} ≤ {:.2e}", ja.order, ja.error_bound));
        }
    }
    let q = jacobi_anger(1.0, 1e-3).map_err(|e| e.to_string())?.order;
    ok &= q == 6;
    lines.push(format!("q(1, 1e-3)={q}"));
    check(ok, lines.join("; "))
}

fn criterion_7() -> Outcome {
    let rho = 2.0;
    // sup |e^z| on the Bernstein ellipse E_2 is e^{(ρ + 1/ρ)/2}.
    let m = ((rho + 1.0 / rho) / 2.0f64).exp();
    let j = degree_for_accuracy(rho, m, 1e-8).map_err(|e| e.to_string())?;
    let cheb = expand(f64::exp, rho, m, j).map_err(|e| e.to_string())?;
    let mut sup = 0.0f64;
    for i in 0..=2000 {
        let x = -1.0 + i as f64 / 1000.0;
        sup = sup.max((cheb.evaluate(x).map_err(|e| e.to_string())? - x.exp()).abs());
    }
    let bound = truncation_bound(rho, m, j);
    check(sup <= bound && bound <= 1e-8, format!("J={j}, sup error {sup:.2e} ≤ {bound:.2e}"))
}

fn criterion_8(shared: &Shared) -> Outcome {
    let model = shared.model.ok_or("no fitted model from criterion 1")?;
    let h = heisenberg_benchmark(10, FIELD_SEED).map_err(|e| e.to_string())?;
    let plan = plan_recursive_1d(&h, 2.0, 4, 8, &model).map_err(|e| e.to_string())?;
    let measured = ExactBench::new(&h)
        .and_then(|mut b| b.plan_error(&plan))
        .map_err(|e| e.to_string())?;
    check(
        measured <= 2.0 * plan.predicted_error,
        format!(
            "{} steps, measured {measured:.3e} ≤ 2 × predicted {:.3e}",
            plan.steps.len(),
            plan.predicted_error
        ),
    )
}

fn criterion_9(shared: &Shared) -> Outcome {
    let model = shared.model.ok_or("no fitted model from criterion 1")?;
    let mut rows = Vec::new();
    for n in [50usize, 100, 200] {
        let h = heisenberg_benchmark(n, FIELD_SEED).map_err(|e| e.to_string())?;
        let r = estimate(&h, &EstimateRequest::new(n as f64, 1e-3, 8), &model as &dyn ErrorModel)
            .map_err(|e| e.to_string())?;
        rows.push(r);
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for w in rows.windows(2) {
        let growth = w[1].gate_estimate / w[0].gate_estimate;
        let reference = w[1].reference_n_cubed / w[0].reference_n_cubed;
        let full = w[1].reference_full_qsp / w[0].reference_full_qsp;
        ok &= (growth / 4.0 - 1.0).abs() <= 0.05 && (reference - 8.0).abs() < 1e-12;
        parts.push(format!(
            "n {}→{}: gates ×{growth:.3} (target 4±5%), n³ ×{reference:.0}, full QSP ×{full:.2}",
            w[0].n, w[1].n
        ));
    }
    for r in &rows {
        parts.push(format!("n={} t={:.4} m={} q={} gates={:.3e}", r.n, r.t_block, r.m_blocks, r.q_per_block, r.gate_estimate));
    }
    check(ok, parts.join("; "))
}

fn main() {
    // Criterion ids on the command line select a subset; 8 and 9 need 1.
    let chosen: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wants = |id: usize| chosen.is_empty() || chosen.contains(&id) || (id == 1 && chosen.iter().any(|&c| c >= 8));
    let mut shared = Shared { model: None };
    let mut failures = 0;
    let mut report = |id: usize, name: &str, run: &mut dyn FnMut() -> Outcome| {
        if !wants(id) {
            return;
        }
        match run() {
            Ok(detail) => println!("criterion {id} PASS {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("criterion {id} FAIL {name}: {detail}");
            }
        }
    };
    report(1, "staircase error sweep and fit", &mut || criterion_1(&mut shared));
    report(2, "Lieb-Robinson bound soundness", &mut criterion_2);
    report(3, "exponential perturbation bound", &mut criterion_3);
    report(4, "merged stack identity", &mut criterion_4);
    report(5, "qubiterate eigenphase law", &mut criterion_5);
    report(6, "Jacobi-Anger truncation bound", &mut criterion_6);
    report(7, "Chebyshev truncation bound", &mut criterion_7);
    report(8, "recursive plan verification", &mut || criterion_8(&shared));
    report(9, "gate estimate scaling", &mut || criterion_9(&shared));
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
