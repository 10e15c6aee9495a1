//! One PASS/FAIL line per acceptance criterion. Tolerances are fixed here
//! and never adjusted to make a line pass.

#[path = "../../core/tests/common/mod.rs"]
mod common;
mod support;

use std::time::{Duration, Instant};

use bayeslens_core::chain::{build_trace_expr, infer_diagram, posterior_parameters, sticky_transition, trace_index};
use bayeslens_core::chain::{MarkovChainModel, Method};
use bayeslens_core::finstoch::{self, FinStoch, StochasticMatrix, ZeroFillPolicy};
use bayeslens_core::gauss::{self, Gauss, GaussianKernel};
use bayeslens_core::{
    compile_lens, evaluate, evaluate_normal_form, invert_expr, normalize, Bindings, CategoryBackend, InvertOptions,
    KernelExpr, ObjectRef, Profile, Signature,
};
use common::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn two_step(f: &StochasticMatrix, g: &StochasticMatrix) -> (KernelExpr, Signature, Bindings<StochasticMatrix>) {
    let x = ObjectRef::finite("X", f.dom_card()).unwrap();
    let y = ObjectRef::finite("Y", f.cod_card()).unwrap();
    let z = ObjectRef::finite("Z", g.cod_card()).unwrap();
    let mut sig = Signature::new();
    sig.insert("f", x.into(), y.clone().into());
    sig.insert("g", y.into(), z.into());
    let mut b = Bindings::new();
    b.insert("f".to_string(), f.clone());
    b.insert("g".to_string(), g.clone());
    (KernelExpr::seq([KernelExpr::gen("f"), KernelExpr::gen("g")]), sig, b)
}

/// Largest gap between the joint `p(x) f(y|x)` and `q(y) finv(x|y)`, both
/// tabulated densely here.
fn joint_gap(f: &[Vec<f64>], finv: &StochasticMatrix, p: &[f64]) -> f64 {
    let joint = joint_table(f, p);
    let q = pushforward_dense(f, p);
    let mut gap = 0.0f64;
    for (x, row) in joint.iter().enumerate() {
        for (y, v) in row.iter().enumerate() {
            gap = gap.max((v - q[y] * finv.get(y, x)).abs());
        }
    }
    gap
}

fn inversion_law() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..200u64 {
        let mut r = rng(seed);
        let (n, m) = (r.gen_range(1..=8), r.gen_range(1..=8));
        let f = random_kernel(&mut r, n, m, 0.3);
        let p = random_state(&mut r, n, 0.3);
        let inv = finstoch::bayes_invert(&f, &p, ZeroFillPolicy::Uniform).unwrap();
        worst = worst.max(joint_gap(&f.to_dense(), &inv, &p.probs()));
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-9 && t < Duration::from_secs(5),
        format!("max joint residual {worst:.3e} (tol 1e-9), {t:.2?} (limit 5s)"),
    )
}

fn chain_rule() -> Outcome {
    let mut worst = 0.0f64;
    let mut columns = 0;
    for seed in 0..100u64 {
        let mut r = rng(1000 + seed);
        let d: Vec<usize> = (0..3).map(|_| r.gen_range(1..=8)).collect();
        let f = random_kernel(&mut r, d[0], d[1], 0.3);
        let g = random_kernel(&mut r, d[1], d[2], 0.3);
        let p = random_state(&mut r, d[0], 0.3);
        let (e, sig, b) = two_step(&f, &g);
        let layered = compile_lens(&e, &sig, &FinStoch, &b, InvertOptions::default()).unwrap().to_lens();
        let lens_inv = layered.backward(&p).unwrap();
        let gf = f.compose(&g).unwrap();
        let mono = finstoch::bayes_invert(&gf, &p, ZeroFillPolicy::Uniform).unwrap();
        // positive-mass columns against each other and against enumeration
        for (z, row) in oracle_inverse(&gf.to_dense(), &p.probs()).iter().enumerate() {
            let Some(row) = row else { continue };
            columns += 1;
            for (x, want) in row.iter().enumerate() {
                worst = worst
                    .max((lens_inv.get(z, x) - mono.get(z, x)).abs())
                    .max((lens_inv.get(z, x) - want).abs());
            }
        }
    }
    outcome(worst <= 1e-9, format!("{columns} positive-mass columns, max gap {worst:.3e} (tol 1e-9)"))
}

fn exact_functoriality() -> Outcome {
    let (mut func, mut policy) = (0.0f64, 0.0f64);
    for seed in 0..100u64 {
        let mut r = rng(2000 + seed);
        let d: Vec<usize> = (0..3).map(|_| r.gen_range(1..=8)).collect();
        let f = random_kernel(&mut r, d[0], d[1], 0.35);
        let g = random_kernel(&mut r, d[1], d[2], 0.35);
        let p = random_state(&mut r, d[0], 0.35);
        let q = finstoch::pushforward(&f, &p).unwrap();
        let gf = f.compose(&g).unwrap();
        let whole = finstoch::bayes_invert_supported(&gf, &p, 1e-12).unwrap();
        let fs = finstoch::bayes_invert_supported(&f, &p, 1e-12).unwrap();
        let gs = finstoch::bayes_invert_supported(&g, &q, 1e-12).unwrap();
        assert_eq!(gs.cod_support, fs.dom_support);
        let composed = gs.kernel.compose(&fs.kernel).unwrap();
        func = func.max(whole.kernel.max_abs_diff(&composed).unwrap());

        let (e, sig, b) = two_step(&f, &g);
        let sp = finstoch::support_of(&p, 1e-12).unwrap();
        let sr = finstoch::support_of(&finstoch::pushforward(&gf, &p).unwrap(), 1e-12).unwrap();
        let mut seen: Vec<StochasticMatrix> = Vec::new();
        for zero_policy in [ZeroFillPolicy::Uniform, ZeroFillPolicy::Error, ZeroFillPolicy::FirstIndex] {
            let opts = InvertOptions { zero_policy, ..InvertOptions::default() };
            seen.push(invert_expr(&e, &sig, &p, &FinStoch, &b, opts).unwrap().inverse.kernel);
            seen.push(FinStoch.invert_restricted(&gf, &p, &sp, &sr, &opts).unwrap());
        }
        for k in &seen {
            policy = policy.max(k.max_abs_diff(&seen[0]).unwrap());
        }
    }
    outcome(
        func <= 1e-9 && policy <= 1e-12,
        format!("composite vs composed {func:.3e} (tol 1e-9), across policies {policy:.3e} (tol 1e-12)"),
    )
}

fn section_retraction() -> Outcome {
    let (mut ri, mut ir) = (0.0f64, 0.0f64);
    let mut with_zeros = 0;
    for seed in 0..100u64 {
        let mut r = rng(3000 + seed);
        let n = r.gen_range(1..=8);
        let p = random_state(&mut r, n, 0.4);
        let s = finstoch::support_of(&p, 1e-12).unwrap();
        if s.len() < n {
            with_zeros += 1;
        }
        let id = StochasticMatrix::identity(n);
        let k = s.len();
        ri = ri.max(finstoch::restrict(&id, &s, &s).unwrap().max_abs_diff(&StochasticMatrix::identity(k)).unwrap());
        let round = finstoch::include(&StochasticMatrix::identity(k), &s, &s).unwrap();
        ir = ir.max(finstoch::almost_equal_residual(&round, &id, &p).unwrap());
    }
    outcome(
        ri <= 1e-12 && ir <= 1e-12 && with_zeros > 0,
        format!("r∘i {ri:.3e}, i∘r {ir:.3e} (tol 1e-12), {with_zeros}/100 states with zeros"),
    )
}

/// Means and covariances of `(x, y)` under `p` then `f`, and of `(x, y)`
/// under `q` then `finv`, written out from the affine formulas.
fn gauss_joint_gap(f: &GaussianKernel, finv: &GaussianKernel, p: &GaussianKernel) -> f64 {
    let (m, s) = (f.matrix(), f.noise());
    let (mu, sigma) = (p.mean(), p.cov());
    let qm = m * mu + f.offset();
    let qc = m * sigma * m.transpose() + s;
    let (k, t) = (finv.matrix(), finv.noise());
    let back_mean = k * &qm + finv.offset();
    let back_cov = k * &qc * k.transpose() + t;
    let back_cross = k * &qc;
    let cross = sigma * m.transpose();
    let gaps = [
        (mu - back_mean).amax(),
        (sigma - back_cov).amax(),
        (cross - back_cross).amax(),
    ];
    gaps.into_iter().fold(0.0, f64::max)
}

fn gauss_inversion() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_seed = 0;
    for seed in 0..100u64 {
        let mut r = rng(4000 + seed);
        let (n, m) = (r.gen_range(1..=5), r.gen_range(1..=5));
        let full = r.gen_bool(0.5);
        let f = random_gauss_kernel(&mut r, n, m);
        let p = random_gauss_state(&mut r, n, full);
        let inv = gauss::bayes_invert(&f, &p).unwrap();
        let gap = gauss_joint_gap(&f, &inv, &p);
        if gap > worst {
            worst = gap;
            worst_seed = seed;
        }
    }
    let f = GaussianKernel::new(DMatrix::identity(1, 1), DVector::zeros(1), DMatrix::identity(1, 1)).unwrap();
    let p = GaussianKernel::state(DVector::zeros(1), DMatrix::identity(1, 1)).unwrap();
    let inv = Gauss::default().bayes_invert(&f, &p, &InvertOptions::default()).unwrap();
    let conj = [
        (inv.matrix()[(0, 0)] - 0.5).abs(),
        inv.offset()[0].abs(),
        (inv.noise()[(0, 0)] - 0.5).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    outcome(
        worst <= 1e-8 && conj <= 1e-10,
        format!("max joint gap {worst:.3e} at seed {worst_seed} (tol 1e-8), conjugate case {conj:.3e} (tol 1e-10)"),
    )
}

fn sticky() -> MarkovChainModel {
    MarkovChainModel::new(
        sticky_transition(2, &[0.9, 0.5]).unwrap(),
        StochasticMatrix::dirac(2, 0).unwrap(),
        StochasticMatrix::uniform(2),
    )
    .unwrap()
}

fn chain_demo() -> Outcome {
    let want = 0.729 / 0.854;
    let mut demo = 0.0f64;
    for method in [Method::Compositional, Method::Monolithic] {
        let post = posterior_parameters(&sticky(), &[0, 0, 0, 0], method).unwrap();
        demo = demo.max((post.on_base()[0] - want).abs());
    }
    let start = Instant::now();
    let (mut agree, mut runs) = (0.0f64, 0);
    for s in 1..=4usize {
        for th in 1..=5usize {
            for n in 1..=6usize {
                let mut r = rng((s * 100 + th * 10 + n) as u64);
                let m = MarkovChainModel::new(
                    random_kernel(&mut r, s * th, s, 0.25),
                    random_state(&mut r, s, 0.3),
                    random_state(&mut r, th, 0.2),
                )
                .unwrap();
                let e = build_trace_expr(&m, n).unwrap();
                let (sig, b) = (m.signature(), m.bindings());
                for _ in 0..3 {
                    let trace: Vec<usize> = (0..n).map(|_| r.gen_range(0..s)).collect();
                    let idx = trace_index(&trace, s).unwrap();
                    let c = infer_diagram(&e, &sig, &b, &m.prior, idx, Method::Compositional);
                    let mo = infer_diagram(&e, &sig, &b, &m.prior, idx, Method::Monolithic);
                    match (c, mo) {
                        (Ok(c), Ok(mo)) => {
                            runs += 1;
                            for (a, b) in c.posterior.on_base().iter().zip(mo.posterior.on_base()) {
                                agree = agree.max((a - b).abs());
                            }
                        }
                        // both must agree that the trace is impossible
                        (Err(_), Err(_)) => {}
                        _ => agree = f64::INFINITY,
                    }
                }
            }
        }
    }
    let t = start.elapsed();
    outcome(
        demo <= 1e-9 && agree <= 1e-9 && t < Duration::from_secs(10),
        format!(
            "θ₀ gap {demo:.3e} (tol 1e-9), methods agree to {agree:.3e} over {runs} traces (tol 1e-9), sweep {t:.2?} (limit 10s)"
        ),
    )
}

fn copy_support() -> Outcome {
    let mut sizes_ok = true;
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut r = rng(5000 + seed);
        let n = r.gen_range(1..=8);
        let p = random_state(&mut r, n, 0.4);
        let copy = StochasticMatrix::copy(n).unwrap();
        let q = finstoch::pushforward(&copy, &p).unwrap();
        let sp = finstoch::support_of(&p, 1e-12).unwrap();
        let sq = finstoch::support_of(&q, 1e-12).unwrap();
        sizes_ok &= sp.len() == sq.len();
        let inv = finstoch::bayes_invert_supported(&copy, &p, 1e-12).unwrap();
        let copy_s = finstoch::restrict(&copy, &sp, &sq).unwrap();
        let round = copy_s.compose(&inv.kernel).unwrap();
        worst = worst.max(round.max_abs_diff(&StochasticMatrix::identity(sp.len())).unwrap());
    }
    outcome(
        sizes_ok && worst <= 1e-12,
        format!("support sizes equal: {sizes_ok}, inverse∘copy vs id {worst:.3e} (tol 1e-12)"),
    )
}

fn ir_soundness() -> Outcome {
    let mut worst = 0.0f64;
    let mut deepest = 0;
    for seed in 0..200u64 {
        let pool: Vec<ObjectRef> = (1..=4).map(|k| ObjectRef::finite(format!("A{k}"), k).unwrap()).collect();
        let mut g = DiagramGen::new(rng(6000 + seed), pool.clone(), |r, d, c| random_kernel(r, d, c, 0.3));
        let dom = Profile::new([pool[(seed % 4) as usize].clone(), pool[(seed / 4 % 4) as usize].clone()]);
        let (e, _) = g.expr(&dom, 5);
        let nf = normalize(&e, &g.sig).unwrap();
        deepest = deepest.max(nf.len());
        let direct = evaluate(&e, &FinStoch, &g.bindings).unwrap();
        let layered = evaluate_normal_form(&nf, &FinStoch, &g.bindings).unwrap();
        worst = worst.max(direct.max_abs_diff(&layered).unwrap());
    }
    outcome(worst <= 1e-12, format!("max gap {worst:.3e} (tol 1e-12), up to {deepest} layers"))
}

fn cli_determinism() -> Outcome {
    let bad = support::golden_mismatches();
    let cases = support::GOLDEN.len();
    if bad.is_empty() {
        outcome(true, format!("{cases} golden files byte-identical"))
    } else {
        outcome(false, format!("{} of {cases} differ: {}", bad.len(), bad.join("; ")))
    }
}

fn main() {
    // keep `cargo test -- --list` and filters from running the whole suite
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("inversion law", inversion_law),
        ("chain rule", chain_rule),
        ("exact functoriality with supports", exact_functoriality),
        ("section-retraction", section_retraction),
        ("gaussian inversion", gauss_inversion),
        ("sticky chain posterior", chain_demo),
        ("copy support isomorphism", copy_support),
        ("normal form soundness", ir_soundness),
        ("cli determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("{} {}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
