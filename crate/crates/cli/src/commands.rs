//! The `bayeslens` subcommands.

use std::ffi::OsString;
use std::path::PathBuf;

use bayeslens_core::chain::{build_hmm_expr, build_trace_expr, infer_diagram, DiagramPosterior, Method};
use bayeslens_core::finstoch::{self, FinState, FinStoch, FinSupport, StochasticMatrix, ZeroFillPolicy};
use bayeslens_core::gauss::{self, AffineSupport, Gauss, GaussianKernel};
use bayeslens_core::{
    compile_lens, evaluate, invert_expr, Bindings, CategoryBackend, Error as CoreError, InvertOptions, Profile,
    SUPPORT_TOL,
};
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::category::Category;
use crate::error::{CliError, Context, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
use crate::model::{self, AnyModel, Chain, Diagram, Model};
use crate::output::{document, line, matrix, num, nums, vector};

#[derive(Debug, Parser)]
#[command(name = "bayeslens", version, about = "Bayesian inversion of string-diagram models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Uniform,
    Error,
    First,
}

impl From<PolicyArg> for ZeroFillPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Uniform => ZeroFillPolicy::Uniform,
            PolicyArg::Error => ZeroFillPolicy::Error,
            PolicyArg::First => ZeroFillPolicy::FirstIndex,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Compositional,
    Monolithic,
    Both,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Compositional => vec![Method::Compositional],
            MethodArg::Monolithic => vec![Method::Monolithic],
            MethodArg::Both => vec![Method::Compositional, Method::Monolithic],
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            MethodArg::Compositional => "compositional",
            MethodArg::Monolithic => "monolithic",
            MethodArg::Both => "both",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a model and print one JSON line per checked item
    Check { model: PathBuf },
    /// Print the Bayesian inverse of the model's diagram at a prior
    Invert {
        model: PathBuf,
        /// Prior: a state generator, a comma-separated vector, or inline JSON
        #[arg(long)]
        at: Option<String>,
        /// What to do with observations of zero mass
        #[arg(long, value_enum, default_value_t = PolicyArg::Uniform)]
        policy: PolicyArg,
        /// Type the inverse between the supports of pushforward and prior
        #[arg(long, overrides_with = "no_support")]
        support: bool,
        #[arg(long = "no-support", overrides_with = "support")]
        no_support: bool,
        /// Mass below which a point is outside a support
        #[arg(long, default_value = "1e-12", allow_hyphen_values = true)]
        tol: f64,
        /// Trace length, for chain models without a diagram
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
        length: u64,
    },
    /// Posterior over the diagram's input given an observed output
    Infer {
        model: PathBuf,
        /// Observed output: one index per output wire (a trace, for chain
        /// models), or real coordinates for Gaussian models
        #[arg(long, allow_hyphen_values = true)]
        observe: String,
        #[arg(long, value_enum, default_value_t = MethodArg::Compositional)]
        method: MethodArg,
    },
    /// Check the inversion laws on seeded random priors
    Lawcheck {
        model: PathBuf,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trace length, for chain models without a diagram
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
        length: u64,
        /// Replace every computed inverse by a wrong one
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

/// What a run printed and how it ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

pub fn execute<I, T>(args: I) -> Execution
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Execution {
                    stdout: String::new(),
                    stderr: text,
                    code: EXIT_USAGE,
                }
            } else {
                Execution {
                    stdout: text,
                    stderr: String::new(),
                    code: EXIT_OK,
                }
            };
        }
    };
    let mut out = Vec::new();
    let (code, stderr) = match run(&cli.command, &mut out) {
        Ok(code) => (code, String::new()),
        Err(e) => {
            if !matches!(e, CliError::Usage(_)) {
                out.push(line(&e.to_json()));
            }
            (e.exit_code(), format!("error: {e}\n"))
        }
    };
    let mut stdout = out.join("\n");
    if !stdout.is_empty() {
        stdout.push('\n');
    }
    Execution { stdout, stderr, code }
}

fn run(cmd: &Command, out: &mut Vec<String>) -> Result<i32, CliError> {
    match cmd {
        Command::Check { model } => check(model, out),
        Command::Invert {
            model,
            at,
            policy,
            support,
            no_support,
            tol,
            length,
        } => {
            if *tol < 0.0 || !tol.is_finite() {
                return Err(CliError::Usage(format!("--tol must be a non-negative number, got {tol}")));
            }
            let args = InvertArgs {
                at: at.as_deref(),
                policy: (*policy).into(),
                support: *support && !*no_support,
                tol: *tol,
                length: *length as usize,
            };
            let report = match model::load_path(model)? {
                AnyModel::FinStoch(m, chain) => invert_finite(&m, chain.as_ref(), &args)?,
                AnyModel::Gauss(m) => invert_gauss(&m, &args)?,
            };
            out.push(document(&report));
            Ok(EXIT_OK)
        }
        Command::Infer { model, observe, method } => {
            let report = match model::load_path(model)? {
                AnyModel::FinStoch(m, chain) => infer_finite(&m, chain.as_ref(), &parse_indices(observe)?, *method)?,
                AnyModel::Gauss(m) => infer_gauss(&m, &parse_reals(observe)?, *method)?,
            };
            out.push(document(&report));
            Ok(EXIT_OK)
        }
        Command::Lawcheck {
            model,
            trials,
            seed,
            length,
            inject_fault,
        } => {
            let settings = LawSettings {
                trials: *trials,
                seed: *seed,
                fault: *inject_fault,
            };
            let report = match model::load_path(model)? {
                AnyModel::FinStoch(m, chain) => {
                    let (d, bindings, _) = finite_diagram(&m, chain.as_ref(), *length as usize)?;
                    lawcheck(&m.backend, &d, &bindings, &settings)?
                }
                AnyModel::Gauss(m) => {
                    let d = m.diagram.clone().ok_or_else(missing_diagram)?;
                    lawcheck(&m.backend, &d, &m.bindings, &settings)?
                }
            };
            let pass = report["status"] == "pass";
            out.push(document(&report));
            Ok(if pass { EXIT_OK } else { EXIT_FAILURE })
        }
    }
}

fn check(path: &std::path::Path, out: &mut Vec<String>) -> Result<i32, CliError> {
    let raw = model::read(path)?;
    let mut diag = Vec::new();
    let loaded = model::load(raw, &mut diag);
    out.extend(diag.iter().map(line));
    let (category, generators) = match loaded? {
        AnyModel::FinStoch(m, _) => ("finstoch", m.order.len()),
        AnyModel::Gauss(m) => ("gauss", m.order.len()),
    };
    out.push(line(&json!({"status": "ok", "category": category, "generators": generators})));
    Ok(EXIT_OK)
}

fn missing_diagram() -> CliError {
    CliError::model("missing_diagram", "the model declares no diagram")
}

fn missing_prior() -> CliError {
    CliError::model("missing_prior", "the model declares no prior; pass one with --at")
}

fn parse_indices(s: &str) -> Result<Vec<usize>, CliError> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Usage(format!("--observe expects comma-separated indices, got `{s}`")))?;
    Ok(v)
}

fn parse_reals(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Usage(format!("--observe expects comma-separated numbers, got `{s}`")))
}

/// A prior from `--at`, or the model's own.
fn prior_arg<B: Category>(m: &Model<B>, at: Option<&str>, fallback: Option<&B::Kernel>) -> Result<B::Kernel, CliError> {
    let Some(at) = at else {
        return fallback.cloned().ok_or_else(missing_prior);
    };
    let trimmed = at.trim();
    let v = if m.bindings.contains_key(trimmed) {
        Value::String(trimmed.to_string())
    } else if trimmed.starts_with('[') || trimmed.starts_with('{') {
        serde_json::from_str(trimmed).map_err(|e| CliError::Usage(format!("--at: {e}")))?
    } else {
        Value::Array(parse_reals(trimmed)?.into_iter().map(Value::from).collect())
    };
    model::resolve_prior(&v, &m.bindings, &m.backend)
}

/// The diagram a finite model is inverted along, with its bindings and prior.
fn finite_diagram(
    m: &Model<FinStoch>,
    chain: Option<&Chain>,
    length: usize,
) -> Result<(Diagram, Bindings<StochasticMatrix>, Option<FinState>), CliError> {
    if let Some(d) = &m.diagram {
        return Ok((d.clone(), m.bindings.clone(), m.prior.clone()));
    }
    let c = chain.ok_or_else(missing_diagram)?;
    let (expr, sig, bindings) = match &c.hmm {
        Some(h) => (build_hmm_expr(h, length), h.signature(), h.bindings()),
        None => (build_trace_expr(&c.model, length), c.model.signature(), c.model.bindings()),
    };
    let expr = expr.context(|| "chain".into())?;
    let d = Diagram {
        expr,
        sig,
        dom: Profile::single(c.theta.clone()),
        cod: Profile::new(vec![c.observed.clone(); length]),
    };
    Ok((d, bindings, Some(c.model.prior.clone())))
}

struct InvertArgs<'a> {
    at: Option<&'a str>,
    policy: ZeroFillPolicy,
    support: bool,
    tol: f64,
    length: usize,
}

fn policy_name(p: ZeroFillPolicy) -> &'static str {
    match p {
        ZeroFillPolicy::Uniform => "uniform",
        ZeroFillPolicy::Error => "error",
        ZeroFillPolicy::FirstIndex => "first",
    }
}

fn check_prior_size<B: CategoryBackend>(b: &B, f: &B::Kernel, p: &B::Kernel) -> Result<(), CliError> {
    if b.cod_size(p) != b.dom_size(f) {
        return Err(CliError::Core {
            context: Some("prior".into()),
            source: CoreError::DimensionMismatch {
                op: "prior against diagram domain",
                left: b.cod_size(p),
                right: b.dom_size(f),
            },
        });
    }
    Ok(())
}

fn finite_rows(k: &StochasticMatrix, row_labels: &[String]) -> Value {
    let mut rows = Map::new();
    for (i, label) in row_labels.iter().enumerate() {
        rows.insert(label.clone(), nums((0..k.cod_card()).map(|j| k.get(i, j))));
    }
    Value::Object(rows)
}

fn labels_of(p: &Profile, indices: impl IntoIterator<Item = usize>) -> Vec<String> {
    indices.into_iter().map(|i| p.label(i)).collect()
}

fn invert_finite(m: &Model<FinStoch>, chain: Option<&Chain>, args: &InvertArgs) -> Result<Value, CliError> {
    let (d, bindings, prior) = finite_diagram(m, chain, args.length)?;
    let p = prior_arg(m, args.at, prior.as_ref())?;
    let f = evaluate(&d.expr, &FinStoch, &bindings).context(|| "diagram".into())?;
    check_prior_size(&FinStoch, &f, &p)?;
    let mut r = Map::new();
    r.insert("category".into(), json!("finstoch"));
    r.insert("inverse".into(), json!({"dom": d.cod.to_string(), "cod": d.dom.to_string()}));
    r.insert("supported".into(), json!(args.support));
    if args.support {
        let opts = InvertOptions {
            support_tol: args.tol,
            ..InvertOptions::default()
        };
        let inv = invert_expr(&d.expr, &d.sig, &p, &FinStoch, &bindings, opts)?;
        let s = &inv.inverse;
        let inc = finstoch::include(&s.kernel, &s.dom_support, &s.cod_support)?;
        r.insert("layers".into(), json!(inv.layers));
        r.insert("shape".into(), json!([s.kernel.dom_card(), s.kernel.cod_card()]));
        r.insert("dom_support".into(), json!(s.dom_support.indices()));
        r.insert("cod_support".into(), json!(s.cod_support.indices()));
        r.insert("columns".into(), json!(labels_of(&d.dom, s.cod_support.indices().iter().copied())));
        let rows = labels_of(&d.cod, s.dom_support.indices().iter().copied());
        r.insert("kernel".into(), finite_rows(&s.kernel, &rows));
        r.insert("residual".into(), num(finstoch::inversion_residual(&f, &inc, &p)?));
    } else {
        let inv = finstoch::bayes_invert(&f, &p, args.policy)?;
        r.insert("policy".into(), json!(policy_name(args.policy)));
        r.insert("shape".into(), json!([inv.dom_card(), inv.cod_card()]));
        r.insert("columns".into(), json!(labels_of(&d.dom, 0..f.dom_card())));
        r.insert("kernel".into(), finite_rows(&inv, &labels_of(&d.cod, 0..f.cod_card())));
        r.insert("residual".into(), num(finstoch::inversion_residual(&f, &inv, &p)?));
    }
    Ok(Value::Object(r))
}

fn gauss_kernel_json(k: &GaussianKernel) -> Value {
    json!({"M": matrix(k.matrix()), "b": vector(k.offset()), "S": matrix(k.noise())})
}

fn affine_json(s: &AffineSupport) -> Value {
    json!({"rank": s.rank(), "basis": matrix(s.basis()), "offset": vector(s.offset())})
}

fn invert_gauss(m: &Model<Gauss>, args: &InvertArgs) -> Result<Value, CliError> {
    let d = m.diagram.as_ref().ok_or_else(missing_diagram)?;
    let p = prior_arg(m, args.at, m.prior.as_ref())?;
    let b = &m.backend;
    let f = evaluate(&d.expr, b, &m.bindings).context(|| "diagram".into())?;
    check_prior_size(b, &f, &p)?;
    let mut r = Map::new();
    r.insert("category".into(), json!("gauss"));
    r.insert("inverse".into(), json!({"dom": d.cod.to_string(), "cod": d.dom.to_string()}));
    r.insert("supported".into(), json!(args.support));
    if args.support {
        let opts = InvertOptions {
            support_tol: args.tol,
            ..InvertOptions::default()
        };
        let inv = invert_expr(&d.expr, &d.sig, &p, b, &m.bindings, opts)?;
        let s = &inv.inverse;
        let inc = gauss::include(&s.kernel, &s.dom_support, &s.cod_support)?;
        r.insert("layers".into(), json!(inv.layers));
        r.insert("shape".into(), json!([s.kernel.cod_dim(), s.kernel.dom_dim()]));
        r.insert("dom_support".into(), affine_json(&s.dom_support));
        r.insert("cod_support".into(), affine_json(&s.cod_support));
        r.insert("kernel".into(), gauss_kernel_json(&s.kernel));
        r.insert("residual".into(), num(gauss::inversion_residual(&f, &inc, &p)?));
    } else {
        let inv = b.bayes_invert(&f, &p, &InvertOptions::default())?;
        r.insert("shape".into(), json!([inv.cod_dim(), inv.dom_dim()]));
        r.insert("kernel".into(), gauss_kernel_json(&inv));
        r.insert("residual".into(), num(gauss::inversion_residual(&f, &inv, &p)?));
    }
    Ok(Value::Object(r))
}

/// Row-major index of a tuple of outputs.
fn flat_index(obs: &[usize], cod: &Profile) -> Result<usize, CliError> {
    let wires = cod.wires();
    if obs.len() != wires.len() {
        return Err(CliError::Usage(format!(
            "--observe has {} entries but the diagram has {} outputs",
            obs.len(),
            wires.len()
        )));
    }
    let mut idx = 0usize;
    for (&o, w) in obs.iter().zip(wires) {
        if o >= w.size() {
            return Err(CliError::Usage(format!(
                "observed index {o} is out of range for `{}` of size {}",
                w.name(),
                w.size()
            )));
        }
        idx = idx * w.size() + o;
    }
    Ok(idx)
}

fn infer_finite(m: &Model<FinStoch>, chain: Option<&Chain>, obs: &[usize], method: MethodArg) -> Result<Value, CliError> {
    let length = if chain.is_some() && m.diagram.is_none() { obs.len() } else { 1 };
    let (d, bindings, prior) = finite_diagram(m, chain, length)?;
    let p = prior.ok_or_else(missing_prior)?;
    let index = flat_index(obs, &d.cod)?;
    let runs = method
        .methods()
        .into_iter()
        .map(|meth| infer_diagram(&d.expr, &d.sig, &bindings, &p, index, meth))
        .collect::<Result<Vec<DiagramPosterior>, _>>()?;
    let first = &runs[0].posterior;
    let support = first.support.indices();
    let mut posterior = Map::new();
    for (i, &x) in support.iter().enumerate() {
        posterior.insert(d.dom.label(x), num(first.state.get(0, i)));
    }
    let post_support: FinSupport = first.posterior_support(SUPPORT_TOL)?;
    let mut residual = 0.0f64;
    for run in &runs {
        residual = residual.max(run.law_residual(&p)?);
    }
    let mut r = Map::new();
    r.insert("method".into(), json!(method.as_str()));
    r.insert("observation".into(), json!(obs));
    r.insert("observation_index".into(), json!(index));
    r.insert("evidence".into(), num(first.evidence));
    r.insert("support".into(), json!(support));
    r.insert("posterior".into(), Value::Object(posterior));
    r.insert("posterior_support".into(), json!(post_support.indices()));
    r.insert("posterior_total".into(), num(first.state.probs().iter().sum()));
    r.insert("residual".into(), num(residual));
    if let [a, b] = runs.as_slice() {
        let gap = a
            .posterior
            .on_base()
            .iter()
            .zip(b.posterior.on_base())
            .fold(0.0f64, |g, (x, y)| g.max((x - y).abs()));
        r.insert("discrepancy".into(), num(gap));
    }
    Ok(Value::Object(r))
}

/// `log` of the density of `q` at `y`, relative to Lebesgue measure on the
/// support of `q`.
fn log_density_on_support(q: &GaussianKernel, s: &AffineSupport, y: &DVector<f64>) -> f64 {
    let k = s.rank();
    if k == 0 {
        return 0.0;
    }
    let basis = s.basis();
    let z = basis.transpose() * (y - q.mean());
    let c = basis.transpose() * q.cov() * basis;
    let chol = c.cholesky().expect("covariance is positive definite on its support");
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let quad = z.dot(&chol.solve(&z));
    -0.5 * (k as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + quad)
}

fn infer_gauss(m: &Model<Gauss>, y: &[f64], method: MethodArg) -> Result<Value, CliError> {
    let d = m.diagram.as_ref().ok_or_else(missing_diagram)?;
    let p = m.prior.clone().ok_or_else(missing_prior)?;
    let b = &m.backend;
    let f = evaluate(&d.expr, b, &m.bindings).context(|| "diagram".into())?;
    check_prior_size(b, &f, &p)?;
    if y.len() != f.cod_dim() {
        return Err(CliError::Usage(format!(
            "--observe has {} coordinates but the diagram output has dimension {}",
            y.len(),
            f.cod_dim()
        )));
    }
    let y = DVector::from_column_slice(y);
    let q = gauss::pushforward(&f, &p)?;
    let sq = b.support_of(&q, SUPPORT_TOL)?;
    let off = &y - sq.offset();
    let along = sq.basis() * (sq.basis().transpose() * &off);
    let scale = 1.0 + y.amax();
    if (&off - along).amax() > 1e-9 * scale {
        return Err(CoreError::ZeroMassObservation { index: 0 }.into());
    }
    let mut inverses = Vec::new();
    for meth in method.methods() {
        let inv = match meth {
            Method::Compositional => compile_lens(&d.expr, &d.sig, b, &m.bindings, InvertOptions::default())?
                .to_lens()
                .backward(&p)?,
            Method::Monolithic => b.bayes_invert(&f, &p, &InvertOptions::default())?,
        };
        let post = GaussianKernel::state(inv.matrix() * &y + inv.offset(), inv.noise().clone())?;
        inverses.push((inv, post));
    }
    let mut residual = 0.0f64;
    for (inv, _) in &inverses {
        residual = residual.max(gauss::inversion_residual(&f, inv, &p)?);
    }
    let post = &inverses[0].1;
    let mut r = Map::new();
    r.insert("method".into(), json!(method.as_str()));
    r.insert("observation".into(), vector(&y));
    r.insert("log_density".into(), num(log_density_on_support(&q, &sq, &y)));
    r.insert("support_rank".into(), json!(sq.rank()));
    r.insert("posterior".into(), json!({"mean": vector(post.mean()), "cov": matrix(post.cov())}));
    r.insert("residual".into(), num(residual));
    if let [(_, a), (_, c)] = inverses.as_slice() {
        let gap = (a.mean() - c.mean()).amax().max((a.cov() - c.cov()).amax());
        r.insert("discrepancy".into(), num(gap));
    }
    Ok(Value::Object(r))
}

struct LawSettings {
    trials: u64,
    seed: u64,
    fault: bool,
}

#[derive(Default)]
struct Worst {
    residual: f64,
    trial: u64,
}

impl Worst {
    fn update(&mut self, r: f64, trial: u64) {
        // NaN counts as a failure
        if r > self.residual || r.is_nan() {
            self.residual = r;
            self.trial = trial;
        }
    }

    fn json(&self, name: &str, tol: f64) -> (Value, bool) {
        let pass = self.residual <= tol;
        (
            json!({
                "suite": name,
                "tol": num(tol),
                "max_residual": num(self.residual),
                "worst_trial": self.trial,
                "pass": pass,
            }),
            pass,
        )
    }
}

fn lawcheck<B: Category>(b: &B, d: &Diagram, bindings: &Bindings<B::Kernel>, s: &LawSettings) -> Result<Value, CliError> {
    let opts = InvertOptions::default();
    let f = evaluate(&d.expr, b, bindings).context(|| "diagram".into())?;
    let lens = compile_lens(&d.expr, &d.sig, b, bindings, opts)?;
    let layers = bayeslens_core::normalize(&d.expr, &d.sig)?.len();
    let n = b.dom_size(&f);
    let (mut law, mut chain, mut section) = (Worst::default(), Worst::default(), Worst::default());
    for t in 0..s.trials {
        // one stream per trial, so trials do not depend on each other
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        rng.set_stream(t);
        let p = B::random_prior(&mut rng, n);
        let q = b.pushforward(&f, &p)?;

        let mut inv = b.bayes_invert(&f, &p, &opts)?;
        if s.fault {
            inv = b.corrupt(&inv);
        }
        law.update(b.inversion_residual(&f, &inv, &p)?, t);

        let layered = lens.backward(&p)?;
        let mono = b.bayes_invert_supported(&f, &p, opts.support_tol)?;
        let mut inc = b.include(&layered.kernel, &layered.dom_support, &layered.cod_support)?;
        if s.fault {
            inc = b.corrupt(&inc);
        }
        let r = b.inversion_residual(&f, &inc, &p)?.max(b.supported_gap(&layered, &mono, &q)?);
        chain.update(r, t);

        let sp = b.support_of(&p, opts.support_tol)?;
        let k = b.support_size(&sp);
        let ri = b.max_abs_diff(&b.restrict(&b.identity(n), &sp, &sp)?, &b.identity(k))?;
        let ir = b.almost_equal_residual(&b.include(&b.identity(k), &sp, &sp)?, &b.identity(n), &p)?;
        section.update(ri.max(ir), t);
    }
    let suites = [
        law.json("inversion_law", B::LAW_TOL),
        chain.json("chain_rule", B::CHAIN_TOL),
        section.json("section_retraction", B::SECTION_TOL),
    ];
    let pass = suites.iter().all(|(_, ok)| *ok);
    Ok(json!({
        "category": B::NAME,
        "trials": s.trials,
        "seed": s.seed,
        "layers": layers,
        "suites": suites.into_iter().map(|(v, _)| v).collect::<Vec<_>>(),
        "status": if pass { "pass" } else { "fail" },
    }))
}
