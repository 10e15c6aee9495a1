//! Model files: parsing, validation and the typed model the commands run on.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use bayeslens_core::chain::{HmmModel, MarkovChainModel};
use bayeslens_core::{
    normalize, typecheck, Bindings, CategoryBackend, Error as CoreError, FinStoch, Gauss, KernelExpr, ObjectRef,
    Profile, Signature,
};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::category::Category;
use crate::error::{CliError, Context};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModel {
    pub category: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub objects: Map<String, Value>,
    #[serde(default)]
    pub generators: Map<String, Value>,
    #[serde(default)]
    pub diagram: Option<Value>,
    #[serde(default)]
    pub prior: Option<Value>,
    #[serde(default)]
    pub chain: Option<RawChain>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawObject {
    pub card: Option<usize>,
    pub labels: Option<Vec<String>>,
    pub dim: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum Wires {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGenerator {
    pub dom: Wires,
    pub cod: Wires,
    pub rows: Option<Vec<Vec<f64>>>,
    #[serde(rename = "M")]
    pub m: Option<Vec<Vec<f64>>>,
    pub b: Option<Vec<f64>>,
    #[serde(rename = "S")]
    pub s: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawChain {
    pub transition: String,
    pub initial: String,
    #[serde(default)]
    pub observation: Option<String>,
}

/// A diagram together with its type.
#[derive(Debug, Clone)]
pub struct Diagram {
    pub expr: KernelExpr,
    pub sig: Signature,
    pub dom: Profile,
    pub cod: Profile,
}

#[derive(Debug, Clone)]
pub struct Model<B: CategoryBackend> {
    pub backend: B,
    pub objects: BTreeMap<String, ObjectRef>,
    pub sig: Signature,
    pub bindings: Bindings<B::Kernel>,
    /// Generator names in file order.
    pub order: Vec<String>,
    pub diagram: Option<Diagram>,
    pub prior: Option<B::Kernel>,
}

/// The parameter-learning reading of a finite model.
#[derive(Debug, Clone)]
pub struct Chain {
    pub model: MarkovChainModel,
    pub hmm: Option<HmmModel>,
    pub state: ObjectRef,
    pub theta: ObjectRef,
    /// What a trace entry ranges over: the state object, or the observation
    /// object of a hidden chain.
    pub observed: ObjectRef,
}

#[derive(Debug, Clone)]
// built once per run, so the size gap between variants does not matter
#[allow(clippy::large_enum_variant)]
pub enum AnyModel {
    FinStoch(Model<FinStoch>, Option<Chain>),
    Gauss(Model<Gauss>),
}

pub fn read(path: &Path) -> Result<RawModel, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(e.to_string()))
}

/// Loads a model, appending one diagnostic per validated item to `diag`.
pub fn load(raw: RawModel, diag: &mut Vec<Value>) -> Result<AnyModel, CliError> {
    match raw.category.as_str() {
        "finstoch" => {
            let (model, chain_spec) = build::<FinStoch>(raw, diag)?;
            let chain = chain_spec.map(|c| build_chain(&model, &c, diag)).transpose()?;
            Ok(AnyModel::FinStoch(model, chain))
        }
        "gauss" => {
            let (model, chain_spec) = build::<Gauss>(raw, diag)?;
            if chain_spec.is_some() {
                return Err(CliError::model(
                    "chain_unsupported",
                    "chain models need finite states and parameters",
                ));
            }
            Ok(AnyModel::Gauss(model))
        }
        other => Err(CliError::Parse(format!(
            "unknown category `{other}`, expected finstoch or gauss"
        ))),
    }
}

pub fn load_path(path: &Path) -> Result<AnyModel, CliError> {
    load(read(path)?, &mut Vec::new())
}

fn wires(w: &Wires) -> Vec<&str> {
    match w {
        Wires::One(s) if s == "I" => Vec::new(),
        Wires::One(s) => vec![s.as_str()],
        Wires::Many(v) => v.iter().map(String::as_str).collect(),
    }
}

fn object<'a>(objects: &'a BTreeMap<String, ObjectRef>, name: &str, at: &str) -> Result<&'a ObjectRef, CliError> {
    objects.get(name).ok_or_else(|| CliError::Core {
        context: None,
        source: CoreError::UnboundName {
            name: name.to_string(),
            path: at.to_string(),
        },
    })
}

fn profile(objects: &BTreeMap<String, ObjectRef>, w: &Wires, at: &str) -> Result<Profile, CliError> {
    let objs = wires(w)
        .into_iter()
        .map(|n| object(objects, n, at).cloned())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Profile::new(objs))
}

fn build<B: Category>(raw: RawModel, diag: &mut Vec<Value>) -> Result<(Model<B>, Option<RawChain>), CliError> {
    let mut objects = BTreeMap::new();
    for (name, v) in raw.objects {
        let spec: RawObject =
            serde_json::from_value(v).map_err(|e| CliError::Parse(format!("object `{name}`: {e}")))?;
        let obj = B::object(&name, spec)?;
        objects.insert(name, obj);
    }

    let mut sig = Signature::new();
    let mut bindings = Bindings::new();
    let mut order = Vec::new();
    for (name, v) in raw.generators {
        let at = format!("generator {name}");
        let g: RawGenerator = serde_json::from_value(v).map_err(|e| CliError::Parse(format!("{at}: {e}")))?;
        let dom = profile(&objects, &g.dom, &at)?;
        let cod = profile(&objects, &g.cod, &at)?;
        let (n, m) = (
            dom.size(B::TAG).context(|| at.clone())?,
            cod.size(B::TAG).context(|| at.clone())?,
        );
        let k = B::kernel(&g, n, m).context(|| at.clone())?;
        let mut d = Map::new();
        d.insert("generator".into(), json!(name));
        d.insert("dom".into(), json!(dom.to_string()));
        d.insert("cod".into(), json!(cod.to_string()));
        d.extend(B::diagnostics(&k));
        d.insert("status".into(), json!("ok"));
        diag.push(Value::Object(d));
        sig.insert(name.clone(), dom, cod);
        bindings.insert(name.clone(), k);
        order.push(name);
    }

    let diagram = match raw.diagram {
        None => None,
        Some(v) => {
            let expr = parse_expr(&v, &objects, "")?;
            let (dom, cod) = typecheck(&expr, &sig).context(|| "diagram".into())?;
            let layers = normalize(&expr, &sig).context(|| "diagram".into())?.len();
            diag.push(json!({
                "diagram": {"dom": dom.to_string(), "cod": cod.to_string(), "layers": layers},
                "status": "ok",
            }));
            Some(Diagram {
                expr,
                sig: sig.clone(),
                dom,
                cod,
            })
        }
    };

    let backend = B::default();
    let prior = match raw.prior {
        None => None,
        Some(v) => {
            let k = resolve_prior::<B>(&v, &bindings, &backend)?;
            if let Some(d) = &diagram {
                let want = d.dom.size(B::TAG).context(|| "prior".into())?;
                if backend.cod_size(&k) != want {
                    return Err(CliError::Core {
                        context: Some("prior".into()),
                        source: CoreError::DimensionMismatch {
                            op: "prior against diagram domain",
                            left: backend.cod_size(&k),
                            right: want,
                        },
                    });
                }
            }
            diag.push(json!({"prior": {"size": backend.cod_size(&k)}, "status": "ok"}));
            Some(k)
        }
    };

    Ok((
        Model {
            backend,
            objects,
            sig,
            bindings,
            order,
            diagram,
            prior,
        },
        raw.chain,
    ))
}

/// A prior given as a generator name or inline.
pub fn resolve_prior<B: Category>(v: &Value, bindings: &Bindings<B::Kernel>, b: &B) -> Result<B::Kernel, CliError> {
    let k = match v {
        Value::String(name) => bindings.get(name).cloned().ok_or_else(|| CliError::Core {
            context: Some("prior".into()),
            source: CoreError::UnboundName {
                name: name.clone(),
                path: "prior".into(),
            },
        })?,
        other => B::inline_prior(other).context(|| "prior".into())?,
    };
    b.validate_state(&k).context(|| "prior".into())?;
    Ok(k)
}

fn single<'a>(v: &'a Value, path: &str) -> Result<(&'a str, &'a Value), CliError> {
    match v.as_object() {
        Some(m) if m.len() == 1 => {
            let (k, v) = m.iter().next().expect("one entry");
            Ok((k.as_str(), v))
        }
        _ => Err(CliError::Parse(format!(
            "diagram node at {} must be an object with exactly one key",
            if path.is_empty() { "root" } else { path }
        ))),
    }
}

fn name_of<'a>(v: &'a Value, what: &str, path: &str) -> Result<&'a str, CliError> {
    v.as_str()
        .ok_or_else(|| CliError::Parse(format!("`{what}` at {} expects a name", if path.is_empty() { "root" } else { path })))
}

fn join(path: &str, key: &str, i: usize) -> String {
    if path.is_empty() {
        format!("{key}[{i}]")
    } else {
        format!("{path}.{key}[{i}]")
    }
}

pub fn parse_expr(v: &Value, objects: &BTreeMap<String, ObjectRef>, path: &str) -> Result<KernelExpr, CliError> {
    let (key, arg) = single(v, path)?;
    let here = if path.is_empty() { "root".to_string() } else { path.to_string() };
    let obj = |v: &Value| -> Result<ObjectRef, CliError> { object(objects, name_of(v, key, path)?, &here).cloned() };
    Ok(match key {
        "gen" => KernelExpr::gen(name_of(arg, key, path)?),
        "state" => KernelExpr::state(name_of(arg, key, path)?),
        "id" => KernelExpr::Id(obj(arg)?),
        "copy" => KernelExpr::Copy(obj(arg)?),
        "delete" => KernelExpr::Delete(obj(arg)?),
        "swap" => match arg.as_array().map(Vec::as_slice) {
            Some([a, b]) => KernelExpr::Swap(obj(a)?, obj(b)?),
            _ => return Err(CliError::Parse(format!("`swap` at {here} expects two object names"))),
        },
        "seq" | "par" => {
            let items = arg
                .as_array()
                .ok_or_else(|| CliError::Parse(format!("`{key}` at {here} expects an array")))?;
            let children = items
                .iter()
                .enumerate()
                .map(|(i, c)| parse_expr(c, objects, &join(path, key, i)))
                .collect::<Result<Vec<_>, _>>()?;
            if key == "seq" {
                KernelExpr::Seq(children)
            } else {
                KernelExpr::Par(children)
            }
        }
        other => return Err(CliError::Parse(format!("unknown diagram node `{other}` at {here}"))),
    })
}

fn gen_wires<'a>(model: &'a Model<FinStoch>, name: &str, at: &str) -> Result<(&'a [ObjectRef], &'a [ObjectRef]), CliError> {
    let t = model.sig.get(name).ok_or_else(|| CliError::Core {
        context: Some("chain".into()),
        source: CoreError::UnboundName {
            name: name.to_string(),
            path: at.to_string(),
        },
    })?;
    Ok((t.dom.wires(), t.cod.wires()))
}

fn shape_error(what: &str, expected: &str) -> CliError {
    CliError::model("chain_shape", format!("chain {what} must have type {expected}"))
}

fn build_chain(model: &Model<FinStoch>, spec: &RawChain, diag: &mut Vec<Value>) -> Result<Chain, CliError> {
    let (t_dom, t_cod) = gen_wires(model, &spec.transition, "chain.transition")?;
    let [state, theta] = t_dom else {
        return Err(shape_error("transition", "S⊗Θ → S"));
    };
    if t_cod != std::slice::from_ref(state) {
        return Err(shape_error("transition", "S⊗Θ → S"));
    }
    let (s_dom, s_cod) = gen_wires(model, &spec.initial, "chain.initial")?;
    if !s_dom.is_empty() || s_cod != std::slice::from_ref(state) {
        return Err(shape_error("initial state", "I → S"));
    }
    let prior = model
        .prior
        .clone()
        .ok_or_else(|| CliError::model("missing_prior", "chain models need a prior over the parameter"))?;
    if prior.cod_card() != theta.size() {
        return Err(CliError::Core {
            context: Some("prior".into()),
            source: CoreError::DimensionMismatch {
                op: "prior against parameter object",
                left: prior.cod_card(),
                right: theta.size(),
            },
        });
    }
    let chain = MarkovChainModel::new(
        model.bindings[&spec.transition].clone(),
        model.bindings[&spec.initial].clone(),
        prior,
    )
    .context(|| "chain".into())?;
    let (hmm, observed) = match &spec.observation {
        None => (None, state.clone()),
        Some(o) => {
            let (o_dom, o_cod) = gen_wires(model, o, "chain.observation")?;
            let [obs] = o_cod else {
                return Err(shape_error("observation", "S → O"));
            };
            if o_dom != std::slice::from_ref(state) {
                return Err(shape_error("observation", "S → O"));
            }
            let hmm = HmmModel::new(chain.clone(), model.bindings[o].clone()).context(|| "chain".into())?;
            (Some(hmm), obs.clone())
        }
    };
    diag.push(json!({
        "chain": {
            "states": state.size(),
            "parameters": theta.size(),
            "observations": hmm.as_ref().map(|h| h.obs_card()),
        },
        "status": "ok",
    }));
    Ok(Chain {
        model: chain,
        hmm,
        state: state.clone(),
        theta: theta.clone(),
        observed,
    })
}
