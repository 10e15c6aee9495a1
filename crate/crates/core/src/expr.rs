//! String-diagram expressions and their typechecker.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::object::{ObjectRef, Profile};

/// A diagram over a Markov category.
///
/// `Seq` composes left to right (diagrammatic order); `Par` tensors its
/// children. `State(name)` is a generator whose domain is the unit.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelExpr {
    Gen(String),
    State(String),
    Id(ObjectRef),
    Copy(ObjectRef),
    Delete(ObjectRef),
    Swap(ObjectRef, ObjectRef),
    Seq(Vec<KernelExpr>),
    Par(Vec<KernelExpr>),
}

impl KernelExpr {
    pub fn gen(name: impl Into<String>) -> Self {
        KernelExpr::Gen(name.into())
    }

    pub fn state(name: impl Into<String>) -> Self {
        KernelExpr::State(name.into())
    }

    pub fn seq(children: impl IntoIterator<Item = KernelExpr>) -> Self {
        KernelExpr::Seq(children.into_iter().collect())
    }

    pub fn par(children: impl IntoIterator<Item = KernelExpr>) -> Self {
        KernelExpr::Par(children.into_iter().collect())
    }

    /// Nesting depth; primitives have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            KernelExpr::Seq(c) | KernelExpr::Par(c) => {
                1 + c.iter().map(KernelExpr::depth).max().unwrap_or(0)
            }
            _ => 0,
        }
    }
}

impl fmt::Display for KernelExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list(f: &mut fmt::Formatter<'_>, tag: &str, c: &[KernelExpr]) -> fmt::Result {
            write!(f, "{tag}[")?;
            for (i, e) in c.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{e}")?;
            }
            f.write_str("]")
        }
        match self {
            KernelExpr::Gen(n) => write!(f, "{n}"),
            KernelExpr::State(n) => write!(f, "state({n})"),
            KernelExpr::Id(x) => write!(f, "id({x})"),
            KernelExpr::Copy(x) => write!(f, "copy({x})"),
            KernelExpr::Delete(x) => write!(f, "delete({x})"),
            KernelExpr::Swap(a, b) => write!(f, "swap({a},{b})"),
            KernelExpr::Seq(c) => list(f, "seq", c),
            KernelExpr::Par(c) => list(f, "par", c),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenType {
    pub dom: Profile,
    pub cod: Profile,
}

/// Generator names bound to their wire types.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Signature {
    entries: BTreeMap<String, GenType>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, dom: Profile, cod: Profile) {
        self.entries.insert(name.into(), GenType { dom, cod });
    }

    pub fn get(&self, name: &str) -> Option<&GenType> {
        self.entries.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &GenType)> {
        self.entries.iter()
    }
}

pub(crate) fn child_path(path: &str, tag: &str, i: usize) -> String {
    if path.is_empty() {
        format!("{tag}[{i}]")
    } else {
        format!("{path}.{tag}[{i}]")
    }
}

pub(crate) fn display_path(path: &str) -> String {
    if path.is_empty() {
        "<root>".into()
    } else {
        path.to_string()
    }
}

pub(crate) fn lookup<'a>(sig: &'a Signature, name: &str, path: &str) -> Result<&'a GenType> {
    sig.get(name).ok_or_else(|| Error::UnboundName {
        name: name.to_string(),
        path: display_path(path),
    })
}

/// Computes the unique `(dom, cod)` of a well-formed expression.
pub fn typecheck(expr: &KernelExpr, sig: &Signature) -> Result<(Profile, Profile)> {
    check_at(expr, sig, "")
}

fn check_at(expr: &KernelExpr, sig: &Signature, path: &str) -> Result<(Profile, Profile)> {
    match expr {
        KernelExpr::Gen(name) => {
            let t = lookup(sig, name, path)?;
            Ok((t.dom.clone(), t.cod.clone()))
        }
        KernelExpr::State(name) => {
            let t = lookup(sig, name, path)?;
            if !t.dom.is_empty() {
                return Err(Error::TypeMismatch {
                    path: display_path(path),
                    expected: "state with domain I".into(),
                    found: format!("{} : {} -> {}", name, t.dom, t.cod),
                });
            }
            Ok((Profile::unit(), t.cod.clone()))
        }
        KernelExpr::Id(x) => Ok((Profile::single(x.clone()), Profile::single(x.clone()))),
        KernelExpr::Copy(x) => Ok((
            Profile::single(x.clone()),
            Profile::new([x.clone(), x.clone()]),
        )),
        KernelExpr::Delete(x) => Ok((Profile::single(x.clone()), Profile::unit())),
        KernelExpr::Swap(a, b) => Ok((
            Profile::new([a.clone(), b.clone()]),
            Profile::new([b.clone(), a.clone()]),
        )),
        KernelExpr::Seq(children) => {
            if children.is_empty() {
                return Err(Error::TypeMismatch {
                    path: display_path(path),
                    expected: "non-empty seq".into(),
                    found: "seq[]".into(),
                });
            }
            let (dom, mut cod) = check_at(&children[0], sig, &child_path(path, "seq", 0))?;
            for (i, c) in children.iter().enumerate().skip(1) {
                let p = child_path(path, "seq", i);
                let (d, c2) = check_at(c, sig, &p)?;
                if d != cod {
                    return Err(Error::TypeMismatch {
                        path: p,
                        expected: cod.to_string(),
                        found: d.to_string(),
                    });
                }
                cod = c2;
            }
            Ok((dom, cod))
        }
        KernelExpr::Par(children) => {
            let mut dom = Profile::unit();
            let mut cod = Profile::unit();
            for (i, c) in children.iter().enumerate() {
                let (d, c2) = check_at(c, sig, &child_path(path, "par", i))?;
                dom = dom.tensor(&d);
                cod = cod.tensor(&c2);
            }
            Ok((dom, cod))
        }
    }
}
