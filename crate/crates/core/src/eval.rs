//! Reading a diagram as a kernel of a backend.

use std::collections::BTreeMap;

use crate::backend::CategoryBackend;
use crate::error::{Error, Result};
use crate::expr::{child_path, display_path, KernelExpr, Signature};
use crate::normal::{Cell, NormalForm};
use crate::object::ObjectRef;

/// Kernels bound to generator names.
pub type Bindings<K> = BTreeMap<String, K>;

fn size_of<B: CategoryBackend>(x: &ObjectRef) -> Result<usize> {
    if x.tag() != B::TAG {
        return Err(Error::BackendMismatch {
            object: x.name().to_string(),
            backend: B::TAG.as_str(),
        });
    }
    Ok(x.size())
}

fn bound<'a, K>(bindings: &'a Bindings<K>, name: &str, path: &str) -> Result<&'a K> {
    bindings.get(name).ok_or_else(|| Error::UnboundName {
        name: name.to_string(),
        path: display_path(path),
    })
}

/// Checks that every generator of `sig` is bound to a kernel of matching sizes.
pub fn check_bindings<B: CategoryBackend>(sig: &Signature, backend: &B, bindings: &Bindings<B::Kernel>) -> Result<()> {
    for (name, t) in sig.iter() {
        let k = bound(bindings, name, "")?;
        let (dom, cod) = (t.dom.size(B::TAG)?, t.cod.size(B::TAG)?);
        if backend.dom_size(k) != dom || backend.cod_size(k) != cod {
            return Err(Error::TypeMismatch {
                path: name.clone(),
                expected: format!("{} -> {}", t.dom, t.cod),
                found: format!("kernel {} -> {}", backend.dom_size(k), backend.cod_size(k)),
            });
        }
    }
    Ok(())
}

pub fn evaluate<B: CategoryBackend>(expr: &KernelExpr, backend: &B, bindings: &Bindings<B::Kernel>) -> Result<B::Kernel> {
    eval_at(expr, backend, bindings, "")
}

fn eval_at<B: CategoryBackend>(expr: &KernelExpr, b: &B, bindings: &Bindings<B::Kernel>, path: &str) -> Result<B::Kernel> {
    match expr {
        KernelExpr::Gen(name) => Ok(bound(bindings, name, path)?.clone()),
        KernelExpr::State(name) => {
            let k = bound(bindings, name, path)?;
            if b.dom_size(k) != b.unit_size() {
                return Err(Error::TypeMismatch {
                    path: display_path(path),
                    expected: "a state".into(),
                    found: format!("kernel with input size {}", b.dom_size(k)),
                });
            }
            Ok(k.clone())
        }
        KernelExpr::Id(x) => Ok(b.identity(size_of::<B>(x)?)),
        KernelExpr::Copy(x) => b.copy(size_of::<B>(x)?),
        KernelExpr::Delete(x) => Ok(b.delete(size_of::<B>(x)?)),
        KernelExpr::Swap(x, y) => b.swap(size_of::<B>(x)?, size_of::<B>(y)?),
        KernelExpr::Seq(children) => {
            let mut it = children.iter().enumerate();
            let Some((_, first)) = it.next() else {
                return Err(Error::TypeMismatch {
                    path: display_path(path),
                    expected: "a non-empty sequence".into(),
                    found: "seq[]".into(),
                });
            };
            let mut acc = eval_at(first, b, bindings, &child_path(path, "seq", 0))?;
            for (i, c) in it {
                acc = b.compose(&acc, &eval_at(c, b, bindings, &child_path(path, "seq", i))?)?;
            }
            Ok(acc)
        }
        KernelExpr::Par(children) => {
            let mut acc = b.unit_state();
            for (i, c) in children.iter().enumerate() {
                acc = b.tensor(&acc, &eval_at(c, b, bindings, &child_path(path, "par", i))?)?;
            }
            Ok(acc)
        }
    }
}

pub fn cell_kernel<B: CategoryBackend>(cell: &Cell, b: &B, bindings: &Bindings<B::Kernel>) -> Result<B::Kernel> {
    match cell {
        Cell::Gen { name, .. } => Ok(bound(bindings, name, "")?.clone()),
        Cell::Id(x) => Ok(b.identity(size_of::<B>(x)?)),
        Cell::Copy(x) => b.copy(size_of::<B>(x)?),
        Cell::Delete(x) => Ok(b.delete(size_of::<B>(x)?)),
        Cell::Swap(x, y) => b.swap(size_of::<B>(x)?, size_of::<B>(y)?),
    }
}

pub fn evaluate_normal_form<B: CategoryBackend>(nf: &NormalForm, b: &B, bindings: &Bindings<B::Kernel>) -> Result<B::Kernel> {
    let mut acc = b.identity(nf.dom.size(B::TAG)?);
    for layer in &nf.layers {
        let cells = layer
            .iter()
            .map(|c| cell_kernel(c, b, bindings))
            .collect::<Result<Vec<_>>>()?;
        acc = b.compose(&acc, &b.layer_kernel(&cells)?)?;
    }
    Ok(acc)
}
