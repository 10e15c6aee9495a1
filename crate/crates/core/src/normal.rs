//! Sequentialization of diagrams into layers.
//!
//! A diagram is first laid out by structural recursion (sequences concatenate,
//! parallel blocks are aligned at their start and padded with identities),
//! then compacted: every non-identity cell is slid into the previous layer
//! whenever the wires it consumes are identities there. Cells are visited by
//! layer, then by wire index ascending, until nothing moves. The result is an
//! as-soon-as-possible schedule that is still a planar layering.

use std::fmt;

use crate::error::{Error, Result};
use crate::expr::{child_path, display_path, lookup, KernelExpr, Signature};
use crate::object::{ObjectRef, Profile};

/// A primitive cell of a layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Gen {
        name: String,
        dom: Profile,
        cod: Profile,
    },
    Id(ObjectRef),
    Copy(ObjectRef),
    Delete(ObjectRef),
    Swap(ObjectRef, ObjectRef),
}

impl Cell {
    pub fn dom(&self) -> Profile {
        match self {
            Cell::Gen { dom, .. } => dom.clone(),
            Cell::Id(x) | Cell::Copy(x) | Cell::Delete(x) => Profile::single(x.clone()),
            Cell::Swap(a, b) => Profile::new([a.clone(), b.clone()]),
        }
    }

    pub fn cod(&self) -> Profile {
        match self {
            Cell::Gen { cod, .. } => cod.clone(),
            Cell::Id(x) => Profile::single(x.clone()),
            Cell::Copy(x) => Profile::new([x.clone(), x.clone()]),
            Cell::Delete(_) => Profile::unit(),
            Cell::Swap(a, b) => Profile::new([b.clone(), a.clone()]),
        }
    }

    pub fn is_id(&self) -> bool {
        matches!(self, Cell::Id(_))
    }

    /// Identity or swap: cells that only permute wires.
    pub fn is_structural(&self) -> bool {
        matches!(self, Cell::Id(_) | Cell::Swap(..))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Gen { name, .. } => write!(f, "{name}"),
            Cell::Id(x) => write!(f, "id({x})"),
            Cell::Copy(x) => write!(f, "copy({x})"),
            Cell::Delete(x) => write!(f, "delete({x})"),
            Cell::Swap(a, b) => write!(f, "swap({a},{b})"),
        }
    }
}

/// One time slice: cells side by side, covering the whole wire profile.
pub type Layer = Vec<Cell>;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalForm {
    pub dom: Profile,
    pub cod: Profile,
    pub layers: Vec<Layer>,
}

impl NormalForm {
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Wire profile entering layer `k` (`k == len()` gives the codomain).
    pub fn cut(&self, k: usize) -> Profile {
        if k == 0 {
            return self.dom.clone();
        }
        self.layers[k - 1]
            .iter()
            .fold(Profile::unit(), |acc, c| acc.tensor(&c.cod()))
    }
}

impl fmt::Display for NormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, layer) in self.layers.iter().enumerate() {
            let cells: Vec<String> = layer.iter().map(Cell::to_string).collect();
            writeln!(f, "{:>3}: {}", i + 1, cells.join(" | "))?;
        }
        Ok(())
    }
}

/// Flattens an expression into an aligned, compacted list of layers.
pub fn normalize(expr: &KernelExpr, sig: &Signature) -> Result<NormalForm> {
    let (dom, mut layers, cod) = layout(expr, sig, "")?;
    compact(&mut layers);
    layers.retain(|l| !l.iter().all(Cell::is_id));
    Ok(NormalForm { dom, cod, layers })
}

fn ids(p: &Profile) -> Layer {
    p.wires().iter().cloned().map(Cell::Id).collect()
}

type Layout = (Profile, Vec<Layer>, Profile);

fn layout(expr: &KernelExpr, sig: &Signature, path: &str) -> Result<Layout> {
    let single = |x: &ObjectRef| Profile::single(x.clone());
    match expr {
        KernelExpr::Gen(name) | KernelExpr::State(name) => {
            let t = lookup(sig, name, path)?;
            if matches!(expr, KernelExpr::State(_)) && !t.dom.is_empty() {
                return Err(Error::TypeMismatch {
                    path: display_path(path),
                    expected: "state with domain I".into(),
                    found: t.dom.to_string(),
                });
            }
            let cell = Cell::Gen {
                name: name.clone(),
                dom: t.dom.clone(),
                cod: t.cod.clone(),
            };
            Ok((t.dom.clone(), vec![vec![cell]], t.cod.clone()))
        }
        KernelExpr::Id(x) => Ok((single(x), vec![], single(x))),
        KernelExpr::Copy(x) if x.is_unit() => Ok((Profile::unit(), vec![], Profile::unit())),
        KernelExpr::Copy(x) => Ok((
            single(x),
            vec![vec![Cell::Copy(x.clone())]],
            Profile::new([x.clone(), x.clone()]),
        )),
        KernelExpr::Delete(x) if x.is_unit() => Ok((Profile::unit(), vec![], Profile::unit())),
        KernelExpr::Delete(x) => Ok((single(x), vec![vec![Cell::Delete(x.clone())]], Profile::unit())),
        KernelExpr::Swap(a, b) => {
            let dom = Profile::new([a.clone(), b.clone()]);
            let cod = Profile::new([b.clone(), a.clone()]);
            if a.is_unit() || b.is_unit() {
                Ok((dom, vec![], cod))
            } else {
                Ok((dom, vec![vec![Cell::Swap(a.clone(), b.clone())]], cod))
            }
        }
        KernelExpr::Seq(children) => {
            if children.is_empty() {
                return Err(Error::TypeMismatch {
                    path: display_path(path),
                    expected: "non-empty seq".into(),
                    found: "seq[]".into(),
                });
            }
            let (dom, mut layers, mut cod) = layout(&children[0], sig, &child_path(path, "seq", 0))?;
            for (i, c) in children.iter().enumerate().skip(1) {
                let p = child_path(path, "seq", i);
                let (d, l, c2) = layout(c, sig, &p)?;
                if d != cod {
                    return Err(Error::TypeMismatch {
                        path: p,
                        expected: cod.to_string(),
                        found: d.to_string(),
                    });
                }
                layers.extend(l);
                cod = c2;
            }
            Ok((dom, layers, cod))
        }
        KernelExpr::Par(children) => {
            let parts = children
                .iter()
                .enumerate()
                .map(|(i, c)| layout(c, sig, &child_path(path, "par", i)))
                .collect::<Result<Vec<_>>>()?;
            let depth = parts.iter().map(|p| p.1.len()).max().unwrap_or(0);
            let mut layers = vec![Vec::new(); depth];
            for (k, layer) in layers.iter_mut().enumerate() {
                for (_, l, cod) in &parts {
                    match l.get(k) {
                        Some(cells) => layer.extend(cells.iter().cloned()),
                        None => layer.extend(ids(cod)),
                    }
                }
            }
            let dom = parts.iter().fold(Profile::unit(), |a, p| a.tensor(&p.0));
            let cod = parts.iter().fold(Profile::unit(), |a, p| a.tensor(&p.2));
            Ok((dom, layers, cod))
        }
    }
}

/// Cell index in `layer` at which outputs reach wire offset `offset`.
fn boundary(layer: &[Cell], offset: usize) -> Option<usize> {
    let mut acc = 0;
    for (j, c) in layer.iter().enumerate() {
        if acc == offset {
            return Some(j);
        }
        acc += c.cod().len();
        if acc > offset {
            return None;
        }
    }
    (acc == offset).then_some(layer.len())
}

fn try_lift(layers: &mut [Layer], l: usize) -> bool {
    let (before, after) = layers.split_at_mut(l);
    let prev = &mut before[l - 1];
    let cur = &mut after[0];
    let mut offset = 0;
    for ci in 0..cur.len() {
        let k = cur[ci].dom().len();
        if !cur[ci].is_id() {
            if let Some(start) = boundary(prev, offset) {
                let run = prev.get(start..start + k);
                if run.is_some_and(|r| r.iter().all(Cell::is_id)) {
                    let cell = cur[ci].clone();
                    let pad = ids(&cell.cod());
                    prev.splice(start..start + k, [cell]);
                    cur.splice(ci..ci + 1, pad);
                    return true;
                }
            }
        }
        offset += k;
    }
    false
}

fn compact(layers: &mut [Layer]) {
    loop {
        let mut moved = false;
        for l in 1..layers.len() {
            while try_lift(layers, l) {
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}
