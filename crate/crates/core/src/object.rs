//! Objects of the two concrete Markov categories and wire profiles.
//!
//! An [`ObjectRef`] is a single named wire type: a finite set (FinStoch) or a
//! Euclidean space (Gauss). A [`Profile`] is an ordered tensor of such wires,
//! with monoidal units dropped, so `I ⊗ X` and `X` have the same profile.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackendTag {
    FinStoch,
    Gauss,
}

impl BackendTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendTag::FinStoch => "finstoch",
            BackendTag::Gauss => "gauss",
        }
    }
}

impl fmt::Display for BackendTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ObjectKind {
    Finite {
        card: usize,
        labels: Option<Vec<String>>,
    },
    Euclidean {
        dim: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObjectRef {
    name: String,
    kind: ObjectKind,
}

impl ObjectRef {
    pub fn finite(name: impl Into<String>, card: usize) -> Result<Self> {
        if card == 0 {
            return Err(Error::InvalidArgument(
                "finite objects need cardinality >= 1".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            kind: ObjectKind::Finite { card, labels: None },
        })
    }

    pub fn finite_labeled(name: impl Into<String>, labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidArgument(
                "finite objects need cardinality >= 1".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            kind: ObjectKind::Finite {
                card: labels.len(),
                labels: Some(labels),
            },
        })
    }

    pub fn euclidean(name: impl Into<String>, dim: usize) -> Self {
        Self {
            name: name.into(),
            kind: ObjectKind::Euclidean { dim },
        }
    }

    /// The monoidal unit of a backend.
    pub fn unit(tag: BackendTag) -> Self {
        match tag {
            BackendTag::FinStoch => Self {
                name: "I".into(),
                kind: ObjectKind::Finite {
                    card: 1,
                    labels: None,
                },
            },
            BackendTag::Gauss => Self::euclidean("I", 0),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ObjectKind {
        &self.kind
    }

    pub fn tag(&self) -> BackendTag {
        match self.kind {
            ObjectKind::Finite { .. } => BackendTag::FinStoch,
            ObjectKind::Euclidean { .. } => BackendTag::Gauss,
        }
    }

    /// Cardinality for finite sets, dimension for Euclidean spaces.
    pub fn size(&self) -> usize {
        match self.kind {
            ObjectKind::Finite { card, .. } => card,
            ObjectKind::Euclidean { dim } => dim,
        }
    }

    pub fn is_unit(&self) -> bool {
        match self.kind {
            ObjectKind::Finite { card, .. } => card == 1,
            ObjectKind::Euclidean { dim } => dim == 0,
        }
    }

    pub fn labels(&self) -> Option<&[String]> {
        match &self.kind {
            ObjectKind::Finite { labels, .. } => labels.as_deref(),
            ObjectKind::Euclidean { .. } => None,
        }
    }

    /// Label of element `i`, falling back to the index.
    pub fn label(&self, i: usize) -> String {
        self.labels()
            .and_then(|l| l.get(i).cloned())
            .unwrap_or_else(|| i.to_string())
    }

    /// Tensor product: cardinalities multiply, dimensions add.
    pub fn tensor(&self, other: &ObjectRef) -> Result<ObjectRef> {
        let name = format!("{}⊗{}", self.name, other.name);
        match (&self.kind, &other.kind) {
            (
                ObjectKind::Finite { card: a, labels: la },
                ObjectKind::Finite { card: b, labels: lb },
            ) => {
                let card = a.checked_mul(*b).ok_or(Error::ObjectTooLarge)?;
                let labels = match (la, lb) {
                    (None, None) => None,
                    _ => {
                        let mut out = Vec::with_capacity(card);
                        for i in 0..*a {
                            for j in 0..*b {
                                out.push(format!("{},{}", self.label(i), other.label(j)));
                            }
                        }
                        Some(out)
                    }
                };
                Ok(ObjectRef {
                    name,
                    kind: ObjectKind::Finite { card, labels },
                })
            }
            (ObjectKind::Euclidean { dim: a }, ObjectKind::Euclidean { dim: b }) => {
                Ok(ObjectRef::euclidean(name, a + b))
            }
            _ => Err(Error::BackendMismatch {
                object: name,
                backend: self.tag().as_str(),
            }),
        }
    }
}

impl fmt::Display for ObjectRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// An ordered list of non-unit wires.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Profile(Vec<ObjectRef>);

impl Profile {
    pub fn unit() -> Self {
        Profile(Vec::new())
    }

    pub fn new(objects: impl IntoIterator<Item = ObjectRef>) -> Self {
        Profile(objects.into_iter().filter(|o| !o.is_unit()).collect())
    }

    pub fn single(object: ObjectRef) -> Self {
        Self::new([object])
    }

    pub fn wires(&self) -> &[ObjectRef] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tensor(&self, other: &Profile) -> Profile {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        Profile(v)
    }

    pub fn slice(&self, start: usize, end: usize) -> Profile {
        Profile(self.0[start..end].to_vec())
    }

    /// Total size of the tensor: product of cardinalities or sum of dimensions.
    pub fn size(&self, tag: BackendTag) -> Result<usize> {
        let mut acc = match tag {
            BackendTag::FinStoch => 1usize,
            BackendTag::Gauss => 0usize,
        };
        for o in &self.0 {
            if o.tag() != tag {
                return Err(Error::BackendMismatch {
                    object: o.name.clone(),
                    backend: tag.as_str(),
                });
            }
            acc = match tag {
                BackendTag::FinStoch => acc.checked_mul(o.size()).ok_or(Error::ObjectTooLarge)?,
                BackendTag::Gauss => acc + o.size(),
            };
        }
        Ok(acc)
    }

    /// Label of a flat (row-major) index into a finite profile.
    pub fn label(&self, mut index: usize) -> String {
        if self.0.is_empty() {
            return "()".into();
        }
        let mut parts = Vec::with_capacity(self.0.len());
        for o in self.0.iter().rev() {
            let n = o.size().max(1);
            parts.push(o.label(index % n));
            index /= n;
        }
        parts.reverse();
        parts.join(",")
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("I");
        }
        let names: Vec<&str> = self.0.iter().map(|o| o.name.as_str()).collect();
        f.write_str(&names.join("⊗"))
    }
}

impl From<ObjectRef> for Profile {
    fn from(o: ObjectRef) -> Self {
        Profile::single(o)
    }
}
