use std::collections::HashMap;

use crate::error::{Result, TensorError};
use crate::scalar::Float;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Ordered collection of named tensors. Insertion order is the
/// serialization order, so a set rebuilt the same way writes identical
/// checkpoints.
#[derive(Clone, Debug, Default)]
pub struct ParamSet<T: Float = f32> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
    by_name: HashMap<String, ParamId>,
}

impl<T: Float> ParamSet<T> {
    pub fn new() -> Self {
        Self { names: Vec::new(), tensors: Vec::new(), by_name: HashMap::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(TensorError::DuplicateParam(name));
        }
        let id = ParamId(self.tensors.len());
        self.by_name.insert(name.clone(), id);
        self.names.push(name);
        self.tensors.push(tensor);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<ParamId> {
        self.id(name).ok_or_else(|| TensorError::MissingParam(name.to_string()))
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.tensors[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<T>> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.id(name).map(|id| &mut self.tensors[id.0])
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.by_name.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<T>)> {
        self.names.iter().zip(&self.tensors).enumerate().map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    /// Number of trainable scalars (tensors with `requires_grad`).
    pub fn trainable_count(&self) -> usize {
        self.tensors.iter().filter(|t| t.requires_grad).map(Tensor::numel).sum()
    }

    pub fn zero_grad(&mut self) {
        for t in &mut self.tensors {
            t.grad = None;
        }
    }

    /// L2 norm over all accumulated gradients.
    pub fn grad_norm(&self) -> f64 {
        self.tensors
            .iter()
            .filter_map(|t| t.grad.as_ref())
            .flat_map(|g| g.iter())
            .map(|v| {
                let v = v.as_f64();
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Converts every tensor to another precision, keeping names and flags.
    pub fn cast<U: Float>(&self) -> ParamSet<U> {
        let mut out = ParamSet::new();
        for (_, name, t) in self.iter() {
            out.insert(name, t.cast()).expect("names are unique");
        }
        out
    }

    /// Overwrites values from `(name, tensor)` records. Every record must
    /// name an existing entry of identical shape and every entry must be
    /// covered.
    pub fn load_values<U: Float>(&mut self, records: &[(String, Tensor<U>)]) -> Result<()> {
        if records.len() != self.len() {
            return Err(TensorError::invalid(
                "load",
                format!("expected {} tensors, got {}", self.len(), records.len()),
            ));
        }
        for (name, src) in records {
            let id = self.require(name)?;
            let dst = &mut self.tensors[id.0];
            if dst.shape() != src.shape() {
                return Err(TensorError::shapes("load", dst.shape(), src.shape()));
            }
            for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
                *d = T::of(s.as_f64());
            }
        }
        Ok(())
    }
}
