//! Named parameter storage shared by every model component.
//!
//! Components hold [`ParamId`]s into a [`ParamStore`]. A forward pass binds
//! the whole store onto a [`Graph`] as leaves and looks parameters up
//! through the returned [`Bound`] table.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::ops::Index;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{read_checkpoint, write_checkpoint, Graph, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a new parameter. Names must be unique.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.tensors.push(value);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn ids_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = ParamId> + 'a {
        self.ids().filter(move |&id| self.names[id.0].starts_with(prefix))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    /// Zeroes every parameter whose name starts with `prefix`.
    pub fn zero_prefix(&mut self, prefix: &str) {
        let ids: Vec<_> = self.ids_with_prefix(prefix).collect();
        for id in ids {
            self.tensors[id.0].fill(0.0);
        }
    }

    /// Binds every parameter onto `graph` as a differentiable leaf.
    pub fn bind<'g>(&self, graph: &'g Graph) -> Bound<'g> {
        Bound {
            vars: self.tensors.iter().map(|t| graph.leaf(t.clone())).collect(),
        }
    }

    /// Same as [`bind`](Self::bind) but with replacement values for the
    /// listed ids (used by gradient checks that perturb parameters).
    pub fn bind_with<'g>(&self, graph: &'g Graph, overrides: &[(ParamId, Var<'g>)]) -> Bound<'g> {
        let mut bound = self.bind(graph);
        for &(id, v) in overrides {
            bound.vars[id.0] = v;
        }
        bound
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        write_checkpoint(BufWriter::new(file), self.iter())
    }

    /// Replaces every parameter value from a checkpoint. The checkpoint must
    /// contain exactly this store's names with matching shapes.
    pub fn load(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingFile(path.to_path_buf())
            } else {
                Error::io(path, e)
            }
        })?;
        let entries = read_checkpoint(BufReader::new(file))?;
        self.assign(entries)
    }

    pub fn assign(&mut self, entries: Vec<(String, Tensor)>) -> Result<()> {
        if entries.len() != self.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} tensors, model expects {}",
                entries.len(),
                self.len()
            )));
        }
        for (name, t) in entries {
            let id = self
                .id(&name)
                .ok_or_else(|| Error::Checkpoint(format!("unexpected tensor {name}")))?;
            if self.tensors[id.0].shape() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {:?}, model expects {:?}",
                    t.shape(),
                    self.tensors[id.0].shape()
                )));
            }
            self.tensors[id.0] = t;
        }
        Ok(())
    }
}

/// Parameters bound onto one graph.
pub struct Bound<'g> {
    vars: Vec<Var<'g>>,
}

impl<'g> Bound<'g> {
    /// Wraps vars that are already on a graph, one per store parameter in
    /// store order.
    pub fn from_vars(vars: Vec<Var<'g>>) -> Self {
        Self { vars }
    }

    pub fn vars(&self) -> &[Var<'g>] {
        &self.vars
    }

    /// Gradient per parameter after `backward`; zeros where the parameter
    /// did not influence the loss.
    pub fn grads(&self, store: &ParamStore) -> Vec<Tensor> {
        self.vars
            .iter()
            .zip(store.tensors())
            .map(|(v, t)| v.grad().unwrap_or_else(|| Tensor::zeros_like(t)))
            .collect()
    }
}

impl<'g> Index<ParamId> for Bound<'g> {
    type Output = Var<'g>;

    fn index(&self, id: ParamId) -> &Var<'g> {
        &self.vars[id.0]
    }
}
