//! Named parameter storage over one flat f64 buffer.
//!
//! The flat layout keeps the optimizer and checkpoint writer trivial:
//! Adam state and file payloads index the same offsets.

use std::collections::HashMap;

use super::tape::{Shape, Tape, TensorId};
use super::{Gradients, TensorError};

#[derive(Clone, Debug)]
pub struct ParamEntry {
    pub name: String,
    pub offset: usize,
    pub shape: Shape,
}

#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    data: Vec<f64>,
    entries: Vec<ParamEntry>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, shape: Shape, values: Vec<f64>) -> Result<(), TensorError> {
        if self.index.contains_key(name) {
            return Err(TensorError::DuplicateParam { name: name.into() });
        }
        if values.len() != shape.len() {
            return Err(TensorError::LengthMismatch {
                expected: shape.len(),
                got: values.len(),
            });
        }
        let offset = self.data.len();
        self.data.extend_from_slice(&values);
        self.index.insert(name.to_string(), self.entries.len());
        self.entries.push(ParamEntry {
            name: name.to_string(),
            offset,
            shape,
        });
        Ok(())
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn num_values(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn entry(&self, name: &str) -> Result<&ParamEntry, TensorError> {
        self.index
            .get(name)
            .map(|&i| &self.entries[i])
            .ok_or_else(|| TensorError::UnknownParam { name: name.into() })
    }

    pub fn slice(&self, name: &str) -> Result<&[f64], TensorError> {
        let e = self.entry(name)?;
        Ok(&self.data[e.offset..e.offset + e.shape.len()])
    }

    pub fn slice_mut(&mut self, name: &str) -> Result<&mut [f64], TensorError> {
        let e = self.entry(name)?.clone();
        Ok(&mut self.data[e.offset..e.offset + e.shape.len()])
    }

    pub fn scalar(&self, name: &str) -> Result<f64, TensorError> {
        Ok(self.slice(name)?[0])
    }

    /// Insert every parameter as a gradient-requiring leaf on a tape.
    pub fn bind_all(&self, tape: &mut Tape) -> Result<TapeBinding, TensorError> {
        let mut ids = Vec::with_capacity(self.entries.len());
        let mut by_name = HashMap::with_capacity(self.entries.len());
        for e in &self.entries {
            let values = self.data[e.offset..e.offset + e.shape.len()].to_vec();
            let id = tape.leaf(e.shape, values, true)?;
            by_name.insert(e.name.clone(), id);
            ids.push(id);
        }
        Ok(TapeBinding { ids, by_name })
    }
}

/// Parameter-to-tape mapping for one forward pass.
pub struct TapeBinding {
    ids: Vec<TensorId>,
    by_name: HashMap<String, TensorId>,
}

impl TapeBinding {
    pub fn id(&self, name: &str) -> Result<TensorId, TensorError> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| TensorError::UnknownParam { name: name.into() })
    }

    /// Assemble gradients into one flat vector aligned with the store's
    /// data layout; parameters the loss never touched get zeros.
    pub fn collect_flat_grads(&self, store: &ParamStore, grads: &Gradients) -> Vec<f64> {
        let mut flat = vec![0.0; store.num_values()];
        for (entry, id) in store.entries.iter().zip(&self.ids) {
            if let Some(g) = grads.get(*id) {
                flat[entry.offset..entry.offset + g.len()].copy_from_slice(g);
            }
        }
        flat
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Activation;

    #[test]
    fn add_and_lookup() {
        let mut store = ParamStore::new();
        store
            .add("w", Shape::new(2, 2), vec![1.0, 2.0, 3.0, 4.0])
            .unwrap();
        store.add("b", Shape::new(1, 2), vec![0.1, 0.2]).unwrap();
        assert_eq!(store.num_values(), 6);
        assert_eq!(store.slice("b").unwrap(), &[0.1, 0.2]);
        assert!(store.add("w", Shape::scalar(), vec![0.0]).is_err());
        assert!(store.slice("missing").is_err());
    }

    #[test]
    fn bind_collect_round_trip() {
        let mut store = ParamStore::new();
        store
            .add("w", Shape::new(2, 1), vec![1.5, -0.5])
            .unwrap();
        store.add("b", Shape::new(1, 1), vec![0.25]).unwrap();

        let mut tape = Tape::new();
        let binding = store.bind_all(&mut tape).unwrap();
        let x = tape.leaf(Shape::new(1, 2), vec![2.0, 4.0], false).unwrap();
        let w = binding.id("w").unwrap();
        let b = binding.id("b").unwrap();
        let y = tape.dense(x, w, b, Activation::Identity).unwrap();
        let loss = tape.sum_all(y);
        let grads = tape.backward(loss).unwrap();
        let flat = binding.collect_flat_grads(&store, &grads);
        // dy/dw = x, dy/db = 1
        assert_eq!(flat, vec![2.0, 4.0, 1.0]);
    }
}
