//! Flat parameter storage.
//!
//! Every learnable tensor of a network lives in one contiguous buffer, with a
//! parallel gradient buffer of identical layout. Layers hold [`ParamId`]
//! handles into it. This keeps the optimizer, checkpointing and finite
//! difference checks independent of the architecture.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::real::Real;

/// Handle to one tensor inside a [`Params`] buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId {
    pub offset: usize,
    pub len: usize,
}

impl ParamId {
    #[inline]
    pub fn range(self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Init {
    Zeros,
    Ones,
    Normal(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub values: Vec<T>,
    pub grads: Vec<T>,
    pub specs: Vec<ParamSpec>,
}

impl<T: Real> Default for Params<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Params<T> {
    pub fn new() -> Self {
        Self {
            values: Vec::new(),
            grads: Vec::new(),
            specs: Vec::new(),
        }
    }

    pub fn add<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        init: Init,
        rng: &mut R,
    ) -> ParamId {
        let offset = self.values.len();
        let len: usize = shape.iter().product();
        match init {
            Init::Zeros => self.values.extend(std::iter::repeat_n(T::ZERO, len)),
            Init::Ones => self.values.extend(std::iter::repeat_n(T::ONE, len)),
            Init::Normal(std) => {
                let dist = Normal::new(0.0, std).expect("positive init std");
                self.values.extend((0..len).map(|_| T::from_f64(dist.sample(rng))));
            }
        }
        self.grads.extend(std::iter::repeat_n(T::ZERO, len));
        self.specs.push(ParamSpec {
            name: name.into(),
            shape: shape.to_vec(),
            offset,
        });
        ParamId { offset, len }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = T::ZERO);
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> &[T] {
        &self.values[id.range()]
    }

    pub fn spec(&self, name: &str) -> Option<&ParamSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    /// Same layout, values converted to another scalar type. Gradients reset.
    pub fn cast<U: Real>(&self) -> Params<U> {
        Params {
            values: self.values.iter().map(|v| U::from_f64(v.to_f64())).collect(),
            grads: vec![U::ZERO; self.values.len()],
            specs: self.specs.clone(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
