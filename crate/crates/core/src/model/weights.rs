use std::borrow::Cow;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layout::{canonical_layers, LayerSpec};
use super::ModelConfig;
use crate::error::{LcsError, Result};
use crate::ops::ConvWeights;
use crate::tensor::Element;

/// Anything the forward pass can pull convolution weights from.
pub trait WeightSource<T: Element> {
    fn layer(&self, name: &str) -> Result<Cow<'_, ConvWeights<T>>>;
}

/// Named convolution layers in insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights<T = f32> {
    layers: Vec<(String, ConvWeights<T>)>,
    index: HashMap<String, usize>,
}

impl<T: Element> Default for ModelWeights<T> {
    fn default() -> Self {
        Self {
            layers: Vec::new(),
            index: HashMap::new(),
        }
    }
}

impl<T: Element> ModelWeights<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a layer; a second layer with the same name is a config error.
    pub fn insert(&mut self, name: impl Into<String>, w: ConvWeights<T>) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(LcsError::config(format!("duplicate layer {name}")));
        }
        self.index.insert(name.clone(), self.layers.len());
        self.layers.push((name, w));
        Ok(())
    }

    /// Replaces an existing layer or appends a new one.
    pub fn set(&mut self, name: &str, w: ConvWeights<T>) {
        match self.index.get(name) {
            Some(&i) => self.layers[i].1 = w,
            None => {
                self.index.insert(name.to_string(), self.layers.len());
                self.layers.push((name.to_string(), w));
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&ConvWeights<T>> {
        self.index.get(name).map(|&i| &self.layers[i].1)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ConvWeights<T>> {
        self.index.get(name).map(|&i| &mut self.layers[i].1)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ConvWeights<T>)> {
        self.layers.iter().map(|(n, w)| (n.as_str(), w))
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|(_, w)| w.param_count()).sum()
    }

    pub fn cast<U: Element>(&self) -> ModelWeights<U> {
        ModelWeights {
            layers: self
                .layers
                .iter()
                .map(|(n, w)| (n.clone(), w.cast()))
                .collect(),
            index: self.index.clone(),
        }
    }

    /// Checks that the layers are exactly the canonical set for `cfg` with
    /// matching shapes and geometry.
    pub fn validate(&self, cfg: &ModelConfig) -> Result<()> {
        cfg.validate()?;
        let specs = canonical_layers(cfg);
        for spec in &specs {
            let w = self
                .get(&spec.name)
                .ok_or_else(|| LcsError::config(format!("missing layer {}", spec.name)))?;
            check_layer(spec, w)?;
        }
        if self.layers.len() != specs.len() {
            let extra: Vec<_> = self
                .layers
                .iter()
                .map(|(n, _)| n.as_str())
                .filter(|n| !specs.iter().any(|s| s.name == *n))
                .collect();
            return Err(LcsError::config(format!(
                "layers not part of a {:?} model: {}",
                cfg.mode,
                extra.join(", ")
            )));
        }
        Ok(())
    }

    /// Weights for every canonical layer drawn uniformly from
    /// `±1/sqrt(fan_in)` (kernel and bias alike), reproducible per seed.
    pub fn random(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Self::new();
        for spec in canonical_layers(cfg) {
            let fan_in = (spec.c_in * spec.k * spec.k) as f64;
            let bound = 1.0 / fan_in.sqrt();
            let mut draw = |n: usize| -> Vec<T> {
                (0..n)
                    .map(|_| T::from_f64_lossy(rng.gen_range(-bound..bound)))
                    .collect()
            };
            let kernel = draw(spec.c_out * spec.c_in * spec.k * spec.k);
            let bias = draw(spec.c_out);
            let w = ConvWeights::new(
                [spec.c_out, spec.c_in, spec.k, spec.k],
                kernel,
                bias,
                spec.stride,
                spec.padding,
                1,
            )
            .expect("canonical layer shapes are valid");
            out.insert(spec.name, w)
                .expect("canonical names are unique");
        }
        out
    }

    /// All-zero weights for every canonical layer.
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let mut out = Self::new();
        for spec in canonical_layers(cfg) {
            let w = ConvWeights::zeros(spec.c_out, spec.c_in, spec.k);
            let w = ConvWeights::new(
                w.dims(),
                w.kernel().to_vec(),
                w.bias().to_vec(),
                spec.stride,
                spec.padding,
                1,
            )
            .expect("canonical layer shapes are valid");
            out.insert(spec.name, w)
                .expect("canonical names are unique");
        }
        out
    }
}

pub(crate) fn check_layer<T: Element>(spec: &LayerSpec, w: &ConvWeights<T>) -> Result<()> {
    let expected = [spec.c_out, spec.c_in, spec.k, spec.k];
    if w.dims() != expected
        || w.stride() != spec.stride
        || w.padding() != spec.padding
        || w.groups() != 1
    {
        return Err(LcsError::config(format!(
            "layer {} has dims {:?} stride {} padding {} groups {}, expected dims {:?} stride {} padding {} groups 1",
            spec.name,
            w.dims(),
            w.stride(),
            w.padding(),
            w.groups(),
            expected,
            spec.stride,
            spec.padding
        )));
    }
    Ok(())
}

impl<T: Element> WeightSource<T> for ModelWeights<T> {
    fn layer(&self, name: &str) -> Result<Cow<'_, ConvWeights<T>>> {
        self.get(name)
            .map(Cow::Borrowed)
            .ok_or_else(|| LcsError::config(format!("missing layer {name}")))
    }
}
