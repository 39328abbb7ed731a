use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::nn::{Real, TensorBuf};
use crate::{Error, Result};

/// Half-width of the uniform initialisation interval.
pub const INIT_RANGE: f64 = 0.08;

#[derive(Clone, Debug)]
pub struct Param<T> {
    pub name: String,
    pub value: TensorBuf<T>,
    pub grad: Vec<T>,
    pub momentum: Vec<T>,
}

/// Named parameters with parallel gradient and momentum buffers.
///
/// Iteration order is insertion order, which makes optimizer steps and
/// checkpoint layout deterministic.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
    index: HashMap<String, usize>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, value: TensorBuf<T>) -> Result<usize> {
        if self.index.contains_key(name) {
            return Err(Error::Invalid(format!("duplicate parameter `{name}`")));
        }
        let n = value.len();
        let id = self.params.len();
        self.params.push(Param {
            name: name.to_string(),
            value,
            grad: vec![T::zero(); n],
            momentum: vec![T::zero(); n],
        });
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.id(name)
            .ok_or_else(|| Error::Invalid(format!("missing parameter `{name}`")))
    }

    pub fn get(&self, name: &str) -> Option<&TensorBuf<T>> {
        self.id(name).map(|i| &self.params[i].value)
    }

    pub fn param(&self, id: usize) -> &Param<T> {
        &self.params[id]
    }

    pub fn param_mut(&mut self, id: usize) -> &mut Param<T> {
        &mut self.params[id]
    }

    /// Raw values of parameter `id`.
    #[inline]
    pub fn value(&self, id: usize) -> &[T] {
        self.params[id].value.data()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.params.iter_mut()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    pub fn set_grads(&mut self, grads: &Grads<T>) {
        assert_eq!(grads.0.len(), self.params.len());
        for (p, g) in self.params.iter_mut().zip(&grads.0) {
            p.grad.copy_from_slice(g);
        }
    }

    pub fn grads(&self) -> Grads<T> {
        Grads(self.params.iter().map(|p| p.grad.clone()).collect())
    }

    /// Same parameters in another float type; grads and momentum reset.
    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        let mut out = ParamStore::new();
        for p in &self.params {
            out.insert(&p.name, p.value.cast()).expect("unique names");
        }
        out
    }
}

/// Gradient accumulator laid out like a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grads<T>(pub Vec<Vec<T>>);

impl<T: Real> Grads<T> {
    pub fn zeros_like(store: &ParamStore<T>) -> Self {
        Grads(store.iter().map(|p| vec![T::zero(); p.value.len()]).collect())
    }

    #[inline]
    pub fn get_mut(&mut self, id: usize) -> &mut [T] {
        &mut self.0[id]
    }

    pub fn add_assign(&mut self, other: &Grads<T>) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for a in &mut self.0 {
            a.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().flatten().all(|x| *x == T::zero())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    /// Every element from U[-0.08, 0.08].
    #[default]
    Uniform,
    /// Weights from U[-a, a] with `a = sqrt(3 / fan_in)`, so a linear map
    /// preserves unit variance. `fan_in` sums the input widths of all weight
    /// tensors sharing a name prefix (the taps of one layer). Biases start at 0.
    FanIn,
}

/// Draw every parameter i.i.d. from U[-0.08, 0.08].
pub fn init_params<T: Real>(spec: &[(String, Vec<usize>)], seed: u64) -> Result<ParamStore<T>> {
    init_params_with(spec, seed, InitScheme::Uniform)
}

fn prefix(name: &str) -> &str {
    name.rsplit_once('.').map(|(p, _)| p).unwrap_or(name)
}

pub fn init_params_with<T: Real>(spec: &[(String, Vec<usize>)], seed: u64, scheme: InitScheme) -> Result<ParamStore<T>> {
    if spec.is_empty() {
        return Err(Error::Invalid("empty parameter spec".into()));
    }
    let mut fan_in: HashMap<&str, usize> = HashMap::new();
    for (name, shape) in spec {
        if shape.len() >= 2 {
            *fan_in.entry(prefix(name)).or_default() += shape[shape.len() - 1];
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    for (name, shape) in spec {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Invalid(format!("parameter `{name}` has empty shape {shape:?}")));
        }
        let n: usize = shape.iter().product();
        let range = match scheme {
            InitScheme::Uniform => INIT_RANGE,
            InitScheme::FanIn if shape.len() < 2 => 0.0,
            InitScheme::FanIn => (3.0 / fan_in[prefix(name)] as f64).sqrt(),
        };
        let data = if range == 0.0 {
            vec![T::zero(); n]
        } else {
            let dist = Uniform::new_inclusive(-range, range).expect("valid range");
            (0..n).map(|_| T::of(dist.sample(&mut rng))).collect()
        };
        store.insert(name, TensorBuf::from_vec(shape, data)?)?;
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(name: &str, shape: &[usize]) -> Vec<(String, Vec<usize>)> {
        vec![(name.to_string(), shape.to_vec())]
    }

    #[test]
    fn fan_in_groups_taps() {
        let spec = vec![
            ("l.a".to_string(), vec![4, 30]),
            ("l.b".to_string(), vec![4, 70]),
            ("l.bias".to_string(), vec![4]),
        ];
        let p = init_params_with::<f64>(&spec, 3, InitScheme::FanIn).unwrap();
        let a = (3.0f64 / 100.0).sqrt();
        for name in ["l.a", "l.b"] {
            let w = p.get(name).unwrap().data();
            assert!(w.iter().all(|v| v.abs() <= a));
            assert!(w.iter().any(|v| v.abs() > 0.08));
        }
        assert!(p.get("l.bias").unwrap().data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn init_range_and_determinism() {
        let a = init_params::<f32>(&spec("w", &[2, 3]), 1).unwrap();
        let b = init_params::<f32>(&spec("w", &[2, 3]), 1).unwrap();
        let w = a.get("w").unwrap();
        assert_eq!(w.len(), 6);
        assert!(w.data().iter().all(|v| (-0.08..=0.08).contains(v)));
        assert_eq!(w, b.get("w").unwrap());
        assert!(a.param(0).grad.iter().all(|g| *g == 0.0));
        assert!(a.param(0).momentum.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn init_mean_is_near_zero() {
        let s = init_params::<f64>(&spec("w", &[100_000]), 3).unwrap();
        let mean = s.get("w").unwrap().data().iter().sum::<f64>() / 1e5;
        assert!(mean.abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn init_rejects_empty() {
        assert!(init_params::<f32>(&[], 0).is_err());
        assert!(init_params::<f32>(&spec("w", &[0, 3]), 0).is_err());
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::<f32>::new();
        s.insert("a", TensorBuf::zeros(&[1])).unwrap();
        assert!(s.insert("a", TensorBuf::zeros(&[1])).is_err());
    }
}
