use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modules::ConcreteModule;
use crate::numerics::{ensure_finite, ensure_shape, CMatrix, CVector, Tolerance};

/// A linear map `Φ : E → B(C^m, C^k)`, stored by its values on the basis of
/// `E`. `h1_dim` is `m`, `h2_dim` is `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModuleMap")]
pub struct ModuleMap {
    domain: ConcreteModule,
    h1_dim: usize,
    h2_dim: usize,
    #[serde(with = "crate::wire::matrices")]
    values: Vec<CMatrix>,
}

#[derive(Deserialize)]
struct RawModuleMap {
    domain: ConcreteModule,
    h1_dim: usize,
    h2_dim: usize,
    #[serde(with = "crate::wire::matrices")]
    values: Vec<CMatrix>,
}

impl TryFrom<RawModuleMap> for ModuleMap {
    type Error = Error;
    fn try_from(raw: RawModuleMap) -> Result<Self> {
        // Nested arrays cannot carry the width of a matrix with no rows.
        let values = raw
            .values
            .into_iter()
            .map(|v| {
                if v.is_empty() && raw.h1_dim * raw.h2_dim == 0 {
                    CMatrix::zeros(raw.h2_dim, raw.h1_dim)
                } else {
                    v
                }
            })
            .collect();
        ModuleMap::new(raw.domain, raw.h1_dim, raw.h2_dim, values)
    }
}

impl ModuleMap {
    pub fn new(
        domain: ConcreteModule,
        h1_dim: usize,
        h2_dim: usize,
        values: Vec<CMatrix>,
    ) -> Result<Self> {
        if values.len() != domain.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a domain of dimension {}",
                values.len(),
                domain.dim()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            ensure_shape(v, h2_dim, h1_dim, &format!("value on basis element {i}"))?;
            ensure_finite(v)?;
        }
        Ok(Self {
            domain,
            h1_dim,
            h2_dim,
            values,
        })
    }

    pub fn from_fn(
        domain: ConcreteModule,
        h1_dim: usize,
        h2_dim: usize,
        f: impl Fn(&CMatrix) -> CMatrix,
    ) -> Result<Self> {
        let values = domain.basis().iter().map(f).collect();
        Self::new(domain, h1_dim, h2_dim, values)
    }

    pub fn zero(domain: ConcreteModule, h1_dim: usize, h2_dim: usize) -> Self {
        Self::from_fn(domain, h1_dim, h2_dim, |_| CMatrix::zeros(h2_dim, h1_dim))
            .expect("consistent shapes")
    }

    pub fn domain(&self) -> &ConcreteModule {
        &self.domain
    }

    pub fn h1_dim(&self) -> usize {
        self.h1_dim
    }

    pub fn h2_dim(&self) -> usize {
        self.h2_dim
    }

    pub fn values(&self) -> &[CMatrix] {
        &self.values
    }

    pub fn combine(&self, coords: &CVector) -> CMatrix {
        let mut out = CMatrix::zeros(self.h2_dim, self.h1_dim);
        for (v, c) in self.values.iter().zip(coords.iter()) {
            out += v * *c;
        }
        out
    }

    /// `Φ(x)` for any `x` in the span of the domain basis.
    pub fn apply(&self, x: &CMatrix, tol: &Tolerance) -> Result<CMatrix> {
        let coords = self.domain.coordinates(x, tol)?;
        Ok(self.combine(&coords))
    }

    /// The same map with values tabulated on the basis of `sub ⊆ domain`.
    pub fn restrict(&self, sub: &ConcreteModule, tol: &Tolerance) -> Result<ModuleMap> {
        let values = sub
            .basis()
            .iter()
            .map(|x| self.apply(x, tol))
            .collect::<Result<_>>()?;
        ModuleMap::new(sub.clone(), self.h1_dim, self.h2_dim, values)
    }

    /// `outer ∘ inner`: the values of `inner` must lie in `outer`'s domain.
    pub fn compose(outer: &ModuleMap, inner: &ModuleMap, tol: &Tolerance) -> Result<ModuleMap> {
        let values = inner
            .values
            .iter()
            .map(|v| outer.apply(v, tol))
            .collect::<Result<_>>()?;
        ModuleMap::new(inner.domain.clone(), outer.h1_dim, outer.h2_dim, values)
    }

    /// The vectors `Φ(x_i) e_l`, as columns.
    pub fn range_columns(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.h2_dim, self.values.len() * self.h1_dim);
        for (i, v) in self.values.iter().enumerate() {
            m.view_mut((0, i * self.h1_dim), (self.h2_dim, self.h1_dim))
                .copy_from(v);
        }
        m
    }

    /// Largest Frobenius distance between values on a shared basis.
    pub fn max_distance(&self, other: &ModuleMap) -> Result<f64> {
        if self.values.len() != other.values.len()
            || self.h1_dim != other.h1_dim
            || self.h2_dim != other.h2_dim
        {
            return Err(Error::ShapeMismatch("maps are not comparable".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn value_scale(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}
