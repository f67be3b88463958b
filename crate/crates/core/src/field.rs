//! Scalar fields and vector-field families.
//!
//! A [`ScalarField`] produces third-order jets at points; it is the common
//! currency between the expression parser, the random polynomial generators
//! used in property tests, and the operators built on top (second-order
//! generators, carre-du-champ forms, heat solvers, flow distances).
//!
//! A [`VectorFieldSet`] is an ordered family A^1, ..., A^m of vector fields
//! on R^d (each an array of d scalar components); the associated generator is
//! the sum of squared directional derivatives along the family.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::Jet;

/// A smooth scalar function of d variables with third-order jets.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn jet(&self, x: &[f64]) -> Result<Jet>;
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.jet(x)?.v)
    }
}

/// Field defined by a parsed expression.
#[derive(Debug, Clone)]
pub struct ExprField {
    expr: Expr,
    dim: usize,
}

impl ExprField {
    pub fn new(src: &str, dim: usize) -> Result<ExprField> {
        let expr = Expr::parse(src)?;
        if expr.min_dim() > dim {
            return Err(Error::dimension(format!(
                "expression {src:?} uses coordinate x{}, but dimension is {dim}",
                expr.min_dim() - 1
            )));
        }
        Ok(ExprField { expr, dim })
    }
}

impl ScalarField for ExprField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn jet(&self, x: &[f64]) -> Result<Jet> {
        if x.len() != self.dim {
            return Err(Error::dimension(format!(
                "point dimension {} != field dimension {}",
                x.len(),
                self.dim
            )));
        }
        self.expr.eval_jet(x)
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::dimension(format!(
                "point dimension {} != field dimension {}",
                x.len(),
                self.dim
            )));
        }
        self.expr.eval(x)
    }
}

/// Multivariate polynomial of total degree at most three, with exact jets.
///
/// Coefficient tensors are stored symmetric, so the Hessian band is
/// `2 q_ij + 6 sum_k c_ijk x_k` and the third band is the constant `6 c_ijk`.
#[derive(Debug, Clone)]
pub struct CubicPoly {
    pub dim: usize,
    pub c0: f64,
    pub lin: Vec<f64>,
    /// Symmetric, row-major d*d.
    pub quad: Vec<f64>,
    /// Fully symmetric, d^3.
    pub cubic: Vec<f64>,
}

impl CubicPoly {
    pub fn constant(dim: usize, c: f64) -> CubicPoly {
        CubicPoly {
            dim,
            c0: c,
            lin: vec![0.0; dim],
            quad: vec![0.0; dim * dim],
            cubic: vec![0.0; dim * dim * dim],
        }
    }

    pub fn affine(dim: usize, c: f64, lin: Vec<f64>) -> Result<CubicPoly> {
        if lin.len() != dim {
            return Err(Error::dimension("affine coefficient length mismatch"));
        }
        Ok(CubicPoly {
            dim,
            c0: c,
            lin,
            quad: vec![0.0; dim * dim],
            cubic: vec![0.0; dim * dim * dim],
        })
    }

    /// Random polynomial with coefficients uniform in [-amplitude, amplitude],
    /// symmetrized; higher-degree coefficients are damped so values stay O(1)
    /// on the unit box.
    pub fn random(dim: usize, amplitude: f64, rng: &mut impl Rng) -> CubicPoly {
        let mut p = CubicPoly::constant(dim, rng.gen_range(-amplitude..=amplitude));
        for i in 0..dim {
            p.lin[i] = rng.gen_range(-amplitude..=amplitude);
        }
        for i in 0..dim {
            for j in 0..=i {
                let v = rng.gen_range(-amplitude..=amplitude) / 2.0;
                p.quad[i * dim + j] = v;
                p.quad[j * dim + i] = v;
            }
        }
        for i in 0..dim {
            for j in 0..=i {
                for k in 0..=j {
                    let v = rng.gen_range(-amplitude..=amplitude) / 6.0;
                    for (a, b, c) in [
                        (i, j, k),
                        (i, k, j),
                        (j, i, k),
                        (j, k, i),
                        (k, i, j),
                        (k, j, i),
                    ] {
                        p.cubic[(a * dim + b) * dim + c] = v;
                    }
                }
            }
        }
        p
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        let mut v = self.c0;
        for i in 0..d {
            v += self.lin[i] * x[i];
            for j in 0..d {
                v += self.quad[i * d + j] * x[i] * x[j];
                for k in 0..d {
                    v += self.cubic[(i * d + j) * d + k] * x[i] * x[j] * x[k];
                }
            }
        }
        v
    }
}

impl ScalarField for CubicPoly {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, x: &[f64]) -> Result<Jet> {
        let d = self.dim;
        if x.len() != d {
            return Err(Error::dimension(format!(
                "point dimension {} != field dimension {}",
                x.len(),
                d
            )));
        }
        let mut j = Jet::constant(d, self.eval(x));
        for i in 0..d {
            let mut gi = self.lin[i];
            for a in 0..d {
                gi += 2.0 * self.quad[i * d + a] * x[a];
                for b in 0..d {
                    gi += 3.0 * self.cubic[(i * d + a) * d + b] * x[a] * x[b];
                }
            }
            j.g[i] = gi;
        }
        for i in 0..d {
            for k in 0..d {
                let mut hik = 2.0 * self.quad[i * d + k];
                let base = (i * d + k) * d;
                for (a, xa) in x.iter().enumerate() {
                    hik += 6.0 * self.cubic[base + a] * xa;
                }
                j.h[i * d + k] = hik;
            }
        }
        for i in 0..d {
            for a in 0..d {
                for b in 0..d {
                    j.t[(i * d + a) * d + b] = 6.0 * self.cubic[(i * d + a) * d + b];
                }
            }
        }
        Ok(j)
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::dimension(format!(
                "point dimension {} != field dimension {}",
                x.len(),
                self.dim
            )));
        }
        Ok(self.eval(x))
    }
}

/// Exponential of an inner field: strictly positive with exact jets.
#[derive(Debug, Clone)]
pub struct ExpField<F: ScalarField>(pub F);

impl<F: ScalarField> ScalarField for ExpField<F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn jet(&self, x: &[f64]) -> Result<Jet> {
        Ok(self.0.jet(x)?.exp())
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.0.value(x)?.exp())
    }
}

/// An ordered family of m vector fields on R^d; component (k, i) is the i-th
/// coordinate of the k-th field.
#[derive(Clone)]
pub struct VectorFieldSet {
    pub dim: usize,
    pub count: usize,
    comps: Vec<Arc<dyn ScalarField>>,
}

impl VectorFieldSet {
    /// Constant fields: `rows[k]` is the k-th field's coordinate vector.
    pub fn constant(dim: usize, rows: &[Vec<f64>]) -> Result<VectorFieldSet> {
        let mut comps: Vec<Arc<dyn ScalarField>> = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::dimension(format!(
                    "constant field has {} components, dimension is {dim}",
                    row.len()
                )));
            }
            for &c in row {
                comps.push(Arc::new(CubicPoly::constant(dim, c)));
            }
        }
        Ok(VectorFieldSet {
            dim,
            count: rows.len(),
            comps,
        })
    }

    /// Fields given component-wise as expressions: `rows[k][i]` is the text of
    /// component i of field k.
    pub fn from_exprs(dim: usize, rows: &[Vec<&str>]) -> Result<VectorFieldSet> {
        let mut comps: Vec<Arc<dyn ScalarField>> = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::dimension(format!(
                    "field has {} expression components, dimension is {dim}",
                    row.len()
                )));
            }
            for src in row {
                comps.push(Arc::new(ExprField::new(src, dim)?));
            }
        }
        Ok(VectorFieldSet {
            dim,
            count: rows.len(),
            comps,
        })
    }

    /// Fields from prebuilt scalar components, row-major by field.
    pub fn from_fields(dim: usize, fields: Vec<Arc<dyn ScalarField>>) -> Result<VectorFieldSet> {
        if fields.is_empty() || dim == 0 || !fields.len().is_multiple_of(dim) {
            return Err(Error::dimension(format!(
                "component count {} is not a positive multiple of dimension {dim}",
                fields.len()
            )));
        }
        if fields.iter().any(|f| f.dim() != dim) {
            return Err(Error::dimension("component dimension mismatch"));
        }
        let count = fields.len() / dim;
        Ok(VectorFieldSet {
            dim,
            count,
            comps: fields,
        })
    }

    pub fn component(&self, k: usize, i: usize) -> &dyn ScalarField {
        self.comps[k * self.dim + i].as_ref()
    }

    /// Jets of every component of field k at x.
    pub fn field_jets(&self, k: usize, x: &[f64]) -> Result<Vec<Jet>> {
        (0..self.dim).map(|i| self.component(k, i).jet(x)).collect()
    }

    /// Values of field k at x (the flow right-hand side).
    pub fn field_values(&self, k: usize, x: &[f64]) -> Result<Vec<f64>> {
        (0..self.dim)
            .map(|i| self.component(k, i).value(x))
            .collect()
    }
}
