//! Vector fields defined by parsed expressions, with symbolic Jacobians.

use periodic_cert::{ForcingField, Matrix, VectorField};

use crate::expr::{self, Env, Expr, ExprError, Var};

#[derive(Debug, Clone)]
pub struct ExprField {
    components: Vec<Expr>,
    jacobian: Vec<Vec<Expr>>,
}

impl ExprField {
    /// `allow_params` permits `eps` and `mu`; state indices must stay below `dim`.
    pub fn parse(sources: &[String], dim: usize, allow_params: bool) -> Result<Self, ExprError> {
        let mut components = Vec::with_capacity(dim);
        for src in sources {
            let e = expr::parse(src)?;
            if let Some(k) = e.max_state_index() {
                if k >= dim {
                    return Err(ExprError::StateIndex { index: k + 1, dim });
                }
            }
            if !allow_params {
                if e.depends_on(Var::Eps) {
                    return Err(ExprError::Forbidden("eps"));
                }
                if e.depends_on(Var::Mu) {
                    return Err(ExprError::Forbidden("mu"));
                }
            }
            components.push(e);
        }
        Ok(Self::from_exprs(components))
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_exprs(vec![Expr::Num(0.0); dim])
    }

    fn from_exprs(components: Vec<Expr>) -> Self {
        let n = components.len();
        let jacobian = components.iter().map(|e| (0..n).map(|j| e.derivative(Var::X(j))).collect()).collect();
        Self { components, jacobian }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    fn eval_env(&self, env: &Env<'_>, dx: &mut [f64]) {
        for (d, e) in dx.iter_mut().zip(&self.components) {
            *d = e.eval(env);
        }
    }

    fn jacobian_env(&self, env: &Env<'_>, jac: &mut Matrix<f64>) {
        for (i, row) in self.jacobian.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                jac[(i, j)] = e.eval(env);
            }
        }
    }
}

impl VectorField<f64> for ExprField {
    fn dim(&self) -> usize {
        self.components.len()
    }

    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        self.eval_env(&Env { t, x, eps: 0.0, mu: 0.0 }, dx)
    }

    fn jacobian(&self, t: f64, x: &[f64], jac: &mut Matrix<f64>) {
        self.jacobian_env(&Env { t, x, eps: 0.0, mu: 0.0 }, jac)
    }
}

impl ForcingField<f64> for ExprField {
    fn dim(&self) -> usize {
        self.components.len()
    }

    fn eval(&self, t: f64, x: &[f64], eps: f64, mu: f64, dx: &mut [f64]) {
        self.eval_env(&Env { t, x, eps, mu }, dx)
    }

    fn jacobian(&self, t: f64, x: &[f64], eps: f64, mu: f64, jac: &mut Matrix<f64>) {
        self.jacobian_env(&Env { t, x, eps, mu }, jac)
    }
}
