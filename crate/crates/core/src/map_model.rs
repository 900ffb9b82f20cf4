//! Torus endomorphisms with trigonometric-polynomial displacement.
//!
//! A map is stored as `f~ = A + d`, where `A` is the integer linear part and
//! `d` is a finite sum of sine/cosine terms in `2π(k·x)`, hence exactly
//! `Z^2`-periodic. This restriction buys rigor without an interval library:
//! derivatives are termwise-exact, and sup / Lipschitz bounds are closed-form
//! sums over the coefficients.
//!
//! Lift orbits are tracked as a fractional part in `[0,1)^2` plus an explicit
//! integer translation ([`LiftPoint`]), so that differences of nearby orbits
//! remain accurate even when the integer parts grow like `|lambda_1|^n`.

use crate::integer_linear::{self, IntLinearError, IntMat2};
use crate::mat::{self, Vec2};
use serde::Serialize;
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("sin term with zero wavevector is identically zero")]
    ZeroWavevectorSin,
    #[error("non-finite coefficient in displacement term")]
    NonFiniteCoefficient,
    #[error("linear part must satisfy |det A| >= 1, got det = {det}")]
    LinearPartSingular { det: i64 },
    #[error("linear-part extraction residual {residual:e} exceeds 1e-6")]
    ResidualTooLarge { residual: f64 },
    #[error("Newton iteration for an inverse branch did not converge near target {target:?}")]
    BranchDivergence { target: [f64; 2] },
    #[error(transparent)]
    IntLinear(#[from] IntLinearError),
}

/// Real 2×2 matrix, row-major. Houses derivatives `Df_p`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub fn identity() -> Mat2 {
        Mat2([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn from_int(a: &IntMat2) -> Mat2 {
        Mat2([
            [a.0[0][0] as f64, a.0[0][1] as f64],
            [a.0[1][0] as f64, a.0[1][1] as f64],
        ])
    }

    pub fn diag(a: f64, b: f64) -> Mat2 {
        Mat2([[a, 0.0], [0.0, b]])
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = self.0[i][0] * rhs.0[0][j] + self.0[i][1] * rhs.0[1][j];
            }
        }
        Mat2(out)
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    pub fn add(&self, rhs: &Mat2) -> Mat2 {
        let mut out = self.0;
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] += rhs.0[i][j];
            }
        }
        Mat2(out)
    }

    pub fn sub(&self, rhs: &Mat2) -> Mat2 {
        let mut out = self.0;
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] -= rhs.0[i][j];
            }
        }
        Mat2(out)
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2([
            [self.0[0][0], self.0[1][0]],
            [self.0[0][1], self.0[1][1]],
        ])
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Mat2([
            [self.0[1][1] / d, -self.0[0][1] / d],
            [-self.0[1][0] / d, self.0[0][0] / d],
        ]))
    }

    /// Max row sum of absolute values (operator norm for the sup norm).
    pub fn norm_inf(&self) -> f64 {
        let r0 = self.0[0][0].abs() + self.0[0][1].abs();
        let r1 = self.0[1][0].abs() + self.0[1][1].abs();
        r0.max(r1)
    }

    /// Max column sum of absolute values.
    pub fn norm_1(&self) -> f64 {
        let c0 = self.0[0][0].abs() + self.0[1][0].abs();
        let c1 = self.0[0][1].abs() + self.0[1][1].abs();
        c0.max(c1)
    }

    /// Upper bound on the spectral norm: `sqrt(|M|_1 |M|_inf)`.
    pub fn norm_2_bound(&self) -> f64 {
        (self.norm_1() * self.norm_inf()).sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0f64, |acc, &v| acc.max(v.abs()))
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum TrigKind {
    Sin,
    Cos,
}

/// One displacement term `coeff * kind(2π (k1 x + k2 y))`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct FourierTerm {
    pub coeff: f64,
    pub kind: TrigKind,
    pub wave: [i64; 2],
}

impl FourierTerm {
    pub fn sin(coeff: f64, k1: i64, k2: i64) -> FourierTerm {
        FourierTerm {
            coeff,
            kind: TrigKind::Sin,
            wave: [k1, k2],
        }
    }

    pub fn cos(coeff: f64, k1: i64, k2: i64) -> FourierTerm {
        FourierTerm {
            coeff,
            kind: TrigKind::Cos,
            wave: [k1, k2],
        }
    }

    fn validate(&self) -> Result<(), MapError> {
        if !self.coeff.is_finite() {
            return Err(MapError::NonFiniteCoefficient);
        }
        if self.kind == TrigKind::Sin && self.wave == [0, 0] {
            return Err(MapError::ZeroWavevectorSin);
        }
        Ok(())
    }

    fn phase(&self, p: Vec2) -> f64 {
        TAU * (self.wave[0] as f64 * p[0] + self.wave[1] as f64 * p[1])
    }

    pub fn eval(&self, p: Vec2) -> f64 {
        let s = self.phase(p);
        match self.kind {
            TrigKind::Sin => self.coeff * s.sin(),
            TrigKind::Cos => self.coeff * s.cos(),
        }
    }

    /// Gradient `(∂x, ∂y)` of the term.
    pub fn grad(&self, p: Vec2) -> Vec2 {
        let s = self.phase(p);
        let outer = match self.kind {
            TrigKind::Sin => s.cos(),
            TrigKind::Cos => -s.sin(),
        };
        [
            self.coeff * TAU * self.wave[0] as f64 * outer,
            self.coeff * TAU * self.wave[1] as f64 * outer,
        ]
    }

    fn wave_l1(&self) -> f64 {
        (self.wave[0].abs() + self.wave[1].abs()) as f64
    }
}

/// `Z^2`-periodic displacement field: one term list per coordinate.
#[derive(Clone, Debug, Default, Serialize)]
pub struct PeriodicField {
    components: [Vec<FourierTerm>; 2],
}

impl PeriodicField {
    pub fn new(x_terms: Vec<FourierTerm>, y_terms: Vec<FourierTerm>) -> Result<PeriodicField, MapError> {
        for t in x_terms.iter().chain(y_terms.iter()) {
            t.validate()?;
        }
        Ok(PeriodicField {
            components: [x_terms, y_terms],
        })
    }

    pub fn zero() -> PeriodicField {
        PeriodicField::default()
    }

    pub fn components(&self) -> &[Vec<FourierTerm>; 2] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components[0].is_empty() && self.components[1].is_empty()
    }

    pub fn eval(&self, p: Vec2) -> Vec2 {
        let mut out = [0.0; 2];
        for i in 0..2 {
            for t in &self.components[i] {
                out[i] += t.eval(p);
            }
        }
        out
    }

    /// Jacobian of the displacement alone.
    pub fn derivative(&self, p: Vec2) -> Mat2 {
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for t in &self.components[i] {
                let g = t.grad(p);
                out[i][0] += g[0];
                out[i][1] += g[1];
            }
        }
        Mat2(out)
    }

    /// Per-component sup bound `Σ |coeff|`.
    pub fn sup_bound_per_component(&self) -> [f64; 2] {
        let mut out = [0.0; 2];
        for i in 0..2 {
            out[i] = self.components[i].iter().map(|t| t.coeff.abs()).sum();
        }
        out
    }

    /// Entrywise sup bounds for the displacement Jacobian:
    /// `s_ij = Σ 2π |coeff| |k_j|` over row-`i` terms.
    pub fn derivative_sup_entries(&self) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for t in &self.components[i] {
                for j in 0..2 {
                    out[i][j] += TAU * t.coeff.abs() * t.wave[j].abs() as f64;
                }
            }
        }
        out
    }

    /// Entrywise Lipschitz bounds for the displacement Jacobian:
    /// `L_ij = Σ (2π)^2 |coeff| |k_j| |k|_1` over row-`i` terms.
    pub fn derivative_lipschitz_entries(&self) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for t in &self.components[i] {
                for j in 0..2 {
                    out[i][j] += TAU * TAU * t.coeff.abs() * t.wave[j].abs() as f64 * t.wave_l1();
                }
            }
        }
        out
    }
}

/// Conservative Lipschitz data for `p ↦ Df_p` and `p ↦ det Df_p`.
#[derive(Copy, Clone, Debug, Serialize)]
pub struct LipschitzBounds {
    /// Dominates `‖Df_p − Df_q‖ / ‖p − q‖_2` in the 1-, 2- and sup operator norms.
    pub lip_df: f64,
    /// Dominates `|det Df_p − det Df_q| / ‖p − q‖_2`.
    pub lip_det: f64,
}

/// Normalizes a point to the fundamental domain `[0,1)^2`.
pub fn normalize_torus(p: Vec2) -> Vec2 {
    let mut out = [0.0; 2];
    for i in 0..2 {
        let mut r = p[i].rem_euclid(1.0);
        if r >= 1.0 {
            r = 0.0;
        }
        out[i] = r;
    }
    out
}

/// A plane point stored as fractional part plus exact integer translation.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct LiftPoint {
    pub frac: Vec2,
    pub whole: [i128; 2],
}

impl LiftPoint {
    pub fn from_plane(p: Vec2) -> LiftPoint {
        let fx = p[0].floor();
        let fy = p[1].floor();
        LiftPoint {
            frac: [p[0] - fx, p[1] - fy],
            whole: [fx as i128, fy as i128],
        }
    }

    /// Collapses to a plain `f64` point; loses precision once the integer
    /// part exceeds 2^52.
    pub fn value(&self) -> Vec2 {
        [
            self.frac[0] + self.whole[0] as f64,
            self.frac[1] + self.whole[1] as f64,
        ]
    }

    /// Exact difference `self − other`; accurate whenever the integer parts
    /// are close even if both are astronomically large.
    pub fn diff(&self, other: &LiftPoint) -> Vec2 {
        [
            (self.frac[0] - other.frac[0]) + (self.whole[0] - other.whole[0]) as f64,
            (self.frac[1] - other.frac[1]) + (self.whole[1] - other.whole[1]) as f64,
        ]
    }
}

/// A smooth endomorphism of the 2-torus: integer linear part plus periodic
/// trigonometric-polynomial displacement.
#[derive(Clone, Debug, Serialize)]
pub struct TorusEndomorphism {
    linear: IntMat2,
    displacement: PeriodicField,
    name: String,
}

impl TorusEndomorphism {
    pub fn new(
        linear: IntMat2,
        displacement: PeriodicField,
        name: impl Into<String>,
    ) -> Result<TorusEndomorphism, MapError> {
        let det = linear.det();
        if det == 0 {
            return Err(MapError::LinearPartSingular { det });
        }
        Ok(TorusEndomorphism {
            linear,
            displacement,
            name: name.into(),
        })
    }

    pub fn linear_part(&self) -> &IntMat2 {
        &self.linear
    }

    pub fn displacement(&self) -> &PeriodicField {
        &self.displacement
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_linear(&self) -> bool {
        self.displacement.is_zero()
    }

    /// Lift evaluation `f~(x) = A x + d(x)`.
    ///
    /// For orbit computations with growing integer parts prefer
    /// [`TorusEndomorphism::step_lift`], which evaluates the periodic part on
    /// the fractional coordinates only.
    pub fn eval_lift(&self, x: Vec2) -> Vec2 {
        let a = Mat2::from_int(&self.linear);
        mat::add(a.mul_vec(x), self.displacement.eval(x))
    }

    /// Induced torus map, normalized to `[0,1)^2`.
    pub fn eval_torus(&self, p: Vec2) -> Vec2 {
        normalize_torus(self.eval_lift(normalize_torus(p)))
    }

    /// One lift step with explicit integer bookkeeping.
    ///
    /// Panics on `i128` overflow of the translation part, which for
    /// `|lambda_1| = 5` only happens past roughly 50 iterations.
    pub fn step_lift(&self, p: &LiftPoint) -> LiftPoint {
        let a = &self.linear.0;
        let y = mat::add(
            Mat2::from_int(&self.linear).mul_vec(p.frac),
            self.displacement.eval(p.frac),
        );
        let fx = y[0].floor();
        let fy = y[1].floor();
        let mul = |r: [i64; 2]| -> i128 {
            (r[0] as i128)
                .checked_mul(p.whole[0])
                .and_then(|u| (r[1] as i128).checked_mul(p.whole[1]).and_then(|v| u.checked_add(v)))
                .expect("lift translation overflow; iterate count too large")
        };
        LiftPoint {
            frac: [y[0] - fx, y[1] - fy],
            whole: [
                mul(a[0]) + fx as i128,
                mul(a[1]) + fy as i128,
            ],
        }
    }

    /// Analytic derivative `Df_p = A + Dd_p` (termwise differentiation).
    pub fn eval_derivative(&self, p: Vec2) -> Mat2 {
        // The displacement is periodic; evaluating on the fractional part
        // keeps trig arguments small for points far out on the lift.
        Mat2::from_int(&self.linear).add(&self.displacement.derivative(normalize_torus(p)))
    }

    /// `|det Df_p|`.
    pub fn jacobian_det(&self, p: Vec2) -> f64 {
        self.eval_derivative(p).det().abs()
    }

    /// Rigorous sup bound `κ0 >= ‖f~ − A‖_∞` (max over components of the
    /// coefficient absolute sums).
    pub fn sup_displacement_bound(&self) -> f64 {
        let b = self.displacement.sup_bound_per_component();
        b[0].max(b[1])
    }

    /// Entrywise sup bounds on `|Df|`: `|A_ij| + s_ij`.
    pub fn derivative_sup_matrix(&self) -> Mat2 {
        let s = self.displacement.derivative_sup_entries();
        let a = &self.linear.0;
        Mat2([
            [a[0][0].abs() as f64 + s[0][0], a[0][1].abs() as f64 + s[0][1]],
            [a[1][0].abs() as f64 + s[1][0], a[1][1].abs() as f64 + s[1][1]],
        ])
    }

    /// Upper bound on `sup_p ‖Df_p‖_2`, also a Lipschitz constant for `f~`.
    pub fn derivative_norm_bound(&self) -> f64 {
        self.derivative_sup_matrix().norm_2_bound()
    }

    /// Conservative Lipschitz constants for the derivative and the Jacobian
    /// determinant, from coefficient sums alone.
    pub fn lipschitz_bounds(&self) -> LipschitzBounds {
        let l = self.displacement.derivative_lipschitz_entries();
        let lip_df: f64 = l.iter().flatten().sum();
        let m = self.derivative_sup_matrix().0;
        let lip_det = m[0][0] * l[1][1] + m[1][1] * l[0][0] + m[0][1] * l[1][0] + m[1][0] * l[0][1];
        LipschitzBounds { lip_df, lip_det }
    }

    /// All `|det A|` preimages of the torus point `q`, sorted
    /// lexicographically.
    ///
    /// One Newton solve per residue class of `Z^2 / A Z^2`, targeting `q + w`
    /// on the lift with seed `A^{-1}(q + w)`; overshoots are damped by
    /// halving.
    pub fn preimages(&self, q: Vec2) -> Result<Vec<Vec2>, MapError> {
        let q = normalize_torus(q);
        let reps = integer_linear::coset_representatives(&self.linear)?;
        let mut out = Vec::with_capacity(reps.len());
        for w in reps {
            let target = [q[0] + w[0] as f64, q[1] + w[1] as f64];
            let x = self.newton_lift(target)?;
            out.push(normalize_torus(x));
        }
        out.sort_by(|a, b| a.partial_cmp(b).expect("preimages are finite"));
        for i in 0..out.len() {
            for j in 0..i {
                if torus_dist_inf(out[i], out[j]) <= 1e-6 {
                    return Err(MapError::BranchDivergence { target: q });
                }
            }
        }
        Ok(out)
    }

    fn newton_lift(&self, target: Vec2) -> Result<Vec2, MapError> {
        let a_inv = Mat2::from_int(&self.linear)
            .inverse()
            .expect("linear part is nonsingular by construction");
        let mut x = a_inv.mul_vec(target);
        let mut res = mat::sub(self.eval_lift(x), target);
        let mut rn = mat::norm_inf(res);
        for _ in 0..60 {
            if rn <= 1e-13 {
                return Ok(x);
            }
            let step = match self.eval_derivative(x).inverse() {
                Some(inv) => inv.mul_vec(res),
                None => return Err(MapError::BranchDivergence { target }),
            };
            let mut damp = 1.0;
            let mut accepted = false;
            for _ in 0..20 {
                let cand = mat::sub(x, mat::scale(step, damp));
                let cres = mat::sub(self.eval_lift(cand), target);
                let crn = mat::norm_inf(cres);
                if crn < rn {
                    x = cand;
                    res = cres;
                    rn = crn;
                    accepted = true;
                    break;
                }
                damp *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if rn <= 1e-10 {
            Ok(x)
        } else {
            Err(MapError::BranchDivergence { target })
        }
    }
}

/// Sup-norm distance on the torus.
pub fn torus_dist_inf(a: Vec2, b: Vec2) -> f64 {
    let mut out = 0.0f64;
    for i in 0..2 {
        let d = (a[i] - b[i]).rem_euclid(1.0);
        out = out.max(d.min(1.0 - d));
    }
    out
}

/// Extracted linear part together with the max deviation of the raw column
/// differences from the nearest integers.
#[derive(Copy, Clone, Debug)]
pub struct LinearPartEstimate {
    pub matrix: IntMat2,
    pub residual: f64,
}

/// Recovers the integer linear part from any lift evaluator using the
/// equivariance `f~(x + e_j) − f~(x) = A e_j`, evaluated at `x = (0,0)`.
/// (By equivariance any base point gives the same answer.)
pub fn extract_linear_part<F>(eval: F) -> Result<LinearPartEstimate, MapError>
where
    F: Fn(Vec2) -> Vec2,
{
    let base = eval([0.0, 0.0]);
    let mut m = [[0i64; 2]; 2];
    let mut residual = 0.0f64;
    for j in 0..2 {
        let mut e = [0.0, 0.0];
        e[j] = 1.0;
        let col = mat::sub(eval(e), base);
        for i in 0..2 {
            let r = col[i].round();
            residual = residual.max((col[i] - r).abs());
            m[i][j] = r as i64;
        }
    }
    if residual > 1e-6 {
        return Err(MapError::ResidualTooLarge { residual });
    }
    Ok(LinearPartEstimate {
        matrix: IntMat2(m),
        residual,
    })
}
