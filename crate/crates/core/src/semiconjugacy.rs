//! The semiconjugacy onto the linear part, with certified error bounds.
//!
//! For a map `f~ = A + d` with expanding `A`, the semiconjugacy lift
//! telescopes as
//!
//! ```text
//! h_n(x) = A^{-n} f~^n(x) = x + Σ_{m<n} A^{-(m+1)} d(f^m x),
//! ```
//!
//! so `h` can be evaluated to any tolerance by truncating the series once the
//! geometric tail `κ0 · Σ_{m>n} ‖A^{-m}‖` drops below it. The same series
//! gives the a-priori bound `‖h − id‖ ≤ κ`. All norms in this module are sup
//! norms.
//!
//! Fibers `h^{-1}(h(p))` are probed by the bounded-orbit characterization:
//! a point belongs to the fiber iff its lifted orbit stays within `r` of the
//! orbit of `p` for all time, for any `r > 2κ`. Finite-depth survival is
//! necessary but not sufficient, so fiber diameters are reported as numeric
//! evidence, never as proofs.

use crate::integer_linear::{self, IntMat2};
use crate::map_model::{Mat2, TorusEndomorphism};
use crate::mat::{self, Vec2};
use crate::parallel;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SemiconjError {
    #[error("linear part is not expanding (an eigenvalue has modulus <= 1)")]
    NotExpanding,
    #[error("linear part has no integer eigenvalues")]
    NoIntegerEigenvalues,
    #[error("|lambda_1| = |lambda_2|: the dichotomy requires a strict eigenvalue gap")]
    EigenvalueTie,
    #[error("fiber radius {r} must exceed 2*kappa = {min}")]
    RadiusTooSmall { r: f64, min: f64 },
}

fn is_expanding(a: &IntMat2) -> bool {
    match integer_linear::integer_eigenvalues(a) {
        Some(e) => e.lambda2.abs() > 1,
        None => {
            let tr = a.trace() as f64;
            let det = a.det() as f64;
            let disc = tr * tr - 4.0 * det;
            if disc < 0.0 {
                // Complex pair of modulus sqrt(det).
                det > 1.0
            } else {
                let s = disc.sqrt();
                ((tr + s) / 2.0).abs() > 1.0 && ((tr - s) / 2.0).abs() > 1.0
            }
        }
    }
}

/// Certified data for the semiconjugacy error: `‖h~ − id‖_∞ <= kappa`.
#[derive(Clone, Debug, Serialize)]
pub struct SemiconjParams {
    /// Sup bound on the displacement `‖f~ − A‖_∞`.
    pub kappa0: f64,
    /// Certified bound on `‖h~ − id‖_∞`.
    pub kappa: f64,
    /// `‖A^{-m}‖_∞` for `m = 1..=cutoff` (exact integer arithmetic while the
    /// adjugate powers fit in `i128`, lightly inflated floats past that).
    pub power_norms: Vec<f64>,
    /// Contraction factor of the geometric tail.
    pub tail_ratio: f64,
    /// Upper bound on `Σ_{m>=1} ‖A^{-m}‖_∞`.
    pub norm_series_bound: f64,
}

impl SemiconjParams {
    /// Upper bound on `κ0 · Σ_{m>n} ‖A^{-m}‖`, the truncation error of
    /// `h_n`.
    pub fn tail_after(&self, n: usize) -> f64 {
        let l = self.power_norms.len();
        if n >= l {
            // Norms are computed until they are negligible; extend by the
            // geometric bound from the last stored norm.
            return self.kappa0 * self.power_norms[l - 1] * self.norm_series_bound;
        }
        let direct: f64 = self.power_norms[n..].iter().sum();
        self.kappa0 * (direct + self.power_norms[l - 1] * self.norm_series_bound)
    }

    /// Smallest depth whose truncation error is at most `tol`.
    pub fn depth_for(&self, tol: f64) -> usize {
        assert!(tol > 0.0);
        for n in 0..=self.power_norms.len() {
            if self.tail_after(n) <= tol {
                return n;
            }
        }
        self.power_norms.len()
    }
}

/// `‖A^{-m}‖_∞` via exact adjugate powers: `A^{-m} = adj(A)^m / det(A)^m`.
fn inverse_power_norm(a: &IntMat2, m: u32) -> f64 {
    let det = a.det() as f64;
    if let Some(p) = integer_linear::int_pow_i128(&a.adjugate(), m) {
        let r0 = p[0][0].unsigned_abs() as f64 + p[0][1].unsigned_abs() as f64;
        let r1 = p[1][0].unsigned_abs() as f64 + p[1][1].unsigned_abs() as f64;
        return r0.max(r1) / det.abs().powi(m as i32) * (1.0 + 1e-12 * m as f64);
    }
    // Adjugate powers overflowed; by then the norm is far below any useful
    // tolerance, but fall back to float products with inflation.
    let inv = Mat2::from_int(a).inverse().expect("expanding matrices are invertible");
    let mut acc = Mat2::identity();
    for _ in 0..m {
        acc = acc.mul(&inv);
    }
    acc.norm_inf() * (1.0 + 1e-10 * m as f64)
}

/// Computes the certified semiconjugacy constants for `f`.
pub fn kappa_bound(f: &TorusEndomorphism) -> Result<SemiconjParams, SemiconjError> {
    let a = f.linear_part();
    if !is_expanding(a) {
        return Err(SemiconjError::NotExpanding);
    }
    let kappa0 = f.sup_displacement_bound();

    let mut norms = Vec::new();
    let mut m0 = None;
    for m in 1..=300u32 {
        let nm = inverse_power_norm(a, m);
        norms.push(nm);
        if m0.is_none() && nm <= 0.5 {
            m0 = Some(m as usize);
        }
        if nm < 1e-20 && m0.is_some() {
            break;
        }
    }
    let m0 = m0.ok_or(SemiconjError::NotExpanding)?;
    let q = norms[m0 - 1];
    let prefix: f64 = norms[..m0].iter().sum();
    // Σ_{m>=1} ‖A^{-m}‖ = Σ_j Σ_{i=1..m0} ‖A^{-(j m0 + i)}‖ <= prefix/(1−q).
    let series = prefix / (1.0 - q);
    Ok(SemiconjParams {
        kappa0,
        kappa: kappa0 * series,
        power_norms: norms,
        tail_ratio: q,
        norm_series_bound: series,
    })
}

/// Reusable evaluator for the semiconjugacy of a fixed map.
pub struct Semiconjugacy<'a> {
    f: &'a TorusEndomorphism,
    pub params: SemiconjParams,
    a_inv: Mat2,
}

impl<'a> Semiconjugacy<'a> {
    pub fn new(f: &'a TorusEndomorphism) -> Result<Semiconjugacy<'a>, SemiconjError> {
        let params = kappa_bound(f)?;
        let a_inv = Mat2::from_int(f.linear_part())
            .inverse()
            .expect("expanding matrices are invertible");
        Ok(Semiconjugacy { f, params, a_inv })
    }

    /// The truncation `h_n(x)` of the semiconjugacy series.
    pub fn eval_partial(&self, x: Vec2, depth: usize) -> Vec2 {
        let mut acc = [0.0f64; 2];
        let mut p = crate::map_model::normalize_torus(x);
        let mut inv_pow = self.a_inv;
        for _ in 0..depth {
            let d = self.f.displacement().eval(p);
            acc = mat::add(acc, inv_pow.mul_vec(d));
            inv_pow = inv_pow.mul(&self.a_inv);
            p = self.f.eval_torus(p);
        }
        mat::add(x, acc)
    }

    /// `h~(x)` to within `tol` in sup norm. Tolerances below the f64 noise
    /// floor (~1e-15) truncate at the stored-norm cutoff, where the series
    /// tail is around `1e-20 * kappa0`.
    pub fn eval(&self, x: Vec2, tol: f64) -> Vec2 {
        self.eval_partial(x, self.params.depth_for(tol))
    }
}

/// One-shot evaluation of the semiconjugacy lift at `x` to tolerance `tol`.
pub fn semiconj_eval(f: &TorusEndomorphism, x: Vec2, tol: f64) -> Result<Vec2, SemiconjError> {
    Ok(Semiconjugacy::new(f)?.eval(x, tol))
}

/// Max over an `m × m` grid of `‖h(f(p)) − A h(p)‖_∞`, with `h` evaluated at
/// tolerance `tol`. The conjugacy equation makes this at most
/// `(‖A‖ + 1) tol` up to rounding.
pub fn semiconj_defect(f: &TorusEndomorphism, m: u32, tol: f64) -> Result<f64, SemiconjError> {
    let h = Semiconjugacy::new(f)?;
    let a = Mat2::from_int(f.linear_part());
    let cells = (m as usize) * (m as usize);
    let worst = parallel::map_reduce(
        cells,
        0.0f64,
        |range| {
            let mut worst = 0.0f64;
            for idx in range {
                let i = idx / m as usize;
                let j = idx % m as usize;
                let p = [i as f64 / m as f64, j as f64 / m as f64];
                let hf = h.eval(f.eval_lift(p), tol);
                let ah = a.mul_vec(h.eval(p, tol));
                worst = worst.max(mat::dist_inf(hf, ah));
            }
            worst
        },
        f64::max,
    );
    Ok(worst)
}

/// Checks whether the lifted orbit of `y` stays within sup-distance `r` of
/// the lifted orbit of `p` through `depth` steps.
///
/// The two orbits are iterated as a pair: fractional parts plus the exact
/// integer difference of their translations, so the test stays accurate (and
/// overflow-free) no matter how large the individual orbits grow.
pub fn orbit_stays_close(
    f: &TorusEndomorphism,
    p: Vec2,
    y: Vec2,
    r: f64,
    depth: u32,
) -> bool {
    let a = f.linear_part().0;
    let mut fp = [p[0] - p[0].floor(), p[1] - p[1].floor()];
    let mut fy = [y[0] - y[0].floor(), y[1] - y[1].floor()];
    let mut dw = [
        y[0].floor() as i64 - p[0].floor() as i64,
        y[1].floor() as i64 - p[1].floor() as i64,
    ];
    let dist = |fp: Vec2, fy: Vec2, dw: [i64; 2]| -> f64 {
        let dx = (fy[0] - fp[0]) + dw[0] as f64;
        let dy = (fy[1] - fp[1]) + dw[1] as f64;
        dx.abs().max(dy.abs())
    };
    if dist(fp, fy, dw) >= r {
        return false;
    }
    let step = |frac: Vec2| -> (Vec2, [i64; 2]) {
        let v = mat::add(
            Mat2::from_int(f.linear_part()).mul_vec(frac),
            f.displacement().eval(frac),
        );
        let fx = v[0].floor();
        let fy_ = v[1].floor();
        ([v[0] - fx, v[1] - fy_], [fx as i64, fy_ as i64])
    };
    for _ in 0..depth {
        let (nfp, ip) = step(fp);
        let (nfy, iy) = step(fy);
        dw = [
            a[0][0] * dw[0] + a[0][1] * dw[1] + (iy[0] - ip[0]),
            a[1][0] * dw[0] + a[1][1] * dw[1] + (iy[1] - ip[1]),
        ];
        fp = nfp;
        fy = nfy;
        if dist(fp, fy, dw) >= r {
            return false;
        }
    }
    true
}

/// Evidence about the fiber `h^{-1}(h(p))` near `p`.
#[derive(Clone, Debug, Serialize)]
pub struct FiberEstimate {
    pub base: Vec2,
    pub radius: f64,
    pub depth: u32,
    /// Plane points whose lifted orbits stayed `radius`-close to the orbit of
    /// `base` through `depth` steps. Guaranteed verified; membership in the
    /// true fiber is evidence only (a witness may escape after `depth`).
    pub witnesses: Vec<Vec2>,
    /// Max pairwise sup-distance among witnesses: a sampled lower estimate of
    /// the fiber diameter.
    pub diameter: f64,
    /// Unit direction of the diameter-realizing pair, when the diameter is
    /// positive.
    pub direction: Option<Vec2>,
}

/// Search tuning for [`estimate_fiber`].
#[derive(Copy, Clone, Debug, Serialize)]
pub struct FiberSearchParams {
    pub search_radius: f64,
    /// Number of samples per cross arm; the disk gets `8 *` this many.
    pub samples: u32,
}

impl Default for FiberSearchParams {
    fn default() -> FiberSearchParams {
        FiberSearchParams {
            search_radius: 0.25,
            samples: 40,
        }
    }
}

/// Depth heuristic: smallest `N` with `‖A^{-N}‖ * search_diameter < 0.01 δ`.
pub fn default_fiber_depth(a: &IntMat2, search_diameter: f64, delta: f64) -> u32 {
    for n in 1..200u32 {
        if inverse_power_norm(a, n) * search_diameter < 0.01 * delta {
            return n;
        }
    }
    200
}

/// Samples candidates around `p` (cross pattern, sunflower disk, plus a
/// refinement pass along the best surviving direction) and keeps those whose
/// orbits stay `r`-close to the orbit of `p` for `depth` steps.
///
/// Requires `r > 2κ`, the radius above which bounded-orbit closeness
/// characterizes the fiber.
pub fn estimate_fiber(
    f: &TorusEndomorphism,
    p: Vec2,
    r: f64,
    depth: u32,
    search: &FiberSearchParams,
) -> Result<FiberEstimate, SemiconjError> {
    let kappa = kappa_bound(f)?.kappa;
    if r <= 2.0 * kappa {
        return Err(SemiconjError::RadiusTooSmall {
            r,
            min: 2.0 * kappa,
        });
    }
    let mut candidates: Vec<Vec2> = Vec::new();
    let k = search.samples.max(4);
    let rad = search.search_radius;
    for arm in 0..4u32 {
        let dir: Vec2 = match arm {
            0 => [1.0, 0.0],
            1 => [-1.0, 0.0],
            2 => [0.0, 1.0],
            _ => [0.0, -1.0],
        };
        for s in 1..=k {
            let t = rad * s as f64 / k as f64;
            candidates.push(mat::add(p, mat::scale(dir, t)));
        }
    }
    // Sunflower disk: deterministic, roughly uniform.
    let disk_n = 8 * k;
    let golden = std::f64::consts::PI * (3.0 - (5.0f64).sqrt());
    for i in 0..disk_n {
        let rr = rad * ((i as f64 + 0.5) / disk_n as f64).sqrt();
        let th = golden * i as f64;
        candidates.push(mat::add(p, [rr * th.cos(), rr * th.sin()]));
    }

    let survives = |y: &Vec2| orbit_stays_close(f, p, *y, r, depth);
    let mut witnesses: Vec<Vec2> = vec![p];
    witnesses.extend(candidates.iter().filter(|c| survives(c)).cloned());

    // Refinement along the best surviving direction.
    let (mut diameter, mut pair) = diameter_of(&witnesses);
    if diameter > 0.0 {
        let d = mat::sub(pair[1], pair[0]);
        let n = mat::norm2(d);
        let dir = mat::scale(d, 1.0 / n);
        for s in 0..(4 * k) {
            let t = -rad + 2.0 * rad * s as f64 / (4 * k - 1) as f64;
            let cand = mat::add(p, mat::scale(dir, t));
            if survives(&cand) {
                witnesses.push(cand);
            }
        }
        (diameter, pair) = diameter_of(&witnesses);
    }

    let direction = if diameter > 0.0 {
        let d = mat::sub(pair[1], pair[0]);
        let n = mat::norm2(d);
        Some(mat::scale(d, 1.0 / n))
    } else {
        None
    };
    Ok(FiberEstimate {
        base: p,
        radius: r,
        depth,
        witnesses,
        diameter,
        direction,
    })
}

fn diameter_of(points: &[Vec2]) -> (f64, [Vec2; 2]) {
    let mut best = 0.0f64;
    let mut pair = [points[0], points[0]];
    for i in 0..points.len() {
        for j in 0..i {
            let d = mat::dist_inf(points[i], points[j]);
            if d > best {
                best = d;
                pair = [points[j], points[i]];
            }
        }
    }
    (best, pair)
}

/// Outcome of the conjugacy/annulus dichotomy probe. Numeric evidence in both
/// directions: finite depth can neither prove trivial fibers nor certify an
/// annulus.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind")]
pub enum DichotomyVerdict {
    /// Every sampled fiber had diameter at most `delta`.
    ConjugacyEvidence {
        delta: f64,
        depth: u32,
        max_diameter: f64,
    },
    /// A sampled fiber with diameter above `delta`; its direction estimates
    /// the center segment through the candidate annulus.
    AnnulusCandidate {
        point: Vec2,
        diameter: f64,
        direction: Vec2,
    },
}

/// Scans an `m × m` grid of base points with [`estimate_fiber`] and reports
/// either conjugacy evidence (all fibers small) or the worst annulus
/// candidate.
pub fn dichotomy_test(
    f: &TorusEndomorphism,
    grid_m: u32,
    r: f64,
    depth: u32,
    delta: f64,
    search: &FiberSearchParams,
) -> Result<DichotomyVerdict, SemiconjError> {
    let eig = integer_linear::integer_eigenvalues(f.linear_part())
        .ok_or(SemiconjError::NoIntegerEigenvalues)?;
    if eig.lambda1.abs() == eig.lambda2.abs() {
        return Err(SemiconjError::EigenvalueTie);
    }
    if eig.lambda2.abs() <= 1 {
        return Err(SemiconjError::NotExpanding);
    }
    let cells = (grid_m as usize) * (grid_m as usize);
    let mut worst: Option<FiberEstimate> = None;
    for idx in 0..cells {
        let i = idx / grid_m as usize;
        let j = idx % grid_m as usize;
        let p = [i as f64 / grid_m as f64, j as f64 / grid_m as f64];
        let est = estimate_fiber(f, p, r, depth, search)?;
        if worst.as_ref().is_none_or(|w| est.diameter > w.diameter) {
            worst = Some(est);
        }
    }
    let worst = worst.expect("grid is nonempty");
    if worst.diameter <= delta {
        Ok(DichotomyVerdict::ConjugacyEvidence {
            delta,
            depth,
            max_diameter: worst.diameter,
        })
    } else {
        Ok(DichotomyVerdict::AnnulusCandidate {
            point: worst.base,
            diameter: worst.diameter,
            direction: worst.direction.unwrap_or([0.0, 1.0]),
        })
    }
}
