//! Grid certificates for the open conditions: cone-field invariance with
//! uniform expansion, and strong volume expansion.
//!
//! A `Certified` verdict is a proof over the whole torus, not just the grid:
//! each cell is checked at its center and the pointwise quantities are
//! perturbed by a conservative Lipschitz slack that covers every other point
//! of the cell. `Failed` carries a concrete center where the raw pointwise
//! condition is violated; `Inconclusive` means the slack ate the margin and a
//! finer grid is needed.

use crate::map_model::{Mat2, TorusEndomorphism};
use crate::mat::Vec2;
use crate::parallel;
use crate::integer_linear;
use serde::Serialize;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CertifierError {
    #[error("linear part has no integer eigenvalues")]
    NoIntegerEigenvalues,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ConeOrientation {
    Horizontal,
    Vertical,
}

/// Constant cone field `{v : |v_perp| <= slope * |v_main|}` where the main
/// axis is horizontal or vertical. Slope 1 horizontal is the square cone
/// `|v2| <= |v1|`.
#[derive(Copy, Clone, Debug, Serialize)]
pub struct ConeSpec {
    pub slope: f64,
    pub orientation: ConeOrientation,
}

impl ConeSpec {
    pub fn horizontal(slope: f64) -> ConeSpec {
        assert!(slope > 0.0 && slope.is_finite(), "cone slope must be positive");
        ConeSpec {
            slope,
            orientation: ConeOrientation::Horizontal,
        }
    }

    pub fn vertical(slope: f64) -> ConeSpec {
        assert!(slope > 0.0 && slope.is_finite(), "cone slope must be positive");
        ConeSpec {
            slope,
            orientation: ConeOrientation::Vertical,
        }
    }

    /// Splits a vector into (main-axis, transverse) components.
    fn split(&self, v: Vec2) -> (f64, f64) {
        match self.orientation {
            ConeOrientation::Horizontal => (v[0], v[1]),
            ConeOrientation::Vertical => (v[1], v[0]),
        }
    }

    pub fn contains(&self, v: Vec2) -> bool {
        let (main, perp) = self.split(v);
        perp.abs() <= self.slope * main.abs()
    }

    /// Boundary rays of the cone (one per sign of the transverse slope).
    pub fn boundary_rays(&self) -> [Vec2; 2] {
        match self.orientation {
            ConeOrientation::Horizontal => [[1.0, self.slope], [1.0, -self.slope]],
            ConeOrientation::Vertical => [[self.slope, 1.0], [-self.slope, 1.0]],
        }
    }

    /// Slope margin of a vector: `slope − |perp/main|`, negative outside the
    /// open cone, `-inf` when the vector lies on the transverse axis.
    pub fn slope_margin(&self, v: Vec2) -> f64 {
        let (main, perp) = self.split(v);
        if main == 0.0 {
            return f64::NEG_INFINITY;
        }
        self.slope - (perp / main).abs()
    }
}

/// Grid certification parameters: cells of side `1/resolution`, the iterate
/// `ell` of the cone conditions, and the expansion constant `lambda`.
#[derive(Copy, Clone, Debug, Serialize)]
pub struct GridSpec {
    pub resolution: u32,
    pub ell: u32,
    pub lambda: f64,
}

impl GridSpec {
    pub fn new(resolution: u32, ell: u32, lambda: f64) -> GridSpec {
        assert!(resolution >= 2, "grid resolution must be >= 2");
        assert!(ell >= 1, "iterate must be >= 1");
        assert!(lambda > 1.0, "expansion constant must exceed 1");
        GridSpec {
            resolution,
            ell,
            lambda,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "at")]
pub enum Verdict {
    /// The condition holds everywhere; margins exceeded the slack on every cell.
    Certified,
    /// The raw pointwise condition fails at this cell center.
    Failed { witness: Vec2 },
    /// Slack exceeded the margin somewhere; refine the grid.
    Inconclusive { worst_cell: Vec2 },
}

/// Outcome of one rigorous grid check.
#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    /// Which condition was checked, with its constants.
    pub condition: String,
    pub grid_m: u32,
    /// Infimum excess by which the inequality holds after subtracting the
    /// Lipschitz slack. `Certified` iff this is positive at every cell.
    pub margin: f64,
    /// Largest Lipschitz slack used by any cell.
    pub slack: f64,
    /// Minimum over centers of the raw (slack-free) margin.
    pub min_raw: f64,
    pub verdict: Verdict,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        matches!(self.verdict, Verdict::Certified)
    }
}

/// Exact minimum of `‖Mv‖/‖v‖` over the cone sector.
///
/// On the unit circle the squared norm is the quadratic form `MᵀM`; its
/// minimum over the symmetric sector is attained either on a boundary ray or
/// at an eigendirection of `MᵀM` interior to the sector, so only those
/// candidates are evaluated.
pub fn min_expansion_on_cone(m: &Mat2, cone: &ConeSpec) -> f64 {
    // Reduce the vertical cone to the horizontal one by swapping coordinates.
    let (mm, slope) = match cone.orientation {
        ConeOrientation::Horizontal => (*m, cone.slope),
        ConeOrientation::Vertical => (
            Mat2([[m.0[0][1], m.0[0][0]], [m.0[1][1], m.0[1][0]]]),
            cone.slope,
        ),
    };
    let q = mm.transpose().mul(&mm);
    let (a, b, c) = (q.0[0][0], q.0[0][1], q.0[1][1]);
    let theta0 = slope.atan();
    let value = |t: f64| {
        let (s, co) = t.sin_cos();
        a * co * co + 2.0 * b * co * s + c * s * s
    };
    let mut best = value(theta0).min(value(-theta0));
    // Eigendirections of q: angles phi and phi + pi/2, tan(2 phi) = 2b/(a-c).
    let phi = 0.5 * (2.0 * b).atan2(a - c);
    for cand in [phi, phi + std::f64::consts::FRAC_PI_2] {
        let mut t = cand;
        while t > std::f64::consts::FRAC_PI_2 {
            t -= std::f64::consts::PI;
        }
        while t <= -std::f64::consts::FRAC_PI_2 {
            t += std::f64::consts::PI;
        }
        if t.abs() < theta0 {
            best = best.min(value(t));
        }
    }
    best.max(0.0).sqrt()
}

/// Raw cone-condition margin of `f` at a single point: the minimum of the
/// expansion excess `min_exp − lambda` and the slope margins of the two
/// image rays of `Df^ell`. Positive iff the pointwise condition holds.
pub fn raw_cone_margin(
    f: &TorusEndomorphism,
    cone: &ConeSpec,
    ell: u32,
    lambda: f64,
    p: Vec2,
) -> f64 {
    let mut d = Mat2::identity();
    let mut x = p;
    for _ in 0..ell {
        d = f.eval_derivative(x).mul(&d);
        x = f.eval_torus(x);
    }
    cone_margin_of_matrix(&d, cone, lambda)
}

fn cone_margin_of_matrix(d: &Mat2, cone: &ConeSpec, lambda: f64) -> f64 {
    let rays = cone.boundary_rays();
    let w0 = d.mul_vec(rays[0]);
    let w1 = d.mul_vec(rays[1]);
    let (m0, _) = cone.split(w0);
    let (m1, _) = cone.split(w1);
    if m0 == 0.0 || m1 == 0.0 || m0.signum() != m1.signum() {
        // Image sector straddles the transverse axis: violated outright.
        return f64::NEG_INFINITY;
    }
    let exp_margin = min_expansion_on_cone(d, cone) - lambda;
    exp_margin
        .min(cone.slope_margin(w0))
        .min(cone.slope_margin(w1))
}

/// Raw volume-expansion margin at a single point: `|det Df^n| − threshold`.
pub fn raw_volume_margin(f: &TorusEndomorphism, n: u32, threshold: f64, p: Vec2) -> f64 {
    let mut x = p;
    let mut det = 1.0f64;
    for _ in 0..n {
        det *= f.eval_derivative(x).det();
        x = f.eval_torus(x);
    }
    det.abs() - threshold
}

#[derive(Copy, Clone)]
struct CellStats {
    min_excess: f64,
    excess_cell: usize,
    min_raw: f64,
    raw_cell: usize,
    max_slack: f64,
    first_failure: Option<usize>,
}

impl CellStats {
    fn empty() -> CellStats {
        CellStats {
            min_excess: f64::INFINITY,
            excess_cell: usize::MAX,
            min_raw: f64::INFINITY,
            raw_cell: usize::MAX,
            max_slack: 0.0,
            first_failure: None,
        }
    }

    fn absorb(&mut self, idx: usize, raw: f64, excess: f64, slack: f64) {
        if excess < self.min_excess {
            self.min_excess = excess;
            self.excess_cell = idx;
        }
        if raw < self.min_raw {
            self.min_raw = raw;
            self.raw_cell = idx;
        }
        if slack > self.max_slack {
            self.max_slack = slack;
        }
        if raw <= 0.0 && self.first_failure.is_none_or(|old| idx < old) {
            self.first_failure = Some(idx);
        }
    }

    fn merge(mut self, other: CellStats) -> CellStats {
        // Chunks are merged in index order; strict comparisons keep the
        // earliest cell so the reduction is scheduling-independent.
        if other.min_excess < self.min_excess {
            self.min_excess = other.min_excess;
            self.excess_cell = other.excess_cell;
        }
        if other.min_raw < self.min_raw {
            self.min_raw = other.min_raw;
            self.raw_cell = other.raw_cell;
        }
        self.max_slack = self.max_slack.max(other.max_slack);
        self.first_failure = match (self.first_failure, other.first_failure) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self
    }
}

fn cell_center(m: u32, idx: usize) -> Vec2 {
    let mf = m as f64;
    let i = (idx as u32) / m;
    let j = (idx as u32) % m;
    [(i as f64 + 0.5) / mf, (j as f64 + 0.5) / mf]
}

fn finish(condition: String, m: u32, stats: CellStats, start: Instant) -> Certificate {
    let verdict = if let Some(idx) = stats.first_failure {
        Verdict::Failed {
            witness: cell_center(m, idx),
        }
    } else if stats.min_excess <= 0.0 {
        Verdict::Inconclusive {
            worst_cell: cell_center(m, stats.excess_cell),
        }
    } else {
        Verdict::Certified
    };
    Certificate {
        condition,
        grid_m: m,
        margin: stats.min_excess,
        slack: stats.max_slack,
        min_raw: stats.min_raw,
        verdict,
        elapsed: start.elapsed(),
    }
}

/// Certifies that `Df^ell` maps the cone strictly inside itself and expands
/// its vectors by at least `lambda`, over the whole torus, via an `m × m`
/// grid with Lipschitz slack.
pub fn certify_cone_invariance(
    f: &TorusEndomorphism,
    cone: &ConeSpec,
    grid: &GridSpec,
) -> Certificate {
    let start = Instant::now();
    let m = grid.resolution;
    let ell = grid.ell;
    let lambda = grid.lambda;
    let lip_df = f.lipschitz_bounds().lip_df;
    let lf = f.derivative_norm_bound();
    let rho = std::f64::consts::SQRT_2 / (2.0 * m as f64);
    let ray_norm = (1.0 + cone.slope * cone.slope).sqrt();
    let cells = (m as usize) * (m as usize);

    let stats = parallel::map_reduce(
        cells,
        CellStats::empty(),
        |range| {
            let mut acc = CellStats::empty();
            for idx in range {
                let center = cell_center(m, idx);
                // Cumulative derivative along the orbit, with a running bound
                // on how much it can differ anywhere else in the cell.
                let mut d = Mat2::identity();
                let mut x = center;
                let mut dist = rho; // bound on ‖f^k q − f^k p‖
                let mut err = 0.0f64; // bound on ‖Df^k q − Df^k p‖
                for _ in 0..ell {
                    let local = f.eval_derivative(x);
                    let local_norm = local.norm_2_bound() * (1.0 + 1e-12);
                    let cum_norm = d.norm_2_bound() * (1.0 + 1e-12);
                    err = lip_df * dist * (cum_norm + err) + local_norm * err;
                    dist *= lf.max(1.0);
                    d = local.mul(&d);
                    x = f.eval_torus(x);
                }
                let raw = cone_margin_of_matrix(&d, cone, lambda);
                let excess = cone_excess_with_slack(&d, cone, lambda, err, ray_norm);
                acc.absorb(idx, raw, excess, err);
            }
            acc
        },
        CellStats::merge,
    );
    let condition = format!(
        "cone-invariance(orientation={:?}, slope={}, ell={ell}, lambda={lambda})",
        cone.orientation, cone.slope
    );
    finish(condition, m, stats, start)
}

/// Slack-adjusted excess of the cone condition for a derivative known only up
/// to a spectral-norm perturbation `delta`.
fn cone_excess_with_slack(
    d: &Mat2,
    cone: &ConeSpec,
    lambda: f64,
    delta: f64,
    ray_norm: f64,
) -> f64 {
    let rays = cone.boundary_rays();
    let (m0, _) = cone.split(d.mul_vec(rays[0]));
    let (m1, _) = cone.split(d.mul_vec(rays[1]));
    if m0 == 0.0 || m1 == 0.0 || m0.signum() != m1.signum() {
        return f64::NEG_INFINITY;
    }
    let mut excess = min_expansion_on_cone(d, cone) - delta - lambda;
    let dray = delta * ray_norm;
    for ray in rays {
        let w = d.mul_vec(ray);
        let (main, perp) = cone.split(w);
        if main.abs() <= dray {
            // Perturbation could push the image ray onto the transverse axis.
            return excess.min(0.0);
        }
        let inflated = (perp.abs() + dray) / (main.abs() - dray);
        excess = excess.min(cone.slope - inflated);
    }
    excess
}

/// Certifies `|det Df^n| > |lambda_1|^n` over the whole torus on an `m × m`
/// grid with Lipschitz slack.
pub fn certify_strong_volume_expansion(
    f: &TorusEndomorphism,
    m: u32,
    n: u32,
) -> Result<Certificate, CertifierError> {
    let eig = integer_linear::integer_eigenvalues(f.linear_part())
        .ok_or(CertifierError::NoIntegerEigenvalues)?;
    let threshold = (eig.lambda1.abs() as f64).powi(n as i32);
    Ok(certify_volume_expansion_threshold(f, m, n, threshold))
}

/// As [`certify_strong_volume_expansion`] but against an explicit threshold.
pub fn certify_volume_expansion_threshold(
    f: &TorusEndomorphism,
    m: u32,
    n: u32,
    threshold: f64,
) -> Certificate {
    let start = Instant::now();
    assert!(m >= 2 && n >= 1);
    let lip = f.lipschitz_bounds();
    let lf = f.derivative_norm_bound().max(1.0);
    let sup = f.derivative_sup_matrix().0;
    let jsup = sup[0][0] * sup[1][1] + sup[0][1] * sup[1][0];
    let rho = std::f64::consts::SQRT_2 / (2.0 * m as f64);
    // |Π det(q_k) − Π det(p_k)| <= Σ_k Jsup^{n−1} · LipDet · ‖q_k − p_k‖ and
    // the orbit separation grows at most like Lf^k · rho.
    let mut slack = 0.0;
    for k in 0..n {
        slack += jsup.powi(n as i32 - 1) * lip.lip_det * lf.powi(k as i32) * rho;
    }
    let cells = (m as usize) * (m as usize);
    let stats = parallel::map_reduce(
        cells,
        CellStats::empty(),
        |range| {
            let mut acc = CellStats::empty();
            for idx in range {
                let center = cell_center(m, idx);
                let mut x = center;
                let mut det = 1.0f64;
                for _ in 0..n {
                    det *= f.eval_derivative(x).det();
                    x = f.eval_torus(x);
                }
                let raw = det.abs() - threshold;
                acc.absorb(idx, raw, raw - slack, slack);
            }
            acc
        },
        CellStats::merge,
    );
    let condition = format!("volume-expansion(n={n}, threshold={threshold})");
    finish(condition, m, stats, start)
}

pub const MAX_AUTO_RESOLUTION: u32 = 8192;

/// Doubles the grid until the verdict is decisive or the resolution cap is
/// reached.
pub fn certify_cone_invariance_auto(
    f: &TorusEndomorphism,
    cone: &ConeSpec,
    grid: &GridSpec,
) -> Certificate {
    let mut m = grid.resolution;
    loop {
        let cert = certify_cone_invariance(f, cone, &GridSpec::new(m, grid.ell, grid.lambda));
        match cert.verdict {
            Verdict::Inconclusive { .. } if m < MAX_AUTO_RESOLUTION => m *= 2,
            _ => return cert,
        }
    }
}

/// Doubling wrapper for the volume-expansion certificate.
pub fn certify_strong_volume_expansion_auto(
    f: &TorusEndomorphism,
    m0: u32,
    n: u32,
) -> Result<Certificate, CertifierError> {
    let eig = integer_linear::integer_eigenvalues(f.linear_part())
        .ok_or(CertifierError::NoIntegerEigenvalues)?;
    let threshold = (eig.lambda1.abs() as f64).powi(n as i32);
    let mut m = m0;
    loop {
        let cert = certify_volume_expansion_threshold(f, m, n, threshold);
        match cert.verdict {
            Verdict::Inconclusive { .. } if m < MAX_AUTO_RESOLUTION => m *= 2,
            _ => return Ok(cert),
        }
    }
}

/// The square cone `|v2| <= |v1|`.
pub fn square_cone() -> ConeSpec {
    ConeSpec::horizontal(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::rng::SplitMix64;
    use crate::IntMat2;

    const EPS: f64 = 0.1;

    fn sampling_oracle(m: &Mat2, cone: &ConeSpec, angles: usize) -> f64 {
        let theta0 = cone.slope.atan();
        let mut best = f64::INFINITY;
        for i in 0..=angles {
            let t = -theta0 + 2.0 * theta0 * i as f64 / angles as f64;
            let v = match cone.orientation {
                ConeOrientation::Horizontal => [t.cos(), t.sin()],
                ConeOrientation::Vertical => [t.sin(), t.cos()],
            };
            let w = m.mul_vec(v);
            best = best.min(w[0].hypot(w[1]));
        }
        best
    }

    #[test]
    fn min_expansion_identity() {
        let cone = square_cone();
        assert!((min_expansion_on_cone(&Mat2::identity(), &cone) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn min_expansion_diagonal_attained_on_boundary() {
        let m = Mat2::diag(2.0, 0.5);
        let got = min_expansion_on_cone(&m, &square_cone());
        assert!((got - (17.0f64 / 8.0).sqrt()).abs() < 1e-12);
        let oracle = sampling_oracle(&m, &square_cone(), 1_000_000);
        assert!((got - oracle).abs() < 1e-6);
    }

    #[test]
    fn min_expansion_closed_form_for_index_one_fixed_point() {
        let m = Mat2::diag(6.0, 1.0 - EPS);
        let got = min_expansion_on_cone(&m, &square_cone());
        let want = ((36.0 + (1.0 - EPS) * (1.0 - EPS)) / 2.0).sqrt();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn min_expansion_matches_oracle_on_random_inputs() {
        let mut rng = SplitMix64::new(2024);
        for trial in 0..200 {
            let m = Mat2([
                [rng.range_f64(-3.0, 3.0), rng.range_f64(-3.0, 3.0)],
                [rng.range_f64(-3.0, 3.0), rng.range_f64(-3.0, 3.0)],
            ]);
            let slope = rng.range_f64(0.2, 3.0);
            let cone = if rng.next_u64() % 2 == 0 {
                ConeSpec::horizontal(slope)
            } else {
                ConeSpec::vertical(slope)
            };
            let got = min_expansion_on_cone(&m, &cone);
            let oracle = sampling_oracle(&m, &cone, 200_000);
            assert!(
                (got - oracle).abs() < 1e-6,
                "trial {trial}: got {got}, oracle {oracle}"
            );
        }
    }

    #[test]
    fn certify_linear_expanding_cone() {
        let f = gallery::linear(IntMat2::diag(5, 2));
        let cert = certify_cone_invariance(&f, &square_cone(), &GridSpec::new(8, 1, 2.0));
        assert!(cert.is_certified(), "{cert:?}");
        assert_eq!(cert.slack, 0.0);
    }

    #[test]
    fn certify_fails_when_cone_rotates_out() {
        let f = gallery::linear(IntMat2::diag(2, 5));
        let cert = certify_cone_invariance(&f, &square_cone(), &GridSpec::new(8, 1, 1.5));
        assert!(matches!(cert.verdict, Verdict::Failed { .. }), "{cert:?}");
    }

    #[test]
    fn certify_cone_on_skew_example() {
        let f = gallery::paper_example(EPS);
        let lambda = 2.0 * (2.0f64).sqrt();
        let cert = certify_cone_invariance(&f, &square_cone(), &GridSpec::new(512, 1, lambda));
        assert!(cert.is_certified(), "{cert:?}");
        assert!(cert.margin > 0.0);
    }

    #[test]
    fn certify_volume_expansion_skew_example() {
        let f = gallery::paper_example(EPS);
        let cert = certify_strong_volume_expansion(&f, 1024, 1).unwrap();
        assert!(cert.is_certified(), "{cert:?}");
        assert!(cert.margin >= 0.3, "margin {}", cert.margin);
        assert!(cert.slack < 0.1, "slack {}", cert.slack);
        // Closed-form floor for the Jacobian minimum.
        assert!(cert.min_raw + 5.0 >= 6.0 - 6.0 * EPS - 1e-9);
    }

    #[test]
    fn certify_volume_expansion_linear() {
        let f = gallery::linear(IntMat2::diag(5, 2));
        let cert = certify_strong_volume_expansion(&f, 16, 1).unwrap();
        assert!(cert.is_certified());
        assert!((cert.margin - 5.0).abs() < 1e-12, "det 10 vs threshold 5");
    }

    #[test]
    fn product_is_cone_hyperbolic_but_not_volume_expanding() {
        // The product keeps the square cone (vertical stretch < 3) yet its
        // Jacobian dips below |lambda_1| near the attracting circle: the two
        // certificates split exactly as expected.
        let f = gallery::product_example();
        let cone_cert = certify_cone_invariance(&f, &square_cone(), &GridSpec::new(256, 1, 2.0));
        assert!(cone_cert.is_certified(), "{cone_cert:?}");
        let sve_cert = certify_strong_volume_expansion(&f, 256, 1).unwrap();
        assert!(matches!(sve_cert.verdict, Verdict::Failed { .. }));
    }

    #[test]
    fn certify_volume_expansion_fails_on_product() {
        let f = gallery::product_example();
        let cert = certify_strong_volume_expansion(&f, 64, 1).unwrap();
        match cert.verdict {
            Verdict::Failed { witness } => {
                // The violating cells hug the attracting circle y = 0.
                let y = witness[1].min(1.0 - witness[1]);
                assert!(y < 0.2, "witness {witness:?}");
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn skew_example_ray_image_bounds() {
        // Closed-form bounds behind the cone certificate: with
        // (u1,u2) = Df(1,1) and (w1,w2) = Df(1,-1),
        //   u1 = w1 = 5 + cos(2 pi x) >= 4,
        //   1-eps <= u2 <= 3+eps,  -3-eps <= w2 <= 1+eps.
        let f = gallery::paper_example(EPS);
        let mut rng = SplitMix64::new(31);
        for _ in 0..2000 {
            let p = [rng.next_f64(), rng.next_f64()];
            let d = f.eval_derivative(p);
            let u = d.mul_vec([1.0, 1.0]);
            let w = d.mul_vec([1.0, -1.0]);
            assert!((u[0] - w[0]).abs() < 1e-12);
            assert!(u[0] >= 4.0 - 1e-12 && u[0] <= 6.0 + 1e-12);
            assert!(u[1] >= 1.0 - EPS - 1e-9 && u[1] <= 3.0 + EPS + 1e-9, "u2 = {}", u[1]);
            assert!(w[1] >= -3.0 - EPS - 1e-9 && w[1] <= 1.0 + EPS + 1e-9, "w2 = {}", w[1]);
        }
    }

    #[test]
    fn jacobian_critical_curves() {
        let f = gallery::paper_example(EPS);
        for i in 0..100 {
            let y = i as f64 / 100.0;
            assert!((f.jacobian_det([0.5, y]) - 8.0).abs() < 1e-9);
        }
        for i in 0..100 {
            let x = i as f64 / 100.0;
            assert!(f.jacobian_det([x, 0.5]) >= 8.0 - 1e-9);
        }
    }

    #[test]
    fn certify_cone_two_step_iterate() {
        // ell = 2 composes per-step expansion: lambda = 8 = (2*sqrt(2))^2.
        let lin = gallery::linear(IntMat2::diag(5, 2));
        let cert = certify_cone_invariance(&lin, &square_cone(), &GridSpec::new(4, 2, 4.0));
        assert!(cert.is_certified(), "{cert:?}");
        let f = gallery::paper_example(EPS);
        let cert = certify_cone_invariance(&f, &square_cone(), &GridSpec::new(1024, 2, 8.0));
        assert!(cert.is_certified(), "{cert:?}");
        // Two-step slack must exceed the one-step slack at equal resolution.
        let one = certify_cone_invariance(&f, &square_cone(), &GridSpec::new(1024, 1, 2.0));
        assert!(cert.slack > one.slack);
    }

    #[test]
    fn certify_volume_expansion_second_iterate() {
        // Linear: |det Df^2| = 100 against threshold 25, zero slack.
        let lin = gallery::linear(IntMat2::diag(5, 2));
        let cert = certify_strong_volume_expansion(&lin, 8, 2).unwrap();
        assert!(cert.is_certified());
        assert!((cert.margin - 75.0).abs() < 1e-9);
        // Skew example: raw two-step Jacobian floor is (6-6eps)^2 - 25.
        let f = gallery::paper_example(EPS);
        let cert = certify_volume_expansion_threshold(&f, 256, 2, 25.0);
        let floor = (6.0 - 6.0 * EPS) * (6.0 - 6.0 * EPS) - 25.0;
        assert!(cert.min_raw >= floor - 1e-6, "{} vs {floor}", cert.min_raw);
        assert!(!matches!(cert.verdict, Verdict::Failed { .. }));
    }

    #[test]
    fn refining_grid_preserves_certified_sve() {
        let f = gallery::paper_example(EPS);
        let coarse = certify_strong_volume_expansion(&f, 256, 1).unwrap();
        let fine = certify_strong_volume_expansion(&f, 512, 1).unwrap();
        assert!(coarse.is_certified());
        assert!(fine.is_certified());
        assert!(fine.margin >= coarse.margin);
        assert!(fine.slack < coarse.slack);
    }

    #[test]
    fn refining_grid_preserves_certified() {
        let f = gallery::paper_example(EPS);
        let lambda = 2.0 * (2.0f64).sqrt();
        let coarse = certify_cone_invariance(&f, &square_cone(), &GridSpec::new(128, 1, lambda));
        let fine = certify_cone_invariance(&f, &square_cone(), &GridSpec::new(256, 1, lambda));
        if coarse.is_certified() {
            assert!(!matches!(fine.verdict, Verdict::Failed { .. }));
        }
        assert!(fine.margin >= coarse.margin - 1e-9);
    }

    #[test]
    fn certified_implies_raw_condition_off_grid() {
        let f = gallery::paper_example(EPS);
        let cone = square_cone();
        let lambda = 2.0 * (2.0f64).sqrt();
        let cert = certify_cone_invariance(&f, &cone, &GridSpec::new(512, 1, lambda));
        assert!(cert.is_certified());
        let mut rng = SplitMix64::new(7);
        for _ in 0..2000 {
            let p = [rng.next_f64(), rng.next_f64()];
            assert!(raw_cone_margin(&f, &cone, 1, lambda, p) > 0.0, "at {p:?}");
        }
    }

    #[test]
    fn volume_expansion_across_the_parameter_boundary() {
        // min J = 6 - 6 eps against threshold 5: certifiable for eps < 1/6,
        // a genuine pointwise failure near the origin beyond it.
        let tight = gallery::paper_example(0.15);
        let cert = certify_strong_volume_expansion_auto(&tight, 512, 1).unwrap();
        assert!(cert.is_certified(), "{cert:?}");
        assert!(cert.grid_m <= 4096);
        assert!(cert.min_raw + 5.0 >= 6.0 - 6.0 * 0.15 - 1e-9);

        let broken = gallery::paper_example(0.2);
        let cert = certify_strong_volume_expansion_auto(&broken, 512, 1).unwrap();
        match cert.verdict {
            Verdict::Failed { witness } => {
                // min J = 4.8 < 5, attained at the origin.
                let d = crate::map_model::torus_dist_inf(witness, [0.0, 0.0]);
                assert!(d < 0.1, "witness {witness:?}");
            }
            other => panic!("expected failure at eps = 0.2, got {other:?}"),
        }
    }

    #[test]
    fn auto_doubling_reaches_decision() {
        let f = gallery::paper_example(EPS);
        let cert = certify_strong_volume_expansion_auto(&f, 64, 1).unwrap();
        assert!(cert.is_certified(), "{cert:?}");
    }

    #[test]
    fn sve_requires_integer_spectrum() {
        let f = gallery::linear(IntMat2::new(0, -1, 1, 0));
        assert!(matches!(
            certify_strong_volume_expansion(&f, 8, 1),
            Err(CertifierError::NoIntegerEigenvalues)
        ));
    }
}
