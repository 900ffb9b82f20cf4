//! Direction probes: pre-orbit unstable directions, the center direction,
//! and the pre-orbit-independence test.
//!
//! The unstable direction over a pre-orbit is the nested intersection of
//! forward cone images; pushing the cone's boundary rays through `Df^depth`
//! along the chosen pre-orbit brackets it inside a sector whose angular
//! width bounds the distance to the true direction. Directions are
//! projective (`v ≡ −v`); all angle arithmetic is mod π via doubled angles.

use crate::map_model::{MapError, Mat2, TorusEndomorphism};
use crate::mat::{self, Vec2};
use crate::ph_certifier::ConeSpec;
use crate::rng::SplitMix64;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DirectionError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("branch choice list is shorter than the requested depth")]
    NotEnoughBranchChoices,
    #[error("no candidate direction stayed outside the cone through {checked} steps")]
    ExclusionFailed { checked: u32 },
}

/// A bracketed unstable direction over one pre-orbit.
#[derive(Clone, Debug, Serialize)]
pub struct DirectionProbe {
    pub base: Vec2,
    /// Unit vector, sign-normalized so the first nonzero component is >= 0.
    pub direction: Vec2,
    pub depth: u32,
    /// Angular width (radians) of the iterated cone image; bounds the
    /// distance from `direction` to the true pre-orbit direction.
    pub width: f64,
}

/// A verified center-direction candidate.
#[derive(Clone, Debug, Serialize)]
pub struct CenterProbe {
    pub base: Vec2,
    pub direction: Vec2,
    pub depth: u32,
    /// Number of steps (including step 0) at which the forward images were
    /// verified to stay outside the open cone.
    pub steps_verified: u32,
}

fn normalize_projective(v: Vec2) -> Vec2 {
    let n = mat::norm2(v);
    let mut u = mat::scale(v, 1.0 / n);
    let lead = if u[0].abs() > 1e-14 { u[0] } else { u[1] };
    if lead < 0.0 {
        u = mat::scale(u, -1.0);
    }
    u
}

/// Angle between two projective directions, in `[0, π/2]`.
pub fn projective_angle(u: Vec2, v: Vec2) -> f64 {
    let dot = (u[0] * v[0] + u[1] * v[1]).abs() / (mat::norm2(u) * mat::norm2(v));
    dot.clamp(0.0, 1.0).acos()
}

fn wrap_pi(mut t: f64) -> f64 {
    while t > std::f64::consts::PI {
        t -= 2.0 * std::f64::consts::PI;
    }
    while t < -std::f64::consts::PI {
        t += 2.0 * std::f64::consts::PI;
    }
    t
}

/// Builds the pre-orbit `p, p_{-1}, ..., p_{-depth}` selected by
/// `branch_choices` (index into the sorted preimage list at each step) and
/// pushes the cone forward from its tail; returns the bisector of the image
/// sector and the sector's angular width.
pub fn unstable_direction(
    f: &TorusEndomorphism,
    cone: &ConeSpec,
    p: Vec2,
    branch_choices: &[usize],
    depth: u32,
) -> Result<DirectionProbe, DirectionError> {
    if branch_choices.len() < depth as usize {
        return Err(DirectionError::NotEnoughBranchChoices);
    }
    let mut preorbit = Vec::with_capacity(depth as usize + 1);
    preorbit.push(crate::map_model::normalize_torus(p));
    for step in 0..depth as usize {
        let pres = f.preimages(preorbit[step])?;
        let idx = branch_choices[step] % pres.len();
        preorbit.push(pres[idx]);
    }
    // Df^depth at the tail: Df(p_{-1}) · Df(p_{-2}) ··· Df(p_{-depth}).
    let mut d = Mat2::identity();
    for q in preorbit.iter().skip(1) {
        d = d.mul(&f.eval_derivative(*q));
    }
    let rays = cone.boundary_rays();
    let w0 = d.mul_vec(rays[0]);
    let w1 = d.mul_vec(rays[1]);
    let a0 = 2.0 * w0[1].atan2(w0[0]);
    let a1 = 2.0 * w1[1].atan2(w1[0]);
    let width = 0.5 * wrap_pi(a0 - a1).abs();
    let bis2 = (a0.sin() + a1.sin()).atan2(a0.cos() + a1.cos());
    let bis = 0.5 * bis2;
    let direction = normalize_projective([bis.cos(), bis.sin()]);
    Ok(DirectionProbe {
        base: preorbit[0],
        direction,
        depth,
        width,
    })
}

/// Outcome of sampling unstable directions over random pre-orbits.
#[derive(Clone, Debug, Serialize)]
pub struct SpecialPhReport {
    pub base: Vec2,
    pub depth: u32,
    pub trials: u32,
    pub seed: u64,
    /// Largest pairwise angle between sampled directions.
    pub max_pairwise_angle: f64,
    /// Largest residual cone width among the samples.
    pub max_width: f64,
    /// Upper-bound certificate: all sampled pre-orbit directions agree to
    /// within this angle (max over pairs of angle + half-widths).
    pub deviation_bound: f64,
    pub probes: Vec<DirectionProbe>,
}

/// Samples `trials` random pre-orbits and measures how much the unstable
/// direction depends on the choice. A report only: sampled pre-orbits cannot
/// certify independence over all of them.
pub fn special_ph_test(
    f: &TorusEndomorphism,
    cone: &ConeSpec,
    p: Vec2,
    depth: u32,
    trials: u32,
    seed: u64,
) -> Result<SpecialPhReport, DirectionError> {
    let mut rng = SplitMix64::new(seed);
    let mut probes = Vec::with_capacity(trials as usize);
    for _ in 0..trials {
        let choices: Vec<usize> = (0..depth).map(|_| rng.next_u64() as usize).collect();
        probes.push(unstable_direction(f, cone, p, &choices, depth)?);
    }
    let mut max_angle = 0.0f64;
    let mut bound = 0.0f64;
    for i in 0..probes.len() {
        for j in 0..i {
            let angle = projective_angle(probes[i].direction, probes[j].direction);
            max_angle = max_angle.max(angle);
            bound = bound.max(angle + 0.5 * (probes[i].width + probes[j].width));
        }
    }
    let max_width = probes.iter().fold(0.0f64, |acc, p| acc.max(p.width));
    Ok(SpecialPhReport {
        base: p,
        depth,
        trials,
        seed,
        max_pairwise_angle: max_angle,
        max_width,
        deviation_bound: bound.max(max_width),
        probes,
    })
}

/// Center direction candidate at `p`: the most-contracted right-singular
/// direction of `Df^depth(p)`, verified a posteriori to stay outside the
/// open unstable cone at every step along the forward orbit.
pub fn center_direction(
    f: &TorusEndomorphism,
    cone: &ConeSpec,
    p: Vec2,
    depth: u32,
) -> Result<CenterProbe, DirectionError> {
    let p = crate::map_model::normalize_torus(p);
    let mut orbit = Vec::with_capacity(depth as usize + 1);
    orbit.push(p);
    for k in 0..depth as usize {
        orbit.push(f.eval_torus(orbit[k]));
    }
    let mut d = Mat2::identity();
    for q in orbit.iter().take(depth as usize) {
        d = f.eval_derivative(*q).mul(&d);
    }
    // Minimizing right-singular direction: eigendirection of DᵀD for the
    // smaller eigenvalue.
    let q = d.transpose().mul(&d);
    let (a, b, c) = (q.0[0][0], q.0[0][1], q.0[1][1]);
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let lam_min = mean - rad;
    let v = if b.abs() > 1e-300 {
        [b, lam_min - a]
    } else if a <= c {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    let v = normalize_projective(v);

    // Exclusion check: Df^j(p) v must stay outside the open cone.
    let mut u = v;
    let mut verified = 0u32;
    for q in orbit.iter().take(depth as usize + 1) {
        let (main, perp) = match cone.orientation {
            crate::ph_certifier::ConeOrientation::Horizontal => (u[0], u[1]),
            crate::ph_certifier::ConeOrientation::Vertical => (u[1], u[0]),
        };
        if perp.abs() < cone.slope * main.abs() {
            return Err(DirectionError::ExclusionFailed { checked: verified });
        }
        verified += 1;
        u = f.eval_derivative(*q).mul_vec(u);
        let n = mat::norm2(u);
        u = mat::scale(u, 1.0 / n);
    }
    Ok(CenterProbe {
        base: p,
        direction: v,
        depth,
        steps_verified: verified,
    })
}

/// Index of the preimage branch that lands on `target` (nearest preimage).
pub fn branch_index_of(
    f: &TorusEndomorphism,
    point: Vec2,
    target: Vec2,
) -> Result<usize, DirectionError> {
    let pres = f.preimages(point)?;
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, q) in pres.iter().enumerate() {
        let d = crate::map_model::torus_dist_inf(*q, target);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    Ok(best)
}
