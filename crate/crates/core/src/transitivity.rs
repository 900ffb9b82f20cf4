//! Constructive transitivity machinery: iterating open regions on the lift,
//! searching for doubly-essential iterates, and covering witnesses.
//!
//! A region is carried in one of two forms. An *inner witness set* holds
//! forward images of concrete sample points with exact integer lift
//! bookkeeping: guaranteed members of the iterated region (up to float
//! evaluation). An *outer cover* is a union of dyadic cells that provably
//! contains the image: per step, each cell maps into the affine image of its
//! center dilated by a second-order Lipschitz term.
//!
//! The doubly-essential search finds image points that differ by exact
//! nonzero multiples of `e1` and of `e2`. Approximate pairs are proposed
//! either by a direct lattice-displacement scan of witness pairs or by the
//! Blichfeldt + pigeonhole pipeline on the occupied-cell set, and every
//! proposal is polished by a Newton solve in the domain until the image
//! displacement is an integer vector to within `1e-8` (re-verified).

use crate::integer_linear::{
    blichfeldt_translate, pigeonhole_pairs, CellSet, IntLinearError, IntMat2, RatRect,
};
use crate::map_model::{LiftPoint, MapError, Mat2, TorusEndomorphism};
use crate::mat::{self, Vec2};
use crate::rat::Rat;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransitivityError {
    #[error("outer cover exceeded the cell budget ({cells} > {budget}); use a coarser level or smaller n")]
    CellBlowup { cells: usize, budget: usize },
    #[error("no witness found within {n_max} iterates")]
    NotFoundWithin { n_max: u32 },
    #[error("no finite iterate bound: the volume growth rate must exceed the spectral radius")]
    NoFiniteIterateBound,
    #[error("the doubly-essential search needs an inner witness region")]
    NeedsInnerRegion,
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    IntLinear(#[from] IntLinearError),
}

/// Dyadic cell `[ix, ix+1] × [iy, iy+1] / 2^level` in the plane.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct DyadicCell {
    pub level: u8,
    pub ix: i64,
    pub iy: i64,
}

impl DyadicCell {
    pub fn side(&self) -> f64 {
        (0.5f64).powi(self.level as i32)
    }

    pub fn center(&self) -> Vec2 {
        let h = self.side();
        [(self.ix as f64 + 0.5) * h, (self.iy as f64 + 0.5) * h]
    }
}

/// Geometric description of the seed region, used for membership checks when
/// Newton refinement moves domain points.
#[derive(Copy, Clone, Debug, Serialize)]
pub enum RegionShape {
    Ball { center: Vec2, radius: f64 },
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
}

impl RegionShape {
    pub fn contains(&self, p: Vec2) -> bool {
        match *self {
            RegionShape::Ball { center, radius } => mat::dist2(p, center) < radius,
            RegionShape::Rect { x0, y0, x1, y1 } => {
                p[0] > x0 && p[0] < x1 && p[1] > y0 && p[1] < y1
            }
        }
    }

    fn bbox(&self) -> (Vec2, Vec2) {
        match *self {
            RegionShape::Ball { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            RegionShape::Rect { x0, y0, x1, y1 } => ([x0, y0], [x1, y1]),
        }
    }
}

/// A sample point of the seed region together with its current forward image
/// on the lift.
#[derive(Copy, Clone, Debug, Serialize)]
pub struct Witness {
    /// Original sample in the seed region (plane coordinates).
    pub origin: Vec2,
    /// Forward image with exact integer translation.
    pub image: LiftPoint,
}

#[derive(Clone, Debug, Serialize)]
pub enum RegionData {
    /// Guaranteed superset of the iterated region.
    Outer(Vec<DyadicCell>),
    /// Exact forward images of sample points: guaranteed members.
    Inner {
        shape: RegionShape,
        witnesses: Vec<Witness>,
    },
}

/// Finite union of dyadic cells carrying a region through iteration, either
/// as an outer cover or as an inner witness set.
#[derive(Clone, Debug, Serialize)]
pub struct RegionCover {
    pub level: u8,
    pub iterate: u32,
    pub data: RegionData,
}

impl RegionCover {
    /// Inner witness set sampling `per_cell × per_cell` points in every
    /// level-`level` cell that meets the shape.
    pub fn inner(shape: RegionShape, level: u8, per_cell: u32) -> RegionCover {
        let (lo, hi) = shape.bbox();
        let scale = (1u64 << level) as f64;
        let cx0 = (lo[0] * scale).floor() as i64;
        let cx1 = (hi[0] * scale).ceil() as i64;
        let cy0 = (lo[1] * scale).floor() as i64;
        let cy1 = (hi[1] * scale).ceil() as i64;
        let h = 1.0 / scale;
        let mut witnesses = Vec::new();
        for ix in cx0..cx1 {
            for iy in cy0..cy1 {
                for sx in 0..per_cell {
                    for sy in 0..per_cell {
                        let p = [
                            (ix as f64 + (sx as f64 + 0.5) / per_cell as f64) * h,
                            (iy as f64 + (sy as f64 + 0.5) / per_cell as f64) * h,
                        ];
                        if shape.contains(p) {
                            witnesses.push(Witness {
                                origin: p,
                                image: LiftPoint::from_plane(p),
                            });
                        }
                    }
                }
            }
        }
        RegionCover {
            level,
            iterate: 0,
            data: RegionData::Inner { shape, witnesses },
        }
    }

    /// Inner witness set from explicit points (the shape is their bounding
    /// box, slightly enlarged).
    pub fn inner_points(points: &[Vec2], level: u8) -> RegionCover {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            for i in 0..2 {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        let shape = RegionShape::Rect {
            x0: lo[0] - 1e-9,
            y0: lo[1] - 1e-9,
            x1: hi[0] + 1e-9,
            y1: hi[1] + 1e-9,
        };
        let witnesses = points
            .iter()
            .map(|&p| Witness {
                origin: p,
                image: LiftPoint::from_plane(p),
            })
            .collect();
        RegionCover {
            level,
            iterate: 0,
            data: RegionData::Inner { shape, witnesses },
        }
    }

    /// Outer cover of a rectangle by level-`level` dyadic cells.
    pub fn outer_rect(x0: f64, y0: f64, x1: f64, y1: f64, level: u8) -> RegionCover {
        let scale = (1u64 << level) as f64;
        let mut cells = Vec::new();
        for ix in (x0 * scale).floor() as i64..(x1 * scale).ceil() as i64 {
            for iy in (y0 * scale).floor() as i64..(y1 * scale).ceil() as i64 {
                cells.push(DyadicCell { level, ix, iy });
            }
        }
        RegionCover {
            level,
            iterate: 0,
            data: RegionData::Outer(cells),
        }
    }

    pub fn witnesses(&self) -> Option<&[Witness]> {
        match &self.data {
            RegionData::Inner { witnesses, .. } => Some(witnesses),
            RegionData::Outer(_) => None,
        }
    }

    pub fn cells(&self) -> Option<&[DyadicCell]> {
        match &self.data {
            RegionData::Outer(cells) => Some(cells),
            RegionData::Inner { .. } => None,
        }
    }

    /// Bounding box of the carried region.
    pub fn bounding_box(&self) -> Option<(Vec2, Vec2)> {
        match &self.data {
            RegionData::Outer(cells) => {
                let first = cells.first()?;
                let h = first.side();
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for c in cells {
                    lo[0] = lo[0].min(c.ix as f64 * h);
                    lo[1] = lo[1].min(c.iy as f64 * h);
                    hi[0] = hi[0].max((c.ix + 1) as f64 * h);
                    hi[1] = hi[1].max((c.iy + 1) as f64 * h);
                }
                Some((lo, hi))
            }
            RegionData::Inner { witnesses, .. } => {
                let first = witnesses.first()?;
                let mut lo = first.image.value();
                let mut hi = lo;
                for w in witnesses {
                    let v = w.image.value();
                    for i in 0..2 {
                        lo[i] = lo[i].min(v[i]);
                        hi[i] = hi[i].max(v[i]);
                    }
                }
                Some((lo, hi))
            }
        }
    }
}

#[derive(Copy, Clone, Debug)]
pub struct IterationParams {
    pub cell_budget: usize,
}

impl Default for IterationParams {
    fn default() -> IterationParams {
        IterationParams {
            cell_budget: 1 << 18,
        }
    }
}

/// Pushes a region forward `n` steps.
///
/// Inner witness sets map exactly (per point, with lift bookkeeping). Outer
/// covers map cell by cell: the affine image of the cell at its center,
/// dilated by the second-order term `LipDf · radius²`, then re-covered by
/// dyadic cells of the same level.
pub fn iterate_region(
    f: &TorusEndomorphism,
    region: &RegionCover,
    n: u32,
    params: &IterationParams,
) -> Result<RegionCover, TransitivityError> {
    let mut out = region.clone();
    for _ in 0..n {
        out = match out.data {
            RegionData::Inner { shape, witnesses } => {
                let stepped = witnesses
                    .into_iter()
                    .map(|w| Witness {
                        origin: w.origin,
                        image: f.step_lift(&w.image),
                    })
                    .collect();
                RegionCover {
                    level: out.level,
                    iterate: out.iterate + 1,
                    data: RegionData::Inner {
                        shape,
                        witnesses: stepped,
                    },
                }
            }
            RegionData::Outer(cells) => {
                let level = out.level;
                let h = (0.5f64).powi(level as i32);
                let lip = f.lipschitz_bounds().lip_df;
                // ‖f(x) − f(c) − Df(c)(x−c)‖ <= LipDf ‖x−c‖² / 2 over the cell.
                let curv = 0.5 * lip * (h * h / 2.0);
                let scale = (1u64 << level) as f64;
                let mut next: BTreeSet<DyadicCell> = BTreeSet::new();
                for cell in &cells {
                    let c = cell.center();
                    let image = f.eval_lift(c);
                    let d = f.eval_derivative(c).0;
                    let half = h / 2.0;
                    let spread_x = (d[0][0].abs() + d[0][1].abs()) * half + curv;
                    let spread_y = (d[1][0].abs() + d[1][1].abs()) * half + curv;
                    let x0 = ((image[0] - spread_x) * scale).floor() as i64;
                    let x1 = ((image[0] + spread_x) * scale).ceil() as i64;
                    let y0 = ((image[1] - spread_y) * scale).floor() as i64;
                    let y1 = ((image[1] + spread_y) * scale).ceil() as i64;
                    for ix in x0..x1 {
                        for iy in y0..y1 {
                            next.insert(DyadicCell { level, ix, iy });
                            if next.len() > params.cell_budget {
                                return Err(TransitivityError::CellBlowup {
                                    cells: next.len(),
                                    budget: params.cell_budget,
                                });
                            }
                        }
                    }
                }
                RegionCover {
                    level,
                    iterate: out.iterate + 1,
                    data: RegionData::Outer(next.into_iter().collect()),
                }
            }
        };
    }
    Ok(out)
}

/// A verified pair of image points displaced by an exact nonzero integer
/// multiple of a coordinate axis.
#[derive(Clone, Debug, Serialize)]
pub struct DisplacedPair {
    /// Domain points in the seed region whose images realize the pair.
    pub domain: [Vec2; 2],
    /// The images `f~^n(domain)`.
    pub image: [LiftPoint; 2],
    /// The nonzero integer multiple.
    pub multiple: i64,
    /// `‖(image[1] − image[0]) − multiple · e_axis‖_∞` after refinement.
    pub residual: f64,
}

/// Witness that `f~^n(U)` contains an `e1`-displaced and an `e2`-displaced
/// pair of points, i.e. that `f^n(U)` is doubly essential.
#[derive(Clone, Debug, Serialize)]
pub struct EssentialityReport {
    pub iterate: u32,
    pub e1: DisplacedPair,
    pub e2: DisplacedPair,
    /// Which proposal engine produced the candidates at this iterate.
    pub route: SearchRoute,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum SearchRoute {
    DirectScan,
    BlichfeldtPigeonhole,
}

#[derive(Copy, Clone, Debug)]
pub struct EssentialSearchParams {
    /// Window for the pair scan, in image units.
    pub scan_tol: f64,
    /// Max Newton candidates tried per axis per iterate.
    pub max_candidates: usize,
    /// Accept a pair when the displacement residual is below this.
    pub accept_residual: f64,
    /// Also try the Blichfeldt + pigeonhole proposal pipeline.
    pub use_blichfeldt: bool,
}

impl Default for EssentialSearchParams {
    fn default() -> EssentialSearchParams {
        EssentialSearchParams {
            scan_tol: 0.35,
            max_candidates: 24,
            accept_residual: 1e-8,
            use_blichfeldt: true,
        }
    }
}

/// Image difference `f~^n(y) − f~^n(x)` via paired iteration (exact integer
/// difference bookkeeping), together with the Jacobian `D f~^n(y)`.
fn pair_image_diff(
    f: &TorusEndomorphism,
    x: Vec2,
    y: Vec2,
    n: u32,
) -> (Vec2, Mat2) {
    let a = f.linear_part().0;
    let mut fx = [x[0] - x[0].floor(), x[1] - x[1].floor()];
    let mut fy = [y[0] - y[0].floor(), y[1] - y[1].floor()];
    let mut dw = [
        y[0].floor() as i128 - x[0].floor() as i128,
        y[1].floor() as i128 - x[1].floor() as i128,
    ];
    let mut jac = Mat2::identity();
    let amat = Mat2::from_int(f.linear_part());
    for _ in 0..n {
        jac = f.eval_derivative(fy).mul(&jac);
        let vx = mat::add(amat.mul_vec(fx), f.displacement().eval(fx));
        let vy = mat::add(amat.mul_vec(fy), f.displacement().eval(fy));
        let ix = [vx[0].floor(), vx[1].floor()];
        let iy = [vy[0].floor(), vy[1].floor()];
        dw = [
            a[0][0] as i128 * dw[0] + a[0][1] as i128 * dw[1] + (iy[0] as i128 - ix[0] as i128),
            a[1][0] as i128 * dw[0] + a[1][1] as i128 * dw[1] + (iy[1] as i128 - ix[1] as i128),
        ];
        fx = [vx[0] - ix[0], vx[1] - ix[1]];
        fy = [vy[0] - iy[0], vy[1] - iy[1]];
    }
    (
        [
            (fy[0] - fx[0]) + dw[0] as f64,
            (fy[1] - fx[1]) + dw[1] as f64,
        ],
        jac,
    )
}

/// Newton-polishes `y` so that `f~^n(y) − f~^n(x) = multiple * e_axis`
/// exactly; returns the refined `y` and the final residual.
fn refine_pair(
    f: &TorusEndomorphism,
    x: Vec2,
    y0: Vec2,
    axis: usize,
    multiple: i64,
    n: u32,
) -> Option<(Vec2, f64)> {
    let mut target = [0.0f64; 2];
    target[axis] = multiple as f64;
    let mut y = y0;
    let (diff, mut jac) = pair_image_diff(f, x, y, n);
    let mut res = mat::sub(diff, target);
    let mut rn = mat::norm_inf(res);
    for _ in 0..40 {
        if rn <= 1e-11 {
            break;
        }
        let step = jac.inverse()?.mul_vec(res);
        let mut damp = 1.0;
        let mut improved = false;
        for _ in 0..12 {
            let cand = mat::sub(y, mat::scale(step, damp));
            let (cd, cj) = pair_image_diff(f, x, cand, n);
            let crn = mat::norm_inf(mat::sub(cd, target));
            if crn < rn {
                y = cand;
                jac = cj;
                res = mat::sub(cd, target);
                rn = crn;
                improved = true;
                break;
            }
            damp *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Some((y, rn))
}

struct PairCandidate {
    xi: usize,
    yi: usize,
    multiple: i64,
    score: f64,
}

/// Scans witness pairs for approximate `e_axis`-displacements. Buckets by the
/// transverse coordinate (exact integer part + quantized fraction) so the
/// scan stays reliable even when image coordinates are huge.
fn scan_axis_candidates(
    witnesses: &[Witness],
    axis: usize,
    params: &EssentialSearchParams,
) -> Vec<PairCandidate> {
    let other = 1 - axis;
    const Q: i128 = 8;
    let mut buckets: BTreeMap<i128, Vec<usize>> = BTreeMap::new();
    for (i, w) in witnesses.iter().enumerate() {
        let key = w.image.whole[other] * Q + (w.image.frac[other] * Q as f64).floor() as i128;
        buckets.entry(key).or_default().push(i);
    }
    let mut cands: Vec<PairCandidate> = Vec::new();
    let keys: Vec<i128> = buckets.keys().cloned().collect();
    for &key in &keys {
        let mut pool: Vec<usize> = buckets[&key].clone();
        if let Some(next) = buckets.get(&(key + 1)) {
            pool.extend(next.iter().cloned());
        }
        // Cap the quadratic scan per bucket; one polished candidate suffices.
        let cap = 128.min(pool.len());
        for a in 0..cap {
            for b in 0..a {
                let (i, j) = (pool[a], pool[b]);
                let d = witnesses[i].image.diff(&witnesses[j].image);
                if d[other].abs() > params.scan_tol {
                    continue;
                }
                let m = d[axis].round();
                if m == 0.0 || m.abs() > 1e15 {
                    continue;
                }
                let off = (d[axis] - m).abs();
                if off > params.scan_tol {
                    continue;
                }
                cands.push(PairCandidate {
                    xi: j,
                    yi: i,
                    multiple: m as i64,
                    score: off + d[other].abs(),
                });
            }
        }
    }
    cands.sort_by(|p, q| p.score.partial_cmp(&q.score).expect("finite scores"));
    cands.truncate(params.max_candidates);
    cands
}

fn try_candidates(
    f: &TorusEndomorphism,
    shape: &RegionShape,
    witnesses: &[Witness],
    cands: &[PairCandidate],
    axis: usize,
    n: u32,
    params: &EssentialSearchParams,
) -> Option<DisplacedPair> {
    for c in cands {
        let x = witnesses[c.xi].origin;
        let y0 = witnesses[c.yi].origin;
        if let Some((y, residual)) = refine_pair(f, x, y0, axis, c.multiple, n) {
            if residual <= params.accept_residual && shape.contains(y) && shape.contains(x) {
                // Recompute the displaced images for the report.
                let lift = |p: Vec2| {
                    let mut q = LiftPoint::from_plane(p);
                    for _ in 0..n {
                        q = f.step_lift(&q);
                    }
                    q
                };
                return Some(DisplacedPair {
                    domain: [x, y],
                    image: [lift(x), lift(y)],
                    multiple: c.multiple,
                    residual,
                });
            }
        }
    }
    None
}

/// Occupied dyadic cells of the witness images, as an exact rational cell
/// set in the plane. Cell indices are exact thanks to the lift bookkeeping.
fn occupied_cells(witnesses: &[Witness], level: u8) -> Result<CellSet, IntLinearError> {
    let scale = 1i128 << level;
    let mut set: BTreeSet<(i128, i128)> = BTreeSet::new();
    for w in witnesses {
        let cx = w.image.whole[0] * scale + (w.image.frac[0] * scale as f64).floor() as i128;
        let cy = w.image.whole[1] * scale + (w.image.frac[1] * scale as f64).floor() as i128;
        set.insert((cx, cy));
    }
    let rects = set
        .into_iter()
        .map(|(cx, cy)| {
            RatRect::new(
                Rat::dyadic(cx, level),
                Rat::dyadic(cx + 1, level),
                Rat::dyadic(cy, level),
                Rat::dyadic(cy + 1, level),
            )
            .expect("dyadic cells are nondegenerate")
        })
        .collect();
    CellSet::new(rects)
}

/// Proposal pipeline following the geometry-of-numbers argument: Blichfeldt
/// on the occupied-cell set produces lattice-displaced points, the pigeonhole
/// step aligns them on a row and a column, and Newton connects them back to
/// exact image points of the region.
///
/// The occupied cells are taken at the coarsest dyadic level at which their
/// total area exceeds the pigeonhole box side; coarse cells may poke past the
/// true image, which is harmless because every candidate is Newton-verified
/// against the region.
fn blichfeldt_route(
    f: &TorusEndomorphism,
    shape: &RegionShape,
    witnesses: &[Witness],
    level: u8,
    n: u32,
    params: &EssentialSearchParams,
) -> Option<(DisplacedPair, DisplacedPair)> {
    let mut found: Option<(CellSet, i128)> = None;
    for lvl in (0..=level).rev() {
        let cells = occupied_cells(witnesses, lvl).ok()?;
        let bb = cells.bounding_box()?;
        let width = (bb.x1 - bb.x0).ceil();
        let height = (bb.y1 - bb.y0).ceil();
        let l = width.max(height) + 1;
        if !(1..=10_000).contains(&l) {
            return None;
        }
        if cells.area() > Rat::from_int(l) {
            found = Some((cells, l));
            break;
        }
    }
    let (cells, l) = found?;
    let w = blichfeldt_translate(&cells, l as u32).ok()?;
    // Integer presentation: t + p is an integer point for each returned p.
    let ints: Vec<(i64, i64)> = w
        .points
        .iter()
        .map(|&(x, y)| {
            let zx = w.translate.0 + x;
            let zy = w.translate.1 + y;
            debug_assert!(zx.is_integer() && zy.is_integer());
            (zx.num() as i64, zy.num() as i64)
        })
        .collect();
    let min_x = ints.iter().map(|p| p.0).min()?;
    let min_y = ints.iter().map(|p| p.1).min()?;
    let shifted: Vec<(i64, i64)> = ints
        .iter()
        .map(|&(x, y)| (x - min_x + 1, y - min_y + 1))
        .collect();
    if shifted.iter().any(|&(x, y)| x > l as i64 || y > l as i64) {
        return None;
    }
    let pairs = pigeonhole_pairs(&shifted, l as i64).ok()?;

    // Map a shifted integer point back to the rational cell-set point.
    let back = |z: (i64, i64)| -> Vec2 {
        let zx = Rat::from_int((z.0 - 1 + min_x) as i128) - w.translate.0;
        let zy = Rat::from_int((z.1 - 1 + min_y) as i128) - w.translate.1;
        [zx.to_f64(), zy.to_f64()]
    };
    let solve = |target: Vec2| -> Option<Vec2> {
        // Nearest witness seeds a Newton solve of f~^n(y) = target.
        let seed = witnesses
            .iter()
            .min_by(|a, b| {
                let da = mat::dist_inf(a.image.value(), target);
                let db = mat::dist_inf(b.image.value(), target);
                da.partial_cmp(&db).expect("finite distances")
            })?
            .origin;
        let mut y = seed;
        for _ in 0..40 {
            let (img, jac) = image_with_jacobian(f, y, n);
            let res = mat::sub(img, target);
            if mat::norm_inf(res) <= 1e-11 {
                break;
            }
            let step = jac.inverse()?.mul_vec(res);
            y = mat::sub(y, step);
        }
        let (img, _) = image_with_jacobian(f, y, n);
        if mat::norm_inf(mat::sub(img, target)) <= 1e-9 && shape.contains(y) {
            Some(y)
        } else {
            None
        }
    };
    let make_pair = |a: (i64, i64), b: (i64, i64), axis: usize| -> Option<DisplacedPair> {
        let (pa, pb) = (back(a), back(b));
        let ya = solve(pa)?;
        let yb = solve(pb)?;
        let (diff, _) = pair_image_diff(f, ya, yb, n);
        let m = diff[axis].round() as i64;
        if m == 0 {
            return None;
        }
        let mut target = [0.0; 2];
        target[axis] = m as f64;
        let residual = mat::norm_inf(mat::sub(diff, target));
        if residual > params.accept_residual {
            return None;
        }
        let lift = |p: Vec2| {
            let mut q = LiftPoint::from_plane(p);
            for _ in 0..n {
                q = f.step_lift(&q);
            }
            q
        };
        Some(DisplacedPair {
            domain: [ya, yb],
            image: [lift(ya), lift(yb)],
            multiple: m,
            residual,
        })
    };
    let e1 = make_pair(pairs.row_pair[0], pairs.row_pair[1], 0)?;
    let e2 = make_pair(pairs.col_pair[0], pairs.col_pair[1], 1)?;
    Some((e1, e2))
}

fn image_with_jacobian(f: &TorusEndomorphism, y: Vec2, n: u32) -> (Vec2, Mat2) {
    let mut p = LiftPoint::from_plane(y);
    let mut jac = Mat2::identity();
    for _ in 0..n {
        jac = f.eval_derivative(p.frac).mul(&jac);
        p = f.step_lift(&p);
    }
    (p.value(), jac)
}

/// Finds the smallest `n <= n_max` at which the iterated witness set of the
/// region contains both an `e1`- and an `e2`-displaced pair, with exact
/// displacement verification.
pub fn doubly_essential_witness(
    f: &TorusEndomorphism,
    region: &RegionCover,
    n_max: u32,
    params: &EssentialSearchParams,
) -> Result<EssentialityReport, TransitivityError> {
    let (shape, mut witnesses) = match &region.data {
        RegionData::Inner { shape, witnesses } => (*shape, witnesses.clone()),
        RegionData::Outer(_) => return Err(TransitivityError::NeedsInnerRegion),
    };
    for n in 0..=n_max {
        if n > 0 {
            for w in witnesses.iter_mut() {
                w.image = f.step_lift(&w.image);
            }
        }
        let e1_c = scan_axis_candidates(&witnesses, 0, params);
        let e2_c = scan_axis_candidates(&witnesses, 1, params);
        let e1 = try_candidates(f, &shape, &witnesses, &e1_c, 0, n, params);
        let e2 = try_candidates(f, &shape, &witnesses, &e2_c, 1, n, params);
        match (e1, e2) {
            (Some(e1), Some(e2)) => {
                return Ok(EssentialityReport {
                    iterate: n,
                    e1,
                    e2,
                    route: SearchRoute::DirectScan,
                })
            }
            _ if params.use_blichfeldt => {
                if let Some((e1, e2)) =
                    blichfeldt_route(f, &shape, &witnesses, region.level, n, params)
                {
                    return Ok(EssentialityReport {
                        iterate: n,
                        e1,
                        e2,
                        route: SearchRoute::BlichfeldtPigeonhole,
                    });
                }
            }
            _ => {}
        }
    }
    Err(TransitivityError::NotFoundWithin { n_max })
}

/// The effective sufficient iterate: smallest `N` with
/// `2 (1+κ) ‖A^N‖ + 2κ < λ_vol^N · Leb(B)`, using computed power norms in
/// place of a spectral-radius envelope.
#[derive(Copy, Clone, Debug, Serialize)]
pub struct IterateBound {
    pub n: u32,
    /// Diameter bound `2 (1+κ) ‖A^N‖ + 2κ` at the returned `N`.
    pub diameter_bound: f64,
    /// Area bound `λ_vol^N · Leb(B)` at the returned `N`.
    pub area_bound: f64,
}

pub fn essential_iterate_bound(
    kappa: f64,
    leb_b: f64,
    a: &IntMat2,
    lambda_vol: f64,
) -> Result<IterateBound, TransitivityError> {
    assert!(leb_b > 0.0 && kappa >= 0.0);
    let rho = spectral_radius_f64(a);
    if lambda_vol <= rho {
        return Err(TransitivityError::NoFiniteIterateBound);
    }
    for n in 1..100_000u32 {
        let norm = crate::integer_linear::pow_norm_inf(a, n);
        let lhs = 2.0 * (1.0 + kappa) * norm + 2.0 * kappa;
        let rhs = lambda_vol.powi(n as i32) * leb_b;
        if !lhs.is_finite() || !rhs.is_finite() {
            break;
        }
        if lhs < rhs {
            return Ok(IterateBound {
                n,
                diameter_bound: lhs,
                area_bound: rhs,
            });
        }
    }
    Err(TransitivityError::NoFiniteIterateBound)
}

fn spectral_radius_f64(a: &IntMat2) -> f64 {
    let tr = a.trace() as f64;
    let det = a.det() as f64;
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (((tr + s) / 2.0).abs()).max(((tr - s) / 2.0).abs())
    } else {
        det.abs().sqrt()
    }
}

#[derive(Copy, Clone, Debug)]
pub struct CoveringParams {
    /// Initial sampling: `per_cell × per_cell` points per level-`level` cell.
    pub level: u8,
    pub per_cell: u32,
    /// Sampling density doublings attempted after a miss.
    pub max_doublings: u32,
}

impl Default for CoveringParams {
    fn default() -> CoveringParams {
        CoveringParams {
            level: 5,
            per_cell: 8,
            max_doublings: 3,
        }
    }
}

/// Smallest `n <= n_max` at which the forward images of the region's samples
/// hit every cell of the `m × m` torus grid, numeric evidence that
/// `f^n(U)` covers the torus at resolution `1/m`. The sampling density is
/// doubled on failure, up to the configured budget.
pub fn covering_witness(
    f: &TorusEndomorphism,
    shape: &RegionShape,
    m: u32,
    n_max: u32,
    params: &CoveringParams,
) -> Result<u32, TransitivityError> {
    let total = (m as usize) * (m as usize);
    let mut per_cell = params.per_cell;
    for _ in 0..=params.max_doublings {
        let region = RegionCover::inner(*shape, params.level, per_cell);
        let mut pts: Vec<Vec2> = region
            .witnesses()
            .expect("inner region")
            .iter()
            .map(|w| crate::map_model::normalize_torus(w.origin))
            .collect();
        let mut hit = vec![false; total];
        let mut count = 0usize;
        let mark = |pts: &[Vec2], hit: &mut Vec<bool>, count: &mut usize| {
            for p in pts {
                let i = ((p[0] * m as f64) as usize).min(m as usize - 1);
                let j = ((p[1] * m as f64) as usize).min(m as usize - 1);
                let idx = i * m as usize + j;
                if !hit[idx] {
                    hit[idx] = true;
                    *count += 1;
                }
            }
        };
        mark(&pts, &mut hit, &mut count);
        if count == total {
            return Ok(0);
        }
        for n in 1..=n_max {
            for p in pts.iter_mut() {
                *p = f.eval_torus(*p);
            }
            mark(&pts, &mut hit, &mut count);
            if count == total {
                return Ok(n);
            }
        }
        per_cell *= 2;
    }
    Err(TransitivityError::NotFoundWithin { n_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;

    const EPS: f64 = 0.1;

    #[test]
    fn outer_cover_of_linear_image() {
        let f = gallery::linear(IntMat2::diag(5, 2));
        let u = RegionCover::outer_rect(0.0, 0.0, 0.125, 0.125, 3);
        let image = iterate_region(&f, &u, 1, &IterationParams::default()).unwrap();
        let (lo, hi) = image.bounding_box().unwrap();
        assert!(mat::dist_inf(lo, [0.0, 0.0]) < 1e-9);
        assert!(mat::dist_inf(hi, [0.625, 0.25]) < 1e-9);
    }

    #[test]
    fn iterating_zero_times_is_identity() {
        let f = gallery::paper_example(EPS);
        let u = RegionCover::inner(
            RegionShape::Ball {
                center: [0.3, 0.3],
                radius: 0.05,
            },
            5,
            8,
        );
        let same = iterate_region(&f, &u, 0, &IterationParams::default()).unwrap();
        assert_eq!(
            u.witnesses().unwrap().len(),
            same.witnesses().unwrap().len()
        );
        assert_eq!(same.iterate, 0);
    }

    #[test]
    fn witness_spread_grows_with_horizontal_expansion() {
        // d/dx of the first coordinate is at least 4 everywhere, so three
        // iterates stretch any x-extent by at least 4^3.
        let f = gallery::paper_example(EPS);
        let u = RegionCover::inner(
            RegionShape::Rect {
                x0: 0.0,
                y0: 0.0,
                x1: 1.0 / 32.0,
                y1: 1.0 / 32.0,
            },
            5,
            8,
        );
        let initial = {
            let (lo, hi) = u.bounding_box().unwrap();
            hi[0] - lo[0]
        };
        let image = iterate_region(&f, &u, 3, &IterationParams::default()).unwrap();
        let (lo, hi) = image.bounding_box().unwrap();
        assert!(
            hi[0] - lo[0] >= 64.0 * initial - 1e-9,
            "spread {} from {}",
            hi[0] - lo[0],
            initial
        );
    }

    #[test]
    fn inner_witnesses_stay_inside_outer_cover() {
        let cases: Vec<(TorusEndomorphism, u32)> = vec![
            (gallery::linear(IntMat2::diag(2, 2)), 6),
            (gallery::paper_example(EPS), 4),
            (gallery::product_example(), 5),
        ];
        for (f, nmax) in cases {
            let shape = RegionShape::Rect {
                x0: 0.1,
                y0: 0.1,
                x1: 0.1 + 1.0 / 16.0,
                y1: 0.1 + 1.0 / 16.0,
            };
            let inner0 = RegionCover::inner(shape, 5, 4);
            let outer0 = RegionCover::outer_rect(0.1, 0.1, 0.1 + 1.0 / 16.0, 0.1 + 1.0 / 16.0, 5);
            for n in 0..=nmax {
                let inner = iterate_region(&f, &inner0, n, &IterationParams::default()).unwrap();
                let outer = iterate_region(&f, &outer0, n, &IterationParams::default()).unwrap();
                let cells: BTreeSet<(i64, i64)> = outer
                    .cells()
                    .unwrap()
                    .iter()
                    .map(|c| (c.ix, c.iy))
                    .collect();
                let scale = 32.0;
                for w in inner.witnesses().unwrap() {
                    let v = w.image.value();
                    let cx = (v[0] * scale).floor() as i64;
                    let cy = (v[1] * scale).floor() as i64;
                    assert!(
                        cells.contains(&(cx, cy)),
                        "{} n={n}: witness {v:?} outside outer cover",
                        f.name()
                    );
                }
            }
        }
    }

    #[test]
    fn cell_budget_is_enforced() {
        let f = gallery::linear(IntMat2::diag(5, 2));
        let u = RegionCover::outer_rect(0.0, 0.0, 0.25, 0.25, 5);
        let err = iterate_region(&f, &u, 6, &IterationParams { cell_budget: 500 });
        assert!(matches!(err, Err(TransitivityError::CellBlowup { .. })));
    }

    #[test]
    fn doubly_essential_immediate_when_pairs_preexist() {
        let u = RegionCover::inner_points(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], 5);
        let f = gallery::paper_example(EPS);
        let report =
            doubly_essential_witness(&f, &u, 0, &EssentialSearchParams::default()).unwrap();
        assert_eq!(report.iterate, 0);
        assert_eq!(report.e1.multiple.abs(), 1);
        assert_eq!(report.e2.multiple.abs(), 1);
        assert!(report.e1.residual <= 1e-10);
    }

    #[test]
    fn doubly_essential_linear_square() {
        // Image spans more than 1 in both axes exactly at n = 2.
        let f = gallery::linear(IntMat2::diag(5, 2));
        let u = RegionCover::inner(
            RegionShape::Rect {
                x0: 0.0,
                y0: 0.0,
                x1: 0.3,
                y1: 0.3,
            },
            5,
            8,
        );
        let report =
            doubly_essential_witness(&f, &u, 5, &EssentialSearchParams::default()).unwrap();
        assert_eq!(report.iterate, 2);
        verify_report(&f, &report);
    }

    #[test]
    fn doubly_essential_skew_example_ball() {
        let f = gallery::paper_example(EPS);
        let u = RegionCover::inner(
            RegionShape::Ball {
                center: [0.3, 0.3],
                radius: 0.05,
            },
            5,
            8,
        );
        let report =
            doubly_essential_witness(&f, &u, 20, &EssentialSearchParams::default()).unwrap();
        assert!(report.iterate <= 20);
        verify_report(&f, &report);
    }

    fn verify_report(f: &TorusEndomorphism, report: &EssentialityReport) {
        for (pair, axis) in [(&report.e1, 0usize), (&report.e2, 1usize)] {
            assert_ne!(pair.multiple, 0);
            let (diff, _) = pair_image_diff(f, pair.domain[0], pair.domain[1], report.iterate);
            let mut target = [0.0; 2];
            target[axis] = pair.multiple as f64;
            assert!(
                mat::norm_inf(mat::sub(diff, target)) <= 1e-8,
                "axis {axis}: diff {diff:?} vs multiple {}",
                pair.multiple
            );
        }
    }

    #[test]
    fn blichfeldt_route_on_linear_map() {
        let f = gallery::linear(IntMat2::diag(5, 2));
        let u = RegionCover::inner(
            RegionShape::Rect {
                x0: 0.0,
                y0: 0.0,
                x1: 0.3,
                y1: 0.3,
            },
            5,
            8,
        );
        let region = iterate_region(&f, &u, 3, &IterationParams::default()).unwrap();
        let (shape, witnesses) = match &region.data {
            RegionData::Inner { shape, witnesses } => (shape, witnesses),
            _ => unreachable!(),
        };
        let got = blichfeldt_route(
            &f,
            shape,
            witnesses,
            5,
            3,
            &EssentialSearchParams::default(),
        );
        let (e1, e2) = got.expect("pipeline should find pairs at n=3");
        assert_ne!(e1.multiple, 0);
        assert_ne!(e2.multiple, 0);
        assert!(e1.residual <= 1e-8 && e2.residual <= 1e-8);
    }

    #[test]
    fn iterate_bound_worked_case() {
        // κ=0, A=diag(5,2), Leb=1, λ=6: need (6/5)^N > 2, so N = 4.
        let b = essential_iterate_bound(0.0, 1.0, &IntMat2::diag(5, 2), 6.0).unwrap();
        assert_eq!(b.n, 4);
        assert!(b.diameter_bound < b.area_bound);
    }

    #[test]
    fn iterate_bound_monotone_in_area() {
        let a = IntMat2::diag(5, 2);
        let n1 = essential_iterate_bound(0.2, 0.01, &a, 5.4).unwrap().n;
        let n2 = essential_iterate_bound(0.2, 0.02, &a, 5.4).unwrap().n;
        assert!(n2 <= n1);
    }

    #[test]
    fn iterate_bound_requires_gap() {
        assert!(matches!(
            essential_iterate_bound(0.0, 1.0, &IntMat2::diag(5, 2), 5.0),
            Err(TransitivityError::NoFiniteIterateBound)
        ));
    }

    #[test]
    fn covering_linear_square() {
        let f = gallery::linear(IntMat2::diag(5, 2));
        let shape = RegionShape::Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 0.3,
            y1: 0.3,
        };
        let n = covering_witness(&f, &shape, 16, 10, &CoveringParams::default()).unwrap();
        assert_eq!(n, 2);
    }

    #[test]
    fn covering_skew_example() {
        let f = gallery::paper_example(EPS);
        let shape = RegionShape::Ball {
            center: [0.3, 0.3],
            radius: 0.05,
        };
        let n = covering_witness(&f, &shape, 32, 25, &CoveringParams::default()).unwrap();
        assert!(n <= 25, "covered at n = {n}");
    }

    #[test]
    fn covering_not_found_from_trapped_annulus() {
        // Samples inside the trapping annulus never leave it, so rows away
        // from y = 0 are never hit.
        let f = gallery::product_example();
        let shape = RegionShape::Rect {
            x0: 0.0,
            y0: -0.08,
            x1: 1.0,
            y1: 0.08,
        };
        let err = covering_witness(&f, &shape, 32, 40, &CoveringParams::default());
        assert!(matches!(
            err,
            Err(TransitivityError::NotFoundWithin { n_max: 40 })
        ));
    }

    #[test]
    fn covering_monotone_in_resolution() {
        let f = gallery::linear(IntMat2::diag(5, 2));
        let shape = RegionShape::Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 0.3,
            y1: 0.3,
        };
        let fine = covering_witness(&f, &shape, 16, 10, &CoveringParams::default()).unwrap();
        let coarse = covering_witness(&f, &shape, 8, 10, &CoveringParams::default()).unwrap();
        assert!(coarse <= fine);
    }
}
