//! Exact 2×2 integer linear algebra and lattice-point search.
//!
//! Everything in this module is exact: eigenvalues are accepted only when the
//! characteristic polynomial factors over the integers, the triangularizing
//! matrix is verified by integer multiplication, and the Blichfeldt search
//! folds rational rectangles with exact rational arithmetic so that area
//! comparisons are never subject to rounding.

use crate::rat::Rat;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IntLinearError {
    #[error("matrix has no integer eigenvalues")]
    NoIntegerEigenvalues,
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("cell set area {area} is not greater than k = {k}")]
    AreaTooSmall { area: Rat, k: u32 },
    #[error("rectangle has a non-positive side")]
    DegenerateRectangle,
    #[error("cell set rectangles overlap with positive area")]
    OverlappingRectangles,
    #[error("pigeonhole precondition violated: {0}")]
    PreconditionViolated(&'static str),
    #[error("integer overflow in exact arithmetic")]
    Overflow,
}

/// 2×2 integer matrix, row-major.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct IntMat2(pub [[i64; 2]; 2]);

impl std::fmt::Debug for IntMat2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[[{}, {}], [{}, {}]]",
            self.0[0][0], self.0[0][1], self.0[1][0], self.0[1][1]
        )
    }
}

impl IntMat2 {
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> IntMat2 {
        IntMat2([[a, b], [c, d]])
    }

    pub fn identity() -> IntMat2 {
        IntMat2::new(1, 0, 0, 1)
    }

    pub fn diag(a: i64, b: i64) -> IntMat2 {
        IntMat2::new(a, 0, 0, b)
    }

    pub fn det(&self) -> i64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> i64 {
        self.0[0][0] + self.0[1][1]
    }

    /// Adjugate, so that `A * adj(A) = det(A) * I`.
    pub fn adjugate(&self) -> IntMat2 {
        let m = &self.0;
        IntMat2::new(m[1][1], -m[0][1], -m[1][0], m[0][0])
    }

    pub fn checked_mul(&self, rhs: &IntMat2) -> Result<IntMat2, IntLinearError> {
        let mut out = [[0i64; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = 0i64;
                for k in 0..2 {
                    let prod = self.0[i][k]
                        .checked_mul(rhs.0[k][j])
                        .ok_or(IntLinearError::Overflow)?;
                    acc = acc.checked_add(prod).ok_or(IntLinearError::Overflow)?;
                }
                out[i][j] = acc;
            }
        }
        Ok(IntMat2(out))
    }

    pub fn mul_vec(&self, v: [i64; 2]) -> [i64; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    /// Largest integer eigenvalue in modulus, when the spectrum is integral.
    pub fn spectral_radius_int(&self) -> Option<i64> {
        integer_eigenvalues(self).map(|e| e.lambda1.abs())
    }
}

/// `A^n` over `i128`, or `None` on overflow.
pub fn int_pow_i128(a: &IntMat2, n: u32) -> Option<[[i128; 2]; 2]> {
    let mut acc = [[1i128, 0], [0, 1]];
    let base = [
        [a.0[0][0] as i128, a.0[0][1] as i128],
        [a.0[1][0] as i128, a.0[1][1] as i128],
    ];
    for _ in 0..n {
        let mut next = [[0i128; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0i128;
                for k in 0..2 {
                    s = s.checked_add(acc[i][k].checked_mul(base[k][j])?)?;
                }
                next[i][j] = s;
            }
        }
        acc = next;
    }
    Some(acc)
}

/// Max-row-sum norm of `A^n`. Exact integer arithmetic while it fits in
/// `i128`; beyond that, float products with a small relative inflation so the
/// result stays an upper bound.
pub fn pow_norm_inf(a: &IntMat2, n: u32) -> f64 {
    if let Some(p) = int_pow_i128(a, n) {
        let r0 = p[0][0].unsigned_abs() as f64 + p[0][1].unsigned_abs() as f64;
        let r1 = p[1][0].unsigned_abs() as f64 + p[1][1].unsigned_abs() as f64;
        return r0.max(r1);
    }
    let mut acc = [[1f64, 0.0], [0.0, 1.0]];
    let base = [
        [a.0[0][0] as f64, a.0[0][1] as f64],
        [a.0[1][0] as f64, a.0[1][1] as f64],
    ];
    for _ in 0..n {
        let mut next = [[0f64; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                next[i][j] = acc[i][0] * base[0][j] + acc[i][1] * base[1][j];
            }
        }
        acc = next;
    }
    let r0 = acc[0][0].abs() + acc[0][1].abs();
    let r1 = acc[1][0].abs() + acc[1][1].abs();
    r0.max(r1) * (1.0 + 1e-12 * n as f64)
}

/// Integer eigendata: `lambda1, lambda2` ordered by `|lambda1| >= |lambda2|`
/// (ties broken by `lambda1 >= lambda2`) and a primitive integer eigenvector
/// for `lambda2` whose first nonzero component is positive.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EigenData {
    pub lambda1: i64,
    pub lambda2: i64,
    pub eigenvector: [i64; 2],
}

fn gcd_i64(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Extended gcd: returns `(g, x, y)` with `a*x + b*y = g >= 0`.
fn egcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        return (a.abs(), a.signum(), 0);
    }
    let (g, x, y) = egcd(b, a % b);
    (g, y, x - (a / b) * y)
}

fn primitive(v: [i64; 2]) -> [i64; 2] {
    let g = gcd_i64(v[0], v[1]);
    debug_assert!(g > 0);
    let mut v = [v[0] / g, v[1] / g];
    let lead = if v[0] != 0 { v[0] } else { v[1] };
    if lead < 0 {
        v = [-v[0], -v[1]];
    }
    v
}

/// Returns the integer spectrum of `A`, or `None` when the discriminant is
/// negative or not a perfect square (complex or irrational eigenvalues).
pub fn integer_eigenvalues(a: &IntMat2) -> Option<EigenData> {
    let tr = a.trace() as i128;
    let det = a.det() as i128;
    let disc = tr * tr - 4 * det;
    if disc < 0 {
        return None;
    }
    let s = disc.isqrt();
    if s * s != disc {
        return None;
    }
    // Roots (tr ± s)/2 are both integers iff tr and s have the same parity.
    if (tr + s) % 2 != 0 {
        return None;
    }
    let r1 = ((tr + s) / 2) as i64;
    let r2 = ((tr - s) / 2) as i64;
    let (lambda1, lambda2) = if r1.abs() > r2.abs() || (r1.abs() == r2.abs() && r1 >= r2) {
        (r1, r2)
    } else {
        (r2, r1)
    };

    let m = &a.0;
    let row1 = [m[0][1], lambda2 - m[0][0]];
    let row2 = [lambda2 - m[1][1], m[1][0]];
    let v = if row1 != [0, 0] {
        primitive(row1)
    } else if row2 != [0, 0] {
        primitive(row2)
    } else {
        // A is scalar; every direction is an eigenvector.
        [0, 1]
    };
    debug_assert_eq!(a.mul_vec(v), [lambda2 * v[0], lambda2 * v[1]]);
    Some(EigenData {
        lambda1,
        lambda2,
        eigenvector: v,
    })
}

/// Bézout pair `(p, q)` with `p*v0 + q*v1 = 1`, minimizing `|p|`; on a tie the
/// smaller (more negative) `p` is taken. The tie-break only pins down which of
/// the equally valid unimodular matrices is produced.
fn bezout_min_p(v: [i64; 2]) -> (i64, i64) {
    let (g, p0, q0) = egcd(v[0], v[1]);
    debug_assert_eq!(g, 1, "eigenvector must be primitive");
    if v[1] == 0 {
        return (p0, 0);
    }
    // General solution: p = p0 + t*v1, q = q0 - t*v0.
    let t_near = -(p0 as i128) / (v[1] as i128);
    let mut best: Option<(i64, i64)> = None;
    for dt in -2..=2i128 {
        let t = t_near + dt;
        let p = p0 as i128 + t * v[1] as i128;
        let q = q0 as i128 - t * v[0] as i128;
        let (p, q) = (p as i64, q as i64);
        best = Some(match best {
            None => (p, q),
            Some((bp, bq)) => {
                if p.abs() < bp.abs() || (p.abs() == bp.abs() && p < bp) {
                    (p, q)
                } else {
                    (bp, bq)
                }
            }
        });
    }
    best.unwrap()
}

/// Unimodular change of basis bringing `A` to lower-triangular form.
///
/// Returns `(P, T)` with `det P = 1` and `T = P^{-1} A P` lower triangular
/// with diagonal `(lambda1, lambda2)`. The construction takes `P`'s columns as
/// `(q, -p)` and the `lambda2`-eigenvector `v`, where `p*v0 + q*v1 = 1`; the
/// result is re-verified by exact multiplication.
pub fn canonical_form(a: &IntMat2) -> Result<(IntMat2, IntMat2), IntLinearError> {
    let eig = integer_eigenvalues(a).ok_or(IntLinearError::NoIntegerEigenvalues)?;
    let v = eig.eigenvector;
    let (p, q) = bezout_min_p(v);
    let pmat = IntMat2::new(q, v[0], -p, v[1]);
    debug_assert_eq!(pmat.det(), 1);
    let t = pmat.adjugate().checked_mul(&a.checked_mul(&pmat)?)?;
    assert_eq!(t.0[0][1], 0, "triangularization failed: {t:?}");
    assert_eq!(t.0[0][0], eig.lambda1);
    assert_eq!(t.0[1][1], eig.lambda2);
    Ok((pmat, t))
}

/// A fundamental set of residues of `Z^2 / A Z^2`, in row-major scan order.
/// There are exactly `|det A|` of them; they index the inverse branches of the
/// torus endomorphism induced by any map with linear part `A`.
pub fn coset_representatives(a: &IntMat2) -> Result<Vec<[i64; 2]>, IntLinearError> {
    let det = a.det();
    if det == 0 {
        return Err(IntLinearError::SingularMatrix);
    }
    let d = det.unsigned_abs() as i64;
    let adj = a.adjugate();
    let mut seen = std::collections::BTreeSet::new();
    let mut reps = Vec::new();
    for wx in 0..d {
        for wy in 0..d {
            let img = adj.mul_vec([wx, wy]);
            let key = (img[0].rem_euclid(d), img[1].rem_euclid(d));
            if seen.insert(key) {
                reps.push([wx, wy]);
            }
        }
    }
    debug_assert_eq!(reps.len() as i64, d);
    Ok(reps)
}

// ---------------------------------------------------------------------------
// Cell sets and Blichfeldt's theorem
// ---------------------------------------------------------------------------

/// Axis-aligned rectangle with exact rational corners and positive sides.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct RatRect {
    pub x0: Rat,
    pub x1: Rat,
    pub y0: Rat,
    pub y1: Rat,
}

impl RatRect {
    pub fn new(x0: Rat, x1: Rat, y0: Rat, y1: Rat) -> Result<RatRect, IntLinearError> {
        if x0 >= x1 || y0 >= y1 {
            return Err(IntLinearError::DegenerateRectangle);
        }
        Ok(RatRect { x0, x1, y0, y1 })
    }

    pub fn area(&self) -> Rat {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn contains_open(&self, x: Rat, y: Rat) -> bool {
        self.x0 < x && x < self.x1 && self.y0 < y && y < self.y1
    }

    fn overlaps_interior(&self, other: &RatRect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }
}

/// Finite union of rectangles with pairwise disjoint interiors.
///
/// Disjointness is required so that the cached area equals the Lebesgue
/// measure, which is what Blichfeldt's theorem compares against `k`.
#[derive(Clone, Debug)]
pub struct CellSet {
    rects: Vec<RatRect>,
    area: Rat,
}

impl CellSet {
    pub fn new(rects: Vec<RatRect>) -> Result<CellSet, IntLinearError> {
        for i in 0..rects.len() {
            for j in 0..i {
                if rects[i].overlaps_interior(&rects[j]) {
                    return Err(IntLinearError::OverlappingRectangles);
                }
            }
        }
        let mut area = Rat::ZERO;
        for r in &rects {
            area = area + r.area();
        }
        Ok(CellSet { rects, area })
    }

    pub fn area(&self) -> Rat {
        self.area
    }

    pub fn rects(&self) -> &[RatRect] {
        &self.rects
    }

    pub fn contains_open(&self, x: Rat, y: Rat) -> bool {
        self.rects.iter().any(|r| r.contains_open(x, y))
    }

    /// Axis-aligned bounding box, or `None` for an empty set.
    pub fn bounding_box(&self) -> Option<RatRect> {
        let first = self.rects.first()?;
        let mut bb = *first;
        for r in &self.rects[1..] {
            bb.x0 = bb.x0.min(r.x0);
            bb.y0 = bb.y0.min(r.y0);
            bb.x1 = bb.x1.max(r.x1);
            bb.y1 = bb.y1.max(r.y1);
        }
        Some(bb)
    }
}

/// Outcome of the Blichfeldt search: `k+1` points of the cell set that are
/// pairwise displaced by nonzero integer vectors; `translate + p` is an
/// integer point for every returned `p`.
#[derive(Clone, Debug)]
pub struct BlichfeldtWitness {
    pub translate: (Rat, Rat),
    pub points: Vec<(Rat, Rat)>,
}

struct FoldedPiece {
    rect: RatRect,
    shift: (i128, i128),
}

fn fold_pieces(set: &CellSet) -> Vec<FoldedPiece> {
    let mut pieces = Vec::new();
    for r in set.rects() {
        let ix0 = r.x0.floor();
        let ix1 = r.x1.ceil();
        let iy0 = r.y0.floor();
        let iy1 = r.y1.ceil();
        for ix in ix0..ix1 {
            for iy in iy0..iy1 {
                let px0 = r.x0.max(Rat::from_int(ix));
                let px1 = r.x1.min(Rat::from_int(ix + 1));
                let py0 = r.y0.max(Rat::from_int(iy));
                let py1 = r.y1.min(Rat::from_int(iy + 1));
                if px0 < px1 && py0 < py1 {
                    let shift = (ix, iy);
                    let rect = RatRect {
                        x0: px0 - Rat::from_int(ix),
                        x1: px1 - Rat::from_int(ix),
                        y0: py0 - Rat::from_int(iy),
                        y1: py1 - Rat::from_int(iy),
                    };
                    pieces.push(FoldedPiece { rect, shift });
                }
            }
        }
    }
    pieces
}

/// Constructive Blichfeldt: given `area(B) > k`, produces `k+1` points of `B`
/// that pairwise differ by nonzero integer vectors.
///
/// Every rectangle is folded into `[0,1)^2` with its integer shift recorded;
/// on the arrangement induced by the folded corners, some elementary cell must
/// be covered by at least `k+1` shifts (the fold multiplicity integrates to
/// `area(B)` over a domain of measure at most 1). The returned points are that
/// cell's center translated back by `k+1` of its covering shifts.
pub fn blichfeldt_translate(
    set: &CellSet,
    k: u32,
) -> Result<BlichfeldtWitness, IntLinearError> {
    if !(set.area() > Rat::from_int(k as i128)) {
        return Err(IntLinearError::AreaTooSmall {
            area: set.area(),
            k,
        });
    }
    let pieces = fold_pieces(set);

    let mut xs: Vec<Rat> = Vec::new();
    let mut ys: Vec<Rat> = Vec::new();
    for p in &pieces {
        xs.push(p.rect.x0);
        xs.push(p.rect.x1);
        ys.push(p.rect.y0);
        ys.push(p.rect.y1);
    }
    xs.sort();
    xs.dedup();
    ys.sort();
    ys.dedup();
    let nx = xs.len() - 1;
    let ny = ys.len() - 1;

    // Two pieces with the same shift come from disjoint rectangles and stay
    // disjoint after folding, so per-cell piece counts equal the number of
    // distinct shifts covering the cell.
    let idx = |v: &[Rat], r: Rat| v.binary_search(&r).expect("breakpoint must be present");
    let mut diff = vec![0i64; (nx + 1) * (ny + 1)];
    for p in &pieces {
        let x0 = idx(&xs, p.rect.x0);
        let x1 = idx(&xs, p.rect.x1);
        let y0 = idx(&ys, p.rect.y0);
        let y1 = idx(&ys, p.rect.y1);
        diff[x0 * (ny + 1) + y0] += 1;
        diff[x1 * (ny + 1) + y0] -= 1;
        diff[x0 * (ny + 1) + y1] -= 1;
        diff[x1 * (ny + 1) + y1] += 1;
    }
    let mut best: Option<(usize, usize)> = None;
    let mut counts = vec![0i64; ny];
    'scan: for i in 0..nx {
        let mut run = 0i64;
        for j in 0..ny {
            run += diff[i * (ny + 1) + j];
            counts[j] += run;
            if counts[j] > k as i64 {
                best = Some((i, j));
                break 'scan;
            }
        }
    }
    let (ci, cj) = best.unwrap_or_else(|| {
        // Unreachable for valid (interior-disjoint) cell sets with area > k.
        panic!("Blichfeldt arrangement search exhausted despite area > k")
    });

    let half = Rat::new(1, 2);
    let cx = (xs[ci] + xs[ci + 1]) * half;
    let cy = (ys[cj] + ys[cj + 1]) * half;
    let mut shifts: Vec<(i128, i128)> = pieces
        .iter()
        .filter(|p| p.rect.contains_open(cx, cy))
        .map(|p| p.shift)
        .collect();
    shifts.sort();
    shifts.dedup();
    assert!(shifts.len() > k as usize);
    let points: Vec<(Rat, Rat)> = shifts[..k as usize + 1]
        .iter()
        .map(|&(sx, sy)| (cx + Rat::from_int(sx), cy + Rat::from_int(sy)))
        .collect();
    Ok(BlichfeldtWitness {
        translate: (-cx, -cy),
        points,
    })
}

/// Row/column coincidences among at least `l+1` distinct integer points in
/// the box `{1..l}^2`: two points sharing the second coordinate (their
/// difference is a nonzero multiple of `e1`) and two sharing the first.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct PigeonholePairs {
    /// Same second coordinate; difference parallel to `e1`.
    pub row_pair: [(i64, i64); 2],
    /// Same first coordinate; difference parallel to `e2`.
    pub col_pair: [(i64, i64); 2],
}

pub fn pigeonhole_pairs(
    points: &[(i64, i64)],
    l: i64,
) -> Result<PigeonholePairs, IntLinearError> {
    if l < 1 {
        return Err(IntLinearError::PreconditionViolated("box side must be >= 1"));
    }
    if (points.len() as i64) < l + 1 {
        return Err(IntLinearError::PreconditionViolated(
            "need at least l+1 points",
        ));
    }
    let mut sorted = points.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != points.len() {
        return Err(IntLinearError::PreconditionViolated("points must be distinct"));
    }
    if sorted
        .iter()
        .any(|&(x, y)| x < 1 || x > l || y < 1 || y > l)
    {
        return Err(IntLinearError::PreconditionViolated(
            "points must lie in {1..l}^2",
        ));
    }

    let mut row_pair = None;
    for y in 1..=l {
        let mut on_row = sorted.iter().filter(|&&(_, py)| py == y);
        if let (Some(&a), Some(&b)) = (on_row.next(), on_row.next()) {
            row_pair = Some([a, b]);
            break;
        }
    }
    let mut col_pair = None;
    for x in 1..=l {
        let mut on_col = sorted.iter().filter(|&&(px, _)| px == x);
        if let (Some(&a), Some(&b)) = (on_col.next(), on_col.next()) {
            col_pair = Some([a, b]);
            break;
        }
    }
    // With l+1 distinct points in an l-row box both coincidences must exist.
    Ok(PigeonholePairs {
        row_pair: row_pair.expect("pigeonhole: no row coincidence"),
        col_pair: col_pair.expect("pigeonhole: no column coincidence"),
    })
}
