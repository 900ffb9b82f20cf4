//! End-to-end run on a map whose linear part is not diagonal:
//! `A = [[4,1],[2,3]]` (eigenvalues 5 and 2, contracting-relative
//! eigenvector `(1,-2)`) plus a small displacement. Exercises coset
//! enumeration, power norms, cone certification and the searches away from
//! the axis-aligned special case.

use torusendo_core::ph_certifier::{
    certify_cone_invariance, certify_strong_volume_expansion, ConeSpec, GridSpec, Verdict,
};
use torusendo_core::semiconjugacy::{
    default_fiber_depth, dichotomy_test, kappa_bound, semiconj_defect, DichotomyVerdict,
    FiberSearchParams,
};
use torusendo_core::transitivity::{
    covering_witness, doubly_essential_witness, CoveringParams, EssentialSearchParams,
    RegionCover, RegionShape,
};
use torusendo_core::{
    map_model, mat, FourierTerm, IntMat2, PeriodicField, TorusEndomorphism,
};

fn sheared() -> TorusEndomorphism {
    let disp = PeriodicField::new(
        vec![FourierTerm::sin(0.02, 1, 0)],
        vec![FourierTerm::cos(0.015, 0, 1)],
    )
    .unwrap();
    TorusEndomorphism::new(IntMat2::new(4, 1, 2, 3), disp, "sheared").unwrap()
}

#[test]
fn linear_part_recovered() {
    let f = sheared();
    let est = map_model::extract_linear_part(|x| f.eval_lift(x)).unwrap();
    assert_eq!(est.matrix, IntMat2::new(4, 1, 2, 3));
}

#[test]
fn preimages_follow_the_determinant() {
    let f = sheared();
    let pre = f.preimages([0.37, 0.81]).unwrap();
    assert_eq!(pre.len(), 10);
    for p in &pre {
        assert!(map_model::torus_dist_inf(f.eval_torus(*p), [0.37, 0.81]) < 1e-9);
    }
}

#[test]
fn cone_certificate_depends_on_the_slope() {
    // Slope 1.5 keeps the expanding eigendirection (1,1) well inside while
    // excluding the (1,-2) eigendirection; slope 2 pulls that contracting
    // direction into the cone and the condition genuinely fails.
    let f = sheared();
    let good = certify_cone_invariance(&f, &ConeSpec::horizontal(1.5), &GridSpec::new(256, 1, 1.4));
    assert!(good.is_certified(), "{good:?}");
    assert!(good.margin > 0.2);
    let bad = certify_cone_invariance(&f, &ConeSpec::horizontal(2.0), &GridSpec::new(64, 1, 1.4));
    assert!(matches!(bad.verdict, Verdict::Failed { .. }), "{bad:?}");
}

#[test]
fn volume_expansion_certified() {
    let f = sheared();
    let cert = certify_strong_volume_expansion(&f, 256, 1).unwrap();
    assert!(cert.is_certified());
    // det A = 10 against threshold 5, bent slightly by the displacement.
    assert!(cert.margin > 4.0, "margin {}", cert.margin);
}

#[test]
fn semiconjugacy_constants_and_defect() {
    let f = sheared();
    let params = kappa_bound(&f).unwrap();
    assert!((params.kappa0 - 0.02).abs() < 1e-12);
    assert!(params.kappa > params.kappa0 && params.kappa < 0.05);
    let tol = 1e-8;
    let defect = semiconj_defect(&f, 64, tol).unwrap();
    // ‖A‖_inf = 5, so the analytic budget is 6 tol.
    assert!(defect <= 6.0 * tol, "defect {defect}");
}

#[test]
fn semiconjugacy_stays_kappa_close_to_identity() {
    let f = sheared();
    let params = kappa_bound(&f).unwrap();
    let h = torusendo_core::semiconjugacy::Semiconjugacy::new(&f).unwrap();
    for i in 0..200 {
        let x = [(i as f64 * 0.613) % 1.0, (i as f64 * 0.287) % 1.0];
        let hx = h.eval(x, 1e-10);
        assert!(mat::dist_inf(hx, x) <= params.kappa + 1e-9);
    }
}

#[test]
fn dichotomy_sees_only_trivial_fibers() {
    let f = sheared();
    let kappa = kappa_bound(&f).unwrap().kappa;
    let depth = default_fiber_depth(f.linear_part(), 0.5, 0.01);
    let v = dichotomy_test(
        &f,
        4,
        (3.0 * kappa).max(0.05),
        depth,
        0.01,
        &FiberSearchParams::default(),
    )
    .unwrap();
    assert!(
        matches!(v, DichotomyVerdict::ConjugacyEvidence { .. }),
        "{v:?}"
    );
}

#[test]
fn transitivity_witnesses_found_quickly() {
    let f = sheared();
    let ball = RegionShape::Ball {
        center: [0.4, 0.6],
        radius: 0.06,
    };
    let region = RegionCover::inner(ball, 5, 8);
    let report =
        doubly_essential_witness(&f, &region, 15, &EssentialSearchParams::default()).unwrap();
    assert!(report.iterate <= 5, "found at n = {}", report.iterate);
    assert!(report.e1.residual <= 1e-8 && report.e2.residual <= 1e-8);

    let n = covering_witness(&f, &ball, 16, 25, &CoveringParams::default()).unwrap();
    assert!(n <= 10, "covered at n = {n}");
}
