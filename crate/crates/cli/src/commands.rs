//! One function per subcommand. Each runs the underlying operation, writes a
//! report (JSON + text) and optional CSV/SVG artifacts, and returns the exit
//! code: 0 certified/found, 2 failed/not-found, 3 inconclusive.

use crate::plot::Svg;
use crate::report::{digest, write_csv, RunReport};
use crate::spec_file::{self, SpecError};
use serde_json::json;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;
use thiserror::Error;
use torusendo_core::directions::{
    center_direction, special_ph_test, unstable_direction, DirectionError,
};
use torusendo_core::gallery::{self, GalleryError};
use torusendo_core::integer_linear::{canonical_form, integer_eigenvalues, IntLinearError, IntMat2};
use torusendo_core::map_model::MapError;
use torusendo_core::ph_certifier::{
    certify_cone_invariance, certify_cone_invariance_auto, certify_strong_volume_expansion,
    certify_strong_volume_expansion_auto, Certificate, CertifierError, ConeSpec, GridSpec,
    Verdict,
};
use torusendo_core::rng::SplitMix64;
use torusendo_core::semiconjugacy::{
    default_fiber_depth, dichotomy_test, estimate_fiber, kappa_bound, semiconj_defect,
    DichotomyVerdict, FiberSearchParams, SemiconjError,
};
use torusendo_core::transitivity::{
    covering_witness, doubly_essential_witness, essential_iterate_bound, CoveringParams,
    EssentialSearchParams, RegionCover, RegionShape, TransitivityError,
};
use torusendo_core::{Mat2, TorusEndomorphism};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_FOUND: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Gallery(#[from] GalleryError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Certifier(#[from] CertifierError),
    #[error(transparent)]
    IntLinear(#[from] IntLinearError),
    #[error(transparent)]
    Semiconj(#[from] SemiconjError),
    #[error(transparent)]
    Transitivity(#[from] TransitivityError),
    #[error(transparent)]
    Direction(#[from] DirectionError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug)]
pub enum MapSource {
    Path(PathBuf),
    Gallery(String),
    Matrix(IntMat2),
}

/// Flags shared by every subcommand.
#[derive(Clone, Debug)]
pub struct Common {
    pub source: MapSource,
    pub eps: f64,
    pub out: PathBuf,
    pub seed: u64,
    pub svg: bool,
}

impl Common {
    pub fn load_map(&self) -> Result<(TorusEndomorphism, String), CliError> {
        let f = match &self.source {
            MapSource::Path(p) => {
                let mut overrides = BTreeMap::new();
                overrides.insert("eps".to_string(), self.eps);
                spec_file::parse_spec_file(p, &overrides)?
            }
            MapSource::Gallery(name) => gallery::by_name(name, self.eps)?,
            MapSource::Matrix(a) => gallery::linear(*a),
        };
        let dig = map_digest(&f);
        Ok((f, dig))
    }
}

/// Digest of the canonical serialization minus the label line, so the same
/// map carries the same digest whatever it is called.
pub fn map_digest(f: &TorusEndomorphism) -> String {
    let body: String = spec_file::serialize_map(f)
        .lines()
        .filter(|l| !l.starts_with("name = "))
        .map(|l| format!("{l}\n"))
        .collect();
    digest(body.as_bytes())
}

fn verdict_string(v: &Verdict) -> &'static str {
    match v {
        Verdict::Certified => "certified",
        Verdict::Failed { .. } => "failed",
        Verdict::Inconclusive { .. } => "inconclusive",
    }
}

fn certificate_exit(c: &Certificate) -> i32 {
    match c.verdict {
        Verdict::Certified => EXIT_OK,
        Verdict::Failed { .. } => EXIT_NOT_FOUND,
        Verdict::Inconclusive { .. } => EXIT_INCONCLUSIVE,
    }
}

fn fill_certificate(report: &mut RunReport, cert: &Certificate) {
    report.verdict = verdict_string(&cert.verdict).to_string();
    report.margin = Some(cert.margin);
    report
        .detail("condition", &cert.condition)
        .detail("grid", cert.grid_m)
        .detail("slack", cert.slack)
        .detail("min_raw", cert.min_raw);
    match &cert.verdict {
        Verdict::Failed { witness } => {
            report.witness_point(*witness);
        }
        Verdict::Inconclusive { worst_cell } => {
            report.witness_point(*worst_cell);
        }
        Verdict::Certified => {}
    }
}

pub struct ConeArgs {
    pub slope: f64,
    pub vertical: bool,
    pub ell: u32,
    pub lambda: f64,
    pub grid: u32,
    pub auto: bool,
}

pub fn certify_ph(common: &Common, args: &ConeArgs) -> Result<i32, CliError> {
    let start = Instant::now();
    let (f, dig) = common.load_map()?;
    let cone = if args.vertical {
        ConeSpec::vertical(args.slope)
    } else {
        ConeSpec::horizontal(args.slope)
    };
    let grid = GridSpec::new(args.grid, args.ell, args.lambda);
    let cert = if args.auto {
        certify_cone_invariance_auto(&f, &cone, &grid)
    } else {
        certify_cone_invariance(&f, &cone, &grid)
    };
    let mut report = RunReport::new("certify-ph", dig, common.seed);
    report
        .param("map", f.name())
        .param("slope", args.slope)
        .param("orientation", if args.vertical { "vertical" } else { "horizontal" })
        .param("ell", args.ell)
        .param("lambda", args.lambda)
        .param("grid", args.grid)
        .param("auto", args.auto);
    fill_certificate(&mut report, &cert);
    report.write(&common.out, start.elapsed())?;
    println!("{}", report.to_text(start.elapsed()));
    Ok(certificate_exit(&cert))
}

pub struct SveArgs {
    pub grid: u32,
    pub iterate: u32,
    pub auto: bool,
}

pub fn certify_sve(common: &Common, args: &SveArgs) -> Result<i32, CliError> {
    let start = Instant::now();
    let (f, dig) = common.load_map()?;
    let cert = if args.auto {
        certify_strong_volume_expansion_auto(&f, args.grid, args.iterate)?
    } else {
        certify_strong_volume_expansion(&f, args.grid, args.iterate)?
    };
    let mut report = RunReport::new("certify-sve", dig, common.seed);
    report
        .param("map", f.name())
        .param("grid", args.grid)
        .param("iterate", args.iterate)
        .param("auto", args.auto);
    fill_certificate(&mut report, &cert);
    report.write(&common.out, start.elapsed())?;
    println!("{}", report.to_text(start.elapsed()));
    Ok(certificate_exit(&cert))
}

pub fn canonical_form_cmd(common: &Common, matrix: &IntMat2) -> Result<i32, CliError> {
    let start = Instant::now();
    let (p, t) = canonical_form(matrix)?;
    let eig = integer_eigenvalues(matrix).expect("canonical_form verified the spectrum");
    let mut report = RunReport::new(
        "canonical-form",
        digest(format!("{matrix:?}").as_bytes()),
        common.seed,
    );
    report.verdict = "computed".to_string();
    report
        .param("matrix", matrix.0)
        .detail("p", p.0)
        .detail("t", t.0)
        .detail("lambda1", eig.lambda1)
        .detail("lambda2", eig.lambda2)
        .detail("eigenvector", eig.eigenvector)
        .detail("det_p", p.det());
    report.write(&common.out, start.elapsed())?;
    println!("A = {matrix:?}");
    println!("P = {p:?}   (det P = {})", p.det());
    println!("T = P^-1 A P = {t:?}");
    Ok(EXIT_OK)
}

pub struct SemiconjArgs {
    pub grid: u32,
    pub tol: f64,
}

pub fn semiconj(common: &Common, args: &SemiconjArgs) -> Result<i32, CliError> {
    let start = Instant::now();
    let (f, dig) = common.load_map()?;
    let params = kappa_bound(&f)?;
    let defect = semiconj_defect(&f, args.grid, args.tol)?;
    let a_norm = Mat2::from_int(f.linear_part()).norm_inf();
    let budget = (a_norm + 1.0) * args.tol;
    let ok = defect <= budget;
    let mut report = RunReport::new("semiconj", dig, common.seed);
    report
        .param("map", f.name())
        .param("grid", args.grid)
        .param("tol", args.tol);
    report.verdict = if ok { "defect-bounded" } else { "defect-exceeded" }.to_string();
    report.margin = Some(budget - defect);
    report
        .detail("kappa0", params.kappa0)
        .detail("kappa", params.kappa)
        .detail("norm_series_bound", params.norm_series_bound)
        .detail("defect", defect)
        .detail("defect_budget", budget);
    report.write(&common.out, start.elapsed())?;
    println!("{}", report.to_text(start.elapsed()));
    Ok(if ok { EXIT_OK } else { EXIT_NOT_FOUND })
}

pub struct FiberArgs {
    pub grid: u32,
    pub r_mult: f64,
    pub depth: Option<u32>,
    pub delta: f64,
    pub search_radius: f64,
    pub samples: u32,
}

fn fiber_radius(f: &TorusEndomorphism, r_mult: f64) -> Result<f64, CliError> {
    let kappa = kappa_bound(f)?.kappa;
    // For linear maps kappa = 0 and any positive radius is admissible.
    Ok((r_mult * kappa).max(0.05))
}

pub fn fibers(common: &Common, args: &FiberArgs) -> Result<i32, CliError> {
    let start = Instant::now();
    let (f, dig) = common.load_map()?;
    let r = fiber_radius(&f, args.r_mult)?;
    let depth = args.depth.unwrap_or_else(|| {
        default_fiber_depth(f.linear_part(), 2.0 * args.search_radius, args.delta)
    });
    let search = FiberSearchParams {
        search_radius: args.search_radius,
        samples: args.samples,
    };
    let m = args.grid;
    let mut rows = Vec::new();
    let mut max_diameter = 0.0f64;
    let mut svg = Svg::unit_square(512.0);
    for i in 0..m {
        for j in 0..m {
            let p = [i as f64 / m as f64, j as f64 / m as f64];
            let est = estimate_fiber(&f, p, r, depth, &search)?;
            let dir = est.direction.unwrap_or([0.0, 0.0]);
            rows.push(format!(
                "{},{},{},{},{}",
                p[0], p[1], est.diameter, dir[0], dir[1]
            ));
            max_diameter = max_diameter.max(est.diameter);
            if common.svg && est.diameter > 0.0 {
                let half = est.diameter / 2.0;
                let a = [p[0] - dir[0] * half, p[1] - dir[1] * half];
                let b = [p[0] + dir[0] * half, p[1] + dir[1] * half];
                svg.segment(a, b, "crimson");
            } else if common.svg {
                svg.point(p, 1.5, "steelblue");
            }
        }
    }
    std::fs::create_dir_all(&common.out)?;
    write_csv(
        &common.out.join("fibers.csv"),
        "x,y,diameter,dir_x,dir_y",
        rows,
    )?;
    if common.svg {
        std::fs::write(common.out.join("fibers.svg"), svg.finish())?;
    }
    let mut report = RunReport::new("fibers", dig, common.seed);
    report
        .param("map", f.name())
        .param("grid", m)
        .param("radius", r)
        .param("depth", depth)
        .param("search_radius", args.search_radius)
        .param("samples", args.samples);
    report.verdict = "computed".to_string();
    report.detail("max_diameter", max_diameter);
    report.write(&common.out, start.elapsed())?;
    println!("{}", report.to_text(start.elapsed()));
    Ok(EXIT_OK)
}

pub fn dichotomy(common: &Common, args: &FiberArgs) -> Result<i32, CliError> {
    let start = Instant::now();
    let (f, dig) = common.load_map()?;
    let r = fiber_radius(&f, args.r_mult)?;
    let depth = args.depth.unwrap_or_else(|| {
        default_fiber_depth(f.linear_part(), 2.0 * args.search_radius, args.delta)
    });
    let search = FiberSearchParams {
        search_radius: args.search_radius,
        samples: args.samples,
    };
    let verdict = dichotomy_test(&f, args.grid, r, depth, args.delta, &search)?;
    let mut report = RunReport::new("dichotomy", dig, common.seed);
    report
        .param("map", f.name())
        .param("grid", args.grid)
        .param("radius", r)
        .param("depth", depth)
        .param("delta", args.delta);
    let code = match &verdict {
        DichotomyVerdict::ConjugacyEvidence { max_diameter, .. } => {
            report.verdict = "conjugacy-evidence".to_string();
            report.margin = Some(args.delta - max_diameter);
            report.detail("max_diameter", *max_diameter);
            EXIT_OK
        }
        DichotomyVerdict::AnnulusCandidate {
            point,
            diameter,
            direction,
        } => {
            report.verdict = "annulus-candidate".to_string();
            report.margin = Some(diameter - args.delta);
            report
                .detail("diameter", *diameter)
                .detail("direction", json!([direction[0], direction[1]]));
            report.witness_point(*point);
            EXIT_NOT_FOUND
        }
    };
    report.write(&common.out, start.elapsed())?;
    println!("{}", report.to_text(start.elapsed()));
    Ok(code)
}

pub struct RegionArgs {
    pub shape: RegionShape,
    pub n_max: u32,
    pub level: u8,
    pub per_cell: u32,
}

pub fn parse_region(s: &str) -> Result<RegionShape, CliError> {
    let (kind, rest) = s
        .split_once(':')
        .ok_or_else(|| CliError::Usage(format!("bad region `{s}`; see --help")))?;
    let nums: Vec<f64> = rest
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("bad region numbers in `{s}`")))?;
    match (kind, nums.as_slice()) {
        ("ball", [cx, cy, r]) if *r > 0.0 => Ok(RegionShape::Ball {
            center: [*cx, *cy],
            radius: *r,
        }),
        ("rect", [x0, y0, x1, y1]) if x0 < x1 && y0 < y1 => Ok(RegionShape::Rect {
            x0: *x0,
            y0: *y0,
            x1: *x1,
            y1: *y1,
        }),
        ("annulus", [hw]) if *hw > 0.0 => Ok(RegionShape::Rect {
            x0: 0.0,
            y0: -*hw,
            x1: 1.0,
            y1: *hw,
        }),
        _ => Err(CliError::Usage(format!("bad region `{s}`; see --help"))),
    }
}

pub fn essential(common: &Common, args: &RegionArgs) -> Result<i32, CliError> {
    let start = Instant::now();
    let (f, dig) = common.load_map()?;
    let search = EssentialSearchParams::default();
    let mut report = RunReport::new("essential", dig, common.seed);
    report
        .param("map", f.name())
        .param("region", format!("{:?}", args.shape))
        .param("n_max", args.n_max);
    // Sampling density only affects completeness of the candidate scan, so
    // double it a couple of times before giving up.
    let mut per_cell = args.per_cell;
    let mut region = RegionCover::inner(args.shape, args.level, per_cell);
    let mut outcome = doubly_essential_witness(&f, &region, args.n_max, &search);
    for _ in 0..2 {
        if !matches!(outcome, Err(TransitivityError::NotFoundWithin { .. })) {
            break;
        }
        per_cell *= 2;
        region = RegionCover::inner(args.shape, args.level, per_cell);
        outcome = doubly_essential_witness(&f, &region, args.n_max, &search);
    }
    let code = match outcome {
        Ok(found) => {
            report.verdict = "found".to_string();
            report
                .detail("iterate", found.iterate)
                .detail("route", format!("{:?}", found.route))
                .detail("e1_multiple", found.e1.multiple)
                .detail("e2_multiple", found.e2.multiple)
                .detail("e1_residual", found.e1.residual)
                .detail("e2_residual", found.e2.residual);
            for p in found.e1.domain.iter().chain(found.e2.domain.iter()) {
                report.witness_point(*p);
            }
            // Full witness set at the found iterate, with lift bookkeeping.
            let iterated = torusendo_core::transitivity::iterate_region(
                &f,
                &region,
                found.iterate,
                &Default::default(),
            )?;
            if let Some(ws) = iterated.witnesses() {
                std::fs::create_dir_all(&common.out)?;
                write_csv(
                    &common.out.join("witnesses.csv"),
                    "n,x,y,lift_i,lift_j",
                    ws.iter().map(|w| {
                        format!(
                            "{},{},{},{},{}",
                            found.iterate,
                            w.image.frac[0],
                            w.image.frac[1],
                            w.image.whole[0],
                            w.image.whole[1]
                        )
                    }),
                )?;
            }
            // Sufficient iterate bound from the certified constants, when
            // they exist for this map.
            if let (Ok(params), Some(eig)) =
                (kappa_bound(&f), integer_eigenvalues(f.linear_part()))
            {
                let area = match args.shape {
                    RegionShape::Ball { radius, .. } => std::f64::consts::PI * radius * radius,
                    RegionShape::Rect { x0, y0, x1, y1 } => (x1 - x0) * (y1 - y0),
                };
                let lambda_vol = certify_strong_volume_expansion(&f, 256, 1)
                    .ok()
                    .filter(|c| c.is_certified())
                    .map(|c| eig.lambda1.abs() as f64 + c.margin);
                if let Some(lv) = lambda_vol {
                    if let Ok(bound) =
                        essential_iterate_bound(params.kappa, area, f.linear_part(), lv)
                    {
                        report
                            .detail("sufficient_iterate", bound.n)
                            .detail("sufficient_diameter_bound", bound.diameter_bound)
                            .detail("sufficient_area_bound", bound.area_bound);
                    }
                }
            }
            EXIT_OK
        }
        Err(TransitivityError::NotFoundWithin { n_max }) => {
            report.verdict = "not-found".to_string();
            report.detail("n_max", n_max);
            EXIT_NOT_FOUND
        }
        Err(e) => return Err(e.into()),
    };
    report.write(&common.out, start.elapsed())?;
    println!("{}", report.to_text(start.elapsed()));
    Ok(code)
}

pub struct CoveringArgs {
    pub shape: RegionShape,
    pub resolution: u32,
    pub n_max: u32,
}

pub fn covering(common: &Common, args: &CoveringArgs) -> Result<i32, CliError> {
    let start = Instant::now();
    let (f, dig) = common.load_map()?;
    let mut report = RunReport::new("covering", dig, common.seed);
    report
        .param("map", f.name())
        .param("region", format!("{:?}", args.shape))
        .param("resolution", args.resolution)
        .param("n_max", args.n_max);
    let code = match covering_witness(
        &f,
        &args.shape,
        args.resolution,
        args.n_max,
        &CoveringParams::default(),
    ) {
        Ok(n) => {
            report.verdict = "found".to_string();
            report.detail("iterate", n);
            EXIT_OK
        }
        Err(TransitivityError::NotFoundWithin { n_max }) => {
            report.verdict = "not-found".to_string();
            report.detail("n_max", n_max);
            EXIT_NOT_FOUND
        }
        Err(e) => return Err(e.into()),
    };
    report.write(&common.out, start.elapsed())?;
    println!("{}", report.to_text(start.elapsed()));
    Ok(code)
}

pub struct DirectionsArgs {
    pub grid: u32,
    pub depth: u32,
    pub trials: u32,
    pub slope: f64,
}

pub fn directions_cmd(common: &Common, args: &DirectionsArgs) -> Result<i32, CliError> {
    let start = Instant::now();
    let (f, dig) = common.load_map()?;
    let cone = ConeSpec::horizontal(args.slope);
    let m = args.grid;
    let mut unstable_rows = Vec::new();
    let mut center_rows = Vec::new();
    let mut skipped = 0u32;
    let mut rng = SplitMix64::new(common.seed);
    let mut svg = Svg::unit_square(512.0);
    for i in 0..m {
        for j in 0..m {
            let p = [i as f64 / m as f64, j as f64 / m as f64];
            let choices: Vec<usize> =
                (0..args.depth).map(|_| rng.next_u64() as usize).collect();
            match unstable_direction(&f, &cone, p, &choices, args.depth) {
                Ok(probe) => {
                    unstable_rows.push(format!(
                        "{},{},{},{},{}",
                        p[0], p[1], probe.direction[0], probe.direction[1], probe.width
                    ));
                    if common.svg {
                        let half = 0.4 / m as f64;
                        svg.segment(
                            [p[0] - probe.direction[0] * half, p[1] - probe.direction[1] * half],
                            [p[0] + probe.direction[0] * half, p[1] + probe.direction[1] * half],
                            "black",
                        );
                    }
                }
                Err(_) => skipped += 1,
            }
            match center_direction(&f, &cone, p, args.depth) {
                Ok(probe) => center_rows.push(format!(
                    "{},{},{},{},{}",
                    p[0], p[1], probe.direction[0], probe.direction[1], probe.steps_verified
                )),
                Err(_) => skipped += 1,
            }
        }
    }
    std::fs::create_dir_all(&common.out)?;
    write_csv(
        &common.out.join("directions.csv"),
        "x,y,dir_x,dir_y,width",
        unstable_rows,
    )?;
    write_csv(
        &common.out.join("center_directions.csv"),
        "x,y,dir_x,dir_y,steps_verified",
        center_rows,
    )?;
    if common.svg {
        std::fs::write(common.out.join("directions.svg"), svg.finish())?;
    }
    let special = special_ph_test(&f, &cone, [0.3, 0.3], args.depth, args.trials, common.seed)?;
    let mut report = RunReport::new("directions", dig, common.seed);
    report
        .param("map", f.name())
        .param("grid", m)
        .param("depth", args.depth)
        .param("trials", args.trials)
        .param("slope", args.slope);
    report.verdict = "computed".to_string();
    report
        .detail("skipped_points", skipped)
        .detail("special_max_pairwise_angle", special.max_pairwise_angle)
        .detail("special_max_width", special.max_width)
        .detail("special_deviation_bound", special.deviation_bound);
    report.write(&common.out, start.elapsed())?;
    println!("{}", report.to_text(start.elapsed()));
    Ok(EXIT_OK)
}

pub fn gallery_cmd(common: &Common, name: &str) -> Result<i32, CliError> {
    let start = Instant::now();
    let template = match name {
        "paper_example" => Some(include_str!("../maps/paper_example.map")),
        "product_example" => Some(include_str!("../maps/product_example.map")),
        "linear" => Some(include_str!("../maps/linear_5_2.map")),
        _ => None,
    };
    let f = gallery::by_name(name, common.eps)?;
    std::fs::create_dir_all(&common.out)?;
    let path = common.out.join(format!("{name}.map"));
    match template {
        Some(t) => std::fs::write(&path, t)?,
        None => std::fs::write(&path, spec_file::serialize_map(&f))?,
    }
    let mut report = RunReport::new("gallery", map_digest(&f), common.seed);
    report.param("name", name).param("eps", common.eps);
    report.verdict = "written".to_string();
    report
        .detail("path", path.display().to_string())
        .detail("linear_part", f.linear_part().0)
        .detail("sup_displacement", f.sup_displacement_bound());
    if let Ok(params) = kappa_bound(&f) {
        report.detail("kappa", params.kappa);
    }
    report.write(&common.out, start.elapsed())?;
    println!("{}", report.to_text(start.elapsed()));
    Ok(EXIT_OK)
}
