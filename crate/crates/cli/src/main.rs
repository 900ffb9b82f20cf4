//! torusendo - certification and transitivity toolkit for torus
//! endomorphisms with trigonometric-polynomial displacement.

mod commands;
mod plot;
mod report;
mod spec_file;

use commands::*;
use std::path::PathBuf;
use torusendo_core::integer_linear::IntMat2;

fn usage() -> &'static str {
    "\
torusendo - validated numerics for torus endomorphisms

USAGE:
  torusendo <SUBCOMMAND> [MAP] [OPTIONS]

MAP SELECTION (one of):
  --map PATH           map spec file (grammar below)
  --gallery NAME       built-in map: paper_example | product_example | linear
  --matrix a,b,c,d     linear endomorphism with rows (a b; c d)
  (default: --gallery paper_example)

COMMON OPTIONS:
  --eps X              parameter substituted into coefficient expressions
                       and into gallery maps (default 0.1)
  --out DIR            output directory for reports/CSV/SVG (default out)
  --seed N             seed recorded in reports and used for random branch
                       choices (default 0)
  --threads N          cap worker threads (or env TORUSENDO_THREADS)
  --svg                also emit SVG plots where available

SUBCOMMANDS:
  certify-ph           certify cone-field invariance + expansion
    --slope S          cone slope (default 1)
    --vertical         use the vertical cone (default horizontal)
    --ell L            iterate of the cone condition (default 1)
    --lambda X         expansion constant (default 2*sqrt(2))
    --grid M           starting grid resolution (default 512)
    --no-auto          disable grid auto-doubling (cap 8192)
  certify-sve          certify |det Df^n| > |lambda_1|^n everywhere
    --grid M           grid resolution (default 512)
    --iterate N        the iterate n (default 1)
    --no-auto          disable grid auto-doubling
  canonical-form       unimodular triangularization of an integer matrix
    --matrix a,b,c,d   required
  semiconj             kappa bound and conjugacy-equation defect
    --grid M           defect grid (default 128)
    --tol X            evaluation tolerance (default 1e-8)
  fibers               fiber diameter estimates over a grid -> fibers.csv
    --grid M           base-point grid (default 8)
    --r-mult X         fiber radius = max(X * kappa, 0.05) (default 3)
    --depth N          orbit depth (default: auto from delta)
    --delta X          triviality threshold (default 0.01)
    --search-radius X  candidate search radius (default 0.25)
    --samples N        samples per cross arm (default 40)
  dichotomy            conjugacy-evidence vs annulus-candidate verdict
    (same options as fibers)
  essential            first doubly-essential iterate of a region
    --region R         ball:cx,cy,r | rect:x0,y0,x1,y1 | annulus:halfwidth
                       (default ball:0.3,0.3,0.05)
    --nmax N           iterate cap (default 20)
  covering             first iterate whose samples hit every grid cell
    --region R         as above
    --res M            torus grid resolution (default 32)
    --nmax N           iterate cap (default 25)
  directions           unstable/center direction fields -> directions.csv,
                       center_directions.csv; runs the pre-orbit
                       independence probe
    --grid M           probe grid (default 8)
    --depth N          probe depth (default 10)
    --trials N         random pre-orbits for the independence probe (default 6)
    --slope S          cone slope (default 1)
  gallery NAME         write the named gallery map spec into --out

EXIT CODES:
  0 certified / found / computed      2 failed / not-found / annulus-candidate
  3 inconclusive (refine the grid)    1 error (bad input, precondition)

MAP SPEC GRAMMAR (UTF-8 text, # comments):
  name = LABEL
  param NAME = VALUE
  matrix = a b ; c d
  term <coord 0|1> <sin|cos> <k1> <k2> <coeff-expr>
  coeff-expr: numbers, pi, declared params, + - * / and parentheses.
  A term contributes coeff*kind(2*pi*(k1*x + k2*y)) to the coordinate.

CSV SCHEMAS:
  fibers.csv              x,y,diameter,dir_x,dir_y
  directions.csv          x,y,dir_x,dir_y,width
  center_directions.csv   x,y,dir_x,dir_y,steps_verified
  (essential/covering witnesses are listed in the JSON reports)
"
}

struct Args {
    positional: Vec<String>,
    flags: std::collections::BTreeMap<String, String>,
    switches: std::collections::BTreeSet<String>,
}

const SWITCHES: &[&str] = &["vertical", "no-auto", "svg", "help"];

fn parse_args(argv: &[String]) -> Result<Args, CliError> {
    let mut args = Args {
        positional: Vec::new(),
        flags: Default::default(),
        switches: Default::default(),
    };
    let mut it = argv.iter().peekable();
    while let Some(a) = it.next() {
        if let Some(name) = a.strip_prefix("--") {
            if SWITCHES.contains(&name) {
                args.switches.insert(name.to_string());
            } else {
                let value = it.next().ok_or_else(|| {
                    CliError::Usage(format!("flag --{name} needs a value"))
                })?;
                args.flags.insert(name.to_string(), value.clone());
            }
        } else {
            args.positional.push(a.clone());
        }
    }
    Ok(args)
}

impl Args {
    fn get<T: std::str::FromStr>(&self, name: &str, default: T) -> Result<T, CliError> {
        match self.flags.get(name) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CliError::Usage(format!("invalid value for --{name}: `{v}`"))),
        }
    }

    fn get_opt<T: std::str::FromStr>(&self, name: &str) -> Result<Option<T>, CliError> {
        match self.flags.get(name) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("invalid value for --{name}: `{v}`"))),
        }
    }
}

fn require(cond: bool, msg: &str) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Usage(msg.to_string()))
    }
}

fn parse_matrix(s: &str) -> Result<IntMat2, CliError> {
    let entries: Vec<i64> = s
        .split(',')
        .map(|t| t.trim().parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("invalid matrix `{s}`; expected a,b,c,d")))?;
    if entries.len() != 4 {
        return Err(CliError::Usage(format!(
            "matrix `{s}` needs exactly four entries"
        )));
    }
    Ok(IntMat2::new(entries[0], entries[1], entries[2], entries[3]))
}

fn common_from(args: &Args) -> Result<Common, CliError> {
    let source = if let Some(path) = args.flags.get("map") {
        MapSource::Path(PathBuf::from(path))
    } else if let Some(name) = args.flags.get("gallery") {
        MapSource::Gallery(name.clone())
    } else if let Some(m) = args.flags.get("matrix") {
        MapSource::Matrix(parse_matrix(m)?)
    } else {
        MapSource::Gallery("paper_example".to_string())
    };
    if let Some(threads) = args.flags.get("threads") {
        std::env::set_var("TORUSENDO_THREADS", threads);
    }
    Ok(Common {
        source,
        eps: args.get("eps", 0.1)?,
        out: PathBuf::from(args.flags.get("out").cloned().unwrap_or_else(|| "out".into())),
        seed: args.get("seed", 0u64)?,
        svg: args.switches.contains("svg"),
    })
}

fn dispatch(argv: &[String]) -> Result<i32, CliError> {
    let args = parse_args(argv)?;
    if args.switches.contains("help") || args.positional.is_empty() {
        print!("{}", usage());
        return Ok(if args.positional.is_empty() && !args.switches.contains("help") {
            EXIT_ERROR
        } else {
            EXIT_OK
        });
    }
    let sub = args.positional[0].as_str();
    let common = common_from(&args)?;
    match sub {
        "certify-ph" => {
            let cone = ConeArgs {
                slope: args.get("slope", 1.0)?,
                vertical: args.switches.contains("vertical"),
                ell: args.get("ell", 1u32)?,
                lambda: args.get("lambda", 2.0 * std::f64::consts::SQRT_2)?,
                grid: args.get("grid", 512u32)?,
                auto: !args.switches.contains("no-auto"),
            };
            require(cone.slope > 0.0 && cone.slope.is_finite(), "--slope must be positive")?;
            require(cone.ell >= 1, "--ell must be at least 1")?;
            require(cone.lambda > 1.0, "--lambda must exceed 1")?;
            require(cone.grid >= 2, "--grid must be at least 2")?;
            certify_ph(&common, &cone)
        }
        "certify-sve" => {
            let sve = SveArgs {
                grid: args.get("grid", 512u32)?,
                iterate: args.get("iterate", 1u32)?,
                auto: !args.switches.contains("no-auto"),
            };
            require(sve.grid >= 2, "--grid must be at least 2")?;
            require(sve.iterate >= 1, "--iterate must be at least 1")?;
            certify_sve(&common, &sve)
        }
        "canonical-form" => {
            let m = args
                .flags
                .get("matrix")
                .ok_or_else(|| CliError::Usage("canonical-form needs --matrix a,b,c,d".into()))?;
            canonical_form_cmd(&common, &parse_matrix(m)?)
        }
        "semiconj" => {
            let sc = SemiconjArgs {
                grid: args.get("grid", 128u32)?,
                tol: args.get("tol", 1e-8)?,
            };
            require(sc.grid >= 1, "--grid must be at least 1")?;
            require(sc.tol > 0.0 && sc.tol.is_finite(), "--tol must be positive")?;
            semiconj(&common, &sc)
        }
        "fibers" | "dichotomy" => {
            let fiber = FiberArgs {
                grid: args.get("grid", 8u32)?,
                r_mult: args.get("r-mult", 3.0)?,
                depth: args.get_opt("depth")?,
                delta: args.get("delta", 0.01)?,
                search_radius: args.get("search-radius", 0.25)?,
                samples: args.get("samples", 40u32)?,
            };
            require(fiber.grid >= 1, "--grid must be at least 1")?;
            require(fiber.r_mult > 2.0, "--r-mult must exceed 2 (the fiber radius needs r > 2*kappa)")?;
            require(fiber.delta > 0.0, "--delta must be positive")?;
            require(fiber.search_radius > 0.0, "--search-radius must be positive")?;
            require(fiber.samples >= 4, "--samples must be at least 4")?;
            if sub == "fibers" {
                fibers(&common, &fiber)
            } else {
                dichotomy(&common, &fiber)
            }
        }
        "essential" => {
            let region = parse_region(
                args.flags
                    .get("region")
                    .map(String::as_str)
                    .unwrap_or("ball:0.3,0.3,0.05"),
            )?;
            let region_args = RegionArgs {
                shape: region,
                n_max: args.get("nmax", 20u32)?,
                level: args.get("level", 5u8)?,
                per_cell: args.get("per-cell", 8u32)?,
            };
            require(region_args.per_cell >= 1, "--per-cell must be at least 1")?;
            essential(&common, &region_args)
        }
        "covering" => {
            let region = parse_region(
                args.flags
                    .get("region")
                    .map(String::as_str)
                    .unwrap_or("ball:0.3,0.3,0.05"),
            )?;
            let cov = CoveringArgs {
                shape: region,
                resolution: args.get("res", 32u32)?,
                n_max: args.get("nmax", 25u32)?,
            };
            require(cov.resolution >= 1, "--res must be at least 1")?;
            covering(&common, &cov)
        }
        "directions" => {
            let d = DirectionsArgs {
                grid: args.get("grid", 8u32)?,
                depth: args.get("depth", 10u32)?,
                trials: args.get("trials", 6u32)?,
                slope: args.get("slope", 1.0)?,
            };
            require(d.grid >= 1, "--grid must be at least 1")?;
            require(d.depth >= 1, "--depth must be at least 1")?;
            require(d.trials >= 2, "--trials must be at least 2")?;
            require(d.slope > 0.0 && d.slope.is_finite(), "--slope must be positive")?;
            directions_cmd(&common, &d)
        }
        "gallery" => {
            let name = args
                .positional
                .get(1)
                .ok_or_else(|| CliError::Usage("gallery needs a map name".into()))?;
            gallery_cmd(&common, name)
        }
        other => Err(CliError::Usage(format!(
            "unknown subcommand `{other}`; run with --help"
        ))),
    }
}

fn main() {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&argv) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(EXIT_ERROR);
        }
    }
}
