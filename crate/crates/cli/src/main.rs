//! curlfree: construct potentials for curl-free fields and verify the
//! toolkit's operator identities from declarative configs.
//!
//! Exit codes: 0 pass, 1 check failure, 2 config error, 3 mathematical
//! precondition refusal.

mod config;
mod report;
mod suites;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{ConfigError, RunConfig};
use curlfree_core::error::Error as CoreError;
use curlfree_core::fieldspec::{Component, Field, GridField, ScalarField, VectorField};
use curlfree_core::geometry::{build_cover, Cover, CoverConfig, Domain};
use curlfree_core::potential::{
    glue_potentials, rough_local_potential, GlueConfig, PotentialResult, RoughConfig,
};
use report::{CheckResult, Report};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "curlfree",
    version,
    about = "Potentials for curl-free fields, right-inverses of the divergence, and their verification suites"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a config and check its invariants
    Validate(CommonArgs),
    /// Reconstruct a potential for the configured field
    Potential(CommonArgs),
    /// Run a named verification suite
    Verify {
        #[arg(value_enum)]
        suite: SuiteName,
        #[command(flatten)]
        args: CommonArgs,
    },
    /// Shorthand for `verify bogovskii`
    Bogovskii(CommonArgs),
    /// Shorthand for `verify homotopy`
    Homotopy(CommonArgs),
    /// Shorthand for `verify sobolev`
    Sobolev(CommonArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Path to the TOML run configuration
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: config's output.dir, else `.`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also emit probe tables as CSV
    #[arg(long)]
    csv: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SuiteName {
    Bogovskii,
    Duality,
    Homotopy,
    Sobolev,
    Support,
    All,
}

impl SuiteName {
    fn as_str(self) -> &'static str {
        match self {
            SuiteName::Bogovskii => "bogovskii",
            SuiteName::Duality => "duality",
            SuiteName::Homotopy => "homotopy",
            SuiteName::Sobolev => "sobolev",
            SuiteName::Support => "support",
            SuiteName::All => "all",
        }
    }
}

const EXIT_CHECK_FAILURE: u8 = 1;
const EXIT_CONFIG_ERROR: u8 = 2;
const EXIT_REFUSAL: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Validate(args) => cmd_validate(&args),
        Command::Potential(args) => cmd_potential(&args),
        Command::Verify { suite, args } => cmd_verify(suite, &args),
        Command::Bogovskii(args) => cmd_verify(SuiteName::Bogovskii, &args),
        Command::Homotopy(args) => cmd_verify(SuiteName::Homotopy, &args),
        Command::Sobolev(args) => cmd_verify(SuiteName::Sobolev, &args),
    };
    ExitCode::from(code)
}

struct Loaded {
    config: RunConfig,
    field: Option<Field>,
    seed: u64,
    out_dir: PathBuf,
}

fn load(args: &CommonArgs) -> Result<Loaded, ConfigError> {
    let config = RunConfig::load(&args.config)?;
    let config_dir = args.config.parent().unwrap_or(Path::new(".")).to_path_buf();
    let field = config.field(&config_dir)?;
    let seed = args.seed.unwrap_or(config.seed);
    let out_dir = args
        .out
        .clone()
        .or_else(|| {
            config.output.dir.clone().map(|d| {
                if d.is_absolute() {
                    d
                } else {
                    config_dir.join(d)
                }
            })
        })
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Loaded {
        config,
        field,
        seed,
        out_dir,
    })
}

fn config_failure(e: &ConfigError) -> u8 {
    eprintln!("error: {e}");
    EXIT_CONFIG_ERROR
}

fn cmd_validate(args: &CommonArgs) -> u8 {
    let loaded = match load(args) {
        Ok(l) => l,
        Err(e) => return config_failure(&e),
    };
    // Domain invariants.
    if let Err(e) = loaded.config.domain() {
        return config_failure(&e);
    }
    // Star-ball containment when declared (required for ball/box domains).
    match loaded.config.domain() {
        Ok(Domain::Ball(_)) | Ok(Domain::Box(_)) => match loaded.config.star_domain() {
            Ok(star) => {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(loaded.seed);
                if let Err(e) = star.validate_star_shape(256, &mut rng) {
                    eprintln!("error: star-shape invariant failed: {e}");
                    return EXIT_CONFIG_ERROR;
                }
            }
            Err(e) => return config_failure(&e),
        },
        _ => {}
    }
    if let Err(e) = loaded.config.quadrature() {
        return config_failure(&e);
    }
    println!("config ok: {}", args.config.display());
    0
}

fn cmd_verify(suite: SuiteName, args: &CommonArgs) -> u8 {
    let started = Instant::now();
    let loaded = match load(args) {
        Ok(l) => l,
        Err(e) => return config_failure(&e),
    };
    let mut report = Report::new(
        "verify",
        Some(suite.as_str()),
        loaded.seed,
        loaded.config.clone(),
    );

    let needs_operator_ctx = matches!(
        suite,
        SuiteName::Bogovskii
            | SuiteName::Duality
            | SuiteName::Homotopy
            | SuiteName::Support
            | SuiteName::All
    );
    let ctx = if needs_operator_ctx {
        match suites::SuiteContext::from_config(&loaded.config, loaded.seed) {
            Ok(c) => Some(c),
            Err(e) => return config_failure(&e),
        }
    } else {
        None
    };

    let run_sobolev = |report: &mut Report| -> Result<(), u8> {
        match suites::suite_sobolev(&loaded.config, loaded.field.as_ref(), loaded.seed) {
            Ok(checks) => {
                report.extend(checks);
                Ok(())
            }
            Err(e) => {
                eprintln!("error: {e}");
                Err(EXIT_CONFIG_ERROR)
            }
        }
    };

    let field = loaded.field.as_ref();
    match suite {
        SuiteName::Bogovskii => report.extend(suites::suite_bogovskii(ctx.as_ref().unwrap())),
        SuiteName::Duality => report.extend(suites::suite_duality(ctx.as_ref().unwrap(), field)),
        SuiteName::Homotopy => report.extend(suites::suite_homotopy(ctx.as_ref().unwrap(), field)),
        SuiteName::Support => report.extend(suites::suite_support(ctx.as_ref().unwrap())),
        SuiteName::Sobolev => {
            if let Err(code) = run_sobolev(&mut report) {
                return code;
            }
        }
        SuiteName::All => {
            let ctx = ctx.as_ref().unwrap();
            report.extend(suites::suite_bogovskii(ctx));
            report.extend(suites::suite_duality(ctx, field));
            report.extend(suites::suite_support(ctx));
            report.extend(suites::suite_homotopy(ctx, field));
            if let Err(code) = run_sobolev(&mut report) {
                return code;
            }
        }
    }

    let path = loaded
        .out_dir
        .join(format!("verify_{}.json", suite.as_str()));
    match report.finalize(started, &path) {
        Ok(true) => 0,
        Ok(false) => EXIT_CHECK_FAILURE,
        Err(e) => {
            eprintln!("error: cannot write report: {e}");
            EXIT_CONFIG_ERROR
        }
    }
}

fn cmd_potential(args: &CommonArgs) -> u8 {
    let started = Instant::now();
    let loaded = match load(args) {
        Ok(l) => l,
        Err(e) => return config_failure(&e),
    };
    let Some(field) = loaded.field.clone() else {
        eprintln!("error: `potential` needs a [field] section");
        return EXIT_CONFIG_ERROR;
    };
    if field.is_scalar() {
        eprintln!("error: `potential` needs a vector field (n components)");
        return EXIT_CONFIG_ERROR;
    }
    let domain = match loaded.config.domain() {
        Ok(d) => d,
        Err(e) => return config_failure(&e),
    };
    let mut report = Report::new("potential", None, loaded.seed, loaded.config.clone());

    let all_grid = field
        .components()
        .iter()
        .all(|c| matches!(c, Component::Grid(_)));
    let outcome = if all_grid {
        run_rough(&loaded, field.clone(), &mut report)
    } else {
        run_glued(&loaded, &domain, field.clone(), &mut report)
    };

    let (samples, refusal) = match outcome {
        Ok(s) => (s, false),
        Err(code) if code == EXIT_REFUSAL => (None, true),
        Err(code) => return code,
    };

    if let Some(grid) = samples {
        let grid_path = loaded.out_dir.join("potential.grid");
        if let Err(e) = report::write_atomic(&grid_path, &grid_bytes(&grid)) {
            eprintln!("error: cannot write potential grid: {e}");
            return EXIT_CONFIG_ERROR;
        }
        println!("potential samples written to {}", grid_path.display());
        if args.csv || loaded.config.output.csv {
            let csv_path = loaded.out_dir.join("potential.csv");
            if let Err(e) = report::write_atomic(&csv_path, grid_csv(&grid).as_bytes()) {
                eprintln!("error: cannot write csv: {e}");
                return EXIT_CONFIG_ERROR;
            }
            println!("probe table written to {}", csv_path.display());
        }
    }

    let path = loaded.out_dir.join("potential_report.json");
    match report.finalize(started, &path) {
        Ok(_) if refusal => EXIT_REFUSAL,
        Ok(true) => 0,
        Ok(false) => EXIT_CHECK_FAILURE,
        Err(e) => {
            eprintln!("error: cannot write report: {e}");
            EXIT_CONFIG_ERROR
        }
    }
}

/// Expression fields: glue chart potentials over a ball cover.
fn run_glued(
    loaded: &Loaded,
    domain: &Domain,
    field: Field,
    report: &mut Report,
) -> Result<Option<GridField>, u8> {
    let cover = match domain {
        Domain::BallUnion(balls) => {
            match Cover::new(balls.clone(), loaded.config.domain.simply_connected) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return Err(EXIT_CONFIG_ERROR);
                }
            }
        }
        _ => {
            let radius = loaded
                .config
                .params
                .cover_radius
                .unwrap_or(0.2 * domain.diameter());
            let cover_cfg = CoverConfig {
                seed: loaded.seed,
                simply_connected: loaded.config.domain.simply_connected,
                boundary_margin: Some(
                    loaded
                        .config
                        .params
                        .cover_margin
                        .unwrap_or(0.05 * domain.diameter()),
                ),
                ..CoverConfig::default()
            };
            match build_cover(domain, radius, &cover_cfg) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return Err(EXIT_CONFIG_ERROR);
                }
            }
        }
    };

    let glue_cfg = GlueConfig {
        seed: loaded.seed,
        overlap_samples: loaded.config.params.overlap_samples,
        curl_tolerance: loaded.config.params.curl_tolerance,
        ..GlueConfig::default()
    };
    let glued = match glue_potentials(&cover, field, &glue_cfg) {
        Ok(g) => g,
        Err(CoreError::CurlResidualExceeded {
            residual,
            tolerance,
        }) => {
            report.push(CheckResult::refused(
                "curl_precondition",
                tolerance,
                format!("curl residual {residual:.3e} exceeds tolerance"),
            ));
            return Err(EXIT_REFUSAL);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return Err(EXIT_CONFIG_ERROR);
        }
    };

    report.push(CheckResult::new("grad_residual", glued.grad_residual, 1e-6));
    report.push(CheckResult::new(
        "overlap_consistency",
        glued.overlap_consistency,
        1e-6,
    ));
    let consistency = CheckResult::new("cross_pair_discrepancy", glued.worst_cross_pair, 1e-6)
        .with_note(if loaded.config.domain.simply_connected {
            "simply connected cover: cross-pair constants must vanish".to_string()
        } else {
            format!(
                "cover declared not simply connected; obstruction period {:.8}",
                glued.worst_cross_pair
            )
        });
    let obstructed = !glued.is_consistent(1e-6);
    report.push(consistency);

    if obstructed {
        return Err(EXIT_REFUSAL);
    }
    Ok(Some(sample_glued(loaded, &glued)))
}

/// Grid fields on a star domain: the mollified rough reconstruction.
fn run_rough(loaded: &Loaded, field: Field, report: &mut Report) -> Result<Option<GridField>, u8> {
    let star = match loaded.config.star_domain() {
        Ok(s) => s,
        Err(e) => return Err(config_failure(&e)),
    };
    let rho_ball = match loaded.config.rho_ball(&star) {
        Ok(b) => b,
        Err(e) => return Err(config_failure(&e)),
    };
    let rho = curlfree_core::mollify::make_bump(rho_ball);
    // Grid data lives on its lattice box.
    let g_domain = match field.components().first() {
        Some(Component::Grid(g)) => Domain::Box(g.lattice_box()),
        _ => unreachable!("run_rough called with non-grid field"),
    };
    let cfg = RoughConfig {
        seed: loaded.seed,
        ..RoughConfig::default()
    };
    let stages = match rough_local_potential(
        &star,
        rho,
        field,
        &g_domain,
        &loaded.config.params.lambda_schedule,
        &loaded.config.params.l_schedule,
        &cfg,
    ) {
        Ok(s) => s,
        Err(CoreError::CurlResidualExceeded {
            residual,
            tolerance,
        }) => {
            report.push(CheckResult::refused(
                "curl_precondition",
                tolerance,
                format!("weak curl residual {residual:.3e} exceeds tolerance"),
            ));
            return Err(EXIT_REFUSAL);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return Err(EXIT_CONFIG_ERROR);
        }
    };
    for stage in &stages {
        report.push(
            CheckResult::new(
                &format!("rough_grad_residual_lambda_{}_l_{}", stage.lambda, stage.l),
                stage.grad_residual,
                1e-2,
            )
            .with_note(match stage.rms_change.is_nan() {
                true => "first stage".to_string(),
                false => format!("rms change from previous stage {:.3e}", stage.rms_change),
            }),
        );
    }
    let last = stages.last().expect("schedules validated nonempty");
    Ok(Some(sample_scalar_field(
        loaded,
        &last.field,
        &star.shape.bounding_box(),
    )))
}

fn out_lattice(
    loaded: &Loaded,
    bbox: &curlfree_core::geometry::AxisBox,
) -> (Vec<f64>, f64, Vec<usize>) {
    let nodes = loaded.config.params.out_grid_nodes.max(2);
    let extent = bbox
        .hi
        .iter()
        .zip(&bbox.lo)
        .map(|(h, l)| h - l)
        .fold(0.0f64, f64::max);
    let h = extent / (nodes - 1) as f64;
    (bbox.lo.clone(), h, vec![nodes; bbox.lo.len()])
}

fn sample_glued<V: VectorField>(loaded: &Loaded, glued: &PotentialResult<V>) -> GridField {
    let bbox = glued
        .cover
        .balls
        .iter()
        .map(|b| b.bounding_box())
        .reduce(|a, b| a.merge(&b))
        .expect("nonempty cover");
    let (origin, h, shape) = out_lattice(loaded, &bbox);
    GridField::sample(origin, h, shape, |x| {
        glued.evaluate(x).ok().flatten().unwrap_or(f64::NAN)
    })
    .expect("lattice construction")
}

fn sample_scalar_field<F: ScalarField>(
    loaded: &Loaded,
    field: &F,
    bbox: &curlfree_core::geometry::AxisBox,
) -> GridField {
    let (origin, h, shape) = out_lattice(loaded, bbox);
    GridField::sample(origin, h, shape, |x| field.eval(x).unwrap_or(f64::NAN))
        .expect("lattice construction")
}

fn grid_bytes(grid: &GridField) -> Vec<u8> {
    let mut buf = Vec::new();
    grid.write_to(&mut buf).expect("in-memory write");
    buf
}

fn grid_csv(grid: &GridField) -> String {
    let n = grid.dim();
    let mut out = String::new();
    for d in 1..=n {
        out.push_str(&format!("x{d},"));
    }
    out.push_str("F\n");
    let count: usize = grid.shape.iter().product();
    let mut idx = vec![0usize; n];
    for flat in 0..count {
        let p = grid.node_point(&idx);
        for c in &p {
            out.push_str(&format!("{c},"));
        }
        out.push_str(&format!("{}\n", grid.values[flat]));
        for d in (0..n).rev() {
            idx[d] += 1;
            if idx[d] < grid.shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    out
}
