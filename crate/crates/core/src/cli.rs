//! The `steklov` command line. [`run_command`] parses arguments, runs one
//! subcommand and returns the process exit code:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | usage error or unusable input |
//! | 2 | a bound is violated beyond its slack, or the flow masses decrease |
//! | 3 | numerical failure |

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::builder::TypedValueParser;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::audit::{self, AuditConfig, AuditInputs, Family};
use crate::ball;
use crate::bem::{self, AssemblyOptions, SteklovOptions};
use crate::imcf::{self, FlowOptions, ImcfError};
use crate::mesh::{
    compute_geometry, load_mesh, make_ellipsoid, make_icosphere, make_torus, write_off, LoadOptions, TriangleMesh,
};
use crate::report::{self, PipelineError, PipelineOptions};
use crate::tensors;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "steklov", version, about = "Exterior Steklov spectra, capacity and geometric bounds on closed surfaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full pipeline and bound audit.
    Analyze {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        numerics: NumericArgs,
        #[command(flatten)]
        audit: AuditArgs,
        /// Number of Steklov eigenvalues to compute.
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(2..))]
        count: u32,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Lowest exterior Steklov eigenvalues.
    Steklov {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        numerics: NumericArgs,
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
        count: u32,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Electrostatic capacity and the capacity bounds.
    Capacity {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        numerics: NumericArgs,
        #[command(flatten)]
        audit: AuditArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Virtual mass, polarization and mean Hessian tensors.
    Tensors {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        numerics: NumericArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Inverse mean curvature flow of a star-shaped surface. With
    /// `--output`, the trace is written next to the report as CSV.
    Imcf {
        #[command(flatten)]
        input: InputArgs,
        /// Final flow time.
        #[arg(long, value_parser = non_negative)]
        time: f64,
        /// Initial time step.
        #[arg(long, default_value_t = 0.05, value_parser = positive)]
        dt: f64,
        /// Subdivision level of the parameter grid.
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..=6))]
        grid: u32,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Closed-form spectrum of the ball in R^n.
    Ball {
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(3..=64))]
        dim: u32,
        #[arg(long, default_value_t = 1.0, value_parser = positive)]
        radius: f64,
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..=100_000))]
        count: u32,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write a generated mesh as OFF.
    Gen {
        #[command(subcommand)]
        shape: Shape,
        #[arg(short, long, global = true)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Subcommand)]
pub enum Shape {
    Icosphere {
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(0..=7))]
        subdivisions: u32,
        #[arg(long, default_value_t = 1.0, value_parser = positive)]
        radius: f64,
    },
    Ellipsoid {
        #[arg(long, num_args = 3, value_parser = positive, required = true)]
        axes: Vec<f64>,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(0..=7))]
        subdivisions: u32,
    },
    Torus {
        #[arg(long, default_value_t = 2.0, value_parser = positive)]
        major: f64,
        #[arg(long, default_value_t = 0.6, value_parser = positive)]
        minor: f64,
        #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u32).range(3..))]
        rings: u32,
        #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(3..))]
        sides: u32,
    },
}

/// Exactly one of a mesh file or a generator spec such as `icosphere:3`,
/// `ellipsoid:2,1,1:3` or `torus:2,0.6:32,16`.
#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// OFF or OBJ mesh.
    #[arg(required_unless_present = "generate", conflicts_with = "generate")]
    pub mesh: Option<PathBuf>,
    #[arg(long, value_parser = parse_generator)]
    pub generate: Option<Shape>,
    /// Flip inconsistently wound faces instead of rejecting the mesh.
    #[arg(long)]
    pub repair_orientation: bool,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct NumericArgs {
    /// Gauss points per direction for self and touching element pairs.
    #[arg(long, default_value_t = AssemblyOptions::default().touching_order, value_parser = clap::value_parser!(u64).range(2..=40).map(|v| v as usize))]
    pub touching_order: usize,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct AuditArgs {
    /// Relative slack for bounds involving boundary-element quantities.
    #[arg(long, default_value_t = AuditConfig::default().bem_slack, value_parser = positive)]
    pub slack: f64,
    /// Relative slack for purely geometric comparisons.
    #[arg(long, default_value_t = AuditConfig::default().geometric_slack, value_parser = positive)]
    pub geometric_slack: f64,
    /// Margins below this in absolute value count as equality.
    #[arg(long, default_value_t = AuditConfig::default().rigidity_tolerance, value_parser = positive)]
    pub rigidity: f64,
    /// Largest relative mean of the virtual-mass potentials accepted by the
    /// second-eigenvalue gate.
    #[arg(long, default_value_t = AuditConfig::default().w_mean_tolerance, value_parser = positive)]
    pub w_mean_gate: f64,
}

impl From<AuditArgs> for AuditConfig {
    fn from(a: AuditArgs) -> Self {
        AuditConfig {
            bem_slack: a.slack,
            geometric_slack: a.geometric_slack,
            rigidity_tolerance: a.rigidity,
            w_mean_tolerance: a.w_mean_gate,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GeneratorKind {
    Icosphere,
    Ellipsoid,
    Torus,
}

fn positive(text: &str) -> Result<f64, String> {
    match text.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got `{text}`")),
    }
}

fn non_negative(text: &str) -> Result<f64, String> {
    match text.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a non-negative number, got `{text}`")),
    }
}

fn numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split(',').map(non_negative).collect()
}

fn whole(value: f64, what: &str) -> Result<u32, String> {
    if value.fract() == 0.0 && value <= 1e6 {
        Ok(value as u32)
    } else {
        Err(format!("{what} must be a whole number"))
    }
}

/// Parses `kind:params[:resolution]`.
pub fn parse_generator(text: &str) -> Result<Shape, String> {
    let mut parts = text.split(':');
    let kind = GeneratorKind::from_str(parts.next().unwrap_or_default(), true)?;
    let fields: Vec<Vec<f64>> = parts.map(numbers).collect::<Result<_, _>>()?;
    let bad = || format!("cannot read generator spec `{text}`");
    let shape = match (kind, fields.as_slice()) {
        (GeneratorKind::Icosphere, [s]) if s.len() == 1 => {
            Shape::Icosphere { subdivisions: whole(s[0], "subdivisions")?, radius: 1.0 }
        }
        (GeneratorKind::Icosphere, [r, s]) if r.len() == 1 && s.len() == 1 => {
            Shape::Icosphere { subdivisions: whole(s[0], "subdivisions")?, radius: r[0] }
        }
        (GeneratorKind::Ellipsoid, [axes, s]) if axes.len() == 3 && s.len() == 1 => {
            Shape::Ellipsoid { axes: axes.clone(), subdivisions: whole(s[0], "subdivisions")? }
        }
        (GeneratorKind::Torus, [radii, grid]) if radii.len() == 2 && grid.len() == 2 => Shape::Torus {
            major: radii[0],
            minor: radii[1],
            rings: whole(grid[0], "rings")?,
            sides: whole(grid[1], "sides")?,
        },
        _ => return Err(bad()),
    };
    let lengths_positive = match &shape {
        Shape::Icosphere { radius, .. } => *radius > 0.0,
        Shape::Ellipsoid { axes, .. } => axes.iter().all(|&a| a > 0.0),
        Shape::Torus { minor, .. } => *minor > 0.0,
    };
    if !lengths_positive {
        return Err("radii and axes must be positive".into());
    }
    match shape {
        Shape::Icosphere { subdivisions, .. } | Shape::Ellipsoid { subdivisions, .. } if subdivisions > 7 => {
            Err("subdivisions above 7 are not supported".into())
        }
        Shape::Torus { major, minor, rings, sides } if minor >= major || rings < 3 || sides < 3 => {
            Err("torus needs minor < major and at least 3 rings and sides".into())
        }
        shape => Ok(shape),
    }
}

impl Shape {
    pub fn build(&self) -> TriangleMesh {
        match *self {
            Shape::Icosphere { subdivisions, radius } => make_icosphere(radius, subdivisions),
            Shape::Ellipsoid { ref axes, subdivisions } => make_ellipsoid(axes[0], axes[1], axes[2], subdivisions),
            Shape::Torus { major, minor, rings, sides } => make_torus(major, minor, rings as usize, sides as usize),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Shape::Icosphere { subdivisions, radius } => format!("icosphere:{radius}:{subdivisions}"),
            Shape::Ellipsoid { axes, subdivisions } => {
                format!("ellipsoid:{},{},{}:{subdivisions}", axes[0], axes[1], axes[2])
            }
            Shape::Torus { major, minor, rings, sides } => format!("torus:{major},{minor}:{rings},{sides}"),
        }
    }
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_USAGE, message: message.to_string() }
    }

    fn numerical(message: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_NUMERICAL, message: message.to_string() }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::numerical(e)
    }
}

impl From<ImcfError> for Failure {
    fn from(e: ImcfError) -> Self {
        match e {
            ImcfError::StarShapeRequired { .. } | ImcfError::InvalidParameter(_) => Failure::usage(e),
            _ => Failure::numerical(e),
        }
    }
}

fn load(input: &InputArgs) -> Result<(TriangleMesh, String), Failure> {
    match (&input.mesh, &input.generate) {
        (Some(path), None) => {
            let options = LoadOptions { repair_orientation: input.repair_orientation };
            let mesh = load_mesh(path, None, options).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
            Ok((mesh, name))
        }
        (None, Some(shape)) => Ok((shape.build(), shape.name())),
        _ => Err(Failure::usage("give exactly one of a mesh path or --generate")),
    }
}

fn pipeline_options(numerics: NumericArgs, audit: Option<AuditArgs>) -> PipelineOptions {
    let mut options = PipelineOptions::default();
    options.assembly.touching_order = numerics.touching_order;
    if let Some(a) = audit {
        options.audit = a.into();
    }
    options
}

fn emit(value: Value, output: Option<&Path>, stdout: &mut dyn Write) -> Result<(), Failure> {
    let text = report::render_json(value);
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(Failure::usage),
    }
}

fn violation_code(violations: &[&str]) -> i32 {
    if violations.is_empty() {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    }
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<i32, Failure> {
    match command {
        Command::Analyze { input, numerics, audit, count, output } => {
            let (mesh, name) = load(&input)?;
            let mut options = pipeline_options(numerics, Some(audit));
            options.eigenvalue_count = count as usize;
            let analysis = report::analyze(&mesh, &name, &options)?;
            emit(report::analysis_json(&analysis), output.as_deref(), stdout)?;
            Ok(violation_code(&analysis.bounds.violations))
        }
        Command::Steklov { input, numerics, count, output } => {
            let (mesh, name) = load(&input)?;
            let options = pipeline_options(numerics, None);
            let system = report::assemble_system(&mesh, &options).map_err(Failure::numerical)?;
            let spectrum = bem::solve_steklov(&system, count as usize, SteklovOptions::default()).map_err(Failure::numerical)?;
            let value = json!({
                "schema_version": report::SCHEMA_VERSION,
                "command": "steklov",
                "mesh": { "name": name, "faces": report::count(mesh.face_count()) },
                "spectrum": report::spectrum_json(&spectrum),
            });
            emit(value, output.as_deref(), stdout)?;
            Ok(EXIT_OK)
        }
        Command::Capacity { input, numerics, audit, output } => {
            let (mesh, name) = load(&input)?;
            let options = pipeline_options(numerics, Some(audit));
            let geometry = compute_geometry(&mesh).map_err(Failure::numerical)?;
            let flags = crate::mesh::classify(&mesh, &geometry, options.classify);
            let functionals = crate::functionals::functional_report(&mesh, &geometry);
            let system = report::assemble_system(&mesh, &options).map_err(Failure::numerical)?;
            let (capacity, _) = bem::solve_capacity(&system).map_err(Failure::numerical)?;
            let mut bounds = audit::audit(
                AuditInputs {
                    flags: &flags,
                    functionals: &functionals,
                    eigenvalues: None,
                    capacity: Some(capacity),
                    tensors: None,
                    sample_points: &[],
                },
                options.audit,
            );
            bounds.checks.retain(|c| matches!(c.family, Family::Capacity | Family::WillmoreCapacity));
            bounds.violations.retain(|id| bounds.checks.iter().any(|c| c.id == *id));
            let value = json!({
                "schema_version": report::SCHEMA_VERSION,
                "command": "capacity",
                "mesh": { "name": name, "faces": report::count(mesh.face_count()) },
                "hypotheses": report::flags_json(&flags),
                "capacity": report::quantity(capacity, "length"),
                "area": report::quantity(functionals.area, "area"),
                "bounds": report::bounds_json(&bounds),
                "violations": bounds.violations,
            });
            emit(value, output.as_deref(), stdout)?;
            Ok(violation_code(&bounds.violations))
        }
        Command::Tensors { input, numerics, output } => {
            let (mesh, name) = load(&input)?;
            let options = pipeline_options(numerics, None);
            let system = report::assemble_system(&mesh, &options).map_err(Failure::numerical)?;
            let t = tensors::potential_tensors(&mesh, &system).map_err(Failure::numerical)?;
            let slack = tensors::tensor_bounds_check(&t).map_err(Failure::numerical)?;
            let mut violations = Vec::new();
            if !slack.virtual_mass_psd {
                violations.push("virtual_mass_matrix");
            }
            if !slack.polarization_psd {
                violations.push("polarization_matrix");
            }
            let value = json!({
                "schema_version": report::SCHEMA_VERSION,
                "command": "tensors",
                "mesh": { "name": name, "faces": report::count(mesh.face_count()) },
                "tensors": report::tensors_json(&t, &slack),
                "violations": violations,
            });
            emit(value, output.as_deref(), stdout)?;
            Ok(violation_code(&violations))
        }
        Command::Imcf { input, time, dt, grid, output } => {
            let (mesh, name) = load(&input)?;
            let options = FlowOptions { grid_subdivisions: grid, ..FlowOptions::default() };
            let trace = imcf::run_flow(&mesh, time, dt, options)?;
            if let Some(path) = &output {
                let csv = path.with_extension("csv");
                std::fs::write(&csv, report::flow_csv(&trace))
                    .map_err(|e| Failure::usage(format!("{}: {e}", csv.display())))?;
            }
            emit(report::flow_json(&trace, &name), output.as_deref(), stdout)?;
            Ok(if trace.is_monotone() { EXIT_OK } else { EXIT_VIOLATION })
        }
        Command::Ball { dim, radius, count, output } => {
            let spectrum = ball::ball_spectrum(dim, radius, count as usize);
            let clusters: Vec<Value> = spectrum
                .eigenvalues
                .iter()
                .map(|e| {
                    json!({
                        "value": report::quantity(e.value, "1/length"),
                        "multiplicity": { "value": e.multiplicity, "units": "count" },
                        "degree": { "value": e.degree, "units": "count" },
                    })
                })
                .collect();
            let value = json!({
                "schema_version": report::SCHEMA_VERSION,
                "command": "ball",
                "dimension": { "value": dim, "units": "count" },
                "radius": report::quantity(radius, "length"),
                "eigenvalues": report::list(&spectrum.values(), "1/length"),
                "clusters": clusters,
                "capacity": report::quantity(ball::ball_capacity(dim, radius), "length^(n-2)"),
                "volume": report::quantity(ball::ball_volume(dim, radius), "length^n"),
            });
            emit(value, output.as_deref(), stdout)?;
            Ok(EXIT_OK)
        }
        Command::Gen { shape, output } => {
            let mesh = shape.build();
            match output {
                Some(path) => {
                    let file = std::fs::File::create(&path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
                    write_off(&mesh, std::io::BufWriter::new(file)).map_err(Failure::usage)?;
                }
                None => write_off(&mesh, &mut *stdout).map_err(Failure::usage)?,
            }
            Ok(EXIT_OK)
        }
    }
}

/// Runs one command with explicit output streams.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command, stdout) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

pub fn run_command<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_with(std::iter::once("steklov").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn generator_specs() {
        assert!(matches!(parse_generator("icosphere:3"), Ok(Shape::Icosphere { subdivisions: 3, .. })));
        assert!(matches!(parse_generator("ellipsoid:2,1,1:2"), Ok(Shape::Ellipsoid { subdivisions: 2, .. })));
        assert!(matches!(parse_generator("torus:2,0.6:32,16"), Ok(Shape::Torus { rings: 32, sides: 16, .. })));
        for bad in ["cube:3", "icosphere:2.5", "ellipsoid:2,1:3", "torus:1,2:8,8", "icosphere:9", "icosphere:-1", "icosphere:0:2", "ellipsoid:2,0,1:2"] {
            assert!(parse_generator(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(&[]).0, EXIT_USAGE);
        assert_eq!(run(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run(&["ball", "--dim", "2"]).0, EXIT_USAGE);
        assert_eq!(run(&["ball", "--radius", "-1"]).0, EXIT_USAGE);
        assert_eq!(run(&["capacity"]).0, EXIT_USAGE);
        assert_eq!(run(&["capacity", "a.off", "--generate", "icosphere:1"]).0, EXIT_USAGE);
        assert_eq!(run(&["capacity", "/nonexistent/a.off"]).0, EXIT_USAGE);
        assert_eq!(run(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn ball_lists_the_first_cluster() {
        let (code, out, _) = run(&["ball", "--dim", "3", "--radius", "1", "--count", "4"]);
        assert_eq!(code, EXIT_OK);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["eigenvalues"]["value"], json!([1.0, 2.0, 2.0, 2.0]));
        assert_eq!(v["eigenvalues"]["units"], "1/length");
    }

    #[test]
    fn gen_writes_off() {
        let (code, out, _) = run(&["gen", "icosphere", "--subdivisions", "1"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.starts_with("OFF"));
        let (code, out, _) = run(&["gen", "ellipsoid", "--axes", "2", "1", "1", "--subdivisions", "0"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.lines().nth(1).unwrap().starts_with("12 20"));
    }

    #[test]
    fn imcf_rejects_non_star_shaped_input() {
        let (code, _, err) = run(&["imcf", "--generate", "torus:2,0.6:16,8", "--time", "0.1"]);
        assert_eq!(code, EXIT_USAGE, "{err}");
    }

    #[test]
    fn imcf_zero_time_succeeds() {
        let (code, out, _) = run(&["imcf", "--generate", "icosphere:2", "--time", "0", "--grid", "2"]);
        assert_eq!(code, EXIT_OK);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["steps"]["value"], json!(0));
        assert_eq!(v["monotone"], json!(true));
    }

    #[test]
    fn numerical_failures_exit_three() {
        use crate::bem::BemError;
        assert_eq!(Failure::from(ImcfError::StepRejected { dt: 1e-9 }).code, EXIT_NUMERICAL);
        assert_eq!(Failure::from(ImcfError::AreaLawDrift { relative: 0.1 }).code, EXIT_NUMERICAL);
        assert_eq!(Failure::from(PipelineError::Bem(BemError::SingleLayerNotSpd)).code, EXIT_NUMERICAL);
        let not_star = ImcfError::StarShapeRequired { point: [0.0; 3], support: -1.0 };
        assert_eq!(Failure::from(not_star).code, EXIT_USAGE);
    }
}
