use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tomo_core::harness::{bench_noise, bench_scaling, bench_zero_padding, scaling_slope, to_csv, with_env_threads};
use tomo_core::io::{export_pgm, read_image, write_image, GridData};
use tomo_core::logpolar::{default_sectors, DEFAULT_SECTOR_BETA, DEFAULT_SECTOR_RESCALE};
use tomo_core::metrics::{hf_energy, mse, relative_l2};
use tomo_core::phantoms::{circ_phantom, point_sources, rasterize, shepp_logan};
use tomo_core::radon::{add_poisson_noise, radon_ellipses, radon_numeric, radon_points, NoiseSpec};
use tomo_core::recon::{regularized_fst_reconstruct, FilterSpec};
use tomo_core::reference::default_circle_nodes;
use tomo_core::{
    backproject_circles, backproject_naive, bst_backproject, fbp, logpolar_backproject, partial_backproject,
    BstOptions, CartesianImage, DcMode, EllipseSet, Engine, LogPolarOptions, Rho0Mode, Sector, Sinogram, TomoError,
};

#[derive(Parser)]
#[command(name = "tomo", version, about = "Parallel-beam tomography: phantoms, sinograms, fast backprojection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rasterize a test phantom to a cartesian image file.
    Phantom(PhantomArgs),
    /// Compute a sinogram from an image file or an analytic phantom.
    Radon(RadonArgs),
    /// Backproject a sinogram with one of the engines.
    Backproject(BackprojectArgs),
    /// Filtered (optionally regularized) reconstruction.
    Fbp(FbpArgs),
    /// Timing and accuracy studies, written as CSV.
    Bench {
        #[command(subcommand)]
        study: Study,
    },
    /// Compare two cartesian images.
    Compare(CompareArgs),
    /// Export an image or sinogram as a 16-bit PGM.
    ExportPgm(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PhantomKind {
    SheppLogan,
    Circ,
    Points,
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long, value_enum)]
    kind: PhantomKind,
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of point sources for `--kind points`.
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RadonArgs {
    /// Cartesian image to project numerically.
    #[arg(long, conflicts_with = "kind")]
    r#in: Option<PathBuf>,
    /// Built-in phantom to project instead of a file.
    #[arg(long, value_enum)]
    kind: Option<PhantomKind>,
    #[arg(long, default_value_t = 256)]
    nt: usize,
    #[arg(long, default_value_t = 180)]
    ntheta: usize,
    /// Use the exact projection of the phantom rather than ray integration of its raster.
    #[arg(long, requires = "kind")]
    analytic: bool,
    /// Raster size used when `--kind` is projected numerically (default: nt).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    /// Mean photon count per unit sinogram value; enables Poisson noise.
    #[arg(long)]
    noise_scale: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Naive,
    Circles,
    Bst,
    Logpolar,
    Partial,
}

#[derive(Clone, Copy, ValueEnum)]
enum DcArg {
    SubtractMean,
    KernelCap,
}

#[derive(Args)]
struct BackprojectArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// Output image size (default: nt of the input).
    #[arg(long)]
    n: Option<usize>,
    /// Kaiser-Bessel window parameter (bst).
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    /// Zero-padding factor (bst, logpolar).
    #[arg(long, default_value_t = 2.0)]
    zero_pad: f64,
    #[arg(long, value_enum, default_value = "subtract-mean")]
    dc_mode: DcArg,
    /// `auto` or a negative number.
    #[arg(long, default_value = "auto", value_parser = parse_rho0, allow_hyphen_values = true)]
    rho0: Rho0Mode,
    /// Sector table for `partial`: one `theta0 beta rescale` line per sector.
    #[arg(long)]
    sectors: Option<PathBuf>,
    /// Quadrature nodes per circle for `circles`.
    #[arg(long)]
    circle_nodes: Option<usize>,
    #[arg(long)]
    r#in: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FbpArgs {
    /// Tikhonov parameter; 0 gives the plain ramp filter.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Lowpass cutoff as a fraction of the detector Nyquist.
    #[arg(long, default_value_t = 1.0)]
    cutoff: f64,
    #[arg(long, default_value = "bst", value_parser = parse_engine)]
    engine: Engine,
    /// Divide in the 2D Fourier domain instead of filtering projections.
    #[arg(long)]
    fst: bool,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r#in: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Study {
    /// Backprojection time against N = 256·2^k.
    Scaling {
        #[arg(long, default_value_t = 3)]
        k_max: u32,
        /// Largest k for the naive engine.
        #[arg(long, default_value_t = 2)]
        naive_k_max: u32,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, value_delimiter = ',', default_value = "bst,logpolar,naive", value_parser = parse_engine)]
        methods: Vec<Engine>,
        #[arg(long)]
        out_csv: PathBuf,
    },
    /// Time and accuracy against the zero-padding factor.
    Zeropad {
        #[arg(long, value_delimiter = ',', default_value = "1,1.5,2,3,4")]
        zs: Vec<f64>,
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long)]
        out_csv: PathBuf,
    },
    /// Reconstruction error against sinogram noise level.
    Noise {
        /// Target relative L2 errors of the sinogram; 0 is the clean baseline.
        #[arg(long, value_delimiter = ',', default_value = "0,0.005,0.01,0.02,0.05")]
        levels: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "bst,logpolar,naive", value_parser = parse_engine)]
        methods: Vec<Engine>,
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[arg(long, default_value_t = 0.002)]
        lambda: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out_csv: PathBuf,
    },
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    a: PathBuf,
    /// Reference image.
    #[arg(long)]
    b: PathBuf,
    /// Write the metrics as JSON here as well.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    r#in: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct CompareReport {
    mse: f64,
    rel_l2: f64,
    hf_energy_a: f64,
    hf_energy_b: f64,
}

fn parse_rho0(s: &str) -> Result<Rho0Mode, String> {
    if s == "auto" {
        return Ok(Rho0Mode::Adaptive);
    }
    let v: f64 = s.parse().map_err(|_| format!("rho0 must be `auto` or a number, got {s:?}"))?;
    if !(v < 0.0 && v.is_finite()) {
        return Err(format!("rho0 must be negative, got {v}"));
    }
    Ok(Rho0Mode::Explicit(v))
}

fn parse_engine(s: &str) -> Result<Engine, String> {
    s.parse().map_err(|e: TomoError| e.to_string())
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<TomoError> for Failure {
    fn from(e: TomoError) -> Self {
        match e {
            TomoError::InvalidParameter(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn read_cartesian(path: &Path) -> CliResult<CartesianImage> {
    read_image(path)
        .and_then(GridData::into_cartesian)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn read_sinogram(path: &Path) -> CliResult<Sinogram> {
    read_image(path)
        .and_then(GridData::into_sinogram)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn phantom_image(kind: PhantomKind, n: usize, seed: u64, count: usize) -> CliResult<CartesianImage> {
    Ok(match kind {
        PhantomKind::SheppLogan => rasterize(&shepp_logan(), n),
        PhantomKind::Circ => circ_phantom(n),
        PhantomKind::Points => {
            // unit mass per point on the nearest node
            let pts = point_sources(count, seed)?;
            let mut img = CartesianImage::zeros(n, n);
            let w = 1.0 / (img.dx() * img.dy());
            for &(x, y) in &pts.points {
                let ix = ((x + 1.0) / img.dx()).round() as usize;
                let iy = ((y + 1.0) / img.dy()).round() as usize;
                img.values[iy.min(n - 1) * n + ix.min(n - 1)] += w;
            }
            img
        }
    })
}

fn parse_sectors(path: &Path) -> CliResult<Vec<Sector>> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| Failure::Usage(format!("{}:{}: expected numbers", path.display(), lineno + 1)))?;
        if v.len() != 3 {
            return Err(Failure::Usage(format!(
                "{}:{}: expected `theta0 beta rescale`, got {} fields",
                path.display(),
                lineno + 1,
                v.len()
            )));
        }
        out.push(Sector { theta0: v[0], beta: v[1], rescale: v[2] });
    }
    if out.is_empty() {
        return Err(Failure::Usage(format!("{}: no sectors", path.display())));
    }
    Ok(out)
}

fn write_grid(obj: impl Into<GridData>, path: &Path) -> CliResult<()> {
    write_image(&obj.into(), path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn run_phantom(a: PhantomArgs) -> CliResult<()> {
    if a.n < 2 {
        return Err(Failure::Usage(format!("n must be >= 2, got {}", a.n)));
    }
    write_grid(phantom_image(a.kind, a.n, a.seed, a.count)?, &a.out)
}

fn run_radon(a: RadonArgs) -> CliResult<()> {
    if a.nt < 2 || a.ntheta < 1 {
        return Err(Failure::Usage(format!("need nt >= 2 and ntheta >= 1, got {} and {}", a.nt, a.ntheta)));
    }
    let g = match (&a.r#in, a.kind) {
        (Some(path), _) => {
            let img = read_cartesian(path)?;
            radon_numeric(&img, a.nt, a.ntheta, img.dx().min(img.dy()) / 2.0)?
        }
        (None, Some(kind)) if a.analytic => match kind {
            PhantomKind::SheppLogan => radon_ellipses(&shepp_logan(), a.nt, a.ntheta),
            PhantomKind::Circ => radon_ellipses(&EllipseSet::disk(1.0, 1.0), a.nt, a.ntheta),
            PhantomKind::Points => radon_points(&point_sources(a.count, a.seed)?, a.nt, a.ntheta),
        },
        (None, Some(kind)) => {
            let img = phantom_image(kind, a.n.unwrap_or(a.nt), a.seed, a.count)?;
            radon_numeric(&img, a.nt, a.ntheta, img.dx().min(img.dy()) / 2.0)?
        }
        (None, None) => return Err(Failure::Usage("radon needs --in or --kind".into())),
    };
    let g = match a.noise_scale {
        Some(scale) => add_poisson_noise(&g, &NoiseSpec::new(scale, a.seed)?),
        None => g,
    };
    write_grid(g, &a.out)
}

fn run_backproject(a: BackprojectArgs) -> CliResult<()> {
    let g = read_sinogram(&a.r#in)?;
    let n = a.n.unwrap_or(g.nt);
    let dc_mode = match a.dc_mode {
        DcArg::SubtractMean => DcMode::SubtractMean,
        DcArg::KernelCap => DcMode::KernelCap,
    };
    let img = match a.method {
        Method::Naive => backproject_naive(&g, n),
        Method::Circles => backproject_circles(&g, n, a.circle_nodes.unwrap_or_else(|| default_circle_nodes(&g))),
        Method::Bst => bst_backproject(&g, &BstOptions { beta: a.beta, zero_pad: a.zero_pad, dc_mode, n_out: n })?,
        Method::Logpolar => {
            let opts = LogPolarOptions { rho0_mode: a.rho0, zero_pad: a.zero_pad, ..Default::default() };
            let r = logpolar_backproject(&g, &opts, n)?;
            log::info!("log-polar mesh: rho0 {:.4}, nrho {}, fovea radius {:.4e}", r.rho0, r.nrho, r.fovea_radius);
            r.image
        }
        Method::Partial => {
            let sectors = match &a.sectors {
                Some(path) => parse_sectors(path)?,
                None => default_sectors(DEFAULT_SECTOR_BETA, DEFAULT_SECTOR_RESCALE),
            };
            partial_backproject(&g, &sectors, n)?
        }
    };
    write_grid(img, &a.out)
}

fn run_fbp(a: FbpArgs) -> CliResult<()> {
    let g = read_sinogram(&a.r#in)?;
    let n = a.n.unwrap_or(g.nt);
    let img = if a.fst {
        regularized_fst_reconstruct(&g, a.lambda, n)?
    } else {
        let spec = if a.lambda == 0.0 { FilterSpec::ramp() } else { FilterSpec::tikhonov(a.lambda) };
        fbp(&g, &spec.with_cutoff(a.cutoff), a.engine, n)?
    };
    write_grid(img, &a.out)
}

fn run_bench(study: Study) -> CliResult<()> {
    match study {
        Study::Scaling { k_max, naive_k_max, reps, methods, out_csv } => {
            let mut records = Vec::new();
            for &m in &methods {
                let top = if m == Engine::Naive { naive_k_max.min(k_max) } else { k_max };
                let ks: Vec<u32> = (0..=top).collect();
                records.extend(bench_scaling(&ks, &[m], reps)?);
            }
            write_text(&out_csv, &to_csv(&records))?;
            for &m in &methods {
                if let Some(s) = scaling_slope(&records, m) {
                    println!("{}: log2(time)/log2(N) slope {s:.2}", tomo_core::harness::method_name(m));
                }
            }
        }
        Study::Zeropad { zs, n, reps, out_csv } => {
            write_text(&out_csv, &to_csv(&bench_zero_padding(&zs, n, reps)?))?;
        }
        Study::Noise { levels, methods, n, lambda, seed, out_csv } => {
            write_text(&out_csv, &to_csv(&bench_noise(&levels, &methods, n, lambda, seed)?))?;
        }
    }
    Ok(())
}

fn run_compare(a: CompareArgs) -> CliResult<()> {
    let ia = read_cartesian(&a.a)?;
    let ib = read_cartesian(&a.b)?;
    let report = CompareReport {
        mse: mse(&ia, &ib)?,
        rel_l2: relative_l2(&ia, &ib)?,
        hf_energy_a: hf_energy(&ia, 0.5),
        hf_energy_b: hf_energy(&ib, 0.5),
    };
    println!(
        "mse {:e}\nrel_l2 {:e}\nhf_energy(a) {:e}\nhf_energy(b) {:e}",
        report.mse, report.rel_l2, report.hf_energy_a, report.hf_energy_b
    );
    if let Some(path) = a.report {
        let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::Runtime(e.to_string()))?;
        write_text(&path, &(json + "\n"))?;
    }
    Ok(())
}

fn run_export(a: ExportArgs) -> CliResult<()> {
    let img = match read_image(&a.r#in).map_err(|e| Failure::Runtime(format!("{}: {e}", a.r#in.display())))? {
        GridData::Cartesian(img) => img,
        GridData::Sinogram(g) => CartesianImage::new(g.nt, g.ntheta, g.values)?,
        other => {
            return Err(Failure::Usage(format!(
                "export-pgm takes a cartesian image or a sinogram, got {:?}",
                other.kind()
            )))
        }
    };
    export_pgm(&img, &a.out).map_err(|e| Failure::Runtime(format!("{}: {e}", a.out.display())))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = with_env_threads(move || match cli.command {
        Command::Phantom(a) => run_phantom(a),
        Command::Radon(a) => run_radon(a),
        Command::Backproject(a) => run_backproject(a),
        Command::Fbp(a) => run_fbp(a),
        Command::Bench { study } => run_bench(study),
        Command::Compare(a) => run_compare(a),
        Command::ExportPgm(a) => run_export(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn rho0_parser() {
        assert_eq!(parse_rho0("auto").unwrap(), Rho0Mode::Adaptive);
        assert_eq!(parse_rho0("-3.5").unwrap(), Rho0Mode::Explicit(-3.5));
        assert!(parse_rho0("0.5").unwrap_err().contains("rho0 must be negative"));
        assert!(parse_rho0("0").is_err());
        assert!(parse_rho0("abc").is_err());
    }

    #[test]
    fn sector_table() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.txt");
        fs::write(&p, "# theta0 beta rescale\n0.3927 0.3927 0.25\n1.1781 0.3927 0.25\n").unwrap();
        let s = parse_sectors(&p).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s[1].theta0 - 3.0 * PI / 8.0).abs() < 1e-4);
        fs::write(&p, "0.1 0.2\n").unwrap();
        assert!(matches!(parse_sectors(&p), Err(Failure::Usage(_))));
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
