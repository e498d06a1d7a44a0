//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::calib::{self, CalibSample};
use crate::compensate::compensate_frame;
use crate::manifest::{ProfileRef, RunManifest};
use crate::metrics::{self, evaluate_sequence, psnr_round, EvaluationPlan, RegionMask};
use crate::par::{self, Parallelism};
use crate::pnm;
use crate::projection::{make_equisolid, CalibrationProfile};
use crate::search::{estimate, Method, MotionField, SearchConfig};
use crate::synth::{self, frame_file_name, generate_sequence, PlaneScene};
use crate::{Error, Frame, Result};

pub const CURVE_POINTS: usize = 512;

#[derive(Debug, Parser)]
#[command(name = "fisheye-me", version, about = "Fisheye-aware block motion estimation and compensation")]
pub struct Cli {
    /// Cap the worker pool.
    #[arg(long, global = true, env = "FISHEYE_ME_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate a motion field between two frames.
    Estimate(EstimateArgs),
    /// Build the motion-compensated prediction of the current frame.
    Compensate(CompensateArgs),
    /// Mean round-region PSNR of several methods over a frame sequence.
    Evaluate(EvaluateArgs),
    /// Render a synthetic translational fisheye sequence.
    Synth(SynthArgs),
    /// Fit the radial polynomial to (theta, radius) samples.
    Fit(FitArgs),
    /// Export the radius-over-angle curve of a profile.
    Curve(CurveArgs),
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[arg(long)]
    method: String,
    #[arg(long, default_value_t = 16)]
    block_size: usize,
    #[arg(long, default_value_t = 64)]
    search_range: i32,
    /// Calibration profile JSON; required for every method except tme.
    #[arg(long)]
    calib: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    cur: PathBuf,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct CompensateArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    cur: PathBuf,
    #[command(flatten)]
    search: SearchArgs,
    /// Motion field JSON from `estimate`; estimated on the fly when absent.
    #[arg(long)]
    field: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Directory of frame_NNNN.pgm files.
    #[arg(long)]
    seq_dir: PathBuf,
    /// Inclusive frame range `a:b`.
    #[arg(long)]
    frames: String,
    /// Comma-separated method list.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "16")]
    block_sizes: Vec<usize>,
    #[arg(long, default_value_t = 64)]
    search_range: i32,
    #[arg(long)]
    calib: Option<PathBuf>,
    /// Sequence name in the report; defaults to the directory name.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    /// Profile to render through; otherwise an equisolid lens from the flags below.
    #[arg(long)]
    calib: Option<PathBuf>,
    #[arg(long, default_value_t = 173.0)]
    focal_length: f64,
    #[arg(long, default_value_t = 185.0)]
    fov_deg: f64,
    /// Image center `cx,cy`; defaults to the frame center.
    #[arg(long, value_parser = parse_pair)]
    center: Option<(f64, f64)>,
    #[arg(long, default_value_t = 512)]
    width: usize,
    #[arg(long, default_value_t = 512)]
    height: usize,
    #[arg(long, default_value_t = 10)]
    frames: usize,
    /// Texture offset per frame `du,dv`.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true, default_value = "8,0")]
    step: (f64, f64),
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Tileable PGM texture instead of the built-in pattern.
    #[arg(long)]
    texture: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    supersample: u32,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// CSV with a `theta_rad,radius_px` header.
    #[arg(long)]
    samples: PathBuf,
    #[arg(long, default_value_t = 4)]
    degree: usize,
    /// Pin a_0 to zero.
    #[arg(long)]
    through_origin: bool,
    /// With --center and --fov-deg, also write profile.json.
    #[arg(long)]
    focal_length: Option<f64>,
    #[arg(long, value_parser = parse_pair)]
    center: Option<(f64, f64)>,
    #[arg(long)]
    fov_deg: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[arg(long)]
    calib: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return 2;
        }
        par::set_thread_limit(n);
    }
    let result = match cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Compensate(a) => cmd_compensate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Curve(a) => cmd_curve(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

struct Resolved {
    cfg: SearchConfig,
    profile: Option<CalibrationProfile>,
    profile_ref: Option<ProfileRef>,
}

fn resolve_search(args: &SearchArgs) -> Result<Resolved> {
    let method: Method = args.method.parse()?;
    let cfg = SearchConfig::new(args.block_size, args.search_range, method)?;
    if method.needs_profile() && args.calib.is_none() {
        return Err(Error::Usage(format!("--method {method} requires --calib")));
    }
    let (profile, profile_ref) = load_optional_profile(args.calib.as_deref())?;
    Ok(Resolved {
        cfg,
        profile,
        profile_ref,
    })
}

fn load_optional_profile(path: Option<&Path>) -> Result<(Option<CalibrationProfile>, Option<ProfileRef>)> {
    match path {
        Some(p) => Ok((Some(calib::load_profile(p)?), Some(ProfileRef::from_file(p)?))),
        None => Ok((None, None)),
    }
}

fn search_manifest(command: &str, r: &Resolved, frames: Vec<String>) -> RunManifest {
    let mut m = RunManifest::new(command);
    m.method = Some(r.cfg.method.to_string());
    m.block_sizes = vec![r.cfg.block_size];
    m.search_range = Some(r.cfg.search_range);
    m.profile = r.profile_ref.clone();
    m.frames = frames;
    m.notes = method_notes(r.cfg.method, r.profile.as_ref());
    m
}

fn method_notes(method: Method, profile: Option<&CalibrationProfile>) -> Vec<String> {
    let mut notes = Vec::new();
    if let Some(p) = profile {
        if method.needs_profile() && p.is_ultra_wide() && !method.wide_mode() {
            notes.push(
                "naive wide-angle handling: rays beyond 90 degrees are shifted without re-mapping"
                    .to_string(),
            );
        }
    }
    notes
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

fn display(paths: &[&Path]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}

fn cmd_estimate(a: EstimateArgs) -> Result<()> {
    let r = resolve_search(&a.search)?;
    let reference = pnm::read_pgm(&a.reference)?;
    let cur = pnm::read_pgm(&a.cur)?;
    let field = estimate(&cur, &reference, &r.cfg, r.profile.as_ref())?;
    create_dir(&a.out_dir)?;
    write_file(a.out_dir.join("field.json"), field.to_json())?;
    search_manifest("estimate", &r, display(&[&a.reference, &a.cur])).write_to(&a.out_dir)
}

fn cmd_compensate(a: CompensateArgs) -> Result<()> {
    let r = resolve_search(&a.search)?;
    let reference = pnm::read_pgm(&a.reference)?;
    let cur = pnm::read_pgm(&a.cur)?;
    if !cur.same_dimensions(&reference) {
        return Err(Error::Usage("--ref and --cur differ in size".into()));
    }
    let field = match &a.field {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            MotionField::from_json(&text, reference.width(), reference.height(), r.cfg.block_size, r.cfg.method)?
        }
        None => estimate(&cur, &reference, &r.cfg, r.profile.as_ref())?,
    };
    let (pred, mask) = compensate_frame(&reference, &field, &r.cfg, r.profile.as_ref())?;
    let region = match &r.profile {
        Some(p) => RegionMask::round(cur.width(), cur.height(), p),
        None => RegionMask::full(cur.width(), cur.height()),
    };
    let psnr = psnr_round(&cur, &pred, &region)?;

    create_dir(&a.out_dir)?;
    pnm::write_pgm(&a.out_dir.join("compensated.pgm"), &pred)?;
    pnm::write_ppm(&a.out_dir.join("mask.ppm"), mask.width, mask.height, &mask.to_rgb())?;
    pnm::write_ppm(&a.out_dir.join("overlay.ppm"), mask.width, mask.height, &mask.overlay(&pred)?)?;
    write_file(a.out_dir.join("decisions.csv"), mask.to_csv())?;
    if a.field.is_none() {
        write_file(a.out_dir.join("field.json"), field.to_json())?;
    }
    let mut frames = vec![a.reference.as_path(), a.cur.as_path()];
    if let Some(f) = &a.field {
        frames.push(f);
    }
    search_manifest("compensate", &r, display(&frames)).write_to(&a.out_dir)?;
    println!("method={} psnr_db={}", r.cfg.method, metrics::format_db(psnr));
    Ok(())
}

/// Inclusive `a:b` with at least two frames.
pub fn parse_frame_range(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Usage(format!("--frames expects a:b with a < b, got `{s}`"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if b <= a {
        return Err(bad());
    }
    Ok((a, b))
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let (first, last) = parse_frame_range(&a.frames)?;
    if a.methods.is_empty() {
        return Err(Error::Usage("--methods must name at least one method".into()));
    }
    let methods = a
        .methods
        .iter()
        .map(|m| m.trim().parse::<Method>())
        .collect::<Result<Vec<_>>>()?;
    for &bs in &a.block_sizes {
        SearchConfig::new(bs, a.search_range, Method::Tme)?;
    }
    if a.calib.is_none() {
        if let Some(m) = methods.iter().find(|m| m.needs_profile()) {
            return Err(Error::Usage(format!("--method {m} requires --calib")));
        }
    }
    let (profile, profile_ref) = load_optional_profile(a.calib.as_deref())?;
    let paths: Vec<PathBuf> = (first..=last).map(|n| a.seq_dir.join(frame_file_name(n))).collect();
    let frames = paths.iter().map(|p| pnm::read_pgm(p)).collect::<Result<Vec<Frame>>>()?;

    let sequence = a.name.clone().unwrap_or_else(|| {
        a.seq_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "sequence".into())
    });
    let plan = EvaluationPlan {
        sequence,
        frames: format!("{first}-{last}"),
        methods: methods.clone(),
        block_sizes: a.block_sizes.clone(),
        search_range: a.search_range,
        parallelism: Parallelism::default(),
    };
    let report = evaluate_sequence(&frames, &plan, profile.as_ref())?;
    match &a.out_dir {
        Some(dir) => {
            create_dir(dir)?;
            write_file(dir.join("report.csv"), report.to_csv())?;
            write_file(dir.join("report.txt"), report.to_text())?;
            let mut m = RunManifest::new("evaluate");
            m.methods = methods.iter().map(|m| m.to_string()).collect();
            m.block_sizes = a.block_sizes.clone();
            m.search_range = Some(a.search_range);
            m.profile = profile_ref;
            m.frames = paths.iter().map(|p| p.display().to_string()).collect();
            for method in &methods {
                for note in method_notes(*method, profile.as_ref()) {
                    m.notes.push(format!("{method}: {note}"));
                }
            }
            m.write_to(dir)?;
            print!("{}", report.to_text());
        }
        None => print!("{}", report.to_csv()),
    }
    let _ = std::io::stdout().flush();
    Ok(())
}

/// `x,y` as two finite numbers.
fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `x,y`, got `{s}`"))?;
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("`{v}` is not a finite number"))
    };
    Ok((num(a)?, num(b)?))
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    if a.width == 0 || a.height == 0 {
        return Err(Error::Usage("--width and --height must be positive".into()));
    }
    let (profile, profile_ref) = match &a.calib {
        Some(p) => (calib::load_profile(p)?, Some(ProfileRef::from_file(p)?)),
        None => {
            let center = a.center
                .unwrap_or(((a.width as f64 - 1.0) / 2.0, (a.height as f64 - 1.0) / 2.0));
            let p = make_equisolid(a.focal_length, center, a.fov_deg).map_err(|e| Error::Usage(e.to_string()))?;
            (p, None)
        }
    };
    let mut scene = PlaneScene::standard().with_supersampling(a.supersample);
    if let Some(t) = &a.texture {
        scene.texture = pnm::read_pgm(t)?;
    }
    if !(a.scale.is_finite() && a.scale > 0.0) {
        return Err(Error::Usage(format!("--scale must be positive, got {}", a.scale)));
    }
    scene.scale = a.scale;
    let seq = generate_sequence(&scene, &profile, a.width, a.height, a.frames, a.step)?;
    seq.write_to(&a.out_dir)?;
    calib::save_profile(&a.out_dir.join("profile.json"), &profile)?;

    let mut m = RunManifest::new("synth");
    m.profile = profile_ref;
    m.frames = (1..=a.frames).map(synth::frame_file_name).collect();
    m.notes.push(format!(
        "step={},{} scale={} supersample={}",
        a.step.0, a.step.1, a.scale, scene.supersample
    ));
    m.write_to(&a.out_dir)
}

fn fit_output(fit: &calib::PolyFit) -> String {
    serde_json::to_string_pretty(&serde_json::json!({
        "coeffs": fit.coeffs,
        "rms_residual": fit.rms_residual,
    }))
    .expect("fit serializes")
        + "\n"
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let samples: Vec<CalibSample> = calib::read_samples_csv(&a.samples)?;
    let fit = if a.through_origin {
        calib::fit_polynomial_through_origin(&samples, a.degree)?
    } else {
        calib::fit_polynomial(&samples, a.degree)?
    };
    let profile = match (a.focal_length, a.center, a.fov_deg) {
        (Some(f), Some(c), Some(fov)) => Some(
            CalibrationProfile::polynomial(fit.coeffs.clone(), f, c, fov).map_err(|e| {
                let hint = if a.through_origin { "" } else { " (try --through-origin)" };
                Error::Profile(format!("fitted polynomial is not a usable profile: {e}{hint}"))
            })?,
        ),
        (None, None, None) => None,
        _ => {
            return Err(Error::Usage(
                "--focal-length, --center and --fov-deg go together".into(),
            ))
        }
    };
    let text = fit_output(&fit);
    if let Some(dir) = &a.out_dir {
        create_dir(dir)?;
        write_file(dir.join("fit.json"), &text)?;
        if let Some(p) = &profile {
            calib::save_profile(&dir.join("profile.json"), p)?;
        }
        let mut m = RunManifest::new("fit");
        m.frames = vec![a.samples.display().to_string()];
        m.notes.push(format!("degree={} through_origin={}", a.degree, a.through_origin));
        m.write_to(dir)?;
    }
    print!("{text}");
    Ok(())
}

/// `theta_rad,radius_px` over a uniform grid on `[0, theta_max]`.
pub fn curve_csv(profile: &CalibrationProfile, points: usize) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["theta_rad", "radius_px"]).expect("in-memory write");
    let tmax = profile.theta_max();
    for i in 0..points {
        let t = if i + 1 == points {
            tmax
        } else {
            tmax * i as f64 / (points - 1) as f64
        };
        w.write_record([t.to_string(), profile.radius(t).to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

fn cmd_curve(a: CurveArgs) -> Result<()> {
    let profile = calib::load_profile(&a.calib)?;
    let csv = curve_csv(&profile, CURVE_POINTS);
    match &a.out_dir {
        Some(dir) => {
            create_dir(dir)?;
            write_file(dir.join("curve.csv"), &csv)?;
            let mut m = RunManifest::new("curve");
            m.profile = Some(ProfileRef::from_file(&a.calib)?);
            m.write_to(dir)?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}
