//! `iriskit` command line. Exit codes: 0 success, 1 domain error (bad
//! image, segmentation failure, unusable data), 2 usage or configuration
//! error.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use iriskit::config::{parse_pairs, Config, ConfigError};
use iriskit::evaluation::{build_report, run_protocol, EvalError};
use iriskit::imagecore::{load_pgm, save_pgm, GrayImage};
use iriskit::manifest::{ImageKind, MANIFEST_FILE};
use iriskit::matching::match_templates;
use iriskit::normalization::normalize;
use iriskit::pipeline::PipelineError;
use iriskit::segmentation::{draw_overlay, segment_eye, EyelidLine, SegmentationError};
use iriskit::spoofsim::{build_dataset, PreprocessChain, RecaptureParams, SpoofError};
use iriskit::{encode, IrisTemplate};

#[derive(Debug, Parser)]
#[command(name = "iriskit", version, about = "Iris verification pipeline and direct-attack evaluation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Config file of `section.key = value` lines
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable, applied after the file
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Worker threads for synth and eval (default: all cores)
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic dataset of real captures and their printed fakes
    Synth {
        /// Number of users; each contributes two eyes
        #[arg(long, default_value_t = 27)]
        users: u32,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Dataset seed
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Preprocessing chain applied before printing (preset name or step list)
        #[arg(long)]
        chain: Option<String>,
        /// Recapture preset name
        #[arg(long)]
        recapture: Option<String>,
    },
    /// Locate pupil, iris and eyelids in a PGM image
    Segment {
        image: PathBuf,
        /// Write the image with the fitted boundaries drawn in white
        #[arg(long, value_name = "PGM")]
        overlay: Option<PathBuf>,
    },
    /// Unwrap the iris into the rectangular pattern
    Normalize {
        image: PathBuf,
        /// Pattern image (angular x radial)
        #[arg(long, value_name = "PGM")]
        out: PathBuf,
        /// Validity mask image, masked samples white
        #[arg(long, value_name = "PGM")]
        mask: Option<PathBuf>,
    },
    /// Encode a PGM image into a binary iris template
    Encode {
        image: PathBuf,
        #[arg(long, value_name = "TMPL")]
        out: PathBuf,
    },
    /// Compare two templates and print the masked Hamming distance
    Match { a: PathBuf, b: PathBuf },
    /// Run the verification and attack protocol over a dataset manifest
    Eval {
        manifest: PathBuf,
        /// Output directory for scores.csv, report.json and report.txt
        /// (default: the manifest's directory)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List preprocessing-chain and recapture presets
    PresetList,
    /// Print the effective configuration
    ShowConfig,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Domain(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn domain(e: impl fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

fn segmentation_error(e: SegmentationError) -> CliError {
    match e {
        SegmentationError::InvalidParameters(m) => CliError::Usage(format!("invalid segmentation parameters: {m}")),
        _ => CliError::Domain("segmentation failure".into()),
    }
}

fn pipeline_error(e: PipelineError) -> CliError {
    match e {
        PipelineError::Segmentation(s) => segmentation_error(s),
        other => domain(other),
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InvalidConfig(m) => CliError::Usage(format!("invalid configuration: {m}")),
            other => domain(other),
        }
    }
}

impl From<SpoofError> for CliError {
    fn from(e: SpoofError) -> Self {
        match e {
            SpoofError::InvalidParams(m) => CliError::Usage(format!("invalid parameters: {m}")),
            other => domain(other),
        }
    }
}

fn load_config(opts: &GlobalOpts) -> Result<Config, CliError> {
    let mut config = Config::default();
    let mut pairs: Vec<(String, String)> = Vec::new();
    if let Some(path) = &opts.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        pairs.extend(parse_pairs(&text)?.into_iter().map(|(_, k, v)| (k, v)));
    }
    config.apply_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    let mut flags = Vec::new();
    for o in &opts.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got '{o}'")))?;
        flags.push((k.trim(), v.trim()));
    }
    config.apply_pairs(flags)?;
    config.validate()?;
    Ok(config)
}

fn read_image(path: &Path) -> Result<GrayImage, CliError> {
    let bytes = std::fs::read(path).map_err(|e| domain(format!("cannot read {}: {e}", path.display())))?;
    load_pgm(&bytes).map_err(|e| domain(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| domain(format!("cannot write {}: {e}", path.display())))
}

fn read_template(path: &Path) -> Result<IrisTemplate, CliError> {
    let bytes = std::fs::read(path).map_err(|e| domain(format!("cannot read {}: {e}", path.display())))?;
    IrisTemplate::from_serialized(&bytes).map_err(|e| domain(format!("{}: {e}", path.display())))
}

fn describe_line(name: &str, line: Option<EyelidLine>) -> String {
    match line {
        Some(l) => format!("{name} a={:.6} b={:.6} c={:.3}", l.a, l.b, l.c),
        None => format!("{name} none"),
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let config = load_config(&cli.global)?;
    if let Some(n) = cli.global.jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        // a pool may already exist when run() is called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let pipeline = &config.protocol.pipeline;
    let io = |e: std::io::Error| domain(e);
    match cli.command {
        Command::Synth { users, out: dir, seed, chain, recapture } => {
            let chain = match chain {
                Some(c) => c.parse::<PreprocessChain>().map_err(|e| CliError::Usage(format!("--chain: {e}")))?,
                None => config.chain.clone(),
            };
            let rp = match recapture {
                Some(name) => {
                    let preset = RecaptureParams::preset(&name)
                        .ok_or_else(|| CliError::Usage(format!("unknown recapture preset '{name}'")))?;
                    RecaptureParams { screen_seed: config.recapture.screen_seed, ..preset }
                }
                None => config.recapture.clone(),
            };
            if users == 0 {
                return Err(CliError::Usage("--users must be at least 1".into()));
            }
            let manifest = build_dataset(users, &dir, &config.distribution, &rp, &chain, seed)?;
            writeln!(
                out,
                "wrote {} real and {} fake images to {}",
                manifest.count(ImageKind::Real),
                manifest.count(ImageKind::Fake),
                dir.join(MANIFEST_FILE).display()
            )
            .map_err(io)?;
        }
        Command::Segment { image, overlay } => {
            let img = read_image(&image)?;
            let seg = segment_eye(&img, &pipeline.segmentation).map_err(segmentation_error)?;
            let (p, i) = (seg.pupil, seg.iris);
            writeln!(out, "pupil cx={} cy={} r={} score={:.4}", p.cx, p.cy, p.r, seg.pupil_score).map_err(io)?;
            writeln!(out, "iris cx={} cy={} r={} score={:.4}", i.cx, i.cy, i.r, seg.iris_score).map_err(io)?;
            writeln!(out, "{}", describe_line("upper_eyelid", seg.upper_eyelid)).map_err(io)?;
            writeln!(out, "{}", describe_line("lower_eyelid", seg.lower_eyelid)).map_err(io)?;
            if let Some(path) = overlay {
                write_file(&path, &save_pgm(&draw_overlay(&img, &seg)))?;
            }
        }
        Command::Normalize { image, out: path, mask } => {
            let img = read_image(&image)?;
            let seg = segment_eye(&img, &pipeline.segmentation).map_err(segmentation_error)?;
            let pattern = normalize(&img, &seg, pipeline.radial_res, pipeline.angular_res).map_err(domain)?;
            write_file(&path, &save_pgm(&pattern.to_image()))?;
            if let Some(m) = mask {
                write_file(&m, &save_pgm(&pattern.mask_image()))?;
            }
            let masked = pattern.mask().iter().filter(|&&m| m).count();
            writeln!(out, "pattern {}x{} masked={}", pattern.radial_res(), pattern.angular_res(), masked).map_err(io)?;
        }
        Command::Encode { image, out: path } => {
            let img = read_image(&image)?;
            let seg = segment_eye(&img, &pipeline.segmentation).map_err(segmentation_error)?;
            let pattern = normalize(&img, &seg, pipeline.radial_res, pipeline.angular_res)
                .map_err(|e| pipeline_error(e.into()))?;
            let template = encode(&pattern, &pipeline.log_gabor).map_err(|e| pipeline_error(e.into()))?;
            write_file(&path, &template.to_bytes())?;
            writeln!(out, "bits={} noise={}", template.len_bits(), template.noise_count()).map_err(io)?;
        }
        Command::Match { a, b } => {
            let (x, y) = (read_template(&a)?, read_template(&b)?);
            let m = match_templates(&x, &y, pipeline.shift_budget).map_err(domain)?;
            writeln!(out, "hd={:.6} shift={} bits={}", m.hd, m.best_shift, m.effective_bits).map_err(io)?;
        }
        Command::Eval { manifest, out: dir } => {
            let m = iriskit::manifest::DatasetManifest::load(&manifest).map_err(domain)?;
            let scores = run_protocol(&m, &config.protocol)?;
            let report = build_report(&scores, &config.protocol.far_targets)?;
            let dir = dir.unwrap_or_else(|| m.root.clone());
            std::fs::create_dir_all(&dir).map_err(|e| domain(format!("cannot create {}: {e}", dir.display())))?;
            let table = report.to_table();
            write_file(&dir.join("scores.csv"), &scores.to_csv())?;
            write_file(&dir.join("report.json"), report.to_json().as_bytes())?;
            write_file(&dir.join("report.txt"), table.as_bytes())?;
            write!(out, "{table}").map_err(io)?;
        }
        Command::PresetList => {
            writeln!(out, "preprocessing chains:").map_err(io)?;
            for (name, chain) in PreprocessChain::presets() {
                writeln!(out, "  {name:<16} {chain}").map_err(io)?;
            }
            writeln!(out, "recapture presets:").map_err(io)?;
            for (name, p) in RecaptureParams::presets() {
                writeln!(
                    out,
                    "  {name:<16} pitch={} blur={} contrast={} noise={} highlight={}",
                    p.dot_pitch,
                    p.blur_sigma,
                    p.contrast,
                    p.noise_sigma,
                    if p.highlight.is_some() { "on" } else { "off" }
                )
                .map_err(io)?;
            }
        }
        Command::ShowConfig => write!(out, "{}", config.to_text()).map_err(io)?,
    }
    Ok(())
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to standard error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
