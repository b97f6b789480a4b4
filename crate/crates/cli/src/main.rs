//! Command-line verification pipelines over the confspace library.
//!
//! Exit codes: 0 = all checks passed, 1 = usage error, 2 = a check failed,
//! 3 = the parameters sit on the excluded locus where the two-coinciding
//! orbits cannot be certified. Diagnostics go to stderr; data goes to the
//! requested output paths (`--out -` writes the data to stdout).

mod report;

use std::io::Write;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use confspace::catalog::{
    closed_form_point, excluded_case, full_catalog, rank_deficiency_search, CatalogLabel,
    SingularPointRecord,
};
use confspace::classify::classify;
use confspace::curve::{emit_plot_samples, write_plot_data};
use confspace::mechanism::{
    build_delta, from_tilde, lift_pose, Configuration, DeltaVariant, ParameterSet, PlatformPose,
    CONFIG_DIM,
};
use confspace::numeric::ToleranceConfig;
use confspace::witness::{certify_with, witness_paths_with_width, NonManifoldCertificate};
use report::{g15, to_deterministic_json, RunReport};

#[derive(Parser)]
#[command(
    name = "confspace",
    version,
    about = "Constraint-variety analysis of parallel mechanisms: singular catalogs, symmetry orbits, and non-manifold certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Args)]
struct DeltaArgs {
    /// Upper-arm length.
    #[arg(long)]
    a: f64,
    /// Lower-arm length.
    #[arg(long)]
    b: f64,
    /// Base/platform radius difference.
    #[arg(long)]
    d: f64,
}

impl DeltaArgs {
    fn params(&self) -> anyhow::Result<ParameterSet> {
        ParameterSet::new(self.a, self.b, self.d).map_err(|e| anyhow!("{e}"))
    }
}

#[derive(Args)]
struct TolArgs {
    /// Relative singular-value threshold for rank decisions.
    #[arg(long = "tol-rank", default_value_t = 1e-8)]
    tol_rank: f64,
    /// Base on-variety residual tolerance (scaled by b^2).
    #[arg(long = "tol-residual", default_value_t = 1e-9)]
    tol_residual: f64,
    /// Finite-difference step for tangents.
    #[arg(long = "fd-step", default_value_t = 1e-5)]
    fd_step: f64,
}

impl TolArgs {
    fn tolerances(&self) -> anyhow::Result<ToleranceConfig> {
        let tol = ToleranceConfig {
            rank_rel_tol: self.tol_rank,
            residual_tol: self.tol_residual,
            fd_step: self.fd_step,
            ..ToleranceConfig::default()
        };
        tol.validate().map_err(|e| anyhow!("{e}"))?;
        Ok(tol)
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Commands {
    /// Verify the full singular catalog and certify every point.
    Verify {
        #[command(flatten)]
        delta: DeltaArgs,
        #[command(flatten)]
        tols: TolArgs,
        /// On-variety samples per witness path.
        #[arg(long, default_value_t = 41)]
        samples: usize,
        /// Seed for sampling-based checks (recorded in the report).
        #[arg(long, default_value_t = 17)]
        seed: u64,
        /// Report path (`-` for stdout).
        #[arg(long, default_value = "confspace-report.json")]
        out: String,
    },
    /// Export the 24-point singular catalog.
    Orbit {
        #[command(flatten)]
        delta: DeltaArgs,
        #[command(flatten)]
        tols: TolArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Output path (`-` for stdout).
        #[arg(long, default_value = "catalog.json")]
        out: String,
    },
    /// Sample the four witness paths through a catalog point and write the
    /// certificate.
    Paths {
        #[command(flatten)]
        delta: DeltaArgs,
        #[command(flatten)]
        tols: TolArgs,
        /// Catalog label: q1, q2, q3 or q4.
        #[arg(long)]
        point: String,
        #[arg(long, default_value_t = 41)]
        samples: usize,
        /// Output directory for gamma*.csv and certificate.json.
        #[arg(long, default_value = ".")]
        out: String,
    },
    /// Classify a configuration (15 coordinates, or a platform pose).
    Classify {
        #[command(flatten)]
        delta: DeltaArgs,
        #[command(flatten)]
        tols: TolArgs,
        /// Comma-separated 15 coordinates in the documented order.
        #[arg(long, conflicts_with = "pose", allow_hyphen_values = true)]
        config: Option<String>,
        /// Comma-separated pose: px,py,pz,psi1,psi2,psi3.
        #[arg(long, allow_hyphen_values = true)]
        pose: Option<String>,
        #[arg(long, default_value = "classification.json")]
        out: String,
    },
    /// Search for rank-deficient points from random on-variety seeds.
    Search {
        #[command(flatten)]
        delta: DeltaArgs,
        #[command(flatten)]
        tols: TolArgs,
        /// Number of random seeds.
        #[arg(long, default_value_t = 100)]
        seeds: usize,
        /// Iteration budget per seed.
        #[arg(long, default_value_t = 60)]
        budget: usize,
        #[arg(long, default_value_t = 17)]
        seed: u64,
        #[arg(long, default_value = "candidates.json")]
        out: String,
    },
    /// Emit plot samples of the singular-but-manifold curve.
    Curve {
        #[arg(long, default_value_t = 400)]
        count: usize,
        /// Coefficient of the mixed term (1 = analyzed curve, 2 = figure).
        #[arg(long, default_value_t = 1.0)]
        coeff: f64,
        /// Sample range as `lo,hi`.
        #[arg(long, default_value = "-1,1", allow_hyphen_values = true)]
        range: String,
        #[arg(long, default_value = "plot.dat")]
        out: String,
    },
}

fn write_output(path: &str, content: &str) -> anyhow::Result<()> {
    if path == "-" {
        std::io::stdout()
            .write_all(content.as_bytes())
            .context("writing to stdout")?;
    } else {
        std::fs::write(path, content).with_context(|| format!("writing {path}"))?;
    }
    Ok(())
}

fn parse_floats(text: &str, expected: usize, what: &str) -> anyhow::Result<Vec<f64>> {
    let values: Result<Vec<f64>, _> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect();
    let values = values.with_context(|| format!("parsing {what} '{text}'"))?;
    if values.len() != expected {
        return Err(anyhow!(
            "{what} needs {expected} comma-separated numbers, got {}",
            values.len()
        ));
    }
    Ok(values)
}

fn record_to_value(r: &SingularPointRecord) -> Value {
    serde_json::to_value(r).expect("records serialize")
}

fn certificate_to_value(c: &NonManifoldCertificate) -> Value {
    serde_json::to_value(c).expect("certificates serialize")
}

fn cmd_verify(
    delta: &DeltaArgs,
    tols: &TolArgs,
    samples: usize,
    seed: u64,
    out: &str,
) -> anyhow::Result<i32> {
    let params = delta.params()?;
    let tol = tols.tolerances()?;
    let mut report = RunReport::new("verify", seed);
    report.params = Some((params.a(), params.b(), params.d()));
    let excluded = excluded_case(&params);

    let t0 = Instant::now();
    let catalog = match full_catalog(&params, &tol) {
        Ok(records) => {
            report.push_check(
                "catalog",
                true,
                serde_json::json!({
                    "points": records.len(),
                    "ranks": records.iter().map(|r| r.rank).collect::<Vec<_>>(),
                }),
            );
            records
        }
        Err(e) => {
            report.push_check("catalog", false, serde_json::json!({ "error": e.to_string() }));
            let json = to_deterministic_json(&report.to_json());
            write_output(out, &json)?;
            eprintln!("catalog verification failed: {e}");
            return Ok(2);
        }
    };
    report
        .timings_ms
        .insert("catalog".into(), t0.elapsed().as_secs_f64() * 1e3);

    let t1 = Instant::now();
    let mut certified = 0usize;
    let mut unavailable = 0usize;
    let mut failed = 0usize;
    for r in &catalog {
        let name = format!(
            "certificate/{}/{}",
            r.label.expect("catalog label"),
            r.element.expect("catalog element")
        );
        if !r.certificate_available {
            unavailable += 1;
            report.push_check(
                &name,
                true,
                serde_json::json!({ "status": "certificate unavailable (excluded parameters)" }),
            );
            continue;
        }
        match certify_with(&params, &r.configuration, &tol, 0.05, samples) {
            Ok(cert) => {
                certified += 1;
                report.push_check(
                    &name,
                    true,
                    serde_json::json!({
                        "span_rank": cert.span_rank,
                        "sigma_ratio":
                            cert.tangent_singular_values[3] / cert.tangent_singular_values[0],
                        "max_path_residual": cert.max_path_residual,
                    }),
                );
            }
            Err(e) => {
                failed += 1;
                report.push_check(&name, false, serde_json::json!({ "error": e.to_string() }));
            }
        }
    }
    report
        .timings_ms
        .insert("certificates".into(), t1.elapsed().as_secs_f64() * 1e3);
    if excluded {
        report.verdict_override = Some("excluded-case".to_string());
    }

    let json = to_deterministic_json(&report.to_json());
    write_output(out, &json)?;
    eprintln!(
        "verify: {certified} certified, {unavailable} unavailable, {failed} failed out of {} points",
        catalog.len()
    );
    if failed > 0 {
        Ok(2)
    } else if excluded {
        Ok(3)
    } else {
        Ok(0)
    }
}

fn cmd_orbit(
    delta: &DeltaArgs,
    tols: &TolArgs,
    format: Format,
    out: &str,
) -> anyhow::Result<i32> {
    let params = delta.params()?;
    let tol = tols.tolerances()?;
    let records = full_catalog(&params, &tol).map_err(|e| anyhow!("{e}"))?;
    let content = match format {
        Format::Json => {
            let value = Value::Array(records.iter().map(record_to_value).collect());
            to_deterministic_json(&value)
        }
        Format::Csv => {
            let mut text = SingularPointRecord::csv_header();
            text.push('\n');
            for r in &records {
                text.push_str(&r.to_csv_row(g15));
                text.push('\n');
            }
            text
        }
    };
    write_output(out, &content)?;
    eprintln!("orbit: wrote {} records", records.len());
    Ok(0)
}

fn cmd_paths(
    delta: &DeltaArgs,
    tols: &TolArgs,
    point: &str,
    samples: usize,
    out_dir: &str,
) -> anyhow::Result<i32> {
    let params = delta.params()?;
    let tol = tols.tolerances()?;
    let label: CatalogLabel = point.parse().map_err(|e: confspace::Error| anyhow!("{e}"))?;
    let x = closed_form_point(label, &params);
    let paths = witness_paths_with_width(&params, &x, &tol, 0.05).map_err(|e| anyhow!("{e}"))?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {out_dir}"))?;
    let tilde = build_delta(params, DeltaVariant::Tilde);
    let coord_names = [
        "x1", "y1", "z1", "x2", "y2", "z2", "x3", "y3", "z3", "ca1", "sa1", "ca2", "sa2", "ca3",
        "sa3",
    ];
    for path in &paths {
        let mut text = format!("t,{},residual_max\n", coord_names.join(","));
        for (t, config) in path.samples(samples).map_err(|e| anyhow!("{e}"))? {
            let residual = tilde
                .constraints()
                .residual_max(config.as_slice())
                .map_err(|e| anyhow!("{e}"))?;
            let coords: Vec<String> = config.as_slice().iter().map(|v| g15(*v)).collect();
            text.push_str(&format!("{},{},{}\n", g15(t), coords.join(","), g15(residual)));
        }
        let file = format!("{out_dir}/{}.csv", path.label);
        std::fs::write(&file, text).with_context(|| format!("writing {file}"))?;
    }
    let cert = certify_with(&params, &x, &tol, 0.05, samples).map_err(|e| anyhow!("{e}"))?;
    let cert_path = format!("{out_dir}/certificate.json");
    std::fs::write(&cert_path, to_deterministic_json(&certificate_to_value(&cert)))
        .with_context(|| format!("writing {cert_path}"))?;
    eprintln!(
        "paths: wrote 4 sample files and the certificate (span {}) to {out_dir}",
        cert.span_rank
    );
    Ok(0)
}

fn cmd_classify(
    delta: &DeltaArgs,
    tols: &TolArgs,
    config: Option<&str>,
    pose: Option<&str>,
    out: &str,
) -> anyhow::Result<i32> {
    let params = delta.params()?;
    let tol = tols.tolerances()?;
    let configuration = match (config, pose) {
        (Some(text), None) => {
            let values = parse_floats(text, CONFIG_DIM, "--config")?;
            Configuration::from_slice(&values).map_err(|e| anyhow!("{e}"))?
        }
        (None, Some(text)) => {
            let v = parse_floats(text, 6, "--pose")?;
            let lifted = lift_pose(
                &params,
                &PlatformPose {
                    position: confspace::nalgebra::Vector3::new(v[0], v[1], v[2]),
                    angles: [v[3], v[4], v[5]],
                },
            );
            from_tilde(&lifted)
        }
        _ => return Err(anyhow!("provide exactly one of --config or --pose")),
    };
    let m = build_delta(params, DeltaVariant::Original);
    let class = classify(&m, configuration.as_slice(), &tol).map_err(|e| anyhow!("{e}"))?;
    let value = serde_json::to_value(&class).expect("classification serializes");
    write_output(out, &to_deterministic_json(&value))?;
    eprintln!(
        "classify: css {:?}, endeffector {}, actuator {}, regular {}",
        class.css, class.endeffector_singular, class.actuator_singular, class.regular
    );
    Ok(0)
}

fn cmd_search(
    delta: &DeltaArgs,
    tols: &TolArgs,
    seeds: usize,
    budget: usize,
    seed: u64,
    out: &str,
) -> anyhow::Result<i32> {
    let params = delta.params()?;
    let tol = tols.tolerances()?;
    let m = build_delta(params, DeltaVariant::Original);
    let candidates =
        rank_deficiency_search(&m, seeds, budget, &tol, seed).map_err(|e| anyhow!("{e}"))?;
    let mut root = serde_json::Map::new();
    root.insert("schema".into(), Value::from(1));
    root.insert("seed".into(), Value::from(seed));
    root.insert("seeds".into(), Value::from(seeds));
    root.insert("budget".into(), Value::from(budget));
    root.insert(
        "candidates".into(),
        serde_json::to_value(&candidates).expect("candidates serialize"),
    );
    write_output(out, &to_deterministic_json(&Value::Object(root)))?;
    let matched = candidates.iter().filter(|c| c.matched.is_some()).count();
    eprintln!(
        "search: {} convergent candidates from {seeds} seeds ({matched} matched to the catalog)",
        candidates.len()
    );
    Ok(0)
}

fn cmd_curve(count: usize, coeff: f64, range: &str, out: &str) -> anyhow::Result<i32> {
    let bounds = parse_floats(range, 2, "--range")?;
    let samples =
        emit_plot_samples((bounds[0], bounds[1]), count, coeff).map_err(|e| anyhow!("{e}"))?;
    let mut buf = Vec::new();
    write_plot_data(&samples, &mut buf).context("formatting plot data")?;
    let content = String::from_utf8(buf).expect("plot data is utf8");
    write_output(out, &content)?;
    eprintln!("curve: wrote {} samples", samples.len());
    Ok(0)
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match &cli.command {
        Commands::Verify {
            delta,
            tols,
            samples,
            seed,
            out,
        } => cmd_verify(delta, tols, *samples, *seed, out),
        Commands::Orbit {
            delta,
            tols,
            format,
            out,
        } => cmd_orbit(delta, tols, *format, out),
        Commands::Paths {
            delta,
            tols,
            point,
            samples,
            out,
        } => cmd_paths(delta, tols, point, *samples, out),
        Commands::Classify {
            delta,
            tols,
            config,
            pose,
            out,
        } => cmd_classify(delta, tols, config.as_deref(), pose.as_deref(), out),
        Commands::Search {
            delta,
            tols,
            seeds,
            budget,
            seed,
            out,
        } => cmd_search(delta, tols, *seeds, *budget, *seed, out),
        Commands::Curve {
            count,
            coeff,
            range,
            out,
        } => cmd_curve(*count, *coeff, range, out),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
