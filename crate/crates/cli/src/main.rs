//! Command-line driver: device parameter reports, experiment execution,
//! curve fitting, the full benchmarking pipeline, and a reduced-scale
//! self-test.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use transim::analysis::{fit_exponential, fit_hanger, fit_ramsey, fit_rb, floor_se, FitResult};
use transim::clifford::PhysicalGate;
use transim::config::RunConfig;
use transim::dataset::{sha256_hex, CsvDataSet, DataSet};
use transim::device::DeviceSpec;
use transim::dynamics::{evolve, DensityState, StateDim};
use transim::error::Error;
use transim::experiments::{
    defaults, rb_sequence_audit, run_experiment, run_rb, ExperimentPlan, PlanKind,
};
use transim::pulse::Channel;
use transim::signal::{render_sequence, DEFAULT_IF_GHZ, DEFAULT_SAMPLE_RATE_GSPS};

mod selftest;

const SI_CFG: &str = include_str!("../configs/si.cfg");
const SOI_CFG: &str = include_str!("../configs/soi.cfg");

/// Environment variable naming the default output root.
const OUT_ENV: &str = "TRANSIM_OUT";

#[derive(Parser)]
#[command(
    name = "transim",
    version,
    about = "Transmon characterization simulator: parameter relations, pulse-level dynamics, \
             dispersive readout, benchmarking, and curve fitting"
)]
struct Cli {
    /// Worker threads for sweep execution (default: all cores). Results
    /// are identical at any worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DeviceName {
    Si,
    Soi,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WaveChannel {
    Xy,
    Readout,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every parameter relation and print the derived table next
    /// to the published reference column.
    Params {
        #[arg(long, conflicts_with = "config")]
        device: Option<DeviceName>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute the configured experiment and write datasets + manifest.
    Run {
        #[arg(long, conflicts_with = "config")]
        device: Option<DeviceName>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        shots: Option<u64>,
        /// Output root (default: $TRANSIM_OUT or ./runs).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump every shot record.
        #[arg(long)]
        dump_shots: bool,
    },
    /// Fit a stored dataset; the model is auto-selected from its label
    /// unless given.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: Option<String>,
        /// Fit even when the manifest hash does not match.
        #[arg(long)]
        force: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full benchmarking pipeline: paired reference + interleaved runs,
    /// decay fits, and the fidelity relations.
    Rb {
        #[arg(long, conflicts_with = "config")]
        device: Option<DeviceName>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Export the drawn Clifford sequences and compiled gates.
        #[arg(long)]
        export_sequences: bool,
    },
    /// Run the acceptance checks at reduced shot counts.
    Selftest,
    /// Render the first sweep point's pulse schedule through the IF chain
    /// and dump it as (time_ns, I, Q).
    Waveform {
        #[arg(long, conflicts_with = "config")]
        device: Option<DeviceName>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "xy")]
        channel: WaveChannel,
    },
    /// Evolve the first sweep point's sequence and dump the populations
    /// as (time_ns, p0, p1[, p2]).
    Trajectory {
        #[arg(long, conflicts_with = "config")]
        device: Option<DeviceName>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if let Err(e) =
            rayon::ThreadPoolBuilder::new().num_threads(workers).build_global()
        {
            eprintln!("error: cannot configure {workers} workers: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Usage(_) | Error::Domain(_) => 2,
        Error::Fit(_) => 3,
        Error::Io(_) => 1,
    }
}

fn dispatch(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Params { device, config, out } => cmd_params(device, config, out),
        Command::Run { device, config, seed, shots, out, dump_shots } => {
            cmd_run(device, config, seed, shots, out, dump_shots)
        }
        Command::Fit { data, model, force, out } => cmd_fit(&data, model, force, out),
        Command::Rb { device, config, seed, out, export_sequences } => {
            cmd_rb(device, config, seed, out, export_sequences)
        }
        Command::Selftest => Ok(selftest::run()),
        Command::Waveform { device, config, out, channel } => {
            cmd_waveform(device, config, &out, channel)
        }
        Command::Trajectory { device, config, out } => cmd_trajectory(device, config, &out),
    }
}

fn load_config(device: Option<DeviceName>, config: Option<PathBuf>) -> Result<RunConfig, Error> {
    match (device, config) {
        (Some(DeviceName::Si), None) => RunConfig::parse(SI_CFG),
        (Some(DeviceName::Soi), None) => RunConfig::parse(SOI_CFG),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(&path)?;
            RunConfig::parse(&text)
        }
        (None, None) => Err(Error::usage(
            "select a bundled device with --device {si,soi} or give --config PATH".to_string(),
        )),
        (Some(_), Some(_)) => unreachable!("clap forbids --device with --config"),
    }
}

fn out_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn run_dir(root: &Path, plan: &ExperimentPlan, device: &DeviceSpec) -> PathBuf {
    root.join(format!("{}_{}_seed{}", plan.kind.name(), device.name, plan.global_seed))
}

fn provenance_preamble(device: &DeviceSpec, plan: &ExperimentPlan) -> Result<String, Error> {
    Ok(format!(
        "# device = {}\n# seed = {}\n# device_sha256 = {}\n# plan_sha256 = {}\n",
        device.name,
        plan.global_seed,
        transim::dataset::toml_digest(device)?,
        transim::dataset::toml_digest(plan)?
    ))
}

#[derive(Serialize)]
struct Manifest<'a> {
    format_version: u32,
    run: ManifestRun,
    files: BTreeMap<String, String>,
    device: &'a DeviceSpec,
    plan: &'a ExperimentPlan,
}

#[derive(Serialize)]
struct ManifestRun {
    experiment: String,
    device: String,
    seed: u64,
    device_sha256: String,
    plan_sha256: String,
}

fn write_run_outputs(
    dir: &Path,
    device: &DeviceSpec,
    plan: &ExperimentPlan,
    datasets: &[DataSet],
    extra_files: &[(String, String)],
) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    let mut files = BTreeMap::new();
    for ds in datasets {
        let name = format!("{}.csv", ds.label);
        let text = ds.to_csv();
        files.insert(name.clone(), sha256_hex(text.as_bytes()));
        std::fs::write(dir.join(&name), text)?;
    }
    for (name, text) in extra_files {
        files.insert(name.clone(), sha256_hex(text.as_bytes()));
        std::fs::write(dir.join(name), text)?;
    }
    let meta = datasets
        .first()
        .map(|d| d.metadata.clone())
        .ok_or_else(|| Error::usage("no datasets to write".to_string()))?;
    let manifest = Manifest {
        format_version: 1,
        run: ManifestRun {
            experiment: meta.experiment,
            device: meta.device_name,
            seed: meta.seed,
            device_sha256: meta.device_sha256,
            plan_sha256: meta.plan_sha256,
        },
        files,
        device,
        plan,
    };
    let text = toml::to_string(&manifest)
        .map_err(|e| Error::usage(format!("manifest serialization: {e}")))?;
    std::fs::write(dir.join("manifest.toml"), text)?;
    Ok(())
}

fn cmd_params(
    device: Option<DeviceName>,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<ExitCode, Error> {
    let config = load_config(device, config)?;
    let spec = config.device_spec()?;
    let reference = config.reference;

    let ej_inductance = transim::device::ej_from_inductance(
        spec.squid.l_j_per_junction_nh,
        spec.squid.n_junctions,
    )?;
    let mut rows: Vec<(String, f64, Option<f64>)> = vec![
        ("f_q (GHz)".into(), spec.transmon.f_q, None),
        ("anharmonicity (GHz)".into(), spec.transmon.eta_f, None),
        ("E_C (GHz)".into(), spec.transmon.e_c, None),
        (
            "E_J from spectrum (GHz)".into(),
            spec.transmon.e_j,
            reference.as_ref().map(|r| r.e_j_ghz),
        ),
        (
            format!(
                "E_J from inductance (GHz, {} nH x {})",
                spec.squid.l_j_per_junction_nh, spec.squid.n_junctions
            ),
            ej_inductance,
            None,
        ),
        ("g (GHz)".into(), spec.coupling.g, reference.as_ref().map(|r| r.g_mhz / 1e3)),
        ("chi (GHz)".into(), spec.coupling.chi, None),
        ("Delta (GHz)".into(), spec.coupling.delta, None),
        ("Q_total".into(), spec.resonator.q_total(), None),
        ("kappa (rad/us)".into(), spec.resonator.kappa_rad_per_us(), None),
        (
            "Purcell T1, loaded Q (us)".into(),
            spec.purcell_t1_loaded()?,
            reference.as_ref().map(|r| r.purcell_t1_us),
        ),
        (
            "Purcell T1, Q ~ Q_e (us)".into(),
            spec.purcell_t1_external()?,
            reference.as_ref().and_then(|r| r.purcell_t1_external_us),
        ),
        (
            format!("thermal population ({} mK)", spec.fridge.temperature_mk),
            spec.thermal_population_from_fridge()?,
            None,
        ),
        ("T1 (us)".into(), spec.transmon.t1, reference.as_ref().map(|r| r.t1_us)),
        ("T2 (us)".into(), spec.transmon.t2, reference.as_ref().map(|r| r.t2_us)),
    ];
    if let Some(r) = &reference {
        rows.push((
            "avg Clifford fidelity (published)".into(),
            f64::NAN,
            Some(r.rb_avg_clifford_fidelity),
        ));
    }

    println!("device: {}", spec.name);
    println!("{:<44} {:>14} {:>12}", "parameter", "derived", "reference");
    let mut csv = format!(
        "# device = {}\n# device_sha256 = {}\nparameter,derived,reference\n",
        spec.name,
        transim::dataset::toml_digest(&spec)?
    );
    for (name, derived, reference) in &rows {
        let derived_str = if derived.is_nan() {
            "-".to_string()
        } else if *derived != 0.0 && derived.abs() < 1e-4 {
            format!("{derived:.3e}")
        } else {
            format!("{derived:.6}")
        };
        let ref_str = reference.map(|r| format!("{r}")).unwrap_or_else(|| "-".to_string());
        println!("{name:<44} {derived_str:>14} {ref_str:>12}");
        csv.push_str(&format!("{name},{derived_str},{ref_str}\n"));
    }
    if let Some(path) = out {
        std::fs::write(&path, csv)?;
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(
    device: Option<DeviceName>,
    config: Option<PathBuf>,
    seed: Option<u64>,
    shots: Option<u64>,
    out: Option<PathBuf>,
    dump_shots: bool,
) -> Result<ExitCode, Error> {
    let config = load_config(device, config)?;
    let spec = config.device_spec()?;
    let plan = config.plan(seed, shots)?;
    let output = run_experiment(&spec, &plan, dump_shots)?;

    let mut extra = Vec::new();
    if let Some(shots) = &output.shots {
        let mut text = provenance_preamble(&spec, &plan)?;
        text.push_str("sequence_id,shot_index,i,q,bit\n");
        for s in shots {
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                s.sequence_id, s.shot_index, s.iq.i, s.iq.q, s.bit
            ));
        }
        extra.push(("shots.csv".to_string(), text));
    }
    let dir = run_dir(&out_root(out), &plan, &spec);
    write_run_outputs(&dir, &spec, &plan, &output.datasets, &extra)?;
    for ds in &output.datasets {
        println!("wrote {}", dir.join(format!("{}.csv", ds.label)).display());
    }
    println!("wrote {}", dir.join("manifest.toml").display());
    Ok(ExitCode::SUCCESS)
}

fn model_for_label(label: &str) -> Option<&'static str> {
    if label.starts_with("t1") {
        Some("exponential")
    } else if label.starts_with("ramsey") {
        Some("ramsey")
    } else if label.starts_with("rb") {
        Some("rb")
    } else if label.starts_with("vna") {
        Some("hanger")
    } else {
        None
    }
}

fn verify_against_manifest(data: &Path, text: &str) -> Result<(), Error> {
    let manifest_path = data
        .parent()
        .map(|p| p.join("manifest.toml"))
        .filter(|p| p.exists())
        .ok_or_else(|| Error::usage("no manifest.toml next to the dataset".to_string()))?;
    let manifest_text = std::fs::read_to_string(manifest_path)?;
    let manifest: toml::Table = manifest_text
        .parse()
        .map_err(|e| Error::usage(format!("manifest parse error: {e}")))?;
    let file_name = data
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::usage("dataset path has no file name".to_string()))?;
    let expected = manifest
        .get("files")
        .and_then(|f| f.get(file_name))
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::usage(format!("manifest does not list {file_name}")))?;
    let actual = sha256_hex(text.as_bytes());
    if actual != expected {
        return Err(Error::usage(format!(
            "dataset hash mismatch: manifest records {expected}, file is {actual} \
             (use --force to fit anyway)"
        )));
    }
    Ok(())
}

fn cmd_fit(
    data: &Path,
    model: Option<String>,
    force: bool,
    out: Option<PathBuf>,
) -> Result<ExitCode, Error> {
    let text = std::fs::read_to_string(data)?;
    if !force {
        verify_against_manifest(data, &text)?;
    }
    let csv = CsvDataSet::parse(&text)?;
    let label = csv.preamble_value("label").unwrap_or("").to_string();
    let model = match model {
        Some(m) => m,
        None => model_for_label(&label)
            .ok_or_else(|| {
                Error::usage(format!(
                    "cannot auto-select a model for label '{label}'; pass --model"
                ))
            })?
            .to_string(),
    };

    let x = csv.column(&csv.header[0])?.to_vec();
    let fit = match model.as_str() {
        "exponential" | "ramsey" | "rb" => {
            let p = csv.column("p_excited")?.to_vec();
            let se = csv.column("standard_error")?.to_vec();
            let shots: Vec<u64> = csv.column("shots")?.iter().map(|v| *v as u64).collect();
            let se = floor_se(&se, &shots);
            match model.as_str() {
                "exponential" => fit_exponential(&x, &p, &se)?,
                "ramsey" => fit_ramsey(&x, &p, &se)?,
                _ => fit_rb(&x, &p, &se)?,
            }
        }
        "hanger" => {
            let re = csv.column("re")?;
            let im = csv.column("im")?;
            let s21: Vec<num_complex::Complex64> = re
                .iter()
                .zip(im)
                .map(|(r, i)| num_complex::Complex64::new(*r, *i))
                .collect();
            fit_hanger(&x, &s21, None)?
        }
        other => {
            return Err(Error::usage(format!(
                "unknown model '{other}' (expected exponential, ramsey, rb, hanger)"
            )))
        }
    };

    print_fit(&fit);
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir)?;
        let path = dir.join(format!("fit_{}.toml", if label.is_empty() { &model } else { &label }));
        write_fit(&path, &fit, &csv, &text)?;
        println!("wrote {}", path.display());
    }
    if fit.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(Error::fit(format!("fit did not converge cleanly: flags {:?}", fit.flags)))
    }
}

fn print_fit(fit: &FitResult) {
    println!("model: {} ({} iterations, converged: {})", fit.model, fit.iterations, fit.converged);
    if !fit.flags.is_empty() {
        println!("flags: {}", fit.flags.join(", "));
    }
    println!("{:<14} {:>16} {:>16}", "parameter", "estimate", "1-sigma");
    for ((name, value), sigma) in
        fit.parameter_names.iter().zip(&fit.parameters).zip(&fit.uncertainties)
    {
        println!("{name:<14} {value:>16.9} {sigma:>16.3e}");
    }
    println!("weighted residual sum of squares: {:.6}", fit.residual_sum_squares);
}

#[derive(Serialize)]
struct FitFile<'a> {
    dataset_sha256: &'a str,
    seed: Option<u64>,
    device_sha256: Option<&'a str>,
    plan_sha256: Option<&'a str>,
    fit: &'a FitResult,
}

fn write_fit(path: &Path, fit: &FitResult, csv: &CsvDataSet, text: &str) -> Result<(), Error> {
    let file = FitFile {
        dataset_sha256: &sha256_hex(text.as_bytes()),
        seed: csv.preamble_value("seed").and_then(|s| s.parse().ok()),
        device_sha256: csv.preamble_value("device_sha256"),
        plan_sha256: csv.preamble_value("plan_sha256"),
        fit,
    };
    let out = toml::to_string(&file)
        .map_err(|e| Error::usage(format!("fit serialization: {e}")))?;
    std::fs::write(path, out)?;
    Ok(())
}

/// Built-in benchmarking plans for the bundled devices: the published
/// per-device depolarizing parameters with an interleaved X_pi at 0.99.
fn builtin_rb_plan(device: &DeviceSpec, seed: u64) -> ExperimentPlan {
    let (p_clifford, n_sequences) = match device.name.as_str() {
        "soi" => (0.972, 50),
        _ => (0.9904, 40),
    };
    defaults::rb_plan(p_clifford, 0.99, n_sequences, Some(PhysicalGate::XPi), seed)
}

fn cmd_rb(
    device: Option<DeviceName>,
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    export_sequences: bool,
) -> Result<ExitCode, Error> {
    let config = load_config(device, config)?;
    let spec = config.device_spec()?;
    // a config may carry its own rb_interleaved experiment; otherwise use
    // the built-in plan for the device
    let plan = match &config.experiment {
        Some(e) if e.kind.starts_with("rb") => config.plan(seed, None)?,
        _ => {
            let plan = builtin_rb_plan(&spec, seed.or(config.seed).unwrap_or(0));
            plan.validate()?;
            plan
        }
    };
    let PlanKind::Rb(rb) = &plan.kind else { unreachable!("plan is benchmarking") };
    if rb.interleaved_gate.is_none() {
        return Err(Error::config(
            "the benchmarking pipeline needs an interleaved gate (kind rb_interleaved)"
                .to_string(),
        ));
    }

    let output = run_rb(&spec, &plan)?;
    let reference = &output.datasets[0];
    let interleaved = &output.datasets[1];

    let fit_curve = |ds: &DataSet| -> Result<FitResult, Error> {
        let (p, se, shots) = ds.population_columns()?;
        let lengths: Vec<f64> = (0..p.len()).map(|k| ds.coords(k)[0]).collect();
        fit_rb(&lengths, &p, &floor_se(&se, &shots))
    };
    let fit_ref = fit_curve(reference)?;
    let fit_int = fit_curve(interleaved)?;
    let fidelities = transim::analysis::rb_fidelities(&fit_ref, &fit_int)?;

    println!("reference curve:");
    print_fit(&fit_ref);
    println!();
    println!("interleaved curve ({}):", rb.interleaved_gate.unwrap().label());
    print_fit(&fit_int);
    println!();
    println!(
        "avg Clifford fidelity f(C) = {:.6} +- {:.6}",
        fidelities.avg_clifford_fidelity, fidelities.avg_clifford_fidelity_sigma
    );
    println!(
        "interleaved gate fidelity f(G) = {:.6} +- {:.6}",
        fidelities.gate_fidelity, fidelities.gate_fidelity_sigma
    );
    for w in &fidelities.warnings {
        println!("warning: {w}");
    }

    let mut extra = Vec::new();
    if export_sequences {
        extra.push(("sequences.txt".to_string(), rb_sequence_audit(&plan)?));
    }
    let fid_text = toml::to_string(&fidelities)
        .map_err(|e| Error::usage(format!("fidelity serialization: {e}")))?;
    extra.push(("fidelities.toml".to_string(), fid_text));
    let dir = run_dir(&out_root(out), &plan, &spec);
    write_run_outputs(&dir, &spec, &plan, &output.datasets, &extra)?;
    println!("wrote {}", dir.join("manifest.toml").display());
    Ok(ExitCode::SUCCESS)
}

/// The sequence realizing the first sweep point, for waveform and
/// trajectory inspection.
fn first_point_sequence(
    plan: &ExperimentPlan,
) -> Result<transim::pulse::PulseSequence, Error> {
    match &plan.kind {
        PlanKind::RabiChevron { detuning, tau } => {
            plan.gates.rabi(detuning[0], *tau.last().expect("validated grid"))
        }
        PlanKind::T1 { tau } => plan.gates.t1(tau[0]),
        PlanKind::Ramsey { tau, detuning_ghz } => plan.gates.ramsey(tau[0], *detuning_ghz),
        PlanKind::Rb(_) => {
            let gates = transim::experiments::first_rb_gates(plan)?;
            plan.gates.rb(&gates)
        }
        PlanKind::TwoTone { .. } | PlanKind::VnaSweep { .. } => Err(Error::usage(
            "frequency-domain sweeps have no pulse schedule to dump".to_string(),
        )),
    }
}

fn cmd_waveform(
    device: Option<DeviceName>,
    config: Option<PathBuf>,
    out: &Path,
    channel: WaveChannel,
) -> Result<ExitCode, Error> {
    let config = load_config(device, config)?;
    config.device_spec()?;
    let plan = config.plan(None, None)?;
    let seq = first_point_sequence(&plan)?;
    let ch = match channel {
        WaveChannel::Xy => Channel::Xy,
        WaveChannel::Readout => Channel::Readout,
    };
    let wf = render_sequence(&seq, ch, DEFAULT_IF_GHZ, DEFAULT_SAMPLE_RATE_GSPS)?;
    let mut text = provenance_preamble(&config.device_spec()?, &plan)?;
    text.push_str(&wf.to_csv());
    std::fs::write(out, text)?;
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_trajectory(
    device: Option<DeviceName>,
    config: Option<PathBuf>,
    out: &Path,
) -> Result<ExitCode, Error> {
    let config = load_config(device, config)?;
    let spec = config.device_spec()?;
    let plan = config.plan(None, None)?;
    let seq = first_point_sequence(&plan)?;
    let opts = plan.sim_options();
    let initial = DensityState::thermal(opts.dim, spec.transmon.thermal_population);
    let traj = evolve(&initial, &seq, &spec, &opts)?;
    let mut text = provenance_preamble(&spec, &plan)?;
    text.push_str(match opts.dim {
        StateDim::Two => "time_ns,p0,p1\n",
        StateDim::Three => "time_ns,p0,p1,p2\n",
    });
    for (t, s) in traj.times_ns.iter().zip(&traj.states) {
        match opts.dim {
            StateDim::Two => {
                text.push_str(&format!("{},{},{}\n", t, s.population(0), s.population(1)))
            }
            StateDim::Three => text.push_str(&format!(
                "{},{},{},{}\n",
                t,
                s.population(0),
                s.population(1),
                s.population(2)
            )),
        }
    }
    std::fs::write(out, text)?;
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}
