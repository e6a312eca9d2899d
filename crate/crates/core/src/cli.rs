//! Command-line experiment runner: `run`, `noise-run`, `spectrum`, `depth`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::circuit::{step_resources_streaming, trajectory_circuits, Circuit, StepResources};
use crate::error::{Error, Result};
use crate::graph::{resolve_graph, Graph};
use crate::hamiltonian::{brute_force_spectrum, maxcut_hamiltonian, Level};
use crate::noise::{replay, NoiseModel, Replay};
use crate::pools::{build_pools, interaction_set, DomainSpec, Method};
use crate::qite::{run, EarlyStop, Evaluation, RunOptions, Trajectory, UpdateMode};

/// `println!` that ignores a closed stdout (e.g. piped into `head`).
macro_rules! out {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "qite",
    version,
    about = "Quantum imaginary-time evolution for max-cut"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run QITE and write trajectory.csv, spectrum.csv and summary.json.
    Run(RunArgs),
    /// `run` with noisy circuit replay enabled.
    NoiseRun(RunArgs),
    /// Exact spectrum and a ground-state cut.
    Spectrum(SpectrumArgs),
    /// Per-step gate counts and depths over a grid of sizes and methods.
    Depth(DepthArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat JSON config; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// petersen, kN, cN, regular3, weighted, or a graph file.
    #[arg(long)]
    pub graph: Option<String>,
    /// Vertex count for generated families.
    #[arg(long)]
    pub vertices: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// la, ela, nla or nla25.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long = "domain-size")]
    pub domain_size: Option<usize>,
    #[arg(long)]
    pub dtau: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long)]
    pub compress: bool,
    /// step_state, per_term or reuse_gram.
    #[arg(long)]
    pub evaluation: Option<String>,
    /// product_formula or exact_exponential.
    #[arg(long)]
    pub update: Option<String>,
    /// Stop after 50 steps with |ΔE| < 1e-10.
    #[arg(long)]
    pub early_stop: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SpectrumArgs {
    #[arg(long, default_value = "petersen")]
    pub graph: String,
    #[arg(long)]
    pub vertices: Option<usize>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DepthArgs {
    /// regular3, complete, weighted or petersen.
    #[arg(long, default_value = "regular3")]
    pub family: String,
    /// Comma-separated methods.
    #[arg(long, default_value = "la,ela,nla")]
    pub methods: String,
    /// Comma-separated domain sizes; `full` means the largest valid one.
    #[arg(long = "domain-sizes", default_value = "2,3")]
    pub domain_sizes: String,
    /// Comma-separated vertex counts.
    #[arg(long, default_value = "10")]
    pub sizes: String,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Flat run configuration. Every key is optional in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub graph: String,
    pub vertices: Option<usize>,
    pub seed: u64,
    pub method: String,
    #[serde(alias = "D")]
    pub domain_size: usize,
    pub dtau: f64,
    #[serde(alias = "steps")]
    pub n_steps: usize,
    pub ridge: f64,
    pub compress: bool,
    pub evaluation: String,
    pub update: String,
    pub early_stop: bool,
    pub noise: bool,
    pub t1_us: Option<f64>,
    pub t2_us: Option<f64>,
    pub tg1_ns: Option<f64>,
    pub tg2_ns: Option<f64>,
    pub p00: Option<f64>,
    pub p01: Option<f64>,
    pub p10: Option<f64>,
    pub p11: Option<f64>,
    #[serde(alias = "out")]
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            graph: "petersen".into(),
            vertices: None,
            seed: 7,
            method: "nla".into(),
            domain_size: 2,
            dtau: 0.01,
            n_steps: 1000,
            ridge: crate::qite::DEFAULT_RIDGE,
            compress: false,
            evaluation: "step_state".into(),
            update: "product_formula".into(),
            early_stop: false,
            noise: false,
            t1_us: None,
            t2_us: None,
            tg1_ns: None,
            tg2_ns: None,
            p00: None,
            p01: None,
            p10: None,
            p11: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    /// Config file (if any) with command-line flags layered on top.
    pub fn from_args(args: &RunArgs) -> Result<RunConfig> {
        let mut c = match &args.config {
            Some(p) => RunConfig::from_json(&fs::read_to_string(p)?)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &args.graph {
            c.graph = v.clone();
        }
        if args.vertices.is_some() {
            c.vertices = args.vertices;
        }
        if let Some(v) = args.seed {
            c.seed = v;
        }
        if let Some(v) = &args.method {
            c.method = v.clone();
        }
        if let Some(v) = args.domain_size {
            c.domain_size = v;
        }
        if let Some(v) = args.dtau {
            c.dtau = v;
        }
        if let Some(v) = args.steps {
            c.n_steps = v;
        }
        if let Some(v) = args.ridge {
            c.ridge = v;
        }
        if let Some(v) = &args.evaluation {
            c.evaluation = v.clone();
        }
        if let Some(v) = &args.update {
            c.update = v.clone();
        }
        if let Some(v) = &args.out {
            c.output_dir = v.clone();
        }
        c.compress |= args.compress;
        c.early_stop |= args.early_stop;
        Ok(c)
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        let mut nm = NoiseModel::default();
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut nm.t1_us, self.t1_us);
        set(&mut nm.t2_us, self.t2_us);
        set(&mut nm.tg1_ns, self.tg1_ns);
        set(&mut nm.tg2_ns, self.tg2_ns);
        set(&mut nm.readout[0][0], self.p00);
        set(&mut nm.readout[0][1], self.p01);
        set(&mut nm.readout[1][0], self.p10);
        set(&mut nm.readout[1][1], self.p11);
        nm.validate()?;
        Ok(nm)
    }

    pub fn options(&self) -> Result<RunOptions> {
        if !(self.dtau > 0.0) || !self.dtau.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "dtau must be positive, got {}",
                self.dtau
            )));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
        }
        Ok(RunOptions {
            dtau: self.dtau,
            n_steps: self.n_steps,
            ridge: self.ridge,
            compress: self.compress,
            update: self.update.parse::<UpdateMode>()?,
            evaluation: self.evaluation.parse::<Evaluation>()?,
            // replaying an uncompressed run needs every step's coefficients
            record_coefficients: self.noise && !self.compress,
            early_stop: self.early_stop.then(EarlyStop::default),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockSummary {
    pub start_step: usize,
    pub end_step: usize,
    pub n_comp: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseSummary {
    pub model: NoiseModel,
    pub energy_ideal: f64,
    pub energy_noisy: f64,
    pub n_circuits: usize,
    pub gate_count: usize,
    pub cnot_count: usize,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub graph: String,
    pub n_vertices: usize,
    pub n_edges: usize,
    pub method: String,
    pub domain_size: usize,
    pub label: String,
    pub evaluation: Evaluation,
    pub dtau: f64,
    pub n_steps: usize,
    pub steps_run: usize,
    pub stopped_early: bool,
    pub ground_energy: f64,
    pub final_energy: f64,
    pub final_r: f64,
    pub pool_sizes: Vec<usize>,
    pub blocks: Vec<BlockSummary>,
    /// Summed per-term residuals of each step.
    pub residuals: Vec<f64>,
    pub noise: Option<NoiseSummary>,
}

fn load_graph(spec: &str, vertices: Option<usize>, seed: u64) -> Result<Graph> {
    resolve_graph(spec, vertices, seed)
}

/// Runs one configured experiment and writes its outputs.
pub fn cmd_run(config: &RunConfig) -> Result<RunSummary> {
    let opts = config.options()?;
    let noise = if config.noise {
        Some(config.noise_model()?)
    } else {
        None
    };
    let graph = load_graph(&config.graph, config.vertices, config.seed)?;
    let h = maxcut_hamiltonian(&graph)?;
    let method: Method = config.method.parse()?;
    let spec = DomainSpec::new(method, config.domain_size);
    spec.validate(&h)?;
    if config.compress && spec.per_term() {
        return Err(Error::UnsupportedMethod(format!(
            "compression needs a shared pool; {} builds one pool per term",
            spec.label()
        )));
    }

    let traj = run(&h, &spec, &opts)?;
    let noise_summary = match noise {
        Some(nm) => {
            let pools = build_pools(&spec, &h)?;
            let circuits = trajectory_circuits(&traj, &pools, h.n_qubits())?;
            let r = replay(&circuits, &h, &nm)?;
            Some(noise_summary(nm, r, &circuits, h.n_qubits())?)
        }
        None => None,
    };
    let summary = RunSummary {
        graph: config.graph.clone(),
        n_vertices: graph.n_vertices(),
        n_edges: graph.edges().len(),
        method: method.name().to_string(),
        domain_size: spec.domain_size,
        label: spec.label(),
        evaluation: traj.evaluation,
        dtau: traj.dtau,
        n_steps: config.n_steps,
        steps_run: traj.steps.len() - 1,
        stopped_early: traj.stopped_early,
        ground_energy: traj.ground_energy,
        final_energy: traj.final_energy(),
        final_r: traj.final_r(),
        pool_sizes: traj.pool_sizes.clone(),
        blocks: traj
            .blocks
            .iter()
            .map(|b| BlockSummary {
                start_step: b.start_step,
                end_step: b.end_step,
                n_comp: b.n_comp,
            })
            .collect(),
        residuals: traj
            .steps
            .iter()
            .skip(1)
            .map(|s| s.total_residual())
            .collect(),
        noise: noise_summary,
    };
    write_run_outputs(&config.output_dir, &traj, &summary)?;
    Ok(summary)
}

fn noise_summary(
    model: NoiseModel,
    r: Replay,
    circuits: &[Circuit],
    n: usize,
) -> Result<NoiseSummary> {
    let mut all = Circuit::new(n);
    for c in circuits {
        all.append(c)?;
    }
    Ok(NoiseSummary {
        model,
        energy_ideal: r.energy_ideal,
        energy_noisy: r.energy_noisy,
        n_circuits: circuits.len(),
        gate_count: all.len(),
        cnot_count: all.cnot_count(),
        depth: all.depth(),
    })
}

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut w: W) -> std::io::Result<()> {
    writeln!(w, "tau,energy,r")?;
    for s in &traj.steps {
        writeln!(w, "{},{},{}", s.tau, s.energy, s.r)?;
    }
    Ok(())
}

pub fn write_spectrum_csv<W: Write>(traj: &Trajectory, mut w: W) -> std::io::Result<()> {
    writeln!(w, "tau,E_level,n")?;
    for s in &traj.steps {
        for (e, n) in &s.populations {
            writeln!(w, "{},{},{}", s.tau, e, n)?;
        }
    }
    Ok(())
}

fn write_run_outputs(dir: &Path, traj: &Trajectory, summary: &RunSummary) -> Result<()> {
    fs::create_dir_all(dir)?;
    let buf = |p: &str| -> Result<std::io::BufWriter<fs::File>> {
        Ok(std::io::BufWriter::new(fs::File::create(dir.join(p))?))
    };
    let mut w = buf("trajectory.csv")?;
    write_trajectory_csv(traj, &mut w)?;
    w.flush()?;
    let mut w = buf("spectrum.csv")?;
    write_spectrum_csv(traj, &mut w)?;
    w.flush()?;
    let json = serde_json::to_string_pretty(summary).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("summary.json"), json + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub n_vertices: usize,
    pub ground_energy: f64,
    pub n_ground_states: usize,
    pub levels: Vec<Level>,
    /// Side (0 or 1) of each vertex in the lowest-index ground state.
    pub ground_cut: Vec<u8>,
    pub cut_value: f64,
}

pub fn cmd_spectrum(args: &SpectrumArgs) -> Result<SpectrumReport> {
    let graph = load_graph(&args.graph, args.vertices, args.seed)?;
    let h = maxcut_hamiltonian(&graph)?;
    let spec = brute_force_spectrum(&h)?;
    let x = spec.ground_states[0];
    let report = SpectrumReport {
        n_vertices: graph.n_vertices(),
        ground_energy: spec.ground_energy,
        n_ground_states: spec.ground_states.len(),
        levels: spec.levels.clone(),
        ground_cut: (0..graph.n_vertices())
            .map(|v| ((x >> v) & 1) as u8)
            .collect(),
        cut_value: graph.cut_value(x as u64),
    };
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        let mut text = String::from("energy,degeneracy\n");
        for l in &report.levels {
            text.push_str(&format!("{},{}\n", l.energy, l.degeneracy));
        }
        fs::write(dir.join("levels.csv"), text)?;
        let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(dir.join("ground_state.json"), json + "\n")?;
    }
    Ok(report)
}

fn parse_list<T: std::str::FromStr>(what: &str, text: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(Error::InvalidArgument(format!("{what} list is empty")));
    }
    items
        .iter()
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::Parse(format!("bad {what} entry {s:?}")))
        })
        .collect()
}

fn family_graph(family: &str, n: usize, seed: u64) -> Result<Graph> {
    match family.to_ascii_lowercase().as_str() {
        "regular3" | "random3" => Graph::random_regular3(n, seed),
        "complete" => Graph::complete(n),
        "weighted" | "complete_weighted" => Graph::complete_weighted(n, seed),
        "petersen" if n == 10 => Ok(Graph::petersen()),
        other => Err(Error::InvalidArgument(format!(
            "unknown family {other:?} for {n} vertices"
        ))),
    }
}

/// Domain size named `full`: the whole register for NLA, the neighbourhood
/// `k + |L_0|` for the per-term methods.
fn full_domain(method: Method, h: &crate::hamiltonian::Hamiltonian) -> usize {
    match method {
        Method::Nla | Method::Nla25 => h.n_qubits(),
        Method::La | Method::Ela => match h.terms().first() {
            Some(t) => t.string.weight() + interaction_set(h, 0).len(),
            None => 0,
        },
    }
}

/// Computes the resource grid. Invalid (method, D, N) points are skipped and
/// reported in the second return value.
pub fn cmd_depth(args: &DepthArgs) -> Result<(Vec<StepResources>, Vec<String>)> {
    let methods: Vec<Method> = parse_list::<String>("method", &args.methods)?
        .iter()
        .map(|m| m.parse())
        .collect::<Result<_>>()?;
    let domains = parse_list::<String>("domain size", &args.domain_sizes)?;
    for d in &domains {
        if d != "full" && d.parse::<usize>().is_err() {
            return Err(Error::Parse(format!("bad domain size {d:?}")));
        }
    }
    let sizes: Vec<usize> = parse_list("size", &args.sizes)?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for &n in &sizes {
        let graph = family_graph(&args.family, n, args.seed)?;
        let h = maxcut_hamiltonian(&graph)?;
        for &method in &methods {
            for d in &domains {
                let d = if d == "full" {
                    full_domain(method, &h)
                } else {
                    d.parse().expect("checked above")
                };
                let spec = DomainSpec::new(method, d);
                match spec
                    .validate(&h)
                    .and_then(|_| step_resources_streaming(&h, &spec))
                {
                    Ok(r) => rows.push(r),
                    Err(e @ (Error::InvalidDomain { .. } | Error::Capacity { .. })) => {
                        skipped.push(format!("N={n} {}: {e}", spec.label()))
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        let mut text = format!("{}\n", StepResources::CSV_HEADER);
        for r in &rows {
            text.push_str(&r.csv_row());
            text.push('\n');
        }
        fs::write(dir.join("resources.csv"), text)?;
    }
    Ok((rows, skipped))
}

fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        EXIT_NUMERIC
    } else {
        EXIT_CONFIG
    }
}

/// Machine-readable error report.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({
        "error": e.kind(),
        "message": e.to_string(),
        "exit_code": exit_code(e),
    })
    .to_string()
}

/// Executes a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Run(args) => RunConfig::from_args(&args)
            .and_then(|c| cmd_run(&c))
            .map(print_run),
        Command::NoiseRun(args) => RunConfig::from_args(&args)
            .and_then(|mut c| {
                c.noise = true;
                cmd_run(&c)
            })
            .map(print_run),
        Command::Spectrum(args) => cmd_spectrum(&args).map(|r| {
            out!("{}", serde_json::to_string_pretty(&r).unwrap_or_default());
        }),
        Command::Depth(args) => cmd_depth(&args).map(|(rows, skipped)| {
            for s in skipped {
                eprintln!("skipped {s}");
            }
            out!("{}", StepResources::CSV_HEADER);
            for r in rows {
                out!("{}", r.csv_row());
            }
        }),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}

fn print_run(s: RunSummary) {
    let mut line = format!(
        "{} on {} ({} vertices): E = {:.6}, r = {:.4}, E_GS = {}",
        s.label, s.graph, s.n_vertices, s.final_energy, s.final_r, s.ground_energy
    );
    if !s.blocks.is_empty() {
        line.push_str(&format!(", {} blocks", s.blocks.len()));
    }
    if let Some(n) = &s.noise {
        line.push_str(&format!(
            ", replay ideal {:.6} noisy {:.6} (depth {})",
            n.energy_ideal, n.energy_noisy, n.depth
        ));
    }
    out!("{line}");
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_overrides() {
        let c = RunConfig::from_json(r#"{"graph": "k4", "D": 3, "steps": 5, "out": "x"}"#).unwrap();
        assert_eq!(c.graph, "k4");
        assert_eq!(c.domain_size, 3);
        assert_eq!(c.n_steps, 5);
        assert_eq!(c.output_dir, PathBuf::from("x"));
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn invalid_la_domain_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let c = RunConfig {
            method: "la".into(),
            domain_size: 4,
            n_steps: 2,
            output_dir: dir.path().to_path_buf(),
            ..RunConfig::default()
        };
        let e = cmd_run(&c).unwrap_err();
        assert!(e.to_string().contains("domain size invalid for LA"), "{e}");
        assert_eq!(exit_code(&e), EXIT_CONFIG);
        assert!(error_json(&e).contains("\"invalid_domain\""));
    }

    #[test]
    fn run_writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let c = RunConfig {
            graph: "k4".into(),
            n_steps: 3,
            output_dir: dir.path().to_path_buf(),
            ..RunConfig::default()
        };
        let s = cmd_run(&c).unwrap();
        assert_eq!(s.steps_run, 3);
        let traj = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
        assert_eq!(traj.lines().next(), Some("tau,energy,r"));
        assert_eq!(traj.lines().count(), 5);
        let spec = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
        assert_eq!(spec.lines().next(), Some("tau,E_level,n"));
        assert!(dir.path().join("summary.json").exists());
    }

    #[test]
    fn empty_size_list_rejected() {
        let args = DepthArgs {
            family: "regular3".into(),
            methods: "nla".into(),
            domain_sizes: "2".into(),
            sizes: "".into(),
            seed: 1,
            out: None,
        };
        assert!(cmd_depth(&args).is_err());
    }

    #[test]
    fn spectrum_of_single_edge() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edge.txt");
        fs::write(&path, "n 2\n0 1\n").unwrap();
        let r = cmd_spectrum(&SpectrumArgs {
            graph: path.to_string_lossy().into_owned(),
            ..SpectrumArgs::default()
        })
        .unwrap();
        assert_eq!(r.ground_energy, -1.0);
        assert_eq!(r.levels.len(), 2);
        assert_eq!(r.cut_value, 1.0);
    }
}
