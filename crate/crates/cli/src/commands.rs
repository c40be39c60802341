use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use syntrophic::basins::{bistable_saddle, ProbeReport};
use syntrophic::bifurcation::{default_samples, Tangency};
use syntrophic::config::{parse_full_state, parse_planar_state};
use syntrophic::export::{self, to_json};
use syntrophic::ode::Termination;
use syntrophic::{
    BifurcationEvent, Chemostat, ConfigDocument, EquilibriumKind, Error, FamilyRegistry,
    IntegrationOptions, PlanarState, Species,
};

use crate::output::{ManifestInput, OutputDir};
use crate::{BasinsArgs, Cli, Command, SimulateArgs, SweepArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_NEGATIVE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_AT_BIFURCATION: u8 = 3;

/// Points per level graph in `nullclines.csv` and the plot.
const NULLCLINE_POINTS: usize = 400;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::input(format!("{}: {err}", path.display()))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_NEGATIVE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match &err {
            Error::HypothesesViolated { .. }
            | Error::ResidualTooLarge { .. }
            | Error::NotASaddle { .. } => EXIT_NEGATIVE,
            Error::AtBifurcation { .. } => EXIT_AT_BIFURCATION,
            _ => EXIT_INPUT,
        };
        let message = match &err {
            Error::Parse { .. } => format!("configuration: {err}"),
            _ => err.to_string(),
        };
        Self { code, message }
    }
}

/// Printed by `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub mode: String,
    #[serde(rename = "D")]
    pub dilution: f64,
    pub t_end: f64,
    pub samples: usize,
    pub termination: Termination,
    pub final_state: Vec<f64>,
    pub attractor: Option<EquilibriumKind>,
    pub attractor_location: Option<PlanarState>,
    /// Largest distance to the invariant set (full runs only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_deviation: Option<f64>,
}

/// Printed by `sweep`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub d_min: f64,
    pub d_max: f64,
    pub samples: usize,
    pub events: Vec<BifurcationEvent>,
    pub tangencies: Vec<Tangency>,
}

/// Printed by `basins`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasinsSummary {
    #[serde(rename = "D")]
    pub dilution: f64,
    pub resolution: [usize; 2],
    pub attractors: Vec<EquilibriumKind>,
    pub labels_present: Vec<EquilibriumKind>,
    pub unresolved_fraction: f64,
    pub separatrix: bool,
    pub probes: Option<ProbeReport>,
}

struct Context<'a> {
    cli: &'a Cli,
    config_path: PathBuf,
    document: ConfigDocument,
    registry: FamilyRegistry,
    started: Instant,
}

impl Context<'_> {
    fn build(&self) -> Result<Chemostat, CliError> {
        Ok(self.document.build(&self.registry)?)
    }

    fn build_at(&self, dilution: Option<f64>) -> Result<(Chemostat, f64), CliError> {
        let sys = self.build()?;
        match dilution {
            Some(d) => Ok((sys.with_dilution(d)?, d)),
            None => {
                let d = sys.dilution();
                Ok((sys, d))
            }
        }
    }

    fn out_dir(&self) -> Result<OutputDir, CliError> {
        OutputDir::create(self.cli.out.as_deref().unwrap_or(Path::new(".")))
    }

    fn finish(
        &self,
        out: OutputDir,
        subcommand: &'static str,
        sys: &Chemostat,
        dilution: f64,
    ) -> Result<(), CliError> {
        out.finish(ManifestInput {
            subcommand,
            config_path: &self.config_path,
            document: &self.document,
            resolved: *sys.config(),
            dilution,
            seed: self.cli.seed,
            started: self.started,
        })
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let json = to_json(value).map_err(|e| CliError::internal(e.to_string()))?;
    print!("{json}");
    Ok(json)
}

pub fn run(cli: &Cli) -> Result<u8, CliError> {
    let started = Instant::now();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::input("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::internal(e.to_string()))?;
    }
    let config_path = cli
        .config
        .clone()
        .ok_or_else(|| CliError::input("--config PATH is required"))?;
    let document = ConfigDocument::read(&config_path)?;
    let ctx = Context {
        cli,
        config_path,
        document,
        registry: FamilyRegistry::default(),
        started,
    };
    match &cli.command {
        Command::Check => check(&ctx),
        Command::Analyze(arg) => analyze(&ctx, arg.dilution),
        Command::Simulate(args) => simulate(&ctx, args),
        Command::Sweep(args) => sweep(&ctx, args),
        Command::Basins(args) => basins(&ctx, args),
    }
}

fn check(ctx: &Context<'_>) -> Result<u8, CliError> {
    let sys = ctx.document.build_unchecked(&ctx.registry)?;
    let report = sys.check_hypotheses();
    let json = print_json(&report)?;
    if ctx.cli.out.is_some() {
        let mut out = ctx.out_dir()?;
        out.write("check.json", json.as_bytes())?;
        ctx.finish(out, "check", &sys, sys.dilution())?;
    }
    let mut tally: Vec<(String, usize, &syntrophic::growth::Violation)> = Vec::new();
    for v in &report.violations {
        let key = format!("{:?} on f{}", v.hypothesis, v.species);
        match tally.iter_mut().find(|(k, _, _)| *k == key) {
            Some(entry) => entry.1 += 1,
            None => tally.push((key, 1, v)),
        }
    }
    for (key, count, first) in tally {
        eprintln!("violation: {key}, {count} sample(s); first: {first}");
    }
    Ok(if report.pass { EXIT_OK } else { EXIT_NEGATIVE })
}

fn analyze(ctx: &Context<'_>, dilution: Option<f64>) -> Result<u8, CliError> {
    let (sys, d) = ctx.build_at(dilution)?;
    let report = sys.classify_regime(d)?;
    let json = print_json(&report)?;
    if ctx.cli.out.is_some() {
        let mut out = ctx.out_dir()?;
        out.write("regime.json", json.as_bytes())?;
        ctx.finish(out, "analyze", &sys, d)?;
    }
    Ok(EXIT_OK)
}

fn simulate(ctx: &Context<'_>, args: &SimulateArgs) -> Result<u8, CliError> {
    let (sys, d) = ctx.build_at(args.dilution.dilution)?;
    let report = sys.classify_regime(d)?;
    let options = IntegrationOptions {
        t_end: args.t_end,
        ..IntegrationOptions::default()
    };
    let mut out = ctx.out_dir()?;
    let summary = if let Some(init) = &args.init {
        let start = parse_full_state(init)?;
        let traj = sys.integrate_full(start, &options)?;
        let hit = sys.detect_attractor(&traj, &report.equilibria, None);
        out.write_with("trajectory.csv", |w| {
            export::write_full_trajectory(w, &traj)
        })?;
        SimulationSummary {
            mode: "full".into(),
            dilution: d,
            t_end: traj.final_time().unwrap_or(0.0),
            samples: traj.len(),
            termination: traj.termination,
            final_state: traj
                .final_state()
                .map(|s| s.as_array().to_vec())
                .unwrap_or_default(),
            attractor: hit.map(|e| e.kind),
            attractor_location: hit.map(|e| e.location),
            omega_deviation: Some(traj.max_omega_deviation(sys.config())),
        }
    } else {
        let init = args
            .init_reduced
            .as_deref()
            .ok_or_else(|| CliError::input("one of --init or --init-reduced is required"))?;
        let start = parse_planar_state(init)?;
        let traj = sys.integrate_reduced(start, &options)?;
        let hit = sys.detect_attractor(&traj, &report.equilibria, None);
        out.write_with("trajectory.csv", |w| {
            export::write_reduced_trajectory(w, &traj)
        })?;
        SimulationSummary {
            mode: "reduced".into(),
            dilution: d,
            t_end: traj.final_time().unwrap_or(0.0),
            samples: traj.len(),
            termination: traj.termination,
            final_state: traj
                .final_state()
                .map(|s| s.as_array().to_vec())
                .unwrap_or_default(),
            attractor: hit.map(|e| e.kind),
            attractor_location: hit.map(|e| e.location),
            omega_deviation: None,
        }
    };
    let json = print_json(&summary)?;
    out.write("simulation.json", json.as_bytes())?;
    ctx.finish(out, "simulate", &sys, d)?;
    Ok(EXIT_OK)
}

fn sweep(ctx: &Context<'_>, args: &SweepArgs) -> Result<u8, CliError> {
    let sys = ctx.build()?;
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(args.d_max > args.d_min) {
        return Err(CliError::input(format!(
            "empty dilution range [{}, {}]",
            args.d_min, args.d_max
        )));
    }
    let n = args
        .samples
        .unwrap_or_else(|| default_samples(args.d_min, args.d_max));
    let diagram = sys.sweep(args.d_min, args.d_max, n)?;
    let tangencies = diagram
        .events
        .iter()
        .filter(|e| e.kind == syntrophic::EventKind::SaddleNode)
        .filter_map(|e| sys.find_tangency(e.bracket[0] - 1e-4, e.bracket[1] + 1e-4))
        .collect();
    let summary = SweepSummary {
        d_min: args.d_min,
        d_max: args.d_max,
        samples: n,
        events: diagram.events.clone(),
        tangencies,
    };
    let mut out = ctx.out_dir()?;
    let diagram_json = to_json(&diagram).map_err(|e| CliError::internal(e.to_string()))?;
    out.write("branches.json", diagram_json.as_bytes())?;
    out.write_with("branches.csv", |w| export::write_branches(w, &diagram))?;
    let json = print_json(&summary)?;
    out.write("events.json", json.as_bytes())?;
    ctx.finish(out, "sweep", &sys, sys.dilution())?;
    Ok(EXIT_OK)
}

fn basins(ctx: &Context<'_>, args: &BasinsArgs) -> Result<u8, CliError> {
    let (sys, d) = ctx.build_at(args.dilution.dilution)?;
    if args.resolution == 0 {
        return Err(CliError::input("--resolution must be at least 1"));
    }
    let report = sys.classify_regime(d)?;
    let grid = sys.classify_basins(d, [args.resolution, args.resolution])?;
    let nullclines = [
        ("F1", sys.graph_polyline(Species::One, d, NULLCLINE_POINTS)),
        ("F2", sys.graph_polyline(Species::Two, d, NULLCLINE_POINTS)),
    ];
    let separatrix = match bistable_saddle(&report) {
        Some(saddle) => Some(sys.compute_separatrix(d, saddle)?),
        None => None,
    };
    let probes = match &separatrix {
        Some(sep) if args.probes > 0 => {
            Some(sys.probe_separatrix(sep, args.probes, ctx.cli.seed)?)
        }
        _ => None,
    };

    let mut out = ctx.out_dir()?;
    out.write_with("basins.csv", |w| export::write_basins(w, &grid))?;
    out.write_with("nullclines.csv", |w| {
        let lines: Vec<(&str, &[PlanarState])> =
            nullclines.iter().map(|(n, p)| (*n, p.as_slice())).collect();
        export::write_polylines(w, &lines)
    })?;
    if let Some(sep) = &separatrix {
        out.write_with("separatrix.csv", |w| export::write_separatrix(w, sep))?;
    }
    if !args.no_svg {
        let svg = crate::svg::render(&grid, &nullclines, separatrix.as_ref(), &report.equilibria);
        out.write("basins.svg", svg.as_bytes())?;
    }
    let summary = BasinsSummary {
        dilution: d,
        resolution: grid.resolution,
        attractors: grid.attractors.iter().map(|a| a.kind).collect(),
        labels_present: grid.kinds_present(),
        unresolved_fraction: grid.unresolved_fraction(),
        separatrix: separatrix.is_some(),
        probes,
    };
    let json = print_json(&summary)?;
    out.write("basins.json", json.as_bytes())?;
    ctx.finish(out, "basins", &sys, d)?;
    Ok(EXIT_OK)
}
