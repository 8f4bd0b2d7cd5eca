use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Value};

use switchid::hankel::HankelSubMatrix;
use switchid::io;
use switchid::linalg;
use switchid::markov::{markov_scale, probe_word};
use switchid::pe_estimation::{check_pe_conditions, geometric_checkpoints, EstimateOptions, IdentifyOptions};
use switchid::pe_inputs::{build_pe_input_map_based, build_pe_input_model_based, default_max_len, InverseMap};
use switchid::realization::{observability_rank, span_reachability_rank};
use switchid::{
    build_hankel_with, estimate_all_markov, extract_markov_from_response, generate_pe_input, hankel_rank, identify,
    markov_distance_with, realize, Execution, HybridWord, MarkovSource, ModeWord, OutputSeries,
    PeSignalConfig, PersistentInput, PlugIn, SwitchedLinearSystem, SwitchingLaw,
};

use crate::args::*;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(s) | CliError::Numerical(s) => f.write_str(s),
        }
    }
}

impl From<switchid::Error> for CliError {
    fn from(e: switchid::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

pub fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let ctx = Ctx { exec, resolved: resolved_config(&cli) };
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Markov(a) => markov(a),
        Command::Hankel(a) => hankel(&ctx, a),
        Command::Realize(a) => realize_cmd(&ctx, a),
        Command::PeBuild(a) => pe_build(&ctx, a),
        Command::PeEstimate(a) => pe_estimate(&ctx, a),
        Command::Identify(a) => identify_cmd(&ctx, a),
        Command::Check(a) => check(&ctx, a),
    }
}

struct Ctx {
    exec: Execution,
    resolved: Value,
}

impl Ctx {
    /// Writes `<out>.run.json`: resolved arguments, produced files and report.
    fn record(&self, out: &Path, files: &[PathBuf], report: Value) -> Result<()> {
        let rec = json!({
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.resolved,
            "outputs": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "report": report,
        });
        write_json(&suffixed(out, ".run.json"), &rec)
    }
}

fn resolved_config(cli: &Cli) -> Value {
    let cmd = serde_json::to_value(&cli.command).unwrap_or(Value::Null);
    let (name, args) = match cmd {
        Value::Object(map) => map.into_iter().next().unwrap_or((String::new(), Value::Null)),
        other => (String::new(), other),
    };
    json!({ "command": name, "sequential": cli.sequential, "args": args })
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    s.into()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| invalid(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(p) => write_json(p, value),
        None => {
            let text = serde_json::to_string_pretty(value).map_err(|e| invalid(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
    }
}

fn load_model(path: &Path) -> Result<SwitchedLinearSystem> {
    SwitchedLinearSystem::load(path).map_err(|e| invalid(format!("model {}: {e}", path.display())))
}

fn parse_probe(spec: &str, m: usize) -> Result<HybridWord> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(invalid(format!("probe {spec:?}: expected q0,v,q,j")));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| invalid(format!("probe {spec:?}: bad integer {s:?}")));
    let (q0, q, j) = (num(parts[0])?, num(parts[2])?, num(parts[3])?);
    let v: ModeWord = parts[1].parse()?;
    if j == 0 || j > m {
        return Err(invalid(format!("probe input index {j} outside 1..={m}")));
    }
    Ok(probe_word(q0, &v, q, j, m))
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let sys = load_model(&a.model)?;
    let w = match (&a.input, &a.probe) {
        (Some(path), None) => io::load_hybrid_csv(path)?,
        (None, Some(spec)) => parse_probe(spec, sys.m())?,
        _ => return Err(invalid("give exactly one of --input or --probe")),
    };
    let traj = sys.simulate(&w, &DVector::zeros(sys.n()))?;
    match &a.out {
        Some(p) => io::write_trajectory_csv(&w, &traj, std::fs::File::create(p)?)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            io::write_trajectory_csv(&w, &traj, &mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn markov(a: &MarkovArgs) -> Result<()> {
    let sys = load_model(&a.model)?;
    let src = MarkovSource::from_model(Arc::new(sys));
    emit_json(a.out.as_deref(), &src.table(a.depth)?)
}

fn hankel(ctx: &Ctx, a: &HankelArgs) -> Result<()> {
    let sys = load_model(&a.model)?;
    let src = MarkovSource::from_model(Arc::new(sys));
    let k = a.cols.unwrap_or(a.depth + 1);
    let h = build_hankel_with(&src, a.depth, k, ctx.exec)?;
    h.save(&a.out, a.tol)?;
    let report = json!({
        "rows": h.h.nrows(),
        "cols": h.h.ncols(),
        "rank": hankel_rank(&h, a.tol),
        "singular_values": linalg::singular_values(&h.h),
    });
    ctx.record(&a.out, &[a.out.clone(), switchid::hankel::sidecar_path(&a.out)], report)
}

fn realize_cmd(ctx: &Ctx, a: &RealizeArgs) -> Result<()> {
    let h = match (&a.input, &a.model) {
        (Some(path), None) => HankelSubMatrix::load(path)?,
        (None, Some(path)) => {
            let sys = load_model(path)?;
            let depth = a.depth.unwrap_or(sys.n());
            let src = MarkovSource::from_model(Arc::new(sys));
            build_hankel_with(&src, depth, depth + 1, ctx.exec)?
        }
        _ => return Err(invalid("give exactly one of --input (Hankel CSV) or --model")),
    };
    let sweep: Vec<Value> =
        a.tol_sweep.iter().map(|&t| json!({ "tol": t, "rank": hankel_rank(&h, t) })).collect();
    let result = realize(&h, a.tol);
    let result = match result {
        Ok(r) => r,
        Err(e) => {
            if let Some(out) = &a.out {
                ctx.record(out, &[], json!({ "error": e.to_string(), "rank_sweep": sweep }))?;
            }
            return Err(e.into());
        }
    };
    let model_json = result.system.to_json_string();
    match &a.out {
        Some(out) => {
            std::fs::write(out, model_json + "\n")?;
            let report = json!({ "realization": result.report(), "rank_sweep": sweep });
            ctx.record(out, std::slice::from_ref(out), report)?;
        }
        None => println!("{model_json}"),
    }
    Ok(())
}

fn pe_build(ctx: &Ctx, a: &PeBuildArgs) -> Result<()> {
    let pe = match (&a.model, a.paired) {
        (Some(path), None) => {
            let sys = load_model(path)?;
            let n_bound = a.n_bound.unwrap_or(sys.n());
            let max_len = a.max_len.unwrap_or_else(|| default_max_len(&sys));
            build_pe_input_model_based(&sys, n_bound, max_len, a.tol)?
        }
        (None, Some(k)) => {
            if k == 0 {
                return Err(invalid("--paired needs K >= 1"));
            }
            let n_bound = a.n_bound.ok_or_else(|| invalid("--paired requires --n-bound"))?;
            build_pe_input_map_based(&InverseMap::paired_modes(k), n_bound, 2 * k, a.inputs)?
        }
        _ => return Err(invalid("give exactly one of --model or --paired")),
    };
    let index = a.index.clone().unwrap_or_else(|| suffixed(&a.out, ".index.json"));
    pe.save(&a.out, &index)?;
    let report = json!({
        "length": pe.w.len(),
        "probes": pe.probe_index.len(),
        "n_bound": pe.n_bound,
        "D": pe.d,
        "accumulated_reset_residual": pe.accumulated_residual(),
        "max_reset_residual": pe.reset_residuals.iter().cloned().fold(0.0, f64::max),
    });
    ctx.record(&a.out, &[a.out.clone(), index], report)
}

struct Data {
    w: HybridWord,
    y: OutputSeries,
    d: usize,
    model: Option<Arc<SwitchedLinearSystem>>,
    signal: Option<PeSignalConfig>,
}

fn load_data(data: &DataArgs) -> Result<Data> {
    let model = data.model.as_deref().map(load_model).transpose()?.map(Arc::new);
    let mut signal = None;
    let w = match &data.input {
        Some(path) => io::load_hybrid_csv(path)?,
        None => {
            let seed = data.seed.ok_or_else(|| invalid("a generated input needs --seed"))?;
            let horizon = data.horizon.ok_or_else(|| invalid("a generated input needs --horizon"))?;
            let sys = model.as_ref().ok_or_else(|| invalid("a generated input needs --model"))?;
            let m = sys.m();
            let mut cfg = PeSignalConfig::white(sys.d(), m, seed, horizon);
            if !data.mode_probs.is_empty() {
                cfg.switching = SwitchingLaw::Probabilities(data.mode_probs.clone());
            }
            if !data.covariance.is_empty() {
                if data.covariance.len() != m * m {
                    return Err(invalid(format!("--covariance needs {} entries", m * m)));
                }
                cfg.r = DMatrix::from_row_slice(m, m, &data.covariance);
            }
            let w = generate_pe_input(&cfg)?;
            signal = Some(cfg);
            w
        }
    };
    let d = match (&model, data.modes) {
        (Some(sys), _) => sys.d(),
        (None, Some(d)) => d,
        (None, None) => w.modes().iter().copied().max().unwrap_or(1),
    };
    let y = match (&data.outputs, &model) {
        (Some(path), _) => io::load_output_csv(path)?,
        (None, Some(sys)) => sys.simulate(&w, &DVector::zeros(sys.n()))?.into_outputs(),
        (None, None) => return Err(invalid("need --outputs or --model to obtain outputs")),
    };
    if let (Some(path), Some(sys)) = (&data.save_data, &model) {
        io::save_hybrid_csv(&w, path)?;
        let traj = sys.simulate(&w, &DVector::zeros(sys.n()))?;
        io::write_trajectory_csv(&w, &traj, std::fs::File::create(suffixed(path, ".trajectory.csv"))?)?;
    }
    Ok(Data { w, y, d, model, signal })
}

fn plug_in(arg: PlugInArg, data: &Data) -> Result<PlugIn> {
    match arg {
        PlugInArg::Empirical => Ok(PlugIn::Empirical),
        PlugInArg::Theoretical => {
            let cfg = data
                .signal
                .as_ref()
                .ok_or_else(|| invalid("the theoretical plug-in needs a generated input"))?;
            Ok(PlugIn::Theoretical { mode_probs: cfg.mode_probabilities(), r: cfg.r.clone() })
        }
    }
}

fn pe_estimate(ctx: &Ctx, a: &PeEstimateArgs) -> Result<()> {
    if let Some(index) = &a.index {
        let input = a.data.input.as_ref().ok_or_else(|| invalid("--index requires --input"))?;
        let pe = PersistentInput::load(input, index)?;
        let y = match (&a.data.outputs, &a.data.model) {
            (Some(path), _) => io::load_output_csv(path)?,
            (None, Some(path)) => {
                let sys = load_model(path)?;
                sys.simulate(&pe.w, &DVector::zeros(sys.n()))?.into_outputs()
            }
            (None, None) => return Err(invalid("need --outputs or --model to obtain outputs")),
        };
        let src = extract_markov_from_response(&pe, &y, a.depth)?;
        write_json(&a.out, &src.table(a.depth)?)?;
        let mut report = json!({ "method": "finite", "depth": a.depth, "length": pe.w.len() });
        if let Some(path) = &a.data.model {
            let reference = MarkovSource::from_model(Arc::new(load_model(path)?));
            report["max_abs_error"] = json!(markov_distance_with(&src, &reference, a.depth, ctx.exec)?);
        }
        return ctx.record(&a.out, std::slice::from_ref(&a.out), report);
    }

    let data = load_data(&a.data)?;
    let reference = data.model.clone().map(MarkovSource::from_model);
    let checkpoints = match (&reference, a.checkpoints.is_empty()) {
        (Some(_), true) => geometric_checkpoints(data.w.len(), 1000),
        _ => a.checkpoints.clone(),
    };
    let opts = EstimateOptions { depth: a.depth, plug_in: plug_in(a.plug_in, &data)?, checkpoints, exec: ctx.exec };
    let (est, convergence) = estimate_all_markov(&data.w, &data.y, data.d, &opts, reference.as_ref())?;
    write_json(&a.out, &est.source.table(a.depth)?)?;
    let mut files = vec![a.out.clone()];
    if reference.is_some() {
        let csv_path = suffixed(&a.out, ".convergence.csv");
        convergence.write_csv(std::fs::File::create(&csv_path)?)?;
        files.push(csv_path);
    }
    let min_count = est.estimates.iter().map(|e| e.count).min().unwrap_or(0);
    let report = json!({
        "method": "asymptotic",
        "horizon": est.horizon,
        "depth": a.depth,
        "r_used": linalg::to_rows(&est.r_used),
        "min_word_count": min_count,
        "convergence": convergence,
    });
    ctx.record(&a.out, &files, report)
}

fn identify_cmd(ctx: &Ctx, a: &IdentifyArgs) -> Result<()> {
    let data = load_data(&a.data)?;
    let mut opts = IdentifyOptions::new(a.n_guess);
    if let Some(depth) = a.depth {
        opts.depth = depth;
    }
    opts.tol_rel = a.tol;
    opts.plug_in = plug_in(a.plug_in, &data)?;
    opts.exec = ctx.exec;
    let result = identify(&data.w, &data.y, data.d, &opts)?;
    result.system.save(&a.out)?;
    let mut report = json!({ "horizon": data.w.len(), "realization": result.report() });
    if let Some(sys) = &data.model {
        let depth = 2 * a.n_guess + 1;
        let truth = MarkovSource::from_model(sys.clone());
        let found = MarkovSource::from_model(Arc::new(result.system.clone()));
        report["markov_distance"] = json!(markov_distance_with(&truth, &found, depth, ctx.exec)?);
        report["markov_scale"] = json!(markov_scale(&truth, depth)?);
        report["distance_depth"] = json!(depth);
    }
    ctx.record(&a.out, std::slice::from_ref(&a.out), report)
}

fn check(ctx: &Ctx, a: &CheckArgs) -> Result<()> {
    let model = a.model.as_deref().map(load_model).transpose()?;
    if model.is_none() && a.input.is_none() {
        return Err(invalid("give --model, --input or both"));
    }
    let mut report = json!({});
    if let Some(sys) = &model {
        let norms: Vec<f64> = sys.a_all().iter().map(linalg::spectral_norm).collect();
        report["model"] = json!({
            "n": sys.n(), "m": sys.m(), "p": sys.p(), "D": sys.d(),
            "spectral_norms": norms,
            "stability": sys.check_l1_stability_sufficient(),
            "reversible": sys.check_reversible(),
            "reachability_rank": span_reachability_rank(sys, a.rank_tol),
            "observability_rank": observability_rank(sys, a.rank_tol),
            "minimal": switchid::is_minimal(sys, a.rank_tol),
        });
    }
    if let Some(path) = &a.input {
        let w = io::load_hybrid_csv(path)?;
        let d = match (&model, a.modes) {
            (Some(sys), _) => sys.d(),
            (None, Some(d)) => d,
            (None, None) => w.modes().iter().copied().max().unwrap_or(1),
        };
        let pe = check_pe_conditions(&w, d, a.max_word_len, a.max_lag, a.tol, ctx.exec)?;
        report["excitation"] = serde_json::to_value(&pe).map_err(|e| invalid(e.to_string()))?;
    }
    match &a.out {
        Some(out) => {
            write_json(out, &report)?;
            ctx.record(out, std::slice::from_ref(out), json!({}))
        }
        None => emit_json(None, &report),
    }
}
