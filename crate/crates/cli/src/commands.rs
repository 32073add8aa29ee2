use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use pmst_core::bounds::{self, BoundResult, Model, DEFAULT_COMPLEX_STARTS, DEFAULT_REAL_STARTS};
use pmst_core::builder::{self, Construction, ConstructionKind, ConstructionParams};
use pmst_core::bundle::{format_sig17, PovmRecord, WitnessBundle};
use pmst_core::certify::{Certificate, Thresholds};
use pmst_core::sim::{self, CircuitSpec, StatTable};
use pmst_core::{BlochVector, Error, WitnessMatrix};

use crate::args::{
    BoundsArgs, CertifyArgs, Cli, Command, ConstructArgs, Format, Method, ModelArg, SimulateArgs,
    VerifyArgs,
};
use crate::record::RunRecord;
use crate::{CliError, Verdict};

pub(crate) fn dispatch(cli: &Cli) -> Result<Verdict, CliError> {
    match &cli.command {
        Command::Construct(a) => construct(cli, a),
        Command::Bounds(a) => bounds_cmd(cli, a),
        Command::Simulate(a) => simulate(cli, a),
        Command::Certify(a) => certify(cli, a),
        Command::Verify(a) => verify(cli, a),
    }
}

fn record(cli: &Cli, name: &str) -> RunRecord {
    RunRecord::start(name, serde_json::to_value(cli).expect("args serialize"), cli.seed)
}

fn emit(cli: &Cli, text: &str, machine: &str) {
    match cli.format {
        Format::Text => print!("{text}"),
        Format::Machine => println!("{machine}"),
    }
}

fn to_json(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.10}")).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_bloch(v: &BlochVector) -> String {
    fmt_vec(&v.0)
}

fn load_bundle(rec: &mut RunRecord, path: &Path) -> Result<Construction, CliError> {
    let text = rec.read_input(path)?;
    Ok(WitnessBundle::from_json(&text)?.to_construction()?)
}

/// Input of `construct`: target states, or a POVM whose anti-aligned
/// directions are the states, plus optional construction weights.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct StatesFile {
    states: Option<Vec<[f64; 3]>>,
    r: Option<Vec<f64>>,
    p: Option<Vec<f64>>,
    povm: Option<PovmRecord>,
}

impl StatesFile {
    fn vectors(&self) -> Result<Vec<BlochVector>, CliError> {
        match (&self.states, &self.povm) {
            (Some(s), _) => Ok(s.iter().map(|v| BlochVector(*v)).collect()),
            (None, Some(p)) => Ok(p.to_povm()?.directions().iter().map(|n| -*n).collect()),
            (None, None) => Err(CliError::Input("the states file lists neither states nor a povm".into())),
        }
    }
}

fn construct(cli: &Cli, a: &ConstructArgs) -> Result<Verdict, CliError> {
    let mut rec = record(cli, "construct");
    let input: StatesFile = match &a.states {
        Some(path) => {
            let text = rec.read_input(path)?;
            parse_json(&text, path)?
        }
        None => StatesFile::default(),
    };
    let need_file = || -> Result<(), CliError> {
        if a.states.is_none() {
            return Err(CliError::Input("--states is required for this method".into()));
        }
        Ok(())
    };
    let mut c = match a.method {
        Method::Umbrella => {
            let c = a.c.ok_or_else(|| CliError::Input("--c is required for the umbrella method".into()))?;
            builder::umbrella(c)?
        }
        Method::FourByThree => {
            need_file()?;
            let m = input.vectors()?;
            match a.p.as_ref().or(input.p.as_ref()) {
                Some(p) => {
                    let p: [f64; 4] = p
                        .as_slice()
                        .try_into()
                        .map_err(|_| CliError::Input("p needs four entries".into()))?;
                    builder::build_4x3_with_p(&m, p)?
                }
                None if a.double => builder::build_4x3_raw(&m)?,
                None => builder::build_4x3(&m)?,
            }
        }
        Method::General => {
            need_file()?;
            let m = input.vectors()?;
            let r = a
                .r
                .as_ref()
                .or(input.r.as_ref())
                .ok_or_else(|| CliError::Input("the general method needs row weights r".into()))?;
            if a.double {
                builder::build_general_raw(&m, r)?
            } else {
                builder::build_general(&m, r)?
            }
        }
        Method::Pairwise => {
            need_file()?;
            match (&input.states, &input.povm) {
                (None, Some(p)) => builder::build_4x6(&p.to_povm()?)?,
                _ => builder::build_4x6_states(&input.vectors()?, a.allow_sign_flip)?,
            }
        }
    };
    if a.double {
        c = c.doubled();
    } else if matches!(a.method, Method::FourByThree | Method::General) {
        // the builders only test fixed-outcome settings at the ideal states
        bounds::check_appropriate(&c, DEFAULT_COMPLEX_STARTS, cli.seed).map_err(|e| match e {
            Error::DegenerateAdvantage { .. } => {
                CliError::Input(format!("{}: {e}; rerun with --double", e.name()))
            }
            e => e.into(),
        })?;
    }
    if let Some(k) = a.k {
        let povm = c
            .witness
            .penalty()
            .map(|p| p.povm.clone())
            .ok_or_else(|| CliError::Input("--k needs a target POVM, which this construction lacks".into()))?;
        c.witness = c.witness.clone().without_penalty().with_penalty(k, povm)?;
    }

    let path = cli.out.join("witness.json");
    let mut bundle = WitnessBundle::from_construction(&c);
    bundle.run = Some(rec.finish());
    let text = bundle.to_json()?;
    rec.write_output(&path, text.as_bytes())?;
    emit(cli, &construct_summary(&c, &path), &text);
    Ok(Verdict::Positive)
}

fn construct_summary(c: &Construction, path: &Path) -> String {
    let mut s = String::new();
    let w = &c.witness;
    let _ = writeln!(s, "construction: {} ({}x{})", c.kind.label(), w.rows(), w.cols());
    let _ = writeln!(s, "w:");
    for row in w.to_rows() {
        let _ = writeln!(s, "  {}", fmt_vec(&row));
    }
    match &c.params {
        ConstructionParams::FourByThree(p) | ConstructionParams::Umbrella(_, p) => {
            if let ConstructionParams::Umbrella(u, _) = &c.params {
                let _ = writeln!(s, "c: {}", u.c);
            }
            let _ = writeln!(s, "p: {}", fmt_vec(&p.p));
            let _ = writeln!(s, "q: {}", fmt_vec(&p.q));
            let _ = writeln!(s, "setting overlaps (12, 13, 23): {}", fmt_vec(&p.gram));
        }
        ConstructionParams::General(g) => {
            let _ = writeln!(s, "r: {}", fmt_vec(&g.r));
            let _ = writeln!(s, "eigenvalues: {}", fmt_vec(&g.eigenvalues));
            let _ = writeln!(s, "mu:");
            for i in 0..g.mu.nrows() {
                let row: Vec<f64> = g.mu.row(i).iter().cloned().collect();
                let _ = writeln!(s, "  {}", fmt_vec(&row));
            }
        }
        ConstructionParams::Pairwise(p) => {
            let _ = writeln!(s, "F:");
            for i in 0..p.f.nrows() {
                let row: Vec<f64> = p.f.row(i).iter().cloned().collect();
                let _ = writeln!(s, "  {}", fmt_vec(&row));
            }
            let _ = writeln!(s, "equilibrium residual: {:e}", p.equilibrium_residual);
        }
    }
    let _ = writeln!(s, "states:");
    for m in &c.states {
        let _ = writeln!(s, "  {}", fmt_bloch(m));
    }
    let _ = writeln!(s, "measurements:");
    for v in &c.measurements {
        let _ = writeln!(s, "  {}", fmt_bloch(v));
    }
    if let Some(p) = c.witness.penalty() {
        let _ = writeln!(s, "penalty k: {}", p.k);
    }
    let _ = writeln!(s, "ideal maximum: {}", c.ideal_max);
    let _ = writeln!(s, "written: {}", path.display());
    s
}

#[derive(Debug, Serialize)]
struct Setting {
    mu: f64,
    v: [f64; 3],
}

#[derive(Debug, Serialize)]
struct BoundReport {
    model: Model,
    value: f64,
    starts_used: usize,
    converged_fraction: f64,
    seed: Option<u64>,
    monotone: bool,
    argmax_states: Vec<[f64; 3]>,
    argmax_settings: Vec<Setting>,
}

impl From<&BoundResult> for BoundReport {
    fn from(b: &BoundResult) -> Self {
        BoundReport {
            model: b.model,
            value: b.value,
            starts_used: b.starts_used,
            converged_fraction: b.converged_fraction,
            seed: b.seed,
            monotone: b.monotone,
            argmax_states: b.argmax.state_vectors().iter().map(|m| m.0).collect(),
            argmax_settings: b
                .argmax
                .binaries
                .iter()
                .map(|m| Setting {
                    mu: m.mu(),
                    v: m.direction().0,
                })
                .collect(),
        }
    }
}

fn models(m: ModelArg) -> Vec<Model> {
    match m {
        ModelArg::Classical => vec![Model::Classical],
        ModelArg::Real => vec![Model::RealQubit],
        ModelArg::Complex => vec![Model::ComplexQubit],
        ModelArg::All => vec![Model::Classical, Model::RealQubit, Model::ComplexQubit],
    }
}

fn bound(w: &WitnessMatrix, model: Model, starts: Option<usize>, seed: u64) -> Result<BoundResult, Error> {
    match model {
        Model::Classical => bounds::classical_bound(w),
        Model::RealQubit => bounds::quantum_bound(w, model, starts.unwrap_or(DEFAULT_REAL_STARTS), seed),
        Model::ComplexQubit => {
            bounds::quantum_bound(w, model, starts.unwrap_or(DEFAULT_COMPLEX_STARTS), seed)
        }
    }
}

fn bounds_cmd(cli: &Cli, a: &BoundsArgs) -> Result<Verdict, CliError> {
    if a.umbrella_sweep {
        return umbrella_sweep(cli, a);
    }
    let mut rec = record(cli, "bounds");
    let path = a
        .bundle
        .as_ref()
        .ok_or_else(|| CliError::Input("give --bundle or --umbrella-sweep".into()))?;
    let c = load_bundle(&mut rec, path)?;
    let mut reports = Vec::new();
    for model in models(a.model) {
        reports.push(BoundReport::from(&bound(&c.witness, model, a.starts, cli.seed)?));
    }
    let mut text = String::new();
    let _ = writeln!(text, "witness: {} ({}x{}), ideal maximum {}", c.kind.label(), c.witness.rows(), c.witness.cols(), c.ideal_max);
    for r in &reports {
        let _ = writeln!(
            text,
            "{:<14} {:.12}  converged {:.3} of {} starts",
            r.model.label(),
            r.value,
            r.converged_fraction,
            r.starts_used
        );
        for m in &r.argmax_states {
            let _ = writeln!(text, "    state   {}", fmt_vec(m));
        }
        for s in &r.argmax_settings {
            let _ = writeln!(text, "    setting mu={} v={}", s.mu, fmt_vec(&s.v));
        }
    }
    let out = cli.out.join("bounds.json");
    let doc = json!({
        "bundle": path.display().to_string(),
        "ideal_max": c.ideal_max,
        "results": reports,
        "run": rec.finish(),
    });
    let body = to_json(&doc);
    rec.write_output(&out, body.as_bytes())?;
    emit(cli, &text, &body);
    Ok(Verdict::Positive)
}

fn sweep_grid(step: f64) -> Result<Vec<f64>, CliError> {
    if !(step.is_finite() && step > 0.0 && step <= 3.0) {
        return Err(CliError::Input(format!("--c-step must lie in (0, 3], got {step}")));
    }
    let n = (3.0 / step).round() as usize;
    if ((n as f64) * step - 3.0).abs() > 1e-9 {
        return Err(CliError::Input(format!("--c-step {step} does not divide 3")));
    }
    Ok((0..=n).map(|i| if i == n { 3.0 } else { i as f64 * step }).collect())
}

fn umbrella_sweep(cli: &Cli, a: &BoundsArgs) -> Result<Verdict, CliError> {
    let mut rec = record(cli, "bounds");
    let grid = sweep_grid(a.c_step)?;
    let mut csv = String::from("c,W_class,W_R2,W_C2\n");
    let mut text = format!("{:>6} {:>12} {:>12} {:>12}\n", "c", "W_class", "W_R2", "W_C2");
    for &c in &grid {
        let w = builder::UmbrellaFamily::new(c)?.witness();
        let class = bounds::classical_bound(&w)?.value;
        let real_opt = bound(&w, Model::RealQubit, a.starts, cli.seed)?.value;
        // the coplanar family is a feasible real strategy
        let real = real_opt.max(bounds::real_family_value(c)?);
        let complex = bound(&w, Model::ComplexQubit, a.starts, cli.seed)?.value;
        let _ = writeln!(csv, "{},{},{},{}", format_sig17(c), format_sig17(class), format_sig17(real), format_sig17(complex));
        let _ = writeln!(text, "{c:>6.3} {class:>12.6} {real:>12.6} {complex:>12.6}");
    }
    let out = cli.out.join("bounds_sweep.csv");
    rec.write_output(&out, csv.as_bytes())?;
    let side = cli.out.join("bounds_sweep.csv.run.json");
    let body = to_json(&json!({ "file": out.display().to_string(), "run": rec.finish() }));
    rec.write_output(&side, body.as_bytes())?;
    emit(cli, &text, csv.trim_end());
    Ok(Verdict::Positive)
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<Verdict, CliError> {
    let mut rec = record(cli, "simulate");
    let (c, source) = match (&a.bundle, a.umbrella_c) {
        (Some(path), _) => (load_bundle(&mut rec, path)?, path.display().to_string()),
        (None, Some(c)) => (builder::umbrella(c)?, format!("umbrella c={c}")),
        (None, None) => return Err(CliError::Input("give --bundle or --umbrella-c".into())),
    };
    if a.shots == 0 {
        return Err(CliError::Input("--shots must be positive".into()));
    }
    let spec = CircuitSpec::from_vectors(&c.states, &c.measurements, a.shots)?;
    let counts = sim::sample_counts(&spec, a.noise, cli.seed)?;
    let mut est = sim::estimate_witness(&c.witness, &counts)?;
    let umbrella_c = match &c.params {
        ConstructionParams::Umbrella(u, _) if !c.doubled => Some(u.c),
        _ => None,
    };
    if let Some(uc) = umbrella_c {
        est.sigma_analytic = Some(sim::sigma_analytic(uc, a.shots)?);
    }

    let circuits_path = cli.out.join("circuits.json");
    let counts_path = cli.out.join("counts.csv");
    let circuits_body = format!(
        "{{\n\"circuits\": {},\n\"run\": {}\n}}\n",
        spec.to_json()?,
        to_json(&rec.clone().finish())
    );
    rec.write_output(&circuits_path, circuits_body.as_bytes())?;
    let csv = counts.to_csv_string();
    rec.write_output(&counts_path, csv.as_bytes())?;
    let side = to_json(&json!({ "file": counts_path.display().to_string(), "run": rec.clone().finish() }));
    rec.write_output(&cli.out.join("counts.csv.run.json"), side.as_bytes())?;

    let doc = json!({
        "source": source,
        "construction": c.kind.label(),
        "c": umbrella_c,
        "noise": a.noise,
        "estimate": est,
        "ideal_max": c.ideal_max,
        "run": rec.finish(),
    });
    let body = to_json(&doc);
    rec.write_output(&cli.out.join("estimate.json"), body.as_bytes())?;

    let mut text = format!(
        "W_hat = {:.6} ± {:.6} ({} shots per circuit, {} circuits)\n",
        est.w_hat,
        est.sigma_hat,
        a.shots,
        spec.circuits().len()
    );
    if let Some(s) = est.sigma_analytic {
        let _ = writeln!(text, "analytic sigma: {s:.6}");
    }
    let _ = writeln!(text, "counts: {}", counts_path.display());
    emit(cli, &text, &body);
    Ok(Verdict::Positive)
}

fn certify(cli: &Cli, a: &CertifyArgs) -> Result<Verdict, CliError> {
    let mut rec = record(cli, "certify");
    let counts_text = rec.read_input(&a.counts)?;
    let counts = StatTable::read_csv(counts_text.as_bytes())?;
    let bundle = match &a.bundle {
        Some(p) => Some(load_bundle(&mut rec, p)?),
        None => None,
    };
    let bundle_c = bundle.as_ref().and_then(|b| match &b.params {
        ConstructionParams::Umbrella(u, _) if !b.doubled => Some(u.c),
        _ => None,
    });
    let umbrella_c = a.c.or(bundle_c);

    let (witness, mut thresholds) = match (umbrella_c, &bundle) {
        (Some(c), _) => {
            if let (Some(b), Some(bc)) = (&bundle, bundle_c) {
                if let Some(given) = a.c.filter(|&given| given != bc) {
                    return Err(CliError::Input(format!("--c {given} disagrees with the bundle's c = {bc}")));
                }
                (b.witness.clone(), Thresholds::umbrella(c)?)
            } else {
                (builder::UmbrellaFamily::new(c)?.witness(), Thresholds::umbrella(c)?)
            }
        }
        (None, Some(b)) => {
            if b.kind == ConstructionKind::Umbrella && b.doubled {
                log::info!("doubled umbrella witness; thresholds come from the optimizer");
            }
            let w = b.witness.clone();
            let t = Thresholds {
                w_class: bounds::classical_bound(&w)?.value,
                w_r2: bounds::quantum_bound(&w, Model::RealQubit, a.starts, cli.seed)?.value,
                w_c2: bounds::quantum_bound(&w, Model::ComplexQubit, DEFAULT_COMPLEX_STARTS, cli.seed)?
                    .value
                    .max(b.ideal_max),
            };
            (w, t)
        }
        (None, None) => return Err(CliError::Input("give --c or --bundle".into())),
    };
    if a.recompute && umbrella_c.is_some() {
        thresholds.w_r2 = bounds::quantum_bound(&witness, Model::RealQubit, a.starts, cli.seed)?.value;
    }
    let est = sim::estimate_witness(&witness, &counts)?;
    let cert = Certificate::from_estimate(&est, thresholds, a.zmin)?;

    let doc = json!({
        "counts": a.counts.display().to_string(),
        "c": umbrella_c,
        "shots": counts.shots(),
        "certificate": cert,
        "certified": cert.certified(),
        "run": rec.finish(),
    });
    let body = to_json(&doc);
    rec.write_output(&cli.out.join("certificate.json"), body.as_bytes())?;
    let yn = |b: bool| if b { "yes" } else { "no" };
    let mut text = String::new();
    let _ = writeln!(text, "W_hat = {:.6} ± {:.6}", cert.w_hat, cert.sigma_hat);
    let _ = writeln!(
        text,
        "thresholds: classical {:.6}, real qubit {:.6}, complex qubit {:.6}",
        cert.thresholds.w_class, cert.thresholds.w_r2, cert.thresholds.w_c2
    );
    let _ = writeln!(text, "z_class = {:.3}, z_real = {:.3} (z_min {})", cert.z_class, cert.z_real, cert.z_min);
    let _ = writeln!(
        text,
        "beats classical: {}, beats real qubit: {}",
        yn(cert.verdicts.beats_classical),
        yn(cert.verdicts.beats_real)
    );
    emit(cli, &text, &body);
    Ok(if cert.certified() {
        Verdict::Positive
    } else {
        Verdict::Negative
    })
}

fn verify(cli: &Cli, a: &VerifyArgs) -> Result<Verdict, CliError> {
    let mut rec = record(cli, "verify");
    let c = load_bundle(&mut rec, &a.bundle)?;
    let target = c.scenario()?;
    let report = bounds::verify_selftest(&c.witness, &target, a.trials, cli.seed)?;
    let doc = json!({
        "bundle": a.bundle.display().to_string(),
        "construction": c.kind.label(),
        "ideal_max": c.ideal_max,
        "report": report,
        "run": rec.finish(),
    });
    let body = to_json(&doc);
    let out: PathBuf = cli.out.join("verify.json");
    rec.write_output(&out, body.as_bytes())?;
    let mut text = format!(
        "{}: bound {:.12}, target {:.12}, {} of {} starts optimal, worst Gram deviation {:.2e}\n",
        if report.pass { "unique" } else { "NOT confirmed" },
        report.bound,
        report.target_value,
        report.optimal_starts,
        report.trials,
        report.worst_deviation
    );
    let _ = writeln!(text, "POVM reconstruction: {}", report.povm_reconstruction);
    for n in &report.notes {
        let _ = writeln!(text, "note: {n}");
    }
    emit(cli, &text, &body);
    Ok(if report.pass {
        Verdict::Positive
    } else {
        Verdict::Negative
    })
}
