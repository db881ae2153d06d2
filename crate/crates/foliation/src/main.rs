//! Command-line front-end: classification, equivalence, resonances, normal
//! forms, sphere tracing, and the full invariant battery, with deterministic
//! JSON verdicts validated against the shipped schemas.

use clap::{Parser, Subcommand};
use foliation::classify::{
    classify_2d, conjectured_equivalent_nd, equivalent_2d, Decision, EquivClass2D, CF_TOL,
    RATIO_TOL,
};
use foliation::germ::{parse_germ, serialize_germ, Germ};
use foliation::normalform::poincare_dulac_germ;
use foliation::resonance::{enumerate_resonances, RES_TOL};
use foliation::scalar::C64;
use foliation::spectral::spectrum_of_germ;
use foliation::trace::{
    detect_closure, holonomy_estimate, orientation_self_test, resonant_apex, slope_estimate,
    torus_radius_profile, trace_leaf, trace_leaf_directed, trajectory_csv, Closure, Profile,
    SpherePoint, Trajectory, DELTA_CLOSE, DIRECTION_TOL, TANGENCY_TOL,
};
use foliation::verdict::{digest_bytes, validate, InputDigest, Numerics, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "foliation", version, about = "Topological classification and sphere-trace invariants of Poincaré-type foliation germs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Topological equivalence class of a planar germ
    Classify { germ: String },
    /// Decide topological equivalence of two planar germs
    Equiv { germ1: String, germ2: String },
    /// Enumerate all resonance relations of the spectrum
    Resonances { germ: String },
    /// Poincaré–Dulac normal form with the conjugating changes
    NormalForm {
        germ: String,
        /// Truncation degree (default: resonance degree bound)
        #[arg(long)]
        degree: Option<u32>,
    },
    /// Integrate one leaf of the intersection foliation on the unit sphere
    Trace {
        germ: String,
        /// Start point as comma-separated re,im pairs (must lie on the sphere)
        #[arg(long)]
        start: String,
        #[arg(long, default_value_t = 100.0)]
        tmax: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        backward: bool,
        /// Write the trajectory CSV here
        #[arg(long)]
        out: Option<String>,
    },
    /// Full invariant battery over seeded random starts
    Invariants {
        germ: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        starts: usize,
    },
    /// Ray-configuration equivalence oracle for germs of any dimension
    NdEquiv { germ1: String, germ2: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    match run(cli.command, argv) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load_germ(path: &str) -> Result<(Germ, InputDigest), String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{path}: {e}"))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| format!("{path}: {e}"))?;
    let germ = parse_germ(&text).map_err(|e| format!("{path}: {e}"))?;
    Ok((germ, digest_bytes(path, &bytes)))
}

fn emit(verdict: &Verdict, schema_name: &str) -> Result<(), String> {
    let schema: Value = serde_json::from_str(schema_text(schema_name))
        .expect("shipped schema parses");
    let doc = serde_json::to_value(verdict).expect("verdict serializes");
    validate(&schema, &doc)
        .map_err(|e| format!("internal: output violates {schema_name} schema: {e}"))?;
    println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    Ok(())
}

fn schema_text(name: &str) -> &'static str {
    match name {
        "classify" => include_str!("../schemas/classify.schema.json"),
        "equiv" => include_str!("../schemas/equiv.schema.json"),
        "resonances" => include_str!("../schemas/resonances.schema.json"),
        "normal-form" => include_str!("../schemas/normal-form.schema.json"),
        "trace" => include_str!("../schemas/trace.schema.json"),
        "invariants" => include_str!("../schemas/invariants.schema.json"),
        "nd-equiv" => include_str!("../schemas/nd-equiv.schema.json"),
        _ => unreachable!("unknown schema"),
    }
}

fn germ_value(g: &Germ) -> Value {
    serde_json::from_str(&serialize_germ(g)).expect("germ round-trips")
}

fn closure_json(c: &Closure) -> Value {
    match c {
        Closure::Closed { period, windings, residual, reliable } => json!({
            "closed": true,
            "period": period,
            "windings": windings,
            "residual": residual,
            "reliable": reliable,
        }),
        Closure::NotClosed { min_return_distance } => json!({
            "closed": false,
            "min_return_distance": min_return_distance,
        }),
    }
}

fn profile_json(p: &Profile) -> Value {
    match p {
        Profile::Constant { radius } => json!({"kind": "Constant", "radius": radius}),
        Profile::Monotone { increasing } => {
            json!({"kind": "Monotone", "increasing": increasing})
        }
        Profile::UniqueMax { apex_t, apex } => json!({
            "kind": "UniqueMax",
            "apex_t": apex_t,
            "apex": apex.iter().map(|z| vec![z.re, z.im]).collect::<Vec<_>>(),
        }),
        Profile::Ambiguous { reason } => json!({"kind": "Ambiguous", "reason": reason}),
    }
}

fn class_payload(class: &EquivClass2D) -> (Value, &'static str) {
    match class {
        EquivClass2D::Generic => (json!({"class": "Generic"}), "Generic"),
        EquivClass2D::Rational { p, q } => {
            (json!({"class": "Rational", "p": p, "q": q}), "Rational")
        }
        EquivClass2D::Irrational { lambda } => {
            (json!({"class": "Irrational", "lambda": lambda}), "Irrational")
        }
        EquivClass2D::Resonant { m } => (json!({"class": "Resonant", "m": m}), "Resonant"),
    }
}

fn run(cmd: Command, argv: Vec<String>) -> Result<u8, String> {
    match cmd {
        Command::Classify { germ } => {
            let (g, digest) = load_germ(&germ)?;
            let c = classify_2d(&g).map_err(|e| e.to_string())?;
            let (mut payload, _) = class_payload(&c.class);
            let obj = payload.as_object_mut().unwrap();
            obj.insert("canonical_type".into(), json!(c.canonical.typ));
            obj.insert("decided_exact".into(), json!(c.decided_exact));
            obj.insert(
                "witness".into(),
                c.witness.as_ref().map_or(Value::Null, |w| {
                    json!({"p": w.p, "q": w.q, "err": w.err, "accepted": w.accepted})
                }),
            );
            let mut numerics = Numerics::default();
            numerics.tolerances.insert("continued_fraction_tol".into(), CF_TOL);
            numerics.tolerances.insert("ratio_tol".into(), RATIO_TOL);
            numerics.exact_path.insert("classification".into(), c.decided_exact);
            let v = Verdict { command: argv, inputs: vec![digest], payload, numerics };
            emit(&v, "classify")?;
            Ok(0)
        }
        Command::Equiv { germ1, germ2 } => {
            let (g1, d1) = load_germ(&germ1)?;
            let (g2, d2) = load_germ(&germ2)?;
            let e = equivalent_2d(&g1, &g2).map_err(|e| e.to_string())?;
            let equivalent = match e.decision {
                Decision::Equivalent => json!(true),
                Decision::NotEquivalent => json!(false),
                Decision::Unknown => Value::Null,
            };
            let payload = json!({
                "decision": format!("{:?}", e.decision),
                "equivalent": equivalent,
                "certificate": e.certificate,
                "class1": e.class1.to_string(),
                "class2": e.class2.to_string(),
            });
            let mut numerics = Numerics::default();
            numerics.tolerances.insert("continued_fraction_tol".into(), CF_TOL);
            numerics.tolerances.insert("ratio_tol".into(), RATIO_TOL);
            let v = Verdict { command: argv, inputs: vec![d1, d2], payload, numerics };
            emit(&v, "equiv")?;
            Ok(if e.decision == Decision::Unknown { 2 } else { 0 })
        }
        Command::Resonances { germ } => {
            let (g, digest) = load_germ(&germ)?;
            let spec = spectrum_of_germ(&g).map_err(|e| e.to_string())?;
            let rs = enumerate_resonances(&spec).map_err(|e| e.to_string())?;
            let payload = json!({
                "eigenvalues": spec
                    .eigenvalues
                    .iter()
                    .map(|e| vec![e.value.re, e.value.im])
                    .collect::<Vec<_>>(),
                "count": rs.len(),
                "resonances": rs.iter().map(|r| json!({
                    "target": r.target,
                    "exponents": r.m,
                    "trivial": r.trivial,
                    "essential": r.essential,
                    "decided_exact": r.decided_exact,
                    "residual": r.residual,
                })).collect::<Vec<_>>(),
            });
            let mut numerics = Numerics::default();
            numerics.tolerances.insert("resonance_tol".into(), RES_TOL);
            numerics.exact_path.insert("resonances".into(), spec.exact);
            let v = Verdict { command: argv, inputs: vec![digest], payload, numerics };
            emit(&v, "resonances")?;
            Ok(0)
        }
        Command::NormalForm { germ, degree } => {
            let (g, digest) = load_germ(&germ)?;
            let nf = poincare_dulac_germ(&g, degree).map_err(|e| e.to_string())?;
            let payload = json!({
                "degree": nf.degree,
                "exact": nf.exact,
                "resonant_support": nf.resonant_support.iter().map(|(i, m)| json!({
                    "component": i + 1,
                    "exponents": m,
                })).collect::<Vec<_>>(),
                "normal": germ_value(&nf.normal),
                "forward": germ_value(&nf.forward),
                "inverse": germ_value(&nf.inverse),
            });
            let mut numerics = Numerics::default();
            numerics.tolerances.insert("resonance_tol".into(), RES_TOL);
            numerics.exact_path.insert("normal_form".into(), nf.exact);
            let v = Verdict { command: argv, inputs: vec![digest], payload, numerics };
            emit(&v, "normal-form")?;
            Ok(0)
        }
        Command::Trace { germ, start, tmax, tol, backward, out } => {
            if !orientation_self_test() {
                return Err("orientation self-test failed".to_string());
            }
            let (g, digest) = load_germ(&germ)?;
            let start = parse_start(&start, g.dimension)?;
            let field = g.to_numeric();
            let traj = trace_leaf_directed(&field, &start, tmax, tol, backward)
                .map_err(|e| e.to_string())?;
            let closure = detect_closure(&field, &traj, DELTA_CLOSE)
                .map_err(|e| e.to_string())?;
            let profile = torus_radius_profile(&traj);
            let slope = slope_estimate(&traj).ok();
            if let Some(path) = &out {
                std::fs::write(path, trajectory_csv(&traj))
                    .map_err(|e| format!("{path}: {e}"))?;
            }
            let ambiguous = matches!(profile, Profile::Ambiguous { .. });
            let payload = json!({
                "closure": closure_json(&closure),
                "profile": profile_json(&profile),
                "slope": slope,
                "transversality_margin": traj.transversality_margin,
                "samples": traj.samples.len(),
                "csv_path": out,
            });
            let mut numerics = Numerics::default();
            for (k, t) in [
                ("step_tol", tol),
                ("delta_close", DELTA_CLOSE),
                ("direction_tol", DIRECTION_TOL),
                ("tangency_tol", TANGENCY_TOL),
            ] {
                numerics.tolerances.insert(k.into(), t);
            }
            numerics.exact_path.insert("trace".into(), false);
            let v = Verdict { command: argv, inputs: vec![digest], payload, numerics };
            emit(&v, "trace")?;
            Ok(if ambiguous { 2 } else { 0 })
        }
        Command::Invariants { germ, seed, starts } => {
            if !orientation_self_test() {
                return Err("orientation self-test failed".to_string());
            }
            let (g, digest) = load_germ(&germ)?;
            let (payload, ambiguous, mut numerics) = invariant_battery(&g, seed, starts)?;
            numerics.seed = Some(seed);
            let v = Verdict { command: argv, inputs: vec![digest], payload, numerics };
            emit(&v, "invariants")?;
            Ok(if ambiguous { 2 } else { 0 })
        }
        Command::NdEquiv { germ1, germ2 } => {
            let (g1, d1) = load_germ(&germ1)?;
            let (g2, d2) = load_germ(&germ2)?;
            let v = conjectured_equivalent_nd(&g1, &g2).map_err(|e| e.to_string())?;
            let equivalent = match v.result {
                Decision::Equivalent => json!(true),
                Decision::NotEquivalent => json!(false),
                Decision::Unknown => Value::Null,
            };
            let payload = json!({
                "result": format!("{:?}", v.result),
                "equivalent": equivalent,
                "reasons": v.reasons,
            });
            let mut numerics = Numerics::default();
            numerics.tolerances.insert("ratio_tol".into(), RATIO_TOL);
            let verdict = Verdict { command: argv, inputs: vec![d1, d2], payload, numerics };
            emit(&verdict, "nd-equiv")?;
            Ok(if v.result == Decision::Unknown { 2 } else { 0 })
        }
    }
}

fn parse_start(text: &str, n: usize) -> Result<SpherePoint, String> {
    let parts: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse()).collect();
    let parts = parts.map_err(|e| format!("--start: {e}"))?;
    if parts.len() != 2 * n {
        return Err(format!(
            "--start: expected {} comma-separated values (re,im per coordinate), got {}",
            2 * n,
            parts.len()
        ));
    }
    let z: Vec<C64> = parts.chunks(2).map(|p| C64::new(p[0], p[1])).collect();
    SpherePoint::new(z).map_err(|e| format!("--start: {e}"))
}

/// Sample a start uniformly on the unit sphere, rejecting points with any
/// coordinate radius below 1e-3 (axis-adjacent argument tracks are
/// unreliable).
fn sample_start(rng: &mut ChaCha8Rng, n: usize) -> SpherePoint {
    loop {
        let z: Vec<C64> = (0..n)
            .map(|_| {
                let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let r = (-2.0 * u1.ln()).sqrt();
                C64::new(r * u2.cos(), r * u2.sin())
            })
            .collect();
        let point = SpherePoint::project(z);
        if point.0.iter().all(|c| c.norm() >= 1e-3) {
            return point;
        }
    }
}

fn invariant_battery(
    g: &Germ,
    seed: u64,
    n_starts: usize,
) -> Result<(Value, bool, Numerics), String> {
    if g.dimension != 2 {
        return Err("the invariant battery is defined for planar germs".to_string());
    }
    let classification = classify_2d(g).map_err(|e| e.to_string())?;
    let field = g.to_numeric();
    let resonant_m = match classification.class {
        EquivClass2D::Resonant { m } => Some(m),
        _ => None,
    };
    let t_max = if resonant_m.is_some() { 100.0 } else { 1000.0 };
    let step_tol = 1e-9;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<SpherePoint> = (0..n_starts).map(|_| sample_start(&mut rng, 2)).collect();

    // trace every start concurrently; assemble in input order
    let traced: Vec<Result<(Trajectory, Option<Trajectory>), String>> =
        std::thread::scope(|scope| {
            let handles: Vec<_> = starts
                .iter()
                .map(|start| {
                    let field = &field;
                    scope.spawn(move || {
                        let fwd = trace_leaf(field, start, t_max, step_tol)
                            .map_err(|e| e.to_string())?;
                        let bwd = if resonant_m.is_some() {
                            Some(
                                trace_leaf_directed(field, start, t_max, step_tol, true)
                                    .map_err(|e| e.to_string())?,
                            )
                        } else {
                            None
                        };
                        Ok((fwd, bwd))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("tracer panicked")).collect()
        });

    let mut start_rows = Vec::new();
    let mut ambiguous = false;
    let mut min_margin = f64::INFINITY;
    let mut apex_max_residual: Option<f64> = None;
    let mut slope: Option<f64> = None;
    for (start, traced) in starts.iter().zip(traced) {
        let (fwd, bwd) = traced?;
        min_margin = min_margin.min(fwd.transversality_margin);
        let closure = detect_closure(&field, &fwd, DELTA_CLOSE).map_err(|e| e.to_string())?;
        let profile = torus_radius_profile(&fwd);
        let mut apex_residual = None;
        if let Some(m) = resonant_m {
            // the apex may lie on either side of the start
            let attempt = resonant_apex(&field, &fwd, m).or_else(|_| {
                resonant_apex(&field, bwd.as_ref().expect("backward trace present"), m)
            });
            match attempt {
                Ok((_, residual)) => {
                    apex_residual = Some(residual);
                    apex_max_residual =
                        Some(apex_max_residual.map_or(residual, |r: f64| r.max(residual)));
                }
                Err(_) => ambiguous = true,
            }
        }
        if matches!(profile, Profile::Ambiguous { .. }) {
            ambiguous = true;
        }
        if slope.is_none() && matches!(profile, Profile::Constant { .. }) {
            slope = slope_estimate(&fwd).ok();
        }
        start_rows.push(json!({
            "start": start.0.iter().map(|z| vec![z.re, z.im]).collect::<Vec<_>>(),
            "closure": closure_json(&closure),
            "profile": profile_json(&profile),
            "apex_residual": apex_residual,
        }));
    }

    // holonomy around {x = 0} when that axis leaf is invariant and closed
    let x_axis_invariant = g.terms.keys().all(|(i, m)| *i != 0 || m[0] >= 1);
    let holonomy = if x_axis_invariant && resonant_m.is_none() {
        holonomy_estimate(&field, 0, 0.05, t_max, step_tol).ok()
    } else {
        None
    };

    let payload = json!({
        "class": classification.class.to_string(),
        "starts": start_rows,
        "slope": slope,
        "holonomy": holonomy.map(|h| vec![h.re, h.im]),
        "apex_max_residual": apex_max_residual,
        "min_transversality_margin": min_margin,
        "ambiguous": ambiguous,
    });
    let mut numerics = Numerics::default();
    for (k, t) in [
        ("step_tol", step_tol),
        ("delta_close", DELTA_CLOSE),
        ("direction_tol", DIRECTION_TOL),
        ("tangency_tol", TANGENCY_TOL),
        ("continued_fraction_tol", CF_TOL),
    ] {
        numerics.tolerances.insert(k.into(), t);
    }
    numerics
        .exact_path
        .insert("classification".into(), classification.decided_exact);
    numerics.exact_path.insert("trace".into(), false);
    Ok((payload, ambiguous, numerics))
}
