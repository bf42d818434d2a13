use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use cmcgraph::assembly::{DiscreteField, Discretization, PenalizedProblem};
use cmcgraph::domain::{boundary_convexity, measures, write_mesh, write_vtk, TriangulatedDomain, VolumeRule};
use cmcgraph::geometry::MetricField;
use cmcgraph::solver::{run_continuation, shift_solution, solve_penalized, ContinuationReport};
use cmcgraph::sparse::norm_inf;
use cmcgraph::verify::{render_table, run_items, run_suite, SuiteItem, SuiteOutcome, VerificationCase};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Overrides, RunConfig};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_VERIFY: u8 = 4;

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

type CmdResult = Result<(), Failure>;

fn config_failure(error: anyhow::Error) -> Failure {
    Failure { code: EXIT_CONFIG, error }
}

fn core_failure(e: cmcgraph::Error, context: &str) -> Failure {
    let code = match e {
        cmcgraph::Error::NewtonDiverged { .. }
        | cmcgraph::Error::LinearSolveFailed(_)
        | cmcgraph::Error::NonFiniteResidual { .. } => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    };
    if let cmcgraph::Error::NewtonDiverged { residual_history, .. } = &e {
        eprintln!("residual history: {residual_history:?}");
    }
    Failure { code, error: anyhow::Error::new(e).context(context.to_string()) }
}

fn init_workers(workers: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = workers {
        if n == 0 {
            return Err(config_failure(anyhow!("--workers must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| config_failure(e.into()))?;
    }
    Ok(())
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(config_failure)?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display())).map_err(config_failure)?;
    Ok(path)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

struct Setup {
    cfg: RunConfig,
    metric: Arc<dyn MetricField<f64>>,
    domain: Arc<TriangulatedDomain<f64>>,
}

fn setup(path: &Path, o: &Overrides) -> Result<Setup, Failure> {
    let cfg = RunConfig::load(path, o).map_err(config_failure)?;
    init_workers(cfg.workers)?;
    let metric = cfg.metric.build::<f64>().map_err(|e| core_failure(e, "field `metric`"))?;
    let domain = Arc::new(cfg.domain.build::<f64>().map_err(|e| core_failure(e, "field `domain`"))?);
    Ok(Setup { cfg, metric, domain })
}

struct Problem {
    problem: PenalizedProblem<f64>,
    u0: Vec<f64>,
}

fn problem(s: &Setup, eps: f64) -> Result<Problem, Failure> {
    let phi = s.cfg.phi.sample(&s.domain).map_err(|e| core_failure(e, "field `phi`"))?;
    let u0 = s.cfg.u0.build(&s.domain, &*s.metric, &phi).map_err(|e| core_failure(e, "field `u0`"))?;
    let disc = Discretization::new(s.metric.clone(), s.domain.clone()).map_err(|e| core_failure(e, "assembly"))?;
    let problem = PenalizedProblem::new(Arc::new(disc), phi, eps, 0.0).map_err(|e| core_failure(e, "`eps`"))?;
    Ok(Problem { problem, u0 })
}

#[derive(Serialize, Deserialize)]
pub struct MeshSummary {
    pub command: String,
    pub domain: cmcgraph::domain::DomainSpec,
    pub metric: String,
    pub vertices: usize,
    pub edges: usize,
    pub triangles: usize,
    pub boundary_vertices: usize,
    pub euler_characteristic: i64,
    pub h_mesh: f64,
    pub chart_area: f64,
    pub volume: f64,
    pub boundary_length: f64,
    pub kappa1: f64,
    pub strictly_convex: bool,
    pub mesh_file: String,
}

pub fn mesh(path: &Path, o: &Overrides) -> CmdResult {
    let s = setup(path, o)?;
    let d = &s.domain;
    let m = measures(d, &*s.metric, VolumeRule::EdgeMidpoints).map_err(|e| core_failure(e, "measures"))?;
    let conv = boundary_convexity(d, &*s.metric).map_err(|e| core_failure(e, "convexity"))?;
    write_file(&s.cfg.output, "mesh.txt", &write_mesh::<f64>(d, &[]))?;
    let summary = MeshSummary {
        command: "mesh".into(),
        domain: s.cfg.domain.clone(),
        metric: s.metric.label(),
        vertices: d.num_vertices(),
        edges: d.num_edges(),
        triangles: d.triangles().len(),
        boundary_vertices: d.boundary().len(),
        euler_characteristic: d.euler_characteristic(),
        h_mesh: d.h_mesh(),
        chart_area: d.chart_area(),
        volume: m.volume,
        boundary_length: m.boundary_length,
        kappa1: conv.kappa1,
        strictly_convex: conv.is_strictly_convex(),
        mesh_file: "mesh.txt".into(),
    };
    write_file(&s.cfg.output, "mesh.json", &to_json(&summary))?;
    println!(
        "mesh: V={} E={} F={} boundary={} h_mesh={:.4} volume={:.6} kappa1={:.6}",
        summary.vertices,
        summary.edges,
        summary.triangles,
        summary.boundary_vertices,
        summary.h_mesh,
        summary.volume,
        summary.kappa1
    );
    Ok(())
}

pub struct SolveArgs {
    pub eps: f64,
    pub upsilon: f64,
    pub init_noise: Option<f64>,
    pub vtk: bool,
    pub dump_jacobian: bool,
}

#[derive(Serialize)]
struct SolveReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    eps: f64,
    upsilon: f64,
    converged: bool,
    iterations: usize,
    residual_history: &'a [f64],
    /// Residual of `u` under the (eps, upsilon) problem.
    final_residual: f64,
    sup_grad: f64,
    lambda_mean: f64,
    lambda_compat: f64,
    lambda_field: &'a [f64],
    contact_cosine: &'a [f64],
    u: &'a [f64],
}

pub fn solve(path: &Path, o: &Overrides, a: SolveArgs) -> CmdResult {
    let s = setup(path, o)?;
    if !a.upsilon.is_finite() {
        return Err(config_failure(anyhow!("--upsilon must be finite")));
    }
    let Problem { problem, u0 } = problem(&s, a.eps)?;
    let init = match a.init_noise {
        Some(amp) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s.cfg.seed);
            (0..problem.num_vertices()).map(|_| rng.gen_range(-amp..=amp)).collect()
        }
        None => u0,
    };
    let init = DiscreteField::new(init, problem.num_vertices()).map_err(|e| core_failure(e, "initial guess"))?;
    // Solve with υ = 0 and shift: u_{ε,υ} = u_{ε,0} − υ/ε.
    let r = solve_penalized(&problem, &init, &s.cfg.newton).map_err(|e| core_failure(e, "solve"))?;
    if !r.converged {
        eprintln!("residual history: {:?}", r.residual_history);
        return Err(Failure {
            code: EXIT_SOLVER,
            error: anyhow!("Newton iteration did not converge in {} iterations", r.iterations),
        });
    }
    let target = problem.with_upsilon(a.upsilon);
    let u = shift_solution(&r.u, a.eps, a.upsilon).map_err(|e| core_failure(e, "shift"))?;
    let res = target.residual(&u).map_err(|e| core_failure(e, "residual"))?;
    let lambda_field = target.lambda_field(&u);
    let report = SolveReport {
        command: "solve",
        config: &s.cfg,
        eps: a.eps,
        upsilon: a.upsilon,
        converged: r.converged,
        iterations: r.iterations,
        residual_history: &r.residual_history,
        final_residual: norm_inf(&res),
        sup_grad: r.sup_grad,
        lambda_mean: target.weighted_mean(&lambda_field),
        lambda_compat: r.lambda_compat,
        lambda_field: &lambda_field,
        contact_cosine: &r.contact_cosine,
        u: &u,
    };
    write_file(&s.cfg.output, "solve.json", &to_json(&report))?;
    if a.vtk {
        let vtk = write_vtk(&s.domain, Some(&u), &[("u", &u), ("lambda_field", &lambda_field)]);
        write_file(&s.cfg.output, "solve.vtk", &vtk)?;
    }
    if a.dump_jacobian {
        let jac = target.jacobian(&u).map_err(|e| core_failure(e, "jacobian"))?;
        let mut buf = Vec::new();
        jac.write_coordinate(&mut buf).expect("writing to memory");
        write_file(&s.cfg.output, "jacobian.txt", &String::from_utf8(buf).expect("ascii"))?;
    }
    println!(
        "solve: eps={:e} upsilon={} iterations={} residual={:.3e} lambda_mean={:.8} sup_grad={:.6}",
        a.eps, a.upsilon, r.iterations, report.final_residual, report.lambda_mean, r.sup_grad
    );
    Ok(())
}

#[derive(Serialize)]
struct ContinuationOutput<'a> {
    command: &'static str,
    config: &'a RunConfig,
    report: &'a ContinuationReport<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    u_final: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    u_eps0_final: Option<&'a [f64]>,
}

pub fn continuation(path: &Path, o: &Overrides, dump_fields: bool, vtk: bool) -> CmdResult {
    let s = setup(path, o)?;
    let Problem { problem, u0 } = problem(&s, s.cfg.eps_schedule[0])?;
    let u0 = DiscreteField::new(u0, problem.num_vertices()).map_err(|e| core_failure(e, "u0"))?;
    let (report, failure) = match run_continuation(&problem, &s.cfg.eps_schedule, &u0, &s.cfg.newton) {
        Ok(r) => (r, None),
        Err(aborted) => {
            let failure = core_failure(aborted.source, "continuation");
            match aborted.partial {
                Some(p) => (*p, Some(failure)),
                None => return Err(failure),
            }
        }
    };
    let out = ContinuationOutput {
        command: "continuation",
        config: &s.cfg,
        report: &report,
        u_final: if dump_fields { report.u_final.as_deref() } else { None },
        u_eps0_final: if dump_fields { report.u_eps0_final.as_deref() } else { None },
    };
    write_file(&s.cfg.output, "continuation.json", &to_json(&out))?;
    if vtk {
        if let Some(u) = &report.u_final {
            write_file(&s.cfg.output, "continuation.vtk", &write_vtk(&s.domain, Some(u), &[("u", u)]))?;
        }
    }
    for r in &report.records {
        println!(
            "eps={:.1e} lambda={:.10} spread={:.3e} upsilon={:.6} sup_grad={:.6} iterations={}",
            r.eps, r.lambda, r.lambda_spread, r.upsilon, r.sup_grad, r.iterations
        );
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(f) = failure {
        return Err(f);
    }
    if let Some(l) = report.lambda_final {
        println!("lambda_final={l:.10}");
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CaseFile {
    Items(Vec<SuiteItem>),
    Case(Box<VerificationCase>),
}

pub fn verify(suite: &str, case: Option<&Path>, output: &Path, seed: Option<u64>, workers: Option<usize>) -> CmdResult {
    init_workers(workers)?;
    let outcome: SuiteOutcome = match case {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(config_failure)?;
            let file: CaseFile = serde_json::from_str(&text)
                .with_context(|| format!("{}: not a verification case or list of suite items", path.display()))
                .map_err(config_failure)?;
            let mut items = match file {
                CaseFile::Items(v) => v,
                CaseFile::Case(c) => vec![SuiteItem::Case(c)],
            };
            for item in &mut items {
                if let (SuiteItem::Case(c), Some(s)) = (item, seed) {
                    c.seed = s;
                }
            }
            run_items(&path.display().to_string(), &items)
        }
        None => run_suite(suite, seed).map_err(|e| core_failure(e, "--suite"))?,
    };
    write_file(output, "verify.json", &to_json(&outcome))?;
    print!("{}", render_table(&outcome));
    if !outcome.passed {
        return Err(Failure { code: EXIT_VERIFY, error: anyhow!("verification suite `{}` failed", outcome.suite) });
    }
    Ok(())
}
