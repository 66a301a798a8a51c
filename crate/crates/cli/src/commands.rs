//! One function per subcommand. Each returns an [`Outcome`]; input
//! problems become an `input_error` report rather than a panic.

use std::path::Path;

use quadmetric::euclid::{run_suite, SuiteShape};
use quadmetric::{
    ann_gap, boxtimes_as_ann_plan, certify_embeddable_upto5, check_boxtimes, search_violation, Assignment, BoxtimesReport,
    Certification, LebedevaInstance, MetricError, Plan, Refusal, SearchConfig, SearchError, SearchReport, Space,
    TriangleViolation, Violation,
};
use serde_json::{json, Value};

use crate::input::{parse_space, read_bytes, InputError, InstanceFile, SpaceInput};
use crate::report::{digest, Outcome, Status};

/// Default tolerance for the ⊠ scan and the embeddability certificate.
pub const BOXTIMES_TOL: f64 = 1e-9;
/// Residual and slack tolerance for the Euclidean suites.
pub const EUCLID_TOL: f64 = 1e-9;
/// Witness lists are cut at this length; `results` keeps the full count.
pub const MAX_WITNESSES: usize = 1000;

pub const NON_EMBEDDABILITY_NOTE: &str =
    "non-embeddability into CAT(0) spaces is a cited result for this construction and is not computationally verified";

struct Ctx {
    command: &'static str,
    options: Value,
    inputs: Vec<(&'static str, Vec<u8>)>,
}

impl Ctx {
    fn new(command: &'static str, options: Value) -> Self {
        Self { command, options, inputs: Vec::new() }
    }

    fn read(&mut self, name: &'static str, path: &Path) -> Result<Vec<u8>, InputError> {
        let bytes = read_bytes(path)?;
        self.inputs.push((name, bytes.clone()));
        Ok(bytes)
    }

    fn digest(&self) -> String {
        let inputs: Vec<(&str, &[u8])> = self.inputs.iter().map(|(n, b)| (*n, b.as_slice())).collect();
        digest(self.command, &inputs, &self.options)
    }

    fn outcome(&self, status: Status, results: Value, witnesses: Vec<Value>, timing: Value) -> Outcome {
        Outcome::new(self.command, self.digest(), status, results, witnesses, timing)
    }

    fn settle(&self, result: Result<Outcome, InputError>) -> Outcome {
        result.unwrap_or_else(|e| Outcome::input_error(self.command, self.digest(), &e))
    }

    fn space_input(&mut self, path: &Path) -> Result<SpaceInput, InputError> {
        let bytes = self.read("space", path)?;
        parse_space(path, &bytes)
    }

    fn instance(&mut self, path: Option<&Path>) -> Result<InstanceFile, InputError> {
        match path {
            Some(p) => {
                let bytes = self.read("instance", p)?;
                InstanceFile::parse(p, &bytes)
            }
            None => Ok(InstanceFile::default_instance()),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<f64, InputError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(InputError::Option(format!("--{name} must be positive and finite, got {v}")))
    }
}

fn one_based(quad: [usize; 4]) -> [usize; 4] {
    quad.map(|x| x + 1)
}

pub fn plan_json(plan: &Plan) -> Value {
    json!({ "p": plan.p(), "q": plan.q(), "pi": plan.pi_rows() })
}

fn assignment_json(asg: &Assignment) -> Value {
    json!(asg.indices().iter().map(|i| i + 1).collect::<Vec<_>>())
}

fn triangle_witness(v: &TriangleViolation<f64>) -> Value {
    json!({ "kind": "triangle", "triple": [v.i + 1, v.j + 1, v.k + 1], "slack": v.slack })
}

fn semimetric_witness(v: &Violation) -> Value {
    let mut w = match *v {
        Violation::Empty => json!({ "kind": "empty" }),
        Violation::NonSquare { row, len, expected } => {
            json!({ "kind": "non_square", "row": row + 1, "len": len, "expected": expected })
        }
        Violation::NegativeEntry(i, j) => json!({ "kind": "negative_entry", "pair": [i + 1, j + 1] }),
        Violation::NonzeroDiagonal(i) => json!({ "kind": "nonzero_diagonal", "index": i + 1 }),
        Violation::Asymmetric(i, j) => json!({ "kind": "asymmetric", "pair": [i + 1, j + 1] }),
    };
    w["detail"] = json!(v.to_string());
    w
}

/// The minimizing quadruple with its ANN-plan encoding, so the witness can
/// be re-evaluated by any ANN evaluator.
fn boxtimes_witness(n: usize, b: &BoxtimesReport<f64>) -> Value {
    let (asg, plan) = boxtimes_as_ann_plan(n, b.quad, b.s, b.t).expect("minimizer lies in the unit square");
    json!({
        "kind": "boxtimes",
        "quadruple": one_based(b.quad),
        "s": b.s,
        "t": b.t,
        "gap": b.min_gap,
        "encoding": { "assignment": assignment_json(&asg), "plan": plan_json(&plan) },
    })
}

fn boxtimes_results(b: &BoxtimesReport<f64>, tol: f64) -> Value {
    json!({ "min_gap": b.min_gap, "quadruples": b.quadruples, "tol": tol, "passed": b.min_gap >= -tol })
}

/// Search summary, the best plan as a witness, and the work counters. The
/// plan is rebuilt through the validating constructor and re-evaluated, so
/// a reported violation never rests on optimizer state.
fn search_parts(space: &Space, r: &SearchReport<f64>) -> (Value, Value, bool) {
    let recheck = Plan::new(r.best_plan.p().to_vec(), r.best_plan.q().to_vec(), r.best_plan.pi_rows())
        .ok()
        .and_then(|plan| ann_gap(space, &r.best_assignment, &plan).ok());
    let violation = r.found_violation() && recheck.is_some_and(|g| g < -r.tol);
    let results = json!({
        "best_gap": r.best_gap,
        "recheck_gap": recheck,
        "found_violation": violation,
        "passed": !violation,
        "restarts": r.restarts,
        "converged_restarts": r.converged_restarts,
        "best_restart": r.best_restart,
        "evaluations": r.evaluations,
        "seed": r.seed,
        "tol": r.tol,
    });
    let witness = json!({
        "kind": "ann_plan",
        "gap": r.best_gap,
        "restart": r.best_restart,
        "assignment": assignment_json(&r.best_assignment),
        "plan": plan_json(&r.best_plan),
    });
    (results, witness, violation)
}

fn instance_json(inst: &LebedevaInstance<f64>) -> Value {
    json!({
        "points": inst.points,
        "gamma": inst.gamma,
        "h": inst.h,
        "H": inst.big_h,
        "theta": inst.theta,
        "delta": inst.delta,
        "c": inst.c,
        "C": inst.big_c(),
        "C_terms": inst.bound.terms,
        "y0": inst.crossings.diagonal,
        "crossing": inst.crossings.apex_segment,
        "d56": inst.d56,
    })
}

pub fn check_metric(path: &Path, mirror_upper: bool) -> Outcome {
    let mut ctx = Ctx::new("check-metric", json!({ "mirror_upper": mirror_upper }));
    let r = (|| -> Result<Outcome, InputError> {
        let input = ctx.space_input(path)?;
        let space = match input.build(mirror_upper) {
            Ok(s) => s,
            Err(MetricError::Invalid(violations)) => {
                let results = json!({ "semimetric": false, "metric": false, "violations": violations.len() });
                let witnesses = violations.iter().take(MAX_WITNESSES).map(semimetric_witness).collect();
                return Ok(ctx.outcome(Status::Violation, results, witnesses, json!({})));
            }
            Err(e) => return Err(e.into()),
        };
        let n = space.len();
        let violations = space.check_triangle();
        let results = json!({
            "n": n,
            "semimetric": true,
            "metric": violations.is_empty(),
            "triangle_violations": violations.len(),
        });
        let witnesses = violations.iter().take(MAX_WITNESSES).map(triangle_witness).collect();
        let status = if violations.is_empty() { Status::Pass } else { Status::Violation };
        Ok(ctx.outcome(status, results, witnesses, json!({ "triples": n * n * n })))
    })();
    ctx.settle(r)
}

pub fn check_boxtimes_cmd(path: &Path, tol: f64, mirror_upper: bool) -> Outcome {
    let mut ctx = Ctx::new("check-boxtimes", json!({ "tol": tol, "mirror_upper": mirror_upper }));
    let r = (|| -> Result<Outcome, InputError> {
        let tol = positive("tol", tol)?;
        let space = ctx.space_input(path)?.build(mirror_upper)?;
        let b = check_boxtimes(&space);
        let mut results = boxtimes_results(&b, tol);
        results["n"] = json!(space.len());
        let status = if b.min_gap >= -tol { Status::Pass } else { Status::Violation };
        let timing = json!({ "quadruples": b.quadruples });
        Ok(ctx.outcome(status, results, vec![boxtimes_witness(space.len(), &b)], timing))
    })();
    ctx.settle(r)
}

fn search_config(restarts: usize, seed: u64, tol: f64) -> Result<SearchConfig, InputError> {
    if restarts == 0 {
        return Err(InputError::Option("--restarts must be at least 1".into()));
    }
    let tol = positive("tol", tol)?;
    Ok(SearchConfig { restarts, seed, tol, ..Default::default() })
}

pub fn search_ann_violation(path: &Path, restarts: usize, seed: u64, tol: f64, mirror_upper: bool) -> Outcome {
    let options = json!({ "restarts": restarts, "seed": seed, "tol": tol, "mirror_upper": mirror_upper });
    let mut ctx = Ctx::new("search-ann-violation", options);
    let r = (|| -> Result<Outcome, InputError> {
        let config = search_config(restarts, seed, tol)?;
        let space = ctx.space_input(path)?.build(mirror_upper)?;
        let report = search_violation(&space, &config);
        let (mut results, witness, violation) = search_parts(&space, &report);
        results["n"] = json!(space.len());
        results["config"] = serde_json::to_value(&config).expect("config serializes");
        let status = if violation { Status::Violation } else { Status::Pass };
        let timing = json!({ "evaluations": report.evaluations });
        Ok(ctx.outcome(status, results, vec![witness], timing))
    })();
    ctx.settle(r)
}

pub fn build_lebedeva(instance: Option<&Path>, gamma: Option<f64>, gamma_grid: bool) -> Outcome {
    let options = json!({ "gamma": gamma, "gamma_grid": gamma_grid });
    let mut ctx = Ctx::new("build-lebedeva", options);
    let r = (|| -> Result<Outcome, InputError> {
        let file = ctx.instance(instance)?;
        let points = file.coordinates();
        let mut results = json!({});
        let inst = if gamma_grid {
            let mut table = Vec::new();
            for k in -6..=6 {
                let g = 2f64.powi(k);
                let c = LebedevaInstance::new(points, g)?.big_c();
                table.push(json!({ "gamma": g, "C": c }));
            }
            results["gamma_grid"] = json!(table);
            LebedevaInstance::best_gamma(points)?
        } else {
            let g = positive("gamma", gamma.or(file.gamma).unwrap_or(1.0))?;
            LebedevaInstance::new(points, g)?
        };
        results["instance"] = instance_json(&inst);
        results["default_instance"] = json!(instance.is_none());
        Ok(ctx.outcome(Status::Pass, results, Vec::new(), json!({})))
    })();
    ctx.settle(r)
}

/// Which perturbation to apply: a fraction of the computed `C`, or an
/// absolute value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    Fraction(f64),
    Absolute(f64),
}

pub fn verify_lebedeva(instance: Option<&Path>, epsilon: Epsilon, restarts: usize, seed: u64) -> Outcome {
    let (fraction, absolute) = match epsilon {
        Epsilon::Fraction(f) => (Some(f), None),
        Epsilon::Absolute(e) => (None, Some(e)),
    };
    let options = json!({ "epsilon_fraction": fraction, "epsilon": absolute, "restarts": restarts, "seed": seed });
    let mut ctx = Ctx::new("verify-lebedeva", options);
    let r = (|| -> Result<Outcome, InputError> {
        let config = search_config(restarts, seed, SearchConfig::default().tol)?;
        let file = ctx.instance(instance)?;
        let inst = LebedevaInstance::new(file.coordinates(), positive("gamma", file.gamma.unwrap_or(1.0))?)?;
        let big_c = inst.big_c();
        let eps = match epsilon {
            Epsilon::Fraction(f) if f > 0.0 && f <= 1.0 => f * big_c,
            Epsilon::Fraction(f) => {
                return Err(InputError::Option(format!("--epsilon-fraction must lie in (0, 1], got {f}")));
            }
            Epsilon::Absolute(e) if e >= 0.0 && e.is_finite() => e,
            Epsilon::Absolute(e) => return Err(InputError::Option(format!("--epsilon must be nonnegative, got {e}"))),
        };
        let space = inst.metric(eps)?;
        let triangle = space.check_triangle();
        let boxtimes = check_boxtimes(&space);
        let search = search_violation(&space, &config);
        let (search_results, search_witness, violation) = search_parts(&space, &search);
        let passed = triangle.is_empty() && boxtimes.min_gap >= -BOXTIMES_TOL && !violation;
        let results = json!({
            "instance": instance_json(&inst),
            "default_instance": instance.is_none(),
            "epsilon": eps,
            "epsilon_fraction": eps / big_c,
            "within_certified_range": eps <= big_c,
            "triangle": { "passed": triangle.is_empty(), "violations": triangle.len() },
            "boxtimes": boxtimes_results(&boxtimes, BOXTIMES_TOL),
            "search": search_results,
            "passed": passed,
            "non_embeddability": NON_EMBEDDABILITY_NOTE,
        });
        let mut witnesses: Vec<Value> = triangle.iter().take(MAX_WITNESSES).map(triangle_witness).collect();
        witnesses.push(boxtimes_witness(space.len(), &boxtimes));
        witnesses.push(search_witness);
        let timing = json!({ "quadruples": boxtimes.quadruples, "evaluations": search.evaluations });
        let status = if passed { Status::Pass } else { Status::Violation };
        Ok(ctx.outcome(status, results, witnesses, timing))
    })();
    ctx.settle(r)
}

pub fn certify_upto5(path: &Path, mirror_upper: bool) -> Outcome {
    let mut ctx = Ctx::new("certify-upto5", json!({ "mirror_upper": mirror_upper, "tol": BOXTIMES_TOL }));
    let r = (|| -> Result<Outcome, InputError> {
        let space = ctx.space_input(path)?.build(mirror_upper)?;
        let n = space.len();
        let cert = match certify_embeddable_upto5(&space, BOXTIMES_TOL) {
            Ok(c) => c,
            Err(SearchError::TooManyPoints(k)) => {
                return Err(InputError::Option(format!(
                    "the five-point certificate does not apply to a {k}-point space; refusing to certify"
                )))
            }
            Err(e) => return Err(InputError::Option(e.to_string())),
        };
        let timing = json!({ "quadruples": n.pow(4) });
        Ok(match cert {
            Certification::Embeddable { min_gap, witness } => {
                let results = json!({ "n": n, "verdict": "EMBEDDABLE", "min_gap": min_gap, "tol": BOXTIMES_TOL });
                ctx.outcome(Status::Pass, results, vec![boxtimes_witness(n, &witness)], timing)
            }
            Certification::NotEmbeddable(Refusal::Triangle(v)) => {
                let results = json!({ "n": n, "verdict": "NOT_EMBEDDABLE", "reason": "triangle", "tol": BOXTIMES_TOL });
                ctx.outcome(Status::Violation, results, vec![triangle_witness(&v)], timing)
            }
            Certification::NotEmbeddable(Refusal::Boxtimes(b)) => {
                let results = json!({
                    "n": n,
                    "verdict": "NOT_EMBEDDABLE",
                    "reason": "boxtimes",
                    "min_gap": b.min_gap,
                    "tol": BOXTIMES_TOL,
                });
                ctx.outcome(Status::Violation, results, vec![boxtimes_witness(n, &b)], timing)
            }
        })
    })();
    ctx.settle(r)
}

pub fn verify_euclidean(count: usize, dim: usize, seed: u64) -> Outcome {
    let ctx = Ctx::new("verify-euclidean", json!({ "count": count, "dim": dim, "seed": seed }));
    if dim == 0 {
        return ctx.settle(Err(InputError::Option("--dim must be at least 1".into())));
    }
    let shape = SuiteShape { count, max_dim: dim, seed, ..Default::default() };
    let s = run_suite::<f64>(&shape);
    let passed = s.worst_residual.is_none_or(|r| r < EUCLID_TOL)
        && s.worst_slack_p.is_none_or(|v| v >= -EUCLID_TOL)
        && s.worst_slack_q.is_none_or(|v| v >= -EUCLID_TOL);
    let results = json!({
        "instances": s.instances,
        "max_points": shape.max_points,
        "max_dim": shape.max_dim,
        "seed": seed,
        "applicable": s.instances > 0,
        "worst_residual": s.worst_residual,
        "worst_slack_p": s.worst_slack_p,
        "worst_slack_q": s.worst_slack_q,
        "tol": EUCLID_TOL,
        "passed": passed,
    });
    let status = if passed { Status::Pass } else { Status::Violation };
    ctx.outcome(status, results, Vec::new(), json!({ "instances": s.instances }))
}
