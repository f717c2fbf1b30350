//! Running a scenario end to end and reporting the results.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use super::scenario::Scenario;
use crate::adversary::RegistryError;
use crate::dolev_yao::{dy_derives, knowledge_base};
use crate::formula::Formula;
use crate::logic::{Evaluator, LogicError, Quantifier, SoundnessReport};
use crate::lowe::{guess_witness, GuessConfig};
use crate::system::{
    check_mode, generate_system, Bounds, GenerateError, GenerationInput, Point, System, Violation,
};
use crate::term::Message;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Explain `Yes`/`No` answers of the guessing analysis for every
    /// adversary `has` target in `X` queries.
    pub debug_lowe: bool,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("algorithm lookup failed: {0}")]
    Registry(#[from] RegistryError),
    #[error("system generation failed: {0}")]
    Generate(#[from] GenerateError),
    #[error("evaluating `{query}`: {source}")]
    Logic {
        query: String,
        #[source]
        source: LogicError,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioEcho {
    pub name: String,
    pub description: String,
    pub agents: Vec<String>,
    pub adversary: String,
    pub mode: String,
    pub algorithm: String,
    pub bounds: Bounds,
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemStats {
    pub runs: usize,
    pub points: usize,
    pub states: usize,
    pub truncated_runs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryResult {
    pub formula: String,
    pub quantifier: Quantifier,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect: Option<bool>,
    pub holds: bool,
    /// Whether the verdict meets the expectation; `∀` queries without one
    /// are expected to hold.
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Point>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Point>,
    pub points: usize,
    pub true_points: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct LoweDebug {
    pub query: usize,
    pub point: Point,
    pub message: String,
    pub dy_derivable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clause: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub scenario: ScenarioEcho,
    pub system: SystemStats,
    pub violations: Vec<Violation>,
    pub queries: Vec<QueryResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub soundness: Option<SoundnessReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub lowe_debug: Vec<LoweDebug>,
    pub ok: bool,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialise")
    }

    /// A short human-readable summary.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{}: {} runs, {} points ({} mode, algorithm {})\n",
            self.scenario.name,
            self.system.runs,
            self.system.points,
            self.scenario.mode,
            self.scenario.algorithm
        );
        if self.system.truncated_runs > 0 {
            out += &format!(
                "  {} runs cut off at the step bound\n",
                self.system.truncated_runs
            );
        }
        for v in &self.violations {
            out += &format!("  violation: {v}\n");
        }
        for q in &self.queries {
            let at = q
                .witness
                .or(q.counterexample)
                .map(|p| format!(" at {p}"))
                .unwrap_or_default();
            let expect = q
                .expect
                .map(|e| format!(", expected {e}"))
                .unwrap_or_default();
            out += &format!(
                "  [{}] {} {}: {}{}{}\n",
                if q.ok { "ok" } else { "MISMATCH" },
                q.quantifier.as_str(),
                q.formula,
                q.holds,
                at,
                expect
            );
        }
        if let Some(s) = &self.soundness {
            out += &format!(
                "  soundness of {} for {}: {} yes-violations, {} no-violations\n",
                s.algorithm, s.agent, s.yes_violations, s.no_violations
            );
        }
        for d in &self.lowe_debug {
            out += &format!("  lowe {} at {}: ", d.message, d.point);
            if d.dy_derivable {
                out += "derivable without guessing\n";
            } else if let (Some(v), Some(c)) = (&d.validator, &d.clause) {
                out += &format!(
                    "validator {v} via clause ({c}), step {}\n",
                    d.step.as_deref().unwrap_or("")
                );
            } else {
                out += "no validator\n";
            }
        }
        out
    }
}

pub fn build_system(s: &Scenario) -> Result<System, RunError> {
    let alg = s.algorithm()?;
    let input = GenerationInput {
        agents: &s.agents,
        initkeys: &s.initkeys,
        keyfuns: &s.keyfuns,
        protocol: &s.protocol,
        sessions: &s.sessions,
        pools: &s.pools,
        atoms: &s.atoms,
        adversary: &s.adversary,
        algorithm: alg.as_ref(),
        bounds: s.bounds,
    };
    Ok(generate_system(&input)?)
}

pub fn run_scenario(s: &Scenario, opts: RunOptions) -> Result<Report, RunError> {
    let system = build_system(s)?;
    run_on_system(s, &system, opts)
}

/// Evaluates the scenario's queries on an already generated system.
pub fn run_on_system(s: &Scenario, system: &System, opts: RunOptions) -> Result<Report, RunError> {
    let alg = s.algorithm()?;
    let violations = check_mode(system, s.adversary.mode, alg.as_ref());
    let ev = Evaluator::new(system).with_algorithm(alg.clone());
    let logic = |query: &Formula, source| RunError::Logic {
        query: query.to_string(),
        source,
    };

    let mut queries = Vec::new();
    for q in &s.queries {
        let v = ev
            .query(&q.formula, q.quantifier)
            .map_err(|e| logic(&q.formula, e))?;
        let expected = q
            .expect
            .or((q.quantifier == Quantifier::All).then_some(true));
        queries.push(QueryResult {
            formula: q.formula.to_string(),
            quantifier: q.quantifier,
            expect: q.expect,
            holds: v.holds,
            ok: expected.is_none_or(|e| e == v.holds),
            witness: v.witness,
            counterexample: v.counterexample,
            points: v.points,
            true_points: v.true_points,
        });
    }

    let soundness = match &s.soundness {
        Some((agent, fs)) => Some(
            ev.check_soundness(agent, fs, 5)
                .map_err(|e| logic(&Formula::know(agent, fs[0].clone()), e))?,
        ),
        None => None,
    };

    let lowe_debug = if opts.debug_lowe {
        lowe_debug(s, system, &queries)
    } else {
        Vec::new()
    };

    let ok = queries.iter().all(|q| q.ok);
    Ok(Report {
        schema: REPORT_SCHEMA,
        scenario: ScenarioEcho {
            name: s.file.name.clone(),
            description: s.file.description.clone(),
            agents: s.file.agents.clone(),
            adversary: s.adversary.agent.to_string(),
            mode: s.adversary.mode.to_string(),
            algorithm: s.adversary.algorithm.clone(),
            bounds: s.bounds,
        },
        system: SystemStats {
            runs: system.run_count(),
            points: system.point_count(),
            states: system.states().len(),
            truncated_runs: system.truncated_runs(),
        },
        violations,
        queries,
        soundness,
        lowe_debug,
        ok,
    })
}

/// For each `X(adv, ...)` query, the guessing analysis of every adversary
/// `has` target at the query's witness or counterexample point (or the end
/// of the first run).
fn lowe_debug(s: &Scenario, system: &System, results: &[QueryResult]) -> Vec<LoweDebug> {
    let adv = &s.adversary.agent;
    let Some(ai) = system.agent_index(adv) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (qi, (q, r)) in s.queries.iter().zip(results).enumerate() {
        let mut targets: BTreeSet<Message> = BTreeSet::new();
        q.formula.walk(&mut |f| {
            if let Formula::AlgKnow(a, inner) = f {
                if a == adv {
                    targets.extend(
                        inner
                            .has_atoms()
                            .into_iter()
                            .filter(|(b, _)| b == adv)
                            .map(|(_, m)| m),
                    );
                }
            }
        });
        let point = r.witness.or(r.counterexample).unwrap_or(Point {
            run: 0,
            time: system
                .runs()
                .first()
                .map_or(0, |r| r.len().saturating_sub(1)),
        });
        let Some(local) = system.local(point, ai) else {
            continue;
        };
        for m in targets {
            let dy = dy_derives(&knowledge_base(local), &m);
            let w = if dy {
                None
            } else {
                guess_witness(&m, local, GuessConfig::default())
            };
            out.push(LoweDebug {
                query: qi,
                point,
                message: m.to_string(),
                dy_derivable: dy,
                validator: w.as_ref().map(|w| w.validator().to_string()),
                clause: w.as_ref().map(|w| w.clause.to_string()),
                step: w.as_ref().map(|w| w.step.to_string()),
                other: w
                    .as_ref()
                    .and_then(|w| w.other.as_ref().map(|o| o.to_string())),
            });
        }
    }
    out
}
