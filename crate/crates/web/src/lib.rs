//! Browser bindings. Every entry point takes plain text and returns a JSON string,
//! so the same functions run natively in tests and under wasm-bindgen in the page.
//!
//! Puzzle text starting with `{` is read as a generic JSON instance, anything else
//! as a sudoku grid.

use purgemerge::codec::{parse_generic, parse_sudoku, CspInstance};
use purgemerge::graph::ClusterGraph;
use purgemerge::merge::Metric;
use purgemerge::oracle::check_assignment;
use purgemerge::solver::{
    enumerate_solutions, purge_and_merge_observed, RoundStats, SolveObserver, SolverConfig, Stage,
};
use purgemerge::{DomainTable, Error, Evidence, SparseFactor, Value, VarId};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::wasm_bindgen;

/// Solutions shown in the page at most.
const SOLUTION_CAP: usize = 50;

fn parse(text: &str) -> Result<CspInstance, String> {
    let parsed = if text.trim_start().starts_with('{') {
        parse_generic(text)
    } else {
        parse_sudoku(text)
    };
    parsed.map_err(|e| e.to_string())
}

fn config(metric: &str) -> Result<SolverConfig, String> {
    Ok(SolverConfig {
        metric: metric.parse::<Metric>()?,
        ..SolverConfig::default()
    })
}

fn error_json(message: impl Into<String>) -> String {
    json!({ "error": message.into() }).to_string()
}

/// Candidate values of every variable after each round, plus the cluster graphs.
#[derive(Default)]
struct Trace {
    candidates: Vec<Vec<Vec<Value>>>,
    graphs: Vec<ClusterGraph>,
}

impl SolveObserver for Trace {
    fn on_stage(&mut self, stage: Stage, _: &[SparseFactor], solved: &Evidence, domains: &DomainTable) {
        if matches!(stage, Stage::Encoded | Stage::VariablesReduced { .. }) {
            let snapshot = domains
                .vars()
                .map(|v| match solved.get(v) {
                    Some(x) => vec![x],
                    None => domains.values(v),
                })
                .collect();
            self.candidates.push(snapshot);
        }
    }

    fn on_graph(&mut self, _: usize, graph: &ClusterGraph) {
        self.graphs.push(graph.clone());
    }
}

#[derive(Serialize)]
struct SolveView {
    outcome: &'static str,
    message: Option<String>,
    names: Vec<String>,
    solutions: Vec<Vec<Value>>,
    truncated: bool,
    peak_table_entries: usize,
    rounds: Vec<RoundStats>,
    candidates: Vec<Vec<Vec<Value>>>,
}

fn solve_inner(text: &str, metric: &str) -> Result<SolveView, String> {
    let instance = parse(text)?;
    let config = config(metric)?;
    let mut trace = Trace::default();
    let names = instance.names.clone();
    match purge_and_merge_observed(&instance, &config, &mut trace) {
        Ok(report) => {
            let all = enumerate_solutions(&report, SOLUTION_CAP);
            Ok(SolveView {
                outcome: if all.solutions.is_empty() {
                    "unsatisfiable"
                } else {
                    "solved"
                },
                message: None,
                names,
                solutions: all.solutions,
                truncated: all.truncated,
                peak_table_entries: report.peak_table_entries,
                rounds: report.rounds,
                candidates: trace.candidates,
            })
        }
        Err(failure) => Ok(SolveView {
            outcome: match failure.error {
                Error::Unsatisfiable(_) => "unsatisfiable",
                Error::TableBlowUp { .. } => "blow-up",
                _ => "budget",
            },
            message: Some(failure.error.to_string()),
            names,
            solutions: Vec::new(),
            truncated: false,
            peak_table_entries: failure.peak_table_entries,
            rounds: failure.rounds,
            candidates: trace.candidates,
        }),
    }
}

/// Solves a puzzle and returns the solutions, per-round statistics and the
/// candidate values of every variable after each round.
#[wasm_bindgen]
pub fn solve(text: &str, metric: &str) -> String {
    match solve_inner(text, metric) {
        Ok(view) => serde_json::to_string(&view).expect("serializable"),
        Err(e) => error_json(e),
    }
}

/// The cluster graph built in every round of a solve, with variable names.
#[wasm_bindgen]
pub fn cluster_graphs(text: &str, metric: &str) -> String {
    let (instance, config) = match parse(text).and_then(|i| Ok((i, config(metric)?))) {
        Ok(x) => x,
        Err(e) => return error_json(e),
    };
    let mut trace = Trace::default();
    let outcome = purge_and_merge_observed(&instance, &config, &mut trace);
    let name = |vs: &[VarId]| vs.iter().map(|&v| instance.name(v)).collect::<Vec<_>>();
    let rounds: Vec<_> = trace
        .graphs
        .iter()
        .enumerate()
        .map(|(i, g)| {
            json!({
                "round": i + 1,
                "clusters": g.scopes.iter().map(|s| name(s)).collect::<Vec<_>>(),
                "edges": g.edges.iter().map(|e| json!({ "a": e.a, "b": e.b, "sepset": name(&e.sepset) })).collect::<Vec<_>>(),
                "is_tree": purgemerge::graph::is_tree(g),
            })
        })
        .collect();
    json!({ "rounds": rounds, "error": outcome.err().map(|f| f.to_string()) }).to_string()
}

fn parse_candidate(text: &str) -> Option<Vec<Value>> {
    let text = text.trim();
    if text.contains(char::is_whitespace) {
        text.split_whitespace().map(|t| t.parse().ok()).collect()
    } else {
        text.chars()
            .map(|c| c.to_digit(36).and_then(|d| Value::try_from(d).ok()))
            .collect()
    }
}

/// Checks a candidate assignment, given as whitespace-separated values or a digit
/// string for sudoku, against the puzzle.
#[wasm_bindgen]
pub fn verify(text: &str, candidate: &str) -> String {
    let instance = match parse(text) {
        Ok(i) => i,
        Err(e) => return error_json(e),
    };
    let values = parse_candidate(candidate);
    match values {
        None => error_json("candidate must be values separated by spaces or a digit string"),
        Some(values) => match check_assignment(&instance, &values) {
            Ok(()) => json!({ "valid": true }).to_string(),
            Err(v) => json!({ "valid": false, "reason": v.to_string() }).to_string(),
        },
    }
}
