//! Self-checks runnable from the command line: gradient agreement,
//! structural invariants and loop-oracle equivalence.

pub mod checks;
pub mod oracle;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{HgtsError, Result};
use checks::Measure;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Grad,
    Invariants,
    Oracle,
    All,
}

impl FromStr for Suite {
    type Err = HgtsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grad" => Ok(Suite::Grad),
            "invariants" => Ok(Suite::Invariants),
            "oracle" => Ok(Suite::Oracle),
            "all" => Ok(Suite::All),
            _ => Err(HgtsError::InvalidArgument(format!(
                "unknown suite {s:?}; expected grad, invariants, oracle or all"
            ))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Grad => "grad",
            Suite::Invariants => "invariants",
            Suite::Oracle => "oracle",
            Suite::All => "all",
        })
    }
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub suite: Suite,
    pub name: &'static str,
    /// `Err` carries the message of a check that could not run.
    pub outcome: std::result::Result<Measure, String>,
    pub secs: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.outcome.as_ref().is_ok_and(Measure::passed)
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed()).count()
    }

    /// One tab-separated line per check, then a summary line.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("suite\tcheck\tstatus\tworst\ttol\tdraws\tsecs\n");
        for c in &self.checks {
            let status = if c.passed() { "PASS" } else { "FAIL" };
            match &c.outcome {
                Ok(m) => s += &format!(
                    "{}\t{}\t{status}\t{:.3e}\t{:.1e}\t{}\t{:.2}\n",
                    c.suite, c.name, m.worst, m.tol, m.draws, c.secs
                ),
                Err(e) => s += &format!("{}\t{}\t{status}\terror: {e}\t-\t-\t{:.2}\n", c.suite, c.name, c.secs),
            }
        }
        s += &format!("total\t{}\t{}\n", self.checks.len(), if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

/// Draw counts and seed for [`run`].
#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub draws: usize,
    pub oracle_instances: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            draws: 100,
            oracle_instances: 50,
            seed: 7,
        }
    }
}

type CheckFn = Box<dyn Fn(&VerifyOptions) -> Result<Measure>>;

fn registry() -> Vec<(Suite, &'static str, CheckFn)> {
    vec![
        (Suite::Grad, "finite_differences", Box::new(|o| checks::gradients(2, o.seed))),
        (Suite::Grad, "gradient_flow", Box::new(|o| checks::gradient_flow(o.seed))),
        (Suite::Invariants, "topk_cardinality", Box::new(|o| checks::topk_cardinality(o.draws, o.seed))),
        (Suite::Invariants, "rope_isometry", Box::new(|o| Ok(checks::rope(o.draws, o.seed)?.0))),
        (Suite::Invariants, "rope_relative_position", Box::new(|o| Ok(checks::rope(o.draws, o.seed)?.1))),
        (Suite::Invariants, "revin_round_trip", Box::new(|o| checks::revin_round_trip(o.draws, o.seed))),
        (Suite::Invariants, "causal_prefix", Box::new(|o| checks::causal_prefix(o.draws, o.seed))),
        (Suite::Invariants, "rollout_context", Box::new(|o| checks::rollout_context(o.draws, o.seed))),
        (Suite::Invariants, "seed_determinism", Box::new(|o| checks::seed_determinism(o.draws, o.seed))),
        (Suite::Invariants, "train_determinism", Box::new(|o| checks::train_determinism(o.seed))),
        (Suite::Invariants, "soft_mask_monotonic", Box::new(|o| checks::soft_mask_monotonic(o.draws, o.seed))),
        (Suite::Invariants, "query_permutation", Box::new(|o| checks::query_permutation(o.draws, o.seed))),
        (Suite::Oracle, "hga_dense_loop", Box::new(|o| checks::hga_oracle(o.oracle_instances, -1e9, o.seed))),
        (Suite::Oracle, "edge_to_node_dense_loop", Box::new(|o| checks::edge_to_node_oracle(o.oracle_instances, o.seed))),
        (Suite::Oracle, "parameter_count", Box::new(|o| checks::count_matches_enumeration(20, o.seed))),
    ]
}

/// Runs every check of `suite` (all suites for [`Suite::All`]).
pub fn run(suite: Suite, opts: &VerifyOptions) -> VerifyReport {
    let mut report = VerifyReport::default();
    for (s, name, f) in registry() {
        if suite != Suite::All && suite != s {
            continue;
        }
        let t = Instant::now();
        let outcome = f(opts).map_err(|e| e.to_string());
        log::info!("verify {s}/{name}: {}", if outcome.as_ref().is_ok_and(Measure::passed) { "ok" } else { "FAILED" });
        report.checks.push(CheckResult {
            suite: s,
            name,
            outcome,
            secs: t.elapsed().as_secs_f64(),
        });
    }
    report
}
