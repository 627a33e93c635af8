//! Experiment plumbing behind the command-line tool.

pub mod config;
pub mod eval;
pub mod maps;
pub mod plot;
pub mod train;

use std::fmt::Write as _;

use crate::decision::{
    construct_lambda_mr, insufficient_reason, maximin, minimax_regret, policy_conditioned_values, regret_matrix,
    theorem1_check, GameMatrix, SuccessBands, Theorem1Report,
};
use crate::error::Error;

pub const WORKERS_ENV: &str = "UED_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Worker threads: `UED_WORKERS` if set to a positive integer, else the available parallelism.
pub fn workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|n: &usize| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Exit status for an error: bad input is a configuration error, everything else a runtime abort.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::Parse { .. } | Error::InvalidArgument(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

pub const SMALL_GAME: &str = include_str!("../../games/small_game.csv");
pub const BIG_GAME: &str = include_str!("../../games/big_game.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Maximin,
    InsufficientReason,
    MinimaxRegret,
}

impl Rule {
    pub const ALL: [Rule; 3] = [Rule::Maximin, Rule::InsufficientReason, Rule::MinimaxRegret];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Maximin => "maximin",
            Rule::InsufficientReason => "insufficient_reason",
            Rule::MinimaxRegret => "minimax_regret",
        }
    }

    pub fn parse(s: &str) -> Option<Rule> {
        Self::ALL.into_iter().find(|r| r.name() == s)
    }

    pub fn choose(self, g: &GameMatrix) -> Vec<usize> {
        match self {
            Rule::Maximin => maximin(g),
            Rule::InsufficientReason => insufficient_reason(g),
            Rule::MinimaxRegret => minimax_regret(g),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct DecideOptions {
    pub show_regret: bool,
    pub show_lambda: bool,
    pub bands: Option<SuccessBands>,
}

fn fmt_row(label: &str, values: impl Iterator<Item = f64>) -> String {
    let cells: Vec<String> = values.map(|v| format!("{v:>10.4}")).collect();
    format!("{label:<12}{}\n", cells.join(""))
}

/// Human-readable report of a rule's tie set plus the requested diagnostics.
pub fn decide_report(g: &GameMatrix, rule: Rule, opts: &DecideOptions) -> String {
    let chosen = rule.choose(g);
    let mut out = format!("{}: {{{}}}\n", rule.name(), g.labels_of(&chosen).join(", "));
    let head = |out: &mut String| {
        let cols: Vec<String> = g.param_labels.iter().map(|l| format!("{l:>10}")).collect();
        let _ = writeln!(out, "{:<12}{}", "", cols.join(""));
    };
    if opts.show_regret {
        out += "\nregret matrix\n";
        head(&mut out);
        for (i, r) in regret_matrix(g).iter().enumerate() {
            out += &fmt_row(&g.policy_labels[i], r.iter().copied());
        }
    }
    if opts.show_lambda {
        let lam = construct_lambda_mr(g);
        let values = policy_conditioned_values(g, &lam);
        out += "\nregret-seeking environment distributions\n";
        head(&mut out);
        for (i, c) in lam.iter().enumerate() {
            out += &fmt_row(&g.policy_labels[i], c.distribution.iter().copied());
        }
        out += "\nexpected payoff under own distribution\n";
        for (i, v) in values.iter().enumerate() {
            let _ = writeln!(out, "{:<12}{v:>10.4}", g.policy_labels[i]);
        }
    }
    if let Some(b) = &opts.bands {
        out += "\nsuccess-band check: ";
        out += &match theorem1_check(g, b) {
            Theorem1Report::Pass { .. } => "pass\n".to_string(),
            Theorem1Report::Fail { violations, .. } => {
                let v: Vec<String> = violations
                    .iter()
                    .map(|&(i, j)| format!("{}@{}", g.policy_labels[i], g.param_labels[j]))
                    .collect();
                format!("FAIL ({})\n", v.join(", "))
            }
            Theorem1Report::NotApplicable { reason } => format!("not applicable: {reason}\n"),
        };
    }
    out
}
