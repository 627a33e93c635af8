//! Exact decision rules over finite payoff matrices.
//!
//! Rows are policies, columns are environment parameterizations, and entry
//! `(i, j)` is the utility of policy `i` under parameterization `j`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Relative tolerance used to collect tie sets.
pub const TIE_TOLERANCE: f64 = 1e-9;

fn tied(a: f64, best: f64) -> bool {
    (a - best).abs() <= TIE_TOLERANCE * best.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameMatrix {
    payoffs: Vec<f64>,
    n_policies: usize,
    n_params: usize,
    pub policy_labels: Vec<String>,
    pub param_labels: Vec<String>,
}

impl GameMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let policy_labels = (0..n).map(|i| format!("pi_{i}")).collect();
        let param_labels = (0..m).map(|j| format!("theta_{j}")).collect();
        Self::with_labels(rows, policy_labels, param_labels)
    }

    pub fn with_labels(rows: Vec<Vec<f64>>, policy_labels: Vec<String>, param_labels: Vec<String>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("game needs at least one policy"));
        }
        let m = rows[0].len();
        if m == 0 {
            return Err(Error::invalid("game needs at least one parameterization"));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != m) {
            return Err(Error::invalid(format!(
                "row {i} has {} entries, expected {m}",
                rows[i].len()
            )));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("payoffs must be finite"));
        }
        if policy_labels.len() != n || param_labels.len() != m {
            return Err(Error::invalid("label counts do not match the payoff shape"));
        }
        Ok(GameMatrix {
            payoffs: rows.into_iter().flatten().collect(),
            n_policies: n,
            n_params: m,
            policy_labels,
            param_labels,
        })
    }

    /// Header row of parameter labels after a corner cell; each later row is a
    /// policy label followed by its payoffs.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut param_labels = None;
        let mut policy_labels = Vec::new();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.iter().all(str::is_empty) {
                continue;
            }
            let Some(header) = &param_labels else {
                if rec.len() < 2 {
                    return Err(parse_err(
                        line,
                        1,
                        "header needs a corner cell and at least one parameter label",
                    ));
                }
                param_labels = Some(rec.iter().skip(1).map(String::from).collect::<Vec<_>>());
                continue;
            };
            let header: &Vec<String> = header;
            if rec.len() != header.len() + 1 {
                return Err(parse_err(
                    line,
                    rec.len().min(header.len() + 1) + 1,
                    format!(
                        "row has {} payoffs, header has {} parameters",
                        rec.len() - 1,
                        header.len()
                    ),
                ));
            }
            policy_labels.push(rec[0].to_string());
            let mut row = Vec::with_capacity(header.len());
            for (k, cell) in rec.iter().enumerate().skip(1) {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| parse_err(line, k + 1, format!("`{cell}` is not a number")))?;
                if !v.is_finite() {
                    return Err(parse_err(line, k + 1, "payoff must be finite"));
                }
                row.push(v);
            }
            rows.push(row);
        }
        let Some(param_labels) = param_labels else {
            return Err(parse_err(1, 1, "game file is empty"));
        };
        if rows.is_empty() {
            return Err(parse_err(2, 1, "game has no policy rows"));
        }
        Self::with_labels(rows, policy_labels, param_labels)
    }

    pub fn n_policies(&self) -> usize {
        self.n_policies
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.payoffs[i * self.n_params + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.payoffs[i * self.n_params..(i + 1) * self.n_params]
    }

    pub fn row_min(&self, i: usize) -> f64 {
        self.row(i).iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn row_max(&self, i: usize) -> f64 {
        self.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn column_max(&self, j: usize) -> f64 {
        (0..self.n_policies)
            .map(|i| self.get(i, j))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn labels_of(&self, set: &[usize]) -> Vec<&str> {
        set.iter().map(|&i| self.policy_labels[i].as_str()).collect()
    }
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// `regret[i][j] = max_k G(k, j) − G(i, j)`.
pub fn regret_matrix(g: &GameMatrix) -> Vec<Vec<f64>> {
    let col_max: Vec<f64> = (0..g.n_params()).map(|j| g.column_max(j)).collect();
    (0..g.n_policies())
        .map(|i| (0..g.n_params()).map(|j| col_max[j] - g.get(i, j)).collect())
        .collect()
}

/// Worst-case regret of each policy.
pub fn max_regrets(g: &GameMatrix) -> Vec<f64> {
    regret_matrix(g)
        .iter()
        .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

fn argmax_set(scores: &[f64]) -> Vec<usize> {
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..scores.len()).filter(|&i| tied(scores[i], best)).collect()
}

fn argmin_set(scores: &[f64]) -> Vec<usize> {
    let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
    (0..scores.len()).filter(|&i| tied(scores[i], best)).collect()
}

/// Policies with the best worst case.
pub fn maximin(g: &GameMatrix) -> Vec<usize> {
    let mins: Vec<f64> = (0..g.n_policies()).map(|i| g.row_min(i)).collect();
    argmax_set(&mins)
}

/// Policies with the best mean payoff under a uniform parameter distribution.
pub fn insufficient_reason(g: &GameMatrix) -> Vec<usize> {
    let means: Vec<f64> = (0..g.n_policies())
        .map(|i| g.row(i).iter().sum::<f64>() / g.n_params() as f64)
        .collect();
    argmax_set(&means)
}

/// Policies with the smallest worst-case regret.
pub fn minimax_regret(g: &GameMatrix) -> Vec<usize> {
    argmin_set(&max_regrets(g))
}

/// True iff `b`'s worst payoff strictly exceeds `a`'s best.
pub fn totally_dominates(g: &GameMatrix, b: usize, a: usize) -> bool {
    g.row_min(b) > g.row_max(a)
}

/// Payoff bands separating success from failure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuccessBands {
    pub s_min: f64,
    pub s_max: f64,
    pub f_min: f64,
    pub f_max: f64,
}

impl SuccessBands {
    /// Why the bands fail the separation hypotheses, if they do.
    pub fn violation(&self) -> Option<String> {
        let b = self;
        if !(b.f_min <= b.f_max && b.f_max < b.s_min && b.s_min <= b.s_max) {
            return Some("bands must satisfy F_min <= F_max < S_min <= S_max".into());
        }
        let gap = b.s_min - b.f_max;
        if !(b.s_max - b.s_min < gap) {
            return Some("success band is not narrower than the success/failure gap".into());
        }
        if !(b.f_max - b.f_min < gap) {
            return Some("failure band is not narrower than the success/failure gap".into());
        }
        None
    }

    pub fn succeeds(&self, v: f64) -> bool {
        v >= self.s_min && v <= self.s_max
    }

    pub fn fails(&self, v: f64) -> bool {
        v >= self.f_min && v <= self.f_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Theorem1Report {
    /// Every minimax-regret policy succeeds wherever success is possible.
    Pass {
        chosen: Vec<usize>,
    },
    /// `(policy, parameter)` pairs where a chosen policy fails although some policy succeeds.
    Fail {
        chosen: Vec<usize>,
        violations: Vec<(usize, usize)>,
    },
    NotApplicable {
        reason: String,
    },
}

/// Checks that minimax regret picks only policies that succeed everywhere
/// success is possible, when the payoff bands and a universal succeeder exist.
pub fn theorem1_check(g: &GameMatrix, bands: &SuccessBands) -> Theorem1Report {
    if let Some(reason) = bands.violation() {
        return Theorem1Report::NotApplicable { reason };
    }
    for i in 0..g.n_policies() {
        for j in 0..g.n_params() {
            let v = g.get(i, j);
            if !bands.succeeds(v) && !bands.fails(v) {
                return Theorem1Report::NotApplicable {
                    reason: format!("payoff {v} at ({i}, {j}) lies outside both bands"),
                };
            }
        }
    }
    let solvable: Vec<usize> = (0..g.n_params())
        .filter(|&j| (0..g.n_policies()).any(|i| bands.succeeds(g.get(i, j))))
        .collect();
    let universal = (0..g.n_policies()).any(|i| solvable.iter().all(|&j| bands.succeeds(g.get(i, j))));
    if !universal {
        return Theorem1Report::NotApplicable {
            reason: "no policy succeeds on every solvable parameterization".into(),
        };
    }
    let chosen = minimax_regret(g);
    let violations: Vec<(usize, usize)> = chosen
        .iter()
        .flat_map(|&i| solvable.iter().map(move |&j| (i, j)))
        .filter(|&(i, j)| !bands.succeeds(g.get(i, j)))
        .collect();
    if violations.is_empty() {
        Theorem1Report::Pass { chosen }
    } else {
        Theorem1Report::Fail { chosen, violations }
    }
}

/// How the regret-seeking environment policy treats one agent policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MrPolicyComponents {
    /// Regret-maximizing parameterization for this policy.
    pub theta_bar: usize,
    /// Payoff on `theta_bar` above the baseline's expected payoff.
    pub v_pi: f64,
    /// Shift away from the baseline realized by mixing toward `theta_bar`.
    pub c_pi: f64,
    /// Probability of drawing `theta_bar`.
    pub mix: f64,
    pub baseline: Vec<f64>,
    /// Final parameter distribution: `mix` on `theta_bar`, the rest on `baseline`.
    pub distribution: Vec<f64>,
    pub totally_dominated: bool,
}

/// Point mass or two-point mixture between the row's extremes with expected payoff `target`.
fn two_point(row: &[f64], target: f64) -> Vec<f64> {
    let (mut lo, mut hi) = (0, 0);
    for (j, v) in row.iter().enumerate() {
        if *v < row[lo] {
            lo = j;
        }
        if *v > row[hi] {
            hi = j;
        }
    }
    let mut d = vec![0.0; row.len()];
    let span = row[hi] - row[lo];
    if span <= 0.0 {
        d[lo] = 1.0;
        return d;
    }
    let q = ((target - row[lo]) / span).clamp(0.0, 1.0);
    d[hi] += q;
    d[lo] += 1.0 - q;
    d
}

fn expectation(row: &[f64], d: &[f64]) -> f64 {
    row.iter().zip(d).map(|(u, p)| u * p).sum()
}

/// Builds an environment policy under which the agent's best response set is
/// exactly the minimax-regret set.
///
/// Minimax-regret policies are held at a common target value `T`, the
/// midpoint between the best worst case over all policies and the smallest
/// best case among minimax-regret policies. Every other policy is pushed below
/// `T` in proportion to its excess worst-case regret, by mixing its baseline
/// with its regret-maximizing parameterization.
pub fn construct_lambda_mr(g: &GameMatrix) -> Vec<MrPolicyComponents> {
    let n = g.n_policies();
    let regret = regret_matrix(g);
    let worst: Vec<f64> = regret
        .iter()
        .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mr = minimax_regret(g);
    let w_star = worst.iter().copied().fold(f64::INFINITY, f64::min);
    let r_max = worst.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lower = (0..n).map(|i| g.row_min(i)).fold(f64::NEG_INFINITY, f64::max);
    let upper = mr.iter().map(|&i| g.row_max(i)).fold(f64::INFINITY, f64::min);
    let target = 0.5 * (lower + upper);

    (0..n)
        .map(|i| {
            let row = g.row(i);
            let theta_bar = (0..g.n_params()).fold(0, |b, j| if regret[i][j] > regret[i][b] { j } else { b });
            let (lo, hi) = (g.row_min(i), g.row_max(i));
            let totally_dominated = (0..n).any(|k| totally_dominates(g, k, i));
            let wanted = if mr.contains(&i) {
                target
            } else {
                let excess = if r_max > w_star {
                    (worst[i] - w_star) / (r_max - w_star)
                } else {
                    0.0
                };
                (target - excess * (target - lo)).min(hi).max(lo)
            };
            let mut baseline = if target >= lo && target <= hi {
                two_point(row, target)
            } else {
                two_point(row, lo)
            };
            let mut base_value = expectation(row, &baseline);
            let u_bar = row[theta_bar];
            let mut mix = 0.0;
            if !mr.contains(&i) && (u_bar - base_value).abs() > 0.0 {
                let p = (wanted - base_value) / (u_bar - base_value);
                if (0.0..=1.0).contains(&p) {
                    mix = p;
                }
            }
            if mix == 0.0 && !tied(base_value, wanted) {
                baseline = two_point(row, wanted);
                base_value = expectation(row, &baseline);
            }
            let mut distribution: Vec<f64> = baseline.iter().map(|b| (1.0 - mix) * b).collect();
            distribution[theta_bar] += mix;
            MrPolicyComponents {
                theta_bar,
                v_pi: u_bar - base_value,
                c_pi: mix * (u_bar - base_value),
                mix,
                baseline,
                distribution,
                totally_dominated,
            }
        })
        .collect()
}

/// Expected payoff of each policy under its own conditioned parameter distribution.
pub fn policy_conditioned_values(g: &GameMatrix, lambda: &[MrPolicyComponents]) -> Vec<f64> {
    (0..g.n_policies())
        .map(|i| expectation(g.row(i), &lambda[i].distribution))
        .collect()
}

/// Best responses to a constructed environment policy.
pub fn best_responses(values: &[f64]) -> Vec<usize> {
    argmax_set(values)
}

/// Protagonist and antagonist choose rows of their own utility tables over a
/// shared set of parameterizations. The protagonist is paid its utility; the
/// antagonist and the adversary are both paid the regret.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedGame {
    pub protagonist: GameMatrix,
    pub antagonist: GameMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Profile {
    pub protagonist: usize,
    pub antagonist: usize,
    pub theta: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashReport {
    pub equilibria: Vec<Profile>,
    /// Equilibria paired with a parameterization where the antagonist beats the protagonist.
    pub violations: Vec<(Profile, usize)>,
}

impl NashReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// True when there was nothing to check.
    pub fn vacuous(&self) -> bool {
        self.equilibria.is_empty()
    }
}

impl PairedGame {
    /// Both agents draw from the same policy set.
    pub fn symmetric(u: GameMatrix) -> Self {
        PairedGame {
            protagonist: u.clone(),
            antagonist: u,
        }
    }

    pub fn new(protagonist: GameMatrix, antagonist: GameMatrix) -> Result<Self> {
        if protagonist.n_params() != antagonist.n_params() {
            return Err(Error::invalid("agents must share the parameterization set"));
        }
        Ok(PairedGame {
            protagonist,
            antagonist,
        })
    }

    /// Payoffs `[protagonist, antagonist, adversary]` of a pure profile.
    pub fn payoffs(&self, p: usize, a: usize, t: usize) -> [f64; 3] {
        let up = self.protagonist.get(p, t);
        let regret = self.antagonist.get(a, t) - up;
        [up, regret, regret]
    }
}

/// Enumerates pure Nash equilibria by unilateral-deviation checks and tests
/// that at each one the protagonist does at least as well as the antagonist on
/// every parameterization.
pub fn nash_dominance_check(game: &PairedGame) -> NashReport {
    let (np, na, nt) = (
        game.protagonist.n_policies(),
        game.antagonist.n_policies(),
        game.protagonist.n_params(),
    );
    let mut equilibria = Vec::new();
    for p in 0..np {
        for a in 0..na {
            for t in 0..nt {
                let [up, ua, ut] = game.payoffs(p, a, t);
                let stable = (0..np).all(|q| game.payoffs(q, a, t)[0] <= up)
                    && (0..na).all(|b| game.payoffs(p, b, t)[1] <= ua)
                    && (0..nt).all(|s| game.payoffs(p, a, s)[2] <= ut);
                if stable {
                    equilibria.push(Profile {
                        protagonist: p,
                        antagonist: a,
                        theta: t,
                    });
                }
            }
        }
    }
    let violations = equilibria
        .iter()
        .flat_map(|e| {
            (0..nt)
                .filter(|&s| game.protagonist.get(e.protagonist, s) < game.antagonist.get(e.antagonist, s))
                .map(move |s| (*e, s))
        })
        .collect();
    NashReport { equilibria, violations }
}
