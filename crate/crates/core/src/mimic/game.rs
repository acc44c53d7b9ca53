use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};

/// A finite MDP with absorbing terminal states.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularGame {
    pub id: usize,
    n_states: usize,
    n_actions: usize,
    /// `T(s'|s,a)` at index `(s * A + a) * S + s'`.
    transitions: Vec<f64>,
    rewards: Array2<f64>,
    pub discount: f64,
    terminal: Vec<bool>,
    pub start_state: usize,
}

impl TabularGame {
    /// `transitions[s][a]` is the distribution over next states.
    pub fn new(
        id: usize,
        transitions: Vec<Vec<Vec<f64>>>,
        rewards: Array2<f64>,
        discount: f64,
        terminal_states: &[usize],
        start_state: usize,
    ) -> Result<Self> {
        let n_states = transitions.len();
        if n_states == 0 {
            return Err(Error::InvalidParameter("game has no states".into()));
        }
        let n_actions = transitions[0].len();
        if n_actions == 0 {
            return Err(Error::InvalidParameter("game has no actions".into()));
        }
        if rewards.dim() != (n_states, n_actions) {
            return Err(Error::Shape(format!(
                "rewards are {:?}, expected ({n_states}, {n_actions})",
                rewards.dim()
            )));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "discount must lie in (0, 1), got {discount}"
            )));
        }
        if start_state >= n_states {
            return Err(Error::InvalidParameter(format!(
                "start state {start_state} out of range"
            )));
        }
        let mut flat = Vec::with_capacity(n_states * n_actions * n_states);
        for (s, row) in transitions.iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::Shape(format!("state {s} has {} actions", row.len())));
            }
            for (a, dist) in row.iter().enumerate() {
                if dist.len() != n_states || dist.iter().any(|p| !(*p >= 0.0)) {
                    return Err(Error::InvalidParameter(format!(
                        "transition row ({s}, {a}) is not a distribution over {n_states} states"
                    )));
                }
                let total: f64 = dist.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidParameter(format!(
                        "transition row ({s}, {a}) sums to {total}"
                    )));
                }
                flat.extend_from_slice(dist);
            }
        }
        let mut terminal = vec![false; n_states];
        for &t in terminal_states {
            *terminal.get_mut(t).ok_or_else(|| {
                Error::InvalidParameter(format!("terminal state {t} out of range"))
            })? = true;
        }
        Ok(Self {
            id,
            n_states,
            n_actions,
            transitions: flat,
            rewards,
            discount,
            terminal,
            start_state,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn transition(&self, s: usize, a: usize) -> &[f64] {
        let i = (s * self.n_actions + a) * self.n_states;
        &self.transitions[i..i + self.n_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[[s, a]]
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn non_terminal_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_states).filter(|&s| !self.terminal[s])
    }

    /// Samples a successor; returns it with the reward.
    pub fn step<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> (usize, f64) {
        let u: f64 = rng.random();
        let dist = self.transition(s, a);
        let mut acc = 0.0;
        let mut next = dist.len() - 1;
        for (i, p) in dist.iter().enumerate() {
            acc += p;
            if u < acc {
                next = i;
                break;
            }
        }
        (next, self.reward(s, a))
    }
}

/// Grid moves: up, right, down, left.
pub const GRID_ACTIONS: usize = 4;

/// A `width × height` gridworld plus one absorbing terminal state (the last
/// index). Leaving a reward cell by any action pays its reward and ends the
/// episode. Elsewhere a move succeeds with probability `1 - wind`; with
/// probability `wind` the agent drifts one cell right instead. Walls block.
pub fn gridworld(
    id: usize,
    width: usize,
    height: usize,
    reward_cells: &[(usize, f64)],
    wind: f64,
    discount: f64,
    start_state: usize,
) -> Result<TabularGame> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    if !(0.0..=1.0).contains(&wind) {
        return Err(Error::InvalidParameter(format!("wind must lie in [0, 1], got {wind}")));
    }
    let cells = width * height;
    let terminal = cells;
    let n = cells + 1;
    let mut rewards = Array2::zeros((n, GRID_ACTIONS));
    let mut transitions = vec![vec![vec![0.0; n]; GRID_ACTIONS]; n];
    let reward_at = |s: usize| reward_cells.iter().find(|(c, _)| *c == s).map(|(_, r)| *r);
    if let Some((bad, _)) = reward_cells.iter().find(|(c, _)| *c >= cells) {
        return Err(Error::InvalidParameter(format!("reward cell {bad} is off the grid")));
    }
    let moved = |s: usize, a: usize| -> usize {
        let (r, c) = (s / width, s % width);
        match a {
            0 if r > 0 => s - width,
            1 if c + 1 < width => s + 1,
            2 if r + 1 < height => s + width,
            3 if c > 0 => s - 1,
            _ => s,
        }
    };
    for s in 0..n {
        for a in 0..GRID_ACTIONS {
            if s == terminal {
                transitions[s][a][terminal] = 1.0;
            } else if let Some(r) = reward_at(s) {
                transitions[s][a][terminal] = 1.0;
                rewards[[s, a]] = r;
            } else {
                transitions[s][a][moved(s, a)] += 1.0 - wind;
                transitions[s][a][moved(s, 1)] += wind;
            }
        }
    }
    TabularGame::new(id, transitions, rewards, discount, &[terminal], start_state)
}

/// The two default 4×4 games. Game 0 is deterministic with the goal in the
/// far corner and two pits on the diagonal; game 1 has the goal bottom-left,
/// different pits, and a 0.2 drift to the right.
pub fn default_games() -> Vec<TabularGame> {
    vec![
        gridworld(0, 4, 4, &[(15, 1.0), (5, -1.0), (10, -1.0)], 0.0, 0.9, 0)
            .expect("valid layout"),
        gridworld(1, 4, 4, &[(12, 1.0), (6, -1.0), (9, -1.0)], 0.2, 0.9, 0)
            .expect("valid layout"),
    ]
}

pub const VALUE_ITERATION_TOLERANCE: f64 = 1e-8;
pub const VALUE_ITERATION_CAP: usize = 100_000;

/// Optimal action values, within `VALUE_ITERATION_TOLERANCE` in sup norm.
/// Terminal states have value zero.
pub fn value_iteration(game: &TabularGame) -> Result<Array2<f64>> {
    value_iteration_with(game, VALUE_ITERATION_TOLERANCE, VALUE_ITERATION_CAP)
}

/// Stops once successive iterates differ by at most `tol (1-γ)/γ`, which
/// bounds the distance to the fixed point by `tol`.
pub fn value_iteration_with(game: &TabularGame, tol: f64, max_iter: usize) -> Result<Array2<f64>> {
    let (s_n, a_n) = (game.n_states(), game.n_actions());
    let gamma = game.discount;
    let threshold = tol * (1.0 - gamma) / gamma;
    let mut q = Array2::<f64>::zeros((s_n, a_n));
    let mut v = vec![0.0; s_n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let mut next = Array2::<f64>::zeros((s_n, a_n));
        for s in 0..s_n {
            if game.is_terminal(s) {
                continue;
            }
            for a in 0..a_n {
                let expected: f64 = game
                    .transition(s, a)
                    .iter()
                    .zip(&v)
                    .map(|(p, vv)| p * vv)
                    .sum();
                next[[s, a]] = game.reward(s, a) + gamma * expected;
            }
        }
        residual = next
            .iter()
            .zip(q.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        q = next;
        for (s, vs) in v.iter_mut().enumerate() {
            *vs = q.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        if residual <= threshold {
            return Ok(q);
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}
