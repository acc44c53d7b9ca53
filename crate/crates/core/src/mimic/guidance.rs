use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::expert::ExpertPolicy;
use super::game::TabularGame;
use crate::error::{Error, Result};
use crate::simplex::SimplexPoint;

/// Steps after which an episode is cut and restarted.
pub const DEFAULT_HORIZON: usize = 100;

/// Euclidean distance from the simplex centroid below which a guidance
/// vector counts as near-centroid.
pub const NEAR_CENTROID_GUIDANCE_DISTANCE: f64 = 0.05;

/// Network input: one-hot state followed by one-hot game index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureMap {
    pub n_states: usize,
    pub n_games: usize,
}

impl FeatureMap {
    pub fn dim(&self) -> usize {
        self.n_states + self.n_games
    }

    pub fn encode(&self, state: usize, game_index: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        x[state] = 1.0;
        x[self.n_states + game_index] = 1.0;
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceSample {
    pub state: usize,
    pub state_features: Vec<f64>,
    /// The expert's action distribution at `state`.
    pub guidance: SimplexPoint,
    pub game_id: usize,
}

/// An endless trajectory through one game under the behaviour policy:
/// the expert's action with probability `1 - ε`, a uniform action otherwise.
#[derive(Debug, Clone)]
pub struct GuidanceStream {
    state: usize,
    t: usize,
    horizon: usize,
    epsilon: f64,
    rng: ChaCha8Rng,
}

impl GuidanceStream {
    pub fn new(game: &TabularGame, epsilon: f64, horizon: usize, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter(format!(
                "behaviour epsilon must lie in [0, 1], got {epsilon}"
            )));
        }
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be >= 1".into()));
        }
        if game.is_terminal(game.start_state) {
            return Err(Error::UnreachableQuota(format!(
                "game {}: the start state is terminal",
                game.id
            )));
        }
        Ok(Self {
            state: game.start_state,
            t: 0,
            horizon,
            epsilon,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Returns the current (non-terminal) state, then advances.
    pub fn next_state(&mut self, game: &TabularGame, expert: &ExpertPolicy) -> usize {
        let s = self.state;
        let a = if self.rng.random::<f64>() < self.epsilon {
            self.rng.random_range(0..game.n_actions())
        } else {
            sample_index(expert.policy.row(s).as_slice().expect("contiguous"), &mut self.rng)
        };
        let (next, _) = game.step(s, a, &mut self.rng);
        self.t += 1;
        if game.is_terminal(next) || self.t >= self.horizon {
            self.state = game.start_state;
            self.t = 0;
        } else {
            self.state = next;
        }
        s
    }

    pub fn next_samples(
        &mut self,
        game: &TabularGame,
        expert: &ExpertPolicy,
        features: &FeatureMap,
        game_index: usize,
        n: usize,
    ) -> Vec<GuidanceSample> {
        (0..n)
            .map(|_| {
                let s = self.next_state(game, expert);
                GuidanceSample {
                    state: s,
                    state_features: features.encode(s, game_index),
                    guidance: expert.guidance(s),
                    game_id: game.id,
                }
            })
            .collect()
    }
}

pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

pub(crate) fn check_games(games: &[TabularGame], experts: &[ExpertPolicy]) -> Result<()> {
    if games.is_empty() {
        return Err(Error::InvalidParameter("no games given".into()));
    }
    if games.len() != experts.len() {
        return Err(Error::InvalidParameter(format!(
            "{} games but {} experts",
            games.len(),
            experts.len()
        )));
    }
    let (s, a) = (games[0].n_states(), games[0].n_actions());
    for (g, e) in games.iter().zip(experts) {
        if g.n_states() != s || g.n_actions() != a {
            return Err(Error::Shape(format!(
                "game {} has {}×{} states×actions, expected {s}×{a}",
                g.id,
                g.n_states(),
                g.n_actions()
            )));
        }
        if e.policy.dim() != (s, a) {
            return Err(Error::Shape(format!("expert for game {} has the wrong shape", g.id)));
        }
    }
    Ok(())
}

/// `n_per_game` guidance samples from each game, games in order. Each game's
/// trajectory uses its own generator seeded from `rng`.
pub fn generate_guidance<R: Rng + ?Sized>(
    games: &[TabularGame],
    experts: &[ExpertPolicy],
    n_per_game: usize,
    epsilon_behavior: f64,
    rng: &mut R,
) -> Result<Vec<GuidanceSample>> {
    check_games(games, experts)?;
    let features = FeatureMap {
        n_states: games[0].n_states(),
        n_games: games.len(),
    };
    let mut out = Vec::with_capacity(n_per_game * games.len());
    for (i, (game, expert)) in games.iter().zip(experts).enumerate() {
        let mut stream = GuidanceStream::new(game, epsilon_behavior, DEFAULT_HORIZON, rng.random())?;
        out.extend(stream.next_samples(game, expert, &features, i, n_per_game));
    }
    Ok(out)
}
