//! Twin Delayed DDPG on top of [`crate::numerics`].
//!
//! Two critics regress towards a shared clipped-double-Q target built from
//! smoothed target-actor actions; the actor and all target networks move only
//! on every `policy_delay`-th update.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::envs::EnvSpec;
use crate::error::{contract, Error, Result};
use crate::numerics::{Activation, AdamConfig, AdamState, Batch, Network, NetworkSpec};
use crate::replay::Transition;
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Td3Config {
    pub gamma: f64,
    pub tau: f64,
    pub policy_delay: u64,
    /// Gaussian std of exploration noise, in units of the action half-range.
    pub exploration_noise_std: f64,
    /// Std of target-policy smoothing noise, in units of the action half-range.
    pub target_noise_std: f64,
    /// Clip of the smoothing noise, in units of the action half-range.
    pub target_noise_clip: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub learning_starts: u64,
    pub hidden: Vec<usize>,
}

impl Default for Td3Config {
    fn default() -> Self {
        Td3Config {
            gamma: 0.99,
            tau: 0.005,
            policy_delay: 2,
            exploration_noise_std: 0.1,
            target_noise_std: 0.2,
            target_noise_clip: 0.5,
            batch_size: 256,
            learning_rate: 3e-4,
            learning_starts: 1000,
            hidden: vec![64, 64],
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<()> {
        let c = self;
        if !(0.0..1.0).contains(&c.gamma) {
            return Err(contract!("gamma must lie in [0, 1), got {}", c.gamma));
        }
        if !(c.tau > 0.0 && c.tau <= 1.0) {
            return Err(contract!("tau must lie in (0, 1], got {}", c.tau));
        }
        if c.policy_delay == 0 {
            return Err(contract!("policy_delay must be positive"));
        }
        if !(c.exploration_noise_std >= 0.0 && c.target_noise_std >= 0.0) {
            return Err(contract!("noise standard deviations must be non-negative"));
        }
        if c.target_noise_clip.is_nan() || c.target_noise_clip <= 0.0 {
            return Err(contract!("target_noise_clip must be positive"));
        }
        if c.batch_size == 0 {
            return Err(contract!("batch_size must be positive"));
        }
        if c.learning_rate.is_nan() || c.learning_rate <= 0.0 {
            return Err(contract!("learning_rate must be positive"));
        }
        if c.hidden.contains(&0) {
            return Err(contract!("hidden layer widths must be positive"));
        }
        Ok(())
    }
}

/// Maps a tanh output in `[-1, 1]` onto the action box.
pub fn scale_action(low: &[f64], high: &[f64], squashed: &[f64]) -> Vec<f64> {
    squashed
        .iter()
        .zip(low.iter().zip(high))
        .map(|(&y, (&lo, &hi))| (lo + (y + 1.0) / 2.0 * (hi - lo)).clamp(lo, hi))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Td3Losses {
    pub critic1: f64,
    pub critic2: f64,
    /// Negated mean critic value, only on delayed actor steps.
    pub actor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Td3Agent {
    pub config: Td3Config,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub actor: Network,
    pub actor_target: Network,
    pub critic1: Network,
    pub critic2: Network,
    pub critic1_target: Network,
    pub critic2_target: Network,
    pub actor_opt: AdamState,
    pub critic1_opt: AdamState,
    pub critic2_opt: AdamState,
    pub update_count: u64,
}

/// Rows of `[observation ⧺ action]`.
fn state_action_batch(observations: &Batch, actions: &Batch) -> Batch {
    let cols = observations.cols + actions.cols;
    let mut data = Vec::with_capacity(observations.rows * cols);
    for (o, a) in observations.rows().zip(actions.rows()) {
        data.extend_from_slice(o);
        data.extend_from_slice(a);
    }
    Batch {
        rows: observations.rows,
        cols,
        data,
    }
}

impl Td3Agent {
    pub fn actor_spec(env: &EnvSpec, hidden: &[usize]) -> NetworkSpec {
        NetworkSpec::mlp(env.obs_dim, hidden, env.action_dim, Activation::Tanh)
    }

    pub fn critic_spec(env: &EnvSpec, hidden: &[usize]) -> NetworkSpec {
        NetworkSpec::mlp(env.obs_dim + env.action_dim, hidden, 1, Activation::Identity)
    }

    pub fn new(env: &EnvSpec, config: Td3Config, rng: &mut Stream) -> Result<Self> {
        config.validate()?;
        let actor = Network::init(Self::actor_spec(env, &config.hidden), rng)?;
        let critic1 = Network::init(Self::critic_spec(env, &config.hidden), rng)?;
        let critic2 = Network::init(Self::critic_spec(env, &config.hidden), rng)?;
        Self::from_networks(env, config, actor, critic1, critic2)
    }

    /// Builds an agent around given live networks; targets start as copies.
    pub fn from_networks(
        env: &EnvSpec,
        config: Td3Config,
        actor: Network,
        critic1: Network,
        critic2: Network,
    ) -> Result<Self> {
        config.validate()?;
        if actor.spec != Self::actor_spec(env, &config.hidden)
            || critic1.spec != Self::critic_spec(env, &config.hidden)
            || critic2.spec != critic1.spec
        {
            return Err(contract!("network architectures do not match the environment"));
        }
        let adam = AdamConfig::with_learning_rate(config.learning_rate);
        Ok(Td3Agent {
            actor_opt: AdamState::new(&actor, adam.clone())?,
            critic1_opt: AdamState::new(&critic1, adam.clone())?,
            critic2_opt: AdamState::new(&critic2, adam)?,
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            action_low: env.action_low.clone(),
            action_high: env.action_high.clone(),
            config,
            update_count: 0,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.actor.output_dim()
    }

    fn half_range(&self, k: usize) -> f64 {
        0.5 * (self.action_high[k] - self.action_low[k])
    }

    /// Noiseless policy output on the action box.
    pub fn actor_action(&self, observation: &[f64]) -> Result<Vec<f64>> {
        let y = self.actor.forward(observation)?;
        Ok(scale_action(&self.action_low, &self.action_high, &y))
    }

    /// Adds `N(0, (std·half_range)²)` per component, then clips to bounds.
    pub fn add_exploration_noise(&self, action: &mut [f64], rng: &mut Stream) {
        let std = self.config.exploration_noise_std;
        if std == 0.0 {
            return;
        }
        for (k, a) in action.iter_mut().enumerate() {
            let noisy = *a + std * self.half_range(k) * rng.normal();
            *a = noisy.clamp(self.action_low[k], self.action_high[k]);
        }
    }

    pub fn select_action(&self, observation: &[f64], rng: &mut Stream, explore: bool) -> Result<Vec<f64>> {
        let mut a = self.actor_action(observation)?;
        if explore {
            self.add_exploration_noise(&mut a, rng);
        }
        Ok(a)
    }

    /// Uniformly random action inside the box, used during warm-up.
    pub fn random_action(&self, rng: &mut Stream) -> Vec<f64> {
        self.action_low
            .iter()
            .zip(&self.action_high)
            .map(|(&lo, &hi)| rng.uniform(lo, hi))
            .collect()
    }

    fn q_values(critic: &Network, observations: &Batch, actions: &Batch) -> Result<Vec<f64>> {
        let cache = critic.forward_batch(&state_action_batch(observations, actions))?;
        Ok(cache.output().data.clone())
    }

    /// `min(Q1, Q2)(s, actor(s))`: the agent's own value estimate.
    pub fn value_estimates(&self, observations: &Batch) -> Result<Vec<f64>> {
        let actions = self.actor_actions(&self.actor, observations)?;
        let q1 = Self::q_values(&self.critic1, observations, &actions)?;
        let q2 = Self::q_values(&self.critic2, observations, &actions)?;
        Ok(q1.iter().zip(&q2).map(|(a, b)| a.min(*b)).collect())
    }

    fn actor_actions(&self, actor: &Network, observations: &Batch) -> Result<Batch> {
        let cache = actor.forward_batch(observations)?;
        let out = cache.output();
        let mut actions = Batch::zeros(out.rows, out.cols);
        for (dst, src) in actions.data.chunks_exact_mut(out.cols).zip(out.rows()) {
            dst.copy_from_slice(&scale_action(&self.action_low, &self.action_high, src));
        }
        Ok(actions)
    }

    fn check_batch(&self, batch: &[&Transition]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Empty("TD3 update batch"));
        }
        for t in batch {
            if t.observation.len() != self.obs_dim()
                || t.next_observation.len() != self.obs_dim()
                || t.action.len() != self.action_dim()
            {
                return Err(contract!("transition dimensions do not match the agent"));
            }
        }
        Ok(())
    }

    /// Clipped double-Q targets `r + mask·γ·min(Q1', Q2')(s', a')` with
    /// smoothed target actions `a'`. Draws `batch·action_dim` normals.
    pub fn td_targets(&self, batch: &[&Transition], rng: &mut Stream) -> Result<Vec<f64>> {
        self.check_batch(batch)?;
        let next_obs = Batch::from_rows(self.obs_dim(), batch.iter().map(|t| t.next_observation.as_slice()))?;
        let mut next_actions = self.actor_actions(&self.actor_target, &next_obs)?;
        let std = self.config.target_noise_std;
        let clip = self.config.target_noise_clip;
        let dim = self.action_dim();
        for row in next_actions.data.chunks_exact_mut(dim) {
            for (k, a) in row.iter_mut().enumerate() {
                let h = self.half_range(k);
                let noise = (std * h * rng.normal()).clamp(-clip * h, clip * h);
                *a = (*a + noise).clamp(self.action_low[k], self.action_high[k]);
            }
        }
        let q1 = Self::q_values(&self.critic1_target, &next_obs, &next_actions)?;
        let q2 = Self::q_values(&self.critic2_target, &next_obs, &next_actions)?;
        let gamma = self.config.gamma;
        Ok(batch
            .iter()
            .zip(q1.iter().zip(&q2))
            .map(|(t, (a, b))| {
                let mask = if t.bootstraps() { 1.0 } else { 0.0 };
                t.reward + mask * gamma * a.min(*b)
            })
            .collect())
    }

    /// One MSE regression step of `critic` towards `targets`; returns the loss.
    fn critic_step(
        critic: &mut Network,
        opt: &mut AdamState,
        inputs: &Batch,
        targets: &[f64],
        label: &str,
    ) -> Result<f64> {
        let cache = critic.forward_batch(inputs)?;
        let n = targets.len() as f64;
        let residuals: Vec<f64> = cache
            .output()
            .data
            .iter()
            .zip(targets)
            .map(|(q, y)| q - y)
            .collect();
        let loss = residuals.iter().map(|d| d * d).sum::<f64>() / n;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("{label} loss {loss}")));
        }
        let seed = Batch {
            rows: residuals.len(),
            cols: 1,
            data: residuals.iter().map(|d| 2.0 * d / n).collect(),
        };
        let grads = critic.backward_batch(&cache, &seed)?;
        opt.step(critic, &grads.params)?;
        Ok(loss)
    }

    /// One deterministic-policy-gradient step ascending the batch mean of
    /// `critic1(s, actor(s))`. Returns the loss (negated mean value) before
    /// the step.
    pub fn actor_step(&mut self, observations: &Batch) -> Result<f64> {
        let actor_cache = self.actor.forward_batch(observations)?;
        let squashed = actor_cache.output();
        let dim = self.action_dim();
        let mut actions = Batch::zeros(squashed.rows, dim);
        for (dst, src) in actions.data.chunks_exact_mut(dim).zip(squashed.rows()) {
            dst.copy_from_slice(&scale_action(&self.action_low, &self.action_high, src));
        }
        let critic_cache = self.critic1.forward_batch(&state_action_batch(observations, &actions))?;
        let n = observations.rows as f64;
        let loss = -critic_cache.output().data.iter().sum::<f64>() / n;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("actor loss {loss}")));
        }
        let seed = Batch {
            rows: observations.rows,
            cols: 1,
            data: vec![-1.0 / n; observations.rows],
        };
        let critic_grads = self.critic1.backward_batch(&critic_cache, &seed)?;
        let obs_dim = self.obs_dim();
        let mut action_grad = Batch::zeros(observations.rows, dim);
        for (dst, src) in action_grad
            .data
            .chunks_exact_mut(dim)
            .zip(critic_grads.input.rows())
        {
            for k in 0..dim {
                dst[k] = src[obs_dim + k] * self.half_range(k);
            }
        }
        let actor_grads = self.actor.backward_batch(&actor_cache, &action_grad)?;
        self.actor_opt.step(&mut self.actor, &actor_grads.params)?;
        Ok(loss)
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        let tau = self.config.tau;
        self.actor_target.soft_update_from(&self.actor, tau)?;
        self.critic1_target.soft_update_from(&self.critic1, tau)?;
        self.critic2_target.soft_update_from(&self.critic2, tau)
    }

    /// One full TD3 update on `batch`.
    pub fn update(&mut self, batch: &[&Transition], rng: &mut Stream) -> Result<Td3Losses> {
        self.check_batch(batch)?;
        if let Some(t) = batch.iter().find(|t| !t.reward.is_finite()) {
            return Err(Error::NonFinite(format!("batch reward {}", t.reward)));
        }
        let targets = self.td_targets(batch, rng)?;
        if let Some(y) = targets.iter().find(|y| !y.is_finite()) {
            let (lo, hi) = batch
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t.reward), hi.max(t.reward)));
            return Err(Error::NonFinite(format!(
                "TD target {y} (batch rewards in [{lo}, {hi}])"
            )));
        }
        let observations = Batch::from_rows(self.obs_dim(), batch.iter().map(|t| t.observation.as_slice()))?;
        let actions = Batch::from_rows(self.action_dim(), batch.iter().map(|t| t.action.as_slice()))?;
        let inputs = state_action_batch(&observations, &actions);
        let critic1 = Self::critic_step(&mut self.critic1, &mut self.critic1_opt, &inputs, &targets, "critic1")?;
        let critic2 = Self::critic_step(&mut self.critic2, &mut self.critic2_opt, &inputs, &targets, "critic2")?;

        self.update_count += 1;
        let actor = if self.update_count.is_multiple_of(self.config.policy_delay) {
            let loss = self.actor_step(&observations)?;
            self.soft_update_targets()?;
            Some(loss)
        } else {
            None
        };
        Ok(Td3Losses {
            critic1,
            critic2,
            actor,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{DoneReason, EnvId};

    fn env() -> EnvSpec {
        EnvSpec::new(EnvId::PendulumSwingup)
    }

    fn small_config() -> Td3Config {
        Td3Config {
            hidden: vec![8, 8],
            batch_size: 4,
            ..Td3Config::default()
        }
    }

    fn transition(reward: f64, done: bool, done_reason: DoneReason) -> Transition {
        Transition {
            observation: vec![1.0, 0.0, 0.3],
            action: vec![0.5],
            reward,
            next_observation: vec![0.0, 1.0, -0.2],
            done,
            done_reason,
        }
    }

    /// A critic that ignores its input and outputs `value`.
    fn constant_critic(env: &EnvSpec, hidden: &[usize], value: f64) -> Network {
        let mut net = Network::zeros(Td3Agent::critic_spec(env, hidden)).unwrap();
        net.layers.last_mut().unwrap().biases[0] = value;
        net
    }

    #[test]
    fn zero_actor_picks_midpoint() {
        let env = env();
        let config = small_config();
        let actor = Network::zeros(Td3Agent::actor_spec(&env, &config.hidden)).unwrap();
        let critic = constant_critic(&env, &config.hidden, 0.0);
        let agent = Td3Agent::from_networks(&env, config, actor, critic.clone(), critic).unwrap();
        let mut rng = Stream::new(0, "x");
        let a = agent.select_action(&[0.2, 0.9, 1.0], &mut rng, false).unwrap();
        assert_eq!(a, env.action_midpoint());
    }

    #[test]
    fn noiseless_selection_is_deterministic() {
        let env = env();
        let agent = Td3Agent::new(&env, small_config(), &mut Stream::new(1, "init")).unwrap();
        let mut r1 = Stream::new(0, "a");
        let mut r2 = Stream::new(99, "b");
        let obs = [0.6, 0.8, -0.5];
        assert_eq!(
            agent.select_action(&obs, &mut r1, false).unwrap(),
            agent.select_action(&obs, &mut r2, false).unwrap()
        );
    }

    #[test]
    fn exploration_noise_moments() {
        // Midpoint action on a symmetric box so clipping is negligible.
        let env = EnvSpec::new(EnvId::PointMass2d);
        let config = small_config();
        let actor = Network::zeros(Td3Agent::actor_spec(&env, &config.hidden)).unwrap();
        let critic = constant_critic(&env, &config.hidden, 0.0);
        let agent = Td3Agent::from_networks(&env, config, actor, critic.clone(), critic).unwrap();
        let mut rng = Stream::new(5, "explore");
        let n = 10_000;
        let mut sums = [0.0; 2];
        let mut sq = [0.0; 2];
        for _ in 0..n {
            let a = agent.select_action(&[1.0, 2.0, 0.0, 0.0], &mut rng, true).unwrap();
            for k in 0..2 {
                sums[k] += a[k];
                sq[k] += a[k] * a[k];
            }
        }
        for k in 0..2 {
            let mean = sums[k] / n as f64;
            let std = libm::sqrt(sq[k] / n as f64 - mean * mean);
            let expected = 0.1 * env.action_half_range()[k];
            assert!((std - expected).abs() <= 0.1 * expected, "{std} vs {expected}");
        }
    }

    #[test]
    fn td_target_with_time_limit_bootstraps() {
        let env = env();
        let config = Td3Config {
            gamma: 0.9,
            ..small_config()
        };
        let hidden = config.hidden.clone();
        let actor = Network::init(Td3Agent::actor_spec(&env, &hidden), &mut Stream::new(0, "a")).unwrap();
        let mut agent = Td3Agent::from_networks(
            &env,
            config,
            actor,
            constant_critic(&env, &hidden, 0.0),
            constant_critic(&env, &hidden, 0.0),
        )
        .unwrap();
        agent.critic1_target = constant_critic(&env, &hidden, 2.0);
        agent.critic2_target = constant_critic(&env, &hidden, 3.5);
        let t = transition(1.0, true, DoneReason::TimeLimit);
        let y = agent.td_targets(&[&t], &mut Stream::new(0, "u")).unwrap();
        assert!((y[0] - 2.8).abs() < 1e-12, "{y:?}");
        // Twin pessimism holds whichever critic is lower.
        agent.critic1_target = constant_critic(&env, &hidden, 5.0);
        agent.critic2_target = constant_critic(&env, &hidden, 2.0);
        let y = agent.td_targets(&[&t], &mut Stream::new(0, "u")).unwrap();
        assert!((y[0] - 2.8).abs() < 1e-12);
        // A non-time-limit terminal does not bootstrap.
        let absorbing = transition(1.0, true, DoneReason::None);
        let y = agent.td_targets(&[&absorbing], &mut Stream::new(0, "u")).unwrap();
        assert_eq!(y[0], 1.0);
    }

    #[test]
    fn critics_at_target_do_not_move() {
        // Critics and target critics all output 0, reward 0: residual is zero.
        let env = env();
        let config = small_config();
        let hidden = config.hidden.clone();
        let actor = Network::init(Td3Agent::actor_spec(&env, &hidden), &mut Stream::new(0, "a")).unwrap();
        let mut agent = Td3Agent::from_networks(
            &env,
            config,
            actor,
            constant_critic(&env, &hidden, 0.0),
            constant_critic(&env, &hidden, 0.0),
        )
        .unwrap();
        let before = agent.clone();
        let t = transition(0.0, false, DoneReason::None);
        let losses = agent.update(&[&t, &t], &mut Stream::new(0, "u")).unwrap();
        assert_eq!(losses.critic1, 0.0);
        assert_eq!(agent.critic1, before.critic1);
        assert_eq!(agent.critic2, before.critic2);
    }

    #[test]
    fn delayed_actor_and_target_updates() {
        let env = env();
        let mut agent = Td3Agent::new(&env, small_config(), &mut Stream::new(4, "init")).unwrap();
        let t = transition(-1.0, false, DoneReason::None);
        let batch = [&t, &t, &t];
        let mut rng = Stream::new(0, "u");
        let before = agent.clone();
        let l = agent.update(&batch, &mut rng).unwrap();
        assert!(l.actor.is_none());
        assert_eq!(agent.update_count, 1);
        assert_eq!(agent.actor, before.actor);
        assert_eq!(agent.actor_target, before.actor_target);
        assert_eq!(agent.critic1_target, before.critic1_target);
        assert_ne!(agent.critic1, before.critic1);

        let gap_before = agent.critic1_target.max_abs_diff(&agent.critic1);
        let mid = agent.clone();
        let l = agent.update(&batch, &mut rng).unwrap();
        assert!(l.actor.is_some());
        assert_ne!(agent.actor, mid.actor);
        // Target contraction: target_new - live = (1-τ)(target_old - live).
        let tau = agent.config.tau;
        for (tn, (to, live)) in agent
            .critic1_target
            .to_flat()
            .iter()
            .zip(mid.critic1_target.to_flat().iter().zip(agent.critic1.to_flat()))
        {
            let expected = (1.0 - tau) * to + tau * live;
            assert!((tn - expected).abs() <= 1e-15 * (1.0 + expected.abs()));
        }
        assert!(gap_before > 0.0);
    }

    #[test]
    fn actor_step_does_not_decrease_value() {
        let env = env();
        let config = Td3Config {
            learning_rate: 1e-5,
            ..small_config()
        };
        let mut agent = Td3Agent::new(&env, config, &mut Stream::new(8, "init")).unwrap();
        let mut rng = Stream::new(2, "obs");
        let rows: Vec<Vec<f64>> = (0..32)
            .map(|_| {
                let th = rng.uniform(-3.0, 3.0);
                vec![libm::cos(th), libm::sin(th), rng.uniform(-2.0, 2.0)]
            })
            .collect();
        let obs = Batch::from_rows(3, rows.iter().map(|r| r.as_slice())).unwrap();
        let before = agent.actor_step(&obs).unwrap();
        let after = -agent.critic1_mean(&obs);
        assert!(after <= before, "{after} > {before}");
    }

    #[test]
    fn empty_batch_rejected() {
        let env = env();
        let mut agent = Td3Agent::new(&env, small_config(), &mut Stream::new(0, "init")).unwrap();
        assert!(matches!(agent.update(&[], &mut Stream::new(0, "u")), Err(Error::Empty(_))));
    }

    #[test]
    fn non_finite_reward_aborts() {
        let env = env();
        let mut agent = Td3Agent::new(&env, small_config(), &mut Stream::new(0, "init")).unwrap();
        let t = transition(f64::NAN, false, DoneReason::None);
        let err = agent.update(&[&t], &mut Stream::new(0, "u")).unwrap_err();
        assert!(matches!(err, Error::NonFinite(ref m) if m.contains("reward")));
    }

    impl Td3Agent {
        fn critic1_mean(&self, observations: &Batch) -> f64 {
            let actions = self.actor_actions(&self.actor, observations).unwrap();
            let q = Self::q_values(&self.critic1, observations, &actions).unwrap();
            q.iter().sum::<f64>() / q.len() as f64
        }
    }
}
