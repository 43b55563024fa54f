//! Checkpoints of complete training state, and standalone policy files.
//!
//! Both use the `DAICKPT1` container. The JSON header carries the run
//! configuration, network architectures, RNG states, counters and logs; the
//! payload carries every parameter, optimizer moment and replay slot as
//! doubles, in the order listed in the header's `arrays` field.

use std::path::Path;

use dai_core::agents::{BcReport, ExpertPolicy, Td3Agent};
use dai_core::envs::{DoneReason, EnvId, EnvSpec, EnvState};
use dai_core::harness::{RunConfig, RunMetrics, Trainer};
use dai_core::numerics::{AdamConfig, AdamState, Network, NetworkSpec};
use dai_core::replay::{ReplayBuffer, Transition};
use dai_core::rng::Stream;
use serde::{Deserialize, Serialize};

use crate::container::{self, Cursor};
use crate::error::{LabError, Result};

pub const MAGIC: &[u8; 8] = b"DAICKPT1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Body {
    Trainer(Box<TrainerHeader>),
    Policy(PolicyHeader),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    #[serde(flatten)]
    body: Body,
    arrays: Vec<ArrayEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Architecture {
    actor: NetworkSpec,
    critic: NetworkSpec,
    expert: Option<NetworkSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RngStates {
    env: Stream,
    explore: Stream,
    update: Stream,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OptimizerHeader {
    config: AdamConfig,
    step_count: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ReplayHeader {
    capacity: usize,
    insert_count: u64,
    len: usize,
    /// `DoneReason` of each slot, in slot order.
    done_reasons: Vec<DoneReason>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrainerHeader {
    step: u64,
    config: RunConfig,
    architecture: Architecture,
    rng: RngStates,
    optimizers: [OptimizerHeader; 3],
    update_count: u64,
    env_state: EnvState,
    observation: Vec<f64>,
    episode_return: f64,
    replay: ReplayHeader,
    metrics: RunMetrics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyHeader {
    pub env_id: EnvId,
    pub architecture: NetworkSpec,
    /// Free-form provenance, e.g. `bc` or `actor@40000`.
    pub label: String,
    pub training_mse: Option<f64>,
}

struct Payload {
    arrays: Vec<ArrayEntry>,
    data: Vec<f64>,
}

impl Payload {
    fn new() -> Self {
        Payload {
            arrays: Vec::new(),
            data: Vec::new(),
        }
    }

    fn push(&mut self, name: &str, values: &[f64]) {
        self.arrays.push(ArrayEntry {
            name: name.into(),
            len: values.len(),
        });
        self.data.extend_from_slice(values);
    }
}

const NETWORKS: [&str; 6] = [
    "actor",
    "actor_target",
    "critic1",
    "critic2",
    "critic1_target",
    "critic2_target",
];
const OPTIMIZERS: [&str; 3] = ["actor_opt", "critic1_opt", "critic2_opt"];

fn networks(agent: &Td3Agent) -> [&Network; 6] {
    [
        &agent.actor,
        &agent.actor_target,
        &agent.critic1,
        &agent.critic2,
        &agent.critic1_target,
        &agent.critic2_target,
    ]
}

fn optimizers(agent: &Td3Agent) -> [&AdamState; 3] {
    [&agent.actor_opt, &agent.critic1_opt, &agent.critic2_opt]
}

pub fn encode_trainer(trainer: &Trainer) -> Result<Vec<u8>> {
    let agent = &trainer.agent;
    let mut payload = Payload::new();
    for (name, net) in NETWORKS.iter().zip(networks(agent)) {
        payload.push(name, &net.to_flat());
    }
    for (name, opt) in OPTIMIZERS.iter().zip(optimizers(agent)) {
        payload.push(&format!("{name}.first_moment"), &opt.first_moment);
        payload.push(&format!("{name}.second_moment"), &opt.second_moment);
    }
    let expert_spec = match &trainer.expert {
        Some(ExpertPolicy::Cloned(net)) => {
            payload.push("expert", &net.to_flat());
            Some(net.spec.clone())
        }
        _ => None,
    };
    let slots = trainer.replay.slots();
    let mut cols: [Vec<f64>; 5] = Default::default();
    for t in slots {
        cols[0].extend_from_slice(&t.observation);
        cols[1].extend_from_slice(&t.action);
        cols[2].push(t.reward);
        cols[3].extend_from_slice(&t.next_observation);
        cols[4].push(if t.done { 1.0 } else { 0.0 });
    }
    for (name, col) in ["replay.observation", "replay.action", "replay.reward", "replay.next_observation", "replay.done"]
        .iter()
        .zip(&cols)
    {
        payload.push(name, col);
    }
    let header = Header {
        format_version: FORMAT_VERSION,
        body: Body::Trainer(Box::new(TrainerHeader {
            step: trainer.t,
            config: trainer.config.clone(),
            architecture: Architecture {
                actor: agent.actor.spec.clone(),
                critic: agent.critic1.spec.clone(),
                expert: expert_spec,
            },
            rng: RngStates {
                env: trainer.env_rng.clone(),
                explore: trainer.explore_rng.clone(),
                update: trainer.update_rng.clone(),
            },
            optimizers: optimizers(agent).map(|o| OptimizerHeader {
                config: o.config.clone(),
                step_count: o.step_count,
            }),
            update_count: agent.update_count,
            env_state: trainer.env_state.clone(),
            observation: trainer.observation.clone(),
            episode_return: trainer.episode_return,
            replay: ReplayHeader {
                capacity: trainer.replay.capacity(),
                insert_count: trainer.replay.insert_count(),
                len: slots.len(),
                done_reasons: slots.iter().map(|t| t.done_reason).collect(),
            },
            metrics: trainer.metrics.clone(),
        })),
        arrays: payload.arrays,
    };
    container::encode(MAGIC, &header, &payload.data)
}

pub fn save_trainer(trainer: &Trainer, path: &Path) -> Result<()> {
    container::write_atomic(path, &encode_trainer(trainer)?)
}

fn read_header(bytes: &[u8], path: &Path) -> Result<(Header, Vec<f64>)> {
    // Check the version before trusting the rest of the header's layout.
    let (probe, _): (serde_json::Value, _) = container::decode(MAGIC, bytes, path)?;
    let version = probe.get("format_version").and_then(|v| v.as_u64());
    if version != Some(u64::from(FORMAT_VERSION)) {
        return Err(LabError::Incompatible {
            path: path.to_path_buf(),
            reason: format!("format version {version:?}, this build reads {FORMAT_VERSION}"),
        });
    }
    container::decode(MAGIC, bytes, path)
}

fn check_arrays(declared: &[ArrayEntry], expected: &[ArrayEntry], path: &Path) -> Result<()> {
    if declared == expected {
        Ok(())
    } else {
        Err(LabError::Corrupt {
            path: path.to_path_buf(),
            reason: "declared arrays do not match the architecture".into(),
        })
    }
}

fn corrupt(path: &Path, e: impl std::fmt::Display) -> LabError {
    LabError::Corrupt {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

pub fn decode_trainer(bytes: &[u8], path: &Path) -> Result<Trainer> {
    let (header, data) = read_header(bytes, path)?;
    let h = match header.body {
        Body::Trainer(h) => *h,
        Body::Policy(_) => {
            return Err(LabError::Incompatible {
                path: path.to_path_buf(),
                reason: "policy file where a training checkpoint was expected".into(),
            })
        }
    };
    let env = EnvSpec::new(h.config.env_id);
    let mut cur = Cursor::new(&data, path);
    let arch = &h.architecture;

    let mut nets = Vec::with_capacity(6);
    for (i, name) in NETWORKS.iter().enumerate() {
        let spec = if i < 2 { &arch.actor } else { &arch.critic };
        let flat = cur.take(name, spec.parameter_count())?;
        nets.push(Network::from_flat(spec.clone(), flat).map_err(|e| corrupt(path, e))?);
    }
    let mut opts = Vec::with_capacity(3);
    for (name, (oh, spec)) in OPTIMIZERS
        .iter()
        .zip(h.optimizers.iter().zip([&arch.actor, &arch.critic, &arch.critic]))
    {
        let n = spec.parameter_count();
        opts.push(AdamState {
            config: oh.config.clone(),
            step_count: oh.step_count,
            first_moment: cur.take(&format!("{name}.first_moment"), n)?.to_vec(),
            second_moment: cur.take(&format!("{name}.second_moment"), n)?.to_vec(),
        });
    }
    let expert = match (&arch.expert, h.config.algorithm) {
        (Some(spec), _) => {
            let flat = cur.take("expert", spec.parameter_count())?;
            Some(ExpertPolicy::Cloned(Network::from_flat(spec.clone(), flat).map_err(|e| corrupt(path, e))?))
        }
        (None, dai_core::harness::Algorithm::Td3Dai) => Some(ExpertPolicy::Scripted),
        (None, dai_core::harness::Algorithm::Td3) => None,
    };

    let n = h.replay.len;
    if h.replay.done_reasons.len() != n {
        return Err(corrupt(path, "replay done reasons do not match slot count"));
    }
    let (od, ad) = (env.obs_dim, env.action_dim);
    let obs = cur.take("replay.observation", n * od)?;
    let act = cur.take("replay.action", n * ad)?;
    let rew = cur.take("replay.reward", n)?;
    let next = cur.take("replay.next_observation", n * od)?;
    let done = cur.take("replay.done", n)?;
    cur.finish()?;
    let slots: Vec<Transition> = (0..n)
        .map(|i| Transition {
            observation: obs[i * od..(i + 1) * od].to_vec(),
            action: act[i * ad..(i + 1) * ad].to_vec(),
            reward: rew[i],
            next_observation: next[i * od..(i + 1) * od].to_vec(),
            done: done[i] != 0.0,
            done_reason: h.replay.done_reasons[i],
        })
        .collect();
    let replay = ReplayBuffer::from_slots(h.replay.capacity, od, ad, slots, h.replay.insert_count)
        .map_err(|e| corrupt(path, e))?;

    let mut nets = nets.into_iter();
    let mut opts = opts.into_iter();
    let mut next_net = || nets.next().expect("six networks");
    let agent = Td3Agent {
        config: h.config.td3.clone(),
        action_low: env.action_low.clone(),
        action_high: env.action_high.clone(),
        actor: next_net(),
        actor_target: next_net(),
        critic1: next_net(),
        critic2: next_net(),
        critic1_target: next_net(),
        critic2_target: next_net(),
        actor_opt: opts.next().expect("three optimizers"),
        critic1_opt: opts.next().expect("three optimizers"),
        critic2_opt: opts.next().expect("three optimizers"),
        update_count: h.update_count,
    };
    check_arrays(&header.arrays, &expected_arrays(&agent, &expert, &replay), path)?;
    Ok(Trainer {
        config: h.config,
        env,
        expert,
        agent,
        replay,
        env_state: h.env_state,
        observation: h.observation,
        t: h.step,
        episode_return: h.episode_return,
        env_rng: h.rng.env,
        explore_rng: h.rng.explore,
        update_rng: h.rng.update,
        metrics: h.metrics,
    })
}

fn expected_arrays(agent: &Td3Agent, expert: &Option<ExpertPolicy>, replay: &ReplayBuffer) -> Vec<ArrayEntry> {
    let mut p = Vec::new();
    let mut push = |name: String, len: usize| p.push(ArrayEntry { name, len });
    for (name, net) in NETWORKS.iter().zip(networks(agent)) {
        push(name.to_string(), net.spec.parameter_count());
    }
    for (name, opt) in OPTIMIZERS.iter().zip(optimizers(agent)) {
        push(format!("{name}.first_moment"), opt.first_moment.len());
        push(format!("{name}.second_moment"), opt.second_moment.len());
    }
    if let Some(ExpertPolicy::Cloned(net)) = expert {
        push("expert".into(), net.spec.parameter_count());
    }
    let n = replay.len();
    push("replay.observation".into(), n * replay.obs_dim());
    push("replay.action".into(), n * replay.action_dim());
    push("replay.reward".into(), n);
    push("replay.next_observation".into(), n * replay.obs_dim());
    push("replay.done".into(), n);
    p
}

pub fn load_trainer(path: &Path) -> Result<Trainer> {
    decode_trainer(&container::read_file(path)?, path)
}

/// A single network that maps observations to squashed actions.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyFile {
    pub env_id: EnvId,
    pub network: Network,
    pub label: String,
    pub training_mse: Option<f64>,
}

impl PolicyFile {
    pub fn from_bc(env_id: EnvId, expert: &ExpertPolicy, report: &BcReport) -> Result<Self> {
        match expert {
            ExpertPolicy::Cloned(net) => Ok(PolicyFile {
                env_id,
                network: net.clone(),
                label: "bc".into(),
                training_mse: Some(report.final_mse),
            }),
            ExpertPolicy::Scripted => Err(LabError::Usage("scripted experts have no parameters to save".into())),
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let flat = self.network.to_flat();
        let header = Header {
            format_version: FORMAT_VERSION,
            body: Body::Policy(PolicyHeader {
                env_id: self.env_id,
                architecture: self.network.spec.clone(),
                label: self.label.clone(),
                training_mse: self.training_mse,
            }),
            arrays: vec![ArrayEntry {
                name: "policy".into(),
                len: flat.len(),
            }],
        };
        container::encode(MAGIC, &header, &flat)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        container::write_atomic(path, &self.encode()?)
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let (header, data) = read_header(bytes, path)?;
        let h = match header.body {
            Body::Policy(h) => h,
            Body::Trainer(_) => {
                return Err(LabError::Incompatible {
                    path: path.to_path_buf(),
                    reason: "training checkpoint where a policy file was expected".into(),
                })
            }
        };
        let n = h.architecture.parameter_count();
        let expected = [ArrayEntry {
            name: "policy".into(),
            len: n,
        }];
        check_arrays(&header.arrays, &expected, path)?;
        let mut cur = Cursor::new(&data, path);
        let flat = cur.take("policy", n)?;
        cur.finish()?;
        Ok(PolicyFile {
            env_id: h.env_id,
            network: Network::from_flat(h.architecture, flat).map_err(|e| corrupt(path, e))?,
            label: h.label,
            training_mse: h.training_mse,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&container::read_file(path)?, path)
    }

    pub fn into_expert(self) -> ExpertPolicy {
        ExpertPolicy::Cloned(self.network)
    }
}

/// Loads the policy behind an expert source. A `cloned:` path may name a
/// policy file or a training checkpoint (whose actor is used).
pub fn resolve_expert(source: &dai_core::harness::ExpertSource, env_id: EnvId) -> Result<ExpertPolicy> {
    use dai_core::harness::ExpertSource;
    let path = match source {
        ExpertSource::Scripted => return Ok(ExpertPolicy::Scripted),
        ExpertSource::Cloned(p) => Path::new(p),
    };
    let bytes = container::read_file(path)?;
    let (network, file_env) = match PolicyFile::decode(&bytes, path) {
        Ok(p) => (p.network, p.env_id),
        Err(LabError::Incompatible { .. }) if bytes.starts_with(MAGIC) => {
            let t = decode_trainer(&bytes, path)?;
            (t.agent.actor, t.config.env_id)
        }
        Err(e) => return Err(e),
    };
    if file_env != env_id {
        return Err(LabError::Incompatible {
            path: path.to_path_buf(),
            reason: format!("policy is for {file_env}, run uses {env_id}"),
        });
    }
    let expert = ExpertPolicy::Cloned(network);
    expert.validate_for(&EnvSpec::new(env_id))?;
    Ok(expert)
}

/// Builds a trainer for `config`, resolving its expert when the algorithm
/// needs one.
pub fn trainer_for(config: RunConfig) -> Result<Trainer> {
    let expert = match config.algorithm {
        dai_core::harness::Algorithm::Td3Dai => Some(resolve_expert(&config.expert_source, config.env_id)?),
        dai_core::harness::Algorithm::Td3 => None,
    };
    Ok(Trainer::new(config, expert)?)
}
