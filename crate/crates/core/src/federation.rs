//! Synchronous federated orchestration: broadcast, local training,
//! sample-size-weighted parameter averaging, and redistribution over
//! communication rounds.
//!
//! Determinism contract: per-(client, round) seeds are derived from the base
//! seed, and aggregation always sums in ascending client-id order, so
//! parallel and sequential execution produce bitwise-identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::embedding::Codec;
use crate::diffusion::model::{DiffusionModel, TrainingSet};
use crate::diffusion::schedule::NoiseSchedule;
use crate::error::{Error, Result};
use crate::nn::adam::{AdamConfig, AdamState};
use crate::nn::mlp::MlpConfig;
use crate::nn::param::ParamVector;

/// Tag mixed into the seed stream for central-model initialization.
const INIT_TAG: u64 = u64::MAX;

/// Deterministic per-(client, round) seed derivation.
pub fn derive_seed(base: u64, client: u64, round: u64) -> u64 {
    let mut z = base
        ^ client.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ round.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    // splitmix64 finalizer
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    /// Total communication rounds R.
    pub rounds: usize,
    /// Local optimization steps per client per round.
    pub client_steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Clients engaged per round; `None` engages all of them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participants_per_round: Option<usize>,
    /// Train clients of a round on worker threads.
    #[serde(default)]
    pub parallel: bool,
}

impl FederationConfig {
    pub fn validate(&self, n_clients: usize) -> Result<()> {
        if self.rounds < 1 || self.client_steps < 1 || self.batch_size < 1 {
            return Err(Error::config("rounds, client_steps and batch_size must be >= 1"));
        }
        if let Some(p) = self.participants_per_round {
            if p < 1 || p > n_clients {
                return Err(Error::config(format!(
                    "participants_per_round {p} out of range for {n_clients} clients"
                )));
            }
        }
        Ok(())
    }
}

/// Everything shared between federated and local training runs.
#[derive(Debug, Clone)]
pub struct FederationSetup {
    pub schedule: NoiseSchedule,
    pub mlp: MlpConfig,
    pub codec: Codec,
    pub n_numeric: usize,
    pub adam: AdamConfig,
}

impl FederationSetup {
    fn init_model(&self, base_seed: u64) -> Result<DiffusionModel> {
        DiffusionModel::init(
            self.schedule.clone(),
            self.mlp.clone(),
            &self.codec,
            self.n_numeric,
            derive_seed(base_seed, INIT_TAG, 0),
        )
    }
}

#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: usize,
    pub set: TrainingSet,
    pub size: usize,
    /// Optimizer state persists locally across rounds; it is never averaged.
    pub adam: AdamState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Mean local loss per client; NaN for clients idle this round.
    pub client_losses: Vec<f64>,
    /// Size-weighted mean over participating clients.
    pub aggregate_loss: f64,
}

#[derive(Debug, Clone)]
pub struct FederationState {
    pub setup: FederationSetup,
    pub central: DiffusionModel,
    pub clients: Vec<ClientState>,
    pub round: usize,
    pub history: Vec<RoundRecord>,
}

/// Sample-size-weighted average of client parameters, accumulated in
/// ascending client-id order. Bitwise identity on bitwise-equal inputs.
pub fn fedavg(inputs: &[(usize, &ParamVector, usize)]) -> Result<ParamVector> {
    if inputs.is_empty() {
        return Err(Error::config("fedavg over an empty client list"));
    }
    if inputs.iter().any(|&(_, _, size)| size == 0) {
        return Err(Error::config("fedavg client sizes must be > 0"));
    }
    let mut ordered: Vec<&(usize, &ParamVector, usize)> = inputs.iter().collect();
    ordered.sort_by_key(|&&(id, _, _)| id);

    let first = ordered[0].1;
    for &&(id, params, _) in &ordered[1..] {
        if !first.same_layout(params) {
            let seg = first.first_layout_divergence(params).unwrap_or_default();
            return Err(Error::shape(format!(
                "client {id} parameter layout diverges at segment {seg}"
            )));
        }
    }
    if ordered[1..].iter().all(|&&(_, p, _)| first.bitwise_eq(p)) {
        return Ok(first.clone());
    }

    let total: f64 = ordered.iter().map(|&&(_, _, s)| s as f64).sum();
    let mut acc = ParamVector::zeros(first.layout().clone());
    for &&(_, params, size) in &ordered {
        acc.add_scaled(params, size as f64)?;
    }
    acc.scale(1.0 / total);
    // Clamp against floating-point drift so every coordinate stays inside
    // the coordinate-wise hull of the inputs.
    let values = acc.values_mut();
    for i in 0..values.len() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &&(_, params, _) in &ordered {
            let v = params.values()[i];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        values[i] = values[i].clamp(lo, hi);
    }
    Ok(acc)
}

struct ClientResult {
    id: usize,
    params: ParamVector,
    adam: AdamState,
    mean_loss: f64,
    size: usize,
}

fn train_client(
    central: &DiffusionModel,
    client: &ClientState,
    config: &FederationConfig,
    round: usize,
) -> Result<ClientResult> {
    let mut model = central.clone();
    let mut adam = client.adam.clone();
    let seed = derive_seed(config.seed, client.id as u64, round as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let losses =
        model.train_steps(&client.set, config.client_steps, config.batch_size, &mut adam, &mut rng)?;
    let mean_loss = losses.iter().sum::<f64>() / losses.len() as f64;
    Ok(ClientResult { id: client.id, params: model.params, adam, mean_loss, size: client.size })
}

impl FederationState {
    /// Fresh state: central parameters initialized from the base seed, one
    /// client per training set, zeroed optimizer state.
    pub fn init(
        setup: FederationSetup,
        client_sets: Vec<(TrainingSet, usize)>,
        config: &FederationConfig,
    ) -> Result<Self> {
        config.validate(client_sets.len())?;
        if client_sets.is_empty() {
            return Err(Error::config("federation needs at least one client"));
        }
        let central = setup.init_model(config.seed)?;
        let clients = client_sets
            .into_iter()
            .enumerate()
            .map(|(id, (set, size))| ClientState {
                id,
                set,
                size,
                adam: AdamState::new(central.params.len(), setup.adam),
            })
            .collect();
        Ok(FederationState { setup, central, clients, round: 0, history: Vec::new() })
    }

    fn select_participants(&self, config: &FederationConfig) -> Vec<usize> {
        match config.participants_per_round {
            None => (0..self.clients.len()).collect(),
            Some(p) if p >= self.clients.len() => (0..self.clients.len()).collect(),
            Some(p) => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    config.seed,
                    INIT_TAG - 1,
                    self.round as u64,
                ));
                let mut ids =
                    rand::seq::index::sample(&mut rng, self.clients.len(), p).into_vec();
                ids.sort_unstable();
                ids
            }
        }
    }

    /// One synchronous round: broadcast, local training, aggregation. On any
    /// client error the state is left exactly as before the round.
    pub fn run_round(&mut self, config: &FederationConfig) -> Result<()> {
        if self.round >= config.rounds {
            return Err(Error::config(format!(
                "round {} already reached configured total {}",
                self.round, config.rounds
            )));
        }
        let participants = self.select_participants(config);
        let round = self.round;
        let results: Vec<ClientResult> = if config.parallel {
            participants
                .par_iter()
                .map(|&id| train_client(&self.central, &self.clients[id], config, round))
                .collect::<Result<Vec<_>>>()?
        } else {
            participants
                .iter()
                .map(|&id| train_client(&self.central, &self.clients[id], config, round))
                .collect::<Result<Vec<_>>>()?
        };

        let inputs: Vec<(usize, &ParamVector, usize)> =
            results.iter().map(|r| (r.id, &r.params, r.size)).collect();
        let new_central = fedavg(&inputs)?;

        // Commit point: nothing above mutated self.
        let mut client_losses = vec![f64::NAN; self.clients.len()];
        let mut weighted = 0.0;
        let mut total = 0.0;
        for r in results {
            client_losses[r.id] = r.mean_loss;
            weighted += r.size as f64 * r.mean_loss;
            total += r.size as f64;
            self.clients[r.id].adam = r.adam;
        }
        self.central.params = new_central;
        self.history.push(RoundRecord {
            round,
            client_losses,
            aggregate_loss: weighted / total,
        });
        self.round += 1;
        Ok(())
    }

    pub fn run_rounds(&mut self, config: &FederationConfig, n: usize) -> Result<()> {
        for _ in 0..n {
            self.run_round(config)?;
        }
        Ok(())
    }
}

/// Full federated run: init from seed, loop all configured rounds, return the
/// final state (central model plus history).
pub fn run_federation(
    setup: FederationSetup,
    client_sets: Vec<(TrainingSet, usize)>,
    config: &FederationConfig,
) -> Result<FederationState> {
    let mut state = FederationState::init(setup, client_sets, config)?;
    let remaining = config.rounds;
    state.run_rounds(config, remaining)?;
    Ok(state)
}

/// Compute-matched standalone baseline: trains one model on a single
/// client's data for `total_steps`, chunked like federated rounds so that a
/// single-client federation with the same seed is bitwise-equivalent.
pub fn run_local_baseline(
    setup: FederationSetup,
    set: &TrainingSet,
    config: &FederationConfig,
    client_id: usize,
    total_steps: usize,
) -> Result<(DiffusionModel, Vec<f64>)> {
    if total_steps < 1 {
        return Err(Error::config("total_steps must be >= 1"));
    }
    let mut model = setup.init_model(config.seed)?;
    let mut adam = AdamState::new(model.params.len(), setup.adam);
    let mut losses = Vec::with_capacity(total_steps);
    let mut done = 0usize;
    let mut round = 0u64;
    while done < total_steps {
        let steps = config.client_steps.min(total_steps - done);
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(config.seed, client_id as u64, round));
        let chunk = model.train_steps(set, steps, config.batch_size, &mut adam, &mut rng)?;
        losses.extend(chunk);
        done += steps;
        round += 1;
    }
    Ok((model, losses))
}
