//! Offline reinforcement-learning recommender: transition generation, a
//! dueling double Q-network trained with a conservative objective, and the
//! partitioned replay memory.

mod buffer;
mod cql;
mod qnet;
mod recommend;
mod train;
mod transition;

pub use buffer::{quotas, BufferConfig, Partition, ReplayBuffer, SampledBatch};
pub use cql::{cql_loss, cql_loss_with_targets, q_target, q_targets, CqlOutput};
pub use qnet::{Forward, QNetwork};
pub use recommend::{recommend, RecommendMode, Recommendation};
pub use train::{train_agent, AgentConfig, TrainLog, TrainRecord};
pub use transition::{gen_transition, reward, sample_known_and_action, Transition};
