//! Embedding, representative and agent training chained into one call.

use crate::agent::{train_agent, AgentConfig, QNetwork, TrainLog};
use crate::coldstart::RepresentativeTable;
use crate::data::InteractionDataset;
use crate::embed::{train_embeddings, EmbedConfig, EmbedReport, EmbeddingTable};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub embeddings: EmbeddingTable,
    pub embed_report: EmbedReport,
    pub representatives: RepresentativeTable,
    pub network: QNetwork,
    pub agent_log: TrainLog,
}

pub fn train_model(
    train: &InteractionDataset,
    embed: &EmbedConfig,
    lambda: f64,
    agent: &AgentConfig,
) -> Result<TrainedModel> {
    let (embeddings, embed_report) = train_embeddings(train, embed)?;
    log::info!(
        "embeddings: {} epochs, best epoch {}",
        embed_report.epoch_loss.len(),
        embed_report.best_epoch
    );
    let representatives = RepresentativeTable::build(&embeddings, train, lambda)?;
    let (network, agent_log) = train_agent(train, &embeddings, &representatives, agent)?;
    log::info!("agent: {} gradient steps", agent_log.records.len());
    Ok(TrainedModel {
        embeddings,
        embed_report,
        representatives,
        network,
        agent_log,
    })
}
