//! Lottery-prompt search, prompt ranking and pruned search.

mod lottery;
pub mod metric;
mod prune;
mod rank;

pub use lottery::{hardest, mean_cost, search_dataset, search_lottery, success_rate, SearchResult};
pub use prune::{
    is_valid, pruned_search, PruneConfig, PruneOutcome, WordScoreTable, DEFAULT_BATCH_SIZE, DEFAULT_THRESHOLD,
};
pub use rank::{
    evaluate_all, evaluate_prompt, evaluate_templates, predictions, rank_prompts, ranking_order, top_k, PromptStats,
};
