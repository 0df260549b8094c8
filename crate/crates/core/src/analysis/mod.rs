//! Posterior summaries, information criteria, scoring rules and predictive
//! draws for new countries.

mod criteria;
mod predict;
mod scoring;
mod summary;

pub use criteria::{compare, gpd_fit, loo_ic, psis_smooth, waic, ComparisonMetrics, Loo, Waic, PARETO_K_THRESHOLD};
pub use predict::{predict_new_country, predictive_sensitivity, PredictiveDraws};
pub use scoring::{bias_and_mse, interval_score, CellErrors};
pub use summary::{quantile, summarize, summarize_column, SummaryRow, SummaryTable, QUANTILE_PROBS};
