#pragma once

#include <vector>

#include <Eigen/Dense>

namespace dcm {

struct PosteriorChains;

/// Per-parameter convergence summaries.
struct Diagnostics {
  Eigen::VectorXd ess;   // bulk effective sample size
  Eigen::VectorXd rhat;  // rank-normalized split R-hat; +inf for constant chains
};

/// Requires at least 2 chains and 100 kept steps.
Diagnostics diagnostics(const PosteriorChains& chains);

// Lower-level pieces, over one parameter given as one vector per chain.

/// max(rank-normalized split R-hat, folded rank-normalized split R-hat).
double split_rhat(const std::vector<std::vector<double>>& chains);
/// ESS of the rank-normalized split chains.
double ess_bulk(const std::vector<std::vector<double>>& chains);
/// ESS from multi-chain autocorrelations with Geyer's initial monotone
/// sequence truncation, on the values as given.
double ess_geyer(const std::vector<std::vector<double>>& chains);
/// Plain (not rank-normalized) R-hat over the chains as given.
double rhat_basic(const std::vector<std::vector<double>>& chains);

}  // namespace dcm
