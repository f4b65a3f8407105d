#include "dcm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "dcm/errors.hpp"
#include "dcm/inference.hpp"

namespace dcm {

namespace {

using Chains = std::vector<std::vector<double>>;
constexpr double kInf = std::numeric_limits<double>::infinity();

double mean_of(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_var(const std::vector<double>& x) {
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

void check_shape(const Chains& chains) {
  if (chains.size() < 2) throw ArgumentError("diagnostics need at least 2 chains");
  const std::size_t n = chains.front().size();
  if (n < 4) throw ArgumentError("diagnostics need at least 4 draws per chain");
  for (const auto& c : chains)
    if (c.size() != n) throw ArgumentError("chains must have equal length");
}

bool degenerate(const Chains& chains) {
  for (const auto& c : chains)
    if (std::all_of(c.begin(), c.end(), [&](double v) { return v == c.front(); })) return true;
  return false;
}

Chains split(const Chains& chains) {
  Chains out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    // Odd lengths drop the middle draw.
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

// Normal scores of pooled average ranks: Phi^-1((r - 3/8) / (S + 1/4)).
Chains rank_normalize(const Chains& chains) {
  std::vector<std::pair<double, std::size_t>> pooled;
  for (const auto& c : chains)
    for (double v : c) pooled.emplace_back(v, pooled.size());
  const std::size_t S = pooled.size();
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> rank(S);
  for (std::size_t i = 0; i < S;) {
    std::size_t j = i;
    while (j + 1 < S && pooled[j + 1].first == pooled[i].first) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[pooled[k].second] = r;
    i = j + 1;
  }
  const boost::math::normal_distribution<double> unit;
  Chains out = chains;
  std::size_t k = 0;
  for (auto& c : out)
    for (double& v : c) v = boost::math::quantile(unit, (rank[k++] - 0.375) / (S + 0.25));
  return out;
}

double median(std::vector<double> x) {
  const std::size_t n = x.size();
  std::nth_element(x.begin(), x.begin() + n / 2, x.end());
  double m = x[n / 2];
  if (n % 2 == 0) m = 0.5 * (m + *std::max_element(x.begin(), x.begin() + n / 2));
  return m;
}

// Biased autocovariance at `lag`.
double autocov(const std::vector<double>& x, double m, std::size_t lag) {
  double s = 0.0;
  for (std::size_t t = 0; t + lag < x.size(); ++t) s += (x[t] - m) * (x[t + lag] - m);
  return s / static_cast<double>(x.size());
}

}  // namespace

double rhat_basic(const Chains& chains) {
  check_shape(chains);
  if (degenerate(chains)) return kInf;
  const double n = static_cast<double>(chains.front().size());
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    means.push_back(mean_of(c));
    vars.push_back(sample_var(c));
  }
  const double W = mean_of(vars);
  const double B_over_n = sample_var(means);
  const double var_plus = (n - 1.0) / n * W + B_over_n;
  return std::sqrt(var_plus / W);
}

double split_rhat(const Chains& chains) {
  check_shape(chains);
  if (degenerate(chains)) return kInf;
  const Chains halves = split(chains);
  const double bulk = rhat_basic(rank_normalize(halves));
  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  const double med = median(pooled);
  Chains folded = halves;
  for (auto& c : folded)
    for (double& v : c) v = std::abs(v - med);
  if (degenerate(folded)) return bulk;
  return std::max(bulk, rhat_basic(rank_normalize(folded)));
}

double ess_geyer(const Chains& chains) {
  check_shape(chains);
  if (degenerate(chains)) return 0.0;
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  std::vector<double> means(m);
  for (std::size_t c = 0; c < m; ++c) means[c] = mean_of(chains[c]);

  auto mean_acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) s += autocov(chains[c], means[c], lag);
    return s / static_cast<double>(m);
  };
  const double nd = static_cast<double>(n);
  const double mean_var = mean_acov(0) * nd / (nd - 1.0);
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1) var_plus += sample_var(means);

  std::vector<double> rho(n + 2, 0.0);
  rho[0] = 1.0;
  double even = 1.0;
  double odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  rho[1] = odd;
  std::size_t t = 1;
  while (t < n - 4 && even + odd > 0.0) {
    even = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
    odd = 1.0 - (mean_var - mean_acov(t + 2)) / var_plus;
    if (even + odd >= 0.0) {
      rho[t + 1] = even;
      rho[t + 2] = odd;
    }
    t += 2;
  }
  const std::size_t max_t = t;
  if (even > 0.0) rho[max_t + 1] = even;
  // Initial monotone sequence.
  for (std::size_t k = 1; k + 3 <= max_t; k += 2) {
    if (rho[k + 1] + rho[k + 2] > rho[k - 1] + rho[k]) {
      rho[k + 1] = 0.5 * (rho[k - 1] + rho[k]);
      rho[k + 2] = rho[k + 1];
    }
  }
  double tau = -1.0 + rho[max_t + 1];
  for (std::size_t k = 0; k < max_t; ++k) tau += 2.0 * rho[k];
  const double total = static_cast<double>(m) * nd;
  return std::min(total / tau, total * std::log10(total));
}

double ess_bulk(const Chains& chains) {
  check_shape(chains);
  if (degenerate(chains)) return 0.0;
  return ess_geyer(rank_normalize(split(chains)));
}

Diagnostics diagnostics(const PosteriorChains& chains) {
  if (chains.n_chains < 2 || chains.n_steps < 100)
    throw ArgumentError("diagnostics need at least 2 chains and 100 kept steps");
  Diagnostics d;
  d.ess.resize(chains.dim);
  d.rhat.resize(chains.dim);
  for (int p = 0; p < chains.dim; ++p) {
    const auto per_chain = chains.parameter(p);
    d.rhat[p] = split_rhat(per_chain);
    d.ess[p] = ess_bulk(per_chain);
  }
  return d;
}

}  // namespace dcm
