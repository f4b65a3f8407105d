#pragma once

#include <string_view>

#include "dcm/dataset.hpp"
#include "dcm/fit_result.hpp"
#include "dcm/likelihood.hpp"
#include "dcm/optimize.hpp"
#include "dcm/rng.hpp"

namespace dcm {

enum class BaselineKind { Logistic, Mnl };

std::string_view to_string(BaselineKind kind);

/// How MNL training treats observations that chose two or more items.
enum class MultiChoicePolicy {
  Reject,           // DataError
  SplitSingletons,  // each chosen item counts as its own singleton choice
};

/// Independent-label likelihood: sum_{i in C} log s(b.x_i) + sum_{j not in C} log(1 - s(b.x_j)).
double logistic_log_likelihood(const Vector& beta, const Matrix& Xq, const SubsetIndex& C);

/// MNL with a zero-utility opt-out; -inf for |C| >= 2.
double mnl_log_likelihood(const Vector& beta, const Matrix& Xq, const SubsetIndex& C);

double baseline_log_posterior(BaselineKind kind, const Vector& beta, const Dataset& data,
                              const PriorSpec& priors,
                              MultiChoicePolicy policy = MultiChoicePolicy::Reject);

Vector baseline_grad_log_posterior(BaselineKind kind, const Vector& beta, const Dataset& data,
                                   const PriorSpec& priors,
                                   MultiChoicePolicy policy = MultiChoicePolicy::Reject);

/// MAP fit of a baseline over the dataset's quality features, with the
/// beta part of `priors`.
FitResult fit_baseline(BaselineKind kind, const Dataset& data, const PriorSpec& priors,
                       const OptConfig& config = {},
                       MultiChoicePolicy policy = MultiChoicePolicy::Reject);

/// Logistic: independent Bernoulli labels. MNL: one categorical draw over {empty} + items.
SubsetIndex baseline_predict(BaselineKind kind, const Vector& beta, const Matrix& Xq, Rng& rng);

/// log(1 + exp(z)) without overflow.
double softplus(double z);

}  // namespace dcm
