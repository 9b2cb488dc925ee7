#include "drest/dataset.hpp"

#include <cmath>

namespace drest {

void Dataset::validate() const {
  const Eigen::Index n = size();
  if (n == 0) throw SchemaError("dataset is empty");
  if (outcome_.size() != n)
    throw SchemaError("outcome length does not match exposure length");
  for (const auto& [name, v] : covariates_)
    if (v.size() != n)
      throw SchemaError("covariate '" + name + "' length does not match");

  Eigen::Index n_exposed = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = exposure_[i];
    if (x != 0.0 && x != 1.0)
      throw SchemaError("exposure must be 0 or 1 (row " + std::to_string(i + 1) + ")");
    if (!std::isfinite(outcome_[i]))
      throw InputError("non-finite outcome (row " + std::to_string(i + 1) + ")");
    n_exposed += (x == 1.0);
  }
  if (n_exposed == 0 || n_exposed == n)
    throw SchemaError("both exposure arms must be non-empty");

  if (y0_.has_value() != y1_.has_value())
    throw SchemaError("potential outcomes must come in pairs");
  if (y0_) {
    if (y0_->size() != n || y1_->size() != n)
      throw SchemaError("potential outcome length mismatch");
    for (Eigen::Index i = 0; i < n; ++i) {
      const double y = exposure_[i] == 1.0 ? (*y1_)[i] : (*y0_)[i];
      if (y != outcome_[i])
        throw SchemaError("causal consistency violated (row " + std::to_string(i + 1) + ")");
    }
  }
}

Dataset Dataset::permuted(const std::vector<Eigen::Index>& perm) const {
  const Eigen::Index n = size();
  if (static_cast<Eigen::Index>(perm.size()) != n)
    throw SchemaError("permutation length mismatch");
  auto apply = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = v[perm[i]];
    return out;
  };
  Dataset d;
  d.exposure_name_ = exposure_name_;
  d.outcome_name_ = outcome_name_;
  d.exposure_ = apply(exposure_);
  d.outcome_ = apply(outcome_);
  for (const auto& [name, v] : covariates_) d.covariates_.emplace_back(name, apply(v));
  if (y0_) {
    d.y0_ = apply(*y0_);
    d.y1_ = apply(*y1_);
  }
  return d;
}

}  // namespace drest
