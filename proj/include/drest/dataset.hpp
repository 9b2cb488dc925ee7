#ifndef DREST_DATASET_HPP
#define DREST_DATASET_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "drest/errors.hpp"

namespace drest {

// Observed data: binary exposure, real outcome, named real covariates.
// Potential outcomes are carried only for simulated data (truth for the
// Monte Carlo study); when present, consistency Y = X*Y1 + (1-X)*Y0 must hold.
class Dataset {
 public:
  Dataset() = default;

  Eigen::Index size() const { return exposure_.size(); }

  const Eigen::VectorXd& exposure() const { return exposure_; }
  const Eigen::VectorXd& outcome() const { return outcome_; }
  const std::string& exposure_name() const { return exposure_name_; }
  const std::string& outcome_name() const { return outcome_name_; }

  const std::optional<Eigen::VectorXd>& y0() const { return y0_; }
  const std::optional<Eigen::VectorXd>& y1() const { return y1_; }

  void set_exposure(std::string name, Eigen::VectorXd x) {
    exposure_name_ = std::move(name);
    exposure_ = std::move(x);
  }
  void set_outcome(std::string name, Eigen::VectorXd y) {
    outcome_name_ = std::move(name);
    outcome_ = std::move(y);
  }
  void add_covariate(std::string name, Eigen::VectorXd values) {
    covariates_.emplace_back(std::move(name), std::move(values));
  }
  void set_potential_outcomes(Eigen::VectorXd y0, Eigen::VectorXd y1) {
    y0_ = std::move(y0);
    y1_ = std::move(y1);
  }

  const std::vector<std::pair<std::string, Eigen::VectorXd>>& covariates() const {
    return covariates_;
  }

  bool has_column(const std::string& name) const {
    if (name == exposure_name_ || name == outcome_name_) return true;
    for (const auto& [cname, v] : covariates_)
      if (cname == name) return true;
    return false;
  }

  // Column lookup across exposure, outcome, and covariates.
  const Eigen::VectorXd& column(const std::string& name) const {
    if (name == exposure_name_) return exposure_;
    if (name == outcome_name_) return outcome_;
    for (const auto& [cname, v] : covariates_)
      if (cname == name) return v;
    throw SchemaError("unknown column '" + name + "'");
  }

  // Checks the structural invariants; throws on violation.
  void validate() const;

  // Copy with the exposure column replaced by the constant x; used to build
  // counterfactual design matrices.
  Dataset with_exposure_set(double x) const {
    Dataset d = *this;
    d.exposure_.setConstant(x);
    return d;
  }

  // Copy with rows reordered by the given permutation (perm[i] = source row).
  Dataset permuted(const std::vector<Eigen::Index>& perm) const;

 private:
  std::string exposure_name_ = "x";
  std::string outcome_name_ = "y";
  Eigen::VectorXd exposure_;
  Eigen::VectorXd outcome_;
  std::vector<std::pair<std::string, Eigen::VectorXd>> covariates_;
  std::optional<Eigen::VectorXd> y0_;
  std::optional<Eigen::VectorXd> y1_;
};

}  // namespace drest

#endif
