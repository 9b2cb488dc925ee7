#ifndef DREST_MODEL_MATRIX_HPP
#define DREST_MODEL_MATRIX_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "drest/dataset.hpp"

namespace drest {

// One term of a model formula.
struct Term {
  enum class Kind { Intercept, Covariate, Product, Spline };
  Kind kind = Kind::Intercept;
  std::vector<std::string> names;    // covariate (1 entry) or product factors
  std::vector<double> percentiles;   // spline knot percentiles, in (0,100)

  bool operator==(const Term& other) const;
};

// Declarative design-matrix description. Textual grammar (used by the CLI):
// comma-separated terms, `1` for the intercept, `a*b` for elementwise
// products, `rcs(name, p1 p2 ... pk)` for a restricted cubic spline with
// knots at the given percentiles.
struct ModelSpec {
  std::vector<Term> terms;
  std::optional<std::string> response;

  static ModelSpec parse(const std::string& text,
                         std::optional<std::string> response = std::nullopt);

  // Validates term-list invariants against a dataset schema.
  void validate(const Dataset& data) const;

  std::string to_string() const;
};

struct DesignMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> labels;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

// Restricted-cubic-spline basis: k >= 3 strictly increasing knots give one
// linear column plus k-2 nonlinear columns.
struct SplineBasis {
  std::string covariate;
  Eigen::VectorXd knots;
};

// Empirical percentiles by linear interpolation between order statistics:
// for sorted values v[0..n-1], percentile p sits at rank h = p/100 * (n-1)
// and interpolates v[floor(h)] and v[floor(h)+1].
Eigen::VectorXd compute_knots(const Eigen::VectorXd& values,
                              const Eigen::VectorXd& percentiles);

// n x (k-1) matrix: column 0 is the identity term, columns 1..k-2 are the
// Harrell-form truncated cubics normalized by (t_k - t_1)^2. Linear beyond
// the boundary knots.
Eigen::MatrixXd rcs_basis(const Eigen::VectorXd& values, const SplineBasis& basis);

DesignMatrix build_design(const Dataset& data, const ModelSpec& spec);

}  // namespace drest

#endif
