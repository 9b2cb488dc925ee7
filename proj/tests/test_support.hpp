#ifndef DREST_TEST_SUPPORT_HPP
#define DREST_TEST_SUPPORT_HPP

#include <Eigen/Dense>
#include <random>

#include "drest/estimators.hpp"
#include "drest/glm.hpp"

namespace drest_test {

// Small synthetic dataset with moderate confounding; guaranteed non-empty
// exposure arms (regenerates with a shifted seed if a draw degenerates).
inline drest::Dataset make_random_dataset(unsigned seed, int n) {
  for (;; ++seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<> normal;
    std::uniform_real_distribution<> unif;
    Eigen::VectorXd x(n), y(n), z1(n), z2(n);
    for (int i = 0; i < n; ++i) {
      z1[i] = normal(gen);
      z2[i] = unif(gen) < 0.5 ? 1.0 : 0.0;
      const double e = drest::expit(0.3 + 0.8 * z1[i] - 0.5 * z2[i]);
      x[i] = unif(gen) < e ? 1.0 : 0.0;
      y[i] = 1.0 + 2.0 * z1[i] + z2[i] + 1.5 * x[i] + 0.8 * normal(gen);
    }
    if (x.sum() < 2 || x.sum() > n - 2) continue;
    drest::Dataset d;
    d.set_exposure("x", x);
    d.set_outcome("y", y);
    d.add_covariate("z1", z1);
    d.add_covariate("z2", z2);
    return d;
  }
}

inline drest::AnalysisSpec basic_spec() {
  drest::AnalysisSpec spec;
  spec.propensity = drest::ModelSpec::parse("1, z1, z2", "x");
  spec.outcome = drest::ModelSpec::parse("1, x, z1, z2", "y");
  spec.outcome_link = drest::Link::Identity;
  spec.tmle_stage1_link = drest::Link::Logit;
  return spec;
}

// Independent route for the targeting root: bisection on the monotone
// one-dimensional estimating equation over [-20, 20].
inline double bisect_targeting_eta(const Eigen::VectorXd& pseudo,
                                   const Eigen::VectorXd& weights,
                                   const Eigen::VectorXd& ystar) {
  auto f = [&](double eta) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < pseudo.size(); ++i)
      sum += weights[i] *
             (ystar[i] - drest::expit(eta + std::log(pseudo[i] / (1.0 - pseudo[i]))));
    return sum;
  };
  double lo = -20.0, hi = 20.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace drest_test

#endif
