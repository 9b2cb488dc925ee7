#include "drest/model_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace drest {

namespace {

std::string strip(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == sep && depth == 0) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'))
      return false;
  return true;
}

Term parse_term(const std::string& raw) {
  const std::string text = strip(raw);
  if (text.empty()) throw InputError("empty model term");
  Term term;
  if (text == "1") {
    term.kind = Term::Kind::Intercept;
    return term;
  }
  if (text.rfind("rcs(", 0) == 0) {
    if (text.back() != ')') throw InputError("malformed spline term '" + text + "'");
    const std::string inner = text.substr(4, text.size() - 5);
    const auto parts = split(inner, ',');
    if (parts.size() != 2)
      throw InputError("spline term needs 'rcs(name, p1 p2 ...)': '" + text + "'");
    term.kind = Term::Kind::Spline;
    term.names.push_back(strip(parts[0]));
    if (!valid_name(term.names[0]))
      throw InputError("bad covariate name in spline term '" + text + "'");
    std::istringstream ps(parts[1]);
    double p;
    while (ps >> p) term.percentiles.push_back(p);
    if (!ps.eof()) throw InputError("bad percentile list in '" + text + "'");
    if (term.percentiles.size() < 3)
      throw InputError("spline needs at least 3 knot percentiles: '" + text + "'");
    for (std::size_t i = 0; i < term.percentiles.size(); ++i) {
      if (term.percentiles[i] <= 0.0 || term.percentiles[i] >= 100.0)
        throw InputError("percentiles must lie in (0,100): '" + text + "'");
      if (i > 0 && term.percentiles[i] <= term.percentiles[i - 1])
        throw InputError("percentiles must be strictly increasing: '" + text + "'");
    }
    return term;
  }
  const auto factors = split(text, '*');
  if (factors.size() > 1) {
    term.kind = Term::Kind::Product;
    for (const auto& f : factors) {
      const std::string name = strip(f);
      if (!valid_name(name)) throw InputError("bad factor name in '" + text + "'");
      term.names.push_back(name);
    }
    return term;
  }
  if (!valid_name(text)) throw InputError("bad covariate name '" + text + "'");
  term.kind = Term::Kind::Covariate;
  term.names.push_back(text);
  return term;
}

// Canonical key for duplicate detection: product factor order is immaterial.
std::string term_key(const Term& t) {
  std::string key;
  switch (t.kind) {
    case Term::Kind::Intercept:
      return "1";
    case Term::Kind::Covariate:
      return "c:" + t.names[0];
    case Term::Kind::Product: {
      std::vector<std::string> sorted = t.names;
      std::sort(sorted.begin(), sorted.end());
      key = "p:";
      for (const auto& n : sorted) key += n + "*";
      return key;
    }
    case Term::Kind::Spline: {
      key = "s:" + t.names[0] + ":";
      for (double p : t.percentiles) key += std::to_string(p) + ",";
      return key;
    }
  }
  return key;
}

}  // namespace

bool Term::operator==(const Term& other) const {
  return term_key(*this) == term_key(other);
}

ModelSpec ModelSpec::parse(const std::string& text, std::optional<std::string> response) {
  ModelSpec spec;
  spec.response = std::move(response);
  for (const auto& part : split(text, ','))
    spec.terms.push_back(parse_term(part));
  if (spec.terms.empty()) throw InputError("model spec has no terms");

  std::set<std::string> seen;
  int intercepts = 0;
  for (const auto& t : spec.terms) {
    if (t.kind == Term::Kind::Intercept && ++intercepts > 1)
      throw InputError("more than one intercept term");
    if (!seen.insert(term_key(t)).second)
      throw InputError("duplicate model term '" + term_key(t) + "'");
  }
  return spec;
}

void ModelSpec::validate(const Dataset& data) const {
  if (terms.empty()) throw InputError("model spec has no terms");
  std::set<std::string> seen;
  int intercepts = 0;
  for (const auto& t : terms) {
    if (t.kind == Term::Kind::Intercept && ++intercepts > 1)
      throw InputError("more than one intercept term");
    if (!seen.insert(term_key(t)).second)
      throw InputError("duplicate model term '" + term_key(t) + "'");
    for (const auto& name : t.names)
      if (!data.has_column(name))
        throw SchemaError("model term references unknown covariate '" + name + "'");
  }
}

std::string ModelSpec::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const Term& t = terms[i];
    if (i > 0) out += ", ";
    switch (t.kind) {
      case Term::Kind::Intercept:
        out += "1";
        break;
      case Term::Kind::Covariate:
        out += t.names[0];
        break;
      case Term::Kind::Product:
        for (std::size_t j = 0; j < t.names.size(); ++j) {
          if (j > 0) out += "*";
          out += t.names[j];
        }
        break;
      case Term::Kind::Spline: {
        out += "rcs(" + t.names[0] + ",";
        for (double p : t.percentiles) {
          std::ostringstream os;
          os << " " << p;
          out += os.str();
        }
        out += ")";
        break;
      }
    }
  }
  return out;
}

Eigen::VectorXd compute_knots(const Eigen::VectorXd& values,
                              const Eigen::VectorXd& percentiles) {
  const Eigen::Index n = values.size();
  const Eigen::Index k = percentiles.size();
  if (n == 0) throw InputError("cannot compute knots of an empty vector");
  if (k < 3) throw InputError("need at least 3 knot percentiles");
  for (Eigen::Index j = 0; j < k; ++j) {
    if (percentiles[j] <= 0.0 || percentiles[j] >= 100.0)
      throw InputError("percentiles must lie in (0,100)");
    if (j > 0 && percentiles[j] <= percentiles[j - 1])
      throw InputError("percentiles must be strictly increasing");
  }

  std::vector<double> sorted(values.data(), values.data() + n);
  for (double v : sorted)
    if (!std::isfinite(v)) throw InputError("non-finite value in knot computation");
  std::sort(sorted.begin(), sorted.end());

  Eigen::Index distinct = 1;
  for (std::size_t i = 1; i < sorted.size(); ++i)
    distinct += (sorted[i] != sorted[i - 1]);
  if (distinct < k)
    throw DegenerateKnotsError("only " + std::to_string(distinct) +
                               " distinct values for " + std::to_string(k) + " knots");

  Eigen::VectorXd knots(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double h = percentiles[j] / 100.0 * static_cast<double>(n - 1);
    const auto lo = static_cast<Eigen::Index>(std::floor(h));
    const auto hi = std::min(lo + 1, n - 1);
    const double frac = h - static_cast<double>(lo);
    knots[j] = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
  }
  for (Eigen::Index j = 1; j < k; ++j)
    if (knots[j] <= knots[j - 1])
      throw DegenerateKnotsError("percentile knots are not strictly increasing");
  return knots;
}

Eigen::MatrixXd rcs_basis(const Eigen::VectorXd& values, const SplineBasis& basis) {
  const Eigen::Index n = values.size();
  const Eigen::Index k = basis.knots.size();
  if (k < 3) throw InputError("spline basis needs at least 3 knots");
  for (Eigen::Index j = 1; j < k; ++j)
    if (basis.knots[j] <= basis.knots[j - 1])
      throw InputError("spline knots must be strictly increasing");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!std::isfinite(values[i]))
      throw InputError("non-finite value in spline evaluation");

  const auto& t = basis.knots;
  const double norm = (t[k - 1] - t[0]) * (t[k - 1] - t[0]);
  auto cube_plus = [](double u) { return u > 0.0 ? u * u * u : 0.0; };

  Eigen::MatrixXd out(n, k - 1);
  out.col(0) = values;
  for (Eigen::Index j = 0; j + 2 < k; ++j) {
    const double span = t[k - 1] - t[k - 2];
    const double w_last = (t[k - 1] - t[j]) / span;
    const double w_prev = (t[k - 2] - t[j]) / span;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = values[i];
      out(i, j + 1) = (cube_plus(x - t[j]) - w_last * cube_plus(x - t[k - 2]) +
                       w_prev * cube_plus(x - t[k - 1])) /
                      norm;
    }
  }
  return out;
}

DesignMatrix build_design(const Dataset& data, const ModelSpec& spec) {
  spec.validate(data);
  const Eigen::Index n = data.size();

  std::vector<std::pair<std::string, Eigen::VectorXd>> cols;
  for (const auto& term : spec.terms) {
    switch (term.kind) {
      case Term::Kind::Intercept:
        cols.emplace_back("1", Eigen::VectorXd::Ones(n));
        break;
      case Term::Kind::Covariate:
        cols.emplace_back(term.names[0], data.column(term.names[0]));
        break;
      case Term::Kind::Product: {
        Eigen::VectorXd v = data.column(term.names[0]);
        std::string label = term.names[0];
        for (std::size_t j = 1; j < term.names.size(); ++j) {
          v = v.cwiseProduct(data.column(term.names[j]));
          label += "*" + term.names[j];
        }
        cols.emplace_back(label, std::move(v));
        break;
      }
      case Term::Kind::Spline: {
        const Eigen::VectorXd& v = data.column(term.names[0]);
        Eigen::VectorXd pcts(term.percentiles.size());
        for (std::size_t j = 0; j < term.percentiles.size(); ++j)
          pcts[j] = term.percentiles[j];
        SplineBasis basis{term.names[0], compute_knots(v, pcts)};
        const Eigen::MatrixXd block = rcs_basis(v, basis);
        for (Eigen::Index j = 0; j < block.cols(); ++j) {
          // rms-style labels: name, name', name'', ...
          std::string label = term.names[0] + std::string(j, '\'');
          cols.emplace_back(std::move(label), block.col(j));
        }
        break;
      }
    }
  }

  DesignMatrix design;
  design.values.resize(n, static_cast<Eigen::Index>(cols.size()));
  design.labels.reserve(cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    design.values.col(static_cast<Eigen::Index>(j)) = cols[j].second;
    design.labels.push_back(cols[j].first);
  }
  if (!design.values.allFinite())
    throw InputError("design matrix contains non-finite entries");
  return design;
}

}  // namespace drest
