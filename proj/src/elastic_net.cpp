#include "dyntex/elastic_net.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>

#include <Eigen/Cholesky>

#include "dyntex/exceptions.hpp"
#include "dyntex/parallel.hpp"

namespace dyntex {

namespace {

double soft_threshold(double t, double tau) {
  if (t > tau) return t - tau;
  if (t < -tau) return t + tau;
  return 0.0;
}

void check_params(double l1, double l2) {
  if (!(l1 > 0.0) || !std::isfinite(l1)) throw ConfigError("lambda1 must be > 0");
  if (!(l2 > 0.0) || !std::isfinite(l2)) throw ConfigError("lambda2 must be > 0");
  if (l2 >= l1 / 10.0) {
    std::cerr << "warning: lambda2 = " << l2 << " is not below lambda1/10 = " << l1 / 10.0
              << "; sparse solutions want a dominant l1 term\n";
  }
}

// Max KKT violation given the gradient of the smooth part, g = Dᵀ(Dx - y).
double violation_from_gradient(const Eigen::VectorXd& gradient, const Eigen::VectorXd& x,
                               double l1, double l2) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double v;
    if (x[i] != 0.0) {
      v = std::abs(gradient[i] + l2 * x[i] + l1 * (x[i] > 0.0 ? 1.0 : -1.0));
    } else {
      v = std::max(0.0, std::abs(gradient[i]) - l1);
    }
    worst = std::max(worst, v);
  }
  return worst;
}

} // namespace

ElasticNetParams::ElasticNetParams(double l1, double l2) : lambda1(l1), lambda2(l2) {
  check_params(l1, l2);
}

ElasticNetParams::ElasticNetParams(double l1, double l2, double kkt_tol, int sweeps)
    : lambda1(l1), lambda2(l2), kkt_tolerance(kkt_tol), max_sweeps(sweeps) {
  check_params(l1, l2);
  if (!(kkt_tolerance > 0.0)) throw ConfigError("kkt_tolerance must be > 0");
  if (max_sweeps < 1) throw ConfigError("max_sweeps must be >= 1");
}

SparseCode SparseCode::from_dense(const Eigen::VectorXd& x, double zero_tol) {
  SparseCode code;
  code.values = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) <= zero_tol) {
      code.values[i] = 0.0;
    } else {
      code.support.push_back(static_cast<int>(i));
      code.signs.push_back(x[i] > 0.0 ? 1 : -1);
    }
  }
  return code;
}

namespace {

// On a stable active set, coordinate descent only crawls toward the fixed
// point; the minimizer restricted to that set has a closed form. Solve it,
// and accept only if the signs survive and the full KKT certificate holds.
std::optional<Eigen::VectorXd> closed_form_polish(const Eigen::MatrixXd& gram,
                                                  const Eigen::VectorXd& correl,
                                                  const std::vector<int>& support,
                                                  const Eigen::VectorXd& x,
                                                  const ElasticNetParams& p,
                                                  double* violation_out) {
  const int s = static_cast<int>(support.size());
  Eigen::MatrixXd active_gram(s, s);
  Eigen::VectorXd rhs(s);
  for (int a = 0; a < s; ++a) {
    const int col = support[static_cast<std::size_t>(a)];
    for (int b = 0; b < s; ++b) active_gram(a, b) = gram(col, support[static_cast<std::size_t>(b)]);
    rhs[a] = correl[col] - p.lambda1 * (x[col] > 0.0 ? 1.0 : -1.0);
  }
  active_gram.diagonal().array() += p.lambda2;
  const Eigen::VectorXd solved = Eigen::LDLT<Eigen::MatrixXd>(active_gram).solve(rhs);

  Eigen::VectorXd candidate = Eigen::VectorXd::Zero(correl.size());
  for (int a = 0; a < s; ++a) {
    const int col = support[static_cast<std::size_t>(a)];
    if (solved[a] == 0.0 || (solved[a] > 0.0) != (x[col] > 0.0)) return std::nullopt;
    candidate[col] = solved[a];
  }
  const double violation =
      violation_from_gradient(gram * candidate - correl, candidate, p.lambda1, p.lambda2);
  if (violation > p.kkt_tolerance) return std::nullopt;
  *violation_out = violation;
  return candidate;
}

std::vector<int> nonzero_pattern(const Eigen::VectorXd& x) {
  std::vector<int> pattern;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] != 0.0) pattern.push_back(static_cast<int>(i));
  }
  return pattern;
}

// Cyclic coordinate descent on the precomputed Gram matrix. `gram` is DᵀD,
// `correl` is Dᵀy. Returns the dense solution; the caller converts to a
// SparseCode. Failure is reported through `final_violation`.
std::optional<Eigen::VectorXd> coordinate_descent(const Eigen::MatrixXd& gram,
                                                  const Eigen::VectorXd& correl,
                                                  const ElasticNetParams& p,
                                                  double* final_violation) {
  const Eigen::Index k = correl.size();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd gram_x = Eigen::VectorXd::Zero(k); // G·x, updated incrementally
  std::vector<int> previous_pattern;

  for (int sweep = 0; sweep < p.max_sweeps; ++sweep) {
    for (Eigen::Index i = 0; i < k; ++i) {
      // Partial correlation with coordinate i removed.
      const double rho = correl[i] - gram_x[i] + gram(i, i) * x[i];
      const double updated = soft_threshold(rho, p.lambda1) / (gram(i, i) + p.lambda2);
      const double delta = updated - x[i];
      if (delta != 0.0) {
        gram_x += delta * gram.col(i);
        x[i] = updated;
      }
    }
    // Certify with a fresh gradient so incremental drift cannot fake
    // convergence.
    gram_x.noalias() = gram * x;
    const double violation = violation_from_gradient(gram_x - correl, x, p.lambda1, p.lambda2);
    *final_violation = violation;
    if (violation <= p.kkt_tolerance) return x;

    std::vector<int> pattern = nonzero_pattern(x);
    if (!pattern.empty() && pattern == previous_pattern) {
      if (auto polished = closed_form_polish(gram, correl, pattern, x, p, final_violation)) {
        return polished;
      }
    }
    previous_pattern = std::move(pattern);
  }
  return std::nullopt;
}

} // namespace

SparseCode solve(const ObliqueDictionary& dict, const Eigen::VectorXd& y,
                 const ElasticNetParams& params) {
  const Eigen::MatrixXd& d = dict.matrix();
  if (y.size() != d.rows()) {
    throw DataError("signal length " + std::to_string(y.size()) + " does not match dictionary rows " +
                    std::to_string(d.rows()));
  }
  if (!y.allFinite()) throw DataError("signal contains non-finite entries");

  const Eigen::MatrixXd gram = d.transpose() * d;
  const Eigen::VectorXd correl = d.transpose() * y;
  double violation = 0.0;
  auto x = coordinate_descent(gram, correl, params, &violation);
  if (!x) {
    std::ostringstream msg;
    msg << "elastic net did not converge in " << params.max_sweeps
        << " sweeps; final KKT violation " << violation << " > " << params.kkt_tolerance;
    throw NumericError(msg.str());
  }
  return SparseCode::from_dense(*x);
}

Eigen::VectorXd closed_form_on_support(const ObliqueDictionary& dict, const Eigen::VectorXd& y,
                                       const std::vector<int>& support,
                                       const std::vector<int>& signs,
                                       const ElasticNetParams& params) {
  if (support.empty()) throw DataError("closed form needs a non-empty support");
  if (signs.size() != support.size()) throw DataError("signs and support sizes differ");
  const Eigen::MatrixXd& d = dict.matrix();
  const int s = static_cast<int>(support.size());

  Eigen::MatrixXd active(d.rows(), s);
  Eigen::VectorXd sign_vec(s);
  for (int j = 0; j < s; ++j) {
    const int col = support[static_cast<std::size_t>(j)];
    if (col < 0 || col >= d.cols()) throw DataError("support index out of range");
    active.col(j) = d.col(col);
    sign_vec[j] = static_cast<double>(signs[static_cast<std::size_t>(j)]);
  }
  Eigen::MatrixXd gram = active.transpose() * active;
  gram.diagonal().array() += params.lambda2;
  const Eigen::VectorXd rhs = active.transpose() * y - params.lambda1 * sign_vec;
  return Eigen::LDLT<Eigen::MatrixXd>(gram).solve(rhs);
}

std::vector<SparseCode> batch_solve(const ObliqueDictionary& dict,
                                    const Eigen::MatrixXd& observations,
                                    const ElasticNetParams& params) {
  const Eigen::MatrixXd& d = dict.matrix();
  if (observations.rows() != d.rows()) {
    throw DataError("observation rows do not match dictionary rows");
  }
  const int cols = static_cast<int>(observations.cols());
  // Shared across columns: the Gram matrix depends only on the dictionary.
  const Eigen::MatrixXd gram = d.transpose() * d;

  std::vector<SparseCode> codes(static_cast<std::size_t>(cols));
  std::vector<std::string> failures;
  std::mutex failures_mutex;
  parallel_index_for(cols, [&](int j) {
    const Eigen::VectorXd y = observations.col(j);
    if (!y.allFinite()) {
      std::lock_guard<std::mutex> lock(failures_mutex);
      failures.push_back("column " + std::to_string(j) + ": non-finite entries");
      return;
    }
    const Eigen::VectorXd correl = d.transpose() * y;
    double violation = 0.0;
    auto x = coordinate_descent(gram, correl, params, &violation);
    if (!x) {
      std::ostringstream msg;
      msg << "column " << j << ": elastic net did not converge (final KKT violation " << violation
          << ")";
      std::lock_guard<std::mutex> lock(failures_mutex);
      failures.push_back(msg.str());
      return;
    }
    codes[static_cast<std::size_t>(j)] = SparseCode::from_dense(*x);
  });
  if (!failures.empty()) {
    std::sort(failures.begin(), failures.end());
    throw NumericError("batch solve failed: " + failures.front());
  }
  return codes;
}

double kkt_violation(const ObliqueDictionary& dict, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& x, const ElasticNetParams& params) {
  const Eigen::MatrixXd& d = dict.matrix();
  const Eigen::VectorXd gradient = d.transpose() * (d * x - y);
  return violation_from_gradient(gradient, x, params.lambda1, params.lambda2);
}

} // namespace dyntex
