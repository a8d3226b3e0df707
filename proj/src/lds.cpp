#include "dyntex/lds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "dyntex/exceptions.hpp"

namespace dyntex {

namespace {

constexpr double kRankCutoff = 1e-10; // relative to the largest singular value

Eigen::MatrixXd pseudoinverse(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? kRankCutoff * sv[0] : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > cutoff) inv[i] = 1.0 / sv[i];
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

} // namespace

LdsModel fit_lds(const FrameSequence& sequence, int k) {
  const Eigen::MatrixXd& y = sequence.data();
  const Eigen::Index m = y.rows();
  const Eigen::Index frames = y.cols();
  if (k < 1 || k > std::min(m, frames)) {
    throw ConfigError("k must satisfy 1 <= k <= min(m, n+1) = " +
                      std::to_string(std::min(m, frames)));
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(y, Eigen::ComputeThinU);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = kRankCutoff * sv[0];
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > cutoff) ++rank;
  }
  if (k > rank) {
    throw DataError("k = " + std::to_string(k) + " exceeds the numerical rank " +
                    std::to_string(rank) + " of the observations");
  }

  LdsModel model;
  model.pcs = svd.matrixU().leftCols(k);
  model.states = model.pcs.transpose() * y;
  model.singular_values = sv.head(k);
  const Eigen::Index n = frames - 1;
  model.transition = model.states.rightCols(n) * pseudoinverse(model.states.leftCols(n));
  model.height = sequence.height();
  model.width = sequence.width();
  return model;
}

double martin_distance(const LdsModel& a, const LdsModel& b, int horizon) {
  if (a.pcs.rows() != b.pcs.rows()) {
    throw DataError("models observe different pixel dimensions");
  }
  if (horizon < 1) throw ConfigError("horizon must be >= 1");

  const auto observability = [horizon](const LdsModel& model) {
    const Eigen::Index m = model.pcs.rows();
    const Eigen::Index k = model.pcs.cols();
    Eigen::MatrixXd stacked(m * horizon, k);
    Eigen::MatrixXd block = model.pcs;
    for (int j = 0; j < horizon; ++j) {
      stacked.middleRows(j * m, m) = block;
      if (j + 1 < horizon) block = block * model.transition;
    }
    return stacked;
  };

  const Eigen::MatrixXd oa = observability(a);
  const Eigen::MatrixXd ob = observability(b);
  if (oa.norm() == 0.0 || ob.norm() == 0.0) {
    return std::numeric_limits<double>::infinity();
  }

  const auto orthonormalize = [](const Eigen::MatrixXd& o) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(o);
    Eigen::MatrixXd thin_q =
        qr.householderQ() * Eigen::MatrixXd::Identity(o.rows(), o.cols());
    return thin_q;
  };

  const Eigen::MatrixXd qa = orthonormalize(oa);
  const Eigen::MatrixXd qb = orthonormalize(ob);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(qa.transpose() * qb);
  const Eigen::VectorXd& cosines = svd.singularValues();

  double distance = 0.0;
  for (Eigen::Index i = 0; i < cosines.size(); ++i) {
    const double c = std::clamp(cosines[i], 0.0, 1.0);
    distance -= std::log(std::max(c * c, 1e-12));
  }
  return std::max(distance, 0.0);
}

} // namespace dyntex
