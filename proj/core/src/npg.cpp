#include "relay/npg.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace relay {

Eigen::VectorXd conjugate_gradient(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
    const Eigen::VectorXd& b, int max_iters, double tol) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd r = b;
  Eigen::VectorXd p = b;
  double rs = r.squaredNorm();
  const double threshold = tol * tol * b.squaredNorm();
  for (int i = 0; i < max_iters && rs > threshold; ++i) {
    const Eigen::VectorXd ap = apply(p);
    const double pap = p.dot(ap);
    if (pap <= 0.0 || !std::isfinite(pap)) break;  // curvature lost
    const double alpha = rs / pap;
    x += alpha * p;
    r -= alpha * ap;
    const double rs_new = r.squaredNorm();
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  return x;
}

Eigen::MatrixXd LinearBaseline::features(const Eigen::MatrixXd& X,
                                         const Eigen::VectorXd& tau,
                                         int state_dim) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd f(n, X.cols() + 5);
  f.col(0).setOnes();
  f.middleCols(1, X.cols()) = X;
  f.col(X.cols() + 1) = tau;
  f.col(X.cols() + 2) = tau.cwiseProduct(tau);
  f.col(X.cols() + 3) = X.leftCols(state_dim).rowwise().squaredNorm();
  f.col(X.cols() + 4) = X.rightCols(X.cols() - state_dim).rowwise().squaredNorm();
  return f;
}

LinearBaseline LinearBaseline::fit(const Eigen::MatrixXd& features,
                                   const Eigen::VectorXd& returns,
                                   double ridge) {
  Eigen::MatrixXd gram = features.transpose() * features;
  gram.diagonal().array() += ridge * static_cast<double>(features.rows());
  LinearBaseline baseline;
  baseline.coef = gram.ldlt().solve(features.transpose() * returns);
  return baseline;
}

Eigen::VectorXd LinearBaseline::predict(const Eigen::MatrixXd& features) const {
  return features * coef;
}

NpgOutcome npg_step(GaussianPolicy& policy, const NpgBatch& batch,
                    const std::optional<DemoBatch>& demo,
                    const Eigen::MatrixXd& fisher_X,
                    const Eigen::MatrixXd& fisher_A,
                    const NpgSettings& settings) {
  if (batch.X.rows() == 0) throw std::invalid_argument("empty NPG batch");
  NpgOutcome out;

  Eigen::VectorXd g =
      weighted_log_prob_grad(policy, batch.X, batch.A, batch.advantage).grad;
  if (demo && demo->weight > 0.0 && demo->X.rows() > 0) {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(demo->X.rows());
    g += demo->weight *
         weighted_log_prob_grad(policy, demo->X, demo->A, ones).grad;
  }
  out.grad_norm = g.norm();
  if (!std::isfinite(out.grad_norm)) return out;

  const Eigen::MatrixXd scores = score_matrix(policy, fisher_X, fisher_A);
  const double inv_n = 1.0 / static_cast<double>(scores.rows());
  auto fisher_apply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return (scores.transpose() * (scores * v)) * inv_n +
           settings.cg_damping * v;
  };

  const Eigen::VectorXd direction =
      conjugate_gradient(fisher_apply, g, settings.cg_iters);
  out.natural_norm = direction.norm();
  const double quad = g.dot(direction);
  if (quad <= 0.0 || !std::isfinite(quad)) return out;  // skip this update

  double scale = std::sqrt(2.0 * settings.kl_step / quad);
  const Eigen::VectorXd old_params = policy.params();
  GaussianPolicy old_policy = policy;

  for (int bt = 0; bt <= settings.max_backtracks; ++bt) {
    policy.params() = old_params + scale * direction;
    policy.clamp_log_std();
    const double kl = mean_kl(old_policy, policy, batch.X);
    if (std::isfinite(kl) && kl <= 2.0 * settings.kl_step) {
      out.accepted = true;
      out.kl = kl;
      out.step_scale = scale;
      out.backtracks = bt;
      return out;
    }
    scale *= 0.5;
  }
  policy.params() = old_params;  // could not fit the trust region
  out.backtracks = settings.max_backtracks + 1;
  return out;
}

}  // namespace relay
