#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>

#include "relay/policy.hpp"

namespace relay {

// Solves A x = b for symmetric positive definite A given only v -> A v.
// Stops after max_iters or when the residual norm falls below tol * |b|.
Eigen::VectorXd conjugate_gradient(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
    const Eigen::VectorXd& b, int max_iters, double tol = 1e-10);

// Least-squares value baseline on simple trajectory features:
// [1, x, tau, tau^2, |s|^2, |g|^2] where x = [state | goal] and tau is the
// normalized time inside the episode the sample belongs to.
struct LinearBaseline {
  Eigen::VectorXd coef;
  static Eigen::MatrixXd features(const Eigen::MatrixXd& X,
                                  const Eigen::VectorXd& tau, int state_dim);
  static LinearBaseline fit(const Eigen::MatrixXd& features,
                            const Eigen::VectorXd& returns,
                            double ridge = 1e-6);
  Eigen::VectorXd predict(const Eigen::MatrixXd& features) const;
};

struct NpgSettings {
  double kl_step = 0.01;   // delta; accepted steps keep KL(old||new) <= 2*delta
  int cg_iters = 10;
  double cg_damping = 1e-4;
  int max_backtracks = 12;
};

struct NpgBatch {
  Eigen::MatrixXd X;          // [state | goal] rows
  Eigen::MatrixXd A;          // taken actions
  Eigen::VectorXd advantage;  // standardized advantages
};

struct DemoBatch {
  Eigen::MatrixXd X;
  Eigen::MatrixXd A;
  double weight = 0.0;  // lambda
};

struct NpgOutcome {
  bool accepted = false;
  double kl = 0.0;
  double grad_norm = 0.0;
  double natural_norm = 0.0;
  double step_scale = 0.0;
  int backtracks = 0;
};

// One demonstration-augmented natural-gradient ascent step. The gradient is
// the advantage-weighted score over the rollout batch plus, when demo.weight
// is positive, the demo max-likelihood score. Curvature uses score outer
// products over (fisher_X, fisher_A); the step is scaled to the KL budget
// and halved until the measured KL fits within twice of it.
NpgOutcome npg_step(GaussianPolicy& policy, const NpgBatch& batch,
                    const std::optional<DemoBatch>& demo,
                    const Eigen::MatrixXd& fisher_X,
                    const Eigen::MatrixXd& fisher_A,
                    const NpgSettings& settings);

}  // namespace relay
