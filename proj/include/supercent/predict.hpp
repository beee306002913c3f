#pragma once

#include <Eigen/Dense>

#include "supercent/numeric.hpp"
#include "supercent/two_stage.hpp"

namespace supercent {

/// Training network augmented with n_new nodes; the first n_train rows and
/// columns are the training nodes.
struct AugmentedNetwork {
  Eigen::MatrixXd a_all;
  Eigen::Index n_train = 0;
  Eigen::Index n_new = 0;

  void validate() const;
};

struct NewCentralities {
  Eigen::VectorXd u_star;
  Eigen::VectorXd v_star;
};

/// Leading singular vectors of the augmented network, sign-matched to the
/// fitted training centralities, sliced to the new nodes and rescaled by
/// √n_train / ‖training slice‖.
NewCentralities estimate_new_centralities(const AugmentedNetwork& aug, const Eigen::VectorXd& u_ref,
                                          const Eigen::VectorXd& v_ref,
                                          const SvdOptions& svd = {});

// Same, from the leading triple of the augmented network (rows already in
// training-then-new order).
NewCentralities new_centralities_from_triple(const Eigen::VectorXd& u_all,
                                             const Eigen::VectorXd& v_all, Eigen::Index n_train,
                                             const Eigen::VectorXd& u_ref,
                                             const Eigen::VectorXd& v_ref);

/// X*β̂_x + u*β̂_u + v*β̂_v.
Eigen::VectorXd predict_response(const Eigen::MatrixXd& x_star, const Eigen::VectorXd& u_star,
                                 const Eigen::VectorXd& v_star, const FitResult& fit);

}  // namespace supercent
