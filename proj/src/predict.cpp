#include "supercent/predict.hpp"

#include <cmath>
#include <string>

#include "supercent/errors.hpp"

namespace supercent {

void AugmentedNetwork::validate() const {
  if (a_all.rows() != a_all.cols()) throw InputError("augmented network must be square");
  if (n_train + n_new != a_all.rows())
    throw InputError("augmented network: n_train + n_new must equal its dimension");
  if (n_train < 2) throw InputError("augmented network: need at least 2 training nodes");
  if (n_new < 0) throw InputError("augmented network: negative n_new");
  if (!a_all.allFinite()) throw InputError("augmented network: non-finite entries");
}

namespace {

Eigen::VectorXd align_slice(const Eigen::VectorXd& all, Eigen::Index n_train,
                            const Eigen::VectorXd& ref, const char* which) {
  if (ref.size() != n_train)
    throw InputError(std::string("reference ") + which + " must have n_train entries");
  const auto head = all.head(n_train);
  const double inner = ref.dot(head);
  if (inner == 0.0)
    throw DegenerateError(std::string("sign of new ") + which +
                          " is ambiguous: reference is orthogonal to the training slice");
  const double head_norm = head.norm();
  const double scale = (inner > 0 ? 1.0 : -1.0) * std::sqrt(static_cast<double>(n_train)) / head_norm;
  return all.tail(all.size() - n_train) * scale;
}

}  // namespace

NewCentralities new_centralities_from_triple(const Eigen::VectorXd& u_all,
                                             const Eigen::VectorXd& v_all, Eigen::Index n_train,
                                             const Eigen::VectorXd& u_ref,
                                             const Eigen::VectorXd& v_ref) {
  return {align_slice(u_all, n_train, u_ref, "hub centrality"),
          align_slice(v_all, n_train, v_ref, "authority centrality")};
}

NewCentralities estimate_new_centralities(const AugmentedNetwork& aug, const Eigen::VectorXd& u_ref,
                                          const Eigen::VectorXd& v_ref, const SvdOptions& svd) {
  aug.validate();
  const auto triple = leading_singular_triple(aug.a_all, svd.tol, svd.max_iter);
  return new_centralities_from_triple(triple.u, triple.v, aug.n_train, u_ref, v_ref);
}

Eigen::VectorXd predict_response(const Eigen::MatrixXd& x_star, const Eigen::VectorXd& u_star,
                                 const Eigen::VectorXd& v_star, const FitResult& fit) {
  if (x_star.cols() != fit.beta_x_hat.size())
    throw InputError("predict_response: X* has " + std::to_string(x_star.cols()) +
                     " columns, fit expects " + std::to_string(fit.beta_x_hat.size()));
  if (u_star.size() != x_star.rows() || v_star.size() != x_star.rows())
    throw InputError("predict_response: centralities and X* row counts differ");
  return x_star * fit.beta_x_hat + u_star * fit.beta_u_hat + v_star * fit.beta_v_hat;
}

}  // namespace supercent
