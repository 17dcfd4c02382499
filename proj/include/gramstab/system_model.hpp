#pragma once

#include <optional>
#include <string>

#include "gramstab/numerics.hpp"

namespace gramstab {

/// A finite-dimensional control pair x' = A x + B u. State and control spaces
/// are real Euclidean spaces with the standard inner product, so the duality
/// maps between a space and its dual are the identity and adjoints are
/// transposes.
struct SystemModel {
  Matrix a;  ///< n x n generator
  Matrix b;  ///< n x m control matrix
  std::string name;
  /// SPD matrix of the inner product in which `a` is skew, when known.
  std::optional<Matrix> energy_weight;
  /// Horizon at which the builder expects the observability inequality to be
  /// comfortably satisfied.
  double suggested_horizon = 1.0;

  Eigen::Index state_dim() const { return a.rows(); }
  Eigen::Index control_dim() const { return b.cols(); }

  /// Throws a dimension or domain error if the pair is malformed.
  void validate() const;
};

}  // namespace gramstab
