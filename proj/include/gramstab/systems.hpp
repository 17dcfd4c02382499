#pragma once

// Benchmark control pairs: generators of isometric groups (skew in a suitable
// energy inner product) paired with bounded control matrices.

#include <cstdint>
#include <string_view>
#include <vector>

#include "gramstab/system_model.hpp"

namespace gramstab {

enum class SystemKind { kScalar, kRotation, kOscillatorChain, kWave1d };

SystemKind parse_system_kind(std::string_view name);

struct SystemParams {
  int n = 1;
  double stiffness = 1.0;
  /// 1-based node indices receiving a control input. Empty means "all nodes"
  /// for the oscillator chain; it is an error for the wave equation.
  std::vector<int> support;
  double scale = 1.0;
};

/// A = [0], B = [1].
SystemModel scalar_system();

/// A = [[0, 1], [-1, 0]], B = (1, 0)^T.
SystemModel rotation_system();

/// n unit masses joined by springs of the given stiffness, both ends fixed.
/// State is (positions; velocities); each supported mass receives its own
/// force input.
SystemModel oscillator_chain(int n, double stiffness, std::vector<int> support);

/// Finite-difference wave equation u_tt = u_xx on [0, 1] with Dirichlet ends,
/// n interior nodes and spacing h = 1 / (n + 1). State is (u; u_t) of size 2n.
/// Each node in `support` gets a force input of magnitude scale / h, which
/// mimics the growth of a boundary control operator under refinement.
SystemModel wave_1d(int n, const std::vector<int>& support, double scale);

SystemModel build_system(SystemKind kind, const SystemParams& params);

/// A = S - S^T with S_ij ~ N(0, 1/n), B ~ N(0, 1) of size n x m. Draws are
/// repeated until the unweighted Gramian on [0, 5] has c2 / c1 >= 1e-6.
/// Identical seeds yield identical systems.
SystemModel random_observable_system(int n, int m, std::uint64_t seed);

}  // namespace gramstab
