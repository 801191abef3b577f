#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace bhc {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Rng = std::mt19937_64;

/// Counter-based split of a master seed: stream k of master s is
/// splitmix64(s + (k + 1) * golden). Distinct streams never share a state.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

// Sum with a fixed pairwise reduction order over a strided range.
double pairwise_sum(const double* data, Index n, Index stride = 1);

}  // namespace bhc
