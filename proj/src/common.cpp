#include "bhcoreset/types.hpp"

namespace bhc {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + (stream + 1) * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double pairwise_sum(const double* data, Index n, Index stride) {
  if (n <= 16) {
    double s = 0.0;
    for (Index i = 0; i < n; ++i) s += data[i * stride];
    return s;
  }
  const Index half = n / 2;
  return pairwise_sum(data, half, stride) + pairwise_sum(data + half * stride, n - half, stride);
}

}  // namespace bhc
