#pragma once

#include <cstdint>
#include <filesystem>

#include "bhcoreset/bhs_geometry.hpp"

namespace bhc {

// Flat binary layout, little-endian:
//   char[8]  magic "BHSCMAT\0"
//   uint32   version (1)
//   uint32   payload kind (1 = features, 2 = gram, 3 = samples)
//   uint64   rows, cols, seed
//   float64  rows * cols values, row-major
// Feature files append `cols` float64 column means after the matrix.
enum class MatrixPayload : std::uint32_t { Features = 1, Gram = 2, Samples = 3 };

inline constexpr std::uint32_t kMatrixFormatVersion = 1;

void save_features(const std::filesystem::path& path, const FeatureMatrix& features);
FeatureMatrix load_features(const std::filesystem::path& path);

void save_gram(const std::filesystem::path& path, const GramMatrix& gram);
GramMatrix load_gram(const std::filesystem::path& path);

void save_samples(const std::filesystem::path& path, const ParameterSamples& samples);
ParameterSamples load_samples(const std::filesystem::path& path);

// Plain CSV, '.' decimals, shortest round-trip numbers, '\n' line endings.
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);

}  // namespace bhc
