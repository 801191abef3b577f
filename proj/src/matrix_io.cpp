#include "bhcoreset/matrix_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <string>

#include "bhcoreset/errors.hpp"

namespace bhc {
namespace {

static_assert(std::endian::native == std::endian::little, "matrix files are little-endian");

constexpr std::array<char, 8> kMagic{'B', 'H', 'S', 'C', 'M', 'A', 'T', '\0'};

struct Header {
  MatrixPayload payload;
  std::uint64_t rows;
  std::uint64_t cols;
  std::uint64_t seed;
};

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw InputError("truncated matrix file '" + path.string() + "'");
  return v;
}

std::ofstream open_out(const std::filesystem::path& path, const Header& h) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(kMagic.data(), kMagic.size());
  put(out, kMatrixFormatVersion);
  put(out, static_cast<std::uint32_t>(h.payload));
  put(out, h.rows);
  put(out, h.cols);
  put(out, h.seed);
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, MatrixPayload expected, Header& h) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw InputError("'" + path.string() + "' is not a matrix file");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kMatrixFormatVersion)
    throw InputError("unsupported matrix file version " + std::to_string(version));
  h.payload = static_cast<MatrixPayload>(get<std::uint32_t>(in, path));
  if (h.payload != expected) throw InputError("'" + path.string() + "' holds a different payload kind");
  h.rows = get<std::uint64_t>(in, path);
  h.cols = get<std::uint64_t>(in, path);
  h.seed = get<std::uint64_t>(in, path);
  return in;
}

template <class Derived>
void write_row_major(std::ofstream& out, const Eigen::MatrixBase<Derived>& m) {
  const RowMatrix rm = m;
  out.write(reinterpret_cast<const char*>(rm.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(rm.size())));
}

RowMatrix read_row_major(std::ifstream& in, const Header& h, const std::filesystem::path& path) {
  RowMatrix m(static_cast<Index>(h.rows), static_cast<Index>(h.cols));
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
  if (!in) throw InputError("truncated matrix file '" + path.string() + "'");
  return m;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

void save_features(const std::filesystem::path& path, const FeatureMatrix& f) {
  auto out = open_out(path, {MatrixPayload::Features, static_cast<std::uint64_t>(f.num_samples()),
                             static_cast<std::uint64_t>(f.num_points()), f.seed});
  write_row_major(out, f.phi);
  out.write(reinterpret_cast<const char*>(f.column_means.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(f.column_means.size())));
  finish(out, path);
}

FeatureMatrix load_features(const std::filesystem::path& path) {
  Header h{};
  auto in = open_in(path, MatrixPayload::Features, h);
  FeatureMatrix f;
  f.phi = read_row_major(in, h, path);
  f.column_means.resize(static_cast<Index>(h.cols));
  in.read(reinterpret_cast<char*>(f.column_means.data()),
          static_cast<std::streamsize>(sizeof(double) * h.cols));
  if (!in) throw InputError("truncated matrix file '" + path.string() + "'");
  f.seed = h.seed;
  f.base_tag = "file:" + path.string();
  return f;
}

void save_gram(const std::filesystem::path& path, const GramMatrix& g) {
  auto out = open_out(path, {MatrixPayload::Gram, static_cast<std::uint64_t>(g.size()),
                             static_cast<std::uint64_t>(g.size()), g.seed});
  write_row_major(out, g.k);
  finish(out, path);
}

GramMatrix load_gram(const std::filesystem::path& path) {
  Header h{};
  auto in = open_in(path, MatrixPayload::Gram, h);
  if (h.rows != h.cols) throw InputError("gram file is not square");
  GramMatrix g;
  g.k = read_row_major(in, h, path);
  g.seed = h.seed;
  g.base_tag = "file:" + path.string();
  return g;
}

void save_samples(const std::filesystem::path& path, const ParameterSamples& samples) {
  auto out = open_out(path, {MatrixPayload::Samples, static_cast<std::uint64_t>(samples.size()),
                             static_cast<std::uint64_t>(samples.dim()), samples.seed});
  write_row_major(out, samples.values);
  finish(out, path);
}

ParameterSamples load_samples(const std::filesystem::path& path) {
  Header h{};
  auto in = open_in(path, MatrixPayload::Samples, h);
  return {read_row_major(in, h, path), "file:" + path.string(), h.seed};
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::string text;
  char buf[32];
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) text += ',';
      const auto res = std::to_chars(buf, buf + sizeof buf, m(r, c));
      text.append(buf, res.ptr);
    }
    text += '\n';
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  finish(out, path);
}

}  // namespace bhc
