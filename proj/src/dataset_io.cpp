#include "rmsh/dataset_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

#include "rmsh/error.hpp"

namespace rmsh {

namespace {

constexpr char kFeatureMagic[8] = {'R', 'M', 'S', 'H', 'F', 'E', 'A', 'T'};
constexpr char kLabelMagic[8] = {'R', 'M', 'S', 'H', 'L', 'B', 'L', '0'};
constexpr std::uint16_t kFeatureVersion = 1;

void write_bytes(std::ofstream& out, const void* data, std::size_t size) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
}

void read_bytes(std::ifstream& in, void* data, std::size_t size, const std::string& what) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
  if (static_cast<std::size_t>(in.gcount()) != size) {
    throw io_error("truncated file while reading " + what);
  }
}

template <typename T>
void write_le(std::ofstream& out, T value) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
  }
  write_bytes(out, buf, sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in, const std::string& what) {
  unsigned char buf[sizeof(T)];
  read_bytes(in, buf, sizeof(T), what);
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open file: " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot create file: " + path);
  return out;
}

}  // namespace

void save_features(const std::string& path, const FeatureMatrix& features) {
  validate_finite(features);
  std::ofstream out = open_output(path);
  write_bytes(out, kFeatureMagic, sizeof(kFeatureMagic));
  write_le<std::uint16_t>(out, kFeatureVersion);
  write_le<std::uint64_t>(out, features.count());
  write_le<std::uint64_t>(out, features.dim());
  for (Eigen::Index r = 0; r < features.rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < features.rows.cols(); ++c) {
      const float v = features.rows(r, c);
      std::uint32_t bits;
      std::memcpy(&bits, &v, sizeof(bits));
      write_le<std::uint32_t>(out, bits);
    }
  }
  if (!out) throw io_error("write failed: " + path);
}

FeatureMatrix load_features(const std::string& path, Modality modality) {
  std::ifstream in = open_input(path);
  char magic[8];
  read_bytes(in, magic, sizeof(magic), "feature magic");
  if (std::memcmp(magic, kFeatureMagic, sizeof(magic)) != 0) {
    throw io_error("bad magic in feature file: " + path);
  }
  const auto version = read_le<std::uint16_t>(in, "feature version");
  if (version != kFeatureVersion) {
    throw io_error("unsupported feature file version " + std::to_string(version));
  }
  const auto n = read_le<std::uint64_t>(in, "feature row count");
  const auto d = read_le<std::uint64_t>(in, "feature dimension");
  if (n == 0 || d == 0) {
    throw io_error("feature file declares an empty matrix: " + path);
  }
  if (n > (std::uint64_t{1} << 32) || d > (std::uint64_t{1} << 24)) {
    throw io_error("feature file declares implausible dimensions: " + path);
  }
  FeatureMatrix features{Eigen::MatrixXf(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d)),
                         modality};
  for (std::uint64_t r = 0; r < n; ++r) {
    for (std::uint64_t c = 0; c < d; ++c) {
      const auto bits = read_le<std::uint32_t>(in, "feature value");
      float v;
      std::memcpy(&v, &bits, sizeof(v));
      if (!std::isfinite(v)) {
        throw io_error("non-finite feature at row " + std::to_string(r) + ", column " +
                       std::to_string(c));
      }
      features.rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return features;
}

void save_labels(const std::string& path, const LabelMatrix& labels) {
  std::ofstream out = open_output(path);
  write_bytes(out, kLabelMagic, sizeof(kLabelMagic));
  write_le<std::uint64_t>(out, labels.rows());
  write_le<std::uint64_t>(out, labels.tags());
  write_bytes(out, labels.raw().data(), labels.raw().size());
  if (!out) throw io_error("write failed: " + path);
}

LabelMatrix load_labels(const std::string& path) {
  std::ifstream in = open_input(path);
  char magic[8];
  read_bytes(in, magic, sizeof(magic), "label magic");
  if (std::memcmp(magic, kLabelMagic, sizeof(magic)) != 0) {
    throw io_error("bad magic in label file: " + path);
  }
  const auto n = read_le<std::uint64_t>(in, "label row count");
  const auto c = read_le<std::uint64_t>(in, "label tag count");
  if (n == 0 || c == 0) {
    throw io_error("label file declares an empty matrix: " + path);
  }
  if (n > (std::uint64_t{1} << 32) || c > (std::uint64_t{1} << 20)) {
    throw io_error("label file declares implausible dimensions: " + path);
  }
  std::vector<std::uint8_t> entries(n * c);
  read_bytes(in, entries.data(), entries.size(), "label entries");
  for (std::uint64_t r = 0; r < n; ++r) {
    bool any = false;
    for (std::uint64_t t = 0; t < c; ++t) {
      const std::uint8_t v = entries[r * c + t];
      if (v > 1) {
        throw io_error("label entry at row " + std::to_string(r) + ", tag " + std::to_string(t) +
                       " is not 0/1");
      }
      any = any || v == 1;
    }
    if (!any) {
      throw io_error("label row " + std::to_string(r) + " has no tags");
    }
  }
  return LabelMatrix(n, c, std::move(entries));
}

}  // namespace rmsh
