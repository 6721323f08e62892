#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>

namespace dfl::container {

// Flat binary record: 40-byte header followed by row-major 64-bit
// little-endian floats. One format serves hypothesis batches and fitted
// models so tooling needs a single reader.
//
//   bytes 0..3   magic "DFLB"
//   bytes 4..5   version (u16)
//   byte  6      record kind (RecordKind)
//   byte  7      kernel kind (0 = none/linear features, 1 = linear kernel,
//                2 = rbf)
//   bytes 8..11  rows (u32)
//   bytes 12..15 cols (u32)
//   bytes 16..23 sigma for batches / lambda for models (f64)
//   bytes 24..31 seed (u64; 0 when not applicable)
//   bytes 32..39 gamma for rbf kernels (f64; 0 otherwise)

inline constexpr uint16_t kVersion = 1;

enum class RecordKind : uint8_t {
  linear_batch = 1,
  kernel_batch = 2,
  linear_model = 3,
  kernel_model = 4,
  logistic_model = 5,
};

struct Header {
  RecordKind kind;
  uint8_t kernel_kind = 0;
  uint32_t rows = 0;
  uint32_t cols = 0;
  double sigma_or_lambda = 0.0;
  uint64_t seed = 0;
  double gamma = 0.0;
};

void write_header(std::ostream& out, const Header& h);
Header read_header(std::istream& in);  // throws ParseError on bad magic/version

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(std::istream& in, uint32_t rows, uint32_t cols);

void write_vector(std::ostream& out, const Eigen::VectorXd& v);
Eigen::VectorXd read_vector(std::istream& in, uint32_t len);

}  // namespace dfl::container
