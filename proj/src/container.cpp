#include "dfl/container.hpp"

#include <array>
#include <cstring>
#include <istream>
#include <ostream>
#include <vector>

#include "dfl/bytes.hpp"
#include "dfl/errors.hpp"

namespace dfl::container {

namespace {
constexpr std::array<char, 4> kMagic = {'D', 'F', 'L', 'B'};
}

void write_header(std::ostream& out, const Header& h) {
  std::array<uint8_t, 40> buf{};
  std::memcpy(buf.data(), kMagic.data(), 4);
  bytes::store_u16(buf.data() + 4, kVersion);
  buf[6] = static_cast<uint8_t>(h.kind);
  buf[7] = h.kernel_kind;
  bytes::store_u32(buf.data() + 8, h.rows);
  bytes::store_u32(buf.data() + 12, h.cols);
  bytes::store_f64(buf.data() + 16, h.sigma_or_lambda);
  bytes::store_u64(buf.data() + 24, h.seed);
  bytes::store_f64(buf.data() + 32, h.gamma);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("container: header write failed");
}

Header read_header(std::istream& in) {
  std::array<uint8_t, 40> buf{};
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (!in) throw ParseError("container: truncated header", 0);
  if (std::memcmp(buf.data(), kMagic.data(), 4) != 0)
    throw ParseError("container: bad magic", 0);
  const uint16_t version = bytes::load_u16(buf.data() + 4);
  if (version != kVersion)
    throw ParseError("container: unsupported version " +
                         std::to_string(version),
                     0);
  Header h;
  h.kind = static_cast<RecordKind>(buf[6]);
  h.kernel_kind = buf[7];
  h.rows = bytes::load_u32(buf.data() + 8);
  h.cols = bytes::load_u32(buf.data() + 12);
  h.sigma_or_lambda = bytes::load_f64(buf.data() + 16);
  h.seed = bytes::load_u64(buf.data() + 24);
  h.gamma = bytes::load_f64(buf.data() + 32);
  return h;
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  std::vector<uint8_t> buf(static_cast<size_t>(m.cols()) * 8);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      bytes::store_f64(buf.data() + 8 * static_cast<size_t>(j), m(i, j));
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw Error("container: matrix write failed");
}

Eigen::MatrixXd read_matrix(std::istream& in, uint32_t rows, uint32_t cols) {
  Eigen::MatrixXd m(rows, cols);
  std::vector<uint8_t> buf(static_cast<size_t>(cols) * 8);
  for (uint32_t i = 0; i < rows; ++i) {
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
    if (!in) throw ParseError("container: truncated matrix payload", 0);
    for (uint32_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          bytes::load_f64(buf.data() + 8 * static_cast<size_t>(j));
  }
  return m;
}

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
  write_matrix(out, v.transpose());
}

Eigen::VectorXd read_vector(std::istream& in, uint32_t len) {
  return read_matrix(in, 1, len).transpose();
}

}  // namespace dfl::container
