#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include <Eigen/Dense>

#include "lmax/ensemble.hpp"

namespace lmax::io {

// Binary layout, all little-endian:
//   bytes  0..7   magic "LMAXDMAT"
//   bytes  8..11  format version (u32, currently 1)
//   bytes 12..15  reserved, zero
//   then p and n as u64, then p*n IEEE-754 doubles in row-major order.
inline constexpr std::array<char, 8> kMagic{'L', 'M', 'A', 'X', 'D', 'M', 'A', 'T'};
inline constexpr std::uint32_t kFormatVersion = 1;

void write_binary(std::ostream& out, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_binary(std::istream& in);

void write_binary(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_binary(const std::filesystem::path& path);

/// One line per matrix row, comma separated, shortest round-trip decimal.
void write_csv(std::ostream& out, const Eigen::MatrixXd& m);
void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);

inline DataMatrix read_data_matrix(const std::filesystem::path& path) {
  return DataMatrix::from_values(read_binary(path));
}

/// printf("%.17g"); bit-exact on parse-back.
std::string format_double(double x);

}  // namespace lmax::io
