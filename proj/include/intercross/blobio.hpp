#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace intercross {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct IoFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raw little-endian float blobs, row-major. Frames are f32 on disk; model
// checkpoints use f64 so save/load round-trips are bit-exact.
void write_f32_rowmajor(std::ostream& out, const Matrix& m);
Matrix read_f32_rowmajor(std::istream& in, std::int64_t rows, std::int64_t cols);

void write_f64_rowmajor(std::ostream& out, const Matrix& m);
Matrix read_f64_rowmajor(std::istream& in, std::int64_t rows, std::int64_t cols);

Matrix read_f32_at(const std::string& path, std::int64_t byte_offset,
                   std::int64_t rows, std::int64_t cols);

std::int64_t file_size_bytes(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// FNV-1a over a string; used for config hashes in run.json.
std::uint64_t fnv1a64(const std::string& s);
std::string hex64(std::uint64_t v);

}  // namespace intercross
