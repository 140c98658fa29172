#include "intercross/blobio.hpp"

#include <bit>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "frame and checkpoint blobs are little-endian raw floats");

namespace intercross {

void write_f32_rowmajor(std::ostream& out, const Matrix& m) {
  std::vector<float> row(static_cast<size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      row[static_cast<size_t>(c)] = static_cast<float>(m(r, c));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw IoFailure("short write on f32 blob");
}

Matrix read_f32_rowmajor(std::istream& in, std::int64_t rows, std::int64_t cols) {
  Matrix m(rows, cols);
  std::vector<float> row(static_cast<size_t>(cols));
  for (std::int64_t r = 0; r < rows; ++r) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw IoFailure("short read on f32 blob");
    for (std::int64_t c = 0; c < cols; ++c)
      m(r, c) = static_cast<double>(row[static_cast<size_t>(c)]);
  }
  return m;
}

void write_f64_rowmajor(std::ostream& out, const Matrix& m) {
  std::vector<double> row(static_cast<size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<size_t>(c)] = m(r, c);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
  if (!out) throw IoFailure("short write on f64 blob");
}

Matrix read_f64_rowmajor(std::istream& in, std::int64_t rows, std::int64_t cols) {
  Matrix m(rows, cols);
  std::vector<double> row(static_cast<size_t>(cols));
  for (std::int64_t r = 0; r < rows; ++r) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(double)));
    if (!in) throw IoFailure("short read on f64 blob");
    for (std::int64_t c = 0; c < cols; ++c) m(r, c) = row[static_cast<size_t>(c)];
  }
  return m;
}

Matrix read_f32_at(const std::string& path, std::int64_t byte_offset,
                   std::int64_t rows, std::int64_t cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path);
  in.seekg(byte_offset);
  if (!in) throw IoFailure("cannot seek in " + path);
  return read_f32_rowmajor(in, rows, cols);
}

std::int64_t file_size_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) return -1;
  return static_cast<std::int64_t>(in.tellg());
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open " + path + " for writing");
  out << content;
  if (!out) throw IoFailure("short write to " + path);
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace intercross
