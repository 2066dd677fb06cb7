#include "bmsense/matrix_io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "bmsense/errors.hpp"

namespace bmsense {

namespace fs = std::filesystem;

void write_matrix(std::ostream& out, const Matrix& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  char buf[40];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      if (j > 0) out << ' ';
      out << buf;
    }
    out << '\n';
  }
}

Matrix read_matrix(std::istream& in) {
  long long rows = -1;
  long long cols = -1;
  if (!(in >> rows >> cols) || rows < 0 || cols < 0) {
    throw InvalidInputError("read_matrix: bad header, expected \"rows cols\"");
  }
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      std::string token;
      if (!(in >> token)) {
        throw InvalidInputError("read_matrix: truncated data");
      }
      try {
        m(i, j) = std::stod(token);
      } catch (const std::exception&) {
        throw InvalidInputError("read_matrix: bad value '" + token + "'");
      }
    }
  }
  return m;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) {
      throw IoError("cannot create directory " + path.parent_path().string() + ": " +
                    ec.message());
    }
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << contents;
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

void save_matrix(const fs::path& path, const Matrix& m) {
  std::ostringstream out;
  write_matrix(out, m);
  write_file_atomic(path, out.str());
}

Matrix load_matrix(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return read_matrix(in);
  } catch (const InvalidInputError& e) {
    throw InvalidInputError(path.string() + ": " + e.what());
  }
}

void save_vector(const fs::path& path, const Vector& v) { save_matrix(path, Matrix(v)); }

Vector load_vector(const fs::path& path) {
  Matrix m = load_matrix(path);
  if (m.cols() != 1) {
    throw InvalidInputError(path.string() + ": expected a single column");
  }
  return m.col(0);
}

}  // namespace bmsense
