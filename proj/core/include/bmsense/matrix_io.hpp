#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "bmsense/linalg.hpp"

namespace bmsense {

// Text format: first line "rows cols", then one line per row with
// space-separated values printed with 17 significant digits.

void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in);

void save_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix load_matrix(const std::filesystem::path& path);

/// Vectors are stored as p x 1 matrices.
void save_vector(const std::filesystem::path& path, const Vector& v);
Vector load_vector(const std::filesystem::path& path);

/// Write via a temporary sibling and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace bmsense
