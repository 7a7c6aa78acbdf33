#pragma once

#include <filesystem>
#include <string>

#include "sde/matrix.hpp"

namespace sde {

enum class MatrixFormat { csv, binary };

/// Shortest round-trip decimal rendering of a double (to_chars).
std::string format_double(double v);

/// Parses what format_double wrote; throws FormatError on anything else.
double parse_double(std::string_view text);

// CSV: header line `# rows=<m> cols=<n>`, then m comma-separated rows.
// Values use shortest round-trip formatting so read(write(A)) == A bitwise.
std::string matrix_to_csv(const Matrix& m);
Matrix matrix_from_csv(const std::string& text);

// Binary: magic "SDEM", version byte 0x01, u64-LE rows, u64-LE cols,
// then rows*cols IEEE-754 doubles, little-endian, row-major.
std::string matrix_to_binary(const Matrix& m);
Matrix matrix_from_binary(const std::string& bytes);

void write_matrix(const std::filesystem::path& path, const Matrix& m, MatrixFormat fmt);

/// Reads either format; sniffs binary magic first, then the CSV header.
Matrix read_matrix(const std::filesystem::path& path);

// Whole-file helpers used across the CLI.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace sde
