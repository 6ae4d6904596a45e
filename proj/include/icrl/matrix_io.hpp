#pragma once

#include "icrl/types.hpp"

#include <string>

namespace icrl {

/// Shortest text that keeps 17 significant digits ("%.17g").
std::string format_double(double x);

/// Rows on lines, columns separated by commas, no header.
std::string matrix_to_csv(const Matrix& m);
Matrix matrix_from_csv(const std::string& text);

/// Throw std::runtime_error on IO failure.
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);
void write_matrix_csv(const std::string& path, const Matrix& m);
Matrix read_matrix_csv(const std::string& path);

}  // namespace icrl
