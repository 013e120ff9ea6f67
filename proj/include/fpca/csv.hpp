#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace fpca {

// Dense matrices as headerless CSV, one matrix row per line, shortest
// round-trip decimal formatting.
std::string format_matrix_csv(const Eigen::MatrixXd& m);
Eigen::MatrixXd parse_matrix_csv(std::string_view text);

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace fpca
