#include "fpca/csv.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "fpca/dataset.hpp"
#include "fpca/error.hpp"

namespace fpca {

std::string format_matrix_csv(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

Eigen::MatrixXd parse_matrix_csv(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::size_t start = 0;
  long line = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto row_text = text.substr(start, end - start);
    start = end + 1;
    ++line;
    if (!row_text.empty() && row_text.back() == '\r') row_text.remove_suffix(1);
    if (row_text.empty()) continue;
    std::vector<double> row;
    std::size_t f = 0;
    while (true) {
      const auto comma = row_text.find(',', f);
      const auto field = row_text.substr(f, comma == std::string_view::npos ? std::string_view::npos : comma - f);
      try {
        row.push_back(parse_double(field));
      } catch (const InvalidArgument& e) {
        throw ParseError(e.what(), line);
      }
      if (comma == std::string_view::npos) break;
      f = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw ParseError("ragged matrix row", line);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << content;
  if (!out) throw InvalidArgument("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  write_text_file(path, format_matrix_csv(m));
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) { return parse_matrix_csv(read_text_file(path)); }

}  // namespace fpca
