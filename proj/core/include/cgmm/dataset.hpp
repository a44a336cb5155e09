#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace cgmm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Categorical environment assignment for every row.
//
// Levels are kept in lexicographic order; integer labels are handled as
// their decimal strings.
class EnvironmentLabels {
 public:
  explicit EnvironmentLabels(std::vector<std::string> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t num_levels() const noexcept { return levels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<std::string>& levels() const noexcept { return levels_; }
  // Position of each row's label in levels().
  const std::vector<std::size_t>& codes() const noexcept { return codes_; }
  // Rows carrying the given level.
  std::size_t count(std::size_t level) const { return counts_.at(level); }

 private:
  std::vector<std::string> labels_;
  std::vector<std::string> levels_;
  std::vector<std::size_t> codes_;
  std::vector<std::size_t> counts_;
};

struct ColumnNames {
  std::string response = "y";
  std::vector<std::string> exposures;
  std::vector<std::string> instruments;
};

// Response, exposures and instruments for n observations.
//
// Immutable after construction. Instruments are stored as given; loaders and
// generators are responsible for centering them.
class Dataset {
 public:
  Dataset(Matrix exposures, Vector response, Matrix instruments, ColumnNames names = {},
          std::optional<EnvironmentLabels> labels = std::nullopt,
          std::optional<Matrix> raw_instruments = std::nullopt);

  Index n() const noexcept { return x_.rows(); }
  Index p() const noexcept { return x_.cols(); }
  Index q() const noexcept { return e_.cols(); }

  const Matrix& X() const noexcept { return x_; }
  const Vector& Y() const noexcept { return y_; }
  const Matrix& E() const noexcept { return e_; }
  // Instrument values before centering (equals E() when not supplied).
  const Matrix& raw_instruments() const noexcept { return raw_e_; }

  const ColumnNames& names() const noexcept { return names_; }
  const std::optional<EnvironmentLabels>& labels() const noexcept { return labels_; }

  // Keeps only the listed instrument columns (labels are dropped).
  Dataset select_instruments(const std::vector<Index>& columns) const;
  // Sample-centers the exposures and the response.
  Dataset center_xy() const;

 private:
  Matrix x_;
  Vector y_;
  Matrix e_;
  Matrix raw_e_;
  ColumnNames names_;
  std::optional<EnvironmentLabels> labels_;
};

// Centered-indicator coding, one column per non-reference level: rows in
// level j get 1 - n_j/n, all others -n_j/n. The lexicographically last level
// is the reference and gets no column.
Matrix encode_environments(const EnvironmentLabels& labels);

// Row-wise Kronecker (face-splitting) product:
// out(i, j*q + k) = A(i, j) * B(i, k) for B with q columns.
Matrix rowwise_kronecker(const Matrix& a, const Matrix& b);

Matrix center_columns(const Matrix& m);

// Builds an environment dataset: E is the encoded label matrix.
Dataset make_environment_dataset(Matrix exposures, Vector response, EnvironmentLabels labels,
                                 ColumnNames names = {});

struct CsvRoles {
  std::string response;
  std::vector<std::string> exposures;
  // Exactly one of instruments / environment must be set.
  std::vector<std::string> instruments;
  std::optional<std::string> environment;
};

Dataset load_csv(const std::string& path, const CsvRoles& roles);
Dataset parse_csv(const std::string& text, const CsvRoles& roles);

// Writes response, exposures and either the environment column or the raw
// instrument columns, using shortest round-trip formatting.
std::string to_csv(const Dataset& data);

}  // namespace cgmm
