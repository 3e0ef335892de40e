#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "demandsg/features.hpp"
#include "demandsg/regressor.hpp"

namespace testutil {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("demandsg_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline demandsg::FeatureFrame numeric(const Eigen::MatrixXd& X) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < X.cols(); ++j) names.push_back("x" + std::to_string(j));
  return demandsg::numeric_frame(X, names);
}

// Predicts a fixed column of its input frame, or a constant when column < 0.
class StubRegressor final : public demandsg::Regressor {
 public:
  StubRegressor(demandsg::FeatureLayout layout, int column, double constant = 0.0)
      : layout_(std::move(layout)), column_(column), constant_(constant) {}

  Eigen::VectorXd predict(const demandsg::FeatureFrame& frame) const override {
    if (column_ < 0) return Eigen::VectorXd::Constant(frame.rows(), constant_);
    return demandsg::align(frame, layout_).values.col(column_);
  }
  const demandsg::FeatureLayout& layout() const override { return layout_; }
  std::string_view type_name() const override { return "stub"; }
  demandsg::Json to_json() const override { return {{"type", "stub"}}; }

 private:
  demandsg::FeatureLayout layout_;
  int column_;
  double constant_;
};

}  // namespace testutil
