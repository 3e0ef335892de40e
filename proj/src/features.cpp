#include "demandsg/features.hpp"

namespace demandsg {

FeatureFrame feature_frame(const Dataset& d) {
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < d.cols(); ++j) {
    if (d.column(j).schema.role == ColumnRole::Feature) cols.push_back(j);
  }
  FeatureFrame f;
  f.values.resize(static_cast<Eigen::Index>(d.rows()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const auto& c = d.column(cols[k]);
    if (c.missing_count() > 0) {
      throw DataError("feature column '" + c.schema.name + "' has missing values; run fill_missing first");
    }
    FeatureInfo info{c.schema.name, c.numeric() ? FeatureKind::Numeric : FeatureKind::Categorical, {}};
    const auto col = static_cast<Eigen::Index>(k);
    for (std::size_t r = 0; r < d.rows(); ++r) {
      f.values(static_cast<Eigen::Index>(r), col) =
          c.numeric() ? c.values[r] : static_cast<double>(c.codes[r]);
    }
    if (!c.numeric()) info.levels = c.levels;
    f.layout.push_back(std::move(info));
  }
  return f;
}

FeatureFrame numeric_frame(Eigen::MatrixXd values, std::vector<std::string> names) {
  if (static_cast<Eigen::Index>(names.size()) != values.cols()) {
    throw DataError("numeric_frame: name count does not match column count");
  }
  FeatureFrame f;
  for (auto& n : names) f.layout.push_back({std::move(n), FeatureKind::Numeric, {}});
  f.values = std::move(values);
  return f;
}

FeatureFrame align(const FeatureFrame& frame, const FeatureLayout& layout) {
  if (frame.layout == layout) return frame;
  FeatureFrame out;
  out.layout = layout;
  out.values.resize(frame.rows(), static_cast<Eigen::Index>(layout.size()));
  for (std::size_t j = 0; j < layout.size(); ++j) {
    const auto& want = layout[j];
    std::size_t src = frame.layout.size();
    for (std::size_t s = 0; s < frame.layout.size(); ++s) {
      if (frame.layout[s].name == want.name) {
        src = s;
        break;
      }
    }
    if (src == frame.layout.size()) throw DataError("input is missing feature column '" + want.name + "'");
    const auto& have = frame.layout[src];
    if (have.kind != want.kind) {
      throw DataError("feature column '" + want.name + "' has a different kind than at training time");
    }
    const auto dst_col = static_cast<Eigen::Index>(j);
    const auto src_col = static_cast<Eigen::Index>(src);
    if (want.kind == FeatureKind::Numeric) {
      out.values.col(dst_col) = frame.values.col(src_col);
      continue;
    }
    std::vector<double> remap(have.levels.size(), kUnseenCode);
    for (std::size_t a = 0; a < have.levels.size(); ++a) {
      for (std::size_t b = 0; b < want.levels.size(); ++b) {
        if (have.levels[a] == want.levels[b]) {
          remap[a] = static_cast<double>(b);
          break;
        }
      }
    }
    for (Eigen::Index r = 0; r < frame.rows(); ++r) {
      const double code = frame.values(r, src_col);
      out.values(r, dst_col) =
          code < 0 ? kUnseenCode : remap[static_cast<std::size_t>(code)];
    }
  }
  return out;
}

FeatureFrame take_rows(const FeatureFrame& frame, std::span<const std::size_t> rows) {
  FeatureFrame out;
  out.layout = frame.layout;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), frame.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.values.row(static_cast<Eigen::Index>(i)) = frame.values.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

Eigen::Index encoded_width(const FeatureLayout& layout) {
  Eigen::Index w = 0;
  for (const auto& f : layout) {
    w += f.kind == FeatureKind::Numeric ? 1 : static_cast<Eigen::Index>(f.levels.size());
  }
  return w;
}

std::vector<std::string> encoded_names(const FeatureLayout& layout) {
  std::vector<std::string> names;
  for (const auto& f : layout) {
    if (f.kind == FeatureKind::Numeric) {
      names.push_back(f.name);
    } else {
      for (const auto& l : f.levels) names.push_back(f.name + "=" + l);
    }
  }
  return names;
}

Eigen::MatrixXd one_hot(const FeatureFrame& aligned) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(aligned.rows(), encoded_width(aligned.layout));
  Eigen::Index col = 0;
  for (std::size_t j = 0; j < aligned.layout.size(); ++j) {
    const auto& f = aligned.layout[j];
    const auto src = static_cast<Eigen::Index>(j);
    if (f.kind == FeatureKind::Numeric) {
      out.col(col++) = aligned.values.col(src);
      continue;
    }
    const auto k = static_cast<Eigen::Index>(f.levels.size());
    for (Eigen::Index r = 0; r < aligned.rows(); ++r) {
      const double code = aligned.values(r, src);
      if (code >= 0 && code < static_cast<double>(k)) out(r, col + static_cast<Eigen::Index>(code)) = 1.0;
    }
    col += k;
  }
  return out;
}

std::pair<Eigen::MatrixXd, FeatureLayout> encode_features(const Dataset& d) {
  FeatureFrame f = feature_frame(d);
  Eigen::MatrixXd x = one_hot(f);
  return {std::move(x), std::move(f.layout)};
}

}  // namespace demandsg
