#include "demandsg/linear.hpp"

#include <cmath>

#include "demandsg/dataset.hpp"

namespace demandsg {
namespace {

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

Json vector_to_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vector_from_json(const Json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

}  // namespace

void ElasticNetConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("elastic net: lambda must be >= 0");
  if (!(l1_ratio >= 0.0 && l1_ratio <= 1.0)) throw std::invalid_argument("elastic net: l1_ratio must lie in [0, 1]");
  if (!(tol > 0.0)) throw std::invalid_argument("elastic net: tol must be > 0");
  if (max_iters < 1) throw std::invalid_argument("elastic net: max_iters must be >= 1");
}

double elastic_net_objective(const Eigen::Ref<const Eigen::MatrixXd>& X,
                             const Eigen::Ref<const Eigen::VectorXd>& y,
                             const Eigen::Ref<const Eigen::VectorXd>& beta, double intercept,
                             double lambda, double l1_ratio) {
  const double n = static_cast<double>(X.rows());
  Eigen::VectorXd r = y - X * beta - Eigen::VectorXd::Constant(X.rows(), intercept);
  return r.squaredNorm() / n +
         lambda * (l1_ratio * beta.lpNorm<1>() + (1.0 - l1_ratio) * beta.squaredNorm());
}

ElasticNetFit fit_elastic_net(const Eigen::Ref<const Eigen::MatrixXd>& X,
                              const Eigen::Ref<const Eigen::VectorXd>& y,
                              const ElasticNetConfig& cfg) {
  cfg.validate();
  if (X.rows() == 0) throw DataError("elastic net: no training rows");
  if (X.rows() != y.size()) throw DataError("elastic net: row count of X and y differ");
  if (!X.allFinite() || !y.allFinite()) throw DataError("elastic net: non-finite input");

  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const double nd = static_cast<double>(n);

  ElasticNetFit fit;
  fit.center = cfg.fit_intercept ? Eigen::VectorXd(X.colwise().mean().transpose())
                                 : Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd Xs = X.rowwise() - fit.center.transpose();
  fit.scale = Eigen::VectorXd::Ones(p);
  std::vector<bool> active(static_cast<std::size_t>(p), true);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double spread = std::sqrt(Xs.col(j).squaredNorm() / nd);
    if (!(spread > 0.0)) {
      active[static_cast<std::size_t>(j)] = false;
      continue;
    }
    if (cfg.standardize) {
      fit.scale[j] = spread;
      Xs.col(j) /= spread;
    }
  }
  const double y_mean = cfg.fit_intercept ? y.mean() : 0.0;
  Eigen::VectorXd r = y.array() - y_mean;

  Eigen::VectorXd z(p);
  for (Eigen::Index j = 0; j < p; ++j) z[j] = Xs.col(j).squaredNorm() / nd;

  const double l1 = cfg.lambda * cfg.l1_ratio;
  const double l2 = cfg.lambda * (1.0 - cfg.l1_ratio);
  auto objective = [&](const Eigen::VectorXd& b) {
    return r.squaredNorm() / nd + l1 * b.lpNorm<1>() + l2 * b.squaredNorm();
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  auto& rep = fit.report;
  for (int it = 0; it < cfg.max_iters; ++it) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!active[static_cast<std::size_t>(j)]) continue;
      const double rho = Xs.col(j).dot(r) / nd + z[j] * beta[j];
      const double updated = soft_threshold(rho, 0.5 * l1) / (z[j] + l2);
      const double delta = updated - beta[j];
      if (delta != 0.0) {
        r.noalias() -= delta * Xs.col(j);
        beta[j] = updated;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    rep.iterations = it + 1;
    rep.objective_trace.push_back(objective(beta));
    if (max_change < cfg.tol) {
      rep.converged = true;
      break;
    }
  }
  rep.final_loss = rep.objective_trace.back();

  fit.beta = beta.array() / fit.scale.array();
  fit.intercept = cfg.fit_intercept ? y_mean - fit.center.dot(fit.beta) : 0.0;
  rep.residuals = y - X * fit.beta - Eigen::VectorXd::Constant(n, fit.intercept);
  return fit;
}

LinearModel::LinearModel(FeatureLayout layout, Eigen::VectorXd beta, double intercept,
                         Eigen::VectorXd center, Eigen::VectorXd scale)
    : layout_(std::move(layout)),
      beta_(std::move(beta)),
      intercept_(intercept),
      center_(std::move(center)),
      scale_(std::move(scale)) {
  if (beta_.size() != encoded_width(layout_)) {
    throw DataError("linear model: coefficient count does not match the encoded feature count");
  }
  if (!beta_.allFinite() || !std::isfinite(intercept_)) throw DataError("linear model: non-finite coefficients");
}

LinearModel LinearModel::fit(const FeatureFrame& frame, const Eigen::Ref<const Eigen::VectorXd>& y,
                             const ElasticNetConfig& cfg, TrainReport* report) {
  ElasticNetFit f = fit_elastic_net(one_hot(frame), y, cfg);
  if (report) *report = f.report;
  return LinearModel(frame.layout, std::move(f.beta), f.intercept, std::move(f.center),
                     std::move(f.scale));
}

Eigen::VectorXd LinearModel::predict(const FeatureFrame& frame) const {
  const Eigen::MatrixXd x = one_hot(align(frame, layout_));
  return (x * beta_).array() + intercept_;
}

Json LinearModel::to_json() const {
  Json j;
  j["type"] = "linear";
  j["layout"] = layout_to_json(layout_);
  j["intercept"] = intercept_;
  j["beta"] = vector_to_json(beta_);
  j["center"] = vector_to_json(center_);
  j["scale"] = vector_to_json(scale_);
  return j;
}

LinearModel LinearModel::from_json(const Json& j) {
  return LinearModel(layout_from_json(j.at("layout")), vector_from_json(j.at("beta")),
                     j.at("intercept").get<double>(), vector_from_json(j.at("center")),
                     vector_from_json(j.at("scale")));
}

}  // namespace demandsg
