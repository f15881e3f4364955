#include "uaplab/network.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "uaplab/error.hpp"
#include "uaplab/random.hpp"

namespace uaplab {

void AffineLayer::validate() const {
  if (bias.size() != matrix.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "bias length differs from matrix rows",
                {{"rows", matrix.rows()}, {"bias", bias.size()}});
  }
  if (matrix.size() == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "empty layer");
  }
  if (!matrix.allFinite() || !bias.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "layer has non-finite entries");
  }
}

AffineLayer AffineLayer::shift(const Vector& b) {
  return {Matrix::Identity(b.size(), b.size()), b};
}

Sparsity sparsity(const AffineLayer& layer) {
  return {static_cast<long>((layer.matrix.array() != 0.0).count()),
          static_cast<long>((layer.bias.array() != 0.0).count())};
}

FeedForwardNet::FeedForwardNet(std::vector<AffineLayer> layers, ActivationSpec activation,
                               std::vector<bool> activation_after)
    : layers_(std::move(layers)),
      activation_(std::move(activation)),
      activation_after_(std::move(activation_after)) {
  if (layers_.empty()) {
    throw Error(ErrorCode::kPrecondition, "network needs at least one layer");
  }
  if (activation_after_.size() != layers_.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "one activation marker per layer is required",
                {{"layers", layers_.size()}, {"markers", activation_after_.size()}});
  }
  if (activation_after_.back()) {
    throw Error(ErrorCode::kPrecondition, "the final layer must be affine only");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].validate();
    if (i > 0 && layers_[i].in_dim() != layers_[i - 1].out_dim()) {
      throw Error(ErrorCode::kDimensionMismatch, "consecutive layers do not compose",
                  {{"layer", i},
                   {"in_dim", layers_[i].in_dim()},
                   {"prev_out_dim", layers_[i - 1].out_dim()}});
    }
  }
}

FeedForwardNet::FeedForwardNet(std::vector<AffineLayer> layers, ActivationSpec activation)
    : FeedForwardNet(
          [&] { return layers; }(), std::move(activation),
          [&] {
            std::vector<bool> after(layers.size(), true);
            if (!after.empty()) after.back() = false;
            return after;
          }()) {}

Vector FeedForwardNet::eval(const Vector& x) const {
  if (x.size() != dim_in()) {
    throw Error(ErrorCode::kDimensionMismatch, "input has wrong dimension",
                {{"expected", dim_in()}, {"got", x.size()}});
  }
  Vector h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].apply(h);
    if (activation_after_[i]) h = activation_.apply(h);
  }
  return h;
}

std::vector<int> FeedForwardNet::widths() const {
  std::vector<int> w{dim_in()};
  for (const auto& l : layers_) w.push_back(l.out_dim());
  return w;
}

GridFunction FeedForwardNet::as_function() const {
  return GridFunction(dim_in(), dim_out(), [net = *this](const Vector& x) { return net.eval(x); });
}

FeedForwardNet stack(const FeedForwardNet& net, const std::vector<FrontLayer>& front) {
  std::vector<AffineLayer> layers;
  std::vector<bool> after;
  for (const auto& f : front) {
    layers.push_back(f.layer);
    after.push_back(f.activation_after);
  }
  if (!front.empty() && front.back().layer.out_dim() != net.dim_in()) {
    throw Error(ErrorCode::kDimensionMismatch, "front layers do not feed the network",
                {{"front_out", front.back().layer.out_dim()}, {"net_in", net.dim_in()}});
  }
  layers.insert(layers.end(), net.layers().begin(), net.layers().end());
  after.insert(after.end(), net.activation_after().begin(), net.activation_after().end());
  return FeedForwardNet(std::move(layers), net.activation(), std::move(after));
}

nlohmann::json to_json(const FeedForwardNet& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const auto& l = net.layers()[i];
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < l.matrix.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(l.matrix.cols()));
      for (Eigen::Index c = 0; c < l.matrix.cols(); ++c) row[static_cast<std::size_t>(c)] = l.matrix(r, c);
      rows.push_back(row);
    }
    layers.push_back({{"matrix", rows},
                      {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())},
                      {"activation_after", static_cast<bool>(net.activation_after()[i])}});
  }
  nlohmann::json j = {{"layers", layers}, {"activation", net.activation().name()}};
  const auto names = builtin_activation_names();
  if (std::find(names.begin(), names.end(), net.activation().name()) == names.end()) {
    j["activation_spec"] = to_json(net.activation());
  }
  return j;
}

FeedForwardNet net_from_json(const nlohmann::json& j) {
  std::vector<AffineLayer> layers;
  std::vector<bool> after;
  for (const auto& jl : j.at("layers")) {
    const auto rows = jl.at("matrix").get<std::vector<std::vector<double>>>();
    const auto bias = jl.at("bias").get<std::vector<double>>();
    const Eigen::Index cols = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size());
    Matrix m(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (static_cast<Eigen::Index>(rows[r].size()) != cols) {
        throw Error(ErrorCode::kConfig, "ragged layer matrix", {{"row", r}});
      }
      for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    }
    layers.push_back({m, Eigen::Map<const Vector>(bias.data(), static_cast<Eigen::Index>(bias.size()))});
    after.push_back(jl.value("activation_after", false));
  }
  ActivationSpec act = j.contains("activation_spec") ? activation_from_json(j.at("activation_spec"))
                                                     : builtin_activation(j.at("activation").get<std::string>());
  return FeedForwardNet(std::move(layers), std::move(act), std::move(after));
}

// ---------------------------------------------------------------------------
// Trees

void TreeFunction::validate() const {
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (!(terms[i].b <= terms[i].c)) {
      throw Error(ErrorCode::kPrecondition, "tree term needs b <= c",
                  {{"term", i}, {"b", terms[i].b}, {"c", terms[i].c}});
    }
  }
}

double TreeFunction::eval(double x) const {
  double s = 0.0;
  for (const auto& t : terms) {
    if (t.b < x && x < t.c) s += t.a;
  }
  return s;
}

GridFunction TreeFunction::as_function() const {
  validate();
  return GridFunction::from_scalar([t = *this](double x) { return t.eval(x); });
}

double tree_eval(const TreeFunction& t, double x) { return t.eval(x); }

// ---------------------------------------------------------------------------
// Random-feature fitting

void to_json(nlohmann::json& j, const ShallowFitConfig& c) {
  j = {{"width", c.width},
       {"fit_radius", c.fit_radius},
       {"seed", c.seed},
       {"ridge", c.ridge},
       {"points_per_axis", c.points_per_axis}};
}

ShallowFitConfig shallow_fit_from_json(const nlohmann::json& j) {
  ShallowFitConfig c;
  c.width = j.value("width", c.width);
  c.fit_radius = j.value("fit_radius", c.fit_radius);
  c.seed = j.value("seed", c.seed);
  c.ridge = j.value("ridge", c.ridge);
  c.points_per_axis = j.value("points_per_axis", c.points_per_axis);
  nlohmann::json bad = nlohmann::json::array();
  if (c.width < 1) bad.push_back("width");
  if (!(c.fit_radius > 0.0)) bad.push_back("fit_radius");
  if (!(c.ridge >= 0.0)) bad.push_back("ridge");
  if (c.points_per_axis < 2) bad.push_back("points_per_axis");
  if (!bad.empty()) throw Error(ErrorCode::kConfig, "invalid fit configuration", {{"fields", bad}});
  return c;
}

namespace {

struct InnerLayer {
  Matrix w;  // width x m
  Vector c;  // width
};

InnerLayer sample_inner(int m, const ShallowFitConfig& cfg) {
  Rng rng(cfg.seed);
  const double s = 3.0 / cfg.fit_radius;
  InnerLayer in{Matrix(cfg.width, m), Vector(cfg.width)};
  for (int j = 0; j < cfg.width; ++j) {
    for (int d = 0; d < m; ++d) in.w(j, d) = rng.uniform(-s, s);
    in.c[j] = rng.uniform(-3.0, 3.0);
  }
  return in;
}

constexpr int kQrMaxUnknowns = 513;

void check_config(const ShallowFitConfig& cfg) {
  if (cfg.width < 1) {
    throw Error(ErrorCode::kPrecondition, "width must be >= 1", {{"width", cfg.width}});
  }
  if (!(cfg.fit_radius > 0.0) || !(cfg.ridge >= 0.0)) {
    throw Error(ErrorCode::kPrecondition, "fit_radius must be positive and ridge nonnegative",
                {{"fit_radius", cfg.fit_radius}, {"ridge", cfg.ridge}});
  }
}

}  // namespace

ShallowFit fit_shallow_on_samples(const Matrix& x, const Matrix& y, const Vector& weights,
                                  const ActivationSpec& activation,
                                  const ShallowFitConfig& cfg) {
  check_config(cfg);
  const Eigen::Index p = x.rows();
  const int m = static_cast<int>(x.cols());
  const int n = static_cast<int>(y.cols());
  if (y.rows() != p || (weights.size() != 0 && weights.size() != p)) {
    throw Error(ErrorCode::kDimensionMismatch, "sample arrays disagree in length",
                {{"x", p}, {"y", y.rows()}, {"weights", weights.size()}});
  }
  if (!y.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "fit target has non-finite samples");
  }
  const InnerLayer inner = sample_inner(m, cfg);
  const int w = cfg.width;

  // Features plus a constant column for the outer bias.
  Matrix h(p, w + 1);
  for (Eigen::Index i = 0; i < p; ++i) {
    const Vector pre = inner.w * x.row(i).transpose() + inner.c;
    for (int j = 0; j < w; ++j) h(i, j) = activation(pre[j]);
    h(i, w) = 1.0;
  }
  Vector sw = weights.size() == 0 ? Vector::Ones(p) : Vector(weights.array().sqrt());
  const double scale = 1.0 / std::sqrt(static_cast<double>(p));

  Matrix beta;
  if (cfg.ridge > 0.0 && w + 1 > kQrMaxUnknowns) {
    // Wide fits: ridge normal equations, Cholesky.
    const Matrix hw = scale * (sw.asDiagonal() * h);
    Matrix gram = Matrix::Zero(w + 1, w + 1);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(hw.transpose());
    gram.diagonal().array() += cfg.ridge;
    Eigen::LLT<Matrix> llt(gram.selfadjointView<Eigen::Lower>());
    if (llt.info() == Eigen::Success) {
      beta = llt.solve(hw.transpose() * (scale * (sw.asDiagonal() * y)));
    }
  }
  if (beta.size() == 0) {
    // Ridge as an augmented least-squares system, solved by pivoted QR.
    Matrix a = Matrix::Zero(p + (cfg.ridge > 0.0 ? w + 1 : 0), w + 1);
    Matrix rhs = Matrix::Zero(a.rows(), n);
    a.topRows(p) = scale * (sw.asDiagonal() * h);
    rhs.topRows(p) = scale * (sw.asDiagonal() * y);
    if (cfg.ridge > 0.0) {
      a.bottomRows(w + 1) = std::sqrt(cfg.ridge) * Matrix::Identity(w + 1, w + 1);
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(a);
    if (cfg.ridge == 0.0 && qr.rank() < w + 1) {
      throw Error(ErrorCode::kSingularSystem,
                  "least-squares system is rank deficient; use ridge > 0",
                  {{"rank", qr.rank()}, {"unknowns", w + 1}});
    }
    beta = qr.solve(rhs);  // (w + 1) x n
  }

  AffineLayer hidden{inner.w, inner.c};
  AffineLayer out{beta.topRows(w).transpose(), beta.row(w).transpose()};
  ShallowFit fit{FeedForwardNet({hidden, out}, activation), 0.0, static_cast<int>(p)};
  const Matrix pred = h * beta;
  for (Eigen::Index i = 0; i < p; ++i) {
    fit.sup_residual = std::max(fit.sup_residual, (pred.row(i) - y.row(i)).norm());
  }
  return fit;
}

ShallowFit fit_shallow(const GridFunction& target, const ActivationSpec& activation,
                       const ShallowFitConfig& cfg) {
  check_config(cfg);
  const int m = target.dim_in();
  const int n = target.dim_out();
  int ppa = std::max(cfg.points_per_axis, 2);
  const double needed = 4.0 * cfg.width + 1.0;
  while (std::pow(static_cast<double>(ppa), m) < needed) ++ppa;
  const GridSpec grid{m, n, ppa, cfg.fit_radius};
  Matrix x(static_cast<Eigen::Index>(grid.size()), m);
  Matrix y(x.rows(), n);
  Eigen::Index row = 0;
  grid.for_each_point([&](const Vector& pt) {
    x.row(row) = pt.transpose();
    y.row(row) = target(pt).transpose();
    ++row;
  });
  return fit_shallow_on_samples(x, y, Vector(), activation, cfg);
}

}  // namespace uaplab
