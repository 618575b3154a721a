#include "vtp/surrogate.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "vtp/error.hpp"

namespace vtp {

namespace {

constexpr int kModelVersion = 1;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.size();
  const auto cols = rows == 0 ? 0 : j[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (j[r].size() != cols) throw Error(ErrorCode::IoError, "ragged matrix in model file");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(row);
  }
  return j;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd with_ones(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out(m.rows(), m.cols() + 1);
  out.leftCols(m.cols()) = m;
  out.col(m.cols()).setOnes();
  return out;
}

}  // namespace

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::EpochCap: return "epoch_cap";
    case StopReason::Tolerance: return "tolerance";
    case StopReason::LambdaOverflow: return "lambda_overflow";
  }
  return "unknown";
}

Normalization Normalization::fit(const Eigen::MatrixXd& data) {
  Normalization n;
  n.mean = data.colwise().mean().transpose();
  n.std.resize(data.cols());
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    const double var = (data.col(c).array() - n.mean(c)).square().mean();
    const double sd = std::sqrt(var);
    n.std(c) = sd > 1e-12 * std::max(1.0, std::abs(n.mean(c))) ? sd : 1.0;
  }
  return n;
}

Eigen::VectorXd Normalization::normalize(const Eigen::VectorXd& v) const {
  return (v - mean).cwiseQuotient(std);
}

Eigen::VectorXd Normalization::denormalize(const Eigen::VectorXd& v) const {
  return v.cwiseProduct(std) + mean;
}

Eigen::MatrixXd Normalization::normalize_rows(const Eigen::MatrixXd& m) const {
  return (m.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array();
}

TrainingData TrainingData::from(const SampleSet& set) {
  if (set.train.empty() || set.test.empty()) throw Error(ErrorCode::InvalidParams, "sample set has no split");
  auto fill = [&](const std::vector<std::size_t>& idx, Eigen::MatrixXd& x, Eigen::MatrixXd& y) {
    x.resize(static_cast<Eigen::Index>(idx.size()), kParamCount);
    y.resize(static_cast<Eigen::Index>(idx.size()), kModeCount);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const Sample& s = set.samples.at(idx[r]);
      const auto v = s.params.to_vector();
      for (std::size_t c = 0; c < kParamCount; ++c) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[c];
      for (std::size_t c = 0; c < kModeCount; ++c)
        y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = s.freqs_hz[c];
    }
  };
  TrainingData d;
  fill(set.train, d.x_train, d.y_train);
  fill(set.test, d.x_test, d.y_test);
  return d;
}

SurrogateModel::SurrogateModel(int input_dim, int output_dim, int hidden_width, std::uint64_t seed) {
  if (input_dim < 1 || output_dim < 1 || hidden_width < 1) {
    throw Error(ErrorCode::InvalidParams, "network dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  auto init = [&](Eigen::MatrixXd& m, int rows, int cols) {
    const double r = std::sqrt(6.0 / (rows + cols));
    std::uniform_real_distribution<double> dist(-r, r);
    m.resize(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = dist(rng);
  };
  init(w1_, hidden_width, input_dim);
  init(w2_, output_dim, hidden_width);
  b1_ = Eigen::VectorXd::Zero(hidden_width);
  b2_ = Eigen::VectorXd::Zero(output_dim);
  in_ = {Eigen::VectorXd::Zero(input_dim), Eigen::VectorXd::Ones(input_dim)};
  out_ = {Eigen::VectorXd::Zero(output_dim), Eigen::VectorXd::Ones(output_dim)};
}

std::size_t SurrogateModel::weight_count() const {
  return static_cast<std::size_t>(w1_.size() + b1_.size() + w2_.size() + b2_.size());
}

void SurrogateModel::require_trained() const {
  if (!trained_) throw Error(ErrorCode::NotTrained, "surrogate model has not been trained");
}

void SurrogateModel::require_reliable() const {
  require_trained();
  if (!reliable()) {
    throw Error(ErrorCode::GateFailed, "held-out R2 " + std::to_string(report_.r2_aggregate) +
                                           " does not exceed " + std::to_string(kR2Gate));
  }
}

void SurrogateModel::set_normalization(Normalization in, Normalization out) {
  in_ = std::move(in);
  out_ = std::move(out);
}

void SurrogateModel::mark_trained(FitReport report, std::string fingerprint) {
  report_ = std::move(report);
  fingerprint_ = std::move(fingerprint);
  trained_ = true;
}

void SurrogateModel::forward_normalized(const Eigen::MatrixXd& xn, Eigen::MatrixXd& hidden,
                                        Eigen::MatrixXd& out) const {
  hidden = (xn * w1_.transpose()).rowwise() + b1_.transpose();
  if (!linear_hidden_) hidden = hidden.unaryExpr([](double z) { return sigmoid(z); });
  out = (hidden * w2_.transpose()).rowwise() + b2_.transpose();
}

Eigen::VectorXd SurrogateModel::evaluate(const Eigen::VectorXd& x) const {
  require_trained();
  Eigen::VectorXd z = w1_ * in_.normalize(x) + b1_;
  if (!linear_hidden_) z = z.unaryExpr([](double v) { return sigmoid(v); });
  return out_.denormalize(w2_ * z + b2_);
}

Eigen::MatrixXd SurrogateModel::evaluate_rows(const Eigen::MatrixXd& x) const {
  require_trained();
  Eigen::MatrixXd hidden, out;
  forward_normalized(in_.normalize_rows(x), hidden, out);
  return (out.array().rowwise() * out_.std.transpose().array()).rowwise() + out_.mean.transpose().array();
}

Eigen::MatrixXd SurrogateModel::input_jacobian(const Eigen::VectorXd& x) const {
  require_trained();
  Eigen::VectorXd z = w1_ * in_.normalize(x) + b1_;
  Eigen::VectorXd slope(z.size());
  for (Eigen::Index h = 0; h < z.size(); ++h) {
    if (linear_hidden_) {
      slope(h) = 1.0;
    } else {
      const double s = sigmoid(z(h));
      slope(h) = s * (1.0 - s);
    }
  }
  return out_.std.asDiagonal() * w2_ * slope.asDiagonal() * w1_ * in_.std.cwiseInverse().asDiagonal();
}

Prediction SurrogateModel::predict(const PlateParams& params) const {
  require_trained();
  if (input_dim() != static_cast<int>(kParamCount) || output_dim() != static_cast<int>(kModeCount)) {
    throw Error(ErrorCode::InvalidParams, "model is not a plate surrogate");
  }
  const auto v = params.to_vector();
  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(v.data(), kParamCount);
  const Eigen::VectorXd y = evaluate(x);
  Prediction p;
  for (std::size_t i = 0; i < kModeCount; ++i) p.freqs_hz[i] = y(static_cast<Eigen::Index>(i));
  if (reference_.size() == static_cast<Eigen::Index>(kParamCount)) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double lo = (1.0 - kTrainingBox) * reference_(i);
      const double hi = (1.0 + kTrainingBox) * reference_(i);
      const double slack = 1e-12 * std::abs(reference_(i));
      if (x(i) < std::min(lo, hi) - slack || x(i) > std::max(lo, hi) + slack) p.in_training_box = false;
    }
  }
  return p;
}

Eigen::MatrixXd SurrogateModel::jacobian(const PlateParams& params) const {
  const auto v = params.to_vector();
  return input_jacobian(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
}

Eigen::VectorXd SurrogateModel::weights() const {
  const Eigen::Index d = w1_.cols(), h = w1_.rows(), o = w2_.rows();
  Eigen::VectorXd w(static_cast<Eigen::Index>(weight_count()));
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < h; ++r) {
    w.segment(k, d) = w1_.row(r).transpose();
    w(k + d) = b1_(r);
    k += d + 1;
  }
  for (Eigen::Index r = 0; r < o; ++r) {
    w.segment(k, h) = w2_.row(r).transpose();
    w(k + h) = b2_(r);
    k += h + 1;
  }
  return w;
}

void SurrogateModel::set_weights(const Eigen::VectorXd& w) {
  if (w.size() != static_cast<Eigen::Index>(weight_count())) {
    throw Error(ErrorCode::InvalidParams, "weight vector has the wrong length");
  }
  const Eigen::Index d = w1_.cols(), h = w1_.rows(), o = w2_.rows();
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < h; ++r) {
    w1_.row(r) = w.segment(k, d).transpose();
    b1_(r) = w(k + d);
    k += d + 1;
  }
  for (Eigen::Index r = 0; r < o; ++r) {
    w2_.row(r) = w.segment(k, h).transpose();
    b2_(r) = w(k + h);
    k += h + 1;
  }
}

namespace lm {

namespace {

// Hidden-layer derivative at each sample.
Eigen::MatrixXd hidden_slopes(const SurrogateModel& model, const Eigen::MatrixXd& hidden) {
  if (model.linear_hidden()) return Eigen::MatrixXd::Ones(hidden.rows(), hidden.cols());
  return hidden.array() * (1.0 - hidden.array());
}

}  // namespace

void normal_equations(const SurrogateModel& model, const Eigen::MatrixXd& xn, const Eigen::MatrixXd& yn,
                      Eigen::MatrixXd& jtj, Eigen::VectorXd& jtr) {
  const Eigen::Index n = xn.rows(), d = xn.cols(), h = model.hidden_width(), o = model.output_dim();
  const Eigen::Index nh = h * (d + 1), no = o * (h + 1);
  Eigen::MatrixXd hidden, out;
  model.forward_normalized(xn, hidden, out);
  const Eigen::MatrixXd r = out - yn;
  const Eigen::MatrixXd slope = hidden_slopes(model, hidden);
  const Eigen::MatrixXd xt = with_ones(xn);
  const Eigen::MatrixXd at = with_ones(hidden);

  // Row s of u is slope_s ⊗ x̃_s; the hidden block of JᵀJ is (W2ᵀW2 ⊗ 1) ∘ uᵀu.
  Eigen::MatrixXd u(n, nh);
  for (Eigen::Index k = 0; k < h; ++k) u.middleCols(k * (d + 1), d + 1) = xt.array().colwise() * slope.col(k).array();

  Eigen::MatrixXd utu = Eigen::MatrixXd::Zero(nh, nh);
  utu.selfadjointView<Eigen::Lower>().rankUpdate(u.transpose());
  utu.triangularView<Eigen::StrictlyUpper>() = utu.transpose();
  const Eigen::MatrixXd g = model.w2().transpose() * model.w2();
  const Eigen::MatrixXd ata = at.transpose() * at;
  const Eigen::MatrixXd uta = u.transpose() * at;

  jtj.setZero(nh + no, nh + no);
  for (Eigen::Index p = 0; p < h; ++p)
    for (Eigen::Index q = 0; q < h; ++q)
      jtj.block(p * (d + 1), q * (d + 1), d + 1, d + 1) = g(p, q) * utu.block(p * (d + 1), q * (d + 1), d + 1, d + 1);
  for (Eigen::Index c = 0; c < o; ++c) {
    jtj.block(nh + c * (h + 1), nh + c * (h + 1), h + 1, h + 1) = ata;
    for (Eigen::Index p = 0; p < h; ++p) {
      const auto cross = model.w2()(c, p) * uta.middleRows(p * (d + 1), d + 1);
      jtj.block(p * (d + 1), nh + c * (h + 1), d + 1, h + 1) = cross;
      jtj.block(nh + c * (h + 1), p * (d + 1), h + 1, d + 1) = cross.transpose();
    }
  }

  jtr.resize(nh + no);
  const Eigen::MatrixXd back = (r * model.w2()).cwiseProduct(slope);
  const Eigen::MatrixXd gh = back.transpose() * xt;
  for (Eigen::Index p = 0; p < h; ++p) jtr.segment(p * (d + 1), d + 1) = gh.row(p).transpose();
  const Eigen::MatrixXd go = r.transpose() * at;
  for (Eigen::Index c = 0; c < o; ++c) jtr.segment(nh + c * (h + 1), h + 1) = go.row(c).transpose();
}

Eigen::MatrixXd residual_jacobian(const SurrogateModel& model, const Eigen::MatrixXd& xn) {
  const Eigen::Index n = xn.rows(), d = xn.cols(), h = model.hidden_width(), o = model.output_dim();
  const Eigen::Index nh = h * (d + 1);
  Eigen::MatrixXd hidden, out;
  model.forward_normalized(xn, hidden, out);
  const Eigen::MatrixXd slope = hidden_slopes(model, hidden);
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n * o, static_cast<Eigen::Index>(model.weight_count()));
  for (Eigen::Index s = 0; s < n; ++s) {
    for (Eigen::Index c = 0; c < o; ++c) {
      auto row = j.row(s * o + c);
      for (Eigen::Index p = 0; p < h; ++p) {
        const double delta = model.w2()(c, p) * slope(s, p);
        for (Eigen::Index i = 0; i < d; ++i) row(p * (d + 1) + i) = delta * xn(s, i);
        row(p * (d + 1) + d) = delta;
        row(nh + c * (h + 1) + p) = hidden(s, p);
      }
      row(nh + c * (h + 1) + h) = 1.0;
    }
  }
  return j;
}

}  // namespace lm

namespace {

double mse(const SurrogateModel& model, const Eigen::MatrixXd& xn, const Eigen::MatrixXd& yn) {
  Eigen::MatrixXd hidden, out;
  model.forward_normalized(xn, hidden, out);
  return (out - yn).squaredNorm() / static_cast<double>(yn.size());
}

double rmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& y) {
  return std::sqrt((pred - y).squaredNorm() / static_cast<double>(y.size()));
}

}  // namespace

SurrogateModel train(const TrainingData& data, const TrainConfig& config) {
  if (config.max_epochs < 1 || config.max_epochs > 100) {
    throw Error(ErrorCode::InvalidParams, "max_epochs must be in 1..100");
  }
  if (config.lambda_init <= 0.0 || config.lambda_up <= 1.0 || config.lambda_down <= 1.0) {
    throw Error(ErrorCode::InvalidParams, "damping settings must be positive with factors above 1");
  }
  if (data.x_train.rows() != data.y_train.rows() || data.x_test.rows() != data.y_test.rows() ||
      data.x_train.cols() != data.x_test.cols() || data.y_train.cols() != data.y_test.cols()) {
    throw Error(ErrorCode::InvalidParams, "training data shapes disagree");
  }
  if (data.x_test.rows() == 0) throw Error(ErrorCode::InvalidParams, "test partition is empty");

  SurrogateModel model(static_cast<int>(data.x_train.cols()), static_cast<int>(data.y_train.cols()),
                       config.hidden_width, config.seed);
  if (static_cast<double>(data.x_train.rows()) <= static_cast<double>(model.weight_count()) / 5.0) {
    throw Error(ErrorCode::InvalidParams, "training set of " + std::to_string(data.x_train.rows()) +
                                              " samples is too small for " + std::to_string(model.weight_count()) +
                                              " weights");
  }
  Normalization in = Normalization::fit(data.x_train);
  Normalization out = Normalization::fit(data.y_train);
  const Eigen::MatrixXd xn = in.normalize_rows(data.x_train);
  const Eigen::MatrixXd yn = out.normalize_rows(data.y_train);
  model.set_normalization(std::move(in), std::move(out));

  FitReport report;
  double loss = mse(model, xn, yn);
  report.losses.push_back(loss);
  double lambda = config.lambda_init;
  int small_steps = 0;
  Eigen::MatrixXd jtj;
  Eigen::VectorXd jtr;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    report.epochs = epoch + 1;
    lm::normal_equations(model, xn, yn, jtj, jtr);
    const Eigen::VectorXd w0 = model.weights();
    bool accepted = false;
    bool any_solved = false;
    while (lambda <= config.lambda_max) {
      Eigen::MatrixXd a = jtj;
      a.diagonal().array() += lambda;
      Eigen::LLT<Eigen::MatrixXd> llt(a);
      if (llt.info() == Eigen::Success) {
        any_solved = true;
        const Eigen::VectorXd step = llt.solve(-jtr);
        model.set_weights(w0 + step);
        const double trial = mse(model, xn, yn);
        if (std::isfinite(trial) && trial < loss) {
          small_steps = loss - trial < config.tolerance ? small_steps + 1 : 0;
          loss = trial;
          report.losses.push_back(loss);
          lambda = std::max(lambda / config.lambda_down, 1e-12);
          accepted = true;
          break;
        }
      }
      lambda *= config.lambda_up;
    }
    if (!accepted) {
      model.set_weights(w0);
      if (!any_solved) throw Error(ErrorCode::SingularNormalEquations, "damped normal equations never factorized");
      report.stop = StopReason::LambdaOverflow;
      break;
    }
    if (small_steps >= config.patience) {
      report.stop = StopReason::Tolerance;
      break;
    }
  }

  model.mark_trained({});
  const Eigen::MatrixXd pred_train = model.evaluate_rows(data.x_train);
  const Eigen::MatrixXd pred_test = model.evaluate_rows(data.x_test);
  const RSquared r2 = r_squared(pred_test, data.y_test);
  report.r2_test = r2.per_output;
  report.r2_aggregate = r2.aggregate;
  report.rmse_train = rmse(pred_train, data.y_train);
  report.rmse_test = rmse(pred_test, data.y_test);
  report.n_train = static_cast<std::size_t>(data.x_train.rows());
  report.n_test = static_cast<std::size_t>(data.x_test.rows());
  model.mark_trained(std::move(report));
  return model;
}

SurrogateModel train(const SampleSet& set, const TrainConfig& config) {
  SurrogateModel model = train(TrainingData::from(set), config);
  const auto ref = PlateParams::reference().to_vector();
  Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(ref.data(), kParamCount);
  model.set_reference_input(std::move(r));
  FitReport report = model.report();
  model.mark_trained(std::move(report), fingerprint(set));
  return model;
}

RSquared r_squared(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& labels) {
  if (predictions.rows() != labels.rows() || predictions.cols() != labels.cols()) {
    throw Error(ErrorCode::InvalidParams, "prediction and label shapes differ");
  }
  if (labels.rows() == 0) throw Error(ErrorCode::InvalidParams, "empty partition");
  RSquared r;
  for (Eigen::Index c = 0; c < labels.cols(); ++c) {
    const double mean = labels.col(c).mean();
    const double ss_tot = (labels.col(c).array() - mean).square().sum();
    if (ss_tot <= 0.0) {
      throw Error(ErrorCode::DegenerateVariance, "output " + std::to_string(c) + " is constant on the partition");
    }
    const double ss_res = (labels.col(c) - predictions.col(c)).squaredNorm();
    r.per_output.push_back(1.0 - ss_res / ss_tot);
  }
  double sum = 0.0;
  for (double v : r.per_output) sum += v;
  r.aggregate = sum / static_cast<double>(r.per_output.size());
  return r;
}

RSquared r_squared(const SurrogateModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  return r_squared(model.evaluate_rows(x), y);
}

nlohmann::json SurrogateModel::to_json() const {
  require_trained();
  nlohmann::json report = {{"r2_test", report_.r2_test},
                           {"r2_aggregate", report_.r2_aggregate},
                           {"rmse_train", report_.rmse_train},
                           {"rmse_test", report_.rmse_test},
                           {"epochs", report_.epochs},
                           {"stop", vtp::to_string(report_.stop)},
                           {"losses", report_.losses},
                           {"n_train", report_.n_train},
                           {"n_test", report_.n_test}};
  return {{"format", "vtp-surrogate"},
          {"version", kModelVersion},
          {"input_dim", input_dim()},
          {"hidden_width", hidden_width()},
          {"output_dim", output_dim()},
          {"w1", matrix_to_json(w1_)},
          {"b1", vector_to_json(b1_)},
          {"w2", matrix_to_json(w2_)},
          {"b2", vector_to_json(b2_)},
          {"input_norm", {{"mean", vector_to_json(in_.mean)}, {"std", vector_to_json(in_.std)}}},
          {"output_norm", {{"mean", vector_to_json(out_.mean)}, {"std", vector_to_json(out_.std)}}},
          {"reference_input", vector_to_json(reference_)},
          {"fit_report", report},
          {"dataset_fingerprint", fingerprint_}};
}

SurrogateModel SurrogateModel::from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "vtp-surrogate") throw Error(ErrorCode::IoError, "not a surrogate model file");
    if (j.value("version", 0) != kModelVersion) throw Error(ErrorCode::IoError, "unsupported model version");
    SurrogateModel m;
    m.w1_ = matrix_from_json(j.at("w1"));
    m.b1_ = vector_from_json(j.at("b1"));
    m.w2_ = matrix_from_json(j.at("w2"));
    m.b2_ = vector_from_json(j.at("b2"));
    m.in_ = {vector_from_json(j.at("input_norm").at("mean")), vector_from_json(j.at("input_norm").at("std"))};
    m.out_ = {vector_from_json(j.at("output_norm").at("mean")), vector_from_json(j.at("output_norm").at("std"))};
    m.reference_ = vector_from_json(j.at("reference_input"));
    const Eigen::Index d = m.w1_.cols(), h = m.w1_.rows(), o = m.w2_.rows();
    if (m.b1_.size() != h || m.w2_.cols() != h || m.b2_.size() != o || m.in_.mean.size() != d ||
        m.in_.std.size() != d || m.out_.mean.size() != o || m.out_.std.size() != o) {
      throw Error(ErrorCode::IoError, "inconsistent layer sizes in model file");
    }
    const auto& r = j.at("fit_report");
    FitReport report;
    report.r2_test = r.at("r2_test").get<std::vector<double>>();
    report.r2_aggregate = r.at("r2_aggregate").get<double>();
    report.rmse_train = r.at("rmse_train").get<double>();
    report.rmse_test = r.at("rmse_test").get<double>();
    report.epochs = r.at("epochs").get<int>();
    const std::string stop = r.at("stop").get<std::string>();
    report.stop = stop == "tolerance"         ? StopReason::Tolerance
                  : stop == "lambda_overflow" ? StopReason::LambdaOverflow
                                              : StopReason::EpochCap;
    report.losses = r.at("losses").get<std::vector<double>>();
    report.n_train = r.at("n_train").get<std::size_t>();
    report.n_test = r.at("n_test").get<std::size_t>();
    m.mark_trained(std::move(report), j.value("dataset_fingerprint", ""));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("malformed model file: ") + e.what());
  }
}

void SurrogateModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << to_json().dump() << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

SurrogateModel SurrogateModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace vtp
