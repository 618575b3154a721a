#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtp/dataset.hpp"
#include "vtp/params.hpp"

namespace vtp {

struct Normalization {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  // Column statistics of the rows of `data`; a constant column gets std 1.
  static Normalization fit(const Eigen::MatrixXd& data);
  Eigen::VectorXd normalize(const Eigen::VectorXd& v) const;
  Eigen::VectorXd denormalize(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& m) const;
};

struct TrainConfig {
  int hidden_width = 30;
  int max_epochs = 100;
  double lambda_init = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 10.0;
  double lambda_max = 1e10;
  double tolerance = 1e-9;  // minimum loss decrease per accepted step
  int patience = 5;         // consecutive small decreases before stopping
  std::uint64_t seed = 1;
};

enum class StopReason { EpochCap, Tolerance, LambdaOverflow };
std::string to_string(StopReason reason);

struct FitReport {
  std::vector<double> r2_test;  // one per output
  double r2_aggregate = 0.0;    // mean of r2_test
  double rmse_train = 0.0;      // in output units
  double rmse_test = 0.0;
  int epochs = 0;
  StopReason stop = StopReason::EpochCap;
  std::vector<double> losses;  // normalized MSE: initial, then every accepted step
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

struct TrainingData {
  Eigen::MatrixXd x_train, y_train;  // one sample per row
  Eigen::MatrixXd x_test, y_test;

  static TrainingData from(const SampleSet& set);
};

struct Prediction {
  std::array<double, kModeCount> freqs_hz{};
  bool in_training_box = true;

  double f52() const { return freqs_hz[4] / freqs_hz[1]; }
};

inline constexpr double kR2Gate = 0.9;
inline constexpr double kTrainingBox = 0.2;

class SurrogateModel {
 public:
  SurrogateModel() = default;
  // Untrained network with Xavier-uniform weights and identity normalization.
  SurrogateModel(int input_dim, int output_dim, int hidden_width, std::uint64_t seed);

  bool trained() const { return trained_; }
  int input_dim() const { return static_cast<int>(w1_.cols()); }
  int output_dim() const { return static_cast<int>(w2_.rows()); }
  int hidden_width() const { return static_cast<int>(w1_.rows()); }
  std::size_t weight_count() const;

  const FitReport& report() const { return report_; }
  const std::string& dataset_fingerprint() const { return fingerprint_; }
  bool reliable() const { return trained_ && report_.r2_aggregate > kR2Gate; }
  // Throws GateFailed unless the held-out R² clears the gate.
  void require_reliable() const;

  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd evaluate_rows(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd input_jacobian(const Eigen::VectorXd& x) const;

  Prediction predict(const PlateParams& params) const;
  // d f_i / d param_j in Hz per parameter unit.
  Eigen::MatrixXd jacobian(const PlateParams& params) const;

  // Flattened weights: per hidden unit [w1 row, b1], then per output [w2 row, b2].
  Eigen::VectorXd weights() const;
  void set_weights(const Eigen::VectorXd& w);

  Eigen::MatrixXd& w1() { return w1_; }
  Eigen::VectorXd& b1() { return b1_; }
  Eigen::MatrixXd& w2() { return w2_; }
  Eigen::VectorXd& b2() { return b2_; }
  const Eigen::MatrixXd& w1() const { return w1_; }
  const Eigen::VectorXd& b1() const { return b1_; }
  const Eigen::MatrixXd& w2() const { return w2_; }
  const Eigen::VectorXd& b2() const { return b2_; }
  const Normalization& input_norm() const { return in_; }
  const Normalization& output_norm() const { return out_; }
  const Eigen::VectorXd& reference_input() const { return reference_; }

  void set_normalization(Normalization in, Normalization out);
  void set_reference_input(Eigen::VectorXd reference) { reference_ = std::move(reference); }
  void mark_trained(FitReport report, std::string fingerprint = {});

  // Test hook: replaces the sigmoid by the identity.
  void set_linear_hidden(bool linear) { linear_hidden_ = linear; }
  bool linear_hidden() const { return linear_hidden_; }

  // Forward pass on normalized data: hidden activations and outputs.
  void forward_normalized(const Eigen::MatrixXd& xn, Eigen::MatrixXd& hidden, Eigen::MatrixXd& out) const;

  nlohmann::json to_json() const;
  static SurrogateModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static SurrogateModel load(const std::filesystem::path& path);

 private:
  void require_trained() const;

  Eigen::MatrixXd w1_;
  Eigen::VectorXd b1_;
  Eigen::MatrixXd w2_;
  Eigen::VectorXd b2_;
  Normalization in_;
  Normalization out_;
  Eigen::VectorXd reference_;
  FitReport report_;
  std::string fingerprint_;
  bool trained_ = false;
  bool linear_hidden_ = false;
};

// Levenberg-Marquardt on the mean squared error of z-scored outputs.
// Normalization statistics come from the training rows only.
SurrogateModel train(const TrainingData& data, const TrainConfig& config);
SurrogateModel train(const SampleSet& set, const TrainConfig& config);

struct RSquared {
  std::vector<double> per_output;
  double aggregate = 0.0;
};

// 1 - SS_res/SS_tot per column, SS_tot about the column mean of `labels`.
// Throws DegenerateVariance when a label column is constant.
RSquared r_squared(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& labels);
RSquared r_squared(const SurrogateModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

namespace lm {

// Jᵀ J and Jᵀ r for the residuals net(xn) - yn, assembled blockwise without
// forming J. Weight order matches SurrogateModel::weights().
void normal_equations(const SurrogateModel& model, const Eigen::MatrixXd& xn, const Eigen::MatrixXd& yn,
                      Eigen::MatrixXd& jtj, Eigen::VectorXd& jtr);

// Explicit residual Jacobian, one row per (sample, output) in sample-major
// order. Memory is rows × weights, so only for small problems.
Eigen::MatrixXd residual_jacobian(const SurrogateModel& model, const Eigen::MatrixXd& xn);

}  // namespace lm

}  // namespace vtp
