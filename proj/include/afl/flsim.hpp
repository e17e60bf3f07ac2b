#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

// Desk-scale federated learning: logistic regression on a two-class Gaussian
// mixture, with client data quality tied to client efficiency.
namespace afl::flsim {

using ClientId = std::size_t;

struct SyntheticDataset {
  Eigen::MatrixXd features;         // rows = samples
  std::vector<int> labels;          // observed labels in {0, 1}
  std::vector<int> clean_labels;    // labels before any noise or poisoning
  std::optional<ClientId> owner;    // nullopt for the held-out test set

  std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
};

/// Logistic-regression weights; the bias is the last entry.
struct ModelParams {
  Eigen::VectorXd weights;

  static ModelParams zeros(std::size_t dim) { return {Eigen::VectorXd::Zero(dim + 1)}; }
  bool finite() const { return weights.allFinite(); }
};

enum class Algorithm { FedAvg, FedProx, Scaffold };

std::string_view to_string(Algorithm algo);
Algorithm parse_algorithm(std::string_view text);

/// SCAFFOLD control variates: one server vector plus one per client id.
struct ControlVariates {
  Eigen::VectorXd server;
  std::vector<Eigen::VectorXd> client;

  static ControlVariates zeros(std::size_t n_clients, std::size_t dim);
};

struct AggregationConfig {
  Algorithm algo = Algorithm::FedAvg;
  int local_epochs = 5;
  double learning_rate = 0.5;
  double prox_mu = 0.0;
  ControlVariates control;  // only read for Scaffold

  void validate() const;
};

struct PoisonConfig {
  double flip_rate = 0.0;
  std::set<ClientId> target_clients;  // empty: applies to any dataset
};

struct GenerationOptions {
  std::size_t dim = 20;
  double noise_scale = 0.4;       // label-noise rate at theta = 0
  std::size_t base_samples = 200; // a client holds base_samples * (1 + theta) rows
  std::size_t test_samples = 1000;
  double separation = 1.5;        // distance of each class mean from the origin
  double margin = 0.0;            // rows closer than this to the true boundary are redrawn
};

struct Population {
  std::vector<SyntheticDataset> clients;
  SyntheticDataset test;
};

/// Deterministic in `seed`. Client i gets round(base_samples * (1 + theta_i))
/// rows with label-noise rate (1 - theta_i) * noise_scale. The test set is clean.
Population generate_population(std::size_t n_clients, std::span<const double> thetas,
                               std::uint64_t seed, const GenerationOptions& opts = {});

/// Result of one client's local training. control_delta is empty unless the
/// algorithm is Scaffold.
struct LocalUpdate {
  ClientId client = 0;
  ModelParams model;
  Eigen::VectorXd control_delta;
  std::size_t samples = 0;
};

/// local_epochs full-batch gradient steps on the mean logistic loss starting
/// from `global`. FedProx adds (prox_mu / 2) * ||w - w_global||^2; Scaffold
/// corrects each step with (c_server - c_client) and reports the option-II
/// control-variate change.
LocalUpdate local_train(const ModelParams& global, const SyntheticDataset& data,
                        const AggregationConfig& cfg);

/// Sample-count weighted average. Averaging copies of one model returns that
/// model bit for bit.
ModelParams aggregate(std::span<const ModelParams> models,
                      std::span<const std::size_t> sample_counts);

/// Weighted average of the updates' models. For Scaffold it also folds each
/// update's control delta into its client's variate and moves the server
/// variate by the sum of deltas over the total client count.
ModelParams aggregate(std::span<const LocalUpdate> updates, AggregationConfig& cfg);

/// Fraction of rows whose predicted class (logit > 0, ties to class 0)
/// matches the observed label.
double evaluate_accuracy(const ModelParams& model, const SyntheticDataset& test);

/// Test-accuracy gain of the locally trained model over the model it started from.
double realized_contribution(const ModelParams& global, const ModelParams& local,
                             const SyntheticDataset& test);

/// Flips each label independently with probability flip_rate.
SyntheticDataset poison(const SyntheticDataset& data, const PoisonConfig& cfg, std::uint64_t seed);

/// Gradient of the mean logistic loss at `model`.
Eigen::VectorXd logistic_gradient(const ModelParams& model, const SyntheticDataset& data);

}  // namespace afl::flsim
