#include "afl/flsim.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "afl/seeding.hpp"

namespace afl::flsim {

namespace {

constexpr std::uint64_t kTruthStream = 0;
constexpr std::uint64_t kTestStream = 1;
constexpr std::uint64_t kClientStream = 2;

Eigen::VectorXd logits(const ModelParams& model, const SyntheticDataset& data) {
  const Eigen::Index d = data.features.cols();
  if (model.weights.size() != d + 1) {
    throw std::invalid_argument("model dimension does not match dataset dimension");
  }
  return (data.features * model.weights.head(d)).array() + model.weights(d);
}

SyntheticDataset draw_dataset(std::size_t rows, double noise_rate, const Eigen::VectorXd& truth,
                              const GenerationOptions& opts, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SyntheticDataset out;
  out.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(opts.dim));
  out.labels.resize(rows);
  out.clean_labels.resize(rows);
  Eigen::VectorXd x(static_cast<Eigen::Index>(opts.dim));
  for (std::size_t r = 0; r < rows; ++r) {
    const int y = coin(rng) ? 1 : 0;
    const double sign = y == 1 ? 1.0 : -1.0;
    do {
      for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = normal(rng);
      x += sign * opts.separation * truth;
    } while (opts.margin > 0.0 && sign * truth.dot(x) < opts.margin);
    out.features.row(static_cast<Eigen::Index>(r)) = x.transpose();
    out.clean_labels[r] = y;
    out.labels[r] = unit(rng) < noise_rate ? 1 - y : y;
  }
  return out;
}

}  // namespace

std::string_view to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::FedAvg:
      return "fedavg";
    case Algorithm::FedProx:
      return "fedprox";
    case Algorithm::Scaffold:
      return "scaffold";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view text) {
  if (text == "fedavg") return Algorithm::FedAvg;
  if (text == "fedprox") return Algorithm::FedProx;
  if (text == "scaffold") return Algorithm::Scaffold;
  throw std::invalid_argument("unknown aggregation algorithm '" + std::string(text) +
                              "' (expected fedavg, fedprox or scaffold)");
}

ControlVariates ControlVariates::zeros(std::size_t n_clients, std::size_t dim) {
  const auto width = static_cast<Eigen::Index>(dim + 1);
  ControlVariates cv;
  cv.server = Eigen::VectorXd::Zero(width);
  cv.client.assign(n_clients, Eigen::VectorXd::Zero(width));
  return cv;
}

void AggregationConfig::validate() const {
  if (local_epochs < 1) throw std::invalid_argument("invariant violated: local_epochs >= 1");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("invariant violated: learning_rate >= 0");
  if (!(prox_mu >= 0.0)) throw std::invalid_argument("invariant violated: prox_mu >= 0");
}

Population generate_population(std::size_t n_clients, std::span<const double> thetas,
                               std::uint64_t seed, const GenerationOptions& opts) {
  if (n_clients == 0) throw std::invalid_argument("generate_population: n_clients must be positive");
  if (thetas.size() != n_clients) {
    throw std::invalid_argument("generate_population: need one theta per client");
  }
  if (opts.dim == 0) throw std::invalid_argument("generate_population: dim must be positive");

  std::mt19937_64 truth_rng(derive_seed(seed, {kTruthStream}));
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd truth(static_cast<Eigen::Index>(opts.dim));
  for (Eigen::Index j = 0; j < truth.size(); ++j) truth(j) = normal(truth_rng);
  truth.normalize();

  Population pop;
  pop.clients.reserve(n_clients);
  for (std::size_t i = 0; i < n_clients; ++i) {
    const double theta = thetas[i];
    if (!(theta >= 0.0 && theta <= 1.0)) {
      throw std::domain_error("generate_population: theta outside [0, 1]");
    }
    const auto rows = static_cast<std::size_t>(
        std::llround(static_cast<double>(opts.base_samples) * (1.0 + theta)));
    std::mt19937_64 rng(derive_seed(seed, {kClientStream, i}));
    SyntheticDataset ds = draw_dataset(std::max<std::size_t>(rows, 1),
                                       (1.0 - theta) * opts.noise_scale, truth, opts, rng);
    ds.owner = i;
    pop.clients.push_back(std::move(ds));
  }
  std::mt19937_64 test_rng(derive_seed(seed, {kTestStream}));
  pop.test = draw_dataset(std::max<std::size_t>(opts.test_samples, 1), 0.0, truth, opts, test_rng);
  return pop;
}

Eigen::VectorXd logistic_gradient(const ModelParams& model, const SyntheticDataset& data) {
  if (data.rows() == 0) throw std::invalid_argument("logistic_gradient: empty dataset");
  const Eigen::Index d = data.features.cols();
  const Eigen::VectorXd z = logits(model, data);
  Eigen::VectorXd residual(z.size());
  for (Eigen::Index r = 0; r < z.size(); ++r) {
    residual(r) = 1.0 / (1.0 + std::exp(-z(r))) - data.labels[static_cast<std::size_t>(r)];
  }
  const double n = static_cast<double>(data.rows());
  Eigen::VectorXd grad(d + 1);
  grad.head(d) = data.features.transpose() * residual / n;
  grad(d) = residual.sum() / n;
  return grad;
}

LocalUpdate local_train(const ModelParams& global, const SyntheticDataset& data,
                        const AggregationConfig& cfg) {
  if (data.rows() == 0) throw std::invalid_argument("local_train: empty dataset");
  if (!global.finite()) throw std::invalid_argument("local_train: global model is not finite");
  cfg.validate();

  LocalUpdate out;
  out.client = data.owner.value_or(0);
  out.samples = data.rows();
  out.model = global;

  Eigen::VectorXd correction;
  if (cfg.algo == Algorithm::Scaffold) {
    if (!data.owner || *data.owner >= cfg.control.client.size()) {
      throw std::invalid_argument("local_train: no control variate for this client");
    }
    correction = cfg.control.server - cfg.control.client[*data.owner];
  }

  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    Eigen::VectorXd grad = logistic_gradient(out.model, data);
    if (cfg.algo == Algorithm::FedProx) grad += cfg.prox_mu * (out.model.weights - global.weights);
    if (cfg.algo == Algorithm::Scaffold) grad += correction;
    out.model.weights -= cfg.learning_rate * grad;
  }

  if (cfg.algo == Algorithm::Scaffold) {
    // Option II: c_i+ = c_i - c + (w_global - w_local) / (epochs * lr).
    if (cfg.learning_rate > 0.0) {
      const double steps = static_cast<double>(cfg.local_epochs) * cfg.learning_rate;
      out.control_delta = -cfg.control.server + (global.weights - out.model.weights) / steps;
    } else {
      out.control_delta = Eigen::VectorXd::Zero(global.weights.size());
    }
  }
  return out;
}

ModelParams aggregate(std::span<const ModelParams> models,
                      std::span<const std::size_t> sample_counts) {
  if (models.empty()) throw std::invalid_argument("aggregate: no models");
  if (models.size() != sample_counts.size()) {
    throw std::invalid_argument("aggregate: models and sample counts differ in length");
  }
  // Incremental weighted mean: identical inputs leave the mean untouched.
  ModelParams mean = models.front();
  double total = static_cast<double>(sample_counts.front());
  for (std::size_t i = 1; i < models.size(); ++i) {
    if (models[i].weights.size() != mean.weights.size()) {
      throw std::invalid_argument("aggregate: models differ in dimension");
    }
    const double w = static_cast<double>(sample_counts[i]);
    total += w;
    if (w > 0.0) mean.weights += (w / total) * (models[i].weights - mean.weights);
  }
  if (!(total > 0.0)) throw std::invalid_argument("aggregate: total sample count is zero");
  return mean;
}

ModelParams aggregate(std::span<const LocalUpdate> updates, AggregationConfig& cfg) {
  if (updates.empty()) throw std::invalid_argument("aggregate: no updates");
  std::vector<ModelParams> models;
  std::vector<std::size_t> counts;
  models.reserve(updates.size());
  counts.reserve(updates.size());
  for (const LocalUpdate& u : updates) {
    models.push_back(u.model);
    counts.push_back(u.samples);
  }
  ModelParams merged = aggregate(models, counts);

  if (cfg.algo == Algorithm::Scaffold) {
    const auto n_total = static_cast<double>(cfg.control.client.size());
    Eigen::VectorXd server_step = Eigen::VectorXd::Zero(cfg.control.server.size());
    for (const LocalUpdate& u : updates) {
      if (u.client >= cfg.control.client.size() || u.control_delta.size() != server_step.size()) {
        throw std::invalid_argument("aggregate: malformed control-variate update");
      }
      cfg.control.client[u.client] += u.control_delta;
      server_step += u.control_delta;
    }
    cfg.control.server += server_step / n_total;
  }
  return merged;
}

double evaluate_accuracy(const ModelParams& model, const SyntheticDataset& test) {
  if (test.rows() == 0) throw std::invalid_argument("evaluate_accuracy: empty test set");
  const Eigen::VectorXd z = logits(model, test);
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < z.size(); ++r) {
    const int predicted = z(r) > 0.0 ? 1 : 0;
    if (predicted == test.labels[static_cast<std::size_t>(r)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.rows());
}

double realized_contribution(const ModelParams& global, const ModelParams& local,
                             const SyntheticDataset& test) {
  return evaluate_accuracy(local, test) - evaluate_accuracy(global, test);
}

SyntheticDataset poison(const SyntheticDataset& data, const PoisonConfig& cfg, std::uint64_t seed) {
  if (!(cfg.flip_rate >= 0.0 && cfg.flip_rate <= 1.0)) {
    throw std::domain_error("poison: flip_rate must lie in [0, 1]");
  }
  SyntheticDataset out = data;
  if (!cfg.target_clients.empty() &&
      (!data.owner || !cfg.target_clients.contains(*data.owner))) {
    return out;
  }
  std::mt19937_64 rng(derive_seed(seed, {data.owner.value_or(~0ULL)}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int& label : out.labels) {
    if (unit(rng) < cfg.flip_rate) label = 1 - label;
  }
  return out;
}

}  // namespace afl::flsim
