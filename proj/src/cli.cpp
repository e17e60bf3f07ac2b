#include "afl/cli.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <string_view>
#include <vector>

#include "afl/ledger.hpp"

namespace afl::cli {

namespace {

using experiment::ExperimentConfig;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    out.push_back(trim(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

struct Field {
  std::size_t line;
  std::string key;

  [[noreturn]] void fail(const std::string& message) const { throw ConfigError(line, key, message); }

  double real(std::string_view v) const {
    double x = 0.0;
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (v.empty() || ec != std::errc() || end != v.data() + v.size()) fail("expected a number, got '" + std::string(v) + "'");
    return x;
  }

  std::uint64_t integer(std::string_view v) const {
    std::uint64_t x = 0;
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (v.empty() || ec != std::errc() || end != v.data() + v.size()) {
      fail("expected a nonnegative integer, got '" + std::string(v) + "'");
    }
    return x;
  }

  bool boolean(std::string_view v) const {
    if (v == "true") return true;
    if (v == "false") return false;
    fail("expected true or false, got '" + std::string(v) + "'");
  }

  template <class Parse>
  auto list(std::string_view v, Parse parse) const {
    std::vector<decltype(parse(v))> out;
    for (std::string_view item : split_list(v)) out.push_back(parse(item));
    return out;
  }

  template <class Fn>
  auto wrap(Fn fn, std::string_view v) const {
    try {
      return fn(std::string(v));
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }
};

using Setter = std::function<void(ExperimentConfig&, const Field&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"n_clients", [](auto& c, const Field& f, auto v) { c.n_clients = f.integer(v); }},
      {"k_select",
       [](auto& c, const Field& f, auto v) {
         c.k_values = f.list(v, [&](std::string_view s) { return static_cast<std::size_t>(f.integer(s)); });
       }},
      {"rounds", [](auto& c, const Field& f, auto v) { c.rounds = f.integer(v); }},
      {"seeds", [](auto& c, const Field& f, auto v) { c.seeds = f.list(v, [&](std::string_view s) { return f.integer(s); }); }},
      {"lambda", [](auto& c, const Field& f, auto v) { c.lambda = f.real(v); }},
      {"delta", [](auto& c, const Field& f, auto v) { c.delta = f.real(v); }},
      {"regimes",
       [](auto& c, const Field& f, auto v) {
         c.regimes.clear();
         if (v == "none") return;
         c.regimes = f.list(v, [&](std::string_view s) {
           return f.wrap([](const std::string& x) { return mechanism::parse_regime(x); }, s);
         });
       }},
      {"baselines", [](auto& c, const Field& f, auto v) { c.baselines = f.boolean(v); }},
      {"theta_min", [](auto& c, const Field& f, auto v) { c.theta_min = f.real(v); }},
      {"theta_max", [](auto& c, const Field& f, auto v) { c.theta_max = f.real(v); }},
      {"margin_min", [](auto& c, const Field& f, auto v) { c.margin_min = f.real(v); }},
      {"margin_max", [](auto& c, const Field& f, auto v) { c.margin_max = f.real(v); }},
      {"dim", [](auto& c, const Field& f, auto v) { c.data.dim = f.integer(v); }},
      {"noise_scale", [](auto& c, const Field& f, auto v) { c.data.noise_scale = f.real(v); }},
      {"base_samples", [](auto& c, const Field& f, auto v) { c.data.base_samples = f.integer(v); }},
      {"test_samples", [](auto& c, const Field& f, auto v) { c.data.test_samples = f.integer(v); }},
      {"separation", [](auto& c, const Field& f, auto v) { c.data.separation = f.real(v); }},
      {"margin", [](auto& c, const Field& f, auto v) { c.data.margin = f.real(v); }},
      {"algo",
       [](auto& c, const Field& f, auto v) {
         c.algo = f.wrap([](const std::string& x) { return flsim::parse_algorithm(x); }, v);
       }},
      {"local_epochs", [](auto& c, const Field& f, auto v) { c.local_epochs = f.integer(v); }},
      {"learning_rate", [](auto& c, const Field& f, auto v) { c.learning_rate = f.real(v); }},
      {"prox_mu", [](auto& c, const Field& f, auto v) { c.prox_mu = f.real(v); }},
      {"w1", [](auto& c, const Field& f, auto v) { c.w1 = f.real(v); }},
      {"w2", [](auto& c, const Field& f, auto v) { c.w2 = f.real(v); }},
      {"coalition",
       [](auto& c, const Field& f, auto v) {
         if (v == "additive") {
           c.coalition = reputation::CoalitionMode::Additive;
         } else if (v == "retrain") {
           c.coalition = reputation::CoalitionMode::Retrain;
         } else {
           f.fail("expected additive or retrain, got '" + std::string(v) + "'");
         }
       }},
      {"poison_count", [](auto& c, const Field& f, auto v) { c.poison_count = f.integer(v); }},
      {"flip_rate", [](auto& c, const Field& f, auto v) { c.flip_rate = f.real(v); }},
      {"tamper_alpha",
       [](auto& c, const Field& f, auto v) {
         c.tamper_alpha.clear();
         if (v != "none") c.tamper_alpha = f.list(v, [&](std::string_view s) { return f.real(s); });
       }},
      {"tamper_beta",
       [](auto& c, const Field& f, auto v) {
         c.tamper_beta.clear();
         if (v != "none") c.tamper_beta = f.list(v, [&](std::string_view s) { return f.real(s); });
       }},
      {"ledger_mode",
       [](auto& c, const Field& f, auto v) {
         c.ledger_mode = f.wrap([](const std::string& x) { return experiment::parse_ledger_mode(x); }, v);
       }},
      {"tamper_policy",
       [](auto& c, const Field& f, auto v) {
         c.tamper_policy = f.wrap([](const std::string& x) { return auction::parse_tamper_policy(x); }, v);
       }},
      {"output_dir", [](auto& c, const Field&, auto v) { c.output_dir = std::string(v); }},
  };
  return table;
}

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string exact(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <class T, class Fmt>
std::string join(const std::vector<T>& xs, Fmt fmt, std::string_view sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += fmt(xs[i]);
  }
  return out;
}

std::string provenance_line(const ExperimentConfig& cfg) {
  return "# config_hash=" + config_hash(cfg) +
         " seeds=" + join(cfg.seeds, [](std::uint64_t s) { return std::to_string(s); }, ";") + "\n";
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

ConfigError::ConfigError(std::size_t line, std::string field, const std::string& message)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ", field '" + field + "': " + message : message),
      line_(line),
      field_(std::move(field)) {}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t, std::less<>> seen;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(line_no, std::string(line), "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const Field field{line_no, key};
    const auto it = setters().find(key);
    if (it == setters().end()) field.fail("unknown key");
    if (const auto prev = seen.find(key); prev != seen.end()) {
      field.fail("duplicate key (first set on line " + std::to_string(prev->second) + ")");
    }
    seen.emplace(key, line_no);
    if (value.empty()) field.fail("missing value");
    it->second(cfg, field, value);
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(0, "", e.what());
  }
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(0, "", "cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string canonical_text(const ExperimentConfig& cfg) {
  auto ints = [](const auto& xs) { return join(xs, [](auto x) { return std::to_string(x); }); };
  auto reals = [](const std::vector<double>& xs) { return xs.empty() ? std::string("none") : join(xs, exact); };
  std::ostringstream o;
  o << "n_clients = " << cfg.n_clients << "\n"
    << "k_select = " << ints(cfg.k_values) << "\n"
    << "rounds = " << cfg.rounds << "\n"
    << "seeds = " << ints(cfg.seeds) << "\n"
    << "lambda = " << exact(cfg.lambda) << "\n"
    << "delta = " << exact(cfg.delta) << "\n"
    << "regimes = "
    << (cfg.regimes.empty() ? std::string("none")
                            : join(cfg.regimes, [](mechanism::Regime r) { return std::string(mechanism::to_string(r)); }))
    << "\n"
    << "baselines = " << (cfg.baselines ? "true" : "false") << "\n"
    << "theta_min = " << exact(cfg.theta_min) << "\n"
    << "theta_max = " << exact(cfg.theta_max) << "\n"
    << "margin_min = " << exact(cfg.margin_min) << "\n"
    << "margin_max = " << exact(cfg.margin_max) << "\n"
    << "dim = " << cfg.data.dim << "\n"
    << "noise_scale = " << exact(cfg.data.noise_scale) << "\n"
    << "base_samples = " << cfg.data.base_samples << "\n"
    << "test_samples = " << cfg.data.test_samples << "\n"
    << "separation = " << exact(cfg.data.separation) << "\n"
    << "margin = " << exact(cfg.data.margin) << "\n"
    << "algo = " << flsim::to_string(cfg.algo) << "\n"
    << "local_epochs = " << cfg.local_epochs << "\n"
    << "learning_rate = " << exact(cfg.learning_rate) << "\n"
    << "prox_mu = " << exact(cfg.prox_mu) << "\n"
    << "w1 = " << exact(cfg.w1) << "\n"
    << "w2 = " << exact(cfg.w2) << "\n"
    << "coalition = " << (cfg.coalition == reputation::CoalitionMode::Additive ? "additive" : "retrain") << "\n"
    << "poison_count = " << cfg.poison_count << "\n"
    << "flip_rate = " << exact(cfg.flip_rate) << "\n"
    << "tamper_alpha = " << reals(cfg.tamper_alpha) << "\n"
    << "tamper_beta = " << reals(cfg.tamper_beta) << "\n"
    << "ledger_mode = " << experiment::to_string(cfg.ledger_mode) << "\n"
    << "tamper_policy = " << auction::to_string(cfg.tamper_policy) << "\n";
  return o.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = canonical_text(cfg);
  return ledger::to_hex(ledger::sha256({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()}));
}

int cmd_run(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const experiment::ExperimentResult result = experiment::run_experiment(cfg);
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    const std::string head = provenance_line(cfg);

    std::string rounds = head + "mechanism,k,seed,round,n_selected,server_utility,total_payment,accuracy_global\n";
    for (const auto& t : result.reports) {
      rounds += std::string(auction::to_string(t.mechanism)) + "," + std::to_string(t.k) + "," +
                std::to_string(t.seed) + "," + std::to_string(t.report.round) + "," +
                std::to_string(t.report.selected.size()) + "," + num(t.report.server_utility) + "," +
                num(t.report.total_payment()) + "," + num(t.report.accuracy_global) + "\n";
    }
    write_file(dir / "rounds.csv", rounds);

    std::string summary = head + "mechanism,k,mean_utility,std_utility\n";
    for (const auto& s : result.summary) {
      summary += std::string(auction::to_string(s.mechanism)) + "," + std::to_string(s.k) + "," +
                 num(s.mean_utility) + "," + num(s.std_utility) + "\n";
    }
    write_file(dir / "summary.csv", summary);

    std::string reputation = head + "round,client,epsilon,behavior\n";
    for (const auto& p : result.trajectories) {
      reputation += std::to_string(p.round) + "," + std::to_string(p.client) + "," + num(p.epsilon) + "," +
                    std::string(auction::to_string(p.behavior)) + "\n";
    }
    write_file(dir / "reputation.csv", reputation);

    if (!cfg.tamper_alpha.empty()) {
      std::string robustness = head + "alpha,beta,ledger_mode,mean_utility\n";
      for (const auto& r : result.robustness) {
        robustness += num(r.alpha) + "," + num(r.beta) + "," + std::string(experiment::to_string(r.mode)) + "," +
                      num(r.mean_utility) + "\n";
      }
      write_file(dir / "robustness.csv", robustness);
    }

    if (result.ledger) {
      result.ledger->save(dir / "ledger.bin");
      write_file(dir / "ledger.jsonl", result.ledger->to_jsonl());
    }
    out << "wrote results to " << dir.string() << " (config_hash=" << config_hash(cfg) << ")\n";
    return kOk;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

int cmd_run(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = parse_config(config_path);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsage;
  }
  return cmd_run(cfg, out, err);
}

int cmd_verify_ledger(const std::filesystem::path& path, std::ostream& out, std::ostream& err) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    err << "error: cannot read " << path.string() << "\n";
    return kUsage;
  }
  try {
    const ledger::HashChainLedger chain = ledger::HashChainLedger::load(path);
    if (const auto bad = chain.verify_chain()) {
      out << "tampered record " << *bad << "\n";
      return kFailure;
    }
    out << "Ok (" << chain.size() << " records)\n";
    return kOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

int cmd_solve(double theta, double lambda, double delta, const std::string& regime, std::ostream& out,
              std::ostream& err) {
  try {
    mechanism::MarketParams params;
    params.lambda = lambda;
    params.delta = delta;
    params.regime = mechanism::parse_regime(regime);
    params.validate();
    const mechanism::Efficiency t(theta);
    const mechanism::Contract c = mechanism::solve(t, params);
    out << "q=" << exact(c.q) << " R=" << exact(c.r) << " client_utility=" << exact(mechanism::client_utility(c, t, delta))
        << " server_utility=" << exact(mechanism::server_utility_per_client(c, params)) << "\n";
    return kOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace afl::cli
