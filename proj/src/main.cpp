#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lsq/audit.hpp"
#include "lsq/bounds.hpp"
#include "lsq/data_io.hpp"
#include "lsq/errors.hpp"
#include "lsq/regression.hpp"
#include "lsq/simulate.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

unsigned default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

struct GlobalOptions {
  std::string out = ".";
  unsigned threads = default_threads();
  std::uint64_t seed = 1;
  std::string config_path;
};

struct AuditOptions {
  std::string data;
  std::string schema;
  std::string direction = "e1";
  std::string method = "one-greedy";
  std::string target = "delta";
  std::string loss = "squared";
  double tau = 1.0;
  std::size_t k_max = 0;
  std::size_t candidate_pool = 0;
  std::uint64_t budget = 2'000'000;
  bool allow_exhaustive = false;
  bool dry_run = false;
};

struct BoundsOptions {
  std::string kind;
  std::size_t n = 0;
  std::size_t p = 0;
  std::size_t k = 0;
  double alpha = -1.0;
  double t = 0.0;
  double delta = 0.0;
  std::string noise = "gaussian";
  double df = 3.0;
  double noise_scale = 1.0;
  double sigma_inv_norm = 1.0;
  double sigma_inv_v_norm = 1.0;
  double omega = lsq::kGaussianPsi2;
  double kappa = 1.0;
  double beta_norm = 0.0;
  double eta_misspec = -1.0;
  double constant_C = 1.0;
  double constant_c = 1.0;
  bool dry_run = false;
};

struct SimulateOptions {
  bool figure1 = false;
  bool regime_grid = false;
  std::size_t n = 1000;
  std::size_t p = 1;
  std::size_t replicates = 50;
  std::vector<double> alphas = {0.01, 0.02, 0.03, 0.04, 0.05};
  std::string direction = "e1";
  std::vector<std::string> methods = {"amip", "one_greedy", "adversarial_oracle", "theory"};
  std::vector<double> beta;
  std::vector<double> sigma_diag;
  std::string covariates;
  std::string response;
  std::string noise = "gaussian";
  double df = 3.0;
  double noise_scale = 1.0;
  std::vector<std::size_t> n_list = {200, 800, 3200};
  std::vector<std::string> regions = {"I", "II", "III", "IV"};
  std::size_t seeds_per_cell = 30;
  bool dry_run = false;
};

struct SummarizeOptions {
  std::string data;
  std::string schema;
  std::string trace;
  bool dry_run = false;
};

// One entry per long flag so a config file can supply any flag the command
// line did not. The command line always wins.
struct Binding {
  CLI::Option* option = nullptr;
  std::function<void(const json&)> apply;
};
using BindingMap = std::map<std::string, Binding>;

template <class T>
CLI::Option* bind_option(CLI::App& cmd, BindingMap& map, const std::string& name, T& target,
                         const std::string& help) {
  CLI::Option* opt = cmd.add_option("--" + name, target, help);
  map[name] = {opt, [&target](const json& v) { target = v.get<T>(); }};
  return opt;
}

CLI::Option* bind_flag(CLI::App& cmd, BindingMap& map, const std::string& name, bool& target,
                       const std::string& help) {
  CLI::Option* opt = cmd.add_flag("--" + name, target, help);
  map[name] = {opt, [&target](const json& v) { target = v.get<bool>(); }};
  return opt;
}

void apply_config_overlay(const std::string& path, const BindingMap& globals,
                          const BindingMap& active) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw lsq::UsageError("config: cannot open " + path);
  json overlay;
  try {
    overlay = json::parse(in);
  } catch (const json::exception& e) {
    throw lsq::UsageError(std::string("config: invalid json: ") + e.what());
  }
  if (!overlay.is_object()) throw lsq::UsageError("config: expected a json object of flags");
  for (const auto& [key, value] : overlay.items()) {
    const Binding* binding = nullptr;
    if (const auto it = globals.find(key); it != globals.end()) binding = &it->second;
    if (!binding)
      if (const auto it = active.find(key); it != active.end()) binding = &it->second;
    if (!binding) throw lsq::UsageError("config: unknown key '" + key + "' for this subcommand");
    if (binding->option->count() > 0) continue;
    try {
      binding->apply(value);
    } catch (const json::exception&) {
      throw lsq::UsageError("config: bad value for '" + key + "'");
    }
  }
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw lsq::IoError("cannot open: " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Timing, timestamp, and thread count live only in this sidecar; the report
// and config files stay byte-identical across reruns and --threads settings.
struct RunContext {
  const GlobalOptions& global;
  std::vector<std::string> argv;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
  std::string started_utc = utc_now();
};

fs::path prepare_out(const std::string& out) {
  fs::path dir(out.empty() ? "." : out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw lsq::IoError("cannot create output directory: " + dir.string());
  return dir;
}

void write_run_info(const RunContext& ctx, const fs::path& out) {
  json info;
  info["argv"] = ctx.argv;
  info["out"] = ctx.global.out;
  info["started_utc"] = ctx.started_utc;
  info["threads"] = ctx.global.threads;
  info["wall_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - ctx.started).count();
  lsq::write_text_file((out / "run_info.json").string(), info.dump(2));
}

void finish_echo(json& echo, const GlobalOptions& g, const char* subcommand) {
  echo["seed"] = g.seed;
  echo["subcommand"] = subcommand;
}

struct Direction {
  lsq::Vector v;
  std::optional<std::size_t> coordinate;
};

// Accepts "e<j>" for the j-th coordinate (1-based) or a comma-separated list.
Direction parse_direction(const std::string& text, std::size_t p) {
  if (text.empty()) throw lsq::UsageError("direction must not be empty");
  if (text[0] == 'e' && text.size() > 1 &&
      text.find_first_not_of("0123456789", 1) == std::string::npos) {
    const unsigned long j = std::stoul(text.substr(1));
    if (j < 1 || j > p)
      throw lsq::UsageError("direction " + text + ": coordinate out of range 1.." +
                            std::to_string(p));
    lsq::Vector v(p, 0.0);
    v[j - 1] = 1.0;
    return {std::move(v), j - 1};
  }
  lsq::Vector v;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = text.find(',', start);
    const std::string piece =
        pos == std::string::npos ? text.substr(start) : text.substr(start, pos - start);
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(piece, &used);
    } catch (const std::exception&) {
      used = piece.size() + 1;
    }
    if (used != piece.size())
      throw lsq::UsageError("direction entry '" + piece + "' is not a number");
    v.push_back(value);
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (v.size() != p)
    throw lsq::UsageError("direction has " + std::to_string(v.size()) + " entries, need " +
                          std::to_string(p));
  return {std::move(v), std::nullopt};
}

int run_audit(const GlobalOptions& g, const AuditOptions& o, const RunContext& ctx) {
  if (o.data.empty()) throw lsq::UsageError("audit: --data is required");
  if (o.schema.empty()) throw lsq::UsageError("audit: --schema is required");
  if (o.target != "delta" && o.target != "flip")
    throw lsq::UsageError("audit: --target must be delta or flip");
  if (o.method != "one-greedy" && o.method != "amip" && o.method != "brute-force")
    throw lsq::UsageError("audit: --method must be one-greedy, amip, or brute-force");
  if (o.loss != "squared" && o.loss != "huber")
    throw lsq::UsageError("audit: --loss must be squared or huber");
  if (o.method == "brute-force" && !o.allow_exhaustive)
    throw lsq::UsageError("audit: brute-force enumeration needs --allow-exhaustive");

  const lsq::TableSchema schema = lsq::table_schema_from_json(slurp(o.schema));
  lsq::Dataset dataset = lsq::load_dataset(o.data, schema);
  if (!schema.fixed_effect_columns.empty())
    dataset = lsq::expand_fixed_effects(dataset, schema.fixed_effect_columns);

  const Direction direction = parse_direction(o.direction, dataset.p());
  const bool flip = o.target == "flip";

  lsq::AuditQuery query;
  query.direction = direction.v;
  if (flip) {
    if (!direction.coordinate)
      throw lsq::UsageError("audit: flip audits need a coordinate direction like e1");
    query.target = lsq::AuditTarget::flip_sign;
    query.flip_coordinate = *direction.coordinate;
  }
  const std::size_t slack = dataset.n() > dataset.p() ? dataset.n() - dataset.p() : 0;
  query.k_max = o.k_max ? o.k_max : (flip ? slack : 0);
  if (query.k_max == 0) throw lsq::UsageError("audit: --k-max is required for a delta audit");
  if (o.loss == "huber") {
    query.loss.kind = lsq::Loss::huber;
    query.loss.tau = o.tau;
    query.huber.tau = o.tau;
  }
  query.candidate_pool = o.candidate_pool;

  json echo;
  echo["allow_exhaustive"] = o.allow_exhaustive;
  echo["budget"] = o.budget;
  echo["candidate_pool"] = o.candidate_pool;
  echo["columns"] = dataset.p();
  echo["data"] = o.data;
  echo["direction"] = o.direction;
  echo["k_max"] = query.k_max;
  echo["loss"] = o.loss;
  echo["method"] = o.method;
  echo["rows"] = dataset.n();
  echo["schema"] = o.schema;
  echo["target"] = o.target;
  echo["tau"] = o.tau;
  finish_echo(echo, g, "audit");
  if (o.dry_run) {
    std::cout << echo.dump(2) << "\n";
    return 0;
  }

  lsq::AuditTrace trace;
  if (o.method == "one-greedy")
    trace = lsq::one_greedy(dataset, query);
  else if (o.method == "amip")
    trace = lsq::amip_audit(dataset, query);
  else
    trace = lsq::brute_force_delta(dataset, query, o.budget);

  const fs::path out = prepare_out(g.out);
  lsq::emit_report(trace, (out / "audit_report.json").string());
  lsq::write_text_file((out / "audit_config.json").string(), echo.dump(2));
  write_run_info(ctx, out);
  std::printf("achieved_delta=%.10g removed=%zu flip_at=%s\n", trace.achieved_delta,
              trace.removed.size(),
              trace.flip_at ? std::to_string(*trace.flip_at).c_str() : "none");
  std::printf("wrote %s\n", (out / "audit_report.json").string().c_str());
  return 0;
}

int run_bounds(const GlobalOptions& g, const BoundsOptions& o, const RunContext& ctx) {
  static const std::set<std::string> kinds = {"asymptotic-lb", "finite-lb", "gaussian-ub",
                                              "misspec-rate", "consistency-rate"};
  if (!kinds.count(o.kind))
    throw lsq::UsageError(
        "bounds: --kind must be one of asymptotic-lb, finite-lb, gaussian-ub, misspec-rate, "
        "consistency-rate");
  const lsq::NoiseDist noise{lsq::parse_noise_kind(o.noise), o.df};

  double alpha = o.alpha;
  if (alpha < 0.0) {
    if (o.n == 0) throw lsq::UsageError("bounds: give --alpha, or --k and --n to derive it");
    alpha = lsq::removal_fraction(o.k, o.n);
  }
  const double eta =
      o.eta_misspec >= 0.0 ? o.eta_misspec : (o.kind == "consistency-rate" ? 1.0 : 0.0);

  lsq::BoundParams params;
  params.n = o.n;
  params.p = o.p;
  params.k = o.k;
  params.alpha = alpha;
  params.t = o.t;
  params.delta = o.delta;
  params.sigma_inv_norm = o.sigma_inv_norm;
  params.sigma_inv_v_norm = o.sigma_inv_v_norm;
  params.noise_scale = o.noise_scale;
  params.omega = o.omega;
  params.kappa = o.kappa;
  params.beta_norm = o.beta_norm;
  params.eta_misspec = eta;
  params.constant_C = o.constant_C;
  params.constant_c = o.constant_c;
  if (o.kind == "finite-lb") params.gamma = lsq::dimension_fraction(o.p, o.n, o.k);

  json echo;
  echo["alpha"] = alpha;
  echo["beta_norm"] = o.beta_norm;
  echo["constant_C"] = o.constant_C;
  echo["constant_c"] = o.constant_c;
  echo["delta"] = o.delta;
  echo["eta_misspec"] = eta;
  echo["gamma"] = params.gamma;
  echo["k"] = o.k;
  echo["kappa"] = o.kappa;
  echo["kind"] = o.kind;
  echo["n"] = o.n;
  echo["noise"] = o.noise;
  echo["noise_df"] = o.df;
  echo["noise_scale"] = o.noise_scale;
  echo["omega"] = o.omega;
  echo["p"] = o.p;
  echo["sigma_inv_norm"] = o.sigma_inv_norm;
  echo["sigma_inv_v_norm"] = o.sigma_inv_v_norm;
  echo["t"] = o.t;
  finish_echo(echo, g, "bounds");
  if (o.dry_run) {
    std::cout << echo.dump(2) << "\n";
    return 0;
  }

  lsq::BoundReport report;
  if (o.kind == "asymptotic-lb") {
    report = lsq::asymptotic_lower_bound(alpha, o.sigma_inv_v_norm * o.noise_scale, noise);
    report.params.sigma_inv_v_norm = o.sigma_inv_v_norm;
    report.params.noise_scale = o.noise_scale;
    report.params.n = o.n;
    report.params.p = o.p;
    report.params.k = o.k;
    if (o.n) report.regime = lsq::classify_regime(o.n, o.p, o.k);
  } else if (o.kind == "finite-lb") {
    report = lsq::finite_sample_lower_bound(params, noise);
  } else if (o.kind == "gaussian-ub") {
    report = lsq::gaussian_upper_bound(params);
  } else if (o.kind == "misspec-rate") {
    report = lsq::rate_bounds(lsq::RateKind::misspec_delta, params);
  } else {
    report = lsq::rate_bounds(lsq::RateKind::consistency, params);
  }

  const fs::path out = prepare_out(g.out);
  lsq::emit_report(report, (out / "bounds_report.json").string());
  lsq::write_text_file((out / "bounds_config.json").string(), echo.dump(2));
  write_run_info(ctx, out);
  std::printf("kind=%s value=%.10g probability_guarantee=%.10g vacuous=%s\n", report.kind.c_str(),
              report.value, report.probability_guarantee, report.vacuous ? "true" : "false");
  std::printf("wrote %s\n", (out / "bounds_report.json").string().c_str());
  return 0;
}

int run_simulate(const GlobalOptions& g, const SimulateOptions& o, const RunContext& ctx) {
  if (o.figure1 == o.regime_grid)
    throw lsq::UsageError("simulate: choose exactly one of --figure1 or --regime-grid");
  const lsq::NoiseDist noise{lsq::parse_noise_kind(o.noise), o.df};

  if (o.regime_grid) {
    if (o.n_list.empty()) throw lsq::UsageError("simulate: --n-list must not be empty");
    if (o.seeds_per_cell == 0) throw lsq::UsageError("simulate: --seeds-per-cell must be positive");
    for (const auto& region : o.regions)
      if (region != "I" && region != "II" && region != "III" && region != "IV")
        throw lsq::UsageError("simulate: regions are I, II, III, IV");

    json echo;
    echo["mode"] = "regime-grid";
    echo["n_list"] = o.n_list;
    echo["noise"] = o.noise;
    echo["noise_df"] = o.df;
    echo["noise_scale"] = o.noise_scale;
    echo["regions"] = o.regions;
    echo["seeds_per_cell"] = o.seeds_per_cell;
    finish_echo(echo, g, "simulate");
    if (o.dry_run) {
      std::cout << echo.dump(2) << "\n";
      return 0;
    }

    lsq::ModelSpec noise_spec;
    noise_spec.noise = noise;
    noise_spec.noise_scale = o.noise_scale;
    const std::vector<lsq::RegimeCell> table =
        lsq::run_regime_grid(o.n_list, o.regions, noise_spec, o.seeds_per_cell, g.seed, g.threads);

    const fs::path out = prepare_out(g.out);
    lsq::emit_report(table, (out / "regime_report.json").string());
    lsq::write_regime_table(table, (out / "regime_table.csv").string());
    lsq::write_text_file((out / "simulate_config.json").string(), echo.dump(2));
    write_run_info(ctx, out);
    std::printf("cells=%zu\n", table.size());
    std::printf("wrote %s\n", (out / "regime_report.json").string().c_str());
    return 0;
  }

  if (o.p == 0 || o.n < o.p) throw lsq::UsageError("simulate: need n >= p >= 1");
  if (o.replicates == 0) throw lsq::UsageError("simulate: --replicates must be positive");
  if (o.alphas.empty()) throw lsq::UsageError("simulate: --alphas must not be empty");
  for (const double alpha : o.alphas)
    if (!(alpha > 0.0 && alpha < 0.5))
      throw lsq::UsageError("simulate: each alpha must lie in (0, 0.5)");
  static const std::set<std::string> known_methods = {"amip", "one_greedy", "adversarial_oracle",
                                                      "theory"};
  if (o.methods.empty()) throw lsq::UsageError("simulate: --methods must not be empty");
  for (const auto& method : o.methods)
    if (!known_methods.count(method)) throw lsq::UsageError("simulate: unknown method " + method);
  if (!o.beta.empty() && o.beta.size() != o.p)
    throw lsq::UsageError("simulate: --beta needs exactly p entries");
  if (!o.sigma_diag.empty() && o.sigma_diag.size() != o.p)
    throw lsq::UsageError("simulate: --sigma-diag needs exactly p entries");

  lsq::SimulationConfig cfg;
  cfg.n = o.n;
  cfg.p = o.p;
  cfg.replicates = o.replicates;
  cfg.alphas = o.alphas;
  cfg.master_seed = g.seed;
  cfg.methods = o.methods;
  cfg.direction = parse_direction(o.direction, o.p).v;

  const lsq::Vector beta = o.beta.empty() ? lsq::Vector(o.p, 0.0) : lsq::Vector(o.beta);
  lsq::Matrix sigma;
  if (!o.sigma_diag.empty()) {
    sigma = lsq::Matrix(o.p, o.p);
    for (std::size_t i = 0; i < o.p; ++i) sigma(i, i) = o.sigma_diag[i];
  }
  const bool misspecified = !o.covariates.empty() || !o.response.empty();
  if (misspecified) {
    lsq::Misspec spec;
    spec.covariates = o.covariates.empty() ? lsq::CovariateFamily::gaussian
                                           : lsq::parse_covariate_family(o.covariates);
    spec.response = o.response.empty() ? lsq::ResponseMap::linear_plus_noise
                                       : lsq::parse_response_map(o.response);
    spec.noise = noise;
    spec.sigma = sigma;
    spec.beta = beta;
    spec.noise_scale = o.noise_scale;
    cfg.model = spec;
  } else {
    lsq::ModelSpec spec;
    spec.sigma = sigma;
    spec.beta = beta;
    spec.noise = noise;
    spec.noise_scale = o.noise_scale;
    cfg.model = spec;
  }

  json echo;
  echo["alphas"] = o.alphas;
  echo["beta"] = beta;
  echo["covariates"] = misspecified ? (o.covariates.empty() ? "gaussian" : o.covariates) : "gaussian";
  echo["direction"] = o.direction;
  echo["methods"] = o.methods;
  echo["misspecified"] = misspecified;
  echo["mode"] = "figure1";
  echo["n"] = o.n;
  echo["noise"] = o.noise;
  echo["noise_df"] = o.df;
  echo["noise_scale"] = o.noise_scale;
  echo["p"] = o.p;
  echo["replicates"] = o.replicates;
  echo["response"] = misspecified ? (o.response.empty() ? "linear_plus_noise" : o.response)
                                  : "linear_plus_noise";
  echo["sigma_diag"] = o.sigma_diag;
  finish_echo(echo, g, "simulate");
  if (o.dry_run) {
    std::cout << echo.dump(2) << "\n";
    return 0;
  }

  const lsq::SimulationResult result = lsq::run_figure1(cfg, g.threads);

  const fs::path out = prepare_out(g.out);
  lsq::emit_report(result, (out / "simulate_report.json").string());
  lsq::write_plot_table(result, (out / "simulate_plot.csv").string());
  lsq::write_text_file((out / "simulate_config.json").string(), echo.dump(2));
  write_run_info(ctx, out);
  std::printf("cells=%zu\n", result.cells.size());
  std::printf("wrote %s\n", (out / "simulate_report.json").string().c_str());
  return 0;
}

int run_summarize(const GlobalOptions& g, const SummarizeOptions& o, const RunContext& ctx) {
  if (o.data.empty()) throw lsq::UsageError("summarize: --data is required");
  if (o.schema.empty()) throw lsq::UsageError("summarize: --schema is required");
  const lsq::TableSchema schema = lsq::table_schema_from_json(slurp(o.schema));
  const lsq::Dataset dataset = lsq::load_dataset(o.data, schema);
  std::vector<std::size_t> removal;
  if (!o.trace.empty()) removal = lsq::audit_trace_from_json(slurp(o.trace)).removed;

  json echo;
  echo["data"] = o.data;
  echo["removed"] = removal.size();
  echo["rows"] = dataset.n();
  echo["schema"] = o.schema;
  echo["trace"] = o.trace.empty() ? json() : json(o.trace);
  finish_echo(echo, g, "summarize");
  if (o.dry_run) {
    std::cout << echo.dump(2) << "\n";
    return 0;
  }

  const lsq::SummaryStats stats = lsq::summarize(dataset, removal);

  const fs::path out = prepare_out(g.out);
  lsq::emit_report(stats, (out / "summary_report.json").string());
  lsq::write_text_file((out / "summary_config.json").string(), echo.dump(2));
  write_run_info(ctx, out);
  std::printf("n=%zu mu_y=%.10g sigma_y=%.10g gt5sigma=%zu gt10sigma=%zu\n", stats.n, stats.mu_y,
              stats.sigma_y, stats.count_gt5sigma, stats.count_gt10sigma);
  if (stats.has_removed)
    std::printf("removed_mean_y=%.10g removed_max_y=%.10g removed_max_y_in_sigmas=%.10g\n",
                stats.removed_mean_y, stats.removed_max_y, stats.removed_max_y_in_sigmas);
  std::printf("wrote %s\n", (out / "summary_report.json").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  GlobalOptions global;
  AuditOptions audit_opts;
  BoundsOptions bounds_opts;
  SimulateOptions sim_opts;
  SummarizeOptions summ_opts;

  CLI::App app{"Worst-case sample-removal auditing for least squares"};
  app.require_subcommand(1);

  BindingMap global_bindings;
  bind_option(app, global_bindings, "out", global.out, "Directory for reports (default: .)");
  bind_option(app, global_bindings, "threads", global.threads,
              "Worker threads; results do not depend on this");
  bind_option(app, global_bindings, "seed", global.seed, "Master seed for seeded workflows");
  app.add_option("--config", global.config_path,
                 "JSON object of flag overrides; explicit flags win");

  CLI::App* audit_cmd =
      app.add_subcommand("audit", "Find damaging sample removals for a fitted regression");
  audit_cmd->fallthrough();
  BindingMap audit_bindings;
  bind_option(*audit_cmd, audit_bindings, "data", audit_opts.data, "Delimited data file");
  bind_option(*audit_cmd, audit_bindings, "schema", audit_opts.schema, "Schema json file");
  bind_option(*audit_cmd, audit_bindings, "direction", audit_opts.direction,
              "e<j> or comma-separated vector");
  bind_option(*audit_cmd, audit_bindings, "method", audit_opts.method,
              "one-greedy, amip, or brute-force");
  bind_option(*audit_cmd, audit_bindings, "target", audit_opts.target, "delta or flip");
  bind_option(*audit_cmd, audit_bindings, "loss", audit_opts.loss, "squared or huber");
  bind_option(*audit_cmd, audit_bindings, "tau", audit_opts.tau, "Huber threshold");
  bind_option(*audit_cmd, audit_bindings, "k-max", audit_opts.k_max,
              "Removal budget (flip default: n - p)");
  bind_option(*audit_cmd, audit_bindings, "candidate-pool", audit_opts.candidate_pool,
              "Greedy candidates per step, 0 = all");
  bind_option(*audit_cmd, audit_bindings, "budget", audit_opts.budget,
              "Subset enumeration budget for brute-force");
  bind_flag(*audit_cmd, audit_bindings, "allow-exhaustive", audit_opts.allow_exhaustive,
            "Permit brute-force enumeration");
  bind_flag(*audit_cmd, audit_bindings, "dry-run", audit_opts.dry_run,
            "Validate and print the plan, compute nothing");

  CLI::App* bounds_cmd =
      app.add_subcommand("bounds", "Evaluate theoretical removal-sensitivity bounds");
  bounds_cmd->fallthrough();
  BindingMap bounds_bindings;
  bind_option(*bounds_cmd, bounds_bindings, "kind", bounds_opts.kind,
              "asymptotic-lb, finite-lb, gaussian-ub, misspec-rate, consistency-rate");
  bind_option(*bounds_cmd, bounds_bindings, "n", bounds_opts.n, "Sample size");
  bind_option(*bounds_cmd, bounds_bindings, "p", bounds_opts.p, "Dimension");
  bind_option(*bounds_cmd, bounds_bindings, "k", bounds_opts.k, "Removals");
  bind_option(*bounds_cmd, bounds_bindings, "alpha", bounds_opts.alpha,
              "Removal fraction (default: k/n)");
  bind_option(*bounds_cmd, bounds_bindings, "t", bounds_opts.t, "Concentration slack t");
  bind_option(*bounds_cmd, bounds_bindings, "delta", bounds_opts.delta, "Spectral slack delta");
  bind_option(*bounds_cmd, bounds_bindings, "noise", bounds_opts.noise,
              "gaussian, rademacher, uniform, student_t");
  bind_option(*bounds_cmd, bounds_bindings, "df", bounds_opts.df, "Student-t degrees of freedom");
  bind_option(*bounds_cmd, bounds_bindings, "noise-scale", bounds_opts.noise_scale,
              "Noise standard deviation");
  bind_option(*bounds_cmd, bounds_bindings, "sigma-inv-norm", bounds_opts.sigma_inv_norm,
              "Operator norm of the whitening matrix");
  bind_option(*bounds_cmd, bounds_bindings, "sigma-inv-v-norm", bounds_opts.sigma_inv_v_norm,
              "Whitened norm of the audit direction");
  bind_option(*bounds_cmd, bounds_bindings, "omega", bounds_opts.omega,
              "Sub-gaussian moment constant");
  bind_option(*bounds_cmd, bounds_bindings, "kappa", bounds_opts.kappa, "Condition parameter");
  bind_option(*bounds_cmd, bounds_bindings, "beta-norm", bounds_opts.beta_norm,
              "Generating coefficient norm");
  bind_option(*bounds_cmd, bounds_bindings, "eta-misspec", bounds_opts.eta_misspec,
              "Misspecification level (misspec-rate, default 0) or moment factor "
              "(consistency-rate, default 1)");
  bind_option(*bounds_cmd, bounds_bindings, "constant-C", bounds_opts.constant_C,
              "Leading constant, assumed 1");
  bind_option(*bounds_cmd, bounds_bindings, "constant-c", bounds_opts.constant_c,
              "Exponent constant, assumed 1");
  bind_flag(*bounds_cmd, bounds_bindings, "dry-run", bounds_opts.dry_run,
            "Validate and print the plan, compute nothing");

  CLI::App* sim_cmd = app.add_subcommand("simulate", "Seeded sweeps over synthetic regressions");
  sim_cmd->fallthrough();
  BindingMap sim_bindings;
  bind_flag(*sim_cmd, sim_bindings, "figure1", sim_opts.figure1,
            "Alpha sweep comparing audit methods against theory");
  bind_flag(*sim_cmd, sim_bindings, "regime-grid", sim_opts.regime_grid,
            "Robustness/consistency grid over growth regimes");
  bind_option(*sim_cmd, sim_bindings, "n", sim_opts.n, "Sample size per replicate");
  bind_option(*sim_cmd, sim_bindings, "p", sim_opts.p, "Dimension");
  bind_option(*sim_cmd, sim_bindings, "replicates", sim_opts.replicates, "Replicates per alpha");
  bind_option(*sim_cmd, sim_bindings, "alphas", sim_opts.alphas, "Removal fractions");
  bind_option(*sim_cmd, sim_bindings, "direction", sim_opts.direction,
              "e<j> or comma-separated vector");
  bind_option(*sim_cmd, sim_bindings, "methods", sim_opts.methods,
              "amip, one_greedy, adversarial_oracle, theory");
  bind_option(*sim_cmd, sim_bindings, "beta", sim_opts.beta,
              "Generating coefficients (default: zeros)");
  bind_option(*sim_cmd, sim_bindings, "sigma-diag", sim_opts.sigma_diag,
              "Covariance diagonal (default: identity)");
  bind_option(*sim_cmd, sim_bindings, "covariates", sim_opts.covariates,
              "gaussian, rademacher, uniform_sphere (implies the misspecified generator)");
  bind_option(*sim_cmd, sim_bindings, "response", sim_opts.response,
              "linear_plus_noise, quadratic_link, sign_link (implies the misspecified generator)");
  bind_option(*sim_cmd, sim_bindings, "noise", sim_opts.noise,
              "gaussian, rademacher, uniform, student_t");
  bind_option(*sim_cmd, sim_bindings, "df", sim_opts.df, "Student-t degrees of freedom");
  bind_option(*sim_cmd, sim_bindings, "noise-scale", sim_opts.noise_scale,
              "Noise standard deviation");
  bind_option(*sim_cmd, sim_bindings, "n-list", sim_opts.n_list, "Grid sample sizes");
  bind_option(*sim_cmd, sim_bindings, "regions", sim_opts.regions, "Grid regions among I II III IV");
  bind_option(*sim_cmd, sim_bindings, "seeds-per-cell", sim_opts.seeds_per_cell,
              "Replicates per grid cell");
  bind_flag(*sim_cmd, sim_bindings, "dry-run", sim_opts.dry_run,
            "Validate and print the plan, compute nothing");

  CLI::App* summ_cmd =
      app.add_subcommand("summarize", "Response summary stats and removal diagnostics");
  summ_cmd->fallthrough();
  BindingMap summ_bindings;
  bind_option(*summ_cmd, summ_bindings, "data", summ_opts.data, "Delimited data file");
  bind_option(*summ_cmd, summ_bindings, "schema", summ_opts.schema, "Schema json file");
  bind_option(*summ_cmd, summ_bindings, "trace", summ_opts.trace,
              "Audit report whose removed rows to summarize");
  bind_flag(*summ_cmd, summ_bindings, "dry-run", summ_opts.dry_run,
            "Validate and print the plan, compute nothing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  RunContext ctx{global, std::vector<std::string>(argv, argv + argc)};

  try {
    const BindingMap* active = nullptr;
    if (audit_cmd->parsed()) active = &audit_bindings;
    if (bounds_cmd->parsed()) active = &bounds_bindings;
    if (sim_cmd->parsed()) active = &sim_bindings;
    if (summ_cmd->parsed()) active = &summ_bindings;
    if (!global.config_path.empty())
      apply_config_overlay(global.config_path, global_bindings, *active);
    if (global.threads == 0) global.threads = 1;

    if (audit_cmd->parsed()) return run_audit(global, audit_opts, ctx);
    if (bounds_cmd->parsed()) return run_bounds(global, bounds_opts, ctx);
    if (sim_cmd->parsed()) return run_simulate(global, sim_opts, ctx);
    return run_summarize(global, summ_opts, ctx);
  } catch (const lsq::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const lsq::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const lsq::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
