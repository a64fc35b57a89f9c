#include "lsq/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "json.hpp"
#include "lsq/errors.hpp"

namespace lsq {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_level(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

// Pretty printer with a fixed layout: two-space indent, one scalar per line,
// keys emitted in the order the caller supplies (always alphabetical here).
class JsonWriter {
 public:
  void begin_object() { open('{'); }
  void end_object() { close('}'); }
  void begin_array() { open('['); }
  void end_array() { close(']'); }

  void key(const std::string& name) {
    separate();
    out_ += '"';
    out_ += json_escape(name);
    out_ += "\": ";
    after_key_ = true;
  }
  void value(double v) {
    separate();
    out_ += fmt_double(v);
  }
  void value(bool v) {
    separate();
    out_ += v ? "true" : "false";
  }
  void value(const std::string& v) {
    separate();
    out_ += '"';
    out_ += json_escape(v);
    out_ += '"';
  }
  void value(const char* v) { value(std::string(v)); }
  void value_integer(std::uint64_t v) {
    separate();
    out_ += std::to_string(v);
  }
  void value_null() {
    separate();
    out_ += "null";
  }

  std::string take() { return std::move(out_); }

 private:
  struct Level {
    bool has_items = false;
  };

  void open(char c) {
    separate();
    out_ += c;
    stack_.push_back({});
  }
  void close(char c) {
    const Level level = stack_.back();
    stack_.pop_back();
    if (level.has_items) {
      out_ += '\n';
      out_.append(2 * stack_.size(), ' ');
    }
    out_ += c;
  }
  void separate() {
    if (after_key_) {
      after_key_ = false;
      return;
    }
    if (stack_.empty()) return;
    if (stack_.back().has_items) out_ += ',';
    stack_.back().has_items = true;
    out_ += '\n';
    out_.append(2 * stack_.size(), ' ');
  }

  std::vector<Level> stack_;
  bool after_key_ = false;
  std::string out_;
};

void write_vector(JsonWriter& w, const Vector& v) {
  w.begin_array();
  for (double x : v) w.value(x);
  w.end_array();
}

void write_index_vector(JsonWriter& w, const std::vector<std::size_t>& v) {
  w.begin_array();
  for (std::size_t x : v) w.value_integer(x);
  w.end_array();
}

void write_matrix(JsonWriter& w, const Matrix& m) {
  w.begin_array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    w.begin_array();
    for (std::size_t j = 0; j < m.cols(); ++j) w.value(m(i, j));
    w.end_array();
  }
  w.end_array();
}

void write_noise(JsonWriter& w, const NoiseDist& noise) {
  w.begin_object();
  w.key("df");
  w.value(noise.df);
  w.key("kind");
  w.value(noise_kind_name(noise.kind));
  w.end_object();
}

void write_model2(JsonWriter& w, const ModelSpec& spec) {
  w.begin_object();
  w.key("beta");
  write_vector(w, spec.beta);
  w.key("noise");
  write_noise(w, spec.noise);
  w.key("noise_scale");
  w.value(spec.noise_scale);
  w.key("sigma");
  write_matrix(w, spec.sigma);
  w.end_object();
}

void write_model1(JsonWriter& w, const Misspec& m) {
  w.begin_object();
  w.key("beta");
  write_vector(w, m.beta);
  w.key("covariates");
  w.value(covariate_family_name(m.covariates));
  w.key("noise");
  write_noise(w, m.noise);
  w.key("noise_scale");
  w.value(m.noise_scale);
  w.key("response");
  w.value(response_map_name(m.response));
  w.key("sigma");
  write_matrix(w, m.sigma);
  w.end_object();
}

json parse_document(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("invalid report json: ") + e.what());
  }
}

// Readers below pull fields with at(), so a missing or mistyped key raises a
// library exception; guarded() turns that into IoError.
template <class F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed report json: ") + e.what());
  }
}

double double_from(const json& j) {
  if (j.is_null()) return std::nan("");
  return j.get<double>();
}

Matrix matrix_from(const json& j) {
  if (!j.is_array()) throw IoError("malformed report json: matrix is not an array");
  const std::size_t rows = j.size();
  if (rows == 0) return {};
  const std::size_t cols = j.at(0).size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const json& row = j.at(i);
    if (row.size() != cols) throw IoError("malformed report json: ragged matrix");
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = double_from(row.at(c));
  }
  return m;
}

NoiseDist noise_from(const json& j) {
  NoiseDist noise;
  noise.df = double_from(j.at("df"));
  noise.kind = parse_noise_kind(j.at("kind").get<std::string>());
  return noise;
}

}  // namespace

std::string to_json(const AuditTrace& trace) {
  JsonWriter w;
  w.begin_object();
  w.key("achieved_delta");
  w.value(trace.achieved_delta);
  w.key("delta_path");
  write_vector(w, trace.delta_path);
  w.key("flip_at");
  if (trace.flip_at)
    w.value_integer(*trace.flip_at);
  else
    w.value_null();
  w.key("method");
  w.value(trace.method);
  w.key("removed");
  write_index_vector(w, trace.removed);
  w.key("skipped_subsets");
  w.value_integer(trace.skipped_subsets);
  w.end_object();
  return w.take();
}

std::string to_json(const BoundReport& report) {
  JsonWriter w;
  w.begin_object();
  w.key("asymptotic");
  w.value(report.asymptotic);
  w.key("has_gamma_variant");
  w.value(report.has_gamma_variant);
  w.key("kind");
  w.value(report.kind);
  w.key("noise");
  write_noise(w, report.noise);
  w.key("params");
  w.begin_object();
  w.key("alpha");
  w.value(report.params.alpha);
  w.key("beta_norm");
  w.value(report.params.beta_norm);
  w.key("constant_C");
  w.value(report.params.constant_C);
  w.key("constant_c");
  w.value(report.params.constant_c);
  w.key("delta");
  w.value(report.params.delta);
  w.key("eta_misspec");
  w.value(report.params.eta_misspec);
  w.key("gamma");
  w.value(report.params.gamma);
  w.key("k");
  w.value_integer(report.params.k);
  w.key("kappa");
  w.value(report.params.kappa);
  w.key("n");
  w.value_integer(report.params.n);
  w.key("noise_scale");
  w.value(report.params.noise_scale);
  w.key("omega");
  w.value(report.params.omega);
  w.key("p");
  w.value_integer(report.params.p);
  w.key("sigma_inv_norm");
  w.value(report.params.sigma_inv_norm);
  w.key("sigma_inv_v_norm");
  w.value(report.params.sigma_inv_v_norm);
  w.key("t");
  w.value(report.params.t);
  w.end_object();
  w.key("probability_guarantee");
  w.value(report.probability_guarantee);
  w.key("probability_raw");
  w.value(report.probability_raw);
  w.key("regime");
  w.value(report.regime);
  w.key("vacuous");
  w.value(report.vacuous);
  w.key("value");
  w.value(report.value);
  w.key("value_without_gamma_factor");
  w.value(report.value_without_gamma_factor);
  w.end_object();
  return w.take();
}

std::string to_json(const SummaryStats& stats) {
  JsonWriter w;
  w.begin_object();
  w.key("count_gt10sigma");
  w.value_integer(stats.count_gt10sigma);
  w.key("count_gt5sigma");
  w.value_integer(stats.count_gt5sigma);
  w.key("degenerate_sigma");
  w.value(stats.degenerate_sigma);
  w.key("has_removed");
  w.value(stats.has_removed);
  w.key("inclusive_thresholds");
  w.value(stats.inclusive_thresholds);
  w.key("mu_y");
  w.value(stats.mu_y);
  w.key("n");
  w.value_integer(stats.n);
  if (stats.has_removed) {
    w.key("removed_max_y");
    w.value(stats.removed_max_y);
    w.key("removed_max_y_in_sigmas");
    w.value(stats.removed_max_y_in_sigmas);
    w.key("removed_mean_y");
    w.value(stats.removed_mean_y);
  }
  w.key("sigma_y");
  w.value(stats.sigma_y);
  w.end_object();
  return w.take();
}

std::string to_json(const SimulationResult& result) {
  JsonWriter w;
  w.begin_object();
  w.key("cells");
  w.begin_array();
  for (const auto& cell : result.cells) {
    w.begin_object();
    w.key("alpha");
    w.value(cell.alpha);
    w.key("mean");
    w.value(cell.mean);
    w.key("method");
    w.value(cell.method);
    w.key("n_ok");
    w.value_integer(cell.n_ok);
    w.key("sd");
    w.value(cell.sd);
    w.end_object();
  }
  w.end_array();
  w.key("config");
  w.begin_object();
  w.key("alphas");
  write_vector(w, result.config.alphas);
  w.key("direction");
  write_vector(w, result.config.direction);
  w.key("master_seed");
  w.value_integer(result.config.master_seed);
  w.key("methods");
  w.begin_array();
  for (const auto& m : result.config.methods) w.value(m);
  w.end_array();
  w.key("model");
  w.begin_object();
  if (const auto* m2 = std::get_if<ModelSpec>(&result.config.model)) {
    w.key("model2");
    write_model2(w, *m2);
  } else {
    w.key("model1");
    write_model1(w, std::get<Misspec>(result.config.model));
  }
  w.end_object();
  w.key("n");
  w.value_integer(result.config.n);
  w.key("p");
  w.value_integer(result.config.p);
  w.key("replicates");
  w.value_integer(result.config.replicates);
  w.end_object();
  w.key("replicate_seeds");
  w.begin_array();
  for (std::uint64_t s : result.replicate_seeds) w.value_integer(s);
  w.end_array();
  w.key("theory");
  write_vector(w, result.theory);
  w.end_object();
  return w.take();
}

std::string to_json(const std::vector<RegimeCell>& table) {
  JsonWriter w;
  w.begin_array();
  for (const auto& cell : table) {
    w.begin_object();
    w.key("k");
    w.value_integer(cell.k);
    w.key("mean_delta");
    w.value(cell.mean_delta);
    w.key("mean_fit_error_full");
    w.value(cell.mean_fit_error_full);
    w.key("mean_fit_error_subset");
    w.value(cell.mean_fit_error_subset);
    w.key("n");
    w.value_integer(cell.n);
    w.key("n_ok");
    w.value_integer(cell.n_ok);
    w.key("p");
    w.value_integer(cell.p);
    w.key("region");
    w.value(cell.region);
    w.key("sd_delta");
    w.value(cell.sd_delta);
    w.end_object();
  }
  w.end_array();
  return w.take();
}

AuditTrace audit_trace_from_json(const std::string& text) {
  const json j = parse_document(text);
  return guarded([&] {
    AuditTrace trace;
    trace.achieved_delta = double_from(j.at("achieved_delta"));
    trace.delta_path = j.at("delta_path").get<Vector>();
    if (!j.at("flip_at").is_null()) trace.flip_at = j.at("flip_at").get<std::size_t>();
    trace.method = j.at("method").get<std::string>();
    trace.removed = j.at("removed").get<std::vector<std::size_t>>();
    trace.skipped_subsets = j.at("skipped_subsets").get<std::uint64_t>();
    return trace;
  });
}

BoundReport bound_report_from_json(const std::string& text) {
  const json j = parse_document(text);
  return guarded([&] {
    BoundReport report;
    report.asymptotic = j.at("asymptotic").get<bool>();
    report.has_gamma_variant = j.at("has_gamma_variant").get<bool>();
    report.kind = j.at("kind").get<std::string>();
    report.noise = noise_from(j.at("noise"));
    const json& p = j.at("params");
    report.params.alpha = double_from(p.at("alpha"));
    report.params.beta_norm = double_from(p.at("beta_norm"));
    report.params.constant_C = double_from(p.at("constant_C"));
    report.params.constant_c = double_from(p.at("constant_c"));
    report.params.delta = double_from(p.at("delta"));
    report.params.eta_misspec = double_from(p.at("eta_misspec"));
    report.params.gamma = double_from(p.at("gamma"));
    report.params.k = p.at("k").get<std::size_t>();
    report.params.kappa = double_from(p.at("kappa"));
    report.params.n = p.at("n").get<std::size_t>();
    report.params.noise_scale = double_from(p.at("noise_scale"));
    report.params.omega = double_from(p.at("omega"));
    report.params.p = p.at("p").get<std::size_t>();
    report.params.sigma_inv_norm = double_from(p.at("sigma_inv_norm"));
    report.params.sigma_inv_v_norm = double_from(p.at("sigma_inv_v_norm"));
    report.params.t = double_from(p.at("t"));
    report.probability_guarantee = double_from(j.at("probability_guarantee"));
    report.probability_raw = double_from(j.at("probability_raw"));
    report.regime = j.at("regime").get<std::string>();
    report.vacuous = j.at("vacuous").get<bool>();
    report.value = double_from(j.at("value"));
    report.value_without_gamma_factor = double_from(j.at("value_without_gamma_factor"));
    return report;
  });
}

SummaryStats summary_stats_from_json(const std::string& text) {
  const json j = parse_document(text);
  return guarded([&] {
    SummaryStats stats;
    stats.count_gt10sigma = j.at("count_gt10sigma").get<std::size_t>();
    stats.count_gt5sigma = j.at("count_gt5sigma").get<std::size_t>();
    stats.degenerate_sigma = j.at("degenerate_sigma").get<bool>();
    stats.has_removed = j.at("has_removed").get<bool>();
    stats.inclusive_thresholds = j.at("inclusive_thresholds").get<bool>();
    stats.mu_y = double_from(j.at("mu_y"));
    stats.n = j.at("n").get<std::size_t>();
    if (stats.has_removed) {
      stats.removed_max_y = double_from(j.at("removed_max_y"));
      stats.removed_max_y_in_sigmas = double_from(j.at("removed_max_y_in_sigmas"));
      stats.removed_mean_y = double_from(j.at("removed_mean_y"));
    }
    stats.sigma_y = double_from(j.at("sigma_y"));
    return stats;
  });
}

SimulationResult simulation_result_from_json(const std::string& text) {
  const json j = parse_document(text);
  return guarded([&] {
    SimulationResult result;
    for (const json& c : j.at("cells")) {
      MethodCurve cell;
      cell.alpha = double_from(c.at("alpha"));
      cell.mean = double_from(c.at("mean"));
      cell.method = c.at("method").get<std::string>();
      cell.n_ok = c.at("n_ok").get<std::size_t>();
      cell.sd = double_from(c.at("sd"));
      result.cells.push_back(std::move(cell));
    }
    const json& cfg = j.at("config");
    result.config.alphas = cfg.at("alphas").get<Vector>();
    result.config.direction = cfg.at("direction").get<Vector>();
    result.config.master_seed = cfg.at("master_seed").get<std::uint64_t>();
    result.config.methods = cfg.at("methods").get<std::vector<std::string>>();
    const json& model = cfg.at("model");
    if (model.contains("model2")) {
      const json& m = model.at("model2");
      ModelSpec spec;
      spec.beta = m.at("beta").get<Vector>();
      spec.noise = noise_from(m.at("noise"));
      spec.noise_scale = double_from(m.at("noise_scale"));
      spec.sigma = matrix_from(m.at("sigma"));
      result.config.model = std::move(spec);
    } else {
      const json& m = model.at("model1");
      Misspec spec;
      spec.beta = m.at("beta").get<Vector>();
      spec.covariates = parse_covariate_family(m.at("covariates").get<std::string>());
      spec.noise = noise_from(m.at("noise"));
      spec.noise_scale = double_from(m.at("noise_scale"));
      spec.response = parse_response_map(m.at("response").get<std::string>());
      spec.sigma = matrix_from(m.at("sigma"));
      result.config.model = std::move(spec);
    }
    result.config.n = cfg.at("n").get<std::size_t>();
    result.config.p = cfg.at("p").get<std::size_t>();
    result.config.replicates = cfg.at("replicates").get<std::size_t>();
    result.replicate_seeds = j.at("replicate_seeds").get<std::vector<std::uint64_t>>();
    result.theory = j.at("theory").get<Vector>();
    return result;
  });
}

std::vector<RegimeCell> regime_table_from_json(const std::string& text) {
  const json j = parse_document(text);
  return guarded([&] {
    std::vector<RegimeCell> table;
    for (const json& c : j) {
      RegimeCell cell;
      cell.k = c.at("k").get<std::size_t>();
      cell.mean_delta = double_from(c.at("mean_delta"));
      cell.mean_fit_error_full = double_from(c.at("mean_fit_error_full"));
      cell.mean_fit_error_subset = double_from(c.at("mean_fit_error_subset"));
      cell.n = c.at("n").get<std::size_t>();
      cell.n_ok = c.at("n_ok").get<std::size_t>();
      cell.p = c.at("p").get<std::size_t>();
      cell.region = c.at("region").get<std::string>();
      cell.sd_delta = double_from(c.at("sd_delta"));
      table.push_back(std::move(cell));
    }
    return table;
  });
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content << '\n';
  out.flush();
  if (!out.good()) throw IoError("write failed: " + path);
}

void emit_report(const AuditTrace& trace, const std::string& path) { write_text_file(path, to_json(trace)); }
void emit_report(const BoundReport& report, const std::string& path) { write_text_file(path, to_json(report)); }
void emit_report(const SummaryStats& stats, const std::string& path) { write_text_file(path, to_json(stats)); }
void emit_report(const SimulationResult& result, const std::string& path) {
  write_text_file(path, to_json(result));
}
void emit_report(const std::vector<RegimeCell>& table, const std::string& path) {
  write_text_file(path, to_json(table));
}

std::string plot_table(const SimulationResult& result) {
  std::string out = "alpha,method,mean,sd,n_ok\n";
  for (const auto& cell : result.cells) {
    out += fmt_double(cell.alpha);
    out += ',';
    out += cell.method;
    out += ',';
    out += fmt_double(cell.mean);
    out += ',';
    out += fmt_double(cell.sd);
    out += ',';
    out += std::to_string(cell.n_ok);
    out += '\n';
  }
  for (std::size_t a = 0; a < result.theory.size(); ++a) {
    out += fmt_double(result.config.alphas[a]);
    out += ",theory,";
    out += fmt_double(result.theory[a]);
    out += ",0,0\n";
  }
  out.pop_back();
  return out;
}

void write_plot_table(const SimulationResult& result, const std::string& path) {
  write_text_file(path, plot_table(result));
}

std::string regime_table_csv(const std::vector<RegimeCell>& table) {
  std::string out = "region,n,p,k,mean_delta,sd_delta,mean_fit_error_full,mean_fit_error_subset,n_ok";
  for (const auto& cell : table) {
    out += '\n';
    out += cell.region;
    out += ',';
    out += std::to_string(cell.n);
    out += ',';
    out += std::to_string(cell.p);
    out += ',';
    out += std::to_string(cell.k);
    out += ',';
    out += fmt_double(cell.mean_delta);
    out += ',';
    out += fmt_double(cell.sd_delta);
    out += ',';
    out += fmt_double(cell.mean_fit_error_full);
    out += ',';
    out += fmt_double(cell.mean_fit_error_subset);
    out += ',';
    out += std::to_string(cell.n_ok);
  }
  return out;
}

void write_regime_table(const std::vector<RegimeCell>& table, const std::string& path) {
  write_text_file(path, regime_table_csv(table));
}

const char* noise_kind_name(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::gaussian: return "gaussian";
    case NoiseKind::rademacher: return "rademacher";
    case NoiseKind::uniform: return "uniform";
    case NoiseKind::student_t: return "student_t";
  }
  throw UsageError("noise_kind_name: unknown kind");
}

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "gaussian") return NoiseKind::gaussian;
  if (name == "rademacher") return NoiseKind::rademacher;
  if (name == "uniform") return NoiseKind::uniform;
  if (name == "student_t") return NoiseKind::student_t;
  throw UsageError("unknown noise kind: " + name);
}

const char* covariate_family_name(CovariateFamily family) {
  switch (family) {
    case CovariateFamily::gaussian: return "gaussian";
    case CovariateFamily::rademacher: return "rademacher";
    case CovariateFamily::uniform_sphere: return "uniform_sphere";
  }
  throw UsageError("covariate_family_name: unknown family");
}

CovariateFamily parse_covariate_family(const std::string& name) {
  if (name == "gaussian") return CovariateFamily::gaussian;
  if (name == "rademacher") return CovariateFamily::rademacher;
  if (name == "uniform_sphere") return CovariateFamily::uniform_sphere;
  throw UsageError("unknown covariate family: " + name);
}

const char* response_map_name(ResponseMap map) {
  switch (map) {
    case ResponseMap::linear_plus_noise: return "linear_plus_noise";
    case ResponseMap::quadratic_link: return "quadratic_link";
    case ResponseMap::sign_link: return "sign_link";
  }
  throw UsageError("response_map_name: unknown map");
}

ResponseMap parse_response_map(const std::string& name) {
  if (name == "linear_plus_noise") return ResponseMap::linear_plus_noise;
  if (name == "quadratic_link") return ResponseMap::quadratic_link;
  if (name == "sign_link") return ResponseMap::sign_link;
  throw UsageError("unknown response map: " + name);
}

const char* transform_name(ColumnTransform transform) {
  switch (transform) {
    case ColumnTransform::identity: return "identity";
    case ColumnTransform::log: return "log";
    case ColumnTransform::log1p: return "log1p";
  }
  throw UsageError("transform_name: unknown transform");
}

ColumnTransform parse_transform(const std::string& name) {
  if (name == "identity") return ColumnTransform::identity;
  if (name == "log") return ColumnTransform::log;
  if (name == "log1p") return ColumnTransform::log1p;
  throw UsageError("unknown transform: " + name);
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(delimiter, start);
    if (pos == std::string::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_numeric(const std::string& cell, const std::string& row_id, const std::string& column) {
  const std::string value = trim(cell);
  const auto fail = [&] {
    return NonFiniteValue("row " + row_id + ", column " + column + ": not a finite number: '" +
                          value + "'");
  };
  if (value.empty()) throw fail();
  std::size_t consumed = 0;
  double parsed = 0.0;
  try {
    parsed = std::stod(value, &consumed);
  } catch (const std::exception&) {
    throw fail();
  }
  if (consumed != value.size() || !std::isfinite(parsed)) throw fail();
  return parsed;
}

double apply_transform(double v, ColumnTransform transform) {
  switch (transform) {
    case ColumnTransform::identity: return v;
    case ColumnTransform::log: return std::log(v);
    case ColumnTransform::log1p: return std::log1p(v);
  }
  throw UsageError("apply_transform: unknown transform");
}

void validate_schema(const TableSchema& schema) {
  if (schema.response_column.empty()) throw UsageError("schema: response_column must be set");
  std::set<std::string> covariates(schema.covariate_columns.begin(),
                                   schema.covariate_columns.end());
  if (covariates.size() != schema.covariate_columns.size())
    throw UsageError("schema: duplicate covariate column");
  if (covariates.count(schema.response_column))
    throw UsageError("schema: response column repeated among covariates");
  std::set<std::string> keys(schema.fixed_effect_columns.begin(),
                             schema.fixed_effect_columns.end());
  if (keys.size() != schema.fixed_effect_columns.size())
    throw UsageError("schema: duplicate fixed-effect column");
  for (const auto& key : schema.fixed_effect_columns)
    if (covariates.count(key) || key == schema.response_column)
      throw UsageError("schema: fixed-effect column " + key + " overlaps another role");
  for (const auto& [column, transform] : schema.transforms) {
    (void)transform;
    if (column != schema.response_column && !covariates.count(column))
      throw UsageError("schema: transform names unknown column " + column);
  }
}

ColumnTransform transform_of(const TableSchema& schema, const std::string& column) {
  const auto it = schema.transforms.find(column);
  return it == schema.transforms.end() ? ColumnTransform::identity : it->second;
}

}  // namespace

TableSchema table_schema_from_json(const std::string& text) {
  const json j = parse_document(text);
  if (!j.is_object()) throw IoError("schema document must be a json object");
  static const std::set<std::string> known = {"response",  "covariates", "fixed_effects",
                                              "transforms", "drop_rows", "delimiter",
                                              "id_column"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.count(key)) throw UsageError("schema: unknown key '" + key + "'");
  }
  return guarded([&] {
    TableSchema schema;
    if (j.contains("response")) schema.response_column = j.at("response").get<std::string>();
    if (j.contains("covariates"))
      schema.covariate_columns = j.at("covariates").get<std::vector<std::string>>();
    if (j.contains("fixed_effects"))
      schema.fixed_effect_columns = j.at("fixed_effects").get<std::vector<std::string>>();
    if (j.contains("transforms"))
      for (const auto& [column, name] : j.at("transforms").items())
        schema.transforms[column] = parse_transform(name.get<std::string>());
    if (j.contains("drop_rows"))
      for (const json& id : j.at("drop_rows"))
        schema.drop_rows.push_back(id.is_string() ? id.get<std::string>() : id.dump());
    if (j.contains("delimiter")) {
      const std::string delimiter = j.at("delimiter").get<std::string>();
      if (delimiter.size() != 1) throw UsageError("schema: delimiter must be one character");
      schema.delimiter = delimiter[0];
    }
    if (j.contains("id_column")) schema.id_column = j.at("id_column").get<std::string>();
    return schema;
  });
}

Dataset load_dataset(const std::string& path, const TableSchema& schema) {
  validate_schema(schema);

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("missing header row: " + path);

  const std::vector<std::string> header = split_line(line, schema.delimiter);
  std::unordered_map<std::string, std::size_t> column_index;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name = trim(header[c]);
    if (!column_index.emplace(name, c).second)
      throw IoError("duplicate header column '" + name + "': " + path);
  }
  const auto find_column = [&](const std::string& name) {
    const auto it = column_index.find(name);
    if (it == column_index.end()) throw MissingColumn("missing column '" + name + "': " + path);
    return it->second;
  };

  const std::size_t response_at = find_column(schema.response_column);
  std::vector<std::size_t> covariate_at;
  for (const auto& name : schema.covariate_columns) covariate_at.push_back(find_column(name));
  std::vector<std::size_t> key_at;
  for (const auto& name : schema.fixed_effect_columns) key_at.push_back(find_column(name));
  const bool has_id = !schema.id_column.empty();
  const std::size_t id_at = has_id ? find_column(schema.id_column) : 0;

  const std::unordered_set<std::string> drops(schema.drop_rows.begin(), schema.drop_rows.end());

  struct RawRow {
    std::string id;
    std::vector<std::string> cells;
  };
  std::vector<RawRow> rows;
  std::size_t line_number = 1;
  std::size_t data_index = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    ++data_index;
    std::vector<std::string> cells = split_line(line, schema.delimiter);
    if (cells.size() != header.size())
      throw IoError("line " + std::to_string(line_number) + " has " +
                    std::to_string(cells.size()) + " fields, expected " +
                    std::to_string(header.size()) + ": " + path);
    std::string id = has_id ? trim(cells[id_at]) : std::to_string(data_index);
    if (drops.count(id)) continue;
    rows.push_back({std::move(id), std::move(cells)});
  }
  if (rows.empty()) throw EmptyAfterDrops("no rows left after drops: " + path);

  const std::size_t n = rows.size();
  const std::size_t n_cov = covariate_at.size();
  const std::size_t n_key = key_at.size();

  Dataset data;
  data.design = Matrix(n, n_cov + n_key);
  data.response.resize(n);
  data.row_ids.reserve(n);
  data.column_names = schema.covariate_columns;
  data.column_names.insert(data.column_names.end(), schema.fixed_effect_columns.begin(),
                           schema.fixed_effect_columns.end());

  const ColumnTransform response_transform = transform_of(schema, schema.response_column);
  for (std::size_t i = 0; i < n; ++i) {
    const RawRow& row = rows[i];
    const double y = apply_transform(
        parse_numeric(row.cells[response_at], row.id, schema.response_column), response_transform);
    if (!std::isfinite(y))
      throw NonFiniteValue("row " + row.id + ", column " + schema.response_column +
                           ": transform produced a non-finite value");
    data.response[i] = y;
    for (std::size_t c = 0; c < n_cov; ++c) {
      const std::string& name = schema.covariate_columns[c];
      const double x = apply_transform(parse_numeric(row.cells[covariate_at[c]], row.id, name),
                                       transform_of(schema, name));
      if (!std::isfinite(x))
        throw NonFiniteValue("row " + row.id + ", column " + name +
                             ": transform produced a non-finite value");
      data.design(i, c) = x;
    }
    data.row_ids.push_back(row.id);
  }

  // fixed-effect levels are coded by their rank among the sorted distinct
  // strings of the surviving rows
  for (std::size_t kidx = 0; kidx < n_key; ++kidx) {
    std::set<std::string> levels;
    for (const auto& row : rows) levels.insert(trim(row.cells[key_at[kidx]]));
    std::unordered_map<std::string, double> code;
    double rank = 0.0;
    for (const auto& level : levels) code.emplace(level, rank++);
    for (std::size_t i = 0; i < n; ++i)
      data.design(i, n_cov + kidx) = code.at(trim(rows[i].cells[key_at[kidx]]));
  }
  return data;
}

Dataset expand_fixed_effects(const Dataset& data, const std::vector<std::string>& keys) {
  if (keys.empty()) return data;
  if (data.column_names.size() != data.p())
    throw UsageError("expand_fixed_effects: dataset has no usable column names");
  std::set<std::string> unique(keys.begin(), keys.end());
  if (unique.size() != keys.size()) throw UsageError("expand_fixed_effects: duplicate key");

  std::vector<std::size_t> key_at;
  for (const auto& key : keys) {
    const auto it = std::find(data.column_names.begin(), data.column_names.end(), key);
    if (it == data.column_names.end())
      throw MissingColumn("expand_fixed_effects: no column named " + key);
    key_at.push_back(static_cast<std::size_t>(it - data.column_names.begin()));
  }

  const std::size_t n = data.n();
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < data.p(); ++c)
    if (std::find(key_at.begin(), key_at.end(), c) == key_at.end()) keep.push_back(c);

  struct Indicator {
    std::size_t column;
    double level;
    std::string name;
  };
  std::vector<Indicator> indicators;
  for (std::size_t kidx = 0; kidx < keys.size(); ++kidx) {
    std::set<double> levels;
    for (std::size_t i = 0; i < n; ++i) levels.insert(data.design(i, key_at[kidx]));
    if (levels.size() < 2)
      throw UsageError("expand_fixed_effects: key " + keys[kidx] + " has fewer than 2 levels");
    bool reference = true;
    for (double level : levels) {
      if (reference) {
        reference = false;
        continue;
      }
      indicators.push_back({key_at[kidx], level, keys[kidx] + "=" + fmt_level(level)});
    }
  }

  Dataset out;
  out.response = data.response;
  out.row_ids = data.row_ids;
  out.design = Matrix(n, keep.size() + indicators.size());
  for (std::size_t c = 0; c < keep.size(); ++c) {
    out.column_names.push_back(data.column_names[keep[c]]);
    for (std::size_t i = 0; i < n; ++i) out.design(i, c) = data.design(i, keep[c]);
  }
  for (std::size_t c = 0; c < indicators.size(); ++c) {
    const Indicator& ind = indicators[c];
    out.column_names.push_back(ind.name);
    for (std::size_t i = 0; i < n; ++i)
      out.design(i, keep.size() + c) = data.design(i, ind.column) == ind.level ? 1.0 : 0.0;
  }
  return out;
}

SummaryStats summarize(const Dataset& data, const std::vector<std::size_t>& removal) {
  const std::size_t n = data.n();
  if (n == 0) throw UsageError("summarize: need at least one row");
  if (data.response.size() != n) throw DimensionMismatch("summarize: response length mismatch");

  SummaryStats stats;
  stats.n = n;
  double sum = 0.0;
  for (double y : data.response) sum += y;
  stats.mu_y = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double y : data.response) ss += (y - stats.mu_y) * (y - stats.mu_y);
  stats.sigma_y = std::sqrt(ss / static_cast<double>(n));
  stats.degenerate_sigma = stats.sigma_y == 0.0;
  if (!stats.degenerate_sigma) {
    for (double y : data.response) {
      const double dev = std::abs(y - stats.mu_y);
      if (dev >= 5.0 * stats.sigma_y) ++stats.count_gt5sigma;
      if (dev >= 10.0 * stats.sigma_y) ++stats.count_gt10sigma;
    }
  }

  if (!removal.empty()) {
    std::vector<std::size_t> sorted = removal;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.back() >= n) throw DimensionMismatch("summarize: removal index out of range");
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw DimensionMismatch("summarize: duplicate removal index");
    stats.has_removed = true;
    double rsum = 0.0;
    double rmax = data.response[sorted.front()];
    for (std::size_t i : sorted) {
      rsum += data.response[i];
      rmax = std::max(rmax, data.response[i]);
    }
    stats.removed_mean_y = rsum / static_cast<double>(sorted.size());
    stats.removed_max_y = rmax;
    stats.removed_max_y_in_sigmas =
        stats.degenerate_sigma ? 0.0 : (rmax - stats.mu_y) / stats.sigma_y;
  }
  return stats;
}

}  // namespace lsq
