#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "lsq/audit.hpp"
#include "lsq/bounds.hpp"
#include "lsq/regression.hpp"
#include "lsq/simulate.hpp"

namespace lsq {

enum class ColumnTransform { identity, log, log1p };

// How to read a delimited text file into a Dataset. The design takes the
// covariate columns in the given order, then one column per fixed-effect key
// holding the level's rank among the sorted distinct level strings.
// transforms maps a response or covariate column name to its transform
// (identity when absent). drop_rows lists row ids to remove when present;
// ids come from id_column, or are the 1-based data row numbers when
// id_column is empty.
struct TableSchema {
  std::string response_column;
  std::vector<std::string> covariate_columns;
  std::vector<std::string> fixed_effect_columns;
  std::map<std::string, ColumnTransform> transforms;
  std::vector<std::string> drop_rows;
  char delimiter = ',';
  std::string id_column;
};

// Reads a header-first delimited file. No quoting and no missing values;
// every row must have exactly the header's width (IoError otherwise).
// Throws MissingColumn for undeclared names, NonFiniteValue naming the row
// and column when a value does not parse to a finite number after its
// transform, EmptyAfterDrops when no rows survive.
Dataset load_dataset(const std::string& path, const TableSchema& schema);

// Parses a schema document: a JSON object with the keys response,
// covariates, fixed_effects, transforms, drop_rows, delimiter, id_column,
// all optional except response. Unknown keys raise UsageError, malformed
// JSON raises IoError. drop_rows entries may be strings or numbers.
TableSchema table_schema_from_json(const std::string& text);

// Replaces each named key column by indicator columns, one per distinct
// value except the smallest (the reference level), appended after the
// remaining columns as "<key>=<value>". Order and content of non-key
// columns are preserved. Unknown names throw MissingColumn.
Dataset expand_fixed_effects(const Dataset& data, const std::vector<std::string>& keys);

// Response moments and tail counts. sigma_y uses the population divisor n.
// The tail counts use inclusive thresholds, |y - mu| >= c * sigma. When a
// removal set is given, removed_* summarize the responses at those indices
// and removed_max_y_in_sigmas is (removed_max_y - mu_y) / sigma_y. A
// constant response sets degenerate_sigma and zero counts.
struct SummaryStats {
  std::size_t n = 0;
  double mu_y = 0.0;
  double sigma_y = 0.0;
  std::size_t count_gt5sigma = 0;
  std::size_t count_gt10sigma = 0;
  bool degenerate_sigma = false;
  bool inclusive_thresholds = true;
  bool has_removed = false;
  double removed_mean_y = 0.0;
  double removed_max_y = 0.0;
  double removed_max_y_in_sigmas = 0.0;
};

SummaryStats summarize(const Dataset& data, const std::vector<std::size_t>& removal = {});

// Canonical JSON: keys in fixed alphabetical order, two-space indent,
// doubles printed with 17 significant digits so parsing reproduces them
// exactly. The *_from_json readers invert to_json and throw IoError on
// malformed documents.
std::string to_json(const AuditTrace& trace);
std::string to_json(const BoundReport& report);
std::string to_json(const SummaryStats& stats);
std::string to_json(const SimulationResult& result);
std::string to_json(const std::vector<RegimeCell>& table);

AuditTrace audit_trace_from_json(const std::string& text);
BoundReport bound_report_from_json(const std::string& text);
SummaryStats summary_stats_from_json(const std::string& text);
SimulationResult simulation_result_from_json(const std::string& text);
std::vector<RegimeCell> regime_table_from_json(const std::string& text);

// Writes content followed by a newline; IoError when the file cannot be
// written.
void write_text_file(const std::string& path, const std::string& content);

void emit_report(const AuditTrace& trace, const std::string& path);
void emit_report(const BoundReport& report, const std::string& path);
void emit_report(const SummaryStats& stats, const std::string& path);
void emit_report(const SimulationResult& result, const std::string& path);
void emit_report(const std::vector<RegimeCell>& table, const std::string& path);

// Flat table for external plotting: header alpha,method,mean,sd,n_ok, one
// row per result cell in result order, then one row per theory value with
// method "theory", sd 0 and n_ok 0.
std::string plot_table(const SimulationResult& result);
void write_plot_table(const SimulationResult& result, const std::string& path);

// region,n,p,k,mean_delta,sd_delta,mean_fit_error_full,mean_fit_error_subset,n_ok
std::string regime_table_csv(const std::vector<RegimeCell>& table);
void write_regime_table(const std::vector<RegimeCell>& table, const std::string& path);

const char* noise_kind_name(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& name);
const char* covariate_family_name(CovariateFamily family);
CovariateFamily parse_covariate_family(const std::string& name);
const char* response_map_name(ResponseMap map);
ResponseMap parse_response_map(const std::string& name);
const char* transform_name(ColumnTransform transform);
ColumnTransform parse_transform(const std::string& name);

}  // namespace lsq
