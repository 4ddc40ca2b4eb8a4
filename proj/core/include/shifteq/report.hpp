#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shifteq/harness.hpp"
#include "shifteq/model.hpp"

namespace shifteq {

/// Everything one audit run needs, parsed from a JSON config file. Absent
/// fields keep these defaults; the default model is the desk-scale anchored
/// transformer (vit_poly).
struct RunConfig {
  enum class Format { json, csv };

  ModelSpec model;
  std::vector<std::string> suites;  // registry names, run in order
  ShiftSampler sampler = ShiftSampler::uniform(-15, 15, 20, 7);
  std::string output_path;  // empty -> stdout only
  Format format = Format::json;
  Tolerances tolerances;
  std::uint64_t seed = 0;
  bool seed_from_config = false;  // lets the CLI apply its env fallback
  std::size_t trials = 20;  // operator-level suites
  std::size_t inputs = 16;  // model-level suites

  RunConfig();
};

/// Parses and validates a config document. Suite names are checked against
/// the registry and the model spec is validated; any violation throws
/// std::invalid_argument (the CLI maps that to exit code 2).
RunConfig run_config_from_json(const std::string& text);
std::string run_config_to_json(const RunConfig& config);

/// Runs every requested suite in order. Model weights are built once and
/// shared by the model-level suites.
std::vector<AuditReport> run_audit(const RunConfig& config);

/// True iff every report is ok under suite_ok (counterexample suites must
/// have failed as expected).
bool all_suites_ok(const std::vector<AuditReport>& reports);

/// JSON document per report: {"suite", "tests" [...], "metrics" {...},
/// "env" {...}}; a run serializes as an array of these.
std::string report_to_json(const AuditReport& report);
std::string reports_to_json(const std::vector<AuditReport>& reports);

/// Flat CSV, one row per verdict:
/// suite,op_name,input_seed,passed,residual,matched_dy,matched_dx.
std::string reports_to_csv(const std::vector<AuditReport>& reports);

/// Serialized reports with the volatile timestamp fields removed. Two runs
/// with the same config normalize to byte-identical text.
std::string normalize_report_json(const std::string& json_text);

}  // namespace shifteq
