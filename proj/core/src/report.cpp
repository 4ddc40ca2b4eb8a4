#include "shifteq/report.hpp"

#include <cstdio>
#include <stdexcept>

#include <json.hpp>

namespace shifteq {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// RFC 4180 quoting; composed op names contain commas.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (const char ch : s) {
    if (ch == '"') quoted += '"';
    quoted += ch;
  }
  quoted += '"';
  return quoted;
}

ordered_json verdict_to_json(const EquivarianceVerdict& v) {
  ordered_json j;
  j["op_name"] = v.op_name;
  j["input_seed"] = v.input_seed;
  j["passed"] = v.passed;
  j["residual"] = v.residual;
  if (v.matched_shift) {
    j["matched_shift"] = {v.matched_shift->dy, v.matched_shift->dx};
  } else {
    j["matched_shift"] = nullptr;
  }
  return j;
}

ordered_json report_to_ordered(const AuditReport& report) {
  ordered_json j;
  j["suite"] = report.suite;
  ordered_json tests = ordered_json::array();
  for (const EquivarianceVerdict& v : report.verdicts) tests.push_back(verdict_to_json(v));
  j["tests"] = std::move(tests);
  j["metrics"] = report.metrics;  // std::map: keys already sorted
  j["env"] = report.env;
  return j;
}

ShiftSampler sampler_from_json(const ordered_json& j) {
  ShiftSampler s = ShiftSampler::uniform(-15, 15, 20, 7);
  if (j.contains("mode")) {
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "exhaustive") {
      s.mode = ShiftSampler::Mode::exhaustive;
    } else if (mode == "uniform_random") {
      s.mode = ShiftSampler::Mode::uniform_random;
    } else {
      throw std::invalid_argument("sampler.mode must be exhaustive or uniform_random");
    }
  }
  if (j.contains("range")) {
    const auto& range = j.at("range");
    if (!range.is_array() || range.size() != 2) {
      throw std::invalid_argument("sampler.range must be [lo, hi]");
    }
    s.lo = range[0].get<long>();
    s.hi = range[1].get<long>();
  }
  if (j.contains("step")) s.step = j.at("step").get<long>();
  if (j.contains("count")) s.count = j.at("count").get<std::size_t>();
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

ordered_json sampler_to_json(const ShiftSampler& s) {
  ordered_json j;
  j["mode"] =
      s.mode == ShiftSampler::Mode::exhaustive ? "exhaustive" : "uniform_random";
  j["range"] = {s.lo, s.hi};
  j["step"] = s.step;
  j["count"] = s.count;
  j["seed"] = s.seed;
  return j;
}

}  // namespace

RunConfig::RunConfig() : model(default_spec(Variant::vit_poly)) {}

RunConfig run_config_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");

  RunConfig c;
  try {
    if (j.contains("model")) c.model = model_spec_from_json(j.at("model").dump());
    if (j.contains("suites")) {
      for (const auto& name_json : j.at("suites")) {
        const std::string name = name_json.get<std::string>();
        suite_from_name(name);  // unknown names must be rejected up front
        c.suites.push_back(name);
      }
    }
    if (j.contains("sampler")) c.sampler = sampler_from_json(j.at("sampler"));
    if (j.contains("output")) {
      const auto& out = j.at("output");
      if (out.contains("path")) c.output_path = out.at("path").get<std::string>();
      if (out.contains("format")) {
        const std::string fmt = out.at("format").get<std::string>();
        if (fmt == "json") {
          c.format = RunConfig::Format::json;
        } else if (fmt == "csv") {
          c.format = RunConfig::Format::csv;
        } else {
          throw std::invalid_argument("output.format must be json or csv");
        }
      }
    }
    if (j.contains("tolerances")) {
      const auto& tol = j.at("tolerances");
      if (tol.contains("exact")) c.tolerances.exact = tol.at("exact").get<double>();
      if (tol.contains("floating")) c.tolerances.floating = tol.at("floating").get<double>();
      if (tol.contains("negative_floor")) {
        c.tolerances.negative_floor = tol.at("negative_floor").get<double>();
      }
    }
    if (j.contains("seed")) {
      c.seed = j.at("seed").get<std::uint64_t>();
      c.seed_from_config = true;
    }
    if (j.contains("trials")) c.trials = j.at("trials").get<std::size_t>();
    if (j.contains("inputs")) c.inputs = j.at("inputs").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.model.validate();
  return c;
}

std::string run_config_to_json(const RunConfig& config) {
  ordered_json j;
  j["model"] = ordered_json::parse(model_spec_to_json(config.model));
  j["suites"] = config.suites;
  j["sampler"] = sampler_to_json(config.sampler);
  j["output"]["path"] = config.output_path;
  j["output"]["format"] = config.format == RunConfig::Format::json ? "json" : "csv";
  j["tolerances"]["exact"] = config.tolerances.exact;
  j["tolerances"]["floating"] = config.tolerances.floating;
  j["tolerances"]["negative_floor"] = config.tolerances.negative_floor;
  j["seed"] = config.seed;
  j["trials"] = config.trials;
  j["inputs"] = config.inputs;
  return j.dump(2);
}

std::vector<AuditReport> run_audit(const RunConfig& config) {
  std::vector<AuditReport> reports;
  reports.reserve(config.suites.size());

  // Weights are a pure function of the model spec; one build serves every
  // model-level suite in the run.
  ModelWeights weights;
  bool have_weights = false;
  for (const std::string& name : config.suites) {
    const SuiteKind kind = suite_from_name(name);
    if (suite_needs_model(kind)) {
      if (!have_weights) {
        weights = build_model(config.model);
        have_weights = true;
      }
      reports.push_back(model_suite(kind, config.model, weights, config.sampler,
                                    config.inputs, config.seed, config.tolerances));
    } else {
      reports.push_back(lemma_suite(kind, config.trials, config.seed, config.tolerances));
    }
  }
  return reports;
}

bool all_suites_ok(const std::vector<AuditReport>& reports) {
  for (const AuditReport& rep : reports) {
    if (!suite_ok(rep)) return false;
  }
  return true;
}

std::string report_to_json(const AuditReport& report) {
  return report_to_ordered(report).dump(2);
}

std::string reports_to_json(const std::vector<AuditReport>& reports) {
  ordered_json arr = ordered_json::array();
  for (const AuditReport& rep : reports) arr.push_back(report_to_ordered(rep));
  return arr.dump(2);
}

std::string reports_to_csv(const std::vector<AuditReport>& reports) {
  std::string csv = "suite,op_name,input_seed,passed,residual,matched_dy,matched_dx\n";
  for (const AuditReport& rep : reports) {
    for (const EquivarianceVerdict& v : rep.verdicts) {
      csv += csv_field(rep.suite);
      csv += ',';
      csv += csv_field(v.op_name);
      csv += ',';
      csv += std::to_string(v.input_seed);
      csv += ',';
      csv += v.passed ? "true" : "false";
      csv += ',';
      csv += format_double(v.residual);
      csv += ',';
      if (v.matched_shift) {
        csv += std::to_string(v.matched_shift->dy);
        csv += ',';
        csv += std::to_string(v.matched_shift->dx);
      } else {
        csv += ',';
      }
      csv += '\n';
    }
  }
  return csv;
}

std::string normalize_report_json(const std::string& json_text) {
  ordered_json j = ordered_json::parse(json_text);
  auto strip = [](ordered_json& rep) {
    if (rep.contains("env") && rep.at("env").contains("timestamp")) {
      rep.at("env").erase("timestamp");
    }
  };
  if (j.is_array()) {
    for (auto& rep : j) strip(rep);
  } else {
    strip(j);
  }
  return j.dump(2);
}

}  // namespace shifteq
