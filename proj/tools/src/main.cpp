#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shifteq/attention.hpp"
#include "shifteq/harness.hpp"
#include "shifteq/model.hpp"
#include "shifteq/polyphase.hpp"
#include "shifteq/report.hpp"
#include "shifteq/rng.hpp"

namespace {

using namespace shifteq;

constexpr int kExitOk = 0;
constexpr int kExitSuiteFailure = 1;
constexpr int kExitBadConfig = 2;

bool env_seed(std::uint64_t* out) {
  const char* raw = std::getenv("SHIFTEQ_SEED");
  if (raw == nullptr || *raw == '\0') return false;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(raw, &end, 10);
  if (end == raw || *end != '\0') return false;
  *out = static_cast<std::uint64_t>(v);
  return true;
}

std::string suite_summary(const AuditReport& rep) {
  const SuiteKind kind = suite_from_name(rep.suite);
  const bool ok = suite_ok(rep);
  std::ostringstream line;
  line << rep.suite << ": " << (ok ? "ok" : "FAIL");
  if (suite_is_metric(kind)) {
    for (const auto& [key, value] : rep.metrics) {
      line << " " << key << "=" << value;
    }
    return line.str();
  }
  const auto metric = [&](const char* name) {
    const auto it = rep.metrics.find(name);
    return it != rep.metrics.end() ? it->second : 0.0;
  };
  if (suite_is_counterexample(kind)) {
    line << " (" << metric("failed_above_floor") << "/" << metric("trials")
         << " trials failed as expected, max residual " << metric("max_residual") << ")";
  } else {
    line << " (" << metric("passed_trials") << "/"
         << (rep.metrics.count("trials") ? metric("trials") : metric("inputs"))
         << " trials passed, max residual " << metric("max_residual") << ")";
  }
  return line.str();
}

int cmd_audit(const std::string& config_path, const std::string& out_override,
              const std::string& format_override) {
  std::ifstream in(config_path);
  if (!in) {
    std::fprintf(stderr, "error: cannot read config %s\n", config_path.c_str());
    return kExitBadConfig;
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();

  RunConfig cfg;
  try {
    cfg = run_config_from_json(buffer.str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitBadConfig;
  }
  if (!cfg.seed_from_config) {
    std::uint64_t seed = 0;
    if (env_seed(&seed)) cfg.seed = seed;
  }
  if (!out_override.empty()) cfg.output_path = out_override;
  if (format_override == "json") cfg.format = RunConfig::Format::json;
  if (format_override == "csv") cfg.format = RunConfig::Format::csv;
  if (cfg.suites.empty()) {
    std::fprintf(stderr, "error: config selects no suites\n");
    return kExitBadConfig;
  }

  std::vector<AuditReport> reports;
  try {
    reports = run_audit(cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: audit run failed: %s\n", e.what());
    return kExitSuiteFailure;
  }

  const std::string serialized = cfg.format == RunConfig::Format::json
                                     ? reports_to_json(reports)
                                     : reports_to_csv(reports);
  if (cfg.output_path.empty()) {
    std::fputs(serialized.c_str(), stdout);
    std::fputc('\n', stdout);
    for (const AuditReport& rep : reports) {
      std::fprintf(stderr, "%s\n", suite_summary(rep).c_str());
    }
  } else {
    std::ofstream out(cfg.output_path);
    if (!out) {
      std::fprintf(stderr, "error: cannot write %s\n", cfg.output_path.c_str());
      return kExitBadConfig;
    }
    out << serialized;
    if (!out) {
      std::fprintf(stderr, "error: short write to %s\n", cfg.output_path.c_str());
      return kExitBadConfig;
    }
    for (const AuditReport& rep : reports) {
      std::fprintf(stdout, "%s\n", suite_summary(rep).c_str());
    }
    std::fprintf(stdout, "report written to %s\n", cfg.output_path.c_str());
  }

  const bool ok = all_suites_ok(reports);
  std::fprintf(stdout, "audit: %s\n", ok ? "OK" : "FAIL");
  return ok ? kExitOk : kExitSuiteFailure;
}

void print_logits(const char* label, const Tensor& logits) {
  std::printf("%s [", label);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    std::printf(i == 0 ? "%.6f" : ", %.6f", logits[i]);
  }
  std::printf("]\n");
}

int cmd_demo(const std::string& variant_flag, std::uint64_t seed, long dy, long dx) {
  const Variant requested = variant_from_name(variant_flag);
  const bool twins_family = requested == Variant::twins || requested == Variant::twins_poly;
  const Variant baseline = twins_family ? Variant::twins : Variant::vit;
  const Variant poly = twins_family ? Variant::twins_poly : Variant::vit_poly;

  ModelSpec base_spec = default_spec(baseline);
  ModelSpec poly_spec = default_spec(poly);
  base_spec.seed = seed;
  poly_spec.seed = seed;

  Rng input_rng = Rng::derive(seed, "demo.input");
  const Tensor x =
      rng_normal(input_rng, {base_spec.image[0], base_spec.image[1], base_spec.image[2]});
  const Tensor shifted = circular_shift(x, {dy, dx});

  std::printf("input: %zux%zux%zu, seed %llu, shift (%ld, %ld)\n", base_spec.image[0],
              base_spec.image[1], base_spec.image[2],
              static_cast<unsigned long long>(seed), dy, dx);

  for (const Variant v : {baseline, poly}) {
    const ModelSpec& spec = v == baseline ? base_spec : poly_spec;
    const ModelWeights weights = build_model(spec);
    const Tensor clean = forward(spec, weights, x).logits;
    const Tensor moved = forward(spec, weights, shifted).logits;
    double max_diff = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      max_diff = std::max(max_diff, std::abs(clean[i] - moved[i]));
    }
    std::size_t clean_class = 0, moved_class = 0;
    for (std::size_t i = 1; i < clean.size(); ++i) {
      if (clean[i] > clean[clean_class]) clean_class = i;
      if (moved[i] > moved[moved_class]) moved_class = i;
    }
    std::printf("\n%s:\n", variant_name(v));
    print_logits("  logits(x):   ", clean);
    print_logits("  logits(g.x): ", moved);
    std::printf("  max residual: %.3e\n", max_diff);
    std::printf("  class(x) = %zu, class(g.x) = %zu%s\n", clean_class, moved_class,
                clean_class == moved_class ? " (consistent)" : " (INCONSISTENT)");
  }
  return kExitOk;
}

template <typename F>
double best_of_three_ms(F&& op) {
  double best = 0.0;
  for (int rep = 0; rep < 3; ++rep) {
    const auto start = std::chrono::steady_clock::now();
    op();
    const auto stop = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(stop - start).count();
    if (rep == 0 || ms < best) best = ms;
  }
  return best;
}

int cmd_bench(const std::vector<std::size_t>& sizes) {
  constexpr std::size_t kC = 4;
  constexpr std::size_t kS = 2;
  bool ok = true;

  std::printf("%-8s %12s %18s %12s\n", "size", "anchor_ms", "window_poly_ms", "gsa_ms");
  for (const std::size_t n : sizes) {
    if (n == 0 || n % kS != 0) {
      std::fprintf(stderr, "error: size %zu is not a positive multiple of %zu\n", n, kS);
      return kExitBadConfig;
    }
    Rng r(n);
    const Tensor x = rng_normal(r, {kC, n, n});
    AttentionParams params;
    params.wq = rng_normal(r, {kC, kC});
    params.wk = rng_normal(r, {kC, kC});
    params.wv = rng_normal(r, {kC, kC});
    ConvFilter h;
    h.weights = rng_normal(r, {kC, kC, kS, kS});
    h.stride = kS;
    const WindowSpec win = WindowSpec::for_grid(n, n, kS);

    const double anchor_ms = best_of_three_ms([&] { (void)anchor(x, kS); });
    const double window_ms =
        best_of_three_ms([&] { (void)window_attention_poly(x, win, params); });
    const double gsa_ms = best_of_three_ms([&] { (void)gsa_poly(x, kS, h, params); });
    std::printf("%-8zu %12.3f %18.3f %12.3f\n", n, anchor_ms, window_ms, gsa_ms);

    // Anchoring is a norm scan plus one circular shift; if it ever costs more
    // than the attention op it fronts, something is off.
    if (anchor_ms >= window_ms || anchor_ms >= gsa_ms) {
      std::fprintf(stderr, "FAIL: anchor overhead exceeds op cost at size %zu\n", n);
      ok = false;
    }
  }
  return ok ? kExitOk : kExitSuiteFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equivariance audit tool for polyphase-anchored transformer blocks"};
  app.require_subcommand(1);

  std::string config_path, out_override, format_override;
  CLI::App* audit = app.add_subcommand(
      "audit", "Run property suites from a JSON config and write the report");
  audit->add_option("--config", config_path, "JSON config path")->required();
  audit->add_option("--out", out_override, "Override the report output path");
  audit->add_option("--format", format_override, "Override the report format")
      ->check(CLI::IsMember({"json", "csv"}));

  std::string variant_flag = "vit";
  std::uint64_t demo_seed = 1234;
  std::vector<long> shift{1, 1};
  CLI::App* demo = app.add_subcommand(
      "demo", "Print baseline vs anchored predictions for a shifted input");
  demo->add_option("--variant", variant_flag, "Model family to contrast")
      ->check(CLI::IsMember({"vit", "vit_poly", "twins", "twins_poly"}));
  CLI::Option* seed_opt = demo->add_option("--seed", demo_seed, "Input and weight seed");
  demo->add_option("--shift", shift, "Pixel shift dy dx")->expected(2);

  std::vector<std::size_t> sizes{8, 16, 32};
  CLI::App* bench = app.add_subcommand("bench", "Time anchoring against the ops it fronts");
  bench->add_option("--sizes", sizes, "Comma-separated square grid sizes")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadConfig;
  }

  try {
    if (audit->parsed()) return cmd_audit(config_path, out_override, format_override);
    if (demo->parsed()) {
      if (seed_opt->count() == 0) env_seed(&demo_seed);
      return cmd_demo(variant_flag, demo_seed, shift[0], shift[1]);
    }
    if (bench->parsed()) return cmd_bench(sizes);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitBadConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSuiteFailure;
  }
  return kExitBadConfig;
}
