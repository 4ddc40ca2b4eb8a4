#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shifteq/model.hpp"
#include "shifteq/tensor.hpp"

namespace shifteq {

/// Generates the shift set a metric or suite runs over. Exhaustive mode walks
/// the square {lo, lo+step, ..., hi}^2; random mode draws `count` shifts with
/// both components uniform in [lo, hi] from the seeded stream.
struct ShiftSampler {
  enum class Mode { exhaustive, uniform_random };

  Mode mode = Mode::exhaustive;
  long lo = 0;
  long hi = 0;
  long step = 1;
  std::size_t count = 1;  // random mode only
  std::uint64_t seed = 0;

  static ShiftSampler exhaustive(long lo, long hi, long step = 1);
  /// All shifts of an n x n grid: (0,0) .. (n-1, n-1).
  static ShiftSampler full_grid(std::size_t n);
  static ShiftSampler uniform(long lo, long hi, std::size_t count, std::uint64_t seed);

  std::vector<Shift2D> shifts() const;
};

/// Pass thresholds. `exact` guards lattice suites where the theory predicts
/// zero residual, `floating` the normal-init float paths, and counterexample
/// suites must exceed `negative_floor` to count as a genuine failure.
struct Tolerances {
  double exact = 1e-9;
  double floating = 1e-6;
  double negative_floor = 1e-3;
};

struct EquivarianceVerdict {
  bool passed = false;
  double residual = 0.0;  // L2 norm of the best-candidate difference
  std::optional<Shift2D> matched_shift;  // the g' found; present iff passed
  std::string op_name;
  std::uint64_t input_seed = 0;
};

/// How candidate output shifts g' are enumerated.
struct CandidateSearch {
  enum class Strategy { exhaustive, expected, invariance_only };

  Strategy strategy = Strategy::exhaustive;
  Shift2D expected{0, 0};

  static CandidateSearch exhaustive() { return {}; }
  static CandidateSearch expect(Shift2D g) { return {Strategy::expected, g}; }
  static CandidateSearch invariance() { return {Strategy::invariance_only, {0, 0}}; }
};

using TensorMap = std::function<Tensor(const Tensor&)>;

/// Matches an already-computed output pair: finds the candidate g' minimizing
/// ||shifted - g'.base||_2 and passes iff the minimum is within tolerance.
/// Exhaustive search covers every shift of the output grid. Rank-1 outputs
/// only admit the identity candidate (invariance).
EquivarianceVerdict equivariance_match(const Tensor& base, const Tensor& shifted,
                                       const CandidateSearch& candidates = {},
                                       double tolerance = 1e-9,
                                       std::string op_name = {},
                                       std::uint64_t input_seed = 0);

/// The feature shift-equivariance test: evaluates F(x) and F(g.x) and
/// delegates to equivariance_match.
EquivarianceVerdict equivariance_test(const TensorMap& f, const Tensor& x, Shift2D g,
                                      const CandidateSearch& candidates = {},
                                      double tolerance = 1e-9,
                                      std::string op_name = {},
                                      std::uint64_t input_seed = 0);

/// One pass over (input, shift) pairs collecting the three output-level
/// stability numbers at once. Per-class variance is the population variance
/// across the shift set; the clean (unshifted) logits are the reference.
struct ShiftSweep {
  double consistency = 1.0;   // fraction of pairs keeping the clean prediction
  double max_residual = 0.0;  // max over pairs of ||logits(g.x) - logits(x)||_2
  double max_variance = 0.0;  // max over inputs of class-mean logits variance
};

ShiftSweep shift_sweep(const ModelSpec& spec, const ModelWeights& weights,
                       const std::vector<Tensor>& inputs,
                       const std::vector<Shift2D>& shifts);

/// Fraction of (input, shift) pairs whose predicted class matches the
/// unshifted prediction.
double consistency(const ModelSpec& spec, const ModelWeights& weights,
                   const std::vector<Tensor>& inputs, const ShiftSampler& sampler);

/// Mean over classes of the per-class logits variance across the sampled
/// shifts of one input.
double logits_variance(const ModelSpec& spec, const ModelWeights& weights, const Tensor& x,
                       const ShiftSampler& sampler);

struct WorstShiftResult {
  Shift2D shift{0, 0};
  double fraction = 1.0;
};

/// Samples n shifts in [lo, hi]^2, applies each to the whole batch, and
/// returns the shift minimizing agreement with the reference labels. With an
/// empty label vector the model's own clean predictions are the reference
/// (accuracy proxy for untrained models). The first n draws of a stream are a
/// prefix of the first m > n, so worst-of-m is never better than worst-of-n
/// at the same seed.
WorstShiftResult worst_of_n_shift(const ModelSpec& spec, const ModelWeights& weights,
                                  const std::vector<Tensor>& inputs,
                                  const std::vector<std::size_t>& labels, std::size_t n,
                                  long lo, long hi, std::uint64_t seed);

/// Registry of property suites and metrics runnable from the audit CLI.
enum class SuiteKind {
  // Exhaustive-shift property suites on seeded lattice inputs.
  lemma1,      // anchor alone is equivariant (some matched output shift)
  corollary1,  // every matched anchor shift is 0 mod s
  lemma2,      // strided convolution after anchoring
  lemma3,      // window attention after anchoring
  lemma4,      // global subsampled attention after anchoring
  composition, // two random passing ops chained still pass
  relpe_circulant,  // circulant attention bias commutes with token rotation
  // Counterexample suites: the raw verdicts must fail.
  relpe_counterexample,  // free-form attention bias breaks equivariance
  abspe_counterexample,  // absolute positional embedding breaks equivariance
  strided_conv_counterexample,
  window_attention_counterexample,
  gsa_counterexample,
  // Model-level metrics and checks (need a ModelSpec).
  consistency_metric,
  logits_variance_metric,
  worst_of_n_metric,
  feature_equivariance,
};

const char* suite_name(SuiteKind kind);
SuiteKind suite_from_name(const std::string& name);  // throws on unknown names
std::vector<std::string> suite_registry();
bool suite_is_counterexample(SuiteKind kind);
bool suite_is_metric(SuiteKind kind);
bool suite_needs_model(SuiteKind kind);

/// One suite run: raw verdicts plus aggregate metrics and the environment
/// (seed, tolerances, version, timestamp).
struct AuditReport {
  std::string suite;
  std::vector<EquivarianceVerdict> verdicts;
  std::map<std::string, double> metrics;
  std::map<std::string, std::string> env;
};

std::map<std::string, std::string> make_env(std::uint64_t seed, const Tolerances& tol);

/// Runs one of the operator-level suites on `trials` seeded inputs (lattice
/// inputs with a unique max polyphase where anchoring is involved; ties are
/// resampled). Each trial is exhaustive over all shifts of the 8x8 fixture
/// grid and yields one verdict aggregating the worst shift.
AuditReport lemma_suite(SuiteKind kind, std::size_t trials, std::uint64_t seed,
                        const Tolerances& tol = {});

/// Runs a model-level metric or check over seeded inputs.
AuditReport model_suite(SuiteKind kind, const ModelSpec& spec, const ModelWeights& weights,
                        const ShiftSampler& sampler, std::size_t n_inputs,
                        std::uint64_t seed, const Tolerances& tol = {});

/// Suite-level outcome with counterexample semantics inverted: positive
/// suites need every verdict to pass; counterexample suites need every trial
/// to fail with residual above the negative floor; metric suites are
/// measurements and always count as ok.
bool suite_ok(const AuditReport& report);

}  // namespace shifteq
