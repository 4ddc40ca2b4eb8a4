#include "shifteq/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <limits>
#include <stdexcept>
#include <utility>

#include "shifteq/attention.hpp"
#include "shifteq/conv.hpp"
#include "shifteq/polyphase.hpp"
#include "shifteq/rng.hpp"

namespace shifteq {

namespace {

// Fixture geometry shared by all operator-level suites: an 8x8 grid with
// stride 2 keeps exhaustive shift x candidate enumeration at 64 x 64 while
// still exercising nontrivial window and subsample layouts.
constexpr std::size_t kGrid = 8;
constexpr std::size_t kStride = 2;
constexpr std::size_t kChannels = 4;
constexpr int kLatticeBits = 2;
constexpr std::size_t kTokens = 9;  // token count for the bias suites (3x3 grid)
constexpr std::size_t kTokenDim = 4;

Rng trial_rng(SuiteKind kind, std::uint64_t seed, std::size_t t) {
  return Rng::derive(seed, std::string(suite_name(kind)) + ".trial" + std::to_string(t));
}

// Lattice draw with a strictly unique max-norm polyphase; anchoring is only
// deterministic across shifted copies when the max is unique, so tied draws
// are discarded.
Tensor lattice_unique_max(Rng& r) {
  for (int attempt = 0; attempt < 4096; ++attempt) {
    Tensor x = rng_lattice(r, {kChannels, kGrid, kGrid}, kLatticeBits);
    if (unique_max_polyphase(x, kStride)) return x;
  }
  throw std::runtime_error("lattice_unique_max: exhausted resampling budget");
}

AttentionParams square_params(Rng& r, std::size_t d) {
  AttentionParams p;
  p.wq = rng_normal(r, {d, d});
  p.wk = rng_normal(r, {d, d});
  p.wv = rng_normal(r, {d, d});
  return p;
}

ConvFilter make_filter(Rng& r, std::size_t co, std::size_t ci, std::size_t k,
                       std::size_t stride) {
  ConvFilter f;
  f.weights = rng_normal(r, {co, ci, k, k});
  f.stride = stride;
  return f;
}

std::size_t argmax_index(const Tensor& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

// Worst shift over a trial: base output computed once, every shift matched
// against it. The verdict keeps the largest best-candidate residual; the
// matched shift survives only when every shift passed.
EquivarianceVerdict aggregate_shifts(const TensorMap& f, const Tensor& x,
                                     const std::vector<Shift2D>& shifts,
                                     const CandidateSearch& candidates, double tolerance,
                                     std::string op_name, std::uint64_t input_seed) {
  EquivarianceVerdict worst;
  worst.op_name = std::move(op_name);
  worst.input_seed = input_seed;
  worst.passed = true;
  const Tensor base = f(x);
  bool first = true;
  for (const Shift2D g : shifts) {
    const Tensor shifted = f(circular_shift(x, g));
    EquivarianceVerdict v =
        equivariance_match(base, shifted, candidates, tolerance, worst.op_name, input_seed);
    if (first || v.residual > worst.residual) {
      worst.residual = v.residual;
      worst.matched_shift = v.matched_shift;
      first = false;
    }
    worst.passed = worst.passed && v.passed;
  }
  if (!worst.passed) worst.matched_shift.reset();
  return worst;
}

std::vector<Shift2D> token_rotations() {
  std::vector<Shift2D> rots;
  for (std::size_t t = 0; t < kTokens; ++t) {
    rots.push_back({static_cast<long>(t), 0});
  }
  return rots;
}

EquivarianceVerdict run_operator_trial(SuiteKind kind, Rng& r,
                                       const std::vector<Shift2D>& grid_shifts,
                                       const Tolerances& tol, std::size_t* mod_violations) {
  const std::uint64_t seed = r.seed();
  switch (kind) {
    case SuiteKind::lemma1: {
      const Tensor x = lattice_unique_max(r);
      auto f = [](const Tensor& t) { return anchor(t, kStride).anchored; };
      return aggregate_shifts(f, x, grid_shifts, CandidateSearch::exhaustive(), tol.exact,
                              "anchor", seed);
    }
    case SuiteKind::corollary1: {
      const Tensor x = lattice_unique_max(r);
      auto f = [](const Tensor& t) { return anchor(t, kStride).anchored; };
      const Tensor base = f(x);
      EquivarianceVerdict worst;
      worst.op_name = "anchor";
      worst.input_seed = seed;
      worst.passed = true;
      bool first = true;
      for (const Shift2D g : grid_shifts) {
        EquivarianceVerdict v = equivariance_match(base, f(circular_shift(x, g)),
                                                   CandidateSearch::exhaustive(), tol.exact,
                                                   "anchor", seed);
        // The anchored frames of x and g.x may only disagree by whole-stride
        // steps; any other matched shift is a violation.
        if (v.matched_shift &&
            (v.matched_shift->dy % static_cast<long>(kStride) != 0 ||
             v.matched_shift->dx % static_cast<long>(kStride) != 0)) {
          ++*mod_violations;
          v.passed = false;
        }
        if (first || v.residual > worst.residual) {
          worst.residual = v.residual;
          worst.matched_shift = v.matched_shift;
          first = false;
        }
        worst.passed = worst.passed && v.passed;
      }
      if (!worst.passed) worst.matched_shift.reset();
      return worst;
    }
    case SuiteKind::lemma2: {
      const Tensor x = lattice_unique_max(r);
      const ConvFilter f = make_filter(r, 3, kChannels, kStride, kStride);
      auto op = [&f](const Tensor& t) { return patch_embed_poly(t, f, kStride).out; };
      return aggregate_shifts(op, x, grid_shifts, CandidateSearch::exhaustive(), tol.exact,
                              "patch_embed_poly", seed);
    }
    case SuiteKind::lemma3: {
      const Tensor x = lattice_unique_max(r);
      const AttentionParams params = square_params(r, kChannels);
      const WindowSpec win = WindowSpec::for_grid(kGrid, kGrid, kStride);
      auto op = [&](const Tensor& t) { return window_attention_poly(t, win, params).out; };
      return aggregate_shifts(op, x, grid_shifts, CandidateSearch::exhaustive(), tol.exact,
                              "window_attention_poly", seed);
    }
    case SuiteKind::lemma4: {
      const Tensor x = lattice_unique_max(r);
      const ConvFilter h = make_filter(r, kChannels, kChannels, kStride, kStride);
      const AttentionParams params = square_params(r, kChannels);
      auto op = [&](const Tensor& t) { return gsa_poly(t, kStride, h, params).out; };
      return aggregate_shifts(op, x, grid_shifts, CandidateSearch::exhaustive(), tol.exact,
                              "gsa_poly", seed);
    }
    case SuiteKind::composition: {
      const Tensor x = rng_normal(r, {kChannels, kGrid, kGrid});
      auto draw_op = [&r]() -> std::pair<TensorMap, std::string> {
        switch (r.next_below(4)) {
          case 0: {
            const ConvFilter f = make_filter(r, kChannels, kChannels, 3, 1);
            return {[f](const Tensor& t) { return conv2d_circular(t, f); }, "conv"};
          }
          case 1: {
            const DepthwiseFilter f{rng_normal(r, {kChannels, 3, 3})};
            return {[f](const Tensor& t) { return depthwise_conv_circular(t, f); },
                    "depthwise"};
          }
          case 2: {
            const AttentionParams p = square_params(r, kChannels);
            const WindowSpec win = WindowSpec::for_grid(kGrid, kGrid, kStride);
            return {[p, win](const Tensor& t) {
                      AttnPolyResult a = window_attention_poly(t, win, p);
                      return restore(a.out, a.phase);
                    },
                    "window_attention_poly"};
          }
          default: {
            const ConvFilter h = make_filter(r, kChannels, kChannels, kStride, kStride);
            const AttentionParams p = square_params(r, kChannels);
            return {[h, p](const Tensor& t) {
                      AttnPolyResult a = gsa_poly(t, kStride, h, p);
                      return restore(a.out, a.phase);
                    },
                    "gsa_poly"};
          }
        }
      };
      auto [f1, name1] = draw_op();
      auto [f2, name2] = draw_op();
      const TensorMap chained = [f1 = f1, f2 = f2](const Tensor& t) { return f2(f1(t)); };
      const std::string chain_name = "compose(" + name1 + "," + name2 + ")";
      const EquivarianceVerdict v1 = aggregate_shifts(
          f1, x, grid_shifts, CandidateSearch::exhaustive(), tol.floating, name1, seed);
      const EquivarianceVerdict v2 = aggregate_shifts(
          f2, x, grid_shifts, CandidateSearch::exhaustive(), tol.floating, name2, seed);
      EquivarianceVerdict vc = aggregate_shifts(
          chained, x, grid_shifts, CandidateSearch::exhaustive(), tol.floating, chain_name,
          seed);
      vc.residual = std::max({v1.residual, v2.residual, vc.residual});
      vc.passed = v1.passed && v2.passed && vc.passed;
      if (!vc.passed) vc.matched_shift.reset();
      return vc;
    }
    case SuiteKind::relpe_circulant: {
      const Tensor tokens = rng_normal(r, {kTokens, kTokenDim});
      const AttentionParams params = square_params(r, kTokenDim);
      const RelBias bias = RelBias::circulant(rng_normal(r, {kTokens}));
      auto op = [&](const Tensor& t) { return attention_with_bias(t, params, bias); };
      return aggregate_shifts(op, tokens, token_rotations(), CandidateSearch::exhaustive(),
                              tol.floating, "attention_with_bias[circulant]", seed);
    }
    case SuiteKind::relpe_counterexample: {
      const Tensor tokens = rng_normal(r, {kTokens, kTokenDim});
      const AttentionParams params = square_params(r, kTokenDim);
      // Basis-vector bias: favors positions (0,0) and (1,1) only, so it
      // cannot commute with token rotation.
      Tensor basis({kTokens, kTokens});
      basis(std::size_t{0}, std::size_t{0}) = 1.0;
      basis(std::size_t{1}, std::size_t{1}) = 1.0;
      const RelBias bias = RelBias::free_form(std::move(basis));
      auto op = [&](const Tensor& t) { return attention_with_bias(t, params, bias); };
      return aggregate_shifts(op, tokens, token_rotations(), CandidateSearch::exhaustive(),
                              tol.floating, "attention_with_bias[basis]", seed);
    }
    case SuiteKind::abspe_counterexample: {
      const Tensor x = rng_normal(r, {kChannels, kGrid, kGrid});
      const Tensor e = rng_normal(r, {kChannels, kGrid, kGrid});
      auto op = [&e](const Tensor& t) { return abs_pos_embed(t, e); };
      return aggregate_shifts(op, x, grid_shifts, CandidateSearch::exhaustive(),
                              tol.floating, "abs_pos_embed", seed);
    }
    case SuiteKind::strided_conv_counterexample: {
      const Tensor x = rng_normal(r, {kChannels, kGrid, kGrid});
      const ConvFilter f = make_filter(r, 3, kChannels, kStride, kStride);
      auto op = [&f](const Tensor& t) { return strided_conv(t, f, kStride); };
      return aggregate_shifts(op, x, grid_shifts, CandidateSearch::exhaustive(),
                              tol.floating, "strided_conv", seed);
    }
    case SuiteKind::window_attention_counterexample: {
      const Tensor x = rng_normal(r, {kChannels, kGrid, kGrid});
      const AttentionParams params = square_params(r, kChannels);
      const WindowSpec win = WindowSpec::for_grid(kGrid, kGrid, kStride);
      auto op = [&](const Tensor& t) { return window_attention(t, win, params); };
      return aggregate_shifts(op, x, grid_shifts, CandidateSearch::exhaustive(),
                              tol.floating, "window_attention", seed);
    }
    case SuiteKind::gsa_counterexample: {
      const Tensor x = rng_normal(r, {kChannels, kGrid, kGrid});
      const ConvFilter h = make_filter(r, kChannels, kChannels, kStride, kStride);
      const AttentionParams params = square_params(r, kChannels);
      auto op = [&](const Tensor& t) { return gsa(t, kStride, h, params); };
      return aggregate_shifts(op, x, grid_shifts, CandidateSearch::exhaustive(),
                              tol.floating, "gsa", seed);
    }
    default:
      throw std::invalid_argument("run_operator_trial: not an operator-level suite");
  }
}

// Agreement-minimizing shift over an explicit list; first minimum wins ties.
WorstShiftResult worst_over_shifts(const ModelSpec& spec, const ModelWeights& weights,
                                   const std::vector<Tensor>& inputs,
                                   const std::vector<std::size_t>& refs,
                                   const std::vector<Shift2D>& shifts) {
  WorstShiftResult worst;
  bool first = true;
  for (const Shift2D g : shifts) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      ok += predict(spec, weights, circular_shift(inputs[i], g)) == refs[i] ? 1 : 0;
    }
    const double frac = static_cast<double>(ok) / static_cast<double>(inputs.size());
    if (first || frac < worst.fraction) {
      worst.shift = g;
      worst.fraction = frac;
      first = false;
    }
  }
  return worst;
}

}  // namespace

ShiftSampler ShiftSampler::exhaustive(long lo, long hi, long step) {
  ShiftSampler s;
  s.mode = Mode::exhaustive;
  s.lo = lo;
  s.hi = hi;
  s.step = step;
  return s;
}

ShiftSampler ShiftSampler::full_grid(std::size_t n) {
  return exhaustive(0, static_cast<long>(n) - 1, 1);
}

ShiftSampler ShiftSampler::uniform(long lo, long hi, std::size_t count,
                                   std::uint64_t seed) {
  ShiftSampler s;
  s.mode = Mode::uniform_random;
  s.lo = lo;
  s.hi = hi;
  s.count = count;
  s.seed = seed;
  return s;
}

std::vector<Shift2D> ShiftSampler::shifts() const {
  std::vector<Shift2D> out;
  if (mode == Mode::exhaustive) {
    if (step <= 0) throw std::invalid_argument("ShiftSampler: step must be positive");
    for (long dy = lo; dy <= hi; dy += step) {
      for (long dx = lo; dx <= hi; dx += step) {
        out.push_back({dy, dx});
      }
    }
  } else {
    if (hi < lo) throw std::invalid_argument("ShiftSampler: empty range");
    Rng r(seed);
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    for (std::size_t i = 0; i < count; ++i) {
      const long dy = lo + static_cast<long>(r.next_below(span));
      const long dx = lo + static_cast<long>(r.next_below(span));
      out.push_back({dy, dx});
    }
  }
  return out;
}

EquivarianceVerdict equivariance_match(const Tensor& base, const Tensor& shifted,
                                       const CandidateSearch& candidates, double tolerance,
                                       std::string op_name, std::uint64_t input_seed) {
  if (!base.same_shape(shifted)) {
    throw std::invalid_argument("equivariance_match: output shapes differ");
  }
  EquivarianceVerdict v;
  v.op_name = std::move(op_name);
  v.input_seed = input_seed;

  if (base.rank() < 2) {
    v.residual = lp_norm(sub(shifted, base), 2);
    v.passed = v.residual <= tolerance;
    if (v.passed) v.matched_shift = Shift2D{0, 0};
    return v;
  }

  std::vector<Shift2D> cands;
  switch (candidates.strategy) {
    case CandidateSearch::Strategy::invariance_only:
      cands.push_back({0, 0});
      break;
    case CandidateSearch::Strategy::expected:
      cands.push_back(candidates.expected);
      break;
    case CandidateSearch::Strategy::exhaustive:
      for (std::size_t dy = 0; dy < base.height(); ++dy) {
        for (std::size_t dx = 0; dx < base.width(); ++dx) {
          cands.push_back({static_cast<long>(dy), static_cast<long>(dx)});
        }
      }
      break;
  }

  double best = std::numeric_limits<double>::infinity();
  Shift2D best_shift{0, 0};
  for (const Shift2D c : cands) {
    const double res = lp_norm(sub(shifted, circular_shift(base, c)), 2);
    if (res < best) {
      best = res;
      best_shift = c;
    }
  }
  v.residual = best;
  v.passed = best <= tolerance;
  if (v.passed) v.matched_shift = best_shift;
  return v;
}

EquivarianceVerdict equivariance_test(const TensorMap& f, const Tensor& x, Shift2D g,
                                      const CandidateSearch& candidates, double tolerance,
                                      std::string op_name, std::uint64_t input_seed) {
  const Tensor base = f(x);
  const Tensor shifted = f(circular_shift(x, g));
  return equivariance_match(base, shifted, candidates, tolerance, std::move(op_name),
                            input_seed);
}

ShiftSweep shift_sweep(const ModelSpec& spec, const ModelWeights& weights,
                       const std::vector<Tensor>& inputs,
                       const std::vector<Shift2D>& shifts) {
  ShiftSweep sw;
  if (inputs.empty() || shifts.empty()) return sw;

  std::size_t agree = 0;
  const std::size_t total = inputs.size() * shifts.size();
  const std::size_t classes = spec.classes;

  for (const Tensor& x : inputs) {
    const Tensor clean = forward(spec, weights, x).logits;
    const std::size_t clean_class = argmax_index(clean);

    // Residuals against the clean logits; keeping the small numbers avoids
    // cancellation when the variance is near the float noise floor.
    std::vector<std::vector<double>> centered(shifts.size());
    for (std::size_t si = 0; si < shifts.size(); ++si) {
      const Tensor logits = forward(spec, weights, circular_shift(x, shifts[si])).logits;
      centered[si].resize(classes);
      double norm_sq = 0.0;
      for (std::size_t j = 0; j < classes; ++j) {
        const double c = logits[j] - clean[j];
        centered[si][j] = c;
        norm_sq += c * c;
      }
      sw.max_residual = std::max(sw.max_residual, std::sqrt(norm_sq));
      agree += argmax_index(logits) == clean_class ? 1 : 0;
    }

    double var_sum = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
      double mean = 0.0;
      for (std::size_t si = 0; si < shifts.size(); ++si) mean += centered[si][j];
      mean /= static_cast<double>(shifts.size());
      double var = 0.0;
      for (std::size_t si = 0; si < shifts.size(); ++si) {
        const double dev = centered[si][j] - mean;
        var += dev * dev;
      }
      var_sum += var / static_cast<double>(shifts.size());
    }
    sw.max_variance = std::max(sw.max_variance, var_sum / static_cast<double>(classes));
  }
  sw.consistency = static_cast<double>(agree) / static_cast<double>(total);
  return sw;
}

double consistency(const ModelSpec& spec, const ModelWeights& weights,
                   const std::vector<Tensor>& inputs, const ShiftSampler& sampler) {
  return shift_sweep(spec, weights, inputs, sampler.shifts()).consistency;
}

double logits_variance(const ModelSpec& spec, const ModelWeights& weights, const Tensor& x,
                       const ShiftSampler& sampler) {
  return shift_sweep(spec, weights, {x}, sampler.shifts()).max_variance;
}

WorstShiftResult worst_of_n_shift(const ModelSpec& spec, const ModelWeights& weights,
                                  const std::vector<Tensor>& inputs,
                                  const std::vector<std::size_t>& labels, std::size_t n,
                                  long lo, long hi, std::uint64_t seed) {
  if (inputs.empty()) throw std::invalid_argument("worst_of_n_shift: empty input batch");
  if (n == 0) throw std::invalid_argument("worst_of_n_shift: n must be positive");
  if (!labels.empty() && labels.size() != inputs.size()) {
    throw std::invalid_argument("worst_of_n_shift: label count mismatch");
  }
  std::vector<std::size_t> refs;
  if (labels.empty()) {
    refs.reserve(inputs.size());
    for (const Tensor& x : inputs) refs.push_back(predict(spec, weights, x));
  } else {
    refs = labels;
  }
  const auto shifts = ShiftSampler::uniform(lo, hi, n, seed).shifts();
  return worst_over_shifts(spec, weights, inputs, refs, shifts);
}

namespace {

struct SuiteInfo {
  SuiteKind kind;
  const char* name;
  bool counterexample;
  bool metric;
  bool needs_model;
};

constexpr SuiteInfo kSuiteTable[] = {
    {SuiteKind::lemma1, "lemma1", false, false, false},
    {SuiteKind::corollary1, "corollary1", false, false, false},
    {SuiteKind::lemma2, "lemma2", false, false, false},
    {SuiteKind::lemma3, "lemma3", false, false, false},
    {SuiteKind::lemma4, "lemma4", false, false, false},
    {SuiteKind::composition, "composition", false, false, false},
    {SuiteKind::relpe_circulant, "relpe_circulant", false, false, false},
    {SuiteKind::relpe_counterexample, "relpe_counterexample", true, false, false},
    {SuiteKind::abspe_counterexample, "abspe_counterexample", true, false, false},
    {SuiteKind::strided_conv_counterexample, "strided_conv_counterexample", true, false,
     false},
    {SuiteKind::window_attention_counterexample, "window_attention_counterexample", true,
     false, false},
    {SuiteKind::gsa_counterexample, "gsa_counterexample", true, false, false},
    {SuiteKind::consistency_metric, "consistency", false, true, true},
    {SuiteKind::logits_variance_metric, "logits_variance", false, true, true},
    {SuiteKind::worst_of_n_metric, "worst_of_n", false, true, true},
    {SuiteKind::feature_equivariance, "feature_equivariance", false, false, true},
};

const SuiteInfo& suite_info(SuiteKind kind) {
  for (const SuiteInfo& info : kSuiteTable) {
    if (info.kind == kind) return info;
  }
  throw std::invalid_argument("unknown suite kind");
}

}  // namespace

const char* suite_name(SuiteKind kind) { return suite_info(kind).name; }

SuiteKind suite_from_name(const std::string& name) {
  for (const SuiteInfo& info : kSuiteTable) {
    if (name == info.name) return info.kind;
  }
  throw std::invalid_argument("unknown suite name: " + name);
}

std::vector<std::string> suite_registry() {
  std::vector<std::string> names;
  for (const SuiteInfo& info : kSuiteTable) names.emplace_back(info.name);
  return names;
}

bool suite_is_counterexample(SuiteKind kind) { return suite_info(kind).counterexample; }
bool suite_is_metric(SuiteKind kind) { return suite_info(kind).metric; }
bool suite_needs_model(SuiteKind kind) { return suite_info(kind).needs_model; }

std::map<std::string, std::string> make_env(std::uint64_t seed, const Tolerances& tol) {
  auto fmt = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::map<std::string, std::string> env;
  env["seed"] = std::to_string(seed);
  env["tolerance_exact"] = fmt(tol.exact);
  env["tolerance_floating"] = fmt(tol.floating);
  env["negative_floor"] = fmt(tol.negative_floor);
#ifdef SHIFTEQ_VERSION
  env["version"] = SHIFTEQ_VERSION;
#else
  env["version"] = "0.0.0";
#endif
  std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  env["timestamp"] = stamp;
  return env;
}

AuditReport lemma_suite(SuiteKind kind, std::size_t trials, std::uint64_t seed,
                        const Tolerances& tol) {
  if (suite_needs_model(kind)) {
    throw std::invalid_argument("lemma_suite: model-level suite, use model_suite");
  }
  AuditReport rep;
  rep.suite = suite_name(kind);
  rep.env = make_env(seed, tol);

  const auto grid_shifts = ShiftSampler::full_grid(kGrid).shifts();
  double max_residual = 0.0;
  std::size_t passed = 0;
  std::size_t above_floor = 0;
  std::size_t mod_violations = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng r = trial_rng(kind, seed, t);
    EquivarianceVerdict v = run_operator_trial(kind, r, grid_shifts, tol, &mod_violations);
    max_residual = std::max(max_residual, v.residual);
    passed += v.passed ? 1 : 0;
    above_floor += (!v.passed && v.residual > tol.negative_floor) ? 1 : 0;
    rep.verdicts.push_back(std::move(v));
  }

  rep.metrics["trials"] = static_cast<double>(trials);
  rep.metrics["shifts_per_trial"] =
      static_cast<double>(kind == SuiteKind::relpe_circulant ||
                                  kind == SuiteKind::relpe_counterexample
                              ? kTokens
                              : grid_shifts.size());
  rep.metrics["passed_trials"] = static_cast<double>(passed);
  rep.metrics["max_residual"] = max_residual;
  rep.metrics["negative_floor"] = tol.negative_floor;
  if (kind == SuiteKind::corollary1) {
    rep.metrics["mod_violations"] = static_cast<double>(mod_violations);
  }
  if (suite_is_counterexample(kind)) {
    rep.metrics["failed_above_floor"] = static_cast<double>(above_floor);
  }
  return rep;
}

AuditReport model_suite(SuiteKind kind, const ModelSpec& spec, const ModelWeights& weights,
                        const ShiftSampler& sampler, std::size_t n_inputs,
                        std::uint64_t seed, const Tolerances& tol) {
  if (!suite_needs_model(kind)) {
    throw std::invalid_argument("model_suite: operator-level suite, use lemma_suite");
  }
  spec.validate();
  AuditReport rep;
  rep.suite = suite_name(kind);
  rep.env = make_env(seed, tol);

  std::vector<Tensor> inputs;
  std::vector<std::uint64_t> input_seeds;
  inputs.reserve(n_inputs);
  for (std::size_t i = 0; i < n_inputs; ++i) {
    Rng r = Rng::derive(seed, std::string(suite_name(kind)) + ".input" + std::to_string(i));
    input_seeds.push_back(r.seed());
    inputs.push_back(rng_normal(r, {spec.image[0], spec.image[1], spec.image[2]}));
  }
  const auto shifts = sampler.shifts();
  rep.metrics["inputs"] = static_cast<double>(n_inputs);
  rep.metrics["shift_count"] = static_cast<double>(shifts.size());

  switch (kind) {
    case SuiteKind::consistency_metric:
    case SuiteKind::logits_variance_metric: {
      const ShiftSweep sw = shift_sweep(spec, weights, inputs, shifts);
      rep.metrics["consistency"] = sw.consistency;
      rep.metrics["max_logit_residual"] = sw.max_residual;
      rep.metrics["max_logits_variance"] = sw.max_variance;
      break;
    }
    case SuiteKind::worst_of_n_metric: {
      std::vector<std::size_t> refs;
      refs.reserve(inputs.size());
      for (const Tensor& x : inputs) refs.push_back(predict(spec, weights, x));
      const WorstShiftResult worst =
          worst_over_shifts(spec, weights, inputs, refs, shifts);
      rep.metrics["worst_fraction"] = worst.fraction;
      rep.metrics["worst_dy"] = static_cast<double>(worst.shift.dy);
      rep.metrics["worst_dx"] = static_cast<double>(worst.shift.dx);
      break;
    }
    case SuiteKind::feature_equivariance: {
      double max_residual = 0.0;
      std::size_t passed = 0;
      for (std::size_t i = 0; i < n_inputs; ++i) {
        const ForwardResult base = forward(spec, weights, inputs[i]);
        EquivarianceVerdict worst;
        worst.input_seed = input_seeds[i];
        worst.passed = true;
        bool first = true;
        for (const Shift2D g : shifts) {
          const ForwardResult shifted =
              forward(spec, weights, circular_shift(inputs[i], g));
          for (std::size_t fi = 0; fi <= base.features.size(); ++fi) {
            const bool is_logits = fi == base.features.size();
            const Tensor& b = is_logits ? base.logits : base.features[fi].value;
            const Tensor& s = is_logits ? shifted.logits : shifted.features[fi].value;
            const std::string fname = is_logits ? "logits" : base.features[fi].name;
            EquivarianceVerdict v =
                equivariance_match(b, s, CandidateSearch::exhaustive(), tol.exact, fname,
                                   worst.input_seed);
            if (first || v.residual > worst.residual) {
              worst.residual = v.residual;
              worst.matched_shift = v.matched_shift;
              worst.op_name = fname;
              first = false;
            }
            worst.passed = worst.passed && v.passed;
          }
        }
        if (!worst.passed) worst.matched_shift.reset();
        max_residual = std::max(max_residual, worst.residual);
        passed += worst.passed ? 1 : 0;
        rep.verdicts.push_back(std::move(worst));
      }
      rep.metrics["passed_trials"] = static_cast<double>(passed);
      rep.metrics["max_residual"] = max_residual;
      break;
    }
    default:
      break;
  }
  return rep;
}

bool suite_ok(const AuditReport& report) {
  const SuiteKind kind = suite_from_name(report.suite);
  if (suite_is_metric(kind)) return true;
  if (report.verdicts.empty()) return false;
  if (suite_is_counterexample(kind)) {
    const auto it = report.metrics.find("negative_floor");
    const double floor = it != report.metrics.end() ? it->second : Tolerances{}.negative_floor;
    return std::all_of(report.verdicts.begin(), report.verdicts.end(),
                       [floor](const EquivarianceVerdict& v) {
                         return !v.passed && v.residual > floor;
                       });
  }
  return std::all_of(report.verdicts.begin(), report.verdicts.end(),
                     [](const EquivarianceVerdict& v) { return v.passed; });
}

}  // namespace shifteq
