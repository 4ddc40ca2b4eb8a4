#include "shifteq/model.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "shifteq/rng.hpp"

namespace shifteq {

namespace {

using nlohmann::json;

Tensor ones(std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 1.0;
  return t;
}

Tensor init_normal(const ModelSpec& spec, const std::string& name,
                   std::vector<std::size_t> shape, double scale = 0.02) {
  Rng r = Rng::derive(spec.seed, name);
  Tensor t = rng_normal(r, std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] *= scale;
  return t;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

constexpr std::size_t kPosKernel = 3;

ConvFilter embed_filter(const ModelSpec& spec, const ModelWeights& wts) {
  return ConvFilter{wts.at("embed.weight"), spec.s, wts.at("embed.bias")};
}

ConvFilter gsa_filter(const ModelSpec& spec, const ModelWeights& wts, std::size_t block) {
  return ConvFilter{wts.at("block" + std::to_string(block) + ".sr.weight"), spec.w,
                    std::nullopt};
}

bool block_is_gsa(const ModelSpec& spec, std::size_t block) {
  // Twins-like pattern: window attention / GSA alternate, window first.
  return spec.is_twins() && block % 2 == 1;
}

}  // namespace

void ModelSpec::validate() const {
  if (image[0] == 0 || image[1] == 0 || image[2] == 0 || d == 0 || classes == 0 ||
      mlp_hidden == 0 || s == 0 || w == 0) {
    throw std::invalid_argument("ModelSpec: dimensions must be positive");
  }
  if (image[1] % s != 0 || image[2] % s != 0) {
    throw std::invalid_argument("ModelSpec: patch stride must divide the image");
  }
  if (grid_h() % w != 0 || grid_w() % w != 0) {
    throw std::invalid_argument("ModelSpec: window must divide the token grid");
  }
  if (p_norm != 1 && p_norm != 2) {
    throw std::invalid_argument("ModelSpec: p_norm must be 1 or 2");
  }
  if ((grid_h() < kPosKernel || grid_w() < kPosKernel) &&
      pos_encoding == PosEncoding::depthwise_circular) {
    throw std::invalid_argument("ModelSpec: token grid too small for depthwise encoding");
  }
}

ModelSpec default_spec(Variant v) {
  ModelSpec spec;
  spec.variant = v;
  spec.pos_encoding = (v == Variant::vit || v == Variant::twins)
                          ? PosEncoding::absolute
                          : PosEncoding::depthwise_circular;
  return spec;
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::vit: return "vit";
    case Variant::vit_poly: return "vit_poly";
    case Variant::twins: return "twins";
    case Variant::twins_poly: return "twins_poly";
  }
  return "?";
}

Variant variant_from_name(const std::string& name) {
  if (name == "vit") return Variant::vit;
  if (name == "vit_poly") return Variant::vit_poly;
  if (name == "twins") return Variant::twins;
  if (name == "twins_poly") return Variant::twins_poly;
  throw std::invalid_argument("unknown variant: " + name);
}

const char* pos_encoding_name(PosEncoding p) {
  switch (p) {
    case PosEncoding::absolute: return "absolute";
    case PosEncoding::depthwise_circular: return "depthwise_circular";
    case PosEncoding::none: return "none";
  }
  return "?";
}

PosEncoding pos_encoding_from_name(const std::string& name) {
  if (name == "absolute") return PosEncoding::absolute;
  if (name == "depthwise_circular") return PosEncoding::depthwise_circular;
  if (name == "none") return PosEncoding::none;
  throw std::invalid_argument("unknown pos_encoding: " + name);
}

const Tensor& ModelWeights::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::invalid_argument("missing weight: " + name);
  return it->second;
}

Tensor layer_norm(const Tensor& tokens, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  if (tokens.rank() != 2) throw std::invalid_argument("layer_norm: tokens must be [N,d]");
  const std::size_t n = tokens.dim(0), d = tokens.dim(1);
  if (gamma.size() != d || beta.size() != d) {
    throw std::invalid_argument("layer_norm: gamma/beta must be [d]");
  }
  Tensor out({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = tokens.data() + i * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = row[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    double* orow = out.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) {
      orow[j] = (row[j] - mean) * inv * gamma[j] + beta[j];
    }
  }
  return out;
}

Tensor mlp_block(const Tensor& tokens, const Tensor& w1, const Tensor& b1,
                 const Tensor& w2, const Tensor& b2, Activation act) {
  Tensor h = matmul(tokens, w1);
  const std::size_t n = h.dim(0), m = h.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double z = h(i, j) + b1[j];
      h(i, j) = act == Activation::gelu ? gelu(z) : std::max(z, 0.0);
    }
  }
  Tensor out = matmul(h, w2);
  for (std::size_t i = 0; i < out.dim(0); ++i) {
    for (std::size_t j = 0; j < out.dim(1); ++j) out(i, j) += b2[j];
  }
  return out;
}

ModelWeights build_model(const ModelSpec& spec) {
  spec.validate();
  ModelWeights w;
  const std::size_t c = spec.image[0], d = spec.d;

  w.tensors["embed.weight"] = init_normal(spec, "embed.weight", {d, c, spec.s, spec.s});
  w.tensors["embed.bias"] = Tensor({d});

  if (spec.pos_encoding == PosEncoding::absolute) {
    w.tensors["pos.absolute"] =
        init_normal(spec, "pos.absolute", {d, spec.grid_h(), spec.grid_w()});
  } else if (spec.pos_encoding == PosEncoding::depthwise_circular) {
    w.tensors["pos.depthwise"] =
        init_normal(spec, "pos.depthwise", {d, kPosKernel, kPosKernel});
  }

  for (std::size_t b = 0; b < spec.block_count(); ++b) {
    const std::string pre = "block" + std::to_string(b) + ".";
    w.tensors[pre + "ln1.gamma"] = ones({d});
    w.tensors[pre + "ln1.beta"] = Tensor({d});
    w.tensors[pre + "attn.wq"] = init_normal(spec, pre + "attn.wq", {d, d});
    w.tensors[pre + "attn.wk"] = init_normal(spec, pre + "attn.wk", {d, d});
    w.tensors[pre + "attn.wv"] = init_normal(spec, pre + "attn.wv", {d, d});
    if (block_is_gsa(spec, b)) {
      w.tensors[pre + "sr.weight"] =
          init_normal(spec, pre + "sr.weight", {d, d, spec.w, spec.w});
    }
    w.tensors[pre + "ln2.gamma"] = ones({d});
    w.tensors[pre + "ln2.beta"] = Tensor({d});
    w.tensors[pre + "mlp.w1"] = init_normal(spec, pre + "mlp.w1", {d, spec.mlp_hidden});
    w.tensors[pre + "mlp.b1"] = Tensor({spec.mlp_hidden});
    w.tensors[pre + "mlp.w2"] = init_normal(spec, pre + "mlp.w2", {spec.mlp_hidden, d});
    w.tensors[pre + "mlp.b2"] = Tensor({d});
  }

  w.tensors["head.weight"] = init_normal(spec, "head.weight", {d, spec.classes});
  w.tensors["head.bias"] = Tensor({spec.classes});
  return w;
}

ForwardResult forward(const ModelSpec& spec, const ModelWeights& weights, const Tensor& x) {
  spec.validate();
  if (x.rank() != 3 || x.dim(0) != spec.image[0] || x.dim(1) != spec.image[1] ||
      x.dim(2) != spec.image[2]) {
    throw std::invalid_argument("forward: input does not match spec.image");
  }

  ForwardResult res;
  const std::size_t gh = spec.grid_h(), gw = spec.grid_w();

  // Patch embedding. Poly variants anchor first; the anchor shift is a
  // sub-stride pixel offset, so it cannot be undone on the coarse token grid
  // and the whole pipeline runs on the anchored frame.
  Tensor grid;
  if (spec.is_poly()) {
    grid = patch_embed_poly(x, embed_filter(spec, weights), spec.s, spec.p_norm).out;
  } else {
    grid = strided_conv(x, embed_filter(spec, weights), spec.s);
  }
  res.features.push_back({"embed", grid});

  if (spec.pos_encoding == PosEncoding::absolute) {
    grid = abs_pos_embed(grid, weights.at("pos.absolute"));
    res.features.push_back({"pos", grid});
  } else if (spec.pos_encoding == PosEncoding::depthwise_circular) {
    grid = add(grid, depthwise_conv_circular(grid, DepthwiseFilter{weights.at("pos.depthwise")}));
    res.features.push_back({"pos", grid});
  }

  for (std::size_t b = 0; b < spec.block_count(); ++b) {
    const std::string pre = "block" + std::to_string(b) + ".";
    const AttentionParams params{weights.at(pre + "attn.wq"), weights.at(pre + "attn.wk"),
                                 weights.at(pre + "attn.wv")};

    Tensor tokens = grid_to_tokens(grid);
    const Tensor normed = layer_norm(tokens, weights.at(pre + "ln1.gamma"),
                                     weights.at(pre + "ln1.beta"));

    Tensor attn_out;
    if (!spec.is_twins()) {
      attn_out = self_attention(normed, params);
    } else {
      const Tensor normed_grid = tokens_to_grid(normed, gh, gw);
      Tensor op_out;
      if (block_is_gsa(spec, b)) {
        const ConvFilter sr = gsa_filter(spec, weights, b);
        if (spec.is_poly()) {
          AttnPolyResult r = gsa_poly(normed_grid, spec.w, sr, params, spec.p_norm);
          op_out = spec.restore_mode ? restore(r.out, r.phase) : std::move(r.out);
        } else {
          op_out = gsa(normed_grid, spec.w, sr, params);
        }
      } else {
        const WindowSpec win = WindowSpec::for_grid(gh, gw, spec.w);
        if (spec.is_poly()) {
          AttnPolyResult r = window_attention_poly(normed_grid, win, params, spec.p_norm);
          op_out = spec.restore_mode ? restore(r.out, r.phase) : std::move(r.out);
        } else {
          op_out = window_attention(normed_grid, win, params);
        }
      }
      attn_out = grid_to_tokens(op_out);
    }
    tokens = add(tokens, attn_out);

    const Tensor normed2 = layer_norm(tokens, weights.at(pre + "ln2.gamma"),
                                      weights.at(pre + "ln2.beta"));
    tokens = add(tokens, mlp_block(normed2, weights.at(pre + "mlp.w1"),
                                   weights.at(pre + "mlp.b1"), weights.at(pre + "mlp.w2"),
                                   weights.at(pre + "mlp.b2")));
    grid = tokens_to_grid(tokens, gh, gw);
    res.features.push_back({"block" + std::to_string(b), grid});
  }

  // Shift-invariant head: global average pool over the grid, then linear.
  const std::size_t n_tokens = gh * gw;
  Tensor pooled({spec.d});
  std::vector<double> column(n_tokens);
  const Tensor tokens = grid_to_tokens(grid);
  for (std::size_t j = 0; j < spec.d; ++j) {
    for (std::size_t i = 0; i < n_tokens; ++i) column[i] = tokens(i, j);
    pooled[j] = compensated_sum(column.data(), n_tokens) / static_cast<double>(n_tokens);
  }
  res.features.push_back({"pooled", pooled});

  const Tensor& hw = weights.at("head.weight");
  const Tensor& hb = weights.at("head.bias");
  Tensor logits({spec.classes});
  for (std::size_t cls = 0; cls < spec.classes; ++cls) {
    double acc = 0.0;
    for (std::size_t j = 0; j < spec.d; ++j) acc += pooled[j] * hw(j, cls);
    logits[cls] = acc + hb[cls];
  }
  res.logits = std::move(logits);
  return res;
}

std::size_t predict(const ModelSpec& spec, const ModelWeights& weights, const Tensor& x) {
  const Tensor logits = forward(spec, weights, x).logits;
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

ModelSpec model_spec_from_json(const std::string& text) {
  ModelSpec spec;
  try {
    json j = json::parse(text);
    spec.variant = variant_from_name(j.at("variant").get<std::string>());
    spec.pos_encoding = default_spec(spec.variant).pos_encoding;
    if (j.contains("image")) {
      auto arr = j.at("image");
      if (!arr.is_array() || arr.size() != 3) {
        throw std::invalid_argument("ModelSpec: image must be [C,H,W]");
      }
      spec.image = {arr[0].get<std::size_t>(), arr[1].get<std::size_t>(),
                    arr[2].get<std::size_t>()};
    }
    if (j.contains("s")) spec.s = j.at("s").get<std::size_t>();
    if (j.contains("d")) spec.d = j.at("d").get<std::size_t>();
    if (j.contains("depth")) spec.depth = j.at("depth").get<std::size_t>();
    if (j.contains("w")) spec.w = j.at("w").get<std::size_t>();
    if (j.contains("mlp_hidden")) spec.mlp_hidden = j.at("mlp_hidden").get<std::size_t>();
    if (j.contains("pos_encoding")) {
      spec.pos_encoding = pos_encoding_from_name(j.at("pos_encoding").get<std::string>());
    }
    if (j.contains("classes")) spec.classes = j.at("classes").get<std::size_t>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("p_norm")) spec.p_norm = j.at("p_norm").get<int>();
    if (j.contains("restore_mode")) spec.restore_mode = j.at("restore_mode").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    // malformed documents are argument errors, same as validation failures
    throw std::invalid_argument(std::string("ModelSpec: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string model_spec_to_json(const ModelSpec& spec) {
  json j;
  j["variant"] = variant_name(spec.variant);
  j["image"] = {spec.image[0], spec.image[1], spec.image[2]};
  j["s"] = spec.s;
  j["d"] = spec.d;
  j["depth"] = spec.depth;
  j["w"] = spec.w;
  j["mlp_hidden"] = spec.mlp_hidden;
  j["pos_encoding"] = pos_encoding_name(spec.pos_encoding);
  j["classes"] = spec.classes;
  j["seed"] = spec.seed;
  j["p_norm"] = spec.p_norm;
  j["restore_mode"] = spec.restore_mode;
  return j.dump(2);
}

}  // namespace shifteq
