#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "shifteq/attention.hpp"
#include "shifteq/conv.hpp"
#include "shifteq/tensor.hpp"

namespace shifteq {

enum class Variant { vit, vit_poly, twins, twins_poly };
enum class PosEncoding { absolute, depthwise_circular, none };
enum class Activation { gelu, relu };

/// Declarative description of a toy classifier pipeline. Weights are derived
/// deterministically from the seed, so a spec fully identifies a model.
struct ModelSpec {
  Variant variant = Variant::vit;
  std::array<std::size_t, 3> image = {3, 32, 32};  // C, H, W
  std::size_t s = 4;           // patch stride (= patch size)
  std::size_t d = 16;          // embedding dim
  std::size_t depth = 2;       // blocks for vit*, block pairs for twins*
  std::size_t w = 2;           // window size on the token grid; also the GSA stride
  std::size_t mlp_hidden = 32;
  PosEncoding pos_encoding = PosEncoding::absolute;
  std::size_t classes = 10;
  std::uint64_t seed = 1234;
  int p_norm = 2;
  bool restore_mode = true;

  std::size_t grid_h() const { return image[1] / s; }
  std::size_t grid_w() const { return image[2] / s; }
  bool is_poly() const { return variant == Variant::vit_poly || variant == Variant::twins_poly; }
  bool is_twins() const { return variant == Variant::twins || variant == Variant::twins_poly; }
  std::size_t block_count() const { return is_twins() ? 2 * depth : depth; }

  /// Throws std::invalid_argument on divisibility or positivity violations.
  void validate() const;
};

/// Desk-scale defaults for a variant: 3x32x32 input, s=4, d=16, depth=2, w=2.
/// Baselines get absolute positional encoding, poly variants the circular
/// depthwise form.
ModelSpec default_spec(Variant v);

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);
const char* pos_encoding_name(PosEncoding p);
PosEncoding pos_encoding_from_name(const std::string& name);

/// All parameter tensors of a model keyed by stable names ("embed.weight",
/// "block0.attn.wq", ...). Regeneration from the same spec is bit-identical;
/// tensors shared between a baseline and its poly twin have equal values.
struct ModelWeights {
  std::map<std::string, Tensor> tensors;

  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return tensors.count(name) != 0; }
};

/// Per-token normalization over the feature axis followed by an affine map.
Tensor layer_norm(const Tensor& tokens, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

/// Two-layer feed-forward applied row-wise: act(X W1 + b1) W2 + b2.
Tensor mlp_block(const Tensor& tokens, const Tensor& w1, const Tensor& b1,
                 const Tensor& w2, const Tensor& b2, Activation act = Activation::gelu);

/// Deterministic weight generation: projection and filter weights are normal
/// with scale 0.02 from a per-tensor stream keyed by (seed, name); biases
/// start at zero, layer-norm gains at one.
ModelWeights build_model(const ModelSpec& spec);

struct Feature {
  std::string name;
  Tensor value;
};

struct ForwardResult {
  Tensor logits;                  // [classes]
  std::vector<Feature> features;  // embed, pos, block0.., pooled
};

/// Runs the full pipeline: patch embedding (anchored for poly variants),
/// positional encoding, `block_count()` transformer blocks, global average
/// pooling and the linear head.
ForwardResult forward(const ModelSpec& spec, const ModelWeights& weights, const Tensor& x);

/// Argmax class of forward(...).logits; ties resolve to the smallest index.
std::size_t predict(const ModelSpec& spec, const ModelWeights& weights, const Tensor& x);

/// JSON schema used by the audit CLI; field names match ModelSpec.
ModelSpec model_spec_from_json(const std::string& text);
std::string model_spec_to_json(const ModelSpec& spec);

}  // namespace shifteq
