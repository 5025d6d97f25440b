#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shiftbench/tensor.hpp"

namespace shiftbench {

enum class Mode { train, eval };
enum class Domain { source, target };

enum class LayerKind { linear, relu, sigmoid, softmax, batchnorm, gradient_reversal, da_layer };

std::string_view to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::linear;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;

  // gradient-reversal: backward multiplies the upstream gradient by -reversal_weight.
  double reversal_weight = 1.0;

  // batchnorm / da-layer
  bool affine = true;
  double eps = 1e-5;
  double momentum = 0.1;  // running-moment update rate
  double initial_rho = 0.0;
  std::optional<double> pinned_alpha;  // da-layer only; bypasses rho when set

  static LayerSpec linear(std::size_t in, std::size_t out);
  static LayerSpec relu(std::size_t n);
  static LayerSpec sigmoid(std::size_t n);
  static LayerSpec softmax(std::size_t n);
  static LayerSpec batchnorm(std::size_t n, bool affine = true);
  static LayerSpec gradient_reversal(std::size_t n, double weight);
  static LayerSpec da_layer(std::size_t n, bool affine = true);
};

/// Which part of a composed model a network plays.
enum class Role {
  feature_extractor,  // G_f
  label_predictor,    // G_y
  domain_classifier,  // G_d
  source_map,         // M_s
  target_map,         // M_t
  discriminator,      // D
  classifier,         // C, also used for single-piece classifiers
};

/// Short tag used as the parameter-name prefix ("Gf", "Ms", ...).
std::string_view role_tag(Role role);

struct NetworkSpec {
  Role role = Role::classifier;
  std::vector<LayerSpec> layers;

  /// Throws ShapeError when dims do not chain or a layer is malformed.
  void validate() const;
  std::size_t in_dim() const;
  std::size_t out_dim() const;
};

/// Checks a set of networks meant to be composed: unique role tags, and
/// softmax only as the final layer of a predictor.
void validate_composition(std::span<const NetworkSpec> nets);

struct NamedTensor {
  std::string name;
  Tensor value;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Ordered list of uniquely named tensors. Holds trainable parameters, their
/// gradients and momentum buffers, and non-trainable running statistics.
class Parameters {
 public:
  Parameters() = default;

  void add(std::string name, Tensor value);
  bool contains(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;

  std::vector<NamedTensor>& entries() { return entries_; }
  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Same names in the same order, each tensor zero-filled.
  Parameters zeros_like() const;
  /// Hash over names, shapes and raw values; equal iff bit-identical (modulo hash collisions).
  std::uint64_t fingerprint() const;
  bool all_finite() const;

  friend bool operator==(const Parameters&, const Parameters&) = default;

 private:
  std::vector<NamedTensor> entries_;
};

using Buffers = Parameters;

std::string param_name(const NetworkSpec& net, std::size_t layer, std::string_view field);

/// Weights uniform in [-a, a] with a = sqrt(6 / (in + out)); biases zero;
/// normalization scale one and shift zero; rho from the layer spec.
Parameters init_parameters(const NetworkSpec& net, std::uint64_t seed);
/// Running moments: means zero, variances one.
Buffers init_buffers(const NetworkSpec& net);

inline constexpr std::size_t kAllRows = std::numeric_limits<std::size_t>::max();

struct ForwardContext {
  Mode mode = Mode::eval;
  // Rows [0, n_source) are source samples, the rest target. Only da-layers
  // look at this. kAllRows means the whole batch is from one domain.
  std::size_t n_source = kAllRows;
  // Which running moments da-layers use in eval mode.
  Domain eval_domain = Domain::target;
};

struct LayerCache {
  std::vector<Tensor> tensors;
  double alpha = 0.0;
};

/// Activations saved by a forward pass for the matching backward pass.
struct Tape {
  Mode mode = Mode::eval;
  std::size_t n_source = kAllRows;
  std::uint64_t spec_signature = 0;
  std::vector<Tensor> inputs;   // input of each layer
  std::vector<Tensor> outputs;  // output of each layer
  std::vector<LayerCache> caches;
};

struct ForwardResult {
  Tensor output;
  Tape tape;
};

/// Runs the network. Train mode updates running moments in `buffers`.
ForwardResult forward(const NetworkSpec& net, const Parameters& params, Buffers& buffers,
                      const Tensor& input, const ForwardContext& ctx);

/// Eval-mode forward that leaves buffers untouched.
Tensor predict(const NetworkSpec& net, const Parameters& params, const Buffers& buffers,
               const Tensor& input, Domain domain = Domain::target);

/// Extra gradient added to dL/d(output of `layer`) during backward.
struct LayerGradient {
  std::size_t layer;
  Tensor grad;
};

struct BackwardResult {
  Parameters grads;
  Tensor input_grad;
};

BackwardResult backward(const NetworkSpec& net, const Parameters& params, const Tape& tape,
                        const Tensor& upstream, std::span<const LayerGradient> injected = {});

/// Convenience builder: linear/relu stack with the given hidden widths.
/// The final layer is linear (logits); losses apply softmax themselves.
NetworkSpec mlp(Role role, std::size_t in, std::span<const std::size_t> hidden, std::size_t out);

}  // namespace shiftbench
