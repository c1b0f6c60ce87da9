#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "memonet/codebook.hpp"
#include "memonet/data.hpp"
#include "memonet/tensor.hpp"

namespace memonet {

enum class RestoreMode { kLinear, kAttentive };

std::string_view to_string(RestoreMode mode);
RestoreMode parse_restore_mode(std::string_view text);

struct HcnetDims {
  std::size_t f = 0;  // fields
  std::size_t d = 0;  // 1-order embedding width
  std::size_t l = 0;  // codeword width
  unsigned m = 0;     // hash functions
  std::size_t s = 0;  // hidden width of the mask and GAS nets

  friend bool operator==(const HcnetDims&, const HcnetDims&) = default;
};

/// Learnable tensors of the HCNet layer (row-vector convention, x * W):
///   w1 [ml x d]         chunk projection (both restore modes)
///   w2 [2d x s], w3 [s x ml]   attentive mask net (attentive mode only)
///   w4 [fd x s], w5 [s x f(f-1)]  global attentive shrinking net
struct HcnetParams {
  HcnetDims dims;
  RestoreMode mode = RestoreMode::kLinear;
  Parameter w1, w2, w3, w4, w5;

  HcnetParams() = default;
  /// Zero-initialized parameters of the exact shapes for `dims`.
  HcnetParams(const HcnetDims& dims, RestoreMode mode);

  void init_xavier(std::mt19937_64& rng);
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
};

/// HcnetParams bound to one tape.
struct HcnetVars {
  Var w1, w2, w3, w4, w5;
  static HcnetVars bind(Tape& tape, HcnetParams& params);
};

/// Column of the GAS output holding a_(i,j): group i lists the f-1 partners
/// j != i in ascending order.
std::size_t gas_column(std::size_t i, std::size_t j, std::size_t f);

/// Flattened chunks (B x ml) projected by w1, no nonlinearity.
Var lmr_restore(Var chunks, Var w1);

/// relu(concat[v_lo, v_hi] * w2) * w3, one m x l mask per row, flattened.
Var attention_mask(Var v_lo, Var v_hi, Var w2, Var w3);

/// Mask-filtered chunks projected by w1. `v_lo` belongs to the lower field index.
Var amr_restore(Var chunks, Var v_lo, Var v_hi, Var w1, Var w2, Var w3);

/// relu(V * w4) * w5 with V the B x fd concatenation of 1-order embeddings.
Var gas_weights(Var v, Var w4, Var w5);

/// V2 = concat_i sum_{j != i} a_(i,j) * v^(i,j). `restored[p]` is the shared
/// vector of `pairs[p]`; pairs absent from the list contribute nothing.
Var shrink(std::span<const FieldPair> pairs, std::span<const Var> restored, Var attention,
           std::size_t f, std::size_t d);

/// Codeword addresses of every enumerated cross of one instance, P x m row-major.
std::vector<std::uint32_t> instance_addresses(const Instance& instance,
                                              std::span<const FieldPair> pairs,
                                              const Codebook& codebook);

/// A batch as seen by the HCNet layer. `addresses` is pair-major:
/// addresses[(p * batch + b) * m + t].
struct HcnetBatch {
  std::size_t batch = 0;
  std::span<const FieldPair> pairs;
  std::span<const std::uint32_t> addresses;
};

struct HcnetOutput {
  Var v2;         // B x fd
  Var attention;  // B x f(f-1)
};

/// Addressing -> gather -> restore (once per unordered pair) -> GAS -> shrink.
/// `v` is the B x fd concatenated 1-order embedding.
HcnetOutput hcnet_forward(const HcnetBatch& batch, Var v, Var codebook, const HcnetVars& vars,
                          const HcnetParams& params);

}  // namespace memonet
