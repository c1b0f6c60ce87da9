#include "memonet/hcnet.hpp"

#include <cmath>
#include <string>

namespace memonet {

namespace {

void xavier_uniform(Parameter& p, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : p.value.data()) v = dist(rng);
}

}  // namespace

std::string_view to_string(RestoreMode mode) {
  return mode == RestoreMode::kLinear ? "lmr" : "amr";
}

RestoreMode parse_restore_mode(std::string_view text) {
  if (text == "lmr") return RestoreMode::kLinear;
  if (text == "amr") return RestoreMode::kAttentive;
  throw Error("unknown restore mode '" + std::string(text) + "' (expected lmr or amr)");
}

HcnetParams::HcnetParams(const HcnetDims& dims_, RestoreMode mode_) : dims(dims_), mode(mode_) {
  const auto [f, d, l, m, s] = dims;
  if (f < 2 || d == 0 || l == 0 || m == 0 || s == 0) throw Error("hcnet: all dimensions must be positive, f >= 2");
  const std::size_t ml = m * l;
  w1 = Parameter("hcnet.w1", Tensor(ml, d));
  if (mode == RestoreMode::kAttentive) {
    w2 = Parameter("hcnet.w2", Tensor(2 * d, s));
    w3 = Parameter("hcnet.w3", Tensor(s, ml));
  }
  w4 = Parameter("hcnet.w4", Tensor(f * d, s));
  w5 = Parameter("hcnet.w5", Tensor(s, f * (f - 1)));
}

void HcnetParams::init_xavier(std::mt19937_64& rng) {
  for (Parameter* p : parameters()) xavier_uniform(*p, rng);
}

std::vector<Parameter*> HcnetParams::parameters() {
  if (mode == RestoreMode::kAttentive) return {&w1, &w2, &w3, &w4, &w5};
  return {&w1, &w4, &w5};
}

std::vector<const Parameter*> HcnetParams::parameters() const {
  if (mode == RestoreMode::kAttentive) return {&w1, &w2, &w3, &w4, &w5};
  return {&w1, &w4, &w5};
}

HcnetVars HcnetVars::bind(Tape& tape, HcnetParams& params) {
  HcnetVars v;
  v.w1 = tape.param(params.w1);
  if (params.mode == RestoreMode::kAttentive) {
    v.w2 = tape.param(params.w2);
    v.w3 = tape.param(params.w3);
  }
  v.w4 = tape.param(params.w4);
  v.w5 = tape.param(params.w5);
  return v;
}

std::size_t gas_column(std::size_t i, std::size_t j, std::size_t f) {
  if (i == j || i >= f || j >= f) {
    throw Error("gas_column: invalid direction (" + std::to_string(i) + ", " + std::to_string(j) +
                ") for " + std::to_string(f) + " fields");
  }
  return i * (f - 1) + (j < i ? j : j - 1);
}

Var lmr_restore(Var chunks, Var w1) { return matmul(chunks, w1); }

Var attention_mask(Var v_lo, Var v_hi, Var w2, Var w3) {
  return matmul(relu(matmul(concat({v_lo, v_hi}), w2)), w3);
}

Var amr_restore(Var chunks, Var v_lo, Var v_hi, Var w1, Var w2, Var w3) {
  Var mask = attention_mask(v_lo, v_hi, w2, w3);
  return matmul(elementwise_mul(mask, chunks), w1);
}

Var gas_weights(Var v, Var w4, Var w5) { return matmul(relu(matmul(v, w4)), w5); }

Var shrink(std::span<const FieldPair> pairs, std::span<const Var> restored, Var attention,
           std::size_t f, std::size_t d) {
  if (restored.size() != pairs.size()) {
    throw Error("shrink: " + std::to_string(pairs.size()) + " pairs but " +
                std::to_string(restored.size()) + " restored vectors");
  }
  if (attention.cols() != f * (f - 1)) {
    throw Error("shrink: attention has " + std::to_string(attention.cols()) + " columns, expected " +
                std::to_string(f * (f - 1)));
  }
  const std::size_t batch = attention.rows();
  std::vector<std::optional<Var>> per_field(f);
  auto accumulate = [&](std::size_t i, std::size_t j, Var vec) {
    Var a = slice_cols(attention, gas_column(i, j, f), 1);
    Var term = scale_rows(vec, a);
    per_field[i] = per_field[i] ? add(*per_field[i], term) : term;
  };
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    if (!restored[p].valid()) {
      throw Error("shrink: missing restored vector for pair (" + std::to_string(pairs[p].lo) + ", " +
                  std::to_string(pairs[p].hi) + ")");
    }
    if (restored[p].rows() != batch || restored[p].cols() != d) {
      throw Error("shrink: restored vector " + restored[p].value().shape_str() + " expected [" +
                  std::to_string(batch) + "x" + std::to_string(d) + "]");
    }
    accumulate(pairs[p].lo, pairs[p].hi, restored[p]);
    accumulate(pairs[p].hi, pairs[p].lo, restored[p]);
  }
  std::vector<Var> parts;
  parts.reserve(f);
  for (auto& v : per_field) {
    parts.push_back(v ? *v : attention.tape()->constant(Tensor(batch, d)));
  }
  return concat(parts);
}

std::vector<std::uint32_t> instance_addresses(const Instance& instance,
                                              std::span<const FieldPair> pairs,
                                              const Codebook& codebook) {
  std::vector<std::uint32_t> out(pairs.size() * codebook.m);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pair = pairs[p];
    const std::string id = cross_id(instance.feature_ids.at(pair.lo), pair.lo,
                                    instance.feature_ids.at(pair.hi), pair.hi);
    codebook.address_set_into(id, std::span(out).subspan(p * codebook.m, codebook.m));
  }
  return out;
}

HcnetOutput hcnet_forward(const HcnetBatch& batch, Var v, Var codebook, const HcnetVars& vars,
                          const HcnetParams& params) {
  const auto& dims = params.dims;
  const std::size_t b = batch.batch;
  const std::size_t ml = dims.m * dims.l;
  if (v.rows() != b || v.cols() != dims.f * dims.d) {
    throw Error("hcnet_forward: embedding layer " + v.value().shape_str() + " expected [" +
                std::to_string(b) + "x" + std::to_string(dims.f * dims.d) + "]");
  }
  if (batch.addresses.size() != batch.pairs.size() * b * dims.m) {
    throw Error("hcnet_forward: address buffer has " + std::to_string(batch.addresses.size()) +
                " entries, expected " + std::to_string(batch.pairs.size() * b * dims.m));
  }
  if (codebook.cols() != dims.l) {
    throw Error("hcnet_forward: codebook width " + std::to_string(codebook.cols()) +
                " differs from l=" + std::to_string(dims.l));
  }

  std::vector<Var> field_emb;
  if (params.mode == RestoreMode::kAttentive) {
    field_emb.reserve(dims.f);
    for (std::size_t i = 0; i < dims.f; ++i) field_emb.push_back(slice_cols(v, i * dims.d, dims.d));
  }

  std::vector<Var> restored;
  restored.reserve(batch.pairs.size());
  for (std::size_t p = 0; p < batch.pairs.size(); ++p) {
    auto addr = batch.addresses.subspan(p * b * dims.m, b * dims.m);
    Var chunks = reshape(gather_codewords(codebook, addr), b, ml);
    if (params.mode == RestoreMode::kLinear) {
      restored.push_back(lmr_restore(chunks, vars.w1));
    } else {
      const auto& pair = batch.pairs[p];
      restored.push_back(amr_restore(chunks, field_emb[pair.lo], field_emb[pair.hi], vars.w1,
                                     vars.w2, vars.w3));
    }
  }
  Var attention = gas_weights(v, vars.w4, vars.w5);
  Var v2 = shrink(batch.pairs, restored, attention, dims.f, dims.d);
  return {v2, attention};
}

}  // namespace memonet
