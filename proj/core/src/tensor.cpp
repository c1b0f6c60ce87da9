#include "memonet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace memonet {

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || a.tape() != b.tape()) {
    throw Error(std::string(op) + ": operands live on different tapes");
  }
  return *a.tape();
}

}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw Error("Tensor: " + std::to_string(data_.size()) + " values do not fill shape [" +
                std::to_string(rows) + "x" + std::to_string(cols) + "]");
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw Error("Tensor::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[' << rows_ << 'x' << cols_ << ']';
  return os.str();
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::reshape(std::size_t rows, std::size_t cols) {
  if (rows * cols != data_.size()) {
    throw Error("reshape: cannot view " + shape_str() + " as [" + std::to_string(rows) + "x" +
                std::to_string(cols) + "]");
  }
  rows_ = rows;
  cols_ = cols;
}

Parameter::Parameter(std::string name_, Tensor value_, bool row_sparse_)
    : name(std::move(name_)),
      value(std::move(value_)),
      grad(value.rows(), value.cols()),
      row_sparse(row_sparse_),
      row_touched(row_sparse_ ? value.rows() : 0, 0) {}

void Parameter::zero_grad() {
  if (grad.shape() != value.shape()) {
    grad = Tensor(value.rows(), value.cols());
  } else if (row_sparse && !all_rows_touched) {
    for (auto r : touched_rows) {
      auto g = grad.row(r);
      std::fill(g.begin(), g.end(), 0.0);
    }
  } else {
    grad.fill(0.0);
  }
  if (row_sparse) row_touched.assign(value.rows(), 0);
  touched_rows.clear();
  all_rows_touched = false;
}

void Parameter::mark_row(std::size_t r) {
  if (!row_sparse) return;
  if (!row_touched[r]) {
    row_touched[r] = 1;
    touched_rows.push_back(static_cast<std::uint32_t>(r));
  }
}

const Tensor& Var::value() const { return tape_->value(id_); }

Tensor Var::grad() const {
  if (tape_->has_grad(id_)) return tape_->grad_ref(id_, false);
  const Tensor& v = value();
  return Tensor(v.rows(), v.cols());
}

Var Tape::constant(Tensor value) { return record(std::move(value), nullptr); }

Var Tape::param(Parameter& parameter) {
  Node node;
  node.parameter = &parameter;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::frozen(const Parameter& parameter) {
  Node node;
  node.parameter = const_cast<Parameter*>(&parameter);
  node.frozen = true;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::record(Tensor value, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

const Tensor& Tape::value(std::uint32_t id) const {
  const Node& n = nodes_.at(id);
  return n.parameter ? n.parameter->value : n.value;
}

Parameter* Tape::parameter_of(std::uint32_t id) const {
  const Node& n = nodes_.at(id);
  return n.frozen ? nullptr : n.parameter;
}

bool Tape::has_grad(std::uint32_t id) const {
  const Node& n = nodes_.at(id);
  return (n.parameter != nullptr && !n.frozen) || n.grad_ready;
}

Tensor& Tape::grad_ref(std::uint32_t id, bool mark_all_rows) {
  Node& n = nodes_.at(id);
  if (n.frozen) throw Error("gradient requested for frozen parameter '" + n.parameter->name + "'");
  if (n.parameter) {
    if (mark_all_rows) n.parameter->mark_all();
    return n.parameter->grad;
  }
  if (!n.grad_ready) {
    n.grad = Tensor(n.value.rows(), n.value.cols());
    n.grad_ready = true;
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw Error("backward: loss recorded on another tape");
  const Tensor& lv = value(loss.id());
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw Error("backward: loss must be [1x1], got " + lv.shape_str());
  }
  grad_ref(loss.id())[0] += 1.0;
  backward_order_.clear();
  for (std::uint32_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.grad_ready || !n.backward) continue;
    backward_order_.push_back(id);
    n.backward(*this, id);
  }
}

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
  const std::size_t p = av.rows(), q = av.cols(), r = bv.cols();
  Tensor out(p, r);
  for (std::size_t i = 0; i < p; ++i) {
    double* o = out.row(i).data();
    for (std::size_t k = 0; k < q; ++k) {
      const double x = av(i, k);
      const double* brow = bv.row(k).data();
      for (std::size_t j = 0; j < r; ++j) o[j] += x * brow[j];
    }
  }
  const auto ia = a.id(), ib = b.id();
  return tape.record(std::move(out), [ia, ib, p, q, r](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad_ref(self);
    const Tensor& av = t.value(ia);
    const Tensor& bv = t.value(ib);
    {
      Tensor& ga = t.grad_ref(ia);
      for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t k = 0; k < q; ++k) {
          const double* grow = g.row(i).data();
          const double* brow = bv.row(k).data();
          double acc = 0.0;
          for (std::size_t j = 0; j < r; ++j) acc += grow[j] * brow[j];
          ga(i, k) += acc;
        }
      }
    }
    Tensor& gb = t.grad_ref(ib);
    for (std::size_t i = 0; i < p; ++i) {
      const double* grow = g.row(i).data();
      for (std::size_t k = 0; k < q; ++k) {
        const double x = av(i, k);
        if (x == 0.0) continue;
        double* gbrow = gb.row(k).data();
        for (std::size_t j = 0; j < r; ++j) gbrow[j] += x * grow[j];
      }
    }
  });
}

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b, "add");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) shape_error("add", av, bv);
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const auto ia = a.id(), ib = b.id();
  return tape.record(std::move(out), [ia, ib](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad_ref(self);
    for (auto id : {ia, ib}) {
      Tensor& gi = t.grad_ref(id);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

Var add_row(Var x, Var row) {
  Tape& tape = same_tape(x, row, "add_row");
  const Tensor& xv = x.value();
  const Tensor& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != xv.cols()) shape_error("add_row", xv, rv);
  Tensor out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += rv[j];
  }
  const auto ix = x.id(), ir = row.id();
  return tape.record(std::move(out), [ix, ir](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad_ref(self);
    Tensor& gx = t.grad_ref(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    Tensor& gr = t.grad_ref(ir);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += g(i, j);
    }
  });
}

Var relu(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  const auto ix = x.id();
  return x.tape()->record(std::move(out), [ix](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad_ref(self);
    const Tensor& xv = t.value(ix);
    Tensor& gx = t.grad_ref(ix);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > 0.0) gx[i] += g[i];
    }
  });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var sigmoid(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = stable_sigmoid(v);
  return x.tape()->record(std::move(out), [ix = x.id()](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad_ref(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_ref(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var elementwise_mul(Var a, Var b) {
  Tape& tape = same_tape(a, b, "elementwise_mul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) shape_error("elementwise_mul", av, bv);
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const auto ia = a.id(), ib = b.id();
  return tape.record(std::move(out), [ia, ib](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad_ref(self);
    const Tensor& av = t.value(ia);
    const Tensor& bv = t.value(ib);
    Tensor& ga = t.grad_ref(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    Tensor& gb = t.grad_ref(ib);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
  });
}

Var scale_rows(Var x, Var w) {
  Tape& tape = same_tape(x, w, "scale_rows");
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (wv.cols() != 1 || wv.rows() != xv.rows()) shape_error("scale_rows", xv, wv);
  Tensor out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (auto& v : out.row(i)) v *= wv[i];
  }
  const auto ix = x.id(), iw = w.id();
  return tape.record(std::move(out), [ix, iw](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad_ref(self);
    const Tensor& xv = t.value(ix);
    const Tensor& wv = t.value(iw);
    Tensor& gx = t.grad_ref(ix);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) gx(i, j) += g(i, j) * wv[i];
    }
    Tensor& gw = t.grad_ref(iw);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) acc += g(i, j) * xv(i, j);
      gw[i] += acc;
    }
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw Error("concat: no operands");
  Tape& tape = *parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    if (p.tape() != &tape) throw Error("concat: operands live on different tapes");
    if (p.rows() != rows) shape_error("concat", parts.front().value(), p.value());
    ids.push_back(p.id());
    offsets.push_back(cols);
    cols += p.cols();
  }
  Tensor out(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy(pv.row(i).begin(), pv.row(i).end(), out.row(i).begin() + offsets[k]);
    }
  }
  return tape.record(std::move(out), [ids, offsets](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad_ref(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Tensor& gp = t.grad_ref(ids[k]);
      for (std::size_t i = 0; i < gp.rows(); ++i) {
        for (std::size_t j = 0; j < gp.cols(); ++j) gp(i, j) += g(i, offsets[k] + j);
      }
    }
  });
}

Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice_cols(Var x, std::size_t start, std::size_t count) {
  const Tensor& xv = x.value();
  if (start + count > xv.cols()) {
    throw Error("slice_cols: columns [" + std::to_string(start) + ", " +
                std::to_string(start + count) + ") outside " + xv.shape_str());
  }
  Tensor out(xv.rows(), count);
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    for (std::size_t j = 0; j < count; ++j) out(i, j) = xv(i, start + j);
  }
  return x.tape()->record(std::move(out), [ix = x.id(), start](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad_ref(self);
    Tensor& gx = t.grad_ref(ix);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) gx(i, start + j) += g(i, j);
    }
  });
}

Var reshape(Var x, std::size_t rows, std::size_t cols) {
  Tensor out = x.value();
  out.reshape(rows, cols);
  return x.tape()->record(std::move(out), [ix = x.id()](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad_ref(self);
    Tensor& gx = t.grad_ref(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var flatten(Var x) { return reshape(x, 1, x.value().size()); }

Var gather_rows(Var table, std::span<const std::uint32_t> indices) {
  const Tensor& tv = table.value();
  const std::size_t width = tv.cols();
  Tensor out(indices.size(), width);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= tv.rows()) {
      throw Error("gather_rows: index " + std::to_string(indices[k]) + " out of range for table with " +
                  std::to_string(tv.rows()) + " rows");
    }
    std::copy(tv.row(indices[k]).begin(), tv.row(indices[k]).end(), out.row(k).begin());
  }
  std::vector<std::uint32_t> idx(indices.begin(), indices.end());
  return table.tape()->record(
      std::move(out), [it = table.id(), idx = std::move(idx)](Tape& t, std::uint32_t self) {
        const Tensor& g = t.grad_ref(self);
        Tensor& gt = t.grad_ref(it, false);
        Parameter* p = t.parameter_of(it);
        for (std::size_t k = 0; k < idx.size(); ++k) {
          auto dst = gt.row(idx[k]);
          auto src = g.row(k);
          for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
          if (p) p->mark_row(idx[k]);
        }
      });
}

Var clamp(Var x, double lo, double hi) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = std::clamp(v, lo, hi);
  return x.tape()->record(std::move(out), [ix = x.id(), lo, hi](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad_ref(self);
    const Tensor& xv = t.value(ix);
    Tensor& gx = t.grad_ref(ix);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] >= lo && xv[i] <= hi) gx[i] += g[i];
    }
  });
}

Var sum(Var x) {
  double acc = 0.0;
  for (double v : x.value().data()) acc += v;
  return x.tape()->record(Tensor(1, 1, acc), [ix = x.id()](Tape& t, std::uint32_t self) {
    const double g = t.grad_ref(self)[0];
    Tensor& gx = t.grad_ref(ix);
    for (auto& v : gx.data()) v += g;
  });
}

Var binary_logloss(Var probabilities, std::span<const double> labels) {
  const Tensor& pv = probabilities.value();
  if (pv.cols() != 1 || pv.rows() != labels.size()) {
    throw Error("binary_logloss: predictions " + pv.shape_str() + " vs " +
                std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw Error("binary_logloss: empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = labels[i];
    acc -= y * std::log(pv[i]) + (1.0 - y) * std::log(1.0 - pv[i]);
  }
  const double n = static_cast<double>(labels.size());
  std::vector<double> y(labels.begin(), labels.end());
  return probabilities.tape()->record(
      Tensor(1, 1, acc / n), [ip = probabilities.id(), y = std::move(y), n](Tape& t, std::uint32_t self) {
        const double g = t.grad_ref(self)[0];
        const Tensor& pv = t.value(ip);
        Tensor& gp = t.grad_ref(ip);
        for (std::size_t i = 0; i < y.size(); ++i) {
          const double p = pv[i];
          gp[i] += g * (-y[i] / p + (1.0 - y[i]) / (1.0 - p)) / n;
        }
      });
}

}  // namespace memonet
