#pragma once
// Reverse-mode tape over small dense tensors. The primitive set is exactly
// what the recurrent agent and its losses need; values and gradients live in
// per-tape arenas so episodes can be replayed without heap churn.

#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlst/rng.hpp"

namespace rlst::ad {

struct Shape {
  int32_t d0 = 0;
  int32_t d1 = 0;  // 0 marks rank-1

  int64_t size() const { return d1 > 0 ? int64_t(d0) * d1 : d0; }
  int rank() const { return d1 > 0 ? 2 : 1; }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    if (d1 > 0) return "[" + std::to_string(d0) + "x" + std::to_string(d1) + "]";
    return "[" + std::to_string(d0) + "]";
  }
};

inline Shape vec_shape(int32_t n) { return {n, 0}; }
inline Shape mat_shape(int32_t r, int32_t c) { return {r, c}; }

enum class Op : uint8_t {
  kLeaf,
  kConst,
  kMatMul,
  kAdd,
  kConcat,
  kHadamard,
  kSigmoid,
  kTanh,
  kLeakyRelu,
  kEmbeddingRow,
  kDropout,
  kSlice,
  kSoftmaxXent,
  kMseConst,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kConst: return "const";
    case Op::kMatMul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kConcat: return "concat";
    case Op::kHadamard: return "hadamard";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kLeakyRelu: return "leaky_relu";
    case Op::kEmbeddingRow: return "embedding_row";
    case Op::kDropout: return "dropout";
    case Op::kSlice: return "slice";
    case Op::kSoftmaxXent: return "softmax_cross_entropy";
    case Op::kMseConst: return "mse";
  }
  return "?";
}

// Scalar attributes for apply_primitive. Which fields matter depends on the
// op: a0 = leaky slope / dropout keep-prob / mse target, i0 = embedding row /
// slice offset / cross-entropy target id / concat axis, i1 = slice length.
struct Attrs {
  double a0 = 0.0;
  int32_t i0 = 0;
  int32_t i1 = 0;
};

template <typename T>
class Tape;

// Lightweight handle to a node on a tape. Constants not yet interned on a
// tape are represented by id < 0 plus caller-held storage (see
// Tape::constant).
template <typename T>
struct Tensor {
  Tape<T>* tape = nullptr;
  int32_t id = -1;
  Shape shape;

  bool valid() const { return tape != nullptr && id >= 0; }
  std::span<const T> values() const;
  T scalar() const;
};

template <typename T>
class Tape {
 public:
  struct Node {
    Op op = Op::kConst;
    int32_t in0 = -1, in1 = -1;
    Shape shape;
    uint32_t off = 0;   // slot in value/grad arenas
    uint32_t aux = 0;   // slot in aux arena (mask, cached probs)
    double a0 = 0.0;
    int32_t i0 = 0, i1 = 0;
    const T* ext = nullptr;  // leaf: external parameter storage
    bool diff = false;
  };

  // ---- construction of inputs -------------------------------------------

  // Differentiable view of externally owned parameter storage. `slot` keys
  // gradient export; pass -1 for differentiable non-parameter leaves.
  Tensor<T> leaf(std::span<const T> data, Shape shape, int32_t slot = -1) {
    check_size(data.size(), shape, "leaf");
    int32_t id = new_node(Op::kLeaf, shape);
    Node& n = nodes_[id];
    n.ext = data.data();
    n.diff = true;
    n.i0 = slot;
    if (slot >= 0) param_leaves_.push_back(id);
    return handle(id);
  }

  Tensor<T> constant(std::span<const T> data, Shape shape) {
    check_size(data.size(), shape, "const");
    int32_t id = new_node(Op::kConst, shape);
    T* dst = values_.data() + nodes_[id].off;
    for (size_t k = 0; k < data.size(); ++k) dst[k] = data[k];
    return handle(id);
  }

  Tensor<T> constant_fill(T value, Shape shape) {
    int32_t id = new_node(Op::kConst, shape);
    T* dst = values_.data() + nodes_[id].off;
    for (int64_t k = 0; k < shape.size(); ++k) dst[k] = value;
    return handle(id);
  }

  Tensor<T> scalar_const(T value) { return constant_fill(value, vec_shape(1)); }

  // ---- primitives --------------------------------------------------------

  Tensor<T> matmul(Tensor<T> a, Tensor<T> b) {
    const Shape sa = shape_of(a);
    const Shape sb = shape_of(b);
    if (sa.rank() != 2 || sa.d1 != sb.d0) fail_shapes("matmul", sa, sb);
    Shape out = sb.rank() == 2 ? mat_shape(sa.d0, sb.d1) : vec_shape(sa.d0);
    int32_t id = new_node(Op::kMatMul, out, a.id, b.id);
    const T* av = value_ptr(a.id);
    const T* bv = value_ptr(b.id);
    T* cv = values_.data() + nodes_[id].off;
    const int m = sa.d0, k = sa.d1, n = sb.rank() == 2 ? sb.d1 : 1;
    if (n == 1) {
      // matrix-vector: contiguous dot products, the hot path
      for (int i = 0; i < m; ++i) {
        const T* arow = av + int64_t(i) * k;
        T acc = T(0);
        for (int p = 0; p < k; ++p) acc += arow[p] * bv[p];
        cv[i] = acc;
      }
    } else {
      for (int i = 0; i < m; ++i) {
        T* crow = cv + int64_t(i) * n;
        for (int j = 0; j < n; ++j) crow[j] = T(0);
        const T* arow = av + int64_t(i) * k;
        for (int p = 0; p < k; ++p) {
          const T apv = arow[p];
          const T* brow = bv + int64_t(p) * n;
          for (int j = 0; j < n; ++j) crow[j] += apv * brow[j];
        }
      }
    }
    return handle(id);
  }

  Tensor<T> add(Tensor<T> a, Tensor<T> b) {
    const Shape sa = shape_of(a);
    const Shape sb = shape_of(b);
    if (!(sa == sb)) fail_shapes("add", sa, sb);
    int32_t id = new_node(Op::kAdd, sa, a.id, b.id);
    const T* av = value_ptr(a.id);
    const T* bv = value_ptr(b.id);
    T* cv = values_.data() + nodes_[id].off;
    for (int64_t t = 0; t < sa.size(); ++t) cv[t] = av[t] + bv[t];
    return handle(id);
  }

  Tensor<T> hadamard(Tensor<T> a, Tensor<T> b) {
    const Shape sa = shape_of(a);
    const Shape sb = shape_of(b);
    if (!(sa == sb)) fail_shapes("hadamard", sa, sb);
    int32_t id = new_node(Op::kHadamard, sa, a.id, b.id);
    const T* av = value_ptr(a.id);
    const T* bv = value_ptr(b.id);
    T* cv = values_.data() + nodes_[id].off;
    for (int64_t t = 0; t < sa.size(); ++t) cv[t] = av[t] * bv[t];
    return handle(id);
  }

  // axis 0 over rank-1 tensors; nothing else is needed here
  Tensor<T> concat(Tensor<T> a, Tensor<T> b, int axis = 0) {
    const Shape sa = shape_of(a);
    const Shape sb = shape_of(b);
    if (axis != 0 || sa.rank() != 1 || sb.rank() != 1) fail_shapes("concat", sa, sb);
    int32_t id = new_node(Op::kConcat, vec_shape(sa.d0 + sb.d0), a.id, b.id);
    const T* av = value_ptr(a.id);
    const T* bv = value_ptr(b.id);
    T* cv = values_.data() + nodes_[id].off;
    for (int t = 0; t < sa.d0; ++t) cv[t] = av[t];
    for (int t = 0; t < sb.d0; ++t) cv[sa.d0 + t] = bv[t];
    return handle(id);
  }

  Tensor<T> sigmoid(Tensor<T> a) { return unary_map(Op::kSigmoid, a, 0.0); }
  Tensor<T> tanh(Tensor<T> a) { return unary_map(Op::kTanh, a, 0.0); }
  Tensor<T> leaky_relu(Tensor<T> a, double slope) { return unary_map(Op::kLeakyRelu, a, slope); }

  Tensor<T> embedding_row(Tensor<T> table, int32_t row) {
    const Shape s = shape_of(table);
    if (s.rank() != 2)
      throw std::invalid_argument(std::string("embedding_row: table must be rank-2, got ") + s.str());
    if (row < 0 || row >= s.d0)
      throw std::invalid_argument("embedding_row: id " + std::to_string(row) +
                                  " out of range for table " + s.str());
    int32_t id = new_node(Op::kEmbeddingRow, vec_shape(s.d1), table.id);
    nodes_[id].i0 = row;
    const T* tv = value_ptr(table.id) + int64_t(row) * s.d1;
    T* cv = values_.data() + nodes_[id].off;
    for (int t = 0; t < s.d1; ++t) cv[t] = tv[t];
    return handle(id);
  }

  // Inverted-scaling dropout: values * mask / keep_prob. The mask is an
  // attribute of the application, not a differentiable input. Evaluation
  // mode simply never records this op.
  Tensor<T> dropout(Tensor<T> a, std::span<const T> mask, double keep_prob) {
    const Shape s = shape_of(a);
    if (int64_t(mask.size()) != s.size())
      throw std::invalid_argument("dropout: mask size " + std::to_string(mask.size()) +
                                  " does not match input " + s.str());
    if (!(keep_prob > 0.0 && keep_prob <= 1.0))
      throw std::invalid_argument("dropout: keep_prob must be in (0, 1]");
    int32_t id = new_node(Op::kDropout, s, a.id);
    Node& n = nodes_[id];
    n.a0 = keep_prob;
    n.aux = alloc_aux(s.size());
    T* mv = aux_.data() + n.aux;
    const T* av = value_ptr(a.id);
    T* cv = values_.data() + n.off;
    const T inv = T(1) / T(keep_prob);
    for (int64_t t = 0; t < s.size(); ++t) {
      mv[t] = mask[t];
      cv[t] = av[t] * mv[t] * inv;
    }
    return handle(id);
  }

  // Convenience: draw a fresh Bernoulli(keep_prob) mask from rng.
  Tensor<T> dropout(Tensor<T> a, double keep_prob, Rng& rng) {
    scratch_mask_.resize(size_t(shape_of(a).size()));
    for (auto& m : scratch_mask_) m = rng.uniform() < keep_prob ? T(1) : T(0);
    return dropout(a, std::span<const T>(scratch_mask_), keep_prob);
  }

  Tensor<T> slice(Tensor<T> a, int32_t offset, int32_t len) {
    const Shape s = shape_of(a);
    if (s.rank() != 1 || offset < 0 || len <= 0 || offset + len > s.d0)
      throw std::invalid_argument("slice: range [" + std::to_string(offset) + ", " +
                                  std::to_string(offset + len) + ") invalid for " + s.str());
    int32_t id = new_node(Op::kSlice, vec_shape(len), a.id);
    Node& n = nodes_[id];
    n.i0 = offset;
    n.i1 = len;
    const T* av = value_ptr(a.id) + offset;
    T* cv = values_.data() + n.off;
    for (int t = 0; t < len; ++t) cv[t] = av[t];
    return handle(id);
  }

  // -log softmax(logits)[target], max-subtraction stabilized.
  Tensor<T> softmax_cross_entropy(Tensor<T> logits, int32_t target) {
    const Shape s = shape_of(logits);
    if (s.rank() != 1)
      throw std::invalid_argument("softmax_cross_entropy: logits must be rank-1, got " + s.str());
    if (target < 0 || target >= s.d0)
      throw std::invalid_argument("softmax_cross_entropy: target " + std::to_string(target) +
                                  " out of range for logits " + s.str());
    int32_t id = new_node(Op::kSoftmaxXent, vec_shape(1), logits.id);
    Node& n = nodes_[id];
    n.i0 = target;
    n.aux = alloc_aux(s.d0);
    const T* lv = value_ptr(logits.id);
    T* probs = aux_.data() + n.aux;
    T mx = lv[0];
    for (int t = 1; t < s.d0; ++t) mx = std::max(mx, lv[t]);
    T denom = T(0);
    for (int t = 0; t < s.d0; ++t) {
      probs[t] = std::exp(lv[t] - mx);
      denom += probs[t];
    }
    for (int t = 0; t < s.d0; ++t) probs[t] /= denom;
    values_[n.off] = std::log(denom) + mx - lv[target];
    return handle(id);
  }

  // (pred - target)^2 with a constant target
  Tensor<T> mse(Tensor<T> pred, double target) {
    const Shape s = shape_of(pred);
    if (s.size() != 1)
      throw std::invalid_argument("mse: pred must be scalar, got " + s.str());
    int32_t id = new_node(Op::kMseConst, vec_shape(1), pred.id);
    Node& n = nodes_[id];
    n.a0 = target;
    const T d = value_ptr(pred.id)[0] - T(target);
    values_[n.off] = d * d;
    return handle(id);
  }

  // Generic entry point mirroring the module contract; dispatches to the
  // typed primitives above.
  Tensor<T> apply_primitive(Op op, std::span<const Tensor<T>> inputs, const Attrs& attrs = {}) {
    auto need = [&](size_t n) {
      if (inputs.size() != n)
        throw std::invalid_argument(std::string(op_name(op)) + ": expected " + std::to_string(n) +
                                    " inputs, got " + std::to_string(inputs.size()));
    };
    switch (op) {
      case Op::kMatMul: need(2); return matmul(inputs[0], inputs[1]);
      case Op::kAdd: need(2); return add(inputs[0], inputs[1]);
      case Op::kConcat: need(2); return concat(inputs[0], inputs[1], attrs.i0);
      case Op::kHadamard: need(2); return hadamard(inputs[0], inputs[1]);
      case Op::kSigmoid: need(1); return sigmoid(inputs[0]);
      case Op::kTanh: need(1); return tanh(inputs[0]);
      case Op::kLeakyRelu: need(1); return leaky_relu(inputs[0], attrs.a0);
      case Op::kEmbeddingRow: need(1); return embedding_row(inputs[0], attrs.i0);
      case Op::kSlice: need(1); return slice(inputs[0], attrs.i0, attrs.i1);
      case Op::kSoftmaxXent: need(1); return softmax_cross_entropy(inputs[0], attrs.i0);
      case Op::kMseConst: need(1); return mse(inputs[0], attrs.a0);
      default:
        throw std::invalid_argument(std::string("apply_primitive: not an applicable primitive: ") +
                                    op_name(op));
    }
  }

  // ---- composite helpers (built from the primitives) ---------------------

  Tensor<T> scale(Tensor<T> a, T factor) {
    return hadamard(a, constant_fill(factor, shape_of(a)));
  }

  Tensor<T> sub(Tensor<T> a, Tensor<T> b) { return add(a, scale(b, T(-1))); }

  // ---- backward ----------------------------------------------------------

  void backward(Tensor<T> loss) {
    if (!loss.valid() || loss.tape != this)
      throw std::invalid_argument("backward: loss is not on this tape");
    if (shape_of(loss).size() != 1)
      throw std::invalid_argument("backward: loss must be scalar, got " + shape_of(loss).str());
    grads_.assign(values_.size(), T(0));
    grads_[nodes_[loss.id].off] = T(1);
    for (int32_t id = loss.id; id >= 0; --id) {
      const Node& n = nodes_[id];
      if (!n.diff) continue;
      backward_node(n);
    }
    has_grads_ = true;
  }

  // Accumulate parameter-leaf gradients into per-slot arrays (registration
  // order, hence deterministic).
  void export_param_grads(std::vector<std::vector<T>>& out) const {
    assert(has_grads_);
    for (int32_t id : param_leaves_) {
      const Node& n = nodes_[id];
      auto& dst = out[size_t(n.i0)];
      const T* g = grads_.data() + n.off;
      const int64_t len = n.shape.size();
      assert(int64_t(dst.size()) == len);
      for (int64_t t = 0; t < len; ++t) dst[t] += g[t];
    }
  }

  // ---- access -------------------------------------------------------------

  std::span<const T> value(const Tensor<T>& t) const {
    const Node& n = nodes_[t.id];
    return {value_ptr(t.id), size_t(n.shape.size())};
  }

  std::span<const T> grad(const Tensor<T>& t) const {
    assert(has_grads_);
    const Node& n = nodes_[t.id];
    return {grads_.data() + n.off, size_t(n.shape.size())};
  }

  Shape shape_of(const Tensor<T>& t) const {
    if (!t.valid() || t.tape != this) throw std::invalid_argument("tensor is not on this tape");
    return nodes_[t.id].shape;
  }

  size_t num_nodes() const { return nodes_.size(); }

  void reset() {
    nodes_.clear();
    param_leaves_.clear();
    values_.clear();
    grads_.clear();
    aux_.clear();
    has_grads_ = false;
  }

 private:
  Tensor<T> handle(int32_t id) { return Tensor<T>{this, id, nodes_[id].shape}; }

  int32_t new_node(Op op, Shape shape, int32_t in0 = -1, int32_t in1 = -1) {
    Node n;
    n.op = op;
    n.shape = shape;
    n.in0 = in0;
    n.in1 = in1;
    n.off = uint32_t(values_.size());
    n.diff = (in0 >= 0 && nodes_[in0].diff) || (in1 >= 0 && nodes_[in1].diff);
    values_.resize(values_.size() + size_t(shape.size()), T(0));
    nodes_.push_back(n);
    return int32_t(nodes_.size()) - 1;
  }

  uint32_t alloc_aux(int64_t len) {
    uint32_t off = uint32_t(aux_.size());
    aux_.resize(aux_.size() + size_t(len), T(0));
    return off;
  }

  const T* value_ptr(int32_t id) const {
    const Node& n = nodes_[id];
    return n.ext ? n.ext : values_.data() + n.off;
  }

  Tensor<T> unary_map(Op op, Tensor<T> a, double attr) {
    const Shape s = shape_of(a);
    int32_t id = new_node(op, s, a.id);
    nodes_[id].a0 = attr;
    const T* av = value_ptr(a.id);
    T* cv = values_.data() + nodes_[id].off;
    switch (op) {
      case Op::kSigmoid:
        for (int64_t t = 0; t < s.size(); ++t) cv[t] = T(1) / (T(1) + std::exp(-av[t]));
        break;
      case Op::kTanh:
        for (int64_t t = 0; t < s.size(); ++t) cv[t] = std::tanh(av[t]);
        break;
      case Op::kLeakyRelu: {
        const T slope = T(attr);
        for (int64_t t = 0; t < s.size(); ++t) cv[t] = av[t] > T(0) ? av[t] : slope * av[t];
        break;
      }
      default:
        assert(false);
    }
    return handle(id);
  }

  void backward_node(const Node& n) {
    const T* g = grads_.data() + n.off;
    switch (n.op) {
      case Op::kLeaf:
      case Op::kConst:
        return;
      case Op::kMatMul: {
        const Node& na = nodes_[n.in0];
        const Node& nb = nodes_[n.in1];
        const int m = na.shape.d0, k = na.shape.d1;
        const int c = nb.shape.rank() == 2 ? nb.shape.d1 : 1;
        const T* av = value_ptr(n.in0);
        const T* bv = value_ptr(n.in1);
        if (c == 1) {
          // matrix-vector: dA += g b^T (row axpys), db += A^T g (row axpys)
          if (na.diff) {
            T* da = grads_.data() + na.off;
            for (int i = 0; i < m; ++i) {
              const T gi = g[i];
              T* darow = da + int64_t(i) * k;
              for (int p = 0; p < k; ++p) darow[p] += gi * bv[p];
            }
          }
          if (nb.diff) {
            T* db = grads_.data() + nb.off;
            for (int i = 0; i < m; ++i) {
              const T gi = g[i];
              const T* arow = av + int64_t(i) * k;
              for (int p = 0; p < k; ++p) db[p] += gi * arow[p];
            }
          }
          return;
        }
        if (na.diff) {
          T* da = grads_.data() + na.off;
          // dA += dC * B^T
          for (int i = 0; i < m; ++i) {
            const T* grow = g + int64_t(i) * c;
            T* darow = da + int64_t(i) * k;
            for (int p = 0; p < k; ++p) {
              const T* brow = bv + int64_t(p) * c;
              T acc = T(0);
              for (int j = 0; j < c; ++j) acc += grow[j] * brow[j];
              darow[p] += acc;
            }
          }
        }
        if (nb.diff) {
          T* db = grads_.data() + nb.off;
          // dB += A^T * dC
          for (int i = 0; i < m; ++i) {
            const T* arow = av + int64_t(i) * k;
            const T* grow = g + int64_t(i) * c;
            for (int p = 0; p < k; ++p) {
              const T apv = arow[p];
              T* dbrow = db + int64_t(p) * c;
              for (int j = 0; j < c; ++j) dbrow[j] += apv * grow[j];
            }
          }
        }
        return;
      }
      case Op::kAdd: {
        accumulate(n.in0, g, n.shape.size());
        accumulate(n.in1, g, n.shape.size());
        return;
      }
      case Op::kConcat: {
        const int64_t la = nodes_[n.in0].shape.size();
        const int64_t lb = nodes_[n.in1].shape.size();
        accumulate(n.in0, g, la);
        accumulate(n.in1, g + la, lb);
        return;
      }
      case Op::kHadamard: {
        const Node& na = nodes_[n.in0];
        const Node& nb = nodes_[n.in1];
        const T* av = value_ptr(n.in0);
        const T* bv = value_ptr(n.in1);
        const int64_t len = n.shape.size();
        if (na.diff) {
          T* da = grads_.data() + na.off;
          for (int64_t t = 0; t < len; ++t) da[t] += g[t] * bv[t];
        }
        if (nb.diff) {
          T* db = grads_.data() + nb.off;
          for (int64_t t = 0; t < len; ++t) db[t] += g[t] * av[t];
        }
        return;
      }
      case Op::kSigmoid: {
        if (!nodes_[n.in0].diff) return;
        const T* out = values_.data() + n.off;
        T* da = grads_.data() + nodes_[n.in0].off;
        for (int64_t t = 0; t < n.shape.size(); ++t) da[t] += g[t] * out[t] * (T(1) - out[t]);
        return;
      }
      case Op::kTanh: {
        if (!nodes_[n.in0].diff) return;
        const T* out = values_.data() + n.off;
        T* da = grads_.data() + nodes_[n.in0].off;
        for (int64_t t = 0; t < n.shape.size(); ++t) da[t] += g[t] * (T(1) - out[t] * out[t]);
        return;
      }
      case Op::kLeakyRelu: {
        if (!nodes_[n.in0].diff) return;
        const T* in = value_ptr(n.in0);
        const T slope = T(n.a0);
        T* da = grads_.data() + nodes_[n.in0].off;
        for (int64_t t = 0; t < n.shape.size(); ++t) da[t] += g[t] * (in[t] > T(0) ? T(1) : slope);
        return;
      }
      case Op::kEmbeddingRow: {
        const Node& table = nodes_[n.in0];
        if (!table.diff) return;
        T* dt = grads_.data() + table.off + int64_t(n.i0) * table.shape.d1;
        for (int t = 0; t < table.shape.d1; ++t) dt[t] += g[t];
        return;
      }
      case Op::kDropout: {
        if (!nodes_[n.in0].diff) return;
        const T* mask = aux_.data() + n.aux;
        const T inv = T(1) / T(n.a0);
        T* da = grads_.data() + nodes_[n.in0].off;
        for (int64_t t = 0; t < n.shape.size(); ++t) da[t] += g[t] * mask[t] * inv;
        return;
      }
      case Op::kSlice: {
        if (!nodes_[n.in0].diff) return;
        T* da = grads_.data() + nodes_[n.in0].off + n.i0;
        for (int t = 0; t < n.i1; ++t) da[t] += g[t];
        return;
      }
      case Op::kSoftmaxXent: {
        if (!nodes_[n.in0].diff) return;
        const Node& na = nodes_[n.in0];
        const T* probs = aux_.data() + n.aux;
        const T gl = g[0];
        T* da = grads_.data() + na.off;
        for (int t = 0; t < na.shape.d0; ++t) da[t] += gl * probs[t];
        da[n.i0] -= gl;
        return;
      }
      case Op::kMseConst: {
        if (!nodes_[n.in0].diff) return;
        const T p = value_ptr(n.in0)[0];
        grads_[nodes_[n.in0].off] += g[0] * T(2) * (p - T(n.a0));
        return;
      }
    }
  }

  void accumulate(int32_t id, const T* g, int64_t len) {
    if (!nodes_[id].diff) return;
    T* d = grads_.data() + nodes_[id].off;
    for (int64_t t = 0; t < len; ++t) d[t] += g[t];
  }

  [[noreturn]] static void fail_shapes(const char* prim, const Shape& a, const Shape& b) {
    throw std::invalid_argument(std::string(prim) + ": shape mismatch " + a.str() + " vs " + b.str());
  }

  static void check_size(size_t n, const Shape& s, const char* what) {
    if (int64_t(n) != s.size())
      throw std::invalid_argument(std::string(what) + ": data size " + std::to_string(n) +
                                  " does not match shape " + s.str());
  }

  std::vector<Node> nodes_;
  std::vector<int32_t> param_leaves_;
  std::vector<T> values_;
  std::vector<T> grads_;
  std::vector<T> aux_;
  std::vector<T> scratch_mask_;
  bool has_grads_ = false;
};

template <typename T>
std::span<const T> Tensor<T>::values() const {
  return tape->value(*this);
}

template <typename T>
T Tensor<T>::scalar() const {
  auto v = tape->value(*this);
  assert(v.size() == 1);
  return v[0];
}

}  // namespace rlst::ad
