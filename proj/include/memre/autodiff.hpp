#ifndef MEMRE_AUTODIFF_HPP
#define MEMRE_AUTODIFF_HPP

// Minimal reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every operation applied to its Vars. Calling backward() on a
// 1x1 Var walks the tape in reverse and accumulates gradients; leaves created
// with parameter() expose their gradient through parameter_grad().
// A Tape constructed with record=false only evaluates values (inference).

#include "memre/types.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace memre::ad {

template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Parameter() = default;
  Parameter(std::string n, Matrix<Scalar> v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix<Scalar>::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

template <typename Scalar>
class Tape;

template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, int id) : tape_(tape), id_(id) {}

  const Matrix<Scalar>& value() const { return tape_->value(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Scalar scalar() const {
    assert(rows() == 1 && cols() == 1);
    return value()(0, 0);
  }
  bool needs_grad() const { return tape_->needs_grad(id_); }

  Tape<Scalar>* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<Scalar>* tape_ = nullptr;
  int id_ = -1;
};

template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;
  using BackwardFn = std::function<void(Tape&, int)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var<Scalar> constant(Mat value) { return push(std::move(value), false, nullptr); }

  // Binding the same Parameter twice returns the same leaf.
  Var<Scalar> parameter(const Parameter<Scalar>& p) {
    auto it = leaves_.find(&p);
    if (it != leaves_.end()) return Var<Scalar>(this, it->second);
    Var<Scalar> v = push(p.value, record_, nullptr);
    leaves_.emplace(&p, v.id());
    return v;
  }

  // Gradient reaching the leaf bound to p after backward(); null when p was
  // not used or received no gradient.
  const Mat* parameter_grad(const Parameter<Scalar>& p) const {
    auto it = leaves_.find(&p);
    if (it == leaves_.end()) return nullptr;
    const Mat& g = nodes_[it->second].grad;
    return g.size() == 0 ? nullptr : &g;
  }

  // Adds a node computed from inputs; backward is dropped when no input needs
  // gradient or the tape is not recording.
  Var<Scalar> record(Mat value, std::initializer_list<Var<Scalar>> inputs, BackwardFn backward) {
    return record(std::move(value), std::vector<Var<Scalar>>(inputs), std::move(backward));
  }

  Var<Scalar> record(Mat value, const std::vector<Var<Scalar>>& inputs, BackwardFn backward) {
    bool any = false;
    if (record_) {
      for (const auto& in : inputs) {
        assert(in.tape() == this);
        any = any || nodes_[in.id()].needs_grad;
      }
    }
    return push(std::move(value), any, any ? std::move(backward) : BackwardFn{});
  }

  const Mat& value(int id) const { return nodes_[id].value; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  const Mat& grad(int id) const { return nodes_[id].grad; }

  template <typename Derived>
  void accumulate(int id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  // Returns a mutable gradient buffer for sparse accumulation.
  Mat& grad_buffer(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  void backward(const Var<Scalar>& root) {
    if (!record_) throw std::logic_error("backward() on a non-recording tape");
    if (root.rows() != 1 || root.cols() != 1) throw std::logic_error("backward() requires a 1x1 root");
    if (!nodes_[root.id()].needs_grad) return;
    nodes_[root.id()].grad = Mat::Ones(1, 1);
    for (int id = root.id(); id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, id);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    BackwardFn backward;
  };

  Var<Scalar> push(Mat value, bool needs_grad, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var<Scalar>(this, static_cast<int>(nodes_.size()) - 1);
  }

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<Scalar>*, int> leaves_;
};

// Owns named parameters with stable addresses, in registration order.
template <typename Scalar>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter<Scalar>& add(const std::string& name, Matrix<Scalar> value) {
    if (index_.count(name)) throw std::logic_error("duplicate parameter " + name);
    index_.emplace(name, params_.size());
    params_.push_back(std::make_unique<Parameter<Scalar>>(name, std::move(value)));
    return *params_.back();
  }

  Parameter<Scalar>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  const Parameter<Scalar>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  std::size_t size() const { return params_.size(); }
  Parameter<Scalar>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<Scalar>& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  // Adds every leaf gradient recorded on the tape into Parameter::grad.
  void collect_gradients(const Tape<Scalar>& tape) {
    for (auto& p : params_) {
      if (const auto* g = tape.parameter_grad(*p)) p->grad += *g;
    }
  }

  std::vector<Matrix<Scalar>> snapshot() const {
    std::vector<Matrix<Scalar>> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p->value);
    return out;
  }

  void restore(const std::vector<Matrix<Scalar>>& values) {
    if (values.size() != params_.size()) throw std::logic_error("parameter snapshot size mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) params_[i]->value = values[i];
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

 private:
  std::vector<std::unique_ptr<Parameter<Scalar>>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Operations

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  assert(a.cols() == b.rows());
  const int ia = a.id(), ib = b.id();
  Matrix<Scalar> out = a.value() * b.value();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, int self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.needs_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  const int ia = a.id();
  Matrix<Scalar> out = a.value().transpose();
  return a.tape()->record(std::move(out), {a}, [ia](Tape<Scalar>& t, int self) {
    t.accumulate(ia, t.grad(self).transpose());
  });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  const int ia = a.id(), ib = b.id();
  Matrix<Scalar> out = a.value() + b.value();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, int self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self));
  });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  const int ia = a.id(), ib = b.id();
  Matrix<Scalar> out = a.value() - b.value();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, int self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, -t.grad(self));
  });
}

// a (r x c) + row (1 x c) broadcast over rows.
template <typename Scalar>
Var<Scalar> add_row(const Var<Scalar>& a, const Var<Scalar>& row) {
  assert(row.rows() == 1 && row.cols() == a.cols());
  const int ia = a.id(), ir = row.id();
  Matrix<Scalar> out = a.value().rowwise() + row.value().row(0);
  return a.tape()->record(std::move(out), {a, row}, [ia, ir](Tape<Scalar>& t, int self) {
    t.accumulate(ia, t.grad(self));
    if (t.needs_grad(ir)) t.accumulate(ir, t.grad(self).colwise().sum());
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  const int ia = a.id();
  Matrix<Scalar> out = a.value() * s;
  return a.tape()->record(std::move(out), {a}, [ia, s](Tape<Scalar>& t, int self) {
    t.accumulate(ia, t.grad(self) * s);
  });
}

template <typename Scalar>
Var<Scalar> hadamard(const Var<Scalar>& a, const Var<Scalar>& b) {
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  const int ia = a.id(), ib = b.id();
  Matrix<Scalar> out = a.value().cwiseProduct(b.value());
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, int self) {
    if (t.needs_grad(ia)) t.accumulate(ia, t.grad(self).cwiseProduct(t.value(ib)));
    if (t.needs_grad(ib)) t.accumulate(ib, t.grad(self).cwiseProduct(t.value(ia)));
  });
}

template <typename Scalar>
Var<Scalar> abs(const Var<Scalar>& a) {
  const int ia = a.id();
  Matrix<Scalar> out = a.value().cwiseAbs();
  return a.tape()->record(std::move(out), {a}, [ia](Tape<Scalar>& t, int self) {
    const auto& x = t.value(ia);
    Matrix<Scalar> sign = x.unaryExpr([](Scalar v) { return v > 0 ? Scalar(1) : (v < 0 ? Scalar(-1) : Scalar(0)); });
    t.accumulate(ia, t.grad(self).cwiseProduct(sign));
  });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& a) {
  const int ia = a.id();
  Matrix<Scalar> out = a.value().array().tanh().matrix();
  return a.tape()->record(std::move(out), {a}, [ia](Tape<Scalar>& t, int self) {
    const auto& y = t.value(self);
    t.accumulate(ia, (t.grad(self).array() * (Scalar(1) - y.array().square())).matrix());
  });
}

template <typename Scalar>
Scalar stable_sigmoid(Scalar z) {
  if (z >= 0) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& a) {
  const int ia = a.id();
  Matrix<Scalar> out = a.value().unaryExpr([](Scalar z) { return stable_sigmoid(z); });
  return a.tape()->record(std::move(out), {a}, [ia](Tape<Scalar>& t, int self) {
    const auto& y = t.value(self);
    t.accumulate(ia, (t.grad(self).array() * y.array() * (Scalar(1) - y.array())).matrix());
  });
}

template <typename Scalar>
Matrix<Scalar> softmax_rows_value(const Matrix<Scalar>& x) {
  Matrix<Scalar> out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar mx = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - mx).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

// Softmax applied independently to each row.
template <typename Scalar>
Var<Scalar> softmax_rows(const Var<Scalar>& a) {
  const int ia = a.id();
  Matrix<Scalar> out = softmax_rows_value(a.value());
  return a.tape()->record(std::move(out), {a}, [ia](Tape<Scalar>& t, int self) {
    const auto& y = t.value(self);
    const auto& g = t.grad(self);
    Matrix<Scalar> dx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const Scalar dot = g.row(r).dot(y.row(r));
      dx.row(r) = (y.row(r).array() * (g.row(r).array() - dot)).matrix();
    }
    t.accumulate(ia, dx);
  });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  const int ia = a.id();
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->record(std::move(out), {a}, [ia](Tape<Scalar>& t, int self) {
    const auto& x = t.value(ia);
    t.accumulate(ia, Matrix<Scalar>::Constant(x.rows(), x.cols(), t.grad(self)(0, 0)));
  });
}

// Column sums as a 1 x c row.
template <typename Scalar>
Var<Scalar> column_sum(const Var<Scalar>& a) {
  const int ia = a.id();
  Matrix<Scalar> out = a.value().colwise().sum();
  return a.tape()->record(std::move(out), {a}, [ia](Tape<Scalar>& t, int self) {
    const auto& x = t.value(ia);
    t.accumulate(ia, t.grad(self).replicate(x.rows(), 1));
  });
}

// diag(w) X, with w given as an n x 1 column.
template <typename Scalar>
Var<Scalar> scale_rows(const Var<Scalar>& x, const Var<Scalar>& w) {
  assert(w.cols() == 1 && w.rows() == x.rows());
  const int ix = x.id(), iw = w.id();
  Matrix<Scalar> out = w.value().col(0).asDiagonal() * x.value();
  return x.tape()->record(std::move(out), {x, w}, [ix, iw](Tape<Scalar>& t, int self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(ix)) t.accumulate(ix, t.value(iw).col(0).asDiagonal() * g);
    if (t.needs_grad(iw)) t.accumulate(iw, g.cwiseProduct(t.value(ix)).rowwise().sum());
  });
}

template <typename Scalar>
Var<Scalar> gather_rows(const Var<Scalar>& a, std::vector<int> rows) {
  const int ia = a.id();
  Matrix<Scalar> out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
  return a.tape()->record(std::move(out), {a}, [ia, rows = std::move(rows)](Tape<Scalar>& t, int self) {
    if (!t.needs_grad(ia)) return;
    auto& ga = t.grad_buffer(ia);
    const auto& g = t.grad(self);
    for (std::size_t i = 0; i < rows.size(); ++i) ga.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

// Element-wise max over the selected rows; gradient goes to the first arg-max.
template <typename Scalar>
Var<Scalar> max_rows(const Var<Scalar>& a, const std::vector<int>& rows) {
  if (rows.empty()) throw std::logic_error("max_rows over an empty row set");
  const int ia = a.id();
  const auto& x = a.value();
  Matrix<Scalar> out(1, x.cols());
  std::vector<int> arg(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    int best = rows[0];
    for (int r : rows) {
      if (x(r, c) > x(best, c)) best = r;
    }
    arg[static_cast<std::size_t>(c)] = best;
    out(0, c) = x(best, c);
  }
  return a.tape()->record(std::move(out), {a}, [ia, arg = std::move(arg)](Tape<Scalar>& t, int self) {
    if (!t.needs_grad(ia)) return;
    auto& ga = t.grad_buffer(ia);
    const auto& g = t.grad(self);
    for (std::size_t c = 0; c < arg.size(); ++c) ga(arg[c], static_cast<Eigen::Index>(c)) += g(0, static_cast<Eigen::Index>(c));
  });
}

// Row g of the result is the element-wise max over rows groups[g] of a; the
// gradient goes to the first arg-max of each column.
template <typename Scalar>
Var<Scalar> max_pool_groups(const Var<Scalar>& a, const std::vector<std::vector<int>>& groups) {
  const int ia = a.id();
  const auto& x = a.value();
  const auto cols = x.cols();
  Matrix<Scalar> out(static_cast<Eigen::Index>(groups.size()), cols);
  std::vector<int> arg(groups.size() * static_cast<std::size_t>(cols));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& rows = groups[g];
    if (rows.empty()) throw std::logic_error("max_pool_groups: empty group");
    for (Eigen::Index c = 0; c < cols; ++c) {
      int best = rows[0];
      for (int r : rows) {
        if (x(r, c) > x(best, c)) best = r;
      }
      arg[g * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)] = best;
      out(static_cast<Eigen::Index>(g), c) = x(best, c);
    }
  }
  return a.tape()->record(std::move(out), {a}, [ia, cols, arg = std::move(arg)](Tape<Scalar>& t, int self) {
    if (!t.needs_grad(ia)) return;
    auto& ga = t.grad_buffer(ia);
    const auto& g = t.grad(self);
    for (std::size_t k = 0; k < arg.size(); ++k) {
      const auto row = static_cast<Eigen::Index>(k / static_cast<std::size_t>(cols));
      const auto col = static_cast<Eigen::Index>(k % static_cast<std::size_t>(cols));
      ga(arg[k], col) += g(row, col);
    }
  });
}

// Row r of the result is row r+offset of a; rows falling outside are zero.
template <typename Scalar>
Var<Scalar> shift_rows(const Var<Scalar>& a, int offset) {
  const int ia = a.id();
  const auto& x = a.value();
  const auto n = x.rows();
  Matrix<Scalar> out = Matrix<Scalar>::Zero(n, x.cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index src = r + offset;
    if (src >= 0 && src < n) out.row(r) = x.row(src);
  }
  return a.tape()->record(std::move(out), {a}, [ia, offset](Tape<Scalar>& t, int self) {
    const auto& g = t.grad(self);
    const auto n = g.rows();
    Matrix<Scalar> dx = Matrix<Scalar>::Zero(n, g.cols());
    for (Eigen::Index r = 0; r < n; ++r) {
      const Eigen::Index src = r + offset;
      if (src >= 0 && src < n) dx.row(src) += g.row(r);
    }
    t.accumulate(ia, dx);
  });
}

template <typename Scalar>
Var<Scalar> hconcat(const std::vector<Var<Scalar>>& parts) {
  assert(!parts.empty());
  const auto rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    assert(p.rows() == rows);
    cols += p.cols();
  }
  Matrix<Scalar> out(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.cols();
  }
  return parts.front().tape()->record(std::move(out), parts,
                                      [ids = std::move(ids), offsets = std::move(offsets)](Tape<Scalar>& t, int self) {
                                        const auto& g = t.grad(self);
                                        for (std::size_t i = 0; i < ids.size(); ++i) {
                                          if (!t.needs_grad(ids[i])) continue;
                                          t.accumulate(ids[i], g.middleCols(offsets[i], t.value(ids[i]).cols()));
                                        }
                                      });
}

template <typename Scalar>
Var<Scalar> vconcat(const std::vector<Var<Scalar>>& parts) {
  assert(!parts.empty());
  const auto cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    assert(p.cols() == cols);
    rows += p.rows();
  }
  Matrix<Scalar> out(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.rows();
  }
  return parts.front().tape()->record(std::move(out), parts,
                                      [ids = std::move(ids), offsets = std::move(offsets)](Tape<Scalar>& t, int self) {
                                        const auto& g = t.grad(self);
                                        for (std::size_t i = 0; i < ids.size(); ++i) {
                                          if (!t.needs_grad(ids[i])) continue;
                                          t.accumulate(ids[i], g.middleRows(offsets[i], t.value(ids[i]).rows()));
                                        }
                                      });
}

// Same value, no gradient flow.
template <typename Scalar>
Var<Scalar> stop_gradient(const Var<Scalar>& a) {
  return a.tape()->constant(a.value());
}

// Sum over entries of the binary cross-entropy between sigmoid(logits) and
// targets in {0, 1}; evaluated in the overflow-free softplus form.
template <typename Scalar>
Var<Scalar> bce_with_logits(const Var<Scalar>& logits, const Matrix<Scalar>& targets) {
  assert(logits.rows() == targets.rows() && logits.cols() == targets.cols());
  const int il = logits.id();
  const auto& z = logits.value();
  Scalar total = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const Scalar zi = z.data()[i];
    const Scalar yi = targets.data()[i];
    total += std::max(zi, Scalar(0)) - zi * yi + std::log1p(std::exp(-std::abs(zi)));
  }
  Matrix<Scalar> out(1, 1);
  out(0, 0) = total;
  return logits.tape()->record(std::move(out), {logits}, [il, targets](Tape<Scalar>& t, int self) {
    const auto& z = t.value(il);
    Matrix<Scalar> p = z.unaryExpr([](Scalar v) { return stable_sigmoid(v); });
    t.accumulate(il, (p - targets) * t.grad(self)(0, 0));
  });
}

// Sum over rows of -log softmax(logits.row(r))[targets[r]].
template <typename Scalar>
Var<Scalar> softmax_cross_entropy(const Var<Scalar>& logits, std::vector<int> targets) {
  assert(static_cast<std::size_t>(logits.rows()) == targets.size());
  const int il = logits.id();
  const auto& z = logits.value();
  Scalar total = 0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const Scalar mx = z.row(r).maxCoeff();
    const Scalar lse = mx + std::log((z.row(r).array() - mx).exp().sum());
    total += lse - z(r, targets[static_cast<std::size_t>(r)]);
  }
  Matrix<Scalar> out(1, 1);
  out(0, 0) = total;
  return logits.tape()->record(std::move(out), {logits}, [il, targets = std::move(targets)](Tape<Scalar>& t, int self) {
    Matrix<Scalar> p = softmax_rows_value(t.value(il));
    for (std::size_t r = 0; r < targets.size(); ++r) p(static_cast<Eigen::Index>(r), targets[r]) -= Scalar(1);
    t.accumulate(il, p * t.grad(self)(0, 0));
  });
}

}  // namespace memre::ad

#endif  // MEMRE_AUTODIFF_HPP
