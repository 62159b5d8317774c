#ifndef MEMRE_MEMORY_HPP
#define MEMRE_MEMORY_HPP

// Category memories M_E (entity types) and M_R (relation types).
//
// Reading: for input X (n x h), memory M (m x s) and projection W (s x h),
//   a = sum_k softmax_over_rows_of_X( M[k,:] W X^T )          (length n)
//   X' = diag(a) X
// and the fused representation is the element-wise mean (X + X'_E + X'_R) / 3.
//
// Writing: there is no separate write pass. Classifiers score an instance x
// against every slot with the bilinear form M W^T x, so the classifier loss
// gradient is what updates M. Slot k belongs to type k of the vocabulary.

#include "memre/autodiff.hpp"
#include "memre/corpus.hpp"
#include "memre/random.hpp"
#include "memre/types.hpp"

#include <array>
#include <cmath>
#include <string>

namespace memre {

enum class InputKind { tokens = 0, spans = 1 };
enum class MemoryKind { entity = 0, relation = 1 };

inline std::string to_string(InputKind i) { return i == InputKind::tokens ? "T" : "S"; }
inline std::string to_string(MemoryKind j) { return j == MemoryKind::entity ? "E" : "R"; }

struct MemoryConfig {
  int entity_slot_size = 16;    // s_E
  int relation_slot_size = 16;  // s_R
  // read_enabled[i][j]: input i in {T, S}, memory j in {E, R}.
  std::array<std::array<bool, 2>, 2> read_enabled{{{true, true}, {true, true}}};

  bool enabled(InputKind i, MemoryKind j) const {
    return read_enabled[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  void set_all_reads(bool on) { read_enabled = {{{on, on}, {on, on}}}; }
  void validate() const;
};

// ---------------------------------------------------------------------------
// Pure operations

template <typename Scalar>
Vector<Scalar> read_weights(const Matrix<Scalar>& x, const Matrix<Scalar>& memory, const Matrix<Scalar>& projection) {
  if (projection.rows() != memory.cols() || projection.cols() != x.cols())
    throw ConfigError("read_weights: projection must be " + std::to_string(memory.cols()) + " x " +
                      std::to_string(x.cols()));
  const Matrix<Scalar> logits = memory * projection * x.transpose();  // m x n
  Vector<Scalar> a = Vector<Scalar>::Zero(x.rows());
  for (Eigen::Index k = 0; k < logits.rows(); ++k) {
    const Scalar mx = logits.row(k).maxCoeff();
    RowVector<Scalar> e = (logits.row(k).array() - mx).exp().matrix();
    a += (e / e.sum()).transpose();
  }
  return a;
}

template <typename Scalar>
Matrix<Scalar> extend_representation(const Matrix<Scalar>& x, const Vector<Scalar>& a) {
  if (a.size() != x.rows()) throw ConfigError("extend_representation: weight length differs from row count");
  return a.asDiagonal() * x;
}

template <typename Scalar>
Matrix<Scalar> fuse(const Matrix<Scalar>& x, const Matrix<Scalar>& x_entity, const Matrix<Scalar>& x_relation) {
  if (x.rows() != x_entity.rows() || x.cols() != x_entity.cols() || x.rows() != x_relation.rows() ||
      x.cols() != x_relation.cols())
    throw ConfigError("fuse: shapes differ");
  return (x + x_entity + x_relation) / Scalar(3);
}

/// Scores M W^T x, one per memory slot. W is d x s.
template <typename Scalar>
Vector<Scalar> bilinear_similarity(const Vector<Scalar>& x, const Matrix<Scalar>& memory, const Matrix<Scalar>& write) {
  if (write.rows() != x.size() || write.cols() != memory.cols())
    throw ConfigError("bilinear_similarity: write projection must be " + std::to_string(x.size()) + " x " +
                      std::to_string(memory.cols()));
  return memory * (write.transpose() * x);
}

template <typename Scalar>
Vector<Scalar> softmax(const Vector<Scalar>& z) {
  const Scalar mx = z.maxCoeff();
  Vector<Scalar> e = (z.array() - mx).exp().matrix();
  return e / e.sum();
}

template <typename Scalar>
Vector<Scalar> sigmoid(const Vector<Scalar>& z) {
  return z.unaryExpr([](Scalar v) { return ad::stable_sigmoid(v); });
}

template <typename Scalar>
Vector<Scalar> entity_type_distribution(const Vector<Scalar>& x, const Matrix<Scalar>& memory, const Matrix<Scalar>& write) {
  return softmax<Scalar>(bilinear_similarity(x, memory, write));
}

template <typename Scalar>
Vector<Scalar> relation_type_probabilities(const Vector<Scalar>& x, const Matrix<Scalar>& memory,
                                           const Matrix<Scalar>& write) {
  return sigmoid<Scalar>(bilinear_similarity(x, memory, write));
}

// ---------------------------------------------------------------------------
// Trainable memory module

class MemoryModule {
 public:
  /// Slot counts come from the vocabulary: K_E entity slots, K_R relation slots.
  MemoryModule(ad::ParameterStore<Real>& store, const TypeVocabulary& vocab, const MemoryConfig& config,
               int input_size, int entity_size, int pair_size, Rng& rng);

  const MemoryConfig& config() const { return config_; }

  /// When false (default), reads treat M as a constant and M learns only
  /// through the classifier losses.
  void set_read_gradient(bool flag) { read_gradient_ = flag; }
  bool read_gradient() const { return read_gradient_; }

  /// Warm-up bypass: extend() returns its input unchanged.
  void set_bypass(bool flag) { bypass_ = flag; }
  bool bypass() const { return bypass_; }

  /// Attention weights a_{i,j} as an n x 1 column.
  ad::Var<Real> read(const ad::Var<Real>& x, InputKind i, MemoryKind j) const;
  /// Fused representation; disabled paths contribute X itself.
  ad::Var<Real> extend(const ad::Var<Real>& x, InputKind i) const;

  /// Rows of x_e (c x h_e) -> c x K_E similarity scores.
  ad::Var<Real> entity_scores(const ad::Var<Real>& entities) const;
  /// Rows of x_p (p x h_p) -> p x K_R similarity scores.
  ad::Var<Real> relation_scores(const ad::Var<Real>& pairs) const;

  const ad::Parameter<Real>& memory(MemoryKind j) const { return j == MemoryKind::entity ? *entity_memory_ : *relation_memory_; }
  const ad::Parameter<Real>& read_projection(InputKind i, MemoryKind j) const {
    return *read_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  const ad::Parameter<Real>& write_projection(MemoryKind j) const { return j == MemoryKind::entity ? *write_entity_ : *write_relation_; }

  int slot_count(MemoryKind j) const { return static_cast<int>(memory(j).value.rows()); }

 private:
  MemoryConfig config_;
  bool read_gradient_ = false;
  bool bypass_ = false;
  ad::Parameter<Real>* entity_memory_;
  ad::Parameter<Real>* relation_memory_;
  std::array<std::array<ad::Parameter<Real>*, 2>, 2> read_{};
  ad::Parameter<Real>* write_entity_;
  ad::Parameter<Real>* write_relation_;
};

}  // namespace memre

#endif  // MEMRE_MEMORY_HPP
