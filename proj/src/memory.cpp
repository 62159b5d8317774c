#include "memre/memory.hpp"

namespace memre {

void MemoryConfig::validate() const {
  if (entity_slot_size <= 0) throw ConfigError("memory.s_E must be positive");
  if (relation_slot_size <= 0) throw ConfigError("memory.s_R must be positive");
}

namespace {

MatrixR uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double bound) {
  MatrixR m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

double glorot(Eigen::Index fan_in, Eigen::Index fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

MemoryModule::MemoryModule(ad::ParameterStore<Real>& store, const TypeVocabulary& vocab, const MemoryConfig& config,
                           int input_size, int entity_size, int pair_size, Rng& rng)
    : config_(config) {
  config_.validate();
  const int s_e = config_.entity_slot_size;
  const int s_r = config_.relation_slot_size;
  entity_memory_ = &store.add("memory.M_E", uniform_matrix(rng, vocab.num_entity_types(), s_e, 1.0 / std::sqrt(s_e)));
  relation_memory_ =
      &store.add("memory.M_R", uniform_matrix(rng, vocab.num_relation_types(), s_r, 1.0 / std::sqrt(s_r)));
  for (auto i : {InputKind::tokens, InputKind::spans}) {
    for (auto j : {MemoryKind::entity, MemoryKind::relation}) {
      const int s = j == MemoryKind::entity ? s_e : s_r;
      read_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          &store.add("memory.read_" + to_string(i) + to_string(j), uniform_matrix(rng, s, input_size, glorot(s, input_size)));
    }
  }
  write_entity_ = &store.add("memory.write_E", uniform_matrix(rng, entity_size, s_e, glorot(entity_size, s_e)));
  write_relation_ = &store.add("memory.write_R", uniform_matrix(rng, pair_size, s_r, glorot(pair_size, s_r)));
}

ad::Var<Real> MemoryModule::read(const ad::Var<Real>& x, InputKind i, MemoryKind j) const {
  auto& tape = *x.tape();
  auto m = tape.parameter(memory(j));
  if (!read_gradient_) m = ad::stop_gradient(m);
  const auto& w = read_projection(i, j);
  if (w.value.cols() != x.cols()) throw ConfigError("memory read: input width differs from projection");
  auto logits = ad::matmul(ad::matmul(m, tape.parameter(w)), ad::transpose(x));  // m x n
  return ad::transpose(ad::column_sum(ad::softmax_rows(logits)));
}

ad::Var<Real> MemoryModule::extend(const ad::Var<Real>& x, InputKind i) const {
  if (bypass_) return x;
  std::vector<ad::Var<Real>> terms{x};
  bool any = false;
  for (auto j : {MemoryKind::entity, MemoryKind::relation}) {
    if (config_.enabled(i, j)) {
      terms.push_back(ad::scale_rows(x, read(x, i, j)));
      any = true;
    } else {
      terms.push_back(x);
    }
  }
  if (!any) return x;
  return ad::scale(ad::add(ad::add(terms[0], terms[1]), terms[2]), Real(1) / Real(3));
}

ad::Var<Real> MemoryModule::entity_scores(const ad::Var<Real>& entities) const {
  auto& tape = *entities.tape();
  return ad::matmul(ad::matmul(entities, tape.parameter(*write_entity_)), ad::transpose(tape.parameter(*entity_memory_)));
}

ad::Var<Real> MemoryModule::relation_scores(const ad::Var<Real>& pairs) const {
  auto& tape = *pairs.tape();
  return ad::matmul(ad::matmul(pairs, tape.parameter(*write_relation_)), ad::transpose(tape.parameter(*relation_memory_)));
}

}  // namespace memre
