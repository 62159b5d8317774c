// Shared test helpers: random matrices, hand-built documents and a central
// finite-difference gradient checker over a ParameterStore.
#ifndef MEMRE_TESTS_SUPPORT_HPP
#define MEMRE_TESTS_SUPPORT_HPP

#include "memre/autodiff.hpp"
#include "memre/corpus.hpp"
#include "memre/random.hpp"
#include "memre/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace memre::testing {

inline MatrixR random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1, double hi = 1) {
  MatrixR m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(lo, hi);
  return m;
}

inline int random_int(Rng& rng, int lo, int hi) { return lo + static_cast<int>(rng.below(static_cast<std::size_t>(hi - lo + 1))); }

struct GradCheck {
  double max_error = 0;  // worst |analytic - numeric| / (atol + rtol * max(|analytic|, |numeric|))
  long checked = 0;
  long failures = 0;
  std::string worst;

  bool ok() const { return failures == 0 && checked > 0; }
};

using LossFn = std::function<ad::Var<Real>(ad::Tape<Real>&)>;

inline Real loss_value(const LossFn& loss) {
  ad::Tape<Real> tape(false);
  return loss(tape).scalar();
}

/// Compares tape gradients of `loss` with central differences for every entry
/// of every parameter in `store` (or only those named in `only`).
inline GradCheck grad_check(ad::ParameterStore<Real>& store, const LossFn& loss, double step = 1e-4, double rtol = 1e-3,
                            double atol = 1e-7, const std::vector<std::string>& only = {}) {
  store.zero_grad();
  {
    ad::Tape<Real> tape;
    auto l = loss(tape);
    tape.backward(l);
    store.collect_gradients(tape);
  }
  GradCheck out;
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& p = store[i];
    if (!only.empty() && std::find(only.begin(), only.end(), p.name) == only.end()) continue;
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
        const Real saved = p.value(r, c);
        p.value(r, c) = saved + step;
        const Real up = loss_value(loss);
        p.value(r, c) = saved - step;
        const Real down = loss_value(loss);
        p.value(r, c) = saved;
        const Real numeric = (up - down) / (2 * step);
        const Real analytic = p.grad(r, c);
        const double err = std::abs(analytic - numeric) / (atol + rtol * std::max(std::abs(analytic), std::abs(numeric)));
        ++out.checked;
        if (err > 1.0) ++out.failures;
        if (err > out.max_error) {
          out.max_error = err;
          out.worst = p.name + "(" + std::to_string(r) + "," + std::to_string(c) + ") analytic " +
                      std::to_string(analytic) + " numeric " + std::to_string(numeric);
        }
      }
    }
  }
  return out;
}

struct MentionSpec {
  int sent;
  int start;  // sentence-local
  int end;
};

/// Builds a Document from sentences and clusters given in sentence-local
/// coordinates.
inline Document make_document(const std::string& id, const std::vector<std::vector<std::string>>& sents,
                              const std::vector<std::pair<std::vector<MentionSpec>, int>>& clusters,
                              std::vector<RelationTriple> relations = {}) {
  Document d;
  d.doc_id = id;
  std::vector<int> offset;
  for (const auto& s : sents) {
    offset.push_back(d.size());
    d.sentences.push_back({d.size(), d.size() + static_cast<int>(s.size())});
    d.tokens.insert(d.tokens.end(), s.begin(), s.end());
  }
  for (const auto& [mentions, type] : clusters) {
    EntityCluster c;
    c.entity_type = type;
    for (const auto& m : mentions) c.mentions.push_back({offset[m.sent] + m.start, offset[m.sent] + m.end});
    std::sort(c.mentions.begin(), c.mentions.end());
    d.clusters.push_back(c);
  }
  std::sort(relations.begin(), relations.end());
  d.relations = std::move(relations);
  return d;
}

/// Three-entity, two-relation micro document.
inline Document micro_document() {
  return make_document("micro", {{"alice", "works", "for", "acme", "."}, {"acme", "is", "in", "paris", "."}},
                       {{{{0, 0, 1}}, 0}, {{{0, 3, 4}, {1, 0, 1}}, 1}, {{{1, 3, 4}}, 2}}, {{0, 1, 0}, {1, 2, 1}});
}

inline TypeVocabulary micro_vocabulary() { return TypeVocabulary({"PER", "ORG", "LOC"}, {"works_for", "located_in"}); }

}  // namespace memre::testing

#endif  // MEMRE_TESTS_SUPPORT_HPP
