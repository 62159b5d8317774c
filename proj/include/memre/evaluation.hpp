#ifndef MEMRE_EVALUATION_HPP
#define MEMRE_EVALUATION_HPP

#include "memre/corpus.hpp"
#include "memre/pipeline.hpp"

#include "json.hpp"

#include <compare>
#include <vector>

namespace memre {

struct Counts {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const Counts&) const = default;
};

struct Score {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  Counts counts;

  nlohmann::json to_json() const;
};

/// P, R and F1 from pooled counts; every ratio with a zero denominator is 0.
Score score(const Counts& c);
/// Pools counts across documents before computing P, R, F1.
Score micro_f1(const std::vector<Counts>& per_document);

/// A cluster identified by its exact mention set and (optionally) its type.
struct ClusterSignature {
  std::vector<Span> mentions;  // sorted, unique
  int entity_type = -1;        // -1 when types are ignored

  auto operator<=>(const ClusterSignature&) const = default;
};

struct StrictTriple {
  ClusterSignature head;
  ClusterSignature tail;
  int relation_type = 0;

  auto operator<=>(const StrictTriple&) const = default;
};

ClusterSignature signature(std::vector<Span> mentions, int entity_type, bool with_type);
std::vector<StrictTriple> strict_triples(const DocumentPrediction& pred, bool with_types = true);
std::vector<StrictTriple> strict_triples(const Document& gold, bool with_types = true);

/// Set-based triple matching. Throws ValidationError on doc_id mismatch.
Counts strict_match(const DocumentPrediction& pred, const Document& gold, bool with_types = true);

struct EntityAccuracy {
  long matched = 0;  // predicted clusters whose mention set equals a gold cluster
  long correct = 0;  // ... whose type also matches

  double accuracy() const { return matched == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(matched); }
};

struct MetricReport {
  Score strict;
  Score relaxed;   // relation triples with entity types ignored
  Score mention;
  Score coref;     // exact cluster match
  Score entity;    // exact cluster and type match
  EntityAccuracy entity_accuracy;
  long documents = 0;

  /// {strict: {p, r, f1, tp, fp, fn}, mention: {...}, coref: {...}, entity: {...}, ...}
  nlohmann::json to_json() const;
};

struct EvalOptions {
  bool strict_entity_types = true;
};

class Evaluator {
 public:
  explicit Evaluator(EvalOptions options = {}) : options_(options) {}

  void add(const DocumentPrediction& pred, const Document& gold);
  MetricReport report() const;

 private:
  EvalOptions options_;
  Counts strict_, relaxed_, mention_, coref_, entity_;
  EntityAccuracy accuracy_;
  long documents_ = 0;
};

MetricReport evaluate(const std::vector<DocumentPrediction>& preds, const std::vector<Document>& gold,
                      EvalOptions options = {});

}  // namespace memre

#endif  // MEMRE_EVALUATION_HPP
