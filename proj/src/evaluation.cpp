#include "memre/evaluation.hpp"

#include <algorithm>
#include <set>

namespace memre {

nlohmann::json Score::to_json() const {
  return {{"p", precision}, {"r", recall}, {"f1", f1}, {"tp", counts.tp}, {"fp", counts.fp}, {"fn", counts.fn}};
}

Score score(const Counts& c) {
  Score s;
  s.counts = c;
  const double tp = static_cast<double>(c.tp);
  s.precision = c.tp + c.fp == 0 ? 0.0 : tp / static_cast<double>(c.tp + c.fp);
  s.recall = c.tp + c.fn == 0 ? 0.0 : tp / static_cast<double>(c.tp + c.fn);
  s.f1 = s.precision + s.recall == 0 ? 0.0 : 2 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

Score micro_f1(const std::vector<Counts>& per_document) {
  Counts total;
  for (const auto& c : per_document) {
    if (c.tp < 0 || c.fp < 0 || c.fn < 0) throw std::invalid_argument("micro_f1: negative count");
    total += c;
  }
  return score(total);
}

ClusterSignature signature(std::vector<Span> mentions, int entity_type, bool with_type) {
  std::sort(mentions.begin(), mentions.end());
  mentions.erase(std::unique(mentions.begin(), mentions.end()), mentions.end());
  return {std::move(mentions), with_type ? entity_type : -1};
}

namespace {

template <typename ClusterRange>
std::vector<StrictTriple> triples_from(const ClusterRange& clusters, const std::vector<RelationTriple>& relations,
                                       bool with_types) {
  std::vector<ClusterSignature> sigs;
  for (const auto& c : clusters) sigs.push_back(signature(c.mentions, c.entity_type, with_types));
  std::set<StrictTriple> out;
  for (const auto& r : relations) {
    if (r.head < 0 || r.tail < 0 || r.head >= static_cast<int>(sigs.size()) || r.tail >= static_cast<int>(sigs.size()))
      throw ValidationError("relation references a missing cluster");
    out.insert({sigs[static_cast<std::size_t>(r.head)], sigs[static_cast<std::size_t>(r.tail)], r.relation_type});
  }
  return {out.begin(), out.end()};
}

template <typename T>
Counts match_sets(const std::set<T>& pred, const std::set<T>& gold) {
  Counts c;
  for (const auto& p : pred) {
    if (gold.count(p)) ++c.tp;
  }
  c.fp = static_cast<long>(pred.size()) - c.tp;
  c.fn = static_cast<long>(gold.size()) - c.tp;
  return c;
}

template <typename T>
Counts match_sets(const std::vector<T>& pred, const std::vector<T>& gold) {
  return match_sets(std::set<T>(pred.begin(), pred.end()), std::set<T>(gold.begin(), gold.end()));
}

}  // namespace

std::vector<StrictTriple> strict_triples(const DocumentPrediction& pred, bool with_types) {
  return triples_from(pred.clusters, pred.relations, with_types);
}

std::vector<StrictTriple> strict_triples(const Document& gold, bool with_types) {
  return triples_from(gold.clusters, gold.relations, with_types);
}

Counts strict_match(const DocumentPrediction& pred, const Document& gold, bool with_types) {
  if (pred.doc_id != gold.doc_id)
    throw ValidationError("prediction for '" + pred.doc_id + "' scored against gold '" + gold.doc_id + "'");
  return match_sets(strict_triples(pred, with_types), strict_triples(gold, with_types));
}

void Evaluator::add(const DocumentPrediction& pred, const Document& gold) {
  strict_ += strict_match(pred, gold, options_.strict_entity_types);
  relaxed_ += strict_match(pred, gold, false);

  std::set<Span> pred_mentions, gold_mentions;
  for (const auto& c : pred.clusters) pred_mentions.insert(c.mentions.begin(), c.mentions.end());
  for (const auto& c : gold.clusters) gold_mentions.insert(c.mentions.begin(), c.mentions.end());
  mention_ += match_sets(pred_mentions, gold_mentions);

  std::set<ClusterSignature> pred_clusters, gold_clusters, pred_typed, gold_typed;
  for (const auto& c : pred.clusters) {
    pred_clusters.insert(signature(c.mentions, c.entity_type, false));
    pred_typed.insert(signature(c.mentions, c.entity_type, true));
  }
  for (const auto& c : gold.clusters) {
    gold_clusters.insert(signature(c.mentions, c.entity_type, false));
    gold_typed.insert(signature(c.mentions, c.entity_type, true));
  }
  coref_ += match_sets(pred_clusters, gold_clusters);
  entity_ += match_sets(pred_typed, gold_typed);

  for (const auto& c : pred.clusters) {
    const auto sig = signature(c.mentions, 0, false);
    auto it = std::find_if(gold.clusters.begin(), gold.clusters.end(),
                           [&](const EntityCluster& g) { return signature(g.mentions, 0, false) == sig; });
    if (it == gold.clusters.end()) continue;
    ++accuracy_.matched;
    if (it->entity_type == c.entity_type) ++accuracy_.correct;
  }
  ++documents_;
}

MetricReport Evaluator::report() const {
  MetricReport r;
  r.strict = score(strict_);
  r.relaxed = score(relaxed_);
  r.mention = score(mention_);
  r.coref = score(coref_);
  r.entity = score(entity_);
  r.entity_accuracy = accuracy_;
  r.documents = documents_;
  return r;
}

nlohmann::json MetricReport::to_json() const {
  auto entity_json = entity.to_json();
  entity_json["accuracy"] = entity_accuracy.accuracy();
  entity_json["matched"] = entity_accuracy.matched;
  return {{"strict", strict.to_json()}, {"relaxed", relaxed.to_json()}, {"mention", mention.to_json()},
          {"coref", coref.to_json()},   {"entity", entity_json},         {"documents", documents}};
}

MetricReport evaluate(const std::vector<DocumentPrediction>& preds, const std::vector<Document>& gold, EvalOptions options) {
  if (preds.size() != gold.size()) throw ValidationError("evaluate: prediction and gold document counts differ");
  Evaluator ev(options);
  for (std::size_t i = 0; i < preds.size(); ++i) ev.add(preds[i], gold[i]);
  return ev.report();
}

}  // namespace memre
