#ifndef MEMRE_PIPELINE_HPP
#define MEMRE_PIPELINE_HPP

#include "memre/autodiff.hpp"
#include "memre/corpus.hpp"
#include "memre/encoder.hpp"
#include "memre/memory.hpp"
#include "memre/types.hpp"

#include "json.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace memre {

enum class RelationHead { global, multi_instance };  // GRC, MRC

std::string to_string(RelationHead head);
RelationHead relation_head_from_string(const std::string& s);

struct ModelConfig {
  EncoderConfig encoder;
  MemoryConfig memory;
  int entity_size = 32;   // h_e
  int pair_size = 32;     // h_p
  int coref_hidden = 32;
  RelationHead relation_head = RelationHead::global;
  double mention_threshold = 0.5;
  double coref_threshold = 0.5;
  double relation_threshold = 0.5;

  void validate() const;
};

struct MentionScore {
  Span span;
  Real score = 0;
};

/// Predicted mentions and symmetric pairwise coreference probabilities.
struct CorefGraph {
  std::vector<Span> nodes;
  MatrixR edge_scores;  // nodes x nodes, symmetric; diagonal ignored
};

struct PredictedCluster {
  std::vector<Span> mentions;
  int entity_type = 0;
};

struct DocumentPrediction {
  std::string doc_id;
  std::vector<PredictedCluster> clusters;
  std::vector<RelationTriple> relations;

  /// {doc_id, clusters: [{mentions: [[start, end]...], type}], relations: [{h, t, r}]}
  nlohmann::json to_json(const TypeVocabulary& vocab) const;
  static DocumentPrediction from_json(const nlohmann::json& j, const TypeVocabulary& vocab);
};

/// Gold annotations rendered as a prediction (scorer sanity checks).
DocumentPrediction gold_as_prediction(const Document& doc);

// ---------------------------------------------------------------------------
// Head operations on plain matrices

/// Spans whose probability is strictly above `threshold`, in input order.
std::vector<MentionScore> detect_mentions(const std::vector<Span>& spans, const VectorR& probabilities, double threshold);

/// Connected components of the graph with edges scoring >= threshold. Clusters
/// are sorted internally by (start, end) and ordered by their first mention.
std::vector<std::vector<Span>> resolve_coreference(const CorefGraph& graph, double threshold);

/// Element-wise max over mention rows, then x W + b.
template <typename Scalar>
RowVector<Scalar> represent_entity(const Matrix<Scalar>& mention_rows, const Matrix<Scalar>& map, const Matrix<Scalar>& bias) {
  if (mention_rows.rows() == 0) throw std::logic_error("represent_entity: empty cluster");
  RowVector<Scalar> pooled = mention_rows.colwise().maxCoeff();
  return pooled * map + bias.row(0);
}

/// Arg-max with ties resolved to the lowest index.
int argmax_lowest(const VectorR& scores);
std::vector<int> classify_entities(const MatrixR& distributions);

/// [a ; b ; a * b] for an ordered pair.
template <typename Scalar>
RowVector<Scalar> pair_features(const RowVector<Scalar>& a, const RowVector<Scalar>& b) {
  RowVector<Scalar> f(3 * a.size());
  f << a, b, a.cwiseProduct(b);
  return f;
}

/// GRC pre-map feature of entities i and j (rows of `entities`).
template <typename Scalar>
RowVector<Scalar> grc_features(const Matrix<Scalar>& entities, int i, int j) {
  if (i == j) throw std::invalid_argument("relation pair requires distinct entities");
  return pair_features<Scalar>(entities.row(i), entities.row(j));
}

/// MRC pre-map feature: element-wise max of pair_features over all mention pairs.
template <typename Scalar>
RowVector<Scalar> mrc_features(const Matrix<Scalar>& mentions_i, const Matrix<Scalar>& mentions_j) {
  if (mentions_i.rows() == 0 || mentions_j.rows() == 0) throw std::invalid_argument("relation pair requires non-empty clusters");
  RowVector<Scalar> best;
  for (Eigen::Index a = 0; a < mentions_i.rows(); ++a) {
    for (Eigen::Index b = 0; b < mentions_j.rows(); ++b) {
      RowVector<Scalar> f = pair_features<Scalar>(mentions_i.row(a), mentions_j.row(b));
      best = best.size() == 0 ? f : RowVector<Scalar>(best.cwiseMax(f));
    }
  }
  return best;
}

/// One triple per (pair, type) with probability strictly above `threshold`.
std::vector<RelationTriple> classify_relations(const std::vector<std::pair<int, int>>& pairs, const MatrixR& probabilities,
                                               double threshold);

std::vector<std::pair<int, int>> ordered_pairs(int count);

// ---------------------------------------------------------------------------
// Model

class Model {
 public:
  Model(const ModelConfig& config, const TypeVocabulary& vocab, Tokenizer tokenizer, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }
  const TypeVocabulary& vocabulary() const { return vocab_; }
  const Tokenizer& tokenizer() const { return encoder_->tokenizer(); }
  ad::ParameterStore<Real>& parameters() { return store_; }
  const ad::ParameterStore<Real>& parameters() const { return store_; }
  MemoryModule& memory() { return *memory_; }
  const MemoryModule& memory() const { return *memory_; }
  const TokenEncoder& encoder() const { return *encoder_; }
  const ad::Parameter<Real>& param(const std::string& name) const;
  ad::Parameter<Real>& param(const std::string& name);

  struct Encoded {
    ad::Var<Real> tokens;        // X_T
    ad::Var<Real> tokens_fused;  // X_T after memory read and fusion
    ad::Var<Real> spans;         // X_S pooled from fused tokens
    ad::Var<Real> spans_fused;
    std::vector<Span> span_list;  // candidates first, then extra spans
    int num_candidates = 0;

    int row_of(const Span& s) const;
  };

  /// Encodes the document and every candidate span; `extra_spans` (e.g. gold
  /// mentions longer than L_max) are appended after the candidates.
  Encoded encode(ad::Tape<Real>& tape, const Document& doc, const std::vector<Span>& extra_spans = {}) const;

  ad::Var<Real> mention_logits(const ad::Var<Real>& spans_fused) const;
  /// Symmetric pair scorer over [a + b, a * b, |a - b|].
  ad::Var<Real> coref_logits(const ad::Var<Real>& spans_fused, const std::vector<std::pair<int, int>>& pairs) const;
  /// One row per cluster of span-row indices.
  ad::Var<Real> entity_representations(const ad::Var<Real>& spans_fused, const std::vector<std::vector<int>>& clusters) const;
  ad::Var<Real> pair_representations(const ad::Var<Real>& spans_fused, const ad::Var<Real>& entities,
                                     const std::vector<std::vector<int>>& clusters,
                                     const std::vector<std::pair<int, int>>& pairs) const;

  /// Full cascade without teacher forcing.
  DocumentPrediction predict(const Document& doc) const;

 private:
  ModelConfig config_;
  TypeVocabulary vocab_;
  ad::ParameterStore<Real> store_;
  std::unique_ptr<ToyEncoder> encoder_;
  std::unique_ptr<MemoryModule> memory_;
  ad::Parameter<Real>* width_embedding_;
  ad::Parameter<Real>* mention_weight_;
  ad::Parameter<Real>* mention_bias_;
  ad::Parameter<Real>* coref_hidden_weight_;
  ad::Parameter<Real>* coref_hidden_bias_;
  ad::Parameter<Real>* coref_out_weight_;
  ad::Parameter<Real>* coref_out_bias_;
  ad::Parameter<Real>* entity_weight_;
  ad::Parameter<Real>* entity_bias_;
  ad::Parameter<Real>* pair_weight_;
  ad::Parameter<Real>* pair_bias_;
};

}  // namespace memre

#endif  // MEMRE_PIPELINE_HPP
