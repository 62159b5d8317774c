#include "memre/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace memre {

std::string to_string(RelationHead head) { return head == RelationHead::global ? "GRC" : "MRC"; }

RelationHead relation_head_from_string(const std::string& s) {
  if (s == "GRC") return RelationHead::global;
  if (s == "MRC") return RelationHead::multi_instance;
  throw ConfigError("relation head must be GRC or MRC, got '" + s + "'");
}

void ModelConfig::validate() const {
  encoder.validate();
  memory.validate();
  if (entity_size <= 0) throw ConfigError("model.h_e must be positive");
  if (pair_size <= 0) throw ConfigError("model.h_p must be positive");
  if (coref_hidden <= 0) throw ConfigError("model.coref_hidden must be positive");
  for (double t : {mention_threshold, coref_threshold, relation_threshold}) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("thresholds must lie in [0, 1]");
  }
}

// ---------------------------------------------------------------------------
// Prediction JSON

nlohmann::json DocumentPrediction::to_json(const TypeVocabulary& vocab) const {
  nlohmann::json clusters_json = nlohmann::json::array();
  for (const auto& c : clusters) {
    nlohmann::json mentions = nlohmann::json::array();
    for (const auto& m : c.mentions) mentions.push_back({m.start, m.end});
    clusters_json.push_back({{"mentions", mentions}, {"type", vocab.entity_types().at(static_cast<std::size_t>(c.entity_type))}});
  }
  nlohmann::json relations_json = nlohmann::json::array();
  for (const auto& r : relations) {
    relations_json.push_back(
        {{"h", r.head}, {"t", r.tail}, {"r", vocab.relation_types().at(static_cast<std::size_t>(r.relation_type))}});
  }
  return {{"doc_id", doc_id}, {"clusters", clusters_json}, {"relations", relations_json}};
}

DocumentPrediction DocumentPrediction::from_json(const nlohmann::json& j, const TypeVocabulary& vocab) {
  DocumentPrediction p;
  try {
    p.doc_id = j.at("doc_id").get<std::string>();
    for (const auto& c : j.at("clusters")) {
      PredictedCluster pc;
      for (const auto& m : c.at("mentions")) pc.mentions.push_back({m.at(0).get<int>(), m.at(1).get<int>()});
      auto type = vocab.entity_index(c.at("type").get<std::string>());
      if (!type) throw ValidationError("prediction " + p.doc_id + ": unknown entity type");
      pc.entity_type = *type;
      p.clusters.push_back(std::move(pc));
    }
    for (const auto& r : j.at("relations")) {
      auto rel = vocab.relation_index(r.at("r").get<std::string>());
      if (!rel) throw ValidationError("prediction " + p.doc_id + ": unknown relation type");
      p.relations.push_back({r.at("h").get<int>(), r.at("t").get<int>(), *rel});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("prediction JSON: ") + e.what());
  }
  return p;
}

DocumentPrediction gold_as_prediction(const Document& doc) {
  DocumentPrediction p;
  p.doc_id = doc.doc_id;
  for (const auto& c : doc.clusters) p.clusters.push_back({c.mentions, c.entity_type});
  p.relations = doc.relations;
  return p;
}

// ---------------------------------------------------------------------------
// Head operations

std::vector<MentionScore> detect_mentions(const std::vector<Span>& spans, const VectorR& probabilities, double threshold) {
  if (static_cast<Eigen::Index>(spans.size()) != probabilities.size())
    throw std::invalid_argument("detect_mentions: one probability per span required");
  std::vector<MentionScore> out;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const Real p = probabilities(static_cast<Eigen::Index>(i));
    if (p > threshold) out.push_back({spans[i], p});
  }
  return out;
}

namespace {

int find_root(std::vector<int>& parent, int x) {
  while (parent[static_cast<std::size_t>(x)] != x) {
    parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    x = parent[static_cast<std::size_t>(x)];
  }
  return x;
}

}  // namespace

std::vector<std::vector<Span>> resolve_coreference(const CorefGraph& graph, double threshold) {
  const int n = static_cast<int>(graph.nodes.size());
  if (graph.edge_scores.rows() != n || graph.edge_scores.cols() != n)
    throw std::invalid_argument("resolve_coreference: edge matrix must be nodes x nodes");
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (graph.edge_scores(a, b) >= threshold) parent[static_cast<std::size_t>(find_root(parent, a))] = find_root(parent, b);
    }
  }
  std::map<int, std::vector<Span>> components;
  for (int a = 0; a < n; ++a) components[find_root(parent, a)].push_back(graph.nodes[static_cast<std::size_t>(a)]);
  std::vector<std::vector<Span>> out;
  for (auto& [_, spans] : components) {
    std::sort(spans.begin(), spans.end());
    spans.erase(std::unique(spans.begin(), spans.end()), spans.end());
    out.push_back(std::move(spans));
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.front() < y.front(); });
  return out;
}

int argmax_lowest(const VectorR& scores) {
  int best = 0;
  for (Eigen::Index k = 1; k < scores.size(); ++k) {
    if (scores(k) > scores(best)) best = static_cast<int>(k);
  }
  return best;
}

std::vector<int> classify_entities(const MatrixR& distributions) {
  std::vector<int> out;
  for (Eigen::Index r = 0; r < distributions.rows(); ++r) out.push_back(argmax_lowest(distributions.row(r).transpose()));
  return out;
}

std::vector<RelationTriple> classify_relations(const std::vector<std::pair<int, int>>& pairs, const MatrixR& probabilities,
                                               double threshold) {
  if (static_cast<Eigen::Index>(pairs.size()) != probabilities.rows())
    throw std::invalid_argument("classify_relations: one probability row per pair required");
  std::vector<RelationTriple> out;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    for (Eigen::Index r = 0; r < probabilities.cols(); ++r) {
      if (probabilities(static_cast<Eigen::Index>(p), r) > threshold)
        out.push_back({pairs[p].first, pairs[p].second, static_cast<int>(r)});
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::pair<int, int>> ordered_pairs(int count) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < count; ++i) {
    for (int j = 0; j < count; ++j) {
      if (i != j) out.emplace_back(i, j);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model

namespace {

MatrixR glorot_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  MatrixR m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

}  // namespace

Model::Model(const ModelConfig& config, const TypeVocabulary& vocab, Tokenizer tokenizer, std::uint64_t init_seed)
    : config_(config), vocab_(vocab) {
  config_.validate();
  if (config_.encoder.kind != EncoderKind::toy)
    throw ConfigError("encoder.kind 'external' needs an adapter implementing TokenEncoder; only 'toy' is built in");
  Rng rng(init_seed);
  const int h = config_.encoder.embedding_size;
  const int h_e = config_.entity_size;
  const int h_p = config_.pair_size;
  encoder_ = std::make_unique<ToyEncoder>(store_, config_.encoder, std::move(tokenizer), rng);
  width_embedding_ = &store_.add("encoder.width_embedding", glorot_matrix(rng, config_.encoder.max_span_length, h) * 0.1);
  memory_ = std::make_unique<MemoryModule>(store_, vocab_, config_.memory, h, h_e, h_p, rng);
  mention_weight_ = &store_.add("heads.mention.weight", glorot_matrix(rng, h, 1));
  mention_bias_ = &store_.add("heads.mention.bias", MatrixR::Zero(1, 1));
  coref_hidden_weight_ = &store_.add("heads.coref.hidden.weight", glorot_matrix(rng, 3 * h, config_.coref_hidden));
  coref_hidden_bias_ = &store_.add("heads.coref.hidden.bias", MatrixR::Zero(1, config_.coref_hidden));
  coref_out_weight_ = &store_.add("heads.coref.out.weight", glorot_matrix(rng, config_.coref_hidden, 1));
  coref_out_bias_ = &store_.add("heads.coref.out.bias", MatrixR::Zero(1, 1));
  entity_weight_ = &store_.add("heads.entity.weight", glorot_matrix(rng, h, h_e));
  entity_bias_ = &store_.add("heads.entity.bias", MatrixR::Zero(1, h_e));
  const int pair_in = 3 * (config_.relation_head == RelationHead::global ? h_e : h);
  pair_weight_ = &store_.add("heads.pair.weight", glorot_matrix(rng, pair_in, h_p));
  pair_bias_ = &store_.add("heads.pair.bias", MatrixR::Zero(1, h_p));
}

const ad::Parameter<Real>& Model::param(const std::string& name) const {
  const auto* p = store_.find(name);
  if (p == nullptr) throw std::out_of_range("no parameter " + name);
  return *p;
}

ad::Parameter<Real>& Model::param(const std::string& name) {
  auto* p = store_.find(name);
  if (p == nullptr) throw std::out_of_range("no parameter " + name);
  return *p;
}

int Model::Encoded::row_of(const Span& s) const {
  auto it = std::lower_bound(span_list.begin(), span_list.begin() + num_candidates, s);
  if (it != span_list.begin() + num_candidates && *it == s) return static_cast<int>(it - span_list.begin());
  auto extra = std::find(span_list.begin() + num_candidates, span_list.end(), s);
  if (extra == span_list.end()) return -1;
  return static_cast<int>(extra - span_list.begin());
}

Model::Encoded Model::encode(ad::Tape<Real>& tape, const Document& doc, const std::vector<Span>& extra_spans) const {
  Encoded e;
  e.span_list = enumerate_spans(doc.sentences, config_.encoder.max_span_length);
  e.num_candidates = static_cast<int>(e.span_list.size());
  for (const auto& s : extra_spans) {
    if (e.row_of(s) < 0) e.span_list.push_back(s);
  }
  e.tokens = encoder_->encode(tape, doc);
  e.tokens_fused = memory_->extend(e.tokens, InputKind::tokens);
  e.spans = pool_spans(e.tokens_fused, e.span_list, tape.parameter(*width_embedding_));
  e.spans_fused = memory_->extend(e.spans, InputKind::spans);
  return e;
}

ad::Var<Real> Model::mention_logits(const ad::Var<Real>& spans_fused) const {
  auto& tape = *spans_fused.tape();
  return ad::add_row(ad::matmul(spans_fused, tape.parameter(*mention_weight_)), tape.parameter(*mention_bias_));
}

ad::Var<Real> Model::coref_logits(const ad::Var<Real>& spans_fused, const std::vector<std::pair<int, int>>& pairs) const {
  auto& tape = *spans_fused.tape();
  std::vector<int> left, right;
  for (const auto& [a, b] : pairs) {
    left.push_back(a);
    right.push_back(b);
  }
  auto a = ad::gather_rows(spans_fused, std::move(left));
  auto b = ad::gather_rows(spans_fused, std::move(right));
  auto features = ad::hconcat<Real>({ad::add(a, b), ad::hadamard(a, b), ad::abs(ad::sub(a, b))});
  auto hidden = ad::tanh(ad::add_row(ad::matmul(features, tape.parameter(*coref_hidden_weight_)),
                                     tape.parameter(*coref_hidden_bias_)));
  return ad::add_row(ad::matmul(hidden, tape.parameter(*coref_out_weight_)), tape.parameter(*coref_out_bias_));
}

ad::Var<Real> Model::entity_representations(const ad::Var<Real>& spans_fused,
                                            const std::vector<std::vector<int>>& clusters) const {
  auto& tape = *spans_fused.tape();
  auto pooled = ad::max_pool_groups(spans_fused, clusters);
  return ad::add_row(ad::matmul(pooled, tape.parameter(*entity_weight_)), tape.parameter(*entity_bias_));
}

ad::Var<Real> Model::pair_representations(const ad::Var<Real>& spans_fused, const ad::Var<Real>& entities,
                                          const std::vector<std::vector<int>>& clusters,
                                          const std::vector<std::pair<int, int>>& pairs) const {
  auto& tape = *spans_fused.tape();
  ad::Var<Real> features;
  if (config_.relation_head == RelationHead::global) {
    std::vector<int> heads, tails;
    for (const auto& [i, j] : pairs) {
      heads.push_back(i);
      tails.push_back(j);
    }
    auto a = ad::gather_rows(entities, std::move(heads));
    auto b = ad::gather_rows(entities, std::move(tails));
    features = ad::hconcat<Real>({a, b, ad::hadamard(a, b)});
  } else {
    std::vector<int> heads, tails;
    std::vector<std::vector<int>> groups;
    for (const auto& [i, j] : pairs) {
      std::vector<int> group;
      for (int a : clusters[static_cast<std::size_t>(i)]) {
        for (int b : clusters[static_cast<std::size_t>(j)]) {
          group.push_back(static_cast<int>(heads.size()));
          heads.push_back(a);
          tails.push_back(b);
        }
      }
      groups.push_back(std::move(group));
    }
    auto a = ad::gather_rows(spans_fused, std::move(heads));
    auto b = ad::gather_rows(spans_fused, std::move(tails));
    features = ad::max_pool_groups(ad::hconcat<Real>({a, b, ad::hadamard(a, b)}), groups);
  }
  return ad::add_row(ad::matmul(features, tape.parameter(*pair_weight_)), tape.parameter(*pair_bias_));
}

DocumentPrediction Model::predict(const Document& doc) const {
  DocumentPrediction out;
  out.doc_id = doc.doc_id;
  ad::Tape<Real> tape(false);
  const Encoded enc = encode(tape, doc);

  const VectorR mention_probs = sigmoid<Real>(mention_logits(enc.spans_fused).value().col(0));
  const auto mentions = detect_mentions(enc.span_list, mention_probs, config_.mention_threshold);
  if (mentions.empty()) return out;

  CorefGraph graph;
  std::vector<int> rows;
  for (const auto& m : mentions) {
    graph.nodes.push_back(m.span);
    rows.push_back(enc.row_of(m.span));
  }
  const int k = static_cast<int>(mentions.size());
  graph.edge_scores = MatrixR::Zero(k, k);
  if (k > 1) {
    std::vector<std::pair<int, int>> pairs, row_pairs;
    for (int a = 0; a < k; ++a) {
      for (int b = a + 1; b < k; ++b) {
        pairs.emplace_back(a, b);
        row_pairs.emplace_back(rows[static_cast<std::size_t>(a)], rows[static_cast<std::size_t>(b)]);
      }
    }
    const VectorR probs = sigmoid<Real>(coref_logits(enc.spans_fused, row_pairs).value().col(0));
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      graph.edge_scores(pairs[p].first, pairs[p].second) = probs(static_cast<Eigen::Index>(p));
      graph.edge_scores(pairs[p].second, pairs[p].first) = probs(static_cast<Eigen::Index>(p));
    }
  }
  const auto clusters = resolve_coreference(graph, config_.coref_threshold);

  std::vector<std::vector<int>> cluster_rows;
  for (const auto& c : clusters) {
    std::vector<int> r;
    for (const auto& s : c) r.push_back(enc.row_of(s));
    cluster_rows.push_back(std::move(r));
  }
  const auto entities = entity_representations(enc.spans_fused, cluster_rows);
  const MatrixR distributions = ad::softmax_rows_value(memory_->entity_scores(entities).value());
  const auto types = classify_entities(distributions);
  for (std::size_t c = 0; c < clusters.size(); ++c) out.clusters.push_back({clusters[c], types[c]});

  if (clusters.size() > 1) {
    const auto pairs = ordered_pairs(static_cast<int>(clusters.size()));
    const auto reps = pair_representations(enc.spans_fused, entities, cluster_rows, pairs);
    const MatrixR probs = memory_->relation_scores(reps).value().unaryExpr([](Real z) { return ad::stable_sigmoid(z); });
    out.relations = classify_relations(pairs, probs, config_.relation_threshold);
  }
  return out;
}

}  // namespace memre
