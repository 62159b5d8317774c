#include "memre/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace memre {

nlohmann::json LossBreakdown::to_json() const {
  return {{"L_M", mention}, {"L_C", coref}, {"L_E", entity}, {"L_R", relation}, {"L_joint", joint}};
}

void TrainConfig::validate() const {
  if (beta.mention < 0 || beta.coref < 0 || beta.entity < 0 || beta.relation < 0)
    throw ConfigError("loss weights must be non-negative");
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (!(learning_rate >= 0)) throw ConfigError("train.learning_rate must be non-negative");
  if (!(warmup_fraction_lr >= 0 && warmup_fraction_lr <= 1)) throw ConfigError("train.warmup_fraction_lr must lie in [0, 1]");
  if (epochs < 0) throw ConfigError("train.epochs must be non-negative");
  if (!(memory_warmup_proportion >= 0 && memory_warmup_proportion <= 1))
    throw ConfigError("train.memory_warmup_proportion must lie in [0, 1]");
  if (optimizer != "adamw") throw ConfigError("train.optimizer must be 'adamw'");
  if (weight_decay < 0) throw ConfigError("train.weight_decay must be non-negative");
  if (max_negatives < 0) throw ConfigError("train.max_negatives must be non-negative");
}

LossBreakdown LossTerms::values() const {
  return {mention.scalar(), coref.scalar(), entity.scalar(), relation.scalar(), joint.scalar()};
}

namespace {

// Keeps every positive and at most `cap` negatives (cap 0 keeps all).
std::vector<int> sample_rows(const std::vector<bool>& positive, int cap, Rng* rng) {
  std::vector<int> pos, neg;
  for (std::size_t i = 0; i < positive.size(); ++i) (positive[i] ? pos : neg).push_back(static_cast<int>(i));
  if (cap > 0 && static_cast<int>(neg.size()) > cap) {
    if (rng == nullptr) throw std::logic_error("negative sampling requires a generator");
    rng->shuffle(neg);
    neg.resize(static_cast<std::size_t>(cap));
  }
  pos.insert(pos.end(), neg.begin(), neg.end());
  std::sort(pos.begin(), pos.end());
  return pos;
}

struct DocumentLosses {
  ad::Var<Real> mention, coref, entity, relation;
};

DocumentLosses document_losses(ad::Tape<Real>& tape, const Model& model, const Document& doc, int max_negatives,
                               Rng* sampling) {
  auto zero = [&] { return tape.constant(MatrixR::Zero(1, 1)); };

  std::vector<Span> gold_spans = doc.mentions();
  std::sort(gold_spans.begin(), gold_spans.end());
  gold_spans.erase(std::unique(gold_spans.begin(), gold_spans.end()), gold_spans.end());
  const std::set<Span> gold_set(gold_spans.begin(), gold_spans.end());

  const auto enc = model.encode(tape, doc, gold_spans);
  DocumentLosses out;

  // Mention detection over candidate spans; gold spans beyond L_max are
  // unreachable and only enter through the downstream heads.
  {
    std::vector<bool> positive;
    for (int i = 0; i < enc.num_candidates; ++i) positive.push_back(gold_set.count(enc.span_list[static_cast<std::size_t>(i)]) > 0);
    const auto rows = sample_rows(positive, max_negatives, sampling);
    MatrixR targets(static_cast<Eigen::Index>(rows.size()), 1);
    for (std::size_t k = 0; k < rows.size(); ++k) targets(static_cast<Eigen::Index>(k), 0) = positive[static_cast<std::size_t>(rows[k])] ? 1 : 0;
    auto logits = ad::gather_rows(model.mention_logits(enc.spans_fused), rows);
    out.mention = ad::scale(ad::bce_with_logits(logits, targets), Real(1) / static_cast<Real>(rows.size()));
  }

  std::vector<std::vector<int>> cluster_rows;
  std::vector<std::pair<int, int>> records;  // (span row, cluster)
  for (std::size_t c = 0; c < doc.clusters.size(); ++c) {
    std::vector<int> rows;
    for (const auto& m : doc.clusters[c].mentions) {
      rows.push_back(enc.row_of(m));
      records.emplace_back(rows.back(), static_cast<int>(c));
    }
    cluster_rows.push_back(std::move(rows));
  }

  // Coreference over gold mention pairs.
  {
    std::vector<std::pair<int, int>> pairs;
    std::vector<bool> same;
    for (std::size_t a = 0; a < records.size(); ++a) {
      for (std::size_t b = a + 1; b < records.size(); ++b) {
        if (records[a].first == records[b].first) continue;
        pairs.emplace_back(records[a].first, records[b].first);
        same.push_back(records[a].second == records[b].second);
      }
    }
    const auto keep = sample_rows(same, max_negatives, sampling);
    if (keep.empty()) {
      out.coref = zero();
    } else {
      std::vector<std::pair<int, int>> kept;
      MatrixR targets(static_cast<Eigen::Index>(keep.size()), 1);
      for (std::size_t k = 0; k < keep.size(); ++k) {
        kept.push_back(pairs[static_cast<std::size_t>(keep[k])]);
        targets(static_cast<Eigen::Index>(k), 0) = same[static_cast<std::size_t>(keep[k])] ? 1 : 0;
      }
      out.coref = ad::scale(ad::bce_with_logits(model.coref_logits(enc.spans_fused, kept), targets),
                            Real(1) / static_cast<Real>(keep.size()));
    }
  }

  if (doc.clusters.empty()) {
    out.entity = zero();
    out.relation = zero();
    return out;
  }

  const auto entities = model.entity_representations(enc.spans_fused, cluster_rows);
  {
    std::vector<int> types;
    for (const auto& c : doc.clusters) types.push_back(c.entity_type);
    out.entity = ad::scale(ad::softmax_cross_entropy(model.memory().entity_scores(entities), std::move(types)),
                           Real(1) / static_cast<Real>(doc.clusters.size()));
  }

  const int k_r = model.vocabulary().num_relation_types();
  const auto all_pairs = ordered_pairs(static_cast<int>(doc.clusters.size()));
  if (all_pairs.empty()) {
    out.relation = zero();
    return out;
  }
  std::set<std::pair<int, int>> related;
  for (const auto& r : doc.relations) related.insert({r.head, r.tail});
  std::vector<bool> has_relation;
  for (const auto& p : all_pairs) has_relation.push_back(related.count(p) > 0);
  const auto keep = sample_rows(has_relation, max_negatives, sampling);
  std::vector<std::pair<int, int>> pairs;
  for (int k : keep) pairs.push_back(all_pairs[static_cast<std::size_t>(k)]);
  MatrixR targets = MatrixR::Zero(static_cast<Eigen::Index>(pairs.size()), k_r);
  for (const auto& r : doc.relations) {
    auto it = std::find(pairs.begin(), pairs.end(), std::make_pair(r.head, r.tail));
    if (it != pairs.end()) targets(static_cast<Eigen::Index>(it - pairs.begin()), r.relation_type) = 1;
  }
  auto scores = model.memory().relation_scores(model.pair_representations(enc.spans_fused, entities, cluster_rows, pairs));
  out.relation = ad::scale(ad::bce_with_logits(scores, targets), Real(1) / static_cast<Real>(targets.size()));
  return out;
}

}  // namespace

LossTerms build_losses(ad::Tape<Real>& tape, const Model& model, std::span<const Document> batch, const LossWeights& beta,
                       int max_negatives, Rng* sampling) {
  if (batch.empty()) throw std::invalid_argument("build_losses: empty batch");
  std::vector<ad::Var<Real>> mention, coref, entity, relation;
  for (const auto& doc : batch) {
    auto l = document_losses(tape, model, doc, max_negatives, sampling);
    mention.push_back(l.mention);
    coref.push_back(l.coref);
    entity.push_back(l.entity);
    relation.push_back(l.relation);
  }
  const Real inv = Real(1) / static_cast<Real>(batch.size());
  auto mean = [&](const std::vector<ad::Var<Real>>& v) { return ad::scale(ad::sum(ad::vconcat(v)), inv); };
  LossTerms t;
  t.mention = mean(mention);
  t.coref = mean(coref);
  t.entity = mean(entity);
  t.relation = mean(relation);
  t.joint = ad::add(ad::add(ad::scale(t.mention, Real(beta.mention)), ad::scale(t.coref, Real(beta.coref))),
                    ad::add(ad::scale(t.entity, Real(beta.entity)), ad::scale(t.relation, Real(beta.relation))));
  return t;
}

LossBreakdown compute_losses(const Model& model, std::span<const Document> batch, const TrainConfig& config) {
  ad::Tape<Real> tape(false);
  Rng sampling(SeedSet::from_master(config.seed).sampling);
  const auto values = build_losses(tape, model, batch, config.beta, config.max_negatives, &sampling).values();
  if (!std::isfinite(values.joint)) throw NumericalError("non-finite loss");
  return values;
}

double lr_at(long step, long total_steps, double base_lr, double warmup_fraction) {
  if (total_steps <= 0) throw std::invalid_argument("lr_at: total_steps must be positive");
  if (step < 0 || step > total_steps) throw std::invalid_argument("lr_at: step outside [0, total_steps]");
  const long warm = std::llround(warmup_fraction * static_cast<double>(total_steps));
  // Ratio first so the ramp end and decay start are exactly base_lr.
  if (step < warm || warm == total_steps) return base_lr * (static_cast<double>(step) / static_cast<double>(warm));
  return base_lr * (static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warm));
}

std::string to_string(MemoryStage stage) { return stage == MemoryStage::warmup ? "warmup" : "full"; }

MemoryStage memory_stage(long step, long total_steps, double proportion) {
  return static_cast<double>(step) < proportion * static_cast<double>(total_steps) ? MemoryStage::warmup
                                                                                   : MemoryStage::full;
}

AdamW::AdamW(ad::ParameterStore<Real>& store, double beta1, double beta2, double epsilon, double weight_decay)
    : store_(store), beta1_(beta1), beta2_(beta2), epsilon_(epsilon), weight_decay_(weight_decay) {
  for (std::size_t i = 0; i < store_.size(); ++i) {
    m_.push_back(MatrixR::Zero(store_[i].value.rows(), store_[i].value.cols()));
    v_.push_back(MatrixR::Zero(store_[i].value.rows(), store_[i].value.cols()));
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < store_.size(); ++i) {
    auto& p = store_[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    if (lr == 0.0) continue;
    const MatrixR update = ((m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + epsilon_)).matrix();
    p.value -= lr * (update + weight_decay_ * p.value);
  }
}

double clip_gradients(ad::ParameterStore<Real>& store, double max_norm) {
  double sq = 0;
  for (std::size_t i = 0; i < store.size(); ++i) sq += store[i].grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (std::size_t i = 0; i < store.size(); ++i) store[i].grad *= s;
  }
  return norm;
}

nlohmann::json EpochMetrics::to_json() const {
  nlohmann::json j = {{"epoch", epoch}, {"step", step},   {"loss", loss.to_json()},
                      {"lr", lr},       {"stage", stage}, {"selection_f1", selection_f1}};
  j["dev_f1"] = dev_f1 ? nlohmann::json(*dev_f1) : nlohmann::json(nullptr);
  return j;
}

MetricReport evaluate_model(const Model& model, const std::vector<Document>& docs, EvalOptions eval) {
  Evaluator ev(eval);
  for (const auto& d : docs) ev.add(model.predict(d), d);
  return ev.report();
}

namespace {

std::string parameter_norms(const Model& model) {
  std::ostringstream os;
  const auto& store = model.parameters();
  for (std::size_t i = 0; i < store.size(); ++i) {
    os << "\n  " << store[i].name << ": |w|=" << store[i].value.norm() << " |g|=" << store[i].grad.norm();
  }
  return os.str();
}

}  // namespace

TrainResult train(Model& model, const std::vector<Document>& train_docs, const std::vector<Document>& dev_docs,
                  const TrainConfig& config, const TrainCallbacks& callbacks, EvalOptions eval) {
  config.validate();
  if (train_docs.empty()) throw ValidationError("train: empty training split");
  TrainResult result;
  if (config.epochs == 0) return result;

  const auto seeds = SeedSet::from_master(config.seed);
  Rng shuffle_rng(seeds.shuffle);
  Rng sampling_rng(seeds.sampling);

  const long batches_per_epoch =
      (static_cast<long>(train_docs.size()) + config.batch_size - 1) / static_cast<long>(config.batch_size);
  result.total_steps = batches_per_epoch * config.epochs;

  auto& store = model.parameters();
  AdamW optimizer(store, config.adam_beta1, config.adam_beta2, config.adam_epsilon, config.weight_decay);
  model.memory().set_read_gradient(config.memory_read_gradient);

  const auto& selection = dev_docs.empty() ? train_docs : dev_docs;
  std::vector<MatrixR> best;
  bool best_bypass = false;
  result.best_f1 = -std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train_docs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  long step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    LossBreakdown sum;
    double lr = 0;
    MemoryStage stage = MemoryStage::full;
    for (long b = 0; b < batches_per_epoch; ++b, ++step) {
      std::vector<Document> batch;
      for (long k = b * config.batch_size; k < std::min<long>((b + 1) * config.batch_size, static_cast<long>(order.size())); ++k)
        batch.push_back(train_docs[order[static_cast<std::size_t>(k)]]);

      stage = memory_stage(step, result.total_steps, config.memory_warmup_proportion);
      model.memory().set_bypass(stage == MemoryStage::warmup);
      lr = lr_at(step, result.total_steps, config.learning_rate, config.warmup_fraction_lr);

      store.zero_grad();
      ad::Tape<Real> tape;
      const auto terms = build_losses(tape, model, batch, config.beta, config.max_negatives, &sampling_rng);
      const auto values = terms.values();
      if (!std::isfinite(values.joint)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                             " (step " + std::to_string(step) + "); parameter norms:" + parameter_norms(model));
      }
      tape.backward(terms.joint);
      store.collect_gradients(tape);
      if (callbacks.on_step) callbacks.on_step({epoch, step, result.total_steps, stage, lr, values}, model);
      clip_gradients(store, config.grad_clip);
      optimizer.step(lr);

      sum.mention += values.mention;
      sum.coref += values.coref;
      sum.entity += values.entity;
      sum.relation += values.relation;
      sum.joint += values.joint;
    }
    model.memory().set_bypass(false);

    EpochMetrics m;
    m.epoch = epoch;
    m.step = step;
    const Real inv = Real(1) / static_cast<Real>(batches_per_epoch);
    m.loss = {sum.mention * inv, sum.coref * inv, sum.entity * inv, sum.relation * inv, sum.joint * inv};
    m.lr = lr;
    m.stage = to_string(stage);
    // Score with the read path as it was last trained.
    const bool bypass = stage == MemoryStage::warmup;
    model.memory().set_bypass(bypass);
    m.selection_f1 = evaluate_model(model, selection, eval).strict.f1;
    model.memory().set_bypass(false);
    if (!dev_docs.empty()) m.dev_f1 = m.selection_f1;
    if (m.selection_f1 > result.best_f1) {
      result.best_f1 = m.selection_f1;
      result.best_epoch = epoch;
      best = store.snapshot();
      best_bypass = bypass;
    }
    if (callbacks.on_epoch) callbacks.on_epoch(m);
    result.log.push_back(m);
  }
  store.restore(best);
  model.memory().set_bypass(best_bypass);
  return result;
}

}  // namespace memre
