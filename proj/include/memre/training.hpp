#ifndef MEMRE_TRAINING_HPP
#define MEMRE_TRAINING_HPP

#include "memre/autodiff.hpp"
#include "memre/corpus.hpp"
#include "memre/evaluation.hpp"
#include "memre/pipeline.hpp"
#include "memre/random.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace memre {

struct LossWeights {
  double mention = 1.0;
  double coref = 1.0;
  double entity = 1.0;
  double relation = 1.0;
};

struct LossBreakdown {
  Real mention = 0;
  Real coref = 0;
  Real entity = 0;
  Real relation = 0;
  Real joint = 0;

  nlohmann::json to_json() const;
};

struct TrainConfig {
  LossWeights beta;
  int batch_size = 2;
  double learning_rate = 5e-5;
  double warmup_fraction_lr = 0.1;
  int epochs = 20;
  double memory_warmup_proportion = 0.0;
  bool memory_read_gradient = false;
  std::uint64_t seed = 1;
  std::string optimizer = "adamw";
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double grad_clip = 1.0;  // global norm; <= 0 disables
  int max_negatives = 0;   // per document for mention/coref/relation losses; 0 keeps all

  void validate() const;
};

/// Differentiable loss terms for one batch (each 1x1) plus their values.
struct LossTerms {
  ad::Var<Real> mention, coref, entity, relation, joint;

  LossBreakdown values() const;
};

/// Builds all four losses under teacher forcing (gold mentions and clusters
/// feed the coreference, entity and relation heads), averaged over the batch
/// and combined as beta_M L_M + beta_C L_C + beta_E L_E + beta_R L_R.
/// `sampling` is only used when max_negatives > 0.
LossTerms build_losses(ad::Tape<Real>& tape, const Model& model, std::span<const Document> batch,
                       const LossWeights& beta, int max_negatives = 0, Rng* sampling = nullptr);

/// Forward-only loss evaluation. Throws NumericalError on a non-finite loss.
LossBreakdown compute_losses(const Model& model, std::span<const Document> batch, const TrainConfig& config);

/// Linear warm-up from 0 to base_lr over round(warmup_fraction * total) steps,
/// then linear decay to 0 at total_steps.
double lr_at(long step, long total_steps, double base_lr, double warmup_fraction = 0.1);

enum class MemoryStage { warmup, full };
std::string to_string(MemoryStage stage);

/// `warmup` while step < proportion * total_steps, `full` afterwards.
MemoryStage memory_stage(long step, long total_steps, double proportion);

/// Decoupled weight decay Adam.
class AdamW {
 public:
  AdamW(ad::ParameterStore<Real>& store, double beta1, double beta2, double epsilon, double weight_decay);
  void step(double lr);
  long steps() const { return t_; }

 private:
  ad::ParameterStore<Real>& store_;
  double beta1_, beta2_, epsilon_, weight_decay_;
  long t_ = 0;
  std::vector<MatrixR> m_, v_;
};

/// Scales all gradients so their global L2 norm is at most max_norm; returns
/// the norm before clipping.
double clip_gradients(ad::ParameterStore<Real>& store, double max_norm);

struct EpochMetrics {
  int epoch = 0;
  long step = 0;
  LossBreakdown loss;  // mean over batches
  double lr = 0;
  std::string stage;
  std::optional<double> dev_f1;
  double selection_f1 = 0;

  nlohmann::json to_json() const;
};

struct StepInfo {
  int epoch;
  long step;
  long total_steps;
  MemoryStage stage;
  double lr;
  LossBreakdown loss;
};

struct TrainCallbacks {
  /// Called after backward and before clipping/update; gradients are live.
  std::function<void(const StepInfo&, const Model&)> on_step;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochMetrics> log;
  int best_epoch = 0;  // 0: initial parameters retained
  double best_f1 = 0;
  long total_steps = 0;
};

/// Runs `config.epochs` epochs of seeded shuffled mini-batches. After every
/// epoch the model is scored (strict F1) on `dev`, or on `train` when `dev`
/// is empty, and the best-scoring parameters are restored at the end.
TrainResult train(Model& model, const std::vector<Document>& train_docs, const std::vector<Document>& dev_docs,
                  const TrainConfig& config, const TrainCallbacks& callbacks = {}, EvalOptions eval = {});

/// Predicts every document and scores against its gold annotations.
MetricReport evaluate_model(const Model& model, const std::vector<Document>& docs, EvalOptions eval = {});

}  // namespace memre

#endif  // MEMRE_TRAINING_HPP
