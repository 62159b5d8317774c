// memre: train / evaluate / predict / convert-cdr.
//
// Exit codes: 0 success, 2 invalid input (config, data, vocabulary), 1 runtime
// failure (numerical abort, checkpoint I/O or integrity).

#include "memre/checkpoint.hpp"
#include "memre/config.hpp"
#include "memre/corpus.hpp"
#include "memre/evaluation.hpp"
#include "memre/pipeline.hpp"
#include "memre/training.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace memre;

namespace {

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

fs::path output_root(const RunConfig& config) {
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return fs::path(env);
  return config.output_dir;
}

std::vector<Document> select_split(const std::vector<Document>& docs, const RunConfig& config, const std::string& name) {
  if (name == "all") return docs;
  auto splits = split_dataset(docs, config.data.split_spec());
  return splits.by_name(name);
}

int cmd_train(const fs::path& config_path) {
  auto config = RunConfig::load(config_path);
  std::optional<TypeVocabulary> vocab;
  if (config.data.vocabulary) vocab = load_vocabulary(*config.data.vocabulary);
  auto corpus = load_docred(config.data.corpus, vocab);
  if (!corpus.annotated) throw ValidationError(config.data.corpus.string() + ": training data needs vertexSet annotations");
  auto splits = split_dataset(corpus.documents, config.data.split_spec());
  for (const auto& w : splits.warnings) std::cerr << "warning: " << w << "\n";
  if (splits.train.empty()) throw ValidationError("train split is empty");

  const fs::path out = output_root(config);
  fs::create_directories(out);
  std::ofstream log(out / "metrics.jsonl");
  if (!log) throw std::runtime_error("cannot write " + (out / "metrics.jsonl").string());

  auto tokenizer = Tokenizer::build(splits.train, config.model.encoder.vocab_size);
  const auto seeds = SeedSet::from_master(config.train.seed);
  Model model(config.model, corpus.vocabulary, std::move(tokenizer), seeds.init);

  TrainCallbacks callbacks;
  callbacks.on_epoch = [&](const EpochMetrics& m) {
    log << m.to_json().dump() << "\n";
    log.flush();
    std::cerr << "epoch " << m.epoch << " loss " << m.loss.joint << " f1 " << m.selection_f1 << "\n";
  };
  const auto result = train(model, splits.train, splits.dev, config.train, callbacks, config.eval);

  CheckpointInfo info;
  if (result.best_epoch > 0) {
    const auto& best = result.log[static_cast<std::size_t>(result.best_epoch - 1)];
    info.step = best.step;
    info.dev_f1 = best.dev_f1;
  }
  save_checkpoint(out / "checkpoint", model, config, info);

  const auto report = evaluate_model(model, splits.dev, config.eval);
  json dev = report.to_json();
  dev["best_epoch"] = result.best_epoch;
  write_json(out / "dev_report.json", dev);
  std::cout << "best epoch " << result.best_epoch << " selection strict F1 " << result.best_f1 << "\n";
  return 0;
}

int cmd_evaluate(const fs::path& checkpoint, const fs::path& data, const std::string& split, bool gold_passthrough,
                 const std::optional<fs::path>& out_path) {
  auto ckpt = load_checkpoint(checkpoint);
  auto corpus = load_docred(data, ckpt.model->vocabulary());
  if (!corpus.annotated) throw ValidationError(data.string() + ": evaluation needs gold annotations");
  const auto docs = select_split(corpus.documents, ckpt.config, split);

  Evaluator ev(ckpt.config.eval);
  for (const auto& doc : docs) ev.add(gold_passthrough ? gold_as_prediction(doc) : ckpt.model->predict(doc), doc);
  const auto report = ev.report();

  const fs::path target = out_path ? *out_path : output_root(ckpt.config) / ("eval_" + split + ".json");
  write_json(target, report.to_json());
  std::cout << "strict F1 " << report.strict.f1 << "\n";
  return 0;
}

int cmd_predict(const fs::path& checkpoint, const fs::path& data, const fs::path& out_path) {
  auto ckpt = load_checkpoint(checkpoint);
  auto corpus = load_docred(data, ckpt.model->vocabulary());

  json preds = json::array();
  std::vector<DocumentPrediction> predictions;
  for (const auto& doc : corpus.documents) {
    predictions.push_back(ckpt.model->predict(doc));
    preds.push_back(predictions.back().to_json(ckpt.model->vocabulary()));
  }
  write_json(out_path, preds);
  if (corpus.annotated) {
    const auto report = evaluate(predictions, corpus.documents, ckpt.config.eval);
    fs::path metrics = out_path;
    metrics.replace_extension(".metrics.json");
    write_json(metrics, report.to_json());
    std::cout << "strict F1 " << report.strict.f1 << "\n";
  }
  std::cout << "wrote " << predictions.size() << " predictions to " << out_path.string() << "\n";
  return 0;
}

int cmd_convert_cdr(const fs::path& in_path, const fs::path& out_path) {
  std::ifstream in(in_path);
  if (!in) throw ValidationError("cannot open " + in_path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  write_json(out_path, cdr_to_docred(buf.str()));
  return 0;
}

template <typename F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memory-enhanced joint entity and relation extraction"};
  app.require_subcommand(1);

  fs::path config_path;
  auto* train_cmd = app.add_subcommand("train", "train a model from a run config");
  train_cmd->add_option("--config", config_path, "flat JSON run config")->required();

  fs::path checkpoint, data, out;
  std::string split = "test";
  bool passthrough = false;
  std::optional<fs::path> eval_out;
  auto* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint on a data split");
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  eval_cmd->add_option("--data", data, "DocRED-style JSON corpus")->required();
  eval_cmd->add_option("--split", split, "train, dev, test or all");
  eval_cmd->add_flag("--gold-passthrough", passthrough, "score gold annotations against themselves");
  eval_cmd->add_option("--out", eval_out, "report path (default: <output>/eval_<split>.json)");

  auto* predict_cmd = app.add_subcommand("predict", "write per-document predictions");
  predict_cmd->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  predict_cmd->add_option("--data", data, "DocRED-style JSON corpus")->required();
  predict_cmd->add_option("--out", out, "prediction JSON path")->required();

  fs::path cdr_in;
  auto* cdr_cmd = app.add_subcommand("convert-cdr", "convert a PubTator CDR file to DocRED JSON");
  cdr_cmd->add_option("--in", cdr_in, "PubTator file")->required();
  cdr_cmd->add_option("--out", out, "output JSON path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*train_cmd) return guarded([&] { return cmd_train(config_path); });
  if (*eval_cmd) {
    if (split != "train" && split != "dev" && split != "test" && split != "all") {
      std::cerr << "config error: unknown split '" << split << "'\n";
      return 2;
    }
    return guarded([&] { return cmd_evaluate(checkpoint, data, split, passthrough, eval_out); });
  }
  if (*predict_cmd) return guarded([&] { return cmd_predict(checkpoint, data, out); });
  if (*cdr_cmd) return guarded([&] { return cmd_convert_cdr(cdr_in, out); });
  return 2;
}
