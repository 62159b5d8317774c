#include "memre/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>

namespace memre {

using nlohmann::json;

SplitSpec DataConfig::split_spec() const {
  if (split_file) return *split_file;
  return split_ratios;
}

namespace {

using Setter = std::function<void(RunConfig&, const json&, const std::filesystem::path&)>;
using Getter = std::function<json(const RunConfig&)>;

struct Field {
  Setter set;
  Getter get;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

template <typename T, typename Member>
Field plain(Member member) {
  return {[member](RunConfig& c, const json& v, const std::filesystem::path&) { std::invoke(member, c) = v.get<T>(); },
          [member](const RunConfig& c) {
            RunConfig copy = c;
            return json(std::invoke(member, copy));
          }};
}

Field read_flag(InputKind i, MemoryKind j) {
  const auto ii = static_cast<std::size_t>(i), jj = static_cast<std::size_t>(j);
  return {[ii, jj](RunConfig& c, const json& v, const std::filesystem::path&) {
            c.model.memory.read_enabled[ii][jj] = v.get<bool>();
          },
          [ii, jj](const RunConfig& c) { return json(c.model.memory.read_enabled[ii][jj]); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> f;
    f["data.corpus"] = {[](RunConfig& c, const json& v, const std::filesystem::path& b) {
                          c.data.corpus = resolve(b, v.get<std::string>());
                        },
                        [](const RunConfig& c) { return json(c.data.corpus.string()); }};
    f["data.split_file"] = {[](RunConfig& c, const json& v, const std::filesystem::path& b) {
                              if (v.is_null()) c.data.split_file.reset();
                              else c.data.split_file = resolve(b, v.get<std::string>());
                            },
                            [](const RunConfig& c) {
                              return c.data.split_file ? json(c.data.split_file->string()) : json(nullptr);
                            }};
    f["data.split_ratios"] = {[](RunConfig& c, const json& v, const std::filesystem::path&) {
                                const auto r = v.get<std::vector<double>>();
                                if (r.size() != 3) throw ConfigError("data.split_ratios must have three entries");
                                c.data.split_ratios = {r[0], r[1], r[2]};
                              },
                              [](const RunConfig& c) {
                                return json::array({c.data.split_ratios.train, c.data.split_ratios.dev, c.data.split_ratios.test});
                              }};
    f["data.vocabulary"] = {[](RunConfig& c, const json& v, const std::filesystem::path& b) {
                              if (v.is_null()) c.data.vocabulary.reset();
                              else c.data.vocabulary = resolve(b, v.get<std::string>());
                            },
                            [](const RunConfig& c) {
                              return c.data.vocabulary ? json(c.data.vocabulary->string()) : json(nullptr);
                            }};
    f["output.dir"] = {[](RunConfig& c, const json& v, const std::filesystem::path& b) {
                         c.output_dir = resolve(b, v.get<std::string>());
                       },
                       [](const RunConfig& c) { return json(c.output_dir.string()); }};

    f["encoder.kind"] = {[](RunConfig& c, const json& v, const std::filesystem::path&) {
                           const auto s = v.get<std::string>();
                           if (s == "toy") c.model.encoder.kind = EncoderKind::toy;
                           else if (s == "external") c.model.encoder.kind = EncoderKind::external;
                           else throw ConfigError("encoder.kind must be 'toy' or 'external'");
                         },
                         [](const RunConfig& c) {
                           return json(c.model.encoder.kind == EncoderKind::toy ? "toy" : "external");
                         }};
    f["encoder.h"] = plain<int>([](RunConfig& c) -> auto& { return c.model.encoder.embedding_size; });
    f["encoder.L_max"] = plain<int>([](RunConfig& c) -> auto& { return c.model.encoder.max_span_length; });
    f["encoder.context_layers"] = plain<int>([](RunConfig& c) -> auto& { return c.model.encoder.context_layers; });
    f["encoder.vocab_size"] = plain<int>([](RunConfig& c) -> auto& { return c.model.encoder.vocab_size; });

    f["memory.s_E"] = plain<int>([](RunConfig& c) -> auto& { return c.model.memory.entity_slot_size; });
    f["memory.s_R"] = plain<int>([](RunConfig& c) -> auto& { return c.model.memory.relation_slot_size; });
    f["memory.read_TE"] = read_flag(InputKind::tokens, MemoryKind::entity);
    f["memory.read_TR"] = read_flag(InputKind::tokens, MemoryKind::relation);
    f["memory.read_SE"] = read_flag(InputKind::spans, MemoryKind::entity);
    f["memory.read_SR"] = read_flag(InputKind::spans, MemoryKind::relation);

    f["model.h_e"] = plain<int>([](RunConfig& c) -> auto& { return c.model.entity_size; });
    f["model.h_p"] = plain<int>([](RunConfig& c) -> auto& { return c.model.pair_size; });
    f["model.coref_hidden"] = plain<int>([](RunConfig& c) -> auto& { return c.model.coref_hidden; });
    f["model.relation_head"] = {[](RunConfig& c, const json& v, const std::filesystem::path&) {
                                  c.model.relation_head = relation_head_from_string(v.get<std::string>());
                                },
                                [](const RunConfig& c) { return json(to_string(c.model.relation_head)); }};
    f["model.tau_mention"] = plain<double>([](RunConfig& c) -> auto& { return c.model.mention_threshold; });
    f["model.tau_coref"] = plain<double>([](RunConfig& c) -> auto& { return c.model.coref_threshold; });
    f["model.tau_rel"] = plain<double>([](RunConfig& c) -> auto& { return c.model.relation_threshold; });

    f["train.beta_M"] = plain<double>([](RunConfig& c) -> auto& { return c.train.beta.mention; });
    f["train.beta_C"] = plain<double>([](RunConfig& c) -> auto& { return c.train.beta.coref; });
    f["train.beta_E"] = plain<double>([](RunConfig& c) -> auto& { return c.train.beta.entity; });
    f["train.beta_R"] = plain<double>([](RunConfig& c) -> auto& { return c.train.beta.relation; });
    f["train.batch_size"] = plain<int>([](RunConfig& c) -> auto& { return c.train.batch_size; });
    f["train.learning_rate"] = plain<double>([](RunConfig& c) -> auto& { return c.train.learning_rate; });
    f["train.warmup_fraction_lr"] = plain<double>([](RunConfig& c) -> auto& { return c.train.warmup_fraction_lr; });
    f["train.epochs"] = plain<int>([](RunConfig& c) -> auto& { return c.train.epochs; });
    f["train.memory_warmup_proportion"] =
        plain<double>([](RunConfig& c) -> auto& { return c.train.memory_warmup_proportion; });
    f["train.memory_read_gradient"] = plain<bool>([](RunConfig& c) -> auto& { return c.train.memory_read_gradient; });
    f["train.seed"] = plain<std::uint64_t>([](RunConfig& c) -> auto& { return c.train.seed; });
    f["train.optimizer"] = plain<std::string>([](RunConfig& c) -> auto& { return c.train.optimizer; });
    f["train.weight_decay"] = plain<double>([](RunConfig& c) -> auto& { return c.train.weight_decay; });
    f["train.grad_clip"] = plain<double>([](RunConfig& c) -> auto& { return c.train.grad_clip; });
    f["train.max_negatives"] = plain<int>([](RunConfig& c) -> auto& { return c.train.max_negatives; });

    f["eval.strict_entity_types"] = plain<bool>([](RunConfig& c) -> auto& { return c.eval.strict_entity_types; });
    return f;
  }();
  return table;
}

}  // namespace

RunConfig RunConfig::from_json(const json& flat, const std::filesystem::path& base_dir) {
  if (!flat.is_object()) throw ConfigError("config must be a flat JSON object");
  RunConfig c;
  const auto& table = fields();
  for (const auto& [key, value] : flat.items()) {
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    try {
      it->second.set(c, value, base_dir);
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

json RunConfig::to_json() const {
  json j = json::object();
  for (const auto& [key, field] : fields()) j[key] = field.get(*this);
  return j;
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (!data.split_file) {
    const auto& r = data.split_ratios;
    if (r.train < 0 || r.dev < 0 || r.test < 0 || std::abs(r.train + r.dev + r.test - 1.0) > 1e-6)
      throw ConfigError("data.split_ratios must be non-negative and sum to 1");
  }
}

}  // namespace memre
