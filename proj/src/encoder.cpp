#include "memre/encoder.hpp"

#include <cctype>
#include <cmath>
#include <map>

namespace memre {

void EncoderConfig::validate() const {
  if (embedding_size <= 0) throw ConfigError("encoder.h must be positive");
  if (max_span_length < 1) throw ConfigError("encoder.L_max must be at least 1");
  if (context_layers < 0) throw ConfigError("encoder.context_layers must be non-negative");
  if (vocab_size < 1) throw ConfigError("encoder.vocab_size must be at least 1");
}

namespace {

std::string lowercase(const std::string& s) {
  std::string out = s;
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

Tokenizer::Tokenizer() : words_{"<unk>"} {}

Tokenizer Tokenizer::build(const std::vector<Document>& docs, int vocab_size) {
  std::map<std::string, long> counts;
  for (const auto& d : docs) {
    for (const auto& t : d.tokens) ++counts[lowercase(t)];
  }
  std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Tokenizer tok;
  for (const auto& [w, _] : ranked) {
    if (tok.size() >= vocab_size) break;
    tok.index_.emplace(w, tok.size());
    tok.words_.push_back(w);
  }
  return tok;
}

int Tokenizer::id(const std::string& token) const {
  auto it = index_.find(lowercase(token));
  return it == index_.end() ? kUnknown : it->second;
}

std::vector<int> Tokenizer::encode(const Document& doc) const {
  std::vector<int> ids;
  ids.reserve(doc.tokens.size());
  for (const auto& t : doc.tokens) ids.push_back(id(t));
  return ids;
}

nlohmann::json Tokenizer::to_json() const { return words_; }

Tokenizer Tokenizer::from_json(const nlohmann::json& j) {
  Tokenizer tok;
  const auto words = j.get<std::vector<std::string>>();
  if (words.empty()) throw ParseError("tokenizer vocabulary is empty");
  tok.words_ = words;
  tok.index_.clear();
  for (std::size_t i = 1; i < words.size(); ++i) tok.index_.emplace(words[i], static_cast<int>(i));
  return tok;
}

std::vector<Span> enumerate_spans(const std::vector<Span>& sentences, int max_len) {
  std::vector<Span> out;
  for (const auto& s : sentences) {
    for (int start = s.start; start < s.end; ++start) {
      for (int len = 1; len <= max_len && start + len <= s.end; ++len) out.push_back({start, start + len});
    }
  }
  return out;
}

std::vector<Span> enumerate_spans(int n, int max_len) { return enumerate_spans(std::vector<Span>{{0, n}}, max_len); }

namespace {

MatrixR uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double bound) {
  MatrixR m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

}  // namespace

ToyEncoder::ToyEncoder(ad::ParameterStore<Real>& store, const EncoderConfig& config, Tokenizer tokenizer, Rng& rng)
    : config_(config), tokenizer_(std::move(tokenizer)) {
  config_.validate();
  const int h = config_.embedding_size;
  embedding_ = &store.add("encoder.token_embedding", uniform_matrix(rng, tokenizer_.size(), h, 1.0));
  for (int l = 0; l < config_.context_layers; ++l) {
    const double bound = std::sqrt(6.0 / (4.0 * h));
    weights_.push_back(&store.add("encoder.context." + std::to_string(l) + ".weight", uniform_matrix(rng, 3 * h, h, bound)));
    biases_.push_back(&store.add("encoder.context." + std::to_string(l) + ".bias", MatrixR::Zero(1, h)));
  }
}

ad::Var<Real> ToyEncoder::encode(ad::Tape<Real>& tape, const Document& doc) const {
  if (doc.tokens.empty()) throw ValidationError(doc.doc_id + ": cannot encode an empty document");
  ad::Var<Real> x = ad::gather_rows(tape.parameter(*embedding_), tokenizer_.encode(doc));
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    auto context = ad::hconcat<Real>({ad::shift_rows(x, -1), x, ad::shift_rows(x, 1)});
    x = ad::tanh(ad::add_row(ad::matmul(context, tape.parameter(*weights_[l])), tape.parameter(*biases_[l])));
  }
  return x;
}

MatrixR encode_tokens(const TokenEncoder& encoder, const Document& doc) {
  ad::Tape<Real> tape(false);
  return encoder.encode(tape, doc).value();
}

ad::Var<Real> pool_spans(const ad::Var<Real>& tokens, const std::vector<Span>& spans, const ad::Var<Real>& width_table) {
  std::vector<std::vector<int>> groups;
  std::vector<int> widths;
  groups.reserve(spans.size());
  const int table_rows = static_cast<int>(width_table.rows());
  for (const auto& s : spans) {
    if (s.start < 0 || s.end > tokens.rows() || s.start >= s.end) throw ValidationError("pool_spans: span out of bounds");
    std::vector<int> rows;
    for (int t = s.start; t < s.end; ++t) rows.push_back(t);
    groups.push_back(std::move(rows));
    widths.push_back(width_bucket(s, table_rows));
  }
  return ad::add(ad::max_pool_groups(tokens, groups), ad::gather_rows(width_table, std::move(widths)));
}

}  // namespace memre
