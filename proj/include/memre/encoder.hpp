#ifndef MEMRE_ENCODER_HPP
#define MEMRE_ENCODER_HPP

#include "memre/autodiff.hpp"
#include "memre/corpus.hpp"
#include "memre/random.hpp"
#include "memre/types.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace memre {

enum class EncoderKind { toy, external };

struct EncoderConfig {
  int embedding_size = 32;   // h
  int max_span_length = 4;   // L_max
  EncoderKind kind = EncoderKind::toy;
  int context_layers = 1;
  int vocab_size = 5000;     // including UNK

  void validate() const;
};

/// Lowercased whitespace-identity tokenizer over pre-tokenized text. Id 0 is
/// reserved for unknown tokens.
class Tokenizer {
 public:
  static constexpr int kUnknown = 0;

  Tokenizer();
  /// Keeps the `vocab_size - 1` most frequent lowercased tokens; ties broken
  /// lexicographically.
  static Tokenizer build(const std::vector<Document>& docs, int vocab_size);

  int id(const std::string& token) const;
  std::vector<int> encode(const Document& doc) const;
  int size() const { return static_cast<int>(words_.size()); }

  nlohmann::json to_json() const;
  static Tokenizer from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

/// All spans of length 1..max_len inside each sentence, sorted by (start, end).
std::vector<Span> enumerate_spans(const std::vector<Span>& sentences, int max_len);
/// Single-sentence form over [0, n).
std::vector<Span> enumerate_spans(int n, int max_len);

/// Width-embedding row used for a span; spans longer than the table clamp to
/// its last row.
inline int width_bucket(const Span& span, int table_rows) { return std::min(span.length(), table_rows) - 1; }

/// Element-wise max over the token rows of `span` plus its width embedding.
template <typename Scalar>
RowVector<Scalar> pool_span(const Matrix<Scalar>& tokens, const Span& span, const Matrix<Scalar>& width_table) {
  if (span.start < 0 || span.end > tokens.rows() || span.start >= span.end)
    throw ValidationError("pool_span: span out of bounds");
  RowVector<Scalar> out = tokens.middleRows(span.start, span.length()).colwise().maxCoeff();
  out += width_table.row(width_bucket(span, static_cast<int>(width_table.rows())));
  return out;
}

/// Contract for token encoders: token sequence in, n x h matrix out.
class TokenEncoder {
 public:
  virtual ~TokenEncoder() = default;
  virtual int embedding_size() const = 0;
  virtual ad::Var<Real> encode(ad::Tape<Real>& tape, const Document& doc) const = 0;
};

/// Token embedding lookup followed by `context_layers` rounds of
///   X <- tanh([shift_down(X), X, shift_up(X)] W + b)
/// where neighbours outside the document are zero rows.
class ToyEncoder final : public TokenEncoder {
 public:
  ToyEncoder(ad::ParameterStore<Real>& store, const EncoderConfig& config, Tokenizer tokenizer, Rng& rng);

  int embedding_size() const override { return config_.embedding_size; }
  ad::Var<Real> encode(ad::Tape<Real>& tape, const Document& doc) const override;

  const Tokenizer& tokenizer() const { return tokenizer_; }

 private:
  EncoderConfig config_;
  Tokenizer tokenizer_;
  ad::Parameter<Real>* embedding_;
  std::vector<ad::Parameter<Real>*> weights_;
  std::vector<ad::Parameter<Real>*> biases_;
};

/// Pure evaluation of encoder output X_T (no gradient recording).
MatrixR encode_tokens(const TokenEncoder& encoder, const Document& doc);

/// Differentiable span pooling: row i is pool_span(tokens, spans[i], width).
ad::Var<Real> pool_spans(const ad::Var<Real>& tokens, const std::vector<Span>& spans, const ad::Var<Real>& width_table);

}  // namespace memre

#endif  // MEMRE_ENCODER_HPP
