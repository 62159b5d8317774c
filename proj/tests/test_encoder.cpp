#include "doctest.h"

#include "memre/encoder.hpp"
#include "support.hpp"

#include <set>

using namespace memre;
using namespace memre::testing;

namespace {

std::vector<Span> brute_force_spans(const std::vector<Span>& sentences, int max_len) {
  std::set<Span> out;
  for (const auto& s : sentences)
    for (int a = s.start; a < s.end; ++a)
      for (int b = a + 1; b <= s.end; ++b)
        if (b - a <= max_len) out.insert({a, b});
  return {out.begin(), out.end()};
}

Document six_token_document() { return make_document("six", {{"the", "cat", "sat"}, {"on", "a", "mat"}}, {}); }

}  // namespace

TEST_CASE("span enumeration counts") {
  CHECK(enumerate_spans(5, 3).size() == 12);
  CHECK(enumerate_spans(7, 1).size() == 7);
  const std::vector<Span> two_sentences{{0, 2}, {2, 4}};
  const auto spans = enumerate_spans(two_sentences, 3);
  CHECK(spans.size() == 6);
  for (const auto& s : spans) CHECK((s.end <= 2 || s.start >= 2));
}

TEST_CASE("span enumeration agrees with brute force and is sorted and unique") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Span> sentences;
    int pos = 0;
    const int count = random_int(rng, 1, 4);
    for (int s = 0; s < count; ++s) {
      const int len = random_int(rng, 1, 6);
      sentences.push_back({pos, pos + len});
      pos += len;
    }
    const int max_len = random_int(rng, 1, 5);
    const auto spans = enumerate_spans(sentences, max_len);
    CHECK(spans == brute_force_spans(sentences, max_len));
    CHECK(std::is_sorted(spans.begin(), spans.end()));
    CHECK(std::adjacent_find(spans.begin(), spans.end()) == spans.end());
  }
}

TEST_CASE("pool_span is max over rows plus width embedding") {
  Rng rng(4);
  MatrixR tokens = random_matrix(rng, 5, 3);
  const MatrixR zero_width = MatrixR::Zero(3, 3);

  CHECK(pool_span(tokens, {2, 3}, zero_width).isApprox(tokens.row(2)));

  MatrixR dominated = tokens;
  dominated.row(1) = dominated.row(0).array() - 0.5;
  CHECK(pool_span(dominated, {0, 2}, zero_width).isApprox(dominated.row(0)));

  const MatrixR width = random_matrix(rng, 3, 3);
  RowVectorR expected(3);
  for (int c = 0; c < 3; ++c) expected(c) = std::max({tokens(1, c), tokens(2, c), tokens(3, c)}) + width(2, c);
  CHECK(pool_span(tokens, {1, 4}, width).isApprox(expected));

  // Longer spans share the last width row.
  CHECK(width_bucket({0, 5}, 3) == 2);
  CHECK_THROWS_AS(pool_span(tokens, {4, 6}, width), ValidationError);
}

TEST_CASE("differentiable pooling matches pool_span row by row") {
  Rng rng(5);
  const MatrixR tokens = random_matrix(rng, 6, 4);
  const MatrixR width = random_matrix(rng, 2, 4);
  const auto spans = enumerate_spans(std::vector<Span>{{0, 3}, {3, 6}}, 3);
  ad::Tape<Real> tape(false);
  const auto pooled = pool_spans(tape.constant(tokens), spans, tape.constant(width));
  REQUIRE(pooled.rows() == static_cast<Eigen::Index>(spans.size()));
  for (std::size_t i = 0; i < spans.size(); ++i)
    CHECK(pooled.value().row(static_cast<Eigen::Index>(i)).isApprox(pool_span(tokens, spans[i], width)));
}

TEST_CASE("tokenizer lowercases, caps by frequency and maps unknowns to 0") {
  const auto docs = std::vector<Document>{make_document("a", {{"B", "a", "a", "c", "b"}}, {})};
  const auto tok = Tokenizer::build(docs, 3);
  CHECK(tok.size() == 3);
  CHECK(tok.id("a") != Tokenizer::kUnknown);
  CHECK(tok.id("A") == tok.id("a"));
  CHECK(tok.id("b") != Tokenizer::kUnknown);
  CHECK(tok.id("c") == Tokenizer::kUnknown);
  CHECK(tok.id("zebra") == Tokenizer::kUnknown);
  const auto again = Tokenizer::from_json(tok.to_json());
  CHECK(again.encode(docs[0]) == tok.encode(docs[0]));
}

TEST_CASE("toy encoder output shape, finiteness and determinism") {
  const auto doc = make_document("d", {{"x", "y", "z"}}, {});
  EncoderConfig cfg;
  cfg.embedding_size = 8;
  ad::ParameterStore<Real> store;
  Rng rng(9);
  ToyEncoder enc(store, cfg, Tokenizer::build({doc}, 10), rng);
  const auto x = encode_tokens(enc, doc);
  CHECK(x.rows() == 3);
  CHECK(x.cols() == 8);
  CHECK(x.allFinite());
  CHECK(encode_tokens(enc, doc) == x);

  ad::ParameterStore<Real> store2;
  Rng rng2(9);
  ToyEncoder enc2(store2, cfg, Tokenizer::build({doc}, 10), rng2);
  CHECK(encode_tokens(enc2, doc) == x);

  Document empty;
  empty.doc_id = "empty";
  CHECK_THROWS_AS(encode_tokens(enc, empty), ValidationError);
}

TEST_CASE("encoder gradients match finite differences for every parameter group") {
  const auto doc = six_token_document();
  for (int layers : {1, 2}) {
    EncoderConfig cfg;
    cfg.embedding_size = 8;
    cfg.context_layers = layers;
    ad::ParameterStore<Real> store;
    Rng rng(21);
    ToyEncoder enc(store, cfg, Tokenizer::build({doc}, 20), rng);
    const auto check = grad_check(store, [&](ad::Tape<Real>& t) { return ad::sum(enc.encode(t, doc)); });
    INFO(check.worst);
    CHECK(check.ok());
  }
}

TEST_CASE("perturbing a parameter changes the output along the analytic direction") {
  const auto doc = six_token_document();
  EncoderConfig cfg;
  cfg.embedding_size = 4;
  ad::ParameterStore<Real> store;
  Rng rng(22);
  ToyEncoder enc(store, cfg, Tokenizer::build({doc}, 20), rng);
  Rng dir_rng(23);
  std::vector<MatrixR> direction;
  for (std::size_t i = 0; i < store.size(); ++i) direction.push_back(random_matrix(dir_rng, store[i].value.rows(), store[i].value.cols()));

  const auto probe = [&](ad::Tape<Real>& t) { return ad::sum(enc.encode(t, doc)); };
  store.zero_grad();
  {
    ad::Tape<Real> tape;
    auto l = probe(tape);
    tape.backward(l);
    store.collect_gradients(tape);
  }
  double analytic = 0;
  for (std::size_t i = 0; i < store.size(); ++i) analytic += store[i].grad.cwiseProduct(direction[i]).sum();

  const double h = 1e-4;
  auto shifted = [&](double sign) {
    for (std::size_t i = 0; i < store.size(); ++i) store[i].value += sign * h * direction[i];
    const double v = loss_value(probe);
    for (std::size_t i = 0; i < store.size(); ++i) store[i].value -= sign * h * direction[i];
    return v;
  };
  const double before = loss_value(probe);
  const double numeric = (shifted(1) - shifted(-1)) / (2 * h);
  CHECK(shifted(1) != before);
  CHECK(numeric == doctest::Approx(analytic).epsilon(1e-3));
}
