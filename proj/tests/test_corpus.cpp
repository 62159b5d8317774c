#include "doctest.h"

#include "memre/corpus.hpp"
#include "support.hpp"

#include <fstream>
#include <set>
#include <sstream>

using namespace memre;
using namespace memre::testing;
using nlohmann::json;

namespace {

const std::string kData = MEMRE_TEST_DATA;

json one_doc(json vertex_set, json labels = json::array()) {
  return json::array({{{"title", "d0"}, {"sents", {{"A", "b"}, {"c"}}}, {"vertexSet", vertex_set}, {"labels", labels}}});
}

std::vector<Document> numbered_docs(int n) {
  std::vector<Document> docs;
  for (int i = 0; i < n; ++i) docs.push_back(make_document("doc" + std::to_string(i), {{"x"}}, {{{{0, 0, 1}}, 0}}));
  return docs;
}

}  // namespace

TEST_CASE("sentence-local positions become global token indices") {
  const auto corpus = parse_docred(one_doc({{{{"sent_id", 1}, {"pos", {0, 1}}, {"type", "LOC"}}}}));
  REQUIRE(corpus.documents.size() == 1);
  const auto& d = corpus.documents[0];
  CHECK(d.size() == 3);
  REQUIRE(d.clusters.size() == 1);
  CHECK(d.clusters[0].mentions == std::vector<Span>{{2, 3}});
  CHECK(d.relations.empty());
  CHECK(d.sentences == std::vector<Span>{{0, 2}, {2, 3}});
  CHECK(corpus.vocabulary.entity_types() == std::vector<std::string>{"LOC"});
}

TEST_CASE("global index equals preceding sentence lengths plus local position") {
  const auto corpus = load_docred(kData + "/synthetic_tiny.json");
  std::ifstream in(kData + "/synthetic_tiny.json");
  const json raw = json::parse(in);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& sents = raw[i]["sents"];
    const auto& doc = corpus.documents[i];
    for (std::size_t c = 0; c < raw[i]["vertexSet"].size(); ++c) {
      std::set<Span> expected;
      for (const auto& m : raw[i]["vertexSet"][c]) {
        int offset = 0;
        for (int s = 0; s < m["sent_id"].get<int>(); ++s) offset += static_cast<int>(sents[static_cast<std::size_t>(s)].size());
        expected.insert({offset + m["pos"][0].get<int>(), offset + m["pos"][1].get<int>()});
      }
      CHECK(std::set<Span>(doc.clusters[c].mentions.begin(), doc.clusters[c].mentions.end()) == expected);
    }
  }
}

TEST_CASE("identical spans in different clusters are accepted") {
  const json vs = {{{{"sent_id", 0}, {"pos", {0, 1}}, {"type", "PER"}}}, {{{"sent_id", 0}, {"pos", {0, 1}}, {"type", "ORG"}}}};
  const auto corpus = parse_docred(one_doc(vs));
  const auto& d = corpus.documents[0];
  CHECK(d.clusters.size() == 2);
  CHECK(d.mentions().size() == 2);
  for (const auto& c : d.clusters) CHECK_FALSE(c.mentions.empty());
}

TEST_CASE("loader rejects malformed input") {
  SUBCASE("mention outside its sentence names the doc") {
    try {
      parse_docred(one_doc({{{{"sent_id", 1}, {"pos", {0, 2}}, {"type", "LOC"}}}}));
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("d0") != std::string::npos);
    }
  }
  SUBCASE("relation to a missing cluster") {
    CHECK_THROWS_AS(parse_docred(one_doc({{{{"sent_id", 0}, {"pos", {0, 1}}, {"type", "LOC"}}}}, {{{"h", 0}, {"t", 3}, {"r", "P1"}}})),
                    ValidationError);
  }
  SUBCASE("self relation") {
    CHECK_THROWS_AS(parse_docred(one_doc({{{{"sent_id", 0}, {"pos", {0, 1}}, {"type", "LOC"}}}}, {{{"h", 0}, {"t", 0}, {"r", "P1"}}})),
                    ValidationError);
  }
  SUBCASE("missing keys report the document index") {
    try {
      parse_docred(json::array({json::object()}));
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("0") != std::string::npos);
    }
  }
  SUBCASE("label outside a supplied vocabulary") {
    CHECK_THROWS_AS(parse_docred(one_doc({{{{"sent_id", 0}, {"pos", {0, 1}}, {"type", "XYZ"}}}}), micro_vocabulary()),
                    ValidationError);
  }
}

TEST_CASE("duplicate relation triples are removed on load") {
  const json vs = {{{{"sent_id", 0}, {"pos", {0, 1}}, {"type", "PER"}}}, {{{"sent_id", 1}, {"pos", {0, 1}}, {"type", "ORG"}}}};
  const json labels = {{{"h", 0}, {"t", 1}, {"r", "r1"}}, {{"h", 0}, {"t", 1}, {"r", "r1"}}};
  const auto corpus = parse_docred(one_doc(vs, labels));
  CHECK(corpus.documents[0].relations.size() == 1);
}

TEST_CASE("vocabulary indices are dense and stable") {
  const auto corpus = load_docred(kData + "/synthetic_tiny.json");
  const auto& v = corpus.vocabulary;
  for (int k = 0; k < v.num_entity_types(); ++k) CHECK(v.entity_index(v.entity_types()[static_cast<std::size_t>(k)]) == k);
  for (int k = 0; k < v.num_relation_types(); ++k)
    CHECK(v.relation_index(v.relation_types()[static_cast<std::size_t>(k)]) == k);
  CHECK(TypeVocabulary::from_json(v.to_json()) == v);
  CHECK_THROWS_AS(TypeVocabulary({"A", "A"}, {"r"}), ValidationError);
  CHECK_THROWS_AS(TypeVocabulary({"A"}, {}), ValidationError);
}

TEST_CASE("serialize then reload yields identical documents") {
  for (const char* file : {"/synthetic_tiny.json", "/docred_tiny.json"}) {
    const auto a = load_docred(kData + file);
    const auto b = parse_docred(to_docred_json(a.documents, a.vocabulary), a.vocabulary);
    CHECK(a.documents == b.documents);
  }
}

TEST_CASE("documents without vertexSet load as unannotated") {
  const json raw = json::array({{{"title", "u"}, {"sents", json::array({json::array({"x", "y"})})}}});
  const auto corpus = parse_docred(raw, micro_vocabulary());
  CHECK_FALSE(corpus.annotated);
  CHECK(corpus.documents[0].clusters.empty());
}

TEST_CASE("ratio split sizes and order") {
  const auto docs = numbered_docs(10);
  const auto s = split_dataset(docs, SplitRatios{0.8, 0.1, 0.1});
  CHECK(s.train.size() == 8);
  CHECK(s.dev.size() == 1);
  CHECK(s.test.size() == 1);
  CHECK(s.train.front().doc_id == "doc0");
  CHECK(s.test.front().doc_id == "doc9");
  CHECK(s.warnings.empty());
}

TEST_CASE("split file partitions are disjoint and cover the corpus") {
  const auto docs = numbered_docs(4);
  SUBCASE("all train warns about empty dev and test") {
    const auto s = split_dataset(docs, json{{"train", {"doc0", "doc1", "doc2", "doc3"}}});
    CHECK(s.train.size() == 4);
    CHECK(s.dev.empty());
    CHECK(s.test.empty());
    CHECK(s.warnings.size() == 2);
  }
  SUBCASE("unknown doc id is named") {
    try {
      split_dataset(docs, json{{"train", {"doc0", "doc1", "doc2", "doc3"}}, {"dev", {"X"}}});
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("'X'") != std::string::npos);
    }
  }
  SUBCASE("double assignment") {
    CHECK_THROWS_AS(split_dataset(docs, json{{"train", {"doc0", "doc1", "doc2", "doc3"}}, {"dev", {"doc0"}}}), ValidationError);
  }
  SUBCASE("unassigned doc") { CHECK_THROWS_AS(split_dataset(docs, json{{"train", {"doc0"}}}), ValidationError); }
  SUBCASE("union equals input") {
    const auto s = split_dataset(docs, json{{"train", {"doc2", "doc0"}}, {"dev", {"doc1"}}, {"test", {"doc3"}}});
    std::multiset<std::string> ids;
    for (const auto* part : {&s.train, &s.dev, &s.test})
      for (const auto& d : *part) ids.insert(d.doc_id);
    CHECK(ids == std::multiset<std::string>{"doc0", "doc1", "doc2", "doc3"});
  }
}

TEST_CASE("CDR conversion clusters by identifier and links chemical to disease") {
  std::ifstream in(kData + "/cdr_tiny.pubtator");
  std::stringstream buf;
  buf << in.rdbuf();
  const auto corpus = parse_docred(cdr_to_docred(buf.str()));
  REQUIRE(corpus.documents.size() == 2);
  CHECK(corpus.vocabulary.relation_types() == std::vector<std::string>{"CID"});
  CHECK(corpus.vocabulary.entity_types() == std::vector<std::string>{"Chemical", "Disease"});
  const auto& d = corpus.documents[0];
  CHECK(d.doc_id == "1001");
  CHECK(d.sentences.size() == 3);
  REQUIRE(d.clusters.size() == 4);
  CHECK(d.clusters[0].mentions == std::vector<Span>{{0, 1}, {7, 8}});  // Lidocaine, lidocaine
  CHECK(d.clusters[1].mentions == std::vector<Span>{{2, 4}, {14, 15}});  // cardiac arrest, arrest
  REQUIRE(d.relations.size() == 1);
  CHECK(d.relations[0].head == 0);
  CHECK(d.relations[0].tail == 1);
}
