#include "memre/corpus.hpp"

#include "memre/types.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace memre {

using nlohmann::json;

int Document::sentence_of(int token) const {
  auto it = std::upper_bound(sentences.begin(), sentences.end(), token,
                             [](int t, const Span& s) { return t < s.end; });
  if (it == sentences.end() || token < it->start) return -1;
  return static_cast<int>(it - sentences.begin());
}

std::vector<Span> Document::mentions() const {
  std::vector<Span> out;
  for (const auto& c : clusters) out.insert(out.end(), c.mentions.begin(), c.mentions.end());
  return out;
}

// ---------------------------------------------------------------------------
// TypeVocabulary

TypeVocabulary::TypeVocabulary(std::vector<std::string> entity_types, std::vector<std::string> relation_types)
    : entity_types_(std::move(entity_types)), relation_types_(std::move(relation_types)) {
  check();
}

void TypeVocabulary::check() const {
  auto unique = [](const std::vector<std::string>& v, const char* what) {
    if (v.empty()) throw ValidationError(std::string("type vocabulary: no ") + what + " types");
    std::set<std::string> seen(v.begin(), v.end());
    if (seen.size() != v.size()) throw ValidationError(std::string("type vocabulary: duplicate ") + what + " label");
  };
  unique(entity_types_, "entity");
  unique(relation_types_, "relation");
}

std::optional<int> TypeVocabulary::entity_index(const std::string& label) const {
  auto it = std::find(entity_types_.begin(), entity_types_.end(), label);
  if (it == entity_types_.end()) return std::nullopt;
  return static_cast<int>(it - entity_types_.begin());
}

std::optional<int> TypeVocabulary::relation_index(const std::string& label) const {
  auto it = std::find(relation_types_.begin(), relation_types_.end(), label);
  if (it == relation_types_.end()) return std::nullopt;
  return static_cast<int>(it - relation_types_.begin());
}

json TypeVocabulary::to_json() const {
  return json{{"entity_types", entity_types_}, {"relation_types", relation_types_}};
}

TypeVocabulary TypeVocabulary::from_json(const json& j) {
  try {
    return TypeVocabulary(j.at("entity_types").get<std::vector<std::string>>(),
                          j.at("relation_types").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("type vocabulary: ") + e.what());
  }
}

namespace {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace

TypeVocabulary load_vocabulary(const std::filesystem::path& path) { return TypeVocabulary::from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------
// DocRED ingestion

namespace {

std::string document_id(const json& d, std::size_t index) {
  if (d.contains("doc_id") && d["doc_id"].is_string()) return d["doc_id"].get<std::string>();
  if (d.contains("title") && d["title"].is_string()) return d["title"].get<std::string>();
  return "doc" + std::to_string(index);
}

struct RawMention {
  Span span;
  std::string type;
};

struct RawDocument {
  Document doc;
  std::vector<std::vector<RawMention>> clusters;
  std::vector<std::tuple<int, int, std::string>> labels;
};

RawDocument parse_raw(const json& d, std::size_t index) {
  RawDocument raw;
  Document& doc = raw.doc;
  doc.doc_id = document_id(d, index);

  const auto& sents = d.at("sents");
  if (!sents.is_array() || sents.empty()) throw ValidationError(doc.doc_id + ": 'sents' must be a non-empty array");
  int offset = 0;
  for (const auto& sent : sents) {
    auto words = sent.get<std::vector<std::string>>();
    if (words.empty()) throw ValidationError(doc.doc_id + ": empty sentence");
    doc.sentences.push_back({offset, offset + static_cast<int>(words.size())});
    offset += static_cast<int>(words.size());
    doc.tokens.insert(doc.tokens.end(), words.begin(), words.end());
  }

  static const json kNoClusters = json::array();
  const auto& vertex_set = d.contains("vertexSet") ? d["vertexSet"] : kNoClusters;
  for (std::size_t ci = 0; ci < vertex_set.size(); ++ci) {
    const auto& cluster = vertex_set[ci];
    if (!cluster.is_array() || cluster.empty())
      throw ValidationError(doc.doc_id + ": cluster " + std::to_string(ci) + " has no mentions");
    std::vector<RawMention> mentions;
    for (const auto& m : cluster) {
      const int sent_id = m.at("sent_id").get<int>();
      const auto pos = m.at("pos").get<std::vector<int>>();
      if (pos.size() != 2) throw ValidationError(doc.doc_id + ": mention 'pos' must be [start, end]");
      if (sent_id < 0 || sent_id >= static_cast<int>(doc.sentences.size()))
        throw ValidationError(doc.doc_id + ": mention sent_id " + std::to_string(sent_id) + " out of range");
      const Span& sentence = doc.sentences[static_cast<std::size_t>(sent_id)];
      if (pos[0] < 0 || pos[0] >= pos[1] || pos[1] > sentence.length())
        throw ValidationError(doc.doc_id + ": mention [" + std::to_string(pos[0]) + ", " + std::to_string(pos[1]) +
                              ") out of bounds of sentence " + std::to_string(sent_id));
      mentions.push_back({{sentence.start + pos[0], sentence.start + pos[1]}, m.at("type").get<std::string>()});
    }
    raw.clusters.push_back(std::move(mentions));
  }

  if (d.contains("labels")) {
    for (const auto& l : d["labels"]) {
      const int h = l.at("h").get<int>();
      const int t = l.at("t").get<int>();
      const int n = static_cast<int>(raw.clusters.size());
      if (h < 0 || h >= n || t < 0 || t >= n)
        throw ValidationError(doc.doc_id + ": relation references missing cluster (h=" + std::to_string(h) +
                              ", t=" + std::to_string(t) + ")");
      if (h == t) throw ValidationError(doc.doc_id + ": relation with identical head and tail " + std::to_string(h));
      raw.labels.emplace_back(h, t, l.at("r").get<std::string>());
    }
  }
  return raw;
}

}  // namespace

LoadedCorpus parse_docred(const json& data, const std::optional<TypeVocabulary>& vocab) {
  if (!data.is_array()) throw ParseError("DocRED corpus must be a JSON array of documents");

  std::vector<RawDocument> raws;
  raws.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    try {
      raws.push_back(parse_raw(data[i], i));
    } catch (const json::exception& e) {
      throw ParseError("document " + std::to_string(i) + ": " + e.what());
    }
  }

  LoadedCorpus out;
  out.annotated = std::all_of(data.begin(), data.end(), [](const json& d) { return d.contains("vertexSet"); });
  if (vocab) {
    out.vocabulary = *vocab;
  } else {
    std::set<std::string> entity_labels, relation_labels;
    for (const auto& r : raws) {
      for (const auto& c : r.clusters) entity_labels.insert(c.front().type);
      for (const auto& l : r.labels) relation_labels.insert(std::get<2>(l));
    }
    // Unannotated corpora still get one slot per memory.
    if (relation_labels.empty()) relation_labels.insert("NA");
    if (entity_labels.empty()) entity_labels.insert("NA");
    out.vocabulary = TypeVocabulary({entity_labels.begin(), entity_labels.end()},
                                    {relation_labels.begin(), relation_labels.end()});
  }

  for (auto& r : raws) {
    Document& doc = r.doc;
    for (const auto& c : r.clusters) {
      EntityCluster cluster;
      // Cluster type is the type of its first listed mention.
      auto type = out.vocabulary.entity_index(c.front().type);
      if (!type) throw ValidationError(doc.doc_id + ": unknown entity type '" + c.front().type + "'");
      cluster.entity_type = *type;
      for (const auto& m : c) cluster.mentions.push_back(m.span);
      std::sort(cluster.mentions.begin(), cluster.mentions.end());
      cluster.mentions.erase(std::unique(cluster.mentions.begin(), cluster.mentions.end()), cluster.mentions.end());
      doc.clusters.push_back(std::move(cluster));
    }
    for (const auto& [h, t, label] : r.labels) {
      auto rel = out.vocabulary.relation_index(label);
      if (!rel) throw ValidationError(doc.doc_id + ": unknown relation type '" + label + "'");
      doc.relations.push_back({h, t, *rel});
    }
    std::sort(doc.relations.begin(), doc.relations.end());
    doc.relations.erase(std::unique(doc.relations.begin(), doc.relations.end()), doc.relations.end());
    out.documents.push_back(std::move(doc));
  }
  return out;
}

LoadedCorpus load_docred(const std::filesystem::path& path, const std::optional<TypeVocabulary>& vocab) {
  return parse_docred(read_json_file(path), vocab);
}

json to_docred_json(const Document& doc, const TypeVocabulary& vocab) {
  json sents = json::array();
  for (const auto& s : doc.sentences) {
    sents.push_back(std::vector<std::string>(doc.tokens.begin() + s.start, doc.tokens.begin() + s.end));
  }
  json vertex_set = json::array();
  for (const auto& c : doc.clusters) {
    json cluster = json::array();
    for (const auto& m : c.mentions) {
      const int sid = doc.sentence_of(m.start);
      const Span& s = doc.sentences[static_cast<std::size_t>(sid)];
      std::string name;
      for (int t = m.start; t < m.end; ++t) name += (t > m.start ? " " : "") + doc.tokens[static_cast<std::size_t>(t)];
      cluster.push_back({{"name", name},
                         {"sent_id", sid},
                         {"pos", {m.start - s.start, m.end - s.start}},
                         {"type", vocab.entity_types().at(static_cast<std::size_t>(c.entity_type))}});
    }
    vertex_set.push_back(std::move(cluster));
  }
  json labels = json::array();
  for (const auto& r : doc.relations) {
    labels.push_back({{"h", r.head}, {"t", r.tail}, {"r", vocab.relation_types().at(static_cast<std::size_t>(r.relation_type))}});
  }
  return json{{"title", doc.doc_id}, {"sents", sents}, {"vertexSet", vertex_set}, {"labels", labels}};
}

json to_docred_json(const std::vector<Document>& docs, const TypeVocabulary& vocab) {
  json out = json::array();
  for (const auto& d : docs) out.push_back(to_docred_json(d, vocab));
  return out;
}

// ---------------------------------------------------------------------------
// Splits

const std::vector<Document>& DatasetSplits::by_name(const std::string& name) const {
  if (name == "train") return train;
  if (name == "dev") return dev;
  if (name == "test") return test;
  throw ConfigError("unknown split '" + name + "' (expected train, dev or test)");
}

namespace {

void warn_empty(DatasetSplits& s) {
  if (s.train.empty()) s.warnings.push_back("train split is empty");
  if (s.dev.empty()) s.warnings.push_back("dev split is empty");
  if (s.test.empty()) s.warnings.push_back("test split is empty");
}

}  // namespace

DatasetSplits split_dataset(const std::vector<Document>& docs, const json& split_file) {
  if (!split_file.is_object()) throw ParseError("split file must be a JSON object");
  std::unordered_map<std::string, int> present;
  for (const auto& d : docs) present.emplace(d.doc_id, 0);

  std::unordered_map<std::string, int> assignment;
  const char* names[] = {"train", "dev", "test"};
  for (auto const& [key, _] : split_file.items()) {
    if (key != "train" && key != "dev" && key != "test") throw ParseError("split file: unknown partition '" + key + "'");
  }
  for (int p = 0; p < 3; ++p) {
    if (!split_file.contains(names[p])) continue;
    for (const auto& id_json : split_file[names[p]]) {
      const auto id = id_json.get<std::string>();
      if (!present.count(id)) throw ValidationError("split file names unknown doc_id '" + id + "'");
      if (!assignment.emplace(id, p).second) throw ValidationError("doc_id '" + id + "' assigned to more than one split");
    }
  }

  DatasetSplits out;
  for (const auto& d : docs) {
    auto it = assignment.find(d.doc_id);
    if (it == assignment.end()) throw ValidationError("doc_id '" + d.doc_id + "' is not assigned to any split");
    (it->second == 0 ? out.train : it->second == 1 ? out.dev : out.test).push_back(d);
  }
  warn_empty(out);
  return out;
}

DatasetSplits split_dataset(const std::vector<Document>& docs, const SplitSpec& spec) {
  if (const auto* path = std::get_if<std::filesystem::path>(&spec)) {
    return split_dataset(docs, read_json_file(*path));
  }
  const auto& r = std::get<SplitRatios>(spec);
  if (r.train < 0 || r.dev < 0 || r.test < 0 || std::abs(r.train + r.dev + r.test - 1.0) > 1e-6)
    throw ConfigError("split ratios must be non-negative and sum to 1");
  const auto n = docs.size();
  const auto n_train = std::min(n, static_cast<std::size_t>(std::llround(static_cast<double>(n) * r.train)));
  const auto n_dev = std::min(n - n_train, static_cast<std::size_t>(std::llround(static_cast<double>(n) * r.dev)));
  DatasetSplits out;
  out.train.assign(docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.dev.assign(docs.begin() + static_cast<std::ptrdiff_t>(n_train),
                 docs.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev));
  out.test.assign(docs.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev), docs.end());
  warn_empty(out);
  return out;
}

// ---------------------------------------------------------------------------
// CDR (PubTator) conversion

namespace {

struct CharToken {
  std::string text;
  int begin = 0;
  int end = 0;
};

std::vector<CharToken> tokenize_with_offsets(const std::string& text) {
  std::vector<CharToken> out;
  const int n = static_cast<int>(text.size());
  int i = 0;
  while (i < n) {
    const unsigned char c = static_cast<unsigned char>(text[static_cast<std::size_t>(i)]);
    if (std::isspace(c)) {
      ++i;
    } else if (std::ispunct(c)) {
      out.push_back({std::string(1, static_cast<char>(c)), i, i + 1});
      ++i;
    } else {
      int j = i;
      while (j < n) {
        const unsigned char d = static_cast<unsigned char>(text[static_cast<std::size_t>(j)]);
        if (std::isspace(d) || std::ispunct(d)) break;
        ++j;
      }
      out.push_back({text.substr(static_cast<std::size_t>(i), static_cast<std::size_t>(j - i)), i, j});
      i = j;
    }
  }
  return out;
}

struct PubtatorDoc {
  std::string pmid;
  std::string title;
  std::string abstract;
  struct Annotation {
    int begin, end;
    std::string type, id;
  };
  std::vector<Annotation> annotations;
  std::vector<std::pair<std::string, std::string>> cid;  // (chemical id, disease id)
};

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, '\t')) out.push_back(field);
  return out;
}

json convert_one(const PubtatorDoc& p) {
  const std::string text = p.title + " " + p.abstract;
  const auto toks = tokenize_with_offsets(text);
  if (toks.empty()) throw ParseError("CDR document " + p.pmid + " has no tokens");
  const int title_end = static_cast<int>(p.title.size());

  // Token index ranges for each annotation.
  std::vector<Span> ann_spans;
  for (const auto& a : p.annotations) {
    int s = -1, e = -1;
    for (int t = 0; t < static_cast<int>(toks.size()); ++t) {
      const auto& tk = toks[static_cast<std::size_t>(t)];
      if (tk.end > a.begin && tk.begin < a.end) {
        if (s < 0) s = t;
        e = t + 1;
      }
    }
    if (s < 0) throw ParseError("CDR document " + p.pmid + ": annotation [" + std::to_string(a.begin) + ", " +
                                std::to_string(a.end) + ") covers no token");
    ann_spans.push_back({s, e});
  }

  // Sentence breaks after terminal punctuation and after the title, unless a
  // mention straddles the break.
  std::vector<int> breaks;
  for (int t = 0; t + 1 < static_cast<int>(toks.size()); ++t) {
    const auto& tk = toks[static_cast<std::size_t>(t)];
    const bool terminal = tk.text == "." || tk.text == "?" || tk.text == "!";
    const bool after_title = tk.end <= title_end && toks[static_cast<std::size_t>(t + 1)].begin >= title_end;
    if (!terminal && !after_title) continue;
    const int cut = t + 1;
    const bool straddled = std::any_of(ann_spans.begin(), ann_spans.end(),
                                       [cut](const Span& s) { return s.start < cut && cut < s.end; });
    if (!straddled) breaks.push_back(cut);
  }
  breaks.push_back(static_cast<int>(toks.size()));

  json sents = json::array();
  std::vector<Span> sentence_spans;
  int start = 0;
  for (int b : breaks) {
    json sent = json::array();
    for (int t = start; t < b; ++t) sent.push_back(toks[static_cast<std::size_t>(t)].text);
    sents.push_back(std::move(sent));
    sentence_spans.push_back({start, b});
    start = b;
  }

  // Cluster by (type, MeSH id); "-1" ids stay singleton.
  std::map<std::pair<std::string, std::string>, int> cluster_of;
  json vertex_set = json::array();
  for (std::size_t i = 0; i < p.annotations.size(); ++i) {
    const auto& a = p.annotations[i];
    const Span& s = ann_spans[i];
    int sid = 0;
    while (sentence_spans[static_cast<std::size_t>(sid)].end <= s.start) ++sid;
    const Span& sent = sentence_spans[static_cast<std::size_t>(sid)];
    std::string name;
    for (int t = s.start; t < s.end; ++t) name += (t > s.start ? " " : "") + toks[static_cast<std::size_t>(t)].text;
    json mention = {{"name", name}, {"sent_id", sid}, {"pos", {s.start - sent.start, s.end - sent.start}}, {"type", a.type}};
    int ci;
    const auto key = std::make_pair(a.type, a.id);
    auto it = cluster_of.find(key);
    if (a.id == "-1" || it == cluster_of.end()) {
      ci = static_cast<int>(vertex_set.size());
      vertex_set.push_back(json::array());
      if (a.id != "-1") cluster_of.emplace(key, ci);
    } else {
      ci = it->second;
    }
    vertex_set[static_cast<std::size_t>(ci)].push_back(std::move(mention));
  }

  json labels = json::array();
  for (const auto& [chem, dis] : p.cid) {
    auto h = cluster_of.find({"Chemical", chem});
    auto t = cluster_of.find({"Disease", dis});
    if (h == cluster_of.end() || t == cluster_of.end()) continue;  // relation without mentions in text
    labels.push_back({{"h", h->second}, {"t", t->second}, {"r", "CID"}});
  }
  return json{{"title", p.pmid}, {"sents", sents}, {"vertexSet", vertex_set}, {"labels", labels}};
}

}  // namespace

json cdr_to_docred(const std::string& pubtator_text) {
  std::vector<PubtatorDoc> docs;
  std::stringstream in(pubtator_text);
  std::string line;
  PubtatorDoc* cur = nullptr;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      cur = nullptr;
      continue;
    }
    const auto bar = line.find('|');
    const auto tab = line.find('\t');
    if (bar != std::string::npos && (tab == std::string::npos || bar < tab) && bar + 2 < line.size() &&
        line[bar + 2] == '|') {
      const std::string pmid = line.substr(0, bar);
      if (cur == nullptr || cur->pmid != pmid) {
        docs.emplace_back();
        cur = &docs.back();
        cur->pmid = pmid;
      }
      const char kind = line[bar + 1];
      (kind == 't' ? cur->title : cur->abstract) = line.substr(bar + 3);
      continue;
    }
    if (cur == nullptr) throw ParseError("PubTator annotation line outside a document: " + line);
    const auto f = split_tabs(line);
    if (f.size() >= 4 && f[1] == "CID") {
      cur->cid.emplace_back(f[2], f[3]);
    } else if (f.size() >= 6) {
      try {
        cur->annotations.push_back({std::stoi(f[1]), std::stoi(f[2]), f[4], f[5]});
      } catch (const std::exception&) {
        throw ParseError("PubTator: malformed annotation line: " + line);
      }
    } else {
      throw ParseError("PubTator: malformed line: " + line);
    }
  }
  json out = json::array();
  for (const auto& d : docs) out.push_back(convert_one(d));
  return out;
}

}  // namespace memre
