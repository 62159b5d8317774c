#ifndef MEMRE_CORPUS_HPP
#define MEMRE_CORPUS_HPP

#include "json.hpp"

#include <array>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace memre {

/// Half-open token range [start, end) in document-global token indices.
struct Span {
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  auto operator<=>(const Span&) const = default;
};

struct EntityCluster {
  std::vector<Span> mentions;  // sorted by (start, end)
  int entity_type = 0;

  bool operator==(const EntityCluster&) const = default;
};

/// Directed relation between two clusters of the same document.
struct RelationTriple {
  int head = 0;
  int tail = 0;
  int relation_type = 0;

  auto operator<=>(const RelationTriple&) const = default;
};

struct Document {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::vector<Span> sentences;  // contiguous, covering [0, n)
  std::vector<EntityCluster> clusters;
  std::vector<RelationTriple> relations;  // sorted, duplicate-free

  int size() const { return static_cast<int>(tokens.size()); }
  int sentence_of(int token) const;

  /// Every gold mention, one entry per mention record (duplicates across
  /// clusters are kept).
  std::vector<Span> mentions() const;

  bool operator==(const Document&) const = default;
};

/// Ordered entity and relation label sets. Position k is memory slot k.
class TypeVocabulary {
 public:
  TypeVocabulary() = default;
  TypeVocabulary(std::vector<std::string> entity_types, std::vector<std::string> relation_types);

  const std::vector<std::string>& entity_types() const { return entity_types_; }
  const std::vector<std::string>& relation_types() const { return relation_types_; }
  int num_entity_types() const { return static_cast<int>(entity_types_.size()); }
  int num_relation_types() const { return static_cast<int>(relation_types_.size()); }

  std::optional<int> entity_index(const std::string& label) const;
  std::optional<int> relation_index(const std::string& label) const;

  nlohmann::json to_json() const;
  /// Accepts {"entity_types": [...], "relation_types": [...]}.
  static TypeVocabulary from_json(const nlohmann::json& j);

  bool operator==(const TypeVocabulary&) const = default;

 private:
  void check() const;

  std::vector<std::string> entity_types_;
  std::vector<std::string> relation_types_;
};

TypeVocabulary load_vocabulary(const std::filesystem::path& path);

struct LoadedCorpus {
  std::vector<Document> documents;
  TypeVocabulary vocabulary;
  bool annotated = true;  // every document carried a vertexSet
};

/// Parses a DocRED-schema JSON array. When `vocab` is empty the vocabulary is
/// built from the data with labels sorted lexicographically.
LoadedCorpus parse_docred(const nlohmann::json& data, const std::optional<TypeVocabulary>& vocab = std::nullopt);
LoadedCorpus load_docred(const std::filesystem::path& path, const std::optional<TypeVocabulary>& vocab = std::nullopt);

nlohmann::json to_docred_json(const Document& doc, const TypeVocabulary& vocab);
nlohmann::json to_docred_json(const std::vector<Document>& docs, const TypeVocabulary& vocab);

struct SplitRatios {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

/// Either a split file ({"train": [...], "dev": [...], "test": [...]}) or ratios.
using SplitSpec = std::variant<std::filesystem::path, SplitRatios>;

struct DatasetSplits {
  std::vector<Document> train;
  std::vector<Document> dev;
  std::vector<Document> test;
  std::vector<std::string> warnings;

  const std::vector<Document>& by_name(const std::string& name) const;
};

DatasetSplits split_dataset(const std::vector<Document>& docs, const SplitSpec& spec);
DatasetSplits split_dataset(const std::vector<Document>& docs, const nlohmann::json& split_file);

/// Converts PubTator-formatted CDR abstracts into DocRED-schema JSON:
/// Chemical/Disease mentions clustered by MeSH identifier, CID as the only
/// relation type (chemical -> disease). Tokens split on whitespace and
/// punctuation, sentences end at '.', '?' or '!' tokens.
nlohmann::json cdr_to_docred(const std::string& pubtator_text);

}  // namespace memre

#endif  // MEMRE_CORPUS_HPP
