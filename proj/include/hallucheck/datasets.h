#pragma once

// Benchmark ingestion through declarative field-mapping adapters, and
// seeded class-balanced sampling.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hallucheck/core.h"

namespace hallucheck {

// How gold_hallucinated is derived from a source row.
struct LabelRule {
  enum class Type {
    // gold_hallucinated = value at `field`. Booleans map directly unless
    // positive_values/negative_values are given, in which case the value
    // must match one of them.
    Field,
    // Each row yields a positive and a negative record. `positive` and
    // `negative` map canonical slots to the source paths that differ.
    PairExpansion,
  };
  Type type = Type::Field;
  std::string field;
  std::vector<Json> positive_values;
  std::vector<Json> negative_values;
  std::map<std::string, std::string> positive;
  std::map<std::string, std::string> negative;
};

struct AdapterSpec {
  std::string name;
  // Canonical JSONL: rows are serialized ExampleRecords, no mapping.
  bool canonical = false;
  TaskKind kind = TaskKind::QuestionAnswering;
  std::string format = "jsonl";  // "jsonl" or "json_array"
  std::string language = "en";
  // canonical slot or meta name (id, knowledge, gold_reference,
  // gold_reason_category) -> dotted source path
  std::map<std::string, std::string> field_map;
  LabelRule label_rule;
};

void from_json(const Json& j, AdapterSpec& spec);
void to_json(Json& j, const AdapterSpec& spec);

enum class DatasetErrc { Io, Parse, Mapping, InsufficientPool, UnknownAdapter, Manifest };
using DatasetError = CodedError<DatasetErrc>;

std::string_view to_string(DatasetErrc code);

// Throws DatasetError(Manifest) if the spec cannot produce valid records
// (missing slot mapping, missing label source, ...).
void check_adapter(const AdapterSpec& spec);

struct Reject {
  int line_no = 0;
  std::string field;
  std::string reason;
  std::string id;

  bool operator==(const Reject&) const = default;
};

void to_json(Json& j, const Reject& r);

struct LoadResult {
  std::vector<ExampleRecord> records;
  std::vector<Reject> rejects;
};

// Rows that cannot be mapped or fail validation land in `rejects`; a file
// that cannot be read or a line that is not JSON throws.
LoadResult load(const std::filesystem::path& path, const AdapterSpec& adapter);

class AdapterRegistry {
 public:
  // Always contains the built-in "canonical" adapter.
  AdapterRegistry();
  static AdapterRegistry load(const std::filesystem::path& manifest_path);
  static std::filesystem::path default_manifest_path();

  const AdapterSpec& get(const std::string& name) const;
  bool contains(const std::string& name) const { return adapters_.count(name) != 0; }
  std::vector<std::string> names() const;
  void add(AdapterSpec spec);

 private:
  std::map<std::string, AdapterSpec> adapters_;
};

void write_jsonl(const std::vector<ExampleRecord>& records,
                 const std::filesystem::path& path);
void write_rejects(const std::vector<Reject>& rejects, const std::filesystem::path& path);

// Exactly n_pos positives and n_neg negatives drawn without replacement
// from a SplitMix64 stream seeded with `seed`, returned in a shuffled
// order determined by the same stream.
std::vector<ExampleRecord> balanced_sample(const std::vector<ExampleRecord>& records,
                                           std::size_t n_pos, std::size_t n_neg,
                                           std::uint64_t seed);

}  // namespace hallucheck
