#include "hallucheck/datasets.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "hallucheck/rng.h"

namespace hallucheck {
namespace {

const std::set<std::string> kMetaFields = {"id", "knowledge", "gold_reference",
                                           "gold_reason_category"};

void reject_unknown_keys(const Json& j, const std::set<std::string>& known,
                         const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (known.count(key) == 0) {
      throw DatasetError(DatasetErrc::Manifest,
                         where + ": unknown key '" + key + "'");
    }
  }
}

// Resolves a dotted path; numeric components index arrays.
const Json* resolve(const Json& row, const std::string& path) {
  const Json* cur = &row;
  std::size_t pos = 0;
  while (pos <= path.size()) {
    auto dot = path.find('.', pos);
    auto part = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (cur->is_object()) {
      auto it = cur->find(part);
      if (it == cur->end()) return nullptr;
      cur = &*it;
    } else if (cur->is_array() && !part.empty() &&
               std::all_of(part.begin(), part.end(), ::isdigit)) {
      auto index = std::stoul(part);
      if (index >= cur->size()) return nullptr;
      cur = &(*cur)[index];
    } else {
      return nullptr;
    }
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  return cur;
}

// Strings verbatim; arrays of strings joined by newlines; other scalars and
// objects as compact JSON. Null/missing -> nullopt.
std::optional<std::string> text_at(const Json& row, const std::string& path) {
  const Json* v = resolve(row, path);
  if (v == nullptr || v->is_null()) return std::nullopt;
  if (v->is_string()) return v->get<std::string>();
  if (v->is_array() &&
      std::all_of(v->begin(), v->end(), [](const Json& e) { return e.is_string(); })) {
    std::string out;
    for (const auto& e : *v) {
      if (!out.empty()) out += '\n';
      out += e.get<std::string>();
    }
    return out;
  }
  return dump_compact(*v);
}

struct MappingFailure {
  std::string field;
  std::string reason;
};

std::optional<bool> label_from_field(const Json& row, const LabelRule& rule,
                                     MappingFailure& failure) {
  const Json* v = resolve(row, rule.field);
  if (v == nullptr || v->is_null()) {
    failure = {"gold_hallucinated", "missing source field '" + rule.field + "'"};
    return std::nullopt;
  }
  if (rule.positive_values.empty() && rule.negative_values.empty()) {
    if (!v->is_boolean()) {
      failure = {"gold_hallucinated", "label field '" + rule.field + "' is not boolean"};
      return std::nullopt;
    }
    return v->get<bool>();
  }
  auto matches = [&](const std::vector<Json>& values) {
    return std::find(values.begin(), values.end(), *v) != values.end();
  };
  if (matches(rule.positive_values)) return true;
  if (matches(rule.negative_values) || rule.negative_values.empty()) return false;
  failure = {"gold_hallucinated", "unrecognised label value " + dump_compact(*v)};
  return std::nullopt;
}

struct RowOutcome {
  std::vector<ExampleRecord> records;
  std::optional<MappingFailure> failure;
};

RowOutcome map_row(const Json& row, int line_no, const AdapterSpec& adapter) {
  RowOutcome out;
  if (!row.is_object()) {
    out.failure = MappingFailure{"", "row is not a JSON object"};
    return out;
  }
  ExampleRecord base;
  base.kind = adapter.kind;
  base.language = adapter.language;
  auto id_it = adapter.field_map.find("id");
  if (id_it != adapter.field_map.end()) {
    auto id = text_at(row, id_it->second);
    if (!id) {
      out.failure = MappingFailure{"id", "missing source field '" + id_it->second + "'"};
      return out;
    }
    base.id = *id;
  } else {
    base.id = adapter.name + "-" + std::to_string(line_no);
  }

  for (const auto& [target, source] : adapter.field_map) {
    if (target == "id") continue;
    auto value = text_at(row, source);
    if (target == "knowledge") {
      base.knowledge = value;
    } else if (target == "gold_reference") {
      base.gold_reference = value;
    } else if (target == "gold_reason_category") {
      base.gold_reason_category = value;
    } else if (!value) {
      out.failure = MappingFailure{target, "missing source field '" + source + "'"};
      return out;
    } else {
      base.fields[target] = *value;
    }
  }

  const auto& rule = adapter.label_rule;
  if (rule.type == LabelRule::Type::Field) {
    MappingFailure failure;
    auto label = label_from_field(row, rule, failure);
    if (!label) {
      out.failure = failure;
      return out;
    }
    base.gold_hallucinated = *label;
    out.records.push_back(std::move(base));
    return out;
  }

  for (bool positive : {true, false}) {
    ExampleRecord r = base;
    r.gold_hallucinated = positive;
    r.id = base.id + (positive ? "-pos" : "-neg");
    for (const auto& [target, source] : positive ? rule.positive : rule.negative) {
      auto value = text_at(row, source);
      if (!value) {
        out.records.clear();
        out.failure = MappingFailure{target, "missing source field '" + source + "'"};
        return out;
      }
      r.fields[target] = *value;
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

RowOutcome canonical_row(const Json& row) {
  RowOutcome out;
  for (const char* key : {"id", "kind", "fields", "gold_hallucinated"}) {
    if (!row.is_object() || !row.contains(key) || row.at(key).is_null()) {
      out.failure = MappingFailure{key, "missing required key"};
      return out;
    }
  }
  try {
    out.records.push_back(row.get<ExampleRecord>());
  } catch (const std::exception& e) {
    out.failure = MappingFailure{"", e.what()};
  }
  return out;
}

std::vector<std::pair<int, Json>> read_rows(const std::filesystem::path& path,
                                            const std::string& format) {
  std::ifstream in(path);
  if (!in) throw DatasetError(DatasetErrc::Io, "cannot read dataset " + path.string());
  std::vector<std::pair<int, Json>> rows;
  if (format == "json_array") {
    Json doc;
    try {
      doc = Json::parse(in);
    } catch (const Json::exception& e) {
      throw DatasetError(DatasetErrc::Parse,
                         path.string() + ": parse_error(1): " + e.what());
    }
    if (!doc.is_array()) {
      throw DatasetError(DatasetErrc::Parse, path.string() + ": expected a JSON array");
    }
    int index = 0;
    for (auto& row : doc) rows.emplace_back(++index, std::move(row));
    return rows;
  }
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.emplace_back(line_no, Json::parse(line));
    } catch (const Json::exception& e) {
      throw DatasetError(DatasetErrc::Parse, path.string() + ": parse_error(" +
                                                 std::to_string(line_no) + "): " + e.what());
    }
  }
  return rows;
}

}  // namespace

std::string_view to_string(DatasetErrc code) {
  switch (code) {
    case DatasetErrc::Io: return "io_error";
    case DatasetErrc::Parse: return "parse_error";
    case DatasetErrc::Mapping: return "mapping_error";
    case DatasetErrc::InsufficientPool: return "insufficient_pool";
    case DatasetErrc::UnknownAdapter: return "unknown_adapter";
    case DatasetErrc::Manifest: return "manifest_error";
  }
  return "?";
}

void from_json(const Json& j, AdapterSpec& spec) {
  const std::string where =
      "adapter '" + j.value("name", std::string("<unnamed>")) + "'";
  reject_unknown_keys(j, {"name", "canonical", "kind", "format", "language",
                          "field_map", "label_rule"},
                      where);
  spec = AdapterSpec{};
  spec.name = j.at("name").get<std::string>();
  spec.canonical = j.value("canonical", false);
  spec.format = j.value("format", std::string("jsonl"));
  spec.language = j.value("language", std::string("en"));
  if (spec.canonical) return;
  auto kind = parse_task_kind(j.at("kind").get<std::string>());
  if (!kind) throw DatasetError(DatasetErrc::Manifest, where + ": unknown kind");
  spec.kind = *kind;
  spec.field_map = j.value("field_map", std::map<std::string, std::string>{});
  const auto& rule = j.at("label_rule");
  reject_unknown_keys(rule, {"type", "field", "positive_values", "negative_values",
                             "positive", "negative"},
                      where + " label_rule");
  auto type = rule.at("type").get<std::string>();
  if (type == "field") {
    spec.label_rule.type = LabelRule::Type::Field;
    spec.label_rule.field = rule.at("field").get<std::string>();
    spec.label_rule.positive_values = rule.value("positive_values", std::vector<Json>{});
    spec.label_rule.negative_values = rule.value("negative_values", std::vector<Json>{});
  } else if (type == "pair_expansion") {
    spec.label_rule.type = LabelRule::Type::PairExpansion;
    spec.label_rule.positive = rule.at("positive").get<std::map<std::string, std::string>>();
    spec.label_rule.negative = rule.at("negative").get<std::map<std::string, std::string>>();
  } else {
    throw DatasetError(DatasetErrc::Manifest, where + ": unknown label_rule type " + type);
  }
}

void to_json(Json& j, const AdapterSpec& spec) {
  j = Json{{"name", spec.name}, {"canonical", spec.canonical},
           {"format", spec.format}, {"language", spec.language}};
  if (spec.canonical) return;
  j["kind"] = std::string(to_string(spec.kind));
  j["field_map"] = spec.field_map;
  const auto& r = spec.label_rule;
  if (r.type == LabelRule::Type::Field) {
    j["label_rule"] = Json{{"type", "field"},
                           {"field", r.field},
                           {"positive_values", r.positive_values},
                           {"negative_values", r.negative_values}};
  } else {
    j["label_rule"] = Json{{"type", "pair_expansion"},
                           {"positive", r.positive},
                           {"negative", r.negative}};
  }
}

void check_adapter(const AdapterSpec& spec) {
  auto fail = [&](const std::string& why) {
    return DatasetError(DatasetErrc::Manifest, "adapter '" + spec.name + "': " + why);
  };
  if (spec.name.empty()) throw fail("name is empty");
  if (spec.format != "jsonl" && spec.format != "json_array") {
    throw fail("format must be jsonl or json_array");
  }
  if (spec.canonical) return;
  const auto& rule = spec.label_rule;
  const auto& slots = required_slots(spec.kind);
  for (const auto& [target, _] : spec.field_map) {
    if (kMetaFields.count(target) == 0 &&
        std::find(slots.begin(), slots.end(), target) == slots.end()) {
      throw fail("field_map target '" + target + "' is not a slot of " +
                 std::string(to_string(spec.kind)));
    }
  }
  for (const auto& slot : slots) {
    bool covered = spec.field_map.count(slot) != 0;
    if (!covered && rule.type == LabelRule::Type::PairExpansion) {
      covered = rule.positive.count(slot) != 0 && rule.negative.count(slot) != 0;
    }
    if (!covered) throw fail("required slot '" + slot + "' is not mapped");
  }
  if (rule.type == LabelRule::Type::Field && rule.field.empty()) {
    throw fail("label_rule.field is required");
  }
  if (rule.type == LabelRule::Type::PairExpansion &&
      (rule.positive.empty() || rule.negative.empty())) {
    throw fail("pair_expansion needs both positive and negative mappings");
  }
  if (spec.field_map.count("gold_reason_category") != 0 &&
      spec.kind != TaskKind::MathWordProblem) {
    throw fail("gold_reason_category only applies to math_word_problem");
  }
}

void to_json(Json& j, const Reject& r) {
  j = Json{{"line_no", r.line_no}, {"field", r.field}, {"reason", r.reason}, {"id", r.id}};
}

LoadResult load(const std::filesystem::path& path, const AdapterSpec& adapter) {
  check_adapter(adapter);
  LoadResult result;
  std::set<std::string> seen;
  for (const auto& [line_no, row] : read_rows(path, adapter.format)) {
    auto outcome = adapter.canonical ? canonical_row(row) : map_row(row, line_no, adapter);
    if (outcome.failure) {
      std::string id;
      if (row.is_object() && row.contains("id") && row["id"].is_string()) {
        id = row["id"].get<std::string>();
      }
      result.rejects.push_back({line_no, outcome.failure->field,
                                "mapping_error: " + outcome.failure->reason, id});
      continue;
    }
    for (auto& record : outcome.records) {
      auto violations = validate(record);
      if (!violations.empty()) {
        for (const auto& v : violations) {
          result.rejects.push_back({line_no, v.field, v.rule, record.id});
        }
        continue;
      }
      if (!seen.insert(record.id).second) {
        result.rejects.push_back({line_no, "id", "duplicate_id", record.id});
        continue;
      }
      result.records.push_back(std::move(record));
    }
  }
  return result;
}

AdapterRegistry::AdapterRegistry() {
  AdapterSpec canonical;
  canonical.name = "canonical";
  canonical.canonical = true;
  adapters_[canonical.name] = canonical;
}

AdapterRegistry AdapterRegistry::load(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) {
    throw DatasetError(DatasetErrc::Io,
                       "cannot read adapter manifest " + manifest_path.string());
  }
  AdapterRegistry reg;
  try {
    auto doc = Json::parse(in);
    reject_unknown_keys(doc, {"adapters"}, "adapter manifest");
    for (const auto& entry : doc.at("adapters")) reg.add(entry.get<AdapterSpec>());
  } catch (const Json::exception& e) {
    throw DatasetError(DatasetErrc::Manifest,
                       "malformed adapter manifest: " + std::string(e.what()));
  }
  return reg;
}

std::filesystem::path AdapterRegistry::default_manifest_path() {
  return std::filesystem::path(HALLUCHECK_DATA_DIR) / "adapters" / "manifest.json";
}

const AdapterSpec& AdapterRegistry::get(const std::string& name) const {
  auto it = adapters_.find(name);
  if (it == adapters_.end()) {
    std::string known;
    for (const auto& n : names()) known += (known.empty() ? "" : ", ") + n;
    throw DatasetError(DatasetErrc::UnknownAdapter,
                       "unknown adapter '" + name + "' (known: " + known + ")");
  }
  return it->second;
}

std::vector<std::string> AdapterRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : adapters_) out.push_back(name);
  return out;
}

void AdapterRegistry::add(AdapterSpec spec) {
  check_adapter(spec);
  auto name = spec.name;
  adapters_[name] = std::move(spec);
}

void write_jsonl(const std::vector<ExampleRecord>& records,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (const auto& r : records) out << to_jsonl_line(r) << '\n';
  if (!out) throw DatasetError(DatasetErrc::Io, "cannot write " + path.string());
}

void write_rejects(const std::vector<Reject>& rejects, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (const auto& r : rejects) out << dump_compact(Json(r)) << '\n';
  if (!out) throw DatasetError(DatasetErrc::Io, "cannot write " + path.string());
}

std::vector<ExampleRecord> balanced_sample(const std::vector<ExampleRecord>& records,
                                           std::size_t n_pos, std::size_t n_neg,
                                           std::uint64_t seed) {
  std::vector<const ExampleRecord*> pos;
  std::vector<const ExampleRecord*> neg;
  for (const auto& r : records) (r.gold_hallucinated ? pos : neg).push_back(&r);
  auto insufficient = [](const char* cls, std::size_t have, std::size_t need) {
    std::ostringstream msg;
    msg << "insufficient_pool(" << cls << ", " << have << ", " << need << ")";
    return DatasetError(DatasetErrc::InsufficientPool, msg.str());
  };
  if (pos.size() < n_pos) throw insufficient("positive", pos.size(), n_pos);
  if (neg.size() < n_neg) throw insufficient("negative", neg.size(), n_neg);

  SplitMix64 rng(seed);
  sample_prefix(pos, n_pos, rng);
  sample_prefix(neg, n_neg, rng);
  pos.insert(pos.end(), neg.begin(), neg.end());
  shuffle(pos, rng);

  std::vector<ExampleRecord> out;
  out.reserve(pos.size());
  for (const auto* r : pos) out.push_back(*r);
  return out;
}

}  // namespace hallucheck
