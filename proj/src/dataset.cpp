#include "gamic/dataset.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <json.hpp>
#include <map>
#include <set>

#include "gamic/binary_io.h"
#include "gamic/errors.h"
#include "gamic/rng.h"

namespace gamic {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::optional<bool> label_from_text(std::string_view text) {
  const std::string t = lower(trim(text));
  if (t == "1" || t == "true" || t == "yes" || t == "high" || t == "1.0") return true;
  if (t == "0" || t == "false" || t == "no" || t == "low" || t == "0.0") return false;
  return std::nullopt;
}

// Splits delimited text into records of fields. Double quotes group fields
// and "" escapes a quote; quoted fields may span lines. Records carry the
// 1-based line on which they start.
struct Row {
  std::size_t line;
  std::vector<std::string> fields;
};

std::vector<Row> split_delimited(std::string_view text, char delim) {
  std::vector<Row> rows;
  Row row{1, {}};
  std::string field;
  bool quoted = false, any = false;
  std::size_t line = 1;
  auto end_row = [&] {
    if (any || !field.empty() || !row.fields.empty()) {
      row.fields.push_back(std::move(field));
      rows.push_back(std::move(row));
    }
    field.clear();
    row = Row{line, {}};
    any = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == delim) {
      row.fields.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n') {
      ++line;
      end_row();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw FormatError("unterminated quoted field starting on line " + std::to_string(row.line));
  end_row();
  return rows;
}

struct Raw {
  std::size_t line;
  std::string id, smiles, payload, split;
};

std::vector<Raw> read_delimited(std::string_view text, char delim, Task task) {
  const auto rows = split_delimited(text, delim);
  if (rows.empty()) throw FormatError("input has no header row");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].fields.size(); ++i) col[lower(trim(rows[0].fields[i]))] = i;
  const std::string payload_col = is_classification(task) ? "label" : "caption";
  for (const std::string& need : {std::string("smiles"), payload_col}) {
    if (!col.count(need)) throw FormatError("missing required column '" + need + "'");
  }
  const auto opt = [&](const char* name) { return col.count(name) ? std::optional(col[name]) : std::nullopt; };
  const auto id_col = opt("id"), split_col = opt("split");
  std::vector<Raw> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (f.size() != rows[0].fields.size()) {
      throw FormatError("line " + std::to_string(rows[r].line) + " has " + std::to_string(f.size()) +
                        " fields, header has " + std::to_string(rows[0].fields.size()));
    }
    Raw raw{rows[r].line, id_col ? trim(f[*id_col]) : "", trim(f[col["smiles"]]), f[col[payload_col]],
            split_col ? lower(trim(f[*split_col])) : ""};
    out.push_back(std::move(raw));
  }
  return out;
}

std::string json_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return v.dump();
  throw FormatError("expected a string, number or boolean, got " + v.dump());
}

std::vector<Raw> read_jsonl(std::string_view text, Task task) {
  const std::string payload_key = is_classification(task) ? "label" : "caption";
  std::vector<Raw> out;
  std::size_t line = 0, start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line;
    const std::string l = trim(text.substr(start, end - start));
    start = end + 1;
    if (l.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(l);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("line " + std::to_string(line) + " is not JSON: " + e.what());
    }
    if (!j.is_object()) throw FormatError("line " + std::to_string(line) + " is not a JSON object");
    for (const std::string& need : {std::string("smiles"), payload_key}) {
      if (!j.contains(need)) throw FormatError("line " + std::to_string(line) + ": missing required field '" + need + "'");
    }
    try {
      out.push_back(Raw{line, j.contains("id") ? json_text(j["id"]) : "", json_text(j["smiles"]), json_text(j[payload_key]),
                        j.contains("split") ? lower(json_text(j["split"])) : ""});
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::string IngestSummary::describe() const {
  std::string s = "read " + std::to_string(rows) + " rows, kept " + std::to_string(kept) + ", skipped " +
                  std::to_string(skipped.size());
  for (const auto& m : skipped) s += "\n  skipped " + m;
  return s;
}

InputFormat format_for_path(std::string_view path) {
  const std::string p = lower(path);
  const auto ends = [&](std::string_view suf) { return p.size() >= suf.size() && p.compare(p.size() - suf.size(), suf.size(), suf) == 0; };
  if (ends(".tsv")) return InputFormat::Tsv;
  if (ends(".jsonl") || ends(".ndjson")) return InputFormat::Jsonl;
  return InputFormat::Csv;
}

std::string parseable_smiles(std::string_view smiles) {
  if (smiles.find('>') == std::string_view::npos) return std::string(smiles);
  std::string out;
  std::size_t start = 0;
  while (start <= smiles.size()) {
    std::size_t end = smiles.find('>', start);
    if (end == std::string_view::npos) end = smiles.size();
    const auto part = smiles.substr(start, end - start);
    if (!part.empty()) {
      if (!out.empty()) out += '.';
      out += part;
    }
    start = end + 1;
  }
  return out;
}

MolecularGraph record_graph(const DatasetRecord& r) { return parse_smiles(parseable_smiles(r.smiles)); }

Dataset ingest_text(std::string_view text, InputFormat format, Task task) {
  std::vector<Raw> raws;
  switch (format) {
    case InputFormat::Csv: raws = read_delimited(text, ',', task); break;
    case InputFormat::Tsv: raws = read_delimited(text, '\t', task); break;
    case InputFormat::Jsonl: raws = read_jsonl(text, task); break;
  }
  Dataset ds;
  ds.task = task;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < raws.size(); ++i) {
    Raw& raw = raws[i];
    ++ds.summary.rows;
    DatasetRecord rec;
    rec.id = raw.id.empty() ? std::to_string(i) : raw.id;
    rec.smiles = raw.smiles;
    rec.split = raw.split == "val" || raw.split == "validation" ? "valid" : raw.split;
    const std::string where = "line " + std::to_string(raw.line) + " (" + rec.id + "): ";
    if (is_classification(task)) {
      const auto lab = label_from_text(raw.payload);
      if (!lab) throw FormatError(where + "label '" + raw.payload + "' is not binary");
      rec.label = *lab;
    } else {
      rec.caption = trim(raw.payload);
    }
    if (!seen.insert(rec.id).second) {
      ds.summary.skipped.push_back(where + "duplicate id");
      continue;
    }
    try {
      record_graph(rec);
    } catch (const Error& e) {
      ds.summary.skipped.push_back(where + e.what());
      continue;
    }
    ds.records.push_back(std::move(rec));
  }
  ds.summary.kept = ds.records.size();
  return ds;
}

Dataset ingest(const std::string& path, Task task) { return ingest_text(io::read_file(path), format_for_path(path), task); }

std::string dataset_to_jsonl(const Dataset& ds) {
  std::string out;
  for (const auto& r : ds.records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["smiles"] = r.smiles;
    if (is_classification(ds.task)) {
      j["label"] = r.label ? 1 : 0;
    } else {
      j["caption"] = r.caption;
    }
    if (!r.split.empty()) j["split"] = r.split;
    out += j.dump() + "\n";
  }
  return out;
}

Split make_split(std::size_t n, std::uint64_t seed) {
  if (n < 10) throw ConfigError("need at least 10 records to split, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  const auto tenth = static_cast<std::size_t>(std::llround(static_cast<double>(n) / 10.0));
  Split s;
  s.valid.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(tenth));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(tenth), order.begin() + static_cast<std::ptrdiff_t>(2 * tenth));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(2 * tenth), order.end());
  for (auto* v : {&s.train, &s.valid, &s.test}) std::sort(v->begin(), v->end());
  return s;
}

std::vector<Split> make_splits(std::size_t n, std::span<const std::uint64_t> seeds) {
  std::vector<Split> out;
  for (auto seed : seeds) out.push_back(make_split(n, seed));
  return out;
}

bool has_split_tags(const Dataset& ds) {
  return !ds.records.empty() &&
         std::all_of(ds.records.begin(), ds.records.end(), [](const DatasetRecord& r) { return !r.split.empty(); });
}

Split split_from_tags(const Dataset& ds) {
  Split s;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& tag = ds.records[i].split;
    if (tag == "train") {
      s.train.push_back(i);
    } else if (tag == "valid") {
      s.valid.push_back(i);
    } else if (tag == "test") {
      s.test.push_back(i);
    } else {
      throw ConfigError("record " + ds.records[i].id + " has split tag '" + tag + "'");
    }
  }
  return s;
}

}  // namespace gamic
