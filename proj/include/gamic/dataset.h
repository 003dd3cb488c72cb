#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gamic/molgraph.h"
#include "gamic/promptllm.h"

namespace gamic {

struct DatasetRecord {
  std::string id;
  std::string smiles;   // as written in the source file
  std::string caption;  // caption task only
  bool label = false;   // classification tasks only
  std::string split;    // "train" / "valid" / "test" when the source carries one
};

struct IngestSummary {
  std::size_t rows = 0;
  std::size_t kept = 0;
  std::vector<std::string> skipped;  // "line N (id): reason"
  std::string describe() const;
};

struct Dataset {
  Task task = Task::Caption;
  std::vector<DatasetRecord> records;
  IngestSummary summary;
};

enum class InputFormat { Csv, Tsv, Jsonl };

/// Picks the format from the extension: .tsv, .jsonl/.ndjson, anything else CSV.
InputFormat format_for_path(std::string_view path);

/// Reaction SMILES ("A.B>agents>P") become one dot-separated molecule so the
/// parser sees every component. Plain SMILES pass through unchanged.
std::string parseable_smiles(std::string_view smiles);

/// Parses a record's SMILES, reactions included.
MolecularGraph record_graph(const DatasetRecord& r);

/// Delimited files need a header with "smiles" and "caption" (caption task)
/// or "label" (classification); "id" and "split" are optional. JSONL lines
/// carry the same fields. A missing field raises FormatError; records whose
/// SMILES fail to parse, or that repeat an id, are skipped and counted.
/// Labels accept 1/0, true/false, yes/no and high/low.
Dataset ingest_text(std::string_view text, InputFormat format, Task task);
Dataset ingest(const std::string& path, Task task);

std::string dataset_to_jsonl(const Dataset& ds);

/// Splitting seeds used when a dataset has no split column.
inline constexpr std::array<std::uint64_t, 3> kSplitSeeds = {0x6A1C0001ULL, 0x6A1C0002ULL, 0x6A1C0003ULL};

struct Split {
  std::vector<std::size_t> train, valid, test;  // record indices, ascending
};

/// Seeded 8:1:1 partition of n records: valid and test get round(n / 10)
/// each, train the rest. ConfigError when n < 10.
Split make_split(std::size_t n, std::uint64_t seed);
std::vector<Split> make_splits(std::size_t n, std::span<const std::uint64_t> seeds = kSplitSeeds);

/// Partition from the records' split tags. ConfigError when any record is
/// untagged or carries an unknown tag.
Split split_from_tags(const Dataset& ds);

bool has_split_tags(const Dataset& ds);

}  // namespace gamic
