#pragma once

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace bugforge {

using Json = nlohmann::json;

struct JsonlStats {
  std::size_t lines = 0;    // non-blank lines seen
  std::size_t skipped = 0;  // malformed lines skipped (strict=false only)
  std::vector<std::string> issues;
};

// Streams a JSONL file line by line; blank lines are ignored. Malformed lines
// raise ParseError when strict, otherwise they are recorded in the returned
// stats and skipped. The callback receives (1-based line number, parsed value).
JsonlStats for_each_jsonl(const std::string& path, bool strict,
                          const std::function<void(std::size_t, const Json&)>& fn);

void write_jsonl(const std::string& path, const std::vector<Json>& records);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& value, int indent = 2);

}  // namespace bugforge
