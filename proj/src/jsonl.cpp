#include "bugforge/jsonl.hpp"

#include <fstream>

#include "bugforge/errors.hpp"

namespace bugforge {

JsonlStats for_each_jsonl(const std::string& path, bool strict,
                          const std::function<void(std::size_t, const Json&)>& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  JsonlStats stats;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++stats.lines;
    Json value = Json::parse(line, nullptr, false);
    if (value.is_discarded()) {
      const std::string msg = path + ":" + std::to_string(lineno) + ": invalid JSON";
      if (strict) throw ParseError(msg);
      ++stats.skipped;
      stats.issues.push_back(msg);
      continue;
    }
    fn(lineno, value);
  }
  return stats;
}

void write_jsonl(const std::string& path, const std::vector<Json>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const Json& r : records) out << r.dump() << '\n';
  if (!out) throw IoError("write failed: " + path);
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  Json value = Json::parse(in, nullptr, false);
  if (value.is_discarded()) throw ParseError("invalid JSON in " + path);
  return value;
}

void write_json_file(const std::string& path, const Json& value, int indent) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << value.dump(indent) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace bugforge
