#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "protoseq/common.hpp"

namespace protoseq {

using json = nlohmann::json;

struct MissingInputError : std::runtime_error {
  explicit MissingInputError(const std::string& path)
      : std::runtime_error("missing input file: " + path), path(path) {}
  std::string path;
};

inline void require_input(const std::string& path) {
  if (!std::filesystem::exists(path)) throw MissingInputError(path);
}

inline std::string read_file(const std::string& path) {
  require_input(path);
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Stage outputs are written to a temp file and renamed into place so a
// crashed stage never leaves a half-written artifact.
inline void atomic_write(const std::string& path, const std::function<void(std::ostream&)>& fn) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), "cannot write: " + tmp.string());
    fn(out);
    out.flush();
    require(out.good(), "write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

inline void atomic_write_text(const std::string& path, const std::string& content) {
  atomic_write(path, [&](std::ostream& os) { os << content; });
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::string content = read_file(path);
  std::vector<std::string> lines;
  size_t pos = 0;
  while (pos < content.size()) {
    size_t eol = content.find('\n', pos);
    if (eol == std::string::npos) {
      lines.push_back(content.substr(pos));
      break;
    }
    lines.push_back(content.substr(pos, eol - pos));
    pos = eol + 1;
  }
  return lines;
}

inline std::vector<json> read_jsonl(const std::string& path) {
  std::vector<json> records;
  for (const std::string& line : read_lines(path)) {
    if (line.empty()) continue;
    records.push_back(json::parse(line));
  }
  return records;
}

inline void write_jsonl(const std::string& path, const std::vector<json>& records) {
  atomic_write(path, [&](std::ostream& os) {
    for (const json& r : records) os << r.dump() << "\n";
  });
}

}  // namespace protoseq
