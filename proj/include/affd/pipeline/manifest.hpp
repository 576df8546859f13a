#pragma once

// Manifest and extraction-index CSV files.
//
// Manifest: header `path,label,split,source_tag`; label in {real, fake}; split in
// {train, test, eval}. Relative paths resolve against the manifest's directory. Fields may not
// contain commas.

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "affd/error.hpp"

namespace affd::pipeline {

namespace fs = std::filesystem;

enum class Split { train, test, eval };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    default: return "eval";
  }
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  if (s == "eval") return Split::eval;
  throw ConfigError("unknown split '" + s + "' (allowed: train, test, eval)");
}

inline int parse_label(const std::string& s) {
  if (s == "real") return 0;
  if (s == "fake") return 1;
  throw ConfigError("unknown label '" + s + "' (allowed: real, fake)");
}

inline const char* label_name(int label) { return label == 1 ? "fake" : "real"; }

struct ManifestEntry {
  std::string path;  // as written in the manifest
  int label = 0;
  Split split = Split::train;
  std::string source_tag;
};

struct Manifest {
  fs::path base_dir;
  std::vector<ManifestEntry> entries;

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }
};

namespace detail_csv {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::vector<std::vector<std::string>> read_rows(const fs::path& path, const std::string& expected_header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("'" + path.string() + "': empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected_header)
    throw ConfigError("'" + path.string() + "': header is '" + line + "', expected '" + expected_header + "'");
  const std::size_t n_fields = split_fields(expected_header).size();
  std::vector<std::vector<std::string>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto f = split_fields(line);
    if (f.size() != n_fields)
      throw ConfigError("'" + path.string() + "' line " + std::to_string(lineno) + ": expected " +
                        std::to_string(n_fields) + " fields, found " + std::to_string(f.size()));
    rows.push_back(std::move(f));
  }
  return rows;
}

}  // namespace detail_csv

inline constexpr const char* kManifestHeader = "path,label,split,source_tag";

inline Manifest read_manifest(const fs::path& path) {
  Manifest m;
  m.base_dir = path.parent_path();
  std::set<std::string> seen;
  for (auto& f : detail_csv::read_rows(path, kManifestHeader)) {
    ManifestEntry e;
    e.path = f[0];
    e.label = parse_label(f[1]);
    e.split = parse_split(f[2]);
    e.source_tag = f[3];
    if (!seen.insert(e.path).second) throw ConfigError("manifest: duplicate path '" + e.path + "'");
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  out << kManifestHeader << '\n';
  for (const auto& e : entries)
    out << e.path << ',' << label_name(e.label) << ',' << to_string(e.split) << ',' << e.source_tag << '\n';
}

/// One 1-second segment after extraction, or a failed source file (segment < 0, status != "ok").
struct IndexRow {
  std::string source_path;  // resolved audio path
  int segment = 0;
  int label = 0;
  Split split = Split::train;
  std::string source_tag;
  std::string mfcc_file;  // relative to the index directory; empty when not extracted
  std::string lfcc_file;
  std::string status = "ok";

  bool ok() const { return status == "ok"; }
};

inline constexpr const char* kIndexHeader = "source_path,segment,label,split,source_tag,mfcc,lfcc,status";

struct Index {
  fs::path base_dir;
  std::vector<IndexRow> rows;

  fs::path resolve(const std::string& p) const { return base_dir / p; }
};

inline bool is_index_file(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  if (!in || !std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line == kIndexHeader;
}

inline Index read_index(const fs::path& path) {
  Index idx;
  idx.base_dir = path.parent_path();
  for (auto& f : detail_csv::read_rows(path, kIndexHeader)) {
    IndexRow r;
    r.source_path = f[0];
    r.segment = std::stoi(f[1]);
    r.label = parse_label(f[2]);
    r.split = parse_split(f[3]);
    r.source_tag = f[4];
    r.mfcc_file = f[5];
    r.lfcc_file = f[6];
    r.status = f[7];
    idx.rows.push_back(std::move(r));
  }
  return idx;
}

inline void write_index(const fs::path& path, const std::vector<IndexRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write index '" + path.string() + "'");
  out << kIndexHeader << '\n';
  for (const auto& r : rows)
    out << r.source_path << ',' << r.segment << ',' << label_name(r.label) << ',' << to_string(r.split) << ','
        << r.source_tag << ',' << r.mfcc_file << ',' << r.lfcc_file << ',' << r.status << '\n';
}

}  // namespace affd::pipeline
