#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "divid/core/error.hpp"
#include "divid/core/hash.hpp"

namespace divid::data {

namespace fs = std::filesystem;

inline constexpr int kManifestSchemaVersion = 1;

enum class Source { vidvrd, svd, pika, gen2, sora, youtube, toy_real, toy_fake };
enum class Label { real, fake };
enum class Split { train, test_in, test_out };

inline const std::vector<std::pair<Source, const char*>>& source_names() {
  static const std::vector<std::pair<Source, const char*>> names{
      {Source::vidvrd, "vidvrd"}, {Source::svd, "svd"},         {Source::pika, "pika"},
      {Source::gen2, "gen2"},     {Source::sora, "sora"},       {Source::youtube, "youtube"},
      {Source::toy_real, "toy_real"}, {Source::toy_fake, "toy_fake"}};
  return names;
}

inline std::string to_string(Source s) {
  for (const auto& [v, n] : source_names())
    if (v == s) return n;
  return "?";
}
inline std::string to_string(Label l) { return l == Label::real ? "real" : "fake"; }
inline std::string to_string(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::test_in:
      return "test_in";
    case Split::test_out:
      return "test_out";
  }
  return "?";
}

inline Source parse_source(const std::string& s) {
  for (const auto& [v, n] : source_names())
    if (s == n) return v;
  throw UsageError("unknown source '" + s + "'");
}
inline Label parse_label(const std::string& s) {
  if (s == "real") return Label::real;
  if (s == "fake") return Label::fake;
  throw UsageError("unknown label '" + s + "'");
}
inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test_in") return Split::test_in;
  if (s == "test_out") return Split::test_out;
  throw UsageError("unknown split '" + s + "'");
}

// The label every source implies: generator outputs are fake, camera footage is real.
inline Label implied_label(Source s) {
  switch (s) {
    case Source::vidvrd:
    case Source::youtube:
    case Source::toy_real:
      return Label::real;
    default:
      return Label::fake;
  }
}

struct ClipRecord {
  std::string clip_id;
  Source source = Source::toy_real;
  Label label = Label::real;
  Split split = Split::train;
  std::vector<std::string> frame_paths;
  std::optional<std::string> dire_path;
  int frame_count = 0;
  double fps = 0.0;
  int source_width = 0;
  int source_height = 0;
  std::string config_digest;
  std::string dire_digest;

  bool operator==(const ClipRecord&) const = default;
};

inline void validate(const ClipRecord& r) {
  if (r.clip_id.empty()) throw DataError("clip record without clip_id");
  if (r.frame_count != static_cast<int>(r.frame_paths.size())) {
    throw DataError("clip '" + r.clip_id + "': frame_count " + std::to_string(r.frame_count) + " but " +
                    std::to_string(r.frame_paths.size()) + " frame paths");
  }
  if (implied_label(r.source) != r.label) {
    throw DataError("clip '" + r.clip_id + "': source " + to_string(r.source) + " cannot carry label " +
                    to_string(r.label));
  }
}

inline nlohmann::json to_json(const ClipRecord& r) {
  nlohmann::json j;
  j["schema_version"] = kManifestSchemaVersion;
  j["clip_id"] = r.clip_id;
  j["source"] = to_string(r.source);
  j["label"] = to_string(r.label);
  j["split"] = to_string(r.split);
  j["frame_paths"] = r.frame_paths;
  j["dire_path"] = r.dire_path ? nlohmann::json(*r.dire_path) : nlohmann::json(nullptr);
  j["frame_count"] = r.frame_count;
  j["fps"] = r.fps;
  j["source_resolution"] = {r.source_width, r.source_height};
  j["config_digest"] = r.config_digest;
  j["dire_digest"] = r.dire_digest;
  return j;
}

inline ClipRecord clip_from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kManifestSchemaVersion) {
      throw DataError("unsupported manifest schema_version " + std::to_string(version));
    }
    ClipRecord r;
    r.clip_id = j.at("clip_id").get<std::string>();
    r.source = parse_source(j.at("source").get<std::string>());
    r.label = parse_label(j.at("label").get<std::string>());
    r.split = parse_split(j.at("split").get<std::string>());
    r.frame_paths = j.at("frame_paths").get<std::vector<std::string>>();
    if (j.contains("dire_path") && !j["dire_path"].is_null()) r.dire_path = j["dire_path"].get<std::string>();
    r.frame_count = j.at("frame_count").get<int>();
    r.fps = j.at("fps").get<double>();
    const auto res = j.at("source_resolution");
    r.source_width = res.at(0).get<int>();
    r.source_height = res.at(1).get<int>();
    r.config_digest = j.value("config_digest", "");
    r.dire_digest = j.value("dire_digest", "");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest record: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("malformed manifest record: ") + e.what());
  }
}

// Paths inside records are relative to `base_dir` (the manifest's directory) unless absolute.
struct DatasetManifest {
  std::vector<ClipRecord> entries;
  fs::path base_dir;

  fs::path resolve(const std::string& p) const {
    fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }

  std::vector<const ClipRecord*> split(Split s) const {
    std::vector<const ClipRecord*> out;
    for (const auto& e : entries)
      if (e.split == s) out.push_back(&e);
    return out;
  }

  const ClipRecord* find(const std::string& clip_id) const {
    for (const auto& e : entries)
      if (e.clip_id == clip_id) return &e;
    return nullptr;
  }

  void check_unique_ids() const {
    std::set<std::string> seen;
    for (const auto& e : entries) {
      if (!seen.insert(e.clip_id).second) throw DataError("duplicate clip_id '" + e.clip_id + "' in manifest");
    }
  }

  std::vector<std::string> missing_paths() const {
    std::vector<std::string> out;
    for (const auto& e : entries) {
      for (const auto& p : e.frame_paths)
        if (!fs::exists(resolve(p))) out.push_back(p);
      if (e.dire_path && !fs::exists(resolve(*e.dire_path))) out.push_back(*e.dire_path);
    }
    return out;
  }

  // Clip counts keyed by "source/split" and then label.
  std::map<std::string, std::map<std::string, int>> counts() const {
    std::map<std::string, std::map<std::string, int>> out;
    for (const auto& e : entries) ++out[to_string(e.source) + "/" + to_string(e.split)][to_string(e.label)];
    return out;
  }
};

inline std::string serialize_manifest(const DatasetManifest& m) {
  std::string out;
  for (const auto& e : m.entries) out += to_json(e).dump() + "\n";
  return out;
}

inline DatasetManifest parse_manifest(std::istream& in, const fs::path& base_dir, const std::string& origin = "manifest") {
  DatasetManifest m;
  m.base_dir = base_dir;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
    ClipRecord r = clip_from_json(j);
    validate(r);
    m.entries.push_back(std::move(r));
  }
  m.check_unique_ids();
  return m;
}

inline DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  return parse_manifest(in, path.parent_path(), path.string());
}

inline void write_manifest(const DatasetManifest& m, const fs::path& path) {
  m.check_unique_ids();
  for (const auto& e : m.entries) validate(e);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot write manifest " + path.string());
    out << serialize_manifest(m);
  }
  fs::rename(tmp, path);
}

}  // namespace divid::data
