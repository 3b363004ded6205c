#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "divid/core/error.hpp"
#include "divid/core/hash.hpp"
#include "divid/data/clips.hpp"
#include "divid/data/manifest.hpp"
#include "divid/data/video.hpp"

namespace divid::data {

// Either a fixed split, or a hash-based train/test_in assignment with the given test fraction.
struct SplitRule {
  std::optional<Split> fixed;
  double test_fraction = 0.0;

  Split assign(const std::string& clip_id) const {
    if (fixed) return *fixed;
    const double u = static_cast<double>(fnv1a64(clip_id) >> 11) * 0x1.0p-53;
    return u < test_fraction ? Split::test_in : Split::train;
  }

  std::string str() const {
    if (fixed) return to_string(*fixed);
    std::ostringstream os;
    os << "auto:" << test_fraction;
    return os.str();
  }
};

inline SplitRule parse_split_rule(const std::string& s) {
  if (s.rfind("auto:", 0) == 0) {
    SplitRule r;
    try {
      r.test_fraction = std::stod(s.substr(5));
    } catch (const std::logic_error&) {
      throw UsageError("bad split rule '" + s + "'");
    }
    if (r.test_fraction < 0.0 || r.test_fraction > 1.0) throw UsageError("test fraction must be in [0, 1]");
    return r;
  }
  return SplitRule{parse_split(s), 0.0};
}

// A directory whose clips all share one (source, label) tag.
struct ScanRoot {
  fs::path path;
  Source source = Source::toy_real;
  Label label = Label::real;
  SplitRule split;
};

// Parses `path:source:label:split`.
inline ScanRoot parse_scan_root(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  // `auto:<fraction>` contributes an extra separator.
  if (parts.size() == 5 && parts[3] == "auto") {
    parts[3] += ":" + parts[4];
    parts.pop_back();
  }
  if (parts.size() != 4) throw UsageError("root must be path:source:label:split, got '" + text + "'");
  ScanRoot r{parts[0], parse_source(parts[1]), parse_label(parts[2]), parse_split_rule(parts[3])};
  if (implied_label(r.source) != r.label) {
    throw UsageError("source " + parts[1] + " cannot carry label " + parts[2]);
  }
  return r;
}

struct BuildOptions {
  // Where frames decoded from video files are written (<frames_root>/<source>/<label>/<clip_id>/).
  fs::path frames_root;
  // Manifest location; frame paths are stored relative to its directory.
  fs::path manifest_path;
  int clip_length = kDefaultClipLength;
  std::uint64_t seed = 0;
  double default_fps = 25.0;
};

struct BuildResult {
  DatasetManifest manifest;
  std::vector<std::string> warnings;

  std::map<std::string, std::map<std::string, int>> counts() const { return manifest.counts(); }
};

inline bool is_video_file(const fs::path& p) {
  static const std::set<std::string> exts{".mp4", ".avi", ".mkv", ".mov", ".webm", ".m4v"};
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return exts.count(e) != 0;
}

inline std::vector<fs::path> frame_files_in(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind("frame_", 0) == 0 && e.path().extension() == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string frame_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04zu.png", index);
  return buf;
}

inline std::string build_digest(const std::vector<ScanRoot>& roots, const BuildOptions& opt) {
  std::ostringstream os;
  for (const auto& r : roots) {
    os << r.path.string() << '|' << to_string(r.source) << '|' << to_string(r.label) << '|' << r.split.str() << '\n';
  }
  os << "clip_length=" << opt.clip_length << "\nseed=" << opt.seed << '\n';
  return digest_of(os.str());
}

// Scans each root: a subdirectory holding frame_*.png files is one clip; a video file is decoded,
// cropped to `clip_length` frames with a per-clip seed, and written out as PNG frames.
inline BuildResult build_manifest(const std::vector<ScanRoot>& roots, const BuildOptions& opt) {
  BuildResult result;
  const fs::path base = opt.manifest_path.has_parent_path() ? opt.manifest_path.parent_path() : fs::path(".");
  result.manifest.base_dir = base;
  const std::string digest = build_digest(roots, opt);

  auto rel = [&base](const fs::path& p) { return fs::relative(fs::absolute(p), fs::absolute(base)).generic_string(); };
  std::set<std::string> ids;

  for (const auto& root : roots) {
    if (!fs::is_directory(root.path)) throw DataError("scan root " + root.path.string() + " is not a directory");
    std::vector<fs::path> children;
    for (const auto& e : fs::directory_iterator(root.path)) children.push_back(e.path());
    std::sort(children.begin(), children.end());

    std::size_t found = 0;
    for (const auto& child : children) {
      ClipRecord rec;
      rec.source = root.source;
      rec.label = root.label;
      rec.config_digest = digest;
      rec.clip_id = to_string(root.source) + "-" + child.stem().string();

      if (fs::is_directory(child)) {
        const auto frames = frame_files_in(child);
        if (frames.empty()) continue;
        const auto first = load_frame(frames.front().string(), 0);
        rec.source_width = first.width;
        rec.source_height = first.height;
        rec.fps = opt.default_fps;
        for (const auto& f : frames) rec.frame_paths.push_back(rel(f));
      } else if (is_video_file(child)) {
        DecodedVideo video = extract_frames(child.string());
        if (video.frames.size() < static_cast<std::size_t>(opt.clip_length)) {
          result.warnings.push_back("skipping " + child.string() + ": " + std::to_string(video.frames.size()) +
                                    " frames < clip length " + std::to_string(opt.clip_length));
          continue;
        }
        auto frames = crop_clip(video.frames, opt.clip_length, clip_seed(rec.clip_id, opt.seed));
        const fs::path dir = opt.frames_root / to_string(root.source) / to_string(root.label) / rec.clip_id;
        fs::create_directories(dir);
        for (std::size_t i = 0; i < frames.size(); ++i) {
          const fs::path p = dir / frame_name(i);
          save_frame(frames[i], p.string());
          rec.frame_paths.push_back(rel(p));
        }
        rec.source_width = frames.front().width;
        rec.source_height = frames.front().height;
        rec.fps = video.fps > 0 ? video.fps : opt.default_fps;
      } else {
        continue;
      }
      if (!ids.insert(rec.clip_id).second) throw DataError("duplicate clip_id '" + rec.clip_id + "'");
      rec.frame_count = static_cast<int>(rec.frame_paths.size());
      rec.split = root.split.assign(rec.clip_id);
      result.manifest.entries.push_back(std::move(rec));
      ++found;
    }
    if (found == 0) result.warnings.push_back("scan root " + root.path.string() + " contains no clips");
  }
  return result;
}

}  // namespace divid::data
