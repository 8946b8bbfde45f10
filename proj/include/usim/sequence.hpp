// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "usim/error.hpp"
#include "usim/image.hpp"
#include "usim/pgm.hpp"

namespace usim {

/// Per-frame, per-landmark positions. tracks[t][k] is landmark k at frame t.
using LandmarkTracks = std::vector<std::vector<Landmark>>;

/// On-disk description of a sequence: the JSON manifest format.
struct SequenceManifest {
  std::vector<std::string> frames;
  double pixel_spacing_mm = 1.0;
  int reference_frame = 0;
  std::optional<LandmarkTracks> landmarks;
};

/// In-memory sequence with decoded frames.
struct Sequence {
  std::vector<GrayImage> frames;
  double pixel_spacing_mm = 1.0;
  int reference_frame = 0;
  std::optional<LandmarkTracks> landmarks;

  std::size_t size() const noexcept { return frames.size(); }
  const GrayImage& reference() const { return frames.at(static_cast<std::size_t>(reference_frame)); }
};

inline void validate(const Sequence& seq) {
  detail::require(!seq.frames.empty(), ErrorKind::manifest_error, "sequence has no frames");
  detail::require(seq.pixel_spacing_mm > 0.0, ErrorKind::manifest_error,
                  "pixel_spacing_mm must be positive");
  detail::require(seq.reference_frame >= 0 &&
                      static_cast<std::size_t>(seq.reference_frame) < seq.frames.size(),
                  ErrorKind::manifest_error, "reference_frame out of range");
  for (const auto& f : seq.frames)
    detail::require(f.same_shape(seq.frames.front()), ErrorKind::manifest_error,
                    "sequence frames differ in size");
  if (seq.landmarks) {
    detail::require(seq.landmarks->size() == seq.frames.size(), ErrorKind::manifest_error,
                    "landmarks must have one entry per frame");
    const std::size_t per_frame = seq.landmarks->front().size();
    for (const auto& row : *seq.landmarks)
      detail::require(row.size() == per_frame, ErrorKind::manifest_error,
                      "landmark count differs between frames");
  }
}

inline nlohmann::json to_json(const SequenceManifest& m) {
  nlohmann::json j;
  j["frames"] = m.frames;
  j["pixel_spacing_mm"] = m.pixel_spacing_mm;
  j["reference_frame"] = m.reference_frame;
  if (m.landmarks) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& frame : *m.landmarks) {
      nlohmann::json row = nlohmann::json::array();
      for (const auto& p : frame) row.push_back({{"x", p.x}, {"y", p.y}});
      rows.push_back(std::move(row));
    }
    j["landmarks"] = std::move(rows);
  } else {
    j["landmarks"] = nullptr;
  }
  return j;
}

inline SequenceManifest manifest_from_json(const nlohmann::json& j) {
  try {
    SequenceManifest m;
    m.frames = j.at("frames").get<std::vector<std::string>>();
    m.pixel_spacing_mm = j.value("pixel_spacing_mm", 1.0);
    m.reference_frame = j.value("reference_frame", 0);
    if (j.contains("landmarks") && !j.at("landmarks").is_null()) {
      LandmarkTracks tracks;
      for (const auto& row : j.at("landmarks")) {
        std::vector<Landmark> frame;
        for (const auto& p : row) frame.push_back({p.at("x").get<double>(), p.at("y").get<double>()});
        tracks.push_back(std::move(frame));
      }
      m.landmarks = std::move(tracks);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::manifest_error, std::string("bad manifest: ") + e.what());
  }
}

inline SequenceManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::manifest_error, std::string("manifest is not JSON: ") + e.what());
  }
  return manifest_from_json(j);
}

inline void write_manifest(const SequenceManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io_error, "cannot write manifest " + path.string());
  out << to_json(m).dump(2) << '\n';
}

/// Loads every frame listed in the manifest. Relative frame paths resolve
/// against the manifest's directory.
inline Sequence load_sequence(const std::filesystem::path& manifest_path) {
  const SequenceManifest m = read_manifest(manifest_path);
  Sequence seq;
  const auto base = manifest_path.parent_path();
  for (const auto& f : m.frames) {
    std::filesystem::path p(f);
    seq.frames.push_back(load_pgm(p.is_absolute() ? p : base / p));
  }
  seq.pixel_spacing_mm = m.pixel_spacing_mm;
  seq.reference_frame = m.reference_frame;
  seq.landmarks = m.landmarks;
  validate(seq);
  return seq;
}

/// Writes frame_NNNN.pgm files plus manifest.json into `dir`.
inline SequenceManifest save_sequence(const Sequence& seq, const std::filesystem::path& dir) {
  validate(seq);
  std::filesystem::create_directories(dir);
  SequenceManifest m;
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04zu.pgm", t);
    save_pgm(seq.frames[t], dir / name);
    m.frames.emplace_back(name);
  }
  m.pixel_spacing_mm = seq.pixel_spacing_mm;
  m.reference_frame = seq.reference_frame;
  m.landmarks = seq.landmarks;
  write_manifest(m, dir / "manifest.json");
  return m;
}

}  // namespace usim
