#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dynfv/image.hpp"
#include "dynfv/spatial.hpp"
#include "dynfv/trajectory.hpp"

namespace dynfv {

// On-disk layout:
//   <root>/<camera>/<sequence>/<frame>.png   8-bit RGB frames
//   <root>/<camera>/<sequence>/tracklets.trk dense trajectories
//   <root>/<camera>/mask.png                 optional per-camera mask
// A sequence directory is named `<identity>` or `<identity>_s<k>` when an
// identity has several sequences in the same camera (TSD-style data).
struct SequenceRef {
  std::string camera;
  std::string name;      // directory name
  std::string identity;  // name with any _s<k> suffix stripped
  std::filesystem::path path;
};

struct DatasetIndex {
  std::filesystem::path root;
  std::vector<std::string> cameras;          // sorted
  std::vector<SequenceRef> sequences;        // sorted by (camera, name)
  std::map<std::string, Mask> camera_masks;  // cameras with a mask.png

  std::vector<SequenceRef> camera_sequences(const std::string& camera) const;
  // Identities present in every camera, sorted.
  std::vector<std::string> common_identities() const;
  const Mask* mask_for(const std::string& camera) const;
};

std::string identity_of(const std::string& sequence_name);

DatasetIndex scan_dataset(const std::string& root);

std::vector<Tracklet> load_sequence_tracklets(const SequenceRef& seq);
FrameSequence load_sequence_frames(const SequenceRef& seq, const Mask* mask);

}  // namespace dynfv
