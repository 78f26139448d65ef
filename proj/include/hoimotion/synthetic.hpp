#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hoimotion/annotation.hpp"
#include "hoimotion/geometry.hpp"
#include "hoimotion/motion.hpp"

namespace hoimo::synth {

// One paired human/object sample: encoded motion plus the object cloud in
// the same canonical frame (clips are generated pre-canonicalized, so the
// decoded joints and the cloud coordinates agree).
struct InteractionClip {
  std::string id;
  std::string scenario;  // carry | push | lift
  std::string split = "train";
  motion::MotionSequence motion;
  geometry::PointCloudSequence cloud;
  std::optional<annotation::AnnotationRecord> annotation;
  // Frames [attach_start, attach_end) have both hands exactly on the object.
  int attach_start = 0;
  int attach_end = 0;
};

struct SyntheticOptions {
  int clip_len = 100;
  double fps = 30.0;
  int cloud_points = 64;  // includes the two grip points
  double ground = 0.02;   // planted toe height (m)
};

// Procedural stick-figure interactions. The object cloud carries two grip
// points pinned to the hands while attached, so ground-truth contact holds
// by construction. Deterministic per seed.
std::vector<InteractionClip> generate_synthetic(std::uint64_t seed, int n_clips,
                                                const std::string& scenario,
                                                const SyntheticOptions& opts = {});

// Non-overlapping windows of clip_len frames; the remainder is dropped.
std::vector<motion::MotionSequence> split_clips(const motion::MotionSequence& recording,
                                                int clip_len);

}  // namespace hoimo::synth
