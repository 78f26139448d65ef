#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "hoimotion/common.hpp"
#include "hoimotion/geometry.hpp"
#include "hoimotion/llm_client.hpp"

namespace hoimo::annotation {

// Compact description of an object trajectory used to fill prompt slots.
struct TrajectorySummary {
  std::string category;
  Vec3 size = Vec3::Zero();          // bounding-box extents of the first frame
  double duration_s = 0.0;           // clip length in seconds
  std::vector<Vec3> centers;         // centroid sampled once per second
  double fps = 30.0;
};

enum class Hands { none, left, right, both };

std::string hands_label(Hands h);
Hands hands_from_label(const std::string& label);

// One hand/object contact observation sampled at a whole second.
struct ContactEvent {
  double time_s = 0.0;
  Hands hands = Hands::none;
  Vec3 position = Vec3::Zero();      // mean position of the contacting hands
  std::string dir_left;              // grasp direction per hand; empty when
  std::string dir_right;             // that hand is not in contact
};

// Full annotation for one clip, persisted as a JSON line.
struct AnnotationRecord {
  std::string clip_id;
  std::string coarse_text;
  std::array<std::string, 3> fine_text{};
  std::vector<ContactEvent> events;
  std::string client;                // backend that produced the text
};

// The eight grasp-direction labels, horizontal axis first.
const std::vector<std::string>& direction_labels();

// Classifies an offset from the object centre on the (x, y) plane. Offsets
// within ten percent of the box extent on an axis collapse to the other
// axis's pure label; if both axes are inside the dead zone the relatively
// larger offset wins.
std::string direction_label(const Vec3& offset, const Vec3& extent);

TrajectorySummary summarize_trajectory(const geometry::PointCloudSequence& cloud,
                                       const std::string& category, double fps);

std::string build_coarse_prompt(const TrajectorySummary& summary);

std::string annotate_coarse(const std::string& prompt, LanguageModelClient& client);

// hands: per-frame left/right wrist positions as an L x 6 matrix
// (columns 0..2 left, 3..5 right). One event per whole second.
std::vector<ContactEvent> infer_contact_events(const Mat& hands,
                                               const geometry::PointCloudSequence& cloud,
                                               double tau, double fps);

std::string build_fine_prompt(const std::string& coarse_text,
                              const TrajectorySummary& summary,
                              const std::vector<ContactEvent>& events);

// Returns exactly three phase sentences; anything else from the backend is
// rejected with a "phase count" error.
std::array<std::string, 3> annotate_fine(const std::string& prompt,
                                         LanguageModelClient& client);

void save_annotations(const std::filesystem::path& path,
                      const std::vector<AnnotationRecord>& records);
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);

// Joins the three phase sentences for text encoders and metric scoring.
std::string joined_fine_text(const std::array<std::string, 3>& fine);

}  // namespace hoimo::annotation
