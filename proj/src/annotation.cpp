#include "hoimotion/annotation.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "hoimotion/affordance.hpp"
#include "hoimotion/tensor_io.hpp"

namespace hoimo::annotation {
namespace {

std::string fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string fmt_vec(const Vec3& v) {
  return "[" + fmt(v.x(), 2) + ", " + fmt(v.y(), 2) + ", " + fmt(v.z(), 2) + "]";
}

const char* kActionList =
    "['face', 'flip', 'grab', 'grasp', 'hold', 'kick', 'lift', 'move', 'pick', "
    "'place', 'push', 'pull', 'put', 'release', 'rotate', 'set', 'slide', 'swing', "
    "'tilt', 'turn', 'sit', 'bend', 'shake', 'wave', 'drag']";

const char* kCoordinateBlock =
    "Coordinate System:\n"
    "The coordinate system of the 3D scene includes x, y, and z-axes. The person "
    "moves on the XOZ plane, and the positive y-axis represents height.\n"
    "Target Object and category:\n";

std::string category_and_size(const TrajectorySummary& s) {
  return "The category of the object is " + s.category + ". The size of the " +
         s.category + " is " + fmt_vec(s.size) + ".";
}

std::string trim_copy(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string hands_label(Hands h) {
  switch (h) {
    case Hands::none: return "none";
    case Hands::left: return "left";
    case Hands::right: return "right";
    case Hands::both: return "both";
  }
  throw InvalidInput("unknown hands value");
}

Hands hands_from_label(const std::string& label) {
  if (label == "none") return Hands::none;
  if (label == "left") return Hands::left;
  if (label == "right") return Hands::right;
  if (label == "both") return Hands::both;
  throw InvalidInput("unknown hands label: " + label);
}

const std::vector<std::string>& direction_labels() {
  static const std::vector<std::string> labels = {
      "left", "right", "top", "bottom",
      "left-top", "left-bottom", "right-top", "right-bottom"};
  return labels;
}

std::string direction_label(const Vec3& offset, const Vec3& extent) {
  const double dead_x = 0.10 * std::abs(extent.x());
  const double dead_y = 0.10 * std::abs(extent.y());
  const bool live_x = std::abs(offset.x()) > dead_x;
  const bool live_y = std::abs(offset.y()) > dead_y;
  const std::string hx = offset.x() < 0 ? "left" : "right";
  const std::string vy = offset.y() >= 0 ? "top" : "bottom";
  if (live_x && live_y) return hx + "-" + vy;
  if (live_x) return hx;
  if (live_y) return vy;
  // Both axes inside the dead zone: the relatively larger offset wins.
  const double rx = dead_x > 0 ? std::abs(offset.x()) / std::abs(extent.x()) : 0.0;
  const double ry = dead_y > 0 ? std::abs(offset.y()) / std::abs(extent.y()) : 0.0;
  return rx >= ry ? hx : vy;
}

TrajectorySummary summarize_trajectory(const geometry::PointCloudSequence& cloud,
                                       const std::string& category, double fps) {
  cloud.validate();
  if (trim_copy(category).empty()) throw InvalidInput("object category must not be empty");
  if (!(fps > 0)) throw InvalidInput("fps must be positive");
  TrajectorySummary s;
  s.category = trim_copy(category);
  s.fps = fps;
  const std::size_t frames = cloud.frames.size();
  s.duration_s = static_cast<double>(frames) / fps;
  const MatX3& first = cloud.frames.front();
  s.size = (first.colwise().maxCoeff() - first.colwise().minCoeff()).transpose();
  const int seconds = static_cast<int>(std::floor(static_cast<double>(frames - 1) / fps));
  for (int sec = 0; sec <= seconds; ++sec) {
    const auto f = std::min(frames - 1,
                            static_cast<std::size_t>(std::lround(sec * fps)));
    s.centers.push_back(cloud.frames[f].colwise().mean().transpose());
  }
  return s;
}

std::string build_coarse_prompt(const TrajectorySummary& summary) {
  if (trim_copy(summary.category).empty()) {
    throw InvalidInput("object category must not be empty");
  }
  if (summary.centers.empty()) throw InvalidInput("trajectory summary has no centers");
  std::ostringstream centers;
  for (std::size_t i = 0; i < summary.centers.size(); ++i) {
    if (i > 0) centers << "; ";
    centers << fmt_vec(summary.centers[i]) << " at " << i << "s";
  }
  std::ostringstream out;
  out << "Instructions: You are an expert on the interaction between 3D human motion "
         "and object. A person will interact with a object, give me a sentence that "
         "how the person will interact with this object based on following "
         "information.\n\n"
      << "[start of Given Information]\n"
      << kCoordinateBlock
      << category_and_size(summary) << "\n"
      << "The interaction with this object will last approximately "
      << fmt(summary.duration_s, 1) << " seconds.\n"
      << "The object center: " << centers.str() << ".\n"
      << "Possible actions list: ACTION_LIST = " << kActionList << "\n"
      << "[End of Given Information]\n";
  return out.str();
}

std::string annotate_coarse(const std::string& prompt, LanguageModelClient& client) {
  std::string text = trim_copy(client.complete(prompt));
  if (text.empty()) throw ClientError("backend returned an empty coarse annotation", prompt);
  return text;
}

std::vector<ContactEvent> infer_contact_events(const Mat& hands,
                                               const geometry::PointCloudSequence& cloud,
                                               double tau, double fps) {
  cloud.validate();
  if (hands.cols() != 6) {
    throw InvalidInput("hand trajectory must have 6 columns (left xyz, right xyz)");
  }
  if (static_cast<std::size_t>(hands.rows()) != cloud.frames.size()) {
    throw InvalidInput("hand trajectory and point cloud must have the same frame count");
  }
  if (!(tau > 0)) throw InvalidInput("contact threshold tau must be positive");
  if (!(fps > 0)) throw InvalidInput("fps must be positive");

  const std::size_t frames = cloud.frames.size();
  const int seconds = static_cast<int>(std::floor(static_cast<double>(frames - 1) / fps));
  std::vector<ContactEvent> events;
  for (int sec = 0; sec <= seconds; ++sec) {
    const auto f = std::min(frames - 1,
                            static_cast<std::size_t>(std::lround(sec * fps)));
    const MatX3& pts = cloud.frames[f];
    const Vec3 center = pts.colwise().mean().transpose();
    const Vec3 extent =
        (pts.colwise().maxCoeff() - pts.colwise().minCoeff()).transpose();
    const Vec3 left = hands.row(f).segment<3>(0).transpose();
    const Vec3 right = hands.row(f).segment<3>(3).transpose();
    const double d_left = (pts.rowwise() - left.transpose()).rowwise().norm().minCoeff();
    const double d_right = (pts.rowwise() - right.transpose()).rowwise().norm().minCoeff();
    const bool c_left = d_left <= tau;
    const bool c_right = d_right <= tau;

    ContactEvent ev;
    ev.time_s = sec;
    if (c_left && c_right) {
      ev.hands = Hands::both;
      ev.position = 0.5 * (left + right);
    } else if (c_left) {
      ev.hands = Hands::left;
      ev.position = left;
    } else if (c_right) {
      ev.hands = Hands::right;
      ev.position = right;
    } else {
      ev.hands = Hands::none;
      ev.position = center;
    }
    if (c_left) ev.dir_left = direction_label(left - center, extent);
    if (c_right) ev.dir_right = direction_label(right - center, extent);
    events.push_back(ev);
  }
  return events;
}

std::string build_fine_prompt(const std::string& coarse_text,
                              const TrajectorySummary& summary,
                              const std::vector<ContactEvent>& events) {
  if (trim_copy(coarse_text).empty()) throw InvalidInput("coarse text must not be empty");
  if (trim_copy(summary.category).empty()) {
    throw InvalidInput("object category must not be empty");
  }
  if (events.size() > summary.centers.size()) {
    throw InvalidInput("more contact events than sampled object centers");
  }
  std::ostringstream out;
  out << "Instructions: " << trim_copy(coarse_text) << "\n\n"
      << "You are an expert on the interaction between 3D human motion and object. "
         "Given the instruction, give me a sentence that how the person will interact "
         "with this object in detailed, including the arm and leg movement in each 3s, "
         "make each sentence just include key action.\n"
      << "[start of Given Information]\n"
      << kCoordinateBlock
      << category_and_size(summary) << "\n"
      << "The object center with hand contact information in total "
      << fmt(summary.duration_s, 1) << " seconds\n";
  for (std::size_t i = 0; i < events.size(); ++i) {
    const ContactEvent& ev = events[i];
    out << "At " << static_cast<long long>(std::llround(ev.time_s)) << "s, object center is "
        << fmt_vec(summary.centers[i]) << ", ";
    switch (ev.hands) {
      case Hands::none:
        out << "no hand contact.";
        break;
      case Hands::left:
        out << "single contact hand(left) at position " << fmt_vec(ev.position) << ".";
        break;
      case Hands::right:
        out << "single contact hand(right) at position " << fmt_vec(ev.position) << ".";
        break;
      case Hands::both:
        out << "both hand in contact at position " << fmt_vec(ev.position) << ".";
        break;
    }
    out << "\n";
  }
  out << "[End of Given Information]\n\n"
      << "[Start of Rule]\n"
      << "Divide the total movement into three step.\n"
      << "Inference how their arms and legs move.\n"
      << "Inference the hand-object interaction direction, chosen from:\"left\", "
         "\"right\", \"top\", \"bottom\",\"left-top\", \"left-bottom\", \"right-top\", "
         "and \"right-bottom\".\n"
      << "Make sure each sentence includes key action.\n"
      << "[End of Rule]\n\n"
      << "[Start of Example]\n"
      << "A person lifts the white chair, rotates the white chair, and puts down the "
         "white chair.\n"
      << "The fine-grained result:\n"
      << "First, the person faces the back of the white chair, grasps it with both "
         "hands from the left-bottom and right-bottom sides, bending slightly at the "
         "knees as both arms lift the chair off the ground.\n"
      << "Next, maintaining grip, the person rotates the white chair with both "
         "hands,lifting the chair slightly higher.\n"
      << "Finally, the person puts down the white chair, with the right arm pushing "
         "from the right-top and the left arm steadying from the left-top, as both "
         "legs move forward to reposition.\n"
      << "[End of Example]\n";
  return out.str();
}

std::array<std::string, 3> annotate_fine(const std::string& prompt,
                                         LanguageModelClient& client) {
  const std::string raw = client.complete(prompt);
  std::vector<std::string> sentences;
  std::istringstream in(raw);
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim_copy(line);
    if (!t.empty()) sentences.push_back(t);
  }
  if (sentences.size() != 3) {
    throw InvalidInput("fine annotation phase count: expected 3 sentences, got " +
                       std::to_string(sentences.size()));
  }
  return {sentences[0], sentences[1], sentences[2]};
}

std::string joined_fine_text(const std::array<std::string, 3>& fine) {
  return fine[0] + " " + fine[1] + " " + fine[2];
}

void save_annotations(const std::filesystem::path& path,
                      const std::vector<AnnotationRecord>& records) {
  io::JsonlWriter writer(path);
  for (const AnnotationRecord& rec : records) {
    nlohmann::json events = nlohmann::json::array();
    for (const ContactEvent& ev : rec.events) {
      events.push_back({{"time_s", ev.time_s},
                        {"hands", hands_label(ev.hands)},
                        {"position", {ev.position.x(), ev.position.y(), ev.position.z()}},
                        {"dir_left", ev.dir_left},
                        {"dir_right", ev.dir_right}});
    }
    nlohmann::json j{{"id", rec.clip_id},
                     {"client", rec.client},
                     {"coarse", rec.coarse_text},
                     {"fine", {rec.fine_text[0], rec.fine_text[1], rec.fine_text[2]}},
                     {"events", events}};
    writer.write_line(j.dump());
  }
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
  std::vector<AnnotationRecord> records;
  for (const std::string& line : io::read_jsonl(path)) {
    nlohmann::json j = nlohmann::json::parse(line);
    AnnotationRecord rec;
    rec.clip_id = j.at("id").get<std::string>();
    rec.client = j.value("client", std::string("unknown"));
    rec.coarse_text = j.at("coarse").get<std::string>();
    const auto& fine = j.at("fine");
    if (fine.size() != 3) {
      throw InvalidInput("fine annotation phase count: expected 3 sentences, got " +
                         std::to_string(fine.size()));
    }
    for (std::size_t i = 0; i < 3; ++i) rec.fine_text[i] = fine[i].get<std::string>();
    for (const auto& e : j.at("events")) {
      ContactEvent ev;
      ev.time_s = e.at("time_s").get<double>();
      ev.hands = hands_from_label(e.at("hands").get<std::string>());
      const auto& p = e.at("position");
      ev.position = Vec3(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
      ev.dir_left = e.value("dir_left", std::string());
      ev.dir_right = e.value("dir_right", std::string());
      rec.events.push_back(ev);
    }
    records.push_back(rec);
  }
  return records;
}

}  // namespace hoimo::annotation
