#include "hoimotion/llm_client.hpp"

#include "hoimotion/annotation.hpp"
#include "hoimotion/common.hpp"

// httplib drags in system headers whose macros clash with Eigen internals, so
// it must come after every Eigen-bearing include.
#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <vector>

namespace hoimo::annotation {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

// Returns the remainder of the first line that starts with `prefix`.
std::optional<std::string> line_after(const std::string& text, const std::string& prefix) {
  for (const std::string& line : split_lines(text)) {
    if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
  }
  return std::nullopt;
}

// Parses "[a, b, c]" starting at `pos`; advances `pos` past the bracket.
std::optional<Vec3> parse_vec3(const std::string& s, std::size_t& pos) {
  std::size_t open = s.find('[', pos);
  if (open == std::string::npos) return std::nullopt;
  std::size_t close = s.find(']', open);
  if (close == std::string::npos) return std::nullopt;
  std::istringstream in(s.substr(open + 1, close - open - 1));
  Vec3 v;
  char comma = ',';
  in >> v.x() >> comma >> v.y() >> comma >> v.z();
  if (in.fail()) return std::nullopt;
  pos = close + 1;
  return v;
}

struct ParsedPrompt {
  std::string category;
  Vec3 size = Vec3::Zero();
  std::vector<Vec3> centers;   // one per sampled second
  std::vector<ContactEvent> events;
  bool has_events = false;     // fine prompts carry contact lines
};

ParsedPrompt parse_prompt(const std::string& prompt) {
  ParsedPrompt out;
  std::optional<std::string> cat = line_after(prompt, "The category of the object is ");
  if (!cat) throw ClientError("prompt lacks an object category line", prompt);
  std::size_t dot = cat->find('.');
  out.category = trim(dot == std::string::npos ? *cat : cat->substr(0, dot));
  if (out.category.empty()) throw ClientError("prompt has an empty object category", prompt);

  std::size_t size_at = prompt.find("The size of the ");
  if (size_at != std::string::npos) {
    std::size_t pos = size_at;
    if (std::optional<Vec3> v = parse_vec3(prompt, pos)) out.size = *v;
  }

  if (std::optional<std::string> centers_line = line_after(prompt, "The object center: ")) {
    std::size_t pos = 0;
    while (std::optional<Vec3> v = parse_vec3(*centers_line, pos)) out.centers.push_back(*v);
  }

  for (const std::string& line : split_lines(prompt)) {
    if (line.rfind("At ", 0) != 0) continue;
    std::size_t s_mark = line.find("s,");
    if (s_mark == std::string::npos) continue;
    ContactEvent ev;
    ev.time_s = std::strtod(line.c_str() + 3, nullptr);
    std::size_t pos = s_mark;
    std::optional<Vec3> center = parse_vec3(line, pos);
    if (!center) continue;
    out.has_events = true;
    out.centers.push_back(*center);
    if (line.find("no hand contact") != std::string::npos) {
      ev.hands = Hands::none;
      ev.position = *center;
    } else {
      if (line.find("both hand in contact") != std::string::npos) {
        ev.hands = Hands::both;
      } else if (line.find("single contact hand(left)") != std::string::npos) {
        ev.hands = Hands::left;
      } else if (line.find("single contact hand(right)") != std::string::npos) {
        ev.hands = Hands::right;
      } else {
        continue;
      }
      std::optional<Vec3> contact = parse_vec3(line, pos);
      if (!contact) continue;
      ev.position = *contact;
      std::string label = direction_label(ev.position - *center, out.size);
      if (ev.hands == Hands::both) {
        // Only the mean grasp point is reported, so synthesise a symmetric
        // two-hand grasp that keeps the vertical component of the label.
        std::string vert;
        if (label.find("top") != std::string::npos) vert = "-top";
        if (label.find("bottom") != std::string::npos) vert = "-bottom";
        ev.dir_left = "left" + vert;
        ev.dir_right = "right" + vert;
      } else if (ev.hands == Hands::left) {
        ev.dir_left = label;
      } else {
        ev.dir_right = label;
      }
    }
    out.events.push_back(ev);
  }
  return out;
}

// Dominant-displacement verb for one movement phase. `ref_xz` points from
// the mover's start (the origin of the canonical frame) toward the object,
// so motion along it reads as pushing and motion against it as pulling.
std::string phase_verb(const Vec3& d, const Vec3& ref_xz) {
  const double eps = 0.05;
  if (d.norm() < eps) return "hold";
  const double horiz = std::hypot(d.x(), d.z());
  if (std::abs(d.y()) >= horiz) return d.y() > 0 ? "lift" : "put";
  if (std::hypot(ref_xz.x(), ref_xz.z()) < 1e-9) return "move";
  const double along = d.x() * ref_xz.x() + d.z() * ref_xz.z();
  return along >= 0 ? "push" : "pull";
}

std::vector<std::string> phase_verbs(const std::vector<Vec3>& centers) {
  std::vector<std::string> verbs(3, "hold");
  if (centers.size() >= 2) {
    const Vec3 ref = Vec3(centers.front().x(), 0.0, centers.front().z());
    const std::size_t last = centers.size() - 1;
    for (int p = 0; p < 3; ++p) {
      const Vec3 a = centers[last * p / 3];
      const Vec3 b = centers[last * (p + 1) / 3];
      verbs[static_cast<std::size_t>(p)] = phase_verb(b - a, ref);
    }
  }
  if (verbs[0] == "lift" && verbs[1] == "hold" && verbs[2] == "put") {
    verbs[1] = "rotate";  // raised, turned in place, set back down
  }
  return verbs;
}

std::string coarse_phrase(const std::string& verb, const std::string& cat) {
  if (verb == "lift") return "lifts the " + cat;
  if (verb == "put") return "puts down the " + cat;
  if (verb == "push") return "pushes the " + cat;
  if (verb == "pull") return "pulls the " + cat;
  if (verb == "rotate") return "rotates the " + cat;
  if (verb == "move") return "moves the " + cat;
  return "holds the " + cat;
}

std::string fine_phrase(const std::string& verb, const std::string& cat) {
  if (verb == "lift") return "lifts the " + cat + " off the ground";
  if (verb == "put") return "puts down the " + cat;
  if (verb == "push") return "pushes the " + cat + " forward";
  if (verb == "pull") return "pulls the " + cat + " closer";
  if (verb == "rotate") return "rotates the " + cat;
  if (verb == "move") return "moves the " + cat;
  return "holds the " + cat + " steady";
}

std::string hands_clause(const ContactEvent& ev) {
  switch (ev.hands) {
    case Hands::both:
      return "with both hands from the " + ev.dir_left + " and " + ev.dir_right + " sides";
    case Hands::left:
      return "with the left hand from the " + ev.dir_left + " side";
    case Hands::right:
      return "with the right hand from the " + ev.dir_right + " side";
    case Hands::none:
      break;
  }
  return "without hand contact";
}

std::string complete_coarse(const ParsedPrompt& p) {
  std::vector<std::string> phrases;
  for (const std::string& verb : phase_verbs(p.centers)) {
    std::string phrase = coarse_phrase(verb, p.category);
    if (phrases.empty() || phrases.back() != phrase) phrases.push_back(phrase);
  }
  std::string out = "A person " + phrases[0];
  if (phrases.size() == 2) out += " and " + phrases[1];
  if (phrases.size() == 3) out += ", " + phrases[1] + ", and " + phrases[2];
  return out + ".";
}

std::string complete_fine(const ParsedPrompt& p) {
  const std::string& cat = p.category;
  if (p.events.empty()) {
    return "First, the person walks toward the " + cat + " without hand contact.\n" +
           "Next, the person stays close to the " + cat + " without hand contact.\n" +
           "Finally, the person steps back from the " + cat + " without hand contact.";
  }
  std::vector<std::string> verbs = phase_verbs(p.centers);
  const std::size_t n = p.events.size();
  std::array<std::size_t, 4> cut{};
  for (std::size_t k = 0; k <= 3; ++k) cut[k] = n * k / 3;
  // The grasp happens at the end of the approach phase; later phases are
  // described by their midpoints.
  std::array<ContactEvent, 3> rep;
  rep[0] = p.events[std::max(cut[1], std::size_t{1}) - 1];
  rep[1] = p.events[std::min(n - 1, (cut[1] + std::max(cut[2], std::size_t{1}) - 1) / 2)];
  rep[2] = p.events[std::min(n - 1, (cut[2] + std::max(cut[3], std::size_t{1}) - 1) / 2)];

  std::string s1 =
      rep[0].hands == Hands::none
          ? "First, the person walks toward the " + cat + " and " +
                fine_phrase(verbs[0], cat) + "."
          : "First, the person faces the " + cat + ", grasps it " + hands_clause(rep[0]) +
                ", and " + fine_phrase(verbs[0], cat) +
                " while bending slightly at the knees.";
  std::string s2 =
      rep[1].hands == Hands::none
          ? "Next, the person " + fine_phrase(verbs[1], cat) + " without hand contact."
          : "Next, maintaining grip, the person " + fine_phrase(verbs[1], cat) + " " +
                hands_clause(rep[1]) + ".";
  std::string s3 =
      rep[2].hands == Hands::none
          ? "Finally, the person " + fine_phrase(verbs[2], cat) +
                " and steps back, as both legs move to reposition."
          : "Finally, the person " + fine_phrase(verbs[2], cat) + " " + hands_clause(rep[2]) +
                ", as both legs move to reposition.";
  return s1 + "\n" + s2 + "\n" + s3;
}

}  // namespace

std::string TemplateClient::complete(const std::string& prompt) {
  ParsedPrompt parsed = parse_prompt(prompt);
  const bool fine = prompt.find("[Start of Rule]") != std::string::npos;
  return fine ? complete_fine(parsed) : complete_coarse(parsed);
}

RecordedClient::RecordedClient(const std::filesystem::path& fixture) {
  std::ifstream in(fixture);
  if (!in) throw InvalidInput("cannot open recorded-response fixture: " + fixture.string());
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    responses_[j.at("prompt_hash").get<std::string>()] = j.at("text").get<std::string>();
  }
}

std::string RecordedClient::complete(const std::string& prompt) {
  const std::string key = to_hex(fnv1a(prompt));
  auto it = responses_.find(key);
  if (it == responses_.end()) {
    throw ClientError("no recorded response for prompt hash " + key, prompt);
  }
  return it->second;
}

std::string EchoClient::complete(const std::string& prompt) {
  return "echo:" + to_hex(fnv1a(prompt));
}

HttpClient::HttpClient() {
  const char* endpoint = std::getenv("HOIMO_LLM_ENDPOINT");
  if (endpoint == nullptr || *endpoint == '\0') {
    throw ClientError("HOIMO_LLM_ENDPOINT is not set", "");
  }
  endpoint_ = endpoint;
  if (const char* token = std::getenv("HOIMO_LLM_TOKEN")) token_ = token;
  if (const char* timeout = std::getenv("HOIMO_LLM_TIMEOUT_S")) {
    timeout_s_ = std::max(1, std::atoi(timeout));
  }
}

HttpClient::HttpClient(std::string endpoint, std::string token, int timeout_s)
    : endpoint_(std::move(endpoint)), token_(std::move(token)),
      timeout_s_(std::max(1, timeout_s)) {}

std::string HttpClient::complete(const std::string& prompt) {
  // Split "http://host:port/path" into a base URL and a request path.
  std::size_t scheme = endpoint_.find("://");
  std::size_t path_at = scheme == std::string::npos
                            ? endpoint_.find('/')
                            : endpoint_.find('/', scheme + 3);
  const std::string base = path_at == std::string::npos ? endpoint_ : endpoint_.substr(0, path_at);
  const std::string path = path_at == std::string::npos ? "/" : endpoint_.substr(path_at);

  httplib::Client cli(base);
  cli.set_connection_timeout(timeout_s_, 0);
  cli.set_read_timeout(timeout_s_, 0);
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

  nlohmann::json body{{"prompt", prompt}};
  httplib::Result res = cli.Post(path, headers, body.dump(), "application/json");
  if (!res) {
    throw ClientError("language-model request failed: " + httplib::to_string(res.error()),
                      prompt);
  }
  if (res->status != 200) {
    throw ClientError("language-model request returned status " +
                          std::to_string(res->status), prompt);
  }
  try {
    return nlohmann::json::parse(res->body).at("text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ClientError(std::string("malformed language-model response: ") + e.what(), prompt);
  }
}

std::unique_ptr<LanguageModelClient> make_client(const std::string& descriptor) {
  if (descriptor == "template") return std::make_unique<TemplateClient>();
  if (descriptor == "echo") return std::make_unique<EchoClient>();
  if (descriptor == "http") return std::make_unique<HttpClient>();
  const std::string recorded_prefix = "recorded:";
  if (descriptor.rfind(recorded_prefix, 0) == 0) {
    return std::make_unique<RecordedClient>(descriptor.substr(recorded_prefix.size()));
  }
  throw InvalidInput("unknown language-model client: " + descriptor +
                     " (expected template, echo, http, or recorded:<path>)");
}

}  // namespace hoimo::annotation
