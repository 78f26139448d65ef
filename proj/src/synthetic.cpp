#include "hoimotion/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "hoimotion/rng.hpp"

namespace hoimo::synth {

namespace {

using motion::skel::kJoints;

double smooth01(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

// Progress of frame i through [begin, end), smoothed; 0 before, 1 after.
double segment(int i, int begin, int end) {
  if (end <= begin) return i >= end ? 1.0 : 0.0;
  return smooth01((static_cast<double>(i) - begin) / (static_cast<double>(end) - begin));
}

struct BoxSpec {
  double hx = 0.25, hy = 0.15, hz = 0.15;  // half extents
};

struct BoxPose {
  Vec3 center = Vec3::Zero();
  double yaw = 0.0;
};

Vec3 box_to_world(const BoxPose& pose, const Vec3& local) {
  const double c = std::cos(pose.yaw), s = std::sin(pose.yaw);
  return pose.center + Vec3(c * local.x() + s * local.z(), local.y(),
                            -s * local.x() + c * local.z());
}

// Uniform points on the cuboid surface, area-weighted over the six faces.
MatX3 sample_box_surface(const BoxSpec& box, int n, Rng& rng) {
  const double ax = box.hy * box.hz, ay = box.hx * box.hz, az = box.hx * box.hy;
  const double total = 2.0 * (ax + ay + az);
  MatX3 pts(n, 3);
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform() * total;
    const double a = rng.uniform(-1.0, 1.0);
    const double b = rng.uniform(-1.0, 1.0);
    Vec3 p;
    if (u < ax) {
      p = Vec3(box.hx, a * box.hy, b * box.hz);
    } else if (u < 2 * ax) {
      p = Vec3(-box.hx, a * box.hy, b * box.hz);
    } else if (u < 2 * ax + ay) {
      p = Vec3(a * box.hx, box.hy, b * box.hz);
    } else if (u < 2 * (ax + ay)) {
      p = Vec3(a * box.hx, -box.hy, b * box.hz);
    } else if (u < 2 * (ax + ay) + az) {
      p = Vec3(a * box.hx, b * box.hy, box.hz);
    } else {
      p = Vec3(a * box.hx, b * box.hy, -box.hz);
    }
    pts.row(i) = p.transpose();
  }
  return pts;
}

// Rest pose relative to the pelvis; toes sit at pelvis_y - 0.88.
MatX3 figure_local() {
  MatX3 local(kJoints, 3);
  local.row(0) << 0, 0, 0;
  local.row(1) << 0.10, -0.05, 0;
  local.row(2) << -0.10, -0.05, 0;
  local.row(3) << 0, 0.12, 0;
  local.row(4) << 0.11, -0.45, 0.02;
  local.row(5) << -0.11, -0.45, 0.02;
  local.row(6) << 0, 0.25, 0;
  local.row(7) << 0.11, -0.87, 0;
  local.row(8) << -0.11, -0.87, 0;
  local.row(9) << 0, 0.38, 0;
  local.row(10) << 0.11, -0.88, 0.14;
  local.row(11) << -0.11, -0.88, 0.14;
  local.row(12) << 0, 0.50, 0;
  local.row(13) << 0.06, 0.44, 0;
  local.row(14) << -0.06, 0.44, 0;
  local.row(15) << 0, 0.60, 0.03;
  local.row(16) << 0.18, 0.42, 0;
  local.row(17) << -0.18, 0.42, 0;
  local.row(18) << 0.22, 0.18, 0.10;
  local.row(19) << -0.22, 0.18, 0.10;
  local.row(20) << 0.24, 0.02, 0.28;
  local.row(21) << -0.24, 0.02, 0.28;
  return local;
}

struct FrameState {
  Vec3 pelvis = Vec3::Zero();
  double left_lift = 0.0;   // extra toe height for the swinging leg
  double right_lift = 0.0;
  BoxPose box;
  double grip = 0.0;  // 0 = natural hands, 1 = hands on the grip points
};

// Timeline produced by one scenario: per-frame states plus the window where
// the hands are exactly attached.
struct Timeline {
  std::vector<FrameState> frames;
  Vec3 grip_left_local = Vec3::Zero();   // grip sites in the box frame
  Vec3 grip_right_local = Vec3::Zero();
  int attach_start = 0;
  int attach_end = 0;
};

int at(double frac, int L) { return static_cast<int>(std::lround(frac * L)); }

// Swing profile: each leg lifts on alternate half-cycles while walking.
void apply_gait(FrameState& st, double t, double cadence, double amplitude, bool walking) {
  if (!walking) return;
  const double phase = std::sin(2.0 * M_PI * cadence * t);
  st.left_lift = amplitude * std::max(0.0, phase);
  st.right_lift = amplitude * std::max(0.0, -phase);
}

Timeline carry_timeline(int L, double fps, double pelvis_h, const BoxSpec& box, Rng& rng) {
  Timeline tl;
  tl.grip_left_local = Vec3(box.hx, 0, 0);
  tl.grip_right_local = Vec3(-box.hx, 0, 0);
  const double box_z = rng.uniform(0.9, 1.1);
  const double reach_z = box_z - 0.45;
  const double carry_dist = rng.uniform(0.4, 0.7);
  const double cadence = rng.uniform(1.5, 2.5);
  const double carry_h = box.hy + 0.45;

  const int a = at(0.25, L);          // pick-up starts
  const int a2 = a + at(0.08, L);     // pick-up done, walking resumes
  const int c = at(0.75, L);          // set-down starts
  const int c2 = c + at(0.08, L);     // object released
  const int blend = std::min(4, a);

  tl.attach_start = a;
  tl.attach_end = std::min(c2, L);
  tl.frames.resize(static_cast<size_t>(L));
  for (int i = 0; i < L; ++i) {
    FrameState st;
    const double t = i / fps;
    const double approach = segment(i, 0, a);
    const double haul = segment(i, a2, c);
    const double z = reach_z * approach + carry_dist * haul;
    st.pelvis = Vec3(0.0, pelvis_h, z);
    const bool walking = (i > 0 && i < a) || (i >= a2 && i < c);
    apply_gait(st, t, cadence, 0.05, walking);

    const double rise = segment(i, a, a2) - segment(i, c, c2);
    st.box.center = Vec3(0.0, box.hy + (carry_h - box.hy) * rise, box_z + carry_dist * haul);
    st.box.yaw = 0.0;

    if (i >= a && i < tl.attach_end) {
      st.grip = 1.0;
    } else if (i >= a - blend && i < a) {
      st.grip = segment(i, a - blend, a);
    } else if (i >= tl.attach_end) {
      st.grip = 1.0 - segment(i, tl.attach_end, std::min(tl.attach_end + 4, L));
    }
    tl.frames[static_cast<size_t>(i)] = st;
  }
  return tl;
}

Timeline push_timeline(int L, double fps, double pelvis_h, const BoxSpec& box, Rng& rng) {
  Timeline tl;
  tl.grip_left_local = Vec3(0.5 * box.hx, 0, -box.hz);
  tl.grip_right_local = Vec3(-0.5 * box.hx, 0, -box.hz);
  const double box_z = rng.uniform(0.9, 1.1);
  const double reach_z = box_z - box.hz - 0.35;
  const double push_dist = rng.uniform(0.4, 0.8);
  const double cadence = rng.uniform(1.5, 2.5);

  const int a = at(0.30, L);
  const int b = at(0.80, L);
  const int blend = std::min(4, a);

  tl.attach_start = a;
  tl.attach_end = b;
  tl.frames.resize(static_cast<size_t>(L));
  for (int i = 0; i < L; ++i) {
    FrameState st;
    const double t = i / fps;
    const double approach = segment(i, 0, a);
    const double slide = push_dist * segment(i, a, b);
    st.pelvis = Vec3(0.0, pelvis_h, reach_z * approach + slide);
    const bool walking = (i > 0 && i < a) || (i >= a && i < b);
    apply_gait(st, t, cadence, 0.05, walking);

    st.box.center = Vec3(0.0, box.hy, box_z + slide);
    st.box.yaw = 0.0;

    if (i >= a && i < b) {
      st.grip = 1.0;
    } else if (i >= a - blend && i < a) {
      st.grip = segment(i, a - blend, a);
    } else if (i >= b) {
      st.grip = 1.0 - segment(i, b, std::min(b + 4, L));
    }
    tl.frames[static_cast<size_t>(i)] = st;
  }
  return tl;
}

Timeline lift_timeline(int L, double fps, double pelvis_h, const BoxSpec& box, Rng& rng) {
  Timeline tl;
  tl.grip_left_local = Vec3(box.hx, 0, 0);
  tl.grip_right_local = Vec3(-box.hx, 0, 0);
  const double box_z = rng.uniform(0.40, 0.55);  // already within arm's reach
  const double raise = rng.uniform(0.25, 0.40);
  const double turn = rng.uniform(0.6, 1.0) * M_PI / 2.0;
  (void)fps;

  const int a = at(0.15, L);
  const int lift_end = at(0.35, L);
  const int rot_end = at(0.65, L);
  const int place_end = at(0.85, L);
  const int blend = std::min(4, a);

  tl.attach_start = a;
  tl.attach_end = place_end;
  tl.frames.resize(static_cast<size_t>(L));
  for (int i = 0; i < L; ++i) {
    FrameState st;
    st.pelvis = Vec3(0.0, pelvis_h, 0.0);

    const double up = segment(i, a, lift_end) - segment(i, rot_end, place_end);
    st.box.center = Vec3(0.0, box.hy + raise * up, box_z);
    st.box.yaw = turn * segment(i, lift_end, rot_end);

    if (i >= a && i < place_end) {
      st.grip = 1.0;
    } else if (i >= a - blend && i < a) {
      st.grip = segment(i, a - blend, a);
    } else if (i >= place_end) {
      st.grip = 1.0 - segment(i, place_end, std::min(place_end + 4, L));
    }
    tl.frames[static_cast<size_t>(i)] = st;
  }
  return tl;
}

InteractionClip build_clip(const std::string& id, const std::string& scenario, int L,
                           const SyntheticOptions& opts, Rng& rng) {
  BoxSpec box;
  box.hx = rng.uniform(0.20, 0.30);
  box.hy = rng.uniform(0.12, 0.18);
  box.hz = rng.uniform(0.12, 0.18);
  const double pelvis_h = opts.ground + 0.88;  // toes exactly at ground height

  Timeline tl;
  if (scenario == "carry") {
    tl = carry_timeline(L, opts.fps, pelvis_h, box, rng);
  } else if (scenario == "push") {
    tl = push_timeline(L, opts.fps, pelvis_h, box, rng);
  } else if (scenario == "lift") {
    tl = lift_timeline(L, opts.fps, pelvis_h, box, rng);
  } else {
    throw InvalidInput("unknown scenario: " + scenario);
  }

  // Object cloud: rows 0/1 are the grip sites, the rest sampled on the box.
  MatX3 local_cloud(opts.cloud_points, 3);
  local_cloud.row(0) = tl.grip_left_local.transpose();
  local_cloud.row(1) = tl.grip_right_local.transpose();
  local_cloud.bottomRows(opts.cloud_points - 2) =
      sample_box_surface(box, opts.cloud_points - 2, rng);

  const MatX3 local = figure_local();
  motion::JointSeq joints;
  MaskMat contacts(L, 4);
  geometry::PointCloudSequence cloud;
  joints.reserve(static_cast<size_t>(L));
  cloud.frames.reserve(static_cast<size_t>(L));

  for (int i = 0; i < L; ++i) {
    const FrameState& st = tl.frames[static_cast<size_t>(i)];
    MatX3 frame = local;
    frame.rowwise() += st.pelvis.transpose();
    // Swinging legs: lift ankle, toe, and (slightly) the knee.
    frame(7, 1) += 0.8 * st.left_lift;
    frame(10, 1) += st.left_lift;
    frame(4, 1) += 0.3 * st.left_lift;
    frame(8, 1) += 0.8 * st.right_lift;
    frame(11, 1) += st.right_lift;
    frame(5, 1) += 0.3 * st.right_lift;

    const Vec3 grip_l = box_to_world(st.box, tl.grip_left_local);
    const Vec3 grip_r = box_to_world(st.box, tl.grip_right_local);
    const Vec3 natural_l = frame.row(20).transpose();
    const Vec3 natural_r = frame.row(21).transpose();
    frame.row(20) = ((1.0 - st.grip) * natural_l + st.grip * grip_l).transpose();
    frame.row(21) = ((1.0 - st.grip) * natural_r + st.grip * grip_r).transpose();
    joints.push_back(frame);

    const bool left_down = st.left_lift < 1e-12;
    const bool right_down = st.right_lift < 1e-12;
    contacts(i, 0) = left_down;
    contacts(i, 1) = left_down;
    contacts(i, 2) = right_down;
    contacts(i, 3) = right_down;

    MatX3 world_cloud(opts.cloud_points, 3);
    for (int p = 0; p < opts.cloud_points; ++p) {
      world_cloud.row(p) = box_to_world(st.box, local_cloud.row(p).transpose()).transpose();
    }
    cloud.frames.push_back(std::move(world_cloud));
  }

  InteractionClip clip;
  clip.id = id;
  clip.scenario = scenario;
  clip.motion = motion::encode_motion(joints, contacts, opts.fps);
  clip.cloud = std::move(cloud);
  clip.attach_start = tl.attach_start;
  clip.attach_end = tl.attach_end;
  return clip;
}

}  // namespace

std::vector<InteractionClip> generate_synthetic(std::uint64_t seed, int n_clips,
                                                const std::string& scenario,
                                                const SyntheticOptions& opts) {
  if (n_clips < 1) throw InvalidInput("n_clips must be at least 1");
  if (opts.clip_len < 16) throw InvalidInput("clip_len must be at least 16 frames");
  if (!(opts.fps > 0.0)) throw InvalidInput("fps must be positive");
  if (opts.cloud_points < 8) throw InvalidInput("cloud_points must be at least 8");
  if (!(opts.ground >= 0.0)) throw InvalidInput("ground height must be non-negative");
  static const std::vector<std::string> kScenarios = {"carry", "push", "lift"};
  if (scenario != "mixed" &&
      std::find(kScenarios.begin(), kScenarios.end(), scenario) == kScenarios.end()) {
    throw InvalidInput("unknown scenario: " + scenario);
  }

  std::vector<InteractionClip> clips;
  clips.reserve(static_cast<size_t>(n_clips));
  for (int i = 0; i < n_clips; ++i) {
    const std::string kind =
        scenario == "mixed" ? kScenarios[static_cast<size_t>(i % 3)] : scenario;
    // Per-clip stream keyed by (seed, index) so any clip regenerates alone.
    Rng rng(fnv1a(std::to_string(seed) + ":" + std::to_string(i)));
    clips.push_back(
        build_clip(kind + "-" + std::to_string(i), kind, opts.clip_len, opts, rng));
  }
  return clips;
}

std::vector<motion::MotionSequence> split_clips(const motion::MotionSequence& recording,
                                                int clip_len) {
  if (clip_len < 2) throw InvalidInput("clip_len must be at least 2");
  recording.validate();
  std::vector<motion::MotionSequence> out;
  const Eigen::Index n = recording.length() / clip_len;
  for (Eigen::Index k = 0; k < n; ++k) {
    motion::MotionSequence clip;
    clip.fps = recording.fps;
    clip.features = recording.features.middleRows(k * clip_len, clip_len);
    out.push_back(std::move(clip));
  }
  return out;
}

}  // namespace hoimo::synth
