#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hoimo {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;
using MatX3 = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using MaskMat = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Thrown for malformed inputs (empty clouds, bad shapes, bad config values).
class InvalidInput : public std::runtime_error {
 public:
  explicit InvalidInput(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a numeric procedure produces non-finite values.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

inline bool all_finite(const Mat& m) { return m.allFinite(); }

// FNV-1a, used for config hashes and fixture keys.
inline std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string to_hex(std::uint64_t value);

// Shortest text form that parses back to the same double.
std::string format_double(double v);

}  // namespace hoimo
