#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace nstw {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Bad or inconsistent configuration (counts, widths, missing keys).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input outside an operation's mathematical domain.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Inconsistent graph structure or tensor shape.
struct StructureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-positive bumper gap between two vehicles.
struct CollisionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf where finite numbers are required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed text input (CSV, JSON, config files).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kGravity = 9.81;

// Bounds of the CAV action space; IDM outputs are clamped to the same range.
inline constexpr double kAccelMin = -4.5;
inline constexpr double kAccelMax = 4.5;

// Upper bound on leader trajectory speeds.
inline constexpr double kMaxSpeed = 40.0;

inline double clamp_accel(double a, double lo = kAccelMin, double hi = kAccelMax) {
  return a < lo ? lo : (a > hi ? hi : a);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

// 64-bit FNV-1a; used for config and checkpoint fingerprints.
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

}  // namespace nstw
