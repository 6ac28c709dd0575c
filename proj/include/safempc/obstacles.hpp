#pragma once

#include <limits>

#include "safempc/types.hpp"

namespace safempc {

struct Obstacle {
  double cx = 0.0;
  double cy = 0.0;
  double r = 1.0;
};

/// Circular obstacle field. The safe set is the intersection of the
/// per-obstacle superlevel sets {x : h_i(x) >= 0} with
/// h_i(x) = ||p - c_i||^2 - r_i^2 (squared-distance form, smooth
/// everywhere except the center singularity of the gradient direction,
/// which the squared form avoids).
class ObstacleField {
public:
  ObstacleField() = default;
  explicit ObstacleField(std::vector<Obstacle> obstacles);

  int count() const { return static_cast<int>(obstacles_.size()); }
  bool empty() const { return obstacles_.empty(); }
  const std::vector<Obstacle>& obstacles() const { return obstacles_; }

  /// h_i at the position block of x.
  double h(const Vec& x, int i) const;

  /// Hot-path h_i from raw coordinates; i must be in [0, count()).
  double h_at(double px, double py, int i) const {
    const double dx = px - cx_[i];
    const double dy = py - cy_[i];
    return dx * dx + dy * dy - r2_[i];
  }

  /// Hot-path min_h from raw coordinates.
  double min_h_at(double px, double py) const {
    double m = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < cx_.size(); ++i) {
      const double dx = px - cx_[i];
      const double dy = py - cy_[i];
      const double hi = dx * dx + dy * dy - r2_[i];
      if (hi < m) m = hi;
    }
    return m;
  }

  /// Hot-path grad h_i from raw coordinates; i must be in [0, count()).
  Eigen::Vector2d h_grad_at(double px, double py, int i) const {
    return {2.0 * (px - cx_[i]), 2.0 * (py - cy_[i])};
  }

  /// min_i h_i; +inf for an empty field.
  double min_h(const Vec& x) const;

  /// Gradient of h_i with respect to the position block: 2 (p - c_i).
  Eigen::Vector2d h_grad(const Vec& x, int i) const;

  /// Interior test: all h_i > 0.
  bool interior(const Vec& x) const { return min_h(x) > 0.0; }

private:
  std::vector<Obstacle> obstacles_;
  // Contiguous copies for the rollout hot path.
  std::vector<double> cx_, cy_, r2_;
};

}  // namespace safempc
