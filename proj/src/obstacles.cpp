#include "safempc/obstacles.hpp"

#include <limits>

namespace safempc {

ObstacleField::ObstacleField(std::vector<Obstacle> obstacles)
    : obstacles_(std::move(obstacles)) {
  cx_.reserve(obstacles_.size());
  cy_.reserve(obstacles_.size());
  r2_.reserve(obstacles_.size());
  for (const Obstacle& o : obstacles_) {
    require(o.r > 0.0 && std::isfinite(o.cx) && std::isfinite(o.cy),
            "ObstacleField: radii must be positive and centers finite");
    cx_.push_back(o.cx);
    cy_.push_back(o.cy);
    r2_.push_back(o.r * o.r);
  }
}

double ObstacleField::h(const Vec& x, int i) const {
  require(i >= 0 && i < count(), "ObstacleField::h: index");
  const double dx = x[0] - cx_[i];
  const double dy = x[1] - cy_[i];
  return dx * dx + dy * dy - r2_[i];
}

double ObstacleField::min_h(const Vec& x) const {
  return min_h_at(x[0], x[1]);
}

Eigen::Vector2d ObstacleField::h_grad(const Vec& x, int i) const {
  require(i >= 0 && i < count(), "ObstacleField::h_grad: index");
  return {2.0 * (x[0] - cx_[i]), 2.0 * (x[1] - cy_[i])};
}

}  // namespace safempc
