#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace safempc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Physical state, control and disturbance vectors. Augmented states
/// (physical state with barrier components appended) use the same type;
/// the embedded model knows the split.
using State = Vec;
using Control = Vec;

using Trajectory = std::vector<Vec>;
using ControlSequence = std::vector<Vec>;

/// Thrown when an input violates an operation's contract (dimension
/// mismatch, invalid option values). Not used for numerical events
/// such as barrier blow-up, which are ordinary control flow.
class ContractViolation : public std::invalid_argument {
public:
  explicit ContractViolation(const std::string& what)
      : std::invalid_argument(what) {}
};

inline void require(bool cond, const char* msg) {
  if (!cond) throw ContractViolation(msg);
}

}  // namespace safempc
