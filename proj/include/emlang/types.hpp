#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace emlang {

using Scalar = double;
using Index = Eigen::Index;
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using IntMat = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic>;
using IntVec = Eigen::Matrix<std::int32_t, Eigen::Dynamic, 1>;

// Exit-code mapping for the CLI: usage 1, numerical 2, io 3.
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string shape_str(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace emlang
