#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace editer {

using Index = Eigen::Index;
using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

enum class ErrorKind {
  invalid_argument,
  validation,
  io,
  numerical,
};

inline const char* to_string(ErrorKind kind)
{
  switch (kind) {
  case ErrorKind::invalid_argument: return "invalid_argument";
  case ErrorKind::validation: return "validation";
  case ErrorKind::io: return "io";
  case ErrorKind::numerical: return "numerical";
  }
  return "unknown";
}

/// Exception type thrown by every fallible operation in the library.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind)
  {
  }

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what)
{
  throw Error(kind, what);
}

inline std::string dims_string(Index rows, Index cols)
{
  return std::to_string(rows) + "×" + std::to_string(cols);
}

} // namespace editer
