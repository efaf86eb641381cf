#pragma once

#include <stdexcept>
#include <string>

namespace micropart {

// Thrown when an iterative numerical routine (quadrature, root finding,
// CDF inversion) fails to reach its target tolerance.
class numerical_error : public std::runtime_error {
public:
  numerical_error(const std::string& what, double achieved_tol = 0.0)
      : std::runtime_error(what), achieved_tol_(achieved_tol) {}

  double achieved_tolerance() const { return achieved_tol_; }

private:
  double achieved_tol_;
};

// Thrown when every particle in an SMC system has weight zero.
class degeneracy_error : public std::runtime_error {
public:
  degeneracy_error(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}

  std::size_t step() const { return step_; }

private:
  std::size_t step_;
};

}  // namespace micropart
