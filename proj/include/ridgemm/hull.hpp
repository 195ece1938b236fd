#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace ridgemm {

using Vec = Eigen::VectorXd;

/// Finite, nonempty list of equal-length vectors.
class AtomSet {
 public:
  AtomSet() = default;
  explicit AtomSet(std::vector<Vec> atoms);

  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  int dim() const { return atoms_.empty() ? 0 : static_cast<int>(atoms_.front().size()); }
  const Vec& operator[](std::size_t i) const { return atoms_[i]; }
  const std::vector<Vec>& atoms() const { return atoms_; }

 private:
  std::vector<Vec> atoms_;
};

struct MinNormCertificate {
  Vec weights;  // simplex weights, one per atom of the input set
  Vec point;    // sum_i weights_i * atom_i
  double norm = 0.0;
  double gap = 0.0;  // |point|^2 - min_i <point, atom_i>, clamped at 0
  bool converged = true;
  int iterations = 0;
};

inline constexpr double kDefaultHullTol = 1e-9;

/// Wolfe's minimum-norm-point method. Exact duplicates are merged before the
/// solve; their weight lands on the first copy.
MinNormCertificate min_norm_point(const AtomSet& atoms, double tol = kDefaultHullTol);

/// Reduces the support of `cert` to at most dim+1 atoms without moving the
/// hull point (beyond rounding).
MinNormCertificate caratheodory_reduce(const AtomSet& atoms, const MinNormCertificate& cert);

struct HullVerdict {
  bool contains_zero = false;
  MinNormCertificate cert;
};

HullVerdict hull_contains_zero(const AtomSet& atoms, double tol = kDefaultHullTol);

/// Smallest atom norm: the answer one gets by certifying on the vertex set
/// alone, without taking convex combinations.
double vertex_min_norm(const AtomSet& atoms);

int support_size(const MinNormCertificate& cert);

}  // namespace ridgemm
