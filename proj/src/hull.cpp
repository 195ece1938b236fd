#include "ridgemm/hull.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace ridgemm {

AtomSet::AtomSet(std::vector<Vec> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw std::invalid_argument("atom set must be nonempty");
  const auto p = atoms_.front().size();
  if (p < 1) throw std::invalid_argument("atoms must have dimension >= 1");
  for (const Vec& a : atoms_) {
    if (a.size() != p) throw std::invalid_argument("atoms must share one dimension");
    if (!a.allFinite()) throw std::invalid_argument("atoms must be finite");
  }
}

namespace {

using Mat = Eigen::MatrixXd;

// Minimizer of |sum a_i p_i| over the affine hull sum a_i = 1 of `cols`.
Vec AffineMinimizer(const Mat& pts, const std::vector<int>& cols) {
  const int k = static_cast<int>(cols.size());
  Vec alpha(k);
  if (k == 1) {
    alpha[0] = 1.0;
    return alpha;
  }
  const Vec p0 = pts.col(cols[0]);
  Mat d(pts.rows(), k - 1);
  for (int i = 1; i < k; ++i) d.col(i - 1) = pts.col(cols[static_cast<std::size_t>(i)]) - p0;
  const Vec beta = d.completeOrthogonalDecomposition().solve(-p0);
  alpha[0] = 1.0 - beta.sum();
  alpha.tail(k - 1) = beta;
  return alpha;
}

double Gap(const Mat& pts, const Vec& x) {
  const double min_dot = (pts.transpose() * x).minCoeff();
  return std::max(0.0, x.squaredNorm() - min_dot);
}

}  // namespace

MinNormCertificate min_norm_point(const AtomSet& atoms, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (atoms.empty()) throw std::invalid_argument("atom set must be nonempty");
  const int p = atoms.dim();
  const std::size_t n_in = atoms.size();

  // Merge exact duplicates; `origin[j]` is the input index of unique atom j.
  std::vector<int> origin;
  for (std::size_t i = 0; i < n_in; ++i) {
    const bool seen = std::any_of(origin.begin(), origin.end(),
                                  [&](int j) { return atoms[static_cast<std::size_t>(j)] == atoms[i]; });
    if (!seen) origin.push_back(static_cast<int>(i));
  }
  const int n = static_cast<int>(origin.size());
  Mat pts(p, n);
  for (int j = 0; j < n; ++j) pts.col(j) = atoms[static_cast<std::size_t>(origin[static_cast<std::size_t>(j)])];

  double scale2 = 0.0;
  for (int j = 0; j < n; ++j) scale2 = std::max(scale2, pts.col(j).squaredNorm());
  const double stop_gap = std::max(0.5 * tol * tol, 1e-14 * scale2);
  const double weight_floor = 1e-14;
  const int cap = 10 * (n + p) * (n + p);

  int start = 0;
  for (int j = 1; j < n; ++j) {
    if (pts.col(j).squaredNorm() < pts.col(start).squaredNorm()) start = j;
  }
  std::vector<int> corral{start};
  Vec lambda = Vec::Ones(1);
  Vec x = pts.col(start);

  MinNormCertificate cert;
  cert.converged = false;
  int it = 0;
  while (it < cap) {
    ++it;
    const Vec dots = pts.transpose() * x;
    int j = 0;
    for (int t = 1; t < n; ++t) {
      if (dots[t] < dots[j]) j = t;
    }
    if (x.squaredNorm() - dots[j] <= stop_gap ||
        std::find(corral.begin(), corral.end(), j) != corral.end()) {
      cert.converged = true;
      break;
    }
    corral.push_back(j);
    lambda.conservativeResize(static_cast<Eigen::Index>(corral.size()));
    lambda[lambda.size() - 1] = 0.0;

    // Minor cycles.
    while (it < cap) {
      const Vec alpha = AffineMinimizer(pts, corral);
      if ((alpha.array() > weight_floor).all()) {
        lambda = alpha;
        break;
      }
      ++it;
      double theta = 1.0;
      for (Eigen::Index i = 0; i < alpha.size(); ++i) {
        if (alpha[i] <= weight_floor) {
          const double denom = lambda[i] - alpha[i];
          if (denom > 0.0) theta = std::min(theta, lambda[i] / denom);
        }
      }
      lambda = (lambda + theta * (alpha - lambda)).eval();
      std::vector<int> keep_cols;
      std::vector<double> keep_w;
      for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        if (lambda[i] > weight_floor) {
          keep_cols.push_back(corral[static_cast<std::size_t>(i)]);
          keep_w.push_back(lambda[i]);
        }
      }
      if (keep_cols.empty()) {
        // Rounding removed everything; fall back to the largest weight.
        Eigen::Index best = 0;
        lambda.maxCoeff(&best);
        keep_cols.push_back(corral[static_cast<std::size_t>(best)]);
        keep_w.push_back(1.0);
      }
      corral = keep_cols;
      lambda = Eigen::Map<Vec>(keep_w.data(), static_cast<Eigen::Index>(keep_w.size()));
      lambda /= lambda.sum();
    }
    x.setZero(p);
    for (std::size_t i = 0; i < corral.size(); ++i) x += lambda[static_cast<Eigen::Index>(i)] * pts.col(corral[i]);
  }

  cert.iterations = it;
  cert.weights = Vec::Zero(static_cast<Eigen::Index>(n_in));
  for (std::size_t i = 0; i < corral.size(); ++i) {
    cert.weights[origin[static_cast<std::size_t>(corral[i])]] = lambda[static_cast<Eigen::Index>(i)];
  }
  cert.weights /= cert.weights.sum();
  cert.point = Vec::Zero(p);
  for (std::size_t i = 0; i < n_in; ++i) {
    if (cert.weights[static_cast<Eigen::Index>(i)] != 0.0) cert.point += cert.weights[static_cast<Eigen::Index>(i)] * atoms[i];
  }
  cert.norm = cert.point.norm();
  cert.gap = Gap(pts, cert.point);
  return cert;
}

int support_size(const MinNormCertificate& cert) {
  return static_cast<int>((cert.weights.array() != 0.0).count());
}

MinNormCertificate caratheodory_reduce(const AtomSet& atoms, const MinNormCertificate& cert) {
  if (cert.weights.size() != static_cast<Eigen::Index>(atoms.size()))
    throw std::invalid_argument("certificate does not match atom set");
  const int p = atoms.dim();
  MinNormCertificate out = cert;
  Vec& w = out.weights;

  for (;;) {
    std::vector<int> support;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      if (w[i] > 0.0) {
        support.push_back(static_cast<int>(i));
      } else {
        w[i] = 0.0;
      }
    }
    const int k = static_cast<int>(support.size());
    if (k <= p + 1) break;
    Mat m(p + 1, k);
    for (int c = 0; c < k; ++c) {
      m.block(0, c, p, 1) = atoms[static_cast<std::size_t>(support[static_cast<std::size_t>(c)])];
      m(p, c) = 1.0;
    }
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
    Vec z = svd.matrixV().col(k - 1);
    if (z.maxCoeff() <= 0.0) z = -z;
    double theta = std::numeric_limits<double>::infinity();
    int drop = -1;
    for (int c = 0; c < k; ++c) {
      if (z[c] > 0.0) {
        const double t = w[support[static_cast<std::size_t>(c)]] / z[c];
        if (t < theta) {
          theta = t;
          drop = c;
        }
      }
    }
    for (int c = 0; c < k; ++c) {
      double& wc = w[support[static_cast<std::size_t>(c)]];
      wc = std::max(0.0, wc - theta * z[c]);
    }
    w[support[static_cast<std::size_t>(drop)]] = 0.0;
    w /= w.sum();
  }

  out.point = Vec::Zero(p);
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (w[static_cast<Eigen::Index>(i)] != 0.0) out.point += w[static_cast<Eigen::Index>(i)] * atoms[i];
  }
  out.norm = out.point.norm();
  Mat pts(p, static_cast<Eigen::Index>(atoms.size()));
  for (std::size_t i = 0; i < atoms.size(); ++i) pts.col(static_cast<Eigen::Index>(i)) = atoms[i];
  out.gap = Gap(pts, out.point);
  return out;
}

HullVerdict hull_contains_zero(const AtomSet& atoms, double tol) {
  HullVerdict v;
  v.cert = min_norm_point(atoms, tol);
  v.contains_zero = v.cert.norm <= tol;
  return v;
}

double vertex_min_norm(const AtomSet& atoms) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vec& a : atoms.atoms()) best = std::min(best, a.norm());
  return best;
}

}  // namespace ridgemm
