#include "fedwad/geodesics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedwad/error.hpp"

namespace fedwad {
namespace {

void check_t(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::InvalidT, "t = " + std::to_string(t));
}

void check_pair(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const TransportPlan& plan) {
  if (mu.dim() != nu.dim()) throw Error(ErrorCode::DimensionMismatch, "measure dimensions differ");
  if (plan.rows != mu.size() || plan.cols != nu.size()) {
    throw Error(ErrorCode::ShapeMismatch, "plan does not match the measures");
  }
}

bool same_atom(const Matrix& pts, Index a, Index b) {
  for (Index k = 0; k < pts.cols(); ++k) {
    if (std::abs(pts(a, k) - pts(b, k)) > kAtomMergeTolerance) return false;
  }
  return true;
}

}  // namespace

DiscreteMeasure merge_atoms(const Matrix& points, const Vector& weights) {
  const Index n = points.rows();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    for (Index k = 0; k < points.cols(); ++k) {
      if (points(a, k) != points(b, k)) return points(a, k) < points(b, k);
    }
    return false;
  });

  // group[i] = representative (smallest original index) of atom i's cluster.
  std::vector<Index> group(static_cast<std::size_t>(n));
  for (std::size_t s = 0; s < order.size();) {
    std::size_t e = s + 1;
    Index rep = order[s];
    while (e < order.size() && same_atom(points, order[s], order[e])) {
      rep = std::min(rep, order[e]);
      ++e;
    }
    for (std::size_t k = s; k < e; ++k) group[static_cast<std::size_t>(order[k])] = rep;
    s = e;
  }

  std::vector<Index> reps;
  std::vector<double> mass(static_cast<std::size_t>(n), 0.0);
  for (Index i = 0; i < n; ++i) {
    const Index r = group[static_cast<std::size_t>(i)];
    if (r == i) reps.push_back(i);
    mass[static_cast<std::size_t>(r)] += weights[i];
  }
  std::erase_if(reps, [&](Index r) { return !(mass[static_cast<std::size_t>(r)] > 0.0); });
  if (reps.empty()) throw Error(ErrorCode::ZeroTotalMass, "all atoms have zero weight");

  Matrix out(static_cast<Index>(reps.size()), points.cols());
  Vector w(static_cast<Index>(reps.size()));
  for (std::size_t k = 0; k < reps.size(); ++k) {
    out.row(static_cast<Index>(k)) = points.row(reps[k]);
    w[static_cast<Index>(k)] = mass[static_cast<std::size_t>(reps[k])];
  }
  // Pruned plan entries leave a deficit of up to 1e-12 each; renormalize before
  // it can accumulate over repeated interpolation, but leave exact weights alone.
  const double total = w.sum();
  if (std::abs(total - 1.0) > 1e-12) w /= total;
  return DiscreteMeasure::from_normalized(std::move(out), std::move(w));
}

DiscreteMeasure interp_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double t) {
  check_t(t);
  return interp_exact(mu, nu, t, optimal_plan(mu, nu, 2));
}

DiscreteMeasure interp_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double t,
                             const TransportPlan& plan) {
  check_t(t);
  check_pair(mu, nu, plan);
  const auto k = static_cast<Index>(plan.entries.size());
  Matrix pts(k, mu.dim());
  Vector w(k);
  for (Index r = 0; r < k; ++r) {
    const auto& e = plan.entries[static_cast<std::size_t>(r)];
    pts.row(r) = (1.0 - t) * mu.point(e.i) + t * nu.point(e.j);
    w[r] = e.mass;
  }
  return merge_atoms(pts, w);
}

DiscreteMeasure interp_approx(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double t) {
  check_t(t);
  return interp_approx(mu, nu, t, optimal_plan(mu, nu, 2));
}

DiscreteMeasure interp_approx(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double t,
                              const TransportPlan& plan) {
  check_t(t);
  check_pair(mu, nu, plan);
  const bool anchor_mu = mu.size() <= nu.size();
  const DiscreteMeasure& anchor = anchor_mu ? mu : nu;
  const DiscreteMeasure& other = anchor_mu ? nu : mu;

  // Barycentric image of every anchor atom under the plan.
  Matrix target = Matrix::Zero(anchor.size(), anchor.dim());
  Vector mass = Vector::Zero(anchor.size());
  for (const auto& e : plan.entries) {
    const Index s = anchor_mu ? e.i : e.j;
    const Index o = anchor_mu ? e.j : e.i;
    target.row(s) += e.mass * other.point(o);
    mass[s] += e.mass;
  }

  Matrix pts(anchor.size(), anchor.dim());
  for (Index s = 0; s < anchor.size(); ++s) {
    if (mass[s] > 0.0) {
      const auto image = target.row(s) / mass[s];
      pts.row(s) = anchor_mu ? ((1.0 - t) * anchor.point(s) + t * image).eval()
                             : ((1.0 - t) * image + t * anchor.point(s)).eval();
    } else {
      pts.row(s) = anchor.point(s);
    }
  }
  return DiscreteMeasure::from_normalized(std::move(pts), anchor.weights());
}

DiscreteMeasure interpolate(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double t,
                            InterpMode mode) {
  return mode == InterpMode::Exact ? interp_exact(mu, nu, t) : interp_approx(mu, nu, t);
}

namespace {

void check_same_covariance(const GaussianMeasure& g1, const GaussianMeasure& g2) {
  if (g1.dim() != g2.dim()) throw Error(ErrorCode::DimensionMismatch, "Gaussian dimensions differ");
  if ((g1.covariance - g2.covariance).cwiseAbs().maxCoeff() > 1e-9) {
    throw Error(ErrorCode::CovarianceMismatch, "covariances differ by more than 1e-9");
  }
}

}  // namespace

GaussianMeasure gaussian_interp(const GaussianMeasure& g1, const GaussianMeasure& g2, double t) {
  check_t(t);
  check_same_covariance(g1, g2);
  return GaussianMeasure((1.0 - t) * g1.mean + t * g2.mean, g1.covariance);
}

double gaussian_w2(const GaussianMeasure& g1, const GaussianMeasure& g2) {
  check_same_covariance(g1, g2);
  return (g1.mean - g2.mean).norm();
}

}  // namespace fedwad
