#include <cmath>
#include <vector>

#include "fedwad/error.hpp"
#include "fedwad/fedwad.hpp"

namespace fedwad {
namespace {

// Means are averaged repeatedly; binary128 keeps each midpoint exact for
// double inputs of comparable magnitude, so residuals of order 2^-20 are not
// swamped by rounding of order 2^-53.
using Quad = __float128;
using QVec = std::vector<Quad>;

QVec widen(const Vector& v) {
  QVec out(static_cast<std::size_t>(v.size()));
  for (Index k = 0; k < v.size(); ++k) out[static_cast<std::size_t>(k)] = v[k];
  return out;
}

Vector narrow(const QVec& v) {
  Vector out(static_cast<Index>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) out[static_cast<Index>(k)] = static_cast<double>(v[k]);
  return out;
}

QVec midpoint(const QVec& a, const QVec& b) {
  QVec out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = (a[k] + b[k]) * Quad(0.5);
  return out;
}

double distance(const QVec& a, const QVec& b) {
  double sq = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = static_cast<double>(a[k] - b[k]);
    sq += diff * diff;
  }
  return std::sqrt(sq);
}

void require_same_covariance(const GaussianMeasure& a, const GaussianMeasure& b) {
  if (a.dim() != b.dim()) throw Error(ErrorCode::DimensionMismatch, "Gaussian dimensions differ");
  if ((a.covariance - b.covariance).cwiseAbs().maxCoeff() > 1e-9) {
    throw Error(ErrorCode::CovarianceMismatch, "Gaussians must share one covariance");
  }
}

}  // namespace

GaussianTrajectory run_fedwad_gaussian(const GaussianMeasure& g_mu, const GaussianMeasure& g_nu,
                                       const GaussianMeasure& g_xi0, unsigned rounds) {
  require_same_covariance(g_mu, g_nu);
  require_same_covariance(g_mu, g_xi0);

  const Vector u = g_nu.mean - g_mu.mean;
  const Vector v = g_xi0.mean - g_mu.mean;
  const double uu = u.squaredNorm();
  const double vv = v.squaredNorm();
  const double uv = u.dot(v);
  // Squared sine of the angle between the two directions.
  const double sin2 = (uu > 0.0 && vv > 0.0) ? 1.0 - (uv * uv) / (uu * vv) : 0.0;
  if (!(sin2 > 1e-14)) {
    throw Error(ErrorCode::CollinearMeans, "means of mu, nu and xi0 are aligned");
  }

  const QVec m_mu = widen(g_mu.mean);
  const QVec m_nu = widen(g_nu.mean);
  const QVec target = midpoint(m_mu, m_nu);
  QVec m_xi = widen(g_xi0.mean);
  const Matrix& cov = g_mu.covariance;

  GaussianTrajectory out;
  out.target = distance(m_mu, m_nu);
  out.initial_residual = distance(m_xi, target);
  for (unsigned k = 1; k <= rounds; ++k) {
    const QVec m_ximu = midpoint(m_mu, m_xi);
    const QVec m_xinu = midpoint(m_nu, m_xi);
    m_xi = midpoint(m_ximu, m_xinu);
    GaussianRound r{k,
                    GaussianMeasure(narrow(m_ximu), cov),
                    GaussianMeasure(narrow(m_xinu), cov),
                    GaussianMeasure(narrow(m_xi), cov),
                    distance(m_xi, target),
                    distance(m_ximu, m_xinu),
                    distance(m_mu, m_xi) + distance(m_xi, m_nu) - out.target};
    out.rounds.push_back(std::move(r));
  }
  return out;
}

}  // namespace fedwad
