#pragma once

#include "fedwad/config.hpp"
#include "fedwad/measures.hpp"
#include "fedwad/ot.hpp"

namespace fedwad {

/// Coordinates closer than this (per axis) are treated as the same atom.
inline constexpr double kAtomMergeTolerance = 1e-12;

/// McCann interpolant: atoms (1-t) x_i + t x'_j carrying P*_ij, coincident
/// atoms merged. The plan must be optimal for the squared Euclidean cost.
DiscreteMeasure interp_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double t);
DiscreteMeasure interp_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double t,
                             const TransportPlan& plan);

/// Fixed-support interpolant through the barycentric map of the smaller side
/// (mu on ties). Anchor atom i moves to (1-t) x_i + t (P X')_i / a_i and keeps
/// its weight, so the output has exactly min(n, m) atoms.
DiscreteMeasure interp_approx(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double t);
DiscreteMeasure interp_approx(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double t,
                              const TransportPlan& plan);

DiscreteMeasure interpolate(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double t,
                            InterpMode mode);

/// Merges atoms whose coordinates agree within kAtomMergeTolerance, keeping the
/// first-appearance order. Zero-weight atoms are dropped.
DiscreteMeasure merge_atoms(const Matrix& points, const Vector& weights);

/// Shared-covariance Gaussian geodesic: the mean moves, the covariance stays.
GaussianMeasure gaussian_interp(const GaussianMeasure& g1, const GaussianMeasure& g2, double t);
/// W2 between Gaussians with the same covariance, i.e. the distance of the means.
double gaussian_w2(const GaussianMeasure& g1, const GaussianMeasure& g2);

}  // namespace fedwad
