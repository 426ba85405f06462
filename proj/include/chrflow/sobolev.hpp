#pragma once

#include "chrflow/gradientflow.hpp"
#include "chrflow/mesh.hpp"

#include <functional>
#include <vector>

namespace chr {

/// Uniform samples u(t_j), t_j = j T / (N - 1).
struct TimeSeries {
  double T = 1.0;
  std::vector<double> values;

  double spacing() const { return T / static_cast<double>(values.size() - 1); }
  /// Requires T > 0 and at least 3 finite samples.
  void validate() const;
};

/// Uniform samples of a field on [0, T].
struct FieldSeries {
  double T = 1.0;
  std::vector<Field> values;

  double spacing() const { return T / static_cast<double>(values.size() - 1); }
  void validate() const;
};

/// `fn` sampled at n uniform points on [0, T].
TimeSeries sample_series(double T, int n, const std::function<double(double)>& fn);

/// States of a trajectory as a field series (uniform steps assumed).
FieldSeries field_series(const Trajectory& traj);

/// Gagliardo seminorm of u on (0, T). The double integral is written in lag
/// coordinates, 2 int_0^T D(r) r^{-1-2s} dr with D(r) = int |u(x+r) - u(x)|^2 dx;
/// D(r)/r^2 is interpolated linearly between lags and integrated exactly
/// against r^{1-2s}. The value at lag 0 is |u'|^2 of the piecewise-linear
/// interpolant, so the result is the square root of a PSD quadratic form.
double gagliardo_seminorm(const TimeSeries& u, double s);

/// L^2(0,T) norm of the piecewise-linear interpolant.
double l2_norm(const TimeSeries& u);

/// L^2(0,T) norm of the derivative of the piecewise-linear interpolant.
double derivative_l2_norm(const TimeSeries& u);

/// Discrete H^r seminorms stacked up to order r: |u|_0 = L^2, |u|_1^2 = u^T K u,
/// |u|_2 = |Lap_h u|, |u|_3^2 = (Lap_h u)^T K (Lap_h u), |u|_4 = |Lap_h^2 u|.
double hr_norm(const Field& u, int r);

/// ( int_0^T |u(t)|^2_{H^r_h} dt + int_Omega |u(x,.)|^2 dx )^{1/2}, where the
/// temporal part is the Gagliardo seminorm squared for s > 0 and the
/// trapezoidal L^2(0,T) norm squared for s = 0. r in 0..3, s in [0, 1).
double aniso_norm(const FieldSeries& u, int r, double s);

/// ( int_0^T |u|^2_{H^4_h} dt + int_0^T |d_t u|^2_{L^2} dt )^{1/2} with
/// backward differences in time.
double h41_norm(const FieldSeries& u);

/// L^2 norm of the discrete Hessian (reflected second differences on the
/// diagonal, centered mixed differences).
double hessian_l2(const Field& c);

struct BesovBound {
  double lhs = 0.0;  // |u|_{H^s(0,T)}
  double rhs = 0.0;  // T^{1-s} / (s sqrt(2(1-s))) |u'|_{L^2}
};

BesovBound besov_bound(const TimeSeries& u, double s);

/// Even reflection about t = T, repeated and cut at T_target. T_target must
/// be a multiple of the spacing.
TimeSeries reflect_extend(const TimeSeries& u, double T_target);

struct ExtensionBound {
  double lhs = 0.0;       // |ext|_{L^2(0,T0)} + |ext|_{H^s(0,T0)}
  double rhs = 0.0;       // C ((1 + T^{-s}) |u|_{L^2} + |u|_{H^s})
  double constant = 0.0;  // C = ceil(T0 / T)
};

ExtensionBound extension_bound(const TimeSeries& u, double T_target, double s);

}  // namespace chr
