#pragma once
// Gauss-Legendre line rules and collapsed product rules on the reference
// triangle {x>=0, y>=0, x+y<=1}. A rule built for `degree` d integrates
// every polynomial of total degree <= d exactly (checked by the tests
// against closed-form monomial integrals).

#include <algorithm>
#include <cmath>
#include <vector>

#include "goaladapt/core.hpp"

namespace goaladapt {

struct LinePoint {
  double t;  // in [0,1]
  double w;
};

struct TriPoint {
  double x, y;  // barycentric-free reference coordinates
  double w;
};

// n-point Gauss-Legendre rule on [0,1], nodes ascending. Nodes are the roots
// of the Legendre polynomial P_n, found by Newton from the Chebyshev guess.
inline std::vector<LinePoint> gauss_legendre_01(int n) {
  if (n < 1) throw Error("gauss_legendre_01: need at least one point");
  std::vector<LinePoint> rule(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Legendre recurrence up to P_n and its derivative at x.
      double p0 = 1.0, p1 = x;
      for (int k = 1; k < n; ++k) {
        double p2 = ((2 * k + 1) * x * p1 - k * p0) / (k + 1);
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule[n - 1 - i] = {0.5 * (x + 1.0), 0.5 * w};  // store ascending in t
  }
  return rule;
}

// Product rule on the reference triangle via the collapsed map
// (u,v) -> (u, v*(1-u)), Jacobian (1-u). The u-leg needs one extra degree
// to absorb that Jacobian.
inline std::vector<TriPoint> triangle_rule(int degree) {
  int d = std::max(degree, 1);
  auto ru = gauss_legendre_01((d + 3) / 2);
  auto rv = gauss_legendre_01((d + 2) / 2);
  std::vector<TriPoint> rule;
  rule.reserve(ru.size() * rv.size());
  for (const auto& pu : ru)
    for (const auto& pv : rv)
      rule.push_back({pu.t, pv.t * (1.0 - pu.t), pu.w * pv.w * (1.0 - pu.t)});
  return rule;
}

inline std::vector<LinePoint> edge_rule(int degree) {
  int d = std::max(degree, 1);
  return gauss_legendre_01((d + 2) / 2);
}

}  // namespace goaladapt
