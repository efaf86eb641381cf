#include "micropart/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "micropart/errors.hpp"

namespace micropart::quadrature {

namespace {

// Gauss-Kronrod 15-point nodes/weights on [-1,1] (positive half; symmetric).
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Interval {
  double a, b, value, error;
  bool operator<(const Interval& o) const { return error < o.error; }
};

Interval evaluate(const std::function<double(double)>& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double fv[15];
  for (int i = 0; i < 7; ++i) {
    fv[i] = f(center - half * kXgk[i]);
    fv[14 - i] = f(center + half * kXgk[i]);
  }
  fv[7] = f(center);
  double result_kronrod = kWgk[7] * fv[7];
  double result_gauss = kWg[3] * fv[7];
  for (int i = 0; i < 7; ++i) {
    result_kronrod += kWgk[i] * (fv[i] + fv[14 - i]);
    if (i % 2 == 1) result_gauss += kWg[i / 2] * (fv[i] + fv[14 - i]);
  }
  const double value = result_kronrod * half;
  double err = std::abs((result_kronrod - result_gauss) * half);
  // standard QUADPACK-style error sharpening
  double resabs = 0.0;
  for (int i = 0; i < 7; ++i) resabs += kWgk[i] * (std::abs(fv[i]) + std::abs(fv[14 - i]));
  resabs += kWgk[7] * std::abs(fv[7]);
  resabs *= std::abs(half);
  if (resabs > 0.0 && err > 0.0)
    err = resabs * std::min(1.0, std::pow(200.0 * err / resabs, 1.5));
  return {a, b, value, err};
}

}  // namespace

Result panel_k15(const std::function<double(double)>& f, double a, double b) {
  const Interval iv = evaluate(f, a, b);
  return {iv.value, iv.error, true};
}

Result integrate(const std::function<double(double)>& f, double a, double b, double abs_tol,
                 double rel_tol, int max_intervals, bool nothrow) {
  if (a == b) return {0.0, 0.0, true};
  std::priority_queue<Interval> heap;
  Interval whole = evaluate(f, a, b);
  double total = whole.value;
  double total_err = whole.error;
  heap.push(whole);
  int n_intervals = 1;
  while (total_err > std::max(abs_tol, rel_tol * std::abs(total)) &&
         n_intervals < max_intervals) {
    Interval worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {
      // interval at machine resolution; keep its estimate and move on
      total_err -= worst.error;
      continue;
    }
    Interval left = evaluate(f, worst.a, mid);
    Interval right = evaluate(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++n_intervals;
  }
  const bool converged = total_err <= std::max(abs_tol, rel_tol * std::abs(total));
  if (!converged && !nothrow)
    throw numerical_error("adaptive quadrature did not reach tolerance; achieved " +
                              std::to_string(total_err),
                          total_err);
  return {total, total_err, converged};
}

}  // namespace micropart::quadrature
