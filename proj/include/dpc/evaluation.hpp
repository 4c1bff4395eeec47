#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dpc/error.hpp"

namespace dpc {

/// Density of a scalar QoI sampled on a fixed grid.
struct PdfEstimate {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
  std::size_t n_samples = 0;

  double integral() const;
};

inline double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("trapezoid: grid and values differ in length");
  double s = 0.0;
  for (std::size_t k = 1; k < x.size(); ++k) s += 0.5 * (x[k] - x[k - 1]) * (y[k] + y[k - 1]);
  return s;
}

inline double PdfEstimate::integral() const { return trapezoid(grid, density); }

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n < 2) throw ContractError("linspace: need at least two points");
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k)
    g[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  return g;
}

inline double sample_mean(std::span<const double> s) {
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

/// Unbiased sample standard deviation; 0 for fewer than two samples.
inline double sample_std(std::span<const double> s) {
  if (s.size() < 2) return 0.0;
  const double mu = sample_mean(s);
  double ss = 0.0;
  for (double v : s) ss += (v - mu) * (v - mu);
  return std::sqrt(ss / static_cast<double>(s.size() - 1));
}

/// Uniform grid over [min - 3 sd, max + 3 sd] of the pooled sample sets.
inline std::vector<double> pooled_grid(const std::vector<std::span<const double>>& sets,
                                       std::size_t n_points = 512) {
  std::vector<double> all;
  for (const auto& s : sets) all.insert(all.end(), s.begin(), s.end());
  if (all.empty()) throw ContractError("pooled_grid: no samples");
  const auto [mn, mx] = std::minmax_element(all.begin(), all.end());
  double pad = 3.0 * sample_std(all);
  if (!(pad > 0.0)) pad = 1e-3 * std::max(1.0, std::abs(*mn));
  return linspace(*mn - pad, *mx + pad, n_points);
}

namespace detail {

inline void normalize(PdfEstimate& p) {
  const double mass = p.integral();
  if (mass > 0.0)
    for (double& d : p.density) d /= mass;
}

/// All mass at the grid node nearest to `value`, scaled so the trapezoid integral is 1.
inline void spike(PdfEstimate& p, double value) {
  const auto& g = p.grid;
  if (value < g.front() || value > g.back())
    throw ContractError("kde: degenerate sample lies outside the grid");
  const auto it = std::lower_bound(g.begin(), g.end(), value);
  std::size_t k = static_cast<std::size_t>(it - g.begin());
  if (k > 0 && (k == g.size() || value - g[k - 1] < g[k] - value)) --k;
  const double left = k > 0 ? g[k] - g[k - 1] : 0.0;
  const double right = k + 1 < g.size() ? g[k + 1] - g[k] : 0.0;
  std::fill(p.density.begin(), p.density.end(), 0.0);
  p.density[k] = 2.0 / (left + right);
}

}  // namespace detail

/// Gaussian KDE with Silverman bandwidth 1.06 sd n^(-1/5), renormalized on its grid.
/// The bandwidth is floored at the grid spacing so narrow kernels cannot fall between nodes.
/// Samples without spread give a spike at the grid node nearest to their value.
inline PdfEstimate kde(std::span<const double> samples, std::vector<double> grid) {
  if (samples.empty()) throw ContractError("kde: empty sample set");
  if (grid.size() < 2 || !std::is_sorted(grid.begin(), grid.end()) ||
      std::adjacent_find(grid.begin(), grid.end()) != grid.end())
    throw ContractError("kde: grid must be strictly increasing with at least two points");
  PdfEstimate p;
  p.grid = std::move(grid);
  p.density.assign(p.grid.size(), 0.0);
  p.n_samples = samples.size();
  const double sd = sample_std(samples);
  if (!(sd > 1e-12 * std::max(1.0, std::abs(samples.front())))) {
    detail::spike(p, samples.front());
    return p;
  }
  const double n = static_cast<double>(samples.size());
  const double spacing = (p.grid.back() - p.grid.front()) / static_cast<double>(p.grid.size() - 1);
  const double h = std::max(1.06 * sd * std::pow(n, -0.2), spacing);
  p.bandwidth = h;
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double cutoff = 8.0 * h;
  const double norm = 1.0 / (n * h * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t k = 0; k < p.grid.size(); ++k) {
    const double y = p.grid[k];
    auto lo = std::lower_bound(sorted.begin(), sorted.end(), y - cutoff);
    auto hi = std::upper_bound(lo, sorted.end(), y + cutoff);
    double acc = 0.0;
    for (auto it = lo; it != hi; ++it) {
      const double u = (y - *it) / h;
      acc += std::exp(-0.5 * u * u);
    }
    p.density[k] = acc * norm;
  }
  detail::normalize(p);
  return p;
}

/// Tabulates an analytic density on a grid (no renormalization).
inline PdfEstimate pdf_from_density(std::vector<double> grid, const std::function<double(double)>& f) {
  PdfEstimate p;
  p.grid = std::move(grid);
  p.density.resize(p.grid.size());
  for (std::size_t k = 0; k < p.grid.size(); ++k) p.density[k] = f(p.grid[k]);
  return p;
}

/// Linear interpolation of `p` onto `grid`, zero outside its support, renormalized.
inline PdfEstimate resample(const PdfEstimate& p, const std::vector<double>& grid) {
  PdfEstimate out;
  out.grid = grid;
  out.density.assign(grid.size(), 0.0);
  out.bandwidth = p.bandwidth;
  out.n_samples = p.n_samples;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double y = grid[k];
    if (y < p.grid.front() || y > p.grid.back()) continue;
    auto it = std::upper_bound(p.grid.begin(), p.grid.end(), y);
    if (it == p.grid.end()) {
      out.density[k] = p.density.back();
      continue;
    }
    const std::size_t hi = static_cast<std::size_t>(it - p.grid.begin());
    const std::size_t lo = hi - 1;
    const double w = (y - p.grid[lo]) / (p.grid[hi] - p.grid[lo]);
    out.density[k] = (1.0 - w) * p.density[lo] + w * p.density[hi];
  }
  detail::normalize(out);
  return out;
}

/// H(P, Q) = sqrt(1/2 * integral (sqrt P - sqrt Q)^2) by the trapezoid rule on P's grid.
inline double hellinger(const PdfEstimate& p, const PdfEstimate& q) {
  if (p.grid.size() != p.density.size() || q.grid.size() != q.density.size())
    throw DimensionError("hellinger: grid and density lengths differ");
  const PdfEstimate* qq = &q;
  PdfEstimate resampled;
  if (p.grid != q.grid) {
    resampled = resample(q, p.grid);
    if (!(resampled.integral() > 0.0))
      throw ContractError("hellinger: densities share no support after resampling");
    qq = &resampled;
  }
  std::vector<double> sq(p.grid.size());
  for (std::size_t k = 0; k < sq.size(); ++k) {
    const double d = std::sqrt(std::max(p.density[k], 0.0)) - std::sqrt(std::max(qq->density[k], 0.0));
    sq[k] = d * d;
  }
  return std::sqrt(std::max(0.0, 0.5 * trapezoid(p.grid, sq)));
}

/// Hellinger distance between the KDEs of two sample sets on their pooled grid.
inline double sample_hellinger(std::span<const double> a, std::span<const double> b,
                               std::size_t grid_points = 512) {
  const std::vector<double> grid = pooled_grid({a, b}, grid_points);
  return hellinger(kde(a, grid), kde(b, grid));
}

struct TimeAveragedError {
  double epsilon = 0.0;      // mean of H over the evaluation times
  double epsilon_sum = 0.0;  // sum of H over the evaluation times
  std::vector<double> series;
};

/// H(t) between model and ground-truth QoI samples at every evaluation time, and its mean.
inline TimeAveragedError time_averaged_error(const std::vector<std::vector<double>>& model,
                                             const std::vector<std::vector<double>>& truth,
                                             const std::vector<double>& eval_times,
                                             std::size_t grid_points = 512) {
  if (model.size() != eval_times.size() || truth.size() != eval_times.size())
    throw DimensionError("time_averaged_error: one sample set per evaluation time is required");
  if (eval_times.empty()) throw ContractError("time_averaged_error: no evaluation times");
  TimeAveragedError r;
  for (std::size_t k = 0; k < eval_times.size(); ++k) {
    const double h = sample_hellinger(model[k], truth[k], grid_points);
    r.series.push_back(h);
    r.epsilon_sum += h;
  }
  r.epsilon = r.epsilon_sum / static_cast<double>(eval_times.size());
  return r;
}

}  // namespace dpc
