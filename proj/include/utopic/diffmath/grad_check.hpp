#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "utopic/diffmath/graph.hpp"

namespace utopic::diffmath {

/// Scalar-valued function of a single differentiable tensor.
using TensorFn = std::function<Var(Graph&, Var)>;

/// Scalar-valued function of the parameters in a store.
using ParamFn = std::function<Var(Graph&, const ParamStore&)>;

inline double relative_gradient_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

/// Max over coordinates of |analytic - central FD| / max(1, |analytic|).
inline double grad_check(const TensorFn& fn, const Tensor& x, double step = 1e-5) {
  Tensor analytic;
  {
    Graph g;
    Var xv = g.leaf(x);
    Var y = fn(g, xv);
    g.backward(y);
    analytic = g.grad(xv);
  }
  auto eval = [&](const Tensor& at) {
    Graph g;
    return fn(g, g.leaf(at)).value().item();
  };
  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double fp = eval(probe);
    probe[i] = orig - step;
    const double fm = eval(probe);
    probe[i] = orig;
    worst = std::max(worst, relative_gradient_error(analytic[i], (fp - fm) / (2.0 * step)));
  }
  return worst;
}

struct ParamCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t coordinates_checked = 0;
};

/// Finite-difference check of d fn / d params. At most `max_coords` coordinates
/// per tensor are probed (chosen with a fixed seed); 0 means all of them.
inline ParamCheckReport grad_check_params(const ParamFn& fn, const ParamStore& store, double step = 1e-5,
                                          std::size_t max_coords = 0, std::uint64_t seed = 7) {
  Gradients analytic;
  {
    Graph g;
    Var y = fn(g, store);
    g.backward(y);
    analytic = g.gradients(store);
  }
  ParamStore probe = store;
  auto eval = [&]() {
    Graph g;
    return fn(g, probe).value().item();
  };
  std::mt19937_64 rng(seed);
  ParamCheckReport rep;
  for (const auto& [name, t] : store.tensors()) {
    std::vector<std::size_t> coords(t.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (max_coords != 0 && coords.size() > max_coords) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords);
    }
    Tensor& p = probe.at(name);
    for (std::size_t i : coords) {
      const double orig = p[i];
      p[i] = orig + step;
      const double fp = eval();
      p[i] = orig - step;
      const double fm = eval();
      p[i] = orig;
      const double err = relative_gradient_error(analytic.at(name)[i], (fp - fm) / (2.0 * step));
      ++rep.coordinates_checked;
      if (err > rep.max_relative_error) {
        rep.max_relative_error = err;
        rep.worst_parameter = name;
      }
    }
  }
  return rep;
}

}  // namespace utopic::diffmath
