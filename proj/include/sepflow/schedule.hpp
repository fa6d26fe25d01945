#pragma once

// Activations and piecewise-constant controls of the single-neuron neural ODE
//   x' = w * g(a . x + b).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sepflow/error.hpp"

namespace sepflow {

enum class Activation { relu, truncated, fem };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::truncated: return "truncated";
    default: return "fem";
  }
}

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "truncated") return Activation::truncated;
  if (s == "fem") return Activation::fem;
  throw FormatError("unknown activation '" + s + "'");
}

template <class S>
S eval_activation(Activation kind, const S& z) {
  switch (kind) {
    case Activation::relu: return z > 0 ? z : S(0);
    case Activation::truncated: return z <= 0 ? S(0) : (z >= 1 ? S(1) : z);
    default: {
      const S m = z < 0 ? S(-z) : z;
      return m >= 1 ? S(0) : S(1 - m);
    }
  }
}

struct ControlLeg {
  Eigen::VectorXd a;
  double b = 0.0;
  Eigen::VectorXd w;  // unit
  double tau = 0.0;
  Activation activation = Activation::relu;
};

struct ControlSchedule {
  Activation activation = Activation::relu;
  std::size_t target_axis = 0;
  // Red is sent to {x_t <= 1} and blue to {x_t > 1} instead of the reverse.
  bool targets_swapped = false;
  std::vector<ControlLeg> legs;

  std::size_t switches() const { return legs.empty() ? 0 : legs.size() - 1; }

  void push(Eigen::VectorXd a, double b, Eigen::VectorXd w, double tau) {
    legs.push_back({std::move(a), b, std::move(w), tau, activation});
  }

  void validate(std::size_t dim) const {
    for (const auto& l : legs) {
      if (static_cast<std::size_t>(l.a.size()) != dim || static_cast<std::size_t>(l.w.size()) != dim)
        throw ValidationError("leg dimension mismatch");
      if (std::abs(l.w.norm() - 1.0) > 1e-12) throw ValidationError("leg direction w is not a unit vector");
      if (!(l.tau > 0) || !std::isfinite(l.tau)) throw ValidationError("leg duration must be positive");
      if (l.activation != activation) throw ValidationError("mixed activations in one schedule");
    }
  }
};

}  // namespace sepflow
