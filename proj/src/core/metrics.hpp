#pragma once

#include <utility>

#include "denoiser.hpp"
#include "graph.hpp"
#include "reconstruct.hpp"

namespace blink {

// (l1_error, mae) of an estimate against the ground-truth adjacency;
// mae = l1 / n^2.
std::pair<double, double> mae(const PosteriorMatrix& P, const Graph& g);
std::pair<double, double> mae(const EstimatedGraph& est, const Graph& g);

// Upper bound on E[|P - A|_1]: 2 |A|_1 + n / (2 epsilon_d).
double mae_bound(const Graph& g, double epsilon_d);
double mae_bound_raw(double adjacency_l1, std::size_t n, double epsilon_d);

}  // namespace blink
