#pragma once

#include <cstddef>
#include <span>

// Slow reference characterizations of the isotonic fit. They share no code
// with pava() and exist to cross-check it.

namespace monogls::oracle {

/// Left derivative at the t-th abscissa (1-based) of the greatest convex
/// minorant of the cumulative sum diagram {(cumsum_x[j], cumsum_y[j])}.
/// The diagram must start at the origin, so t ranges over 1..size-1.
double gcm_left_derivative(std::span<const double> cumsum_x,
                           std::span<const double> cumsum_y, std::size_t t);

/// max over s <= i of min over t >= i of mean(y[s..t]), with 1-based i.
/// x must be sorted ascending with ties already averaged.
double minmax_value(std::span<const double> x, std::span<const double> y,
                    std::size_t i);

}  // namespace monogls::oracle
