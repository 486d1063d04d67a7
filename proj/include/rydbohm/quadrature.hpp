#pragma once

#include <vector>

namespace rydbohm::quadrature {

struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [-1, 1].
Rule gauss_legendre(int n);

// The same rule mapped affinely onto [a, b].
Rule gauss_legendre(int n, double a, double b);

// Composite rule: `panels` equal sub-intervals of [a, b], n points each.
Rule composite_gauss_legendre(int n, int panels, double a, double b);

} // namespace rydbohm::quadrature
