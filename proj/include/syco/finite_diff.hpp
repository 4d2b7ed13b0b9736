#pragma once

#include <functional>

#include "syco/tensor.hpp"

namespace syco {

// Central-difference gradient oracle. Every analytic gradient in the
// repository is checked against this on random inputs.
Vec finite_diff_grad(const std::function<double(const Vec&)>& f,
                     const Vec& theta, double h = 1e-6);

// norm-wise relative error ||a - b|| / max(||b||, floor)
double rel_error(const Vec& a, const Vec& b, double floor = 1e-12);

}  // namespace syco
