#pragma once

#include "syco/tensor.hpp"

namespace syco {

// Probability vector over K classes: entries nonnegative, sum 1.
struct Distribution {
  Vec probs;
};

bool is_valid_distribution(const Distribution& d, double tol = 1e-12);

// softmax with temperature, max-subtracted for stability
Distribution softmax_temp(const Vec& logits, double tau);

// natural-log Shannon entropy with the 0 ln 0 = 0 convention
double shannon_entropy(const Distribution& p);

double cosine_sim(const Vec& u, const Vec& v);

// index of the largest entry; ties resolve to the lowest index
int argmax(const Vec& v);

}  // namespace syco
