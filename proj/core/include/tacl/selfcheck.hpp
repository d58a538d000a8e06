#pragma once

#include <string>
#include <vector>

#include "tacl/oracles.hpp"

namespace tacl::selfcheck {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Vectorized tacl_loss against the brute-force double-loop oracle on random
// instances (n <= 8, d <= 16, tau in {1, 0.1, 0.01}); also verifies every
// per-position term is >= 0.
CheckResult tacl_oracle(int n_instances, uint64_t seed, double tol);

// Uniform teacher -> log n_valid; orthogonal two-token pair at tau=1 ->
// log(1+e^-1); uniform MLM logits over K classes -> log K; plus the matching
// sentence-level anchors.
std::vector<CheckResult> closed_form_anchors(double tol);

CheckResult mlm_oracle(int n_instances, uint64_t seed, double tol);
CheckResult sent_cl_oracle(int n_instances, uint64_t seed, double tol);

// s(x) against the explicit double loop, the identical/orthonormal anchors,
// and the -1/(n-1) lower bound on random instances.
CheckResult self_similarity_oracle(int n_instances, uint64_t seed, double tol);

// tacl_loss and s(x) invariance under random positive per-row rescaling.
CheckResult scale_invariance(int n_instances, uint64_t seed, double tol);

// Selection rate and replacement split over at least min_maskable non-special
// tokens; special positions must never be selected.
CheckResult masking_statistics(long long min_maskable, uint64_t seed, double rate_tol,
                               double split_tol);

std::vector<CheckResult> run_all(uint64_t seed, bool quick);

}  // namespace tacl::selfcheck
