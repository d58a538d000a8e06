#pragma once

#include <string>
#include <vector>

#include "tacl/gradcheck.hpp"

namespace tacl {

// Randomized finite-difference verification of the differentiable operations
// and of the composite training loss, in wide (double) precision. Backs the
// `gradcheck` CLI subcommand and the gradient acceptance suite.

struct OpCheckSummary {
    std::string op;
    int instances = 0;
    size_t coords = 0;
    double max_rel_err = 0.0;
    bool pass = false;
};

std::vector<std::string> checkable_ops();

OpCheckSummary check_op(const std::string& op, int n_instances, uint64_t seed, double eps = 1e-5,
                        double tol = 1e-4);

// Composite loss (MLM + NSP + TaCL) through a tiny encoder, checked against
// central differences over every student parameter. train_mode exercises the
// dropout path with a replayable per-instance mask stream.
OpCheckSummary check_full_model(int n_instances, uint64_t seed, bool train_mode, double eps = 1e-5,
                                double tol = 1e-4);

}  // namespace tacl
