#pragma once

#include <functional>
#include <string>
#include <vector>

#include "springverb/models.hpp"

namespace springverb {

struct GradCheckRow {
    std::string group;
    real max_rel_err = 0;
    int coords = 0;
    bool pass = false;
};

struct GradCheckOptions {
    real h = static_cast<real>(1e-5);
    real threshold = static_cast<real>(1e-4);
    int coords_per_group = 6;
};

/// Central finite differences against tape gradients on a built model: a
/// fixed random regression loss drives the check, a few coordinates are
/// sampled per parameter group. Reported error is
/// |fd - tape| / max(|fd|, |tape|, 1e-3).
std::vector<GradCheckRow> gradcheck_model(const ModelConfig& cfg, std::uint64_t seed,
                                          const GradCheckOptions& opt = {});

bool gradcheck_passed(const std::vector<GradCheckRow>& rows);

/// Same comparison for a scalar function of one tensor; used to verify the
/// loss functions. `fn` must evaluate the loss for given input values with
/// recording onto the provided tape (null for value-only evaluation).
GradCheckRow gradcheck_function(const std::string& name,
                                const std::function<Tensor(const Tensor&, Tape*)>& fn,
                                const Tensor& x0, std::uint64_t seed,
                                const GradCheckOptions& opt = {});

}  // namespace springverb
