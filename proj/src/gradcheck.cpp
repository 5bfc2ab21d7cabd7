#include "springverb/gradcheck.hpp"

#include <cmath>

#include "springverb/rng.hpp"

namespace springverb {

namespace {

real rel_err(real fd, real tape) {
    const real denom = std::max({std::fabs(fd), std::fabs(tape), static_cast<real>(1e-3)});
    return std::fabs(fd - tape) / denom;
}

}  // namespace

std::vector<GradCheckRow> gradcheck_model(const ModelConfig& cfg, std::uint64_t seed,
                                          const GradCheckOptions& opt) {
    Model model = Model::build(cfg, seed);
    Rng rng(seed ^ 0xabcdef12345ULL);

    const int T = is_convolutional(cfg.kind) ? *receptive_field(cfg) + 32 : 64;
    Tensor x = Tensor::zeros({1, 1, T});
    for (auto& v : x.mut_data()) v = rng.uniform(-static_cast<real>(0.8), static_cast<real>(0.8));
    Tensor cond = Tensor::zeros({1, cfg.cond_dim});
    for (auto& v : cond.mut_data()) v = rng.uniform(-1, 1);
    Tensor target = Tensor::zeros({1, 1, T});
    for (auto& v : target.mut_data()) v = rng.uniform(-1, 1);

    auto loss_value = [&](Ctx& ctx) {
        Tensor y = model.forward(x, cond, ctx);
        return mean(square(sub(y, target)));
    };

    // one tape pass for analytic gradients
    Tape tape;
    Ctx ctx(&tape, true);
    Tensor loss = loss_value(ctx);
    tape.backward(loss);

    std::vector<GradCheckRow> rows;
    for (auto& [name, param] : model.params_mut()) {
        const std::vector<real> analytic = ctx.grad_of(param);
        GradCheckRow row;
        row.group = name;
        const auto n = static_cast<std::int64_t>(param.numel());
        const int coords = static_cast<int>(std::min<std::int64_t>(opt.coords_per_group, n));
        row.coords = coords;
        auto pdata = param.mut_data();
        for (int cidx = 0; cidx < coords; ++cidx) {
            const auto i = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n)));
            const real saved = pdata[i];
            Ctx plain;
            pdata[i] = saved + opt.h;
            const real lp = loss_value(plain).item();
            pdata[i] = saved - opt.h;
            const real lm = loss_value(plain).item();
            pdata[i] = saved;
            const real fd = (lp - lm) / (2 * opt.h);
            row.max_rel_err = std::max(row.max_rel_err, rel_err(fd, analytic[i]));
        }
        row.pass = row.max_rel_err < opt.threshold;
        rows.push_back(std::move(row));
    }
    return rows;
}

bool gradcheck_passed(const std::vector<GradCheckRow>& rows) {
    for (const auto& r : rows)
        if (!r.pass) return false;
    return true;
}

GradCheckRow gradcheck_function(const std::string& name,
                                const std::function<Tensor(const Tensor&, Tape*)>& fn,
                                const Tensor& x0, std::uint64_t seed, const GradCheckOptions& opt) {
    Tape tape;
    Tensor x_leaf = tape.leaf(x0);
    Tensor loss = fn(x_leaf, &tape);
    tape.backward(loss);
    const auto analytic = tape.grad(x_leaf);

    GradCheckRow row;
    row.group = name;
    Rng rng(seed ^ 0x77f00dULL);
    Tensor x = x0;
    auto pdata = x.mut_data();
    const auto n = static_cast<std::int64_t>(x.numel());
    const int coords = static_cast<int>(std::min<std::int64_t>(opt.coords_per_group, n));
    row.coords = coords;
    for (int cidx = 0; cidx < coords; ++cidx) {
        const auto i = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n)));
        const real saved = pdata[i];
        pdata[i] = saved + opt.h;
        const real lp = fn(x, nullptr).item();
        pdata[i] = saved - opt.h;
        const real lm = fn(x, nullptr).item();
        pdata[i] = saved;
        const real fd = (lp - lm) / (2 * opt.h);
        row.max_rel_err = std::max(row.max_rel_err, rel_err(fd, analytic[i]));
    }
    row.pass = row.max_rel_err < opt.threshold;
    return row;
}

}  // namespace springverb
