#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "bess/lp/linear_program.hpp"
#include "bess/lp/simplex.hpp"

namespace bess::lp {

namespace detail {

struct Node {
    std::vector<std::pair<std::size_t, double>> fixings;
};

/// Most fractional binary; ties go to the lowest index. kNone when integral.
inline std::size_t pick_branch_variable(const LinearProgram& prob, const std::vector<double>& x, double int_tol)
{
    std::size_t best = static_cast<std::size_t>(-1);
    double best_frac = int_tol;
    for (std::size_t j : prob.binaries()) {
        const double frac = std::abs(x[j] - std::round(x[j]));
        if (frac > best_frac || (frac == best_frac && best != static_cast<std::size_t>(-1) && j < best)) {
            best_frac = frac;
            best = j;
        }
    }
    return best;
}

} // namespace detail

/// Depth-first branch and bound over the binary set, bounding with the LP
/// relaxation. Without binaries this is exactly solve_lp.
inline Solution solve_milp(const LinearProgram& prob, const SimplexOptions& options = {})
{
    if (prob.binaries().empty()) {
        return solve_lp(prob, options);
    }
    const Tolerances& tol = options.tolerances;
    constexpr std::size_t kNone = static_cast<std::size_t>(-1);

    Solution incumbent;
    incumbent.status = Status::infeasible;
    bool any_unbounded = false;
    std::size_t total_iterations = 0;

    std::vector<detail::Node> stack;
    stack.push_back({});
    while (!stack.empty()) {
        detail::Node node = std::move(stack.back());
        stack.pop_back();

        LinearProgram sub = prob;
        for (const auto& [j, v] : node.fixings) {
            sub.set_bounds(j, v, v);
        }
        Solution relax = solve_lp(sub, options);
        total_iterations += relax.iterations;
        if (relax.status == Status::unbounded) {
            any_unbounded = true;
            continue;
        }
        if (!relax.optimal()) {
            continue;
        }
        if (incumbent.optimal()) {
            const double gap = tol.optimality_gap * std::max(1.0, std::abs(incumbent.objective_value));
            if (relax.objective_value >= incumbent.objective_value - gap) {
                continue;
            }
        }
        const std::size_t branch = detail::pick_branch_variable(prob, relax.x, tol.integrality);
        if (branch == kNone) {
            for (std::size_t j : prob.binaries()) {
                relax.x[j] = std::round(relax.x[j]);
            }
            relax.objective_value = prob.objective(relax.x);
            incumbent = std::move(relax);
            continue;
        }
        // Explore the nearer side first: push it last.
        const bool up_first = relax.x[branch] >= 0.5;
        detail::Node far = node;
        detail::Node near = node;
        far.fixings.emplace_back(branch, up_first ? 0.0 : 1.0);
        near.fixings.emplace_back(branch, up_first ? 1.0 : 0.0);
        stack.push_back(std::move(far));
        stack.push_back(std::move(near));
    }
    if (!incumbent.optimal() && any_unbounded) {
        incumbent.status = Status::unbounded;
    }
    incumbent.iterations = total_iterations;
    incumbent.reduced_costs.clear();
    return incumbent;
}

} // namespace bess::lp
