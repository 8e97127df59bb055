#pragma once

// Bounded-variable primal simplex on a dense tableau.
//
// Every row i gets a logical variable r_i = a_i.x carrying the row range as its
// box, so the working system is [A | -I] z = 0 with all of z boxed. The start
// basis is the logicals. Phase 1 minimizes the sum of bound violations of the
// basic variables (composite objective, recomputed every iteration); phase 2
// prices the true costs. Ties and degenerate stalls fall back to Bland's rule.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "bess/lp/linear_program.hpp"

namespace bess::lp {

struct SimplexOptions {
    Tolerances tolerances{};
    std::size_t max_iterations = 500000;
};

namespace detail {

class BoundedSimplex {
public:
    BoundedSimplex(const LinearProgram& prob, const SimplexOptions& options)
        : prob_(prob), options_(options), m_(prob.num_rows()), n_(prob.num_variables()), cols_(n_ + m_)
    {
        setup();
    }

    Solution run()
    {
        Solution sol;
        if (trivially_infeasible_) {
            sol.status = Status::infeasible;
            return sol;
        }
        int final_checks = 0;
        while (true) {
            if (iterations_ >= options_.max_iterations) {
                sol.status = Status::iteration_limit;
                break;
            }
            if (iterations_since_reinvert_ >= reinvert_interval_) {
                reinvert();
            }
            const bool feasible = primal_feasible();
            if (!feasible && !in_phase1_) {
                in_phase1_ = true;
            }
            if (feasible && in_phase1_) {
                in_phase1_ = false;
                recompute_reduced_costs();
            }
            if (in_phase1_) {
                compute_phase1_reduced_costs();
            }
            const Entering entering = choose_entering();
            if (entering.col == kNone) {
                if (in_phase1_) {
                    if (max_infeasibility() <= options_.tolerances.feasibility) {
                        primal_tol_ = options_.tolerances.feasibility;
                        continue;
                    }
                    sol.status = Status::infeasible;
                    break;
                }
                // Optimal by the maintained reduced costs; confirm on a fresh factorization.
                if (final_checks < 3) {
                    ++final_checks;
                    reinvert();
                    if (!primal_feasible()) {
                        continue;
                    }
                    if (choose_entering().col != kNone) {
                        continue;
                    }
                }
                sol.status = Status::optimal;
                break;
            }
            if (!step(entering)) {
                sol.status = Status::unbounded;
                break;
            }
        }
        sol.iterations = iterations_;
        if (sol.status == Status::optimal) {
            sol.x.assign(value_.begin(), value_.begin() + static_cast<std::ptrdiff_t>(n_));
            for (std::size_t j = 0; j < n_; ++j) {
                sol.x[j] = std::clamp(sol.x[j], lower_[j], upper_[j]);
            }
            sol.objective_value = prob_.objective(sol.x);
            sol.reduced_costs.assign(reduced_.begin(), reduced_.begin() + static_cast<std::ptrdiff_t>(n_));
        }
        return sol;
    }

private:
    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    static constexpr double kPivotTol = 1e-9;

    enum class State : std::uint8_t { basic, at_lower, at_upper, free_zero };

    struct Entering {
        std::size_t col = kNone;
        int dir = 0;
    };

    double& tab(std::size_t i, std::size_t j) { return tableau_[i * cols_ + j]; }
    double tab(std::size_t i, std::size_t j) const { return tableau_[i * cols_ + j]; }

    void setup()
    {
        lower_.resize(cols_);
        upper_.resize(cols_);
        cost_.assign(cols_, 0.0);
        value_.assign(cols_, 0.0);
        state_.assign(cols_, State::at_lower);
        row_of_.assign(cols_, kNone);
        head_.resize(m_);
        scaled_.assign(m_ * n_, 0.0);

        double max_cost = 0.0;
        for (std::size_t j = 0; j < n_; ++j) {
            lower_[j] = prob_.lower()[j];
            upper_[j] = prob_.upper()[j];
            cost_[j] = prob_.cost()[j];
            max_cost = std::max(max_cost, std::abs(cost_[j]));
            if (std::isfinite(lower_[j])) {
                state_[j] = State::at_lower;
                value_[j] = lower_[j];
            } else if (std::isfinite(upper_[j])) {
                state_[j] = State::at_upper;
                value_[j] = upper_[j];
            } else {
                state_[j] = State::free_zero;
                value_[j] = 0.0;
            }
        }
        dual_tol_ = 1e-9 * std::max(1.0, max_cost);

        for (std::size_t i = 0; i < m_; ++i) {
            const Row& row = prob_.rows()[i];
            double scale = 0.0;
            for (const Term& t : row.terms) {
                scale = std::max(scale, std::abs(t.coef));
            }
            if (scale == 0.0) {
                // Empty row: 0 must lie inside its range.
                if (row.lower > options_.tolerances.feasibility || row.upper < -options_.tolerances.feasibility) {
                    trivially_infeasible_ = true;
                }
                scale = 1.0;
            }
            const double s = 1.0 / scale;
            for (const Term& t : row.terms) {
                scaled_[i * n_ + t.var] += t.coef * s;
            }
            lower_[n_ + i] = row.lower * s;
            upper_[n_ + i] = row.upper * s;
        }
        reinvert_interval_ = std::max<std::size_t>(200, 3 * m_);
        load_logical_basis();
        for (std::size_t i = 0; i < m_; ++i) {
            head_[i] = n_ + i;
            row_of_[n_ + i] = i;
            state_[n_ + i] = State::basic;
        }
        compute_basic_values();
        recompute_reduced_costs();
    }

    void load_logical_basis()
    {
        tableau_.assign(m_ * cols_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) {
                tab(i, j) = -scaled_[i * n_ + j];
            }
            tab(i, n_ + i) = 1.0;
        }
    }

    void compute_basic_values()
    {
        for (std::size_t i = 0; i < m_; ++i) {
            double v = 0.0;
            const double* row = &tableau_[i * cols_];
            for (std::size_t j = 0; j < cols_; ++j) {
                if (state_[j] != State::basic && row[j] != 0.0) {
                    v -= row[j] * value_[j];
                }
            }
            value_[head_[i]] = v;
        }
    }

    void recompute_reduced_costs()
    {
        reduced_.assign(cost_.begin(), cost_.end());
        for (std::size_t i = 0; i < m_; ++i) {
            const double cb = cost_[head_[i]];
            if (cb == 0.0) {
                continue;
            }
            const double* row = &tableau_[i * cols_];
            for (std::size_t j = 0; j < cols_; ++j) {
                reduced_[j] -= cb * row[j];
            }
        }
        for (std::size_t i = 0; i < m_; ++i) {
            reduced_[head_[i]] = 0.0;
        }
    }

    void compute_phase1_reduced_costs()
    {
        reduced_.assign(cols_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            const std::size_t b = head_[i];
            double w = 0.0;
            if (value_[b] < lower_[b] - primal_tol_) {
                w = -1.0;
            } else if (value_[b] > upper_[b] + primal_tol_) {
                w = 1.0;
            }
            if (w == 0.0) {
                continue;
            }
            const double* row = &tableau_[i * cols_];
            for (std::size_t j = 0; j < cols_; ++j) {
                reduced_[j] -= w * row[j];
            }
        }
        for (std::size_t i = 0; i < m_; ++i) {
            reduced_[head_[i]] = 0.0;
        }
    }

    bool primal_feasible() const
    {
        for (std::size_t i = 0; i < m_; ++i) {
            const std::size_t b = head_[i];
            if (value_[b] < lower_[b] - primal_tol_ || value_[b] > upper_[b] + primal_tol_) {
                return false;
            }
        }
        return true;
    }

    double max_infeasibility() const
    {
        double worst = 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
            const std::size_t b = head_[i];
            worst = std::max({worst, lower_[b] - value_[b], value_[b] - upper_[b]});
        }
        return worst;
    }

    Entering choose_entering() const
    {
        Entering best;
        double best_score = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) {
            int dir = 0;
            const double d = reduced_[j];
            switch (state_[j]) {
            case State::basic:
                continue;
            case State::at_lower:
                if (d < -dual_tol_ && upper_[j] > lower_[j]) {
                    dir = 1;
                }
                break;
            case State::at_upper:
                if (d > dual_tol_ && upper_[j] > lower_[j]) {
                    dir = -1;
                }
                break;
            case State::free_zero:
                if (std::abs(d) > dual_tol_) {
                    dir = d < 0.0 ? 1 : -1;
                }
                break;
            }
            if (dir == 0) {
                continue;
            }
            if (bland_) {
                return Entering{j, dir};
            }
            if (std::abs(d) > best_score) {
                best_score = std::abs(d);
                best = Entering{j, dir};
            }
        }
        return best;
    }

    // Step length limit for basic variable in row i moving at rate g, or +inf.
    // `relax` widens the bounds (Harris pass 1).
    double limit(std::size_t i, double g, double relax) const
    {
        const std::size_t b = head_[i];
        const double v = value_[b];
        const double lo = lower_[b];
        const double hi = upper_[b];
        const bool below = v < lo - primal_tol_;
        const bool above = v > hi + primal_tol_;
        if (g > 0.0) {
            if (below) {
                return (lo - v + relax) / g;
            }
            if (above || !std::isfinite(hi)) {
                return kInf;
            }
            return std::max(0.0, (hi - v + relax) / g);
        }
        if (above) {
            return (hi - v - relax) / g;
        }
        if (below || !std::isfinite(lo)) {
            return kInf;
        }
        return std::max(0.0, (lo - v - relax) / g);
    }

    bool step(const Entering& e)
    {
        const std::size_t q = e.col;
        const double dir = e.dir;
        const double range = upper_[q] - lower_[q];

        // Harris pass 1: largest step with bounds relaxed by the tolerance.
        double t_relaxed = kInf;
        for (std::size_t i = 0; i < m_; ++i) {
            const double g = -tab(i, q) * dir;
            if (std::abs(g) <= kPivotTol) {
                continue;
            }
            t_relaxed = std::min(t_relaxed, limit(i, g, primal_tol_));
        }

        // Pass 2: among rows blocking within the relaxed step, take the largest pivot.
        std::size_t leave = kNone;
        double best_pivot = 0.0;
        double t = kInf;
        for (std::size_t i = 0; i < m_; ++i) {
            const double g = -tab(i, q) * dir;
            if (std::abs(g) <= kPivotTol) {
                continue;
            }
            const double lim = limit(i, g, 0.0);
            if (lim > t_relaxed) {
                continue;
            }
            if (bland_) {
                if (leave == kNone || lim < t - 1e-12 || (lim <= t + 1e-12 && head_[i] < head_[leave])) {
                    leave = i;
                    t = lim;
                }
            } else if (std::abs(g) > best_pivot) {
                best_pivot = std::abs(g);
                leave = i;
                t = lim;
            }
        }
        if (leave != kNone) {
            t = std::max(t, 0.0);
        }

        const bool flip = std::isfinite(range) && (leave == kNone || range <= t);
        if (flip) {
            t = range;
        }
        if (!std::isfinite(t)) {
            return false;
        }

        ++iterations_;
        ++iterations_since_reinvert_;
        if (t <= 1e-12) {
            if (++degenerate_run_ > 40) {
                bland_ = true;
            }
        } else {
            degenerate_run_ = 0;
            bland_ = false;
        }

        value_[q] += dir * t;
        if (t != 0.0) {
            for (std::size_t i = 0; i < m_; ++i) {
                const double a = tab(i, q);
                if (a != 0.0) {
                    value_[head_[i]] -= a * dir * t;
                }
            }
        }

        if (flip) {
            if (e.dir > 0) {
                state_[q] = State::at_upper;
                value_[q] = upper_[q];
            } else {
                state_[q] = State::at_lower;
                value_[q] = lower_[q];
            }
            return true;
        }

        const std::size_t out = head_[leave];
        const double g_out = -tab(leave, q) * dir;
        // Which bound did the leaving variable hit?
        const double v_out = value_[out];
        bool to_upper;
        if (std::isfinite(upper_[out]) && std::isfinite(lower_[out])) {
            to_upper = std::abs(v_out - upper_[out]) < std::abs(v_out - lower_[out]);
            if (upper_[out] == lower_[out]) {
                to_upper = g_out > 0.0;
            }
        } else {
            to_upper = std::isfinite(upper_[out]);
        }
        state_[out] = to_upper ? State::at_upper : State::at_lower;
        value_[out] = to_upper ? upper_[out] : lower_[out];
        row_of_[out] = kNone;

        pivot(leave, q);
        return true;
    }

    void pivot(std::size_t r, std::size_t q)
    {
        double* prow = &tableau_[r * cols_];
        const double inv = 1.0 / prow[q];
        for (std::size_t j = 0; j < cols_; ++j) {
            prow[j] *= inv;
        }
        prow[q] = 1.0;
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == r) {
                continue;
            }
            double* row = &tableau_[i * cols_];
            const double f = row[q];
            if (f == 0.0) {
                continue;
            }
            for (std::size_t j = 0; j < cols_; ++j) {
                row[j] -= f * prow[j];
            }
            row[q] = 0.0;
        }
        if (!in_phase1_) {
            const double dq = reduced_[q];
            if (dq != 0.0) {
                for (std::size_t j = 0; j < cols_; ++j) {
                    reduced_[j] -= dq * prow[j];
                }
            }
            reduced_[q] = 0.0;
        }
        head_[r] = q;
        row_of_[q] = r;
        state_[q] = State::basic;
    }

    // Rebuild the tableau for the current basis from the original matrix.
    void reinvert()
    {
        iterations_since_reinvert_ = 0;
        std::vector<std::size_t> wanted;
        for (std::size_t i = 0; i < m_; ++i) {
            wanted.push_back(head_[i]);
        }
        load_logical_basis();
        std::vector<char> is_wanted(cols_, 0);
        for (std::size_t b : wanted) {
            is_wanted[b] = 1;
        }
        for (std::size_t i = 0; i < m_; ++i) {
            head_[i] = n_ + i;
        }
        for (std::size_t b : wanted) {
            if (b >= n_ && head_[b - n_] == b) {
                continue;
            }
            // Pivot b into a row currently held by an unwanted logical.
            std::size_t best = kNone;
            double best_abs = 1e-11;
            for (std::size_t i = 0; i < m_; ++i) {
                const std::size_t h = head_[i];
                if (h >= n_ && !is_wanted[h] && std::abs(tab(i, b)) > best_abs) {
                    best_abs = std::abs(tab(i, b));
                    best = i;
                }
            }
            if (best == kNone) {
                // Numerically dependent column; leave it nonbasic at its nearest bound.
                is_wanted[b] = 0;
                continue;
            }
            const bool saved_phase = in_phase1_;
            in_phase1_ = true; // skip reduced-cost update; recomputed below
            pivot(best, b);
            in_phase1_ = saved_phase;
        }
        std::fill(row_of_.begin(), row_of_.end(), kNone);
        for (std::size_t j = 0; j < cols_; ++j) {
            if (state_[j] == State::basic) {
                state_[j] = State::at_lower;
            }
        }
        for (std::size_t i = 0; i < m_; ++i) {
            row_of_[head_[i]] = i;
            state_[head_[i]] = State::basic;
        }
        for (std::size_t j = 0; j < cols_; ++j) {
            if (state_[j] == State::basic) {
                continue;
            }
            // Variables dropped from the basis sit at their nearest finite bound.
            const double v = value_[j];
            if (std::isfinite(lower_[j]) && std::isfinite(upper_[j])) {
                const bool up = std::abs(v - upper_[j]) < std::abs(v - lower_[j]);
                state_[j] = up ? State::at_upper : State::at_lower;
            } else if (std::isfinite(lower_[j])) {
                state_[j] = State::at_lower;
            } else if (std::isfinite(upper_[j])) {
                state_[j] = State::at_upper;
            } else {
                state_[j] = State::free_zero;
            }
            value_[j] = state_[j] == State::at_upper   ? upper_[j]
                        : state_[j] == State::at_lower ? lower_[j]
                        : (state_[j] == State::free_zero ? (std::isfinite(v) ? v : 0.0) : v);
        }
        compute_basic_values();
        if (in_phase1_) {
            compute_phase1_reduced_costs();
        } else {
            recompute_reduced_costs();
        }
    }

    const LinearProgram& prob_;
    SimplexOptions options_;
    std::size_t m_;
    std::size_t n_;
    std::size_t cols_;

    std::vector<double> scaled_;
    std::vector<double> tableau_;
    std::vector<double> lower_;
    std::vector<double> upper_;
    std::vector<double> cost_;
    std::vector<double> value_;
    std::vector<double> reduced_;
    std::vector<State> state_;
    std::vector<std::size_t> head_;
    std::vector<std::size_t> row_of_;

    double primal_tol_ = 1e-9;
    double dual_tol_ = 1e-9;
    bool in_phase1_ = false;
    bool bland_ = false;
    bool trivially_infeasible_ = false;
    std::size_t degenerate_run_ = 0;
    std::size_t iterations_ = 0;
    std::size_t iterations_since_reinvert_ = 0;
    std::size_t reinvert_interval_ = 200;
};

} // namespace detail

/// Solve the continuous relaxation of `prob` (binary markers are ignored).
inline Solution solve_lp(const LinearProgram& prob, const SimplexOptions& options = {})
{
    detail::BoundedSimplex simplex(prob, options);
    return simplex.run();
}

} // namespace bess::lp
