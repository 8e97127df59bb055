#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "bess/error.hpp"

namespace bess::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Solver tolerances. Inputs are expected to be scaled to roughly O(1)..O(1e4).
struct Tolerances {
    double feasibility = 1e-7;
    double integrality = 1e-6;
    double optimality_gap = 1e-6;
};

struct Term {
    std::size_t var;
    double coef;
};

/// One constraint row: lower <= sum(coef * x[var]) <= upper.
/// Plain inequalities use an infinite side; equalities use lower == upper.
struct Row {
    std::vector<Term> terms;
    double lower = -kInf;
    double upper = kInf;
};

/// minimize c.x + offset subject to row ranges, variable boxes and an optional
/// set of binary variables.
class LinearProgram {
public:
    std::size_t add_variable(double lower, double upper, double cost = 0.0, std::string name = {})
    {
        detail::require(!(lower > upper), "variable " + name + " has lower bound above upper bound");
        lower_.push_back(lower);
        upper_.push_back(upper);
        cost_.push_back(cost);
        names_.push_back(std::move(name));
        return lower_.size() - 1;
    }

    std::size_t add_binary(double cost = 0.0, std::string name = {})
    {
        const std::size_t j = add_variable(0.0, 1.0, cost, std::move(name));
        binaries_.push_back(j);
        return j;
    }

    void add_le(std::vector<Term> terms, double rhs) { add_range(std::move(terms), -kInf, rhs); }
    void add_ge(std::vector<Term> terms, double rhs) { add_range(std::move(terms), rhs, kInf); }
    void add_eq(std::vector<Term> terms, double rhs) { add_range(std::move(terms), rhs, rhs); }

    void add_range(std::vector<Term> terms, double lower, double upper)
    {
        detail::require(!(lower > upper), "constraint row has lower side above upper side");
        for (const Term& t : terms) {
            detail::require(t.var < num_variables(), "constraint references unknown variable");
            detail::require(std::isfinite(t.coef), "constraint coefficient is not finite");
        }
        rows_.push_back(Row{std::move(terms), lower, upper});
    }

    void set_cost(std::size_t j, double c) { cost_.at(j) = c; }
    void add_cost(std::size_t j, double c) { cost_.at(j) += c; }
    void set_bounds(std::size_t j, double lower, double upper)
    {
        detail::require(!(lower > upper), "set_bounds: lower above upper");
        lower_.at(j) = lower;
        upper_.at(j) = upper;
    }
    void set_offset(double offset) { offset_ = offset; }
    void add_offset(double offset) { offset_ += offset; }

    std::size_t num_variables() const { return lower_.size(); }
    std::size_t num_rows() const { return rows_.size(); }
    const std::vector<Row>& rows() const { return rows_; }
    const std::vector<double>& cost() const { return cost_; }
    const std::vector<double>& lower() const { return lower_; }
    const std::vector<double>& upper() const { return upper_; }
    const std::vector<std::size_t>& binaries() const { return binaries_; }
    const std::string& name(std::size_t j) const { return names_.at(j); }
    double offset() const { return offset_; }

    double objective(const std::vector<double>& x) const
    {
        double value = offset_;
        for (std::size_t j = 0; j < cost_.size(); ++j) {
            value += cost_[j] * x[j];
        }
        return value;
    }

    double row_activity(std::size_t i, const std::vector<double>& x) const
    {
        double a = 0.0;
        for (const Term& t : rows_[i].terms) {
            a += t.coef * x[t.var];
        }
        return a;
    }

    /// Largest absolute violation of any bound or row by x.
    double max_violation(const std::vector<double>& x) const
    {
        double worst = 0.0;
        for (std::size_t j = 0; j < num_variables(); ++j) {
            worst = std::max({worst, lower_[j] - x[j], x[j] - upper_[j]});
        }
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            const double a = row_activity(i, x);
            worst = std::max({worst, rows_[i].lower - a, a - rows_[i].upper});
        }
        return worst;
    }

private:
    std::vector<double> lower_;
    std::vector<double> upper_;
    std::vector<double> cost_;
    std::vector<std::string> names_;
    std::vector<std::size_t> binaries_;
    std::vector<Row> rows_;
    double offset_ = 0.0;
};

enum class Status { optimal, infeasible, unbounded, iteration_limit };

inline const char* to_string(Status s)
{
    switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::iteration_limit: return "iteration_limit";
    }
    return "unknown";
}

struct Solution {
    Status status = Status::infeasible;
    std::vector<double> x;
    double objective_value = kInf;
    /// Reduced costs of the structural variables at the final basis (LP only).
    std::vector<double> reduced_costs;
    std::size_t iterations = 0;

    bool optimal() const { return status == Status::optimal; }
};

} // namespace bess::lp
