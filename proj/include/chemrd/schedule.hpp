#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "chemrd/errors.hpp"

namespace chemrd {

enum class ScheduleRule {
    piecewise_linear,
    piecewise_constant,
};

// Time-indexed coefficient table. Each knot carries either a single value
// (spatially uniform) or one value per grid cell. Evaluation clamps time to
// [times.front(), times.back()]; between knots the rule decides whether the
// value is interpolated linearly or held from the left knot.
class Schedule {
public:
    Schedule() : times_{0.0}, values_{{0.0}} {}

    Schedule(std::vector<double> times, std::vector<std::vector<double>> values,
             ScheduleRule rule = ScheduleRule::piecewise_linear)
        : times_(std::move(times)), values_(std::move(values)), rule_(rule) {
        validate("schedule");
    }

    static Schedule constant(double v) {
        Schedule s;
        s.values_[0][0] = v;
        s.validate("schedule");
        return s;
    }

    static Schedule piecewise_linear(std::vector<double> times, std::vector<double> scalar_values) {
        std::vector<std::vector<double>> vals;
        vals.reserve(scalar_values.size());
        for (double v : scalar_values) vals.push_back({v});
        return Schedule(std::move(times), std::move(vals), ScheduleRule::piecewise_linear);
    }

    static Schedule piecewise_constant(std::vector<double> times, std::vector<double> scalar_values) {
        std::vector<std::vector<double>> vals;
        vals.reserve(scalar_values.size());
        for (double v : scalar_values) vals.push_back({v});
        return Schedule(std::move(times), std::move(vals), ScheduleRule::piecewise_constant);
    }

    double operator()(double t, std::size_t cell = 0) const {
        if (!std::isfinite(t)) throw evaluation_error("schedule evaluated at non-finite time");
        if (t <= times_.front()) return value_at(0, cell);
        if (t >= times_.back()) return value_at(times_.size() - 1, cell);
        const auto it = std::upper_bound(times_.begin(), times_.end(), t);
        const std::size_t k = static_cast<std::size_t>(it - times_.begin()) - 1;
        if (rule_ == ScheduleRule::piecewise_constant) return value_at(k, cell);
        const double w = (t - times_[k]) / (times_[k + 1] - times_[k]);
        return (1.0 - w) * value_at(k, cell) + w * value_at(k + 1, cell);
    }

    bool is_constant() const { return times_.size() == 1; }
    const std::vector<double>& knot_times() const { return times_; }
    const std::vector<std::vector<double>>& knot_values() const { return values_; }
    ScheduleRule rule() const { return rule_; }

    double min_value() const {
        double m = values_[0][0];
        for (const auto& row : values_)
            for (double v : row) m = std::min(m, v);
        return m;
    }

    double max_value() const {
        double m = values_[0][0];
        for (const auto& row : values_)
            for (double v : row) m = std::max(m, v);
        return m;
    }

    // Throws model_error naming `what` if the knot table is malformed.
    void validate(const std::string& what) const {
        if (times_.empty() || values_.size() != times_.size())
            throw model_error(what + ": knot times and values must be nonempty and equally long");
        std::size_t width = values_[0].size();
        for (std::size_t k = 0; k < times_.size(); ++k) {
            if (!std::isfinite(times_[k]))
                throw model_error(what + ": non-finite knot time");
            if (k > 0 && !(times_[k] > times_[k - 1]))
                throw model_error(what + ": knot times must be strictly increasing");
            if (values_[k].empty() || values_[k].size() != width)
                throw model_error(what + ": every knot must carry the same number of values");
            for (double v : values_[k])
                if (!std::isfinite(v)) throw model_error(what + ": non-finite knot value");
        }
    }

private:
    double value_at(std::size_t k, std::size_t cell) const {
        const auto& row = values_[k];
        if (row.size() == 1) return row[0];
        if (cell >= row.size())
            throw evaluation_error("schedule: cell index out of range for per-cell values");
        return row[cell];
    }

    std::vector<double> times_;
    std::vector<std::vector<double>> values_;
    ScheduleRule rule_ = ScheduleRule::piecewise_linear;
};

} // namespace chemrd
