#pragma once

#include "diatomic/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace diatomic {

using StateId = std::size_t;
using ActionId = std::size_t;

/**
 * Dense table indexed by (state, action), row-major over states.
 *
 * Used for Q-functions (`QTable`) and for per-pair return distributions
 * (`DistFunction`). Entries for actions that a reduced MDP does not offer are
 * still stored so that actions keep their original ids everywhere.
 */
template <class T>
class StateActionTable {
public:
    StateActionTable() = default;

    StateActionTable(std::size_t n_states, std::size_t n_actions, const T& init = T{})
        : n_states_(n_states), n_actions_(n_actions), data_(n_states * n_actions, init) {}

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }
    std::size_t size() const noexcept { return data_.size(); }

    T& operator()(StateId x, ActionId a) { return data_[x * n_actions_ + a]; }
    const T& operator()(StateId x, ActionId a) const { return data_[x * n_actions_ + a]; }

    std::span<T> row(StateId x) { return {data_.data() + x * n_actions_, n_actions_}; }
    std::span<const T> row(StateId x) const { return {data_.data() + x * n_actions_, n_actions_}; }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    template <class U>
    bool same_shape(const StateActionTable<U>& other) const noexcept {
        return n_states_ == other.n_states() && n_actions_ == other.n_actions();
    }

    bool operator==(const StateActionTable&) const = default;

private:
    std::size_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    std::vector<T> data_;
};

using QTable = StateActionTable<double>;

template <class T, class U>
void require_same_shape(const StateActionTable<T>& lhs, const StateActionTable<U>& rhs,
                        const char* what) {
    if (!lhs.same_shape(rhs)) {
        throw StructuralError(std::string(what) + ": table shape " +
                              std::to_string(lhs.n_states()) + "x" + std::to_string(lhs.n_actions()) +
                              " does not match " + std::to_string(rhs.n_states()) + "x" +
                              std::to_string(rhs.n_actions()));
    }
}

/// Sup-norm distance between two Q tables of equal shape.
inline double sup_distance(const QTable& lhs, const QTable& rhs) {
    require_same_shape(lhs, rhs, "sup_distance");
    double out = 0.0;
    auto it = rhs.begin();
    for (double v : lhs) {
        out = std::max(out, std::abs(v - *it++));
    }
    return out;
}

inline double sup_norm(const std::vector<double>& v) {
    double out = 0.0;
    for (double e : v) out = std::max(out, std::abs(e));
    return out;
}

} // namespace diatomic
