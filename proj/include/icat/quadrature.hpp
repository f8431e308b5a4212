#pragma once

#include <map>
#include <mutex>
#include <vector>

#include <boost/math/special_functions/legendre.hpp>

#include "icat/errors.hpp"

namespace icat {

// Gauss-Legendre rule on [-1, 1], nodes ascending.
struct GaussLegendreRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    [[nodiscard]] std::size_t size() const { return nodes.size(); }
};

[[nodiscard]] inline GaussLegendreRule make_gauss_legendre(int order) {
    if (order < 1) throw ValidationError("quadrature order must be >= 1");
    // Non-negative roots of P_n, ascending.
    const std::vector<double> positive = boost::math::legendre_p_zeros<double>(order);
    GaussLegendreRule rule;
    rule.nodes.reserve(static_cast<std::size_t>(order));
    rule.weights.reserve(static_cast<std::size_t>(order));
    auto weight = [order](double x) {
        const double dp = boost::math::legendre_p_prime<double>(order, x);
        return 2.0 / ((1.0 - x * x) * dp * dp);
    };
    for (auto it = positive.rbegin(); it != positive.rend(); ++it) {
        if (*it == 0.0) continue;
        rule.nodes.push_back(-*it);
        rule.weights.push_back(weight(*it));
    }
    if (order % 2 == 1) {
        rule.nodes.push_back(0.0);
        rule.weights.push_back(weight(0.0));
    }
    for (double x : positive) {
        if (x == 0.0) continue;
        rule.nodes.push_back(x);
        rule.weights.push_back(weight(x));
    }
    return rule;
}

// Rules are immutable once built; shared across threads.
[[nodiscard]] inline const GaussLegendreRule& gauss_legendre(int order) {
    static std::mutex mutex;
    static std::map<int, GaussLegendreRule> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, make_gauss_legendre(order)).first;
    return it->second;
}

}  // namespace icat
