#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oracles {

LatticeWalkDp::LatticeWalkDp(double a, double h, std::vector<LatticeStep> steps)
    : a_(a), h_(h), steps_(std::move(steps)) {
    if (h_ <= 0.0 || steps_.empty()) throw std::invalid_argument("bad lattice walk spec");
    if (a_ <= 0.0) throw std::invalid_argument("start level must be positive");
    m_kill_ = static_cast<int>(std::floor(-a_ / h_));
    while (a_ + static_cast<double>(m_kill_ + 1) * h_ <= 1e-12) ++m_kill_;
    while (a_ + static_cast<double>(m_kill_) * h_ > 1e-12) --m_kill_;
    max_up_ = 0;
    for (const auto& st : steps_) max_up_ = std::max(max_up_, st.step);
    // start at offset m = 0, alive by convention at k = 0
    mass_.assign(static_cast<std::size_t>(-(m_kill_ + 1)) + 1, 0.0);
    mass_[static_cast<std::size_t>(-(m_kill_ + 1))] = 1.0;
}

void LatticeWalkDp::advance(std::size_t k) {
    if (k < k_) throw std::invalid_argument("LatticeWalkDp cannot rewind");
    while (k_ < k) {
        std::size_t next_size = mass_.size() + static_cast<std::size_t>(std::max(max_up_, 0));
        std::vector<double> next(next_size, 0.0);
        for (std::size_t i = 0; i < mass_.size(); ++i) {
            if (mass_[i] == 0.0) continue;
            int m = m_kill_ + 1 + static_cast<int>(i);
            for (const auto& st : steps_) {
                int m2 = m + st.step;
                if (m2 <= m_kill_) continue;  // killed
                std::size_t j = static_cast<std::size_t>(m2 - (m_kill_ + 1));
                if (j >= next.size()) next.resize(j + 1, 0.0);
                next[j] += mass_[i] * st.weight;
            }
        }
        mass_ = std::move(next);
        ++k_;
    }
}

double LatticeWalkDp::survival() const {
    double s = 0.0;
    for (double v : mass_) s += v;
    return s;
}

double LatticeWalkDp::expect_s() const {
    double s = 0.0;
    for (std::size_t i = 0; i < mass_.size(); ++i) {
        int m = m_kill_ + 1 + static_cast<int>(i);
        s += mass_[i] * (a_ + static_cast<double>(m) * h_);
    }
    return s;
}

double LatticeWalkDp::expect_exp_neg_s() const {
    double s = 0.0;
    for (std::size_t i = 0; i < mass_.size(); ++i) {
        int m = m_kill_ + 1 + static_cast<int>(i);
        s += mass_[i] * std::exp(-(a_ + static_cast<double>(m) * h_));
    }
    return s;
}

double LatticeWalkDp::cell(double lo, double hi) const {
    double s = 0.0;
    for (std::size_t i = 0; i < mass_.size(); ++i) {
        double v = a_ + static_cast<double>(m_kill_ + 1 + static_cast<int>(i)) * h_;
        if (v >= lo && v < hi) s += mass_[i];
    }
    return s;
}

double LatticeWalkDp::conditional_cdf(double t) const {
    double total = survival();
    if (total <= 0.0) throw std::runtime_error("conditioning on a null event");
    double s = 0.0;
    for (std::size_t i = 0; i < mass_.size(); ++i) {
        double v = a_ + static_cast<double>(m_kill_ + 1 + static_cast<int>(i)) * h_;
        if (v <= t) s += mass_[i];
    }
    return s / total;
}

double LatticeWalkDp::conditional_quantile(double q) const {
    double total = survival();
    if (total <= 0.0) throw std::runtime_error("conditioning on a null event");
    double acc = 0.0;
    for (std::size_t i = 0; i < mass_.size(); ++i) {
        acc += mass_[i];
        if (acc / total >= q) {
            return a_ + static_cast<double>(m_kill_ + 1 + static_cast<int>(i)) * h_;
        }
    }
    return a_ + static_cast<double>(m_kill_ + static_cast<int>(mass_.size())) * h_;
}

std::vector<std::pair<double, double>> LatticeWalkDp::alive() const {
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < mass_.size(); ++i) {
        if (mass_[i] == 0.0) continue;
        out.emplace_back(a_ + static_cast<double>(m_kill_ + 1 + static_cast<int>(i)) * h_, mass_[i]);
    }
    return out;
}

double enumerate_sequences(std::span<const double> weights, std::size_t n,
                           const std::function<double(std::span<const std::uint32_t>)>& fn) {
    std::vector<std::uint32_t> seq(n, 0);
    double total = 0.0;
    std::function<void(std::size_t, double)> rec = [&](std::size_t pos, double w) {
        if (pos == n) {
            total += w * fn(seq);
            return;
        }
        for (std::uint32_t a = 0; a < weights.size(); ++a) {
            seq[pos] = a;
            rec(pos + 1, w * weights[a]);
        }
    };
    rec(0, 1.0);
    return total;
}

}  // namespace oracles
