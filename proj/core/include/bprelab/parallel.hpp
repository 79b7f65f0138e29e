#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

namespace bprelab {

// Runs body(r) for r in [0, n). Each worker handles a strided subset and
// writes only to replica-indexed slots, so any reduction done afterwards in
// index order is independent of the worker count.
template <typename Body>
void parallel_replicas(std::uint64_t n, unsigned workers, Body&& body) {
    if (workers <= 1 || n < 2) {
        for (std::uint64_t r = 0; r < n; ++r) body(r);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) {
        pool.emplace_back([t, n, workers, &body] {
            for (std::uint64_t r = t; r < n; r += workers) body(r);
        });
    }
    for (auto& th : pool) th.join();
}

// Pairwise (cascade) sum in index order: deterministic and far more
// accurate than left-to-right accumulation on long replica vectors.
inline double pairwise_sum(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::uint64_t n = 0;
};

// Mean with the usual sqrt(sample variance / n) standard error, both built
// from pairwise sums so the result is reduction-order stable.
inline MeanStderr mean_and_stderr(std::span<const double> v) {
    MeanStderr out;
    out.n = v.size();
    if (v.empty()) return out;
    out.mean = pairwise_sum(v) / static_cast<double>(v.size());
    if (v.size() < 2) return out;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = v[i] - out.mean;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / static_cast<double>(v.size() - 1);
    out.stderr_ = var > 0 ? std::sqrt(var / static_cast<double>(v.size())) : 0.0;
    return out;
}

// Streams replica contributions (n_terms values per replica) through
// fixed-size blocks. Within a block every replica writes its own row, blocks
// are reduced pairwise in replica order, so means and standard errors are
// byte-identical for any worker count without holding all N rows in memory.
// fill(r, out) must write exactly n_terms doubles.
template <typename Fill>
std::vector<MeanStderr> accumulate_replicas(std::uint64_t n, unsigned workers,
                                            std::size_t n_terms, Fill&& fill,
                                            std::size_t block_rows = 8192) {
    std::vector<std::vector<double>> block_sums(n_terms), block_sumsq(n_terms);
    std::vector<double> buf;
    std::vector<double> col, colsq;
    for (std::uint64_t b0 = 0; b0 < n; b0 += block_rows) {
        const std::size_t rows = static_cast<std::size_t>(std::min<std::uint64_t>(block_rows, n - b0));
        buf.assign(rows * n_terms, 0.0);
        parallel_replicas(rows, workers, [&](std::uint64_t i) {
            fill(b0 + i, std::span<double>(buf.data() + i * n_terms, n_terms));
        });
        col.resize(rows);
        colsq.resize(rows);
        for (std::size_t t = 0; t < n_terms; ++t) {
            for (std::size_t i = 0; i < rows; ++i) {
                const double v = buf[i * n_terms + t];
                col[i] = v;
                colsq[i] = v * v;
            }
            block_sums[t].push_back(pairwise_sum(col));
            block_sumsq[t].push_back(pairwise_sum(colsq));
        }
    }
    std::vector<MeanStderr> out(n_terms);
    for (std::size_t t = 0; t < n_terms; ++t) {
        MeanStderr ms;
        ms.n = n;
        if (n > 0) {
            const double s1 = pairwise_sum(block_sums[t]);
            const double s2 = pairwise_sum(block_sumsq[t]);
            const double nd = static_cast<double>(n);
            ms.mean = s1 / nd;
            if (n > 1) {
                const double var = std::max(0.0, (s2 - nd * ms.mean * ms.mean) / (nd - 1.0));
                ms.stderr_ = std::sqrt(var / nd);
            }
        }
        out[t] = ms;
    }
    return out;
}

// Full n x n_terms sample matrix in replica order; fill(r, row) writes one
// replica's row (NaN marks a rejected entry). Deterministic for any worker
// count because slots are indexed by replica.
template <typename Fill>
std::vector<double> collect_rows(std::uint64_t n, unsigned workers, std::size_t n_terms,
                                 Fill&& fill) {
    std::vector<double> rows(n * n_terms);
    parallel_replicas(n, workers, [&](std::uint64_t r) {
        fill(r, std::span<double>(rows.data() + r * n_terms, n_terms));
    });
    return rows;
}

// Collects optional per-replica samples in replica order (deterministic for
// any worker count). fill(r) returns NaN for a rejected replica.
template <typename Fill>
std::vector<double> collect_accepted(std::uint64_t n, unsigned workers, Fill&& fill) {
    std::vector<double> slots(n);
    parallel_replicas(n, workers, [&](std::uint64_t r) { slots[r] = fill(r); });
    std::vector<double> out;
    out.reserve(n / 4);
    for (double v : slots)
        if (!std::isnan(v)) out.push_back(v);
    return out;
}

}  // namespace bprelab
