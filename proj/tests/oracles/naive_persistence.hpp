#pragma once

// Textbook persistence: build the full cubical boundary matrix from the
// pixels, sort cells by (value, dimension, index) and run the plain
// left-to-right column reduction with no clearing or twist.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "topotex/cubical.hpp"

namespace oracle {

inline std::vector<topotex::PersistenceInterval> naive_persistence(const topotex::Grid<double>& px) {
    const std::size_t S = px.rows(), n = 2 * S + 1, N = n * n;
    std::vector<double> val(N, std::numeric_limits<double>::infinity());
    std::vector<int> dim(N);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            dim[r * n + c] = static_cast<int>(r % 2 + c % 2);
            // incident squares have odd coordinates within one step
            for (long dr = -1; dr <= 1; ++dr)
                for (long dc = -1; dc <= 1; ++dc) {
                    const long rr = static_cast<long>(r) + dr, cc = static_cast<long>(c) + dc;
                    if (rr < 0 || cc < 0 || rr >= static_cast<long>(n) || cc >= static_cast<long>(n)) continue;
                    if (rr % 2 == 0 || cc % 2 == 0) continue;
                    if (std::abs(dr) > static_cast<long>(r % 2 == 0) || std::abs(dc) > static_cast<long>(c % 2 == 0))
                        continue;
                    val[r * n + c] = std::min(val[r * n + c], px(static_cast<std::size_t>(rr / 2),
                                                                 static_cast<std::size_t>(cc / 2)));
                }
        }
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (val[a] != val[b]) return val[a] < val[b];
        if (dim[a] != dim[b]) return dim[a] < dim[b];
        return a < b;
    });
    std::vector<std::size_t> pos(N);
    for (std::size_t i = 0; i < N; ++i) pos[order[i]] = i;

    std::vector<std::vector<char>> col(N, std::vector<char>(N, 0));
    for (std::size_t k = 0; k < N; ++k) {
        const std::size_t cell = order[k], r = cell / n, c = cell % n;
        if (r % 2) {
            col[k][pos[(r - 1) * n + c]] ^= 1;
            col[k][pos[(r + 1) * n + c]] ^= 1;
        }
        if (c % 2) {
            col[k][pos[r * n + c - 1]] ^= 1;
            col[k][pos[r * n + c + 1]] ^= 1;
        }
    }
    auto low = [&](std::size_t k) -> long {
        for (std::size_t i = N; i-- > 0;)
            if (col[k][i]) return static_cast<long>(i);
        return -1;
    };
    std::vector<long> owner(N, -1);  // low index -> reduced column
    std::vector<char> paired(N, 0);
    std::vector<topotex::PersistenceInterval> out;
    for (std::size_t k = 0; k < N; ++k) {
        long l = low(k);
        while (l >= 0 && owner[static_cast<std::size_t>(l)] >= 0) {
            const auto& other = col[static_cast<std::size_t>(owner[static_cast<std::size_t>(l)])];
            for (std::size_t i = 0; i < N; ++i) col[k][i] ^= other[i];
            l = low(k);
        }
        if (l < 0) continue;
        owner[static_cast<std::size_t>(l)] = static_cast<long>(k);
        paired[static_cast<std::size_t>(l)] = paired[k] = 1;
        const std::size_t b = order[static_cast<std::size_t>(l)], d = order[k];
        if (val[b] != val[d]) out.push_back({val[b], val[d], dim[b]});
    }
    for (std::size_t k = 0; k < N; ++k)
        if (!paired[k]) out.push_back({val[order[k]], std::numeric_limits<double>::infinity(), dim[order[k]]});
    return topotex::sorted_intervals(out);
}

}  // namespace oracle
