#pragma once

#include <cstddef>
#include <vector>

namespace t2p {

/// The k pattern kernels of length m, in index order.
struct PatternSet {
    std::size_t pattern_length = 0;
    std::vector<std::vector<double>> patterns;

    std::size_t size() const noexcept { return patterns.size(); }
};

struct WindowAssignment {
    std::size_t window_index = 0;
    std::size_t start = 0;
    std::size_t pattern_id = 0;
    double score = 0.0;               // in [0, 1]; 1 is an exact match
    double reconstruction_mse = 0.0;  // window vs. its assigned pattern
};

/// Per-window pattern assignment of a series cut into non-overlapping windows.
struct Summary {
    std::size_t series_length = 0;
    std::size_t window_length = 0;
    std::size_t n_patterns = 0;
    std::size_t remainder = 0;  // trailing samples that did not fill a window
    std::vector<WindowAssignment> windows;

    std::size_t size() const noexcept { return windows.size(); }
};

}  // namespace t2p
