#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "t2p/eval.hpp"

using namespace t2p;

namespace {

Summary make_summary(const std::vector<std::size_t>& ids, std::size_t m = 100) {
    Summary s;
    s.window_length = m;
    s.series_length = ids.size() * m;
    s.n_patterns = ids.empty() ? 0 : *std::max_element(ids.begin(), ids.end()) + 1;
    for (std::size_t w = 0; w < ids.size(); ++w) s.windows.push_back({w, w * m, ids[w], 1.0, 0.0});
    return s;
}

DlReference labeled(std::vector<int> labels) {
    DlReference r;
    r.window_labels = std::move(labels);
    return r;
}

}  // namespace

TEST(Matching, IdentityWhenAssignmentsEqualLabels) {
    const auto m = match_patterns(make_summary({0, 1, 2, 3, 0, 1}), std::vector<int>{0, 1, 2, 3, 0, 1});
    for (int i = 0; i < 4; ++i) EXPECT_EQ(m.truth_of(i), i);
}

TEST(Matching, BlocksMapToBlocks) {
    const auto m = match_patterns(make_summary({7, 7, 7, 7, 7, 2, 2, 2, 2, 2}), std::vector<int>{0, 0, 0, 0, 0, 1, 1, 1, 1, 1});
    EXPECT_EQ(m.truth_of(7), 0);
    EXPECT_EQ(m.truth_of(2), 1);
}

TEST(Matching, GreedyPicksLargestOverlapFirst) {
    // A covers windows {1,2,3,6}, B covers {4,5}; X = {1..3}, Y = {4..6}.
    const std::vector<std::size_t> ids{0, 0, 0, 1, 1, 0};
    const std::vector<int> labels{0, 0, 0, 1, 1, 1};
    const auto m = match_patterns(make_summary(ids), labels);
    EXPECT_EQ(m.truth_of(0), 0);
    EXPECT_EQ(m.truth_of(1), 1);
    std::size_t total = 0;
    for (std::size_t w = 0; w < ids.size(); ++w) total += m.truth_of(ids[w]) == labels[w];
    EXPECT_EQ(total, oracle::best_total_overlap(ids, labels));
}

TEST(Matching, AgreesWithExhaustiveSearchOnBlockStructuredCases) {
    // Every learned id dominates one label block, so greedy is optimal.
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<int> labels;
        std::vector<std::size_t> ids;
        std::vector<std::size_t> perm{0, 1, 2, 3};
        std::shuffle(perm.begin(), perm.end(), rng);
        for (int t = 0; t < 4; ++t)
            for (int i = 0; i < 6; ++i) {
                labels.push_back(t);
                ids.push_back(i == 0 && rng() % 2 ? perm[(t + 1) % 4] : perm[t]);
            }
        const auto m = match_patterns(make_summary(ids), labels);
        std::size_t total = 0;
        for (std::size_t w = 0; w < ids.size(); ++w) total += m.truth_of(ids[w]) == labels[w];
        EXPECT_EQ(total, oracle::best_total_overlap(ids, labels));
    }
}

TEST(Matching, LabelCountMustMatchWindows) {
    EXPECT_THROW(match_patterns(make_summary({0, 1}), std::vector<int>{0}), InputError);
}

TEST(PrecisionRecall, PerfectAssignment) {
    const auto pr = precision_recall(make_summary({0, 1, 2, 3}), std::vector<int>{0, 1, 2, 3});
    EXPECT_EQ(pr.precision, 1.0);
    EXPECT_EQ(pr.recall, 1.0);
}

TEST(PrecisionRecall, ThreeOfFourPatternsFound) {
    // Fourth pattern's windows are absorbed by pattern 0.
    const std::vector<std::size_t> ids{0, 1, 2, 0, 0, 1, 2, 0};
    const std::vector<int> labels{0, 1, 2, 3, 0, 1, 2, 3};
    const auto pr = precision_recall(make_summary(ids), labels);
    EXPECT_EQ(pr.recall, 0.75);
    EXPECT_EQ(pr.precision, 0.75);
}

TEST(PrecisionRecall, CountsCorrectWindows) {
    const std::vector<std::size_t> ids{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
    const std::vector<int> labels{0, 0, 0, 0, 1, 1, 1, 1, 0, 0};
    EXPECT_DOUBLE_EQ(precision_recall(make_summary(ids), labels).precision, 0.7);
}

TEST(PrecisionRecall, InvariantUnderLabelPermutation) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::size_t> ids;
        std::vector<int> labels;
        for (int t = 0; t < 4; ++t)
            for (int i = 0; i < 5; ++i) {
                labels.push_back(t);
                ids.push_back(i < 3 ? static_cast<std::size_t>(t) : rng() % 5);
            }
        std::vector<int> perm{10, 20, 30, 40};
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<int> relabeled(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) relabeled[i] = perm[static_cast<std::size_t>(labels[i])];
        const auto a = precision_recall(make_summary(ids), labels);
        const auto b = precision_recall(make_summary(ids), relabeled);
        EXPECT_EQ(a.recall, b.recall);
        EXPECT_EQ(a.precision, b.precision);
    }
}

TEST(DescriptionLengths, WorkedExample) {
    // Length-1000 series, two length-100 patterns, ten occurrences, all correct.
    const std::vector<std::size_t> ids{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
    const std::vector<int> labels{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
    const auto dl = description_lengths(1000, make_summary(ids), labeled(labels));
    EXPECT_EQ(dl.dl_T, 1000.0);
    EXPECT_EQ(dl.dl_P, 200.0);
    EXPECT_EQ(dl.dl_T_given_P, 10.0);
    EXPECT_EQ(dl.dl_penalty, 0.0);
    EXPECT_EQ(compression(dl), 1000.0 / 210.0);
    EXPECT_NEAR(compression(dl), 4.7619, 5e-5);
}

TEST(DescriptionLengths, NothingCorrect) {
    Summary s = make_summary({0, 0, 0, 0});
    for (auto& w : s.windows) w.reconstruction_mse = 5.0;
    DlReference r;
    r.mse_threshold = 1.0;
    const auto dl = description_lengths(400, s, r);
    EXPECT_EQ(dl.dl_P, 0.0);
    EXPECT_EQ(dl.dl_T_given_P, 0.0);
    EXPECT_EQ(dl.dl_penalty, 400.0);
    EXPECT_LT(compression(dl), 1.01);
}

TEST(DescriptionLengths, OneMisassignedWindow) {
    const auto dl = description_lengths(400, make_summary({0, 1, 1, 3}), labeled({0, 1, 2, 3}));
    EXPECT_EQ(dl.dl_penalty, 100.0);
    EXPECT_EQ(dl.dl_T_given_P, 3.0);
    EXPECT_EQ(dl.dl_P, 300.0);
}

TEST(DescriptionLengths, AllWrongCompressesAtMostOne) {
    // With labels every matched pattern is right somewhere, so use mixed windows.
    DlReference r = labeled({1, 1, 1, 0});
    r.mixed_windows.assign(4, true);
    const auto dl = description_lengths(400, make_summary({0, 0, 0, 0}), r);
    EXPECT_EQ(dl.dl_P, 0.0);
    EXPECT_EQ(dl.dl_penalty, 400.0);
    EXPECT_LE(compression(dl), 1.0);
}

TEST(DescriptionLengths, MixedWindowsAreNeverCorrect) {
    DlReference r = labeled({0, 1, 2, 3});
    r.mixed_windows = {false, true, false, false};
    const auto dl = description_lengths(400, make_summary({0, 1, 2, 3}), r);
    EXPECT_EQ(dl.dl_T_given_P, 3.0);
    EXPECT_EQ(dl.dl_penalty, 100.0);
}

TEST(DescriptionLengths, MseThresholdMode) {
    Summary s = make_summary({0, 1, 0, 1});
    const double mses[] = {0.1, 0.2, 0.9, 0.05};
    for (std::size_t i = 0; i < 4; ++i) s.windows[i].reconstruction_mse = mses[i];
    DlReference r;
    r.mse_threshold = 0.5;
    const auto dl = description_lengths(400, s, r);
    EXPECT_EQ(dl.dl_T_given_P, 3.0);
    EXPECT_EQ(dl.dl_penalty, 100.0);
    EXPECT_EQ(dl.dl_P, 200.0);
    EXPECT_THROW(description_lengths(400, s, DlReference{}), ConfigError);
}

TEST(DescriptionLengths, PointersPlusPenaltyCoverAllWindows) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::size_t> ids(30);
        std::vector<int> labels(30);
        for (auto& v : ids) v = rng() % 5;
        for (auto& v : labels) v = static_cast<int>(rng() % 3);
        const auto dl = description_lengths(3000, make_summary(ids), labeled(labels));
        EXPECT_EQ(dl.dl_T_given_P + dl.dl_penalty / 100.0, 30.0);
    }
}

TEST(Compression, GrowsWithRepetition) {
    double prev = 0.0;
    for (std::size_t r = 1; r <= 6; ++r) {
        std::vector<std::size_t> ids;
        std::vector<int> labels;
        for (std::size_t i = 0; i < r; ++i)
            for (int p = 0; p < 4; ++p) {
                ids.push_back(static_cast<std::size_t>(p));
                labels.push_back(p);
            }
        const auto dl = description_lengths(400 * r, make_summary(ids), labeled(labels));
        EXPECT_EQ(dl.dl_P, 400.0);
        EXPECT_EQ(dl.dl_T, 400.0 * r);
        EXPECT_EQ(dl.dl_T_given_P, 4.0 * r);
        const double c = compression(dl);
        EXPECT_GT(c, prev);
        EXPECT_LT(c, 100.0);  // bound: samples per pointer
        prev = c;
    }
}

TEST(Percentile, Interpolates) {
    EXPECT_EQ(percentile({1, 2, 3, 4, 5}, 50), 3.0);
    EXPECT_EQ(percentile({1, 2, 3, 4}, 50), 2.5);
    EXPECT_DOUBLE_EQ(percentile({0, 10}, 95), 9.5);
    EXPECT_THROW(percentile({}, 50), ContractError);
}

TEST(Hoyer, MeasureOnKnownVectors) {
    EXPECT_DOUBLE_EQ(hoyer_measure(std::vector<double>{0, 0, 1, 0}), 1.0);
    EXPECT_DOUBLE_EQ(hoyer_measure(std::vector<double>{2, 2, 2, 2}), 0.0);
    EXPECT_NEAR(hoyer_measure(std::vector<double>{3, 1, 0, 0}), 2.0 - 4.0 / std::sqrt(10.0), 1e-12);
    EXPECT_NEAR(hoyer_measure(std::vector<double>{3, 1, 0, 0}), 0.735, 5e-4);
}

TEST(Hoyer, SparsityExtremes) {
    const std::vector<std::vector<double>> onehot{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}, {1, 0, 0, 0}};
    EXPECT_NEAR(hoyer_sparsity(onehot), 1.0, 1e-9);
    const std::vector<std::vector<double>> dense{{0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}};
    EXPECT_EQ(hoyer_sparsity(dense), 0.0);
    EXPECT_THROW(hoyer_sparsity(std::vector<std::vector<double>>{{1, 0}}), ContractError);
}

TEST(Hoyer, PermutationInvariant) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> rows(12, std::vector<double>(5));
    for (auto& r : rows)
        for (auto& v : r) v = u(rng);
    const double base = hoyer_sparsity(rows);
    auto shuffled = rows;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_NEAR(hoyer_sparsity(shuffled), base, 1e-12);
    std::vector<std::size_t> perm{4, 2, 0, 3, 1};
    auto cols = rows;
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t c = 0; c < 5; ++c) cols[i][c] = rows[i][perm[c]];
    EXPECT_NEAR(hoyer_sparsity(cols), base, 1e-12);
}

TEST(MeanStd, PopulationMoments) {
    const auto ms = mean_std({2, 4, 4, 4, 5, 5, 7, 9});
    EXPECT_EQ(ms.mean, 5.0);
    EXPECT_EQ(ms.stddev, 2.0);
    EXPECT_EQ(median({3, 1, 2}), 2.0);
}

TEST(EvalCsv, EmptyFieldsForUnlabeledRuns) {
    std::ostringstream out;
    write_eval_csv_header(out);
    EvalReport r;
    r.dataset = "x";
    r.seed = 3;
    r.compression = 2.5;
    write_eval_csv_row(out, r);
    r.precision = 1.0;
    r.recall = 0.75;
    write_eval_csv_row(out, r);
    EXPECT_EQ(out.str(), "dataset,seed,compression,precision,recall\nx,3,2.5,,\nx,3,2.5,1,0.75\n");
}

TEST(Bench, RecordsEveryRepeatAndTheMedian) {
    const std::vector<std::size_t> sizes{10, 20, 40};
    std::vector<std::size_t> seen;
    const auto rows = bench_runtime([](std::size_t n) { return std::vector<double>(n, 1.0); }, sizes,
                                    [&](const std::vector<double>& d) { seen.push_back(d.size()); }, 3);
    ASSERT_EQ(rows.size(), 3u);
    for (const auto& r : rows) {
        ASSERT_EQ(r.seconds.size(), 3u);
        EXPECT_EQ(r.median_seconds, median(r.seconds));
    }
    EXPECT_EQ(seen, (std::vector<std::size_t>{10, 10, 10, 20, 20, 20, 40, 40, 40}));
    const auto one = bench_runtime([](std::size_t n) { return n; }, sizes, [](std::size_t) {}, 1);
    EXPECT_EQ(one[0].median_seconds, one[0].seconds[0]);
    EXPECT_THROW(bench_runtime([](std::size_t n) { return n; }, sizes, [](std::size_t) {}, 0), ContractError);
    std::ostringstream csv;
    write_bench_csv(csv, rows);
    EXPECT_EQ(csv.str().substr(0, 26), "size,median_seconds,runs\n1");
}
