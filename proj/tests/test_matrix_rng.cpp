#include "ckan/errors.hpp"
#include "ckan/matrix.hpp"
#include "ckan/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace ckan;

TEST_CASE("matmul matches a hand-computed product") {
    Matrix a(2, 3);
    a(0, 0) = 1; a(0, 1) = 2; a(0, 2) = 3;
    a(1, 0) = 4; a(1, 1) = 5; a(1, 2) = 6;
    Matrix b(3, 2);
    b(0, 0) = 7; b(0, 1) = 8;
    b(1, 0) = 9; b(1, 1) = 10;
    b(2, 0) = 11; b(2, 1) = 12;
    Matrix c = matmul(a, b);
    CHECK(c.rows == 2);
    CHECK(c.cols == 2);
    CHECK(c(0, 0) == doctest::Approx(58).epsilon(1e-15));
    CHECK(c(0, 1) == doctest::Approx(64).epsilon(1e-15));
    CHECK(c(1, 0) == doctest::Approx(139).epsilon(1e-15));
    CHECK(c(1, 1) == doctest::Approx(154).epsilon(1e-15));
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Matrix a(2, 3), b(2, 2);
    try {
        matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2x3") != std::string::npos);
        CHECK(msg.find("2x2") != std::string::npos);
    }
}

TEST_CASE("transpose round trip and take_rows") {
    RngStream rng(3);
    Matrix a(4, 3);
    for (auto& v : a.data) v = rng.next_normal();
    Matrix t = transpose(a);
    CHECK(t.rows == 3);
    CHECK(t.cols == 4);
    Matrix tt = transpose(t);
    CHECK(tt.data == a.data);

    Matrix sub = take_rows(a, {2, 0});
    CHECK(sub.rows == 2);
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(sub(0, c) == a(2, c));
        CHECK(sub(1, c) == a(0, c));
    }
}

TEST_CASE("check_finite flags NaN and Inf") {
    Matrix a(2, 2, 1.0);
    CHECK_NOTHROW(a.check_finite("a"));
    a(1, 1) = std::nan("");
    CHECK_THROWS_AS(a.check_finite("a"), StateError);
    a(1, 1) = 1.0 / 0.0;
    CHECK_THROWS_AS(a.check_finite("a"), StateError);
}

TEST_CASE("rng streams are deterministic per seed and differ across seeds") {
    RngStream a(123), b(123), c(124);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
        const std::uint64_t va = a.next_u64();
        if (va != b.next_u64()) all_equal = false;
        if (va != c.next_u64()) any_diff = true;
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("next_double lies in [0,1) and next_below respects its bound") {
    RngStream rng(9);
    for (int i = 0; i < 10000; ++i) {
        const double d = rng.next_double();
        CHECK(d >= 0.0);
        CHECK(d < 1.0);
    }
    for (int i = 0; i < 10000; ++i) CHECK(rng.next_below(7) < 7);
    CHECK_THROWS_AS(rng.next_below(0), ArgumentError);
}

TEST_CASE("next_normal moments are close to standard normal") {
    // [DERIVED] mean se = 1/sqrt(n) ~ 0.0032; 5 sigma bounds.
    RngStream rng(77);
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.next_normal();
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sumsq / n - mean * mean);
    CHECK(std::fabs(mean) < 0.016);
    CHECK(std::fabs(sd - 1.0) < 0.016);
}

TEST_CASE("shuffle is a permutation and sample_without_replacement is distinct") {
    RngStream rng(5);
    std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    auto sorted = v;
    rng.shuffle(v);
    auto resorted = v;
    std::sort(resorted.begin(), resorted.end());
    CHECK(resorted == sorted);

    const auto sample = rng.sample_without_replacement(50, 20);
    CHECK(sample.size() == 20);
    std::set<std::size_t> uniq(sample.begin(), sample.end());
    CHECK(uniq.size() == 20);
    for (std::size_t s : sample) CHECK(s < 50);

    CHECK_THROWS_AS(rng.sample_without_replacement(3, 4), ArgumentError);
}
