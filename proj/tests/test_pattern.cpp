#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <set>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "ripple/pattern.hpp"

using namespace ripple::pattern;

namespace {

// independent enumeration oracle: evaluate the mask predicate over all pairs
std::uint64_t brute_nnz(const PatternSpec& spec, int L) {
    std::uint64_t n = 0;
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j) n += mask_entry(spec, i, j) ? 1 : 0;
    return n;
}

std::set<int> row_columns(const BoolMask& m, int row) {
    std::set<int> cols;
    for (int j = 0; j < m.L; ++j)
        if (m.at(row, j)) cols.insert(j);
    return cols;
}

}  // namespace

TEST_CASE("ripple L=12 w=4 d=3: row 0 attends to {0,1,2,5,8,11}") {
    const BoolMask m = build_mask(PatternSpec::ripple(4, 3), 12);
    CHECK(row_columns(m, 0) == std::set<int>{0, 1, 2, 5, 8, 11});
    // mirrored row by symmetry
    CHECK(row_columns(m, 11) == std::set<int>{0, 3, 6, 9, 10, 11});
}

TEST_CASE("band covering the whole sequence equals full") {
    const BoolMask full = build_mask(PatternSpec::full(), 12);
    const BoolMask wide = build_mask(PatternSpec::band(22), 12);
    CHECK(full.m == wide.m);
}

TEST_CASE("blockwise 100/50 is two dense 50x50 blocks") {
    const BoolMask m = build_mask(PatternSpec::blockwise(50), 100);
    CHECK(m.popcount() == 2ull * 50 * 50);
    CHECK(m.at(0, 49));
    CHECK_FALSE(m.at(0, 50));
    CHECK(m.at(99, 50));
    CHECK_FALSE(m.at(49, 50));
}

TEST_CASE("closed-form nnz matches enumeration exhaustively, L in [1, 300]") {
    const std::vector<PatternSpec> specs = {
        PatternSpec::ripple(4, 3), PatternSpec::band(4), PatternSpec::blockwise(50),
        PatternSpec::ripple(12, 24), PatternSpec::ripple(0, 5), PatternSpec::band(0),
        PatternSpec::full(),
    };
    for (const PatternSpec& spec : specs)
        for (int L = 1; L <= 300; ++L) REQUIRE(nnz(spec, L) == brute_nnz(spec, L));
}

TEST_CASE("pinned counts at L=12") {
    CHECK(nnz(PatternSpec::full(), 12) == 144);
    CHECK(nnz(PatternSpec::band(4), 12) == 54);
    // enumeration of the symmetric predicate (the build_mask contract)
    CHECK(nnz(PatternSpec::ripple(4, 3), 12) == 78);
    CHECK(nnz(PatternSpec::ripple(4, 3), 12) == brute_nnz(PatternSpec::ripple(4, 3), 12));
    CHECK(nnz(PatternSpec::ripple(4, 3), 12) ==
          build_mask(PatternSpec::ripple(4, 3), 12).popcount());
}

TEST_CASE("packed mask agrees with the boolean mask") {
    const std::vector<PatternSpec> specs = {PatternSpec::full(), PatternSpec::band(6),
                                            PatternSpec::ripple(4, 3), PatternSpec::ripple(12, 24),
                                            PatternSpec::blockwise(7)};
    for (const PatternSpec& spec : specs) {
        for (int L : {1, 2, 7, 12, 50, 130}) {
            const BoolMask bm = build_mask(spec, L);
            const PackedMask pm = pack_mask(spec, L);
            REQUIRE(pm.nnz() == bm.popcount());
            for (int i = 0; i < L; ++i) {
                int prev = -1;
                for (std::size_t idx = pm.row_begin(i); idx < pm.row_end(i); ++idx) {
                    const int j = pm.cols[idx];
                    REQUIRE(j > prev);  // strictly ascending
                    REQUIRE(bm.at(i, j));
                    prev = j;
                }
                std::size_t degree = 0;
                for (int j = 0; j < L; ++j) degree += bm.at(i, j) ? 1 : 0;
                REQUIRE(pm.row_end(i) - pm.row_begin(i) == degree);
            }
        }
    }
}

TEST_CASE("masks are symmetric with an all-true diagonal and nonempty rows") {
    const std::vector<PatternSpec> specs = {PatternSpec::full(), PatternSpec::band(0),
                                            PatternSpec::band(8), PatternSpec::ripple(0, 4),
                                            PatternSpec::ripple(6, 5), PatternSpec::blockwise(3)};
    for (const PatternSpec& spec : specs) {
        for (int L : {1, 2, 9, 40}) {
            const BoolMask m = build_mask(spec, L);
            for (int i = 0; i < L; ++i) {
                CHECK(m.at(i, i));
                for (int j = 0; j < i; ++j) CHECK(m.at(i, j) == m.at(j, i));
            }
        }
    }
}

TEST_CASE("band is contained in ripple is contained in full") {
    for (int L : {5, 12, 64}) {
        const BoolMask band = build_mask(PatternSpec::band(4), L);
        const BoolMask rip = build_mask(PatternSpec::ripple(4, 3), L);
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < L; ++j)
                if (band.at(i, j)) CHECK(rip.at(i, j));
    }
}

TEST_CASE("ripple row degree is bounded by (w+1) + 2*ceil(L/d)") {
    for (int L : {1, 13, 100, 300}) {
        for (int w : {0, 4, 12}) {
            for (int d : {3, 16, 24, 50}) {
                const BoolMask m = build_mask(PatternSpec::ripple(w, d), L);
                const int bound = (w + 1) + 2 * ((L + d - 1) / d);
                for (int i = 0; i < L; ++i) {
                    int deg = 0;
                    for (int j = 0; j < L; ++j) deg += m.at(i, j) ? 1 : 0;
                    CHECK(deg <= bound);
                }
            }
        }
    }
}

TEST_CASE("invalid specs are rejected") {
    CHECK_THROWS_AS(build_mask(PatternSpec::ripple(5, 3), 10), std::invalid_argument);  // odd w
    CHECK_THROWS_AS(build_mask(PatternSpec::ripple(4, 0), 10), std::invalid_argument);  // d < 1
    CHECK_THROWS_AS(build_mask(PatternSpec::band(-2), 10), std::invalid_argument);
    CHECK_THROWS_AS(build_mask(PatternSpec::blockwise(0), 10), std::invalid_argument);
    CHECK_THROWS_AS(build_mask(PatternSpec::full(), 0), std::invalid_argument);  // L < 1
}

TEST_CASE("layer schedule: band lower layers only for ripple requests") {
    const PatternSpec rip = PatternSpec::ripple(12, 24);
    const auto layers = layer_schedule(4, rip);
    REQUIRE(layers.size() == 4);
    CHECK(layers[0] == PatternSpec::band(12));
    CHECK(layers[1] == PatternSpec::band(12));
    CHECK(layers[2] == rip);
    CHECK(layers[3] == rip);

    const auto full_layers = layer_schedule(4, PatternSpec::full());
    for (const auto& s : full_layers) CHECK(s == PatternSpec::full());

    const auto single = layer_schedule(1, rip);
    REQUIRE(single.size() == 1);
    CHECK(single[0] == rip);  // floor(1/2) = 0 band layers

    const auto five = layer_schedule(5, rip);
    CHECK(five[0] == PatternSpec::band(12));
    CHECK(five[1] == PatternSpec::band(12));
    CHECK(five[2] == rip);
}

TEST_CASE("pbm dump format") {
    const BoolMask m = build_mask(PatternSpec::ripple(4, 3), 12);
    std::ostringstream os;
    write_pbm(m, os);
    const std::string text = os.str();
    CHECK(text.rfind("P1\n12 12\n", 0) == 0);
    CHECK(text.find("111001001001\n") != std::string::npos);  // row 0
    // a full mask dump of the same size has the same header but all ones
    std::ostringstream full;
    write_pbm(build_mask(PatternSpec::full(), 3), full);
    CHECK(full.str() == "P1\n3 3\n111\n111\n111\n");
}

TEST_CASE("row degree csv") {
    std::ostringstream os;
    write_row_degrees_csv(build_mask(PatternSpec::band(2), 3), os);
    CHECK(os.str() == "row,degree\n0,2\n1,3\n2,2\n");
}
