#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "conclab/rng.hpp"
#include "conclab/spaces.hpp"

using namespace conclab;

TEST_CASE("state counts of the three space kinds") {
    CHECK(Space::spins(3).size() == 8);
    CHECK(Space::slice(4, 2).size() == 6);
    CHECK(Space::perms(4).size() == 24);
    CHECK(Space::slice(5, 0).size() == 1);
    CHECK(Space::slice(5, 5).size() == 1);
}

TEST_CASE("codec round-trips over every enumerated state") {
    std::vector<Space> spaces = {Space::spins(1), Space::spins(5), Space::slice(1, 1), Space::slice(6, 2),
                                 Space::slice(6, 3), Space::perms(1), Space::perms(4), Space::perms(5)};
    for (const Space& sp : spaces) {
        std::set<std::vector<int>> seen;
        for (std::size_t idx = 0; idx < sp.size(); ++idx) {
            std::vector<int> v = sp.decode(idx);
            CHECK(sp.encode(v) == idx);
            seen.insert(v);
        }
        CHECK(seen.size() == sp.size());
    }
}

TEST_CASE("site values lie in the advertised ranges") {
    Space sp = Space::spins(4);
    for (std::size_t idx = 0; idx < sp.size(); ++idx)
        for (int v : sp.decode(idx)) CHECK((v == 1 || v == -1));
    Space sl = Space::slice(5, 2);
    for (std::size_t idx = 0; idx < sl.size(); ++idx) {
        int count = 0;
        for (int v : sl.decode(idx)) {
            CHECK((v == 0 || v == 1));
            count += v;
        }
        CHECK(count == 2);
    }
    Space pm = Space::perms(4);
    for (std::size_t idx = 0; idx < pm.size(); ++idx) {
        std::vector<int> v = pm.decode(idx);
        std::set<int> vals(v.begin(), v.end());
        CHECK(vals.size() == 4);
        CHECK(*vals.begin() == 1);
        CHECK(*vals.rbegin() == 4);
    }
}

TEST_CASE("limit errors name the limit") {
    CHECK_THROWS_AS(Space::spins(25), limit_error);
    CHECK_THROWS_AS(Space::perms(10), limit_error);
    CHECK_THROWS_WITH_AS(Space::spins(25), doctest::Contains("24"), limit_error);
    CHECK_THROWS_WITH_AS(Space::perms(10), doctest::Contains("9"), limit_error);
    CHECK_THROWS_AS(Space::slice(33, 2), limit_error);
    CHECK_THROWS_AS(Space::slice(4, 5), error);
    CHECK_NOTHROW(Space::spins(26, 26));
}

TEST_CASE("measure validation") {
    Space sp = Space::spins(2);
    CHECK_THROWS_AS(TabulatedMeasure(sp, {0.5, 0.5}), error);              // wrong length
    CHECK_THROWS_AS(TabulatedMeasure(sp, {0.5, 0.5, 0.5, -0.5}), error);   // negative entry
    CHECK_THROWS_AS(TabulatedMeasure(sp, {0.5, 0.5, 0.1, 0.1}), error);    // sums to 1.2
    CHECK_NOTHROW(TabulatedMeasure(sp, {0.25, 0.25, 0.25, 0.25}));
}

TEST_CASE("from_log_weights normalizes stably under extreme weights") {
    Space sp = Space::spins(2);
    auto [mu, log_z] = TabulatedMeasure::from_log_weights(sp, {1000.0, 1000.0, 999.0, 998.0});
    double s = 0.0;
    for (std::size_t x = 0; x < mu.size(); ++x) s += mu.prob(x);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(mu.prob(0) == doctest::Approx(mu.prob(1)).epsilon(1e-14));
    CHECK(log_z > 1000.0);
    // log domain stays exact even where the linear domain would underflow
    CHECK(mu.log_prob(3) == doctest::Approx(998.0 - log_z).epsilon(1e-12));
}

TEST_CASE("dump format: index, rendered state, probability with 17 significant digits") {
    Space sp = Space::spins(2);
    TabulatedMeasure mu(sp, {0.125, 0.375, 0.375, 0.125});
    std::ostringstream os;
    mu.dump(os);
    std::istringstream is(os.str());
    std::string line;
    std::size_t count = 0;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::size_t idx;
        std::string state, prob;
        CHECK(bool(ls >> idx >> state >> prob));
        CHECK(idx == count);
        CHECK(state.size() == 2);
        CHECK(std::stod(prob) == mu.prob(idx));
        ++count;
    }
    CHECK(count == 4);

    std::ostringstream os2;
    TabulatedMeasure third(Space::spins(1), {1.0 / 3.0, 2.0 / 3.0});
    third.dump(os2);
    CHECK(os2.str().find("0.33333333333333331") != std::string::npos);
}

TEST_CASE("state rendering per kind") {
    Space sp = Space::spins(3);
    CHECK(format_state(sp, sp.decode(0)) == "---");
    CHECK(format_state(sp, sp.decode(1)) == "+--");
    Space sl = Space::slice(4, 2);
    for (std::size_t idx = 0; idx < sl.size(); ++idx) {
        std::string s = format_state(sl, sl.decode(idx));
        CHECK(s.size() == 4);
        CHECK(std::count(s.begin(), s.end(), '1') == 2);
    }
    Space pm = Space::perms(3);
    CHECK(format_state(pm, {1, 3, 2}) == "1,3,2");
}

TEST_CASE("index family construction and validation") {
    IndexFamily s = IndexFamily::singletons(4);
    CHECK(s.size() == 4);
    IndexFamily p = IndexFamily::pairs(4);
    CHECK(p.size() == 6);
    IndexFamily r = IndexFamily::ring_pairs(5);
    CHECK(r.size() == 5);
    CHECK_NOTHROW(s.validate(4));
    CHECK_NOTHROW(p.validate(4));
    CHECK_NOTHROW(r.validate(5));

    IndexFamily bad;
    CHECK_THROWS_AS(bad.validate(3), error); // empty family
    bad.subsets = {{0, 0}};
    CHECK_THROWS_AS(bad.validate(3), error); // repeated site
    bad.subsets = {{2, 1}};
    CHECK_THROWS_AS(bad.validate(3), error); // unsorted
    bad.subsets = {{0, 3}};
    CHECK_THROWS_AS(bad.validate(3), error); // out of range
    bad.subsets = {{0, 1}, {0, 1}};
    CHECK_THROWS_AS(bad.validate(3), error); // duplicate subset
}

TEST_CASE("disintegration reconstructs the measure") {
    CounterRng rng(42, 0);
    for (int trial = 0; trial < 100; ++trial) {
        int n = 2 + static_cast<int>(rng.next_below(4)); // 2..5
        Space sp = Space::spins(n);
        std::vector<double> lw(sp.size());
        for (double& w : lw) w = rng.next_gaussian();
        auto [mu, log_z] = TabulatedMeasure::from_log_weights(sp, lw);
        (void)log_z;
        std::vector<int> I = {static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)))};
        if (n >= 3 && rng.next_double() < 0.5) {
            int j = (I[0] + 1) % n;
            I = {std::min(I[0], j), std::max(I[0], j)};
        }
        ConditionalKernel k = disintegrate(mu, I);
        // marginal mass times conditional row equals the joint, row by row
        double mass = 0.0;
        for (std::size_t r = 0; r < k.contexts.size(); ++r) {
            mass += k.context_mass[r];
            for (std::size_t j = 0; j < k.states[r].size(); ++j)
                CHECK(k.context_mass[r] * k.probs[r][j] ==
                      doctest::Approx(mu.prob(k.states[r][j])).epsilon(1e-12));
        }
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("row lookup agrees with context membership") {
    Space sp = Space::slice(4, 2);
    TabulatedMeasure mu = TabulatedMeasure::uniform(sp);
    ConditionalKernel k = disintegrate(mu, {0, 1});
    for (std::size_t idx = 0; idx < sp.size(); ++idx) {
        std::ptrdiff_t r = k.row_of_state[idx];
        REQUIRE(r >= 0);
        std::vector<int> v = sp.decode(idx);
        std::vector<int> ctx = {v[2], v[3]};
        CHECK(k.contexts[static_cast<std::size_t>(r)] == ctx);
    }
}

TEST_CASE("uniform on perms(3): conditioning on sites {0,1} gives a half-half row") {
    Space sp = Space::perms(3);
    TabulatedMeasure mu = TabulatedMeasure::uniform(sp);
    ConditionalKernel k = disintegrate(mu, {0, 1});
    // context: site 2 holds the value 3, so sites 0 and 1 hold {1,2} in some order
    auto support = kernel_support(k, {3});
    REQUIRE(support.size() == 2);
    std::set<std::vector<int>> got(support.begin(), support.end());
    std::set<std::vector<int>> want = {{1, 2}, {2, 1}};
    CHECK(got == want);
    std::ptrdiff_t r = k.find_context({3});
    REQUIRE(r >= 0);
    for (double p : k.probs[static_cast<std::size_t>(r)]) CHECK(p == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("kernel support under exclusion: slice(2,1) single site") {
    Space sp = Space::slice(2, 1);
    TabulatedMeasure mu = TabulatedMeasure::uniform(sp);
    ConditionalKernel k = disintegrate(mu, {0});
    // fixing site 1 pins site 0 completely: each context admits one completion
    for (const auto& ctx : k.contexts) {
        auto support = kernel_support(k, ctx);
        REQUIRE(support.size() == 1);
        CHECK(support[0][0] == 1 - ctx[0]);
    }
}

TEST_CASE("kernel support on a product space is context independent") {
    Space sp = Space::spins(3);
    TabulatedMeasure mu = TabulatedMeasure::uniform(sp);
    ConditionalKernel k = disintegrate(mu, {1});
    for (const auto& ctx : k.contexts) {
        auto support = kernel_support(k, ctx);
        CHECK(support.size() == 2);
    }
}

TEST_CASE("kernel_support rejects unknown contexts") {
    Space sp = Space::spins(2);
    TabulatedMeasure mu = TabulatedMeasure::uniform(sp);
    ConditionalKernel k = disintegrate(mu, {0});
    CHECK_THROWS_AS(kernel_support(k, {7}), error);
}

TEST_CASE("zero-mass contexts carry no row") {
    Space sp = Space::spins(2);
    // all mass on states with site 1 equal to +1
    TabulatedMeasure mu(sp, {0.0, 0.0, 0.3, 0.7});
    ConditionalKernel k = disintegrate(mu, {0});
    CHECK(k.contexts.size() == 1);
    CHECK(k.contexts[0] == std::vector<int>{1});
    CHECK(k.row_of_state[0] == -1);
    CHECK(k.row_of_state[2] >= 0);
}

TEST_CASE("disintegrate validates its site list") {
    Space sp = Space::spins(3);
    TabulatedMeasure mu = TabulatedMeasure::uniform(sp);
    CHECK_THROWS_AS(disintegrate(mu, {3}), error);
    CHECK_THROWS_AS(disintegrate(mu, {0, 0}), error);
}

TEST_CASE("binomial coefficients") {
    CHECK(binomial(0, 0) == 1);
    CHECK(binomial(5, 2) == 10);
    CHECK(binomial(5, 6) == 0);
    CHECK(binomial(5, -1) == 0);
    CHECK(binomial(32, 16) == 601080390ull);
}
