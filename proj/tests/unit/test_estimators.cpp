#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "covar/analytic.hpp"
#include "covar/distributions.hpp"
#include "covar/error.hpp"
#include "covar/estimators.hpp"

using namespace covar;

namespace {

SimplifiedDeltaGamma make_model(std::vector<double> d1, std::vector<double> g1, std::vector<double> d2,
                                std::vector<double> g2, double c1 = 0.0, double c2 = 0.0) {
    SimplifiedDeltaGamma m;
    m.d = d1.size();
    m.c1 = c1;
    m.c2 = c2;
    m.delta1 = std::move(d1);
    m.gamma1 = std::move(g1);
    m.delta2 = std::move(d2);
    m.gamma2 = std::move(g2);
    return m;
}

// X = Z1 + Z2^2, Y = Z1^2 + Z2 + Z2^2.
SimplifiedDeltaGamma two_dim_model() { return make_model({1, 0}, {0, 1}, {0, 1}, {1, 1}); }

LossSample independent_normals(RngStream& s, std::size_t n) {
    LossSample out;
    out.x.resize(n);
    out.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.x[i] = std_normal(s);
        out.y[i] = std_normal(s);
    }
    return out;
}

// E of the r-th smallest of k standard normals.
double normal_order_stat_mean(std::size_t r, std::size_t k) {
    const boost::math::beta_distribution<double> bd(static_cast<double>(r), static_cast<double>(k - r + 1));
    const boost::math::normal_distribution<double> nd;
    auto f = [&](double x) {
        return x * boost::math::pdf(bd, boost::math::cdf(nd, x)) * boost::math::pdf(nd, x);
    };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -10.0, 10.0, 15, 1e-12);
}

}  // namespace

TEST_CASE("var_order_stat") {
    std::vector<double> xs(100);
    std::iota(xs.begin(), xs.end(), 1.0);
    CHECK(var_order_stat(xs, 0.95) == 95.0);
    CHECK(var_order_stat(std::vector<double>{5.0}, 0.3) == 5.0);
    std::vector<double> perm(20);
    std::iota(perm.begin(), perm.end(), 1.0);
    std::reverse(perm.begin(), perm.end());
    std::swap(perm[3], perm[17]);
    CHECK(var_order_stat(perm, 0.5) == 10.0);
    CHECK_THROWS_AS(var_order_stat(std::vector<double>{}, 0.5), InvalidParameter);
    CHECK(ceil_rank(0.95, 200) == 190);
    CHECK(ceil_rank(0.95, 1000) == 950);
    CHECK(ceil_rank(0.951, 1000) == 951);
}

TEST_CASE("batching default allocation") {
    CHECK(BatchConfig::for_sample_size(1000).k == 50);
    CHECK(BatchConfig::for_sample_size(1000).m == 20);
    CHECK(BatchConfig::for_sample_size(1000000).k == 5000);
    const auto c = BatchConfig::for_sample_size(300000);
    CHECK(c.k == static_cast<std::size_t>(std::ceil(std::pow(300000.0, 2.0 / 3.0) / 2.0)));
    CHECK(c.m == 300000 / c.k);
}

TEST_CASE("batching_estimate") {
    RngStream s(1, 0);
    SUBCASE("single batch") {
        const LossSample smp = independent_normals(s, 101);
        const auto res = batching_estimate(smp, {1, 101}, 0.9, 0.5);
        std::vector<std::size_t> order(101);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return smp.x[a] < smp.x[b]; });
        CHECK(res.point == smp.y[order[ceil_rank(0.9, 101) - 1]]);
        CHECK(res.yhats.size() == 1);
    }
    SUBCASE("identical pairs") {
        LossSample smp = independent_normals(s, 4000);
        smp.y = smp.x;
        const auto res = batching_estimate(smp, {40, 100}, 0.95, 0.9);
        std::vector<double> batch_vars;
        for (std::size_t i = 0; i < 40; ++i)
            batch_vars.push_back(var_order_stat(std::span(smp.x).subspan(i * 100, 100), 0.95));
        CHECK(res.point == var_order_stat(batch_vars, 0.9));
    }
    SUBCASE("ties keep input order") {
        LossSample smp;
        smp.x = {1, 1, 1, 1};
        smp.y = {10, 20, 30, 40};
        CHECK(batching_estimate(smp, {1, 4}, 0.5, 0.5).point == 20.0);
    }
    SUBCASE("trailing observations are discarded") {
        const LossSample smp = independent_normals(s, 1003);
        const auto res = batching_estimate(smp, {10, 100}, 0.95, 0.95);
        CHECK(res.discarded == 3);
        CHECK_THROWS_AS(batching_estimate(smp, {11, 100}, 0.95, 0.95), InvalidParameter);
    }
    SUBCASE("monotone in beta") {
        const LossSample smp = independent_normals(s, 40000);
        double prev = -INFINITY;
        for (double beta = 0.05; beta < 1.0; beta += 0.05) {
            const double p = batching_estimate(smp, {200, 200}, 0.95, beta).point;
            CHECK(p >= prev);
            prev = p;
        }
    }
}

TEST_CASE("batching under independence tracks the order-statistic mean") {
    // Y_hat are i.i.d. N(0,1) here, so the estimate is the 190th of 200
    // normals. Its exact mean sits 0.027 below VaR_0.95(Y); the test
    // compares against that mean rather than VaR itself.
    const double expected = normal_order_stat_mean(190, 200);
    CHECK(std::fabs(expected - inv_norm_cdf(0.95) + 0.02725) <= 1e-4);
    double sum = 0.0, sq = 0.0;
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
        RngStream s(17, static_cast<std::uint64_t>(r));
        const double p = batching_estimate(independent_normals(s, 40000), {200, 200}, 0.95, 0.95).point;
        sum += p;
        sq += p * p;
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sq / reps - mean * mean) / (reps - 1));
    CHECK(std::fabs(mean - expected) <= 3.0 * se);
}

TEST_CASE("batching_ci") {
    const boost::math::normal_distribution<double> nd;
    const double z = boost::math::quantile(nd, 0.975);
    const double k1 = 1000.0 * (0.95 - z * std::sqrt(0.95 * 0.05) / std::sqrt(1000.0));
    const double k2 = 1000.0 * (0.95 + z * std::sqrt(0.95 * 0.05) / std::sqrt(1000.0));
    CHECK(std::floor(k1) == 936.0);
    CHECK(std::ceil(k2) == 964.0);
    std::vector<double> ys(1000);
    std::iota(ys.begin(), ys.end(), 1.0);
    std::reverse(ys.begin(), ys.end());
    const auto ci = batching_ci(ys, 0.95, 0.05);
    CHECK(ci.low_rank == 936);
    CHECK(ci.high_rank == 964);
    CHECK(ci.low == 936.0);
    CHECK(ci.high == 964.0);
    std::vector<double> ten(10, 1.0);
    CHECK_THROWS_AS(batching_ci(ten, 0.95, 0.05), InfeasibleCiError);
    try {
        batching_ci(ten, 0.95, 0.05);
    } catch (const InfeasibleCiError& e) {
        CHECK(std::string(e.what()).find("k=") != std::string::npos);
    }
    CHECK_THROWS_AS(batching_ci(std::vector<double>{1.0}, 0.5, 0.05), InvalidParameter);
}

TEST_CASE("conditional_root_weights") {
    SUBCASE("symmetric parabola") {
        const auto rw = conditional_root_weights(0.0, 0.0, 1.0, 4.0);
        CHECK(rw.crossed);
        CHECK(rw.r1 == doctest::Approx(-2.0));
        CHECK(rw.r2 == doctest::Approx(2.0));
        CHECK(rw.lambda == doctest::Approx(4.0));
        CHECK(rw.q1 == doctest::Approx(0.0134978).epsilon(1e-5));
        CHECK(rw.q2 == doctest::Approx(rw.q1));
    }
    SUBCASE("below the minimum") {
        const auto rw = conditional_root_weights(0.0, 0.0, 1.0, -1.0);
        CHECK_FALSE(rw.crossed);
        CHECK(rw.q1 == 0.0);
        CHECK(rw.q2 == 0.0);
        CHECK(std::isinf(rw.y1));
        CHECK(std::isinf(rw.y2));
    }
    SUBCASE("shifted parabola") {
        const auto rw = conditional_root_weights(1.0, 2.0, 1.0, 1.0);
        CHECK(rw.r1 == doctest::Approx(-2.0));
        CHECK(rw.r2 == doctest::Approx(0.0));
        CHECK(rw.lambda == doctest::Approx(2.0));
        CHECK(rw.q1 == doctest::Approx(norm_pdf(-2.0) / 2.0));
        CHECK(rw.q2 == doctest::Approx(norm_pdf(0.0) / 2.0));
    }
    SUBCASE("touching the minimum is not a crossing") {
        CHECK_FALSE(conditional_root_weights(0.0, 0.0, 1.0, 0.0).crossed);
    }
    CHECK_THROWS_AS(conditional_root_weights(0.0, 1.0, 0.0, 1.0), CurvatureError);
    CHECK_THROWS_AS(conditional_root_weights(0.0, 1.0, -1.0, 1.0), CurvatureError);
}

TEST_CASE("is_scenario") {
    SUBCASE("Y identical to X") {
        const auto m = make_model({0.3, -0.2, 0.5}, {-0.1, 0.2, 0.6}, {0.3, -0.2, 0.5}, {-0.1, 0.2, 0.6});
        RngStream s(2, 0);
        for (int i = 0; i < 1000; ++i) {
            const auto rw = is_scenario(m, TailSpec::normal(), 1.7, s);
            if (!rw.crossed) continue;
            CHECK(std::fabs(rw.y1 - 1.7) <= 1e-9);
            CHECK(std::fabs(rw.y2 - 1.7) <= 1e-9);
        }
    }
    SUBCASE("one-dimensional model is deterministic") {
        const auto m = make_model({0}, {1}, {0}, {0});
        RngStream s(3, 0);
        for (int i = 0; i < 10; ++i) {
            const auto rw = is_scenario(m, TailSpec::normal(), 4.0, s);
            CHECK(rw.r1 == -2.0);
            CHECK(rw.r2 == 2.0);
        }
    }
    SUBCASE("fixture at its VaR crosses almost always") {
        const auto& fx = fixture_model();
        RngStream s(4, 0);
        const double v = var_order_stat(sample_losses(fx, TailSpec::normal(), s, 200000).x, 0.95);
        const auto sc = is_scenarios(fx, TailSpec::normal(), v, s, 10000);
        const auto crossed = std::count_if(sc.begin(), sc.end(), [](const RootWeights& r) { return r.crossed; });
        CHECK(static_cast<double>(crossed) / 10000.0 >= 0.999);
    }
    SUBCASE("negative curvature is rejected") {
        auto m = make_model({1, 1}, {0.1, -0.2}, {1, 1}, {0, 0});
        RngStream s(5, 0);
        CHECK_THROWS(is_scenario(m, TailSpec::normal(), 1.0, s));
        m.gamma1 = {-0.3, -0.2};
        CHECK_THROWS_AS(is_scenario(m, TailSpec::normal(), 1.0, s), CurvatureError);
    }
}

TEST_CASE("weighted_quantile") {
    const std::vector<double> v{10, 20, 30, 40};
    const std::vector<double> w(4, 1.0);
    CHECK(weighted_quantile(v, w, 0.5) == 30.0);
    CHECK(weighted_quantile(std::vector<double>{7}, std::vector<double>{1}, 0.3) == 7.0);
    const std::vector<double> v3{1, 2, 3}, w3{0.2, 0.3, 0.5};
    CHECK(weighted_quantile(v3, w3, 0.49) == 2.0);
    CHECK(weighted_quantile(v3, w3, 0.51) == 3.0);
    CHECK(weighted_quantile(std::vector<double>{3, 1, 2}, std::vector<double>{0.5, 0.2, 0.3}, 0.49) == 2.0);
    const double inf = INFINITY;
    CHECK(weighted_quantile(std::vector<double>{1, inf, 2}, std::vector<double>{1, 0, 1}, 0.9) == 2.0);
    CHECK_THROWS_AS(weighted_quantile(v, std::vector<double>(4, 0.0), 0.5), DegenerateIsError);
    CHECK_THROWS_AS(weighted_quantile(std::vector<double>{1, inf}, std::vector<double>{0.1, 0.9}, 0.5),
                    InfiniteQuantileError);
    CHECK_THROWS_AS(weighted_quantile(v, std::vector<double>{1, -1, 1, 1}, 0.5), InvalidParameter);

    RngStream s(6, 0);
    std::vector<double> vals(997), ws(997);
    for (std::size_t i = 0; i < vals.size(); ++i) {
        vals[i] = std_normal(s);
        ws[i] = s.uniform01();
    }
    const auto nw = normalize_weights(ws);
    long double total = 0.0L;
    for (double x : nw) total += x;
    CHECK(std::fabs(static_cast<double>(total) - 1.0) <= 1e-12);
    double prev = -INFINITY;
    for (double beta = 0.01; beta < 1.0; beta += 0.01) {
        const double q = weighted_quantile(vals, ws, beta);
        CHECK(q >= prev);
        prev = q;
    }
    // Equal weights reduce to the order-statistic rule away from boundaries.
    const std::vector<double> eq(997, 1.0);
    for (double beta : {0.1234, 0.5001, 0.9507})
        CHECK(weighted_quantile(vals, eq, beta) == var_order_stat(vals, beta));
}

TEST_CASE("sectioning_ci") {
    const auto same = sectioning_ci(std::vector<double>(10, 2.5), 2.5, 0.05);
    CHECK(same.low == 2.5);
    CHECK(same.high == 2.5);
    const boost::math::students_t_distribution<double> td(9.0);
    const double t9 = boost::math::quantile(td, 0.975);
    CHECK(std::fabs(t9 - 2.262157) <= 1e-4);
    std::vector<double> sec(10);
    std::iota(sec.begin(), sec.end(), 1.0);
    const auto ci = sectioning_ci(sec, 5.5, 0.05);
    const double half = t9 * 3.0276503540974917 / std::sqrt(10.0);
    CHECK(ci.low == doctest::Approx(5.5 - half).epsilon(1e-9));
    CHECK(ci.high == doctest::Approx(5.5 + half).epsilon(1e-9));
    CHECK_THROWS_AS(sectioning_ci(std::vector<double>{1.0}, 1.0, 0.05), InvalidParameter);
}

TEST_CASE("is_estimate") {
    const auto& fx = fixture_model();
    SUBCASE("deterministic report") {
        RngStream a(8, 0), b(8, 0);
        const auto ra = is_estimate(fx, TailSpec::normal(), {5000, 5000, 10}, 0.95, 0.95, a);
        const auto rb = is_estimate(fx, TailSpec::normal(), {5000, 5000, 10}, 0.95, 0.95, b);
        CHECK(ra.point == rb.point);
        CHECK(ra.ci_low == rb.ci_low);
        CHECK(ra.ci_high == rb.ci_high);
        CHECK(ra.diagnostics == rb.diagnostics);
        CHECK(ra.ci_low <= ra.point);
        CHECK(ra.point <= ra.ci_high);
        CHECK(ra.diagnostics.at("crossed_fraction") > 0.99);
    }
    SUBCASE("block independence recovers VaR of Y") {
        const auto m = make_model({0, 0, 0.5, 0.3}, {0, 0, 0.1, 0.4}, {1, 0.5, 0, 0}, {0.2, 0.1, 0, 0});
        RngStream s(9, 0);
        const auto rep = is_estimate(m, TailSpec::normal(), {100000, 100000, 10}, 0.95, 0.95, s);
        const double se_is = (rep.ci_high - rep.ci_low) / (2.0 * student_t_quantile(0.975, 9));
        RngStream d(9, 1);
        const LossSample direct = sample_losses(m, TailSpec::normal(), d, 1000000);
        const double var_y = var_order_stat(direct.y, 0.95);
        std::vector<double> blocks;
        for (std::size_t j = 0; j < 10; ++j)
            blocks.push_back(var_order_stat(std::span(direct.y).subspan(j * 100000, 100000), 0.95));
        double mb = std::accumulate(blocks.begin(), blocks.end(), 0.0) / 10.0, ss = 0.0;
        for (double v : blocks) ss += (v - mb) * (v - mb);
        const double se_direct = std::sqrt(ss / 9.0) / std::sqrt(10.0);
        CHECK(std::fabs(rep.point - var_y) <= 3.0 * std::hypot(se_is, se_direct));
    }
    SUBCASE("allocation errors") {
        RngStream s(10, 0);
        CHECK_THROWS_AS(is_estimate(fx, TailSpec::normal(), {100, 101, 10}, 0.95, 0.95, s), InvalidParameter);
        CHECK_THROWS_AS(is_estimate(fx, TailSpec::normal(), {100, 100, 1}, 0.95, 0.95, s), InvalidParameter);
    }
    SUBCASE("no crossing is degenerate") {
        // X = Z^2 + 10: VaR far above the minimum, but target below it.
        const auto m = make_model({0}, {1}, {1}, {0}, 10.0);
        RngStream s(11, 0);
        CHECK_THROWS_AS(conditional_cdf_from_scenarios(is_scenarios(m, TailSpec::normal(), 5.0, s, 100), 0.0),
                        DegenerateIsError);
    }
}

TEST_CASE("is_conditional_cdf") {
    const auto m = two_dim_model();
    RngStream s(12, 0);
    CHECK(is_conditional_cdf(m, TailSpec::normal(), 2.0, 1e300, 10000, s) == 1.0);
    CHECK(is_conditional_cdf(m, TailSpec::normal(), 2.0, -1e300, 10000, s) == 0.0);
    const double f_is = is_conditional_cdf(m, TailSpec::normal(), 2.0, 2.0, 1000000, s);
    RngStream b(12, 1);
    const LossSample big = sample_losses(m, TailSpec::normal(), b, 10000000);
    const double f_band = band_conditional_cdf(big, 2.0, 2.0, 0.002);
    CHECK(std::fabs(f_is - f_band) <= 0.01);
}

TEST_CASE("band_conditional_cdf") {
    LossSample smp;
    smp.x = {1.0, 1.001, 0.999};
    smp.y = {0.1, 0.2, 0.3};
    CHECK(band_conditional_cdf(smp, 1.0, 1.0, 0.01) == 1.0);
    CHECK(band_conditional_cdf(smp, 1.0, 0.0, 0.01) == 0.0);
    CHECK_THROWS_AS(band_conditional_cdf(smp, 5.0, 0.0, 0.01), EmptyBandError);

    LinearPortfolioSpec spec{0.0, 0.0, 1.0, 1.0, 0.5};
    RngStream s(13, 0);
    const LossSample big = sample_linear(spec, s, 10000000);
    const double x = inv_norm_cdf(0.95);
    const double y = linear_covar(spec, 0.95, 0.95);
    CHECK(std::fabs(band_conditional_cdf(big, x, y, 0.002) - 0.95) <= 0.01);
}

TEST_CASE("root weights CSV") {
    std::vector<RootWeights> sc(2);
    sc[0] = conditional_root_weights(0.0, 0.0, 1.0, 4.0);
    sc[0].y1 = 1.0;
    sc[0].y2 = 2.0;
    std::ostringstream os;
    write_root_weights_csv(os, sc);
    std::istringstream is(os.str());
    std::string header, first, second;
    std::getline(is, header);
    std::getline(is, first);
    std::getline(is, second);
    CHECK(header == "scenario,crossed,r1,r2,lambda,q1,q2,y1,y2");
    CHECK(first.rfind("0,1,-2,2,4,", 0) == 0);
    CHECK(second == "1,0,,,0,0,0,,");
    CHECK(os.str().find("inf") == std::string::npos);
}
