#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "gorgo/cost.hpp"
#include "gorgo/rng.hpp"

using namespace gorgo;

namespace {

// Independent normal-equations OLS in extended precision.
struct OlsOracle {
    long double intercept, slope, r2;
};

OlsOracle ols_normal_equations(const std::vector<PrefillObservation>& obs) {
    long double n = static_cast<long double>(obs.size());
    long double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& o : obs) {
        long double x = static_cast<long double>(o.input_tokens);
        long double y = o.ttft_ms;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    long double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    long double intercept = (sy - slope * sx) / n;
    long double ybar = sy / n;
    long double ss_res = 0, ss_tot = 0;
    for (const auto& o : obs) {
        long double fit = intercept + slope * static_cast<long double>(o.input_tokens);
        ss_res += (o.ttft_ms - fit) * (o.ttft_ms - fit);
        ss_tot += (o.ttft_ms - ybar) * (o.ttft_ms - ybar);
    }
    return {intercept, slope, ss_tot == 0 ? 1.0L : 1.0L - ss_res / ss_tot};
}

PeerSummary candidate(const std::string& id, double rtt, std::int64_t pending, MicroTs as_of = 0) {
    PeerSummary p;
    p.region_id = id;
    p.rtt_ms = rtt;
    p.state.region_id = id;
    p.state.waiting_tokens = pending;
    p.as_of_us = as_of;
    return p;
}

}  // namespace

TEST_CASE("saved_time converts overlap into time") {
    CHECK(saved_time_ms(0, 0.0938) == 0.0);
    CHECK(saved_time_ms(1000, 0.0938) == doctest::Approx(93.8).epsilon(1e-12));
    CHECK(saved_time_ms(630, 0.0466) == doctest::Approx(29.358).epsilon(1e-12));
    CHECK_THROWS_AS(saved_time_ms(-1, 0.1), DataError);
    CHECK_THROWS_AS(saved_time_ms(1, 0.0), DataError);
}

TEST_CASE("residual_prefill_time") {
    CHECK(residual_prefill_ms(500, 500, 0.0938) == 0.0);
    CHECK(residual_prefill_ms(500, 0, 0.0938) == doctest::Approx(46.9).epsilon(1e-12));
    CHECK(residual_prefill_ms(500, 250, 0.0938) == doctest::Approx(23.45).epsilon(1e-12));
    // Linearity: doubling the gap doubles the result.
    CHECK(residual_prefill_ms(500, 0, 0.0938) ==
          doctest::Approx(2.0 * residual_prefill_ms(500, 250, 0.0938)).epsilon(1e-12));
    CHECK_THROWS_AS(residual_prefill_ms(100, 101, 0.0938), DataError);
}

TEST_CASE("queue_wait_time matches the three-region scenario bullets") {
    double us_west = queue_wait_ms(6500, 0.0466, 1.0);
    CHECK(us_west == doctest::Approx(302.9).epsilon(1e-9));
    CHECK(std::abs(us_west - 300.0) <= 3.0);

    double israel = queue_wait_ms(4200, 0.0466, 1.0);
    CHECK(israel == doctest::Approx(195.72).epsilon(1e-9));
    CHECK(std::abs(israel - 195.75) <= 0.1);

    CHECK(queue_wait_ms(0, 0.0938, 1.0) == 0.0);
}

TEST_CASE("conservation: saved + residual = full prefill") {
    rng::Stream rng(7);
    for (int i = 0; i < 1000; ++i) {
        auto l_p = static_cast<std::int64_t>(rng.next_below(100000));
        auto l_hit = static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(l_p) + 1));
        double t_p = rng.next_range(0.001, 1.0);
        double whole = static_cast<double>(l_p) * t_p;
        CHECK(saved_time_ms(l_hit, t_p) + residual_prefill_ms(l_p, l_hit, t_p) ==
              doctest::Approx(whole).epsilon(1e-12));
    }
}

TEST_CASE("estimate_cost reproduces the network-cache tradeoff arithmetic") {
    CostParams params{0.0466, 1.0, 0.0};
    // Prefill term isolated: zero-token request.
    auto us = estimate_cost(candidate("us-west", 3.0, 6500), 0, 0, params, 0);
    auto de = estimate_cost(candidate("germany", 281.0, 0), 0, 0, params, 0);
    auto il = estimate_cost(candidate("israel", 183.0, 4200), 0, 0, params, 0);

    CHECK(us.total_ms == doctest::Approx(305.9).epsilon(1e-9));
    CHECK(std::abs(us.total_ms - 303.0) <= 3.0);
    CHECK(de.total_ms == doctest::Approx(281.0).epsilon(1e-12));
    CHECK(il.total_ms == doctest::Approx(378.72).epsilon(1e-9));
    CHECK(std::abs(il.total_ms - 378.72) <= 0.1);

    for (const auto& b : {us, de, il}) {
        CHECK(b.total_ms == b.network_ms + b.prefill_ms + b.queue_ms);
        CHECK_FALSE(b.stale);
    }
}

TEST_CASE("estimate_cost is monotone in rtt, pending tokens and residual gap") {
    CostParams params{0.0938, 1.0, 0.0};
    rng::Stream rng(11);
    for (int i = 0; i < 200; ++i) {
        double rtt = rng.next_range(0, 300);
        auto pending = static_cast<std::int64_t>(rng.next_below(10000));
        std::int64_t tokens = 1000;
        auto hit = static_cast<std::int64_t>(rng.next_below(1000));
        auto base = estimate_cost(candidate("x", rtt, pending), tokens, hit, params, 0);
        auto more_rtt = estimate_cost(candidate("x", rtt + 5, pending), tokens, hit, params, 0);
        auto more_q = estimate_cost(candidate("x", rtt, pending + 100), tokens, hit, params, 0);
        auto less_hit = estimate_cost(candidate("x", rtt, pending), tokens, hit / 2, params, 0);
        CHECK(more_rtt.total_ms >= base.total_ms);
        CHECK(more_q.total_ms >= base.total_ms);
        CHECK(less_hit.total_ms >= base.total_ms);
    }
}

TEST_CASE("with q_s = 0 the ranking depends only on rtt + residual prefill") {
    CostParams params{0.0938, 0.0, 0.0};
    rng::Stream rng(13);
    for (int i = 0; i < 100; ++i) {
        double rtt_a = rng.next_range(0, 300), rtt_b = rng.next_range(0, 300);
        auto pa = static_cast<std::int64_t>(rng.next_below(10000));
        auto pb = static_cast<std::int64_t>(rng.next_below(10000));
        auto ha = static_cast<std::int64_t>(rng.next_below(500));
        auto hb = static_cast<std::int64_t>(rng.next_below(500));
        auto a = estimate_cost(candidate("a", rtt_a, pa), 500, ha, params, 0);
        auto b = estimate_cost(candidate("b", rtt_b, pb), 500, hb, params, 0);
        double key_a = rtt_a + residual_prefill_ms(500, ha, params.t_p_ms_per_token);
        double key_b = rtt_b + residual_prefill_ms(500, hb, params.t_p_ms_per_token);
        CHECK((a.total_ms < b.total_ms) == (key_a < key_b));
    }
}

TEST_CASE("stale summaries are flagged and penalized, not excluded") {
    CostParams params{0.0938, 1.0, 0.0};
    StalenessPolicy stale{2500.0, 500.0};
    auto fresh = estimate_cost(candidate("p", 10.0, 100, ms_to_us(1000)), 0, 0, params,
                               ms_to_us(2000), stale);
    CHECK_FALSE(fresh.stale);
    auto old = estimate_cost(candidate("p", 10.0, 100, 0), 0, 0, params, ms_to_us(3000), stale);
    CHECK(old.stale);
    CHECK(old.queue_ms == doctest::Approx(fresh.queue_ms + 500.0));
    CHECK(old.total_ms == old.network_ms + old.prefill_ms + old.queue_ms);
}

TEST_CASE("calibration recovers the benchmark regression exactly on noiseless data") {
    std::vector<PrefillObservation> obs;
    rng::Stream rng(3);
    for (int i = 0; i < 87; ++i) {
        auto x = static_cast<std::int64_t>(rng.next_below(4096));
        obs.push_back({x, 150.72 + 0.0938 * static_cast<double>(x)});
    }
    Calibration c = fit_prefill_calibration(obs);
    CHECK(c.n == 87);
    CHECK(c.intercept_ms == doctest::Approx(150.72).epsilon(1e-9));
    CHECK(c.slope_ms_per_token == doctest::Approx(0.0938).epsilon(1e-9));
    CHECK(std::abs(c.r_squared - 1.0) <= 1e-9);
}

TEST_CASE("two points determine the line") {
    Calibration c = fit_prefill_calibration({{0, 10.0}, {100, 20.0}});
    CHECK(c.intercept_ms == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(c.slope_ms_per_token == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(c.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("noisy fit matches the normal-equations oracle") {
    std::vector<PrefillObservation> obs;
    for (int x = 0; x < 4; ++x)
        obs.push_back({x, static_cast<double>(x) + (x % 2 == 0 ? 1.0 : -1.0)});
    Calibration c = fit_prefill_calibration(obs);
    OlsOracle o = ols_normal_equations(obs);
    CHECK(c.intercept_ms == doctest::Approx(static_cast<double>(o.intercept)).epsilon(1e-9));
    CHECK(c.slope_ms_per_token == doctest::Approx(static_cast<double>(o.slope)).epsilon(1e-9));
    CHECK(c.r_squared == doctest::Approx(static_cast<double>(o.r2)).epsilon(1e-9));

    // And on larger random data.
    rng::Stream rng(17);
    obs.clear();
    for (int i = 0; i < 500; ++i) {
        auto x = static_cast<std::int64_t>(rng.next_below(2048));
        obs.push_back({x, 80.0 + 0.11 * static_cast<double>(x) + rng.next_normal() * 25.0});
    }
    c = fit_prefill_calibration(obs);
    o = ols_normal_equations(obs);
    CHECK(c.intercept_ms == doctest::Approx(static_cast<double>(o.intercept)).epsilon(1e-9));
    CHECK(c.slope_ms_per_token == doctest::Approx(static_cast<double>(o.slope)).epsilon(1e-9));
    CHECK(c.r_squared == doctest::Approx(static_cast<double>(o.r2)).epsilon(1e-9));
}

TEST_CASE("calibration error paths") {
    CHECK_THROWS_AS(fit_prefill_calibration({}), DataError);
    CHECK_THROWS_AS(fit_prefill_calibration({{5, 1.0}}), DataError);
    CHECK_THROWS_AS(fit_prefill_calibration({{5, 1.0}, {5, 2.0}, {5, 3.0}}), DataError);
}

TEST_CASE("calibration csv round-trip") {
    std::vector<PrefillObservation> obs{{100, 160.1}, {200, 169.48}, {1000, 244.52}};
    std::ostringstream out;
    write_observations_csv(obs, out);
    std::istringstream in(out.str());
    auto back = read_observations_csv(in);
    REQUIRE(back.size() == obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        CHECK(back[i].input_tokens == obs[i].input_tokens);
        CHECK(back[i].ttft_ms == doctest::Approx(obs[i].ttft_ms));
    }

    std::istringstream bad("input_tokens,ttft_ms\n100,5.0\nabc,def\n");
    CHECK_THROWS_WITH_AS(read_observations_csv(bad),
                         "calibration csv line 3: malformed row 'abc,def'", DataError);
    std::istringstream no_comma("100 5.0\n");
    CHECK_THROWS_AS(read_observations_csv(no_comma), DataError);
}
