#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <random>
#include <string>

#include "itolab/itoverify.hpp"
#include "test_support.hpp"

using namespace itolab;
using namespace testutil;

namespace {

CadlagPath p1_on(std::size_t n) {
    TimeGrid g = TimeGrid::uniform(n, 1.0);
    return CadlagPath(g, g.points());
}

const Functional& fetch(const std::string& id) {
    static std::map<std::string, Functional> cache;
    auto it = cache.find(id);
    if (it == cache.end()) {
        auto f = find_functional(id);
        REQUIRE(f.has_value());
        it = cache.emplace(id, std::move(*f)).first;
    }
    return it->second;
}

std::vector<CadlagPath> random_jump_paths(unsigned seed, int count) {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> size(-1.5, 1.5);
    std::uniform_int_distribution<std::size_t> pos(1, 40);
    std::uniform_real_distribution<double> inc(-0.2, 0.2);
    TimeGrid g = TimeGrid::uniform(40, 1.0);
    std::vector<CadlagPath> out;
    for (int k = 0; k < count; ++k) {
        std::vector<double> cont(g.size(), 0.0);
        for (std::size_t i = 1; i < g.size(); ++i) cont[i] = cont[i - 1] + inc(eng);
        std::vector<JumpEntry> js;
        for (int j = 0; j < 3; ++j) js.push_back({pos(eng), size(eng)});
        out.emplace_back(g, cont, js);
    }
    return out;
}

}  // namespace

TEST_CASE("square telescopes to machine precision") {
    const Functional& square = fetch("endpoint:g=sqr");
    TimeGrid g = TimeGrid::uniform(1 << 12, 1.0);
    double gate = std::pow(2.0, -40);
    for (Seed s = 0; s < 10; ++s) {
        ItoDecomposition d = ito_decompose(square, brownian(g, s), 1.0);
        CHECK(std::abs(d.residual) / d.scale <= gate);
        // bookkeeping identity holds bitwise by construction
        CHECK(d.residual ==
              d.lhs - (((d.time_term + d.stoch_term) + d.qv_term) + d.jump_term));
        CHECK(d.scale == std::max(1.0, std::abs(d.lhs)));
    }
    JumpSpec spec = JumpSpec::rademacher_pm1(2.0);
    for (Seed s = 0; s < 10; ++s) {
        ItoDecomposition d = ito_decompose(square, jump_diffusion(g, s, 0.2, spec, true), 1.0);
        CHECK(std::abs(d.residual) / d.scale <= gate);
    }
}

TEST_CASE("stieltjes of identity splits into stochastic and qv terms") {
    const Functional& stid = fetch("stieltjes:f=identity");
    TimeGrid g = TimeGrid::uniform(1 << 10, 1.0);
    JumpSpec spec = JumpSpec::uniform_on(3.0, -0.5, 0.8);
    double gate = std::pow(2.0, -40);
    for (Seed s : {Seed(3), Seed(8)}) {
        ItoDecomposition d = ito_decompose(stid, jump_diffusion(g, s, 0.1, spec, false), 1.0);
        // trapezoid evaluation makes lhs = ito integral + half the realized qv,
        // so the time term vanishes identically, the jump term is pure
        // cancellation noise and the residual is pure rounding
        CHECK(d.time_term == 0.0);
        CHECK(std::abs(d.jump_term) <= gate);
        CHECK(std::abs(d.lhs - d.stoch_term - d.qv_term) <= gate);
        CHECK(std::abs(d.residual) <= gate);
    }
    ItoDecomposition b = ito_decompose(stid, brownian(g, 1), 1.0);
    CHECK(b.jump_term == 0.0);
    CHECK(std::abs(b.residual) <= gate);
}

TEST_CASE("smooth endpoint on a jump diffusion converges on refinement") {
    const Functional& esin = fetch("endpoint:g=sin");
    TimeGrid g = TimeGrid::uniform(1 << 12, 1.0);
    JumpSpec spec = JumpSpec::rademacher_pm1(2.0);
    for (Seed s = 0; s < 4; ++s) {
        ItoDecomposition d = ito_decompose(esin, jump_diffusion(g, s, 0.0, spec, false), 1.0);
        CHECK(std::abs(d.residual) / d.scale < 1e-2);
    }
    ItoDecomposition d0 = ito_decompose(esin, jump_diffusion(g, 0, 0.0, spec, false), 1.0);
    CHECK(d0.jump_term == Catch::Approx(-0.8529).margin(1e-3));
    CHECK(std::abs(d0.residual) / d0.scale == Catch::Approx(1.274e-4).epsilon(0.01));
}

TEST_CASE("missing oracles are configuration errors") {
    TimeGrid g = TimeGrid::uniform(64, 1.0);
    auto s = brownian(g, 0);
    REQUIRE_THROWS_AS(ito_decompose(fetch("jump:g=id"), s, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(ito_decompose(fetch("running_max"), s, 1.0), std::invalid_argument);
    Functional bare;
    bare.id = "bare";
    bare.eval = [](double, const CadlagPath&) { return 0.0; };
    REQUIRE_THROWS_AS(fv_change_of_variable(bare, p1_on(16), 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(prop1_check(bare, {{0.5, p1_on(16)}}), std::invalid_argument);
}

TEST_CASE("finite variation change of variable on smooth paths") {
    const Functional& square = fetch("endpoint:g=sqr");
    ItoDecomposition d = fv_change_of_variable(square, p1_on(1 << 12), 1.0);
    CHECK(d.lhs == 1.0);
    CHECK(d.qv_term == 0.0);
    // left-point rule against a linear path: residual is exactly one mesh
    CHECK(d.residual == Catch::Approx(1.0 / 4096.0).margin(1e-15));
    ItoDecomposition fine = fv_change_of_variable(square, p1_on(1 << 14), 1.0);
    CHECK(fine.residual == Catch::Approx(1.0 / 16384.0).margin(1e-15));

    ItoDecomposition z = fv_change_of_variable(square, path_zero(), 1.0);
    CHECK(z.lhs == 0.0);
    CHECK(z.time_term == 0.0);
    CHECK(z.stoch_term == 0.0);
    CHECK(z.jump_term == 0.0);
    CHECK(z.residual == 0.0);
}

TEST_CASE("jump counterexample reports the formula failure honestly") {
    const Functional& jid = fetch("jump:g=id");
    CadlagPath p3 = path_step();
    ItoDecomposition d = fv_change_of_variable(jid, p3, 1.0);
    CHECK(d.lhs == 0.0);
    CHECK(d.time_term == 0.0);  // no time oracle: the term is simply absent
    CHECK(d.stoch_term == 0.0);
    CHECK(d.jump_term == 1.0);
    CHECK(d.residual == -1.0);
    CHECK(d.qv_term == 0.0);
}

TEST_CASE("per jump bookkeeping matches the ledger") {
    TimeGrid g = TimeGrid::uniform(50, 1.0);
    std::vector<JumpEntry> jumps = {{7, 0.6}, {23, -0.9}, {41, 0.25}};
    std::vector<double> cont(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) cont[i] = 0.3 * g[i];
    CadlagPath p(g, cont, jumps);
    auto sample = deterministic_sample(p);
    for (const char* id : {"endpoint:g=sqr", "endpoint:g=sin", "stieltjes:f=identity"}) {
        const Functional& f = fetch(id);
        ItoDecomposition d = ito_decompose(f, sample, 1.0);
        KahanSum manual;
        for (const auto& e : p.jumps()) {
            double tau = g[e.index];
            manual.add((f.eval(tau, p) - eval_left(f, tau, p)) -
                       eval_left_map(f.oracle.chit_v, tau, p) * e.size);
        }
        CHECK(d.jump_term == manual.value());
    }
    ItoDecomposition dsin = ito_decompose(fetch("endpoint:g=sin"), sample, 1.0);
    CHECK(dsin.jump_term != 0.0);
}

TEST_CASE("clock based qv diagnostic") {
    const Functional& square = fetch("endpoint:g=sqr");
    TimeGrid g = TimeGrid::uniform(1 << 10, 1.0);
    auto s = brownian(g, 11);
    ItoDecomposition d = ito_decompose(square, s, 1.0);
    // f11 = 2, so qv_term is the realized qv and the clock variant is <M>_T
    CHECK(d.qv_term == Catch::Approx(realized_qv_continuous(s.m_cont, 1.0)).margin(1e-12));
    CHECK(d.qv_term_clock == Catch::Approx(1.0).margin(1e-12));
    auto det = deterministic_sample(p1_on(64));
    CHECK(ito_decompose(square, det, 1.0).qv_term_clock == 0.0);
}

TEST_CASE("estimator backed oracles approximate the analytic decomposition") {
    const Functional& square = fetch("endpoint:g=sqr");
    Functional bare;
    bare.id = "endpoint:g=sqr";
    bare.eval = square.eval;
    Functional est = estimator_backed(bare);
    TimeGrid g = TimeGrid::uniform(1 << 10, 1.0);
    auto sample = brownian(g, 5);
    ItoDecomposition da = ito_decompose(square, sample, 1.0);
    ItoDecomposition de = ito_decompose(est, sample, 1.0);
    CHECK(std::abs(da.residual - de.residual) < 0.02);
    CHECK(std::abs(da.qv_term - de.qv_term) < 1e-6);
    CHECK(da.time_term == de.time_term);  // both vanish for an endpoint map
    // oracles that are already present are left untouched
    Functional same = estimator_backed(square);
    CHECK(same.oracle.dt(0.5, p1_on(16)) == square.oracle.dt(0.5, p1_on(16)));
}

TEST_CASE("ito convergence exactness class and rates") {
    const Functional& square = fetch("endpoint:g=sqr");
    const Functional& eexp = fetch("endpoint:g=exp");
    GeneratorConfig bm;
    ConvergenceReport rs = ito_convergence(square, bm, {256, 1024, 4096}, 20, 1e-12);
    REQUIRE(rs.levels.size() == 3);
    for (const auto& [param, metric] : rs.levels) CHECK(metric < 1e-14);
    CHECK(rs.pass);

    ConvergenceReport re = ito_convergence(eexp, bm, {256, 1024, 4096}, 20, 0.05, 1.0, 4);
    CHECK(re.levels[0].second > re.levels[1].second);
    CHECK(re.levels[1].second > re.levels[2].second);
    CHECK(re.levels[2].second < 5e-4);
    CHECK(re.slope < -0.4);
    CHECK(re.pass);
    // deterministic regardless of thread count
    ConvergenceReport re1 = ito_convergence(eexp, bm, {256, 1024, 4096}, 20, 0.05, 1.0, 1);
    CHECK(re1.levels == re.levels);

    REQUIRE_THROWS_AS(ito_convergence(square, bm, {256, 1024}, 20, 0.05),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(ito_convergence(square, bm, {256, 1024, 4096}, 0, 0.05),
                      std::invalid_argument);
}

TEST_CASE("wong zakai on finite variation input is exact") {
    const Functional& identity = fetch("identity");
    const Functional& square = fetch("endpoint:g=sqr");
    auto det = deterministic_sample(p1_on(1 << 10));
    for (int n : {4, 16, 64}) CHECK(wz_approximation(det, n, std::nullopt) == det.x);
    ConvergenceReport r = wong_zakai(identity, det, {4, 16, 64}, 1e-12);
    for (const auto& [n, metric] : r.levels) CHECK(metric == 0.0);
    CHECK(r.pass);
    ConvergenceReport rs = wong_zakai(square, det, {4, 16, 64}, 1e-6);
    for (const auto& [n, metric] : rs.levels) CHECK(metric < 1e-6);
    CHECK(rs.pass);
    CHECK_FALSE(wong_zakai(square, det, {4, 16, 64}, 1e-7).pass);
}

TEST_CASE("wong zakai single sample frozen values") {
    const Functional& identity = fetch("identity");
    TimeGrid g = TimeGrid::uniform(1 << 12, 1.0);
    ConvergenceReport r = wong_zakai(identity, brownian(g, 0), {4, 16, 64, 256}, 0.02);
    REQUIRE(r.levels.size() == 4);
    CHECK(r.levels[0].second == Catch::Approx(0.31035).margin(1e-4));
    CHECK(r.levels[1].second == Catch::Approx(0.03333).margin(1e-4));
    CHECK(r.levels[2].second == Catch::Approx(0.07597).margin(1e-4));
    CHECK(r.levels[3].second == Catch::Approx(0.06492).margin(1e-4));

    // a compensated jump part without its law is refused
    JumpSpec spec = JumpSpec::uniform_on(3.0, -0.5, 0.8);
    auto s = jump_diffusion(g, 2, 0.0, spec, true);
    REQUIRE_THROWS_AS(wong_zakai(identity, s, {4, 16}, 0.05), std::invalid_argument);
    ConvergenceReport ok = wong_zakai(identity, s, {4, 16}, 0.05, spec);
    CHECK(ok.levels.size() == 2);
}

TEST_CASE("wong zakai ensemble medians decrease") {
    const Functional& identity = fetch("identity");
    GeneratorConfig bm;
    ConvergenceReport r =
        wong_zakai_convergence(identity, bm, 1 << 12, {4, 16, 64, 256}, 100, 0.02, 1.0, 4);
    REQUIRE(r.levels.size() == 4);
    CHECK(r.levels[0].second == Catch::Approx(0.09983).margin(1e-4));
    CHECK(r.levels[1].second == Catch::Approx(0.05794).margin(1e-4));
    CHECK(r.levels[2].second == Catch::Approx(0.02849).margin(1e-4));
    CHECK(r.levels[3].second == Catch::Approx(0.01475).margin(1e-4));
    for (std::size_t i = 1; i < 4; ++i) CHECK(r.levels[i].second < r.levels[i - 1].second);
    CHECK(r.slope < -0.3);
    CHECK(r.pass);

    // identical numbers no matter how many workers
    ConvergenceReport r1 =
        wong_zakai_convergence(identity, bm, 1 << 10, {4, 16}, 16, 0.05, 1.0, 1);
    ConvergenceReport r8 =
        wong_zakai_convergence(identity, bm, 1 << 10, {4, 16}, 16, 0.05, 1.0, 8);
    CHECK(r1.levels == r8.levels);

    const Functional& square = fetch("endpoint:g=sqr");
    ConvergenceReport rq =
        wong_zakai_convergence(square, bm, 1 << 12, {4, 16, 64, 256}, 50, 0.05, 1.0, 4);
    for (std::size_t i = 1; i < 4; ++i) CHECK(rq.levels[i].second < rq.levels[i - 1].second);
    CHECK(rq.levels[3].second < 0.05);
    CHECK(rq.pass);

    REQUIRE_THROWS_AS(wong_zakai_convergence(identity, bm, 64, {}, 4, 0.05),
                      std::invalid_argument);
}

TEST_CASE("proposition one: ramp estimates match the vertical oracle") {
    TimeGrid g = TimeGrid::uniform(64, 1.0);
    std::vector<std::pair<double, CadlagPath>> samples;
    for (int k = 0; k < 15; ++k) {
        auto s = jump_diffusion(g, 100 + k, 0.3, JumpSpec::uniform_on(3.0, -0.8, 0.8), false);
        samples.emplace_back(0.1 + 0.5 * (k / 15.0), s.x);
    }
    PropReport rs = prop1_check(fetch("endpoint:g=sqr"), samples);
    CHECK(rs.max_time_dev < 1e-6);
    CHECK(rs.max_space_dev < 1e-6);
    CHECK(rs.used == samples.size());
    PropReport rr = prop1_check(fetch("running_integral"), samples);
    CHECK(rr.max_time_dev < 1e-6);
    CHECK(rr.max_space_dev < 1e-6);
    // counterexample: no time oracle to compare, ramp slope agrees with f1 = 0
    PropReport rj = prop1_check(fetch("jump:g=id"), samples);
    CHECK(rj.max_time_dev == 0.0);
    CHECK(rj.max_space_dev == 0.0);
}

TEST_CASE("proposition three: bump estimates, hypothesis flagging") {
    TimeGrid g = TimeGrid::uniform(64, 1.0);
    std::vector<std::pair<double, CadlagPath>> samples;
    for (int k = 0; k < 15; ++k) {
        auto s = jump_diffusion(g, 100 + k, 0.3, JumpSpec::uniform_on(3.0, -0.8, 0.8), false);
        samples.emplace_back(0.1 + 0.5 * (k / 15.0), s.x);
    }
    PropReport rs = prop3_check(fetch("endpoint:g=sqr"), samples);
    CHECK(rs.hypothesis_ok);
    CHECK(rs.max_space_dev < 1e-6);
    CHECK(rs.used >= 10);

    PropReport rj = prop3_check(fetch("jump:g=sin"), samples);
    CHECK_FALSE(rj.hypothesis_ok);  // flagged, not asserted
    CHECK(rj.max_space_dev > 0.5);  // and indeed the estimators disagree

    // samples jumping exactly at t are filtered out
    PropReport rf = prop3_check(fetch("endpoint:g=sqr"), {{0.5, path_step()}});
    CHECK(rf.used == 0);
}

TEST_CASE("proposition two quadrature identity") {
    CadlagPath p = p1_on(1 << 12);
    CHECK(prop2_check(fetch("endpoint:g=sqr"), p, 1.0) < 1e-12);
    CHECK(prop2_check(fetch("time"), p, 1.0) < 1e-12);
    CHECK(prop2_check(fetch("running_integral"), p, 1.0) < 1e-12);
    CHECK(prop2_check(fetch("endpoint:g=sqr"), p, 0.7) < 1e-12);
    REQUIRE_THROWS_AS(prop2_check(fetch("endpoint:g=sqr"), path_step(), 1.0),
                      std::domain_error);
    REQUIRE_THROWS_AS(prop2_check(fetch("jump:g=id"), p, 1.0), std::invalid_argument);
}

TEST_CASE("condition v jump defect bounds") {
    auto paths = random_jump_paths(7, 30);
    ConditionVReport sqr = condition_v_report(fetch("endpoint:g=sqr"), paths);
    CHECK(sqr.pass);
    CHECK(sqr.max_ratio == Catch::Approx(1.0).margin(1e-9));  // defect = J^2 for g = x^2
    CHECK(sqr.jumps_seen > 50);
    ConditionVReport sin_r = condition_v_report(fetch("endpoint:g=sin"), paths);
    CHECK(sin_r.pass);
    CHECK(sin_r.max_ratio < 0.5 + 1e-9);
    CHECK(sin_r.max_ratio > 0.4);
    ConditionVReport id_r = condition_v_report(fetch("identity"), paths);
    CHECK(id_r.pass);
    CHECK(id_r.max_ratio < 1e-12);
    ConditionVReport st = condition_v_report(fetch("stieltjes:f=identity"), paths);
    CHECK(st.pass);
    CHECK(st.max_ratio < 1e-9);
    ConditionVReport js = condition_v_report(fetch("jump:g=sin"), paths);
    CHECK(js.pass);  // dupire slope branch
    ConditionVReport ex = condition_v_report(fetch("endpoint:g=exp"), paths);
    CHECK_FALSE(ex.bound.has_value());  // unbounded g'': nothing to assert
    CHECK(ex.pass);
}
