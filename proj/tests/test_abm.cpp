#include "catch_amalgamated.hpp"

#include <vector>

#include "stemflow/abm.hpp"

using namespace stemflow;

namespace {

AbmConfig short_run(std::uint64_t seed, double days = 15.0) {
    AbmConfig c;
    c.seed = seed;
    c.horizon_days = days;
    c.initial.alpha = {20000, 0, 0};
    return c;
}

// No transfers and no affinity change.
AbmConfig null_rates() {
    AbmConfig c;
    c.raw.f_alpha = {0.0, 0.0, 0.0, 0.0};
    c.raw.f_omega = {0.0, 0.0, 0.0, 0.0};
    c.ph_plus_alpha = c.ph_plus_omega = c.affected_alpha = c.affected_omega = {0.0, 0.0, 0.0, 0.0};
    c.raw.d = 1.0;
    c.raw.r = 1.0;
    c.initial.alpha = {0, 0, 0};
    return c;
}

bool same_trace(const PopulationTrace& a, const PopulationTrace& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].t_days != b[i].t_days || a[i].alpha != b[i].alpha || a[i].omega != b[i].omega ||
            a[i].precursor != b[i].precursor || a[i].mature != b[i].mature) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("identical seeds give bit-identical traces", "[abm]") {
    const auto a = simulate_abm(short_run(42));
    const auto b = simulate_abm(short_run(42));
    CHECK(same_trace(a, b));
    CHECK_FALSE(same_trace(a, simulate_abm(short_run(43))));
}

TEST_CASE("null rates: stem cells stay put and Omega only grows by division", "[abm]") {
    for (auto layout : {CycleLayout::SynthesisFirst, CycleLayout::G1Last}) {
        AbmConfig c = null_rates();
        c.layout = layout;
        AgentModel m(c);
        std::vector<AlphaAgent> alpha;
        std::vector<OmegaAgent> omega;
        for (int i = 0; i < 100; ++i) alpha.push_back({0.002 + 0.009 * i, PhStatus::PhMinus});
        for (int i = 0; i < 50; ++i) omega.push_back({0.5, static_cast<std::uint8_t>(i % 49), PhStatus::PhMinus});
        m.set_agents(alpha, omega);
        std::size_t omega_prev = omega.size();
        for (int h = 0; h < 100; ++h) {
            m.step();
            REQUIRE(m.alpha_agents().size() == alpha.size());
            CHECK(m.omega_agents().size() >= omega_prev);
            omega_prev = m.omega_agents().size();
        }
        for (std::size_t i = 0; i < alpha.size(); ++i) CHECK(m.alpha_agents()[i].affinity == alpha[i].affinity);
        for (const auto& ag : m.omega_agents()) CHECK(ag.affinity == 0.5);
        // 100 hours = 2 full cycles plus 2 hours: every starting cell divided
        // twice, and those within 2 hours of the wrap a third time.
        std::size_t expected = 0;
        for (int i = 0; i < 50; ++i) expected += (i % 49) >= 47 ? 8 : 4;
        CHECK(m.omega_agents().size() == expected);
    }
}

TEST_CASE("an Omega cell at the end of its cycle divides into two identical cells", "[abm]") {
    AbmConfig c = null_rates();
    AgentModel m(c);
    m.set_agents({}, {{0.3, 48, PhStatus::PhPlus}});
    m.step();
    REQUIRE(m.omega_agents().size() == 2);
    for (const auto& ag : m.omega_agents()) {
        CHECK(ag.counter == 0);
        CHECK(ag.affinity == 0.3);
        CHECK(ag.status == PhStatus::PhPlus);
    }
}

TEST_CASE("Alpha affinity is capped at the ceiling", "[abm]") {
    AbmConfig c = null_rates();
    c.raw.r = 1.1;
    AgentModel m(c);
    m.set_agents({{1.0, PhStatus::PhMinus}, {0.95, PhStatus::PhMinus}}, {});
    m.step();
    CHECK(m.alpha_agents()[0].affinity == 1.0);
    CHECK(m.alpha_agents()[1].affinity == 1.0);
}

TEST_CASE("differentiated cells double daily until 480 h and die at 672 h", "[abm]") {
    AbmConfig c = null_rates();
    AgentModel m(c);
    std::vector<std::uint64_t> ages(672, 0);
    ages[671] = 5;
    ages[23] = 3;
    ages[480] = 7;
    m.set_differentiated(PhStatus::PhMinus, ages);
    m.step();
    const auto& after = m.differentiated(PhStatus::PhMinus);
    CHECK(after[24] == 6);
    CHECK(after[481] == 7);
    std::uint64_t total = 0;
    for (auto v : after) total += v;
    CHECK(total == 13);
}

TEST_CASE("Omega cells at the affinity floor differentiate", "[abm]") {
    AbmConfig c = null_rates();
    AgentModel m(c);
    m.set_agents({}, {{c.raw.a_min, 5, PhStatus::PhMinus}});
    m.step();
    CHECK(m.omega_agents().empty());
    CHECK(m.differentiated(PhStatus::PhMinus)[0] == 1);
}

TEST_CASE("affinities never leave [a_min, a_max]", "[abm]") {
    const AbmConfig c = short_run(3, 1.0);
    AgentModel m(c);
    for (int h = 0; h < 24 * 12; ++h) {
        m.step();
        if (h % 24 != 0) continue;
        for (const auto& ag : m.alpha_agents()) {
            REQUIRE(ag.affinity >= c.raw.a_min);
            REQUIRE(ag.affinity <= c.raw.a_max);
        }
        for (const auto& ag : m.omega_agents()) {
            REQUIRE(ag.affinity >= c.raw.a_min);
            REQUIRE(ag.affinity <= c.raw.a_max);
        }
    }
}

TEST_CASE("population cap aborts with a resource error", "[abm]") {
    AbmConfig c = short_run(1, 30.0);
    c.max_stem_cells = 25000;
    CHECK_THROWS_AS(simulate_abm(c), ResourceError);
}

TEST_CASE("imatinib mode affects and removes proliferating Ph+ cells", "[abm]") {
    AbmConfig c;
    c.raw = preset_ph_plus();
    c.horizon_days = 10.0;
    c.imatinib = true;
    c.initial.alpha = {0, 0, 0};
    c.initial.omega = {0, 5000, 0};
    const auto trace = simulate_abm(c);
    const auto& last = trace.back();
    CHECK(last.omega[static_cast<std::size_t>(PhStatus::PhPlusAffected)] + last.alpha[2] > 0.0);
    CHECK(same_trace(trace, simulate_abm(c)));

    c.imatinib = false;
    const auto untreated = simulate_abm(c);
    CHECK(untreated.back().omega[2] == 0.0);
    CHECK(untreated.back().alpha[2] == 0.0);
}

TEST_CASE("records follow the cadence and counts stay nonnegative", "[abm]") {
    AbmConfig c = short_run(9, 4.0);
    c.cadence_hours = 12;
    const auto trace = simulate_abm(c);
    REQUIRE(trace.size() == 9);
    for (std::size_t i = 1; i < trace.size(); ++i) {
        CHECK(trace[i].t_days > trace[i - 1].t_days);
        for (std::size_t s = 0; s < kStatusCount; ++s) {
            CHECK(trace[i].alpha[s] >= 0.0);
            CHECK(trace[i].omega[s] >= 0.0);
        }
    }
    c.cadence_hours = 7;
    CHECK_THROWS_AS(simulate_abm(c), InvalidParameter);
}
