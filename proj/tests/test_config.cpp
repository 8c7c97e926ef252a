#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "cpsguard/config.hpp"
#include "cpsguard/errors.hpp"

using namespace cpsguard;

namespace {

std::string config_path(const std::string& name) { return std::string(CPSGUARD_CONFIG_DIR) + "/" + name; }

// The error message of parse_config(text), or "" when it parses.
std::string parse_error(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

const char* kMatrixModel = R"(
model = matrices
model.sample_period = 0.5
matrix A 2 2
0.9 0.1
0 0.8
end
matrix B 2 1
0.1
1
end
matrix C 1 2
1 0
end
matrix Q 2 2
0.1 0
0 0.3333333333333333
end
matrix R 1 1
0.01
end
matrix U 1 1
0.25
end
matrix SAFETY 2 4
1 0 0 0
0 1 0 0
end
safety.bounds = 5 7.5
)";

} // namespace

TEST_CASE("defaults") {
    const RunConfig c = parse_config("");
    CHECK(c.model == ModelSource::QuadrupleTank);
    CHECK(c.window == 10);
    CHECK(c.false_alarm == 0.01);
    CHECK(c.p_d == 0.99);
    CHECK(c.p == 0.99);
    CHECK(c.horizon == 100);
    CHECK(c.trials == 1000);
    CHECK(c.p1_scale_auto);
    REQUIRE(c.schedules.size() == 2);
    CHECK(c.schedules[0].pattern_string() == "FFTT");
    CHECK(c.schedules[1].pattern_string() == "FFTTTTTTTT");
}

TEST_CASE("shipped configurations") {
    const RunConfig c = load_config(config_path("quadruple_tank.cfg"));
    const TankParameters defaults;
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(c.tank.area[i] == defaults.area[i]);
        CHECK(c.tank.outlet[i] == defaults.outlet[i]);
        CHECK(c.tank.level0[i] == defaults.level0[i]);
    }
    CHECK(c.matrices.at("W") == Mat::identity(4));
    CHECK(c.matrices.at("V") == Mat::identity(2) * 100.0);
    CHECK(c.safety_bound == 30.0);
    CHECK(c.lmi.p2_method == P2Method::MaxDet);
    CHECK(c.attack == AttackChoice::Budget);

    const RunConfig f = load_config(config_path("quadruple_tank_fixed_scale.cfg"));
    CHECK_FALSE(f.p1_scale_auto);
    CHECK(f.p1_scale == 0.03);
    CHECK(f.out_dir != c.out_dir);
    CHECK_THROWS_AS(load_config(config_path("does_not_exist.cfg")), ConfigError);
}

TEST_CASE("values, comments and matrices") {
    const RunConfig c = parse_config(std::string(kMatrixModel) + R"(
# comment line
detector.window = 4   # trailing comment
detector.false_alarm = 0.05
lmi.p1_scale = 0.5
lmi.p2_method = scaling
lmi.alpha3_ratios = 0 1 10
schedule.alt = TF
sim.attack = covert
sim.covert_input = 1.5
sim.stationary_start = false
sim.x0 = 1 -2
sweep.p = 0.5 0.9
output.dir = results
)");
    CHECK(c.model == ModelSource::Matrices);
    CHECK(c.sample_period == 0.5);
    CHECK(c.matrices.at("A") == Mat{{0.9, 0.1}, {0.0, 0.8}});
    CHECK(c.matrices.at("Q")(1, 1) == 0.3333333333333333);
    CHECK(c.matrices.at("SAFETY").rows() == 2);
    CHECK(c.safety_bounds == std::vector<double>{5.0, 7.5});
    CHECK(c.window == 4);
    CHECK(c.false_alarm == 0.05);
    CHECK_FALSE(c.p1_scale_auto);
    CHECK(c.p1_scale == 0.5);
    CHECK(c.lmi.p2_method == P2Method::Scaling);
    CHECK(c.lmi.alpha3_ratios == std::vector<double>{0.0, 1.0, 10.0});
    REQUIRE(c.schedules.size() == 1);
    CHECK(c.schedules[0].name == "alt");
    CHECK(c.attack == AttackChoice::Covert);
    CHECK(c.covert_input == std::vector<double>{1.5});
    CHECK_FALSE(c.stationary_start);
    CHECK(c.x0 == std::vector<double>{1.0, -2.0});
    CHECK(c.sweep_p == std::vector<double>{0.5, 0.9});
    CHECK(c.out_dir == "results");
}

TEST_CASE("schedules") {
    CHECK(parse_config("schedules = none").schedules.empty());
    const RunConfig c = parse_config("schedule.a = TT\nschedule.b = FT\n");
    REQUIRE(c.schedules.size() == 2);
    CHECK(c.schedules[1].name == "b");
    CHECK(parse_config("schedules = none\nschedule.x = T").schedules.size() == 1);
}

TEST_CASE("round trip through the canonical form") {
    for (const std::string& text : {std::string(""), std::string(kMatrixModel),
                                    std::string("lmi.p1_scale = 0.1\nsim.seed = 18446744073709551615\n"
                                                "safety.bound = 0.30000000000000004\nschedules = none\n")}) {
        const RunConfig a = parse_config(text);
        const std::string canon = serialize_config(a);
        const RunConfig b = parse_config(canon);
        CHECK(serialize_config(b) == canon);
        CHECK(config_hash(a) == config_hash(b));
        CHECK(b.matrices.size() == a.matrices.size());
        for (const auto& [name, m] : a.matrices) CHECK(b.matrices.at(name) == m);
        CHECK(b.seed == a.seed);
        CHECK(b.safety_bound == a.safety_bound);
        CHECK(b.p1_scale == a.p1_scale);
        CHECK(b.schedules.size() == a.schedules.size());
    }
    CHECK(parse_config("sim.seed = 18446744073709551615").seed == 18446744073709551615ull);
}

TEST_CASE("hash") {
    const std::string h = config_hash(parse_config(""));
    CHECK(h.size() == 16);
    CHECK(h.find_first_not_of("0123456789abcdef") == std::string::npos);
    // Formatting and comments do not matter; values do.
    CHECK(config_hash(parse_config("# note\n  sim.trials   =  1000  \n")) == h);
    CHECK(config_hash(parse_config("sim.trials = 999")) != h);
    CHECK(config_hash(parse_config("sim.seed = 2")) != h);
}

TEST_CASE("errors name the line") {
    CHECK(contains(parse_error("\n\nbogus.key = 1\n"), "line 3"));
    CHECK(contains(parse_error("\n\nbogus.key = 1\n"), "bogus.key"));
    CHECK(contains(parse_error("sim.trials = ten"), "line 1"));
    CHECK(contains(parse_error("sim.trials = -3"), "line 1"));
    CHECK(contains(parse_error("model = pendulum"), "line 1"));
    CHECK(contains(parse_error("sim.attack = loud"), "line 1"));
    CHECK(contains(parse_error("just words"), "line 1"));
    CHECK(contains(parse_error("tank.area = 1 2 3"), "line 1"));
    CHECK(contains(parse_error("schedule.x = TXF"), "line 1"));
    CHECK(contains(parse_error("sim.stationary_start = maybe"), "line 1"));
    CHECK(contains(parse_error("matrix A 2 2\n1 2\n3\nend"), "line 3"));
    CHECK(contains(parse_error("matrix A 2 2\n1 2\n3 4\n"), "missing 'end'"));
    CHECK(contains(parse_error("matrix A 2 2\n1 2\nend"), "rows"));
    CHECK(contains(parse_error("\nmatrix Z 1 1\n1\nend"), "line 2"));
    CHECK(contains(parse_error("matrix A 0 2\nend"), "line 1"));
}

TEST_CASE("validation") {
    CHECK_FALSE(parse_error("stealth.p_d = 1.5").empty());
    CHECK_FALSE(parse_error("safety.p = 0").empty());
    CHECK_FALSE(parse_error("detector.false_alarm = 1").empty());
    CHECK_FALSE(parse_error("detector.window = 0").empty());
    CHECK_FALSE(parse_error("sim.horizon = 0").empty());
    CHECK_FALSE(parse_error("sim.trials = 0").empty());
    CHECK_FALSE(parse_error("lmi.p1_scale = 0").empty());
    CHECK_FALSE(parse_error("sweep.p = 0.5 1").empty());
    CHECK_FALSE(parse_error("safety.bound = -1").empty());
    CHECK(contains(parse_error("model = matrices"), "matrix A"));
    CHECK(contains(parse_error("matrix SAFETY 1 8\n1 0 0 0 0 0 0 0\nend\n"), "safety.bounds"));
}
