#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cpsguard/lmi.hpp"
#include "cpsguard/matcore.hpp"
#include "cpsguard/plant.hpp"
#include "cpsguard/safety.hpp"

namespace cpsguard {

inline constexpr const char* kToolName = "cpsguard";
inline constexpr const char* kToolVersion = "1.0.0";

enum class ModelSource { QuadrupleTank, Matrices };
enum class AttackChoice { None, Covert, Budget };

/// Everything a run depends on. Text form: `key = value` lines, `#`
/// comments, and matrix blocks
///
///     matrix NAME rows cols
///     <rows lines of cols numbers>
///     end
///
/// Recognized matrix names: A B C Q R U (explicit model), W V (LQR weights,
/// both sources), SAFETY (constraint directions as rows, 2n columns).
struct RunConfig {
    ModelSource model = ModelSource::QuadrupleTank;
    std::uint64_t model_seed = 1;  // Q/R draw of the built-in tank
    TankParameters tank;
    double sample_period = 1.0;    // explicit models
    std::map<std::string, Mat> matrices;

    std::size_t window = 10;
    double false_alarm = 0.01;
    double p_d = 0.99;
    double p = 0.99;

    double safety_bound = 30.0;         // box on the physical states when SAFETY is absent
    std::vector<double> safety_bounds;  // one per SAFETY row

    bool p1_scale_auto = true;
    double p1_scale = 1.0;
    double p1_scale_min = 1e-4;
    double p1_scale_max = 10.0;
    std::size_t p1_scale_points = 51;
    LmiOptions lmi;

    std::vector<ResponseSchedule> schedules = {ResponseSchedule::mechanism1(), ResponseSchedule::mechanism2()};

    std::size_t horizon = 100;
    std::size_t trials = 1000;
    std::uint64_t seed = 1;
    AttackChoice attack = AttackChoice::Budget;
    std::vector<double> covert_input = {2.0, 2.0};
    std::vector<double> x0;  // initial estimate; zero when empty
    bool stationary_start = true;
    unsigned threads = 0;
    bool trajectories = false;

    std::size_t sweep_k = 100;
    std::size_t sweep_ta = 40;
    std::size_t sweep_k_max = 200;
    std::vector<double> sweep_p = {0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.995, 0.999};

    std::string out_dir = "out";

    /// Throws ConfigError on out-of-range values or missing matrices.
    void validate() const;
};

/// Throws ConfigError, naming the line, on malformed input or unknown keys.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical text form listing every field; doubles use %.17g so that
/// parse_config(serialize_config(c)) reproduces c exactly.
std::string serialize_config(const RunConfig& config);

/// FNV-1a 64 of the canonical text, as 16 hex digits.
std::string config_hash(const RunConfig& config);

std::string format_double(double v);

} // namespace cpsguard
