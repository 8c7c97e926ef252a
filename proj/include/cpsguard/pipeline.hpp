#pragma once

#include <string>
#include <vector>

#include "cpsguard/config.hpp"
#include "cpsguard/lmi.hpp"
#include "cpsguard/plant.hpp"
#include "cpsguard/safety.hpp"
#include "cpsguard/sim.hpp"
#include "cpsguard/stealth.hpp"

namespace cpsguard {

/// Plant, controller and detector for a configuration.
struct LoopModel {
    PlantModel model;
    Mat W, V;
    LqgDesign design;
    AugmentedSystem aug;
    DetectorConfig detector;
    StealthBudget budget;
    SafetySpec spec;
};

/// Errors are rethrown with the failing module's name prefixed, keeping
/// their exit-code family.
LoopModel build_loop(const RunConfig& config);

struct ScaleCandidate {
    double scale = 0.0;
    bool feasible = false;
    double gamma_a = 0.0;
    double ta_bound = 0.0;  // unfloored bound at the reference horizon
};

struct Certificates {
    RateCertificate rate;
    InvarianceCertificate inv;
    CertificateReport report;
    double p1_scale = 1.0;
    std::vector<ScaleCandidate> scale_scan;  // empty for a fixed scale
};

/// P1 scale selection. For a fixed scale, runs the rate synthesis once.
/// Otherwise scans scales log-uniformly and keeps the one with the largest
/// unfloored Ta bound at `horizon`, ties going to the larger scale.
Certificates synthesize_certificates(const RunConfig& config, const LoopModel& loop);

struct Analysis {
    RunConfig config;
    std::string hash;
    LoopModel loop;
    Certificates certs;
};

Analysis analyze(const RunConfig& config);

/// Initial condition check: [x0; 0] inside E2(p), which together with
/// 0 in E1(0,0) places it in the safe set at k = 0.
bool initial_condition_ok(const Analysis& a);

SimSetup make_sim_setup(const Analysis& a);
AttackStrategy make_strategy(const Analysis& a);

} // namespace cpsguard
