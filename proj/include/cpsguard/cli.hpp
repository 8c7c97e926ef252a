#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include "cpsguard/config.hpp"
#include "cpsguard/pipeline.hpp"
#include "cpsguard/sim.hpp"

namespace cpsguard {

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitInfeasible = 2, kExitNumerical = 3 };

struct CliRequest {
    std::string command;  // synthesize | bound | simulate | sweep
    std::optional<std::string> config_path;  // built-in defaults when absent
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::optional<std::size_t> horizon;
    std::string axis;
    bool fresh = false;  // ignore cached certificates
};

/// Config file plus command-line overrides.
RunConfig resolve_config(const CliRequest& req);

/// First line of every emitted file: tool, version, config hash and seed.
std::string provenance_header(const Analysis& a);

/// Reuses <out>/certificates.json when its config hash matches, otherwise
/// synthesizes. Throws NumericalError if the certificates fail verification.
Analysis load_or_analyze(const RunConfig& config, bool fresh, bool* reused = nullptr);

std::string certificates_json(const Analysis& a);
void write_bound_csv(std::ostream& os, const Analysis& a);
/// axis in {Ta, k, percentage, p}; throws ConfigError otherwise.
void write_sweep_csv(std::ostream& os, const Analysis& a, const std::string& axis);
std::string simulation_json(const Analysis& a, const MonteCarloReport& rep, const std::string& schedule);
void write_simulation_csv(std::ostream& os, const Analysis& a, const MonteCarloReport& rep);

int cmd_synthesize(const CliRequest& req, std::ostream& out);
int cmd_bound(const CliRequest& req, std::ostream& out);
int cmd_simulate(const CliRequest& req, std::ostream& out);
int cmd_sweep(const CliRequest& req, std::ostream& out);

/// Dispatches req.command; maps errors onto exit codes, messages to err.
int run_command(const CliRequest& req, std::ostream& out, std::ostream& err);

/// Full command line (CLI11) front end.
int cli_main(int argc, char** argv);

} // namespace cpsguard
